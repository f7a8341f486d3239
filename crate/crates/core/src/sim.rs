//! Seeded Monte-Carlo BER/SER experiments over an SNR sweep.
//!
//! Each frame draws fresh bits, a fresh channel realization and fresh noise
//! from its own keyed stream ([`crate::rng::frame_rng`]), runs the selected
//! detector and tallies bit and symbol errors against the transmitted truth.
//! A point stops once it has both `min_frames` frames and `min_bit_errors`
//! bit errors, or when `max_frames` is reached; a point that exhausts its
//! frame budget short of the error target is flagged, not dropped.
//!
//! Frames are processed in fixed batches. Within a batch the per-frame
//! tallies may be computed in parallel, but they are folded in frame order
//! and the stop rule is applied exactly where a sequential loop would have
//! stopped, so the results are bit-identical for any worker count.

use std::time::Instant;

use rand::Rng;

use crate::channel::{apply_dd, draw_channel, NoiseModel};
use crate::constellation::Constellation;
use crate::detector::{detect_hybrid, detect_map, DetectorConfig};
use crate::frame::DdFrame;
use crate::oracle::exact_marginals;
use crate::rng::frame_rng;
use crate::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Frames per scheduling batch; fixed so batch boundaries never depend on
/// the worker count.
const BATCH: u64 = 64;

/// Which detector the harness runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    /// Full interferer enumeration.
    Map,
    /// Hybrid enumeration/cancellation with `l_map` enumerated interferers.
    Hybrid,
    /// Gaussian-approximation message passing: hybrid with `L = 0`
    /// (conventionally run with damping 0.7).
    Mp,
    /// Exact exhaustive reference; only valid for tiny frames.
    Oracle,
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            DetectorKind::Map => "map",
            DetectorKind::Hybrid => "hybrid",
            DetectorKind::Mp => "mp",
            DetectorKind::Oracle => "oracle",
        };
        f.write_str(name)
    }
}

/// Full description of one Monte-Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub l_max: usize,
    pub k_max: usize,
    /// Es/N0 points in dB, strictly increasing.
    pub snr_db_list: Vec<f64>,
    pub detector: DetectorKind,
    pub l_map: usize,
    pub iters: usize,
    pub damping: f64,
    pub min_frames: u64,
    pub min_bit_errors: u64,
    pub max_frames: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.m < 1 {
            return Err(Error::Config("grid dimensions must be at least 1".into()));
        }
        if self.p < 1 {
            return Err(Error::Config("need at least one path".into()));
        }
        if self.l_max >= self.m || self.k_max >= self.n {
            return Err(Error::Config(format!(
                "shift bounds (l_max={}, k_max={}) must be inside the {}x{} grid",
                self.l_max, self.k_max, self.n, self.m
            )));
        }
        let capacity = (self.l_max + 1) * (2 * self.k_max + 1).min(self.n);
        if self.p > capacity {
            return Err(Error::Config(format!(
                "cannot place {} paths on {capacity} distinct taps",
                self.p
            )));
        }
        if self.snr_db_list.is_empty() {
            return Err(Error::Config("SNR list is empty".into()));
        }
        if self.snr_db_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("SNR list must be strictly increasing".into()));
        }
        if self.min_bit_errors < 1 {
            return Err(Error::Config("min_bit_errors must be at least 1".into()));
        }
        if self.min_frames < 1 || self.max_frames < self.min_frames {
            return Err(Error::Config(
                "frame budget must satisfy max_frames >= min_frames >= 1".into(),
            ));
        }
        if self.iters < 1 {
            return Err(Error::Config("iters must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!(
                "damping must be in (0, 1], got {}",
                self.damping
            )));
        }
        if self.detector == DetectorKind::Oracle && self.p > 1 {
            let bits = self.n * self.m * 2;
            if bits > 20 {
                return Err(Error::Config(format!(
                    "oracle detector needs N*M*log2(|A|) <= 20 for multi-path \
                     channels, got {bits}"
                )));
            }
        }
        Ok(())
    }

    /// Interferers the hybrid detector will actually enumerate.
    pub fn l_effective(&self) -> usize {
        match self.detector {
            DetectorKind::Map | DetectorKind::Oracle => self.p - 1,
            DetectorKind::Hybrid => self.l_map.min(self.p - 1),
            DetectorKind::Mp => 0,
        }
    }
}

/// Execution knobs that do not affect results (except `count_ops`, which
/// adds a counter column).
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads: 0 = library default, 1 = strictly sequential.
    pub threads: usize,
    /// Tally detector likelihood evaluations.
    pub count_ops: bool,
}

/// Accumulated results for one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub snr_db: f64,
    pub frames: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub symbol_errors: u64,
    pub ser: f64,
    pub avg_iters: f64,
    pub wall_ms: u64,
    /// True when the frame budget ran out before `min_bit_errors`.
    pub insufficient_errors: bool,
    /// Total likelihood evaluations across frames, when requested.
    pub likelihood_evals: Option<u64>,
}

/// A full sweep: one row per SNR point, plus the configuration that
/// produced it.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub config: SimConfig,
    pub points: Vec<PointResult>,
}

#[derive(Debug, Default, Clone, Copy)]
struct FrameTally {
    bits: u64,
    bit_errors: u64,
    symbol_errors: u64,
    iterations: u64,
    evals: u64,
}

/// Runs every SNR point in order.
pub fn run_sweep(cfg: &SimConfig, opts: &RunOptions) -> Result<SimResult> {
    cfg.validate()?;
    with_workers(opts, || {
        let points = (0..cfg.snr_db_list.len())
            .map(|i| point_inner(cfg, i, opts))
            .collect::<Result<Vec<_>>>()?;
        Ok(SimResult {
            config: cfg.clone(),
            points,
        })
    })
}

/// Runs a single SNR point (by index into `snr_db_list`).
pub fn run_point(cfg: &SimConfig, snr_index: usize, opts: &RunOptions) -> Result<PointResult> {
    cfg.validate()?;
    if snr_index >= cfg.snr_db_list.len() {
        return Err(Error::Config(format!(
            "SNR index {snr_index} out of range for {} points",
            cfg.snr_db_list.len()
        )));
    }
    with_workers(opts, || point_inner(cfg, snr_index, opts))
}

#[cfg(feature = "parallel")]
fn with_workers<T>(opts: &RunOptions, body: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    if opts.threads == 1 {
        return body();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(body)
}

#[cfg(not(feature = "parallel"))]
fn with_workers<T>(opts: &RunOptions, body: impl FnOnce() -> Result<T>) -> Result<T> {
    let _ = opts;
    body()
}

fn point_inner(cfg: &SimConfig, snr_index: usize, opts: &RunOptions) -> Result<PointResult> {
    let constellation = Constellation::qpsk();
    let snr_db = cfg.snr_db_list[snr_index];
    let n0 = 10f64.powf(-snr_db / 10.0);
    let detector_cfg = DetectorConfig {
        max_iters: cfg.iters,
        damping: cfg.damping,
        l_map: cfg.l_effective(),
        early_stop: false,
    };

    let start = Instant::now();
    let mut total = FrameTally::default();
    let mut frames = 0u64;
    let mut done = false;
    while !done && frames < cfg.max_frames {
        let end = (frames + BATCH).min(cfg.max_frames);
        let batch = run_batch(cfg, &constellation, &detector_cfg, n0, snr_index, frames, end, opts)?;
        for tally in batch {
            total.bits += tally.bits;
            total.bit_errors += tally.bit_errors;
            total.symbol_errors += tally.symbol_errors;
            total.iterations += tally.iterations;
            total.evals += tally.evals;
            frames += 1;
            if frames >= cfg.min_frames && total.bit_errors >= cfg.min_bit_errors {
                done = true;
                break;
            }
        }
    }

    let symbols = frames * (cfg.n as u64) * (cfg.m as u64);
    Ok(PointResult {
        snr_db,
        frames,
        bits: total.bits,
        bit_errors: total.bit_errors,
        ber: total.bit_errors as f64 / total.bits as f64,
        symbol_errors: total.symbol_errors,
        ser: total.symbol_errors as f64 / symbols as f64,
        avg_iters: total.iterations as f64 / frames as f64,
        wall_ms: start.elapsed().as_millis() as u64,
        insufficient_errors: total.bit_errors < cfg.min_bit_errors,
        likelihood_evals: opts.count_ops.then_some(total.evals),
    })
}

#[allow(clippy::too_many_arguments)]
fn run_batch(
    cfg: &SimConfig,
    constellation: &Constellation,
    detector_cfg: &DetectorConfig,
    n0: f64,
    snr_index: usize,
    start: u64,
    end: u64,
    opts: &RunOptions,
) -> Result<Vec<FrameTally>> {
    let frame = |frame_index: u64| run_frame(cfg, constellation, detector_cfg, n0, snr_index, frame_index);
    #[cfg(feature = "parallel")]
    {
        if opts.threads != 1 {
            return (start..end).into_par_iter().map(frame).collect();
        }
    }
    let _ = opts;
    (start..end).map(frame).collect()
}

fn run_frame(
    cfg: &SimConfig,
    constellation: &Constellation,
    detector_cfg: &DetectorConfig,
    n0: f64,
    snr_index: usize,
    frame_index: u64,
) -> Result<FrameTally> {
    let mut rng = frame_rng(cfg.seed, snr_index as u32, frame_index);
    let cells = cfg.n * cfg.m;
    let bits_per_frame = cells * constellation.bits_per_symbol();

    let bits: Vec<u8> = (0..bits_per_frame).map(|_| rng.random_range(0..=1u8)).collect();
    let tx_indices = constellation.map_bits_to_indices(&bits)?;
    let values = tx_indices.iter().map(|&i| constellation.point(i)).collect();
    let x = DdFrame::from_values(cfg.n, cfg.m, values)?;

    let ch = draw_channel(cfg.p, cfg.l_max, cfg.k_max, cfg.n, cfg.m, &mut rng)?;
    let noise = NoiseModel::new(n0)?;
    let y = apply_dd(&x, &ch, Some(&noise), &mut rng)?;

    let (hard_indices, iterations, evals) = match cfg.detector {
        DetectorKind::Map => {
            let out = detect_map(&y, &ch, constellation, n0, detector_cfg)?;
            (out.hard_indices, out.iterations as u64, out.likelihood_evals)
        }
        DetectorKind::Hybrid | DetectorKind::Mp => {
            let out = detect_hybrid(&y, &ch, constellation, n0, detector_cfg)?;
            (out.hard_indices, out.iterations as u64, out.likelihood_evals)
        }
        DetectorKind::Oracle => {
            let out = exact_marginals(&y, &ch, constellation, n0)?;
            (out.marginal_argmax(), 1, 0)
        }
    };

    let mut bit_errors = 0u64;
    let mut symbol_errors = 0u64;
    for (&tx, &rx) in tx_indices.iter().zip(&hard_indices) {
        if tx != rx {
            symbol_errors += 1;
            bit_errors += constellation
                .bit_label(tx)
                .iter()
                .zip(constellation.bit_label(rx))
                .filter(|(a, b)| a != b)
                .count() as u64;
        }
    }
    Ok(FrameTally {
        bits: bits_per_frame as u64,
        bit_errors,
        symbol_errors,
        iterations,
        evals,
    })
}
