//! Flag parsing and config resolution.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use clap::{Parser, ValueEnum};
use otfs_core::sim::{DetectorKind, RunOptions, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DetectorArg {
    /// Full interferer enumeration.
    Map,
    /// Hybrid enumeration/cancellation; needs --L.
    Hybrid,
    /// Gaussian-approximation message passing (hybrid with L=0, damping 0.7).
    Mp,
    /// Exact exhaustive reference (tiny frames only).
    Oracle,
}

impl DetectorArg {
    fn kind(self) -> DetectorKind {
        match self {
            DetectorArg::Map => DetectorKind::Map,
            DetectorArg::Hybrid => DetectorKind::Hybrid,
            DetectorArg::Mp => DetectorKind::Mp,
            DetectorArg::Oracle => DetectorKind::Oracle,
        }
    }
}

/// Monte-Carlo BER sweeps for delay-Doppler modulation detectors.
#[derive(Debug, Parser)]
#[command(name = "otfs-sim", version)]
pub struct Args {
    /// Doppler bins (grid rows).
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Delay bins (grid columns).
    #[arg(long, default_value_t = 150)]
    pub m: usize,
    /// Channel paths per realization.
    #[arg(long, default_value_t = 4)]
    pub paths: usize,
    /// Largest delay index.
    #[arg(long, default_value_t = 10)]
    pub lmax: usize,
    /// Largest absolute Doppler index.
    #[arg(long, default_value_t = 6)]
    pub kmax: usize,
    /// Es/N0 points in dB: "start:step:stop" or a comma list.
    #[arg(long)]
    pub snr: String,
    /// Detector to run.
    #[arg(long, value_enum)]
    pub detector: DetectorArg,
    /// Interferers the hybrid detector enumerates exactly.
    #[arg(long = "L")]
    pub l: Option<usize>,
    /// Message-passing iterations.
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    /// Message damping in (0, 1]; defaults to 1.0 (0.7 for mp).
    #[arg(long)]
    pub damping: Option<f64>,
    /// Minimum frames per SNR point.
    #[arg(long = "frames", default_value_t = 10)]
    pub min_frames: u64,
    /// Bit errors to collect before a point may stop.
    #[arg(long = "min-errors", default_value_t = 200)]
    pub min_errors: u64,
    /// Hard frame budget per SNR point.
    #[arg(long = "max-frames", default_value_t = 10_000)]
    pub max_frames: u64,
    /// Run seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Modulation alphabet.
    #[arg(long = "mod", default_value = "qpsk")]
    pub modulation: String,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Add a per-frame likelihood-evaluations column.
    #[arg(long = "count-ops", default_value_t = false)]
    pub count_ops: bool,
}

/// A fully validated run description.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub sim: SimConfig,
    pub opts: RunOptions,
    pub modulation: String,
    pub warnings: Vec<String>,
}

/// Expands an SNR specification: either `start:step:stop` (inclusive) or a
/// comma-separated list.
pub fn parse_snr_list(spec: &str) -> Result<Vec<f64>> {
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| anyhow!("invalid SNR value '{s}'"))
    };
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            bail!("SNR range must be start:step:stop, got '{spec}'");
        }
        let start = parse(parts[0])?;
        let step = parse(parts[1])?;
        let stop = parse(parts[2])?;
        if step == 0.0 {
            bail!("SNR range step must be nonzero");
        }
        if (stop - start) * step < 0.0 {
            bail!("SNR range step {step} never reaches {stop} from {start}");
        }
        let mut values = Vec::new();
        let mut v = start;
        let slack = step.abs() * 1e-9;
        while (step > 0.0 && v <= stop + slack) || (step < 0.0 && v >= stop - slack) {
            values.push(v);
            v += step;
        }
        Ok(values)
    } else {
        spec.split(',').map(parse).collect()
    }
}

/// Validates flags and the thread cap into a runnable configuration.
/// `threads` comes from the `OTFS_THREADS` environment variable (0 = auto).
pub fn resolve(args: &Args, threads: usize) -> Result<Resolved> {
    if args.modulation != "qpsk" {
        bail!(
            "unsupported --mod '{}'; qpsk is the only available modulation",
            args.modulation
        );
    }
    let mut warnings = Vec::new();
    let l_map = match args.detector {
        DetectorArg::Hybrid => args
            .l
            .ok_or_else(|| anyhow!("hybrid requires --L (number of enumerated interferers)"))?,
        _ => {
            if args.l.is_some() {
                warnings.push(format!(
                    "--L is ignored by the {} detector",
                    match args.detector {
                        DetectorArg::Map => "map",
                        DetectorArg::Mp => "mp",
                        DetectorArg::Oracle => "oracle",
                        DetectorArg::Hybrid => unreachable!(),
                    }
                ));
            }
            args.l.unwrap_or(0)
        }
    };
    if args.detector == DetectorArg::Hybrid && args.paths >= 1 && l_map > args.paths - 1 {
        warnings.push(format!(
            "--L {} exceeds P-1 = {}; clamping",
            l_map,
            args.paths - 1
        ));
    }
    let damping = args.damping.unwrap_or(match args.detector {
        DetectorArg::Mp => 0.7,
        _ => 1.0,
    });

    let mut snr_db_list = parse_snr_list(&args.snr)?;
    snr_db_list.sort_by(|a, b| a.partial_cmp(b).expect("SNR values are finite"));
    snr_db_list.dedup();

    let sim = SimConfig {
        n: args.n,
        m: args.m,
        p: args.paths,
        l_max: args.lmax,
        k_max: args.kmax,
        snr_db_list,
        detector: args.detector.kind(),
        l_map,
        iters: args.iters,
        damping,
        min_frames: args.min_frames,
        min_bit_errors: args.min_errors,
        max_frames: args.max_frames,
        seed: args.seed,
    };
    sim.validate()?;
    Ok(Resolved {
        sim,
        opts: RunOptions {
            threads,
            count_ops: args.count_ops,
        },
        modulation: args.modulation.clone(),
        warnings,
    })
}
