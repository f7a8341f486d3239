//! Iterative symbol-wise detectors on the delay-Doppler factor graph.
//!
//! Two detectors share one iteration engine:
//!
//! * [`detect_map`] enumerates every combination of the `P - 1` interfering
//!   symbols at each observation, which makes its cost exponential in the
//!   number of paths.
//! * [`detect_hybrid`] splits the interferers at each observation into the
//!   `L` strongest (enumerated exactly, as in `detect_map`) and the rest
//!   (cancelled by their estimated means, with their residual variance
//!   absorbed into the noise level). Its cost is exponential only in `L`;
//!   `L = 0` is the classic Gaussian-approximation message passer and
//!   `L = P - 1` reproduces `detect_map`.
//!
//! Both run a flooding schedule: all function-to-variable messages are
//! recomputed from the previous variable-to-function messages, then all
//! variable-to-function messages are refreshed, then posteriors are fused.
//! Updates touch disjoint slots, so node updates within a phase run in
//! parallel (rayon) without changing any result.

pub mod graph;
pub mod hybrid;
pub mod map;
pub mod messages;

pub use graph::{InterfererSlot, NeighborIndex};
pub use hybrid::{detect_hybrid, likelihood_pic, partition_interferers, pic_moments, Partition};
pub use map::{detect_map, likelihood_full};
pub use messages::{extrinsic_product, normalize_floored, MessageState, PROB_FLOOR};

use num_complex::Complex64;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::channel::{wrap, ChannelRealization};
use crate::constellation::Constellation;
use crate::frame::DdFrame;
use crate::{Error, Result};

/// Iteration controls shared by all detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Number of message-passing iterations (at least 1).
    pub max_iters: usize,
    /// Convex blend weight for fresh function-to-variable messages, in
    /// `(0, 1]`; 1 disables damping.
    pub damping: f64,
    /// How many interferers the hybrid detector enumerates exactly; values
    /// above `P - 1` clamp. Ignored by [`detect_map`].
    pub l_map: usize,
    /// Stop once hard decisions repeat between iterations.
    pub early_stop: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            max_iters: 10,
            damping: 1.0,
            l_map: 0,
            early_stop: false,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!(
                "damping must be in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }

    pub fn with_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    pub fn with_l_map(mut self, l_map: usize) -> Self {
        self.l_map = l_map;
        self
    }

    pub fn with_early_stop(mut self, early_stop: bool) -> Self {
        self.early_stop = early_stop;
        self
    }
}

/// Everything a detection run produces.
#[derive(Debug, Clone)]
pub struct DetectorOutput {
    /// Final message state, including the fused posteriors.
    pub messages: MessageState,
    /// Hard-decision constellation indices, column-major over cells.
    pub hard_indices: Vec<usize>,
    /// Hard decisions as a grid of constellation points.
    pub hard_frame: DdFrame,
    /// Iterations actually executed.
    pub iterations: usize,
    /// Exact count of residual-likelihood evaluations performed.
    pub likelihood_evals: u64,
    /// Interferers enumerated exactly per observation (after clamping).
    pub l_effective: usize,
}

impl DetectorOutput {
    pub fn posterior_at(&self, k: usize, l: usize) -> &[f64] {
        self.messages.posterior_at(k, l)
    }

    pub fn hard_index(&self, k: usize, l: usize) -> usize {
        self.hard_indices[l * self.hard_frame.n_doppler() + k]
    }
}

// ---------------------------------------------------------------------------
// Shared engine
// ---------------------------------------------------------------------------

/// One interferer slot prepared for the hot loop: relative shifts plus the
/// per-symbol contribution table `terms[s] = gain * point[s]`.
pub(crate) struct Slot {
    pub path: usize,
    pub d_doppler: isize,
    pub d_delay: isize,
    pub terms: Vec<Complex64>,
}

pub(crate) fn build_slot(info: &InterfererSlot, gain: Complex64, points: &[Complex64]) -> Slot {
    Slot {
        path: info.path,
        d_doppler: info.d_doppler,
        d_delay: info.d_delay,
        terms: points.iter().map(|&pt| gain * pt).collect(),
    }
}

/// Reusable per-worker buffers for node updates.
pub(crate) struct Scratch {
    digits: Vec<usize>,
    pub bases: Vec<usize>,
    exps: Vec<f64>,
    pmsg: Vec<f64>,
    pub fresh: Vec<f64>,
}

impl Scratch {
    pub fn new(q: usize) -> Self {
        Self {
            digits: Vec::new(),
            bases: Vec::new(),
            exps: Vec::new(),
            pmsg: Vec::new(),
            fresh: vec![0.0; q],
        }
    }
}

/// Sums, over every combination of the slot symbols, the Gaussian residual
/// weight times the product of the senders' message probabilities, per
/// hypothesis of the observed symbol. Exponents are rescaled by their
/// maximum before exponentiation so the result never collapses to all
/// zeros at high SNR.
///
/// `scratch.bases[j]` must hold the flat offset of slot `j`'s message in
/// `v2f`. The unnormalized scores land in `scratch.fresh`; the return value
/// is the number of residual evaluations (`q^slots * q`).
pub(crate) fn accumulate_node(
    y_centered: Complex64,
    denom: f64,
    hyp_terms: &[Complex64],
    slots: &[Slot],
    v2f: &[f64],
    q: usize,
    scratch: &mut Scratch,
) -> u64 {
    let t = slots.len();
    let combos = q.pow(t as u32);
    scratch.digits.clear();
    scratch.digits.resize(t, 0);
    scratch.exps.resize(combos * q, 0.0);
    scratch.pmsg.resize(combos, 0.0);

    let mut max_exp = f64::NEG_INFINITY;
    for ci in 0..combos {
        let mut interference = Complex64::new(0.0, 0.0);
        let mut pm = 1.0;
        for (j, &d) in scratch.digits.iter().enumerate() {
            interference += slots[j].terms[d];
            pm *= v2f[scratch.bases[j] + d];
        }
        scratch.pmsg[ci] = pm;
        let base = y_centered - interference;
        for (s, &h) in hyp_terms.iter().enumerate() {
            let r = base - h;
            let e = -r.norm_sqr() / denom;
            scratch.exps[ci * q + s] = e;
            if e > max_exp {
                max_exp = e;
            }
        }
        for d in scratch.digits.iter_mut() {
            *d += 1;
            if *d < q {
                break;
            }
            *d = 0;
        }
    }

    for f in scratch.fresh.iter_mut() {
        *f = 0.0;
    }
    for ci in 0..combos {
        let pm = scratch.pmsg[ci];
        let row = &scratch.exps[ci * q..(ci + 1) * q];
        for (f, &e) in scratch.fresh.iter_mut().zip(row) {
            *f += pm * (e - max_exp).exp();
        }
    }
    (combos * q) as u64
}

/// A detector-specific function-node update: fill `scratch.fresh` with
/// unnormalized scores for observation `(k, l, i)` and report how many
/// residual likelihoods were evaluated.
pub(crate) trait NodeKernel: Sync {
    fn update(&self, k: usize, l: usize, i: usize, v2f: &[f64], scratch: &mut Scratch) -> u64;
}

pub(crate) fn validate_inputs(
    y: &DdFrame,
    ch: &ChannelRealization,
    c: &Constellation,
    n0: f64,
    cfg: &DetectorConfig,
    enumerated: usize,
) -> Result<()> {
    cfg.validate()?;
    if !(n0 > 0.0) {
        return Err(Error::Config(format!("noise level must be positive, got {n0}")));
    }
    if y.n_doppler() != ch.n_doppler || y.m_delay() != ch.m_delay {
        return Err(Error::DimensionMismatch(format!(
            "received frame is {}x{} but channel was drawn for {}x{}",
            y.n_doppler(),
            y.m_delay(),
            ch.n_doppler,
            ch.m_delay
        )));
    }
    let bits = (enumerated as u32 + 1) * c.size().trailing_zeros();
    if bits > 30 {
        return Err(Error::Config(format!(
            "enumerating {} interferers over {} symbols is too large",
            enumerated,
            c.size()
        )));
    }
    Ok(())
}

/// Runs the flooding iteration loop with the given node kernel.
pub(crate) fn run_engine<K: NodeKernel>(
    y: &DdFrame,
    ch: &ChannelRealization,
    c: &Constellation,
    cfg: &DetectorConfig,
    kernel: &K,
    l_effective: usize,
) -> DetectorOutput {
    let n = y.n_doppler();
    let m = y.m_delay();
    let p = ch.num_paths();
    let q = c.size();
    let mut prior = c.priors().to_vec();
    normalize_floored(&mut prior);

    let mut state = MessageState::new(n, m, p, c);
    let cells = n * m;
    let mut hard = vec![0usize; cells];
    let mut prev_hard = vec![usize::MAX; cells];
    let mut evals = 0u64;
    let mut iterations = 0;

    for iter in 1..=cfg.max_iters {
        iterations = iter;
        evals += f2v_phase(&mut state, kernel, cfg.damping, n, p, q);
        v2f_phase(&mut state, &prior, p, q);
        posterior_phase(&mut state, &prior, p, q);
        hard_decisions(&state.posterior, q, &mut hard);
        if cfg.early_stop && iter > 1 && hard == prev_hard {
            break;
        }
        prev_hard.copy_from_slice(&hard);
    }

    let mut hard_frame = DdFrame::zeros(n, m);
    for (cell, &idx) in hard.iter().enumerate() {
        hard_frame.values_mut()[cell] = c.point(idx);
    }
    DetectorOutput {
        messages: state,
        hard_indices: hard,
        hard_frame,
        iterations,
        likelihood_evals: evals,
        l_effective,
    }
}

fn f2v_phase<K: NodeKernel>(
    state: &mut MessageState,
    kernel: &K,
    damping: f64,
    n: usize,
    p: usize,
    q: usize,
) -> u64 {
    let v2f = &state.v2f;
    let f2v = &mut state.f2v;
    let node_update = |scratch: &mut Scratch, (node, chunk): (usize, &mut [f64])| -> u64 {
        let i = node % p;
        let cell = node / p;
        let k = cell % n;
        let l = cell / n;
        let e = kernel.update(k, l, i, v2f, scratch);
        normalize_floored(&mut scratch.fresh);
        for (out, &f) in chunk.iter_mut().zip(&scratch.fresh) {
            *out = damping * f + (1.0 - damping) * *out;
        }
        e
    };

    #[cfg(feature = "parallel")]
    {
        f2v.par_chunks_mut(q)
            .enumerate()
            .map_init(|| Scratch::new(q), node_update)
            .sum()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut scratch = Scratch::new(q);
        f2v.chunks_mut(q)
            .enumerate()
            .map(|item| node_update(&mut scratch, item))
            .sum()
    }
}

fn v2f_phase(state: &mut MessageState, prior: &[f64], p: usize, q: usize) {
    let f2v = &state.f2v;
    let v2f = &mut state.v2f;
    let node_update = |(node, chunk): (usize, &mut [f64])| {
        let i = node % p;
        let cell = node / p;
        let base = cell * p * q;
        let msgs = (0..p)
            .filter(|&j| j != i)
            .map(|j| &f2v[base + j * q..base + (j + 1) * q]);
        extrinsic_product(msgs, prior, chunk);
    };

    #[cfg(feature = "parallel")]
    v2f.par_chunks_mut(q).enumerate().for_each(node_update);
    #[cfg(not(feature = "parallel"))]
    v2f.chunks_mut(q).enumerate().for_each(node_update);
}

fn posterior_phase(state: &mut MessageState, prior: &[f64], p: usize, q: usize) {
    let f2v = &state.f2v;
    let posterior = &mut state.posterior;
    let cell_update = |(cell, chunk): (usize, &mut [f64])| {
        let base = cell * p * q;
        let msgs = (0..p).map(|j| &f2v[base + j * q..base + (j + 1) * q]);
        extrinsic_product(msgs, prior, chunk);
    };

    #[cfg(feature = "parallel")]
    posterior.par_chunks_mut(q).enumerate().for_each(cell_update);
    #[cfg(not(feature = "parallel"))]
    posterior.chunks_mut(q).enumerate().for_each(cell_update);
}

/// Argmax per cell; ties go to the lowest constellation index.
fn hard_decisions(posterior: &[f64], q: usize, hard: &mut [usize]) {
    for (cell, probs) in posterior.chunks(q).enumerate() {
        let mut best = 0;
        let mut best_p = probs[0];
        for (s, &v) in probs.iter().enumerate().skip(1) {
            if v > best_p {
                best_p = v;
                best = s;
            }
        }
        hard[cell] = best;
    }
}

/// Flat v2f offsets for every slot of observation `(k, l, i)`.
pub(crate) fn slot_bases(
    slots: &[Slot],
    k: usize,
    l: usize,
    n: usize,
    m: usize,
    p: usize,
    q: usize,
    bases: &mut Vec<usize>,
) {
    bases.clear();
    for slot in slots {
        let ik = wrap(k as isize + slot.d_doppler, n);
        let il = wrap(l as isize + slot.d_delay, m);
        bases.push(((il * n + ik) * p + slot.path) * q);
    }
}
