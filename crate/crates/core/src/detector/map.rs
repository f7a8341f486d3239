//! Symbol-wise MAP detection by full interferer enumeration.
//!
//! Each observation node marginalizes over all `|A|^(P-1)` joint values of
//! its interfering symbols, weighting every combination by the Gaussian
//! residual likelihood and the senders' extrinsic messages. Exact when the
//! factor graph is cycle-free (e.g. `P = 1`); a close approximation on
//! loopy graphs.

use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::constellation::Constellation;
use crate::frame::DdFrame;
use crate::{Error, Result};

use super::{
    accumulate_node, build_slot, run_engine, slot_bases, validate_inputs, DetectorConfig,
    DetectorOutput, NeighborIndex, NodeKernel, Scratch, Slot,
};

/// Gaussian likelihood of a received sample given the observed symbol
/// hypothesis and explicit values for every interferer:
/// `exp(-|y - sum_j gains[j]*interferers[j] - hyp_gain*hypothesis|^2 / n0)`.
/// The constant prefactor is dropped; it cancels under normalization.
pub fn likelihood_full(
    y_obs: Complex64,
    hyp_gain: Complex64,
    hypothesis: Complex64,
    gains: &[Complex64],
    interferer_values: &[Complex64],
    n0: f64,
) -> Result<f64> {
    if !(n0 > 0.0) {
        return Err(Error::Config(format!("noise level must be positive, got {n0}")));
    }
    debug_assert_eq!(gains.len(), interferer_values.len());
    let mut residual = y_obs - hyp_gain * hypothesis;
    for (g, x) in gains.iter().zip(interferer_values) {
        residual -= g * x;
    }
    Ok((-residual.norm_sqr() / n0).exp())
}

struct MapKernel<'a> {
    y: &'a DdFrame,
    nbr: &'a NeighborIndex,
    n0: f64,
    n: usize,
    m: usize,
    p: usize,
    q: usize,
    /// `hyp_terms[i*q + s]` = effective gain of path `i` times point `s`.
    hyp_terms: Vec<Complex64>,
    /// Per observing path, all `P - 1` interferer slots in path order.
    slots: Vec<Vec<Slot>>,
}

impl<'a> MapKernel<'a> {
    fn new(y: &'a DdFrame, nbr: &'a NeighborIndex, c: &Constellation, n0: f64) -> Self {
        let p = nbr.num_paths();
        let q = c.size();
        let mut hyp_terms = Vec::with_capacity(p * q);
        for i in 0..p {
            let g = nbr.eff_gain(i);
            hyp_terms.extend(c.points().iter().map(|&pt| g * pt));
        }
        let slots = (0..p)
            .map(|i| {
                nbr.slots(i)
                    .iter()
                    .map(|info| build_slot(info, nbr.eff_gain(info.path), c.points()))
                    .collect()
            })
            .collect();
        Self {
            y,
            nbr,
            n0,
            n: nbr.n_doppler(),
            m: nbr.m_delay(),
            p,
            q,
            hyp_terms,
            slots,
        }
    }
}

impl NodeKernel for MapKernel<'_> {
    fn update(&self, k: usize, l: usize, i: usize, v2f: &[f64], scratch: &mut Scratch) -> u64 {
        let (ok, ol) = self.nbr.obs_pos(k, l, i);
        let y_obs = self.y.get(ok, ol);
        let slots = &self.slots[i];
        slot_bases(slots, k, l, self.n, self.m, self.p, self.q, &mut scratch.bases);
        accumulate_node(
            y_obs,
            self.n0,
            &self.hyp_terms[i * self.q..(i + 1) * self.q],
            slots,
            v2f,
            self.q,
            scratch,
        )
    }
}

/// Runs the full-enumeration symbol-wise detector.
pub fn detect_map(
    y: &DdFrame,
    ch: &ChannelRealization,
    c: &Constellation,
    n0: f64,
    cfg: &DetectorConfig,
) -> Result<DetectorOutput> {
    let enumerated = ch.num_paths() - 1;
    validate_inputs(y, ch, c, n0, cfg, enumerated)?;
    let nbr = NeighborIndex::new(ch);
    let kernel = MapKernel::new(y, &nbr, c, n0);
    Ok(run_engine(y, ch, c, cfg, &kernel, enumerated))
}
