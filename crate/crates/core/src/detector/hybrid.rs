//! Reduced-complexity hybrid detection: exact enumeration of the strongest
//! interferers, mean cancellation of the rest.
//!
//! At every observation the `P - 1` interferers are split by path power:
//! the `L` strongest are enumerated exactly as in [`detect_map`]; each
//! remaining interferer is treated as a Gaussian variable whose mean
//! (derived from its current extrinsic message) is subtracted from the
//! observation and whose gain-weighted variance inflates the effective
//! noise level. The per-observation cost drops from `|A|^(P-1)` to `|A|^L`
//! combinations.
//!
//! [`detect_map`]: super::detect_map

use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::constellation::Constellation;
use crate::frame::DdFrame;
use crate::{Error, Result};

use super::{
    accumulate_node, build_slot, run_engine, slot_bases, validate_inputs, DetectorConfig,
    DetectorOutput, NeighborIndex, NodeKernel, Scratch, Slot,
};

/// Split of the interferer slots at one observation, by descending path
/// power with ties broken toward the lower original slot index. The same
/// split applies at every grid position, since it depends only on the gains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    /// Slot indices enumerated exactly, strongest first.
    pub map_slots: Vec<usize>,
    /// Slot indices handled by mean cancellation, next-strongest first.
    pub pic_slots: Vec<usize>,
}

/// Sorts interferer slots by `|gain|^2` descending (ties to the lower slot
/// index) and cuts after `min(l_map, len)` entries.
pub fn partition_interferers(gains: &[Complex64], l_map: usize) -> Partition {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| {
        gains[b]
            .norm_sqr()
            .partial_cmp(&gains[a].norm_sqr())
            .expect("gain powers are finite")
            .then(a.cmp(&b))
    });
    let cut = l_map.min(gains.len());
    let pic_slots = order.split_off(cut);
    Partition {
        map_slots: order,
        pic_slots,
    }
}

/// Mean and variance of a symbol under the given probability vector:
/// `mean = sum_s p(s) point(s)`, `var = sum_s p(s)|point(s)|^2 - |mean|^2`.
pub fn pic_moments(probs: &[f64], c: &Constellation) -> (Complex64, f64) {
    debug_assert_eq!(probs.len(), c.size());
    let mut mean = Complex64::new(0.0, 0.0);
    let mut second = 0.0;
    for (&p, &point) in probs.iter().zip(c.points()) {
        mean += p * point;
        second += p * point.norm_sqr();
    }
    let var = (second - mean.norm_sqr()).max(0.0);
    (mean, var)
}

/// Gaussian likelihood with the weak interferers replaced by their means and
/// their residual variance `sigma2` added to the noise level:
/// `exp(-|y - hyp_gain*hyp - sum map_gains[j]*map_values[j]
///        - sum pic_gains[j]*pic_means[j]|^2 / (n0 + sigma2))`.
/// The `(n0 + sigma2)`-dependent prefactor is dropped: at a fixed
/// observation it is the same for every hypothesis and combination, so
/// normalization removes it.
#[allow(clippy::too_many_arguments)]
pub fn likelihood_pic(
    y_obs: Complex64,
    hyp_gain: Complex64,
    hypothesis: Complex64,
    map_gains: &[Complex64],
    map_values: &[Complex64],
    pic_gains: &[Complex64],
    pic_means: &[Complex64],
    n0: f64,
    sigma2: f64,
) -> Result<f64> {
    if !(n0 + sigma2 > 0.0) {
        return Err(Error::Config(format!(
            "effective noise level must be positive, got {}",
            n0 + sigma2
        )));
    }
    let mut residual = y_obs - hyp_gain * hypothesis;
    for (g, x) in map_gains.iter().zip(map_values) {
        residual -= g * x;
    }
    for (g, mu) in pic_gains.iter().zip(pic_means) {
        residual -= g * mu;
    }
    Ok((-residual.norm_sqr() / (n0 + sigma2)).exp())
}

/// A cancelled slot: shifts to find its message, gain to scale its mean,
/// gain power to weight its variance.
struct PicSlot {
    path: usize,
    d_doppler: isize,
    d_delay: isize,
    gain: Complex64,
    gain_sq: f64,
}

struct HybridKernel<'a> {
    y: &'a DdFrame,
    nbr: &'a NeighborIndex,
    n0: f64,
    n: usize,
    m: usize,
    p: usize,
    q: usize,
    hyp_terms: Vec<Complex64>,
    map_slots: Vec<Vec<Slot>>,
    pic_slots: Vec<Vec<PicSlot>>,
    points: Vec<Complex64>,
    point_sq: Vec<f64>,
}

impl<'a> HybridKernel<'a> {
    fn new(
        y: &'a DdFrame,
        nbr: &'a NeighborIndex,
        c: &Constellation,
        n0: f64,
        l_map: usize,
    ) -> Self {
        let p = nbr.num_paths();
        let q = c.size();
        let mut hyp_terms = Vec::with_capacity(p * q);
        let mut map_slots = Vec::with_capacity(p);
        let mut pic_slots = Vec::with_capacity(p);
        for i in 0..p {
            let g = nbr.eff_gain(i);
            hyp_terms.extend(c.points().iter().map(|&pt| g * pt));

            let infos = nbr.slots(i);
            let gains: Vec<Complex64> = infos.iter().map(|s| nbr.eff_gain(s.path)).collect();
            let partition = partition_interferers(&gains, l_map);
            map_slots.push(
                partition
                    .map_slots
                    .iter()
                    .map(|&j| build_slot(&infos[j], gains[j], c.points()))
                    .collect::<Vec<_>>(),
            );
            pic_slots.push(
                partition
                    .pic_slots
                    .iter()
                    .map(|&j| PicSlot {
                        path: infos[j].path,
                        d_doppler: infos[j].d_doppler,
                        d_delay: infos[j].d_delay,
                        gain: gains[j],
                        gain_sq: gains[j].norm_sqr(),
                    })
                    .collect::<Vec<_>>(),
            );
        }
        Self {
            y,
            nbr,
            n0,
            n: nbr.n_doppler(),
            m: nbr.m_delay(),
            p,
            q,
            hyp_terms,
            map_slots,
            pic_slots,
            points: c.points().to_vec(),
            point_sq: c.points().iter().map(|pt| pt.norm_sqr()).collect(),
        }
    }
}

impl NodeKernel for HybridKernel<'_> {
    fn update(&self, k: usize, l: usize, i: usize, v2f: &[f64], scratch: &mut Scratch) -> u64 {
        let (ok, ol) = self.nbr.obs_pos(k, l, i);
        let y_obs = self.y.get(ok, ol);

        // Cancel the weak interferers by their current extrinsic means and
        // absorb their gain-weighted variances into the noise level.
        let mut cancelled = Complex64::new(0.0, 0.0);
        let mut sigma2 = 0.0;
        for slot in &self.pic_slots[i] {
            let ik = crate::channel::wrap(k as isize + slot.d_doppler, self.n);
            let il = crate::channel::wrap(l as isize + slot.d_delay, self.m);
            let base = ((il * self.n + ik) * self.p + slot.path) * self.q;
            let msg = &v2f[base..base + self.q];
            let mut mean = Complex64::new(0.0, 0.0);
            let mut second = 0.0;
            for s in 0..self.q {
                mean += msg[s] * self.points[s];
                second += msg[s] * self.point_sq[s];
            }
            let var = (second - mean.norm_sqr()).max(0.0);
            cancelled += slot.gain * mean;
            sigma2 += slot.gain_sq * var;
        }

        let slots = &self.map_slots[i];
        slot_bases(slots, k, l, self.n, self.m, self.p, self.q, &mut scratch.bases);
        accumulate_node(
            y_obs - cancelled,
            self.n0 + sigma2,
            &self.hyp_terms[i * self.q..(i + 1) * self.q],
            slots,
            v2f,
            self.q,
            scratch,
        )
    }
}

/// Runs the hybrid detector with `cfg.l_map` exactly-enumerated interferers
/// per observation (clamped to `P - 1`). `l_map = 0` with damping 0.7 is the
/// Gaussian-approximation message-passing baseline; `l_map >= P - 1` matches
/// [`detect_map`].
///
/// [`detect_map`]: super::detect_map
pub fn detect_hybrid(
    y: &DdFrame,
    ch: &ChannelRealization,
    c: &Constellation,
    n0: f64,
    cfg: &DetectorConfig,
) -> Result<DetectorOutput> {
    let l_effective = cfg.l_map.min(ch.num_paths() - 1);
    validate_inputs(y, ch, c, n0, cfg, l_effective)?;
    let nbr = NeighborIndex::new(ch);
    let kernel = HybridKernel::new(y, &nbr, c, n0, l_effective);
    Ok(run_engine(y, ch, c, cfg, &kernel, l_effective))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_dd, draw_channel, NoiseModel};
    use crate::detector::detect_map;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gains_with_powers(powers: &[f64]) -> Vec<Complex64> {
        powers.iter().map(|&p| Complex64::new(p.sqrt(), 0.0)).collect()
    }

    #[test]
    fn partition_splits_by_power() {
        let gains = gains_with_powers(&[0.9, 0.5, 0.3, 0.1]);
        let part = partition_interferers(&gains, 2);
        assert_eq!(part.map_slots, vec![0, 1]);
        assert_eq!(part.pic_slots, vec![2, 3]);
    }

    #[test]
    fn partition_handles_unsorted_and_ties() {
        let gains = gains_with_powers(&[0.3, 0.9, 0.3, 0.5]);
        let part = partition_interferers(&gains, 2);
        assert_eq!(part.map_slots, vec![1, 3]);
        // Tied powers 0.3 keep index order.
        assert_eq!(part.pic_slots, vec![0, 2]);
    }

    #[test]
    fn partition_edges() {
        let gains = gains_with_powers(&[0.4, 0.2]);
        let all_pic = partition_interferers(&gains, 0);
        assert!(all_pic.map_slots.is_empty());
        assert_eq!(all_pic.pic_slots.len(), 2);
        let all_map = partition_interferers(&gains, 2);
        assert!(all_map.pic_slots.is_empty());
        // Oversized requests clamp.
        let clamped = partition_interferers(&gains, 10);
        assert_eq!(clamped.map_slots.len(), 2);
    }

    #[test]
    fn moments_of_uniform_qpsk() {
        let c = Constellation::qpsk();
        let (mean, var) = pic_moments(&[0.25; 4], &c);
        assert!(mean.norm() < 1e-15);
        assert!((var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moments_of_one_hot() {
        let c = Constellation::qpsk();
        let (mean, var) = pic_moments(&[1.0, 0.0, 0.0, 0.0], &c);
        assert!((mean - c.point(0)).norm() < 1e-15);
        assert!(var.abs() < 1e-15);
        assert!(var >= 0.0);
    }

    #[test]
    fn moments_of_two_point_mixture() {
        // Half on (1+j)/sqrt(2), half on (-1+j)/sqrt(2): mean j/sqrt(2),
        // variance 1 - 1/2 = 1/2.
        let c = Constellation::qpsk();
        let (mean, var) = pic_moments(&[0.5, 0.5, 0.0, 0.0], &c);
        let expected = Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
        assert!((mean - expected).norm() < 1e-12);
        assert!((var - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pic_likelihood_collapses_to_full_without_pic_slots() {
        let c = Constellation::qpsk();
        let g0 = Complex64::new(0.7, 0.1);
        let g1 = Complex64::new(-0.2, 0.4);
        let y = Complex64::new(0.3, -0.6);
        for s in 0..4 {
            for v in 0..4 {
                let full = crate::detector::likelihood_full(
                    y,
                    g0,
                    c.point(s),
                    &[g1],
                    &[c.point(v)],
                    0.2,
                )
                .unwrap();
                let pic = likelihood_pic(y, g0, c.point(s), &[g1], &[c.point(v)], &[], &[], 0.2, 0.0)
                    .unwrap();
                assert!((full - pic).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pic_likelihood_with_exact_means_cancels_perfectly() {
        let c = Constellation::qpsk();
        let g0 = Complex64::new(0.9, 0.0);
        let g1 = Complex64::new(0.3, -0.2);
        let truth = c.point(2);
        let interferer = c.point(1);
        let y = g0 * truth + g1 * interferer;
        let lik = likelihood_pic(y, g0, truth, &[], &[], &[g1], &[interferer], 1e-3, 0.0).unwrap();
        assert!((lik - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pic_likelihood_variance_widens_the_exponent() {
        let n0: f64 = 0.5;
        let y = Complex64::new(n0.sqrt(), 0.0);
        let lik = likelihood_pic(
            y,
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            &[],
            &[],
            &[],
            &[],
            n0,
            n0,
        )
        .unwrap();
        assert!((lik - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn pic_likelihood_rejects_nonpositive_denominator() {
        let z = Complex64::new(0.0, 0.0);
        assert!(likelihood_pic(z, z, z, &[], &[], &[], &[], 0.0, 0.0).is_err());
    }

    fn random_case(
        seed: u64,
        n: usize,
        m: usize,
        p: usize,
        n0: f64,
    ) -> (Constellation, DdFrame, ChannelRealization, DdFrame) {
        let c = Constellation::qpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let indices: Vec<usize> = (0..n * m).map(|_| rng.random_range(0..4)).collect();
        let values = indices.iter().map(|&i| c.point(i)).collect();
        let x = DdFrame::from_values(n, m, values).unwrap();
        let ch = draw_channel(p, 3, 2, n, m, &mut rng).unwrap();
        let y = apply_dd(&x, &ch, Some(&NoiseModel::new(n0).unwrap()), &mut rng).unwrap();
        (c, x, ch, y)
    }

    #[test]
    fn full_l_matches_detect_map() {
        for seed in [1u64, 2, 3] {
            let (c, _, ch, y) = random_case(seed, 8, 8, 3, 0.15);
            let cfg_map = DetectorConfig::default();
            let cfg_hyb = DetectorConfig::default().with_l_map(2);
            let a = detect_map(&y, &ch, &c, 0.15, &cfg_map).unwrap();
            let b = detect_hybrid(&y, &ch, &c, 0.15, &cfg_hyb).unwrap();
            let max_diff = a
                .messages
                .posterior
                .iter()
                .zip(&b.messages.posterior)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(max_diff < 1e-12, "seed {seed}: posterior diff {max_diff}");
            assert_eq!(a.hard_indices, b.hard_indices);
        }
    }

    #[test]
    fn oversized_l_clamps_and_matches_map() {
        let (c, _, ch, y) = random_case(4, 8, 8, 3, 0.15);
        let out = detect_hybrid(&y, &ch, &c, 0.15, &DetectorConfig::default().with_l_map(17))
            .unwrap();
        assert_eq!(out.l_effective, 2);
        let reference = detect_map(&y, &ch, &c, 0.15, &DetectorConfig::default()).unwrap();
        assert_eq!(out.hard_indices, reference.hard_indices);
    }

    #[test]
    fn single_path_any_l_matches_map() {
        let (c, _, ch, y) = random_case(5, 4, 4, 1, 0.1);
        let a = detect_map(&y, &ch, &c, 0.1, &DetectorConfig::default()).unwrap();
        let b = detect_hybrid(&y, &ch, &c, 0.1, &DetectorConfig::default().with_l_map(0)).unwrap();
        assert_eq!(a.hard_indices, b.hard_indices);
        let max_diff = a
            .messages
            .posterior
            .iter()
            .zip(&b.messages.posterior)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(max_diff < 1e-12);
    }

    #[test]
    fn eval_count_follows_l() {
        let (c, _, ch, y) = random_case(6, 4, 4, 3, 0.2);
        for l in 0..=2usize {
            let cfg = DetectorConfig::default().with_iters(5).with_l_map(l);
            let out = detect_hybrid(&y, &ch, &c, 0.2, &cfg).unwrap();
            let expected = (4 * 4 * 3) as u64 * 4u64.pow(l as u32 + 1) * 5;
            assert_eq!(out.likelihood_evals, expected, "l = {l}");
        }
    }

    #[test]
    fn messages_stay_valid_probability_vectors() {
        let (c, _, ch, y) = random_case(7, 4, 4, 3, 0.3);
        let out = detect_hybrid(&y, &ch, &c, 0.3, &DetectorConfig::default().with_l_map(1)).unwrap();
        out.messages.validate().unwrap();
    }

    #[test]
    fn damped_low_l_still_decodes_clean_frames() {
        // The Gaussian-approximation baseline on an easy frame.
        let c = Constellation::qpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let indices: Vec<usize> = (0..16).map(|_| rng.random_range(0..4)).collect();
        let values = indices.iter().map(|&i| c.point(i)).collect();
        let x = DdFrame::from_values(4, 4, values).unwrap();
        let ch = draw_channel(2, 2, 1, 4, 4, &mut rng).unwrap();
        let y = apply_dd(&x, &ch, None, &mut rng).unwrap();
        let cfg = DetectorConfig::default().with_l_map(0).with_damping(0.7);
        let out = detect_hybrid(&y, &ch, &c, 1e-3, &cfg).unwrap();
        assert_eq!(out.hard_indices, indices);
    }
}
