//! Exact symbol-wise posteriors by exhaustive enumeration.
//!
//! For every candidate transmitted frame the joint likelihood under the
//! noiseless forward model is accumulated in log-sum-exp arithmetic, giving
//! exact per-position marginals, the jointly most likely frame and the log
//! evidence. The cost is `|A|^(N*M)`, so multi-path inputs are refused above
//! a hard size guard.
//!
//! A single-path channel couples each grid cell to exactly one received
//! sample, so the joint posterior factorizes per cell; that case is computed
//! directly (still exactly) and carries no size limit. The enumeration and
//! factorized routes agree to machine precision where both apply, which the
//! tests check.

use num_complex::Complex64;

use crate::channel::{wrap, ChannelRealization};
use crate::constellation::Constellation;
use crate::frame::DdFrame;
use crate::{Error, Result};

/// Largest `N*M*log2(|A|)` the enumeration path accepts.
const GUARD_BITS: usize = 20;

/// Exact marginals plus the joint maximum and the log evidence.
#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Per-position probability vectors, `(l*N + k)*Q + s`.
    pub marginals: Vec<f64>,
    /// Constellation indices of the jointly most likely frame, column-major.
    pub map_indices: Vec<usize>,
    /// The jointly most likely frame as grid values.
    pub map_frame: DdFrame,
    /// Log of the summed unnormalized joint likelihood (prefactors dropped).
    pub log_evidence: f64,
    q: usize,
    n: usize,
}

impl OracleResult {
    pub fn marginal_at(&self, k: usize, l: usize) -> &[f64] {
        let base = (l * self.n + k) * self.q;
        &self.marginals[base..base + self.q]
    }

    /// Per-position argmax of the marginals; ties to the lowest index.
    pub fn marginal_argmax(&self) -> Vec<usize> {
        self.marginals
            .chunks(self.q)
            .map(|probs| {
                let mut best = 0;
                let mut best_p = probs[0];
                for (s, &v) in probs.iter().enumerate().skip(1) {
                    if v > best_p {
                        best_p = v;
                        best = s;
                    }
                }
                best
            })
            .collect()
    }
}

/// Streaming log-sum-exp accumulator.
#[derive(Clone, Copy)]
struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    fn add(&mut self, v: f64) {
        if v <= self.max {
            self.sum += (v - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// Computes the exact posterior marginals of every transmitted symbol given
/// the received frame, the channel and the noise level.
pub fn exact_marginals(
    y: &DdFrame,
    ch: &ChannelRealization,
    c: &Constellation,
    n0: f64,
) -> Result<OracleResult> {
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
    if ch.num_paths() == 1 {
        return Ok(single_path_marginals(y, ch, c, n0));
    }
    let n = y.n_doppler();
    let m = y.m_delay();
    let bits = n * m * c.size().trailing_zeros() as usize;
    if bits > GUARD_BITS {
        return Err(Error::SizeGuard(format!(
            "enumeration needs {bits} candidate bits (> {GUARD_BITS}); \
             shrink the frame or the alphabet"
        )));
    }
    Ok(enumerate_marginals(y, ch, c, n0))
}

fn single_path_marginals(
    y: &DdFrame,
    ch: &ChannelRealization,
    c: &Constellation,
    n0: f64,
) -> OracleResult {
    let n = y.n_doppler();
    let m = y.m_delay();
    let q = c.size();
    let path = &ch.paths[0];
    let g = path.effective_gain(n, m);
    let log_priors: Vec<f64> = c.priors().iter().map(|&p| p.ln()).collect();

    let mut marginals = vec![0.0; n * m * q];
    let mut map_indices = vec![0usize; n * m];
    let mut log_evidence = 0.0;
    for l in 0..m {
        for k in 0..n {
            let ok = wrap(k as isize + path.doppler_idx, n);
            let ol = wrap(l as isize + path.delay_idx as isize, m);
            let y_obs = y.get(ok, ol);
            let cell = l * n + k;
            let mut lse = LogSum::new();
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            let scores: Vec<f64> = (0..q)
                .map(|s| {
                    let v = log_priors[s] - (y_obs - g * c.point(s)).norm_sqr() / n0;
                    lse.add(v);
                    if v > best_v {
                        best_v = v;
                        best = s;
                    }
                    v
                })
                .collect();
            let total = lse.value();
            for s in 0..q {
                marginals[cell * q + s] = (scores[s] - total).exp();
            }
            map_indices[cell] = best;
            log_evidence += total;
        }
    }

    let map_frame = frame_from_indices(n, m, &map_indices, c);
    OracleResult {
        marginals,
        map_indices,
        map_frame,
        log_evidence,
        q,
        n,
    }
}

fn enumerate_marginals(
    y: &DdFrame,
    ch: &ChannelRealization,
    c: &Constellation,
    n0: f64,
) -> OracleResult {
    let n = y.n_doppler();
    let m = y.m_delay();
    let q = c.size();
    let cells = n * m;
    let p = ch.num_paths();

    // src[cell*p + i]: which transmitted cell path i copies into `cell`.
    let mut src = vec![0usize; cells * p];
    let mut gains = Vec::with_capacity(p);
    for (i, path) in ch.paths.iter().enumerate() {
        gains.push(path.effective_gain(n, m));
        for l in 0..m {
            for k in 0..n {
                let sk = wrap(k as isize - path.doppler_idx, n);
                let sl = wrap(l as isize - path.delay_idx as isize, m);
                src[(l * n + k) * p + i] = sl * n + sk;
            }
        }
    }
    let log_priors: Vec<f64> = c.priors().iter().map(|&pr| pr.ln()).collect();
    let points = c.points();
    let y_flat = y.values();

    let mut digits = vec![0usize; cells];
    let mut symbols = vec![points[0]; cells];
    let mut marginal_acc = vec![LogSum::new(); cells * q];
    let mut evidence = LogSum::new();
    let mut best_loglik = f64::NEG_INFINITY;
    let mut best_digits = digits.clone();

    let total: u64 = (q as u64).pow(cells as u32);
    for _ in 0..total {
        for (sym, &d) in symbols.iter_mut().zip(&digits) {
            *sym = points[d];
        }
        let mut loglik = 0.0;
        for cell in 0..cells {
            let mut estimate = Complex64::new(0.0, 0.0);
            for i in 0..p {
                estimate += gains[i] * symbols[src[cell * p + i]];
            }
            loglik -= (y_flat[cell] - estimate).norm_sqr() / n0;
            loglik += log_priors[digits[cell]];
        }
        evidence.add(loglik);
        for (cell, &d) in digits.iter().enumerate() {
            marginal_acc[cell * q + d].add(loglik);
        }
        if loglik > best_loglik {
            best_loglik = loglik;
            best_digits.copy_from_slice(&digits);
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < q {
                break;
            }
            *d = 0;
        }
    }

    let log_evidence = evidence.value();
    let marginals = marginal_acc
        .iter()
        .map(|acc| (acc.value() - log_evidence).exp())
        .collect();
    let map_frame = frame_from_indices(n, m, &best_digits, c);
    OracleResult {
        marginals,
        map_indices: best_digits,
        map_frame,
        log_evidence,
        q,
        n,
    }
}

fn frame_from_indices(n: usize, m: usize, indices: &[usize], c: &Constellation) -> DdFrame {
    let values = indices.iter().map(|&i| c.point(i)).collect();
    DdFrame::from_values(n, m, values).expect("index grid matches dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_dd, draw_channel, ChannelPath, NoiseModel};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
        0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
    }

    #[test]
    fn zero_gain_returns_priors() {
        let c = Constellation::qpsk();
        let ch = ChannelRealization::new(
            vec![
                ChannelPath {
                    gain: Complex64::new(0.0, 0.0),
                    delay_idx: 0,
                    doppler_idx: 0,
                },
                ChannelPath {
                    gain: Complex64::new(0.0, 0.0),
                    delay_idx: 1,
                    doppler_idx: 0,
                },
            ],
            2,
            2,
        )
        .unwrap();
        let y = DdFrame::zeros(2, 2);
        let out = exact_marginals(&y, &ch, &c, 0.5).unwrap();
        for cell in 0..4 {
            for s in 0..4 {
                assert!((out.marginals[cell * 4 + s] - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_channel_noiseless_is_one_hot() {
        let c = Constellation::qpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let indices: Vec<usize> = (0..4).map(|_| rng.random_range(0..4)).collect();
        let values = indices.iter().map(|&i| c.point(i)).collect();
        let x = DdFrame::from_values(2, 2, values).unwrap();
        let ch = ChannelRealization::new(
            vec![ChannelPath {
                gain: Complex64::new(1.0, 0.0),
                delay_idx: 0,
                doppler_idx: 0,
            }],
            2,
            2,
        )
        .unwrap();
        let out = exact_marginals(&x, &ch, &c, 1e-6).unwrap();
        for (cell, &truth) in indices.iter().enumerate() {
            assert!(out.marginals[cell * 4 + truth] > 1.0 - 1e-9);
        }
        assert_eq!(out.map_indices, indices);
        assert_eq!(out.marginal_argmax(), indices);
    }

    #[test]
    fn size_guard_refuses_large_multipath_frames() {
        let c = Constellation::qpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let ch = draw_channel(2, 2, 1, 4, 4, &mut rng).unwrap();
        let y = DdFrame::zeros(4, 4);
        // 4*4*2 = 32 candidate bits > 20.
        assert!(matches!(
            exact_marginals(&y, &ch, &c, 0.1),
            Err(Error::SizeGuard(_))
        ));
    }

    #[test]
    fn single_path_route_matches_enumeration() {
        // The factorized single-path path must agree with brute force on a
        // grid small enough to enumerate.
        let c = Constellation::qpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        for trial in 0..5 {
            let ch = draw_channel(1, 1, 1, 2, 3, &mut rng).unwrap();
            let indices: Vec<usize> = (0..6).map(|_| rng.random_range(0..4)).collect();
            let values = indices.iter().map(|&i| c.point(i)).collect();
            let x = DdFrame::from_values(2, 3, values).unwrap();
            let n0 = 0.3;
            let y = apply_dd(&x, &ch, Some(&NoiseModel::new(n0).unwrap()), &mut rng).unwrap();

            let fast = exact_marginals(&y, &ch, &c, n0).unwrap();
            let brute = enumerate_marginals(&y, &ch, &c, n0);
            for cell in 0..6 {
                let tv = tv_distance(
                    &fast.marginals[cell * 4..(cell + 1) * 4],
                    &brute.marginals[cell * 4..(cell + 1) * 4],
                );
                assert!(tv < 1e-12, "trial {trial}: cell {cell} TV {tv}");
            }
            assert!((fast.log_evidence - brute.log_evidence).abs() < 1e-9);
            assert_eq!(fast.map_indices, brute.map_indices);
        }
    }

    #[test]
    fn marginals_are_normalized() {
        let c = Constellation::qpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let ch = draw_channel(2, 1, 1, 2, 2, &mut rng).unwrap();
        let indices: Vec<usize> = (0..4).map(|_| rng.random_range(0..4)).collect();
        let values = indices.iter().map(|&i| c.point(i)).collect();
        let x = DdFrame::from_values(2, 2, values).unwrap();
        let n0 = 0.2;
        let y = apply_dd(&x, &ch, Some(&NoiseModel::new(n0).unwrap()), &mut rng).unwrap();
        let out = exact_marginals(&y, &ch, &c, n0).unwrap();
        for cell in 0..4 {
            let sum: f64 = out.marginals[cell * 4..(cell + 1) * 4].iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "cell {cell} sums to {sum}");
        }
    }

    #[test]
    fn marginal_argmax_tracks_joint_map_at_high_snr() {
        // Per-symbol argmax and the jointly most likely frame can differ,
        // but at 20 dB they should coincide on almost every position.
        let c = Constellation::qpsk();
        let n0 = 0.01;
        let mut positions = 0usize;
        let mut agreements = 0usize;
        for trial in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(7000 + trial);
            let ch = draw_channel(2, 1, 1, 2, 2, &mut rng).unwrap();
            let indices: Vec<usize> = (0..4).map(|_| rng.random_range(0..4)).collect();
            let values = indices.iter().map(|&i| c.point(i)).collect();
            let x = DdFrame::from_values(2, 2, values).unwrap();
            let y = apply_dd(&x, &ch, Some(&NoiseModel::new(n0).unwrap()), &mut rng).unwrap();
            let out = exact_marginals(&y, &ch, &c, n0).unwrap();
            for (a, b) in out.marginal_argmax().iter().zip(&out.map_indices) {
                positions += 1;
                if a == b {
                    agreements += 1;
                }
            }
        }
        let rate = agreements as f64 / positions as f64;
        assert!(rate >= 0.99, "argmax agreement rate {rate}");
    }

    #[test]
    fn detector_matches_oracle_on_cycle_free_graphs() {
        // One path: message passing is exact.
        let c = Constellation::qpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        for _ in 0..10 {
            let ch = draw_channel(1, 1, 1, 2, 2, &mut rng).unwrap();
            let indices: Vec<usize> = (0..4).map(|_| rng.random_range(0..4)).collect();
            let values = indices.iter().map(|&i| c.point(i)).collect();
            let x = DdFrame::from_values(2, 2, values).unwrap();
            let n0 = 0.4;
            let y = apply_dd(&x, &ch, Some(&NoiseModel::new(n0).unwrap()), &mut rng).unwrap();
            let oracle = exact_marginals(&y, &ch, &c, n0).unwrap();
            let detected = crate::detector::detect_map(
                &y,
                &ch,
                &c,
                n0,
                &crate::detector::DetectorConfig::default(),
            )
            .unwrap();
            for k in 0..2 {
                for l in 0..2 {
                    let tv = tv_distance(oracle.marginal_at(k, l), detected.posterior_at(k, l));
                    assert!(tv < 1e-9, "TV {tv} at ({k},{l})");
                }
            }
        }
    }
}
