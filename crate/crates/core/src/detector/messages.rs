//! Probability-vector message storage and the shared update arithmetic.
//!
//! Every message is a probability vector over the constellation. After each
//! update a vector is normalized and clamped from below at [`PROB_FLOOR`]
//! so no symbol can ever be locked out by a hard zero; the clamp happens
//! after normalization, so vectors sum to 1 within a few ULPs of the floor.

use crate::constellation::Constellation;
use crate::{Error, Result};

/// Smallest probability an entry of a stored message can take.
pub const PROB_FLOOR: f64 = 1e-12;

/// Normalizes `v` to sum 1, then clamps entries up to [`PROB_FLOOR`].
pub fn normalize_floored(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    debug_assert!(sum > 0.0, "message vector has no mass");
    for x in v.iter_mut() {
        *x /= sum;
        if *x < PROB_FLOOR {
            *x = PROB_FLOOR;
        }
    }
}

/// Log-domain product of a prior with any number of incoming messages,
/// normalized and floored. With zero messages this returns the prior.
pub fn extrinsic_product<'a, I>(messages: I, prior: &[f64], out: &mut [f64])
where
    I: IntoIterator<Item = &'a [f64]>,
{
    for (o, &p) in out.iter_mut().zip(prior) {
        *o = p.ln();
    }
    for msg in messages {
        for (o, &v) in out.iter_mut().zip(msg) {
            *o += v.ln();
        }
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for o in out.iter_mut() {
        *o = (*o - max).exp();
    }
    normalize_floored(out);
}

/// All messages of one detection run: variable-to-function (`v2f`),
/// function-to-variable (`f2v`) and the fused per-position posteriors.
///
/// Layout is flat and column-major: the edge `(k, l, i)` starts at
/// `((l*N + k)*P + i) * Q` and the posterior of `(k, l)` at `(l*N + k) * Q`.
#[derive(Debug, Clone)]
pub struct MessageState {
    n: usize,
    m: usize,
    p: usize,
    q: usize,
    pub(crate) v2f: Vec<f64>,
    pub(crate) f2v: Vec<f64>,
    pub(crate) posterior: Vec<f64>,
}

impl MessageState {
    /// Fresh state with every vector set to the constellation priors.
    pub fn new(n: usize, m: usize, p: usize, c: &Constellation) -> Self {
        let q = c.size();
        let mut prior = c.priors().to_vec();
        normalize_floored(&mut prior);
        let edge_vectors = n * m * p;
        let mut v2f = Vec::with_capacity(edge_vectors * q);
        for _ in 0..edge_vectors {
            v2f.extend_from_slice(&prior);
        }
        let f2v = v2f.clone();
        let mut posterior = Vec::with_capacity(n * m * q);
        for _ in 0..n * m {
            posterior.extend_from_slice(&prior);
        }
        Self {
            n,
            m,
            p,
            q,
            v2f,
            f2v,
            posterior,
        }
    }

    pub fn alphabet_size(&self) -> usize {
        self.q
    }

    pub fn n_doppler(&self) -> usize {
        self.n
    }

    pub fn m_delay(&self) -> usize {
        self.m
    }

    pub fn num_paths(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn edge_base(&self, k: usize, l: usize, i: usize) -> usize {
        ((l * self.n + k) * self.p + i) * self.q
    }

    #[inline]
    pub fn cell_base(&self, k: usize, l: usize) -> usize {
        (l * self.n + k) * self.q
    }

    pub fn v2f_at(&self, k: usize, l: usize, i: usize) -> &[f64] {
        let base = self.edge_base(k, l, i);
        &self.v2f[base..base + self.q]
    }

    pub fn f2v_at(&self, k: usize, l: usize, i: usize) -> &[f64] {
        let base = self.edge_base(k, l, i);
        &self.f2v[base..base + self.q]
    }

    pub fn posterior_at(&self, k: usize, l: usize) -> &[f64] {
        let base = self.cell_base(k, l);
        &self.posterior[base..base + self.q]
    }

    /// Checks the storage invariants: every vector nonnegative, summing to 1
    /// within 1e-9, with no entry below the floor.
    pub fn validate(&self) -> Result<()> {
        for (name, buf) in [
            ("v2f", &self.v2f),
            ("f2v", &self.f2v),
            ("posterior", &self.posterior),
        ] {
            for (idx, vector) in buf.chunks(self.q).enumerate() {
                let sum: f64 = vector.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "{name} vector {idx} sums to {sum}"
                    )));
                }
                if vector.iter().any(|&x| x < PROB_FLOOR) {
                    return Err(Error::Config(format!(
                        "{name} vector {idx} has an entry below the floor"
                    )));
                }
            }
        }
        Ok(())
    }
}
