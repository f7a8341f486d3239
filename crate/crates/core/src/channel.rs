//! Integer-resolution multipath channel on the delay-Doppler grid.
//!
//! A realization is a set of `P` paths, each with a complex gain and integer
//! delay/Doppler indices. Applied in the delay-Doppler domain the channel is
//! a twisted cyclic shift:
//!
//! ```text
//! y[k,l] = sum_i h_i exp(-j2pi lv_i lt_i / (NM)) x[(k - lv_i) mod N, (l - lt_i) mod M] + noise
//! ```
//!
//! The same realization can be applied in the time-frequency domain, where
//! under the ideal-pulse assumption it is a per-bin multiplication; the two
//! pipelines agree to numerical precision, which the tests exploit.
//!
//! Path gains are circularly-symmetric complex Gaussian (Rayleigh envelope)
//! with variances from an exponential power-delay profile normalized to unit
//! total power, so the average channel power is one and `Es/N0` sweeps are
//! comparable across path counts.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::frame::DdFrame;
use crate::transform::{isfft, sfft};
use crate::{Error, Result};

/// Wraps a possibly negative index onto `[0, modulus)`.
#[inline]
pub(crate) fn wrap(value: isize, modulus: usize) -> usize {
    value.rem_euclid(modulus as isize) as usize
}

/// One propagation path: complex gain plus integer delay/Doppler indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPath {
    pub gain: Complex64,
    /// Delay index, in `[0, M-1]`.
    pub delay_idx: usize,
    /// Doppler index, in `[-(N-1), N-1]`; may be negative.
    pub doppler_idx: isize,
}

impl ChannelPath {
    /// The phase `exp(-j2pi lv lt / (NM))` produced by the delay-Doppler
    /// coupling of this path on an `n x m` grid.
    pub fn phase_factor(&self, n: usize, m: usize) -> Complex64 {
        let turns = -(self.doppler_idx as f64) * (self.delay_idx as f64) / ((n * m) as f64);
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * turns)
    }

    /// Gain with the coupling phase folded in; this is the coefficient a
    /// transmitted symbol sees at its shifted receive position.
    pub fn effective_gain(&self, n: usize, m: usize) -> Complex64 {
        self.gain * self.phase_factor(n, m)
    }
}

/// A set of paths drawn for a specific grid size.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub paths: Vec<ChannelPath>,
    pub n_doppler: usize,
    pub m_delay: usize,
}

impl ChannelRealization {
    /// Validates path count, index ranges and tap distinctness.
    ///
    /// Distinctness is enforced on the indices reduced modulo the grid
    /// (`(doppler mod N, delay mod M)`): two paths whose shifts coincide on
    /// the grid would alias onto a single tap, which the detectors' fixed
    /// neighborhood structure cannot represent.
    pub fn new(paths: Vec<ChannelPath>, n_doppler: usize, m_delay: usize) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Config("a channel needs at least one path".into()));
        }
        let mut taps: Vec<(usize, usize)> = Vec::with_capacity(paths.len());
        for (i, path) in paths.iter().enumerate() {
            if path.delay_idx >= m_delay {
                return Err(Error::Config(format!(
                    "path {i} delay index {} out of range for M={m_delay}",
                    path.delay_idx
                )));
            }
            if path.doppler_idx.unsigned_abs() >= n_doppler {
                return Err(Error::Config(format!(
                    "path {i} Doppler index {} out of range for N={n_doppler}",
                    path.doppler_idx
                )));
            }
            let tap = (wrap(path.doppler_idx, n_doppler), path.delay_idx % m_delay);
            if taps.contains(&tap) {
                return Err(Error::Config(format!(
                    "path {i} aliases another path onto the same grid tap {tap:?}"
                )));
            }
            taps.push(tap);
        }
        Ok(Self {
            paths,
            n_doppler,
            m_delay,
        })
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }
}

/// Complex additive white Gaussian noise level (linear, not dB).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    n0: f64,
}

impl NoiseModel {
    pub fn new(n0: f64) -> Result<Self> {
        if !(n0 > 0.0) {
            return Err(Error::Config(format!("noise level must be positive, got {n0}")));
        }
        Ok(Self { n0 })
    }

    /// Total noise variance per complex sample.
    pub fn n0(&self) -> f64 {
        self.n0
    }
}

/// Circularly-symmetric complex Gaussian sample with the given total
/// variance (half in each of the real and imaginary parts).
pub fn complex_gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    let scale = (variance * 0.5).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

/// Normalized exponential power-delay profile over the given delay indices:
/// `exp(-l/10)` renormalized to sum to one.
pub fn pdp_variances(delay_indices: &[usize]) -> Result<Vec<f64>> {
    if delay_indices.is_empty() {
        return Err(Error::InputShape("delay index list is empty".into()));
    }
    let raw: Vec<f64> = delay_indices
        .iter()
        .map(|&l| (-(l as f64) / 10.0).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Draws a random channel: delay indices uniform on `{0..=l_max}`, Doppler
/// indices uniform on `{-k_max..=k_max}`, redrawn until all taps are
/// distinct; gains complex Gaussian with the exponential-profile variances,
/// so the expected total channel power is exactly one.
pub fn draw_channel<R: Rng + ?Sized>(
    p: usize,
    l_max: usize,
    k_max: usize,
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if p < 1 {
        return Err(Error::Config("need at least one path".into()));
    }
    if l_max >= m || k_max >= n {
        return Err(Error::Config(format!(
            "shift bounds (l_max={l_max}, k_max={k_max}) must be inside the {n}x{m} grid"
        )));
    }
    // Capacity counts distinct grid taps; Doppler values that coincide
    // modulo N collapse onto the same tap.
    let capacity = (l_max + 1) * (2 * k_max + 1).min(n);
    if p > capacity {
        return Err(Error::Config(format!(
            "cannot place {p} paths on {capacity} distinct taps"
        )));
    }

    let mut taps: Vec<(usize, usize)> = Vec::with_capacity(p);
    let mut delays = Vec::with_capacity(p);
    let mut dopplers = Vec::with_capacity(p);
    while delays.len() < p {
        let delay = rng.random_range(0..=l_max);
        let doppler = rng.random_range(-(k_max as i64)..=k_max as i64) as isize;
        let tap = (wrap(doppler, n), delay);
        if taps.contains(&tap) {
            continue;
        }
        taps.push(tap);
        delays.push(delay);
        dopplers.push(doppler);
    }

    let variances = pdp_variances(&delays)?;
    let paths = delays
        .into_iter()
        .zip(dopplers)
        .zip(variances)
        .map(|((delay_idx, doppler_idx), var)| ChannelPath {
            gain: complex_gaussian(var, rng),
            delay_idx,
            doppler_idx,
        })
        .collect();
    ChannelRealization::new(paths, n, m)
}

fn check_dims(x: &DdFrame, ch: &ChannelRealization) -> Result<()> {
    if x.n_doppler() != ch.n_doppler || x.m_delay() != ch.m_delay {
        return Err(Error::DimensionMismatch(format!(
            "frame is {}x{} but channel was drawn for {}x{}",
            x.n_doppler(),
            x.m_delay(),
            ch.n_doppler,
            ch.m_delay
        )));
    }
    Ok(())
}

/// Noiseless delay-Doppler forward model: the twisted cyclic shift.
pub fn apply_dd_noiseless(x: &DdFrame, ch: &ChannelRealization) -> Result<DdFrame> {
    check_dims(x, ch)?;
    let n = x.n_doppler();
    let m = x.m_delay();
    let mut y = DdFrame::zeros(n, m);
    for path in &ch.paths {
        let g = path.effective_gain(n, m);
        for l in 0..m {
            let src_l = wrap(l as isize - path.delay_idx as isize, m);
            for k in 0..n {
                let src_k = wrap(k as isize - path.doppler_idx, n);
                let contribution = g * x.get(src_k, src_l);
                y.set(k, l, y.get(k, l) + contribution);
            }
        }
    }
    Ok(y)
}

/// Applies the channel in the delay-Doppler domain, optionally adding
/// white complex Gaussian noise of variance `n0`.
pub fn apply_dd<R: Rng + ?Sized>(
    x: &DdFrame,
    ch: &ChannelRealization,
    noise: Option<&NoiseModel>,
    rng: &mut R,
) -> Result<DdFrame> {
    let mut y = apply_dd_noiseless(x, ch)?;
    if let Some(noise) = noise {
        for v in y.values_mut() {
            *v += complex_gaussian(noise.n0(), rng);
        }
    }
    Ok(y)
}

/// Applies the channel in the time-frequency domain: transform, multiply by
/// the per-bin channel response, add noise there, transform back. Noiseless
/// output matches [`apply_dd`] to numerical precision.
pub fn apply_tf<R: Rng + ?Sized>(
    x: &DdFrame,
    ch: &ChannelRealization,
    noise: Option<&NoiseModel>,
    rng: &mut R,
) -> Result<DdFrame> {
    check_dims(x, ch)?;
    let n = x.n_doppler();
    let m = x.m_delay();
    let mut tf = isfft(x);
    for mm in 0..m {
        for nn in 0..n {
            let mut h = Complex64::new(0.0, 0.0);
            for path in &ch.paths {
                let turns = -(mm as f64) * path.delay_idx as f64 / m as f64
                    + (nn as f64) * path.doppler_idx as f64 / n as f64;
                h += path.effective_gain(n, m)
                    * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * turns);
            }
            let mut v = tf.get(nn, mm) * h;
            if let Some(noise) = noise {
                v += complex_gaussian(noise.n0(), rng);
            }
            tf.set(nn, mm, v);
        }
    }
    Ok(sfft(&tf))
}
