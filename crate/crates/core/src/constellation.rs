//! Modulation alphabets with bit labels and symbol priors.
//!
//! A [`Constellation`] is an ordered list of unit-average-energy complex
//! points, one bit label per point (all labels the same length), and a prior
//! probability per point. The detectors treat the priors as the a-priori
//! distribution of every transmitted symbol; they default to uniform.

use num_complex::Complex64;

use crate::{Error, Result};

/// Ordered modulation alphabet with Gray bit labels and per-point priors.
///
/// Immutable after construction, so it can be shared freely across threads.
#[derive(Debug, Clone)]
pub struct Constellation {
    points: Vec<Complex64>,
    bit_labels: Vec<Vec<u8>>,
    priors: Vec<f64>,
    bits_per_symbol: usize,
    /// Maps the integer value of a label (MSB-first) to the point index.
    label_lookup: Vec<usize>,
}

impl Constellation {
    /// Builds a constellation and checks its invariants: the size is a power
    /// of two, labels are distinct and of equal length log2(size), the mean
    /// point energy is 1 and the priors form a probability vector.
    pub fn new(
        points: Vec<Complex64>,
        bit_labels: Vec<Vec<u8>>,
        priors: Vec<f64>,
    ) -> Result<Self> {
        let q = points.len();
        if q == 0 || !q.is_power_of_two() {
            return Err(Error::Config(format!(
                "constellation size must be a power of two, got {q}"
            )));
        }
        if bit_labels.len() != q || priors.len() != q {
            return Err(Error::InputShape(format!(
                "expected {q} labels and priors, got {} and {}",
                bit_labels.len(),
                priors.len()
            )));
        }
        let b = q.trailing_zeros() as usize;
        let mut label_lookup = vec![usize::MAX; q];
        for (idx, label) in bit_labels.iter().enumerate() {
            if label.len() != b {
                return Err(Error::InputShape(format!(
                    "label {idx} has length {}, expected {b}",
                    label.len()
                )));
            }
            if label.iter().any(|&bit| bit > 1) {
                return Err(Error::InputShape(format!("label {idx} has a non-bit entry")));
            }
            let value = label_value(label);
            if label_lookup[value] != usize::MAX {
                return Err(Error::Config(format!("duplicate bit label at index {idx}")));
            }
            label_lookup[value] = idx;
        }
        let mean_energy: f64 = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / q as f64;
        if (mean_energy - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "mean point energy must be 1, got {mean_energy}"
            )));
        }
        if priors.iter().any(|&p| p < 0.0) {
            return Err(Error::Config("priors must be nonnegative".into()));
        }
        let prior_sum: f64 = priors.iter().sum();
        if (prior_sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("priors must sum to 1, got {prior_sum}")));
        }
        Ok(Self {
            points,
            bit_labels,
            priors,
            bits_per_symbol: b,
            label_lookup,
        })
    }

    /// Unit-energy QPSK with the Gray labeling
    /// `00 -> (1+j)/sqrt(2)`, `01 -> (-1+j)/sqrt(2)`,
    /// `11 -> (-1-j)/sqrt(2)`, `10 -> (1-j)/sqrt(2)` and uniform priors.
    pub fn qpsk() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let points = vec![
            Complex64::new(s, s),
            Complex64::new(-s, s),
            Complex64::new(-s, -s),
            Complex64::new(s, -s),
        ];
        let bit_labels = vec![vec![0, 0], vec![0, 1], vec![1, 1], vec![1, 0]];
        let priors = vec![0.25; 4];
        Self::new(points, bit_labels, priors).expect("QPSK constants satisfy the invariants")
    }

    /// Number of points in the alphabet.
    pub fn size(&self) -> usize {
        self.points.len()
    }

    /// Bits carried by one symbol.
    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, idx: usize) -> Complex64 {
        self.points[idx]
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn bit_label(&self, idx: usize) -> &[u8] {
        &self.bit_labels[idx]
    }

    /// Maps a bit sequence (values 0/1) to point indices, consuming
    /// `bits_per_symbol` bits per symbol, MSB first.
    pub fn map_bits_to_indices(&self, bits: &[u8]) -> Result<Vec<usize>> {
        if bits.len() % self.bits_per_symbol != 0 {
            return Err(Error::InputShape(format!(
                "bit count {} is not divisible by {}",
                bits.len(),
                self.bits_per_symbol
            )));
        }
        Ok(bits
            .chunks(self.bits_per_symbol)
            .map(|chunk| self.label_lookup[label_value(chunk)])
            .collect())
    }

    /// Maps a bit sequence to constellation points.
    pub fn map_bits(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        Ok(self
            .map_bits_to_indices(bits)?
            .into_iter()
            .map(|idx| self.points[idx])
            .collect())
    }

    /// Index of the nearest point in Euclidean distance; ties go to the
    /// lowest point index.
    pub fn nearest_point(&self, s: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (idx, p) in self.points.iter().enumerate() {
            let d = (s - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = idx;
            }
        }
        best
    }

    /// Hard-demaps symbols to the bit labels of their nearest points.
    pub fn demap_hard(&self, symbols: &[Complex64]) -> Vec<u8> {
        let mut bits = Vec::with_capacity(symbols.len() * self.bits_per_symbol);
        for &s in symbols {
            bits.extend_from_slice(&self.bit_labels[self.nearest_point(s)]);
        }
        bits
    }
}

fn label_value(label: &[u8]) -> usize {
    label.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qpsk_point(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    #[test]
    fn qpsk_label_table() {
        let c = Constellation::qpsk();
        assert_eq!(c.size(), 4);
        assert_eq!(c.bits_per_symbol(), 2);
        // "00" is the first point.
        let p00 = c.map_bits(&[0, 0]).unwrap()[0];
        assert!((p00 - qpsk_point(1.0, 1.0)).norm() < 1e-15);
        let p11 = c.map_bits(&[1, 1]).unwrap()[0];
        assert!((p11 - qpsk_point(-1.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn qpsk_unit_average_energy() {
        let c = Constellation::qpsk();
        let mean: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / 4.0;
        assert!((mean - 1.0).abs() < 1e-12);
        let prior_sum: f64 = c.priors().iter().sum();
        assert!((prior_sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qpsk_gray_adjacency() {
        // Any two points at minimal Euclidean distance differ in exactly one bit.
        let c = Constellation::qpsk();
        let min_d = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| (c.point(i) - c.point(j)).norm())
            .fold(f64::INFINITY, f64::min);
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    continue;
                }
                let d = (c.point(i) - c.point(j)).norm();
                if (d - min_d).abs() < 1e-9 {
                    let hamming: usize = c
                        .bit_label(i)
                        .iter()
                        .zip(c.bit_label(j))
                        .filter(|(a, b)| a != b)
                        .count();
                    assert_eq!(hamming, 1, "points {i},{j} are neighbors but differ in {hamming} bits");
                }
            }
        }
    }

    #[test]
    fn map_two_symbols() {
        let c = Constellation::qpsk();
        let symbols = c.map_bits(&[0, 0, 1, 1]).unwrap();
        assert_eq!(symbols.len(), 2);
        assert!((symbols[0] - qpsk_point(1.0, 1.0)).norm() < 1e-15);
        assert!((symbols[1] - qpsk_point(-1.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn map_rejects_ragged_input() {
        let c = Constellation::qpsk();
        assert!(matches!(c.map_bits(&[0, 1, 0]), Err(Error::InputShape(_))));
    }

    #[test]
    fn demap_exact_and_perturbed() {
        let c = Constellation::qpsk();
        assert_eq!(c.demap_hard(&[qpsk_point(1.0, 1.0)]), vec![0, 0]);
        assert_eq!(c.demap_hard(&[Complex64::new(0.9, 0.8)]), vec![0, 0]);
    }

    #[test]
    fn demap_tie_breaks_to_lowest_index() {
        let c = Constellation::qpsk();
        // The origin is equidistant from all four points.
        assert_eq!(c.nearest_point(Complex64::new(0.0, 0.0)), 0);
        assert_eq!(c.demap_hard(&[Complex64::new(0.0, 0.0)]), c.bit_label(0).to_vec());
    }

    #[test]
    fn round_trip_all_byte_patterns() {
        let c = Constellation::qpsk();
        for value in 0u16..256 {
            let bits: Vec<u8> = (0..8).map(|i| ((value >> (7 - i)) & 1) as u8).collect();
            let symbols = c.map_bits(&bits).unwrap();
            assert_eq!(c.demap_hard(&symbols), bits);
        }
    }

    #[test]
    fn rejects_bad_energy_and_priors() {
        let pts = vec![Complex64::new(1.0, 0.0), Complex64::new(-2.0, 0.0)];
        let labels = vec![vec![0], vec![1]];
        assert!(Constellation::new(pts, labels, vec![0.5, 0.5]).is_err());

        let pts = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        let labels = vec![vec![0], vec![1]];
        assert!(Constellation::new(pts.clone(), labels.clone(), vec![0.9, 0.2]).is_err());
        assert!(Constellation::new(pts.clone(), vec![vec![0], vec![0]], vec![0.5, 0.5]).is_err());
        assert!(Constellation::new(pts, labels, vec![0.5, 0.5]).is_ok());
    }
}
