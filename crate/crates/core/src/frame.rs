//! Delay-Doppler and time-frequency grids.
//!
//! Both grids are `N x M` complex matrices stored column-major: the element
//! at Doppler row `k` and delay column `l` (or slot `n` / subcarrier `m`)
//! lives at vector index `l * N + k`. Column-major matches the usual
//! vectorization `x = vec(X)` so a frame can be moved between its 2D and
//! flat views without copying.

use num_complex::Complex64;

use crate::{Error, Result};

/// Delay-Doppler grid: `n_doppler` rows, `m_delay` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DdFrame {
    n_doppler: usize,
    m_delay: usize,
    values: Vec<Complex64>,
}

/// Time-frequency grid: `n_slots` rows, `m_subcarriers` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TfFrame {
    n_slots: usize,
    m_subcarriers: usize,
    values: Vec<Complex64>,
}

macro_rules! grid_impl {
    ($ty:ident, $rows:ident, $cols:ident) => {
        impl $ty {
            /// All-zero grid.
            pub fn zeros($rows: usize, $cols: usize) -> Self {
                assert!($rows >= 1 && $cols >= 1, "grid dimensions must be at least 1x1");
                Self {
                    $rows,
                    $cols,
                    values: vec![Complex64::new(0.0, 0.0); $rows * $cols],
                }
            }

            /// Wraps a column-major value vector of length `rows * cols`.
            pub fn from_values($rows: usize, $cols: usize, values: Vec<Complex64>) -> Result<Self> {
                if $rows < 1 || $cols < 1 || values.len() != $rows * $cols {
                    return Err(Error::InputShape(format!(
                        "expected {} values for a {}x{} grid, got {}",
                        $rows * $cols,
                        $rows,
                        $cols,
                        values.len()
                    )));
                }
                Ok(Self { $rows, $cols, values })
            }

            pub fn $rows(&self) -> usize {
                self.$rows
            }

            pub fn $cols(&self) -> usize {
                self.$cols
            }

            /// Flat column-major index of `(row, col)`.
            #[inline]
            pub fn index(&self, row: usize, col: usize) -> usize {
                debug_assert!(row < self.$rows && col < self.$cols);
                col * self.$rows + row
            }

            #[inline]
            pub fn get(&self, row: usize, col: usize) -> Complex64 {
                self.values[self.index(row, col)]
            }

            #[inline]
            pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
                let idx = self.index(row, col);
                self.values[idx] = value;
            }

            /// Column-major flat view.
            pub fn values(&self) -> &[Complex64] {
                &self.values
            }

            pub fn values_mut(&mut self) -> &mut [Complex64] {
                &mut self.values
            }

            /// Frobenius norm.
            pub fn norm(&self) -> f64 {
                self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
            }

            /// Largest absolute entry-wise difference to another grid.
            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                assert_eq!(self.$rows, other.$rows);
                assert_eq!(self.$cols, other.$cols);
                self.values
                    .iter()
                    .zip(&other.values)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
            }
        }
    };
}

grid_impl!(DdFrame, n_doppler, m_delay);
grid_impl!(TfFrame, n_slots, m_subcarriers);
