//! Symplectic finite Fourier transforms between the delay-Doppler and
//! time-frequency grids.
//!
//! The forward map is
//!
//! ```text
//! X[n,m] = (1/sqrt(NM)) sum_k sum_l x[k,l] exp(j2pi (nk/N - ml/M))
//! ```
//!
//! i.e. an inverse DFT along the Doppler axis and a forward DFT along the
//! delay axis with a single `1/sqrt(NM)` scale, which makes the transform
//! unitary. [`sfft`] is its exact inverse. Both are computed with fast
//! transforms; the direct double sum is only used by tests as a reference.

use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::frame::{DdFrame, TfFrame};

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    let mut planner = PLANNER
        .get_or_init(|| Mutex::new(FftPlanner::new()))
        .lock()
        .expect("FFT planner lock poisoned");
    if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    }
}

/// Runs `fft` over every length-`rows` column of a column-major grid in place.
fn transform_columns(values: &mut [Complex64], rows: usize, fft: &Arc<dyn Fft<f64>>) {
    for col in values.chunks_mut(rows) {
        fft.process(col);
    }
}

/// Runs `fft` over every length-`cols` row of a column-major grid in place.
fn transform_rows(values: &mut [Complex64], rows: usize, cols: usize, fft: &Arc<dyn Fft<f64>>) {
    let mut scratch = vec![Complex64::new(0.0, 0.0); cols];
    for row in 0..rows {
        for col in 0..cols {
            scratch[col] = values[col * rows + row];
        }
        fft.process(&mut scratch);
        for col in 0..cols {
            values[col * rows + row] = scratch[col];
        }
    }
}

/// Delay-Doppler grid to time-frequency grid.
pub fn isfft(dd: &DdFrame) -> TfFrame {
    let n = dd.n_doppler();
    let m = dd.m_delay();
    let mut values = dd.values().to_vec();
    transform_columns(&mut values, n, &plan(n, true));
    transform_rows(&mut values, n, m, &plan(m, false));
    let scale = 1.0 / ((n * m) as f64).sqrt();
    for v in &mut values {
        *v *= scale;
    }
    TfFrame::from_values(n, m, values).expect("dimensions preserved")
}

/// Time-frequency grid back to the delay-Doppler grid; exact inverse of
/// [`isfft`].
pub fn sfft(tf: &TfFrame) -> DdFrame {
    let n = tf.n_slots();
    let m = tf.m_subcarriers();
    let mut values = tf.values().to_vec();
    transform_columns(&mut values, n, &plan(n, false));
    transform_rows(&mut values, n, m, &plan(m, true));
    let scale = 1.0 / ((n * m) as f64).sqrt();
    for v in &mut values {
        *v *= scale;
    }
    DdFrame::from_values(n, m, values).expect("dimensions preserved")
}
