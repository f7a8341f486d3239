//! Link-level simulation library for delay-Doppler (OTFS) modulation.
//!
//! The library covers the full uncoded link: bit-to-symbol mapping on a
//! delay-Doppler grid, the symplectic Fourier transforms between the
//! delay-Doppler and time-frequency domains, a random integer-resolution
//! multipath channel, iterative symbol-wise detectors (full message passing
//! and a reduced-complexity hybrid with parallel interference cancellation),
//! an exact enumeration reference for tiny frames, and a seeded Monte-Carlo
//! BER harness.
//!
//! All randomness flows through caller-owned seeded streams, so every result
//! is reproducible bit-for-bit regardless of thread count (see [`rng`]).
//!
//! The `parallel` feature (on by default) runs frame batches and detector
//! node updates on rayon; without it every loop falls back to plain
//! sequential iterators with identical results.

pub mod channel;
pub mod constellation;
pub mod detector;
pub mod frame;
pub mod oracle;
pub mod rng;
pub mod sim;
pub mod transform;

pub use num_complex::Complex64;

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input sequence or grid has the wrong shape.
    #[error("input shape: {0}")]
    InputShape(String),
    /// A configuration value is out of range or inconsistent.
    #[error("configuration: {0}")]
    Config(String),
    /// Two grids or a grid and a channel disagree on dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// Exact enumeration was requested for a frame too large to enumerate.
    #[error("size guard: {0}")]
    SizeGuard(String),
}

pub type Result<T> = std::result::Result<T, Error>;
