//! Command-line front end for the delay-Doppler Monte-Carlo simulator:
//! flag parsing, run manifests and CSV emission. The binary (`otfs-sim`)
//! is a thin wrapper over these pieces so they stay testable.

pub mod args;
pub mod manifest;
pub mod report;

pub use args::{parse_snr_list, resolve, Args, Resolved};
pub use manifest::RunManifest;
pub use report::{emit_csv, write_csv};
