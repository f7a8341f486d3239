//! CSV emission.
//!
//! Files start with the manifest as `#` comment lines (timestamp last),
//! then a header and one data row per SNR point. Integers are written
//! plainly; reals with 17 significant digits so parsing them back is
//! lossless.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use otfs_core::sim::{PointResult, SimResult};

use crate::manifest::RunManifest;

const BASE_HEADER: &str =
    "snr_db,frames,bits,bit_errors,ber,symbol_errors,ser,avg_iters,wall_ms,insufficient_errors";

/// 17 significant digits: lossless for f64 round trips.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_evals_per_frame(row: &PointResult) -> String {
    let total = row.likelihood_evals.unwrap_or(0);
    if row.frames > 0 && total % row.frames == 0 {
        (total / row.frames).to_string()
    } else {
        fmt_real(total as f64 / row.frames as f64)
    }
}

/// Writes the manifest, header and data rows.
pub fn write_csv<W: Write>(w: &mut W, result: &SimResult, manifest: &RunManifest) -> io::Result<()> {
    for line in manifest.comment_lines() {
        writeln!(w, "{line}")?;
    }
    let count_ops = result.points.iter().all(|p| p.likelihood_evals.is_some());
    if count_ops {
        writeln!(w, "{BASE_HEADER},likelihood_evals")?;
    } else {
        writeln!(w, "{BASE_HEADER}")?;
    }
    for row in &result.points {
        let mut line = format!(
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_real(row.snr_db),
            row.frames,
            row.bits,
            row.bit_errors,
            fmt_real(row.ber),
            row.symbol_errors,
            fmt_real(row.ser),
            fmt_real(row.avg_iters),
            row.wall_ms,
            row.insufficient_errors,
        );
        if count_ops {
            line.push(',');
            line.push_str(&fmt_evals_per_frame(row));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Writes the CSV to a file path.
pub fn emit_csv(path: &Path, result: &SimResult, manifest: &RunManifest) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(&mut w, result, manifest)?;
    w.flush()
}
