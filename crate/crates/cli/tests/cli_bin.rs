//! Black-box tests of the otfs-sim binary: exit codes, file output and the
//! OTFS_THREADS environment variable.

use std::path::Path;
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_otfs-sim"))
}

fn tiny_run_args(out: &Path) -> Vec<String> {
    [
        "--snr", "6,10", "--detector", "hybrid", "--L", "1", "--n", "4", "--m", "8",
        "--paths", "2", "--lmax", "2", "--kmax", "1", "--frames", "5", "--min-errors", "20",
        "--max-frames", "100", "--seed", "5", "--count-ops",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain(["--out".to_string(), out.display().to_string()])
    .collect()
}

#[test]
fn successful_run_exits_zero_and_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let status = binary().args(tiny_run_args(&out)).status().unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let data_rows = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("snr_db"))
        .count();
    assert_eq!(data_rows, 2);
    assert!(text.lines().next().unwrap().starts_with("# otfs-sim"));
    assert!(text.contains("likelihood_evals"));
}

#[test]
fn invalid_flags_exit_nonzero_with_one_line_errors() {
    // Unknown flag: rejected by the parser.
    let output = binary().args(["--bogus"]).output().unwrap();
    assert!(!output.status.success());

    // Missing --L for hybrid: rejected by validation with a clear message.
    let output = binary()
        .args([
            "--snr", "10", "--detector", "hybrid", "--n", "4", "--m", "4", "--paths", "2",
            "--lmax", "1", "--kmax", "1",
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("hybrid requires --L"), "stderr: {stderr}");

    // Oracle beyond the enumeration guard.
    let output = binary()
        .args([
            "--snr", "10", "--detector", "oracle", "--n", "16", "--m", "16", "--paths", "2",
            "--lmax", "1", "--kmax", "1",
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn thread_cap_env_does_not_change_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let out_serial = dir.path().join("serial.csv");
    let out_wide = dir.path().join("wide.csv");
    let status = binary()
        .args(tiny_run_args(&out_serial))
        .env("OTFS_THREADS", "1")
        .status()
        .unwrap();
    assert!(status.success());
    let status = binary()
        .args(tiny_run_args(&out_wide))
        .env("OTFS_THREADS", "8")
        .status()
        .unwrap();
    assert!(status.success());

    let serial = std::fs::read_to_string(&out_serial).unwrap();
    let wide = std::fs::read_to_string(&out_wide).unwrap();
    assert_eq!(serial.lines().count(), wide.lines().count());
    for (la, lb) in serial.lines().zip(wide.lines()) {
        if la.starts_with("# timestamp") {
            continue;
        }
        if !la.starts_with('#') && !la.starts_with("snr_db") {
            let fa: Vec<&str> = la.split(',').collect();
            let fb: Vec<&str> = lb.split(',').collect();
            for (idx, (xa, xb)) in fa.iter().zip(&fb).enumerate() {
                if idx == 8 {
                    continue; // wall_ms
                }
                assert_eq!(xa, xb);
            }
            continue;
        }
        assert_eq!(la, lb);
    }

    // A bad value is rejected up front.
    let output = binary()
        .args(tiny_run_args(&dir.path().join("x.csv")))
        .env("OTFS_THREADS", "lots")
        .output()
        .unwrap();
    assert!(!output.status.success());
}
