use std::io::Write;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use otfs_cli::{emit_csv, resolve, write_csv, Args, RunManifest};
use otfs_core::sim::run_sweep;

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(args: &Args) -> Result<()> {
    let threads = match std::env::var("OTFS_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .with_context(|| format!("OTFS_THREADS must be a nonnegative integer, got '{v}'"))?,
        Err(_) => 0,
    };
    let resolved = resolve(args, threads)?;
    for warning in &resolved.warnings {
        eprintln!("warning: {warning}");
    }

    let result = run_sweep(&resolved.sim, &resolved.opts)?;
    let manifest = RunManifest::new(&resolved.sim, &resolved.opts, &resolved.modulation);
    match &args.out {
        Some(path) => emit_csv(path, &result, &manifest)
            .with_context(|| format!("writing {}", path.display()))?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_csv(&mut lock, &result, &manifest)?;
            lock.flush()?;
        }
    }
    Ok(())
}
