//! Command-line frontend: toy synthesis, feature extraction, single runs,
//! benchmark matrices over dataset pairs and parameter sweeps.

pub mod args;
pub mod commands;
pub mod config;
pub mod output;

use anyhow::{bail, Context, Result};

pub use args::Cli;
use args::Command;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "SUBOT_THREADS";

/// Worker count from `SUBOT_THREADS`, or `None` for rayon's default.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("{THREADS_ENV}={v:?} is not a count"))?;
            if n == 0 {
                bail!("{THREADS_ENV} must be at least 1");
            }
            Ok(Some(n))
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("cannot start worker pool")?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Features(a) => commands::features(a),
        Command::Adapt(a) => commands::adapt(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::Sweep(a) => commands::sweep(a),
    })
}
