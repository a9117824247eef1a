pub mod bound;
pub mod toyargs;
pub mod divergence;
pub mod dro_check;
pub mod mi;
pub mod tau_sweep;
pub mod train_toy;
pub mod variance_sweep;
pub mod weights;

use crate::config::KvFile;
use anyhow::Result;
use std::path::PathBuf;

/// What a finished command reports back to `main` for the exit code.
pub struct Outcome {
    pub tolerance_failures: usize,
}

impl Outcome {
    pub fn clean() -> Self {
        Outcome {
            tolerance_failures: 0,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, clap::Args)]
pub struct CommonArgs {
    /// Flat `key = value` config file; flags override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output prefix: writes `<out>.csv` and `<out>.jsonl`.
    #[arg(long, default_value = "ncelab_out")]
    pub out: PathBuf,
    /// Base seed for all derived randomness.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl CommonArgs {
    pub fn load_file(&self) -> Result<KvFile> {
        match &self.config {
            Some(path) => KvFile::load(path),
            None => Ok(KvFile::default()),
        }
    }
}

/// Parallel-mode resolution: the flag wins; otherwise the documented
/// `NCELAB_PARALLEL` environment variable (value `1` or `true`).
pub fn parallel_default() -> bool {
    match std::env::var("NCELAB_PARALLEL") {
        Ok(v) => v == "1" || v.eq_ignore_ascii_case("true"),
        Err(_) => false,
    }
}
