//! Command-line driver: experiment files, run orchestration and artifacts.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::{parse_config, parse_config_str, ExperimentSpec, Kind};
pub use error::{CliError, CliResult};
pub use run::{rerun_manifest, run_experiment, RunOptions};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "SQG_OUT_DIR";

/// Output directory: `--out`, then the file's `out_dir`, then
/// `$SQG_OUT_DIR/<stem>`, then `./runs/<stem>`.
pub fn resolve_out_dir(cli: Option<&Path>, spec_out: Option<&Path>, stem: &str) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(p) = spec_out {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(stem),
        _ => PathBuf::from("runs").join(stem),
    }
}
