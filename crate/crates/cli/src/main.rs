use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sqg_cli::{
    parse_config, rerun_manifest, resolve_out_dir, run_experiment, CliError, CliResult, Kind, RunOptions,
};

#[derive(Parser)]
#[command(
    name = "sqg",
    version,
    about = "Stochastic SQG simulator and verification harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory or an ensemble.
    Simulate(RunArgs),
    /// Shared-noise nudged pairs and synchronization diagnostics.
    Couple(RunArgs),
    /// Long-time averages of observables.
    Ergodic(RunArgs),
    /// Property suites with a pass/fail report.
    Verify(RunArgs),
    /// Noise intensities and trace certificates.
    Spectrum(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment file (TOML).
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    config: Option<PathBuf>,
    /// Rerun from a manifest and check every artifact hash.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Overrides the root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned())
}

fn execute(kind: Kind, args: RunArgs) -> CliResult<()> {
    if let Some(m) = &args.manifest {
        if args.seed.is_some() {
            return Err(CliError::Config(
                "--seed cannot be combined with --manifest".into(),
            ));
        }
        let out = args
            .out
            .clone()
            .unwrap_or_else(|| m.parent().unwrap_or(Path::new(".")).join("rerun"));
        let manifest = sqg_cli::output::Manifest::read(m)?;
        if manifest.kind != kind.as_str() {
            return Err(CliError::Config(format!(
                "manifest is for `{}`, not `{}`",
                manifest.kind,
                kind.as_str()
            )));
        }
        rerun_manifest(
            m,
            &RunOptions {
                out_dir: out.clone(),
                threads: args.threads,
            },
        )?;
        println!(
            "reproduced {} artifacts in {}",
            manifest.outputs.len(),
            out.display()
        );
        return Ok(());
    }
    let path = args
        .config
        .as_deref()
        .expect("clap requires --config or --manifest");
    let mut spec = parse_config(path)?;
    if spec.kind() != kind {
        return Err(CliError::Config(format!(
            "{}: kind `{}` does not match subcommand `{}`",
            path.display(),
            spec.kind().as_str(),
            kind.as_str()
        )));
    }
    if let Some(seed) = args.seed {
        spec.set_seed(seed);
        spec.validate()?;
    }
    let out = resolve_out_dir(args.out.as_deref(), spec.out_dir(), &stem(path));
    let manifest = run_experiment(
        &spec,
        &RunOptions {
            out_dir: out.clone(),
            threads: args.threads,
        },
    )?;
    println!(
        "wrote {} artifacts to {}",
        manifest.outputs.len() + 1,
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Simulate(a) => (Kind::Simulate, a),
        Command::Couple(a) => (Kind::Couple, a),
        Command::Ergodic(a) => (Kind::Ergodic, a),
        Command::Verify(a) => (Kind::Verify, a),
        Command::Spectrum(a) => (Kind::Spectrum, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
