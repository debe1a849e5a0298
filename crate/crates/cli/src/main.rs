//! `cocycle-lab`: runs one analysis from a configuration and caches the result.

// `!(x > 0.0)` style guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod cache;
mod config;
mod run;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use cache::{Manifest, Versions};
use config::RunConfig;
use run::{CliError, Command, VerifyKind};

#[derive(Parser)]
#[command(name = "cocycle-lab", version, about = "Numerics for quasi-periodic Schrödinger cocycles")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, as `key=value` with a TOML value.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for data-parallel maps; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Recompute even when a cached result exists.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Print the resolved configuration instead of running.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Lyapunov exponent at `energy`.
    Le,
    /// Lyapunov exponent over the energy window.
    Sweep,
    /// Uniform-hyperbolicity scan with the IDS.
    Spectrum,
    /// Gap edges of the widest IDS plateaus, by bisection.
    Gaps,
    /// One-sided profile and Hölder fit at `energy`.
    Holder,
    /// Resonance metrics and β at `energy`.
    Beta,
    /// Numeric checks of closed-form identities.
    Verify {
        #[arg(value_enum)]
        which: VerifyKind,
    },
}

impl Cmd {
    fn command(&self) -> Command {
        match self {
            Cmd::Le => Command::Le,
            Cmd::Sweep => Command::Sweep,
            Cmd::Spectrum => Command::Spectrum,
            Cmd::Gaps => Command::Gaps,
            Cmd::Holder => Command::Holder,
            Cmd::Beta => Command::Beta,
            Cmd::Verify { which } => Command::Verify(*which),
        }
    }
}

fn constants() -> BTreeMap<String, f64> {
    use cocycle_lab::{linalg2, lyapunov, regularity, verification};
    [
        ("eps_rot", linalg2::EPS_ROT),
        ("noise_factor", regularity::NOISE_FACTOR),
        ("exactness_ratio_cap", regularity::DEFAULT_RATIO_CAP),
        ("strip_affine_tol", lyapunov::AFFINE_TOL),
        ("lemma6_tol", verification::LEMMA6_TOL),
        ("norm_identity_tol", verification::NORM_IDENTITY_TOL),
        ("appendix_bound_cap", verification::BOUND_CAP),
        ("appendix_spread_cap", verification::SPREAD_CAP),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::from_path(p, &cli.overrides)?,
        None => RunConfig::parse("", &cli.overrides)?,
    };
    if cli.print_config {
        print!("{}", cfg.canonical());
        return Ok(run::EXIT_OK);
    }
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().map_err(|e| CliError::Io(e.to_string()))?;
    }
    let cmd = cli.command.command();
    let label = cmd.label();
    let hash = cfg.hash(&label);
    let dir = cache::entry_dir(Path::new(&cfg.out_dir), &hash);
    if !cli.no_cache {
        if let Some(hit) = cache::load(&dir) {
            eprintln!("cache hit: {}", hit.dir.display());
            print!("{}", hit.summary);
            return Ok(hit.manifest.status);
        }
    }
    let start = Instant::now();
    let out = run::run(cmd, &cfg)?;
    let manifest = Manifest {
        command: label,
        config_hash: hash,
        config: cfg.canonical(),
        versions: Versions { cocycle_lab: cocycle_lab::VERSION.into(), cli: env!("CARGO_PKG_VERSION").into() },
        constants: constants(),
        files: out.files.iter().map(|f| f.0.clone()).collect(),
        status: out.status,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    cache::store(&dir, &out.files, &out.summary, &manifest).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    eprintln!("wrote {}", dir.display());
    print!("{}", out.summary);
    Ok(out.status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
