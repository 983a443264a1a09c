//! `luwaves`: run, ensemble, compare and KdV subcommands.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lu_waves::config::{self, RunConfig};
use lu_waves::runner;
use lu_waves::Error;

#[derive(Parser)]
#[command(name = "luwaves", version, about = "Shallow-water waves under location uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed (overrides `seed` from the file).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace an existing output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Single path: snapshots.tsv, diagnostics.tsv, run.meta.
    Run(Common),
    /// Seeded ensemble: stats_t<t>.tsv per snapshot time and paths.tsv.
    Ensemble {
        #[command(flatten)]
        common: Common,
        /// Ensemble size (overrides `paths`).
        #[arg(long)]
        paths: Option<usize>,
    },
    /// Same configuration for several models: compare.tsv.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated model kinds.
        #[arg(long, default_value = "sv,boussinesq,sgn")]
        kinds: String,
    },
    /// KdV family run: snapshots.tsv, kdv.tsv and, for constant-σ transport, wadati.tsv.
    Kdv(Common),
}

fn resolve(common: &Common, default_out: &str) -> Result<(RunConfig, PathBuf), Error> {
    let mut cfg = match &common.config {
        Some(path) => config::load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = Some(out.clone());
    }
    let out = cfg
        .out_dir
        .clone()
        .unwrap_or_else(|| Path::new(default_out).to_path_buf());
    Ok((cfg, out))
}

fn report_stokes(cfg: &RunConfig) {
    match cfg.stokes_number() {
        Some(s) => eprintln!("stokes number ε/β² = {s}"),
        None => eprintln!("stokes number ε/β² = inf (β = 0)"),
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(common) => {
            let (cfg, out) = resolve(&common, "out/run")?;
            report_stokes(&cfg);
            let dir = runner::run_single(&cfg, &out, common.force)?;
            println!("wrote {}", dir.display());
        }
        Command::Ensemble { common, paths } => {
            let (mut cfg, out) = resolve(&common, "out/ensemble")?;
            if let Some(p) = paths {
                cfg.paths = p;
            }
            report_stokes(&cfg);
            let report = runner::run_ensemble(&cfg, &out, common.force)?;
            println!(
                "wrote {} ({} of {} paths completed)",
                report.out_dir.display(),
                report.completed,
                cfg.paths
            );
            if let Some((index, message)) = report.failed.first() {
                eprintln!("{} paths failed; first: path {index}: {message}", report.failed.len());
                return Err(Error::NonFinite("ensemble member"));
            }
        }
        Command::Compare { common, kinds } => {
            let (cfg, out) = resolve(&common, "out/compare")?;
            let kinds = config::parse_kinds(&kinds)?;
            report_stokes(&cfg);
            let dir = runner::run_compare(&cfg, &kinds, &out, common.force)?;
            println!("wrote {}", dir.display());
        }
        Command::Kdv(common) => {
            let (cfg, out) = resolve(&common, "out/kdv")?;
            let report = runner::run_kdv(&cfg, &out, common.force)?;
            println!("wrote {}", report.out_dir.display());
            if let Some(w) = report.wadati {
                for (kappa, err) in &w.errors {
                    println!("wadati kappa = {kappa:.6}: max error {err:.3e}");
                }
                println!("measured kappa = {:.6}", w.best_kappa);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
