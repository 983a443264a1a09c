//! Run orchestration behind the command-line tool: single paths, seeded
//! ensembles, model comparisons and KdV runs, each written to a staged
//! output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{Initial, RunConfig};
use crate::diagnostics::{self, absolute_drift, relative_drift, DiagnosticsRow, EnsembleStats};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::integrator::{simulate, SimulationFailure, StepConfig, Trajectory};
use crate::kdv::{self, KdvRun, KdvTank, KdvVariant, Sigma, WadatiReport};
use crate::models::{Form, ModelKind, ModelParams, State, WaveModel};
use crate::noise::{path_seed, RngStream};
use crate::output::{self, Staging};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn build_model(cfg: &RunConfig) -> Result<WaveModel> {
    WaveModel::new(cfg.grid.build()?, cfg.model, cfg.noise)
}

/// Initial data in the configured storage form.
pub fn initial_state(cfg: &RunConfig, grid: &Grid) -> Result<State> {
    let prim = match cfg.initial_or(Initial::Heap) {
        Initial::Heap => State::heap(grid),
        Initial::Soliton => State::new(
            kdv::soliton_on_grid(grid, cfg.kdv.soliton_amp, 0.0, 0.0),
            grid.zeros(),
        ),
        Initial::File(path) => {
            let (eta, vel) = output::read_initial(&path, grid)?;
            State::new(eta, vel)
        }
    };
    Ok(prim.to_form(Form::Primitive, cfg.model.form, cfg.model.epsilon))
}

fn meta(cfg: &RunConfig, command: &str, extra: &[(&str, String)]) -> String {
    let mut out = format!("# lu-waves {VERSION}\ncommand = {command}\n");
    match cfg.stokes_number() {
        Some(s) => {
            let _ = writeln!(out, "stokes_number = {s:?}");
        }
        None => out.push_str("stokes_number = inf\n"),
    }
    for (k, v) in extra {
        let _ = writeln!(out, "{k} = {v}");
    }
    out.push_str("# resolved configuration\n");
    out.push_str(&cfg.render());
    out
}

fn primitive_velocities(snapshots: &[State], p: &ModelParams) -> Vec<Field> {
    snapshots.iter().map(|s| s.velocity(p.form, p.epsilon)).collect()
}

fn diagnostic_rows(snapshots: &[State], p: &ModelParams, grid: &Grid) -> Result<Vec<DiagnosticsRow>> {
    snapshots
        .iter()
        .map(|s| diagnostics::diagnostics_row(s, p, grid))
        .collect()
}

fn write_path_files(staging: &Staging, prefix: &str, traj: &Trajectory, model: &WaveModel) -> Result<()> {
    let p = model.params();
    let snaps = &traj.snapshots;
    staging.write(
        &format!("{prefix}snapshots.tsv"),
        &output::snapshots_tsv(model.grid(), snaps, &primitive_velocities(snaps, p)),
    )?;
    let rows = diagnostic_rows(snaps, p, model.grid())?;
    staging.write(&format!("{prefix}diagnostics.tsv"), &output::diagnostics_tsv(&rows))
}

/// Single path with the stream of ensemble member 0. Writes `snapshots.tsv`,
/// `diagnostics.tsv` and `run.meta`.
pub fn run_single(cfg: &RunConfig, out: &Path, force: bool) -> Result<PathBuf> {
    cfg.validate()?;
    let model = build_model(cfg)?;
    let initial = initial_state(cfg, model.grid())?;
    let staging = Staging::new(out, force)?;
    let seed = path_seed(cfg.base_seed, 0);
    staging.write("run.meta", &meta(cfg, "run", &[("path_seed", seed.to_string())]))?;
    let mut rng = RngStream::new(seed);
    match simulate(&model, &initial, &cfg.time, &mut rng) {
        Ok(traj) => {
            write_path_files(&staging, "", &traj, &model)?;
            staging.commit()
        }
        Err(SimulationFailure { partial, error }) => {
            write_path_files(&staging, "", &partial, &model)?;
            staging.commit_partial(&error.to_string())?;
            Err(error)
        }
    }
}

/// One ensemble member.
#[derive(Debug)]
pub struct PathOutcome {
    pub index: usize,
    pub seed: u64,
    pub result: Result<Trajectory, SimulationFailure>,
}

/// Runs `paths` members on `workers` threads; the output is in index order.
pub fn simulate_ensemble(
    model: &WaveModel,
    initial: &State,
    step: &StepConfig,
    base_seed: u64,
    paths: usize,
    workers: Option<usize>,
) -> Result<Vec<PathOutcome>> {
    let threads = workers.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    });
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {threads} workers: {e}")))?;
    Ok(pool.install(|| {
        (0..paths)
            .into_par_iter()
            .map(|index| {
                let seed = path_seed(base_seed, index as u64);
                let mut rng = RngStream::new(seed);
                PathOutcome {
                    index,
                    seed,
                    result: simulate(model, initial, step, &mut rng),
                }
            })
            .collect()
    }))
}

/// Pointwise statistics of the successful members at each snapshot time.
pub fn ensemble_statistics(outcomes: &[PathOutcome]) -> Result<Vec<(f64, EnsembleStats)>> {
    let good: Vec<&Trajectory> = outcomes.iter().filter_map(|o| o.result.as_ref().ok()).collect();
    let Some(first) = good.first() else {
        return Err(Error::TooFewPaths(0));
    };
    first
        .snapshots
        .iter()
        .enumerate()
        .map(|(i, snap)| {
            let fields: Vec<Field> = good.iter().map(|t| t.snapshots[i].eta.clone()).collect();
            Ok((snap.t, diagnostics::ensemble_stats(&fields)?))
        })
        .collect()
}

#[derive(Debug)]
pub struct EnsembleReport {
    pub out_dir: PathBuf,
    pub completed: usize,
    /// `(index, message)` of every path that stopped early.
    pub failed: Vec<(usize, String)>,
}

/// Ensemble run: `stats_t<t>.tsv` per snapshot time, `paths.tsv` with per-path
/// conservation drifts, optional `path_<i>/` files and `run.meta`.
pub fn run_ensemble(cfg: &RunConfig, out: &Path, force: bool) -> Result<EnsembleReport> {
    cfg.validate()?;
    let model = build_model(cfg)?;
    let initial = initial_state(cfg, model.grid())?;
    let staging = Staging::new(out, force)?;
    staging.write(
        "run.meta",
        &meta(cfg, "ensemble", &[("seed_rule", "base_seed ^ (index * 0x9E3779B97F4A7C15)".into())]),
    )?;
    let outcomes = simulate_ensemble(
        &model,
        &initial,
        &cfg.time,
        cfg.base_seed,
        cfg.paths,
        cfg.workers,
    )?;

    let p = model.params();
    let mut summary = String::from("index\tseed\tstatus\tmass_drift\tmomentum_drift\tenergy_sw_drift\tmessage\n");
    let mut failed = Vec::new();
    for o in &outcomes {
        match &o.result {
            Ok(traj) => {
                let rows = diagnostic_rows(&traj.snapshots, p, model.grid())?;
                let _ = writeln!(
                    summary,
                    "{}\t{}\tok\t{}\t{}\t{}\t",
                    o.index,
                    o.seed,
                    output::fmt_f64(relative_drift(rows.iter().map(|r| r.mass))),
                    output::fmt_f64(absolute_drift(rows.iter().map(|r| r.momentum))),
                    output::fmt_f64(relative_drift(rows.iter().map(|r| r.energy_sw))),
                );
                if cfg.keep_paths {
                    write_path_files(&staging, &format!("path_{:04}/", o.index), traj, &model)?;
                }
            }
            Err(f) => {
                let _ = writeln!(summary, "{}\t{}\tfailed\t\t\t\t{}", o.index, o.seed, f.error);
            }
        }
    }
    staging.write("paths.tsv", &summary)?;

    for o in outcomes.iter() {
        if let Err(f) = &o.result {
            failed.push((o.index, f.error.to_string()));
        }
    }
    let completed = outcomes.len() - failed.len();
    let stats = match ensemble_statistics(&outcomes) {
        Ok(s) => s,
        Err(e) => {
            staging.commit_partial(&format!("{completed} of {} paths completed: {e}", cfg.paths))?;
            return Err(e);
        }
    };
    for (t, s) in &stats {
        staging.write(
            &format!("stats_t{}.tsv", output::time_label(*t)),
            &output::stats_tsv(model.grid(), *t, s),
        )?;
    }
    let out_dir = if failed.is_empty() {
        staging.commit()?
    } else {
        let ids: Vec<String> = failed.iter().map(|(i, _)| i.to_string()).collect();
        staging.commit_partial(&format!("failed paths: {}", ids.join(",")))?
    };
    Ok(EnsembleReport {
        out_dir,
        completed,
        failed,
    })
}

/// Final elevations of each kind at every snapshot, in `kinds` order.
pub fn simulate_kinds(cfg: &RunConfig, kinds: &[ModelKind]) -> Result<(Vec<f64>, Vec<Vec<Field>>)> {
    let grid = cfg.grid.build()?;
    let mut times = Vec::new();
    let mut columns = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let params = ModelParams { kind, ..cfg.model };
        let model = WaveModel::new(grid.clone(), params, cfg.noise)?;
        let initial = initial_state(cfg, &grid)?;
        let mut rng = RngStream::new(path_seed(cfg.base_seed, 0));
        let traj = simulate(&model, &initial, &cfg.time, &mut rng).map_err(|f| f.error)?;
        times = traj.snapshots.iter().map(|s| s.t).collect();
        columns.push(traj.snapshots.into_iter().map(|s| s.eta).collect());
    }
    Ok((times, columns))
}

/// Same configuration and seed for every kind; writes `compare.tsv` and `run.meta`.
pub fn run_compare(cfg: &RunConfig, kinds: &[ModelKind], out: &Path, force: bool) -> Result<PathBuf> {
    cfg.validate()?;
    for &kind in kinds {
        ModelParams { kind, ..cfg.model }.validate()?;
    }
    let grid = cfg.grid.build()?;
    let staging = Staging::new(out, force)?;
    let names: Vec<String> = kinds.iter().map(|k| k.short_name().to_string()).collect();
    staging.write("run.meta", &meta(cfg, "compare", &[("kinds", names.join(","))]))?;
    match simulate_kinds(cfg, kinds) {
        Ok((times, columns)) => {
            let labels: Vec<&str> = kinds.iter().map(|k| k.short_name()).collect();
            staging.write("compare.tsv", &output::compare_tsv(&grid, &labels, &times, &columns))?;
            staging.commit()
        }
        Err(e) => {
            staging.commit_partial(&e.to_string())?;
            Err(e)
        }
    }
}

#[derive(Debug)]
pub struct KdvReport {
    pub out_dir: PathBuf,
    pub run: KdvRun,
    pub wadati: Option<WadatiReport>,
}

/// KdV run: `snapshots.tsv` (`u` column zero), `kdv.tsv` with `β₁`, mass and
/// peak position per snapshot, and for constant-σ transport runs `wadati.tsv`.
pub fn run_kdv(cfg: &RunConfig, out: &Path, force: bool) -> Result<KdvReport> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let tank = KdvTank::new(grid.clone(), cfg.kdv.clone())?;
    let initial = match cfg.initial_or(Initial::Soliton) {
        Initial::Soliton => kdv::soliton_on_grid(&grid, cfg.kdv.soliton_amp, 0.0, 0.0),
        Initial::Heap => State::heap(&grid).eta,
        Initial::File(path) => output::read_initial(&path, &grid)?.0,
    };
    let staging = Staging::new(out, force)?;
    let seed = path_seed(cfg.base_seed, 0);
    staging.write("run.meta", &meta(cfg, "kdv", &[("path_seed", seed.to_string())]))?;
    let run = match tank.simulate(&initial, &cfg.time, &mut RngStream::new(seed)) {
        Ok(run) => run,
        Err(SimulationFailure { partial, error }) => {
            let zeros = vec![grid.zeros(); partial.snapshots.len()];
            staging.write("snapshots.tsv", &output::snapshots_tsv(&grid, &partial.snapshots, &zeros))?;
            staging.commit_partial(&error.to_string())?;
            return Err(error);
        }
    };
    let snaps = &run.trajectory.snapshots;
    let zeros = vec![grid.zeros(); snaps.len()];
    staging.write("snapshots.tsv", &output::snapshots_tsv(&grid, snaps, &zeros))?;
    let mut table = String::from("t\tbeta1\tmass\tpeak_x\n");
    for (s, b) in snaps.iter().zip(&run.brownian) {
        let _ = writeln!(
            table,
            "{}\t{}\t{}\t{}",
            output::fmt_f64(s.t),
            output::fmt_f64(*b),
            output::fmt_f64(grid.integrate(&s.eta)),
            output::fmt_f64(kdv::peak_position(&grid, &s.eta)?),
        );
    }
    staging.write("kdv.tsv", &table)?;

    let wadati = match (cfg.kdv.variant, &cfg.kdv.sigma) {
        (KdvVariant::Transport, Sigma::Constant(sigma)) => {
            let det = KdvTank::new(
                grid.clone(),
                kdv::KdvParams {
                    variant: KdvVariant::Deterministic,
                    ..cfg.kdv.clone()
                },
            )?;
            let reference = det
                .simulate(&initial, &cfg.time, &mut RngStream::new(seed))
                .map_err(|f| f.error)?;
            let report = kdv::wadati_shift_check(
                &grid,
                &run.trajectory,
                &reference.trajectory,
                cfg.kdv.upsilon.sqrt() * sigma,
                &run.brownian,
            )?;
            let mut text = String::from("kappa\tmax_error\n");
            for (k, e) in &report.errors {
                let _ = writeln!(text, "{}\t{}", output::fmt_f64(*k), output::fmt_f64(*e));
            }
            let _ = writeln!(text, "# best_kappa={}", output::fmt_f64(report.best_kappa));
            staging.write("wadati.tsv", &text)?;
            Some(report)
        }
        _ => None,
    };
    let out_dir = staging.commit()?;
    Ok(KdvReport {
        out_dir,
        run,
        wadati,
    })
}
