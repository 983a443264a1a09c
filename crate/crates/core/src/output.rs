//! Tab-separated output files and staged (all-or-nothing) output directories.
//!
//! Numbers are written with 17 significant digits so every `f64` round-trips.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnostics::{DiagnosticsRow, EnsembleStats};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::models::State;

/// Name of the marker written when a run stops early.
pub const PARTIAL_MARKER: &str = "PARTIAL";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Short label for a snapshot time, used in file names (`stats_t5.tsv`).
pub fn time_label(t: f64) -> String {
    let rounded = (t * 1e9).round() / 1e9;
    format!("{rounded}")
}

/// Blocks headed `# t=<value>` with rows `x\teta\tu`.
pub fn snapshots_tsv(grid: &Grid, snapshots: &[State], velocities: &[Field]) -> String {
    let mut out = String::from("# x\teta\tu\n");
    for (s, u) in snapshots.iter().zip(velocities) {
        let _ = writeln!(out, "# t={}", fmt_f64(s.t));
        for ((x, e), v) in grid.nodes().iter().zip(s.eta.iter()).zip(u.iter()) {
            let _ = writeln!(out, "{}\t{}\t{}", fmt_f64(*x), fmt_f64(*e), fmt_f64(*v));
        }
    }
    out
}

pub fn diagnostics_tsv(rows: &[DiagnosticsRow]) -> String {
    let mut out = String::from("t\tmass\tmomentum\tenergy_sw\tenergy_sgn\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            fmt_f64(r.t),
            fmt_f64(r.mass),
            fmt_f64(r.momentum),
            fmt_f64(r.energy_sw),
            fmt_f64(r.energy_sgn)
        );
    }
    out
}

/// `x\tmean_eta\tstd_eta` for one snapshot time.
pub fn stats_tsv(grid: &Grid, t: f64, stats: &EnsembleStats) -> String {
    let mut out = format!("# t={}\n# paths={}\nx\tmean_eta\tstd_eta\n", fmt_f64(t), stats.n_paths);
    for ((x, m), s) in grid
        .nodes()
        .iter()
        .zip(stats.mean_eta.iter())
        .zip(stats.std_eta.iter())
    {
        let _ = writeln!(out, "{}\t{}\t{}", fmt_f64(*x), fmt_f64(*m), fmt_f64(*s));
    }
    out
}

/// Aligned columns `x\teta_<label>...`, one block per snapshot time.
pub fn compare_tsv(grid: &Grid, labels: &[&str], times: &[f64], columns: &[Vec<Field>]) -> String {
    let mut out = String::from("x");
    for l in labels {
        let _ = write!(out, "\teta_{l}");
    }
    out.push('\n');
    for (i, t) in times.iter().enumerate() {
        let _ = writeln!(out, "# t={}", fmt_f64(*t));
        for (j, x) in grid.nodes().iter().enumerate() {
            out.push_str(&fmt_f64(*x));
            for col in columns {
                out.push('\t');
                out.push_str(&fmt_f64(col[i][j]));
            }
            out.push('\n');
        }
    }
    out
}

/// Reads the first snapshot block of a `x\teta\tu` file (the `u` column may be absent).
pub fn read_initial(path: &Path, grid: &Grid) -> Result<(Field, Field)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, message: String| Error::Config {
        line,
        message: format!("{}: {message}", path.display()),
    };
    let mut eta = Vec::with_capacity(grid.n());
    let mut vel = Vec::with_capacity(grid.n());
    let mut blocks = 0;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with("# t=") {
            blocks += 1;
            if blocks > 1 {
                break;
            }
            continue;
        }
        if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
            continue;
        }
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(|c| c.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(idx + 1, format!("bad number: {e}")))?;
        match cols.as_slice() {
            [_, e] => {
                eta.push(*e);
                vel.push(0.0);
            }
            [_, e, u, ..] => {
                eta.push(*e);
                vel.push(*u);
            }
            _ => return Err(bad(idx + 1, "expected `x eta [u]`".into())),
        }
    }
    if eta.len() != grid.n() {
        return Err(bad(0, format!("{} rows, grid has {} points", eta.len(), grid.n())));
    }
    Ok((Field::new(eta), Field::new(vel)))
}

/// Output directory written under a temporary name and renamed into place.
#[derive(Debug)]
pub struct Staging {
    target: PathBuf,
    temp: PathBuf,
    force: bool,
}

impl Staging {
    /// Fails with [`Error::OutputExists`] if `target` exists and `force` is off.
    pub fn new(target: &Path, force: bool) -> Result<Self> {
        if target.exists() && !force {
            return Err(Error::OutputExists(target.to_path_buf()));
        }
        let name = target
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
        let temp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
        if temp.exists() {
            fs::remove_dir_all(&temp).map_err(|e| Error::io(&temp, e))?;
        }
        fs::create_dir(&temp).map_err(|e| Error::io(&temp, e))?;
        Ok(Staging {
            target: target.to_path_buf(),
            temp,
            force,
        })
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.temp.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))
    }

    /// Moves the staged files into place.
    pub fn commit(self) -> Result<PathBuf> {
        if self.target.exists() {
            if !self.force {
                return Err(Error::OutputExists(self.target.clone()));
            }
            fs::remove_dir_all(&self.target).map_err(|e| Error::io(&self.target, e))?;
        }
        fs::rename(&self.temp, &self.target).map_err(|e| Error::io(&self.target, e))?;
        Ok(self.target)
    }

    /// Writes the partial-output marker with `reason` and commits what was staged.
    pub fn commit_partial(self, reason: &str) -> Result<PathBuf> {
        self.write(PARTIAL_MARKER, &format!("{reason}\n"))?;
        self.commit()
    }
}
