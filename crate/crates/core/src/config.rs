//! Run configuration: `key = value` lines with `#` comments.
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Unknown keys, malformed values and constraint violations are reported
//! with the line they came from.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::integrator::StepConfig;
use crate::kdv::{KdvParams, KdvVariant, Sigma};
use crate::models::{ModelKind, ModelParams};
use crate::noise::NoiseModel;

pub const DEFAULT_SEED: u64 = 20_240_607;

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    /// `η₀ = exp(-x⁴)`, `u₀ = 0`.
    Heap,
    /// KdV solitary wave of amplitude `kdv.soliton_amp` centred at the origin.
    Soliton,
    /// First snapshot block of a `x\teta\tu` file.
    File(PathBuf),
}

impl FromStr for Initial {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "heap" => Ok(Initial::Heap),
            "soliton" => Ok(Initial::Soliton),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(Initial::File(PathBuf::from(p))),
                _ => Err(format!("expected heap, soliton or file:<path>, got `{s}`")),
            },
        }
    }
}

impl std::fmt::Display for Initial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Initial::Heap => f.write_str("heap"),
            Initial::Soliton => f.write_str("soliton"),
            Initial::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub n: usize,
    pub half_length: f64,
    pub dealias: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: 2048,
            half_length: 50.0,
            dealias: false,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Arc<Grid>> {
        Ok(Arc::new(Grid::new(self.n, self.half_length)?.with_dealiasing(self.dealias)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub model: ModelParams,
    pub noise: NoiseModel,
    pub time: StepConfig,
    pub kdv: KdvParams,
    pub paths: usize,
    pub base_seed: u64,
    pub out_dir: Option<PathBuf>,
    /// `None` picks the heap for wave models and the soliton for KdV runs.
    pub initial: Option<Initial>,
    /// Worker threads for ensembles; `None` uses the available parallelism.
    pub workers: Option<usize>,
    /// Keep per-path snapshot files in ensemble runs.
    pub keep_paths: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: GridConfig::default(),
            model: ModelParams::default(),
            noise: NoiseModel {
                wavenumber: 2.0 * PI / 100.0,
                ..NoiseModel::default()
            },
            time: StepConfig::default(),
            kdv: KdvParams::default(),
            paths: 130,
            base_seed: DEFAULT_SEED,
            out_dir: None,
            initial: None,
            workers: None,
            keep_paths: false,
        }
    }
}

fn parse_value<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| format!("cannot parse `{value}`: {e}"))
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got `{value}`")),
    }
}

/// `none` or `inf` turn the taper off.
fn parse_alpha(value: &str) -> Result<Option<f64>, String> {
    match value {
        "none" | "inf" | "off" => Ok(None),
        _ => parse_value::<f64>(value).map(Some),
    }
}

impl RunConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "grid.n" => self.grid.n = parse_value(value)?,
            "grid.half_length" => self.grid.half_length = parse_value(value)?,
            "grid.dealias" => self.grid.dealias = parse_bool(value)?,
            "model.kind" => self.model.kind = parse_value(value)?,
            "model.form" => self.model.form = parse_value(value)?,
            "model.stochastic" => self.model.stochastic = parse_bool(value)?,
            "model.epsilon" => self.model.epsilon = parse_value(value)?,
            "model.beta" => self.model.beta = parse_value(value)?,
            "solver.tol" => self.model.solver.tol = parse_value(value)?,
            "solver.max_iter" => self.model.solver.max_iter = parse_value(value)?,
            "noise.amplitude" => self.noise.amplitude = parse_value(value)?,
            "noise.wavenumber" => self.noise.wavenumber = parse_value(value)?,
            "noise.taper_alpha" => self.noise.taper_alpha = parse_alpha(value)?,
            "noise.filter_additive" => self.noise.filter_additive = parse_bool(value)?,
            "noise.upsilon" => {
                let v = parse_value(value)?;
                self.noise.upsilon = v;
                self.kdv.upsilon = v;
            }
            "time.dt" => self.time.dt = parse_value(value)?,
            "time.t_end" => self.time.t_end = parse_value(value)?,
            "time.snapshot_every" => self.time.snapshot_every = parse_value(value)?,
            "kdv.variant" => self.kdv.variant = parse_value::<KdvVariant>(value)?,
            "kdv.soliton_amp" => self.kdv.soliton_amp = parse_value(value)?,
            "kdv.sigma_const" => self.kdv.sigma = Sigma::Constant(parse_value(value)?),
            "kdv.a_h" => self.kdv.a_h = parse_value(value)?,
            "kdv.integrating_factor" => self.kdv.integrating_factor = parse_bool(value)?,
            "paths" => self.paths = parse_value(value)?,
            "seed" | "base_seed" => self.base_seed = parse_value(value)?,
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            "initial" => self.initial = Some(parse_value(value)?),
            "workers" => {
                self.workers = match value {
                    "auto" => None,
                    _ => Some(parse_value(value)?),
                }
            }
            "ensemble.keep_paths" => self.keep_paths = parse_bool(value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Checks every constraint; the error names the offending key.
    fn check(&self) -> Result<(), (&'static str, String)> {
        Grid::new(self.grid.n, self.grid.half_length).map_err(|e| {
            let key = match &e {
                Error::InvalidGrid(m) if m.contains("half") => "grid.half_length",
                _ => "grid.n",
            };
            (key, e.to_string())
        })?;
        self.model.validate().map_err(|e| {
            let key = match &e {
                Error::InvalidParameter(m) if m.contains("beta") => "model.beta",
                Error::InvalidParameter(m) if m.contains("form") => "model.form",
                _ => "model.epsilon",
            };
            (key, e.to_string())
        })?;
        self.noise.validate().map_err(|e| {
            let key = match &e {
                Error::InvalidParameter(m) if m.contains("wavenumber") => "noise.wavenumber",
                Error::InvalidParameter(m) if m.contains("alpha") || m.contains("taper") => {
                    "noise.taper_alpha"
                }
                Error::InvalidParameter(m) if m.contains("upsilon") => "noise.upsilon",
                _ => "noise.amplitude",
            };
            (key, e.to_string())
        })?;
        self.time.validate().map_err(|e| {
            let key = match &e {
                Error::InvalidParameter(m) if m.starts_with("t_end") => "time.t_end",
                Error::InvalidParameter(m) if m.starts_with("snapshot") => "time.snapshot_every",
                _ => "time.dt",
            };
            (key, e.to_string())
        })?;
        self.kdv.validate().map_err(|e| {
            let key = match &e {
                Error::InvalidParameter(m) if m.starts_with("a_h") => "kdv.a_h",
                Error::InvalidParameter(m) if m.starts_with("sigma") => "kdv.sigma_const",
                Error::InvalidParameter(m) if m.starts_with("upsilon") => "noise.upsilon",
                _ => "kdv.soliton_amp",
            };
            (key, e.to_string())
        })?;
        if !(self.model.solver.tol > 0.0) {
            return Err(("solver.tol", "solver.tol must be positive".into()));
        }
        if self.model.solver.max_iter == 0 {
            return Err(("solver.max_iter", "solver.max_iter must be >= 1".into()));
        }
        if self.paths == 0 {
            return Err(("paths", "paths must be >= 1".into()));
        }
        if self.workers == Some(0) {
            return Err(("workers", "workers must be >= 1 (or auto)".into()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|(_, message)| Error::Config { line: 0, message })
    }

    /// Stokes (Ursell) number `ε/β²`, when dispersion is on.
    pub fn stokes_number(&self) -> Option<f64> {
        self.model.stokes_number()
    }

    pub fn initial_or(&self, fallback: Initial) -> Initial {
        self.initial.clone().unwrap_or(fallback)
    }

    /// Resolved configuration in the input syntax; parsing it gives back `self`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("grid.n", self.grid.n.to_string());
        line("grid.half_length", format!("{:?}", self.grid.half_length));
        line("grid.dealias", self.grid.dealias.to_string());
        line("model.kind", self.model.kind.short_name().to_string());
        line("model.form", self.model.form.to_string());
        line("model.stochastic", self.model.stochastic.to_string());
        line("model.epsilon", format!("{:?}", self.model.epsilon));
        line("model.beta", format!("{:?}", self.model.beta));
        line("solver.tol", format!("{:?}", self.model.solver.tol));
        line("solver.max_iter", self.model.solver.max_iter.to_string());
        line("noise.amplitude", format!("{:?}", self.noise.amplitude));
        line("noise.wavenumber", format!("{:?}", self.noise.wavenumber));
        line(
            "noise.taper_alpha",
            self.noise
                .taper_alpha
                .map_or_else(|| "none".to_string(), |a| format!("{a:?}")),
        );
        line("noise.filter_additive", self.noise.filter_additive.to_string());
        line("noise.upsilon", format!("{:?}", self.noise.upsilon));
        line("time.dt", format!("{:?}", self.time.dt));
        line("time.t_end", format!("{:?}", self.time.t_end));
        line("time.snapshot_every", self.time.snapshot_every.to_string());
        line("kdv.variant", self.kdv.variant.to_string());
        line("kdv.soliton_amp", format!("{:?}", self.kdv.soliton_amp));
        if let Sigma::Constant(s) = self.kdv.sigma {
            line("kdv.sigma_const", format!("{s:?}"));
        }
        line("kdv.a_h", format!("{:?}", self.kdv.a_h));
        line("kdv.integrating_factor", self.kdv.integrating_factor.to_string());
        line("paths", self.paths.to_string());
        line("seed", self.base_seed.to_string());
        if let Some(dir) = &self.out_dir {
            line("out_dir", dir.display().to_string());
        }
        if let Some(init) = &self.initial {
            line("initial", init.to_string());
        }
        line(
            "workers",
            self.workers.map_or_else(|| "auto".to_string(), |w| w.to_string()),
        );
        line("ensemble.keep_paths", self.keep_paths.to_string());
        out
    }
}

/// Parses and validates a configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut lines: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| Error::Config {
            line: line_no,
            message,
        };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(err(format!("missing value for `{key}`")));
        }
        let canonical = if key == "base_seed" { "seed" } else { key };
        if let Some(prev) = lines.insert(canonical.to_string(), line_no) {
            return Err(err(format!("`{key}` already set on line {prev}")));
        }
        cfg.set(key, value).map_err(|m| err(format!("{key}: {m}")))?;
    }
    cfg.check().map_err(|(key, message)| Error::Config {
        line: lines.get(key).copied().unwrap_or(0),
        message,
    })?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// `ModelKind` list such as `sv,boussinesq,sgn`.
pub fn parse_kinds(list: &str) -> Result<Vec<ModelKind>> {
    let kinds = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<ModelKind>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|message| Error::Config { line: 0, message })?;
    if kinds.is_empty() {
        return Err(Error::Config {
            line: 0,
            message: "empty model list".into(),
        });
    }
    Ok(kinds)
}
