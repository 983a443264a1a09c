//! KdV family on the periodic tank: deterministic, transport-noise and
//! dissipative variants, the solitary wave, and the random-translation check
//! for space-constant transport noise.
//!
//! Equations are written in the laboratory frame:
//!
//! ```text
//! dη + (c₀ η_x + (3/2) η η_x + (1/6) η_xxx - ½ a_H η_xx) dt + √Υ σ∘dβ η_x = 0
//! ```
//!
//! The dissipative term is present for the dissipative variant only, the noise
//! term for the transport variant only.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::integrator::{self, Dynamics, SimulationFailure, StepConfig, Trajectory};
use crate::models::{State, Tendency};
use crate::noise::{RngStream, WienerIncrement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KdvVariant {
    Deterministic,
    Transport,
    Dissipative,
}

impl fmt::Display for KdvVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KdvVariant::Deterministic => "deterministic",
            KdvVariant::Transport => "transport",
            KdvVariant::Dissipative => "dissipative",
        })
    }
}

impl FromStr for KdvVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "deterministic" | "det" => Ok(KdvVariant::Deterministic),
            "transport" | "lu" => Ok(KdvVariant::Transport),
            "dissipative" | "diss" => Ok(KdvVariant::Dissipative),
            other => Err(format!(
                "unknown KdV variant `{other}` (expected deterministic, transport or dissipative)"
            )),
        }
    }
}

/// Spatial shape of the transport noise amplitude σ.
#[derive(Debug, Clone, PartialEq)]
pub enum Sigma {
    Constant(f64),
    Field(Field),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdvParams {
    pub variant: KdvVariant,
    pub upsilon: f64,
    pub sigma: Sigma,
    /// Constant variance `a_H` of the dissipative variant.
    pub a_h: f64,
    pub soliton_amp: f64,
    /// Linear advection speed `c₀`.
    pub advection: f64,
    pub nonlinear: f64,
    pub dispersion: f64,
    /// Treat the linear part exactly (Lawson RK4); off means plain hybrid stepping.
    pub integrating_factor: bool,
}

impl Default for KdvParams {
    fn default() -> Self {
        KdvParams {
            variant: KdvVariant::Deterministic,
            upsilon: 1.0,
            sigma: Sigma::Constant(0.01),
            a_h: 0.0,
            soliton_amp: 0.1,
            advection: 1.0,
            nonlinear: 1.5,
            dispersion: 1.0 / 6.0,
            integrating_factor: true,
        }
    }
}

impl KdvParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.upsilon,
            self.a_h,
            self.soliton_amp,
            self.advection,
            self.nonlinear,
            self.dispersion,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("KdV parameters must be finite".into()));
        }
        if self.a_h < 0.0 {
            return Err(Error::InvalidParameter(format!("a_h must be >= 0, got {}", self.a_h)));
        }
        if self.upsilon < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "upsilon must be >= 0, got {}",
                self.upsilon
            )));
        }
        if !(self.soliton_amp > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "soliton amplitude must be > 0, got {}",
                self.soliton_amp
            )));
        }
        match &self.sigma {
            Sigma::Constant(s) if !s.is_finite() => {
                Err(Error::InvalidParameter("sigma must be finite".into()))
            }
            Sigma::Field(f) if !f.is_finite() => Err(Error::NonFinite("sigma field")),
            _ => Ok(()),
        }
    }

    fn dissipation(&self) -> f64 {
        match self.variant {
            KdvVariant::Dissipative => self.a_h,
            _ => 0.0,
        }
    }
}

/// Solitary wave `A sech²(√(3A/4)(x - (1 + A/2) t))` of the unit-advection equation.
pub fn soliton(amp: f64, x: &[f64], t: f64) -> Field {
    let width = (0.75 * amp).sqrt();
    let centre = soliton_speed(amp) * t;
    x.iter().map(|&xi| amp * sech2(width * (xi - centre))).collect()
}

pub fn soliton_speed(amp: f64) -> f64 {
    1.0 + 0.5 * amp
}

/// [`soliton`] on the periodic tank, started at `x0` and measured from the nearest image.
pub fn soliton_on_grid(grid: &Grid, amp: f64, x0: f64, t: f64) -> Field {
    let width = (0.75 * amp).sqrt();
    let centre = x0 + soliton_speed(amp) * t;
    grid.field_from_fn(|x| amp * sech2(width * grid.wrap(x - centre)))
}

fn sech2(z: f64) -> f64 {
    let c = z.cosh();
    1.0 / (c * c)
}

/// Location of the maximum of the band-limited interpolant of `f`.
///
/// Newton iteration on the spectral derivative, started from the largest node.
pub fn peak_position(grid: &Grid, f: &[f64]) -> Result<f64> {
    grid.check(f)?;
    let j0 = f
        .iter()
        .enumerate()
        .fold(0, |best, (j, v)| if *v > f[best] { j } else { best });
    let d1 = grid.deriv(f, 1)?;
    let d2 = grid.deriv(f, 2)?;
    let mut offset = 0.0;
    for _ in 0..20 {
        // Value at x_j0 + offset is the shifted field read at node j0.
        let g1 = grid.shift(&d1, -offset)?[j0];
        let g2 = grid.shift(&d2, -offset)?[j0];
        if g2 >= 0.0 {
            break;
        }
        let step = -g1 / g2;
        offset += step.clamp(-grid.dx(), grid.dx());
        if step.abs() < 1e-14 {
            break;
        }
    }
    Ok(grid.wrap(grid.nodes()[j0] + offset))
}

/// KdV family on a periodic grid.
#[derive(Debug, Clone)]
pub struct KdvTank {
    grid: Arc<Grid>,
    params: KdvParams,
    sigma: Field,
}

impl KdvTank {
    pub fn new(grid: Arc<Grid>, params: KdvParams) -> Result<Self> {
        params.validate()?;
        let sigma = match &params.sigma {
            Sigma::Constant(s) => Field::constant(grid.n(), *s),
            Sigma::Field(f) => {
                grid.check(f)?;
                f.clone()
            }
        };
        Ok(KdvTank { grid, params, sigma })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &KdvParams {
        &self.params
    }

    /// Symbol of the linear operator `-c₀∂x - (1/6)∂³ + ½a_H∂²`; odd parts vanish at Nyquist.
    fn linear_symbol(&self, slot: usize, k: f64) -> Complex64 {
        let p = &self.params;
        let even = -0.5 * self.params.dissipation() * k * k;
        if slot == self.grid.nyquist_slot() {
            return Complex64::new(even, 0.0);
        }
        Complex64::new(even, -p.advection * k + p.dispersion * k * k * k)
    }

    /// Applies `exp(L τ)`.
    fn propagate(&self, f: &[f64], tau: f64) -> Result<Field> {
        self.grid
            .apply_symbol(f, |slot, k| (self.linear_symbol(slot, k) * tau).exp())
    }

    fn linear(&self, eta: &[f64]) -> Result<Field> {
        self.grid.apply_symbol(eta, |slot, k| self.linear_symbol(slot, k))
    }

    /// `-(3/2) η η_x`.
    fn nonlinear(&self, eta: &[f64]) -> Result<Field> {
        let d = self.grid.deriv(eta, 1)?;
        let c = self.params.nonlinear;
        Ok(eta.iter().zip(d.iter()).map(|(e, dx)| -c * e * dx).collect())
    }

    fn drift_eta(&self, eta: &[f64]) -> Result<Field> {
        Ok(self.linear(eta)?.add(&self.nonlinear(eta)?))
    }

    /// `-√Υ w η_x` with `w = σ∘dβ`.
    fn martingale_eta(&self, eta: &[f64], w: &[f64]) -> Result<Field> {
        let d = self.grid.deriv(eta, 1)?;
        let s = self.params.upsilon.sqrt();
        Ok(d.iter().zip(w).map(|(dx, wi)| -s * wi * dx).collect())
    }

    /// Sampled `σ∘dβ` for the transport variant, `None` otherwise.
    pub fn noise_sample(&self, inc: &WienerIncrement) -> Option<Field> {
        (self.params.variant == KdvVariant::Transport)
            .then(|| self.sigma.scaled(inc.d_beta1))
    }

    /// Drift and martingale tendencies; the velocity slots stay zero.
    pub fn tendency(&self, eta: &[f64], noise: Option<&Field>) -> Result<Tendency> {
        self.grid.check(eta)?;
        let drift_eta = self.drift_eta(eta)?;
        let mart_eta = match noise {
            Some(w) if self.params.variant == KdvVariant::Transport => {
                self.martingale_eta(eta, w)?
            }
            _ => self.grid.zeros(),
        };
        Ok(Tendency {
            drift_eta,
            drift_vel: self.grid.zeros(),
            mart_eta,
            mart_vel: self.grid.zeros(),
        })
    }

    /// Lawson RK4 for the drift plus the Euler-Heun martingale increment carried by `exp(L dt)`.
    fn integrating_factor_step(&self, s: &State, inc: &WienerIncrement) -> Result<State> {
        let dt = inc.dt;
        let u = &s.eta;
        let half = |f: &[f64]| self.propagate(f, 0.5 * dt);
        let k1 = self.nonlinear(u)?;
        let mut a = u.clone();
        a.axpy(0.5 * dt, &k1);
        let k2 = self.nonlinear(&half(&a)?)?;
        let e_half_u = half(u)?;
        let mut b = e_half_u.clone();
        b.axpy(0.5 * dt, &k2);
        let k3 = self.nonlinear(&b)?;
        let mut c = half(&e_half_u)?;
        c.axpy(dt, &half(&k3)?);
        let k4 = self.nonlinear(&c)?;

        // E(u + dt/6 k1) + dt/3 E½(k2 + k3) + dt/6 k4
        let mut inner = u.clone();
        inner.axpy(dt / 6.0, &k1);
        let mut mid = k2;
        mid.axpy(1.0, &k3);
        let mut next = half(&half(&inner)?)?;
        next.axpy(dt / 3.0, &half(&mid)?);
        next.axpy(dt / 6.0, &k4);

        if let Some(w) = self.noise_sample(inc) {
            let m1 = self.martingale_eta(u, &w)?;
            let mut pred = u.clone();
            pred.axpy(1.0, &m1);
            let m2 = self.martingale_eta(&pred, &w)?;
            let mut incr = m1;
            incr.axpy(1.0, &m2);
            next.axpy(0.5, &self.propagate(&incr, dt)?);
        }
        let mut out = State::new(next, s.vel.clone());
        out.t = s.t + dt;
        self.check(&out)?;
        Ok(out)
    }

    /// Advances `initial` (elevation only) and records `β₁` at every snapshot.
    pub fn simulate(
        &self,
        initial: &Field,
        cfg: &StepConfig,
        rng: &mut RngStream,
    ) -> Result<KdvRun, SimulationFailure> {
        let mut increments = Vec::with_capacity(cfg.n_steps());
        self.simulate_with(initial, cfg, |_| {
            let inc = rng.sample_increment(cfg.dt);
            increments.push(inc);
            inc
        })
    }

    /// Like [`KdvTank::simulate`] with caller-supplied increments.
    pub fn simulate_with(
        &self,
        initial: &Field,
        cfg: &StepConfig,
        mut increments: impl FnMut(usize) -> WienerIncrement,
    ) -> Result<KdvRun, SimulationFailure> {
        let start = State::new(initial.clone(), self.grid.zeros());
        let mut path = vec![0.0];
        let trajectory = integrator::simulate_with(self, &start, cfg, |step| {
            let inc = increments(step);
            path.push(path[step] + inc.d_beta1);
            inc
        })?;
        let brownian = cfg
            .snapshot_steps()
            .into_iter()
            .take(trajectory.snapshots.len())
            .map(|step| path[step])
            .collect();
        Ok(KdvRun {
            trajectory,
            brownian,
        })
    }
}

impl Dynamics for KdvTank {
    fn drift(&self, s: &State) -> Result<(Field, Field)> {
        Ok((self.drift_eta(&s.eta)?, self.grid.zeros()))
    }

    fn noise_sample(&self, inc: &WienerIncrement) -> Option<Field> {
        KdvTank::noise_sample(self, inc)
    }

    fn martingale(&self, s: &State, noise: &Field) -> Result<(Field, Field)> {
        Ok((self.martingale_eta(&s.eta, noise)?, self.grid.zeros()))
    }

    fn check(&self, s: &State) -> Result<()> {
        if s.eta.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite("KdV elevation"))
        }
    }

    fn step(&self, s: &State, inc: &WienerIncrement) -> Result<State> {
        if self.params.integrating_factor {
            self.integrating_factor_step(s, inc)
        } else {
            integrator::hybrid_step(self, s, inc)
        }
    }
}

/// `rhs_kdv` as a free function over a grid and parameters.
pub fn rhs_kdv(grid: &Arc<Grid>, eta: &[f64], params: &KdvParams, noise: Option<&Field>) -> Result<Tendency> {
    KdvTank::new(grid.clone(), params.clone())?.tendency(eta, noise)
}

/// A KdV path with the driving `β₁(t)` sampled at each snapshot.
#[derive(Debug, Clone)]
pub struct KdvRun {
    pub trajectory: Trajectory,
    pub brownian: Vec<f64>,
}

/// Shift-scale candidates compared by [`wadati_shift_check`].
pub const WADATI_CANDIDATES: [f64; 2] = [1.0, 2.0 / 3.0];

#[derive(Debug, Clone, PartialEq)]
pub struct WadatiReport {
    /// `(κ, max over snapshots of ‖η_stoch - η_det(· - κ√Υσβ)‖∞)` per candidate.
    pub errors: Vec<(f64, f64)>,
    pub best_kappa: f64,
    pub best_error: f64,
}

/// Compares a constant-σ transport path with the translated deterministic path.
///
/// `shift_per_unit` is `√Υ σ`; `brownian` holds `β₁` at each snapshot.
pub fn wadati_shift_check(
    grid: &Grid,
    path: &Trajectory,
    det_ref: &Trajectory,
    shift_per_unit: f64,
    brownian: &[f64],
) -> Result<WadatiReport> {
    let n = path.snapshots.len();
    if det_ref.snapshots.len() != n || brownian.len() != n {
        return Err(Error::TrajectoryMismatch(format!(
            "{} stochastic snapshots, {} deterministic, {} Brownian samples",
            n,
            det_ref.snapshots.len(),
            brownian.len()
        )));
    }
    for (a, b) in path.snapshots.iter().zip(&det_ref.snapshots) {
        if (a.t - b.t).abs() > 1e-9 * a.t.abs().max(1.0) {
            return Err(Error::TrajectoryMismatch(format!(
                "snapshot times differ: {} vs {}",
                a.t, b.t
            )));
        }
        grid.check(&a.eta)?;
        grid.check(&b.eta)?;
    }
    let mut errors = Vec::with_capacity(WADATI_CANDIDATES.len());
    for kappa in WADATI_CANDIDATES {
        let mut worst = 0.0_f64;
        for ((a, b), beta) in path.snapshots.iter().zip(&det_ref.snapshots).zip(brownian) {
            let shifted = grid.shift(&b.eta, kappa * shift_per_unit * beta)?;
            worst = worst.max(shifted.max_diff(&a.eta));
        }
        errors.push((kappa, worst));
    }
    let (best_kappa, best_error) = errors
        .iter()
        .copied()
        .fold((f64::NAN, f64::INFINITY), |best, e| if e.1 < best.1 { e } else { best });
    Ok(WadatiReport {
        errors,
        best_kappa,
        best_error,
    })
}
