//! Right-hand sides of the Saint-Venant, Boussinesq and Serre-Green-Naghdi
//! systems, deterministic and under location uncertainty (LU), on a flat bottom.
//!
//! Every model shares the elevation equation
//!
//! ```text
//! dη + ε ū*·∂xη dt + Υ^½ ε σ∘dB ∂xη = -h (∂x ū* dt + Υ^½ ∂x(σ∘dB))
//! ```
//!
//! with `h = 1 + εη` and `ū* = ū - ½Υε ū_s` (ū_s the Itô-Stokes drift). The
//! momentum equations differ in how the vertical acceleration is treated:
//! dropped (Saint-Venant), linearised around `h = 1` (Boussinesq), or kept in
//! full with a variable-coefficient implicit operator (Serre-Green-Naghdi).
//!
//! Tendencies are returned split into a drift part (per unit time) and a
//! martingale part that already contains the step's Wiener increment.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::elliptic::{solve_sgn_operator, SolverSettings};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::noise::{self, NoiseModel, WienerIncrement};

/// Minimum admissible water height before a state is declared dry.
pub const MIN_HEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    SaintVenant,
    Boussinesq,
    SerreGreenNaghdi,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::SaintVenant,
        ModelKind::Boussinesq,
        ModelKind::SerreGreenNaghdi,
    ];

    /// Short label used in file headers.
    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::SaintVenant => "sv",
            ModelKind::Boussinesq => "boussinesq",
            ModelKind::SerreGreenNaghdi => "sgn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::SaintVenant => "saint_venant",
            ModelKind::Boussinesq => "boussinesq",
            ModelKind::SerreGreenNaghdi => "serre_green_naghdi",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "saint_venant" | "sv" => Ok(ModelKind::SaintVenant),
            "boussinesq" | "b" => Ok(ModelKind::Boussinesq),
            "serre_green_naghdi" | "sgn" => Ok(ModelKind::SerreGreenNaghdi),
            other => Err(format!(
                "unknown model kind `{other}` (expected saint_venant, boussinesq or serre_green_naghdi)"
            )),
        }
    }
}

/// Which variable `State::vel` holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    /// Depth-averaged velocity ū.
    Primitive,
    /// Momentum q = hū.
    Conservative,
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Form::Primitive => "primitive",
            Form::Conservative => "conservative",
        })
    }
}

impl FromStr for Form {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "primitive" => Ok(Form::Primitive),
            "conservative" => Ok(Form::Conservative),
            other => Err(format!(
                "unknown form `{other}` (expected primitive or conservative)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub epsilon: f64,
    pub beta: f64,
    pub kind: ModelKind,
    pub form: Form,
    pub stochastic: bool,
    pub solver: SolverSettings,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            epsilon: 0.1,
            beta: 0.01,
            kind: ModelKind::SaintVenant,
            form: Form::Primitive,
            stochastic: false,
            solver: SolverSettings::default(),
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        if self.form == Form::Conservative && self.kind != ModelKind::SaintVenant {
            return Err(Error::InvalidParameter(
                "conservative form is only available for the Saint-Venant model".into(),
            ));
        }
        Ok(())
    }

    /// Stokes (Ursell) number `ε/β²`, undefined for `β = 0`.
    pub fn stokes_number(&self) -> Option<f64> {
        (self.beta > 0.0).then(|| self.epsilon / (self.beta * self.beta))
    }

    /// Coefficient `εβ²/3` of the dispersive operator.
    pub fn dispersion_coefficient(&self) -> f64 {
        self.epsilon * self.beta * self.beta / 3.0
    }
}

/// Prognostic variables: elevation η and either ū or q = hū.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub eta: Field,
    pub vel: Field,
    pub t: f64,
}

impl State {
    pub fn new(eta: Field, vel: Field) -> Self {
        State { eta, vel, t: 0.0 }
    }

    pub fn rest(grid: &Grid) -> Self {
        State::new(grid.zeros(), grid.zeros())
    }

    /// The heap-of-water initial condition `η = exp(-x⁴)`, `ū = 0`.
    pub fn heap(grid: &Grid) -> Self {
        State::new(grid.field_from_fn(|x| (-x.powi(4)).exp()), grid.zeros())
    }

    /// Converts between primitive and conservative variables.
    pub fn to_form(&self, from: Form, to: Form, epsilon: f64) -> State {
        let vel = match (from, to) {
            (Form::Primitive, Form::Conservative) => self
                .eta
                .zip_map(&self.vel, |e, u| (1.0 + epsilon * e) * u),
            (Form::Conservative, Form::Primitive) => self
                .eta
                .zip_map(&self.vel, |e, q| q / (1.0 + epsilon * e)),
            _ => self.vel.clone(),
        };
        State {
            eta: self.eta.clone(),
            vel,
            t: self.t,
        }
    }

    /// Depth-averaged velocity regardless of the storage form.
    pub fn velocity(&self, form: Form, epsilon: f64) -> Field {
        self.to_form(form, Form::Primitive, epsilon).vel
    }
}

/// Drift (per unit time) and martingale (per noise draw) parts of a tendency.
#[derive(Debug, Clone, PartialEq)]
pub struct Tendency {
    pub drift_eta: Field,
    pub drift_vel: Field,
    pub mart_eta: Field,
    pub mart_vel: Field,
}

/// `h = 1 + εη`, failing on a dry or breaking state.
pub fn water_height(s: &State, p: &ModelParams, grid: &Grid) -> Result<Field> {
    let h = s.eta.map(|e| 1.0 + p.epsilon * e);
    if let Some((j, &hj)) = h
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v > MIN_HEIGHT))
    {
        return Err(Error::DryState {
            x: grid.nodes()[j],
            t: s.t,
            height: hj,
        });
    }
    Ok(h)
}

/// A configured wave model: grid, parameters, noise and the precomputed ISD.
#[derive(Debug, Clone)]
pub struct WaveModel {
    grid: Arc<Grid>,
    params: ModelParams,
    noise: NoiseModel,
    /// `½Υε ū_s`, zero for deterministic runs.
    isd_correction: Field,
}

impl WaveModel {
    pub fn new(grid: Arc<Grid>, params: ModelParams, noise: NoiseModel) -> Result<Self> {
        params.validate()?;
        noise.validate()?;
        let isd_correction = if params.stochastic {
            noise::ito_stokes_drift(&noise, &grid).scaled(0.5 * noise.upsilon * params.epsilon)
        } else {
            grid.zeros()
        };
        Ok(WaveModel {
            grid,
            params,
            noise,
            isd_correction,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// Whether the model has a non-trivial martingale part.
    pub fn has_noise(&self) -> bool {
        self.params.stochastic && self.noise.amplitude > 0.0
    }

    /// Sampled `σ∘dB` for one step, `None` when the model carries no noise.
    pub fn noise_sample(&self, inc: &WienerIncrement) -> Option<Field> {
        self.has_noise()
            .then(|| noise::noise_field(&self.noise, inc, &self.grid))
    }

    pub fn water_height(&self, s: &State) -> Result<Field> {
        water_height(s, &self.params, &self.grid)
    }

    fn sqrt_upsilon(&self) -> f64 {
        self.noise.upsilon.sqrt()
    }

    /// Drift tendencies `(dη/dt, dvel/dt)`.
    pub fn drift(&self, s: &State) -> Result<(Field, Field)> {
        match self.params.form {
            Form::Primitive => self.drift_primitive(s),
            Form::Conservative => self.drift_conservative(s),
        }
    }

    /// Martingale tendencies for the sampled increment `noise = σ∘dB`.
    pub fn martingale(&self, s: &State, noise: &Field) -> Result<(Field, Field)> {
        if !self.params.stochastic {
            return Ok((self.grid.zeros(), self.grid.zeros()));
        }
        match self.params.form {
            Form::Primitive => self.martingale_primitive(s, noise),
            Form::Conservative => self.martingale_conservative(s, noise),
        }
    }

    /// Full tendency for a given noise sample (`None` means no noise this step).
    pub fn tendency(&self, s: &State, noise: Option<&Field>) -> Result<Tendency> {
        let (drift_eta, drift_vel) = self.drift(s)?;
        let (mart_eta, mart_vel) = match noise {
            Some(w) if self.params.stochastic => self.martingale(s, w)?,
            _ => (self.grid.zeros(), self.grid.zeros()),
        };
        Ok(Tendency {
            drift_eta,
            drift_vel,
            mart_eta,
            mart_vel,
        })
    }

    fn drift_primitive(&self, s: &State) -> Result<(Field, Field)> {
        let g = &*self.grid;
        let eps = self.params.epsilon;
        let h = self.water_height(s)?;
        let u = &s.vel;
        let ustar = u.sub(&self.isd_correction);
        let eta_x = g.deriv(&s.eta, 1)?;
        let u_x = g.deriv(u, 1)?;
        let ustar_x = if self.params.stochastic {
            g.deriv(&ustar, 1)?
        } else {
            u_x.clone()
        };

        let drift_eta: Field = (0..g.n())
            .map(|j| -eps * ustar[j] * eta_x[j] - h[j] * ustar_x[j])
            .collect();
        let momentum: Field = (0..g.n())
            .map(|j| -eps * ustar[j] * u_x[j] - eta_x[j])
            .collect();

        let drift_vel = match self.params.kind {
            ModelKind::SaintVenant => momentum,
            ModelKind::Boussinesq => {
                g.invert_helmholtz(&momentum, self.params.dispersion_coefficient())?
            }
            ModelKind::SerreGreenNaghdi => {
                let u_xx = g.deriv(u, 2)?;
                let accel: Field = (0..g.n())
                    .map(|j| eps * (ustar[j] * u_xx[j] - ustar_x[j] * u_x[j]))
                    .collect();
                self.sgn_solve(&h, momentum, &accel)?
            }
        };
        Ok((drift_eta, drift_vel))
    }

    fn martingale_primitive(&self, s: &State, w: &Field) -> Result<(Field, Field)> {
        let g = &*self.grid;
        let eps = self.params.epsilon;
        let su = self.sqrt_upsilon();
        let w_x = g.deriv(w, 1)?;
        let eta_x = g.deriv(&s.eta, 1)?;
        let u_x = g.deriv(&s.vel, 1)?;
        let div = noise::split_additive(&w_x, &s.eta, &self.noise, eps);

        let mart_eta: Field = (0..g.n())
            .map(|j| -su * (eps * w[j] * eta_x[j] + div[j]))
            .collect();
        let momentum: Field = (0..g.n()).map(|j| -su * eps * w[j] * u_x[j]).collect();

        let mart_vel = match self.params.kind {
            ModelKind::SaintVenant => momentum,
            ModelKind::Boussinesq => {
                g.invert_helmholtz(&momentum, self.params.dispersion_coefficient())?
            }
            ModelKind::SerreGreenNaghdi => {
                let h = self.water_height(s)?;
                let u_xx = g.deriv(&s.vel, 2)?;
                let accel: Field = (0..g.n())
                    .map(|j| su * eps * (w[j] * u_xx[j] - w_x[j] * u_x[j]))
                    .collect();
                self.sgn_solve(&h, momentum, &accel)?
            }
        };
        Ok((mart_eta, mart_vel))
    }

    /// Solves `T[h] v = momentum + (εβ²/h) ∂x(h³/3 · accel)`.
    fn sgn_solve(&self, h: &Field, mut momentum: Field, accel: &Field) -> Result<Field> {
        let g = &*self.grid;
        let c = self.params.dispersion_coefficient();
        if c == 0.0 {
            return Ok(momentum);
        }
        let flux: Field = h
            .iter()
            .zip(accel.iter())
            .map(|(hh, a)| hh * hh * hh / 3.0 * a)
            .collect();
        let dflux = g.deriv(&flux, 1)?;
        let scale = 3.0 * c;
        for ((m, d), hh) in momentum.iter_mut().zip(dflux.iter()).zip(h.iter()) {
            *m += scale * d / hh;
        }
        if momentum.is_zero() {
            return Ok(momentum);
        }
        // Martingale right-hand sides are O(√dt · A); keep the tolerance relative for them.
        let settings = SolverSettings {
            tol: self.params.solver.tol * momentum.max_abs().min(1.0),
            ..self.params.solver
        };
        Ok(solve_sgn_operator(g, h, &momentum, c, settings)?.solution)
    }

    fn drift_conservative(&self, s: &State) -> Result<(Field, Field)> {
        let g = &*self.grid;
        let eps = self.params.epsilon;
        let h = self.water_height(s)?;
        let q = &s.vel;
        let u = q.zip_map(&h, |q, h| q / h);
        let ustar = u.sub(&self.isd_correction);

        let mass_flux = ustar.mul(&h);
        let drift_eta = g.deriv(&mass_flux, 1)?.scaled(-1.0);
        let momentum_flux: Field = (0..g.n())
            .map(|j| eps * q[j] * ustar[j] + s.eta[j] + 0.5 * eps * s.eta[j] * s.eta[j])
            .collect();
        let drift_q = g.deriv(&momentum_flux, 1)?.scaled(-1.0);
        Ok((drift_eta, drift_q))
    }

    fn martingale_conservative(&self, s: &State, w: &Field) -> Result<(Field, Field)> {
        let g = &*self.grid;
        let eps = self.params.epsilon;
        let su = self.sqrt_upsilon();
        let keep_additive = if self.noise.filter_additive { 0.0 } else { 1.0 };
        let eta_flux: Field = (0..g.n())
            .map(|j| w[j] * (keep_additive + eps * s.eta[j]))
            .collect();
        let mart_eta = g.deriv(&eta_flux, 1)?.scaled(-su);
        let q_flux = s.vel.mul(w);
        let mart_q = g.deriv(&q_flux, 1)?.scaled(-su * eps);
        Ok((mart_eta, mart_q))
    }
}

fn with_kind(model: &WaveModel, kind: ModelKind, form: Form) -> Result<WaveModel> {
    if model.params.kind == kind && model.params.form == form {
        return Ok(model.clone());
    }
    let params = ModelParams {
        kind,
        form,
        ..model.params
    };
    WaveModel::new(model.grid.clone(), params, model.noise.clone())
}

/// Saint-Venant tendency in primitive variables `(η, ū)`.
pub fn rhs_sv(model: &WaveModel, s: &State, noise: Option<&Field>) -> Result<Tendency> {
    with_kind(model, ModelKind::SaintVenant, Form::Primitive)?.tendency(s, noise)
}

/// Saint-Venant tendency in conservative variables `(η, q = hū)`.
pub fn rhs_sv_conservative(model: &WaveModel, s: &State, noise: Option<&Field>) -> Result<Tendency> {
    with_kind(model, ModelKind::SaintVenant, Form::Conservative)?.tendency(s, noise)
}

/// Boussinesq tendency: Saint-Venant momentum mapped through `(I - εβ²/3 ∂²)⁻¹`.
pub fn rhs_boussinesq(model: &WaveModel, s: &State, noise: Option<&Field>) -> Result<Tendency> {
    with_kind(model, ModelKind::Boussinesq, Form::Primitive)?.tendency(s, noise)
}

/// Serre-Green-Naghdi tendency with the variable-coefficient implicit operator.
pub fn rhs_sgn(model: &WaveModel, s: &State, noise: Option<&Field>) -> Result<Tendency> {
    with_kind(model, ModelKind::SerreGreenNaghdi, Form::Primitive)?.tendency(s, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::RngStream;
    use std::f64::consts::PI;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::new(2048, 50.0).unwrap())
    }

    fn model(kind: ModelKind, beta: f64, stochastic: bool, amplitude: f64) -> WaveModel {
        let params = ModelParams {
            kind,
            beta,
            stochastic,
            ..ModelParams::default()
        };
        let noise = NoiseModel {
            amplitude,
            ..NoiseModel::default()
        };
        WaveModel::new(grid(), params, noise).unwrap()
    }

    fn fd4(grid: &Grid, f: &[f64]) -> Field {
        let n = grid.n() as isize;
        let h = grid.dx();
        (0..n)
            .map(|j| {
                let at = |o: isize| f[(j + o).rem_euclid(n) as usize];
                (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h)
            })
            .collect()
    }

    #[test]
    fn water_height_guard() {
        let g = grid();
        let p = ModelParams::default();
        let s = State::rest(&g);
        assert!(water_height(&s, &p, &g).unwrap().iter().all(|&h| h == 1.0));
        let heap = State::heap(&g);
        let h = water_height(&heap, &p, &g).unwrap();
        assert!((h[g.nearest_node(0.0)] - 1.1).abs() < 1e-15);
        let dry = State::new(Field::constant(g.n(), -1.0 / p.epsilon), g.zeros());
        assert!(matches!(
            water_height(&dry, &p, &g),
            Err(Error::DryState { .. })
        ));
    }

    #[test]
    fn stokes_number() {
        let p = ModelParams {
            beta: 0.1,
            ..ModelParams::default()
        };
        assert!((p.stokes_number().unwrap() - 10.0).abs() < 1e-12);
        let p0 = ModelParams {
            beta: 0.0,
            ..ModelParams::default()
        };
        assert_eq!(p0.stokes_number(), None);
    }

    #[test]
    fn rest_state_is_fixed_point() {
        let g = grid();
        let mut rng = RngStream::new(5);
        for kind in ModelKind::ALL {
            let mut m = model(kind, 0.1, true, 0.01);
            // Homogeneous noise: no Itô-Stokes drift to set the rest state moving.
            m = WaveModel::new(
                m.grid_arc().clone(),
                *m.params(),
                NoiseModel {
                    taper_alpha: None,
                    ..*m.noise()
                },
            )
            .unwrap();
            let w = m.noise_sample(&rng.sample_increment(0.005)).unwrap();
            let t = m.tendency(&State::rest(&g), Some(&w)).unwrap();
            for f in [&t.drift_eta, &t.drift_vel, &t.mart_eta, &t.mart_vel] {
                assert!(f.max_abs() < 1e-18, "{kind}");
            }
        }
        let m = WaveModel::new(
            g.clone(),
            ModelParams {
                stochastic: true,
                ..ModelParams::default()
            },
            NoiseModel {
                amplitude: 0.01,
                taper_alpha: None,
                ..NoiseModel::default()
            },
        )
        .unwrap();
        let w = m.noise_sample(&rng.sample_increment(0.005)).unwrap();
        let t = rhs_sv_conservative(&m, &State::rest(&g), Some(&w)).unwrap();
        assert!(t.drift_eta.max_abs() == 0.0 && t.mart_vel.max_abs() == 0.0);
    }

    #[test]
    fn tapered_noise_drives_rest_state_through_stokes_drift() {
        let g = grid();
        let m = model(ModelKind::SaintVenant, 0.1, true, 0.01);
        let t = m.tendency(&State::rest(&g), None).unwrap();
        // η_t = -∂x(h ū*) with ū = 0, h = 1 gives ½Υε ∂x ū_s.
        let us = noise::ito_stokes_drift(m.noise(), &g);
        let expected = g.deriv(&us, 1).unwrap().scaled(0.5 * m.params().epsilon);
        assert!(t.drift_eta.max_diff(&expected) < 1e-18);
        assert!(t.drift_vel.max_abs() < 1e-18);
        assert!(expected.max_abs() > 0.0);
    }

    #[test]
    fn linear_limit_of_saint_venant() {
        let g = grid();
        let params = ModelParams {
            epsilon: 1e-12,
            ..ModelParams::default()
        };
        let m = WaveModel::new(g.clone(), params, NoiseModel::default()).unwrap();
        let delta = 0.3;
        let k1 = PI / 50.0;
        let s = State::new(g.field_from_fn(|x| delta * (k1 * x).sin()), g.zeros());
        let t = rhs_sv(&m, &s, None).unwrap();
        assert!(t.drift_eta.max_abs() < 1e-12);
        let expected = g.field_from_fn(|x| -delta * k1 * (k1 * x).cos());
        assert!(t.drift_vel.max_diff(&expected) < 1e-12);
    }

    #[test]
    fn saint_venant_mass_flux_identity() {
        let g = grid();
        let m = model(ModelKind::SaintVenant, 0.01, false, 0.0);
        let eta = g.field_from_fn(|x| (-x.powi(4)).exp());
        let u = g.field_from_fn(|x| 0.01 * (PI * x / 50.0).sin());
        let s = State::new(eta.clone(), u.clone());
        let t = rhs_sv(&m, &s, None).unwrap();
        let flux: Field = eta.zip_map(&u, |e, u| u * (1.0 + 0.1 * e));
        let expected = fd4(&g, &flux).scaled(-1.0);
        assert!(t.drift_eta.max_diff(&expected) < 1e-6);
    }

    #[test]
    fn boussinesq_reduces_to_saint_venant_without_dispersion() {
        let g = grid();
        let s = State::new(
            g.field_from_fn(|x| (-x.powi(4)).exp()),
            g.field_from_fn(|x| 0.05 * (-(x - 1.0).powi(2)).exp()),
        );
        let mut rng = RngStream::new(8);
        let sv = model(ModelKind::SaintVenant, 0.0, true, 0.01);
        let w = sv.noise_sample(&rng.sample_increment(0.005)).unwrap();
        let reference = rhs_sv(&sv, &s, Some(&w)).unwrap();
        assert_eq!(rhs_boussinesq(&sv, &s, Some(&w)).unwrap(), reference);
        assert_eq!(rhs_sgn(&sv, &s, Some(&w)).unwrap(), reference);
    }

    #[test]
    fn boussinesq_single_mode() {
        let g = grid();
        let m = model(ModelKind::Boussinesq, 0.1, false, 0.0);
        let k1 = PI / 50.0;
        let s = State::new(g.field_from_fn(|x| 0.1 * (k1 * x).sin()), g.zeros());
        let t = m.tendency(&s, None).unwrap();
        let c = 0.1 * 0.01 / 3.0;
        let expected = g.field_from_fn(|x| -0.1 * k1 * (k1 * x).cos() / (1.0 + c * k1 * k1));
        assert!(t.drift_vel.max_diff(&expected) < 1e-13);
    }

    #[test]
    fn boussinesq_close_to_saint_venant_at_p1() {
        let g = grid();
        let s = State::heap(&g);
        let sv = model(ModelKind::SaintVenant, 0.01, false, 0.0);
        let a = rhs_sv(&sv, &s, None).unwrap();
        let b = rhs_boussinesq(&sv, &s, None).unwrap();
        let scale = a.drift_vel.max_abs().max(a.drift_eta.max_abs());
        assert_eq!(b.drift_eta, a.drift_eta);
        // (I - c∂²)⁻¹ has a positive unit-mass kernel, so ‖(I - c∂²)⁻¹f - f‖∞ <= c‖f_xx‖∞.
        let c = sv.params().dispersion_coefficient();
        let bound = c * g.deriv(&a.drift_vel, 2).unwrap().max_abs();
        let diff = b.drift_vel.max_diff(&a.drift_vel);
        assert!(diff <= bound * (1.0 + 1e-9) && diff < 1e-4 * scale, "{diff} vs {bound}");
    }

    #[test]
    fn sgn_on_flat_height_matches_boussinesq_for_single_mode_velocity() {
        // u u_xx - u_x² is constant for a single Fourier mode, so the explicit
        // vertical-acceleration term drops out and both operators coincide.
        let g = grid();
        let k = 6.0 * PI / 50.0;
        let s = State::new(g.zeros(), g.field_from_fn(|x| 0.2 * (k * x + 0.4).sin()));
        let m = model(ModelKind::SerreGreenNaghdi, 0.1, false, 0.0);
        let a = rhs_sgn(&m, &s, None).unwrap();
        let b = rhs_boussinesq(&m, &s, None).unwrap();
        assert!(a.drift_vel.max_diff(&b.drift_vel) < 1e-10);
        assert_eq!(a.drift_eta, b.drift_eta);
    }

    #[test]
    fn zero_amplitude_stochastic_matches_deterministic() {
        let g = grid();
        let s = State::new(
            g.field_from_fn(|x| (-x.powi(4)).exp()),
            g.field_from_fn(|x| 0.05 * (-(x - 1.0).powi(2)).exp()),
        );
        for kind in ModelKind::ALL {
            let det = model(kind, 0.1, false, 0.0).tendency(&s, None).unwrap();
            let m = model(kind, 0.1, true, 0.0);
            assert!(m.noise_sample(&WienerIncrement::zero(0.005)).is_none());
            let sto = m.tendency(&s, Some(&g.zeros())).unwrap();
            assert_eq!(det.drift_eta, sto.drift_eta, "{kind}");
            assert!(det.drift_vel.max_diff(&sto.drift_vel) <= 1e-10, "{kind}");
            assert!(sto.mart_eta.is_zero() && sto.mart_vel.is_zero());
        }
    }

    #[test]
    fn martingale_elevation_integrates_to_zero() {
        let g = grid();
        let s = State::new(
            g.field_from_fn(|x| (-x.powi(4)).exp()),
            g.field_from_fn(|x| 0.05 * (-(x - 1.0).powi(2)).exp()),
        );
        let mut rng = RngStream::new(21);
        for filter in [true, false] {
            for kind in ModelKind::ALL {
                let params = ModelParams {
                    kind,
                    beta: 0.1,
                    stochastic: true,
                    ..ModelParams::default()
                };
                let noise = NoiseModel {
                    amplitude: 0.01,
                    filter_additive: filter,
                    ..NoiseModel::default()
                };
                let m = WaveModel::new(g.clone(), params, noise).unwrap();
                let w = m.noise_sample(&rng.sample_increment(0.005)).unwrap();
                let t = m.tendency(&s, Some(&w)).unwrap();
                let scale = t.mart_eta.max_abs() * 100.0;
                assert!(g.integrate(&t.mart_eta).abs() < 1e-12 * scale.max(1e-300));
                let drift_scale = t.drift_eta.max_abs() * 100.0;
                assert!(g.integrate(&t.drift_eta).abs() < 1e-12 * drift_scale);
            }
        }
    }

    #[test]
    fn conservative_tendencies_integrate_to_zero() {
        let g = grid();
        let m = model(ModelKind::SaintVenant, 0.01, true, 0.005);
        let prim = State::new(
            g.field_from_fn(|x| (-x.powi(4)).exp()),
            g.field_from_fn(|x| 0.05 * (-(x - 1.0).powi(2)).exp()),
        );
        let cons = prim.to_form(Form::Primitive, Form::Conservative, 0.1);
        let w = m.noise_sample(&RngStream::new(2).sample_increment(0.005)).unwrap();
        let t = rhs_sv_conservative(&m, &cons, Some(&w)).unwrap();
        for f in [&t.drift_eta, &t.drift_vel, &t.mart_eta, &t.mart_vel] {
            let scale = f.max_abs() * 100.0;
            assert!(g.integrate(f).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn reflection_symmetry_of_deterministic_parts() {
        let g = grid();
        let eta = g.field_from_fn(|x| (-(x - 0.7).powi(4)).exp());
        let u = g.field_from_fn(|x| 0.1 * (-(x + 0.3).powi(2)).exp());
        let s = State::new(eta.clone(), u.clone());
        let mirrored = State::new(g.reflect(&eta).unwrap(), g.reflect(&u).unwrap().scaled(-1.0));
        for kind in ModelKind::ALL {
            let m = model(kind, 0.1, false, 0.0);
            let a = m.tendency(&s, None).unwrap();
            let b = m.tendency(&mirrored, None).unwrap();
            let eta_err = g.reflect(&a.drift_eta).unwrap().max_diff(&b.drift_eta);
            let vel_err = g.reflect(&a.drift_vel).unwrap().scaled(-1.0).max_diff(&b.drift_vel);
            let tol = if kind == ModelKind::SerreGreenNaghdi { 1e-10 } else { 1e-12 };
            assert!(eta_err < 1e-12 && vel_err < tol, "{kind}: {eta_err} {vel_err}");
        }
    }

    #[test]
    fn tendency_is_smooth_in_inputs() {
        let g = grid();
        let base = State::heap(&g);
        let bump = g.field_from_fn(|x| (-(x - 2.0).powi(2)).exp());
        for kind in ModelKind::ALL {
            let m = model(kind, 0.1, false, 0.0);
            let t0 = m.tendency(&base, None).unwrap();
            let perturbed = |scale: f64| {
                let mut s = base.clone();
                s.eta.axpy(scale, &bump);
                m.tendency(&s, None).unwrap()
            };
            let d1 = perturbed(1e-3).drift_vel.sub(&t0.drift_vel);
            let d2 = perturbed(2e-3).drift_vel.sub(&t0.drift_vel);
            // Second-order remainder: |d2 - 2 d1| = O(δ²).
            let remainder = d2.sub(&d1.scaled(2.0)).max_abs();
            assert!(remainder < 1e-2 * d1.max_abs(), "{kind}: {remainder}");
        }
    }

    #[test]
    fn conservative_form_rejected_for_dispersive_models() {
        let params = ModelParams {
            kind: ModelKind::Boussinesq,
            form: Form::Conservative,
            ..ModelParams::default()
        };
        assert!(WaveModel::new(grid(), params, NoiseModel::default()).is_err());
    }
}
