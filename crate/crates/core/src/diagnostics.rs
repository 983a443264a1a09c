//! Conserved-quantity monitors and ensemble statistics.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::models::{Form, ModelParams, State};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass: f64,
    pub momentum: f64,
    pub energy_sw: f64,
    pub energy_sgn: f64,
}

/// `∫ η dx` (rectangle rule, exact for the mean mode).
pub fn mass(s: &State, grid: &Grid) -> f64 {
    grid.integrate(&s.eta)
}

/// `∫ h ū dx`.
pub fn momentum(s: &State, p: &ModelParams, grid: &Grid) -> f64 {
    match p.form {
        Form::Conservative => grid.integrate(&s.vel),
        Form::Primitive => {
            let eps = p.epsilon;
            grid.dx()
                * s.eta
                    .iter()
                    .zip(s.vel.iter())
                    .map(|(e, u)| (1.0 + eps * e) * u)
                    .sum::<f64>()
        }
    }
}

/// `E_SW = (ε²/2) ∫ h ū² + ½ ∫ h²`.
pub fn energy_sw(s: &State, p: &ModelParams, grid: &Grid) -> f64 {
    let eps = p.epsilon;
    let u = s.velocity(p.form, eps);
    let density: f64 = s
        .eta
        .iter()
        .zip(u.iter())
        .map(|(e, u)| {
            let h = 1.0 + eps * e;
            0.5 * eps * eps * h * u * u + 0.5 * h * h
        })
        .sum();
    grid.dx() * density
}

/// `E_SGN = E_SW + (ε³β²/6) ∫ h³ (∂x ū)²`.
pub fn energy_sgn(s: &State, p: &ModelParams, grid: &Grid) -> Result<f64> {
    let base = energy_sw(s, p, grid);
    if p.beta == 0.0 {
        return Ok(base);
    }
    let eps = p.epsilon;
    let u_x = grid.deriv(&s.velocity(p.form, eps), 1)?;
    let extra: f64 = s
        .eta
        .iter()
        .zip(u_x.iter())
        .map(|(e, d)| (1.0 + eps * e).powi(3) * d * d)
        .sum();
    Ok(base + eps.powi(3) * p.beta * p.beta / 6.0 * grid.dx() * extra)
}

pub fn diagnostics_row(s: &State, p: &ModelParams, grid: &Grid) -> Result<DiagnosticsRow> {
    let row = DiagnosticsRow {
        t: s.t,
        mass: mass(s, grid),
        momentum: momentum(s, p, grid),
        energy_sw: energy_sw(s, p, grid),
        energy_sgn: energy_sgn(s, p, grid)?,
    };
    if ![row.mass, row.momentum, row.energy_sw, row.energy_sgn]
        .iter()
        .all(|v| v.is_finite())
    {
        return Err(Error::NonFinite("diagnostics"));
    }
    Ok(row)
}

/// Largest relative change of a quantity along a series, `max |q(t) - q(0)| / |q(0)|`.
pub fn relative_drift(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut it = values.into_iter();
    let Some(first) = it.next() else {
        return 0.0;
    };
    let worst = it.fold(0.0_f64, |m, v| m.max((v - first).abs()));
    if first == 0.0 {
        worst
    } else {
        worst / first.abs()
    }
}

/// Largest absolute change of a quantity along a series.
pub fn absolute_drift(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut it = values.into_iter();
    let Some(first) = it.next() else {
        return 0.0;
    };
    it.fold(0.0_f64, |m, v| m.max((v - first).abs()))
}

/// Pointwise ensemble mean and unbiased standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub mean_eta: Field,
    pub std_eta: Field,
    pub n_paths: usize,
}

impl EnsembleStats {
    /// Lower and upper edges of the `mean ± 3σ` spread band.
    pub fn spread_band(&self) -> (Field, Field) {
        (
            self.mean_eta.zip_map(&self.std_eta, |m, s| m - 3.0 * s),
            self.mean_eta.zip_map(&self.std_eta, |m, s| m + 3.0 * s),
        )
    }

    /// Pointwise standard error of the mean.
    pub fn standard_error(&self) -> Field {
        let scale = 1.0 / (self.n_paths as f64).sqrt();
        self.std_eta.scaled(scale)
    }
}

/// Folds the paths in order (two-pass, so the result does not depend on scheduling).
pub fn ensemble_stats(paths: &[Field]) -> Result<EnsembleStats> {
    let n = paths.len();
    if n < 2 {
        return Err(Error::TooFewPaths(n));
    }
    let len = paths[0].len();
    if let Some(bad) = paths.iter().find(|p| p.len() != len) {
        return Err(Error::LengthMismatch {
            expected: len,
            found: bad.len(),
        });
    }
    let mut mean = Field::zeros(len);
    for p in paths {
        mean.axpy(1.0, p);
    }
    let mean = mean.scaled(1.0 / n as f64);
    let mut var = Field::zeros(len);
    for p in paths {
        for ((v, x), m) in var.iter_mut().zip(p.iter()).zip(mean.iter()) {
            *v += (x - m) * (x - m);
        }
    }
    let std_eta = var.map(|v| (v / (n - 1) as f64).sqrt());
    Ok(EnsembleStats {
        mean_eta: mean,
        std_eta,
        n_paths: n,
    })
}

/// `max_y |f(x_c + y) - f(x_c - y)|`.
///
/// When the centre is a grid node the reflection is an exact index mirror;
/// otherwise the mirrored field is obtained by spectral translation.
pub fn symmetry_metric(f: &[f64], center: f64, grid: &Grid) -> Result<f64> {
    grid.check(f)?;
    let n = grid.n();
    let node = grid.nearest_node(center);
    let node_offset = grid.wrap(center - grid.nodes()[node]);
    if node_offset.abs() <= 1e-9 * grid.dx() {
        return Ok((1..n / 2 + 1)
            .map(|j| (f[(node + j) % n] - f[(node + n - j) % n]).abs())
            .fold(0.0_f64, f64::max));
    }
    // f(2c - x) = (reflect f)(x - 2c)
    let mirrored = grid.shift(&grid.reflect(f)?, 2.0 * center)?;
    Ok(mirrored
        .iter()
        .zip(f)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(2048, 50.0).unwrap()
    }

    fn params() -> ModelParams {
        ModelParams::default()
    }

    /// Composite Simpson rule on [-a, a] with many panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, panels: usize) -> f64 {
        let h = 2.0 * a / panels as f64;
        let mut s = f(-a) + f(a);
        for i in 1..panels {
            let x = -a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn mass_values() {
        let g = grid();
        assert_eq!(mass(&State::rest(&g), &g), 0.0);
        let heap = State::heap(&g);
        let oracle = simpson(|x| (-x.powi(4)).exp(), 50.0, 200_000);
        assert!((mass(&heap, &g) - oracle).abs() < 1e-12);
        assert!((oracle - 1.8128049541109541).abs() < 1e-9);
        let odd = State::new(g.field_from_fn(|x| (PI * x / 50.0).sin()), g.zeros());
        assert!(mass(&odd, &g).abs() < 1e-14);
    }

    #[test]
    fn momentum_values() {
        let g = grid();
        let p = params();
        assert_eq!(momentum(&State::rest(&g), &p, &g), 0.0);
        let drift = State::new(g.zeros(), Field::constant(g.n(), 0.3));
        assert!((momentum(&drift, &p, &g) - 100.0 * 0.3).abs() < 1e-12);
        let parity = State::new(
            g.field_from_fn(|x| (-x * x).exp()),
            g.field_from_fn(|x| x * (-x * x).exp()),
        );
        assert!(momentum(&parity, &p, &g).abs() < 1e-14);
    }

    #[test]
    fn energy_values() {
        let g = grid();
        let p = params();
        assert!((energy_sw(&State::rest(&g), &p, &g) - 50.0).abs() < 1e-12);
        let heap = State::heap(&g);
        let oracle = simpson(|x| 0.5 * (1.0 + 0.1 * (-x.powi(4)).exp()).powi(2), 50.0, 200_000);
        assert!((energy_sw(&heap, &p, &g) - oracle).abs() < 1e-10);

        let u = g.field_from_fn(|x| 0.2 * (-(x - 1.0).powi(2)).exp());
        let s1 = State::new(heap.eta.clone(), u.clone());
        let s2 = State::new(heap.eta.clone(), u.scaled(2.0));
        let potential = energy_sw(&heap, &p, &g);
        let k1 = energy_sw(&s1, &p, &g) - potential;
        let k2 = energy_sw(&s2, &p, &g) - potential;
        assert!((k2 - 4.0 * k1).abs() < 1e-12);
    }

    #[test]
    fn sgn_energy_values() {
        let g = grid();
        let p = ModelParams {
            beta: 0.1,
            ..params()
        };
        let flat_u = State::new(g.field_from_fn(|x| (-x * x).exp()), Field::constant(g.n(), 0.4));
        assert!((energy_sgn(&flat_u, &p, &g).unwrap() - energy_sw(&flat_u, &p, &g)).abs() < 1e-12);
        let heap = State::new(g.field_from_fn(|x| (-x * x).exp()), g.field_from_fn(|x| x.sin()));
        let no_disp = ModelParams { beta: 0.0, ..p };
        assert_eq!(energy_sgn(&heap, &no_disp, &g).unwrap(), energy_sw(&heap, &no_disp, &g));

        let k1 = PI / 50.0;
        let wave = State::new(g.zeros(), g.field_from_fn(|x| (k1 * x).sin()));
        let extra = energy_sgn(&wave, &p, &g).unwrap() - energy_sw(&wave, &p, &g);
        let exact = 0.1_f64.powi(3) * 0.01 / 6.0 * k1 * k1 * 50.0;
        // The difference of two O(50) energies cancels to about 1e-14 absolute.
        assert!((extra - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn conservative_form_uses_momentum_variable() {
        let g = grid();
        let p = ModelParams {
            form: Form::Conservative,
            ..params()
        };
        let prim = State::new(
            g.field_from_fn(|x| (-x * x).exp()),
            g.field_from_fn(|x| 0.3 * (-(x - 1.0).powi(2)).exp()),
        );
        let cons = prim.to_form(Form::Primitive, Form::Conservative, p.epsilon);
        let pp = params();
        assert!((momentum(&cons, &p, &g) - momentum(&prim, &pp, &g)).abs() < 1e-14);
        assert!((energy_sw(&cons, &p, &g) - energy_sw(&prim, &pp, &g)).abs() < 1e-12);
    }

    #[test]
    fn ensemble_closed_forms() {
        let f: Field = (0..16).map(|i| (i as f64 * 0.3).sin()).collect();
        let same = ensemble_stats(&[f.clone(), f.clone(), f.clone()]).unwrap();
        assert!(same.std_eta.max_abs() < 1e-15);
        let pair = ensemble_stats(&[f.clone(), f.scaled(-1.0)]).unwrap();
        assert!(pair.mean_eta.max_abs() < 1e-16);
        for (s, v) in pair.std_eta.iter().zip(f.iter()) {
            assert!((s - v.abs() * 2.0_f64.sqrt()).abs() < 1e-15);
        }
        assert!(matches!(ensemble_stats(&[f]), Err(Error::TooFewPaths(1))));
        let (lo, hi) = pair.spread_band();
        assert!(lo.iter().zip(hi.iter()).all(|(l, h)| l <= h));
    }

    #[test]
    fn ensemble_std_of_unit_noise() {
        use rand::SeedableRng;
        use rand_chacha::ChaCha12Rng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha12Rng::seed_from_u64(1234);
        let nodes = 2048;
        let paths: Vec<Field> = (0..130)
            .map(|_| (0..nodes).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let stats = ensemble_stats(&paths).unwrap();
        // χ² with 129 dof: P(0.85 < s < 1.15) = 0.98422 per node; allow 4 binomial sd.
        let p = 0.98422;
        let floor = nodes as f64 * p - 4.0 * (nodes as f64 * p * (1.0 - p)).sqrt();
        let inside = stats.std_eta.iter().filter(|s| (0.85..=1.15).contains(*s)).count();
        assert!(inside as f64 > floor, "{inside}");
    }

    #[test]
    fn symmetry_metric_cases() {
        let g = grid();
        let c = g.nodes()[g.nearest_node(3.0)];
        let even = g.field_from_fn(|x| (-(x - c).powi(2)).exp());
        assert!(symmetry_metric(&even, c, &g).unwrap() < 1e-14);
        let odd = g.field_from_fn(|x| (PI * x / 50.0).sin());
        assert!((symmetry_metric(&odd, 0.0, &g).unwrap() - 2.0).abs() < 1e-12);
        let off_node = g.field_from_fn(|x| (-(x - 0.01).powi(2)).exp());
        assert!(symmetry_metric(&off_node, 0.01, &g).unwrap() < 1e-12);
    }

    #[test]
    fn drift_helpers() {
        assert!((relative_drift([2.0, 2.0, 2.2, 1.9]) - 0.1).abs() < 1e-12);
        assert_eq!(absolute_drift([0.0, 1e-3, -2e-3]), 2e-3);
        assert_eq!(relative_drift(Vec::<f64>::new()), 0.0);
    }
}
