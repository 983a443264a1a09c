//! Structured transport noise, its variance tensor and Itô-Stokes drift.
//!
//! The noise has one spatial wavenumber and two independent Brownian drivers:
//!
//! ```text
//! (σ∘dB)(x) = s_α(x) · A · (cos(kx) dβ¹ + sin(kx) dβ²)
//! ```
//!
//! where `s_α` is a smooth taper vanishing at the tank walls. Because
//! `cos² + sin² = 1`, the variance tensor is `a(x) = A² s_α(x)²` and the
//! Itô-Stokes drift `½ ∂x a` is known in closed form.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;

/// Odd multiplier used to derive per-path seeds: `base ^ (index * PATH_SEED_STRIDE)`.
pub const PATH_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub amplitude: f64,
    pub wavenumber: f64,
    /// `None` switches the boundary taper off (`α → ∞`).
    pub taper_alpha: Option<f64>,
    /// Drop the η-independent part of `h ∂x(σ∘dB)` in the elevation equation.
    pub filter_additive: bool,
    pub upsilon: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            amplitude: 0.005,
            wavenumber: 2.0 * std::f64::consts::PI / 100.0,
            taper_alpha: Some(10.0),
            filter_additive: true,
            upsilon: 1.0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise amplitude must be finite and >= 0, got {}",
                self.amplitude
            )));
        }
        if !self.wavenumber.is_finite() {
            return Err(Error::InvalidParameter("noise wavenumber must be finite".into()));
        }
        if let Some(alpha) = self.taper_alpha {
            if !(alpha > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "taper alpha must be positive, got {alpha}"
                )));
            }
        }
        if !(self.upsilon >= 0.0 && self.upsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "upsilon must be finite and >= 0, got {}",
                self.upsilon
            )));
        }
        Ok(())
    }

    /// Whether the untapered basis `cos(kx), sin(kx)` is periodic on the tank,
    /// i.e. `kL/π` is an integer.
    pub fn is_periodic_on(&self, grid: &Grid) -> bool {
        let m = self.wavenumber * grid.half_length() / std::f64::consts::PI;
        (m - m.round()).abs() < 1e-9
    }

    fn taper_at(&self, x: f64, half_length: f64) -> f64 {
        taper(x, self.taper_alpha, half_length).unwrap_or(0.0)
    }
}

/// Boundary taper `s_α(x) = exp((1/α²)(1 - 1/(1 - (x/L)²)))`.
///
/// Returns 1 everywhere when `alpha` is `None`, and 0 on the walls `|x| = L`.
pub fn taper(x: f64, alpha: Option<f64>, half_length: f64) -> Result<f64> {
    if x.abs() > half_length {
        return Err(Error::OutsideTank { x, half_length });
    }
    let Some(alpha) = alpha.filter(|a| a.is_finite()) else {
        return Ok(1.0);
    };
    let r = x / half_length;
    let gap = 1.0 - r * r;
    if gap <= 0.0 {
        return Ok(0.0);
    }
    Ok(((1.0 - 1.0 / gap) / (alpha * alpha)).exp())
}

/// `d s_α / dx`.
fn taper_slope(x: f64, alpha: Option<f64>, half_length: f64) -> f64 {
    let Some(alpha) = alpha.filter(|a| a.is_finite()) else {
        return 0.0;
    };
    let r = x / half_length;
    let gap = 1.0 - r * r;
    if gap <= 0.0 {
        return 0.0;
    }
    let s = ((1.0 - 1.0 / gap) / (alpha * alpha)).exp();
    -s * 2.0 * x / (alpha * alpha * half_length * half_length * gap * gap)
}

/// One Brownian increment pair for a time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WienerIncrement {
    pub d_beta1: f64,
    pub d_beta2: f64,
    pub dt: f64,
}

impl WienerIncrement {
    pub fn zero(dt: f64) -> Self {
        WienerIncrement {
            d_beta1: 0.0,
            d_beta2: 0.0,
            dt,
        }
    }

    /// Sum of consecutive increments (used to coarsen a Brownian path).
    pub fn combine(increments: &[WienerIncrement]) -> WienerIncrement {
        increments.iter().fold(WienerIncrement::zero(0.0), |acc, inc| WienerIncrement {
            d_beta1: acc.d_beta1 + inc.d_beta1,
            d_beta2: acc.d_beta2 + inc.d_beta2,
            dt: acc.dt + inc.dt,
        })
    }
}

/// Seeded source of Wiener increments. One stream per path, never shared.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha12Rng,
    draws: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha12Rng::seed_from_u64(seed),
            draws: 0,
        }
    }

    /// Stream for ensemble member `index`, see [`path_seed`].
    pub fn for_path(base_seed: u64, index: u64) -> Self {
        RngStream::new(path_seed(base_seed, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of increments drawn so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn sample_increment(&mut self, dt: f64) -> WienerIncrement {
        let scale = dt.sqrt();
        let z1: f64 = StandardNormal.sample(&mut self.rng);
        let z2: f64 = StandardNormal.sample(&mut self.rng);
        self.draws += 1;
        WienerIncrement {
            d_beta1: scale * z1,
            d_beta2: scale * z2,
            dt,
        }
    }
}

pub fn path_seed(base_seed: u64, index: u64) -> u64 {
    base_seed ^ index.wrapping_mul(PATH_SEED_STRIDE)
}

/// Stratonovich noise increment `σ∘dB` sampled on the grid.
pub fn noise_field(model: &NoiseModel, inc: &WienerIncrement, grid: &Grid) -> Field {
    let a = model.amplitude;
    if a == 0.0 {
        return grid.zeros();
    }
    let k = model.wavenumber;
    let l = grid.half_length();
    grid.field_from_fn(|x| {
        let (s, c) = (k * x).sin_cos();
        model.taper_at(x, l) * a * (c * inc.d_beta1 + s * inc.d_beta2)
    })
}

/// Variance tensor `a(x) = A² s_α(x)²`, so that `E[(σ∘dB)²] = a dt`.
pub fn variance_tensor(model: &NoiseModel, grid: &Grid) -> Field {
    let a2 = model.amplitude * model.amplitude;
    let l = grid.half_length();
    grid.field_from_fn(|x| {
        let s = model.taper_at(x, l);
        a2 * s * s
    })
}

/// Itô-Stokes drift `ū_s = ½ ∂x a = A² s_α s_α'`, evaluated analytically.
pub fn ito_stokes_drift(model: &NoiseModel, grid: &Grid) -> Field {
    let a2 = model.amplitude * model.amplitude;
    let l = grid.half_length();
    grid.field_from_fn(|x| {
        a2 * model.taper_at(x, l) * taper_slope(x, model.taper_alpha, l)
    })
}

/// Splits `h ∂x(σ∘dB) = ∂x(σ∘dB) + εη ∂x(σ∘dB)`.
///
/// With the filter on only the multiplicative part `εη ∂x(σ∘dB)` is kept.
pub fn split_additive(noise_div: &[f64], eta: &[f64], model: &NoiseModel, epsilon: f64) -> Field {
    let keep_additive = if model.filter_additive { 0.0 } else { 1.0 };
    noise_div
        .iter()
        .zip(eta)
        .map(|(d, e)| (keep_additive + epsilon * e) * d)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(2048, 50.0).unwrap()
    }

    #[test]
    fn taper_values() {
        for alpha in [0.5, 10.0, 100.0] {
            assert_eq!(taper(0.0, Some(alpha), 50.0).unwrap(), 1.0);
            assert_eq!(taper(50.0, Some(alpha), 50.0).unwrap(), 0.0);
            assert_eq!(taper(-50.0, Some(alpha), 50.0).unwrap(), 0.0);
        }
        let v = taper(25.0, Some(10.0), 50.0).unwrap();
        assert!((v - (-1.0_f64 / 300.0).exp()).abs() < 1e-15);
        assert!((v - 0.996672).abs() < 1e-6);
        assert_eq!(taper(17.0, None, 50.0).unwrap(), 1.0);
        assert!(matches!(taper(50.5, Some(10.0), 50.0), Err(Error::OutsideTank { .. })));
        assert!(taper(-49.999, Some(10.0), 50.0).unwrap() < 1e-12);
        let near_wall = taper(49.0, Some(10.0), 50.0).unwrap();
        assert!(near_wall > 0.0 && near_wall < 1.0);
    }

    #[test]
    fn taper_is_even() {
        for x in [0.3, 7.0, 31.0, 49.5] {
            assert_eq!(
                taper(x, Some(10.0), 50.0).unwrap(),
                taper(-x, Some(10.0), 50.0).unwrap()
            );
        }
    }

    #[test]
    fn increments_are_reproducible() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        for _ in 0..100 {
            assert_eq!(a.sample_increment(0.005), b.sample_increment(0.005));
        }
        assert_eq!(a.draws(), 100);
        let mut c = RngStream::for_path(42, 1);
        assert_ne!(c.sample_increment(0.005), RngStream::new(42).sample_increment(0.005));
        assert_eq!(path_seed(42, 0), 42);
    }

    #[test]
    fn increment_moments() {
        let dt = 0.005;
        let n = 100_000;
        let mut rng = RngStream::new(7);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let inc = rng.sample_increment(dt);
            for v in [inc.d_beta1, inc.d_beta2] {
                s += v;
                s2 += v * v;
            }
        }
        let m = (2 * n) as f64;
        let mean = s / m;
        let var = s2 / m - mean * mean;
        assert!(mean.abs() < 3.0 * (dt / m).sqrt(), "mean {mean}");
        assert!((var / dt - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn zero_amplitude_gives_zero_noise() {
        let g = grid();
        let model = NoiseModel {
            amplitude: 0.0,
            ..NoiseModel::default()
        };
        let mut rng = RngStream::new(3);
        let inc = rng.sample_increment(0.005);
        assert!(noise_field(&model, &inc, &g).is_zero());
        assert!(variance_tensor(&model, &g).is_zero());
        assert!(ito_stokes_drift(&model, &g).is_zero());
    }

    #[test]
    fn untapered_basis_readout() {
        let g = grid();
        let model = NoiseModel {
            amplitude: 0.01,
            taper_alpha: None,
            ..NoiseModel::default()
        };
        let inc = WienerIncrement {
            d_beta1: 1.0,
            d_beta2: 0.0,
            dt: 0.005,
        };
        let f = noise_field(&model, &inc, &g);
        let expected = g.field_from_fn(|x| 0.01 * (model.wavenumber * x).cos());
        assert!(f.max_diff(&expected) < 1e-16);
        assert!(model.is_periodic_on(&g));
    }

    #[test]
    fn tapered_noise_vanishes_on_wall() {
        let g = grid();
        let model = NoiseModel::default();
        let inc = WienerIncrement {
            d_beta1: 0.7,
            d_beta2: -1.3,
            dt: 0.005,
        };
        assert_eq!(noise_field(&model, &inc, &g)[0], 0.0);
    }

    #[test]
    fn variance_tensor_values() {
        let g = grid();
        let model = NoiseModel {
            amplitude: 0.01,
            ..NoiseModel::default()
        };
        let a = variance_tensor(&model, &g);
        let centre = g.nearest_node(0.0);
        assert!((a[centre] - 1e-4).abs() < 1e-18);
        let at25 = g.nearest_node(25.0);
        assert_eq!(g.nodes()[at25], 25.0);
        assert!((a[at25] - 9.9336e-5).abs() < 1e-9);
        assert!(a.iter().all(|&v| v >= 0.0));
        let flat = NoiseModel {
            taper_alpha: None,
            ..model
        };
        assert!(variance_tensor(&flat, &g).iter().all(|&v| (v - 1e-4).abs() < 1e-18));
    }

    #[test]
    fn empirical_variance_matches_tensor() {
        let g = Grid::new(256, 50.0).unwrap();
        let model = NoiseModel {
            amplitude: 0.01,
            ..NoiseModel::default()
        };
        let dt = 0.005;
        let draws = 10_000;
        let mut rng = RngStream::new(11);
        let mut acc = vec![0.0; g.n()];
        for _ in 0..draws {
            let f = noise_field(&model, &rng.sample_increment(dt), &g);
            for (a, v) in acc.iter_mut().zip(f.iter()) {
                *a += v * v;
            }
        }
        let a = variance_tensor(&model, &g);
        for (j, (&sum, &exact)) in acc.iter().zip(a.iter()).enumerate() {
            if exact < 1e-12 {
                continue;
            }
            let est = sum / draws as f64 / dt;
            assert!((est / exact - 1.0).abs() < 0.1, "node {j}: {est} vs {exact}");
        }
    }

    #[test]
    fn ito_stokes_drift_properties() {
        let g = grid();
        let model = NoiseModel {
            amplitude: 0.01,
            ..NoiseModel::default()
        };
        let us = ito_stokes_drift(&model, &g);
        let n = g.n();
        for j in 1..n {
            assert_eq!(us[j], -us[n - j]);
        }
        let total = g.integrate(&us);
        assert!(total.abs() < 1e-12);

        // Half of a 4th-order finite difference of the variance tensor.
        let a = variance_tensor(&model, &g);
        let h = g.dx();
        let at = |j: isize| a[(j.rem_euclid(n as isize)) as usize];
        let err = (0..n as isize)
            .map(|j| {
                let fd = (-at(j + 2) + 8.0 * at(j + 1) - 8.0 * at(j - 1) + at(j - 2)) / (12.0 * h);
                (0.5 * fd - us[j as usize]).abs()
            })
            .fold(0.0_f64, f64::max);
        assert!(err < 1e-6, "ISD vs FD: {err}");

        let flat = NoiseModel {
            taper_alpha: None,
            ..model
        };
        assert!(ito_stokes_drift(&flat, &g).is_zero());
    }

    #[test]
    fn additive_split() {
        let g = Grid::new(64, 5.0).unwrap();
        let div = g.field_from_fn(|x| x.sin());
        let eta = g.field_from_fn(|x| (-x * x).exp());
        let on = NoiseModel::default();
        let off = NoiseModel {
            filter_additive: false,
            ..NoiseModel::default()
        };
        assert!(split_additive(&div, &g.zeros(), &on, 0.1).is_zero());
        assert_eq!(split_additive(&div, &g.zeros(), &off, 0.1), div);
        let diff = split_additive(&div, &eta, &on, 0.1).sub(&split_additive(&div, &eta, &off, 0.1));
        assert!(diff.add(&div).max_abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(NoiseModel::default().validate().is_ok());
        let bad = NoiseModel {
            amplitude: -1.0,
            ..NoiseModel::default()
        };
        assert!(bad.validate().is_err());
        let bad = NoiseModel {
            taper_alpha: Some(0.0),
            ..NoiseModel::default()
        };
        assert!(bad.validate().is_err());
    }
}
