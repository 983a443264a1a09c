//! Uniform periodic grid on the tank `[-L, L)` with FFT-based spectral operators.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::Field;

/// Uniform periodic mesh `x_j = -L + j·2L/n` together with its FFT plans.
///
/// Plans are immutable and shared, so one `Grid` can serve any number of
/// concurrent simulations. Every operation allocates its own scratch space.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    half_length: f64,
    dx: f64,
    nodes: Vec<f64>,
    wavenumbers: Vec<f64>,
    dealias: bool,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("half_length", &self.half_length)
            .field("dealias", &self.dealias)
            .finish()
    }
}

impl Grid {
    /// Builds the grid. `n` must be a power of two, at least 8.
    pub fn new(n: usize, half_length: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_points must be a power of two >= 8, got {n}"
            )));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half_length must be positive, got {half_length}"
            )));
        }
        let dx = 2.0 * half_length / n as f64;
        let half = (n / 2) as i64;
        // Offsets are integers, so x_{n-j} = -x_j holds exactly.
        let nodes = (0..n).map(|j| (j as i64 - half) as f64 * dx).collect();
        let wavenumbers = (0..n)
            .map(|j| PI * mode_index(j, n) as f64 / half_length)
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Grid {
            n,
            half_length,
            dx,
            nodes,
            wavenumbers,
            dealias: false,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    /// Enables the 2/3-rule truncation of every derivative output.
    pub fn with_dealiasing(mut self, on: bool) -> Self {
        self.dealias = on;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dealias(&self) -> bool {
        self.dealias
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Wavenumbers `k_m = πm/L` in FFT storage order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Signed mode index of FFT slot `j`; the Nyquist slot maps to `+n/2`.
    pub fn mode(&self, j: usize) -> i64 {
        mode_index(j, self.n)
    }

    pub fn nyquist_slot(&self) -> usize {
        self.n / 2
    }

    pub fn field_from_fn(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_fn(&self.nodes, f)
    }

    pub fn zeros(&self) -> Field {
        Field::zeros(self.n)
    }

    pub fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: f.len(),
            });
        }
        Ok(())
    }

    /// Unnormalised forward DFT.
    pub fn spectrum(&self, f: &[f64]) -> Result<Vec<Complex64>> {
        self.check(f)?;
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        Ok(buf)
    }

    /// Inverse of [`Grid::spectrum`], keeping the real part.
    pub fn synthesize(&self, mut spec: Vec<Complex64>) -> Field {
        debug_assert_eq!(spec.len(), self.n);
        self.inverse.process(&mut spec);
        let scale = 1.0 / self.n as f64;
        spec.iter().map(|c| c.re * scale).collect()
    }

    /// Multiplies every mode by `symbol(slot, k)`.
    pub fn apply_symbol(
        &self,
        f: &[f64],
        symbol: impl Fn(usize, f64) -> Complex64,
    ) -> Result<Field> {
        let mut spec = self.spectrum(f)?;
        for (j, c) in spec.iter_mut().enumerate() {
            *c *= symbol(j, self.wavenumbers[j]);
        }
        Ok(self.synthesize(spec))
    }

    /// Spectral derivative of order 1, 2 or 3.
    ///
    /// Odd orders zero the Nyquist mode so the output stays real; with
    /// dealiasing on, modes with `|m| > n/3` are dropped as well.
    pub fn deriv(&self, f: &[f64], order: u32) -> Result<Field> {
        if !(1..=3).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        let nyquist = self.nyquist_slot();
        let cutoff = self.n as i64 / 3;
        self.apply_symbol(f, |j, k| {
            if (order % 2 == 1 && j == nyquist) || (self.dealias && self.mode(j).abs() > cutoff) {
                return Complex64::new(0.0, 0.0);
            }
            Complex64::new(0.0, k).powu(order)
        })
    }

    /// Solves `(I - c ∂²) v = f` exactly on the grid.
    pub fn invert_helmholtz(&self, f: &[f64], c: f64) -> Result<Field> {
        check_coefficient(c)?;
        if c == 0.0 {
            self.check(f)?;
            return Ok(Field::new(f.to_vec()));
        }
        self.apply_symbol(f, |_, k| Complex64::new(1.0 / (1.0 + c * k * k), 0.0))
    }

    /// Applies `(I - c ∂²)`.
    pub fn apply_helmholtz(&self, f: &[f64], c: f64) -> Result<Field> {
        check_coefficient(c)?;
        self.apply_symbol(f, |_, k| Complex64::new(1.0 + c * k * k, 0.0))
    }

    /// Periodic translation: returns `g(x) = f(x - shift)` by spectral interpolation.
    pub fn shift(&self, f: &[f64], shift: f64) -> Result<Field> {
        if shift == 0.0 {
            self.check(f)?;
            return Ok(Field::new(f.to_vec()));
        }
        let nyquist = self.nyquist_slot();
        self.apply_symbol(f, |j, k| {
            if j == nyquist {
                // Real part of the Nyquist rotation keeps the output real.
                Complex64::new((k * shift).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, -k * shift)
            }
        })
    }

    /// Mirror image about `x = 0`: returns `g(x) = f(-x)`.
    pub fn reflect(&self, f: &[f64]) -> Result<Field> {
        self.check(f)?;
        let n = self.n;
        Ok((0..n).map(|j| f[(n - j) % n]).collect())
    }

    /// Rectangle-rule integral over one period.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.dx * f.iter().sum::<f64>()
    }

    /// Index of the node nearest to `x` (periodic).
    pub fn nearest_node(&self, x: f64) -> usize {
        let period = 2.0 * self.half_length;
        let offset = (x + self.half_length).rem_euclid(period) / self.dx;
        (offset.round() as usize) % self.n
    }

    /// Wraps a position into `[-L, L)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let period = 2.0 * self.half_length;
        (x + self.half_length).rem_euclid(period) - self.half_length
    }
}

fn mode_index(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

fn check_coefficient(c: f64) -> Result<()> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Helmholtz coefficient must be a finite non-negative number, got {c}"
        )));
    }
    Ok(())
}
