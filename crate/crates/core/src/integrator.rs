//! Hybrid time stepping: classical RK4 on the drift, stochastic Euler-Heun on
//! the Stratonovich martingale part, composed additively within each step.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::models::{State, WaveModel};
use crate::noise::{RngStream, WienerIncrement};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Emit a snapshot every this many steps (the final state is always kept).
    pub snapshot_every: usize,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            dt: 0.005,
            t_end: 5.0,
            snapshot_every: 100,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        if self.snapshot_every == 0 {
            return Err(Error::InvalidParameter("snapshot_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Step indices at which snapshots are taken, including 0 and the last step.
    pub fn snapshot_steps(&self) -> Vec<usize> {
        let n = self.n_steps();
        let mut steps: Vec<usize> = (0..=n).step_by(self.snapshot_every.max(1)).collect();
        if steps.last() != Some(&n) {
            steps.push(n);
        }
        steps
    }

    pub fn time_of(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}

/// A system advanced by [`hybrid_step`].
pub trait Dynamics {
    /// Drift tendency per unit time.
    fn drift(&self, s: &State) -> Result<(Field, Field)>;

    /// `σ∘dB` for this step's increment; `None` when there is no martingale part.
    fn noise_sample(&self, inc: &WienerIncrement) -> Option<Field>;

    /// Martingale tendency, already scaled by the sampled noise.
    fn martingale(&self, s: &State, noise: &Field) -> Result<(Field, Field)>;

    /// Admissibility check applied to every new state.
    fn check(&self, _s: &State) -> Result<()> {
        Ok(())
    }

    /// One step of the scheme; systems with a stiff linear part may override it.
    fn step(&self, s: &State, inc: &WienerIncrement) -> Result<State> {
        hybrid_step(self, s, inc)
    }
}

impl Dynamics for WaveModel {
    fn drift(&self, s: &State) -> Result<(Field, Field)> {
        WaveModel::drift(self, s)
    }

    fn noise_sample(&self, inc: &WienerIncrement) -> Option<Field> {
        WaveModel::noise_sample(self, inc)
    }

    fn martingale(&self, s: &State, noise: &Field) -> Result<(Field, Field)> {
        WaveModel::martingale(self, s, noise)
    }

    fn check(&self, s: &State) -> Result<()> {
        if !(s.eta.is_finite() && s.vel.is_finite()) {
            return Err(Error::NonFinite("state"));
        }
        self.water_height(s).map(|_| ())
    }
}

fn offset(s: &State, a: f64, d: &(Field, Field)) -> State {
    let mut out = s.clone();
    out.eta.axpy(a, &d.0);
    out.vel.axpy(a, &d.1);
    out
}

/// One hybrid step with a given Wiener increment.
///
/// RK4 stages see the drift only. The martingale uses Euler-Heun with the
/// step's single noise sample: predictor `s̃ = s + M(s)`, increment
/// `½(M(s) + M(s̃))`. Both increments are added to the start-of-step state.
pub fn hybrid_step<D: Dynamics + ?Sized>(
    dynamics: &D,
    s: &State,
    inc: &WienerIncrement,
) -> Result<State> {
    let dt = inc.dt;
    let k1 = dynamics.drift(s)?;
    let k2 = dynamics.drift(&offset(s, 0.5 * dt, &k1))?;
    let k3 = dynamics.drift(&offset(s, 0.5 * dt, &k2))?;
    let k4 = dynamics.drift(&offset(s, dt, &k3))?;

    let mut next = s.clone();
    let w = dt / 6.0;
    for (k, weight) in [(&k1, w), (&k2, 2.0 * w), (&k3, 2.0 * w), (&k4, w)] {
        next.eta.axpy(weight, &k.0);
        next.vel.axpy(weight, &k.1);
    }

    if let Some(noise) = dynamics.noise_sample(inc) {
        let m1 = dynamics.martingale(s, &noise)?;
        let predictor = offset(s, 1.0, &m1);
        let m2 = dynamics.martingale(&predictor, &noise)?;
        next.eta.axpy(0.5, &m1.0);
        next.eta.axpy(0.5, &m2.0);
        next.vel.axpy(0.5, &m1.1);
        next.vel.axpy(0.5, &m2.1);
    }
    next.t = s.t + dt;
    dynamics.check(&next)?;
    Ok(next)
}

/// Ordered snapshots of one path.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub snapshots: Vec<State>,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<&State> {
        self.snapshots.last()
    }
}

/// A path that stopped early; `partial` holds every snapshot taken before the failure.
#[derive(Debug)]
pub struct SimulationFailure {
    pub partial: Trajectory,
    pub error: Error,
}

/// Advances `initial` to `cfg.t_end`, drawing one Wiener pair per step.
pub fn simulate<D: Dynamics + ?Sized>(
    dynamics: &D,
    initial: &State,
    cfg: &StepConfig,
    rng: &mut RngStream,
) -> Result<Trajectory, SimulationFailure> {
    simulate_with(dynamics, initial, cfg, |_| rng.sample_increment(cfg.dt))
}

/// Like [`simulate`] with a caller-supplied increment source (indexed by step).
pub fn simulate_with<D: Dynamics + ?Sized>(
    dynamics: &D,
    initial: &State,
    cfg: &StepConfig,
    mut increments: impl FnMut(usize) -> WienerIncrement,
) -> Result<Trajectory, SimulationFailure> {
    let fail = |partial: Trajectory, error: Error| SimulationFailure { partial, error };
    let mut traj = Trajectory::default();
    if let Err(e) = cfg.validate().and_then(|_| dynamics.check(initial)) {
        return Err(fail(traj, e));
    }
    let n = cfg.n_steps();
    let mut state = initial.clone();
    traj.snapshots.push(state.clone());
    for step in 0..n {
        let inc = increments(step);
        match dynamics.step(&state, &inc) {
            Ok(mut next) => {
                next.t = cfg.time_of(step + 1);
                state = next;
            }
            Err(source) => {
                let error = Error::Step {
                    step: step + 1,
                    t: cfg.time_of(step + 1),
                    source: Box::new(source),
                };
                return Err(fail(traj, error));
            }
        }
        if (step + 1) % cfg.snapshot_every == 0 || step + 1 == n {
            traj.snapshots.push(state.clone());
        }
    }
    Ok(traj)
}
