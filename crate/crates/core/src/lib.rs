//! Shallow-water wave models under location uncertainty on a periodic 1D tank.
//!
//! The crate provides the pseudo-spectral numerics ([`grid`], [`elliptic`]),
//! the structured transport noise ([`noise`]), the Saint-Venant, Boussinesq
//! and Serre-Green-Naghdi right-hand sides ([`models`]), a hybrid
//! RK4 / Euler-Heun integrator ([`integrator`]), conservation and ensemble
//! diagnostics ([`diagnostics`]), the KdV family ([`kdv`]) and the run
//! orchestration used by the command-line tool ([`config`], [`runner`]).

pub mod config;
pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod field;
pub mod grid;
pub mod integrator;
pub mod kdv;
pub mod models;
pub mod noise;
pub mod output;
pub mod runner;

pub use error::{Error, Result};
pub use field::Field;
pub use grid::Grid;
pub use models::{Form, ModelKind, ModelParams, State, Tendency, WaveModel};
pub use noise::{NoiseModel, RngStream, WienerIncrement};
