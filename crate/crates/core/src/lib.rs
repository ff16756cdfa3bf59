//! Overtone-synthesized Adler dynamics and its quantum counterparts.
//!
//! The crate covers the classical phase equation with a two-tone coupling,
//! the adiabatic quantum pump of a phase particle on a ring, the Floquet
//! problem in Sambe space, and two independent oracles: direct Schrödinger
//! propagation and coupled Duffing–Van der Pol oscillators.

pub mod adiabatic;
pub mod banded;
pub mod classical;
pub mod duffing;
mod error;
pub mod floquet;
pub mod hamiltonian;
pub mod lanczos;
pub mod model;
pub mod ode;
pub mod propagate;
pub mod quad;

pub use error::{Error, Result};
pub use model::{ModelParams, PhasePoint};

/// How a winding number was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindingMethod {
    Classical,
    Adiabatic,
    Floquet,
    Propagated,
}

impl WindingMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            WindingMethod::Classical => "classical",
            WindingMethod::Adiabatic => "adiabatic",
            WindingMethod::Floquet => "floquet",
            WindingMethod::Propagated => "propagated",
        }
    }
}

/// Net phase advance per modulation cycle, in units of 2π.
#[derive(Clone, Debug)]
pub struct WindingResult {
    pub chi: f64,
    pub method: WindingMethod,
    pub cycles_used: usize,
    pub convergence_estimate: f64,
}

/// Wraps an angle into [0, 2π).
pub fn wrap_angle(x: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let y = x.rem_euclid(tau);
    if y >= tau {
        0.0
    } else {
        y
    }
}
