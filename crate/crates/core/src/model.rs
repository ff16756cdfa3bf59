//! Shared parameter record, washboard potential and force field.
//!
//! The phase obeys dφ/dt = f(φ, θ) with θ = Ωt and
//! f = Δ − A₁ sin(φ − θ) − 2A₂ sin 2φ, A₁ = μr, A₂ = μ(1 − r)/2.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Two-tone mixing ratio in [0, 1].
    pub r: f64,
    /// Coupling scale.
    pub mu: f64,
    /// Detuning.
    pub delta: f64,
    /// Signed modulation frequency; negative means a backward sweep.
    pub omega: f64,
    /// Phase-particle mass, used by the quantum modules only.
    pub m_e: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            r: 0.5,
            mu: 1.0,
            delta: 0.0,
            omega: std::f64::consts::TAU * 2e-4,
            m_e: 1.0,
        }
    }
}

impl ModelParams {
    pub fn new(r: f64, delta: f64, omega: f64) -> Self {
        ModelParams {
            r,
            delta,
            omega,
            ..Default::default()
        }
    }

    pub fn quantum(r: f64, m_e: f64, omega: f64) -> Self {
        ModelParams {
            r,
            m_e,
            omega,
            delta: 0.0,
            ..Default::default()
        }
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    /// Fundamental amplitude A₁ = μr.
    pub fn a1(&self) -> f64 {
        self.mu * self.r
    }

    /// Overtone amplitude A₂ = μ(1 − r)/2.
    pub fn a2(&self) -> f64 {
        self.mu * (1.0 - self.r) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::InvalidArgument("r out of [0,1]".into()));
        }
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidArgument("mu must be non-negative".into()));
        }
        if !self.delta.is_finite() || !self.omega.is_finite() {
            return Err(Error::InvalidArgument(
                "delta and omega must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn validate_quantum(&self) -> Result<()> {
        self.validate()?;
        if !(self.m_e > 0.0) || !self.m_e.is_finite() {
            return Err(Error::InvalidArgument("m_e must be positive".into()));
        }
        Ok(())
    }
}

/// A point in the (φ, θ) plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub phi: f64,
    pub theta: f64,
}

pub fn potential(p: &ModelParams, phi: f64, theta: f64) -> f64 {
    -phi * p.delta - p.a1() * (phi - theta).cos() - p.a2() * (2.0 * phi).cos()
}

pub fn force(p: &ModelParams, phi: f64, theta: f64) -> f64 {
    p.delta - p.a1() * (phi - theta).sin() - 2.0 * p.a2() * (2.0 * phi).sin()
}

pub fn force_dphi(p: &ModelParams, phi: f64, theta: f64) -> f64 {
    -p.a1() * (phi - theta).cos() - 4.0 * p.a2() * (2.0 * phi).cos()
}

pub fn force_dtheta(p: &ModelParams, phi: f64, theta: f64) -> f64 {
    p.a1() * (phi - theta).cos()
}

pub fn force_dphi2(p: &ModelParams, phi: f64, theta: f64) -> f64 {
    p.a1() * (phi - theta).sin() + 8.0 * p.a2() * (2.0 * phi).sin()
}

pub fn force_dphi_dtheta(p: &ModelParams, phi: f64, theta: f64) -> f64 {
    -p.a1() * (phi - theta).sin()
}
