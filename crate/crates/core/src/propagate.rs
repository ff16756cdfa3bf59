//! Direct time-dependent Schrödinger propagation in the momentum basis.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::banded::BandMatrix;
use crate::floquet::FloquetState;
use crate::hamiltonian::{velocity_matrix, MomentumBasis};
use crate::model::ModelParams;
use crate::{Error, Result, WindingMethod, WindingResult};

/// Largest allowed dt·k_max²/(2m_e) and dt·|Ω|.
pub const STEP_RESOLUTION: f64 = 0.1;
pub const NORM_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug)]
pub struct PropagateOptions {
    /// Drive phase at t = 0, θ(t) = θ₀ + Ωt.
    pub theta0: f64,
    /// Keep every n-th state; the final state is always kept.
    pub sample_every: usize,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        PropagateOptions {
            theta0: 0.0,
            sample_every: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PropagationResult {
    pub basis: MomentumBasis,
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    pub norms: Vec<f64>,
    /// ∫⟨v̂⟩dt from the start, at each kept time.
    pub phase: Vec<f64>,
    pub steps: usize,
}

impl PropagationResult {
    pub fn final_state(&self) -> &[Complex64] {
        self.states.last().unwrap()
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norms.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// |⟨a|b⟩|².
pub fn fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    inner(a, b).norm_sqr()
}

fn hamiltonian_band(p: &ModelParams, theta: f64, basis: MomentumBasis, scale: Complex64) -> BandMatrix<Complex64> {
    // I + scale·H(θ)
    let n = basis.dim();
    let mut m = BandMatrix::zeros(n, 2, 2);
    let c1 = Complex64::from_polar(-p.mu * p.r / 2.0, -theta);
    let c2 = Complex64::new(-p.mu * (1.0 - p.r) / 4.0, 0.0);
    for i in 0..n {
        let k = basis.k(i) as f64;
        m.set(i, i, Complex64::new(1.0, 0.0) + scale * (k * k / (2.0 * p.m_e)));
        if i + 1 < n {
            m.set(i + 1, i, scale * c1);
            m.set(i, i + 1, scale * c1.conj());
        }
        if i + 2 < n {
            m.set(i + 2, i, scale * c2);
            m.set(i, i + 2, scale * c2);
        }
    }
    m
}

/// Crank–Nicolson with H at the step midpoint. `t_span` may run backwards.
pub fn propagate(
    p: &ModelParams,
    psi0: &[Complex64],
    t_span: (f64, f64),
    dt: f64,
    opts: &PropagateOptions,
) -> Result<PropagationResult> {
    p.validate_quantum()?;
    if psi0.len() < 5 || psi0.len() % 2 == 0 {
        return Err(Error::InvalidArgument("state length must be 2k_max+1 with k_max >= 2".into()));
    }
    if (norm(psi0) - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidArgument("initial state not normalized".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    let basis = MomentumBasis::new((psi0.len() - 1) / 2);
    let kmax = basis.k_max as f64;
    let stiff = dt * (kmax * kmax / (2.0 * p.m_e)).max(p.omega.abs());
    if stiff >= STEP_RESOLUTION {
        return Err(Error::StepResolution(stiff));
    }
    let (t0, t1) = t_span;
    let n_steps = ((t1 - t0).abs() / dt).ceil().max(1.0) as usize;
    let h = (t1 - t0) / n_steps as f64;
    let vel: Vec<f64> = {
        let v = velocity_matrix(p, basis)?;
        (0..basis.dim()).map(|i| v[(i, i)].re).collect()
    };
    let v_of = |psi: &[Complex64]| -> f64 { psi.iter().zip(&vel).map(|(z, v)| v * z.norm_sqr()).sum() };
    let every = opts.sample_every.max(1);

    let mut psi = psi0.to_vec();
    let mut phase = 0.0;
    let mut v_prev = v_of(&psi);
    let mut out = PropagationResult {
        basis,
        times: vec![t0],
        states: vec![psi.clone()],
        norms: vec![norm(&psi)],
        phase: vec![0.0],
        steps: n_steps,
    };
    let half = Complex64::new(0.0, 0.5 * h);
    for s in 0..n_steps {
        let t = t0 + s as f64 * h;
        let theta = opts.theta0 + p.omega * (t + 0.5 * h);
        let b = hamiltonian_band(p, theta, basis, -half);
        let rhs = b.matvec(&psi);
        let a = hamiltonian_band(p, theta, basis, half);
        psi = a.lu()?.solve(&rhs);
        let v = v_of(&psi);
        phase += 0.5 * h * (v_prev + v);
        v_prev = v;
        let nrm = norm(&psi);
        if (nrm - 1.0).abs() > NORM_TOL {
            return Err(Error::NormDrift(nrm - 1.0));
        }
        if (s + 1) % every == 0 || s + 1 == n_steps {
            out.times.push(t0 + (s + 1) as f64 * h);
            out.states.push(psi.clone());
            out.norms.push(nrm);
            out.phase.push(phase);
        }
    }
    Ok(out)
}

/// Winding over one drive period starting from `psi0`.
pub fn propagated_winding(p: &ModelParams, psi0: &[Complex64], dt: f64) -> Result<(WindingResult, PropagationResult)> {
    if p.omega == 0.0 {
        return Err(Error::InvalidArgument("omega must be nonzero".into()));
    }
    let period = TAU / p.omega.abs();
    let opts = PropagateOptions {
        sample_every: usize::MAX,
        ..Default::default()
    };
    let run = propagate(p, psi0, (0.0, period), dt, &opts)?;
    let chi = run.phase.last().unwrap() / TAU * p.omega.signum();
    Ok((
        WindingResult {
            chi,
            method: WindingMethod::Propagated,
            cycles_used: 1,
            convergence_estimate: run.max_norm_drift(),
        },
        run,
    ))
}

/// Stroboscopic comparison of a Floquet state with direct propagation.
#[derive(Clone, Copy, Debug)]
pub struct StroboscopicCheck {
    /// |⟨e^{−iεT}χ(0)|ψ(T)⟩|².
    pub fidelity: f64,
    /// arg⟨e^{−iεT}χ(0)|ψ(T)⟩.
    pub phase_error: f64,
    pub steps: usize,
}

pub fn stroboscopic_check(state: &FloquetState, p: &ModelParams, dt: f64) -> Result<StroboscopicCheck> {
    let mut psi0 = state.at_theta(0.0);
    let n = norm(&psi0);
    psi0.iter_mut().for_each(|z| *z /= n);
    let period = TAU / p.omega.abs();
    let opts = PropagateOptions {
        sample_every: usize::MAX,
        ..Default::default()
    };
    let run = propagate(p, &psi0, (0.0, period), dt, &opts)?;
    let rot = Complex64::from_polar(1.0, -state.epsilon * period);
    let target: Vec<Complex64> = psi0.iter().map(|z| z * rot).collect();
    let ov = inner(&target, run.final_state());
    Ok(StroboscopicCheck {
        fidelity: ov.norm_sqr(),
        phase_error: ov.arg(),
        steps: run.steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{solve_adaptive, FloquetConfig};

    fn basis_state(k_max: usize, k: i64) -> Vec<Complex64> {
        let b = MomentumBasis::new(k_max);
        let mut v = vec![Complex64::new(0.0, 0.0); b.dim()];
        v[b.index(k).unwrap()] = Complex64::new(1.0, 0.0);
        v
    }

    #[test]
    fn free_rotor_phase() {
        let p = ModelParams::quantum(0.4, 2.0, 0.01).with_mu(0.0);
        let psi0 = basis_state(4, 3);
        let t = 7.3;
        let run = propagate(&p, &psi0, (0.0, t), 0.001, &Default::default()).unwrap();
        // Crank–Nicolson phase per step: 2·atan(E·h/2).
        let e = 9.0 / 4.0;
        let h = t / run.steps as f64;
        let cn = -2.0 * (e * h / 2.0).atan() * run.steps as f64;
        let psi = run.final_state();
        let z = psi[psi0.iter().position(|z| z.re == 1.0).unwrap()];
        assert!((z.norm() - 1.0).abs() < 1e-10);
        assert!((z - Complex64::from_polar(1.0, cn)).norm() < 1e-10);
        assert!((z - Complex64::from_polar(1.0, -e * t)).norm() < 1e-5);
        assert!((run.phase.last().unwrap() - 1.5 * t).abs() < 1e-10);
    }

    #[test]
    fn time_reversal_with_conjugation() {
        let p = ModelParams::quantum(0.45, 1.0, 0.05);
        let mut psi0: Vec<Complex64> = (0..13).map(|i| Complex64::new(1.0 / (1.0 + i as f64), 0.1 * i as f64)).collect();
        let n = norm(&psi0);
        psi0.iter_mut().for_each(|z| *z /= n);
        let t = 20.0;
        let fwd = propagate(&p, &psi0, (0.0, t), 0.002, &Default::default()).unwrap();
        assert!(fwd.max_norm_drift() < 1e-10);
        let back: Vec<Complex64> = fwd.final_state().iter().map(|z| z.conj()).collect();
        let opts = PropagateOptions {
            theta0: -p.omega * t,
            ..Default::default()
        };
        let rev = propagate(&p, &back, (0.0, t), 0.002, &opts).unwrap();
        let end: Vec<Complex64> = rev.final_state().iter().map(|z| z.conj()).collect();
        assert!(fidelity(&psi0, &end) > 1.0 - 1e-10);
    }

    #[test]
    fn dt_halving() {
        let p = ModelParams::quantum(0.5, 10.0, 0.01);
        let psi0 = basis_state(8, 0);
        let a = propagate(&p, &psi0, (0.0, 50.0), 0.002, &Default::default()).unwrap();
        let b = propagate(&p, &psi0, (0.0, 50.0), 0.001, &Default::default()).unwrap();
        assert!(fidelity(a.final_state(), b.final_state()) > 1.0 - 1e-8);
    }

    #[test]
    fn step_resolution_error() {
        let p = ModelParams::quantum(0.5, 1.0, 0.01);
        let psi0 = basis_state(10, 0);
        assert!(matches!(
            propagate(&p, &psi0, (0.0, 1.0), 0.01, &Default::default()),
            Err(Error::StepResolution(_))
        ));
    }

    #[test]
    fn floquet_stroboscopic() {
        let p = ModelParams::quantum(0.55, 5.0, 0.02);
        let sol = solve_adaptive(&p, &FloquetConfig { k_max: 8, ..Default::default() }).unwrap();
        for s in sol.states.iter().take(2) {
            let c = stroboscopic_check(s, &p, 0.005).unwrap();
            assert!(c.fidelity > 0.999, "{c:?}");
            assert!(c.phase_error.abs() < 0.05, "{c:?}");
        }
    }
}
