//! First-order adiabatic pump of the phase particle.
//!
//! The ground state acquires the correction
//! Σ_m |φ_m⟩⟨φ_m|∂_t φ₀⟩/(E₀ − E_m)·(−i), giving the velocity
//! v = −(i/m_e) Σ_m ⟨φ₀|p̂|φ_m⟩⟨φ_m|∂_t φ₀⟩/(E₀ − E_m) + h.c.
//! Since ∂_t = Ω∂_θ, the phase gained per unit θ does not depend on Ω.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::hamiltonian::{self, build_dh_dtheta, build_hamiltonian, EigenDecomposition, MomentumBasis};
use crate::model::ModelParams;
use crate::{Error, Result, WindingMethod, WindingResult};

/// Gaps below this abort the calculation.
pub const GAP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeMethod {
    /// Central differences of phase-aligned eigenvectors.
    FiniteDifference,
    /// ⟨φ_m|∂_θH|φ₀⟩/(E₀ − E_m).
    Perturbative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdiabaticConfig {
    pub n_excited: usize,
    pub theta_grid: usize,
    pub dtheta_fd: f64,
    pub k_max: usize,
    pub derivative: DerivativeMethod,
}

impl Default for AdiabaticConfig {
    fn default() -> Self {
        AdiabaticConfig {
            n_excited: 12,
            theta_grid: 2048,
            dtheta_fd: TAU / 2048.0,
            k_max: 40,
            derivative: DerivativeMethod::FiniteDifference,
        }
    }
}

impl AdiabaticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_excited < 1 {
            return Err(Error::InvalidArgument("n_excited must be at least 1".into()));
        }
        if self.theta_grid < 256 {
            return Err(Error::InvalidArgument("theta_grid must be at least 256".into()));
        }
        if !(self.dtheta_fd > 0.0) {
            return Err(Error::InvalidArgument("dtheta_fd must be positive".into()));
        }
        if self.n_excited + 1 > 2 * self.k_max + 1 {
            return Err(Error::InvalidArgument("n_excited exceeds the basis".into()));
        }
        Ok(())
    }

    pub fn with_theta_grid(mut self, n: usize) -> Self {
        self.theta_grid = n;
        self.dtheta_fd = TAU / n as f64;
        self
    }
}

/// Phase evolution over one modulation cycle.
#[derive(Clone, Debug)]
pub struct PumpCurve {
    pub theta: Vec<f64>,
    /// Cumulative ∫⟨v̂⟩dt at each θ sample.
    pub phase: Vec<f64>,
    pub chi: f64,
}

fn solve(p: &ModelParams, theta: f64, cfg: &AdiabaticConfig) -> Result<EigenDecomposition> {
    let h = build_hamiltonian(p, theta, MomentumBasis::new(cfg.k_max))?;
    let e = hamiltonian::eigensolve(&h, cfg.n_excited + 1)?;
    let gap = e.energies[1] - e.energies[0];
    if gap < GAP_TOL {
        return Err(Error::GapCollapse { theta, gap });
    }
    Ok(e)
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `v` multiplied by the unit phase that makes ⟨reference|v⟩ real positive.
fn align(reference: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
    let s = dot(v, reference);
    let ph = if s.norm() > 0.0 { s / s.norm() } else { Complex64::new(1.0, 0.0) };
    v.iter().map(|z| z * ph).collect()
}

/// dΦ/dθ from the ground-state derivative projected on excited states.
fn rate_from_derivative(e: &EigenDecomposition, d0: &[Complex64], basis: MomentumBasis, m_e: f64) -> f64 {
    let phi0 = e.state(0);
    let mut x = Complex64::new(0.0, 0.0);
    for m in 1..e.energies.len() {
        let phim = e.state(m);
        let pm: Complex64 = (0..basis.dim())
            .map(|i| phi0[i].conj() * phim[i] * basis.k(i) as f64)
            .sum();
        x += pm * dot(&phim, d0) / (e.energies[0] - e.energies[m]);
    }
    2.0 * x.im / m_e
}

fn rate_fd(e: &EigenDecomposition, plus: &EigenDecomposition, minus: &EigenDecomposition, h: f64, cfg: &AdiabaticConfig, m_e: f64) -> f64 {
    let phi0 = e.state(0);
    let ap = align(&phi0, &plus.state(0));
    let am = align(&phi0, &minus.state(0));
    let d0: Vec<Complex64> = ap.iter().zip(&am).map(|(a, b)| (a - b) / (2.0 * h)).collect();
    rate_from_derivative(e, &d0, MomentumBasis::new(cfg.k_max), m_e)
}

fn rate_perturbative(p: &ModelParams, e: &EigenDecomposition, cfg: &AdiabaticConfig) -> f64 {
    let basis = MomentumBasis::new(cfg.k_max);
    let dh = build_dh_dtheta(p, e.theta, basis);
    let phi0 = e.state(0);
    let dh_phi0: Vec<Complex64> = (&dh * nalgebra::DVector::from_vec(phi0.clone())).iter().copied().collect();
    let mut d0 = vec![Complex64::new(0.0, 0.0); basis.dim()];
    for m in 1..e.energies.len() {
        let phim = e.state(m);
        let c = dot(&phim, &dh_phi0) / (e.energies[0] - e.energies[m]);
        for (d, z) in d0.iter_mut().zip(&phim) {
            *d += c * z;
        }
    }
    rate_from_derivative(e, &d0, basis, p.m_e)
}

/// Phase gained per unit θ at `theta`.
fn rate(p: &ModelParams, theta: f64, cfg: &AdiabaticConfig) -> Result<f64> {
    let e = solve(p, theta, cfg)?;
    Ok(match cfg.derivative {
        DerivativeMethod::FiniteDifference => {
            let h = cfg.dtheta_fd;
            let plus = solve(p, theta + h, cfg)?;
            let minus = solve(p, theta - h, cfg)?;
            rate_fd(&e, &plus, &minus, h, cfg, p.m_e)
        }
        DerivativeMethod::Perturbative => rate_perturbative(p, &e, cfg),
    })
}

/// Expected phase velocity ⟨v̂⟩ at θ to first order in Ω.
pub fn instantaneous_velocity(p: &ModelParams, theta: f64, cfg: &AdiabaticConfig) -> Result<f64> {
    p.validate_quantum()?;
    cfg.validate()?;
    if p.omega == 0.0 {
        solve(p, theta, cfg)?;
        return Ok(0.0);
    }
    Ok(p.omega * rate(p, theta, cfg)?)
}

fn rates_on_grid<G>(p: &ModelParams, cfg: &AdiabaticConfig, gauge: G) -> Result<Vec<f64>>
where
    G: Fn(usize) -> f64 + Sync,
{
    let n = cfg.theta_grid;
    let step = TAU / n as f64;
    let shared = (cfg.dtheta_fd - step).abs() <= 1e-12 * step;
    if cfg.derivative == DerivativeMethod::FiniteDifference && shared {
        let mut decs: Vec<EigenDecomposition> = (0..n)
            .into_par_iter()
            .map(|j| solve(p, step * j as f64, cfg))
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<_>>()?;
        for (j, d) in decs.iter_mut().enumerate() {
            let ph = Complex64::from_polar(1.0, gauge(j));
            for z in d.vectors.iter_mut() {
                *z *= ph;
            }
        }
        Ok((0..n)
            .into_par_iter()
            .map(|j| rate_fd(&decs[j], &decs[(j + 1) % n], &decs[(j + n - 1) % n], step, cfg, p.m_e))
            .collect())
    } else {
        in_order((0..n).into_par_iter().map(|j| rate(p, step * j as f64, cfg)).collect())
    }
}

fn curve_from_rates(p: &ModelParams, rates: &[f64]) -> PumpCurve {
    let n = rates.len();
    let sign = p.omega.signum();
    let step = TAU / n as f64;
    let mut theta = Vec::with_capacity(n + 1);
    let mut phase = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    theta.push(0.0);
    phase.push(0.0);
    for j in 0..n {
        // θ runs through −2πj/N on a backward sweep; w(θ) is sampled there.
        let w0 = rates[(sign_index(sign, j, n)) % n];
        let w1 = rates[(sign_index(sign, j + 1, n)) % n];
        acc += sign * step * 0.5 * (w0 + w1);
        theta.push(sign * step * (j + 1) as f64);
        phase.push(acc);
    }
    PumpCurve {
        theta,
        phase,
        chi: acc / TAU,
    }
}

fn sign_index(sign: f64, j: usize, n: usize) -> usize {
    if sign < 0.0 {
        (n - j % n) % n
    } else {
        j % n
    }
}

/// One cycle of the adiabatic pump; `chi` is the phase advance over 2π.
pub fn pump_curve(p: &ModelParams, cfg: &AdiabaticConfig) -> Result<PumpCurve> {
    p.validate_quantum()?;
    cfg.validate()?;
    if p.omega == 0.0 {
        return Err(Error::InvalidArgument("pump curve needs omega != 0".into()));
    }
    let rates = rates_on_grid(p, cfg, |_| 0.0)?;
    Ok(curve_from_rates(p, &rates))
}

pub fn adiabatic_winding(p: &ModelParams, cfg: &AdiabaticConfig) -> Result<WindingResult> {
    let full = pump_curve(p, cfg)?;
    let half = pump_curve(p, &cfg.with_theta_grid(cfg.theta_grid / 2).with_n_excited(cfg.n_excited))?;
    Ok(WindingResult {
        chi: full.chi,
        method: WindingMethod::Adiabatic,
        cycles_used: 1,
        convergence_estimate: (full.chi - half.chi).abs(),
    })
}

impl AdiabaticConfig {
    fn with_n_excited(mut self, n: usize) -> Self {
        self.n_excited = n;
        self
    }
}

/// Smallest E₁ − E₀ over the θ grid and where it occurs.
pub fn min_gap(p: &ModelParams, cfg: &AdiabaticConfig) -> Result<(f64, f64)> {
    let n = cfg.theta_grid;
    let basis = MomentumBasis::new(cfg.k_max);
    let gaps: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let th = TAU * j as f64 / n as f64;
            let h = build_hamiltonian(p, th, basis)?;
            let e = hamiltonian::eigensolve(&h, 2)?;
            Ok((e.energies[1] - e.energies[0], th))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(gaps.into_iter().fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a }))
}

/// Ground-state energy averaged over θ.
pub fn mean_ground_energy(p: &ModelParams, k_max: usize, n_theta: usize) -> Result<f64> {
    let basis = MomentumBasis::new(k_max);
    let es: Vec<f64> = (0..n_theta)
        .into_par_iter()
        .map(|j| {
            let h = build_hamiltonian(p, TAU * j as f64 / n_theta as f64, basis)?;
            Ok(hamiltonian::eigensolve(&h, 1)?.energies[0])
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(es.iter().sum::<f64>() / n_theta as f64)
}

/// Parallel results reduced so that the reported error is the first by index,
/// independent of scheduling.
fn in_order<T>(v: Vec<Result<T>>) -> Result<Vec<T>> {
    v.into_iter().collect()
}

/// |ψ₀(φ, θ)| on an (n_theta × n_phi) grid, rows indexed by θ.
pub fn amplitude_map(p: &ModelParams, basis: MomentumBasis, grid: (usize, usize)) -> Result<Vec<Vec<f64>>> {
    let (n_theta, n_phi) = grid;
    in_order((0..n_theta)
        .into_par_iter()
        .map(|j| {
            let th = TAU * j as f64 / n_theta as f64;
            let h = build_hamiltonian(p, th, basis)?;
            let e = hamiltonian::eigensolve(&h, 1)?;
            let psi = hamiltonian::wavefunction_on_grid(&e.state(0), n_phi)?;
            Ok(psi.iter().map(|z| z.norm()).collect())
        })
        .collect())
}
