//! Floquet problem in Sambe space.
//!
//! With ψ(t) = e^{−iεt} Σ_q e^{−iqΩt} χ_q the time-periodic Schrödinger
//! equation becomes a static, real symmetric eigenproblem over (k, q):
//! diagonal k²/(2m_e) − qΩ, (k,q) ↔ (k±1, q±1) with −μr/2 and
//! (k,q) ↔ (k±2, q) with −μ(1−r)/4. Shifting q → q + n maps a solution with
//! quasi-energy ε to one with ε − nΩ; each such family is represented by its
//! member with ⟨q⟩ closest to zero.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::adiabatic::{self, PumpCurve};
use crate::banded::BandMatrix;
use crate::hamiltonian::MomentumBasis;
use crate::lanczos;
use crate::model::ModelParams;
use crate::{Error, Result, WindingMethod, WindingResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SambeBasis {
    pub k_max: usize,
    pub q_max: usize,
}

impl SambeBasis {
    pub fn new(k_max: usize, q_max: usize) -> Self {
        SambeBasis { k_max, q_max }
    }

    pub fn nk(&self) -> usize {
        2 * self.k_max + 1
    }

    pub fn nq(&self) -> usize {
        2 * self.q_max + 1
    }

    pub fn dim(&self) -> usize {
        self.nk() * self.nq()
    }

    /// q-major ordering keeps the matrix banded with bandwidth nk + 1.
    pub fn index(&self, k: i64, q: i64) -> Option<usize> {
        let ik = k + self.k_max as i64;
        let iq = q + self.q_max as i64;
        if ik < 0 || iq < 0 || ik >= self.nk() as i64 || iq >= self.nq() as i64 {
            return None;
        }
        Some(iq as usize * self.nk() + ik as usize)
    }

    pub fn kq(&self, i: usize) -> (i64, i64) {
        let nk = self.nk();
        ((i % nk) as i64 - self.k_max as i64, (i / nk) as i64 - self.q_max as i64)
    }
}

/// Real symmetric Sambe-space matrix in band storage.
#[derive(Clone, Debug)]
pub struct SambeMatrix {
    pub basis: SambeBasis,
    pub params: ModelParams,
    pub band: BandMatrix<f64>,
}

impl SambeMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.band.get(i, j)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.band.matvec(x)
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.basis.dim();
        let w = self.basis.nk() + 1;
        (0..n).all(|i| (i + 1..(i + w + 1).min(n)).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

pub fn build_sambe_matrix(p: &ModelParams, basis: SambeBasis) -> Result<SambeMatrix> {
    if basis.k_max < 2 || basis.q_max < 1 {
        return Err(Error::InvalidArgument("need k_max >= 2 and q_max >= 1".into()));
    }
    p.validate_quantum()?;
    let w = basis.nk() + 1;
    let mut band = BandMatrix::zeros(basis.dim(), w, w);
    let c1 = -p.mu * p.r / 2.0;
    let c2 = -p.mu * (1.0 - p.r) / 4.0;
    for i in 0..basis.dim() {
        let (k, q) = basis.kq(i);
        band.set(i, i, (k * k) as f64 / (2.0 * p.m_e) - q as f64 * p.omega);
        if let Some(j) = basis.index(k + 1, q + 1) {
            band.set(i, j, c1);
            band.set(j, i, c1);
        }
        if let Some(j) = basis.index(k + 2, q) {
            band.set(i, j, c2);
            band.set(j, i, c2);
        }
    }
    Ok(SambeMatrix {
        basis,
        params: *p,
        band,
    })
}

/// A quasi-energy eigenvector with its diagnostics.
#[derive(Clone, Debug)]
pub struct FloquetState {
    pub epsilon: f64,
    /// ⟨k|χ_q⟩ in [`SambeBasis::index`] order.
    pub components: Vec<f64>,
    pub basis: SambeBasis,
    pub omega: f64,
    pub q_mean: f64,
    pub q2: f64,
    pub k2: f64,
    /// max over |k| = k_max of Σ_q |χ_{k,q}|².
    pub k_edge: f64,
    /// Σ_k |χ_{k,±q_max}|².
    pub q_edge: f64,
    /// Weight discarded when shifting to the representative.
    pub shift_loss: f64,
    /// ‖Aχ − εχ‖.
    pub residual: f64,
    /// max over θ of |‖χ(θ)‖² − 1|; zero for a physical state.
    pub norm_defect: f64,
}

impl FloquetState {
    fn from_vector(v: Vec<f64>, epsilon: f64, basis: SambeBasis, omega: f64) -> Self {
        let mut s = FloquetState {
            epsilon,
            components: v,
            basis,
            omega,
            q_mean: 0.0,
            q2: 0.0,
            k2: 0.0,
            k_edge: 0.0,
            q_edge: 0.0,
            shift_loss: 0.0,
            residual: 0.0,
            norm_defect: 0.0,
        };
        s.refresh();
        s
    }

    fn refresh(&mut self) {
        let b = self.basis;
        let (mut qm, mut q2, mut k2, mut qe) = (0.0, 0.0, 0.0, 0.0);
        let mut kw = vec![0.0; b.nk()];
        for (i, c) in self.components.iter().enumerate() {
            let (k, q) = b.kq(i);
            let w = c * c;
            qm += q as f64 * w;
            q2 += (q * q) as f64 * w;
            k2 += (k * k) as f64 * w;
            kw[(k + b.k_max as i64) as usize] += w;
            if q.unsigned_abs() as usize == b.q_max {
                qe += w;
            }
        }
        self.q_mean = qm;
        self.q2 = q2;
        self.k2 = k2;
        self.q_edge = qe;
        self.k_edge = kw[0].max(kw[b.nk() - 1]);
    }

    /// Cycle-averaged energy ε + Ω⟨q⟩, the same for every member of a family.
    pub fn mean_energy(&self) -> f64 {
        self.epsilon + self.omega * self.q_mean
    }

    pub fn complex_components(&self) -> Vec<Complex64> {
        self.components.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }

    /// The family member shifted by q → q + n, zero-filled at the edge.
    pub fn shifted(&self, n: i64) -> FloquetState {
        let b = self.basis;
        let mut v = vec![0.0; b.dim()];
        let mut kept = 0.0;
        for (i, c) in self.components.iter().enumerate() {
            let (k, q) = b.kq(i);
            if let Some(j) = b.index(k, q + n) {
                v[j] = *c;
                kept += c * c;
            }
        }
        let mut s = FloquetState::from_vector(v, self.epsilon - n as f64 * self.omega, b, self.omega);
        s.shift_loss = self.shift_loss + (1.0 - kept).max(0.0);
        s.residual = self.residual;
        s.norm_defect = self.norm_defect;
        s
    }

    /// The physical state χ(θ) = Σ_q e^{−iqθ} χ_q in the momentum basis.
    pub fn at_theta(&self, theta: f64) -> Vec<Complex64> {
        let b = self.basis;
        let mut out = vec![Complex64::new(0.0, 0.0); b.nk()];
        for iq in 0..b.nq() {
            let q = iq as f64 - b.q_max as f64;
            let ph = Complex64::from_polar(1.0, -q * theta);
            for ik in 0..b.nk() {
                out[ik] += ph * self.components[iq * b.nk() + ik];
            }
        }
        out
    }

    /// Computes [`FloquetState::norm_defect`] on a θ grid fine enough to be exact.
    pub fn update_norm_defect(&mut self) {
        let n = (2 * self.basis.nq()).next_power_of_two();
        let grid = physical_on_grid(self, n);
        self.norm_defect = grid[..n]
            .iter()
            .map(|x| (x.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
    }

    pub fn momentum_basis(&self) -> MomentumBasis {
        MomentumBasis::new(self.basis.k_max)
    }
}

/// Winding per cycle, ⟨v̂⟩·(2π/Ω)/(2π).
pub fn floquet_winding(state: &FloquetState, p: &ModelParams) -> WindingResult {
    let b = state.basis;
    let mut v = 0.0;
    for (i, c) in state.components.iter().enumerate() {
        let (k, _) = b.kq(i);
        v += k as f64 / p.m_e * c * c;
    }
    WindingResult {
        chi: v / p.omega,
        method: WindingMethod::Floquet,
        cycles_used: 1,
        convergence_estimate: state.q_edge.max(state.k_edge).max(state.shift_loss),
    }
}

/// Selection of physical representatives.
#[derive(Clone, Copy, Debug)]
pub struct SelectPolicy {
    /// Number of lowest families (by mean energy) that must be confined.
    pub n_families: usize,
    pub edge_tol: f64,
    /// Bound on [`FloquetState::norm_defect`].
    pub norm_tol: f64,
    /// Spectral target; defaults to the cycle-averaged adiabatic E₀.
    pub sigma: Option<f64>,
}

impl Default for SelectPolicy {
    fn default() -> Self {
        SelectPolicy {
            n_families: 2,
            edge_tol: 1e-8,
            norm_tol: 1e-6,
            sigma: None,
        }
    }
}

/// Eigenpairs of the Sambe matrix nearest to `sigma` by shift-invert Lanczos.
pub fn eigenpairs_near(m: &SambeMatrix, sigma: f64, nev: usize) -> Result<Vec<FloquetState>> {
    let n = m.basis.dim();
    let nev = nev.min(n);
    let omega = m.params.omega;
    let mut shift = sigma;
    let mut lu = None;
    for attempt in 0..8 {
        let mut a = m.band.clone();
        a.shift_diagonal(-shift);
        match a.lu() {
            Ok(f) => {
                lu = Some(f);
                break;
            }
            Err(Error::Singular) => {
                shift = sigma + (0.1234 + 0.05 * attempt as f64) * omega.abs().max(1e-6);
            }
            Err(e) => return Err(e),
        }
    }
    let lu = lu.ok_or(Error::Singular)?;
    let pairs = lanczos::largest_magnitude(|x| lu.solve(x), n, nev, 1e-12)?;
    let mut out = Vec::with_capacity(pairs.values.len());
    for (theta, v) in pairs.values.iter().zip(pairs.vectors) {
        let eps = shift + 1.0 / theta;
        let av = m.matvec(&v);
        let res = av
            .iter()
            .zip(&v)
            .map(|(a, x)| (a - eps * x).powi(2))
            .sum::<f64>()
            .sqrt();
        let mut s = FloquetState::from_vector(v, eps, m.basis, omega);
        s.residual = res;
        out.push(s);
    }
    out.sort_by(|a, b| a.epsilon.partial_cmp(&b.epsilon).unwrap());
    Ok(out)
}

/// Shift to the family member with the smallest ⟨q²⟩; ties go to smaller |ε|.
pub fn representative(s: &FloquetState) -> FloquetState {
    let base = -s.q_mean.round() as i64;
    let frac = s.q_mean + base as f64;
    let mut best = s.shifted(base);
    if (frac.abs() - 0.5).abs() < 1e-9 {
        let alt = s.shifted(base - frac.signum() as i64);
        if alt.epsilon.abs() < best.epsilon.abs() {
            best = alt;
        }
    }
    fix_sign(&mut best);
    best
}

fn fix_sign(s: &mut FloquetState) {
    let big = s
        .components
        .iter()
        .copied()
        .fold(0.0f64, |m, x| if x.abs() > m.abs() + 1e-15 { x } else { m });
    if big < 0.0 {
        for c in s.components.iter_mut() {
            *c = -*c;
        }
    }
}

/// Physical representatives of the families found near σ, ordered by mean
/// energy. Families whose representative leaks into a cutoff are dropped;
/// the lowest `policy.n_families` must all be confined.
pub fn solve_floquet(m: &SambeMatrix, policy: &SelectPolicy) -> Result<Vec<FloquetState>> {
    let p = m.params;
    let sigma = match policy.sigma {
        Some(s) => s,
        None => adiabatic::mean_ground_energy(&p, m.basis.k_max, 64)?,
    };
    let nk = m.basis.nk();
    let cap = m.basis.dim().min(16 * (2 * nk + 10));
    let mut nev = 2 * nk + 10;
    let mut families = loop {
        let raw = eigenpairs_near(m, sigma, nev)?;
        let span = raw.last().unwrap().epsilon - raw[0].epsilon;
        let families = group_families(&raw);
        if (span >= p.omega.abs() && families.len() >= policy.n_families) || nev >= cap {
            break families;
        }
        nev = (2 * nev).min(cap);
    };
    families.sort_by(|a, b| a.mean_energy().partial_cmp(&b.mean_energy()).unwrap());
    let tol = policy.edge_tol;
    // Eigenvectors of the truncated problem can have negligible edge weight
    // yet a θ-dependent norm; those are not solutions of the full problem.
    let confined = |s: &FloquetState| {
        s.q_edge < tol && s.shift_loss < tol && s.residual < 1e-8 && s.norm_defect < policy.norm_tol
    };
    for s in families.iter().take(policy.n_families) {
        if s.k_edge >= tol {
            return Err(Error::EdgeLeakage {
                edge: "k",
                weight: s.k_edge,
            });
        }
        if !confined(s) {
            return Err(Error::EdgeLeakage {
                edge: "q",
                weight: s.q_edge.max(s.shift_loss).max(s.residual).max(s.norm_defect),
            });
        }
    }
    Ok(families
        .into_iter()
        .filter(|s| confined(s) && s.k_edge < tol)
        .collect())
}

/// Representatives of distinct families among raw eigenpairs.
fn group_families(raw: &[FloquetState]) -> Vec<FloquetState> {
    let mut reps: Vec<FloquetState> = raw.iter().map(representative).collect();
    reps.sort_by(|a, b| a.epsilon.partial_cmp(&b.epsilon).unwrap());
    // Members of one family share the representative; keep the cleanest.
    let mut families: Vec<FloquetState> = Vec::new();
    for r in reps {
        if let Some(last) = families.last_mut() {
            let same = (r.epsilon - last.epsilon).abs() < 1e-8 * (1.0 + r.epsilon.abs())
                && overlap(&r, last).abs() > 0.99;
            if same {
                if r.shift_loss < last.shift_loss {
                    *last = r;
                }
                continue;
            }
        }
        families.push(r);
    }
    for f in families.iter_mut() {
        f.update_norm_defect();
    }
    families
}

fn overlap(a: &FloquetState, b: &FloquetState) -> f64 {
    a.components.iter().zip(&b.components).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug)]
pub struct FloquetConfig {
    pub k_max: usize,
    pub q_max_start: usize,
    pub q_max_limit: usize,
    pub policy: SelectPolicy,
}

impl Default for FloquetConfig {
    fn default() -> Self {
        FloquetConfig {
            k_max: 12,
            q_max_start: 64,
            q_max_limit: 4096,
            policy: SelectPolicy::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FloquetSolution {
    /// Physical representatives ordered by mean energy.
    pub states: Vec<FloquetState>,
    pub basis: SambeBasis,
    pub sigma: f64,
}

impl FloquetSolution {
    pub fn ground(&self) -> &FloquetState {
        &self.states[0]
    }
}

/// Solves with q_max doubled from `q_max_start` until the lowest families are
/// confined in q.
pub fn solve_adaptive(p: &ModelParams, cfg: &FloquetConfig) -> Result<FloquetSolution> {
    if p.omega == 0.0 {
        return Err(Error::InvalidArgument("Floquet solve needs omega != 0".into()));
    }
    let sigma = match cfg.policy.sigma {
        Some(s) => s,
        None => adiabatic::mean_ground_energy(p, cfg.k_max, 64)?,
    };
    let policy = SelectPolicy {
        sigma: Some(sigma),
        ..cfg.policy
    };
    let mut q_max = cfg.q_max_start.max(1);
    loop {
        let basis = SambeBasis::new(cfg.k_max, q_max);
        let m = build_sambe_matrix(p, basis)?;
        match solve_floquet(&m, &policy) {
            Ok(states) => return Ok(FloquetSolution { states, basis, sigma }),
            Err(Error::EdgeLeakage { edge: "q", weight }) => {
                if q_max >= cfg.q_max_limit {
                    return Err(Error::EdgeLeakage { edge: "q", weight });
                }
                q_max = (2 * q_max).min(cfg.q_max_limit);
            }
            Err(e) => return Err(e),
        }
    }
}

/// One row of a winding-versus-Ω table.
#[derive(Clone, Debug)]
pub struct OmegaPoint {
    pub omega: f64,
    pub chi: f64,
    pub epsilon0: f64,
    pub mean_energy0: f64,
    pub q_max: usize,
    pub k_edge: f64,
    pub q_edge: f64,
    pub pt_residual: f64,
}

pub fn winding_vs_omega(p: &ModelParams, omega_list: &[f64], cfg: &FloquetConfig) -> Vec<Result<OmegaPoint>> {
    omega_list
        .iter()
        .map(|&w| {
            let q = p.with_omega(w);
            let sol = solve_adaptive(&q, cfg)?;
            let g = sol.ground();
            Ok(OmegaPoint {
                omega: w,
                chi: floquet_winding(g, &q).chi,
                epsilon0: g.epsilon,
                mean_energy0: g.mean_energy(),
                q_max: sol.basis.q_max,
                k_edge: g.k_edge,
                q_edge: g.q_edge,
                pt_residual: pt_check(&g.complex_components()).residual,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PtCheckResult {
    pub lambda: Complex64,
    pub residual: f64,
}

/// PT acts on Sambe components as complex conjugation. Returns the unit λ
/// minimizing ‖c* − λc‖ and that residual.
pub fn pt_check(c: &[Complex64]) -> PtCheckResult {
    let s: Complex64 = c.iter().map(|z| z * z).sum();
    let lambda = if s.norm() > 0.0 { s.conj() / s.norm() } else { Complex64::new(1.0, 0.0) };
    let residual = c
        .iter()
        .map(|z| (z.conj() - lambda * z).norm_sqr())
        .sum::<f64>()
        .sqrt();
    PtCheckResult { lambda, residual }
}

/// Rotates `c` so that its largest component is real and positive.
pub fn fix_global_phase(c: &[Complex64]) -> Vec<Complex64> {
    let mut best = Complex64::new(0.0, 0.0);
    for z in c {
        if z.norm() > best.norm() + 1e-15 {
            best = *z;
        }
    }
    if best.norm() == 0.0 {
        return c.to_vec();
    }
    let ph = best.conj() / best.norm();
    c.iter().map(|z| z * ph).collect()
}

/// ψ(t) = Σ c_n e^{−iε_n t} χ_n(Ωt) sampled over one cycle.
#[derive(Clone, Debug)]
pub struct Superposition {
    pub curve: PumpCurve,
    pub times: Vec<f64>,
    /// ⟨v̂⟩ at each time.
    pub velocity: Vec<f64>,
    /// ⟨v̂⟩ of each state alone.
    pub velocity_states: [Vec<f64>; 2],
}

/// The physical vectors χ(θ_j) on θ_j = sign(Ω)·2πj/n, j = 0..n.
fn physical_on_grid(s: &FloquetState, n: usize) -> Vec<Vec<Complex64>> {
    let b = s.basis;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut out = vec![vec![Complex64::new(0.0, 0.0); b.nk()]; n + 1];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for ik in 0..b.nk() {
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for iq in 0..b.nq() {
            let q = iq as i64 - b.q_max as i64;
            buf[q.rem_euclid(n as i64) as usize] += s.components[iq * b.nk() + ik];
        }
        fft.process(&mut buf);
        for j in 0..=n {
            let idx = if s.omega < 0.0 { (n - j % n) % n } else { j % n };
            out[j][ik] = buf[idx];
        }
    }
    out
}

/// Expected phase evolution of a two-state superposition over one cycle.
/// Both states must come from a solve at `p.omega`.
pub fn superposition_trajectory(
    states: (&FloquetState, &FloquetState),
    weights: [Complex64; 2],
    p: &ModelParams,
    n_samples: usize,
) -> Result<Superposition> {
    let (a, b) = states;
    if a.basis != b.basis || a.omega != p.omega || b.omega != p.omega {
        return Err(Error::InvalidArgument("states must share basis and omega".into()));
    }
    let mut n = n_samples.max(2 * a.basis.q_max + 1);
    n = n.next_power_of_two();
    let period = TAU / p.omega.abs();
    let dt = period / n as f64;
    let ga = physical_on_grid(a, n);
    let gb = physical_on_grid(b, n);
    let basis = a.momentum_basis();
    let mut times = Vec::with_capacity(n + 1);
    let mut vel = Vec::with_capacity(n + 1);
    let mut va = Vec::with_capacity(n + 1);
    let mut vb = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let t = j as f64 * dt;
        let pa = weights[0] * Complex64::from_polar(1.0, -a.epsilon * t);
        let pb = weights[1] * Complex64::from_polar(1.0, -b.epsilon * t);
        let (mut v, mut v0, mut v1) = (0.0, 0.0, 0.0);
        for ik in 0..basis.dim() {
            let k = basis.k(ik) as f64 / p.m_e;
            let psi = pa * ga[j][ik] + pb * gb[j][ik];
            v += k * psi.norm_sqr();
            v0 += k * ga[j][ik].norm_sqr();
            v1 += k * gb[j][ik].norm_sqr();
        }
        times.push(t);
        vel.push(v);
        va.push(v0);
        vb.push(v1);
    }
    let mut phase = vec![0.0; n + 1];
    for j in 1..=n {
        phase[j] = phase[j - 1] + 0.5 * dt * (vel[j - 1] + vel[j]);
    }
    let theta: Vec<f64> = times.iter().map(|t| p.omega * t).collect();
    let chi = phase[n] / TAU;
    Ok(Superposition {
        curve: PumpCurve { theta, phase, chi },
        times,
        velocity: vel,
        velocity_states: [va, vb],
    })
}

/// Weights 1/√2 with the relative phase that maximizes the probability in
/// |φ| < π/2 at t = 0.
pub fn localizing_weights(a: &FloquetState, b: &FloquetState) -> [Complex64; 2] {
    let xa = a.at_theta(0.0);
    let xb = b.at_theta(0.0);
    let basis = a.momentum_basis();
    // ∫_{−π/2}^{π/2} e^{i(k'−k)φ} dφ / 2π.
    let window = |d: i64| {
        if d == 0 {
            0.5
        } else {
            (d as f64 * std::f64::consts::FRAC_PI_2).sin() / (std::f64::consts::PI * d as f64)
        }
    };
    let mut c = Complex64::new(0.0, 0.0);
    for i in 0..basis.dim() {
        for j in 0..basis.dim() {
            c += xa[i].conj() * xb[j] * window(basis.k(j) - basis.k(i));
        }
    }
    let alpha = -c.arg();
    let w = std::f64::consts::FRAC_1_SQRT_2;
    [Complex64::new(w, 0.0), Complex64::from_polar(w, alpha)]
}

/// Probability in |φ| < π/2 for a physical state.
pub fn window_probability(x: &[Complex64]) -> f64 {
    let k_max = (x.len() - 1) / 2;
    let mut p = 0.0;
    for (i, a) in x.iter().enumerate() {
        for (j, b) in x.iter().enumerate() {
            let d = j as i64 - i as i64;
            let w = if d == 0 {
                0.5
            } else {
                (d as f64 * std::f64::consts::FRAC_PI_2).sin() / (std::f64::consts::PI * d as f64)
            };
            p += (a.conj() * b * w).re;
        }
    }
    let _ = k_max;
    p
}

/// Forward and backward superposition runs and their diagnostics.
#[derive(Clone, Debug)]
pub struct HysteresisRun {
    pub r: f64,
    pub forward: Superposition,
    pub backward: Superposition,
    pub splitting: f64,
    /// Mean oscillation frequency of the interference term (zero crossings).
    pub frequency: f64,
    /// Strongest spectral peak of the interference term.
    pub fft_peak: f64,
    /// Spread of Φ_f − Φ_b compared at equal positions on the θ circle.
    pub hysteresis: f64,
    pub initial_localization: f64,
}

fn lowest_pair(p: &ModelParams, cfg: &FloquetConfig) -> Result<(FloquetState, FloquetState)> {
    let sol = solve_adaptive(p, cfg)?;
    if sol.states.len() < 2 {
        return Err(Error::EigenNoConvergence("fewer than two confined families".into()));
    }
    Ok((sol.states[0].clone(), sol.states[1].clone()))
}

/// Zero crossings of the interference term, converted to angular frequency.
fn crossing_frequency(s: &Superposition) -> f64 {
    let x: Vec<f64> = interference(s);
    let mut n = 0;
    for w in x.windows(2) {
        if w[0] == 0.0 || w[0] * w[1] < 0.0 {
            n += 1;
        }
    }
    let span = s.times.last().unwrap() - s.times[0];
    std::f64::consts::PI * n as f64 / span
}

fn interference(s: &Superposition) -> Vec<f64> {
    s.velocity
        .iter()
        .zip(&s.velocity_states[0])
        .zip(&s.velocity_states[1])
        .map(|((v, a), b)| v - 0.5 * a - 0.5 * b)
        .collect()
}

fn fft_peak(s: &Superposition) -> f64 {
    let x = interference(s);
    let n = x.len() - 1;
    let mut buf: Vec<Complex64> = x[..n].iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let span = s.times[n] - s.times[0];
    let best = (1..n / 2)
        .max_by(|&a, &b| buf[a].norm().partial_cmp(&buf[b].norm()).unwrap())
        .unwrap_or(1);
    TAU * best as f64 / span
}

pub fn hysteresis_run(p: &ModelParams, cfg: &FloquetConfig, n_samples: usize) -> Result<HysteresisRun> {
    let w = p.omega.abs();
    let pf = p.with_omega(w);
    let pb = p.with_omega(-w);
    let (f0, f1) = lowest_pair(&pf, cfg)?;
    let (b0, b1) = lowest_pair(&pb, cfg)?;
    let wf = localizing_weights(&f0, &f1);
    let wb = localizing_weights(&b0, &b1);
    let forward = superposition_trajectory((&f0, &f1), wf, &pf, n_samples)?;
    let backward = superposition_trajectory((&b0, &b1), wb, &pb, n_samples)?;
    let n = forward.times.len() - 1;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    if backward.times.len() == n + 1 {
        for j in 0..=n {
            // Backward sample n − j sits at the same place on the θ circle.
            let d = forward.curve.phase[j] - backward.curve.phase[n - j];
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    let x0: Vec<Complex64> = f0
        .at_theta(0.0)
        .iter()
        .zip(f1.at_theta(0.0))
        .map(|(a, b)| wf[0] * a + wf[1] * b)
        .collect();
    Ok(HysteresisRun {
        r: p.r,
        splitting: (f1.epsilon - f0.epsilon).abs(),
        frequency: crossing_frequency(&forward),
        fft_peak: fft_peak(&forward),
        hysteresis: hi - lo,
        initial_localization: window_probability(&x0),
        forward,
        backward,
    })
}

/// Scans r and returns the run with the largest hysteresis.
pub fn locate_hysteresis_window(p: &ModelParams, rs: &[f64], cfg: &FloquetConfig, n_samples: usize) -> Result<(HysteresisRun, Vec<(f64, f64)>)> {
    let mut best: Option<HysteresisRun> = None;
    let mut table = Vec::new();
    for &r in rs {
        let run = hysteresis_run(&ModelParams { r, ..*p }, cfg, n_samples)?;
        table.push((r, run.hysteresis));
        if best.as_ref().map_or(true, |b| run.hysteresis > b.hysteresis) {
            best = Some(run);
        }
    }
    best.map(|b| (b, table))
        .ok_or_else(|| Error::InvalidArgument("empty r list".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian;

    #[test]
    fn free_rotor_replicas() {
        let p = ModelParams::quantum(0.4, 10.0, 0.0037).with_mu(0.0);
        let b = SambeBasis::new(3, 4);
        let m = build_sambe_matrix(&p, b).unwrap();
        for i in 0..b.dim() {
            let (k, q) = b.kq(i);
            assert_eq!(m.get(i, i), (k * k) as f64 / 20.0 - q as f64 * 0.0037);
            for j in 0..b.dim() {
                if i != j {
                    assert_eq!(m.get(i, j), 0.0);
                }
            }
        }
        let states = solve_floquet(
            &m,
            &SelectPolicy {
                sigma: Some(0.0),
                n_families: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let g = &states[0];
        assert!(g.epsilon.abs() < 1e-12);
        assert!((g.components[b.index(0, 0).unwrap()].abs() - 1.0).abs() < 1e-10);
        assert!(floquet_winding(g, &p).chi.abs() < 1e-10);
    }

    #[test]
    fn symmetric_and_replica_shift() {
        let p = ModelParams::quantum(0.45, 3.0, 0.02);
        let b = SambeBasis::new(5, 12);
        let m = build_sambe_matrix(&p, b).unwrap();
        assert!(m.is_symmetric());
        let states = eigenpairs_near(&m, -0.2, 6).unwrap();
        for s in &states {
            if s.q_edge > 1e-12 || s.residual > 1e-9 {
                continue;
            }
            for n in [-1i64, 1] {
                let t = s.shifted(n);
                if t.shift_loss > 1e-14 {
                    continue;
                }
                let av = m.matvec(&t.components);
                let res: f64 = av
                    .iter()
                    .zip(&t.components)
                    .map(|(a, x)| (a - t.epsilon * x).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(res < 1e-8);
                assert!((t.epsilon - (s.epsilon - n as f64 * p.omega)).abs() < 1e-15);
                assert!((t.mean_energy() - s.mean_energy()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn average_energy_identity() {
        // ⟨H⟩ over a cycle from the time-domain state equals ε + Ω⟨q⟩.
        let p = ModelParams::quantum(0.55, 5.0, 0.01);
        let sol = solve_adaptive(&p, &FloquetConfig { k_max: 10, ..Default::default() }).unwrap();
        let g = sol.ground();
        let n = 256;
        let mut e = 0.0;
        for j in 0..n {
            let th = TAU * j as f64 / n as f64;
            let x = g.at_theta(th);
            let h = hamiltonian::build_hamiltonian(&p, th, g.momentum_basis()).unwrap();
            let hx = &h.matrix * nalgebra::DVector::from_vec(x.clone());
            e += x.iter().zip(hx.iter()).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
        }
        e /= n as f64;
        assert!((e - g.mean_energy()).abs() < 1e-10, "{e} vs {}", g.mean_energy());
    }

    #[test]
    fn pt_examples() {
        let real: Vec<Complex64> = [0.6, -0.8].iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let r = pt_check(&real);
        assert!((r.lambda - Complex64::new(1.0, 0.0)).norm() < 1e-15 && r.residual < 1e-15);
        let mu = 0.37;
        let rot: Vec<Complex64> = real.iter().map(|z| z * Complex64::from_polar(1.0, mu)).collect();
        let r = pt_check(&rot);
        assert!((r.lambda - Complex64::from_polar(1.0, -2.0 * mu)).norm() < 1e-14);
        assert!(r.residual < 1e-14);
        // Two PT eigenstates with λ = 1 and λ = −1.
        let a = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let b = [Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)];
        let mix: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| (x + y) / 2f64.sqrt()).collect();
        assert!(pt_check(&mix).residual > 0.1);
        let fixed = fix_global_phase(&rot);
        assert!(fixed.iter().all(|z| z.im.abs() < 1e-15));
    }

    #[test]
    fn single_state_superposition_matches_winding() {
        let p = ModelParams::quantum(0.55, 5.0, 0.01);
        let sol = solve_adaptive(&p, &FloquetConfig { k_max: 10, ..Default::default() }).unwrap();
        let (a, b) = (&sol.states[0], &sol.states[1]);
        let s = superposition_trajectory((a, b), [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], &p, 512).unwrap();
        let chi = floquet_winding(a, &p).chi;
        assert!((s.curve.chi - chi).abs() < 1e-9, "{} vs {chi}", s.curve.chi);
    }
}
