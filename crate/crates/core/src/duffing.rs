//! Coupled Duffing–Van der Pol oscillators and their reduction to an
//! Adler-type phase equation.
//!
//! Each oscillator obeys
//! ü + ω²(1 ∓ Δ)u − γω(1 − u²)u̇ + aω²u³ = ω²·C(t),
//! with the upper sign for the first oscillator. The coupling C(t) is
//! κ₁u₂ (static), 2κ₁cos((ω₁−ω₂)t + θ₁)u₂ (parametric) or
//! 2λ₁cos(2(ω₁−ω₂)t)u₁u₂² (nonlinear parametric), and symmetrically for
//! the second oscillator.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::ode::{self, OdeOptions};
use crate::{Error, Result};

pub const SIM_TOL: f64 = 1e-10;
pub const VALIDITY_LIMIT: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CouplingKind {
    Static,
    Parametric,
    NonlinearParametric,
}

impl CouplingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CouplingKind::Static => "static",
            CouplingKind::Parametric => "parametric",
            CouplingKind::NonlinearParametric => "nonlinear-parametric",
        }
    }

    /// Harmonic of the phase difference that appears in the reduced force.
    pub fn harmonic(self) -> u32 {
        match self {
            CouplingKind::NonlinearParametric => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Oscillator {
    pub omega: f64,
    pub gamma: f64,
    pub a: f64,
    pub delta: f64,
}

impl Oscillator {
    pub fn new(omega: f64, gamma: f64, a: f64, delta: f64) -> Self {
        Oscillator { omega, gamma, a, delta }
    }

    /// Accepts the unscaled form with nonlinear damping b; returns the
    /// oscillator in scaled units together with the amplitude factor √(γ/b).
    pub fn from_raw(omega: f64, gamma: f64, b: f64, a: f64, delta: f64) -> Result<(Self, f64)> {
        if !(gamma > 0.0 && b > 0.0) {
            return Err(Error::InvalidArgument("gamma and b must be positive".into()));
        }
        Ok((Oscillator::new(omega, gamma, a * b / gamma, delta), (gamma / b).sqrt()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DuffingParams {
    pub osc: [Oscillator; 2],
    pub kind: CouplingKind,
    /// κ₁, κ₂ (or λ₁, λ₂ for the nonlinear kind).
    pub coupling: [f64; 2],
    /// θ₁, θ₂; used by the parametric kind.
    pub theta: [f64; 2],
}

impl DuffingParams {
    pub fn single(omega0: f64, gamma: f64, a: f64) -> Self {
        let o = Oscillator::new(omega0, gamma, a, 0.0);
        DuffingParams {
            osc: [o, o],
            kind: CouplingKind::Static,
            coupling: [0.0, 0.0],
            theta: [0.0, 0.0],
        }
    }

    /// Identical oscillators with detuning ±Δ and linear coupling κ.
    pub fn static_pair(omega0: f64, gamma: f64, a: f64, kappa: f64, delta: f64) -> Self {
        let o = Oscillator::new(omega0, gamma, a, delta);
        DuffingParams {
            osc: [o, o],
            kind: CouplingKind::Static,
            coupling: [kappa, kappa],
            theta: [0.0, 0.0],
        }
    }

    pub fn parametric(osc: [Oscillator; 2], kappa: [f64; 2], theta: [f64; 2]) -> Self {
        DuffingParams {
            osc,
            kind: CouplingKind::Parametric,
            coupling: kappa,
            theta,
        }
    }

    pub fn nonlinear_parametric(osc: [Oscillator; 2], lambda: [f64; 2]) -> Self {
        DuffingParams {
            osc,
            kind: CouplingKind::NonlinearParametric,
            coupling: lambda,
            theta: [0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for o in &self.osc {
            if !(o.omega > 0.0) || !o.gamma.is_finite() || !o.a.is_finite() || !o.delta.is_finite() {
                return Err(Error::InvalidArgument("oscillator parameters must be finite, omega > 0".into()));
            }
        }
        if !self.coupling.iter().chain(&self.theta).all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument("coupling parameters must be finite".into()));
        }
        Ok(())
    }

    /// Parameters large enough to question the phase reduction.
    pub fn validity_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        for (n, o) in self.osc.iter().enumerate() {
            for (name, v) in [("gamma", o.gamma), ("a", o.a), ("delta", o.delta)] {
                if v.abs() > VALIDITY_LIMIT {
                    w.push(format!("{name}{} = {v} exceeds {VALIDITY_LIMIT}", n + 1));
                }
            }
            if self.coupling[n].abs() > VALIDITY_LIMIT {
                w.push(format!("coupling{} = {} exceeds {VALIDITY_LIMIT}", n + 1, self.coupling[n]));
            }
        }
        w
    }

    /// Largest of the small parameters, the natural choice of ε.
    pub fn epsilon(&self) -> f64 {
        self.osc
            .iter()
            .flat_map(|o| [o.gamma.abs(), o.a.abs(), o.delta.abs()])
            .chain(self.coupling.iter().map(|k| k.abs()))
            .fold(0.0, f64::max)
    }

    /// D, Γ, α, K of each oscillator for a given ε.
    pub fn scaled(&self, eps: f64) -> [ScaledParams; 2] {
        let s = |n: usize| ScaledParams {
            d: self.osc[n].delta / eps,
            gamma: self.osc[n].gamma / eps,
            alpha: self.osc[n].a / eps,
            k: self.coupling[n] / eps,
        };
        [s(0), s(1)]
    }

    /// Every small parameter multiplied by `f`.
    pub fn scale_small(&self, f: f64) -> Self {
        let mut q = *self;
        for o in q.osc.iter_mut() {
            o.gamma *= f;
            o.a *= f;
            o.delta *= f;
        }
        q.coupling = [q.coupling[0] * f, q.coupling[1] * f];
        q
    }

    fn rhs(&self, t: f64, y: &[f64; 4]) -> [f64; 4] {
        let [o1, o2] = self.osc;
        let (u1, v1, u2, v2) = (y[0], y[1], y[2], y[3]);
        let (c1, c2) = match self.kind {
            CouplingKind::Static => (self.coupling[0] * u2, self.coupling[1] * u1),
            CouplingKind::Parametric => {
                let w = o1.omega - o2.omega;
                (
                    2.0 * self.coupling[0] * (w * t + self.theta[0]).cos() * u2,
                    2.0 * self.coupling[1] * (-w * t + self.theta[1]).cos() * u1,
                )
            }
            CouplingKind::NonlinearParametric => {
                let m = 2.0 * (2.0 * (o1.omega - o2.omega) * t).cos();
                (self.coupling[0] * m * u1 * u2 * u2, self.coupling[1] * m * u2 * u1 * u1)
            }
        };
        let acc = |o: &Oscillator, sign: f64, u: f64, v: f64, c: f64| {
            let w2 = o.omega * o.omega;
            -w2 * (1.0 + sign * o.delta) * u + o.gamma * o.omega * (1.0 - u * u) * v - o.a * w2 * u * u * u + w2 * c
        };
        [v1, acc(&o1, -1.0, u1, v1, c1), v2, acc(&o2, 1.0, u2, v2, c2)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledParams {
    pub d: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub k: f64,
}

/// Uniformly sampled oscillator traces.
#[derive(Clone, Debug)]
pub struct Traces {
    pub t: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl Traces {
    pub fn dt(&self) -> f64 {
        self.t[1] - self.t[0]
    }
}

/// State (u₁, u̇₁, u₂, u̇₂) of two oscillators on their free limit cycles,
/// u_n = 2cos(φ_n), with the given phases.
pub fn limit_cycle_state(dp: &DuffingParams, phases: [f64; 2]) -> [f64; 4] {
    let w = [dp.osc[0].omega, dp.osc[1].omega];
    [
        2.0 * phases[0].cos(),
        -2.0 * w[0] * phases[0].sin(),
        2.0 * phases[1].cos(),
        -2.0 * w[1] * phases[1].sin(),
    ]
}

/// Integrates the full second-order system at tolerance 1e−10 and samples
/// it every `dt_sample`.
pub fn simulate_duffing(dp: &DuffingParams, u_init: [f64; 4], t_span: (f64, f64), dt_sample: f64) -> Result<Traces> {
    dp.validate()?;
    let (t0, t1) = t_span;
    if !(t1 > t0) || !(dt_sample > 0.0) {
        return Err(Error::InvalidArgument("need t1 > t0 and dt_sample > 0".into()));
    }
    let n = ((t1 - t0) / dt_sample).floor() as usize + 1;
    let t: Vec<f64> = (0..n).map(|i| t0 + i as f64 * dt_sample).collect();
    let wmax = dp.osc[0].omega.max(dp.osc[1].omega);
    let opts = OdeOptions::tol(SIM_TOL).with_h_max(0.25 / wmax);
    let ys = ode::integrate_sampled(|t, y| dp.rhs(t, y), t0, u_init, t[n - 1], &opts, &t)?;
    Ok(Traces {
        u1: ys.iter().map(|y| y[0]).collect(),
        u2: ys.iter().map(|y| y[2]).collect(),
        t,
    })
}

/// Complex envelopes and the slow phase difference of two traces.
#[derive(Clone, Debug)]
pub struct PhaseExtraction {
    pub t: Vec<f64>,
    /// Envelope U_n with u_n ≈ U_n e^{iω_n t} + c.c.
    pub envelope: [Vec<Complex64>; 2],
    /// Unwrapped φ₂ − φ₁.
    pub phi: Vec<f64>,
}

impl PhaseExtraction {
    pub fn amplitude(&self, n: usize) -> Vec<f64> {
        self.envelope[n].iter().map(|z| z.norm()).collect()
    }

    pub fn phase(&self, n: usize) -> Vec<f64> {
        unwrap(&self.envelope[n].iter().map(|z| z.arg()).collect::<Vec<_>>())
    }

    /// Central-difference dφ/dt at interior samples, paired with φ.
    pub fn phi_rate(&self) -> (Vec<f64>, Vec<f64>) {
        derivative(&self.t, &self.phi)
    }
}

fn derivative(t: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let mut at = Vec::with_capacity(n.saturating_sub(2));
    let mut d = Vec::with_capacity(n.saturating_sub(2));
    for i in 1..n.saturating_sub(1) {
        at.push(x[i]);
        d.push((x[i + 1] - x[i - 1]) / (t[i + 1] - t[i - 1]));
    }
    (at, d)
}

pub fn unwrap(x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut off = 0.0;
    for (i, &v) in x.iter().enumerate() {
        if i > 0 {
            let d = v - x[i - 1];
            if d > PI {
                off -= TAU;
            } else if d < -PI {
                off += TAU;
            }
        }
        out.push(v + off);
    }
    out
}

/// Blackman-windowed sinc low-pass with angular cutoff `wc`.
fn lowpass_kernel(wc: f64, dt: f64) -> Vec<f64> {
    // Transition width of the Blackman window is about 5.5/(M dt) in
    // angular frequency; take it as wc/2.
    let half = ((11.0 / (wc * dt)).ceil() as usize).max(4);
    let m = 2 * half;
    let mut k: Vec<f64> = (0..=m)
        .map(|i| {
            let x = i as f64 - half as f64;
            let s = if x == 0.0 { wc * dt / PI } else { (wc * dt * x).sin() / (PI * x) };
            let w = 0.42 - 0.5 * (TAU * i as f64 / m as f64).cos() + 0.08 * (2.0 * TAU * i as f64 / m as f64).cos();
            s * w
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Quadrature demodulation of each trace against its carrier followed by a
/// low-pass at `cutoff` (angular). Only samples where the filter window is
/// fully inside the record are returned.
pub fn extract_phase_with_cutoff(tr: &Traces, carriers: [f64; 2], cutoff: f64) -> Result<PhaseExtraction> {
    let n = tr.t.len();
    if n < 3 {
        return Err(Error::Demodulation("trace too short".into()));
    }
    let dt = tr.dt();
    if carriers.iter().any(|w| w * dt > PI / 2.0) {
        return Err(Error::Demodulation("sampling too coarse for the carrier".into()));
    }
    let kern = lowpass_kernel(cutoff, dt);
    let m = kern.len();
    if n <= m {
        return Err(Error::Demodulation(format!(
            "record of {n} samples shorter than the {m}-tap filter"
        )));
    }
    let out_n = n - m + 1;
    let mut env: [Vec<Complex64>; 2] = [Vec::with_capacity(out_n), Vec::with_capacity(out_n)];
    for (c, u) in [&tr.u1, &tr.u2].into_iter().enumerate() {
        let mixed: Vec<Complex64> = u
            .iter()
            .zip(&tr.t)
            .map(|(&x, &t)| Complex64::from_polar(x, -carriers[c] * t))
            .collect();
        for s in 0..out_n {
            let z: Complex64 = kern.iter().zip(&mixed[s..s + m]).map(|(k, z)| z * k).sum();
            env[c].push(z);
        }
    }
    let floor = env
        .iter()
        .flat_map(|e| e.iter().map(|z| z.norm()))
        .fold(f64::INFINITY, f64::min);
    let scale = tr.u1.iter().chain(&tr.u2).fold(0.0f64, |m, x| m.max(x.abs()));
    if !(floor > 1e-6 * scale.max(1e-300)) {
        return Err(Error::Demodulation("envelope lost in noise".into()));
    }
    let t: Vec<f64> = tr.t[m / 2..m / 2 + out_n].to_vec();
    let p1 = unwrap(&env[0].iter().map(|z| z.arg()).collect::<Vec<_>>());
    let p2 = unwrap(&env[1].iter().map(|z| z.arg()).collect::<Vec<_>>());
    let phi = p1.iter().zip(&p2).map(|(a, b)| b - a).collect();
    Ok(PhaseExtraction { t, envelope: env, phi })
}

/// [`extract_phase_with_cutoff`] with the cutoff at min(ω)/20.
pub fn extract_phase(tr: &Traces, carriers: [f64; 2]) -> Result<PhaseExtraction> {
    extract_phase_with_cutoff(tr, carriers, carriers[0].min(carriers[1]) / 20.0)
}

/// dφ/dt = d − c·sin(hφ − θ) − e·cos(hφ − θ).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdlerCoefficients {
    pub d: f64,
    pub c: f64,
    pub e: f64,
    pub theta: f64,
    pub harmonic: u32,
}

impl AdlerCoefficients {
    pub fn rate(&self, phi: f64) -> f64 {
        let x = self.harmonic as f64 * phi - self.theta;
        self.d - self.c * x.sin() - self.e * x.cos()
    }
}

/// Coefficients of the reduced phase equation for the given oscillators.
///
/// The first oscillator feels the other through φ + θ₁ and the second
/// through −(φ − θ₂). Both contributions are projected onto sin and cos of
/// φ − θ_ref with θ_ref = (θ₂ − θ₁)/2, which is the common drive phase when
/// θ₁ = −θ₂ and zero for the other kinds.
pub fn predicted_coefficients(dp: &DuffingParams) -> AdlerCoefficients {
    let [o1, o2] = dp.osc;
    let [k1, k2] = dp.coupling;
    let d = (o1.omega * o1.delta + o2.omega * o2.delta + 3.0 * (o2.omega * o2.a - o1.omega * o1.a)) / 2.0;
    let (shift, theta) = match dp.kind {
        CouplingKind::Parametric => ([-dp.theta[0], dp.theta[1]], 0.5 * (dp.theta[1] - dp.theta[0])),
        _ => ([0.0, 0.0], 0.0),
    };
    let parts = [
        (1.5 * o1.omega * o1.a * k1 / o1.gamma, -0.5 * o1.omega * k1),
        (1.5 * o2.omega * o2.a * k2 / o2.gamma, 0.5 * o2.omega * k2),
    ];
    let (mut c, mut e) = (0.0, 0.0);
    for ((cn, en), s) in parts.iter().zip(shift) {
        let (sn, cs) = (s - theta).sin_cos();
        c += cn * cs + en * sn;
        e += -cn * sn + en * cs;
    }
    AdlerCoefficients {
        d,
        c,
        e,
        theta,
        harmonic: dp.kind.harmonic(),
    }
}

/// Least-squares fit of dφ/dt against 1, sin(hφ − θ), cos(hφ − θ).
pub fn fit_coefficients(phi: &[f64], rate: &[f64], harmonic: u32, theta: f64) -> Result<(AdlerCoefficients, f64)> {
    use nalgebra::{DMatrix, DVector};
    if phi.len() != rate.len() || phi.len() < 3 {
        return Err(Error::InvalidArgument("need at least three samples".into()));
    }
    let h = harmonic as f64;
    let a = DMatrix::from_fn(phi.len(), 3, |i, j| {
        let x = h * phi[i] - theta;
        match j {
            0 => 1.0,
            1 => -x.sin(),
            _ => -x.cos(),
        }
    });
    let b = DVector::from_column_slice(rate);
    let svd = a.clone().svd(true, true);
    // Relative cutoff: a record that never moves in φ leaves the columns
    // collinear and must not amplify noise.
    let smax = svd.singular_values.max();
    let sol = svd
        .solve(&b, 1e-6 * smax)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let res = (&a * &sol - &b).norm() / (phi.len() as f64).sqrt();
    Ok((
        AdlerCoefficients {
            d: sol[0],
            c: sol[1],
            e: sol[2],
            theta,
            harmonic,
        },
        res,
    ))
}

#[derive(Clone, Copy, Debug)]
pub struct ReductionOptions {
    /// Initial phase difference φ₂ − φ₁ on the free limit cycles.
    pub phi0: f64,
    pub t_end: f64,
    /// Leading part of the record excluded from the fit.
    pub transient: f64,
    /// Samples per period of the faster carrier.
    pub samples_per_period: usize,
}

impl ReductionOptions {
    /// Long enough for the predicted coupling to act several times over.
    pub fn for_params(dp: &DuffingParams) -> Self {
        let p = predicted_coefficients(dp);
        let rate = p.c.abs().max(p.e.abs()).max(p.d.abs()).max(1e-12);
        let g = dp.osc[0].gamma.min(dp.osc[1].gamma).max(1e-12);
        let transient = 3.0 / g;
        ReductionOptions {
            phi0: PI - 0.2,
            t_end: transient + 8.0 / rate,
            transient,
            samples_per_period: 16,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReductionReport {
    pub predicted: AdlerCoefficients,
    pub fitted: AdlerCoefficients,
    /// rms(simulated − predicted dφ/dt) / rms(predicted dφ/dt).
    pub residual: f64,
    /// rms misfit of the least-squares fit.
    pub fit_residual: f64,
    /// max |R₁/R₂ − 1| over the fitted window.
    pub amplitude_ratio_deviation: f64,
    pub t: Vec<f64>,
    pub phi: Vec<f64>,
    pub warnings: Vec<String>,
}

pub fn reduction_check(dp: &DuffingParams, opts: &ReductionOptions) -> Result<ReductionReport> {
    let warnings = dp.validity_warnings();
    let wmax = dp.osc[0].omega.max(dp.osc[1].omega);
    let dt = TAU / wmax / opts.samples_per_period.max(4) as f64;
    let u0 = limit_cycle_state(dp, [0.0, opts.phi0]);
    let tr = simulate_duffing(dp, u0, (0.0, opts.t_end), dt)?;
    let ex = extract_phase(&tr, [dp.osc[0].omega, dp.osc[1].omega])?;
    let start = ex.t.iter().position(|&t| t >= opts.transient).unwrap_or(ex.t.len());
    if ex.t.len() - start < 16 {
        return Err(Error::Demodulation("nothing left after the transient".into()));
    }
    let t = ex.t[start..].to_vec();
    let phi = ex.phi[start..].to_vec();
    let (at, rate) = derivative(&t, &phi);
    let predicted = predicted_coefficients(dp);
    let (fitted, fit_residual) = fit_coefficients(&at, &rate, predicted.harmonic, predicted.theta)?;
    let pred: Vec<f64> = at.iter().map(|&p| predicted.rate(p)).collect();
    let rms = |v: &mut dyn Iterator<Item = f64>| {
        let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
        (s / n.max(1) as f64).sqrt()
    };
    let err = rms(&mut rate.iter().zip(&pred).map(|(a, b)| a - b));
    let scale = rms(&mut pred.iter().copied());
    let a1 = ex.amplitude(0);
    let a2 = ex.amplitude(1);
    let amplitude_ratio_deviation = (start..ex.t.len())
        .map(|i| (a1[i] / a2[i] - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(ReductionReport {
        predicted,
        fitted,
        residual: if scale > 0.0 { err / scale } else { err },
        fit_residual,
        amplitude_ratio_deviation,
        t,
        phi,
        warnings,
    })
}

/// Steady amplitude |U| and oscillation frequency of a single oscillator.
#[derive(Clone, Copy, Debug)]
pub struct SteadyState {
    pub amplitude: f64,
    pub frequency: f64,
}

pub fn single_steady_state(omega0: f64, gamma: f64, a: f64, t_settle: f64, t_measure: f64) -> Result<SteadyState> {
    let dp = DuffingParams::single(omega0, gamma, a);
    let dt = TAU / omega0 / 16.0;
    let u0 = [0.1, 0.0, 0.0, 0.0];
    let tr = simulate_duffing(&dp, u0, (0.0, t_settle + t_measure), dt)?;
    let tr = Traces {
        u2: tr.u1.clone(),
        ..tr
    };
    let ex = extract_phase(&tr, [omega0, omega0])?;
    let start = ex.t.iter().position(|&t| t >= t_settle).unwrap_or(0);
    let amp = ex.amplitude(0);
    let ph = ex.phase(0);
    let n = ex.t.len() - start;
    let amplitude = amp[start..].iter().sum::<f64>() / n as f64;
    // Linear fit of the envelope phase gives the offset from the carrier.
    let ts = &ex.t[start..];
    let ps = &ph[start..];
    let tm = ts.iter().sum::<f64>() / n as f64;
    let pm = ps.iter().sum::<f64>() / n as f64;
    let slope = ts.iter().zip(ps).map(|(t, p)| (t - tm) * (p - pm)).sum::<f64>()
        / ts.iter().map(|t| (t - tm).powi(2)).sum::<f64>();
    Ok(SteadyState {
        amplitude,
        frequency: omega0 + slope,
    })
}
