//! Classical phase dynamics: integration, fixed points, saddle-node slips,
//! winding numbers, hysteresis and non-reciprocity.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use crate::model::{self, ModelParams, PhasePoint};
use crate::ode::{self, OdeOptions};
use crate::{quad, wrap_angle, Error, Result, WindingMethod, WindingResult};

/// Relative tolerance of the adaptive integrator.
pub const DEFAULT_TOL: f64 = 1e-9;
/// A jump larger than this within [`SLIP_WINDOW`] counts as a slip.
pub const SLIP_THRESHOLD: f64 = 0.5;
pub const SLIP_WINDOW: f64 = 0.01;
/// Saddle coefficients below this are reported as marginal.
pub const MARGINAL_TOL: f64 = 1e-6;
/// Default sampling stride in θ.
pub const THETA_STRIDE: f64 = 0.0025;

/// A scalar field f(φ, θ) with the derivatives needed for saddle analysis.
pub trait PhaseField {
    fn f(&self, phi: f64, theta: f64) -> f64;
    fn f_phi(&self, phi: f64, theta: f64) -> f64;
    fn f_theta(&self, phi: f64, theta: f64) -> f64;
    fn f_phiphi(&self, phi: f64, theta: f64) -> f64;
    fn f_phitheta(&self, phi: f64, theta: f64) -> f64;
    fn omega(&self) -> f64;
}

impl PhaseField for ModelParams {
    fn f(&self, phi: f64, theta: f64) -> f64 {
        model::force(self, phi, theta)
    }
    fn f_phi(&self, phi: f64, theta: f64) -> f64 {
        model::force_dphi(self, phi, theta)
    }
    fn f_theta(&self, phi: f64, theta: f64) -> f64 {
        model::force_dtheta(self, phi, theta)
    }
    fn f_phiphi(&self, phi: f64, theta: f64) -> f64 {
        model::force_dphi2(self, phi, theta)
    }
    fn f_phitheta(&self, phi: f64, theta: f64) -> f64 {
        model::force_dphi_dtheta(self, phi, theta)
    }
    fn omega(&self) -> f64 {
        self.omega
    }
}

/// The field g(φ, θ) = −f(−φ, θ).
pub struct Mirrored<'a, F: PhaseField>(pub &'a F);

impl<F: PhaseField> PhaseField for Mirrored<'_, F> {
    fn f(&self, phi: f64, theta: f64) -> f64 {
        -self.0.f(-phi, theta)
    }
    fn f_phi(&self, phi: f64, theta: f64) -> f64 {
        self.0.f_phi(-phi, theta)
    }
    fn f_theta(&self, phi: f64, theta: f64) -> f64 {
        -self.0.f_theta(-phi, theta)
    }
    fn f_phiphi(&self, phi: f64, theta: f64) -> f64 {
        -self.0.f_phiphi(-phi, theta)
    }
    fn f_phitheta(&self, phi: f64, theta: f64) -> f64 {
        self.0.f_phitheta(-phi, theta)
    }
    fn omega(&self) -> f64 {
        self.0.omega()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn of(omega: f64) -> Self {
        if omega < 0.0 {
            Direction::Backward
        } else {
            Direction::Forward
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub phi: f64,
    pub theta: f64,
}

/// A detected discontinuous jump of the phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slip {
    pub t: f64,
    pub theta: f64,
    pub jump: f64,
}

impl Slip {
    /// Position of the slip on the θ circle.
    pub fn location(&self) -> f64 {
        wrap_angle(self.theta)
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub params: ModelParams,
    pub direction: Direction,
    pub slips: Vec<Slip>,
}

impl Trajectory {
    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has samples")
    }

    /// φ at the sample nearest to time `t`.
    pub fn phi_at(&self, t: f64) -> f64 {
        let i = self.samples.partition_point(|s| s.t < t);
        let i = i.min(self.samples.len() - 1);
        if i > 0 && (self.samples[i - 1].t - t).abs() < (self.samples[i].t - t).abs() {
            self.samples[i - 1].phi
        } else {
            self.samples[i].phi
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stability {
    Attractive,
    Repulsive,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPoint {
    pub phi0: f64,
    pub slope: f64,
    pub stability: Stability,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlipDirection {
    Positive,
    Negative,
    Marginal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaddleClassification {
    pub t0: f64,
    pub theta0: f64,
    pub phi0: f64,
    /// Curvature coefficient of f near the event. Nonzero only for
    /// annihilations, where it sets the sign of the subsequent slip.
    pub a: f64,
    /// True when the fixed-point pair disappears as time increases.
    pub annihilation: bool,
    pub slip_direction: SlipDirection,
}

/// Options for [`integrate_with`].
#[derive(Clone, Copy, Debug)]
pub struct IntegrateOptions {
    pub tol: f64,
    /// Output stride in time.
    pub stride: f64,
    /// θ at the initial time.
    pub theta0: f64,
}

/// Integrates dφ/dt = f(φ, θ(t)) with θ(t) = Ωt over `t_span`.
pub fn integrate(
    p: &ModelParams,
    phi_init: f64,
    t_span: (f64, f64),
    tol: f64,
) -> Result<Trajectory> {
    let stride = default_stride(p);
    integrate_with(
        p,
        phi_init,
        t_span,
        &IntegrateOptions {
            tol,
            stride,
            theta0: p.omega * t_span.0,
        },
    )
}

fn default_stride(p: &ModelParams) -> f64 {
    if p.omega == 0.0 {
        0.5
    } else {
        (THETA_STRIDE / p.omega.abs()).min(0.5)
    }
}

/// Integrates with θ(t) = θ₀ + Ω(t − t₀) and explicit output stride.
pub fn integrate_with(
    p: &ModelParams,
    phi_init: f64,
    t_span: (f64, f64),
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    if !(opts.stride > 0.0) {
        return Err(Error::InvalidArgument("stride must be positive".into()));
    }
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(Error::InvalidArgument("empty time span".into()));
    }
    let n = ((t1 - t0) / opts.stride).ceil() as usize;
    let mut times: Vec<f64> = (0..n).map(|i| t0 + i as f64 * opts.stride).collect();
    times.push(t1);
    let theta_of = |t: f64| opts.theta0 + p.omega * (t - t0);
    let rate = p.mu.max(p.delta.abs()).max(1e-3);
    let ode_opts = OdeOptions::tol(opts.tol).with_h_max(0.5 / rate);
    let ys = ode::integrate_sampled(
        |t, y: &[f64; 1]| [model::force(p, y[0], theta_of(t))],
        t0,
        [phi_init],
        t1,
        &ode_opts,
        &times,
    )?;
    let samples: Vec<Sample> = times
        .iter()
        .zip(&ys)
        .map(|(&t, y)| Sample {
            t,
            phi: y[0],
            theta: theta_of(t),
        })
        .collect();
    let slips = detect_slips(&samples);
    Ok(Trajectory {
        samples,
        params: *p,
        direction: Direction::of(p.omega),
        slips,
    })
}

/// Finds jumps |Δφ| > [`SLIP_THRESHOLD`] within a θ-window of [`SLIP_WINDOW`].
pub fn detect_slips(samples: &[Sample]) -> Vec<Slip> {
    let n = samples.len();
    let mut flagged = vec![false; n.saturating_sub(1)];
    let mut j = 0;
    for i in 0..n {
        if j < i {
            j = i;
        }
        while j + 1 < n && (samples[j + 1].theta - samples[i].theta).abs() <= SLIP_WINDOW {
            j += 1;
        }
        if j > i && (samples[j].phi - samples[i].phi).abs() > SLIP_THRESHOLD {
            for f in flagged.iter_mut().take(j).skip(i) {
                *f = true;
            }
        }
    }
    let mut slips = Vec::new();
    let mut i = 0;
    while i < flagged.len() {
        if !flagged[i] {
            i += 1;
            continue;
        }
        let start = i;
        let flagged_from = i;
        while i < flagged.len() && flagged[i] {
            i += 1;
        }
        let mut end = i;
        let mut start = start;
        // Extend to where the phase is back to slow adiabatic drift.
        let fast = |k: usize| (samples[k + 1].phi - samples[k].phi).abs() > SLIP_THRESHOLD * 0.02;
        while start > 0 && fast(start - 1) {
            start -= 1;
        }
        while end + 1 < samples.len() && fast(end) {
            end += 1;
        }
        let jump = samples[end].phi - samples[start].phi;
        // The slip is located at the onset of the first flagged window.
        let onset = flagged_from;
        slips.push(Slip {
            t: samples[onset].t,
            theta: samples[onset].theta,
            jump,
        });
    }
    slips
}

/// Roots of a 2π-periodic function on [0, 2π) by bracketing and safeguarded Newton.
fn periodic_roots<G, D>(g: G, dg: D, n: usize) -> Vec<f64>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let xs: Vec<f64> = (0..=n).map(|i| TAU * i as f64 / n as f64).collect();
    let gs: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    let mut roots: Vec<f64> = Vec::new();
    for i in 0..n {
        let (mut a, mut b) = (xs[i], xs[i + 1]);
        let (mut ga, gb) = (gs[i], gs[i + 1]);
        if ga == 0.0 {
            roots.push(a);
            continue;
        }
        if gb == 0.0 || ga * gb > 0.0 {
            continue;
        }
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let gx = g(x);
            if gx == 0.0 {
                break;
            }
            if gx * ga < 0.0 {
                b = x;
            } else {
                a = x;
                ga = gx;
            }
            let d = dg(x);
            let newton = x - gx / d;
            let next = if d != 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            let done = (next - x).abs() < 1e-14 || (b - a) < 1e-14;
            x = next;
            if done {
                break;
            }
        }
        roots.push(wrap_angle(x));
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::new();
    for r in roots {
        if out.last().map_or(true, |&l| r - l > 1e-9) {
            out.push(r);
        }
    }
    if out.len() > 1 && out[0] + TAU - out[out.len() - 1] < 1e-9 {
        out.pop();
    }
    out
}

/// All roots of f(·, θ) on [0, 2π) with slope and stability.
pub fn find_fixed_points(p: &ModelParams, theta: f64) -> Vec<FixedPoint> {
    periodic_roots(
        |x| model::force(p, x, theta),
        |x| model::force_dphi(p, x, theta),
        4096,
    )
    .into_iter()
    .map(|phi0| {
        let slope = model::force_dphi(p, phi0, theta);
        FixedPoint {
            phi0,
            slope,
            stability: if slope < 0.0 {
                Stability::Attractive
            } else {
                Stability::Repulsive
            },
        }
    })
    .collect()
}

/// The attractive root of f(·, θ) with the smallest φ ≥ 0.
pub fn initial_phase(p: &ModelParams, theta: f64) -> Option<f64> {
    find_fixed_points(p, theta)
        .into_iter()
        .find(|fp| fp.stability == Stability::Attractive)
        .map(|fp| fp.phi0)
}

/// Follows the attractive root continuously through the given θ values,
/// starting from `phi_start`. Returns `None` where the root disappears.
pub fn track_attractive_root(p: &ModelParams, phi_start: f64, thetas: &[f64]) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(thetas.len());
    let mut phi = phi_start;
    let mut alive = true;
    for &th in thetas {
        if alive {
            let mut x = phi;
            let mut ok = false;
            for _ in 0..100 {
                let d = model::force_dphi(p, x, th);
                if d >= 0.0 {
                    break;
                }
                let step = model::force(p, x, th) / d;
                x -= step.clamp(-0.05, 0.05);
                if step.abs() < 1e-13 {
                    ok = model::force_dphi(p, x, th) < 0.0;
                    break;
                }
            }
            if ok && (x - phi).abs() < 0.5 {
                phi = x;
            } else {
                alive = false;
            }
        }
        out.push(if alive { Some(phi) } else { None });
    }
    out
}

/// Time needed to move from `phi_i` to `phi_f` in the frozen field at θ.
pub fn time_between(p: &ModelParams, theta: f64, phi_i: f64, phi_f: f64) -> Result<f64> {
    if phi_i == phi_f {
        return Ok(0.0);
    }
    const ROOT_TOL: f64 = 1e-9;
    let (lo, hi) = if phi_i < phi_f {
        (phi_i, phi_f)
    } else {
        (phi_f, phi_i)
    };
    for &end in &[phi_i, phi_f] {
        if model::force(p, end, theta).abs() < ROOT_TOL {
            return Err(Error::Divergent { phi: end });
        }
    }
    let k0 = ((lo - TAU) / TAU).floor() as i64;
    let k1 = (hi / TAU).ceil() as i64;
    for fp in find_fixed_points(p, theta) {
        for k in k0..=k1 {
            let x = fp.phi0 + TAU * k as f64;
            if x > lo && x < hi {
                if (x - lo).abs() < ROOT_TOL || (x - hi).abs() < ROOT_TOL {
                    return Err(Error::Divergent { phi: x });
                }
                return Err(Error::RootInInterval { phi: x });
            }
        }
    }
    quad::integrate(|x| 1.0 / model::force(p, x, theta), phi_i, phi_f, 1e-12)
}

/// Locates a saddle-node point of `field` near `guess` and classifies it.
pub fn classify_saddle<F: PhaseField>(
    field: &F,
    guess: PhasePoint,
) -> Result<SaddleClassification> {
    let omega = field.omega();
    if omega == 0.0 {
        return Err(Error::InvalidArgument(
            "saddle classification needs omega != 0".into(),
        ));
    }
    const RADIUS: f64 = 0.5;
    let (mut th, mut ph) = (guess.theta, guess.phi);
    let mut converged = false;
    for _ in 0..60 {
        let f1 = field.f(ph, th);
        let f2 = field.f_phi(ph, th);
        let (j11, j12) = (field.f_theta(ph, th), field.f_phi(ph, th));
        let (j21, j22) = (field.f_phitheta(ph, th), field.f_phiphi(ph, th));
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-14 {
            return Err(Error::NoSaddleFound);
        }
        let dth = (f1 * j22 - j12 * f2) / det;
        let dph = (j11 * f2 - j21 * f1) / det;
        th -= dth.clamp(-0.1, 0.1);
        ph -= dph.clamp(-0.1, 0.1);
        if (th - guess.theta).abs() > RADIUS || (ph - guess.phi).abs() > RADIUS {
            return Err(Error::NoSaddleFound);
        }
        if dth.abs() < 1e-14 && dph.abs() < 1e-14 {
            converged = true;
            break;
        }
    }
    if !converged && (field.f(ph, th).abs() > 1e-12 || field.f_phi(ph, th).abs() > 1e-10) {
        return Err(Error::NoSaddleFound);
    }
    let t0 = th / omega;
    // Local fit f ≈ c_t τ + c_x x + c_2 x² + c_tx τ x with τ = t − t₀, x = φ − φ₀.
    let dx = 1e-3;
    let dtau = 1e-6 / omega.abs();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in -2i32..=2 {
        for j in -2i32..=2 {
            let tau = i as f64 * dtau;
            let x = j as f64 * dx;
            rows.extend_from_slice(&[tau, x, x * x, tau * x]);
            rhs.push(field.f(ph + x, th + omega * tau));
        }
    }
    let a_mat = DMatrix::from_row_slice(rhs.len(), 4, &rows);
    let b = DVector::from_vec(rhs);
    let coef = a_mat
        .svd(true, true)
        .solve(&b, 1e-300)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let (c_t, c_2) = (coef[0], coef[2]);
    let annihilation = c_t * c_2 > 0.0;
    let a = if annihilation { c_2 } else { 0.0 };
    let slip_direction = if !annihilation || a.abs() < MARGINAL_TOL {
        SlipDirection::Marginal
    } else if a > 0.0 {
        SlipDirection::Positive
    } else {
        SlipDirection::Negative
    };
    Ok(SaddleClassification {
        t0,
        theta0: th,
        phi0: wrap_angle(ph),
        a,
        annihilation,
        slip_direction,
    })
}

/// All saddle-node events of the field on the torus θ ∈ [0, 2π).
pub fn saddle_events(p: &ModelParams) -> Vec<SaddleClassification> {
    let n_theta = 2048;
    let mut events: Vec<SaddleClassification> = Vec::new();
    let crit = |th: f64| {
        periodic_roots(
            |x| model::force_dphi(p, x, th),
            |x| model::force_dphi2(p, x, th),
            512,
        )
    };
    let thetas: Vec<f64> = (0..=n_theta)
        .map(|i| TAU * i as f64 / n_theta as f64)
        .collect();
    let mut prev = crit(thetas[0]);
    for w in thetas.windows(2) {
        let next = crit(w[1]);
        for &c in &prev {
            let f0 = model::force(p, c, w[0]);
            // The matching critical point at the next θ.
            let nearest = next
                .iter()
                .copied()
                .min_by(|a, b| angle_dist(*a, c).partial_cmp(&angle_dist(*b, c)).unwrap());
            if let Some(c1) = nearest {
                let f1 = model::force(p, c1, w[1]);
                if f0 * f1 < 0.0 {
                    let guess = PhasePoint {
                        phi: c,
                        theta: 0.5 * (w[0] + w[1]),
                    };
                    if let Ok(s) = classify_saddle(p, guess) {
                        let dup = events.iter().any(|e| {
                            angle_dist(e.theta0, s.theta0) < 1e-6
                                && angle_dist(e.phi0, s.phi0) < 1e-6
                        });
                        if !dup {
                            events.push(s);
                        }
                    }
                }
            }
        }
        prev = next;
    }
    events.sort_by(|a, b| {
        wrap_angle(a.theta0)
            .partial_cmp(&wrap_angle(b.theta0))
            .unwrap()
    });
    events
}

fn angle_dist(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(TAU - d)
}

/// Classical winding number after `settle_cycles` transient cycles.
pub fn winding(
    p: &ModelParams,
    settle_cycles: usize,
    measure_cycles: usize,
) -> Result<WindingResult> {
    if p.omega == 0.0 {
        return Err(Error::InvalidArgument("winding needs omega != 0".into()));
    }
    if measure_cycles == 0 {
        return Err(Error::InvalidArgument(
            "measure_cycles must be at least 1".into(),
        ));
    }
    let period = TAU / p.omega.abs();
    let phi0 = initial_phase(p, 0.0).unwrap_or(0.0);
    let total = settle_cycles + measure_cycles;
    let times: Vec<f64> = (0..=total).map(|c| c as f64 * period).collect();
    let ode_opts = OdeOptions::tol(DEFAULT_TOL).with_h_max(0.5 / p.mu.max(p.delta.abs()).max(1e-3));
    let ys = ode::integrate_sampled(
        |t, y: &[f64; 1]| [model::force(p, y[0], p.omega * t)],
        0.0,
        [phi0],
        times[total],
        &ode_opts,
        &times,
    )?;
    let phi: Vec<f64> = ys.iter().map(|y| y[0]).collect();
    let chi = (phi[total] - phi[settle_cycles]) / (TAU * measure_cycles as f64);
    let convergence_estimate = if measure_cycles > 1 {
        let prev = (phi[total] - phi[settle_cycles + 1]) / (TAU * (measure_cycles - 1) as f64);
        (chi - prev).abs()
    } else if settle_cycles > 0 {
        let prev = (phi[settle_cycles] - phi[settle_cycles - 1]) / TAU;
        (chi - prev).abs()
    } else {
        f64::NAN
    };
    Ok(WindingResult {
        chi,
        method: WindingMethod::Classical,
        cycles_used: measure_cycles,
        convergence_estimate,
    })
}

/// Forward and backward one-cycle sweeps from the same initial root.
#[derive(Clone, Debug)]
pub struct HysteresisPair {
    pub forward: Trajectory,
    pub backward: Trajectory,
}

impl HysteresisPair {
    pub fn slip_locations_forward(&self) -> Vec<f64> {
        self.forward.slips.iter().map(Slip::location).collect()
    }

    pub fn slip_locations_backward(&self) -> Vec<f64> {
        self.backward.slips.iter().map(Slip::location).collect()
    }

    /// Largest |φ_b(t) + φ_f(t)|, the deviation from the point reflection
    /// (θ, φ) → (−θ, −φ).
    pub fn mirror_error(&self) -> f64 {
        self.forward
            .samples
            .iter()
            .zip(&self.backward.samples)
            .map(|(f, b)| (f.phi + b.phi).abs())
            .fold(0.0, f64::max)
    }

    /// Largest distance on the φ circle between the two sweeps compared at
    /// the same position on the θ circle.
    pub fn retrace_gap(&self) -> f64 {
        let f = &self.forward.samples;
        let b = &self.backward.samples;
        let n = f.len();
        let mut worst: f64 = 0.0;
        for (i, fs) in f.iter().enumerate() {
            let j = n - 1 - i;
            if j >= b.len() {
                continue;
            }
            let loc_f = wrap_angle(fs.theta);
            let loc_b = wrap_angle(b[j].theta);
            if angle_dist(loc_f, loc_b) > 1e-6 {
                continue;
            }
            worst = worst.max(angle_dist(fs.phi, b[j].phi));
        }
        worst
    }
}

/// One forward (θ = |Ω|t) and one backward (θ = −|Ω|t) cycle starting at the
/// attractive root of f(·, 0) with smallest φ ≥ 0.
pub fn hysteresis_pair(p: &ModelParams) -> Result<HysteresisPair> {
    if p.omega == 0.0 {
        return Err(Error::InvalidArgument("hysteresis needs omega != 0".into()));
    }
    let w = p.omega.abs();
    let phi0 = initial_phase(&p.with_omega(w), 0.0).unwrap_or(0.0);
    let period = TAU / w;
    let stride = default_stride(p);
    let run = |omega: f64| {
        integrate_with(
            &p.with_omega(omega),
            phi0,
            (0.0, period),
            &IntegrateOptions {
                tol: DEFAULT_TOL,
                stride,
                theta0: 0.0,
            },
        )
    };
    Ok(HysteresisPair {
        forward: run(w)?,
        backward: run(-w)?,
    })
}

/// Forward cycle θ: 0 → 2π followed by the backward cycle θ: 2π → 0 from
/// the forward endpoint.
#[derive(Clone, Debug)]
pub struct RoundTrip {
    pub forward: Trajectory,
    pub backward: Trajectory,
}

impl RoundTrip {
    pub fn phi_start(&self) -> f64 {
        self.forward.first().phi
    }

    pub fn phi_end(&self) -> f64 {
        self.backward.last().phi
    }

    /// Net phase displacement after the round trip.
    pub fn displacement(&self) -> f64 {
        self.phi_end() - self.phi_start()
    }
}

pub fn round_trip(p: &ModelParams) -> Result<RoundTrip> {
    if p.omega == 0.0 {
        return Err(Error::InvalidArgument("round trip needs omega != 0".into()));
    }
    let w = p.omega.abs();
    let phi0 = initial_phase(&p.with_omega(w), 0.0).unwrap_or(0.0);
    let period = TAU / w;
    let stride = default_stride(p);
    let forward = integrate_with(
        &p.with_omega(w),
        phi0,
        (0.0, period),
        &IntegrateOptions {
            tol: DEFAULT_TOL,
            stride,
            theta0: 0.0,
        },
    )?;
    let backward = integrate_with(
        &p.with_omega(-w),
        forward.last().phi,
        (0.0, period),
        &IntegrateOptions {
            tol: DEFAULT_TOL,
            stride,
            theta0: TAU,
        },
    )?;
    Ok(RoundTrip { forward, backward })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const OMEGA: f64 = TAU * 2e-4;

    #[test]
    fn fixed_points_basic() {
        let fps = find_fixed_points(&ModelParams::new(1.0, 0.0, 0.0), 0.0);
        assert_eq!(fps.len(), 2);
        assert!(fps[0].phi0.abs() < 1e-12 && fps[0].stability == Stability::Attractive);
        assert!((fps[1].phi0 - PI).abs() < 1e-12 && fps[1].stability == Stability::Repulsive);

        let fps = find_fixed_points(&ModelParams::new(0.0, 0.0, 0.0), 1.3);
        assert_eq!(fps.len(), 4);
        for (i, fp) in fps.iter().enumerate() {
            assert!((fp.phi0 - i as f64 * PI / 2.0).abs() < 1e-12);
            let want = if i % 2 == 0 {
                Stability::Attractive
            } else {
                Stability::Repulsive
            };
            assert_eq!(fp.stability, want);
        }

        assert!(find_fixed_points(&ModelParams::new(1.0, 2.0, 0.0), 0.0).is_empty());
    }

    #[test]
    fn relaxes_to_fixed_point() {
        let p = ModelParams::new(1.0, 0.0, 0.0);
        let tr = integrate(&p, 0.3, (0.0, 40.0), DEFAULT_TOL).unwrap();
        assert!(tr.last().phi.abs() < 1e-6);
    }

    #[test]
    fn arnold_tongue_root() {
        let p = ModelParams::new(1.0, 0.5, 0.0);
        let tr = integrate(&p, 0.0, (0.0, 60.0), DEFAULT_TOL).unwrap();
        let phi = tr.last().phi;
        assert!((phi.sin() - 0.5).abs() < 1e-6);
        assert!(model::force_dphi(&p, phi, 0.0) < 0.0);
    }

    #[test]
    fn single_slip_above_critical_ratio() {
        let p = ModelParams::new(0.51, 0.0, OMEGA);
        let phi0 = initial_phase(&p, 0.0).unwrap();
        let tr = integrate(&p, phi0, (0.0, TAU / OMEGA), DEFAULT_TOL).unwrap();
        // The overtone wells sit π apart, so a cycle carries two half-turn slips.
        assert_eq!(tr.slips.len(), 2);
        for s in &tr.slips {
            assert!(s.jump > 1.0 && s.jump < 4.0, "{s:?}");
        }
        let d = tr.slips[1].location() - tr.slips[0].location();
        assert!((d - PI).abs() < 1e-2);
    }

    #[test]
    fn time_of_flight() {
        let p = ModelParams::new(1.0, 0.0, 0.0);
        let t = time_between(&p, 0.0, PI / 2.0, PI / 4.0).unwrap();
        let oracle = (1.0 / (PI / 8.0).tan()).ln();
        assert!((t - oracle).abs() < 1e-8);
        assert_eq!(time_between(&p, 0.0, PI / 2.0, PI / 2.0).unwrap(), 0.0);
        assert!(matches!(
            time_between(&p, 0.0, PI / 2.0, 0.0),
            Err(Error::Divergent { .. })
        ));
        assert!(matches!(
            time_between(&p, 0.0, -0.5, 0.5),
            Err(Error::RootInInterval { .. })
        ));
        // Against the flow the time is negative.
        assert!(time_between(&p, 0.0, PI / 4.0, PI / 2.0).unwrap() < 0.0);
    }

    #[test]
    fn saddle_classification() {
        let p = ModelParams::new(0.51, 0.0, OMEGA);
        let phi0 = initial_phase(&p, 0.0).unwrap();
        let tr = integrate(&p, phi0, (0.0, TAU / OMEGA), DEFAULT_TOL).unwrap();
        let events = saddle_events(&p);
        for slip in &tr.slips {
            let ev = events
                .iter()
                .filter(|e| e.annihilation)
                .find(|e| {
                    let d = slip.location() - wrap_angle(e.theta0);
                    d > -0.01 && d < 0.05
                })
                .expect("annihilation preceding the slip");
            assert_eq!(ev.slip_direction, SlipDirection::Positive);
            assert!(ev.a > 0.0);
        }
        let ev = events.iter().find(|e| e.annihilation).unwrap();
        let mirrored = classify_saddle(
            &Mirrored(&p),
            PhasePoint {
                phi: -ev.phi0,
                theta: ev.theta0,
            },
        )
        .unwrap();
        assert!((mirrored.a + ev.a).abs() < 1e-6 * ev.a.abs());
        assert_ne!(mirrored.slip_direction, ev.slip_direction);
        assert_ne!(mirrored.slip_direction, SlipDirection::Marginal);
    }

    #[test]
    fn saddle_coefficient_matches_analytic_curvature() {
        let p = ModelParams::new(0.6, 0.0, OMEGA);
        for ev in saddle_events(&p).iter().filter(|e| e.annihilation) {
            let want = 0.5 * model::force_dphi2(&p, ev.phi0, ev.theta0);
            assert!((ev.a - want).abs() < 1e-6 * want.abs().max(1.0));
        }
    }

    #[test]
    fn no_saddle_below_critical_ratio() {
        let p = ModelParams::new(0.49, 0.0, OMEGA);
        assert!(saddle_events(&p).is_empty());
        let g = PhasePoint {
            phi: 2.0,
            theta: 2.0,
        };
        assert_eq!(classify_saddle(&p, g), Err(Error::NoSaddleFound));
    }

    #[test]
    fn winding_examples() {
        let w = winding(&ModelParams::new(1.0, 0.0, OMEGA), 1, 1).unwrap();
        assert!((w.chi - 1.0).abs() < 1e-6);
        let w = winding(&ModelParams::new(0.0, 0.0, OMEGA), 1, 1).unwrap();
        assert!(w.chi.abs() < 1e-6);
        let w = winding(&ModelParams::new(0.49, 0.0, OMEGA), 1, 1).unwrap();
        assert!(w.chi.abs() < 1e-4);
        let w = winding(&ModelParams::new(0.51, 0.0, OMEGA), 1, 2).unwrap();
        assert!((w.chi - 1.0).abs() < 1e-4);
        assert!(w.convergence_estimate < 1e-4);
        assert!(winding(&ModelParams::new(0.5, 0.0, 0.0), 1, 1).is_err());
    }

    #[test]
    fn hysteresis_regimes() {
        let below = hysteresis_pair(&ModelParams::new(0.49, 0.0, OMEGA)).unwrap();
        assert!(below.forward.slips.is_empty() && below.backward.slips.is_empty());
        assert!(below.mirror_error() < 1e-4);
        assert!(below.retrace_gap() < 0.05);

        let above = hysteresis_pair(&ModelParams::new(0.51, 0.0, OMEGA)).unwrap();
        assert!(above.mirror_error() < 1e-4);
        let f = above.slip_locations_forward();
        let b = above.slip_locations_backward();
        assert_eq!((f.len(), b.len()), (2, 2));
        for x in &f {
            for y in &b {
                assert!(angle_dist(*x, *y) > 0.1);
            }
        }
        assert!(above.retrace_gap() > 1.0);
    }

    #[test]
    fn adiabatic_tracking_below_critical_ratio() {
        for &r in &[0.2, 0.3, 0.4, 0.45] {
            let p = ModelParams::new(r, 0.0, 1e-3);
            let phi0 = initial_phase(&p, 0.0).unwrap();
            let tr = integrate(&p, phi0, (0.0, TAU / 1e-3), DEFAULT_TOL).unwrap();
            let thetas: Vec<f64> = tr.samples.iter().map(|s| s.theta).collect();
            let roots = track_attractive_root(&p, phi0, &thetas);
            for (s, root) in tr.samples.iter().zip(&roots) {
                let root = root.expect("root persists below the critical ratio");
                assert!((s.phi - root).abs() < 0.05, "r={r} theta={}", s.theta);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn winding_is_integral(r in 0.0..1.0f64) {
            prop_assume!((r - 0.5).abs() > 0.01);
            let w = winding(&ModelParams::new(r, 0.0, OMEGA), 1, 1).unwrap();
            prop_assert!((w.chi - w.chi.round()).abs() < 1e-4, "r={} chi={}", r, w.chi);
        }

        #[test]
        fn fixed_points_are_roots(r in 0.0..=1.0f64, d in -0.3..0.3f64, th in 0.0..TAU) {
            let p = ModelParams::new(r, d, 0.0);
            let fps = find_fixed_points(&p, th);
            for fp in &fps {
                prop_assert!(model::force(&p, fp.phi0, th).abs() < 1e-12);
                prop_assert!((0.0..TAU).contains(&fp.phi0));
            }
            prop_assert!(fps.len() % 2 == 0);
        }
    }
}
