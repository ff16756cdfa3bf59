//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, TAU};
use std::time::Instant;

use num_complex::Complex64;

use phase_pump::adiabatic::{self, AdiabaticConfig};
use phase_pump::classical::{self, IntegrateOptions};
use phase_pump::duffing::{self, DuffingParams, Oscillator, ReductionOptions};
use phase_pump::floquet::{self, FloquetConfig};
use phase_pump::hamiltonian::{self, MomentumBasis};
use phase_pump::{model, propagate, ModelParams};
use phase_pump_lab::config::parse_config;
use phase_pump_lab::figures::figs1_params;
use phase_pump_lab::sweep::run_sweep;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

const CLASSICAL_SWEEP: &str = "[classical]\ndelta = 0.0\nomega = 0.0012566370614359172\n\n[sweep]\nr = { start = 0.40, stop = 0.60, step = 0.01 }\n";

/// Rows of (r, chi) from a classical sweep CSV.
fn chi_rows(csv: &str) -> Vec<(f64, f64)> {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let ir = header.iter().position(|c| *c == "r").unwrap();
    let ic = header.iter().position(|c| *c == "chi").unwrap();
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[ir].parse().unwrap(), f[ic].parse().unwrap())
        })
        .collect()
}

fn c1_classical_step() -> Outcome {
    let cfg = parse_config(CLASSICAL_SWEEP).map_err(e)?;
    let dir = tempfile::tempdir().map_err(e)?;
    let start = Instant::now();
    let s = run_sweep(&cfg, 1, dir.path()).map_err(e)?;
    let secs = start.elapsed().as_secs_f64();
    let rows = chi_rows(&std::fs::read_to_string(&s.csv).map_err(e)?);
    let mut worst: f64 = 0.0;
    for &(r, chi) in &rows {
        let target = if r <= 0.49 + 1e-9 {
            0.0
        } else if r >= 0.51 - 1e-9 {
            1.0
        } else {
            continue;
        };
        worst = worst.max((chi - target).abs());
    }
    check(
        rows.len() == 21 && s.failures == 0 && worst < 1e-4 && secs < 10.0,
        format!("{} rows, max |chi - integer| = {worst:.2e}, {secs:.1} s", rows.len()),
    )
}

fn c2_arnold_tongue() -> Outcome {
    let p = ModelParams::new(1.0, 0.5, 0.0);
    let tr = classical::integrate_with(
        &p,
        0.0,
        (0.0, 80.0),
        &IntegrateOptions {
            tol: 1e-12,
            stride: 1.0,
            theta0: 0.0,
        },
    )
    .map_err(e)?;
    let phi = tr.last().phi;
    let slope = model::force_dphi(&p, phi, 0.0);
    let dev = (phi.sin().abs() - 0.5).abs();
    check(
        dev < 1e-6 && slope < 0.0,
        format!("phi* = {phi:.9}, | |sin phi*| - 0.5 | = {dev:.1e}, slope = {slope:.4}"),
    )
}

fn c3_time_of_flight() -> Outcome {
    let p = ModelParams::new(1.0, 0.0, 0.0);
    let t = classical::time_between(&p, 0.0, FRAC_PI_2, FRAC_PI_4).map_err(e)?;
    let exact = (1.0 / FRAC_PI_8.tan()).ln();
    let err = (t - exact).abs();
    check(err < 1e-8, format!("t = {t:.12}, ln cot(pi/8) = {exact:.12}, error {err:.1e}"))
}

fn angle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn c4_hysteresis() -> Outcome {
    let w = TAU * 2e-4;
    let hi = classical::hysteresis_pair(&ModelParams::new(0.51, 0.0, w)).map_err(e)?;
    let f = hi.slip_locations_forward();
    let b = hi.slip_locations_backward();
    let sep = f
        .iter()
        .flat_map(|x| b.iter().map(move |y| angle_dist(*x, *y)))
        .fold(f64::INFINITY, f64::min);
    let lo = classical::hysteresis_pair(&ModelParams::new(0.49, 0.0, w)).map_err(e)?;
    let mirror = lo.mirror_error();
    check(
        !f.is_empty() && !b.is_empty() && sep >= 0.1 && mirror < 1e-4,
        format!("r=0.51 slips fwd {f:.3?} bwd {b:.3?}, min separation {sep:.3} rad; r=0.49 reflection error {mirror:.1e}"),
    )
}

fn c5_non_reciprocity() -> Outcome {
    let rt = classical::round_trip(&figs1_params()).map_err(e)?;
    let d = rt.displacement();
    check(d.abs() > 0.5, format!("|phi_end - phi_start| = {:.3} rad (coupling scale 0.1)", d.abs()))
}

fn c6_adiabatic_winding() -> Outcome {
    let cfg = AdiabaticConfig::default();
    let mut parts = Vec::new();
    let mut ok = true;
    for (m_e, target, tol) in [(10.0, 1.00, 0.02), (1.0, 0.76, 0.03)] {
        let start = Instant::now();
        let w = adiabatic::adiabatic_winding(&ModelParams::quantum(0.55, m_e, TAU * 2e-4), &cfg).map_err(e)?;
        let secs = start.elapsed().as_secs_f64();
        ok &= (w.chi - target).abs() <= tol && secs < 120.0;
        parts.push(format!("m_e={m_e}: chi = {:.4} ({secs:.0} s)", w.chi));
    }
    check(ok, format!("{} at k_max {}, theta_grid {}", parts.join(", "), cfg.k_max, cfg.theta_grid))
}

fn c7_broken_quantization() -> Outcome {
    let cfg = AdiabaticConfig {
        k_max: 20,
        ..AdiabaticConfig::default()
    }
    .with_theta_grid(1024);
    let rs: Vec<f64> = (0..=10).map(|i| 0.50 + 0.01 * i as f64).collect();
    let mut chis = Vec::new();
    for &r in &rs {
        chis.push(adiabatic::pump_curve(&ModelParams::quantum(r, 1.0, TAU * 2e-4), &cfg).map_err(e)?.chi);
    }
    let off = [0usize, 5, 10]
        .iter()
        .map(|&i| (chis[i] - chis[i].round()).abs())
        .fold(0.0, f64::max);
    let jump = chis.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    check(
        off >= 0.05 && jump < 0.2,
        format!(
            "chi(0.50, 0.55, 0.60) = {:.4}, {:.4}, {:.4}; max distance from integer {off:.3}; max step {jump:.4}",
            chis[0], chis[5], chis[10]
        ),
    )
}

fn c8_velocity_identity() -> Outcome {
    let basis = MomentumBasis::new(12);
    let mut worst: f64 = 0.0;
    for (r, m_e) in [(0.55, 1.0), (0.3, 10.0)] {
        let p = ModelParams::quantum(r, m_e, 0.0);
        for theta in [0.0, 1.1, 4.0] {
            let v = hamiltonian::velocity_from_commutator(&p, theta, basis).map_err(e)?;
            for i in 0..basis.dim() {
                let ki = basis.k(i);
                if ki.unsigned_abs() as usize > basis.k_max - 2 {
                    continue;
                }
                for j in 0..basis.dim() {
                    let want = if i == j { ki as f64 / m_e } else { 0.0 };
                    worst = worst.max((v[(i, j)] - Complex64::new(want, 0.0)).norm());
                }
            }
        }
    }
    check(worst < 1e-12, format!("max interior deviation {worst:.1e}"))
}

fn c9_floquet_limits() -> Outcome {
    let cfg = FloquetConfig::default();
    let chi = |r: f64, w: f64| -> Result<f64, String> {
        let p = ModelParams::quantum(r, 10.0, w);
        let sol = floquet::solve_adaptive(&p, &cfg).map_err(e)?;
        Ok(floquet::floquet_winding(sol.ground(), &p).chi)
    };
    let a = chi(0.4, 0.0016)?;
    let ee = chi(0.2, 0.0016)?;
    let b1 = chi(0.3, 0.0016)?;
    let b2 = chi(0.3, 0.0025)?;
    check(
        (a - 1.0).abs() < 0.05 && ee < 0.3 && (b1 - b2).abs() > 0.3,
        format!("A (r=0.4): {a:.4}; E (r=0.2): {ee:.4}; r=0.3 at Omega 0.0016 / 0.0025: {b1:.3} / {b2:.3}"),
    )
}

fn c10_pt_reality() -> Outcome {
    let mut max_im: f64 = 0.0;
    let mut max_res: f64 = 0.0;
    let mut min_mix = f64::INFINITY;
    for r in [0.3, 0.55] {
        let p = ModelParams::quantum(r, 10.0, 0.01);
        let sol = floquet::solve_adaptive(&p, &FloquetConfig::default()).map_err(e)?;
        for s in &sol.states {
            let c = floquet::fix_global_phase(&s.complex_components());
            max_im = max_im.max(c.iter().map(|z| z.im.abs()).fold(0.0, f64::max));
            max_res = max_res.max(floquet::pt_check(&c).residual);
        }
        let (a, b) = (sol.states[0].complex_components(), sol.states[1].complex_components());
        let mix: Vec<Complex64> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x + Complex64::i() * y) / 2f64.sqrt())
            .collect();
        min_mix = min_mix.min(floquet::pt_check(&mix).residual);
    }
    check(
        max_im < 1e-10 && max_res < 1e-8 && min_mix > 0.1,
        format!("max imaginary {max_im:.1e}, max residual {max_res:.1e}, superposition residual {min_mix:.3}"),
    )
}

fn c11_stroboscopic() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (r, w) in [(0.7, 0.005), (0.4, 0.05), (0.3, 0.2)] {
        let p = ModelParams::quantum(r, 10.0, w);
        let sol = floquet::solve_adaptive(&p, &FloquetConfig::default()).map_err(e)?;
        let c = propagate::stroboscopic_check(sol.ground(), &p, 0.01).map_err(e)?;
        ok &= c.fidelity > 0.999;
        parts.push(format!("(r={r}, Omega={w}): {:.6}", c.fidelity));
    }
    check(ok, format!("fidelity {}", parts.join(", ")))
}

fn c12_superposition() -> Outcome {
    let p = ModelParams::quantum(0.55, 10.0, 0.005);
    let rs: Vec<f64> = (0..=10).map(|i| 0.50 + 0.01 * i as f64).collect();
    let (run, _) = floquet::locate_hysteresis_window(&p, &rs, &FloquetConfig::default(), 1024).map_err(e)?;
    let dev = (run.frequency / run.splitting - 1.0).abs();
    check(
        run.hysteresis > 0.1 && dev < 0.1,
        format!(
            "located r = {:.2}, forward/backward spread {:.3}, chi {:.3} / {:.3}; frequency {:.4} vs |e1 - e0| {:.4} ({:.1}%)",
            run.r,
            run.hysteresis,
            run.forward.curve.chi,
            run.backward.curve.chi,
            run.frequency,
            run.splitting,
            100.0 * dev
        ),
    )
}

fn c13_duffing() -> Outcome {
    let a = 0.005;
    let ss = duffing::single_steady_state(1.0, 0.05, a, 400.0, 600.0).map_err(e)?;
    let shift = ss.frequency - 1.0;
    let single = (ss.amplitude - 1.0).abs() < 0.01 && (shift - 1.5 * a).abs() < 0.1 * 1.5 * a;

    let st = DuffingParams::static_pair(1.0, 0.01, 0.005, 0.002, 0.0);
    let rs = duffing::reduction_check(&st, &ReductionOptions::for_params(&st)).map_err(e)?;
    let c_dev = (rs.fitted.c / (3.0 * 0.005 * 0.002 / 0.01) - 1.0).abs();

    let o1 = Oscillator::new(1.0, 0.04, 0.005, 0.0);
    let o2 = Oscillator::new(1.5, 0.04, 0.005, 0.0);
    let nl = DuffingParams::nonlinear_parametric([o1, o2], [0.002, 0.004]);
    let rn = duffing::reduction_check(&nl, &ReductionOptions::for_params(&nl)).map_err(e)?;
    let nc = (rn.fitted.c / rn.predicted.c - 1.0).abs();
    let ne = (rn.fitted.e / rn.predicted.e - 1.0).abs();

    let small = DuffingParams::static_pair(1.0, 0.05, 0.02, 1e-4, 0.0);
    let r0 = duffing::reduction_check(&small, &ReductionOptions::for_params(&small)).map_err(e)?;
    let half = small.scale_small(0.5);
    let r1 = duffing::reduction_check(&half, &ReductionOptions::for_params(&half)).map_err(e)?;
    let ratio = r1.residual / r0.residual;

    check(
        single && c_dev < 0.2 && nc < 0.2 && ne < 0.2 && ratio > 0.4 && ratio < 0.6,
        format!(
            "|u0| = {:.4}, shift {:.5} vs {:.5}; static c {:.3e} ({:.0}% off 3a kappa/gamma); sin2/cos2 terms off by {:.1}% / {:.1}%; residual {:.3} -> {:.3} on halving",
            ss.amplitude,
            shift,
            1.5 * a,
            rs.fitted.c,
            100.0 * c_dev,
            100.0 * nc,
            100.0 * ne,
            r0.residual,
            r1.residual
        ),
    )
}

fn c14_determinism() -> Outcome {
    let cfg = parse_config(CLASSICAL_SWEEP).map_err(e)?;
    let d1 = tempfile::tempdir().map_err(e)?;
    let d8 = tempfile::tempdir().map_err(e)?;
    let a = run_sweep(&cfg, 1, d1.path()).map_err(e)?;
    let b = run_sweep(&cfg, 8, d8.path()).map_err(e)?;
    let same = std::fs::read(&a.csv).map_err(e)? == std::fs::read(&b.csv).map_err(e)?;
    check(same, format!("workers 1 vs 8: {}", if same { "byte-identical" } else { "differ" }))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("classical winding step", c1_classical_step),
        ("Arnold-tongue lock", c2_arnold_tongue),
        ("time of flight", c3_time_of_flight),
        ("classical hysteresis", c4_hysteresis),
        ("non-reciprocity", c5_non_reciprocity),
        ("adiabatic winding", c6_adiabatic_winding),
        ("broken quantization", c7_broken_quantization),
        ("velocity identity", c8_velocity_identity),
        ("Floquet adiabatic limit", c9_floquet_limits),
        ("PT reality", c10_pt_reality),
        ("Floquet vs propagation", c11_stroboscopic),
        ("hysteresis superposition", c12_superposition),
        ("oscillator reduction", c13_duffing),
        ("determinism", c14_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("{}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|x| *x == id || name.contains(x.as_str())) {
            continue;
        }
        let start = Instant::now();
        let r = f();
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("criterion {id:>2} PASS  {name}: {d} [{secs:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {d} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
