//! Sweep dispatch and per-mode point evaluation.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use phase_pump::adiabatic::{self, AdiabaticConfig, DerivativeMethod};
use phase_pump::duffing::{self, CouplingKind, DuffingParams, Oscillator, ReductionOptions};
use phase_pump::floquet::{self, FloquetConfig, SelectPolicy};
use phase_pump::{classical, propagate};

use crate::config::{DuffingSection, Mode, RunConfig, Section};
use crate::csv::{Cell, CsvTable};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fixed result columns of each mode, without sweep-only leading columns.
pub fn columns(mode: Mode) -> &'static [&'static str] {
    match mode {
        Mode::Classical => &["r", "delta", "omega", "mu", "chi", "slip_theta_fwd", "slip_theta_bwd"],
        Mode::Adiabatic => &["r", "m_e", "mu", "omega", "chi", "convergence", "min_gap"],
        Mode::Floquet => &[
            "r",
            "omega",
            "m_e",
            "chi",
            "epsilon0",
            "mean_energy0",
            "pt_residual",
            "kmax_used",
            "qmax_used",
            "k_edge",
            "q_edge",
        ],
        Mode::Propagate => &["r", "omega", "m_e", "chi", "fidelity", "norm_drift", "steps"],
        Mode::Duffing => &[
            "kind",
            "omega1",
            "omega2",
            "gamma",
            "a",
            "kappa1",
            "kappa2",
            "delta1",
            "delta2",
            "theta1",
            "theta2",
            "d_pred",
            "c_pred",
            "e_pred",
            "d_fit",
            "c_fit",
            "e_fit",
            "residual",
            "ratio_deviation",
        ],
    }
}

/// Result of one sweep point.
#[derive(Clone, Debug)]
pub struct PointOutcome {
    pub coords: Vec<(String, f64)>,
    /// Cells in [`columns`] order.
    pub cells: Vec<Cell>,
    pub error: Option<String>,
    /// Convergence metadata for the log.
    pub meta: Map<String, Value>,
    pub elapsed_ms: u128,
}

type Eval = std::result::Result<(Vec<Cell>, Map<String, Value>), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn model_cells(mode: Mode, s: &Section) -> Vec<Cell> {
    columns(mode)
        .iter()
        .map(|c| match s.value(c) {
            Some(v) => Cell::Num(v),
            None => Cell::Empty,
        })
        .collect()
}

/// Fills the named columns of `cells`.
fn set(cells: &mut [Cell], mode: Mode, name: &str, v: impl Into<Cell>) {
    let i = columns(mode).iter().position(|c| *c == name).expect("known column");
    cells[i] = v.into();
}

fn eval_classical(s: &Section) -> Eval {
    let Section::Classical(c) = s else { unreachable!() };
    let p = s.model_params().expect("classical params");
    let w = classical::winding(&p, c.settle_cycles as usize, c.measure_cycles as usize).map_err(err)?;
    let pair = classical::hysteresis_pair(&p).map_err(err)?;
    let mut cells = model_cells(Mode::Classical, s);
    set(&mut cells, Mode::Classical, "chi", w.chi);
    set(&mut cells, Mode::Classical, "slip_theta_fwd", Cell::List(pair.slip_locations_forward()));
    set(&mut cells, Mode::Classical, "slip_theta_bwd", Cell::List(pair.slip_locations_backward()));
    let mut m = Map::new();
    m.insert("convergence".into(), json!(finite(w.convergence_estimate)));
    m.insert("cycles_used".into(), json!(w.cycles_used));
    m.insert("mirror_error".into(), json!(finite(pair.mirror_error())));
    Ok((cells, m))
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn adiabatic_config(s: &crate::config::AdiabaticSection) -> AdiabaticConfig {
    AdiabaticConfig {
        n_excited: s.n_excited as usize,
        k_max: s.k_max as usize,
        derivative: if s.derivative == "perturbative" {
            DerivativeMethod::Perturbative
        } else {
            DerivativeMethod::FiniteDifference
        },
        ..AdiabaticConfig::default()
    }
    .with_theta_grid(s.theta_grid as usize)
}

fn eval_adiabatic(s: &Section) -> Eval {
    let Section::Adiabatic(a) = s else { unreachable!() };
    let p = s.model_params().expect("adiabatic params");
    let cfg = adiabatic_config(a);
    let w = adiabatic::adiabatic_winding(&p, &cfg).map_err(err)?;
    let (gap, at) = adiabatic::min_gap(&p, &cfg).map_err(err)?;
    let mut cells = model_cells(Mode::Adiabatic, s);
    set(&mut cells, Mode::Adiabatic, "chi", w.chi);
    set(&mut cells, Mode::Adiabatic, "convergence", w.convergence_estimate);
    set(&mut cells, Mode::Adiabatic, "min_gap", gap);
    let mut m = Map::new();
    m.insert("convergence".into(), json!(finite(w.convergence_estimate)));
    m.insert("min_gap_theta".into(), json!(at));
    Ok((cells, m))
}

pub fn floquet_config(k_max: u32, q_max_start: u32, q_max_limit: u32, edge_tol: f64) -> FloquetConfig {
    FloquetConfig {
        k_max: k_max as usize,
        q_max_start: q_max_start as usize,
        q_max_limit: q_max_limit as usize,
        policy: SelectPolicy {
            edge_tol,
            ..SelectPolicy::default()
        },
    }
}

fn eval_floquet(s: &Section) -> Eval {
    let Section::Floquet(f) = s else { unreachable!() };
    let p = s.model_params().expect("floquet params");
    let cfg = floquet_config(f.k_max, f.q_max_start, f.q_max_limit, f.edge_tol);
    let sol = floquet::solve_adaptive(&p, &cfg).map_err(err)?;
    let g = sol.ground();
    let w = floquet::floquet_winding(g, &p);
    let pt = floquet::pt_check(&g.complex_components());
    let mut cells = model_cells(Mode::Floquet, s);
    set(&mut cells, Mode::Floquet, "chi", w.chi);
    set(&mut cells, Mode::Floquet, "epsilon0", g.epsilon);
    set(&mut cells, Mode::Floquet, "mean_energy0", g.mean_energy());
    set(&mut cells, Mode::Floquet, "pt_residual", pt.residual);
    set(&mut cells, Mode::Floquet, "kmax_used", sol.basis.k_max);
    set(&mut cells, Mode::Floquet, "qmax_used", sol.basis.q_max);
    set(&mut cells, Mode::Floquet, "k_edge", g.k_edge);
    set(&mut cells, Mode::Floquet, "q_edge", g.q_edge);
    let mut m = Map::new();
    m.insert("sigma".into(), json!(sol.sigma));
    m.insert("families".into(), json!(sol.states.len()));
    m.insert("residual".into(), json!(g.residual));
    m.insert("norm_defect".into(), json!(g.norm_defect));
    m.insert("shift_loss".into(), json!(g.shift_loss));
    Ok((cells, m))
}

fn eval_propagate(s: &Section) -> Eval {
    let Section::Propagate(c) = s else { unreachable!() };
    let p = s.model_params().expect("propagate params");
    let kmax = c.k_max as f64;
    let stiff = c.dt * (kmax * kmax / (2.0 * p.m_e)).max(p.omega.abs());
    if stiff >= propagate::STEP_RESOLUTION {
        return Err(phase_pump::Error::StepResolution(stiff).to_string());
    }
    let cfg = FloquetConfig {
        k_max: c.k_max as usize,
        ..FloquetConfig::default()
    };
    let sol = floquet::solve_adaptive(&p, &cfg).map_err(err)?;
    let g = sol.ground();
    let mut psi0 = g.at_theta(0.0);
    let n = propagate::norm(&psi0);
    psi0.iter_mut().for_each(|z| *z /= n);
    let period = std::f64::consts::TAU / p.omega.abs();
    let span = period * c.cycles as f64;
    let opts = propagate::PropagateOptions {
        sample_every: usize::MAX,
        ..Default::default()
    };
    let run = propagate::propagate(&p, &psi0, (0.0, span), c.dt, &opts).map_err(err)?;
    let chi = run.phase.last().unwrap() / span / p.omega.abs() * p.omega.signum();
    let rot = Complex64::from_polar(1.0, -g.epsilon * span);
    let target: Vec<Complex64> = psi0.iter().map(|z| z * rot).collect();
    let ov = propagate::inner(&target, run.final_state());
    let mut cells = model_cells(Mode::Propagate, s);
    set(&mut cells, Mode::Propagate, "chi", chi);
    set(&mut cells, Mode::Propagate, "fidelity", ov.norm_sqr());
    set(&mut cells, Mode::Propagate, "norm_drift", run.max_norm_drift());
    set(&mut cells, Mode::Propagate, "steps", run.steps);
    let mut m = Map::new();
    m.insert("initial_state".into(), json!("floquet ground representative at theta = 0"));
    m.insert("phase_error".into(), json!(ov.arg()));
    m.insert("floquet_chi".into(), json!(floquet::floquet_winding(g, &p).chi));
    m.insert("qmax_used".into(), json!(sol.basis.q_max));
    Ok((cells, m))
}

pub fn duffing_params(d: &DuffingSection) -> DuffingParams {
    let osc = [
        Oscillator::new(d.omega1, d.gamma, d.a, d.delta1),
        Oscillator::new(d.omega2, d.gamma, d.a, d.delta2),
    ];
    match d.kind.as_str() {
        "parametric" => DuffingParams::parametric(osc, [d.kappa1, d.kappa2], [d.theta1, d.theta2]),
        "nonlinear-parametric" => DuffingParams::nonlinear_parametric(osc, [d.kappa1, d.kappa2]),
        _ => DuffingParams {
            osc,
            kind: CouplingKind::Static,
            coupling: [d.kappa1, d.kappa2],
            theta: [0.0, 0.0],
        },
    }
}

pub fn reduction_options(d: &DuffingSection, dp: &DuffingParams) -> ReductionOptions {
    let mut o = ReductionOptions::for_params(dp);
    o.phi0 = d.phi0;
    o.samples_per_period = d.samples_per_period as usize;
    if d.transient > 0.0 {
        o.t_end += d.transient - o.transient;
        o.transient = d.transient;
    }
    if d.t_end > 0.0 {
        o.t_end = d.t_end;
    }
    o
}

fn eval_duffing(s: &Section) -> Eval {
    let Section::Duffing(d) = s else { unreachable!() };
    let dp = duffing_params(d);
    dp.validate().map_err(err)?;
    let opts = reduction_options(d, &dp);
    let rep = duffing::reduction_check(&dp, &opts).map_err(err)?;
    let mut cells = model_cells(Mode::Duffing, s);
    let md = Mode::Duffing;
    set(&mut cells, md, "kind", d.kind.as_str());
    set(&mut cells, md, "d_pred", rep.predicted.d);
    set(&mut cells, md, "c_pred", rep.predicted.c);
    set(&mut cells, md, "e_pred", rep.predicted.e);
    set(&mut cells, md, "d_fit", rep.fitted.d);
    set(&mut cells, md, "c_fit", rep.fitted.c);
    set(&mut cells, md, "e_fit", rep.fitted.e);
    set(&mut cells, md, "residual", rep.residual);
    set(&mut cells, md, "ratio_deviation", rep.amplitude_ratio_deviation);
    let mut m = Map::new();
    m.insert("harmonic".into(), json!(rep.predicted.harmonic));
    m.insert("theta_ref".into(), json!(rep.predicted.theta));
    m.insert("fit_residual".into(), json!(rep.fit_residual));
    m.insert("t_end".into(), json!(opts.t_end));
    m.insert("transient".into(), json!(opts.transient));
    m.insert("epsilon".into(), json!(dp.epsilon()));
    m.insert("warnings".into(), json!(rep.warnings));
    Ok((cells, m))
}

pub fn evaluate(s: &Section) -> Eval {
    match s.mode() {
        Mode::Classical => eval_classical(s),
        Mode::Adiabatic => eval_adiabatic(s),
        Mode::Floquet => eval_floquet(s),
        Mode::Propagate => eval_propagate(s),
        Mode::Duffing => eval_duffing(s),
    }
}

fn model_check(s: &Section) -> std::result::Result<(), String> {
    match s.model_params() {
        Some(p) if s.mode() == Mode::Classical => p.validate().map_err(err),
        Some(p) => p.validate_quantum().map_err(err),
        None => Ok(()),
    }
}

fn run_point(coords: Vec<(String, f64)>, s: &Section) -> PointOutcome {
    let start = Instant::now();
    let mode = s.mode();
    let r = model_check(s).and_then(|_| evaluate(s));
    let elapsed_ms = start.elapsed().as_millis();
    match r {
        Ok((cells, meta)) => PointOutcome {
            coords,
            cells,
            error: None,
            meta,
            elapsed_ms,
        },
        Err(e) => PointOutcome {
            coords,
            cells: model_cells(mode, s),
            error: Some(e),
            meta: Map::new(),
            elapsed_ms,
        },
    }
}

/// Evaluates every point on a pool of `workers` threads. Results are in row
/// order whatever the scheduling.
pub fn evaluate_points(cfg: &RunConfig, workers: usize) -> Vec<PointOutcome> {
    let points = cfg.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| points.into_par_iter().map(|(c, s)| run_point(c, &s)).collect())
}

/// Sweep axes that are not already result columns.
fn leading_axes(cfg: &RunConfig) -> Vec<String> {
    let fixed = columns(cfg.mode());
    cfg.sweep
        .iter()
        .filter(|a| !fixed.contains(&a.name.as_str()))
        .map(|a| a.name.clone())
        .collect()
}

/// `#` header lines: tool version, config hash, mode and parameters in force.
pub fn metadata_lines(cfg: &RunConfig) -> Vec<String> {
    let mut out = vec![
        format!("phase-pump-lab {VERSION}"),
        format!("config_sha256 = {}", cfg.hash()),
        format!("mode = {}", cfg.mode()),
    ];
    for (k, v) in cfg.section.to_table() {
        out.push(format!("default {}.{k} = {v}", cfg.mode()));
    }
    for (k, v) in numerical_defaults(cfg.mode()) {
        out.push(format!("default {k} = {v}"));
    }
    for a in &cfg.sweep {
        out.push(format!("sweep {} = {} values", a.name, a.values.len()));
    }
    out
}

/// Library tolerances that are not exposed as config keys.
pub fn numerical_defaults(mode: Mode) -> Vec<(&'static str, String)> {
    match mode {
        Mode::Classical => vec![
            ("classical.ode_tol", classical::DEFAULT_TOL.to_string()),
            ("classical.slip_threshold", classical::SLIP_THRESHOLD.to_string()),
            ("classical.slip_window", classical::SLIP_WINDOW.to_string()),
        ],
        Mode::Adiabatic => vec![("adiabatic.gap_tol", adiabatic::GAP_TOL.to_string())],
        Mode::Floquet => {
            let p = SelectPolicy::default();
            vec![
                ("floquet.norm_tol", p.norm_tol.to_string()),
                ("floquet.n_families", p.n_families.to_string()),
            ]
        }
        Mode::Propagate => vec![
            ("propagate.step_resolution", propagate::STEP_RESOLUTION.to_string()),
            ("propagate.norm_tol", propagate::NORM_TOL.to_string()),
        ],
        Mode::Duffing => vec![
            ("duffing.sim_tol", duffing::SIM_TOL.to_string()),
            ("duffing.validity_limit", duffing::VALIDITY_LIMIT.to_string()),
        ],
    }
}

pub fn build_table(cfg: &RunConfig, outcomes: &[PointOutcome]) -> CsvTable {
    let lead = leading_axes(cfg);
    let mut cols: Vec<String> = lead.clone();
    cols.extend(columns(cfg.mode()).iter().map(|c| c.to_string()));
    cols.push("error".into());
    let mut t = CsvTable::new(&cols);
    for m in metadata_lines(cfg) {
        t.meta(m);
    }
    for o in outcomes {
        let mut row: Vec<Cell> = lead
            .iter()
            .map(|name| {
                o.coords
                    .iter()
                    .find(|(n, _)| n == name)
                    .map_or(Cell::Empty, |(_, v)| Cell::Num(*v))
            })
            .collect();
        row.extend(o.cells.iter().cloned());
        row.push(o.error.as_deref().map_or(Cell::Empty, |e| Cell::Text(e.into())));
        t.push(row);
    }
    t
}

pub fn build_log(cfg: &RunConfig, outcomes: &[PointOutcome]) -> String {
    let mut s = String::new();
    for (i, o) in outcomes.iter().enumerate() {
        let coords: Map<String, Value> = o.coords.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let line = json!({
            "index": i,
            "mode": cfg.mode().as_str(),
            "config_sha256": cfg.hash(),
            "coords": coords,
            "ok": o.error.is_none(),
            "error": o.error,
            "meta": o.meta,
            "elapsed_ms": o.elapsed_ms,
        });
        s.push_str(&line.to_string());
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub points: usize,
    pub failures: usize,
    pub csv: PathBuf,
    pub log: PathBuf,
}

impl SweepSummary {
    pub fn exit_code(&self) -> i32 {
        if self.failures == 0 {
            0
        } else {
            1
        }
    }
}

/// Runs the sweep and writes `<out>/<mode>.csv` and `<out>/<mode>.jsonl`.
pub fn run_sweep(cfg: &RunConfig, workers: usize, out: &Path) -> std::io::Result<SweepSummary> {
    let outcomes = evaluate_points(cfg, workers);
    std::fs::create_dir_all(out)?;
    let csv = out.join(format!("{}.csv", cfg.mode()));
    let log = out.join(format!("{}.jsonl", cfg.mode()));
    build_table(cfg, &outcomes).write(&csv)?;
    std::fs::write(&log, build_log(cfg, &outcomes))?;
    Ok(SweepSummary {
        points: outcomes.len(),
        failures: outcomes.iter().filter(|o| o.error.is_some()).count(),
        csv,
        log,
    })
}
