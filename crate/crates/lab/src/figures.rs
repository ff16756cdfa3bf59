//! Figure-data bundles with hard-coded caption parameters.
//!
//! Each bundle is a directory of CSV files plus `metadata.json`, which lists
//! the caption parameters, any choices the captions leave open, and the files.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use phase_pump::adiabatic::{self, AdiabaticConfig};
use phase_pump::classical::{self, Trajectory};
use phase_pump::floquet::{self, FloquetConfig};
use phase_pump::hamiltonian::{self, MomentumBasis};
use phase_pump::{model, ModelParams};

use crate::csv::{columns_table, Cell, CsvTable};
use crate::sweep::VERSION;

pub const FIGURES: [&str; 8] = ["fig2", "fig3a", "fig3b", "fig3c", "fig3d", "fig4", "fig5", "figS1"];

/// Classical modulation speed used by the classical figures, Ω/2π = 2e−4.
pub const CLASSICAL_OMEGA: f64 = TAU * 2e-4;

#[derive(Debug, thiserror::Error)]
pub enum FigureError {
    #[error("unknown figure `{0}` (known: fig2, fig3a, fig3b, fig3c, fig3d, fig4, fig5, figS1)")]
    Unknown(String),
    #[error("{0}")]
    Compute(#[from] phase_pump::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub fn is_figure(name: &str) -> bool {
    FIGURES.contains(&name)
}

/// Files written for one figure.
#[derive(Clone, Debug)]
pub struct Bundle {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

struct Writer {
    dir: PathBuf,
    name: &'static str,
    files: Vec<String>,
}

impl Writer {
    fn new(out: &Path, name: &'static str) -> std::io::Result<Self> {
        let dir = out.join(name);
        std::fs::create_dir_all(&dir)?;
        Ok(Writer {
            dir,
            name,
            files: Vec::new(),
        })
    }

    fn csv(&mut self, file: &str, mut t: CsvTable, caption: &str) -> std::io::Result<()> {
        let mut meta = vec![format!("phase-pump-lab {VERSION}"), format!("figure = {}", self.name)];
        meta.extend(caption.lines().map(String::from));
        meta.append(&mut t.meta);
        t.meta = meta;
        t.write(&self.dir.join(file))?;
        self.files.push(file.to_string());
        Ok(())
    }

    fn finish(self, caption: Value, choices: Value) -> std::io::Result<Bundle> {
        let meta = json!({
            "figure": self.name,
            "version": VERSION,
            "caption_parameters": caption,
            "choices": choices,
            "files": self.files,
        });
        let path = self.dir.join("metadata.json");
        std::fs::write(&path, serde_json::to_string_pretty(&meta).expect("json") + "\n")?;
        let mut files: Vec<PathBuf> = self.files.iter().map(|f| self.dir.join(f)).collect();
        files.push(path);
        Ok(Bundle { dir: self.dir, files })
    }
}

fn trajectory_table(tr: &Trajectory) -> CsvTable {
    let t: Vec<f64> = tr.samples.iter().map(|s| s.t).collect();
    let th: Vec<f64> = tr.samples.iter().map(|s| s.theta).collect();
    let ph: Vec<f64> = tr.samples.iter().map(|s| s.phi).collect();
    let mut tab = columns_table(&["t", "theta", "phi"], &[&t, &th, &ph]);
    let slips: Vec<String> = tr.slips.iter().map(|s| format!("{:.6}", s.location())).collect();
    tab.meta(format!("slip theta locations = [{}]", slips.join(", ")));
    tab
}

fn tag(x: f64) -> String {
    format!("{x:.2}")
}

fn linspace(a: f64, b: f64, step: f64) -> Vec<f64> {
    let n = ((b - a) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| crate::config::round_sig(a + i as f64 * step, 12)).collect()
}

/// Runs the named figure on `workers` threads and writes it under `out/<name>`.
pub fn reproduce_figure(name: &str, out: &Path, workers: usize) -> Result<Bundle, FigureError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| match name {
        "fig2" => fig2(out),
        "fig3a" => fig3a(out),
        "fig3b" => fig3b(out),
        "fig3c" => fig3c(out),
        "fig3d" => fig3d(out),
        "fig4" => fig4(out),
        "fig5" => fig5(out),
        "figS1" => fig_s1(out),
        other => Err(FigureError::Unknown(other.to_string())),
    })
}

fn fig2(out: &Path) -> Result<Bundle, FigureError> {
    let mut w = Writer::new(out, "fig2")?;
    let caption = "caption: Delta = 0, r = 0.49 (a, b, c) and r = 0.51 (d, e, f); mu = 1";
    for r in [0.49, 0.51] {
        let p = ModelParams::new(r, 0.0, CLASSICAL_OMEGA);
        let pair = classical::hysteresis_pair(&p)?;
        w.csv(&format!("r{}_forward.csv", tag(r)), trajectory_table(&pair.forward), caption)?;
        w.csv(&format!("r{}_backward.csv", tag(r)), trajectory_table(&pair.backward), caption)?;
    }
    w.finish(
        json!({"delta": 0.0, "r": [0.49, 0.51], "mu": 1.0}),
        json!({
            "omega": "Omega/2pi = 2e-4 (slow limit; not stated in the caption)",
            "initial_phase": "attractive root of f(., theta = 0) with the smallest phi >= 0",
            "backward": "theta(t) = -Omega t from the same initial phase",
        }),
    )
    .map_err(Into::into)
}

fn fig3a(out: &Path) -> Result<Bundle, FigureError> {
    let mut w = Writer::new(out, "fig3a")?;
    let caption = "caption: classical model with various r; transition at r_c = 0.5";
    let shown = [0.3, 0.45, 0.49, 0.51, 0.55, 0.7];
    let runs: Vec<_> = shown
        .par_iter()
        .map(|&r| {
            let p = ModelParams::new(r, 0.0, CLASSICAL_OMEGA);
            let phi0 = classical::initial_phase(&p, 0.0).unwrap_or(0.0);
            classical::integrate(&p, phi0, (0.0, TAU / CLASSICAL_OMEGA), classical::DEFAULT_TOL)
        })
        .collect();
    for (r, tr) in shown.iter().zip(runs) {
        w.csv(&format!("phase_r{}.csv", tag(*r)), trajectory_table(&tr?), caption)?;
    }
    let rs = linspace(0.40, 0.60, 0.01);
    let chis: Vec<_> = rs
        .par_iter()
        .map(|&r| classical::winding(&ModelParams::new(r, 0.0, CLASSICAL_OMEGA), 1, 1))
        .collect();
    let mut t = CsvTable::new(&["r", "chi"]);
    for (r, c) in rs.iter().zip(chis) {
        t.push(vec![Cell::Num(*r), Cell::Num(c?.chi)]);
    }
    w.csv("winding.csv", t, caption)?;
    w.finish(
        json!({"delta": 0.0, "mu": 1.0, "r_c": 0.5}),
        json!({
            "omega": "Omega/2pi = 2e-4",
            "r_shown": shown,
            "winding_r_grid": "0.40 to 0.60 step 0.01, one settle and one measured cycle",
        }),
    )
    .map_err(Into::into)
}

fn fig3b(out: &Path) -> Result<Bundle, FigureError> {
    let mut w = Writer::new(out, "fig3b")?;
    let caption = "caption: quantum adiabatic phase evolution with various r, m_e = 5";
    let shown = [0.3, 0.45, 0.5, 0.55, 0.6, 0.7];
    let cfg = AdiabaticConfig::default();
    for r in shown {
        let p = ModelParams::quantum(r, 5.0, CLASSICAL_OMEGA);
        let c = adiabatic::pump_curve(&p, &cfg)?;
        let mut t = columns_table(&["theta", "phase"], &[&c.theta, &c.phase]);
        t.meta(format!("chi = {}", crate::csv::fmt_num(c.chi)));
        w.csv(&format!("pump_r{}.csv", tag(r)), t, caption)?;
    }
    w.finish(
        json!({"m_e": 5.0}),
        json!({
            "r_shown": shown,
            "omega": "Omega/2pi = 2e-4; the pump curve is first order in Omega",
            "k_max": cfg.k_max,
            "theta_grid": cfg.theta_grid,
            "n_excited": cfg.n_excited,
            "derivative": "finite difference",
        }),
    )
    .map_err(Into::into)
}

fn fig3c(out: &Path) -> Result<Bundle, FigureError> {
    let mut w = Writer::new(out, "fig3c")?;
    let caption = "caption: r dependence of the winding number for various m_e; classical model dotted";
    let rs = linspace(0.30, 0.70, 0.02);
    let masses = [1.0, 5.0, 10.0];
    let cfg = AdiabaticConfig::default();
    let mut cols = vec!["r".to_string(), "classical".to_string()];
    cols.extend(masses.iter().map(|m| format!("m_e_{m}")));
    let mut t = CsvTable::new(&cols);
    let rows: Vec<_> = rs
        .par_iter()
        .map(|&r| -> Result<Vec<Cell>, phase_pump::Error> {
            let mut row = vec![Cell::Num(r)];
            row.push(Cell::Num(classical::winding(&ModelParams::new(r, 0.0, CLASSICAL_OMEGA), 1, 1)?.chi));
            for &m in &masses {
                let c = adiabatic::pump_curve(&ModelParams::quantum(r, m, CLASSICAL_OMEGA), &cfg)?;
                row.push(Cell::Num(c.chi));
            }
            Ok(row)
        })
        .collect();
    for row in rows {
        t.push(row?);
    }
    w.csv("winding_vs_r.csv", t, caption)?;
    w.finish(
        json!({"m_e": "various"}),
        json!({
            "m_e_values": masses,
            "r_grid": "0.30 to 0.70 step 0.02",
            "k_max": cfg.k_max,
            "theta_grid": cfg.theta_grid,
            "classical_omega": "Omega/2pi = 2e-4",
        }),
    )
    .map_err(Into::into)
}

fn fig3d(out: &Path) -> Result<Bundle, FigureError> {
    let mut w = Writer::new(out, "fig3d")?;
    let caption = "caption: Floquet phase evolution, forward and backward sweeps, m_e = 10, Omega = 0.005";
    let p = ModelParams::quantum(0.55, 10.0, 0.005);
    let cfg = FloquetConfig::default();
    let rs = linspace(0.50, 0.60, 0.01);
    let (run, scan) = floquet::locate_hysteresis_window(&p, &rs, &cfg, 1024)?;
    let mut t = CsvTable::new(&["r", "hysteresis"]);
    for (r, h) in &scan {
        t.push(vec![Cell::Num(*r), Cell::Num(*h)]);
    }
    w.csv("hysteresis_scan.csv", t, caption)?;
    for (label, s) in [("forward", &run.forward), ("backward", &run.backward)] {
        let mut t = columns_table(
            &["t", "theta", "phase", "velocity"],
            &[&s.times, &s.curve.theta, &s.curve.phase, &s.velocity],
        );
        t.meta(format!("r = {}", run.r));
        w.csv(&format!("{label}.csv"), t, caption)?;
    }
    w.finish(
        json!({"m_e": 10.0, "omega": 0.005}),
        json!({
            "located_r": run.r,
            "r_scan": "0.50 to 0.60 step 0.01, argmax of the forward/backward phase spread",
            "state": "equal-weight superposition of the two lowest Floquet families, relative phase localizing |phi| < pi/2 at t = 0",
            "splitting": run.splitting,
            "interference_frequency": run.frequency,
            "fft_peak": run.fft_peak,
            "k_max": cfg.k_max,
        }),
    )
    .map_err(Into::into)
}

fn fig4(out: &Path) -> Result<Bundle, FigureError> {
    let mut w = Writer::new(out, "fig4")?;
    let caption = "caption: adiabatic wave-function amplitude, m_e = 10 (a) and 1 (c), r = 0.55; snapshots at theta = 1.4 pi, 1.6 pi";
    let basis = MomentumBasis::new(40);
    let (n_theta, n_phi) = (256, 256);
    for m_e in [10.0, 1.0] {
        let p = ModelParams::quantum(0.55, m_e, CLASSICAL_OMEGA);
        let map = adiabatic::amplitude_map(&p, basis, (n_theta, n_phi))?;
        let mut t = CsvTable::new(&["theta", "phi", "amplitude"]);
        for (j, row) in map.iter().enumerate() {
            for (i, a) in row.iter().enumerate() {
                t.push(vec![
                    Cell::Num(TAU * j as f64 / n_theta as f64),
                    Cell::Num(TAU * i as f64 / n_phi as f64),
                    Cell::Num(*a),
                ]);
            }
        }
        let label = format!("m{m_e}");
        w.csv(&format!("map_{label}.csv"), t, caption)?;
        for frac in [1.4, 1.6] {
            let th = frac * PI;
            let h = hamiltonian::build_hamiltonian(&p, th, basis)?;
            let e = hamiltonian::eigensolve(&h, 1)?;
            let psi = hamiltonian::wavefunction_on_grid(&e.state(0), n_phi)?;
            let mut t = CsvTable::new(&["phi", "amplitude", "potential"]);
            t.meta(format!("theta = {}", crate::csv::fmt_num(th)));
            t.meta(format!("E0 = {}", crate::csv::fmt_num(e.energies[0])));
            for (i, z) in psi.iter().enumerate() {
                let phi = TAU * i as f64 / n_phi as f64;
                t.push(vec![Cell::Num(phi), Cell::Num(z.norm()), Cell::Num(model::potential(&p, phi, th))]);
            }
            w.csv(&format!("snapshot_{label}_theta{frac}pi.csv"), t, caption)?;
        }
    }
    w.finish(
        json!({"r": 0.55, "m_e": [10.0, 1.0], "snapshot_theta": ["1.4 pi", "1.6 pi"]}),
        json!({"k_max": basis.k_max, "grid": [n_theta, n_phi], "phi_origin": "phi_j = 2 pi j / n"}),
    )
    .map_err(Into::into)
}

fn fig5(out: &Path) -> Result<Bundle, FigureError> {
    let mut w = Writer::new(out, "fig5")?;
    let caption = "caption: Floquet winding number against modulation speed, m_e = 10; A: r = 0.4, Omega = 0.0016; E: r = 0.2";
    let cfg = FloquetConfig::default();
    let omegas = [0.0016, 0.0025, 0.004, 0.0063, 0.01, 0.016, 0.025, 0.04, 0.063, 0.1];
    let rs = [0.2, 0.3, 0.4];
    let mut t = CsvTable::new(&["r", "omega", "chi", "epsilon0", "mean_energy0", "qmax_used", "pt_residual", "error"]);
    let jobs: Vec<(f64, f64)> = rs.iter().flat_map(|&r| omegas.iter().map(move |&o| (r, o))).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(r, o)| floquet::winding_vs_omega(&ModelParams::quantum(r, 10.0, o), &[o], &cfg).remove(0))
        .collect();
    for ((r, o), res) in jobs.iter().zip(results) {
        t.push(match res {
            Ok(pt) => vec![
                Cell::Num(*r),
                Cell::Num(*o),
                Cell::Num(pt.chi),
                Cell::Num(pt.epsilon0),
                Cell::Num(pt.mean_energy0),
                Cell::from(pt.q_max),
                Cell::Num(pt.pt_residual),
                Cell::Empty,
            ],
            Err(e) => {
                let mut row = vec![Cell::Num(*r), Cell::Num(*o)];
                row.extend(std::iter::repeat(Cell::Empty).take(5));
                row.push(Cell::Text(e.to_string()));
                row
            }
        });
    }
    w.csv("winding_vs_omega.csv", t, caption)?;
    let (n_theta, n_phi) = (128, 128);
    for (label, r, o) in [("A", 0.4, 0.0016), ("E", 0.2, 0.0016)] {
        let p = ModelParams::quantum(r, 10.0, o);
        let sol = floquet::solve_adaptive(&p, &cfg)?;
        let g = sol.ground();
        let mut t = CsvTable::new(&["theta", "phi", "probability"]);
        t.meta(format!("r = {r}, omega = {o}, chi = {}", crate::csv::fmt_num(floquet::floquet_winding(g, &p).chi)));
        for j in 0..n_theta {
            let th = TAU * j as f64 / n_theta as f64;
            let psi = hamiltonian::wavefunction_on_grid(&g.at_theta(th), n_phi)?;
            for (i, z) in psi.iter().enumerate() {
                t.push(vec![Cell::Num(th), Cell::Num(TAU * i as f64 / n_phi as f64), Cell::Num(z.norm_sqr())]);
            }
        }
        w.csv(&format!("map_{label}.csv"), t, caption)?;
    }
    w.finish(
        json!({"m_e": 10.0, "A": {"r": 0.4, "omega": 0.0016}, "E": {"r": 0.2}}),
        json!({
            "r_values": rs,
            "omega_grid": omegas,
            "E_omega": 0.0016,
            "k_max": cfg.k_max,
            "q_max": "doubled from 64 until the lowest two families are confined",
            "state": "ground family: lowest cycle-averaged energy",
        }),
    )
    .map_err(Into::into)
}

fn fig_s1(out: &Path) -> Result<Bundle, FigureError> {
    let mut w = Writer::new(out, "figS1")?;
    let caption = "caption: Delta/2pi = 0.004, r = 0.55, kappa = 0.1, Omega/2pi = 0.0002";
    let p = figs1_params();
    let rt = classical::round_trip(&p)?;
    let mut f = trajectory_table(&rt.forward);
    f.meta(format!("phi_start = {}", crate::csv::fmt_num(rt.phi_start())));
    w.csv("forward.csv", f, caption)?;
    let mut b = trajectory_table(&rt.backward);
    b.meta(format!("phi_end = {}", crate::csv::fmt_num(rt.phi_end())));
    b.meta(format!("displacement = {}", crate::csv::fmt_num(rt.displacement())));
    w.csv("backward.csv", b, caption)?;
    w.finish(
        json!({"delta_over_2pi": 0.004, "r": 0.55, "kappa": 0.1, "omega_over_2pi": 0.0002}),
        json!({
            "kappa": "not a parameter of the phase equation; read as the overall coupling scale mu = 0.1",
            "backward": "theta runs from 2 pi back to 0 starting at the forward endpoint",
            "displacement": rt.displacement(),
        }),
    )
    .map_err(Into::into)
}

/// Parameters of the detuned non-reciprocity run.
pub fn figs1_params() -> ModelParams {
    ModelParams::new(0.55, TAU * 0.004, TAU * 2e-4).with_mu(0.1)
}
