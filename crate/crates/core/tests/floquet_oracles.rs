use num_complex::Complex64;
use phase_pump::adiabatic::mean_ground_energy;
use phase_pump::floquet::*;
use phase_pump::hamiltonian::{build_hamiltonian, eigensolve, MomentumBasis};
use phase_pump::propagate::*;
use phase_pump::ModelParams;

fn ground_at_zero(p: &ModelParams, k_max: usize) -> Vec<Complex64> {
    let h = build_hamiltonian(p, 0.0, MomentumBasis::new(k_max)).unwrap();
    eigensolve(&h, 1).unwrap().state(0)
}

#[test]
fn floquet_and_propagation_agree_on_unit_winding() {
    let p = ModelParams::quantum(0.4, 10.0, 0.0016);
    let sol = solve_adaptive(&p, &FloquetConfig::default()).unwrap();
    let chi_f = floquet_winding(sol.ground(), &p).chi;
    assert!((chi_f - 1.0).abs() < 0.05, "{chi_f}");
    let (w, run) = propagated_winding(&p, &ground_at_zero(&p, 12), 0.012).unwrap();
    assert!((w.chi - 1.0).abs() < 0.05, "{}", w.chi);
    assert!(run.max_norm_drift() < 1e-8);
}

#[test]
fn gapped_cycle_returns_to_adiabatic_state() {
    let p = ModelParams::quantum(0.7, 10.0, 0.0016);
    let psi0 = ground_at_zero(&p, 12);
    let (w, run) = propagated_winding(&p, &psi0, 0.012).unwrap();
    assert!(fidelity(&psi0, run.final_state()) > 0.99);
    assert!((w.chi - 1.0).abs() < 0.01);
    let sol = solve_adaptive(&p, &FloquetConfig::default()).unwrap();
    let e0 = mean_ground_energy(&p, 12, 256).unwrap();
    assert!((sol.ground().mean_energy() - e0).abs() < 0.01);
}

#[test]
fn small_winding_at_weak_first_harmonic() {
    let p = ModelParams::quantum(0.2, 10.0, 0.0016);
    let sol = solve_adaptive(&p, &FloquetConfig::default()).unwrap();
    let chi = floquet_winding(sol.ground(), &p).chi;
    assert!(chi < 0.3, "{chi}");
}

#[test]
fn k_cutoff_doubling_is_converged() {
    let p = ModelParams::quantum(0.55, 10.0, 0.01);
    let a = solve_adaptive(&p, &FloquetConfig::default()).unwrap();
    let b = solve_adaptive(&p, &FloquetConfig { k_max: 24, ..Default::default() }).unwrap();
    assert!((a.ground().epsilon - b.ground().epsilon).abs() < 1e-8);
    assert!((floquet_winding(a.ground(), &p).chi - floquet_winding(b.ground(), &p).chi).abs() < 1e-6);
}

#[test]
fn representatives_are_pt_eigenstates() {
    for r in [0.3, 0.55] {
        let p = ModelParams::quantum(r, 10.0, 0.01);
        let sol = solve_adaptive(&p, &FloquetConfig::default()).unwrap();
        for s in &sol.states {
            let c = fix_global_phase(&s.complex_components());
            assert!(c.iter().all(|z| z.im.abs() < 1e-10));
            assert!(pt_check(&c).residual < 1e-8);
        }
        let (a, b) = (&sol.states[0], &sol.states[1]);
        let mix: Vec<Complex64> = a
            .components
            .iter()
            .zip(&b.components)
            .map(|(x, y)| Complex64::new(*x, *y) / 2f64.sqrt())
            .collect();
        assert!(pt_check(&mix).residual > 0.1);
    }
}

#[test]
fn stroboscopic_agreement_across_regimes() {
    for (r, w) in [(0.7, 0.005), (0.4, 0.05), (0.3, 0.2)] {
        let p = ModelParams::quantum(r, 10.0, w);
        let sol = solve_adaptive(&p, &FloquetConfig::default()).unwrap();
        let c = stroboscopic_check(sol.ground(), &p, 0.01).unwrap();
        assert!(c.fidelity > 0.999, "r={r} w={w} {c:?}");
    }
}
