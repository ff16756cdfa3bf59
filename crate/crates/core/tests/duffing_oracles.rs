use std::f64::consts::TAU;

use phase_pump::duffing::*;

#[test]
fn static_coupling_locks_in_phase() {
    let dp = DuffingParams::static_pair(1.0, 0.01, 0.005, 0.002, 0.0);
    let opts = ReductionOptions::for_params(&dp);
    let r = reduction_check(&dp, &opts).unwrap();
    let end = *r.phi.last().unwrap();
    let k = (end / TAU).round();
    assert!((end - k * TAU).abs() < 0.05, "{end}");
    // Locked tail is flat.
    let n = r.phi.len();
    let tail = &r.phi[n - n / 10..];
    let spread = tail.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)) - tail.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    assert!(spread < 0.01, "{spread}");
}

#[test]
fn sine_coupling_amplitude_matches() {
    let dp = DuffingParams::static_pair(1.0, 0.01, 0.005, 0.002, 0.0);
    let r = reduction_check(&dp, &ReductionOptions::for_params(&dp)).unwrap();
    assert!((r.fitted.c / r.predicted.c - 1.0).abs() < 0.2, "{:?}", r.fitted);
}

#[test]
fn zero_coupling_gives_no_force() {
    // Detuned so that φ sweeps the circle and the fit is well posed.
    let dp = DuffingParams::static_pair(1.0, 0.01, 0.005, 0.0, 0.004);
    let opts = ReductionOptions {
        t_end: 3000.0,
        ..ReductionOptions::for_params(&dp)
    };
    let r = reduction_check(&dp, &opts).unwrap();
    assert!(r.fitted.c.abs() < 1e-6 && r.fitted.e.abs() < 1e-6, "{:?}", r.fitted);
    assert!((r.fitted.d / 0.004 - 1.0).abs() < 0.02, "{:?}", r.fitted);
}

#[test]
fn detuning_beyond_lock_drifts_monotonically() {
    let dp = DuffingParams::static_pair(1.0, 0.01, 0.005, 0.002, 0.01);
    let opts = ReductionOptions {
        t_end: 4000.0,
        ..ReductionOptions::for_params(&dp)
    };
    let r = reduction_check(&dp, &opts).unwrap();
    assert!(r.phi.windows(2).all(|w| w[1] > w[0]));
    assert!(r.phi.last().unwrap() - r.phi[0] > TAU);
}

#[test]
fn second_harmonic_force_terms() {
    let o1 = Oscillator::new(1.0, 0.04, 0.005, 0.0);
    let o2 = Oscillator::new(1.5, 0.04, 0.005, 0.0);
    let dp = DuffingParams::nonlinear_parametric([o1, o2], [0.002, 0.004]);
    let r = reduction_check(&dp, &ReductionOptions::for_params(&dp)).unwrap();
    assert!((r.fitted.c / r.predicted.c - 1.0).abs() < 0.2, "{:?}", r.fitted);
    assert!((r.fitted.e / r.predicted.e - 1.0).abs() < 0.2, "{:?}", r.fitted);
}

#[test]
fn parametric_coupling_follows_drive_phase() {
    let o1 = Oscillator::new(1.0, 0.04, 0.005, 0.0);
    let o2 = Oscillator::new(1.2, 0.04, 0.005, 0.0);
    let dp = DuffingParams::parametric([o1, o2], [0.003, 0.003], [0.0, 0.7]);
    let r = reduction_check(&dp, &ReductionOptions::for_params(&dp)).unwrap();
    assert!((r.fitted.c / r.predicted.c - 1.0).abs() < 0.2, "{:?} vs {:?}", r.fitted, r.predicted);
    assert!((r.fitted.e / r.predicted.e - 1.0).abs() < 0.2, "{:?} vs {:?}", r.fitted, r.predicted);
}

#[test]
fn residual_halves_with_small_parameters() {
    let dp = DuffingParams::static_pair(1.0, 0.05, 0.02, 1e-4, 0.0);
    let a = reduction_check(&dp, &ReductionOptions::for_params(&dp)).unwrap();
    let h = dp.scale_small(0.5);
    let b = reduction_check(&h, &ReductionOptions::for_params(&h)).unwrap();
    let ratio = b.residual / a.residual;
    assert!(ratio > 0.4 && ratio < 0.6, "{} -> {}", a.residual, b.residual);
}
