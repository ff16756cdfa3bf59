//! Phase-particle Hamiltonian in the truncated momentum basis.
//!
//! H = p̂²/(2m_e) − μ[r cos(φ̂ − θ) + (1−r)/2 cos 2φ̂], with e^{iφ̂}|k⟩ = |k+1⟩.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::model::ModelParams;
use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// States k ∈ {−k_max, …, k_max}; index i ↔ k = i − k_max.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MomentumBasis {
    pub k_max: usize,
}

impl MomentumBasis {
    pub fn new(k_max: usize) -> Self {
        MomentumBasis { k_max }
    }

    pub fn dim(&self) -> usize {
        2 * self.k_max + 1
    }

    pub fn k(&self, i: usize) -> i64 {
        i as i64 - self.k_max as i64
    }

    pub fn index(&self, k: i64) -> Option<usize> {
        let i = k + self.k_max as i64;
        (i >= 0 && (i as usize) < self.dim()).then_some(i as usize)
    }
}

#[derive(Clone, Debug)]
pub struct HamiltonianMatrix {
    pub basis: MomentumBasis,
    pub theta: f64,
    pub matrix: CMatrix,
}

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub theta: f64,
    pub energies: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: CMatrix,
}

impl EigenDecomposition {
    pub fn state(&self, n: usize) -> Vec<Complex64> {
        self.vectors.column(n).iter().copied().collect()
    }
}

pub fn build_hamiltonian(p: &ModelParams, theta: f64, basis: MomentumBasis) -> Result<HamiltonianMatrix> {
    if basis.k_max < 2 {
        return Err(Error::InvalidArgument("k_max must be at least 2".into()));
    }
    let n = basis.dim();
    let mut h = CMatrix::zeros(n, n);
    let first = Complex64::from_polar(-p.mu * p.r / 2.0, -theta);
    let second = Complex64::new(-p.mu * (1.0 - p.r) / 4.0, 0.0);
    for i in 0..n {
        let k = basis.k(i) as f64;
        h[(i, i)] = Complex64::new(k * k / (2.0 * p.m_e), 0.0);
        if i + 1 < n {
            h[(i + 1, i)] = first;
            h[(i, i + 1)] = first.conj();
        }
        if i + 2 < n {
            h[(i + 2, i)] = second;
            h[(i, i + 2)] = second;
        }
    }
    Ok(HamiltonianMatrix {
        basis,
        theta,
        matrix: h,
    })
}

/// ∂H/∂θ in the momentum basis.
pub fn build_dh_dtheta(p: &ModelParams, theta: f64, basis: MomentumBasis) -> CMatrix {
    let n = basis.dim();
    let mut d = CMatrix::zeros(n, n);
    let first = Complex64::from_polar(-p.mu * p.r / 2.0, -theta) * Complex64::new(0.0, -1.0);
    for i in 0..n - 1 {
        d[(i + 1, i)] = first;
        d[(i, i + 1)] = first.conj();
    }
    d
}

/// The velocity operator, diagonal k/m_e.
pub fn velocity_matrix(p: &ModelParams, basis: MomentumBasis) -> Result<CMatrix> {
    if !(p.m_e > 0.0) {
        return Err(Error::InvalidArgument("m_e must be positive".into()));
    }
    let n = basis.dim();
    let mut v = CMatrix::zeros(n, n);
    for i in 0..n {
        v[(i, i)] = Complex64::new(basis.k(i) as f64 / p.m_e, 0.0);
    }
    Ok(v)
}

/// Velocity from ½[e^{−iφ̂}He^{iφ̂} − e^{iφ̂}He^{−iφ̂}], evaluated with shift
/// operators on a basis padded by one state and restricted back to `basis`.
/// Rows with |k| ≤ k_max − 2 are free of truncation effects.
pub fn velocity_from_commutator(p: &ModelParams, theta: f64, basis: MomentumBasis) -> Result<CMatrix> {
    let big = MomentumBasis::new(basis.k_max + 1);
    let h = build_hamiltonian(p, theta, big)?;
    let n = big.dim();
    let mut up = CMatrix::zeros(n, n);
    for i in 0..n - 1 {
        up[(i + 1, i)] = Complex64::new(1.0, 0.0);
    }
    let down = up.adjoint();
    let a = &down * &h.matrix * &up;
    let b = &up * &h.matrix * &down;
    let full = (a - b) * Complex64::new(0.5, 0.0);
    Ok(full.view((1, 1), (basis.dim(), basis.dim())).into_owned())
}

/// Lowest `n_states` eigenpairs, ascending, each with its largest component
/// real and positive. Degenerate levels are ordered by decreasing ⟨k⟩.
pub fn eigensolve(h: &HamiltonianMatrix, n_states: usize) -> Result<EigenDecomposition> {
    let n = h.basis.dim();
    if n_states == 0 || n_states > n {
        return Err(Error::InvalidArgument("n_states must be in 1..=dim".into()));
    }
    let eig = h
        .matrix
        .clone()
        .try_symmetric_eigen(1e-15, 10_000)
        .ok_or_else(|| Error::EigenNoConvergence("hermitian eigensolver".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let mut energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    let scale = 1.0 + energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && energies[end] - energies[end - 1] < 1e-10 * scale {
            end += 1;
        }
        if end - start > 1 {
            order_degenerate(&mut vecs, &mut energies, start, end, h.basis);
        }
        start = end;
    }
    let mut out = vecs.columns(0, n_states).into_owned();
    for mut col in out.column_iter_mut() {
        let (mut best, mut mag) = (0, -1.0);
        for (i, z) in col.iter().enumerate() {
            if z.norm() > mag + 1e-12 {
                mag = z.norm();
                best = i;
            }
        }
        let ph = col[best].conj() / col[best].norm();
        for z in col.iter_mut() {
            *z *= ph;
        }
    }
    energies.truncate(n_states);
    Ok(EigenDecomposition {
        theta: h.theta,
        energies,
        vectors: out,
    })
}

/// Rotates a degenerate block into eigenvectors of the momentum operator.
fn order_degenerate(vecs: &mut CMatrix, energies: &mut [f64], start: usize, end: usize, basis: MomentumBasis) {
    let m = end - start;
    let block = vecs.columns(start, m).into_owned();
    let mut kop = CMatrix::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..basis.dim() {
                s += block[(i, a)].conj() * block[(i, b)] * basis.k(i) as f64;
            }
            kop[(a, b)] = s;
        }
    }
    let eig = kop.symmetric_eigen();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mean = energies[start..end].iter().sum::<f64>() / m as f64;
    for (c, &j) in idx.iter().enumerate() {
        let col = &block * eig.eigenvectors.column(j);
        vecs.set_column(start + c, &col);
        energies[start + c] = mean;
    }
}

/// ψ(φ_j) = (2π)^{-1/2} Σ_k e^{ikφ_j} c_k on φ_j = 2πj/N.
pub fn wavefunction_on_grid(vec: &[Complex64], grid_size: usize) -> Result<Vec<Complex64>> {
    let dim = vec.len();
    if dim % 2 == 0 {
        return Err(Error::InvalidArgument("vector length must be odd".into()));
    }
    let k_max = (dim - 1) / 2;
    if grid_size < 4 * k_max {
        return Err(Error::InvalidArgument("grid_size must be at least 4 k_max".into()));
    }
    let norm = 1.0 / std::f64::consts::TAU.sqrt();
    Ok((0..grid_size)
        .map(|j| {
            let phi = std::f64::consts::TAU * j as f64 / grid_size as f64;
            let mut s = Complex64::new(0.0, 0.0);
            for (i, c) in vec.iter().enumerate() {
                let k = i as f64 - k_max as f64;
                s += c * Complex64::from_polar(1.0, k * phi);
            }
            s * norm
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model;
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    fn params(r: f64, m_e: f64) -> ModelParams {
        ModelParams::quantum(r, m_e, 0.0)
    }

    fn residual(h: &HamiltonianMatrix, e: &EigenDecomposition) -> (f64, f64) {
        let mut res: f64 = 0.0;
        for n in 0..e.energies.len() {
            let v = e.vectors.column(n);
            let r = &h.matrix * v - v * Complex64::new(e.energies[n], 0.0);
            res = res.max(r.norm());
        }
        let g = e.vectors.adjoint() * &e.vectors;
        let id = CMatrix::identity(g.nrows(), g.ncols());
        (res, (g - id).camax())
    }

    #[test]
    fn free_rotor() {
        let b = MomentumBasis::new(6);
        let p = params(0.3, 5.0).with_mu(0.0);
        let h = build_hamiltonian(&p, 0.7, b).unwrap();
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                let k = b.k(i) as f64;
                let want = if i == j { k * k / 10.0 } else { 0.0 };
                assert_eq!(h.matrix[(i, j)], Complex64::new(want, 0.0));
            }
        }
        let e = eigensolve(&h, 5).unwrap();
        let want = [0.0, 0.1, 0.1, 0.4, 0.4];
        for (a, b) in e.energies.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        // +k before −k within a degenerate pair.
        assert!(e.vectors[(b.index(1).unwrap(), 1)].norm() > 0.999);
        assert!(e.vectors[(b.index(-1).unwrap(), 2)].norm() > 0.999);
    }

    #[test]
    fn real_at_zero_theta_and_hermitian() {
        let b = MomentumBasis::new(10);
        let h0 = build_hamiltonian(&params(0.37, 3.0), 0.0, b).unwrap();
        assert!(h0.matrix.iter().all(|z| z.im == 0.0));
        let h = build_hamiltonian(&params(0.37, 3.0), 1.1, b).unwrap();
        assert_eq!((&h.matrix - h.matrix.adjoint()).camax(), 0.0);
    }

    #[test]
    fn velocity_entries_and_commutator_identity() {
        let b = MomentumBasis::new(8);
        let p = params(0.55, 10.0);
        let v = velocity_matrix(&p, b).unwrap();
        assert!((v[(b.index(3).unwrap(), b.index(3).unwrap())].re - 0.3).abs() < 1e-15);
        assert_eq!(v[(b.index(0).unwrap(), b.index(0).unwrap())].re, 0.0);
        let c = velocity_from_commutator(&p, 0.9, b).unwrap();
        for i in 2..b.dim() - 2 {
            for j in 0..b.dim() {
                assert!((c[(i, j)] - v[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn eigensolve_invariants_and_harmonic_limit() {
        let b = MomentumBasis::new(40);
        let p = params(1.0, 10.0);
        let h = build_hamiltonian(&p, 0.4, b).unwrap();
        let e = eigensolve(&h, 6).unwrap();
        let (res, orth) = residual(&h, &e);
        assert!(res < 1e-10 && orth < 1e-12);
        let gap = e.energies[1] - e.energies[0];
        let harmonic = (1.0f64 / 10.0).sqrt();
        assert!((gap / harmonic - 1.0).abs() < 0.1, "gap {gap}");
        for n in 0..6 {
            let col = e.vectors.column(n);
            let big = col.iter().fold(0.0f64, |m, z| m.max(z.norm()));
            let top = col.iter().find(|z| (z.norm() - big).abs() < 1e-12).unwrap();
            assert!(top.im.abs() < 1e-14 && top.re > 0.0);
        }
    }

    #[test]
    fn cutoff_convergence() {
        let p = params(0.55, 10.0);
        let e40 = eigensolve(&build_hamiltonian(&p, 1.0, MomentumBasis::new(40)).unwrap(), 1).unwrap();
        let e80 = eigensolve(&build_hamiltonian(&p, 1.0, MomentumBasis::new(80)).unwrap(), 1).unwrap();
        assert!((e40.energies[0] - e80.energies[0]).abs() < 1e-8);
    }

    #[test]
    fn parity_at_zero_theta() {
        let b = MomentumBasis::new(20);
        let h = build_hamiltonian(&params(0.6, 2.0), 0.0, b).unwrap();
        let e = eigensolve(&h, 8).unwrap();
        for n in 0..8 {
            let v = e.state(n);
            let refl: Vec<Complex64> = (0..b.dim()).map(|i| v[b.dim() - 1 - i]).collect();
            let s: Complex64 = v.iter().zip(&refl).map(|(a, b)| a.conj() * b).sum();
            assert!((s.norm() - 1.0).abs() < 1e-10, "state {n} overlap {s}");
        }
    }

    #[test]
    fn wavefunctions() {
        let k_max = 4;
        let b = MomentumBasis::new(k_max);
        let mut v = vec![Complex64::new(0.0, 0.0); b.dim()];
        v[b.index(0).unwrap()] = Complex64::new(1.0, 0.0);
        let psi = wavefunction_on_grid(&v, 32).unwrap();
        for z in &psi {
            assert!((z - Complex64::new(1.0 / TAU.sqrt(), 0.0)).norm() < 1e-14);
        }
        v[b.index(0).unwrap()] = Complex64::new(0.0, 0.0);
        v[b.index(1).unwrap()] = Complex64::new(1.0, 0.0);
        let psi = wavefunction_on_grid(&v, 32).unwrap();
        for (j, z) in psi.iter().enumerate() {
            assert!((z.norm() - 1.0 / TAU.sqrt()).abs() < 1e-14);
            let want = TAU * j as f64 / 32.0;
            assert!((crate::wrap_angle(z.arg()) - crate::wrap_angle(want)).abs() < 1e-9 || j == 0);
        }
        assert!(wavefunction_on_grid(&v, 8).is_err());
    }

    #[test]
    fn localized_ground_state() {
        let b = MomentumBasis::new(40);
        let h = build_hamiltonian(&params(0.55, 10.0), 0.0, b).unwrap();
        let e = eigensolve(&h, 1).unwrap();
        let psi = wavefunction_on_grid(&e.state(0), 512).unwrap();
        let dens: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
        let norm: f64 = dens.iter().sum::<f64>() * TAU / 512.0;
        assert!((norm - 1.0).abs() < 1e-10);
        let peak = dens.iter().cloned().fold(0.0, f64::max);
        let maxima = (0..512)
            .filter(|&j| {
                let l = dens[(j + 511) % 512];
                let r = dens[(j + 1) % 512];
                dens[j] > l && dens[j] >= r && dens[j] > 0.05 * peak
            })
            .count();
        assert_eq!(maxima, 1);
        let near = (0..512)
            .filter(|&j| {
                let phi = TAU * j as f64 / 512.0;
                let d = (phi + PI).rem_euclid(TAU) - PI;
                d.abs() < 0.8
            })
            .map(|j| dens[j])
            .sum::<f64>()
            * TAU
            / 512.0;
        assert!(near > 0.95, "weight near the well {near}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn spectral_floor(r in 0.0..=1.0f64, m_e in 0.5..20.0f64, th in 0.0..TAU) {
            let p = params(r, m_e);
            let h = build_hamiltonian(&p, th, MomentumBasis::new(24)).unwrap();
            let e0 = eigensolve(&h, 1).unwrap().energies[0];
            let floor = (0..4096)
                .map(|j| model::potential(&p, TAU * j as f64 / 4096.0, th))
                .fold(f64::INFINITY, f64::min);
            prop_assert!(e0 >= floor - 1e-9);
        }

        #[test]
        fn mass_coupling_scaling(r in 0.0..=1.0f64, m_e in 0.5..20.0f64, c in 0.25..4.0f64, th in 0.0..TAU) {
            let b = MomentumBasis::new(12);
            let p = params(r, m_e);
            let q = ModelParams { m_e: c * m_e, mu: p.mu / c, ..p };
            let h1 = build_hamiltonian(&p, th, b).unwrap();
            let h2 = build_hamiltonian(&q, th, b).unwrap();
            let diff = (&h1.matrix - &h2.matrix * Complex64::new(c, 0.0)).camax();
            prop_assert!(diff < 1e-13 * (1.0 + h1.matrix.camax()));
            let e1 = eigensolve(&h1, 4).unwrap().energies;
            let e2 = eigensolve(&h2, 4).unwrap().energies;
            for (a, b) in e1.iter().zip(&e2) {
                prop_assert!((a - c * b).abs() < 1e-10);
            }
        }

        #[test]
        fn hermitian_for_any_theta(r in 0.0..=1.0f64, m_e in 0.1..20.0f64, th in -10.0..10.0f64) {
            let h = build_hamiltonian(&params(r, m_e), th, MomentumBasis::new(6)).unwrap();
            prop_assert!((&h.matrix - h.matrix.adjoint()).camax() == 0.0);
        }
    }
}
