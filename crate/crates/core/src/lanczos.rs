//! Lanczos iteration with full reorthogonalization for symmetric operators.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Extreme Ritz pairs of a symmetric operator.
#[derive(Clone, Debug)]
pub struct RitzPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// Residual estimates |β_m s_m|.
    pub residuals: Vec<f64>,
    pub krylov_dim: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Deterministic start vector without special alignment to any basis state.
fn start_vector(n: usize) -> Vec<f64> {
    let g = 0.618_033_988_749_894_9;
    let v: Vec<f64> = (0..n)
        .map(|i| {
            let x = (i as f64 * g).fract();
            1.0 + x - 0.5 * (i as f64 * 0.37).sin()
        })
        .collect();
    let s = norm(&v);
    v.into_iter().map(|x| x / s).collect()
}

/// Computes the `nev` Ritz pairs of largest magnitude of the operator `op`
/// (dimension `n`), growing the Krylov space until their residual estimates
/// fall below `tol`·|value|.
pub fn largest_magnitude<F>(op: F, n: usize, nev: usize, tol: f64) -> Result<RitzPairs>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if nev == 0 || nev > n {
        return Err(Error::InvalidArgument("nev must be in 1..=n".into()));
    }
    let mut m = (2 * nev + 20).min(n);
    loop {
        let pairs = run(&op, n, m, nev)?;
        let ok = pairs
            .values
            .iter()
            .zip(&pairs.residuals)
            .all(|(v, r)| *r <= tol * v.abs());
        if ok || m == n {
            return if ok {
                Ok(pairs)
            } else {
                Err(Error::EigenNoConvergence(format!("Lanczos with full space {n}")))
            };
        }
        m = (m + m / 2).min(n);
    }
}

fn run<F>(op: &F, n: usize, m: usize, nev: usize) -> Result<RitzPairs>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    q.push(start_vector(n));
    let mut last_beta = 0.0;
    for j in 0..m {
        let mut w = op(&q[j]);
        let a = dot(&w, &q[j]);
        alpha.push(a);
        // Two passes of classical Gram–Schmidt against the whole basis.
        for _ in 0..2 {
            for qi in &q {
                let c = dot(&w, qi);
                for (x, y) in w.iter_mut().zip(qi) {
                    *x -= c * y;
                }
            }
        }
        let b = norm(&w);
        last_beta = b;
        if j + 1 == m {
            break;
        }
        if b < 1e-14 * a.abs().max(1e-300) {
            // Invariant subspace: restart from a vector orthogonal to it.
            let mut v = start_vector(n);
            for (i, x) in v.iter_mut().enumerate() {
                *x *= 1.0 + ((i * 7919) % 13) as f64;
            }
            for _ in 0..2 {
                for qi in &q {
                    let c = dot(&v, qi);
                    for (x, y) in v.iter_mut().zip(qi) {
                        *x -= c * y;
                    }
                }
            }
            let s = norm(&v);
            if s < 1e-12 {
                break;
            }
            beta.push(0.0);
            q.push(v.into_iter().map(|x| x / s).collect());
            continue;
        }
        beta.push(b);
        q.push(w.into_iter().map(|x| x / b).collect());
    }
    let k = alpha.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].abs().partial_cmp(&eig.eigenvalues[a].abs()).unwrap());
    let take = nev.min(k);
    let mut values = Vec::with_capacity(take);
    let mut vectors = Vec::with_capacity(take);
    let mut residuals = Vec::with_capacity(take);
    for &i in order.iter().take(take) {
        let s = eig.eigenvectors.column(i);
        let mut v = vec![0.0; n];
        for (c, qc) in s.iter().zip(&q) {
            for (x, y) in v.iter_mut().zip(qc) {
                *x += c * y;
            }
        }
        let nv = norm(&v);
        values.push(eig.eigenvalues[i]);
        vectors.push(v.into_iter().map(|x| x / nv).collect());
        residuals.push((last_beta * s[k - 1]).abs());
    }
    Ok(RitzPairs {
        values,
        vectors,
        residuals,
        krylov_dim: k,
    })
}
