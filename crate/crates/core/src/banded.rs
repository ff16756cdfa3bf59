//! Banded matrices and LU factorization with partial pivoting.

use nalgebra::ComplexField;

use crate::{Error, Result};

/// Scalars the banded routines work with (`f64` and `Complex64`).
pub trait Scalar: ComplexField<RealField = f64> + Copy {}
impl<T: ComplexField<RealField = f64> + Copy> Scalar for T {}

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored by
/// columns with room for the fill-in produced by pivoting.
#[derive(Clone, Debug)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ld,
            data: vec![T::zero(); ld * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        j * self.ld + (i + self.kl + self.ku - j)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.data[self.at(i, j)]
        } else {
            T::zero()
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside the band");
        let k = self.at(i, j);
        self.data[k] = v;
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let xj = x[j];
            for i in lo..=hi {
                y[i] += self.data[self.at(i, j)] * xj;
            }
        }
        y
    }

    /// Adds `s` to every diagonal entry.
    pub fn shift_diagonal(&mut self, s: T) {
        for i in 0..self.n {
            let k = self.at(i, i);
            self.data[k] += s;
        }
    }

    pub fn lu(mut self) -> Result<BandLu<T>> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut piv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = j;
            let mut best = self.data[self.at(j, j)].modulus();
            for i in j + 1..=j + km {
                let m = self.data[self.at(i, j)].modulus();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            piv[j] = p;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular);
            }
            ju = ju.max((p + ku).min(n - 1));
            if p != j {
                for c in j..=ju {
                    let (a, b) = (self.at(j, c), self.at(p, c));
                    self.data.swap(a, b);
                }
            }
            let inv = T::one() / self.data[self.at(j, j)];
            for i in j + 1..=j + km {
                let k = self.at(i, j);
                self.data[k] *= inv;
            }
            for c in j + 1..=ju {
                let u = self.data[self.at(j, c)];
                if u == T::zero() {
                    continue;
                }
                for i in j + 1..=j + km {
                    let l = self.data[self.at(i, j)];
                    let k = self.at(i, c);
                    self.data[k] -= l * u;
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

/// LU factors of a [`BandMatrix`].
#[derive(Clone, Debug)]
pub struct BandLu<T> {
    m: BandMatrix<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> BandLu<T> {
    pub fn solve_in_place(&self, b: &mut [T]) {
        let m = &self.m;
        let n = m.n;
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            let km = m.kl.min(n - 1 - j);
            for i in j + 1..=j + km {
                b[i] -= m.data[m.at(i, j)] * bj;
            }
        }
        let w = m.kl + m.ku;
        for j in (0..n).rev() {
            b[j] /= m.data[m.at(j, j)];
            let bj = b[j];
            for i in j.saturating_sub(w)..j {
                b[i] -= m.data[m.at(i, j)] * bj;
            }
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
