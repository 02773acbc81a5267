//! Banded matrices with partial-pivoting LU, real or complex.

use nalgebra::ComplexField;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub trait Scalar: ComplexField<RealField = f64> + Copy {}
impl Scalar for f64 {}
impl Scalar for Complex64 {}

/// Square banded matrix. Row `i` keeps columns `i-kl ..= i+ku+kl`; the extra
/// `kl` upper diagonals hold fill-in produced by row swaps during factorization.
#[derive(Clone, Debug)]
pub struct Banded<T: Scalar> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> Banded<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Banded { n, kl, ku, width, data: vec![T::zero(); n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            T::zero()
        }
    }

    /// Adds `v` to entry (i, j). Panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![T::zero(); self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let j0 = i.saturating_sub(self.kl);
            let j1 = (i + self.ku).min(self.n - 1);
            let mut s = T::zero();
            for j in j0..=j1 {
                s += self.data[self.idx(i, j)] * x[j];
            }
            *yi = s;
        }
        y
    }

    pub fn transpose(&self) -> Banded<T> {
        let mut t = Banded::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.kl);
            let j1 = (i + self.ku).min(self.n - 1);
            for j in j0..=j1 {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Banded<U> {
        Banded {
            n: self.n,
            kl: self.kl,
            ku: self.ku,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Returns `self + s * diag(d)`.
    pub fn add_diag(&self, s: T, d: &[f64]) -> Banded<T> {
        let mut out = self.clone();
        for (i, &di) in d.iter().enumerate() {
            let k = out.idx(i, i);
            out.data[k] += s * T::from_real(di);
        }
        out
    }

    pub fn lu(mut self) -> Result<BandedLu<T>> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].modulus();
            for i in k + 1..=last {
                let m = self.data[self.idx(i, k)].modulus();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular(k));
            }
            piv[k] = p;
            let jend = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jend {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l == T::zero() {
                    continue;
                }
                for j in k + 1..=jend {
                    let kj = self.data[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.data[ij] -= l * kj;
                }
            }
        }
        Ok(BandedLu { m: self, piv })
    }
}

#[derive(Clone, Debug)]
pub struct BandedLu<T: Scalar> {
    m: Banded<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> BandedLu<T> {
    pub fn dim(&self) -> usize {
        self.m.n
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let a = &self.m;
        let n = a.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == T::zero() {
                continue;
            }
            for i in k + 1..=(k + a.kl).min(n - 1) {
                b[i] -= a.data[a.idx(i, k)] * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + a.kl + a.ku).min(n - 1) {
                s -= a.data[a.idx(i, j)] * b[j];
            }
            b[i] = s / a.data[a.idx(i, i)];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
