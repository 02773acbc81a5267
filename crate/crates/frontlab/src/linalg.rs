//! Bordered banded solves, shift-invert Arnoldi and inverse iteration for the
//! pencil (K, B) with B = diag(mass, 0) when a border is present.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::banded::{Banded, BandedLu, Scalar};
use crate::error::{Error, Result};

/// Optional rank-one border: an extra unknown s entering the rows through
/// `col` and an extra equation `row · x = q`.
#[derive(Clone, Debug)]
pub struct Border {
    pub col: Vec<f64>,
    pub row: Vec<f64>,
}

fn dotr<T: Scalar>(a: &[f64], b: &[T]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        s += *y * T::from_real(*x);
    }
    s
}

/// LU of [K, C; R, D] by block elimination with iterative refinement, where
/// C and R hold one column and one row per border.
pub struct BorderedLu<T: Scalar> {
    k: Banded<T>,
    lu: BandedLu<T>,
    cols: Vec<Vec<f64>>,
    rows: Vec<Vec<f64>>,
    corner: Vec<Vec<f64>>,
    /// K⁻¹ C, one vector per border.
    y: Vec<Vec<T>>,
    schur: Option<nalgebra::linalg::LU<T, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl<T: Scalar> BorderedLu<T> {
    pub fn new(k: Banded<T>, border: Option<Border>) -> Result<Self> {
        match border {
            Some(b) => Self::with_borders(k, vec![b.col], vec![b.row]),
            None => Self::with_borders(k, Vec::new(), Vec::new()),
        }
    }

    pub fn with_borders(k: Banded<T>, cols: Vec<Vec<f64>>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = cols.len();
        Self::with_corner(k, cols, rows, vec![vec![0.0; m]; m])
    }

    /// Borders with a dense m×m corner block D.
    pub fn with_corner(k: Banded<T>, cols: Vec<Vec<f64>>, rows: Vec<Vec<f64>>, corner: Vec<Vec<f64>>) -> Result<Self> {
        if cols.len() != rows.len() {
            return Err(Error::Shape { expected: cols.len(), got: rows.len() });
        }
        if corner.len() != cols.len() || corner.iter().any(|r| r.len() != cols.len()) {
            return Err(Error::Shape { expected: cols.len(), got: corner.len() });
        }
        let lu = k.clone().lu()?;
        let m = cols.len();
        let y: Vec<Vec<T>> = cols
            .iter()
            .map(|c| lu.solve(&c.iter().map(|&v| T::from_real(v)).collect::<Vec<T>>()))
            .collect();
        let schur = if m > 0 {
            let s = DMatrix::<T>::from_fn(m, m, |i, j| dotr(&rows[i], &y[j]) - T::from_real(corner[i][j]));
            let lu_s = s.lu();
            let det = lu_s.determinant();
            if det.modulus() == 0.0 || !det.modulus().is_finite() {
                return Err(Error::Solver("singular bordered system".into()));
            }
            Some(lu_s)
        } else {
            None
        };
        Ok(BorderedLu { k, lu, cols, rows, corner, y, schur })
    }

    pub fn dim(&self) -> usize {
        self.k.dim()
    }

    fn solve_once(&self, r: &[T], q: &[T]) -> (Vec<T>, Vec<T>) {
        let mut x = self.lu.solve(r);
        let Some(schur) = &self.schur else { return (x, Vec::new()) };
        let rhs = DVector::<T>::from_fn(q.len(), |i, _| dotr(&self.rows[i], &x) - q[i]);
        let s = schur.solve(&rhs).unwrap_or(rhs);
        for (yj, sj) in self.y.iter().zip(s.iter()) {
            for (xi, yi) in x.iter_mut().zip(yj) {
                *xi -= *sj * *yi;
            }
        }
        (x, s.iter().copied().collect())
    }

    /// Solves K x + C s = r, R x = q for (x, s).
    pub fn solve_multi(&self, r: &[T], q: &[T]) -> (Vec<T>, Vec<T>) {
        let (mut x, mut s) = self.solve_once(r, q);
        if self.cols.is_empty() {
            return (x, s);
        }
        let scale = r.iter().fold(0.0f64, |m, v| m.max(v.modulus())).max(1e-300);
        for _ in 0..3 {
            let mut res = self.k.matvec(&x);
            for (ri, (resi, rhs)) in res.iter_mut().zip(r).enumerate() {
                let mut acc = *rhs - *resi;
                for (c, sj) in self.cols.iter().zip(&s) {
                    acc -= *sj * T::from_real(c[ri]);
                }
                *resi = acc;
            }
            let qres: Vec<T> = self
                .rows
                .iter()
                .zip(&self.corner)
                .zip(q)
                .map(|((row, d), qi)| {
                    let mut v = *qi - dotr(row, &x);
                    for (dj, sj) in d.iter().zip(&s) {
                        v -= *sj * T::from_real(*dj);
                    }
                    v
                })
                .collect();
            let rn = res.iter().fold(0.0f64, |m, v| m.max(v.modulus()));
            let qn = qres.iter().fold(0.0f64, |m, v| m.max(v.modulus()));
            let qs = q.iter().fold(1.0f64, |m, v| m.max(v.modulus()));
            if rn <= 1e-15 * scale && qn <= 1e-15 * qs {
                break;
            }
            let (dx, ds) = self.solve_once(&res, &qres);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += *di;
            }
            for (si, di) in s.iter_mut().zip(&ds) {
                *si += *di;
            }
        }
        (x, s)
    }

    /// Single-border form of `solve_multi`.
    pub fn solve(&self, r: &[T], q: T) -> (Vec<T>, T) {
        if self.cols.is_empty() {
            return (self.lu.solve(r), T::zero());
        }
        let mut qv = vec![T::zero(); self.cols.len()];
        qv[0] = q;
        let (x, s) = self.solve_multi(r, &qv);
        (x, s[0])
    }
}

/// Shift-invert generalized eigenproblem K0 x + col s = λ mass x, row · x = 0.
pub struct Pencil<'a> {
    pub k0: &'a Banded<f64>,
    pub mass: &'a [f64],
    pub border: Option<Border>,
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: Complex64,
    pub vector: Vec<Complex64>,
    /// ‖mass⁻¹(K0 v + col s) − λ v‖ / ‖v‖ (Euclidean).
    pub residual: f64,
}

fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5).collect()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl<'a> Pencil<'a> {
    fn shifted<T: Scalar>(&self, sigma: T) -> Banded<T> {
        let k: Banded<T> = self.k0.map(|v| T::from_real(v));
        k.add_diag(-sigma, self.mass)
    }

    /// Eigenpairs nearest `sigma` (real shift), `nev` of them, from a Krylov space of size `m`.
    pub fn eigs_near(&self, sigma: f64, nev: usize, m: usize, seed: u64) -> Result<Vec<EigenPair>> {
        let n = self.k0.dim();
        let m = m.min(n).max(nev + 2);
        let op = BorderedLu::new(self.shifted(sigma), self.border.clone())?;
        let apply = |x: &[f64]| -> Vec<f64> {
            let r: Vec<f64> = x.iter().zip(self.mass).map(|(a, b)| a * b).collect();
            op.solve(&r, 0.0).0
        };
        // Arnoldi with one pass of reorthogonalization
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut h = DMatrix::<f64>::zeros(m + 1, m);
        let mut start = apply(&random_vector(n, seed));
        let nrm = norm2(&start);
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::Solver("Arnoldi start vector vanished".into()));
        }
        start.iter_mut().for_each(|x| *x /= nrm);
        v.push(start);
        let mut dim = m;
        for j in 0..m {
            let mut w = apply(&v[j]);
            for _pass in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let c: f64 = vi.iter().zip(&w).map(|(a, b)| a * b).sum();
                    h[(i, j)] += c;
                    w.iter_mut().zip(vi).for_each(|(wk, vk)| *wk -= c * vk);
                }
            }
            let beta = norm2(&w);
            h[(j + 1, j)] = beta;
            if beta < 1e-13 * h[(j, j)].abs().max(1e-300) {
                dim = j + 1;
                break;
            }
            w.iter_mut().for_each(|x| *x /= beta);
            v.push(w);
        }
        let hm = h.view((0, 0), (dim, dim)).into_owned();
        let nus = hm.complex_eigenvalues();
        let mut cand: Vec<Complex64> = nus
            .iter()
            .filter(|nu| nu.norm() > 0.0)
            .map(|nu| Complex64::new(sigma, 0.0) + 1.0 / *nu)
            .collect();
        cand.sort_by(|a, b| (a - sigma).norm().total_cmp(&(b - sigma).norm()));
        let mut out: Vec<EigenPair> = Vec::new();
        for lam in cand.into_iter() {
            if out.len() >= nev {
                break;
            }
            if lam.im < -1e-14 * lam.norm().max(1e-300) {
                continue; // added as the conjugate of its partner
            }
            let pair = self.refine(lam, seed ^ 0x5eed)?;
            let is_dup = out.iter().any(|p| (p.value - pair.value).norm() <= 1e-8 * pair.value.norm().max(1e-12));
            if is_dup {
                continue;
            }
            let real = pair.value.im.abs() <= 1e-12 * pair.value.norm().max(1e-300);
            if real {
                let mut p = pair;
                p.value.im = 0.0;
                out.push(p);
            } else {
                let conj = EigenPair {
                    value: pair.value.conj(),
                    vector: pair.vector.iter().map(|z| z.conj()).collect(),
                    residual: pair.residual,
                };
                out.push(pair);
                out.push(conj);
            }
        }
        out.sort_by(|a, b| {
            (a.value - sigma).norm().total_cmp(&(b.value - sigma).norm()).then(a.value.im.total_cmp(&b.value.im))
        });
        out.truncate(nev.max(1));
        Ok(out)
    }

    /// Sum and product of the two eigenvalues nearest the real shift `sigma`,
    /// from a 2×2 projection after block inverse iteration. Unlike individual
    /// eigenvalues these stay well conditioned at a defective double eigenvalue.
    pub fn pair_invariants(&self, sigma: f64, iterations: usize, seed: u64) -> Result<(f64, f64)> {
        let n = self.k0.dim();
        let op = BorderedLu::new(self.shifted(sigma), self.border.clone())?;
        let apply = |x: &[f64]| -> Vec<f64> {
            let r: Vec<f64> = x.iter().zip(self.mass).map(|(a, b)| a * b).collect();
            op.solve(&r, 0.0).0
        };
        let orth = |mut a: Vec<f64>, mut b: Vec<f64>| -> (Vec<f64>, Vec<f64>) {
            let na = norm2(&a);
            a.iter_mut().for_each(|x| *x /= na);
            for _ in 0..2 {
                let c: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                b.iter_mut().zip(&a).for_each(|(y, x)| *y -= c * x);
            }
            let nb = norm2(&b);
            b.iter_mut().for_each(|x| *x /= nb);
            (a, b)
        };
        let (mut q0, mut q1) = orth(random_vector(n, seed), random_vector(n, seed ^ 0x9e37));
        for _ in 0..iterations {
            let (a, b) = orth(apply(&q0), apply(&q1));
            q0 = a;
            q1 = b;
        }
        let (a0, a1) = (apply(&q0), apply(&q1));
        let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        let h = nalgebra::Matrix2::new(d(&q0, &a0), d(&q0, &a1), d(&q1, &a0), d(&q1, &a1));
        // eigenvalues of h are 1/(λ − σ)
        let det = h.determinant();
        let tr = h.trace();
        if !(det.abs() > 0.0) {
            return Err(Error::Solver("degenerate projected pair".into()));
        }
        // μ = 1/(λ−σ): Σ(λ−σ) = tr/det, Π(λ−σ) = 1/det
        let sum_shifted = tr / det;
        let prod_shifted = 1.0 / det;
        let sum = sum_shifted + 2.0 * sigma;
        let prod = prod_shifted + sigma * sum_shifted + sigma * sigma;
        Ok((sum, prod))
    }

    /// Inverse iteration at a fixed complex shift with a Rayleigh-type update.
    pub fn refine(&self, lam0: Complex64, seed: u64) -> Result<EigenPair> {
        let n = self.k0.dim();
        let mut lam = lam0;
        let mut x: Vec<Complex64> = random_vector(n, seed).into_iter().map(|r| Complex64::new(r, 0.0)).collect();
        let mut s = Complex64::new(0.0, 0.0);
        for outer in 0..2 {
            let (op, shift) = match BorderedLu::new(self.shifted(lam), self.border.clone()) {
                Ok(op) => (op, lam),
                Err(_) => {
                    // shift hit the eigenvalue to working precision
                    let bumped = lam + Complex64::new(1e-10 * lam.norm().max(1e-14), 0.0);
                    (BorderedLu::new(self.shifted(bumped), self.border.clone())?, bumped)
                }
            };
            for _ in 0..(if outer == 0 { 3 } else { 2 }) {
                let r: Vec<Complex64> = x.iter().zip(self.mass).map(|(a, b)| *a * *b).collect();
                let (y, sy) = op.solve(&r, Complex64::new(0.0, 0.0));
                let xy: Complex64 = x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
                let xx: f64 = x.iter().map(|a| a.norm_sqr()).sum();
                let ny = y.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                if !(ny > 0.0) || !ny.is_finite() {
                    return Err(Error::Solver("inverse iteration broke down".into()));
                }
                lam = shift + xx / xy;
                // fix the phase by the largest entry
                let imax = (0..n).max_by(|&a, &b| y[a].norm().total_cmp(&y[b].norm())).unwrap();
                let phase = y[imax] / y[imax].norm();
                x = y.iter().map(|z| *z / (phase * ny)).collect();
                s = sy / (phase * ny);
            }
        }
        // residual of mass⁻¹(K0 x + col s) − λ x
        let k: Banded<Complex64> = self.k0.map(|v| Complex64::new(v, 0.0));
        let kx = k.matvec(&x);
        let mut res = 0.0;
        let mut nx = 0.0;
        for i in 0..n {
            let mut r = kx[i];
            if let Some(b) = &self.border {
                r += s * b.col[i];
            }
            let d = r / self.mass[i] - lam * x[i];
            res += d.norm_sqr();
            nx += x[i].norm_sqr();
        }
        Ok(EigenPair { value: lam, vector: x, residual: (res / nx).sqrt() })
    }
}

/// Solves (K0 − σ mass) with the border as a plain linear system (real shift).
pub fn bordered_solve(
    k0: &Banded<f64>,
    border: Option<Border>,
    r: &[f64],
    q: f64,
) -> Result<(Vec<f64>, f64)> {
    let op = BorderedLu::new(k0.clone(), border)?;
    Ok(op.solve(r, q))
}

/// Null vector of a nearly singular banded matrix by inverse iteration.
pub fn near_null_vector(k: &Banded<f64>, seed: u64) -> Result<Vec<f64>> {
    let lu = k.clone().lu()?;
    let mut x = random_vector(k.dim(), seed);
    for _ in 0..4 {
        lu.solve_in_place(&mut x);
        let n = norm2(&x);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Solver("null-vector iteration broke down".into()));
        }
        x.iter_mut().for_each(|v| *v /= n);
    }
    Ok(x)
}

/// Dense helper used in tests: eigenvalues of a small real matrix.
pub fn dense_eigenvalues(a: &DMatrix<f64>) -> DVector<Complex64> {
    a.complex_eigenvalues()
}
