//! Closed-form singular-limit quantities: kappas, existence condition,
//! leading-order front, Evans function and its Taylor table, and the
//! leading-order (generalized) eigenfunctions.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::model::{FieldState, Grid, Params};

/// Tolerance on |κ1|, |κ2| for points produced by `organizing_center`.
pub const OC_TOL_COMPUTED: f64 = 1e-10;
/// Tolerance on |κ1|, |κ2| for user-supplied parameters.
pub const OC_TOL_USER: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KappaTriple {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
}

pub fn kappas(p: &Params) -> KappaTriple {
    let (t, th, d) = (p.tau_hat, p.theta_hat, p.diff_D);
    KappaTriple {
        kappa1: p.alpha * t + p.beta * th / d - 2.0 * SQRT_2 / 3.0,
        kappa2: p.alpha * t * t + p.beta * th * th / d,
        kappa3: p.alpha * t.powi(3) + p.beta * th.powi(3) / d.powi(3),
    }
}

/// Gradients of (κ1, κ2, κ3) with respect to (α, β).
pub fn kappa_gradients(tau_hat: f64, theta_hat: f64, diff_d: f64) -> [[f64; 2]; 3] {
    let (t, th, d) = (tau_hat, theta_hat, diff_d);
    [[t, th / d], [t * t, th * th / d], [t.powi(3), th.powi(3) / d.powi(3)]]
}

fn check_distinct(tau_hat: f64, theta_hat: f64) -> Result<()> {
    if (tau_hat - theta_hat).abs() <= 1e-12 * tau_hat.abs().max(theta_hat.abs()) {
        return Err(Error::Degenerate(format!("tau = theta = {tau_hat}")));
    }
    Ok(())
}

/// (α, β) with κ1 = κ2 = 0.
pub fn organizing_center(tau_hat: f64, theta_hat: f64, diff_d: f64) -> Result<(f64, f64)> {
    check_distinct(tau_hat, theta_hat)?;
    let k = 2.0 * SQRT_2 / 3.0;
    let alpha = k * theta_hat / (tau_hat * (theta_hat - tau_hat));
    let beta = k * diff_d * tau_hat / ((tau_hat - theta_hat) * theta_hat);
    Ok((alpha, beta))
}

/// Whether κ1 and κ2 both vanish within `tol`.
pub fn is_organizing_center(p: &Params, tol: f64) -> bool {
    let k = kappas(p);
    k.kappa1.abs() <= tol && k.kappa2.abs() <= tol
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Leading-order front: tanh interface blended into the ±1 outer states over a
/// window of width √ε centred at |x| = √ε, exponential slow tails in v and w.
pub fn asymptotic_front(p: &Params, grid: &Grid) -> FieldState {
    let n = grid.len();
    let se = p.epsilon.sqrt();
    let mut z = FieldState::zeros(n);
    for (i, &x) in grid.nodes.iter().enumerate() {
        let s = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        let chi = smoothstep((x.abs() - 0.5 * se) / se);
        z.u[i] = (1.0 - chi) * (x / (SQRT_2 * p.epsilon)).tanh() + chi * s;
        z.v[i] = s * (1.0 - (-x.abs()).exp());
        z.w[i] = s * (1.0 - (-x.abs() / p.diff_D).exp());
    }
    z
}

/// Leading-order existence condition Γ(c); fronts with speed ε²c satisfy Γ(c) = 0.
pub fn existence_gamma(c: f64, p: &Params) -> f64 {
    let (t, th, d) = (p.tau_hat, p.theta_hat, p.diff_D);
    p.alpha * t * c / (c * c * t * t + 4.0).sqrt()
        + p.beta * th * c / (d * (c * c * th * th / (d * d) + 4.0).sqrt())
        + p.gamma
        - SQRT_2 / 3.0 * c
}

/// Taylor coefficients of Γ at c = 0 (odd powers 1, 3, 5).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExistenceTaylor {
    pub c1: f64,
    pub c3: f64,
    pub c5: f64,
}

impl ExistenceTaylor {
    pub fn eval(&self, c: f64) -> f64 {
        let c2 = c * c;
        c * (self.c1 + c2 * (self.c3 + c2 * self.c5))
    }
}

pub fn taylor_existence(p: &Params) -> Result<ExistenceTaylor> {
    if p.gamma != 0.0 {
        return Err(Error::Unsupported(format!(
            "Taylor form of the existence condition needs gamma = 0, got {}",
            p.gamma
        )));
    }
    let k = kappas(p);
    let (t, th, d) = (p.tau_hat, p.theta_hat, p.diff_D);
    Ok(ExistenceTaylor {
        c1: 0.5 * k.kappa1,
        c3: -k.kappa3 / 16.0,
        c5: 3.0 / 256.0 * (p.alpha * t.powi(5) + p.beta * th.powi(5) / d.powi(5)),
    })
}

fn checked_sqrt(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re <= 0.0 {
        return Err(Error::BranchCut(format!("{z}")));
    }
    Ok(z.sqrt())
}

/// One slow-field contribution and its λ̂-derivative.
fn dtilde(lam: Complex64, rho1: f64, rho2: f64) -> Result<(Complex64, Complex64)> {
    let a = rho1 * rho1 + 4.0;
    let z = a + 4.0 * rho2 * lam;
    let s = checked_sqrt(z)?;
    let val = Complex64::new(1.0 / a.sqrt(), 0.0) - 1.0 / s;
    let der = 2.0 * rho2 / (s * z);
    Ok((val, der))
}

fn evans_with_derivative(lam: Complex64, c: f64, p: &Params) -> Result<(Complex64, Complex64)> {
    let (t, th, d) = (p.tau_hat, p.theta_hat, p.diff_D);
    let (v1, d1) = dtilde(lam, c * t, t)?;
    let (v2, d2) = dtilde(lam, c * th / d, th)?;
    let k = SQRT_2 / 6.0;
    let val = -k * lam + p.alpha * v1 + (p.beta / d) * v2;
    let der = Complex64::new(-k, 0.0) + p.alpha * d1 + (p.beta / d) * d2;
    Ok((val, der))
}

/// Evans function of a front travelling with speed ε²c (moving-front normalization).
pub fn evans_eval(lambda_hat: Complex64, c: f64, p: &Params) -> Result<Complex64> {
    evans_with_derivative(lambda_hat, c, p).map(|r| r.0)
}

/// dD/dλ̂ of `evans_eval`.
pub fn evans_derivative(lambda_hat: Complex64, c: f64, p: &Params) -> Result<Complex64> {
    evans_with_derivative(lambda_hat, c, p).map(|r| r.1)
}

/// Evans function of the stationary front in the static normalization
/// (twice `evans_eval` at c = 0).
pub fn evans_static(lambda_hat: Complex64, p: &Params) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let sv = checked_sqrt(p.tau_hat * lambda_hat + 1.0)?;
    let sw = checked_sqrt(p.theta_hat * lambda_hat + 1.0)?;
    Ok(-SQRT_2 / 3.0 * lambda_hat + p.alpha * (one - 1.0 / sv) + p.beta / p.diff_D * (one - 1.0 / sw))
}

/// Taylor table of E = D/λ̂ in (c², λ̂): a_ij multiplies c^i λ̂^j.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvansCoeffs {
    pub a00: f64,
    pub a20: f64,
    pub a01: f64,
    pub a21: f64,
    pub a02: f64,
    pub a03: f64,
}

pub fn evans_taylor_aij(p: &Params) -> EvansCoeffs {
    let k = kappas(p);
    let (t, th, d, a, b) = (p.tau_hat, p.theta_hat, p.diff_D, p.alpha, p.beta);
    EvansCoeffs {
        a00: 0.25 * k.kappa1,
        a20: -3.0 / 32.0 * k.kappa3,
        a01: -3.0 / 16.0 * k.kappa2,
        a21: 15.0 / 128.0 * (a * t.powi(4) + b * th.powi(4) / d.powi(3)),
        a02: 5.0 / 32.0 * (a * t.powi(3) + b * th.powi(3) / d),
        a03: -35.0 / 256.0 * (a * t.powi(4) + b * th.powi(4) / d),
    }
}

/// Coefficients a0..a3 of E(λ̂, c) = Σ a_j(c) λ̂^j at fixed c.
pub fn evans_series_in_lambda(c: f64, p: &Params) -> [f64; 4] {
    let f = |rho: f64| 1.0 / (rho * rho + 4.0).sqrt();
    let (t, th, d, a, b) = (p.tau_hat, p.theta_hat, p.diff_D, p.alpha, p.beta);
    let (fv, fw) = (f(c * t), f(c * th / d));
    let bd = b / d;
    [
        -SQRT_2 / 6.0 + 2.0 * a * t * fv.powi(3) + 2.0 * bd * th * fw.powi(3),
        -6.0 * a * t * t * fv.powi(5) - 6.0 * bd * th * th * fw.powi(5),
        20.0 * a * t.powi(3) * fv.powi(7) + 20.0 * bd * th.powi(3) * fw.powi(7),
        -70.0 * a * t.powi(4) * fv.powi(9) - 70.0 * bd * th.powi(4) * fw.powi(9),
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct EvansRoots {
    /// Roots inside the search region, repeated by multiplicity.
    pub roots: Vec<Complex64>,
    /// Multiplicity of the root at the origin.
    pub zero_multiplicity: usize,
    /// Total count from the argument principle.
    pub count: usize,
    /// More than three roots: the parameters have left the small-eigenvalue regime.
    pub anomaly: bool,
    pub radius: f64,
    /// Left edge of the search region (keeps square roots off their cuts).
    pub left_edge: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct EvansRootOptions {
    pub radius: f64,
    /// Relative tolerance for deciding that a0, a1 vanish.
    pub zero_tol: f64,
}

impl Default for EvansRootOptions {
    fn default() -> Self {
        EvansRootOptions { radius: 5.0, zero_tol: 1e-10 }
    }
}

pub fn evans_roots(p: &Params, c: f64) -> Result<EvansRoots> {
    evans_roots_with(p, c, EvansRootOptions::default())
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Contour of the region {|λ| < R, Re λ > x0} as (point, tangent-weight) pairs.
fn contour_nodes(radius: f64, x0: f64, panels: usize) -> Vec<(Complex64, Complex64)> {
    let (gx, gw) = gauss_legendre(16);
    let mut out = Vec::new();
    let y0 = (radius * radius - x0 * x0).sqrt();
    let th0 = y0.atan2(x0);
    // arc, counter-clockwise from -th0 to th0
    let dth = 2.0 * th0 / panels as f64;
    for k in 0..panels {
        let a = -th0 + k as f64 * dth;
        for (x, w) in gx.iter().zip(&gw) {
            let th = a + 0.5 * dth * (x + 1.0);
            let z = Complex64::from_polar(radius, th);
            let dz = Complex64::new(0.0, 1.0) * z * (0.5 * dth * w);
            out.push((z, dz));
        }
    }
    // vertical segment from (x0, y0) down to (x0, -y0), graded towards the real axis
    let mut breaks = vec![y0];
    let mut y = y0;
    while y > 1e-4 * y0 {
        y *= 0.5;
        breaks.push(y);
    }
    let mut all: Vec<f64> = breaks.clone();
    all.extend(breaks.iter().rev().map(|b| -b));
    for win in all.windows(2) {
        let (ya, yb) = (win[0], win[1]);
        let sub = panels.max(1) / 8 + 1;
        for s in 0..sub {
            let y1 = ya + (yb - ya) * s as f64 / sub as f64;
            let y2 = ya + (yb - ya) * (s + 1) as f64 / sub as f64;
            for (x, w) in gx.iter().zip(&gw) {
                let yy = 0.5 * (y1 + y2) + 0.5 * (y2 - y1) * x;
                let dz = Complex64::new(0.0, 0.5 * (y2 - y1) * w);
                out.push((Complex64::new(x0, yy), dz));
            }
        }
    }
    out
}

/// Power sums Σ r^k over roots of E = D/λ̂ inside the contour, k = 0..=kmax.
fn power_sums(p: &Params, c: f64, nodes: &[(Complex64, Complex64)], kmax: usize) -> Result<Vec<Complex64>> {
    let mut s = vec![Complex64::new(0.0, 0.0); kmax + 1];
    for &(z, dz) in nodes {
        let (d, dd) = evans_with_derivative(z, c, p)?;
        let g = dd / d - 1.0 / z;
        let mut zk = Complex64::new(1.0, 0.0);
        for sk in s.iter_mut() {
            *sk += zk * g * dz;
            zk *= z;
        }
    }
    let scale = Complex64::new(0.0, -1.0 / (2.0 * std::f64::consts::PI));
    Ok(s.into_iter().map(|v| v * scale).collect())
}

/// Roots of the monic polynomial with the given power sums (Newton identities).
fn roots_from_power_sums(s: &[Complex64], m: usize) -> Vec<Complex64> {
    if m == 0 {
        return Vec::new();
    }
    // e_k elementary symmetric polynomials
    let mut e = vec![Complex64::new(1.0, 0.0); m + 1];
    for k in 1..=m {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 1..=k {
            let sign = if (i - 1) % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * e[k - i] * s[i];
        }
        e[k] = acc / k as f64;
    }
    // companion matrix of x^m - e1 x^{m-1} + e2 x^{m-2} - ...
    let mut comp = DMatrix::<Complex64>::zeros(m, m);
    for k in 0..m {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        comp[(0, k)] = sign * e[k + 1];
        if k + 1 < m {
            comp[(k + 1, k)] = Complex64::new(1.0, 0.0);
        }
    }
    comp.schur().eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default()
}

pub fn evans_roots_with(p: &Params, c: f64, opts: EvansRootOptions) -> Result<EvansRoots> {
    let (t, th, d) = (p.tau_hat, p.theta_hat, p.diff_D);
    let branch_v = -(c * c * t * t + 4.0) / (4.0 * t);
    let branch_w = -(c * c * th * th / (d * d) + 4.0) / (4.0 * th);
    let x0 = 0.8 * branch_v.max(branch_w);
    if opts.radius <= x0.abs() {
        return Err(Error::InvalidParams(format!("radius {} too small", opts.radius)));
    }

    // multiplicity of the origin from the λ̂-series of E
    let a = evans_series_in_lambda(c, p);
    let scale = 1.0 + p.alpha.abs() * t.powi(4) + p.beta.abs() * th.powi(4) / d;
    let mut zero_mult = 1;
    for aj in a.iter().take(3) {
        if aj.abs() <= opts.zero_tol * scale {
            zero_mult += 1;
        } else {
            break;
        }
    }

    let mut panels = 32;
    let (count_e, sums) = loop {
        let nodes = contour_nodes(opts.radius, x0, panels);
        let s = power_sums(p, c, &nodes, 6)?;
        let n = s[0].re.round();
        if (s[0].re - n).abs() < 1e-6 && s[0].im.abs() < 1e-6 {
            break (n as i64, s);
        }
        panels *= 2;
        if panels > 4096 {
            return Err(Error::Solver(format!(
                "argument principle did not settle to an integer: {}",
                s[0]
            )));
        }
    };
    let count_e = count_e.max(0) as usize;
    let count = count_e + 1;
    let anomaly = count > 3;
    let rest = count_e.saturating_sub(zero_mult - 1);

    let mut roots = vec![Complex64::new(0.0, 0.0); zero_mult.min(count)];
    if rest > 0 && rest <= 6 {
        let approx = roots_from_power_sums(&sums, rest);
        for r0 in approx {
            roots.push(polish(r0, c, p, zero_mult - 1));
        }
    }
    roots.sort_by(|x, y| x.norm().total_cmp(&y.norm()).then(x.im.total_cmp(&y.im)));
    Ok(EvansRoots { roots, zero_multiplicity: zero_mult, count, anomaly, radius: opts.radius, left_edge: x0 })
}

/// Newton on E/λ̂^m for a simple root away from the origin.
fn polish(mut z: Complex64, c: f64, p: &Params, m: usize) -> Complex64 {
    for _ in 0..30 {
        if z.norm() < 1e-14 {
            break;
        }
        let Ok((d, dd)) = evans_with_derivative(z, c, p) else { break };
        // g = D / λ^(m+1); g'/g = D'/D - (m+1)/λ
        let ratio = dd / d - (m as f64 + 1.0) / z;
        let step = 1.0 / ratio;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        z -= step;
        if step.norm() <= 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    z
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Region {
    SlowMinus,
    Fast,
    SlowPlus,
}

/// Leading-order eigenfunction and generalized eigenfunctions as point evaluators.
#[derive(Clone, Debug)]
pub struct ClosedEigenfunctions {
    pub params: Params,
    pub lambda_hat: f64,
    pub h_v: f64,
    pub h_w: f64,
    pub has_psi: bool,
    pub has_psi_tilde: bool,
}

pub fn closed_eigenfunctions(p: &Params, lambda_hat: f64) -> Result<ClosedEigenfunctions> {
    let (sv, sw) = (p.tau_hat * lambda_hat + 1.0, p.theta_hat * lambda_hat + 1.0);
    if sv <= 0.0 || sw <= 0.0 {
        return Err(Error::BranchCut(format!("lambda_hat = {lambda_hat}")));
    }
    let k = kappas(p);
    Ok(ClosedEigenfunctions {
        params: *p,
        lambda_hat,
        h_v: 1.0 / sv.sqrt(),
        h_w: 1.0 / (p.diff_D * sw.sqrt()),
        has_psi: k.kappa1.abs() <= OC_TOL_USER,
        has_psi_tilde: k.kappa1.abs() <= OC_TOL_USER && k.kappa2.abs() <= OC_TOL_USER,
    })
}

impl ClosedEigenfunctions {
    pub fn region(&self, x: f64) -> Region {
        let se = self.params.epsilon.sqrt();
        if x < -se {
            Region::SlowMinus
        } else if x > se {
            Region::SlowPlus
        } else {
            Region::Fast
        }
    }

    /// Φ at x. Slow tails decay at the rate of the eigenvalue ODE, √(τ̂λ̂+1) and
    /// √(θ̂λ̂+1)/D, which reduce to 1 and 1/D at λ̂ = 0.
    pub fn phi(&self, x: f64) -> [f64; 3] {
        let p = &self.params;
        let rv = (p.tau_hat * self.lambda_hat + 1.0).sqrt();
        let rw = (p.theta_hat * self.lambda_hat + 1.0).sqrt() / p.diff_D;
        match self.region(x) {
            Region::Fast => {
                let s = 1.0 / (x / (SQRT_2 * p.epsilon)).cosh();
                [0.5 * SQRT_2 / p.epsilon * s * s, self.h_v, self.h_w]
            }
            _ => [0.0, self.h_v * (-rv * x.abs()).exp(), self.h_w * (-rw * x.abs()).exp()],
        }
    }

    fn slow_u(&self, v: f64, w: f64) -> f64 {
        self.params.epsilon * (-0.5 * self.params.alpha * v - 0.5 * self.params.beta * w)
    }

    /// First generalized eigenfunction (requires κ1 = 0).
    pub fn psi(&self, x: f64) -> Result<[f64; 3]> {
        if !self.has_psi {
            return Err(Error::Precondition("first generalized eigenfunction needs kappa1 = 0".into()));
        }
        let p = &self.params;
        let (t, th, d) = (p.tau_hat, p.theta_hat, p.diff_D);
        Ok(match self.region(x) {
            Region::Fast => [p.epsilon / (3.0 * SQRT_2), -0.5 * t, -0.5 * th / d],
            _ => {
                let ax = x.abs();
                let v = -0.5 * t * (1.0 + ax) * (-ax).exp();
                let w = -0.5 * th / d * (1.0 + ax / d) * (-ax / d).exp();
                [self.slow_u(v, w), v, w]
            }
        })
    }

    /// Second generalized eigenfunction (requires κ1 = κ2 = 0).
    pub fn psi_tilde(&self, x: f64) -> Result<[f64; 3]> {
        if !self.has_psi_tilde {
            return Err(Error::Precondition(
                "second generalized eigenfunction needs kappa1 = kappa2 = 0".into(),
            ));
        }
        let p = &self.params;
        let (t, th, d) = (p.tau_hat, p.theta_hat, p.diff_D);
        Ok(match self.region(x) {
            Region::Fast => [0.0, 3.0 * t * t / 8.0, 3.0 * th * th / (8.0 * d)],
            _ => {
                let ax = x.abs();
                let v = t * t / 8.0 * (ax * ax + 3.0 * ax + 3.0) * (-ax).exp();
                let w = th * th / (8.0 * d.powi(3)) * (ax * ax + 3.0 * d * ax + 3.0 * d * d) * (-ax / d).exp();
                [self.slow_u(v, w), v, w]
            }
        })
    }
}
