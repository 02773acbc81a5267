//! Three-component model, its grid discretization, residual and Jacobian.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::banded::Banded;
use crate::error::{Error, Result};

/// Model parameters. `diff_D` is the w-diffusion length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct Params {
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tau_hat: f64,
    pub theta_hat: f64,
    pub diff_D: f64,
}

pub const DEFAULT_EPSILON: f64 = 0.03;
pub const DEFAULT_TAU: f64 = 4.21;
pub const DEFAULT_THETA: f64 = 10.0;
pub const DEFAULT_D: f64 = 2.2;
pub const DEFAULT_L: f64 = 10.0;

impl Params {
    #[allow(non_snake_case)]
    pub fn new(
        epsilon: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
        tau_hat: f64,
        theta_hat: f64,
        diff_D: f64,
    ) -> Result<Self> {
        let p = Params { epsilon, alpha, beta, gamma, tau_hat, theta_hat, diff_D };
        p.validate()?;
        Ok(p)
    }

    /// Default time scales and diffusion (ε=0.03, τ̂=4.21, θ̂=10, D=2.2).
    pub fn defaults(alpha: f64, beta: f64) -> Self {
        Params {
            epsilon: DEFAULT_EPSILON,
            alpha,
            beta,
            gamma: 0.0,
            tau_hat: DEFAULT_TAU,
            theta_hat: DEFAULT_THETA,
            diff_D: DEFAULT_D,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.epsilon,
            self.alpha,
            self.beta,
            self.gamma,
            self.tau_hat,
            self.theta_hat,
            self.diff_D,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::InvalidParams(format!("epsilon = {} must be > 0", self.epsilon)));
        }
        if self.tau_hat <= 0.0 {
            return Err(Error::InvalidParams(format!("tau = {} must be > 0", self.tau_hat)));
        }
        if self.theta_hat <= 0.0 {
            return Err(Error::InvalidParams(format!("theta = {} must be > 0", self.theta_hat)));
        }
        if self.diff_D <= 1.0 {
            return Err(Error::InvalidParams(format!("D = {} must satisfy D > 1", self.diff_D)));
        }
        Ok(())
    }

    /// Soft check that the O(1) parameters are not comparable to ε.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let named = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("tau", self.tau_hat),
            ("theta", self.theta_hat),
            ("D", self.diff_D),
        ];
        for (name, v) in named {
            if v.abs() > 1.0 / self.epsilon {
                out.push(format!("{name} = {v} is large compared to 1/epsilon"));
            }
        }
        if self.epsilon > 0.2 {
            out.push(format!("epsilon = {} is not small", self.epsilon));
        }
        out
    }

    /// Diagonal of the mass matrix: (1, τ̂/ε², θ̂/ε²).
    pub fn mass_diag(&self) -> [f64; 3] {
        let e2 = self.epsilon * self.epsilon;
        [1.0, self.tau_hat / e2, self.theta_hat / e2]
    }
}

/// Symmetric node set on [-L, L], clustered at the origin by a sinh stretch.
#[derive(Clone, Debug)]
pub struct Grid {
    pub half_length: f64,
    pub nodes: Vec<f64>,
    /// Stretch factor `b` of x(s) = L sinh(b s) / sinh(b); 0 means uniform.
    pub stretch: f64,
    pub weights: Vec<f64>,
    lap: Vec<[f64; 3]>,
    d1: Vec<[f64; 3]>,
}

fn stretched_nodes(l: f64, n: usize, b: f64) -> Vec<f64> {
    let mut x = vec![0.0; n];
    let ds = 2.0 / (n - 1) as f64;
    for i in 0..n / 2 {
        let s = -1.0 + i as f64 * ds;
        let xi = if b < 1e-8 { l * s } else { l * (b * s).sinh() / b.sinh() };
        x[i] = xi;
        x[n - 1 - i] = -xi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    x[0] = -l;
    x[n - 1] = l;
    x
}

fn min_max_spacing(x: &[f64]) -> (f64, f64) {
    x.windows(2).fold((f64::INFINITY, 0.0f64), |(lo, hi), w| {
        let h = w[1] - w[0];
        (lo.min(h), hi.max(h))
    })
}

/// Largest spacing tolerated away from the interface.
pub const MAX_OUTER_SPACING: f64 = 0.5;

pub fn make_grid(half_length: f64, node_count: usize, epsilon: f64) -> Result<Grid> {
    if !(half_length > 0.0) || !(epsilon > 0.0) {
        return Err(Error::InvalidParams("half_length and epsilon must be positive".into()));
    }
    if node_count < 64 {
        return Err(Error::Resolution(format!("{node_count} nodes, at least 64 required")));
    }
    let target = epsilon / 10.0;
    let uniform = 2.0 * half_length / (node_count - 1) as f64;
    let b = if uniform <= target {
        0.0
    } else {
        let spacing = |b: f64| min_max_spacing(&stretched_nodes(half_length, node_count, b)).0;
        let (mut lo, mut hi) = (0.0, 1.0);
        while spacing(hi) > target {
            hi *= 2.0;
            if hi > 64.0 {
                return Err(Error::Resolution(format!(
                    "{node_count} nodes cannot give spacing {target:.3e} near 0"
                )));
            }
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if spacing(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let nodes = stretched_nodes(half_length, node_count, b);
    let (hmin, hmax) = min_max_spacing(&nodes);
    if hmin > epsilon / 8.0 {
        return Err(Error::Resolution(format!("min spacing {hmin:.3e} exceeds epsilon/8")));
    }
    if hmax > MAX_OUTER_SPACING {
        return Err(Error::Resolution(format!(
            "{node_count} nodes: outer spacing {hmax:.3} exceeds {MAX_OUTER_SPACING} once the interface is resolved"
        )));
    }
    Ok(Grid::from_nodes(nodes, b))
}

impl Grid {
    fn from_nodes(nodes: Vec<f64>, stretch: f64) -> Grid {
        let n = nodes.len();
        let h: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        let mut weights = vec![0.0; n];
        let mut lap = vec![[0.0; 3]; n];
        let mut d1 = vec![[0.0; 3]; n];
        weights[0] = 0.5 * h[0];
        weights[n - 1] = 0.5 * h[n - 2];
        lap[0] = [0.0, -2.0 / (h[0] * h[0]), 2.0 / (h[0] * h[0])];
        lap[n - 1] = [2.0 / (h[n - 2] * h[n - 2]), -2.0 / (h[n - 2] * h[n - 2]), 0.0];
        for i in 1..n - 1 {
            let (hm, hp) = (h[i - 1], h[i]);
            weights[i] = 0.5 * (hm + hp);
            let a = 2.0 / (hm * (hm + hp));
            let c = 2.0 / (hp * (hm + hp));
            lap[i] = [a, -(a + c), c];
            let dm = -hp / (hm * (hm + hp));
            let dp = hm / (hp * (hm + hp));
            d1[i] = [dm, -(dm + dp), dp];
        }
        Grid { half_length: nodes[n - 1], nodes, stretch, weights, lap, d1 }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn min_spacing(&self) -> f64 {
        min_max_spacing(&self.nodes).0
    }

    pub fn max_spacing(&self) -> f64 {
        min_max_spacing(&self.nodes).1
    }

    /// Three-point second-derivative stencil at node i (mirror closure at ends).
    pub fn lap_stencil(&self, i: usize) -> [f64; 3] {
        self.lap[i]
    }

    pub fn d1_stencil(&self, i: usize) -> [f64; 3] {
        self.d1[i]
    }

    #[inline]
    fn apply3(&self, st: &[f64; 3], f: &[f64], i: usize) -> f64 {
        let n = f.len();
        let um = if i > 0 { f[i - 1] } else { 0.0 };
        let up = if i + 1 < n { f[i + 1] } else { 0.0 };
        st[1] * f[i] + (st[0] * um + st[2] * up)
    }

    pub fn second_derivative(&self, f: &[f64]) -> Vec<f64> {
        (0..f.len()).map(|i| self.apply3(&self.lap[i], f, i)).collect()
    }

    /// Central first derivative; zero at the Neumann ends.
    pub fn first_derivative(&self, f: &[f64]) -> Vec<f64> {
        (0..f.len()).map(|i| self.apply3(&self.d1[i], f, i)).collect()
    }

    /// Trapezoid-weighted inner product of scalar arrays.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum()
    }

    /// Index of the node nearest `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, &xi) in self.nodes.iter().enumerate() {
            if (xi - x).abs() < (self.nodes[best] - x).abs() {
                best = i;
            }
        }
        best
    }
}

/// Discrete (u, v, w) fields, one value per node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl FieldState {
    pub fn zeros(n: usize) -> Self {
        FieldState { u: vec![0.0; n], v: vec![0.0; n], w: vec![0.0; n] }
    }

    pub fn constant(n: usize, u: f64, v: f64, w: f64) -> Self {
        FieldState { u: vec![u; n], v: vec![v; n], w: vec![w; n] }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn check_on(&self, grid: &Grid) -> Result<()> {
        let n = grid.len();
        for len in [self.u.len(), self.v.len(), self.w.len()] {
            if len != n {
                return Err(Error::Shape { expected: n, got: len });
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).chain(&self.w).all(|x| x.is_finite())
    }

    /// Interleaved layout (u0, v0, w0, u1, ...), matching the Jacobian ordering.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.len());
        for i in 0..self.len() {
            out.extend_from_slice(&[self.u[i], self.v[i], self.w[i]]);
        }
        out
    }

    pub fn from_slice(x: &[f64]) -> Self {
        let n = x.len() / 3;
        let mut s = FieldState::zeros(n);
        for i in 0..n {
            s.u[i] = x[3 * i];
            s.v[i] = x[3 * i + 1];
            s.w[i] = x[3 * i + 2];
        }
        s
    }

    pub fn components(&self) -> [&Vec<f64>; 3] {
        [&self.u, &self.v, &self.w]
    }

    pub fn map2(&self, other: &FieldState, f: impl Fn(f64, f64) -> f64) -> FieldState {
        let z = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect();
        FieldState { u: z(&self.u, &other.u), v: z(&self.v, &other.v), w: z(&self.w, &other.w) }
    }

    pub fn axpy(&self, a: f64, other: &FieldState) -> FieldState {
        self.map2(other, |x, y| x + a * y)
    }

    pub fn scale(&self, a: f64) -> FieldState {
        let s = |v: &[f64]| v.iter().map(|x| a * x).collect();
        FieldState { u: s(&self.u), v: s(&self.v), w: s(&self.w) }
    }

    /// Grid-weighted inner product summed over components.
    pub fn dot(&self, other: &FieldState, grid: &Grid) -> f64 {
        grid.dot(&self.u, &other.u) + grid.dot(&self.v, &other.v) + grid.dot(&self.w, &other.w)
    }

    pub fn norm(&self, grid: &Grid) -> f64 {
        self.dot(self, grid).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().chain(&self.v).chain(&self.w).fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Reflection Z(x) -> -Z(-x) on a symmetric grid.
    pub fn reflect(&self) -> FieldState {
        let r = |v: &[f64]| v.iter().rev().map(|x| -x).collect();
        FieldState { u: r(&self.u), v: r(&self.v), w: r(&self.w) }
    }

    pub fn x_derivative(&self, grid: &Grid) -> FieldState {
        FieldState {
            u: grid.first_derivative(&self.u),
            v: grid.first_derivative(&self.v),
            w: grid.first_derivative(&self.w),
        }
    }
}

/// F(Z) without the mass matrix.
pub fn residual(params: &Params, state: &FieldState, grid: &Grid) -> Result<FieldState> {
    comoving_residual(params, state, grid, 0.0)
}

/// F(Z) - c M Z_x: the steady comoving-frame equation for frame velocity c.
pub fn comoving_residual(
    params: &Params,
    state: &FieldState,
    grid: &Grid,
    c: f64,
) -> Result<FieldState> {
    state.check_on(grid)?;
    let n = grid.len();
    let e = params.epsilon;
    let e2 = e * e;
    let d2 = params.diff_D * params.diff_D;
    let m = params.mass_diag();
    let (u, v, w) = (&state.u, &state.v, &state.w);
    let mut out = FieldState::zeros(n);
    for i in 0..n {
        let lap = grid.lap[i];
        let (uxx, vxx, wxx) = (grid.apply3(&lap, u, i), grid.apply3(&lap, v, i), grid.apply3(&lap, w, i));
        let ui = u[i];
        out.u[i] = e2 * uxx + (ui - ui * ui * ui) - e * (params.alpha * v[i] + params.beta * w[i] + params.gamma);
        out.v[i] = vxx + (ui - v[i]);
        out.w[i] = d2 * wxx + (ui - w[i]);
        if c != 0.0 {
            let d = grid.d1[i];
            out.u[i] -= c * m[0] * grid.apply3(&d, u, i);
            out.v[i] -= c * m[1] * grid.apply3(&d, v, i);
            out.w[i] -= c * m[2] * grid.apply3(&d, w, i);
        }
    }
    Ok(out)
}

pub fn mass_apply(params: &Params, rhs: &FieldState) -> FieldState {
    let m = params.mass_diag();
    FieldState {
        u: rhs.u.iter().map(|x| m[0] * x).collect(),
        v: rhs.v.iter().map(|x| m[1] * x).collect(),
        w: rhs.w.iter().map(|x| m[2] * x).collect(),
    }
}

pub fn mass_inverse_apply(params: &Params, rhs: &FieldState) -> FieldState {
    let e2 = params.epsilon * params.epsilon;
    let (sv, sw) = (e2 / params.tau_hat, e2 / params.theta_hat);
    FieldState {
        u: rhs.u.clone(),
        v: rhs.v.iter().map(|x| sv * x).collect(),
        w: rhs.w.iter().map(|x| sw * x).collect(),
    }
}

/// Mass diagonal in the interleaved layout.
pub fn mass_vector(params: &Params, n: usize) -> Vec<f64> {
    let m = params.mass_diag();
    (0..3 * n).map(|k| m[k % 3]).collect()
}

/// Jacobian of `residual`, block-tridiagonal in node index (bandwidth 3 when interleaved).
pub fn jacobian(params: &Params, state: &FieldState, grid: &Grid) -> Result<Banded<f64>> {
    comoving_jacobian(params, state, grid, 0.0)
}

/// Jacobian of `comoving_residual` with respect to Z at fixed c.
pub fn comoving_jacobian(
    params: &Params,
    state: &FieldState,
    grid: &Grid,
    c: f64,
) -> Result<Banded<f64>> {
    state.check_on(grid)?;
    let n = grid.len();
    let e = params.epsilon;
    let e2 = e * e;
    let d2 = params.diff_D * params.diff_D;
    let m = params.mass_diag();
    let scale = [e2, 1.0, d2];
    let mut j = Banded::zeros(3 * n, 3, 3);
    for i in 0..n {
        let lap = grid.lap[i];
        let d = grid.d1[i];
        for k in 0..3 {
            let row = 3 * i + k;
            let coef = |s: usize| scale[k] * lap[s] - c * m[k] * d[s];
            if i > 0 {
                j.add(row, row - 3, coef(0));
            }
            j.add(row, row, coef(1));
            if i + 1 < n {
                j.add(row, row + 3, coef(2));
            }
        }
        let ui = state.u[i];
        let r = 3 * i;
        j.add(r, r, 1.0 - 3.0 * ui * ui);
        j.add(r, r + 1, -e * params.alpha);
        j.add(r, r + 2, -e * params.beta);
        j.add(r + 1, r, 1.0);
        j.add(r + 1, r + 1, -1.0);
        j.add(r + 2, r, 1.0);
        j.add(r + 2, r + 2, -1.0);
    }
    Ok(j)
}

/// Residual plus Jacobian and mass matrix for one parameter set on one grid.
#[derive(Clone, Debug)]
pub struct OperatorBundle<'a> {
    pub params: Params,
    pub grid: &'a Grid,
}

impl<'a> OperatorBundle<'a> {
    pub fn new(params: Params, grid: &'a Grid) -> Self {
        OperatorBundle { params, grid }
    }

    pub fn residual(&self, z: &FieldState) -> Result<FieldState> {
        residual(&self.params, z, self.grid)
    }

    pub fn jacobian(&self, z: &FieldState) -> Result<Banded<f64>> {
        jacobian(&self.params, z, self.grid)
    }

    pub fn mass_diag(&self) -> [f64; 3] {
        self.params.mass_diag()
    }
}

/// Spatially constant root of the model near (s, s, s), s = ±1.
pub fn homogeneous_equilibrium(params: &Params, sign: f64) -> Result<[f64; 3]> {
    let e = params.epsilon;
    let f = |z: &Vector3<f64>| {
        Vector3::new(
            z[0] - z[0].powi(3) - e * (params.alpha * z[1] + params.beta * z[2] + params.gamma),
            z[0] - z[1],
            z[0] - z[2],
        )
    };
    let mut z = Vector3::new(sign, sign, sign);
    for it in 0..50 {
        let r = f(&z);
        if r.norm() < 1e-14 {
            return Ok([z[0], z[1], z[2]]);
        }
        let jac = Matrix3::new(
            1.0 - 3.0 * z[0] * z[0],
            -e * params.alpha,
            -e * params.beta,
            1.0,
            -1.0,
            0.0,
            1.0,
            0.0,
            -1.0,
        );
        let dz = jac
            .lu()
            .solve(&r)
            .ok_or_else(|| Error::Solver(format!("singular background Jacobian at iteration {it}")))?;
        z -= dz;
    }
    let r = f(&z).norm();
    if r < 1e-12 {
        Ok([z[0], z[1], z[2]])
    } else {
        Err(Error::NoConvergence { iterations: 50, residual: r, history: vec![r] })
    }
}
