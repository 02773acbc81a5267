//! Time integration in a comoving frame whose velocity is fixed by
//! orthogonality to the translation direction.

use serde::{Deserialize, Serialize};

use crate::banded::Banded;
use crate::error::{Error, Result};
use crate::linalg::BorderedLu;
use crate::model::{comoving_jacobian, comoving_residual, mass_vector, FieldState, Grid, Params};
use crate::steady::interleaved_weights;

/// Default perturbation size relative to ‖∂x Z‖.
pub const DEFAULT_PERTURBATION: f64 = 1e-2;

/// c = ⟨M⁻¹F(Z), ∂x Z⟩ / ‖∂x Z‖². The frame equation is M Z_t = F(Z) − c M ∂x Z,
/// so a front at rest in that frame has c = ⟨M⁻¹F, ∂x Z⟩/‖∂x Z‖² = 0.
pub fn freeze_velocity(params: &Params, state: &FieldState, grid: &Grid) -> Result<f64> {
    let f = comoving_residual(params, state, grid, 0.0)?;
    let m = params.mass_diag();
    let dz = state.x_derivative(grid);
    let nz = dz.dot(&dz, grid);
    let scale = state.max_abs().max(1.0);
    if !(nz > 1e-20 * scale * scale) {
        return Err(Error::Degenerate(format!("flat state, |Z_x|^2 = {nz:.3e}")));
    }
    let num = grid.dot(&f.u, &dz.u) / m[0] + grid.dot(&f.v, &dz.v) / m[1] + grid.dot(&f.w, &dz.w) / m[2];
    Ok(num / nz)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Linear terms implicit, cubic explicit, first order.
    Imex1,
    /// Two-stage linearly implicit Rosenbrock method, second order.
    Ros2,
}

fn linear_part(params: &Params, grid: &Grid, c: f64) -> Result<Banded<f64>> {
    // Jacobian at u = 0 is exactly the linear part of F
    let zero = FieldState::zeros(grid.len());
    comoving_jacobian(params, &zero, grid, c)
}

/// One first-order step with the frame velocity held at `c`:
/// (M − dt A_c) Z⁺ = M Z + dt N(Z), A_c linear, N the cubic and constant terms.
pub fn step(params: &Params, state: &FieldState, grid: &Grid, dt: f64, c: f64) -> Result<FieldState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParams(format!("dt = {dt}")));
    }
    state.check_on(grid)?;
    let n = grid.len();
    let mass = mass_vector(params, n);
    let a = linear_part(params, grid, c)?;
    let k = a.map(|v| -dt * v).add_diag(1.0, &mass);
    let lu = BorderedLu::new(k, None)?;
    let z = state.to_vec();
    let e = params.epsilon;
    let mut rhs: Vec<f64> = z.iter().zip(&mass).map(|(a, m)| a * m).collect();
    for i in 0..n {
        let u = z[3 * i];
        rhs[3 * i] += dt * (-u * u * u - e * params.gamma);
    }
    let (out, _) = lu.solve(&rhs, 0.0);
    let out = FieldState::from_slice(&out);
    if !out.is_finite() {
        return Err(Error::Solver("non-finite state after linear solve".into()));
    }
    Ok(out)
}

fn frozen_rhs(params: &Params, z: &FieldState, grid: &Grid) -> Result<(Vec<f64>, f64)> {
    let c = freeze_velocity(params, z, grid)?;
    Ok((comoving_residual(params, z, grid, c)?.to_vec(), c))
}

const ROS2_GAMMA: f64 = 1.0 + std::f64::consts::FRAC_1_SQRT_2;

/// Transpose of the componentwise first-derivative operator applied to `y`.
fn d1_transpose(grid: &Grid, y: &FieldState) -> FieldState {
    let n = grid.len();
    let t = |f: &[f64]| {
        let mut out = vec![0.0; n];
        for i in 0..n {
            let st = grid.d1_stencil(i);
            if i > 0 {
                out[i - 1] += st[0] * f[i];
            }
            out[i] += st[1] * f[i];
            if i + 1 < n {
                out[i + 1] += st[2] * f[i];
            }
        }
        out
    };
    FieldState { u: t(&y.u), v: t(&y.v), w: t(&y.w) }
}

/// Frozen velocity c(Z) and its gradient with respect to the interleaved state.
pub fn velocity_gradient(params: &Params, state: &FieldState, grid: &Grid) -> Result<(f64, Vec<f64>)> {
    let c = freeze_velocity(params, state, grid)?;
    let f = comoving_residual(params, state, grid, 0.0)?;
    let dz = state.x_derivative(grid);
    let nz = dz.dot(&dz, grid);
    let m = params.mass_diag();
    let wm = |z: &FieldState| FieldState {
        u: z.u.iter().zip(&grid.weights).map(|(a, w)| a * w / m[0]).collect(),
        v: z.v.iter().zip(&grid.weights).map(|(a, w)| a * w / m[1]).collect(),
        w: z.w.iter().zip(&grid.weights).map(|(a, w)| a * w / m[2]).collect(),
    };
    let wdz = FieldState {
        u: dz.u.iter().zip(&grid.weights).map(|(a, w)| a * w).collect(),
        v: dz.v.iter().zip(&grid.weights).map(|(a, w)| a * w).collect(),
        w: dz.w.iter().zip(&grid.weights).map(|(a, w)| a * w).collect(),
    };
    // ∇N = J₀ᵀ W M⁻¹ Z_x + Dᵀ W M⁻¹ F,  ∇‖Z_x‖² = 2 Dᵀ W Z_x
    let j0 = comoving_jacobian(params, state, grid, 0.0)?;
    let a = j0.transpose().matvec(&wm(&dz).to_vec());
    let b = d1_transpose(grid, &wm(&f)).to_vec();
    let d = d1_transpose(grid, &wdz).to_vec();
    let g = a.iter().zip(&b).zip(&d).map(|((a, b), d)| (a + b - 2.0 * c * d) / nz).collect();
    Ok((c, g))
}

/// One second-order step of M Z_t = F(Z) − c(Z) M ∂x Z (two-stage
/// Rosenbrock). The matrix carries the rank-one term from ∂c/∂Z as a border.
pub fn step_ros2(params: &Params, state: &FieldState, grid: &Grid, dt: f64) -> Result<(FieldState, f64)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParams(format!("dt = {dt}")));
    }
    let n = grid.len();
    let mass = mass_vector(params, n);
    let (c0, grad) = velocity_gradient(params, state, grid)?;
    let g0 = comoving_residual(params, state, grid, c0)?.to_vec();
    let w = comoving_jacobian(params, state, grid, c0)?;
    let k = w.map(|v| -ROS2_GAMMA * dt * v).add_diag(1.0, &mass);
    let mzx = state.x_derivative(grid).to_vec();
    let col: Vec<f64> = mzx.iter().zip(&mass).map(|(a, m)| ROS2_GAMMA * dt * m * a).collect();
    let lu = BorderedLu::with_corner(k, vec![col], vec![grad], vec![vec![-1.0]])?;
    let (k1, _) = lu.solve(&g0, 0.0);
    let y = state.to_vec();
    let y1: Vec<f64> = y.iter().zip(&k1).map(|(a, b)| a + dt * b).collect();
    let (g1, _) = frozen_rhs(params, &FieldState::from_slice(&y1), grid)?;
    let rhs: Vec<f64> = g1.iter().zip(&k1).zip(&mass).map(|((g, k), m)| g - 2.0 * m * k).collect();
    let (k2, _) = lu.solve(&rhs, 0.0);
    let out: Vec<f64> = y.iter().zip(&k1).zip(&k2).map(|((a, p), q)| a + dt * (1.5 * p + 0.5 * q)).collect();
    let out = FieldState::from_slice(&out);
    if !out.is_finite() {
        return Err(Error::Solver("non-finite state after linear solve".into()));
    }
    Ok((out, c0))
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: Vec<f64>,
    pub c: Vec<f64>,
    /// Cumulative trapezoid integral of c.
    pub a: Vec<f64>,
    pub snapshots: Vec<(f64, FieldState)>,
}

impl TrajectoryRecord {
    fn push(&mut self, t: f64, c: f64) {
        let a = match (self.t.last(), self.c.last(), self.a.last()) {
            (Some(&t0), Some(&c0), Some(&a0)) => a0 + 0.5 * (t - t0) * (c + c0),
            _ => 0.0,
        };
        self.t.push(t);
        self.c.push(c);
        self.a.push(a);
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SimulateOptions {
    pub scheme: Scheme,
    /// Record every `stride`-th step (the integral of c still uses every step).
    pub stride: usize,
    /// Keep a state snapshot every `snapshot_stride` steps; 0 disables.
    pub snapshot_stride: usize,
    /// Abort when any field exceeds this magnitude.
    pub blowup: f64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions { scheme: Scheme::Imex1, stride: 1, snapshot_stride: 0, blowup: 1e3 }
    }
}

pub fn simulate_frozen(
    params: &Params,
    state0: &FieldState,
    grid: &Grid,
    t_end: f64,
    dt: f64,
) -> Result<TrajectoryRecord> {
    simulate_frozen_with(params, state0, grid, t_end, dt, SimulateOptions::default()).map(|r| r.0)
}

/// Returns the record and the final state.
pub fn simulate_frozen_with(
    params: &Params,
    state0: &FieldState,
    grid: &Grid,
    t_end: f64,
    dt: f64,
    opts: SimulateOptions,
) -> Result<(TrajectoryRecord, FieldState)> {
    params.validate()?;
    state0.check_on(grid)?;
    if !(t_end >= 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("t_end = {t_end}, dt = {dt}")));
    }
    let steps = (t_end / dt).round() as usize;
    let mut rec = TrajectoryRecord::default();
    let mut z = state0.clone();
    let mut c = freeze_velocity(params, &z, grid)?;
    // running integral over unrecorded steps
    let (mut a_acc, mut t_prev, mut c_prev) = (0.0, 0.0, c);
    rec.push(0.0, c);
    if opts.snapshot_stride > 0 {
        rec.snapshots.push((0.0, z.clone()));
    }
    let stride = opts.stride.max(1);
    for k in 1..=steps {
        let t = k as f64 * dt;
        z = match opts.scheme {
            Scheme::Imex1 => step(params, &z, grid, dt, c)?,
            Scheme::Ros2 => step_ros2(params, &z, grid, dt)?.0,
        };
        let m = z.max_abs();
        if !(m <= opts.blowup) {
            return Err(Error::Divergence { t, value: m });
        }
        c = freeze_velocity(params, &z, grid)?;
        a_acc += 0.5 * (t - t_prev) * (c + c_prev);
        t_prev = t;
        c_prev = c;
        if k % stride == 0 || k == steps {
            rec.t.push(t);
            rec.c.push(c);
            rec.a.push(a_acc);
        }
        if opts.snapshot_stride > 0 && k % opts.snapshot_stride == 0 {
            rec.snapshots.push((t, z.clone()));
        }
    }
    Ok((rec, z))
}

/// state + amplitude · mode.
pub fn perturb(state: &FieldState, mode: &FieldState, amplitude: f64) -> Result<FieldState> {
    if mode.len() != state.len() {
        return Err(Error::Shape { expected: state.len(), got: mode.len() });
    }
    Ok(state.axpy(amplitude, mode))
}

/// Real part of the leading eigenvector of the frozen problem, scaled to the
/// norm of ∂x Z and signed so that its largest u entry is positive.
pub fn leading_mode(params: &Params, state: &FieldState, grid: &Grid) -> Result<FieldState> {
    let s = crate::spectral::frozen_spectrum(params, state, 0.0, grid, 4)?;
    let idx = (0..s.eigenvalues.len())
        .max_by(|&a, &b| s.eigenvalues[a].re.total_cmp(&s.eigenvalues[b].re))
        .ok_or_else(|| Error::Solver("empty spectrum".into()))?;
    let v: Vec<f64> = s.vectors[idx].iter().map(|z| z.re).collect();
    let mut mode = FieldState::from_slice(&v);
    let w3 = interleaved_weights(grid);
    let nv = v.iter().zip(&w3).map(|(a, w)| a * a * w).sum::<f64>().sqrt();
    let target = state.x_derivative(grid).norm(grid);
    let imax = (0..mode.len()).max_by(|&a, &b| mode.u[a].abs().total_cmp(&mode.u[b].abs())).unwrap_or(0);
    let sign = if mode.u[imax] < 0.0 { -1.0 } else { 1.0 };
    mode = mode.scale(sign * target / nv.max(1e-300));
    Ok(mode)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct OscillationStats {
    /// Mean of c over whole cycles (or over the window when there are none).
    pub mean: f64,
    /// max |c − mean| over those cycles.
    pub amplitude: f64,
    /// Time between the last two upward crossings of the mean.
    pub period: Option<f64>,
    pub cycles: usize,
}

/// Statistics of c(t) for t ≥ `t_from`. Whole cycles are delimited by
/// crossings of the window mean. The mean is Δa/Δt between the first and last
/// upward crossing, averaged with the same over downward crossings (this
/// cancels a slowly settling amplitude).
pub fn oscillation_stats(rec: &TrajectoryRecord, t_from: f64) -> Result<OscillationStats> {
    let i0 = rec.t.iter().position(|&t| t >= t_from).unwrap_or(rec.t.len());
    if rec.t.len() < i0 + 3 {
        return Err(Error::InvalidParams(format!("fewer than three samples after t = {t_from}")));
    }
    let (t, c, a) = (&rec.t[i0..], &rec.c[i0..], &rec.a[i0..]);
    let span = t[t.len() - 1] - t[0];
    let level = (a[a.len() - 1] - a[0]) / span;
    let (mut up, mut down) = (Vec::new(), Vec::new());
    for i in 1..t.len() {
        let (x0, x1) = (c[i - 1] - level, c[i] - level);
        if (x0 < 0.0) != (x1 < 0.0) {
            let s = -x0 / (x1 - x0);
            let hit = (i, t[i - 1] + s * (t[i] - t[i - 1]), a[i - 1] + s * (a[i] - a[i - 1]));
            if x0 < 0.0 { up.push(hit) } else { down.push(hit) }
        }
    }
    let drift = |v: &[(usize, f64, f64)]| (v[v.len() - 1].2 - v[0].2) / (v[v.len() - 1].1 - v[0].1);
    let (lo, hi, mean) = if up.len() >= 2 {
        let (first, last) = (up[0], up[up.len() - 1]);
        let mean = if down.len() >= 2 { 0.5 * (drift(&up) + drift(&down)) } else { drift(&up) };
        (first.0, last.0, mean)
    } else {
        (0, t.len(), level)
    };
    let amplitude = c[lo..hi].iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
    let period = (up.len() >= 2).then(|| up[up.len() - 1].1 - up[up.len() - 2].1);
    let cross = up;
    Ok(OscillationStats { mean, amplitude, period, cycles: cross.len().saturating_sub(1) })
}
