//! Planar reduced dynamics c'' = g1 c + g30 c³ + c'(g2 + g40 c²) in slow time,
//! with the position a' = c carried along.

use num_complex::Complex64;
use serde::Serialize;
use std::sync::OnceLock;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReducedState {
    pub a: f64,
    pub c: f64,
    pub c_tilde: f64,
}

impl ReducedState {
    pub fn new(a: f64, c: f64, c_tilde: f64) -> Self {
        ReducedState { a, c, c_tilde }
    }

    fn axpy(&self, h: f64, d: &ReducedState) -> ReducedState {
        ReducedState { a: self.a + h * d.a, c: self.c + h * d.c, c_tilde: self.c_tilde + h * d.c_tilde }
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.c.is_finite() && self.c_tilde.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReducedParams {
    pub g1: f64,
    pub g2: f64,
    pub g30: f64,
    pub g40: f64,
    pub epsilon: f64,
}

impl ReducedParams {
    /// Converts a slow-time span to model time.
    pub fn to_model_time(&self, t_slow: f64) -> f64 {
        t_slow / (self.epsilon * self.epsilon)
    }
}

pub fn reduced_rhs(s: &ReducedState, p: &ReducedParams) -> ReducedState {
    let c2 = s.c * s.c;
    ReducedState {
        a: s.c,
        c: s.c_tilde,
        c_tilde: p.g1 * s.c + p.g30 * c2 * s.c + s.c_tilde * (p.g2 + p.g40 * c2),
    }
}

pub fn rk4_step(s: &ReducedState, p: &ReducedParams, h: f64) -> ReducedState {
    let k1 = reduced_rhs(s, p);
    let k2 = reduced_rhs(&s.axpy(0.5 * h, &k1), p);
    let k3 = reduced_rhs(&s.axpy(0.5 * h, &k2), p);
    let k4 = reduced_rhs(&s.axpy(h, &k3), p);
    ReducedState {
        a: s.a + h / 6.0 * (k1.a + 2.0 * k2.a + 2.0 * k3.a + k4.a),
        c: s.c + h / 6.0 * (k1.c + 2.0 * k2.c + 2.0 * k3.c + k4.c),
        c_tilde: s.c_tilde + h / 6.0 * (k1.c_tilde + 2.0 * k2.c_tilde + 2.0 * k3.c_tilde + k4.c_tilde),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReducedTrajectory {
    pub t: Vec<f64>,
    pub states: Vec<ReducedState>,
}

#[derive(Clone, Copy, Debug)]
pub struct IntegrateOptions {
    /// |c| beyond this counts as blow-up.
    pub blowup: f64,
    /// Keep every `stride`-th step.
    pub stride: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { blowup: 1e6, stride: 1 }
    }
}

pub fn integrate(
    state0: ReducedState,
    params: &ReducedParams,
    t_end: f64,
    dt: f64,
) -> Result<ReducedTrajectory> {
    integrate_with(state0, params, t_end, dt, IntegrateOptions::default())
}

pub fn integrate_with(
    state0: ReducedState,
    params: &ReducedParams,
    t_end: f64,
    dt: f64,
    opts: IntegrateOptions,
) -> Result<ReducedTrajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidParams(format!("dt = {dt}, t_end = {t_end}")));
    }
    let steps = (t_end / dt).ceil() as usize;
    let h = if steps > 0 { t_end / steps as f64 } else { dt };
    let mut t = vec![0.0];
    let mut states = vec![state0];
    let mut s = state0;
    for k in 1..=steps {
        s = rk4_step(&s, params, h);
        let tk = k as f64 * h;
        if !s.is_finite() || s.c.abs() > opts.blowup {
            return Err(Error::Divergence { t: tk, value: s.c.abs() });
        }
        if k % opts.stride.max(1) == 0 || k == steps {
            t.push(tk);
            states.push(s);
        }
    }
    Ok(ReducedTrajectory { t, states })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Stability {
    StableNode,
    StableFocus,
    UnstableNode,
    UnstableFocus,
    Saddle,
    /// Zero real part or zero determinant.
    NonHyperbolic,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Equilibrium {
    pub c: f64,
    pub eigenvalues: [Complex64; 2],
    pub stability: Stability,
}

/// Eigenvalues of λ² − trace·λ + det = 0 and their classification.
fn classify(trace: f64, det: f64) -> ([Complex64; 2], Stability) {
    let disc = trace * trace - 4.0 * det;
    let eig = if disc >= 0.0 {
        let s = disc.sqrt();
        [Complex64::new(0.5 * (trace - s), 0.0), Complex64::new(0.5 * (trace + s), 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Complex64::new(0.5 * trace, -0.5 * s), Complex64::new(0.5 * trace, 0.5 * s)]
    };
    let tag = if det < 0.0 {
        Stability::Saddle
    } else if det == 0.0 || trace == 0.0 {
        Stability::NonHyperbolic
    } else if trace < 0.0 {
        if disc >= 0.0 {
            Stability::StableNode
        } else {
            Stability::StableFocus
        }
    } else if disc >= 0.0 {
        Stability::UnstableNode
    } else {
        Stability::UnstableFocus
    };
    (eig, tag)
}

/// Equilibria of the (c, c̃) system: the origin and ±√(−g1/g30) when real.
pub fn equilibria_and_stability(p: &ReducedParams) -> Vec<Equilibrium> {
    let mut cs = vec![0.0];
    if p.g30 != 0.0 {
        let q = -p.g1 / p.g30;
        if q > 0.0 {
            cs.push(-q.sqrt());
            cs.push(q.sqrt());
        }
    }
    cs.into_iter()
        .map(|c| {
            // λ² − G2 λ − ∂cG1 = 0
            let trace = p.g2 + p.g40 * c * c;
            let det = -(p.g1 + 3.0 * p.g30 * c * c);
            let (eigenvalues, stability) = classify(trace, det);
            Equilibrium { c, eigenvalues, stability }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CycleStatus {
    Stable,
    Absent,
    Indeterminate,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CycleReport {
    pub status: CycleStatus,
    /// max |c| on the cycle.
    pub amplitude: f64,
    /// Slow-time period.
    pub period: f64,
    /// max c and −min c agree.
    pub symmetric: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct ScanOptions {
    pub max_time: f64,
    pub rel_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { max_time: 2e6, rel_tol: 1e-7 }
    }
}

pub fn limit_cycle_scan(p: &ReducedParams) -> Result<CycleReport> {
    limit_cycle_scan_with(p, ScanOptions::default())
}

/// Long-time integration from several seeds with returns to the section
/// {c̃ = 0, c > 0} (maxima of c).
pub fn limit_cycle_scan_with(p: &ReducedParams, opts: ScanOptions) -> Result<CycleReport> {
    if !(p.g30 < 0.0 && p.g40 < 0.0) {
        return Err(Error::Unsupported("cycle scan requires g30, g40 < 0".into()));
    }
    let omega = p.g1.abs().sqrt() + p.g2.abs() + 1e-4;
    let dt = (0.02 / omega).min(0.5);
    // seeds: small kick, predicted Hopf amplitude, and a large start
    let mut seeds = vec![1e-3];
    if p.g2 > 0.0 {
        seeds.push((-4.0 * p.g2 / p.g40).sqrt());
    }
    let big = 2.0 * (p.g1.abs() / p.g30.abs()).sqrt().max((p.g2.abs() / p.g40.abs()).sqrt()).max(1e-3);
    seeds.push(big);

    let mut indeterminate = false;
    for &seed in &seeds {
        match follow_seed(p, seed, dt, opts) {
            Seed::Cycle(r) => return Ok(r),
            Seed::Settled => {}
            Seed::Undecided => indeterminate = true,
        }
    }
    Ok(CycleReport {
        status: if indeterminate { CycleStatus::Indeterminate } else { CycleStatus::Absent },
        amplitude: 0.0,
        period: f64::NAN,
        symmetric: false,
    })
}

enum Seed {
    Cycle(CycleReport),
    Settled,
    Undecided,
}

fn follow_seed(p: &ReducedParams, seed: f64, dt: f64, opts: ScanOptions) -> Seed {
    let eq: Vec<f64> = equilibria_and_stability(p).iter().map(|e| e.c).collect();
    let mut s = ReducedState::new(0.0, seed, 0.0);
    let mut t = 0.0;
    let mut last_max: Option<(f64, f64)> = None; // (time, value) of previous maximum
    let mut last_min = f64::NAN;
    let mut prev = s;
    let mut history: Vec<(f64, f64)> = Vec::new(); // (period, amplitude)
    while t < opts.max_time {
        s = rk4_step(&prev, p, dt);
        t += dt;
        if !s.is_finite() || s.c.abs() > 1e6 {
            return Seed::Undecided;
        }
        if prev.c_tilde < 0.0 && s.c_tilde >= 0.0 {
            // minimum of c
            last_min = interp_extremum(&prev, &s, p, dt).1;
        }
        if prev.c_tilde > 0.0 && s.c_tilde <= 0.0 && s.c > 0.0 {
            let (tc, cmax) = {
                let (off, val) = interp_extremum(&prev, &s, p, dt);
                (t - dt + off, val)
            };
            if let Some((t0, _)) = last_max {
                history.push((tc - t0, cmax));
                let k = history.len();
                if k >= 2 {
                    let (p1, a1) = history[k - 1];
                    let (p0, a0) = history[k - 2];
                    let da = (a1 - a0).abs();
                    if da <= opts.rel_tol * a1 && (p1 - p0).abs() <= 1e3 * opts.rel_tol * p1 {
                        let symmetric = last_min.is_finite() && (a1 + last_min).abs() <= 1e-3 * a1;
                        return Seed::Cycle(CycleReport {
                            status: CycleStatus::Stable,
                            amplitude: a1,
                            period: p1,
                            symmetric,
                        });
                    }
                }
            }
            last_max = Some((tc, cmax));
        }
        // settled onto an equilibrium
        let near_eq = eq.iter().any(|&e| (s.c - e).abs() < 1e-9 && s.c_tilde.abs() < 1e-9);
        if near_eq {
            return Seed::Settled;
        }
        prev = s;
    }
    Seed::Undecided
}

/// Quadratic interpolation of the extremum of c between two steps: returns
/// (time offset from `a`, extreme value).
fn interp_extremum(a: &ReducedState, b: &ReducedState, _p: &ReducedParams, dt: f64) -> (f64, f64) {
    // c̃ = dc/dt changes sign; linear zero of c̃, then Hermite value of c
    let frac = a.c_tilde / (a.c_tilde - b.c_tilde);
    let th = frac;
    let h00 = 2.0 * th.powi(3) - 3.0 * th * th + 1.0;
    let h10 = th.powi(3) - 2.0 * th * th + th;
    let h01 = -2.0 * th.powi(3) + 3.0 * th * th;
    let h11 = th.powi(3) - th * th;
    let c = h00 * a.c + h10 * dt * a.c_tilde + h01 * b.c + h11 * dt * b.c_tilde;
    (frac * dt, c)
}

/// Slopes r of the boundary lines g2 = r (g40/g30) g1 for g1 > 0, located
/// numerically in the scaled system x'' = x − x³ + x'(μ − x²).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundarySlopes {
    pub homoclinic: f64,
    pub cycle_fold: f64,
}

static SLOPES: OnceLock<BoundarySlopes> = OnceLock::new();

pub fn boundary_slopes() -> BoundarySlopes {
    *SLOPES.get_or_init(compute_boundary_slopes)
}

fn scaled(mu: f64) -> ReducedParams {
    ReducedParams { g1: 1.0, g2: mu, g30: -1.0, g40: -1.0, epsilon: 1.0 }
}

/// Fate of a trajectory: `true` if it is captured by one of the equilibria ±1.
fn captured(mut s: ReducedState, mu: f64, t_max: f64) -> bool {
    let p = scaled(mu);
    let h = 0.01;
    let mut t = 0.0;
    let mut crossings = 0usize;
    while t < t_max {
        let next = rk4_step(&s, &p, h);
        if s.c > 0.0 && next.c <= 0.0 || s.c < 0.0 && next.c >= 0.0 {
            crossings += 1;
        }
        s = next;
        t += h;
        let d = ((s.c.abs() - 1.0).powi(2) + s.c_tilde.powi(2)).sqrt();
        if d < 0.02 {
            return true;
        }
        if crossings > 400 {
            return false;
        }
    }
    false
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> bool) -> f64 {
    let flo = f(lo);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if f(mid) == flo {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-7 {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn compute_boundary_slopes() -> BoundarySlopes {
    // homoclinic: the right branch of the origin's unstable manifold switches
    // between capture by +1 and escape around the outer cycle
    let homoclinic = bisect(0.5, 0.99, |mu| {
        let lam = 0.5 * (mu + (mu * mu + 4.0).sqrt());
        let d = 1e-8;
        captured(ReducedState::new(0.0, d, d * lam), mu, 1e5)
    });
    // fold of large cycles: a start far outside all equilibria either settles on
    // the outer stable cycle or is captured
    let cycle_fold = bisect(0.5, homoclinic - 1e-4, |mu| captured(ReducedState::new(0.0, 0.0, 3.0), mu, 1e5));
    BoundarySlopes { homoclinic, cycle_fold }
}
