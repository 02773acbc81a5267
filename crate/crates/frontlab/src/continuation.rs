//! Natural-parameter continuation of comoving fronts with stability,
//! bifurcation detection and switching onto symmetry-broken branches.

use num_complex::Complex64;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::BorderedLu;
use crate::model::{comoving_jacobian, comoving_residual, homogeneous_equilibrium, FieldState, Grid, Params};
use crate::normal_form::{g_to_params, params_to_g, UnfoldingMap};
use crate::spectral::{frozen_spectrum, SpectrumReport};
use crate::steady::{frozen_newton, interleaved_weights, phase_row, velocity_column, weighted_norm, NewtonOptions};

/// Real part above this counts as unstable.
pub const STABILITY_TOL: f64 = 1e-8;
/// Eigenvalues with |Im λ| below this fraction of ε² are treated as real.
const REAL_FRACTION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ContinuationParam {
    Alpha,
    Beta,
    Gamma,
    G1,
    G2,
}

impl FromStr for ContinuationParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alpha" => Ok(Self::Alpha),
            "beta" => Ok(Self::Beta),
            "gamma" => Ok(Self::Gamma),
            "g1" => Ok(Self::G1),
            "g2" => Ok(Self::G2),
            other => Err(Error::InvalidParams(format!("unknown continuation parameter '{other}'"))),
        }
    }
}

impl fmt::Display for ContinuationParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Alpha => "alpha",
            Self::Beta => "beta",
            Self::Gamma => "gamma",
            Self::G1 => "g1",
            Self::G2 => "g2",
        };
        f.write_str(s)
    }
}

impl ContinuationParam {
    pub fn get(&self, p: &Params, map: &UnfoldingMap) -> Result<f64> {
        Ok(match self {
            Self::Alpha => p.alpha,
            Self::Beta => p.beta,
            Self::Gamma => p.gamma,
            Self::G1 => params_to_g(p.alpha, p.beta, map)?.0,
            Self::G2 => params_to_g(p.alpha, p.beta, map)?.1,
        })
    }

    /// Copy of `p` with this parameter set to `value`; for g1/g2 the other
    /// unfolding coordinate is held fixed.
    pub fn set(&self, p: &Params, map: &UnfoldingMap, value: f64) -> Result<Params> {
        let mut q = p.clone();
        match self {
            Self::Alpha => q.alpha = value,
            Self::Beta => q.beta = value,
            Self::Gamma => q.gamma = value,
            Self::G1 | Self::G2 => {
                let (g1, g2) = params_to_g(p.alpha, p.beta, map)?;
                let (g1, g2) = if *self == Self::G1 { (value, g2) } else { (g1, value) };
                let (a, b) = g_to_params(g1, g2, map)?;
                q.alpha = a;
                q.beta = b;
            }
        }
        Ok(q)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BifurcationKind {
    Hopf,
    Pitchfork,
    Fold,
}

impl fmt::Display for BifurcationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hopf => "hopf",
            Self::Pitchfork => "pitchfork",
            Self::Fold => "fold",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Bifurcation {
    pub kind: BifurcationKind,
    /// Located parameter value.
    pub value: f64,
    /// Critical eigenvalue at the located point.
    pub eigenvalue: Complex64,
    /// Critical eigenvector, for switching.
    #[serde(skip)]
    pub mode: Vec<f64>,
    #[serde(skip)]
    pub state: Option<FieldState>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchPoint {
    pub value: f64,
    pub params: Params,
    pub g: (f64, f64),
    #[serde(skip)]
    pub state: FieldState,
    pub c: f64,
    /// ‖Z − Z₀‖ with Z₀ the constant root near zero.
    pub norm: f64,
    pub spectrum: SpectrumReport,
    pub stable: bool,
    pub newton_iterations: usize,
    pub bifurcations: Vec<Bifurcation>,
}

impl BranchPoint {
    pub fn tag(&self) -> String {
        if self.bifurcations.is_empty() {
            "none".into()
        } else {
            self.bifurcations.iter().map(|b| b.kind.to_string()).collect::<Vec<_>>().join("+")
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Branch {
    pub parameter: ContinuationParam,
    pub points: Vec<BranchPoint>,
    /// Set when the step size fell below the minimum before the target.
    pub stall: Option<String>,
}

impl Branch {
    pub fn bifurcations(&self) -> impl Iterator<Item = &Bifurcation> {
        self.points.iter().flat_map(|p| p.bifurcations.iter())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ContinuationOptions {
    /// Arclength steps, measured mostly in parameter units (see `state_weight`).
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_points: usize,
    /// Weight of ‖ΔZ‖ against Δparameter in the arclength metric; the scaled
    /// velocity c/ε² gets the same weight.
    pub state_weight: f64,
    /// Eigenvalues kept per point.
    pub spectrum_k: usize,
    pub newton: NewtonOptions,
    /// Bisection stops once the bracket is shorter than this in the parameter.
    pub locate_tol: f64,
    pub detect: bool,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            initial_step: 1e-3,
            min_step: 1e-6,
            max_step: 5e-3,
            max_points: 200,
            state_weight: 1e-2,
            spectrum_k: 4,
            newton: NewtonOptions { tol: 1e-10, max_iter: 10 },
            locate_tol: 1e-5,
            detect: true,
        }
    }
}

fn trivial_norm(params: &Params, state: &FieldState, grid: &Grid) -> f64 {
    let z0 = homogeneous_equilibrium(params, 0.0).unwrap_or([0.0; 3]);
    let n = state.len();
    let base = FieldState::constant(n, z0[0], z0[1], z0[2]);
    state.axpy(-1.0, &base).norm(grid)
}

fn finish_point(
    params: &Params,
    which: ContinuationParam,
    map: &UnfoldingMap,
    state: FieldState,
    c: f64,
    iterations: usize,
    grid: &Grid,
    opts: &ContinuationOptions,
) -> Result<BranchPoint> {
    let spectrum = frozen_spectrum(params, &state, c, grid, opts.spectrum_k)?;
    let stable = spectrum.max_real() <= STABILITY_TOL;
    Ok(BranchPoint {
        value: which.get(params, map)?,
        params: params.clone(),
        g: params_to_g(params.alpha, params.beta, map)?,
        norm: trivial_norm(params, &state, grid),
        state,
        c,
        spectrum,
        stable,
        newton_iterations: iterations,
        bifurcations: Vec::new(),
    })
}

/// Solve at `params` from (guess, c0) and attach the frozen spectrum.
pub fn solve_point(
    params: &Params,
    which: ContinuationParam,
    map: &UnfoldingMap,
    guess: &FieldState,
    c0: f64,
    grid: &Grid,
    opts: &ContinuationOptions,
) -> Result<BranchPoint> {
    let sol = frozen_newton(params, guess, c0, guess, grid, opts.newton)?;
    finish_point(params, which, map, sol.state, sol.c, sol.log.iterations, grid, opts)
}

/// A point (Z, c, parameter) of the extended system, or a direction in it.
#[derive(Clone, Debug)]
struct Chart {
    z: Vec<f64>,
    c: f64,
    p: f64,
}

impl Chart {
    fn of(pt: &BranchPoint) -> Self {
        Chart { z: pt.state.to_vec(), c: pt.c, p: pt.value }
    }

    fn lerp(&self, other: &Chart, t: f64) -> Chart {
        Chart {
            z: self.z.iter().zip(&other.z).map(|(a, b)| a + t * (b - a)).collect(),
            c: self.c + t * (other.c - self.c),
            p: self.p + t * (other.p - self.p),
        }
    }

    fn sub(&self, other: &Chart) -> Chart {
        Chart { z: self.z.iter().zip(&other.z).map(|(a, b)| a - b).collect(), c: self.c - other.c, p: self.p - other.p }
    }

    fn axpy(&self, h: f64, dir: &Chart) -> Chart {
        Chart {
            z: self.z.iter().zip(&dir.z).map(|(a, b)| a + h * b).collect(),
            c: self.c + h * dir.c,
            p: self.p + h * dir.p,
        }
    }
}

/// Arclength metric: weights on ‖ΔZ‖², Δc² and Δp².
struct Metric {
    w3: Vec<f64>,
    wz: f64,
    wc: f64,
}

impl Metric {
    fn new(grid: &Grid, epsilon: f64, opts: &ContinuationOptions) -> Self {
        let wz = opts.state_weight * opts.state_weight;
        Metric { w3: interleaved_weights(grid), wz, wc: wz / epsilon.powi(4) }
    }

    fn dot(&self, a: &Chart, b: &Chart) -> f64 {
        let zz: f64 = a.z.iter().zip(&b.z).zip(&self.w3).map(|((x, y), w)| x * y * w).sum();
        self.wz * zz + self.wc * a.c * b.c + a.p * b.p
    }

    fn normalize(&self, a: Chart) -> Chart {
        let n = self.dot(&a, &a).sqrt();
        Chart { z: a.z.iter().map(|v| v / n).collect(), c: a.c / n, p: a.p / n }
    }
}

fn parameter_column(
    params: &Params,
    which: ContinuationParam,
    map: &UnfoldingMap,
    value: f64,
    state: &FieldState,
    c: f64,
    grid: &Grid,
    f: &[f64],
) -> Result<Vec<f64>> {
    let h = 1e-7 * (1.0 + value.abs());
    let fp = comoving_residual(&which.set(params, map, value + h)?, state, grid, c)?.to_vec();
    Ok(fp.iter().zip(f).map(|(a, b)| (a - b) / h).collect())
}

/// Tangent at a converged point, oriented so the parameter moves along `dir`.
fn tangent_at(
    pt: &BranchPoint,
    which: ContinuationParam,
    map: &UnfoldingMap,
    dir: f64,
    metric: &Metric,
    grid: &Grid,
) -> Result<Chart> {
    let f = comoving_residual(&pt.params, &pt.state, grid, pt.c)?.to_vec();
    let dfdp = parameter_column(&pt.params, which, map, pt.value, &pt.state, pt.c, grid, &f)?;
    let j = comoving_jacobian(&pt.params, &pt.state, grid, pt.c)?;
    let lu = BorderedLu::with_borders(
        j,
        vec![velocity_column(&pt.params, &pt.state, grid)],
        vec![phase_row(&pt.state, grid)],
    )?;
    let (tz, tc) = lu.solve(&dfdp, 0.0);
    let t = Chart { z: tz.iter().map(|v| -v).collect(), c: -tc, p: 1.0 };
    let t = metric.normalize(t);
    Ok(if dir < 0.0 { Chart { z: t.z.iter().map(|v| -v).collect(), c: -t.c, p: -t.p } } else { t })
}

/// Newton on the frozen equations plus the hyperplane ⟨X − pred, tangent⟩ = 0.
fn correct(
    base: &Params,
    which: ContinuationParam,
    map: &UnfoldingMap,
    pred: &Chart,
    tangent: &Chart,
    reference: &FieldState,
    metric: &Metric,
    grid: &Grid,
    opts: &ContinuationOptions,
) -> Result<(Chart, usize)> {
    let row = phase_row(reference, grid);
    let zref = reference.to_vec();
    let arc_row: Vec<f64> = tangent.z.iter().zip(&metric.w3).map(|(t, w)| metric.wz * t * w).collect();
    let mut x = pred.clone();
    let mut history = Vec::new();
    for it in 0..=opts.newton.max_iter {
        let params = which.set(base, map, x.p)?;
        let zs = FieldState::from_slice(&x.z);
        let f = comoving_residual(&params, &zs, grid, x.c)?.to_vec();
        let r = weighted_norm(&f, &metric.w3);
        history.push(r);
        if !r.is_finite() {
            break;
        }
        let q1: f64 = x.z.iter().zip(&zref).zip(&row).map(|((a, b), w)| (a - b) * w).sum();
        let q2 = metric.dot(&x.sub(pred), tangent);
        if r <= opts.newton.tol && it > 0 {
            return Ok((x, it));
        }
        if it == opts.newton.max_iter {
            break;
        }
        let dfdp = parameter_column(base, which, map, x.p, &zs, x.c, grid, &f)?;
        let j = comoving_jacobian(&params, &zs, grid, x.c)?;
        let lu = BorderedLu::with_corner(
            j,
            vec![velocity_column(&params, &zs, grid), dfdp],
            vec![row.clone(), arc_row.clone()],
            vec![vec![0.0, 0.0], vec![metric.wc * tangent.c, tangent.p]],
        )?;
        let (dz, ds) = lu.solve_multi(&f, &[q1, q2]);
        for (zi, di) in x.z.iter_mut().zip(&dz) {
            *zi -= di;
        }
        x.c -= ds[0];
        x.p -= ds[1];
    }
    let residual = history.last().copied().unwrap_or(f64::NAN);
    Err(Error::NoConvergence { iterations: history.len().saturating_sub(1), residual, history })
}

fn point_from_chart(
    base: &Params,
    which: ContinuationParam,
    map: &UnfoldingMap,
    x: Chart,
    iterations: usize,
    grid: &Grid,
    opts: &ContinuationOptions,
) -> Result<BranchPoint> {
    let params = which.set(base, map, x.p)?;
    finish_point(&params, which, map, FieldState::from_slice(&x.z), x.c, iterations, grid, opts)
}

struct Counts {
    complex: usize,
    complex_unstable: usize,
    real_unstable: usize,
}

fn counts(p: &BranchPoint) -> Counts {
    let thr = REAL_FRACTION * p.params.epsilon.powi(2);
    let mut c = Counts { complex: 0, complex_unstable: 0, real_unstable: 0 };
    for z in &p.spectrum.eigenvalues {
        let cplx = z.im.abs() > thr;
        c.complex += cplx as usize;
        if z.re > STABILITY_TOL {
            if cplx {
                c.complex_unstable += 1;
            } else {
                c.real_unstable += 1;
            }
        }
    }
    c
}

/// Whether v is mapped to −v by Z(x) → −Z(−x), i.e. breaks the symmetry.
pub fn is_symmetry_breaking(v: &[f64]) -> bool {
    let s = FieldState::from_slice(v);
    let r = s.reflect();
    let plus = s.axpy(1.0, &r).max_abs();
    let minus = s.axpy(-1.0, &r).max_abs();
    plus < minus
}

fn critical(p: &BranchPoint, complex: bool) -> Option<(Complex64, Vec<f64>)> {
    let thr = REAL_FRACTION * p.params.epsilon.powi(2);
    let idx = (0..p.spectrum.eigenvalues.len())
        .filter(|&i| (p.spectrum.eigenvalues[i].im.abs() > thr) == complex)
        .min_by(|&a, &b| p.spectrum.eigenvalues[a].re.abs().total_cmp(&p.spectrum.eigenvalues[b].re.abs()))?;
    let v = p.spectrum.vectors.get(idx).map(|v| v.iter().map(|z| z.re).collect()).unwrap_or_default();
    Some((p.spectrum.eigenvalues[idx], v))
}

/// Hopf when the number of unstable complex eigenvalues changes while the
/// number of complex ones does not (a collision on the real axis is not a
/// Hopf point); fold or pitchfork when the parity of unstable real ones
/// changes. Each change is located by bisection along the chord.
pub fn detect_bifurcation(
    prev: &BranchPoint,
    next: &BranchPoint,
    which: ContinuationParam,
    grid: &Grid,
    opts: &ContinuationOptions,
) -> Result<Vec<Bifurcation>> {
    let map = UnfoldingMap::for_params(&prev.params)?;
    let metric = Metric::new(grid, prev.params.epsilon, opts);
    let (ca, cb) = (counts(prev), counts(next));
    let hopf = ca.complex == cb.complex && ca.complex_unstable != cb.complex_unstable;
    let real = ca.real_unstable % 2 != cb.real_unstable % 2;
    let mut out = Vec::new();
    for (complex, hit) in [(true, hopf), (false, real)] {
        if !hit {
            continue;
        }
        let key = |c: &Counts| if complex { c.complex_unstable } else { c.real_unstable % 2 };
        let base = key(&ca);
        let (mut lo, mut hi) = (prev.clone(), next.clone());
        let mut guard = 0;
        while (hi.value - lo.value).abs() > opts.locate_tol && guard < 60 {
            guard += 1;
            let (a, b) = (Chart::of(&lo), Chart::of(&hi));
            let chord = metric.normalize(b.sub(&a));
            if !chord.p.is_finite() {
                break;
            }
            let pred = a.lerp(&b, 0.5);
            let (x, it) = correct(&lo.params, which, &map, &pred, &chord, &lo.state, &metric, grid, opts)?;
            let m = point_from_chart(&lo.params, which, &map, x, it, grid, opts)?;
            if key(&counts(&m)) == base {
                lo = m;
            } else {
                hi = m;
            }
        }
        let dist = |p: &BranchPoint| critical(p, complex).map_or(f64::INFINITY, |c| c.0.re.abs());
        let at = if dist(&lo) <= dist(&hi) { lo } else { hi };
        let (eigenvalue, mode) = critical(&at, complex).unwrap_or((Complex64::new(f64::NAN, 0.0), Vec::new()));
        let kind = if complex {
            BifurcationKind::Hopf
        } else if at.c.abs() < 1e-9 && at.params.gamma == 0.0 && is_symmetry_breaking(&mode) {
            BifurcationKind::Pitchfork
        } else {
            BifurcationKind::Fold
        };
        out.push(Bifurcation { kind, value: at.value, eigenvalue, mode, state: Some(at.state.clone()) });
    }
    Ok(out)
}

/// Continue from `start` until the parameter reaches `target`.
pub fn continue_branch(
    start: &BranchPoint,
    which: ContinuationParam,
    target: f64,
    grid: &Grid,
    opts: &ContinuationOptions,
) -> Result<Branch> {
    continue_from(&[start.clone()], which, target, grid, opts)
}

/// As `continue_branch`, seeding the secant with the last two of `seed`
/// (e.g. a bifurcation point and the first point past it).
pub fn continue_from(
    seed: &[BranchPoint],
    which: ContinuationParam,
    target: f64,
    grid: &Grid,
    opts: &ContinuationOptions,
) -> Result<Branch> {
    let start = seed.last().ok_or_else(|| Error::Precondition("empty seed".into()))?;
    let map = UnfoldingMap::for_params(&start.params)?;
    if !(opts.min_step > 0.0 && opts.initial_step >= opts.min_step && opts.max_step >= opts.initial_step) {
        return Err(Error::InvalidParams("step bounds must satisfy 0 < min <= initial <= max".into()));
    }
    let metric = Metric::new(grid, start.params.epsilon, opts);
    let dir = (target - start.value).signum();
    let mut tangent = match seed {
        [.., a, b] => metric.normalize(Chart::of(b).sub(&Chart::of(a))),
        _ => tangent_at(start, which, &map, dir, &metric, grid)?,
    };
    let mut points = vec![start.clone()];
    let mut h = opts.initial_step;
    let mut stall = None;
    let reached = |v: f64| (v - target) * dir >= -1e-12 * (1.0 + target.abs());
    while points.len() < opts.max_points && dir != 0.0 && !reached(points.last().unwrap().value) {
        let last = points.last().unwrap();
        let x0 = Chart::of(last);
        let mut pred = x0.axpy(h, &tangent);
        let mut tan = tangent.clone();
        // land exactly on the target when the step would overshoot it
        let overshoot = (pred.p - target) * dir > 0.0;
        if overshoot {
            let t = (target - x0.p) / (pred.p - x0.p);
            pred = x0.axpy(h * t, &tangent);
            tan = Chart { z: vec![0.0; x0.z.len()], c: 0.0, p: 1.0 };
        }
        let attempt = correct(&last.params, which, &map, &pred, &tan, &last.state, &metric, grid, opts);
        let accepted = attempt.ok().filter(|(x, _)| {
            let step = metric.normalize(x.sub(&x0));
            metric.dot(&step, &tangent) > 0.5
        });
        match accepted {
            Some((x, it)) => {
                let step = metric.dot(&x.sub(&x0), &x.sub(&x0)).sqrt();
                let new_tangent = metric.normalize(x.sub(&x0));
                let mut p = point_from_chart(&last.params, which, &map, x, it, grid, opts)?;
                if opts.detect {
                    p.bifurcations = detect_bifurcation(last, &p, which, grid, opts)?;
                }
                points.push(p);
                if step > 0.0 {
                    tangent = new_tangent;
                }
                if it <= 3 {
                    h = (1.5 * h).min(opts.max_step);
                }
            }
            None => {
                h *= 0.5;
                if h < opts.min_step {
                    stall = Some(format!("step fell below {:.1e} at {} = {:.8}", opts.min_step, which, last.value));
                    break;
                }
            }
        }
    }
    Ok(Branch { parameter: which, points, stall })
}

/// Leave a pitchfork along its critical mode: Newton on (Z, c, parameter) with
/// ⟨Z − Z_pf, mode⟩ = δ. `direction` picks the sign of δ and hence of c.
/// Returns the bifurcation point and the new point, ready for `continue_from`.
pub fn branch_switch(
    at: &BranchPoint,
    bif: &Bifurcation,
    which: ContinuationParam,
    delta: f64,
    direction: f64,
    grid: &Grid,
    opts: &ContinuationOptions,
) -> Result<[BranchPoint; 2]> {
    if bif.mode.len() != 3 * grid.len() {
        return Err(Error::Precondition("bifurcation carries no critical mode".into()));
    }
    let map = UnfoldingMap::for_params(&at.params)?;
    let base_state = bif.state.clone().unwrap_or_else(|| at.state.clone());
    let base_params = which.set(&at.params, &map, bif.value)?;
    let origin = solve_point(&base_params, which, &map, &base_state, 0.0, grid, opts)?;
    let w3 = interleaved_weights(grid);
    let nm = weighted_norm(&bif.mode, &w3);
    let mode: Vec<f64> = bif.mode.iter().map(|v| v / nm).collect();
    let mut d = delta.abs();
    for _ in 0..4 {
        let shift = direction.signum() * d;
        let pred = Chart { z: origin.state.to_vec().iter().zip(&mode).map(|(a, m)| a + shift * m).collect(), c: 0.0, p: bif.value };
        // hyperplane ⟨Z − pred, mode⟩ = 0 written as an arclength constraint
        let metric = Metric { w3: w3.clone(), wz: 1.0, wc: 0.0 };
        let tan = Chart { z: mode.clone(), c: 0.0, p: 0.0 };
        if let Ok((x, it)) = correct(&origin.params, which, &map, &pred, &tan, &origin.state, &metric, grid, opts) {
            if x.c.abs() > 1e-9 {
                let p = point_from_chart(&origin.params, which, &map, x, it, grid, opts)?;
                return Ok([origin, p]);
            }
        }
        d *= 2.0;
    }
    Err(Error::Solver("branch switch fell back onto the symmetric branch".into()))
}
