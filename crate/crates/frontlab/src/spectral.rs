//! Leading eigenvalues of the discrete linearization, the generalized kernel
//! at the triple-zero point, and the scalar interface eigenvalue.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::SQRT_2;

use crate::asymptotics::kappas;
use crate::banded::Banded;
use crate::error::{Error, Result};
use crate::linalg::{Border, BorderedLu, EigenPair, Pencil};
use crate::model::{comoving_jacobian, mass_vector, FieldState, Grid, Params};
use crate::steady::{interleaved_weights, newton_correct, phase_row, velocity_column};

pub const KRYLOV_DIM: usize = 40;
/// Start-vector seed of the Arnoldi iteration.
pub const SPECTRUM_SEED: u64 = 0x00c0ffee;

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    /// λ / ε².
    pub scaled: Vec<Complex64>,
    pub residuals: Vec<f64>,
    /// |λ_{k+1}| / |λ_k| for the first eigenvalue beyond the reported ones.
    pub gap: Option<f64>,
    #[serde(skip)]
    pub vectors: Vec<Vec<Complex64>>,
}

impl SpectrumReport {
    fn from_pairs(mut pairs: Vec<EigenPair>, k: usize, epsilon: f64) -> Self {
        pairs.sort_by(|a, b| a.value.norm().total_cmp(&b.value.norm()).then(a.value.im.total_cmp(&b.value.im)));
        let gap = if pairs.len() > k && k > 0 {
            Some(pairs[k].value.norm() / pairs[k - 1].value.norm().max(1e-300))
        } else {
            None
        };
        pairs.truncate(k);
        let e2 = epsilon * epsilon;
        SpectrumReport {
            eigenvalues: pairs.iter().map(|p| p.value).collect(),
            scaled: pairs.iter().map(|p| p.value / e2).collect(),
            residuals: pairs.iter().map(|p| p.residual).collect(),
            gap,
            vectors: pairs.into_iter().map(|p| p.vector).collect(),
        }
    }

    pub fn max_real(&self) -> f64 {
        self.eigenvalues.iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.re))
    }
}

/// The `k` eigenvalues of M⁻¹∂F nearest zero.
pub fn leading_spectrum(params: &Params, state: &FieldState, grid: &Grid, k: usize) -> Result<SpectrumReport> {
    leading_spectrum_seeded(params, state, grid, k, SPECTRUM_SEED)
}

pub fn leading_spectrum_seeded(
    params: &Params,
    state: &FieldState,
    grid: &Grid,
    k: usize,
    seed: u64,
) -> Result<SpectrumReport> {
    let j = comoving_jacobian(params, state, grid, 0.0)?;
    spectrum_of(params, &j, grid, None, k, seed)
}

/// Spectrum of the comoving problem with the velocity as an extra unknown,
/// which removes the quasi-translation mode.
pub fn frozen_spectrum(
    params: &Params,
    state: &FieldState,
    c: f64,
    grid: &Grid,
    k: usize,
) -> Result<SpectrumReport> {
    frozen_spectrum_seeded(params, state, c, grid, k, SPECTRUM_SEED)
}

pub fn frozen_spectrum_seeded(
    params: &Params,
    state: &FieldState,
    c: f64,
    grid: &Grid,
    k: usize,
    seed: u64,
) -> Result<SpectrumReport> {
    let j = comoving_jacobian(params, state, grid, c)?;
    let border = Border { col: velocity_column(params, state, grid), row: phase_row(state, grid) };
    spectrum_of(params, &j, grid, Some(border), k, seed)
}

fn spectrum_of(
    params: &Params,
    j: &Banded<f64>,
    grid: &Grid,
    border: Option<Border>,
    k: usize,
    seed: u64,
) -> Result<SpectrumReport> {
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    let mass = mass_vector(params, grid.len());
    let pencil = Pencil { k0: j, mass: &mass, border };
    let pairs = pencil.eigs_near(0.0, k + 1, KRYLOV_DIM.max(2 * k + 6), seed)?;
    Ok(SpectrumReport::from_pairs(pairs, k, params.epsilon))
}

/// (κ1, −(3/4)κ2): the first- and second-order solvability values.
pub fn slep_condition_checks(params: &Params) -> (f64, f64) {
    let k = kappas(params);
    (k.kappa1, -0.75 * k.kappa2)
}

/// ε²(3√2/2)(α + β/D).
pub fn slep_prediction(params: &Params) -> f64 {
    params.epsilon * params.epsilon * 1.5 * SQRT_2 * (params.alpha + params.beta / params.diff_D)
}

/// Generalized kernel Φ → Ψ → Ψ̃ of L = M⁻¹∂F and its adjoint chain
/// Φ* ← Ψ* ← Ψ̃* for L* = W⁻¹ ∂Fᵀ M⁻¹ W (W = trapezoid weights).
#[derive(Clone, Debug, Serialize)]
pub struct JordanChainNumeric {
    pub phi: FieldState,
    pub psi: FieldState,
    pub psi_tilde: FieldState,
    pub phi_adj: FieldState,
    pub psi_adj: FieldState,
    pub psi_tilde_adj: FieldState,
    /// Relative residuals of LΦ = 0, LΨ = ε²Φ, LΨ̃ = ε²Ψ, L*Φ* = 0,
    /// L*Ψ* = ε²Φ*, L*Ψ̃* = ε²Ψ*, each divided by the norm of the vector acted on.
    pub residuals: [f64; 6],
    pub p: [f64; 3],
    /// ⟨Φ,Φ*⟩, ⟨Φ,Ψ*⟩, ⟨Φ*,Ψ⟩.
    pub orthogonality: [f64; 3],
    /// ⟨Ψ,Ψ*⟩, ⟨Ψ̃,Φ*⟩ (both ideally p1) and ⟨Ψ̃,Ψ*⟩ (ideally p2).
    pub consistency: [f64; 3],
    /// ‖∂x Z‖ before Φ was normalized.
    pub phi_scale: f64,
    /// Ratio of the auxiliary border multiplier to the kernel multiplier; zero
    /// when the bordered operator is exactly singular.
    pub singularity_defect: f64,
    pub warnings: Vec<String>,
}

/// Bound on |κ1|, |κ2| below which parameters count as a triple zero.
pub const TRIPLE_ZERO_TOL: f64 = 1e-8;

fn apply_l(params: &Params, j: &Banded<f64>, x: &[f64]) -> Vec<f64> {
    let m = mass_vector(params, x.len() / 3);
    j.matvec(x).iter().zip(&m).map(|(a, b)| a / b).collect()
}

fn seeded(n: usize, seed: u64) -> Vec<f64> {
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5).collect()
}

struct RightSolves {
    phi: Vec<f64>,
    m_phi: Vec<f64>,
    w_phi: Vec<f64>,
    aux_col: Vec<f64>,
    aux_row: Vec<f64>,
    x0: Vec<f64>,
    s0: f64,
    t0: f64,
    x1: Vec<f64>,
    s1: f64,
}

/// Kernel and generalized kernel of the velocity-bordered operator
/// [J, −MΦ; ⟨Φ,·⟩, 0], made regular by one auxiliary border whose
/// multiplier t0 vanishes when that operator is singular.
fn right_solves(params: &Params, j: &Banded<f64>, dz: &[f64], phi_scale: f64, grid: &Grid) -> Result<RightSolves> {
    let n = grid.len();
    let w3 = interleaved_weights(grid);
    let mass = mass_vector(params, n);
    let phi: Vec<f64> = dz.iter().map(|x| x / phi_scale).collect();
    let m_phi: Vec<f64> = phi.iter().zip(&mass).map(|(a, b)| -a * b).collect();
    let w_phi: Vec<f64> = phi.iter().zip(&w3).map(|(a, b)| a * b).collect();
    let aux_col: Vec<f64> = seeded(3 * n, 0x0a11).iter().zip(&mass).map(|(a, b)| a * b).collect();
    let aux_row: Vec<f64> = seeded(3 * n, 0x0b22).iter().zip(&w3).map(|(a, b)| a * b).collect();
    let right = BorderedLu::with_borders(j.clone(), vec![m_phi.clone(), aux_col.clone()], vec![w_phi.clone(), aux_row.clone()])?;
    let (x0, s) = right.solve_multi(&vec![0.0; 3 * n], &[0.0, 1.0]);
    let mx0: Vec<f64> = x0.iter().zip(&mass).map(|(a, b)| a * b).collect();
    let (x1, r) = right.solve_multi(&mx0, &[0.0, 0.0]);
    Ok(RightSolves { phi, m_phi, w_phi, aux_col, aux_row, x0, s0: s[0], t0: s[1], x1, s1: r[0] })
}

pub fn jordan_chain(params: &Params, state: &FieldState, grid: &Grid) -> Result<JordanChainNumeric> {
    params.validate()?;
    state.check_on(grid)?;
    let mut warnings = Vec::new();
    let k = kappas(params);
    if k.kappa1.abs() > TRIPLE_ZERO_TOL || k.kappa2.abs() > TRIPLE_ZERO_TOL {
        warnings.push(format!(
            "parameters are not a triple zero of the singular limit (kappa1 = {:.3e}, kappa2 = {:.3e})",
            k.kappa1, k.kappa2
        ));
    }
    let n = grid.len();
    let e2 = params.epsilon * params.epsilon;
    let w3 = interleaved_weights(grid);
    let mass = mass_vector(params, n);
    let wdot = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(&w3).map(|((x, y), w)| x * y * w).sum::<f64>();
    let wnorm = |a: &[f64]| wdot(a, a).sqrt();

    let j = comoving_jacobian(params, state, grid, 0.0)?;
    let dz = state.x_derivative(grid).to_vec();
    let phi_scale = wnorm(&dz);
    if !(phi_scale > 0.0) {
        return Err(Error::Degenerate("state has no spatial variation".into()));
    }
    let RightSolves { phi, m_phi, w_phi, aux_col, aux_row, x0, s0, t0, x1, s1, .. } =
        right_solves(params, &j, &dz, phi_scale, grid)?;
    let zero = vec![0.0; 3 * n];
    let x0_norm = wnorm(&x0);
    let defect = (t0 * wnorm(&aux_col)).abs() / (s0.abs() * 1.0f64.max(x0_norm)).max(1e-300);
    if !(s0.abs() > 1e-14 * x0_norm.max(1e-300)) || !defect.is_finite() {
        return Err(Error::Solver(format!(
            "bordered chain system ill-conditioned (kernel multiplier {s0:.3e}, defect {defect:.3e})"
        )));
    }
    let psi: Vec<f64> = x0.iter().map(|x| e2 * x / s0).collect();
    let psi_tilde: Vec<f64> = x1.iter().zip(&psi).map(|(a, p)| e2 * e2 / s0 * a - e2 * s1 / s0 * p).collect();

    // adjoint chain in the variable y = M⁻¹ W φ*; φ* = W⁻¹ M y
    let jt = j.transpose();
    let to_adj = |y: &[f64]| -> Vec<f64> { y.iter().zip(&mass).zip(&w3).map(|((a, m), w)| a * m / w).collect() };
    let left = BorderedLu::with_borders(jt.clone(), vec![w_phi.clone(), aux_row.clone()], vec![m_phi.clone(), aux_col.clone()])?;
    let (y0, _) = left.solve_multi(&zero, &[0.0, 1.0]);
    let mut phi_adj = to_adj(&y0);
    let sc = wnorm(&phi_adj);
    phi_adj.iter_mut().for_each(|v| *v /= sc);
    let y0: Vec<f64> = y0.iter().map(|v| v / sc).collect();
    let rhs: Vec<f64> = y0.iter().zip(&mass).map(|(a, m)| e2 * a * m).collect();
    let (y1, _) = left.solve_multi(&rhs, &[0.0, 0.0]);
    let mut psi_adj = to_adj(&y1);
    let c = wdot(&psi_adj, &phi_adj);
    psi_adj.iter_mut().zip(&phi_adj).for_each(|(a, b)| *a -= c * b);
    let y1: Vec<f64> = psi_adj.iter().zip(&mass).zip(&w3).map(|((a, m), w)| a * w / m).collect();
    // Ψ̃*: Jᵀ y2 = ε² M y1 with ⟨Ψ̃*, Φ*⟩ = 0
    let norm_row: Vec<f64> = phi_adj.iter().zip(&mass).map(|(a, m)| a * m).collect();
    let third = BorderedLu::with_borders(jt.clone(), vec![w_phi.clone()], vec![norm_row])?;
    let rhs: Vec<f64> = y1.iter().zip(&mass).map(|(a, m)| e2 * a * m).collect();
    let (y2, _) = third.solve_multi(&rhs, &[0.0]);
    let psi_tilde_adj = to_adj(&y2);

    let rel = |lx: Vec<f64>, target: &[f64], scale: f64, x: &[f64]| -> f64 {
        let d: Vec<f64> = lx.iter().zip(target).map(|(a, b)| a - scale * b).collect();
        wnorm(&d) / wnorm(x)
    };
    let l_adj = |x: &[f64]| -> Vec<f64> {
        let y: Vec<f64> = x.iter().zip(&mass).zip(&w3).map(|((a, m), w)| a * w / m).collect();
        jt.matvec(&y).iter().zip(&w3).map(|(a, w)| a / w).collect()
    };
    let residuals = [
        rel(apply_l(params, &j, &phi), &zero, 0.0, &phi),
        rel(apply_l(params, &j, &psi), &phi, e2, &psi),
        rel(apply_l(params, &j, &psi_tilde), &psi, e2, &psi_tilde),
        rel(l_adj(&phi_adj), &zero, 0.0, &phi_adj),
        rel(l_adj(&psi_adj), &phi_adj, e2, &psi_adj),
        rel(l_adj(&psi_tilde_adj), &psi_adj, e2, &psi_tilde_adj),
    ];
    let p = [wdot(&phi, &psi_tilde_adj), wdot(&psi, &psi_tilde_adj), wdot(&psi_tilde, &psi_tilde_adj)];
    let orthogonality = [wdot(&phi, &phi_adj), wdot(&phi, &psi_adj), wdot(&phi_adj, &psi)];
    let consistency = [wdot(&psi, &psi_adj), wdot(&psi_tilde, &phi_adj), wdot(&psi_tilde, &psi_adj)];
    let fs = FieldState::from_slice;
    Ok(JordanChainNumeric {
        phi: fs(&phi),
        psi: fs(&psi),
        psi_tilde: fs(&psi_tilde),
        phi_adj: fs(&phi_adj),
        psi_adj: fs(&psi_adj),
        psi_tilde_adj: fs(&psi_tilde_adj),
        residuals,
        p,
        orthogonality,
        consistency,
        phi_scale,
        singularity_defect: defect,
        warnings,
    })
}

/// Parameters near the singular-limit organizing center at which the
/// velocity-bordered operator of the discrete front has a double zero.
#[derive(Clone, Debug, Serialize)]
pub struct DiscreteCenter {
    pub params: Params,
    #[serde(skip)]
    pub state: FieldState,
    /// Sum and product of the two leading scaled eigenvalues at the result.
    pub sum: f64,
    pub product: f64,
    pub iterations: usize,
}

/// Sum and product of the two leading scaled eigenvalues of the
/// velocity-bordered operator; both vanish at a double zero.
pub fn frozen_pair_invariants(params: &Params, state: &FieldState, grid: &Grid) -> Result<(f64, f64)> {
    let j = comoving_jacobian(params, state, grid, 0.0)?;
    let border = Border { col: velocity_column(params, state, grid), row: phase_row(state, grid) };
    let mass = mass_vector(params, grid.len());
    let pencil = Pencil { k0: &j, mass: &mass, border: Some(border) };
    let e2 = params.epsilon * params.epsilon;
    let (sum, prod) = pencil.pair_invariants(0.01 * e2, 30, SPECTRUM_SEED)?;
    Ok((sum / e2, prod / (e2 * e2)))
}

fn double_zero_defects(params: &Params, guess: &FieldState, grid: &Grid) -> Result<(FieldState, f64, f64)> {
    let z = newton_correct(params, guess, grid)?;
    let (sum, prod) = frozen_pair_invariants(params, &z, grid)?;
    Ok((z, sum, prod))
}

pub fn discrete_organizing_center(base: &Params, grid: &Grid) -> Result<DiscreteCenter> {
    let (a0, b0) = crate::asymptotics::organizing_center(base.tau_hat, base.theta_hat, base.diff_D)?;
    let mut p = Params { alpha: a0, beta: b0, gamma: 0.0, ..*base };
    let mut z = crate::asymptotics::asymptotic_front(&p, grid);
    let h = 1e-6;
    for it in 0..25 {
        let (zc, f1, f2) = double_zero_defects(&p, &z, grid)?;
        z = zc;
        if f1.abs() < 1e-10 && f2.abs() < 1e-12 {
            return Ok(DiscreteCenter { params: p, state: z, sum: f1, product: f2, iterations: it });
        }
        let pa = Params { alpha: p.alpha + h, ..p };
        let pb = Params { beta: p.beta + h, ..p };
        let (_, fa1, fa2) = double_zero_defects(&pa, &z, grid)?;
        let (_, fb1, fb2) = double_zero_defects(&pb, &z, grid)?;
        let m = nalgebra::Matrix2::new((fa1 - f1) / h, (fb1 - f1) / h, (fa2 - f2) / h, (fb2 - f2) / h);
        let step = m
            .lu()
            .solve(&nalgebra::Vector2::new(-f1, -f2))
            .ok_or_else(|| Error::Solver("singular Jacobian locating the discrete organizing center".into()))?;
        p.alpha += step[0];
        p.beta += step[1];
    }
    let (_, f1, f2) = double_zero_defects(&p, &z, grid)?;
    Err(Error::NoConvergence { iterations: 25, residual: f1.abs().max(f2.abs()), history: vec![f1, f2] })
}

/// Largest eigenvalue of ε²∂ₓ² + 1 − 3u² for the computed front u, and the
/// singular-limit prediction ε²(3√2/2)(α + β/D).
pub fn slep_scalar_eig(params: &Params, grid: &Grid) -> Result<(f64, f64)> {
    params.validate()?;
    let z = newton_correct(params, &crate::asymptotics::asymptotic_front(params, grid), grid)?;
    Ok((max_scalar_eigenvalue(params.epsilon, &z.u, grid)?, slep_prediction(params)))
}

/// Largest eigenvalue of ε²∂ₓ² + 1 − 3u² (Neumann) by shifted inverse iteration.
pub fn max_scalar_eigenvalue(epsilon: f64, u: &[f64], grid: &Grid) -> Result<f64> {
    let n = grid.len();
    let e2 = epsilon * epsilon;
    let mut a = Banded::<f64>::zeros(n, 1, 1);
    for i in 0..n {
        let st = grid.lap_stencil(i);
        if i > 0 {
            a.set(i, i - 1, e2 * st[0]);
        }
        a.set(i, i, e2 * st[1] + 1.0 - 3.0 * u[i] * u[i]);
        if i + 1 < n {
            a.set(i, i + 1, e2 * st[2]);
        }
    }
    // the top eigenvalue is O(ε²); everything else lies below -1
    let sigma = 0.1;
    let lu = a.add_diag(-sigma, &vec![1.0; n]).lu()?;
    let mut x = vec![1.0; n];
    let mut mu = sigma;
    for _ in 0..200 {
        let y = lu.solve(&x);
        let xy = grid.dot(&x, &y);
        let yy = grid.dot(&y, &y);
        let xx = grid.dot(&x, &x);
        let next = sigma + xx / xy;
        let ny = yy.sqrt();
        x = y.iter().map(|v| v / ny).collect();
        if (next - mu).abs() <= 1e-15 * next.abs().max(e2) {
            mu = next;
            break;
        }
        mu = next;
    }
    Ok(mu)
}
