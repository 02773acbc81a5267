//! Normal-form coefficients of the reduced front dynamics and the affine map
//! between unfolding coordinates (g1, g2) and model parameters (α, β).

use serde::Serialize;
use std::f64::consts::SQRT_2;

use crate::asymptotics::{evans_taylor_aij, kappa_gradients, organizing_center, EvansCoeffs};
use crate::error::{Error, Result};
use crate::model::Params;
use crate::reduced::boundary_slopes;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormalFormCoeffs {
    pub g30: f64,
    pub g40: f64,
    /// Gradient of g1 with respect to the (α, β) offset.
    pub g11: [f64; 2],
    /// Gradient of g2 with respect to the (α, β) offset.
    pub g21: [f64; 2],
    pub g1: f64,
    pub g2: f64,
}

fn params_at(alpha: f64, beta: f64, tau_hat: f64, theta_hat: f64, diff_d: f64) -> Params {
    Params { epsilon: 0.0, alpha, beta, gamma: 0.0, tau_hat, theta_hat, diff_D: diff_d }
}

/// Cubic and c²c' coefficients as ratios of Taylor coefficients (normalization-free).
pub fn cubic_coeffs_from_aij(a: &EvansCoeffs) -> (f64, f64) {
    let g30 = -a.a20 / (3.0 * a.a02);
    let g40 = -(a.a21 - a.a20 * a.a03 / a.a02) / a.a02;
    (g30, g40)
}

pub fn normal_form_coeffs(tau_hat: f64, theta_hat: f64, diff_d: f64) -> Result<NormalFormCoeffs> {
    let (a0, b0) = organizing_center(tau_hat, theta_hat, diff_d)?;
    let a = evans_taylor_aij(&params_at(a0, b0, tau_hat, theta_hat, diff_d));
    let (g30, g40) = cubic_coeffs_from_aij(&a);
    let gk = kappa_gradients(tau_hat, theta_hat, diff_d);
    let (t, th) = (tau_hat, theta_hat);
    let s11 = 6.0 * SQRT_2 / (5.0 * t * th);
    let s21 = -3.0 / (5.0 * SQRT_2 * t * th);
    let g11 = [s11 * gk[0][0], s11 * gk[0][1]];
    let g21 = [
        s21 * (3.0 * gk[1][0] - 3.5 * (t + th) * gk[0][0]),
        s21 * (3.0 * gk[1][1] - 3.5 * (t + th) * gk[0][1]),
    ];
    Ok(NormalFormCoeffs { g30, g40, g11, g21, g1: 0.0, g2: 0.0 })
}

/// g11, g21 from gradients of a00, a01 (finite differences in α, β) at the
/// organizing center; the κ-gradient route in `normal_form_coeffs` must agree.
pub fn linear_coeffs_from_aij(tau_hat: f64, theta_hat: f64, diff_d: f64) -> Result<([f64; 2], [f64; 2])> {
    let (a0, b0) = organizing_center(tau_hat, theta_hat, diff_d)?;
    let at = |al: f64, be: f64| evans_taylor_aij(&params_at(al, be, tau_hat, theta_hat, diff_d));
    let base = at(a0, b0);
    let h = 1e-3;
    let mut ga00 = [0.0; 2];
    let mut ga01 = [0.0; 2];
    for (k, (da, db)) in [(h, 0.0), (0.0, h)].into_iter().enumerate() {
        let plus = at(a0 + da, b0 + db);
        let minus = at(a0 - da, b0 - db);
        ga00[k] = (plus.a00 - minus.a00) / (2.0 * h);
        ga01[k] = (plus.a01 - minus.a01) / (2.0 * h);
    }
    let g11 = [-ga00[0] / base.a02, -ga00[1] / base.a02];
    let r = base.a03 / base.a02;
    let g21 = [-(ga01[0] - ga00[0] * r) / base.a02, -(ga01[1] - ga00[1] * r) / base.a02];
    Ok((g11, g21))
}

/// g30 = (1/5)(D²τ̂ − θ̂) / (D²(τ̂ − θ̂)).
pub fn g30_closed_form(tau_hat: f64, theta_hat: f64, diff_d: f64) -> f64 {
    let d2 = diff_d * diff_d;
    0.2 * (d2 * tau_hat - theta_hat) / (d2 * (tau_hat - theta_hat))
}

/// g40 = −(3/40)(3(D²τ̂² − θ̂²) + 7τ̂θ̂(1 − D²)) / (D²(τ̂ − θ̂)).
pub fn g40_closed_form(tau_hat: f64, theta_hat: f64, diff_d: f64) -> f64 {
    let d2 = diff_d * diff_d;
    let (t, th) = (tau_hat, theta_hat);
    -0.075 * (3.0 * (d2 * t * t - th * th) + 7.0 * t * th * (1.0 - d2)) / (d2 * (t - th))
}

/// Prefactor p in g30 = −p κ3 / (τ̂θ̂) consistent with the ratio form.
pub const G30_KAPPA3_PREFACTOR: f64 = 3.0 * SQRT_2 / 20.0;
/// The competing prefactor 3/(20√2), exactly half of `G30_KAPPA3_PREFACTOR`.
pub const G30_KAPPA3_PREFACTOR_HALF: f64 = 3.0 / (20.0 * SQRT_2);

pub fn g30_from_kappa3(kappa3: f64, tau_hat: f64, theta_hat: f64, prefactor: f64) -> f64 {
    -prefactor * kappa3 / (tau_hat * theta_hat)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UnfoldingMap {
    pub alpha0: f64,
    pub beta0: f64,
    /// Rows are ∇g1 and ∇g2 with respect to (α, β).
    pub matrix: [[f64; 2]; 2],
    pub det: f64,
}

pub fn unfolding_det_closed_form(tau_hat: f64, theta_hat: f64, diff_d: f64) -> f64 {
    54.0 / 25.0 * (tau_hat - theta_hat) / (diff_d * tau_hat * theta_hat)
}

pub fn unfolding_map(tau_hat: f64, theta_hat: f64, diff_d: f64) -> Result<UnfoldingMap> {
    let (alpha0, beta0) = organizing_center(tau_hat, theta_hat, diff_d)?;
    let (t, th, d) = (tau_hat, theta_hat, diff_d);
    let s = 3.0 * SQRT_2 / 5.0;
    let matrix = [
        [s * 2.0 / th, s * 2.0 / (d * t)],
        [s * (t + 7.0 * th) / (4.0 * th), s * (th + 7.0 * t) / (4.0 * d * t)],
    ];
    let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
    Ok(UnfoldingMap { alpha0, beta0, matrix, det })
}

impl UnfoldingMap {
    pub fn for_params(p: &Params) -> Result<Self> {
        unfolding_map(p.tau_hat, p.theta_hat, p.diff_D)
    }
}

pub fn params_to_g(alpha: f64, beta: f64, map: &UnfoldingMap) -> Result<(f64, f64)> {
    let (da, db) = (alpha - map.alpha0, beta - map.beta0);
    let m = &map.matrix;
    Ok((m[0][0] * da + m[0][1] * db, m[1][0] * da + m[1][1] * db))
}

pub fn g_to_params(g1: f64, g2: f64, map: &UnfoldingMap) -> Result<(f64, f64)> {
    let m = &map.matrix;
    let scale = m.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
    if !(map.det.abs() > 1e-14 * scale * scale) {
        return Err(Error::Degenerate(format!("unfolding map determinant {}", map.det)));
    }
    let da = (m[1][1] * g1 - m[0][1] * g2) / map.det;
    let db = (-m[1][0] * g1 + m[0][0] * g2) / map.det;
    Ok((map.alpha0 + da, map.beta0 + db))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Boundary {
    OrganizingCenter,
    /// Hopf line of the stationary front, g2 = 0 with g1 < 0.
    Hopf,
    /// Symmetry-breaking line g1 = 0.
    Pitchfork,
    /// Hopf of the travelling fronts.
    HopfTravelling,
    /// Homoclinic loops of the saddle at the origin.
    Homoclinic,
    /// Saddle-node of large symmetric cycles.
    CycleFold,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RegionTag {
    Region(u8),
    Boundary(Boundary),
}

/// Region of the (g1, g2) plane for g30, g40 < 0; points within `tol` of a
/// boundary curve get the boundary tag.
pub fn classify_region(g1: f64, g2: f64, coeffs: &NormalFormCoeffs) -> Result<RegionTag> {
    classify_region_tol(g1, g2, coeffs, 1e-12)
}

pub fn classify_region_tol(g1: f64, g2: f64, coeffs: &NormalFormCoeffs, tol: f64) -> Result<RegionTag> {
    if !(coeffs.g30 < 0.0 && coeffs.g40 < 0.0) {
        return Err(Error::Unsupported(format!(
            "region map covers g30, g40 < 0 only (g30 = {}, g40 = {})",
            coeffs.g30, coeffs.g40
        )));
    }
    use Boundary::*;
    if g1.abs() <= tol && g2.abs() <= tol {
        return Ok(RegionTag::Boundary(OrganizingCenter));
    }
    if g1.abs() <= tol {
        return Ok(RegionTag::Boundary(Pitchfork));
    }
    if g1 < 0.0 {
        if g2.abs() <= tol {
            return Ok(RegionTag::Boundary(Hopf));
        }
        return Ok(RegionTag::Region(if g2 < 0.0 { 1 } else { 2 }));
    }
    // g1 > 0: compare g2 against lines g2 = r T g1 with T = g40/g30
    let slopes = boundary_slopes();
    let tg1 = coeffs.g40 / coeffs.g30 * g1;
    for (r, tag) in [(1.0, HopfTravelling), (slopes.homoclinic, Homoclinic), (slopes.cycle_fold, CycleFold)] {
        if (g2 - r * tg1).abs() <= tol {
            return Ok(RegionTag::Boundary(tag));
        }
    }
    let ratio = g2 / tg1;
    Ok(RegionTag::Region(if ratio > 1.0 {
        3
    } else if ratio > slopes.homoclinic {
        4
    } else if ratio > slopes.cycle_fold {
        5
    } else {
        6
    }))
}
