//! Newton solvers for steady fronts, at rest or in a comoving frame.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Border, BorderedLu};
use crate::model::{comoving_jacobian, comoving_residual, mass_vector, FieldState, Grid, Params};

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    /// Bound on the grid-weighted norm of the residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iter: 30 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NewtonLog {
    pub iterations: usize,
    /// Residual norm before each iteration and after the last one.
    pub history: Vec<f64>,
}

/// Node weights repeated per component in the interleaved layout.
pub fn interleaved_weights(grid: &Grid) -> Vec<f64> {
    grid.weights.iter().flat_map(|&w| [w, w, w]).collect()
}

pub fn weighted_norm(x: &[f64], w3: &[f64]) -> f64 {
    x.iter().zip(w3).map(|(a, w)| a * a * w).sum::<f64>().sqrt()
}

/// Three iterations in a row without halving the residual: round-off floor.
fn stagnated(history: &[f64]) -> bool {
    history.len() > 4 && history.windows(2).rev().take(3).all(|w| w[1] > 0.5 * w[0])
}

/// Newton on F(Z) = 0 from `guess`.
pub fn newton_correct(params: &Params, guess: &FieldState, grid: &Grid) -> Result<FieldState> {
    newton_correct_with(params, guess, grid, NewtonOptions::default()).map(|(z, _)| z)
}

pub fn newton_correct_with(
    params: &Params,
    guess: &FieldState,
    grid: &Grid,
    opts: NewtonOptions,
) -> Result<(FieldState, NewtonLog)> {
    params.validate()?;
    guess.check_on(grid)?;
    let w3 = interleaved_weights(grid);
    let mut z = guess.to_vec();
    let mut history = Vec::new();
    for it in 0..=opts.max_iter {
        let zs = FieldState::from_slice(&z);
        let f = comoving_residual(params, &zs, grid, 0.0)?.to_vec();
        let r = weighted_norm(&f, &w3);
        history.push(r);
        if !r.is_finite() {
            break;
        }
        if r <= opts.tol {
            return Ok((zs, NewtonLog { iterations: it, history }));
        }
        if it == opts.max_iter || stagnated(&history) {
            break;
        }
        let j = comoving_jacobian(params, &zs, grid, 0.0)?;
        let lu = BorderedLu::new(j, None)?;
        let (dz, _) = lu.solve(&f, 0.0);
        for (zi, di) in z.iter_mut().zip(&dz) {
            *zi -= di;
        }
    }
    let residual = history.last().copied().unwrap_or(f64::NAN);
    Err(Error::NoConvergence { iterations: history.len().saturating_sub(1), residual, history })
}

/// Steady comoving front: unknowns (Z, c) with F(Z) − c M Z_x = 0 and the
/// phase condition ⟨Z − Z_ref, ∂x Z_ref⟩ = 0.
#[derive(Clone, Debug)]
pub struct FrozenSolution {
    pub state: FieldState,
    pub c: f64,
    pub log: NewtonLog,
}

pub fn phase_row(reference: &FieldState, grid: &Grid) -> Vec<f64> {
    let d = reference.x_derivative(grid).to_vec();
    let w3 = interleaved_weights(grid);
    d.iter().zip(&w3).map(|(a, w)| a * w).collect()
}

/// Border column −M ∂x Z for the comoving unknown c.
pub fn velocity_column(params: &Params, state: &FieldState, grid: &Grid) -> Vec<f64> {
    let d = state.x_derivative(grid).to_vec();
    let m = mass_vector(params, grid.len());
    d.iter().zip(&m).map(|(a, b)| -a * b).collect()
}

pub fn frozen_newton(
    params: &Params,
    guess: &FieldState,
    c0: f64,
    reference: &FieldState,
    grid: &Grid,
    opts: NewtonOptions,
) -> Result<FrozenSolution> {
    params.validate()?;
    guess.check_on(grid)?;
    reference.check_on(grid)?;
    let w3 = interleaved_weights(grid);
    let row = phase_row(reference, grid);
    let zref = reference.to_vec();
    let mut z = guess.to_vec();
    let mut c = c0;
    let mut history = Vec::new();
    for it in 0..=opts.max_iter {
        let zs = FieldState::from_slice(&z);
        let f = comoving_residual(params, &zs, grid, c)?.to_vec();
        let r = weighted_norm(&f, &w3);
        history.push(r);
        if !r.is_finite() {
            break;
        }
        let q: f64 = z.iter().zip(&zref).zip(&row).map(|((a, b), w)| (a - b) * w).sum();
        if r <= opts.tol && it > 0 {
            return Ok(FrozenSolution { state: zs, c, log: NewtonLog { iterations: it, history } });
        }
        if it == opts.max_iter || stagnated(&history) {
            break;
        }
        let j = comoving_jacobian(params, &zs, grid, c)?;
        let col = velocity_column(params, &zs, grid);
        let lu = BorderedLu::new(j, Some(Border { col, row: row.clone() }))?;
        let (dz, dc) = lu.solve(&f, q);
        for (zi, di) in z.iter_mut().zip(&dz) {
            *zi -= di;
        }
        c -= dc;
    }
    let residual = history.last().copied().unwrap_or(f64::NAN);
    Err(Error::NoConvergence { iterations: history.len().saturating_sub(1), residual, history })
}

/// Symmetric part (Z + RZ)/2 under the reflection Z(x) → −Z(−x).
pub fn symmetrize(z: &FieldState) -> FieldState {
    z.axpy(1.0, &z.reflect()).scale(0.5)
}
