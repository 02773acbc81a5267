//! Browser bindings. Every export returns a JSON string; failures come back as
//! `{"error": "..."}` so the page never has to catch.

use frontlab::asymptotics::evans_roots;
use frontlab::model::Params;
use frontlab::normal_form::{classify_region_tol, g_to_params, normal_form_coeffs, unfolding_map, RegionTag};
use frontlab::reduced::{equilibria_and_stability, integrate_with, IntegrateOptions, ReducedParams, ReducedState};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn respond(r: frontlab::Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

fn region_label(tag: RegionTag) -> String {
    match tag {
        RegionTag::Region(k) => format!("region {k}"),
        RegionTag::Boundary(b) => format!("{b:?}"),
    }
}

/// Normal-form coefficients for the time scales and diffusion ratio, plus the
/// region of (g1, g2) and the model parameters it maps to.
#[wasm_bindgen]
pub fn classify(tau: f64, theta: f64, diff_d: f64, g1: f64, g2: f64) -> String {
    respond((|| {
        Params::new(0.03, 0.0, 0.0, 0.0, tau, theta, diff_d)?;
        let nf = normal_form_coeffs(tau, theta, diff_d)?;
        let map = unfolding_map(tau, theta, diff_d)?;
        let (alpha, beta) = g_to_params(g1, g2, &map)?;
        let tag = classify_region_tol(g1, g2, &nf, 1e-9 * (g1.abs() + g2.abs()).max(1e-12))?;
        Ok(json!({
            "g30": nf.g30,
            "g40": nf.g40,
            "alpha": alpha,
            "beta": beta,
            "region": region_label(tag),
        }))
    })())
}

/// Orbit of the planar reduced system in slow time, as flat `[c, c']` pairs,
/// with the equilibria and their stability.
#[wasm_bindgen]
pub fn reduced_orbit(g1: f64, g2: f64, g30: f64, g40: f64, c0: f64, dc0: f64, t_end: f64, dt: f64) -> String {
    respond((|| {
        let p = ReducedParams { g1, g2, g30, g40, epsilon: 1.0 };
        let stride = ((t_end / dt) / 4000.0).ceil().max(1.0) as usize;
        let opts = IntegrateOptions { blowup: 1e3, stride };
        let traj = integrate_with(ReducedState::new(0.0, c0, dc0), &p, t_end, dt, opts);
        let (points, escaped) = match traj {
            Ok(t) => (t.states.iter().flat_map(|s| [s.c, s.c_tilde]).collect::<Vec<_>>(), false),
            Err(frontlab::Error::Divergence { .. }) => (Vec::new(), true),
            Err(e) => return Err(e),
        };
        let eq: Vec<Value> = equilibria_and_stability(&p)
            .iter()
            .map(|e| json!({ "c": e.c, "stability": format!("{:?}", e.stability) }))
            .collect();
        Ok(json!({ "points": points, "escaped": escaped, "equilibria": eq }))
    })())
}

/// Roots of the Evans function near the origin for a front moving at speed
/// `c` (model parameters, ε = 0.03 scaling).
#[wasm_bindgen]
pub fn evans(tau: f64, theta: f64, diff_d: f64, alpha: f64, beta: f64, c: f64) -> String {
    respond((|| {
        let p = Params::new(0.03, alpha, beta, 0.0, tau, theta, diff_d)?;
        let r = evans_roots(&p, c)?;
        let roots: Vec<[f64; 2]> = r.roots.iter().map(|z| [z.re, z.im]).collect();
        Ok(json!({
            "roots": roots,
            "zero_multiplicity": r.zero_multiplicity,
            "anomaly": r.anomaly,
            "radius": r.radius,
            "left_edge": r.left_edge,
        }))
    })())
}
