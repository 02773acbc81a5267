use std::f64::consts::{PI, SQRT_2};

use frontlab::asymptotics::*;
use frontlab::model::{make_grid, Params, DEFAULT_D, DEFAULT_TAU, DEFAULT_THETA};
use frontlab::normal_form::{g_to_params, unfolding_map};
use frontlab::Error;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

const T: f64 = DEFAULT_TAU;
const TH: f64 = DEFAULT_THETA;
const D: f64 = DEFAULT_D;

/// Organizing center by Cramer's rule on the two linear conditions.
fn center_oracle(t: f64, th: f64, d: f64) -> (f64, f64) {
    let (a11, a12, a21, a22) = (t, th / d, t * t, th * th / d);
    let rhs = 2.0 * SQRT_2 / 3.0;
    let det = a11 * a22 - a12 * a21;
    (rhs * a22 / det, -rhs * a21 / det)
}

fn center() -> Params {
    let (a, b) = organizing_center(T, TH, D).unwrap();
    Params::defaults(a, b)
}

fn fig3() -> Params {
    let map = unfolding_map(T, TH, D).unwrap();
    let (a, b) = g_to_params(-0.005, 0.02, &map).unwrap();
    Params::defaults(a, b)
}

#[test]
fn kappas_constant_term() {
    let k = kappas(&Params::defaults(0.0, 0.0));
    assert!((k.kappa1 + 2.0 * SQRT_2 / 3.0).abs() < 1e-15);
    assert!((k.kappa1 + 0.9428).abs() < 1e-4);
    assert_eq!((k.kappa2, k.kappa3), (0.0, 0.0));
}

#[test]
fn kappas_at_center() {
    let (a, b) = center_oracle(T, TH, D);
    let k = kappas(&Params::defaults(a, b));
    assert!(k.kappa1.abs() < 1e-14 && k.kappa2.abs() < 1e-12);
    let k3 = a * T.powi(3) + b * TH.powi(3) / D.powi(3);
    assert!((k.kappa3 - k3).abs() < 1e-12);
    assert!((k.kappa3 - 14.70).abs() < 0.01, "{}", k.kappa3);
}

#[test]
fn organizing_center_values() {
    let (a, b) = organizing_center(T, TH, D).unwrap();
    let (ao, bo) = center_oracle(T, TH, D);
    assert!((a - ao).abs() < 1e-14 && (b - bo).abs() < 1e-14);
    assert!((a - 0.3868).abs() < 5e-4 && (b + 0.1508).abs() < 5e-4);
    assert!(matches!(organizing_center(1.0, 1.0, 2.0), Err(Error::Degenerate(_))));
}

#[test]
fn front_is_odd_with_unit_tails() {
    let p = center();
    let g = make_grid(10.0, 1025, p.epsilon).unwrap();
    let z = asymptotic_front(&p, &g);
    let mid = g.len() / 2;
    assert_eq!(g.nodes[mid], 0.0);
    assert_eq!((z.u[mid], z.v[mid], z.w[mid]), (0.0, 0.0, 0.0));
    let n = g.len() - 1;
    assert!((z.v[n] - 1.0).abs() <= (-10.0f64).exp() * 1.0001);
    assert!((z.v[0] + 1.0).abs() <= (-10.0f64).exp() * 1.0001);
    assert!((z.u[n] - 1.0).abs() < 1e-15);
    for i in 0..g.len() {
        assert!((z.u[i] + z.u[n - i]).abs() < 1e-15);
    }
}

#[test]
fn existence_condition_basics() {
    let p = Params { gamma: 0.013, ..fig3() };
    assert_eq!(existence_gamma(0.0, &p), 0.013);
    let q = fig3();
    for c in [0.01, 0.3, 1.7] {
        assert!((existence_gamma(-c, &q) + existence_gamma(c, &q)).abs() < 1e-15);
    }
    let v = existence_gamma(0.1, &center());
    let cubic = -kappas(&center()).kappa3 * 1e-3 / 16.0;
    assert!((cubic + 9.19e-4).abs() < 1e-5);
    assert!((v - cubic).abs() < 0.05 * cubic.abs(), "{v}");
    let tay = taylor_existence(&center()).unwrap();
    assert!((tay.eval(0.1) - v).abs() < 0.02 * v.abs());
}

#[test]
fn taylor_needs_zero_gamma() {
    let p = Params { gamma: 0.01, ..center() };
    assert!(matches!(taylor_existence(&p), Err(Error::Unsupported(_))));
}

#[test]
fn taylor_trivial_params() {
    let t = taylor_existence(&Params::defaults(0.0, 0.0)).unwrap();
    assert!((t.c1 + SQRT_2 / 3.0).abs() < 1e-15);
    assert_eq!((t.c3, t.c5), (0.0, 0.0));
}

#[test]
fn fifth_order_coefficient_at_double_degeneracy() {
    // κ1 = κ3 = 0
    let m = nalgebra::Matrix2::new(T, TH / D, T.powi(3), TH.powi(3) / D.powi(3));
    let ab = m.lu().solve(&nalgebra::Vector2::new(2.0 * SQRT_2 / 3.0, 0.0)).unwrap();
    let p = Params::defaults(ab[0], ab[1]);
    let t = taylor_existence(&p).unwrap();
    let expect = -SQRT_2 / 128.0 * T * T * (TH / D).powi(2);
    assert!(t.c1.abs() < 1e-14 && t.c3.abs() < 1e-12);
    assert!((t.c5 - expect).abs() < 1e-12 * expect.abs());
}

/// Least-squares odd polynomial in s = c/h through s^11 on |c| ≤ h.
fn odd_fit(f: impl Fn(f64) -> f64, h: f64) -> Vec<f64> {
    let m = 200;
    let deg = 6;
    let a = DMatrix::from_fn(m, deg, |i, j| {
        let s = -1.0 + 2.0 * i as f64 / (m - 1) as f64;
        s.powi(2 * j as i32 + 1)
    });
    let b = DVector::from_fn(m, |i, _| f(h * (-1.0 + 2.0 * i as f64 / (m - 1) as f64)));
    let x = a.svd(true, true).solve(&b, 1e-14).unwrap();
    (0..deg).map(|j| x[j] / h.powi(2 * j as i32 + 1)).collect()
}

#[test]
fn taylor_matches_polynomial_fit() {
    for p in [center(), fig3(), Params::defaults(0.5, -0.3)] {
        let t = taylor_existence(&p).unwrap();
        let fit = odd_fit(|c| existence_gamma(c, &p), 0.05);
        for (got, want) in [(t.c1, fit[0]), (t.c3, fit[1]), (t.c5, fit[2])] {
            let tol = 1e-4 * want.abs().max(1e-9);
            assert!((got - want).abs() <= tol, "{got} vs fit {want}");
        }
    }
}

#[test]
fn nontrivial_existence_root() {
    let mut p = center();
    p.alpha += 1e-4;
    let k = kappas(&p);
    assert!(k.kappa1 * k.kappa3 > 0.0);
    // bisection on Γ for the positive root
    let (mut lo, mut hi) = (1e-3, 0.1);
    assert!(existence_gamma(lo, &p) * existence_gamma(hi, &p) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if existence_gamma(mid, &p) * existence_gamma(lo, &p) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c2 = lo * lo;
    let pred = 8.0 * k.kappa1 / k.kappa3;
    assert!((c2 - pred).abs() < 0.01 * pred, "{c2} vs {pred}");
}

#[test]
fn evans_vanishes_at_translation() {
    for p in [center(), fig3()] {
        for c in [0.0, 0.05, -0.2, 1.0] {
            assert!(evans_eval(Complex64::new(0.0, 0.0), c, &p).unwrap().norm() < 1e-15);
        }
    }
}

/// Taylor coefficients of λ ↦ f(λ) at 0 by the trapezoid rule on a circle.
fn cauchy(f: impl Fn(Complex64) -> Complex64, r: f64, k: usize) -> f64 {
    let n = 64;
    let mut s = Complex64::new(0.0, 0.0);
    for j in 0..n {
        let z = Complex64::from_polar(r, 2.0 * PI * j as f64 / n as f64);
        s += f(z) / z.powi(k as i32);
    }
    (s / n as f64).re
}

#[test]
fn evans_low_order_derivatives_follow_kappas() {
    for p in [fig3(), Params::defaults(0.5, -0.3)] {
        let k = kappas(&p);
        let f = |z: Complex64| evans_eval(z, 0.0, &p).unwrap();
        let d1 = cauchy(f, 0.02, 1);
        let d2 = 2.0 * cauchy(f, 0.02, 2);
        assert!((d1 - 0.25 * k.kappa1).abs() < 1e-10 * k.kappa1.abs().max(1.0));
        assert!((d2 + 0.375 * k.kappa2).abs() < 1e-9 * k.kappa2.abs().max(1.0));
        assert!((evans_derivative(Complex64::new(0.0, 0.0), 0.0, &p).unwrap().re - d1).abs() < 1e-12);
    }
}

#[test]
fn taylor_table_matches_finite_differences() {
    for p in [fig3(), Params::defaults(0.5, -0.3)] {
        let a = evans_taylor_aij(&p);
        // coefficient of λ^(j+1) in D at fixed c, then Richardson in c² for the c² terms
        let coef = |c: f64, j: usize| cauchy(|z| evans_eval(z, c, &p).unwrap(), 0.02, j + 1);
        let c2 = |j: usize| {
            let h = 0.005;
            let d = |h: f64| (coef(h, j) - coef(0.0, j)) / (h * h);
            (4.0 * d(h / 2.0) - d(h)) / 3.0
        };
        let pairs = [
            (a.a00, coef(0.0, 0)),
            (a.a01, coef(0.0, 1)),
            (a.a02, coef(0.0, 2)),
            (a.a03, coef(0.0, 3)),
            (a.a20, c2(0)),
            (a.a21, c2(1)),
        ];
        for (i, (got, fd)) in pairs.into_iter().enumerate() {
            assert!((got - fd).abs() <= 1e-6 * fd.abs(), "coefficient {i}: {got} vs {fd}");
        }
    }
}

#[test]
fn taylor_table_at_center() {
    let a = evans_taylor_aij(&center());
    assert!((a.a02 + 5.0 * SQRT_2 / 48.0 * T * TH).abs() < 1e-12);
    assert!((a.a02 + 6.202).abs() < 1e-3);
    assert!((a.a20 + 3.0 / 32.0 * 14.70).abs() < 2e-3);
    assert!(a.a00.abs() < 1e-15 && a.a01.abs() < 1e-12);
}

#[test]
fn evans_roots_trivial_params() {
    let r = evans_roots(&Params::defaults(0.0, 0.0), 0.0).unwrap();
    assert_eq!(r.count, 1);
    assert_eq!(r.zero_multiplicity, 1);
    assert!(!r.anomaly);
}

#[test]
fn evans_roots_triple_at_center() {
    let r = evans_roots(&center(), 0.0).unwrap();
    assert_eq!(r.zero_multiplicity, 3);
    assert_eq!(r.count, 3);
    assert!(r.roots.iter().all(|z| z.norm() < 1e-12));
}

#[test]
fn evans_roots_past_hopf() {
    let r = evans_roots(&fig3(), 0.0).unwrap();
    let pair: Vec<_> = r.roots.iter().filter(|z| z.im.abs() > 1e-6).collect();
    assert_eq!(pair.len(), 2);
    assert!(pair.iter().all(|z| z.re > 0.0 && z.re < 0.5 * z.im.abs()));
    assert!((pair[0].conj() - pair[1]).norm() < 1e-10);
    for z in &r.roots {
        assert!(evans_eval(*z, 0.0, &fig3()).unwrap().norm() < 1e-12);
    }
}

#[test]
fn branch_cut_is_rejected() {
    let p = center();
    let lam = Complex64::new(-1.0 / T, 0.0);
    assert!(matches!(evans_eval(lam, 0.0, &p), Err(Error::BranchCut(_))));
}

#[test]
fn closed_form_values() {
    let e = closed_eigenfunctions(&center(), 0.0).unwrap();
    assert_eq!(e.h_v, 1.0);
    assert!((e.h_w - 1.0 / D).abs() < 1e-15);
    assert!((e.psi(0.0).unwrap()[1] + 2.105).abs() < 1e-12);
    let v = e.psi_tilde(1.0).unwrap()[1];
    assert!((v - T * T / 8.0 * 7.0 * (-1.0f64).exp()).abs() < 1e-12);
    assert!((e.psi_tilde(0.0).unwrap()[1] - 3.0 * T * T / 8.0).abs() < 1e-12);
}

#[test]
fn generalized_eigenfunctions_need_degeneracy() {
    let e = closed_eigenfunctions(&fig3(), 0.0).unwrap();
    assert!(matches!(e.psi(2.0), Err(Error::Precondition(_))));
    assert!(matches!(e.psi_tilde(2.0), Err(Error::Precondition(_))));
}

#[test]
fn slow_profiles_continuous_at_matching_points() {
    // leading-order matching: the slow tails at x → 0 meet the fast-field constants
    let e = closed_eigenfunctions(&center(), 0.0).unwrap();
    let p = center();
    let x0 = 1.001 * p.epsilon.sqrt();
    let (fast_psi, slow_psi) = (e.psi(0.0).unwrap(), e.psi(x0).unwrap());
    let (fast_pt, slow_pt) = (e.psi_tilde(0.0).unwrap(), e.psi_tilde(x0).unwrap());
    for k in 1..3 {
        assert!((fast_psi[k] - slow_psi[k]).abs() < 0.2 * fast_psi[k].abs());
        assert!((fast_pt[k] - slow_pt[k]).abs() < 0.2 * fast_pt[k].abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn static_form_is_twice_moving_form(re in -0.2f64..3.0, im in -3.0f64..3.0) {
        let p = fig3();
        let lam = Complex64::new(re, im);
        let a = evans_static(lam, &p).unwrap();
        let b = evans_eval(lam, 0.0, &p).unwrap();
        prop_assert!((a - 2.0 * b).norm() <= 1e-13 * (1.0 + a.norm()));
    }

    #[test]
    fn evans_is_even_in_speed(re in 0.0f64..2.0, im in -2.0f64..2.0, c in -1.0f64..1.0) {
        let p = fig3();
        let lam = Complex64::new(re, im);
        let a = evans_eval(lam, c, &p).unwrap();
        let b = evans_eval(lam, -c, &p).unwrap();
        prop_assert!((a - b).norm() <= 1e-15 * (1.0 + a.norm()));
    }

    #[test]
    fn kappas_are_linear(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let k0 = kappas(&Params::defaults(0.0, 0.0));
        let k1 = kappas(&Params::defaults(a, b));
        let k2 = kappas(&Params::defaults(2.0 * a, 2.0 * b));
        let tol = 1e-12 * (1.0 + k2.kappa3.abs());
        prop_assert!((k2.kappa1 - k0.kappa1 - 2.0 * (k1.kappa1 - k0.kappa1)).abs() < tol);
        prop_assert!((k2.kappa2 - 2.0 * k1.kappa2).abs() < tol);
        prop_assert!((k2.kappa3 - 2.0 * k1.kappa3).abs() < tol);
    }

    #[test]
    fn center_zeroes_kappas(t in 0.5f64..20.0, th in 0.5f64..20.0, d in 1.01f64..5.0) {
        prop_assume!((t - th).abs() > 0.1);
        let (a, b) = organizing_center(t, th, d).unwrap();
        let k = kappas(&Params { alpha: a, beta: b, tau_hat: t, theta_hat: th, diff_D: d, ..Params::defaults(0.0, 0.0) });
        let scale = (a * t).abs() + (b * th / d).abs() + (a * t * t).abs() + (b * th * th / d).abs();
        prop_assert!(k.kappa1.abs() <= 1e-12 * scale && k.kappa2.abs() <= 1e-12 * scale);
    }

    #[test]
    fn generalized_eigenfunctions_are_even(x in 0.0f64..8.0) {
        let e = closed_eigenfunctions(&center(), 0.0).unwrap();
        prop_assert_eq!(e.psi(x).unwrap(), e.psi(-x).unwrap());
        prop_assert_eq!(e.psi_tilde(x).unwrap(), e.psi_tilde(-x).unwrap());
        prop_assert_eq!(e.phi(x), e.phi(-x));
    }
}
