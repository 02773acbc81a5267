use frontlab::asymptotics::{asymptotic_front, organizing_center};
use frontlab::model::*;
use frontlab::Error;
use proptest::prelude::*;

fn center() -> Params {
    let (a, b) = organizing_center(DEFAULT_TAU, DEFAULT_THETA, DEFAULT_D).unwrap();
    Params::defaults(a, b)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[test]
fn grid_resolves_interface() {
    let g = make_grid(10.0, 2048, 0.03).unwrap();
    assert!(g.min_spacing() <= 0.03 / 8.0);
    // the clustering puts the finest cells at the origin
    let mid = g.len() / 2;
    assert!(g.nodes[mid] - g.nodes[mid - 1] <= 0.03 / 8.0);
    assert_eq!(g.nodes[0], -10.0);
    assert_eq!(g.nodes[g.len() - 1], 10.0);
}

#[test]
fn grid_too_coarse_is_a_resolution_error() {
    assert!(matches!(make_grid(10.0, 10, 0.03), Err(Error::Resolution(_))));
}

#[test]
fn grid_is_symmetric_with_endpoints() {
    let g = make_grid(5.0, 1024, 0.05).unwrap();
    assert_eq!(g.nodes[0], -5.0);
    assert_eq!(*g.nodes.last().unwrap(), 5.0);
    for i in 0..g.len() {
        assert_eq!(g.nodes[i], -g.nodes[g.len() - 1 - i]);
    }
    assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
    let total: f64 = g.weights.iter().sum();
    assert!((total - 10.0).abs() < 1e-12);
}

#[test]
fn zero_state_has_zero_residual() {
    let g = make_grid(10.0, 256, 0.2).unwrap();
    let p = Params { epsilon: 0.2, ..center() };
    let r = residual(&p, &FieldState::zeros(g.len()), &g).unwrap();
    assert_eq!(r.max_abs(), 0.0);
}

#[test]
fn unit_state_residual_is_coupling_only() {
    let p = center();
    let g = make_grid(10.0, 1024, p.epsilon).unwrap();
    let r = residual(&p, &FieldState::constant(g.len(), 1.0, 1.0, 1.0), &g).unwrap();
    let expect = -p.epsilon * (p.alpha + p.beta);
    for i in 0..g.len() {
        assert!((r.u[i] - expect).abs() < 1e-14);
        assert!(r.v[i].abs() < 1e-14 && r.w[i].abs() < 1e-14);
    }
}

#[test]
fn asymptotic_front_residual_scaling() {
    // fast component: max-norm O(ε); slow components: O(√ε) in L2 away from the
    // ends (their residual lives on the O(ε) interface and is O(1) there)
    let mut prev = None;
    for &(eps, n) in &[(0.06, 1024), (0.03, 2048), (0.015, 4096)] {
        let p = Params { epsilon: eps, ..center() };
        let g = make_grid(10.0, n, eps).unwrap();
        let r = residual(&p, &asymptotic_front(&p, &g), &g).unwrap();
        let ru = max_abs(&r.u);
        assert!(ru <= 0.35 * eps, "eps {eps}: {ru}");
        let l2 = |f: &[f64]| {
            (0..n).filter(|&i| g.nodes[i].abs() < 9.0).map(|i| f[i] * f[i] * g.weights[i]).sum::<f64>().sqrt()
        };
        assert!(l2(&r.v) <= 1.05 * eps.sqrt() && l2(&r.w) <= 1.05 * eps.sqrt());
        if let Some(q) = prev {
            let ratio: f64 = q / ru;
            assert!((ratio - 2.0).abs() < 0.5, "halving ε should halve the u residual, ratio {ratio}");
        }
        prev = Some(ru);
    }
}

#[test]
fn mass_inverse_scales_components() {
    let p = Params::new(0.1, 0.0, 0.0, 0.0, 1.0, 2.0, 2.0).unwrap();
    let r = mass_inverse_apply(&p, &FieldState::constant(3, 1.0, 1.0, 1.0));
    for i in 0..3 {
        assert_eq!(r.u[i], 1.0);
        assert!((r.v[i] - 0.01).abs() < 1e-16);
        assert!((r.w[i] - 0.005).abs() < 1e-16);
    }
    let q = Params::defaults(0.0, 0.0);
    let s = mass_inverse_apply(&q, &FieldState::constant(1, 0.0, 1.0, 0.0));
    assert!((s.v[0] - 2.1378e-4).abs() < 1e-8);
}

#[test]
fn jacobian_matches_finite_differences() {
    let p = Params { gamma: 0.01, ..center() };
    let g = make_grid(10.0, 512, p.epsilon).unwrap();
    let z = asymptotic_front(&p, &g);
    let j = jacobian(&p, &z, &g).unwrap();
    let n = g.len();
    // smooth direction
    let h = FieldState {
        u: g.nodes.iter().map(|x| (0.7 * x).sin()).collect(),
        v: g.nodes.iter().map(|x| (-x * x / 8.0).exp()).collect(),
        w: g.nodes.iter().map(|x| (0.3 * x).cos()).collect(),
    };
    let jh = FieldState::from_slice(&j.matvec(&h.to_vec()));
    let f0 = residual(&p, &z, &g).unwrap();
    let err = |d: f64| {
        let f1 = residual(&p, &z.axpy(d, &h), &g).unwrap();
        let fd = f1.axpy(-1.0, &f0).scale(1.0 / d);
        fd.axpy(-1.0, &jh).to_vec().iter().map(|x| x * x).sum::<f64>().sqrt()
    };
    let scale = jh.to_vec().iter().map(|x| x * x).sum::<f64>().sqrt();
    let (e1, e2) = (err(1e-4), err(5e-5));
    assert!(e1 / e2 > 1.8, "first-order decay expected, {e1} -> {e2}");
    // central differences at δ = 1e-6
    let d = 1e-6;
    let fp = residual(&p, &z.axpy(d, &h), &g).unwrap();
    let fm = residual(&p, &z.axpy(-d, &h), &g).unwrap();
    let cd = fp.axpy(-1.0, &fm).scale(0.5 / d);
    let rel = cd.axpy(-1.0, &jh).to_vec().iter().map(|x| x * x).sum::<f64>().sqrt() / scale;
    assert!(rel < 1e-6, "{rel}");
    assert_eq!(j.dim(), 3 * n);
}

#[test]
fn jacobian_structure() {
    let p = center();
    let g = make_grid(10.0, 256, 0.06).unwrap();
    let p = Params { epsilon: 0.06, ..p };
    let j = jacobian(&p, &FieldState::zeros(g.len()), &g).unwrap();
    assert_eq!(j.bandwidths(), (3, 3));
    let i = 100;
    let lap = -(g.nodes[i + 1] - g.nodes[i - 1]) / ((g.nodes[i] - g.nodes[i - 1]) * (g.nodes[i + 1] - g.nodes[i])) * 2.0 / (g.nodes[i + 1] - g.nodes[i - 1]);
    let diag = j.get(3 * i, 3 * i) - p.epsilon * p.epsilon * lap;
    assert!((diag - 1.0).abs() < 1e-9);
    assert_eq!(j.get(3 * i, 3 * i + 1), -p.epsilon * p.alpha);
    assert_eq!(j.get(3 * i, 3 * i + 2), -p.epsilon * p.beta);
    assert_eq!(j.get(3 * i + 1, 3 * i), 1.0);
    // no coupling beyond neighbouring nodes
    assert_eq!(j.get(3 * i, 3 * (i + 2)), 0.0);
}

#[test]
fn homogeneous_root_matches_closed_form() {
    let p = center();
    let z = homogeneous_equilibrium(&p, 1.0).unwrap();
    let u = (1.0 - p.epsilon * (p.alpha + p.beta)).sqrt();
    for c in z {
        assert!((c - u).abs() < 1e-13);
    }
    assert!((z[0] - 1.0).abs() < 2.0 * p.epsilon);
}

#[test]
fn parameter_validation() {
    assert!(Params::new(-1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 2.0).is_err());
    assert!(Params::new(0.03, 0.0, 0.0, 0.0, 1.0, 2.0, 0.9).is_err());
    assert!(Params::new(0.03, 0.0, 0.0, 0.0, 0.0, 2.0, 2.0).is_err());
    let p = Params::new(0.03, 100.0, 0.0, 0.0, 1.0, 2.0, 2.0).unwrap();
    assert!(!p.warnings().is_empty());
    assert!(center().warnings().is_empty());
}

#[test]
fn shape_mismatch_is_reported() {
    let g = make_grid(10.0, 256, 0.06).unwrap();
    let r = residual(&center(), &FieldState::zeros(10), &g);
    assert!(matches!(r, Err(Error::Shape { expected: 256, got: 10 })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn residual_is_reflection_equivariant(seed in proptest::collection::vec(-1.0f64..1.0, 12), alpha in -1.0f64..1.0, beta in -1.0f64..1.0) {
        let p = Params { alpha, beta, ..Params::defaults(0.0, 0.0) };
        let g = make_grid(10.0, 256, 0.06).unwrap();
        let p = Params { epsilon: 0.06, ..p };
        let f = |k: usize, x: f64| seed[k] * (x + seed[k + 1]).sin() + seed[k + 2] * x.tanh();
        let z = FieldState {
            u: g.nodes.iter().map(|&x| f(0, x)).collect(),
            v: g.nodes.iter().map(|&x| f(3, 0.5 * x)).collect(),
            w: g.nodes.iter().map(|&x| f(6, 0.2 * x) + seed[9]).collect(),
        };
        let a = residual(&p, &z.reflect(), &g).unwrap();
        let b = residual(&p, &z, &g).unwrap().reflect();
        for (x, y) in a.to_vec().iter().zip(b.to_vec()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn mass_round_trip(vals in proptest::collection::vec(-1e3f64..1e3, 9), eps in 0.01f64..0.2) {
        let p = Params { epsilon: eps, ..Params::defaults(0.0, 0.0) };
        let z = FieldState::from_slice(&vals);
        let back = mass_apply(&p, &mass_inverse_apply(&p, &z));
        for (x, y) in back.to_vec().iter().zip(&vals) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn interleaving_round_trip(vals in proptest::collection::vec(-10.0f64..10.0, 30)) {
        prop_assert_eq!(FieldState::from_slice(&vals).to_vec(), vals);
    }
}
