use frontlab::asymptotics::{asymptotic_front, organizing_center};
use frontlab::continuation::*;
use frontlab::model::*;
use frontlab::normal_form::{g_to_params, normal_form_coeffs, unfolding_map, UnfoldingMap};
use frontlab::steady::{interleaved_weights, newton_correct_with, weighted_norm, NewtonOptions};
use frontlab::Error;

fn map() -> UnfoldingMap {
    unfolding_map(DEFAULT_TAU, DEFAULT_THETA, DEFAULT_D).unwrap()
}

fn at_g(g1: f64, g2: f64) -> Params {
    let (a, b) = g_to_params(g1, g2, &map()).unwrap();
    Params::defaults(a, b)
}

fn sweep(which: ContinuationParam, p: &Params, target: f64, n: usize) -> (Grid, Branch) {
    let g = make_grid(10.0, n, p.epsilon).unwrap();
    let opts = ContinuationOptions::default();
    let start = solve_point(p, which, &map(), &asymptotic_front(p, &g), 0.0, &g, &opts).unwrap();
    let b = continue_branch(&start, which, target, &g, &opts).unwrap();
    assert!(b.stall.is_none(), "{:?}", b.stall);
    (g, b)
}

fn of_kind(b: &Branch, kind: BifurcationKind) -> Vec<&Bifurcation> {
    b.bifurcations().filter(|x| x.kind == kind).collect()
}

#[test]
fn newton_from_asymptotic_seed_at_center() {
    let (a, b) = organizing_center(DEFAULT_TAU, DEFAULT_THETA, DEFAULT_D).unwrap();
    let p = Params::defaults(a, b);
    let g = make_grid(10.0, 1024, p.epsilon).unwrap();
    let (z, log) = newton_correct_with(&p, &asymptotic_front(&p, &g), &g, NewtonOptions::default()).unwrap();
    assert!(log.iterations <= 8, "{:?}", log.history);
    let r = comoving_residual(&p, &z, &g, 0.0).unwrap().to_vec();
    assert!(weighted_norm(&r, &interleaved_weights(&g)) <= 1e-10);
    // quadratic contraction: r_{k+1} / r_k² stays bounded above the round-off floor
    let h: Vec<f64> = log.history.iter().copied().filter(|&r| r > 1e-10).collect();
    assert!(h.len() >= 3, "{:?}", log.history);
    for w in h.windows(2) {
        assert!(w[1] <= w[0] * w[0], "{:?}", log.history);
    }
    let rates: Vec<f64> = h.windows(2).map(|w| w[1] / w[0]).collect();
    assert!(rates.windows(2).all(|r| r[1] < 0.1 * r[0]), "{rates:?}");
}

#[test]
fn zero_seed_finds_the_trivial_state() {
    let p = at_g(-0.005, 0.02);
    let g = make_grid(10.0, 512, p.epsilon).unwrap();
    let (z, _) = newton_correct_with(&p, &FieldState::constant(g.len(), 0.0, 0.0, 0.0), &g, NewtonOptions::default()).unwrap();
    let e = homogeneous_equilibrium(&p, 0.0).unwrap();
    let base = FieldState::constant(g.len(), e[0], e[1], e[2]);
    assert!(z.axpy(-1.0, &base).max_abs() < 1e-10);
    assert!(e.iter().all(|v| v.abs() < 0.5), "{e:?}");
}

#[test]
fn newton_failure_carries_history() {
    let p = at_g(-0.005, 0.02);
    let g = make_grid(10.0, 512, p.epsilon).unwrap();
    let opts = NewtonOptions { tol: 1e-10, max_iter: 1 };
    match newton_correct_with(&p, &asymptotic_front(&p, &g), &g, opts) {
        Err(Error::NoConvergence { history, .. }) => assert_eq!(history.len(), 2),
        other => panic!("{:?}", other.map(|x| x.1)),
    }
}

#[test]
fn g2_sweep_has_one_hopf() {
    let p = at_g(-0.005, -0.01);
    let (g, b) = sweep(ContinuationParam::G2, &p, 0.015, 512);
    let hopf = of_kind(&b, BifurcationKind::Hopf);
    assert_eq!(b.bifurcations().count(), 1);
    assert_eq!(hopf.len(), 1);
    assert!((hopf[0].value - 0.001).abs() < 0.01, "{}", hopf[0].value);
    assert!(hopf[0].eigenvalue.im.abs() > 0.0);
    assert!(b.points.first().unwrap().stable && !b.points.last().unwrap().stable);
    let w3 = interleaved_weights(&g);
    for pt in &b.points {
        // symmetric branch at zero asymmetry: at rest everywhere
        assert!(pt.c.abs() < 1e-12, "{}", pt.c);
        let r = comoving_residual(&pt.params, &pt.state, &g, pt.c).unwrap().to_vec();
        assert!(weighted_norm(&r, &w3) <= 1e-10);
        assert_eq!(pt.stable, pt.spectrum.max_real() <= STABILITY_TOL);
        assert!((pt.g.0 + 0.005).abs() < 1e-12);
    }
}

#[test]
fn branch_is_continuous() {
    let p = at_g(-0.005, -0.01);
    let (g, b) = sweep(ContinuationParam::G2, &p, 0.015, 512);
    let opts = ContinuationOptions::default();
    for w in b.points.windows(2) {
        let dz = w[1].state.axpy(-1.0, &w[0].state).norm(&g);
        assert!(opts.state_weight * dz <= 1.5 * opts.max_step, "{dz}");
        assert!((w[1].value - w[0].value).abs() <= 1.5 * opts.max_step);
    }
}

#[test]
fn planted_hopf_crossing() {
    // the reduced flow puts the origin Hopf at g2 = 0 for g1 < 0; straddle it widely
    let m = map();
    let opts = ContinuationOptions::default();
    let p = at_g(-0.005, -0.02);
    let g = make_grid(10.0, 512, p.epsilon).unwrap();
    let which = ContinuationParam::G2;
    let a = solve_point(&p, which, &m, &asymptotic_front(&p, &g), 0.0, &g, &opts).unwrap();
    let q = at_g(-0.005, 0.02);
    let b = solve_point(&q, which, &m, &a.state, 0.0, &g, &opts).unwrap();
    let found = detect_bifurcation(&a, &b, which, &g, &opts).unwrap();
    assert_eq!(found.len(), 1);
    assert_eq!(found[0].kind, BifurcationKind::Hopf);
    assert!(found[0].value > -0.02 && found[0].value < 0.02);
    // the bisection tolerance is met: the critical pair sits on the axis
    assert!(found[0].eigenvalue.re.abs() < 1e-3 * p.epsilon.powi(2), "{}", found[0].eigenvalue);
}

#[test]
fn hopf_location_improves_with_epsilon() {
    let loc = |eps: f64| {
        let p = Params { epsilon: eps, ..at_g(-0.005, -0.01) };
        let (_, b) = sweep(ContinuationParam::G2, &p, 0.015, 1024);
        of_kind(&b, BifurcationKind::Hopf)[0].value
    };
    let (coarse, fine) = (loc(0.06), loc(0.03));
    assert!(fine.abs() < coarse.abs(), "{coarse} {fine}");
}

#[test]
fn g1_sweep_pitchfork_and_switch() {
    let p = at_g(-0.002, 0.042);
    let (g, b) = sweep(ContinuationParam::G1, &p, 0.003, 512);
    let pf = of_kind(&b, BifurcationKind::Pitchfork);
    assert_eq!(pf.len(), 1);
    assert!((pf[0].value - 0.0002).abs() < 0.002, "{}", pf[0].value);
    assert!(is_symmetry_breaking(&pf[0].mode));
    let at = b.points.iter().find(|x| x.bifurcations.iter().any(|y| y.kind == BifurcationKind::Pitchfork)).unwrap();
    let opts = ContinuationOptions::default();
    let which = ContinuationParam::G1;
    let up = branch_switch(at, pf[0], which, 0.05, 1.0, &g, &opts).unwrap();
    let down = branch_switch(at, pf[0], which, 0.05, -1.0, &g, &opts).unwrap();
    assert!(up[1].c.abs() > 1e-7);
    assert_eq!(up[1].c.signum(), -down[1].c.signum());
    assert!(!is_symmetry_breaking(&up[0].state.to_vec()));

    let asym = continue_from(&up, which, 0.003, &g, &opts).unwrap();
    let hopf = of_kind(&asym, BifurcationKind::Hopf);
    assert_eq!(hopf.len(), 1);
    assert!((hopf[0].value - 0.001).abs() < 0.002, "{}", hopf[0].value);
    assert!(asym.points.iter().skip(1).all(|x| x.c.abs() > 1e-7));
    let mirror = continue_from(&down, which, 0.003, &g, &ContinuationOptions { detect: false, ..opts }).unwrap();
    let (cu, cd) = (asym.points.last().unwrap().c, mirror.points.last().unwrap().c);
    assert!((cu + cd).abs() < 1e-6 * cu.abs(), "{cu} {cd}");

    // the switched branch has its own spectrum
    let last = asym.points.last().unwrap();
    let sym = b.points.last().unwrap();
    assert!((last.value - sym.value).abs() < 1e-9);
    let diff = (last.spectrum.eigenvalues[0] - sym.spectrum.eigenvalues[0]).norm();
    assert!(diff > 1e-3 * p.epsilon.powi(2), "{diff}");

    // near onset c² grows linearly in the distance from the pitchfork
    let nf = normal_form_coeffs(DEFAULT_TAU, DEFAULT_THETA, DEFAULT_D).unwrap();
    let near: Vec<(f64, f64)> = asym
        .points
        .iter()
        .map(|x| (x.value - pf[0].value, x.c.abs()))
        .filter(|&(d, _)| d > 1e-5 && d < 1e-3)
        .collect();
    assert!(near.len() >= 2, "{near:?}");
    let (a, z) = (near[0], near[near.len() - 1]);
    let slope = (z.1 / a.1).ln() / (z.0 / a.0).ln();
    assert!((slope - 0.5).abs() < 0.1, "slope {slope}");
    // and the prefactor matches −1/g30 in slow units
    let slow = (a.1 / p.epsilon.powi(2)).powi(2) / a.0;
    assert!((slow + 1.0 / nf.g30).abs() < 0.15 / nf.g30.abs(), "{slow} vs {}", -1.0 / nf.g30);
}

#[test]
fn g1_sweep_at_negative_g2_has_pitchfork() {
    let p = at_g(-0.002, -0.02);
    let (_, b) = sweep(ContinuationParam::G1, &p, 0.006, 512);
    let pf = of_kind(&b, BifurcationKind::Pitchfork);
    assert_eq!(pf.len(), 1);
    // the normal form places it at g1 = 0; the offset is O(ε)
    assert!(pf[0].value.abs() < 0.002, "{}", pf[0].value);
    assert!(b.points.iter().all(|x| x.c.abs() < 1e-12));
}

#[test]
fn switch_needs_a_mode() {
    let p = at_g(0.001, 0.042);
    let g = make_grid(10.0, 512, p.epsilon).unwrap();
    let opts = ContinuationOptions::default();
    let at = solve_point(&p, ContinuationParam::G1, &map(), &asymptotic_front(&p, &g), 0.0, &g, &opts).unwrap();
    let bif = Bifurcation {
        kind: BifurcationKind::Pitchfork,
        value: 0.001,
        eigenvalue: num_complex::Complex64::new(0.0, 0.0),
        mode: Vec::new(),
        state: None,
    };
    let r = branch_switch(&at, &bif, ContinuationParam::G1, 0.05, 1.0, &g, &opts);
    assert!(matches!(r, Err(Error::Precondition(_))));
}

#[test]
fn step_bounds_are_validated() {
    let p = at_g(-0.005, 0.02);
    let g = make_grid(10.0, 512, p.epsilon).unwrap();
    let opts = ContinuationOptions { initial_step: 1e-7, ..Default::default() };
    let start = solve_point(&p, ContinuationParam::G2, &map(), &asymptotic_front(&p, &g), 0.0, &g, &opts).unwrap();
    let r = continue_branch(&start, ContinuationParam::G2, 0.03, &g, &opts);
    assert!(matches!(r, Err(Error::InvalidParams(_))));
}

#[test]
fn tiny_step_cap_reports_stall_or_stops_at_point_limit() {
    let p = at_g(-0.005, 0.02);
    let g = make_grid(10.0, 512, p.epsilon).unwrap();
    let opts = ContinuationOptions { max_points: 3, ..Default::default() };
    let start = solve_point(&p, ContinuationParam::G2, &map(), &asymptotic_front(&p, &g), 0.0, &g, &opts).unwrap();
    let b = continue_branch(&start, ContinuationParam::G2, 0.5, &g, &opts).unwrap();
    assert_eq!(b.points.len(), 3);
    assert!(b.points.last().unwrap().value < 0.5);
}

#[test]
fn parameter_names_round_trip() {
    use ContinuationParam::*;
    for w in [Alpha, Beta, Gamma, G1, G2] {
        assert_eq!(w.to_string().parse::<ContinuationParam>().unwrap(), w);
    }
    assert!("delta".parse::<ContinuationParam>().is_err());
    let m = map();
    let p = at_g(-0.005, 0.02);
    let q = G1.set(&p, &m, 0.004).unwrap();
    assert!((G1.get(&q, &m).unwrap() - 0.004).abs() < 1e-14);
    assert!((G2.get(&q, &m).unwrap() - 0.02).abs() < 1e-14);
}

#[test]
fn gamma_zero_symmetric_branch_stays_at_rest_in_alpha() {
    let p = at_g(-0.005, 0.02);
    let (_, b) = sweep(ContinuationParam::Alpha, &p, p.alpha + 0.01, 512);
    assert!(b.points.len() > 2);
    assert!(b.points.iter().all(|x| x.c.abs() < 1e-12));
}
