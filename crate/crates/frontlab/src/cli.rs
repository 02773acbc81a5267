//! Command-line entry points. Every subcommand writes its tables and a
//! `metadata.json` into the output directory; failures write `error.json`
//! and a one-line JSON record on stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::asymptotics::{asymptotic_front, evans_eval, evans_roots_with, evans_taylor_aij, EvansRootOptions};
use crate::config::{load_config, RunConfig};
use crate::continuation::{
    branch_switch, continue_branch, continue_from, solve_point, BifurcationKind, Branch, ContinuationOptions,
    ContinuationParam,
};
use crate::error::{Error, Result};
use crate::model::{make_grid, Grid, Params};
use crate::normal_form::{classify_region, normal_form_coeffs, params_to_g, unfolding_map, UnfoldingMap};
use crate::pde::{leading_mode, oscillation_stats, perturb, simulate_frozen_with, Scheme, SimulateOptions};
use crate::reduced::{equilibria_and_stability, integrate_with, limit_cycle_scan, IntegrateOptions, ReducedParams, ReducedState};
use crate::spectral::{
    discrete_organizing_center, frozen_spectrum_seeded, jordan_chain, slep_condition_checks, slep_scalar_eig,
    SpectrumReport,
};
use crate::steady::{frozen_newton, newton_correct_with, FrozenSolution, NewtonOptions};
use crate::tables::{self, Table};

/// Offset along the critical mode when leaving a pitchfork.
const SWITCH_DELTA: f64 = 0.05;

#[derive(Parser, Debug)]
#[command(name = "frontlab", version, about = "Fronts, spectra and front dynamics near a triple-zero eigenvalue")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags mirror config keys and override the config file.
#[derive(Args, Debug, Default)]
pub struct GlobalArgs {
    /// Sectioned key = value file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub g1: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub g2: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    #[arg(long = "D", global = true, allow_hyphen_values = true)]
    pub diff_d: Option<f64>,
    #[arg(long = "L", global = true, allow_hyphen_values = true)]
    pub half_length: Option<f64>,
    #[arg(long, global = true)]
    pub nodes: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tend: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    /// Output directory (default: $FRONTLAB_OUT or ./frontlab-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Newton solve for the standing front plus its leading spectrum.
    Steady,
    /// One-parameter branch sweep with stability and bifurcation tags.
    Continue {
        /// alpha | beta | gamma | g1 | g2
        #[arg(long)]
        param: Option<ContinuationParam>,
        #[arg(long, allow_hyphen_values = true)]
        target: Option<f64>,
        /// After the first pitchfork, follow the asymmetric branch to this value.
        #[arg(long = "switch", allow_hyphen_values = true)]
        switch_target: Option<f64>,
    },
    /// Frozen-frame evolution from the perturbed standing front.
    Simulate {
        #[arg(long, allow_hyphen_values = true)]
        perturbation: Option<f64>,
        /// imex1 | ros2
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Leading eigenvalues of the front in the comoving frame.
    Spectrum {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Roots of the small-eigenvalue Evans function and its Taylor coefficients.
    Evans {
        #[arg(long, allow_hyphen_values = true)]
        c: Option<f64>,
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Normal-form coefficients and the (alpha, beta) <-> (g1, g2) map.
    Normalform,
    /// Planar reduced ODE: trajectory, equilibria and limit-cycle scan.
    Reduced,
    /// Jordan chain at the discrete organizing center and scalar eigenvalue checks.
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Steady => "steady",
            Command::Continue { .. } => "continue",
            Command::Simulate { .. } => "simulate",
            Command::Spectrum { .. } => "spectrum",
            Command::Evans { .. } => "evans",
            Command::Normalform => "normalform",
            Command::Reduced => "reduced",
            Command::Verify => "verify",
        }
    }
}

/// Config file (or defaults) with flag overrides applied, validated.
pub fn resolve_config(g: &GlobalArgs, cmd: &Command) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let m = &mut cfg.model;
    if let Some(v) = g.epsilon {
        m.epsilon = v;
    }
    if g.alpha.is_some() || g.beta.is_some() {
        m.g1 = None;
        m.g2 = None;
        m.alpha = g.alpha.or(m.alpha);
        m.beta = g.beta.or(m.beta);
    }
    if g.g1.is_some() || g.g2.is_some() {
        m.alpha = None;
        m.beta = None;
        m.g1 = g.g1.or(m.g1);
        m.g2 = g.g2.or(m.g2);
    }
    if let Some(v) = g.gamma {
        m.gamma = v;
    }
    if let Some(v) = g.tau {
        m.tau_hat = v;
    }
    if let Some(v) = g.theta {
        m.theta_hat = v;
    }
    if let Some(v) = g.diff_d {
        m.diff_d = v;
    }
    if let Some(v) = g.half_length {
        cfg.grid.half_length = v;
    }
    if let Some(v) = g.nodes {
        cfg.grid.nodes = v;
    }
    if let Some(v) = g.out.clone() {
        cfg.out = v;
    }
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    // --tend and --dt go to whichever integrator the command runs
    let (tend, dt) = match cmd {
        Command::Reduced => (&mut cfg.reduced.t_end, &mut cfg.reduced.dt),
        _ => (&mut cfg.simulate.t_end, &mut cfg.simulate.dt),
    };
    if let Some(v) = g.tend {
        *tend = v;
    }
    if let Some(v) = g.dt {
        *dt = v;
    }
    match cmd {
        Command::Continue { param, target, switch_target } => {
            if let Some(p) = param {
                cfg.cont.param = *p;
            }
            if let Some(t) = target {
                cfg.cont.target = *t;
            }
            if switch_target.is_some() {
                cfg.cont.switch_target = *switch_target;
            }
        }
        Command::Simulate { perturbation, scheme, stride } => {
            if let Some(p) = perturbation {
                cfg.simulate.perturbation = *p;
            }
            if let Some(s) = scheme {
                cfg.set("simulate", "scheme", s, 0)?;
            }
            if let Some(s) = stride {
                cfg.simulate.stride = *s;
            }
        }
        Command::Spectrum { k: Some(k) } => cfg.spectrum.k = *k,
        Command::Evans { c, radius } => {
            if let Some(c) = c {
                cfg.evans.c = *c;
            }
            if let Some(r) = radius {
                cfg.evans.radius = *r;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Summary lines for stdout and a JSON record for the output directory.
struct Outcome {
    lines: Vec<String>,
    record: Value,
}

fn complex_json(z: &[num_complex::Complex64]) -> Value {
    Value::Array(z.iter().map(|z| json!([z.re, z.im])).collect())
}

fn fmt_complex(z: num_complex::Complex64) -> String {
    format!("{:+.6e}{:+.6e}i", z.re, z.im)
}

fn grid_of(cfg: &RunConfig) -> Result<Grid> {
    make_grid(cfg.grid.half_length, cfg.grid.nodes, cfg.model.epsilon)
}

fn standing_front(params: &Params, grid: &Grid) -> Result<FrozenSolution> {
    let guess = asymptotic_front(params, grid);
    frozen_newton(params, &guess, 0.0, &guess, grid, NewtonOptions::default())
}

fn spectrum_record(s: &SpectrumReport) -> Value {
    json!({
        "eigenvalues": complex_json(&s.eigenvalues),
        "scaled": complex_json(&s.scaled),
        "residuals": s.residuals,
        "gap": s.gap,
        "max_real": s.max_real(),
    })
}

fn run_steady(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let params = cfg.params()?;
    let grid = grid_of(cfg)?;
    let sol = standing_front(&params, &grid)?;
    let spec = frozen_spectrum_seeded(&params, &sol.state, sol.c, &grid, cfg.spectrum.k, cfg.seed)?;
    tables::profile_table(&sol.state, &grid).write(&out.join("profile.csv"))?;
    tables::write_spectrum(&out.join("spectrum.csv"), &spec)?;
    let mut lines = vec![
        format!("newton iterations {} residual {:.3e}", sol.log.iterations, sol.log.history.last().copied().unwrap_or(f64::NAN)),
        format!("velocity c = {:.6e}", sol.c),
    ];
    lines.extend(spec.scaled.iter().map(|z| format!("lambda/eps^2 = {}", fmt_complex(*z))));
    lines.extend(params.warnings().into_iter().map(|w| format!("warning: {w}")));
    Ok(Outcome {
        lines,
        record: json!({ "c": sol.c, "newton": sol.log, "spectrum": spectrum_record(&spec), "warnings": params.warnings() }),
    })
}

fn run_spectrum(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let params = cfg.params()?;
    let grid = grid_of(cfg)?;
    let sol = standing_front(&params, &grid)?;
    let spec = frozen_spectrum_seeded(&params, &sol.state, sol.c, &grid, cfg.spectrum.k, cfg.seed)?;
    tables::write_spectrum(&out.join("spectrum.csv"), &spec)?;
    let mut lines: Vec<String> = spec
        .scaled
        .iter()
        .zip(&spec.residuals)
        .map(|(z, r)| format!("lambda/eps^2 = {}  residual {r:.2e}", fmt_complex(*z)))
        .collect();
    lines.push(format!("max real part {:.6e}", spec.max_real()));
    Ok(Outcome { lines, record: spectrum_record(&spec) })
}

fn run_evans(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let params = cfg.params()?;
    let c = cfg.evans.c;
    let roots = evans_roots_with(&params, c, EvansRootOptions { radius: cfg.evans.radius, ..Default::default() })?;
    let aij = evans_taylor_aij(&params);
    let mut t = Table::new(tables::SPECTRUM_HEADER);
    for z in &roots.roots {
        let r = evans_eval(*z, c, &params)?.norm();
        t.push_floats(&[z.re, z.im, r]);
    }
    t.write(&out.join("evans_roots.csv"))?;
    let mut lines = vec![format!("roots in |lambda| < {}: {} (zero multiplicity {})", roots.radius, roots.count, roots.zero_multiplicity)];
    lines.extend(roots.roots.iter().map(|z| format!("root {}", fmt_complex(*z))));
    if roots.zero_multiplicity == 3 {
        lines.push("triple root at 0".into());
    }
    if roots.anomaly {
        lines.push("warning: more than three small roots".into());
    }
    lines.push(format!(
        "a00 {:.6e} a01 {:.6e} a02 {:.6e} a03 {:.6e} a20 {:.6e} a21 {:.6e}",
        aij.a00, aij.a01, aij.a02, aij.a03, aij.a20, aij.a21
    ));
    Ok(Outcome { lines, record: json!({ "c": c, "roots": roots, "aij": aij }) })
}

fn run_normalform(cfg: &RunConfig) -> Result<Outcome> {
    let m = &cfg.model;
    let nf = normal_form_coeffs(m.tau_hat, m.theta_hat, m.diff_d)?;
    let map = unfolding_map(m.tau_hat, m.theta_hat, m.diff_d)?;
    let params = cfg.params()?;
    let (g1, g2) = params_to_g(params.alpha, params.beta, &map)?;
    let region = classify_region(g1, g2, &nf).ok();
    let lines = vec![
        format!("g30 = {:.6}", nf.g30),
        format!("g40 = {:.6}", nf.g40),
        format!("g11 = [{:.6}, {:.6}]", nf.g11[0], nf.g11[1]),
        format!("g21 = [{:.6}, {:.6}]", nf.g21[0], nf.g21[1]),
        format!("organizing center alpha = {:.8} beta = {:.8}", map.alpha0, map.beta0),
        format!("alpha = {:.8} beta = {:.8} -> g1 = {:.6e} g2 = {:.6e}", params.alpha, params.beta, g1, g2),
        format!("region {}", region.map_or("n/a".to_string(), |r| format!("{r:?}"))),
    ];
    Ok(Outcome {
        lines,
        record: json!({ "coefficients": nf, "map": map, "alpha": params.alpha, "beta": params.beta, "g1": g1, "g2": g2, "region": region }),
    })
}

fn run_reduced(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let m = &cfg.model;
    let nf = normal_form_coeffs(m.tau_hat, m.theta_hat, m.diff_d)?;
    let map = unfolding_map(m.tau_hat, m.theta_hat, m.diff_d)?;
    let params = cfg.params()?;
    let (g1, g2) = params_to_g(params.alpha, params.beta, &map)?;
    let rp = ReducedParams { g1, g2, g30: nf.g30, g40: nf.g40, epsilon: m.epsilon };
    let r = &cfg.reduced;
    let traj = integrate_with(ReducedState::new(0.0, r.c0, r.c_tilde0), &rp, r.t_end, r.dt, IntegrateOptions::default())?;
    let mut t = Table::new("t,a,c,c_tilde");
    for (ti, s) in traj.t.iter().zip(&traj.states) {
        t.push_floats(&[*ti, s.a, s.c, s.c_tilde]);
    }
    t.write(&out.join("reduced.csv"))?;
    let eq = equilibria_and_stability(&rp);
    let cycle = limit_cycle_scan(&rp).ok();
    let mut lines = vec![format!("g1 = {g1:.6e} g2 = {g2:.6e} g30 = {:.6} g40 = {:.6}", nf.g30, nf.g40)];
    lines.extend(eq.iter().map(|e| format!("equilibrium c = {:+.6e} {:?}", e.c, e.stability)));
    if let Some(cy) = &cycle {
        lines.push(format!("limit cycle {:?} amplitude {:.6e} period {:.6e} (slow time)", cy.status, cy.amplitude, cy.period));
    }
    let last = traj.states.last().copied().unwrap_or(ReducedState::new(0.0, r.c0, r.c_tilde0));
    lines.push(format!("final state a = {:.6e} c = {:.6e} c' = {:.6e}", last.a, last.c, last.c_tilde));
    Ok(Outcome { lines, record: json!({ "params": rp, "equilibria": eq, "cycle": cycle, "final": last }) })
}

fn run_verify(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let grid = grid_of(cfg)?;
    let dc = discrete_organizing_center(&params, &grid)?;
    let chain = jordan_chain(&dc.params, &dc.state, &grid)?;
    let (k1, k2) = slep_condition_checks(&dc.params);
    let (lam, pred) = slep_scalar_eig(&params, &grid)?;
    let mut lines = vec![
        format!("discrete organizing center alpha = {:.8} beta = {:.8}", dc.params.alpha, dc.params.beta),
        format!("chain residuals {:?}", chain.residuals.map(|r| format!("{r:.2e}"))),
        format!("orthogonality {:?}", chain.orthogonality.map(|r| format!("{r:.2e}"))),
        format!("p = [{:.6e}, {:.6e}, {:.6e}]", chain.p[0], chain.p[1], chain.p[2]),
        format!("solvability values at the center {k1:.3e} {k2:.3e}"),
        format!("scalar eigenvalue {lam:.6e}, leading-order prediction {pred:.6e}"),
    ];
    lines.extend(chain.warnings.iter().map(|w| format!("warning: {w}")));
    Ok(Outcome {
        lines,
        record: json!({
            "center": dc,
            "residuals": chain.residuals,
            "orthogonality": chain.orthogonality,
            "consistency": chain.consistency,
            "p": chain.p,
            "singularity_defect": chain.singularity_defect,
            "solvability": [k1, k2],
            "scalar_eigenvalue": lam,
            "scalar_prediction": pred,
            "warnings": chain.warnings,
        }),
    })
}

fn branch_lines(name: &str, b: &Branch) -> Vec<String> {
    let mut lines = vec![format!(
        "{name}: {} points, {} = {:.6e} .. {:.6e}",
        b.points.len(),
        b.parameter,
        b.points.first().map_or(f64::NAN, |p| p.value),
        b.points.last().map_or(f64::NAN, |p| p.value)
    )];
    lines.extend(b.bifurcations().map(|f| format!("{} at {} = {:.6e} (lambda = {})", f.kind, b.parameter, f.value, fmt_complex(f.eigenvalue))));
    if let Some(s) = &b.stall {
        lines.push(format!("stall: {s}"));
    }
    lines
}

fn run_continue(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let params = cfg.params()?;
    let grid = grid_of(cfg)?;
    let c = &cfg.cont;
    let opts = ContinuationOptions {
        initial_step: c.step,
        min_step: c.min_step,
        max_step: c.max_step,
        max_points: c.max_points,
        ..Default::default()
    };
    let map = UnfoldingMap::for_params(&params)?;
    let guess = asymptotic_front(&params, &grid);
    let start = solve_point(&params, c.param, &map, &guess, 0.0, &grid, &opts)?;
    let branch = continue_branch(&start, c.param, c.target, &grid, &opts)?;
    tables::write_branch(&out.join("branch.csv"), &branch)?;
    let mut lines = branch_lines("branch", &branch);
    let mut switched = None;
    if let Some(target) = c.switch_target {
        let found = branch
            .points
            .iter()
            .find_map(|p| p.bifurcations.iter().find(|b| b.kind == BifurcationKind::Pitchfork).map(|b| (p, b)));
        match found {
            Some((at, bif)) => {
                let seed = branch_switch(at, bif, c.param, SWITCH_DELTA, 1.0, &grid, &opts)?;
                let b = continue_from(&seed, c.param, target, &grid, &opts)?;
                tables::write_branch(&out.join("branch_switched.csv"), &b)?;
                lines.extend(branch_lines("switched branch", &b));
                switched = Some(b);
            }
            None => lines.push("no pitchfork on the branch; nothing to switch onto".into()),
        }
    }
    Ok(Outcome { lines, record: json!({ "branch": branch, "switched": switched }) })
}

fn run_simulate(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let mut params = cfg.params()?;
    let grid = grid_of(cfg)?;
    let s = &cfg.simulate;
    // standing front and its leading mode at γ = 0, then switch on γ
    let gamma = params.gamma;
    params.gamma = 0.0;
    let guess = asymptotic_front(&params, &grid);
    let (z, _) = newton_correct_with(&params, &guess, &grid, NewtonOptions { tol: 1e-9, max_iter: 30 })?;
    let mode = leading_mode(&params, &z, &grid)?;
    let z0 = perturb(&z, &mode, s.perturbation)?;
    params.gamma = gamma;
    let opts = SimulateOptions { scheme: s.scheme, stride: s.stride, snapshot_stride: 0, blowup: 1e3 };
    let (rec, last) = simulate_frozen_with(&params, &z0, &grid, s.t_end, s.dt, opts)?;
    tables::write_trajectory(&out.join("trajectory.csv"), &rec)?;
    tables::profile_table(&last, &grid).write(&out.join("profile.csv"))?;
    let stats = oscillation_stats(&rec, 0.5 * s.t_end).ok();
    let mut lines = vec![format!("{} recorded steps to t = {:.6e} ({:?})", rec.t.len(), s.t_end, s.scheme)];
    match &stats {
        Some(st) => {
            lines.push(format!("mean velocity {:.6e} over {} cycles (second half)", st.mean, st.cycles));
            lines.push(format!("oscillation amplitude {:.6e}", st.amplitude));
            if let Some(p) = st.period {
                lines.push(format!("period {p:.6e}"));
            }
        }
        None => lines.push("too few samples for velocity statistics".into()),
    }
    let final_c = rec.c.last().copied().unwrap_or(f64::NAN);
    let final_a = rec.a.last().copied().unwrap_or(f64::NAN);
    lines.push(format!("final c = {final_c:.6e} a = {final_a:.6e}"));
    Ok(Outcome { lines, record: json!({ "stats": stats, "final_c": final_c, "final_a": final_a, "scheme": s.scheme }) })
}

fn dispatch(cmd: &Command, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    match cmd {
        Command::Steady => run_steady(cfg, out),
        Command::Continue { .. } => run_continue(cfg, out),
        Command::Simulate { .. } => run_simulate(cfg, out),
        Command::Spectrum { .. } => run_spectrum(cfg, out),
        Command::Evans { .. } => run_evans(cfg, out),
        Command::Normalform => run_normalform(cfg),
        Command::Reduced => run_reduced(cfg, out),
        Command::Verify => run_verify(cfg),
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidParams(_) => "invalid_params",
        Error::Resolution(_) => "resolution",
        Error::Shape { .. } => "shape",
        Error::Degenerate(_) => "degenerate",
        Error::Unsupported(_) => "unsupported",
        Error::BranchCut(_) => "branch_cut",
        Error::Precondition(_) => "precondition",
        Error::Singular(_) => "singular",
        Error::NoConvergence { .. } => "no_convergence",
        Error::Solver(_) => "solver",
        Error::Divergence { .. } => "divergence",
        Error::Config { .. } => "config",
        Error::Io(_) => "io",
    }
}

pub fn error_record(e: &Error, command: &str) -> Value {
    let mut v = json!({ "command": command, "kind": error_kind(e), "message": e.to_string(), "exit_code": e.exit_code() });
    if let Error::NoConvergence { history, .. } = e {
        v["history"] = json!(history);
    }
    v
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Runs one subcommand and writes its outputs. Returns the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let shown: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return 0;
            }
            let rec = json!({ "command": shown.get(1), "kind": "usage", "message": e.to_string().trim(), "exit_code": 2 });
            let _ = writeln!(std::io::stderr(), "{rec}");
            return 2;
        }
    };
    let name = cli.command.name();
    let started = Instant::now();
    let result = resolve_config(&cli.global, &cli.command).and_then(|cfg| {
        fs::create_dir_all(&cfg.out).map_err(|e| Error::Io(format!("{}: {e}", cfg.out.display())))?;
        let outcome = dispatch(&cli.command, &cfg, &cfg.out)?;
        Ok((cfg, outcome))
    });
    match result {
        Ok((cfg, outcome)) => {
            let elapsed = started.elapsed().as_secs_f64();
            let meta = json!({
                "command": name,
                "argv": shown,
                "config": cfg,
                "versions": { "frontlab": env!("CARGO_PKG_VERSION"), "os": std::env::consts::OS, "arch": std::env::consts::ARCH },
                "timings": { "total_seconds": elapsed },
                "result": outcome.record,
            });
            if let Err(e) = write_json(&cfg.out.join("metadata.json"), &meta) {
                let _ = writeln!(std::io::stderr(), "{}", error_record(&e, name));
                return e.exit_code();
            }
            let mut stdout = std::io::stdout().lock();
            for l in &outcome.lines {
                let _ = writeln!(stdout, "{l}");
            }
            let _ = writeln!(stdout, "outputs in {}", cfg.out.display());
            0
        }
        Err(e) => {
            let rec = error_record(&e, name);
            // best effort: the output directory may be the problem
            let dir = cli.global.out.clone().unwrap_or_else(crate::config::default_out_root);
            if fs::create_dir_all(&dir).is_ok() {
                let _ = write_json(&dir.join("error.json"), &rec);
            }
            let _ = writeln!(std::io::stderr(), "{rec}");
            e.exit_code()
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "imex1" => Ok(Scheme::Imex1),
            "ros2" => Ok(Scheme::Ros2),
            _ => Err(Error::InvalidParams(format!("unknown scheme '{s}' (imex1 | ros2)"))),
        }
    }
}
