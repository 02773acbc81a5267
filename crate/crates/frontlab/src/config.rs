//! Sectioned `key = value` run configuration.
//!
//! ```text
//! [model]
//! epsilon = 0.03
//! g1 = -0.005
//! g2 = 0.02
//! [grid]
//! L = 10
//! nodes = 1024
//! ```

use serde::Serialize;
use std::path::{Path, PathBuf};

use crate::continuation::ContinuationParam;
use crate::error::{Error, Result};
use crate::model::{Params, DEFAULT_D, DEFAULT_EPSILON, DEFAULT_L, DEFAULT_TAU, DEFAULT_THETA};
use crate::normal_form::{g_to_params, unfolding_map};
use crate::pde::Scheme;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "FRONTLAB_OUT";
pub const DEFAULT_OUT: &str = "frontlab-out";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelConfig {
    pub epsilon: f64,
    /// Unset means the organizing center (after g1/g2 if given).
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: f64,
    pub tau_hat: f64,
    pub theta_hat: f64,
    #[serde(rename = "D")]
    pub diff_d: f64,
    pub g1: Option<f64>,
    pub g2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub half_length: f64,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulateConfig {
    pub t_end: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub stride: usize,
    /// Size of the initial kick relative to ‖∂x Z‖.
    pub perturbation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinueConfig {
    pub param: ContinuationParam,
    pub target: f64,
    pub step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_points: usize,
    /// Follow the asymmetric branch from the first pitchfork up to this value.
    pub switch_target: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumConfig {
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvansConfig {
    pub c: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReducedConfig {
    /// Slow time.
    pub t_end: f64,
    pub dt: f64,
    pub c0: f64,
    pub c_tilde0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub simulate: SimulateConfig,
    #[serde(rename = "continue")]
    pub cont: ContinueConfig,
    pub spectrum: SpectrumConfig,
    pub evans: EvansConfig,
    pub reduced: ReducedConfig,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig {
                epsilon: DEFAULT_EPSILON,
                alpha: None,
                beta: None,
                gamma: 0.0,
                tau_hat: DEFAULT_TAU,
                theta_hat: DEFAULT_THETA,
                diff_d: DEFAULT_D,
                g1: None,
                g2: None,
            },
            grid: GridConfig { half_length: DEFAULT_L, nodes: 1024 },
            simulate: SimulateConfig { t_end: 3e5, dt: 50.0, scheme: Scheme::Ros2, stride: 10, perturbation: 1e-2 },
            cont: ContinueConfig {
                param: ContinuationParam::G2,
                target: 0.03,
                step: 1e-3,
                min_step: 1e-6,
                max_step: 5e-3,
                max_points: 200,
                switch_target: None,
            },
            spectrum: SpectrumConfig { k: 6 },
            evans: EvansConfig { c: 0.0, radius: 5.0 },
            reduced: ReducedConfig { t_end: 2000.0, dt: 0.05, c0: 0.05, c_tilde0: 0.0 },
            out: default_out_root(),
            seed: crate::spectral::SPECTRUM_SEED,
        }
    }
}

pub fn default_out_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn num(line: usize, key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Config { line, msg: format!("'{key}' expects a finite number, got '{v}'") })
}

fn count(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>().map_err(|_| Error::Config { line, msg: format!("'{key}' expects a non-negative integer, got '{v}'") })
}

impl RunConfig {
    /// Applies one `key = value` pair from `section`; `line` is for messages.
    pub fn set(&mut self, section: &str, key: &str, value: &str, line: usize) -> Result<()> {
        let v = value.trim();
        let unknown = || Error::Config { line, msg: format!("unknown key '{key}' in section [{section}]") };
        match section {
            "model" => {
                let m = &mut self.model;
                match key {
                    "epsilon" => m.epsilon = num(line, key, v)?,
                    "alpha" => m.alpha = Some(num(line, key, v)?),
                    "beta" => m.beta = Some(num(line, key, v)?),
                    "gamma" => m.gamma = num(line, key, v)?,
                    "tau_hat" | "tau" => m.tau_hat = num(line, key, v)?,
                    "theta_hat" | "theta" => m.theta_hat = num(line, key, v)?,
                    "D" => m.diff_d = num(line, key, v)?,
                    "g1" => m.g1 = Some(num(line, key, v)?),
                    "g2" => m.g2 = Some(num(line, key, v)?),
                    _ => return Err(unknown()),
                }
            }
            "grid" => match key {
                "L" => self.grid.half_length = num(line, key, v)?,
                "nodes" => self.grid.nodes = count(line, key, v)?,
                _ => return Err(unknown()),
            },
            "simulate" => {
                let s = &mut self.simulate;
                match key {
                    "t_end" | "tend" => s.t_end = num(line, key, v)?,
                    "dt" => s.dt = num(line, key, v)?,
                    "stride" => s.stride = count(line, key, v)?,
                    "perturbation" => s.perturbation = num(line, key, v)?,
                    "scheme" => {
                        s.scheme = match v.to_ascii_lowercase().as_str() {
                            "imex1" => Scheme::Imex1,
                            "ros2" => Scheme::Ros2,
                            _ => return Err(Error::Config { line, msg: format!("unknown scheme '{v}' (imex1 | ros2)") }),
                        }
                    }
                    _ => return Err(unknown()),
                }
            }
            "continue" => {
                let c = &mut self.cont;
                match key {
                    "param" => c.param = v.parse().map_err(|e: Error| Error::Config { line, msg: e.to_string() })?,
                    "target" => c.target = num(line, key, v)?,
                    "step" => c.step = num(line, key, v)?,
                    "min_step" => c.min_step = num(line, key, v)?,
                    "max_step" => c.max_step = num(line, key, v)?,
                    "max_points" => c.max_points = count(line, key, v)?,
                    "switch_target" => c.switch_target = Some(num(line, key, v)?),
                    _ => return Err(unknown()),
                }
            }
            "spectrum" => match key {
                "k" => self.spectrum.k = count(line, key, v)?,
                _ => return Err(unknown()),
            },
            "evans" => match key {
                "c" => self.evans.c = num(line, key, v)?,
                "radius" => self.evans.radius = num(line, key, v)?,
                _ => return Err(unknown()),
            },
            "reduced" => {
                let r = &mut self.reduced;
                match key {
                    "t_end" | "tend" => r.t_end = num(line, key, v)?,
                    "dt" => r.dt = num(line, key, v)?,
                    "c0" => r.c0 = num(line, key, v)?,
                    "c_tilde0" => r.c_tilde0 = num(line, key, v)?,
                    _ => return Err(unknown()),
                }
            }
            "output" => match key {
                "dir" | "out" => self.out = PathBuf::from(v),
                _ => return Err(unknown()),
            },
            "run" => match key {
                "seed" => {
                    self.seed = v.parse().map_err(|_| Error::Config { line, msg: format!("'seed' expects an integer, got '{v}'") })?
                }
                _ => return Err(unknown()),
            },
            _ => return Err(Error::Config { line, msg: format!("unknown section [{section}]") }),
        }
        Ok(())
    }

    /// Model parameters with α, β resolved: explicit values win, then g1/g2
    /// through the unfolding map, then the organizing center.
    pub fn params(&self) -> Result<Params> {
        let m = &self.model;
        let (alpha, beta) = match (m.alpha, m.beta, m.g1, m.g2) {
            (Some(_), _, Some(_), _) | (Some(_), _, _, Some(_)) | (_, Some(_), Some(_), _) | (_, Some(_), _, Some(_)) => {
                return Err(Error::InvalidParams("give either alpha/beta or g1/g2, not both".into()));
            }
            (a, b, None, None) if a.is_some() || b.is_some() => {
                let map = unfolding_map(m.tau_hat, m.theta_hat, m.diff_d)?;
                (a.unwrap_or(map.alpha0), b.unwrap_or(map.beta0))
            }
            (_, _, g1, g2) => {
                let map = unfolding_map(m.tau_hat, m.theta_hat, m.diff_d)?;
                g_to_params(g1.unwrap_or(0.0), g2.unwrap_or(0.0), &map)?
            }
        };
        Params::new(m.epsilon, alpha, beta, m.gamma, m.tau_hat, m.theta_hat, m.diff_d)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        // check the raw values first so the messages name the offending key
        if !(m.epsilon > 0.0) {
            return Err(Error::InvalidParams(format!("epsilon must be positive, got {}", m.epsilon)));
        }
        if !(m.diff_d > 1.0) {
            return Err(Error::InvalidParams(format!("D must satisfy D > 1, got {}", m.diff_d)));
        }
        self.params()?;
        if !(self.grid.half_length > 0.0) {
            return Err(Error::InvalidParams(format!("L must be positive, got {}", self.grid.half_length)));
        }
        let s = &self.simulate;
        if !(s.dt > 0.0) || !(s.t_end >= 0.0) {
            return Err(Error::InvalidParams(format!("simulate needs dt > 0 and t_end >= 0 (dt = {}, t_end = {})", s.dt, s.t_end)));
        }
        let r = &self.reduced;
        if !(r.dt > 0.0) || !(r.t_end >= 0.0) {
            return Err(Error::InvalidParams(format!("reduced needs dt > 0 and t_end >= 0 (dt = {}, t_end = {})", r.dt, r.t_end)));
        }
        if self.spectrum.k == 0 {
            return Err(Error::InvalidParams("spectrum k must be at least 1".into()));
        }
        if !(self.evans.radius > 0.0) {
            return Err(Error::InvalidParams(format!("evans radius must be positive, got {}", self.evans.radius)));
        }
        check_output_dir(&self.out)
    }
}

/// The output directory must exist or be creatable under an existing directory.
fn check_output_dir(dir: &Path) -> Result<()> {
    if dir.as_os_str().is_empty() {
        return Err(Error::InvalidParams("empty output directory".into()));
    }
    let mut probe = Some(dir);
    while let Some(p) = probe {
        if p.as_os_str().is_empty() {
            return Ok(());
        }
        if p.exists() {
            return if p.is_dir() {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("output path component {} is not a directory", p.display())))
            };
        }
        probe = p.parent();
    }
    Ok(())
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section = String::from("model");
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split(['#', ';']).next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config { line, msg: format!("unterminated section header '{s}'") })?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config { line, msg: format!("expected 'key = value', got '{s}'") })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config { line, msg: "empty key".into() });
        }
        cfg.set(&section, k, v, line)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}
