//! Experiment configuration: a TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qham_core::discretize::DEFAULT_CAP;
use qham_core::func::TimeFn;
use qham_core::ham::{AuxOperator, GuessRule, HamConfig};
use qham_core::pde::{self, QuadraticPDE};
use qham_core::pipeline::{h_grid, Engine, RunOptions};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("missing required field `{0}`")]
    Missing(&'static str),
    #[error("field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

/// A preset name or an inline problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSpec {
    Preset(String),
    Inline(Box<QuadraticPDE>),
}

/// An explicit list or an inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HSweep {
    List(Vec<f64>),
    Range { lo: f64, hi: f64, step: f64 },
}

impl HSweep {
    pub fn values(&self) -> Result<Vec<f64>, ConfigError> {
        match self {
            HSweep::List(v) if v.is_empty() => Err(invalid("h_sweep", "empty list")),
            HSweep::List(v) => Ok(v.clone()),
            HSweep::Range { lo, hi, step } => h_grid(*lo, *hi, *step).map_err(|e| invalid("h_sweep", e)),
        }
    }

    /// `lo:step:hi` or a comma-separated list.
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| invalid("h_sweep", format!("{t:?}: {e}")));
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [lo, step, hi] => Ok(HSweep::Range { lo: num(lo)?, hi: num(hi)?, step: num(step)? }),
            [_] => s.split(',').map(num).collect::<Result<_, _>>().map(HSweep::List),
            _ => Err(invalid("h_sweep", format!("expected lo:step:hi or a list, got {s:?}"))),
        }
    }
}

fn invalid(field: &'static str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid { field, message: message.to_string() }
}

/// The file format. Every field is optional here; [`Experiment::resolve`]
/// fills defaults and checks what is required.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub problem: Option<ProblemSpec>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub h: Option<f64>,
    pub h_sweep: Option<HSweep>,
    #[serde(rename = "H")]
    pub aux_time: Option<TimeFn>,
    pub guess: Option<GuessRule>,
    pub aux: Option<AuxOperator>,
    pub dt: Option<f64>,
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    pub iterations: Option<usize>,
    pub out: Option<PathBuf>,
    pub cap: Option<usize>,
    pub workers: Option<usize>,
    pub engine: Option<Engine>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.into(), message: e.to_string() })
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(self, other: ConfigFile) -> ConfigFile {
        ConfigFile {
            problem: other.problem.or(self.problem),
            n: other.n.or(self.n),
            m: other.m.or(self.m),
            h: other.h.or(self.h),
            h_sweep: other.h_sweep.or(self.h_sweep),
            aux_time: other.aux_time.or(self.aux_time),
            guess: other.guess.or(self.guess),
            aux: other.aux.or(self.aux),
            dt: other.dt.or(self.dt),
            t_end: other.t_end.or(self.t_end),
            iterations: other.iterations.or(self.iterations),
            out: other.out.or(self.out),
            cap: other.cap.or(self.cap),
            workers: other.workers.or(self.workers),
            engine: other.engine.or(self.engine),
            epsilon: other.epsilon.or(self.epsilon),
            seed: other.seed.or(self.seed),
        }
    }
}

/// Which of `h` and `h_sweep` a command needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HMode {
    Single,
    Sweep,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment {
    pub problem: QuadraticPDE,
    pub n: usize,
    pub ham: HamConfig,
    pub h_values: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub iterations: usize,
    pub out: PathBuf,
    pub cap: usize,
    pub workers: usize,
    pub engine: Engine,
    pub epsilon: f64,
    pub seed: u64,
}

impl Experiment {
    pub fn resolve(file: ConfigFile, mode: HMode) -> Result<Self, ConfigError> {
        let problem = match file.problem.ok_or(ConfigError::Missing("problem"))? {
            ProblemSpec::Preset(name) => pde::preset(&name)
                .ok_or_else(|| invalid("problem", format!("unknown preset {name:?} (known: burgers, kdv)")))?,
            ProblemSpec::Inline(p) => *p,
        };
        problem.validate().map_err(|e| invalid("problem", e))?;
        let m = file.m.ok_or(ConfigError::Missing("m"))?;
        let (n, dt, t_end) = match problem.name.as_str() {
            "kdv" => (41, 0.005, 6.0),
            _ => (32, 0.01, 1.0),
        };
        let h_values = match (mode, file.h, &file.h_sweep) {
            (_, Some(_), Some(_)) => return Err(invalid("h", "set either h or h_sweep, not both")),
            (HMode::Single, Some(h), None) => vec![h],
            (HMode::Single, None, _) => return Err(ConfigError::Missing("h")),
            (HMode::Sweep, None, Some(s)) => s.values()?,
            (HMode::Sweep, _, None) => return Err(ConfigError::Missing("h_sweep")),
        };
        if h_values.iter().any(|h| !h.is_finite()) {
            return Err(invalid("h", "values must be finite"));
        }
        let mut ham = HamConfig::for_problem(&problem, m, h_values[0]);
        if let Some(g) = file.guess {
            ham = ham.with_guess(g);
        }
        if let Some(a) = file.aux {
            ham = ham.with_aux(a);
        }
        if let Some(t) = file.aux_time {
            ham = ham.with_aux_time(t);
        }
        ham.validate().map_err(|e| invalid("h", e))?;
        let exp = Experiment {
            n: file.n.unwrap_or(n),
            dt: file.dt.unwrap_or(dt),
            t_end: file.t_end.unwrap_or(t_end),
            iterations: file.iterations.unwrap_or(0),
            out: file.out.unwrap_or_else(|| PathBuf::from("out")),
            cap: file.cap.unwrap_or(DEFAULT_CAP),
            workers: file.workers.unwrap_or(0),
            engine: file.engine.unwrap_or(Engine::Compositional),
            epsilon: file.epsilon.unwrap_or(1e-3),
            seed: file.seed.unwrap_or(0),
            problem,
            ham,
            h_values,
        };
        if exp.n < qham_core::grid::Grid::MIN_POINTS {
            return Err(invalid("n", format!("need at least {} points, got {}", qham_core::grid::Grid::MIN_POINTS, exp.n)));
        }
        if !(exp.dt > 0.0) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(exp.t_end > 0.0) {
            return Err(invalid("T", "must be positive"));
        }
        if !(exp.epsilon > 0.0 && exp.epsilon < 1.0) {
            return Err(invalid("epsilon", "must lie in (0, 1)"));
        }
        qham_core::integrator::rk4::sample_count(exp.dt, exp.t_end).map_err(|e| invalid("T", e))?;
        Ok(exp)
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            n: self.n,
            dt: self.dt,
            t_end: self.t_end,
            substeps: None,
            cap: self.cap,
            engine: self.engine,
            iterations: self.iterations,
            epsilon: None,
        }
    }

    /// SHA-256 of the resolved configuration, minus the output directory.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("object").remove("out");
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}
