//! Experiment configuration: TOML schema, defaults and resolution into
//! concrete solver settings.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use qddp::entropy::{Algorithm, SolverConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Top-level config file: `[scenario]`, `[solver.<algo>]`, `[experiment]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub solver: BTreeMap<String, SolverOverrides>,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// `"car"` or `"quadrotor"`.
    pub system: String,
    pub dt: f64,
    pub horizon: usize,
    pub start: Vec<f64>,
    pub target: Vec<f64>,
    /// Diagonals of the running/control/terminal cost matrices.
    pub q_run: Vec<f64>,
    pub r: Vec<f64>,
    pub q_final: Vec<f64>,
    #[serde(default, rename = "obstacle")]
    pub obstacles: Vec<ObstacleConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    pub center: Vec<f64>,
    pub radius: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub alpha: Option<f64>,
    pub q: Option<f64>,
    pub modes: Option<usize>,
    pub sample_every: Option<usize>,
    pub iters: Option<usize>,
    pub sigma_cap: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<String>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Standard deviation of the optional per-mode initial-control
    /// perturbation (mode 0 is never perturbed). Default 0: all modes
    /// start from identical control sequences.
    #[serde(default)]
    pub init_perturbation: f64,
}

fn default_algorithms() -> Vec<String> {
    vec!["ddp".to_string()]
}

fn default_trials() -> usize {
    1
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithms: default_algorithms(),
            trials: default_trials(),
            seed: 0,
            init_perturbation: 0.0,
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub algorithms: Option<Vec<String>>,
    pub alpha: Option<f64>,
    pub q: Option<f64>,
    pub modes: Option<usize>,
    pub sample_every: Option<usize>,
    pub iters: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
}

pub fn algorithm_from_name(name: &str) -> Result<Algorithm, ConfigError> {
    match name {
        "ddp" => Ok(Algorithm::Ddp),
        "me_shannon_uni" => Ok(Algorithm::MeShannonUni),
        "me_shannon_multi" => Ok(Algorithm::MeShannonMulti),
        "me_tsallis" => Ok(Algorithm::MeTsallis),
        other => Err(err(format!(
            "experiment.algorithms: unknown algorithm '{other}' (expected ddp, \
             me_shannon_uni, me_shannon_multi or me_tsallis)"
        ))),
    }
}

/// A fully resolved experiment: every default filled in, every override
/// applied, every field validated.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedExperiment {
    pub scenario: ScenarioConfig,
    pub algorithms: Vec<ResolvedAlgorithm>,
    pub trials: usize,
    pub seed: u64,
    pub init_perturbation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedAlgorithm {
    pub name: String,
    pub alpha: f64,
    pub q: f64,
    pub modes: usize,
    pub sample_every: usize,
    pub iters: usize,
    pub sigma_cap: Option<f64>,
}

impl ResolvedAlgorithm {
    pub fn solver_config(&self, seed: u64) -> Result<SolverConfig, ConfigError> {
        Ok(SolverConfig {
            algorithm: algorithm_from_name(&self.name)?,
            alpha: self.alpha,
            q: self.q,
            modes: self.modes,
            sample_every: self.sample_every,
            max_iter: self.iters,
            seed,
            sigma_cap: self.sigma_cap,
        })
    }
}

pub fn system_dims(system: &str) -> Result<(usize, usize), ConfigError> {
    match system {
        "car" => Ok((3, 2)),
        "quadrotor" => Ok((12, 4)),
        other => Err(err(format!(
            "scenario.system: unknown system '{other}' (expected car or quadrotor)"
        ))),
    }
}

fn default_q(system: &str) -> f64 {
    match system {
        "quadrotor" => 1.4,
        _ => 1.8,
    }
}

pub fn load_config(path: &Path) -> Result<ConfigFile, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| err(format!("{}: {e}", path.display())))
}

pub fn resolve(
    file: &ConfigFile,
    overrides: &CliOverrides,
) -> Result<ResolvedExperiment, ConfigError> {
    let scenario = &file.scenario;
    let (n_x, n_u) = system_dims(&scenario.system)?;
    check_len("scenario.start", &scenario.start, n_x)?;
    check_len("scenario.target", &scenario.target, n_x)?;
    check_len("scenario.q_run", &scenario.q_run, n_x)?;
    check_len("scenario.r", &scenario.r, n_u)?;
    check_len("scenario.q_final", &scenario.q_final, n_x)?;
    if !(scenario.dt > 0.0) {
        return Err(err("scenario.dt: must be positive"));
    }
    if scenario.horizon == 0 {
        return Err(err("scenario.horizon: must be >= 1"));
    }
    let position_dim = if scenario.system == "car" { 2 } else { 3 };
    for (i, o) in scenario.obstacles.iter().enumerate() {
        if o.center.len() != position_dim {
            return Err(err(format!(
                "scenario.obstacle[{i}].center: expected {position_dim} components, got {}",
                o.center.len()
            )));
        }
        if !(o.radius > 0.0) {
            return Err(err(format!("scenario.obstacle[{i}].radius: must be positive")));
        }
    }

    for name in file.solver.keys() {
        // Typos in section names must not silently become no-ops.
        algorithm_from_name(name)
            .map_err(|_| err(format!("solver.{name}: unknown algorithm section")))?;
    }

    let names = overrides
        .algorithms
        .clone()
        .unwrap_or_else(|| file.experiment.algorithms.clone());
    if names.is_empty() {
        return Err(err("experiment.algorithms: must list at least one algorithm"));
    }
    let mut algorithms = Vec::with_capacity(names.len());
    for name in &names {
        algorithm_from_name(name)?;
        let o = file.solver.get(name).cloned().unwrap_or_default();
        let resolved = ResolvedAlgorithm {
            name: name.clone(),
            alpha: overrides.alpha.or(o.alpha).unwrap_or(1.0),
            q: overrides.q.or(o.q).unwrap_or_else(|| default_q(&scenario.system)),
            modes: overrides.modes.or(o.modes).unwrap_or(8),
            sample_every: overrides.sample_every.or(o.sample_every).unwrap_or(5),
            iters: overrides.iters.or(o.iters).unwrap_or(100),
            sigma_cap: o.sigma_cap,
        };
        if resolved.iters == 0 {
            return Err(err(format!("solver.{name}.iters: must be >= 1")));
        }
        resolved
            .solver_config(0)?
            .validate(n_u)
            .map_err(|e| err(format!("solver.{name}: {e}")))?;
        algorithms.push(resolved);
    }

    let trials = overrides.trials.unwrap_or(file.experiment.trials);
    if trials == 0 {
        return Err(err("experiment.trials: must be >= 1"));
    }
    Ok(ResolvedExperiment {
        scenario: scenario.clone(),
        algorithms,
        trials,
        seed: overrides.seed.unwrap_or(file.experiment.seed),
        init_perturbation: file.experiment.init_perturbation,
    })
}

fn check_len(field: &str, v: &[f64], expected: usize) -> Result<(), ConfigError> {
    if v.len() != expected {
        return Err(err(format!(
            "{field}: expected {expected} components, got {}",
            v.len()
        )));
    }
    Ok(())
}
