//! Experiment execution and artifact emission.
//!
//! All algorithms within one trial share the same initial control
//! sequences, so cost differences are attributable to the solver alone.
//! Trial seeds are `base_seed + trial_index`.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use qddp::entropy::{run, RunResult};
use qddp::models::{Car2D, CompositeCost, Obstacle, ObstacleField, Quadrotor};
use qddp::trajopt::{CostModel, DynamicsModel, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::config::{ConfigError, ResolvedExperiment, ScenarioConfig};

/// One (algorithm, trial) outcome.
pub struct TrialRecord {
    pub algorithm: String,
    pub trial: usize,
    pub seed: u64,
    /// `cost_history[n][i]`: mode n after iteration i. Empty on failure.
    pub cost_history: Vec<Vec<f64>>,
    pub best_cost_history: Vec<f64>,
    pub final_cost: Option<f64>,
    pub wall_time_s: f64,
    pub trajectory: Option<Trajectory>,
    pub error: Option<String>,
}

enum System {
    Car(Car2D),
    Quadrotor(Quadrotor),
}

fn build_system(s: &ScenarioConfig) -> System {
    match s.system.as_str() {
        "quadrotor" => System::Quadrotor(Quadrotor::default_params(s.dt)),
        _ => System::Car(Car2D { dt: s.dt }),
    }
}


fn build_cost(s: &ScenarioConfig, position_dim: usize) -> CompositeCost {
    CompositeCost {
        q_run: DMatrix::from_diagonal(&DVector::from_column_slice(&s.q_run)),
        r: DMatrix::from_diagonal(&DVector::from_column_slice(&s.r)),
        q_final: DMatrix::from_diagonal(&DVector::from_column_slice(&s.q_final)),
        target: DVector::from_column_slice(&s.target),
        field: ObstacleField {
            obstacles: s
                .obstacles
                .iter()
                .map(|o| Obstacle {
                    center: DVector::from_column_slice(&o.center),
                    radius: o.radius,
                    weight: o.weight,
                })
                .collect(),
        },
        position_dim,
    }
}

/// Nominal control the scenario starts from: zeros for the car, hover for
/// the quadrotor.
fn base_control(system: &System) -> DVector<f64> {
    match system {
        System::Car(_) => DVector::zeros(2),
        System::Quadrotor(q) => DVector::from_element(4, q.hover_thrust()),
    }
}

/// Initial control sequences for all modes of one trial. Mode 0 is the
/// nominal sequence; the rest get i.i.d. Gaussian perturbations of the
/// configured scale (zero by default, i.e. identical copies).
fn initial_controls(
    system: &System,
    horizon: usize,
    modes: usize,
    perturbation: f64,
    trial_seed: u64,
) -> Vec<Vec<DVector<f64>>> {
    let nominal = base_control(system);
    let n_u = nominal.len();
    // Distinct stream from the solver's own RNG, which also seeds from
    // the trial seed.
    let mut rng = ChaCha12Rng::seed_from_u64(trial_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    (0..modes)
        .map(|m| {
            (0..horizon)
                .map(|_| {
                    let mut u = nominal.clone();
                    if m > 0 && perturbation > 0.0 {
                        for i in 0..n_u {
                            u[i] += perturbation * rng.sample::<f64, _>(StandardNormal);
                        }
                    }
                    u
                })
                .collect()
        })
        .collect()
}

fn run_one<D: DynamicsModel, C: CostModel>(
    exp: &ResolvedExperiment,
    algo_idx: usize,
    trial: usize,
    dynamics: &D,
    cost: &C,
    init: &[Vec<DVector<f64>>],
) -> TrialRecord {
    let algo = &exp.algorithms[algo_idx];
    let seed = exp.seed + trial as u64;
    let config = algo.solver_config(seed).expect("validated at resolution");
    let x0 = DVector::from_column_slice(&exp.scenario.start);
    let started = Instant::now();
    let outcome = run(&config, dynamics, cost, &x0, init);
    let wall_time_s = started.elapsed().as_secs_f64();
    match outcome {
        Ok(RunResult { best, cost_history, best_cost_history, .. }) => TrialRecord {
            algorithm: algo.name.clone(),
            trial,
            seed,
            cost_history,
            best_cost_history,
            final_cost: Some(best.cost),
            wall_time_s,
            trajectory: Some(best),
            error: None,
        },
        Err(e) => TrialRecord {
            algorithm: algo.name.clone(),
            trial,
            seed,
            cost_history: Vec::new(),
            best_cost_history: Vec::new(),
            final_cost: None,
            wall_time_s,
            trajectory: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs trials × algorithms. A solver failure in one trial is recorded
/// and does not abort the experiment.
pub fn run_experiment(exp: &ResolvedExperiment) -> Vec<TrialRecord> {
    let system = build_system(&exp.scenario);
    let position_dim = match system {
        System::Car(_) => 2,
        System::Quadrotor(_) => 3,
    };
    let cost = build_cost(&exp.scenario, position_dim);
    let max_modes = exp.algorithms.iter().map(|a| a.modes).max().unwrap_or(1);

    let mut records = Vec::with_capacity(exp.trials * exp.algorithms.len());
    for trial in 0..exp.trials {
        let seed = exp.seed + trial as u64;
        let init = initial_controls(
            &system,
            exp.scenario.horizon,
            max_modes,
            exp.init_perturbation,
            seed,
        );
        for algo_idx in 0..exp.algorithms.len() {
            let record = match &system {
                System::Car(car) => run_one(exp, algo_idx, trial, car, &cost, &init),
                System::Quadrotor(quad) => run_one(exp, algo_idx, trial, quad, &cost, &init),
            };
            records.push(record);
        }
    }
    records
}

/// 17-significant-digit round-trip formatting for all serialized floats.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn trajectory_csv(traj: &Trajectory) -> String {
    let n_x = traj.states[0].len();
    let n_u = traj.controls.first().map_or(0, |u| u.len());
    let mut out = String::new();
    out.push('t');
    for i in 0..n_x {
        let _ = write!(out, ",x{i}");
    }
    for i in 0..n_u {
        let _ = write!(out, ",u{i}");
    }
    out.push('\n');
    for (t, x) in traj.states.iter().enumerate() {
        let _ = write!(out, "{t}");
        for v in x.iter() {
            let _ = write!(out, ",{}", fmt_float(*v));
        }
        if let Some(u) = traj.controls.get(t) {
            for v in u.iter() {
                let _ = write!(out, ",{}", fmt_float(*v));
            }
        } else {
            // Terminal row: control columns stay empty.
            for _ in 0..n_u {
                out.push(',');
            }
        }
        out.push('\n');
    }
    out
}

fn costs_csv(record: &TrialRecord) -> String {
    let modes = record.cost_history.len();
    let mut out = String::new();
    out.push_str("iteration");
    for n in 0..modes {
        let _ = write!(out, ",mode{n}");
    }
    out.push_str(",best\n");
    for i in 0..record.best_cost_history.len() {
        let _ = write!(out, "{i}");
        for n in 0..modes {
            let _ = write!(out, ",{}", fmt_float(record.cost_history[n][i]));
        }
        let _ = write!(out, ",{}\n", fmt_float(record.best_cost_history[i]));
    }
    out
}

#[derive(Serialize)]
struct Summary<'a> {
    metadata: Metadata,
    config: &'a ResolvedExperiment,
    seeds: Seeds,
    algorithms: Vec<AlgorithmSummary>,
}

#[derive(Serialize)]
struct Metadata {
    tool: &'static str,
    version: &'static str,
    /// Timestamps live only here, so data tables stay byte-reproducible.
    timestamp_unix: f64,
}

#[derive(Serialize)]
struct Seeds {
    base: u64,
    trial_seeds: Vec<u64>,
}

#[derive(Serialize)]
struct AlgorithmSummary {
    name: String,
    completed_trials: usize,
    failed_trials: usize,
    mean_final_cost: Option<f64>,
    min_final_cost: Option<f64>,
    max_final_cost: Option<f64>,
    trials: Vec<TrialSummary>,
}

#[derive(Serialize)]
struct TrialSummary {
    trial: usize,
    seed: u64,
    final_cost: Option<f64>,
    wall_time_s: f64,
    error: Option<String>,
}

fn summarize<'a>(exp: &'a ResolvedExperiment, records: &[TrialRecord]) -> Summary<'a> {
    let mut algorithms = Vec::with_capacity(exp.algorithms.len());
    for algo in &exp.algorithms {
        let rs: Vec<&TrialRecord> =
            records.iter().filter(|r| r.algorithm == algo.name).collect();
        let finals: Vec<f64> = rs.iter().filter_map(|r| r.final_cost).collect();
        algorithms.push(AlgorithmSummary {
            name: algo.name.clone(),
            completed_trials: finals.len(),
            failed_trials: rs.len() - finals.len(),
            mean_final_cost: mean(&finals),
            min_final_cost: finals.iter().copied().reduce(f64::min),
            max_final_cost: finals.iter().copied().reduce(f64::max),
            trials: rs
                .iter()
                .map(|r| TrialSummary {
                    trial: r.trial,
                    seed: r.seed,
                    final_cost: r.final_cost,
                    wall_time_s: r.wall_time_s,
                    error: r.error.clone(),
                })
                .collect(),
        });
    }
    Summary {
        metadata: Metadata {
            tool: "qddp-bench",
            version: env!("CARGO_PKG_VERSION"),
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
        },
        config: exp,
        seeds: Seeds {
            base: exp.seed,
            trial_seeds: (0..exp.trials).map(|t| exp.seed + t as u64).collect(),
        },
        algorithms,
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Writes per-trial trajectory and cost-evolution tables plus the JSON
/// summary into `out_dir`.
pub fn emit_artifacts(
    exp: &ResolvedExperiment,
    records: &[TrialRecord],
    out_dir: &Path,
) -> Result<(), ConfigError> {
    let io_err = |path: &Path, e: std::io::Error| {
        ConfigError(format!("cannot write {}: {e}", path.display()))
    };
    for record in records {
        let dir = out_dir.join(&record.algorithm);
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        if let Some(traj) = &record.trajectory {
            let path = dir.join(format!("trial_{:03}_trajectory.csv", record.trial));
            std::fs::write(&path, trajectory_csv(traj)).map_err(|e| io_err(&path, e))?;
        }
        if !record.best_cost_history.is_empty() {
            let path = dir.join(format!("trial_{:03}_costs.csv", record.trial));
            std::fs::write(&path, costs_csv(record)).map_err(|e| io_err(&path, e))?;
        }
    }
    let summary = summarize(exp, records);
    let path = out_dir.join("summary.json");
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| ConfigError(format!("summary serialization: {e}")))?;
    std::fs::write(&path, json).map_err(|e| io_err(&path, e))?;
    Ok(())
}

/// Human-readable mean/min/max table printed after a run.
pub fn summary_table(exp: &ResolvedExperiment, records: &[TrialRecord]) -> String {
    let summary = summarize(exp, records);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<18} {:>8} {:>14} {:>14} {:>14}",
        "algorithm", "trials", "mean cost", "min cost", "max cost"
    );
    for a in &summary.algorithms {
        let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        let _ = writeln!(
            out,
            "{:<18} {:>8} {:>14} {:>14} {:>14}",
            a.name,
            format!("{}/{}", a.completed_trials, a.completed_trials + a.failed_trials),
            f(a.mean_final_cost),
            f(a.min_final_cost),
            f(a.max_final_cost),
        );
    }
    out
}
