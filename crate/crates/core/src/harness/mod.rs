//! Experiment runner behind the `vsm` command-line tool.
//!
//! A configuration expands into a grid of tasks, one per
//! `(dim, epsilon, seed index)`. Each task draws one hidden target and runs
//! every selected algorithm against its own copy of the oracle, so curves
//! for the same seed are paired. Tasks run on a worker pool; results are
//! collected in task order, which makes the CSV output independent of
//! scheduling.
//!
//! Seeds: the seed of task index `k` is `mix_seed(master_seed, k)`, the
//! target is drawn from `mix_seed(seed, 0)`, and algorithm `a` draws its
//! own randomness from `mix_seed(seed, a)` with `vsm = 1`,
//! `uncertainty = 2`, `random = 3`.

pub mod config;
pub mod trace;

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::baselines::{run_random, run_uncertainty};
use crate::error::Error;
use crate::linalg::{mix_seed, sample_l1_sphere, SeededRng};
use crate::oracle::MembershipOracle;
use crate::types::Hypothesis;
use crate::vsm::{
    label_budget, margin_label_budget, run_vsm, Fault, StopRule, TracePoint, ValidationReport,
    VsmOptions,
};
use config::{Algorithm, Command, ExperimentConfig, StopSpec};
use trace::TraceRow;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed trace: {0}")]
    Format(String),
    #[error("{0}")]
    Run(Box<RunFailure>),
}

impl HarnessError {
    /// Process exit code: 2 for usage and configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// A run that stopped with an error.
#[derive(Debug, Error)]
#[error("run {run_id} ({algorithm}, dim {dim}, seed {seed}) failed: {error}")]
pub struct RunFailure {
    pub run_id: u64,
    pub algorithm: Algorithm,
    pub dim: usize,
    pub seed: u64,
    pub error: Error,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_id: u64,
    pub algorithm: Algorithm,
    pub dim: usize,
    /// Target error of the grid cell, for the stop modes that use one.
    pub epsilon: Option<f64>,
    pub seed_index: u64,
    pub seed: u64,
    pub target: Hypothesis,
    pub trace: Vec<TracePoint>,
    pub labels_used: u64,
    pub final_error: f64,
    pub bisections: Option<u64>,
    /// Worst-case label count for the simplex learner's stop rule.
    pub label_bound: Option<u64>,
    pub validation: Option<ValidationReport>,
}

pub type RunRecord = Result<RunOutcome, RunFailure>;

pub fn task_seed(master_seed: u64, task_index: u64) -> u64 {
    mix_seed(master_seed, task_index)
}

/// The hidden target shared by every algorithm of a task.
pub fn task_target(dim: usize, seed: u64) -> Hypothesis {
    let mut rng = SeededRng::new(mix_seed(seed, 0));
    sample_l1_sphere(dim, &mut rng).expect("dimension checked by config")
}

fn label_bound(dim: usize, rule: &StopRule) -> Option<u64> {
    let n = dim as u64;
    match *rule {
        StopRule::TargetError(eps) => label_budget(dim, eps).ok().map(|p| n + p),
        StopRule::IterationBudget(p) => Some(n + p),
        StopRule::MarginThreshold { gamma, radius } => {
            margin_label_budget(dim, gamma, radius).ok().map(|p| n + p)
        }
        StopRule::DiameterThreshold(delta) => {
            let arg = delta / std::f64::consts::SQRT_2;
            let p = if arg >= 1.0 {
                0
            } else {
                (dim as f64 * arg.ln() / crate::simplex::DECAY_FACTOR.ln()).ceil() as u64
            };
            Some(n + p)
        }
    }
}

struct Task {
    index: u64,
    dim: usize,
    epsilon: f64,
    seed_index: u64,
}

fn run_task(config: &ExperimentConfig, task: &Task, fault: Option<Fault>) -> Vec<RunRecord> {
    let seed = task_seed(config.master_seed, task.index);
    let target = task_target(task.dim, seed);
    let epsilon = matches!(config.stop, StopSpec::Error | StopSpec::BudgetFromEpsilon)
        .then_some(task.epsilon);
    let first_run = task.index * config.algorithms.len() as u64;

    // The simplex learner goes first: in the adaptive stop modes the
    // baselines get the same number of labels it used.
    let mut order: Vec<(usize, Algorithm)> = config.algorithms.iter().copied().enumerate().collect();
    order.sort_by_key(|(_, a)| *a != Algorithm::Vsm);

    let mut records: Vec<(usize, RunRecord)> = Vec::with_capacity(order.len());
    let mut paired_budget = match config.stop {
        StopSpec::Labels(b) => Some(b),
        StopSpec::BudgetFromEpsilon => label_budget(task.dim, task.epsilon)
            .ok()
            .map(|p| task.dim as u64 + p.max(1)),
        _ => None,
    };
    for (position, algorithm) in order {
        let run_id = first_run + position as u64;
        let mut oracle = MembershipOracle::new(target.clone());
        let mut rng = SeededRng::new(mix_seed(seed, algorithm.stream()));
        let fail = |error: Error| RunFailure {
            run_id,
            algorithm,
            dim: task.dim,
            seed,
            error,
        };
        let outcome = match algorithm {
            Algorithm::Vsm => {
                let rule = config
                    .vsm_stop(task.dim, task.epsilon)
                    .ok()
                    .flatten()
                    .expect("stop rule checked by config");
                let options = VsmOptions {
                    validate: config.validate,
                    fault,
                };
                run_vsm(&mut oracle, task.dim, &rule, &options).map(|r| {
                    if !matches!(config.stop, StopSpec::Labels(_)) {
                        paired_budget = Some(r.labels_used);
                    }
                    RunOutcome {
                        run_id,
                        algorithm,
                        dim: task.dim,
                        epsilon,
                        seed_index: task.seed_index,
                        seed,
                        final_error: oracle
                            .error_of(r.hypothesis.coords())
                            .expect("centroid is nonzero"),
                        target: target.clone(),
                        labels_used: r.labels_used,
                        bisections: Some(r.bisections),
                        label_bound: label_bound(task.dim, &rule),
                        validation: r.validation,
                        trace: r.trace,
                    }
                })
            }
            Algorithm::Uncertainty | Algorithm::Random => match paired_budget {
                None => Err(Error::InvalidArgument(
                    "no label budget: the paired vsm run did not finish".into(),
                )),
                Some(budget) => {
                    let curve = if algorithm == Algorithm::Uncertainty {
                        run_uncertainty(&mut oracle, task.dim, budget, &mut rng)
                    } else {
                        run_random(&mut oracle, task.dim, budget, &mut rng)
                    };
                    curve.map(|trace| RunOutcome {
                        run_id,
                        algorithm,
                        dim: task.dim,
                        epsilon,
                        seed_index: task.seed_index,
                        seed,
                        target: target.clone(),
                        labels_used: oracle.queries(),
                        final_error: trace.last().map_or(0.5, |p| p.error),
                        bisections: None,
                        label_bound: None,
                        validation: None,
                        trace,
                    })
                }
            },
        };
        records.push((position, outcome.map_err(fail)));
    }
    records.sort_by_key(|(p, _)| *p);
    records.into_iter().map(|(_, r)| r).collect()
}

fn tasks(config: &ExperimentConfig) -> Vec<Task> {
    let mut out = Vec::new();
    for (dim, epsilon) in config.cells() {
        for seed_index in 0..config.seeds {
            out.push(Task {
                index: out.len() as u64,
                dim,
                epsilon,
                seed_index,
            });
        }
    }
    out
}

/// Runs every task of `config`, in parallel, returning records in run order.
pub fn execute(config: &ExperimentConfig) -> Result<Vec<RunRecord>, HarnessError> {
    execute_with_fault(config, None)
}

#[doc(hidden)]
pub fn execute_with_fault(
    config: &ExperimentConfig,
    fault: Option<Fault>,
) -> Result<Vec<RunRecord>, HarnessError> {
    let tasks = tasks(config);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = config.jobs {
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))?;
    let nested: Vec<Vec<RunRecord>> =
        pool.install(|| tasks.par_iter().map(|t| run_task(config, t, fault)).collect());
    Ok(nested.into_iter().flatten().collect())
}

/// Unwraps the records of a run or compare, failing on the first error.
pub fn require_success(records: Vec<RunRecord>) -> Result<Vec<RunOutcome>, HarnessError> {
    records
        .into_iter()
        .map(|r| r.map_err(|f| HarnessError::Run(Box::new(f))))
        .collect()
}

/// CSV rows for a set of runs, ordered by `(run_id, query_index)`.
pub fn trace_rows(outcomes: &[RunOutcome], wall_clock: bool) -> Vec<TraceRow> {
    let mut sorted: Vec<&RunOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| o.run_id);
    sorted
        .into_iter()
        .flat_map(|o| {
            o.trace.iter().map(move |p| TraceRow {
                run_id: o.run_id,
                algorithm: o.algorithm.name().to_string(),
                dim: o.dim,
                seed: o.seed,
                query_index: p.query_index,
                diameter: p.diameter,
                centroid_error: p.error,
                wall_ns: wall_clock.then_some(p.wall_ns),
            })
        })
        .collect()
}

pub fn write_csv(path: &Path, outcomes: &[RunOutcome], wall_clock: bool) -> Result<(), HarnessError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    trace::write_trace(file, &trace_rows(outcomes, wall_clock))
}

/// One line per run, then the aggregate.
pub fn summarize_runs(outcomes: &[RunOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        let _ = write!(
            out,
            "run {:>4} {:<11} dim {:>3} seed {:>20} labels_used {:>6} final_error {:.3e}",
            o.run_id,
            o.algorithm.name(),
            o.dim,
            o.seed,
            o.labels_used,
            o.final_error
        );
        if let Some(bound) = o.label_bound {
            let _ = write!(out, " label_bound {bound}");
        }
        out.push('\n');
    }
    out
}

/// Per-cell aggregate of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub algorithm: Algorithm,
    pub dim: usize,
    pub epsilon: Option<f64>,
    pub runs: usize,
    pub median_labels: u64,
    pub max_labels: u64,
    pub label_bound: Option<u64>,
    pub median_error: f64,
    pub max_error: f64,
    /// Every run met its error target within the label bound.
    pub guarantee_held: bool,
}

fn median_u64(v: &mut [u64]) -> u64 {
    v.sort_unstable();
    v[v.len() / 2]
}

fn median_f64(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

pub fn sweep_cells(outcomes: &[RunOutcome]) -> Vec<SweepCell> {
    let mut keys: Vec<(Algorithm, usize, Option<u64>)> = Vec::new();
    for o in outcomes {
        let key = (o.algorithm, o.dim, o.epsilon.map(f64::to_bits));
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(algorithm, dim, eps_bits)| {
            let group: Vec<&RunOutcome> = outcomes
                .iter()
                .filter(|o| {
                    o.algorithm == algorithm && o.dim == dim && o.epsilon.map(f64::to_bits) == eps_bits
                })
                .collect();
            let epsilon = eps_bits.map(f64::from_bits);
            let mut labels: Vec<u64> = group.iter().map(|o| o.labels_used).collect();
            let mut errors: Vec<f64> = group.iter().map(|o| o.final_error).collect();
            let label_bound = group.iter().filter_map(|o| o.label_bound).max();
            let guarantee_held = group.iter().all(|o| {
                let within_labels = o.label_bound.is_none_or(|b| o.labels_used <= b);
                let within_error = epsilon.is_none_or(|e| o.final_error <= e);
                within_labels && within_error
            });
            SweepCell {
                algorithm,
                dim,
                epsilon,
                runs: group.len(),
                max_labels: labels.iter().copied().max().unwrap_or(0),
                median_labels: median_u64(&mut labels),
                label_bound,
                max_error: errors.iter().copied().fold(0.0, f64::max),
                median_error: median_f64(&mut errors),
                guarantee_held,
            }
        })
        .collect()
}

pub fn format_sweep(cells: &[SweepCell]) -> String {
    let mut out = String::from(
        "algorithm   dim  epsilon  runs  median_labels  max_labels  label_bound  median_error  max_error  ok\n",
    );
    for c in cells {
        let _ = writeln!(
            out,
            "{:<11} {:>3}  {:>7}  {:>4}  {:>13}  {:>10}  {:>11}  {:>12.3e}  {:>9.3e}  {}",
            c.algorithm.name(),
            c.dim,
            c.epsilon.map_or("-".to_string(), |e| format!("{e:.0e}")),
            c.runs,
            c.median_labels,
            c.max_labels,
            c.label_bound.map_or("-".to_string(), |b| b.to_string()),
            c.median_error,
            c.max_error,
            if c.guarantee_held { "yes" } else { "NO" }
        );
    }
    out
}

/// Result of a validation sweep.
#[derive(Debug)]
pub struct ValidationSummary {
    pub runs: usize,
    pub worst: ValidationReport,
    /// Largest `|labels_used − (n + bisections)|` seen.
    pub max_label_mismatch: u64,
    pub failures: Vec<RunFailure>,
}

impl ValidationSummary {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.max_label_mismatch == 0
    }

    pub fn format(&self) -> String {
        use crate::vsm::tolerance as tol;
        let w = &self.worst;
        let mut out = String::new();
        let line = |out: &mut String, name: &str, value: f64, bound: &str, ok: bool| {
            let _ = writeln!(
                out,
                "{:<18} worst {:>12.4e}  required {:<12} {}",
                name,
                value,
                bound,
                if ok { "pass" } else { "FAIL" }
            );
        };
        let _ = writeln!(out, "validated {} runs ({} checkpoints)", self.runs, w.checks);
        line(&mut out, "containment", w.min_barycentric, ">= -1e-8", w.min_barycentric >= tol::CONTAINMENT);
        line(&mut out, "affine-sum", w.max_affine_residual, "<= 1e-9", w.max_affine_residual <= tol::AFFINE_SUM);
        line(&mut out, "orthogonality", w.max_orthogonality, "<= 1e-10", w.max_orthogonality <= tol::ORTHOGONALITY);
        line(&mut out, "halving", w.max_side_product, "< 0", w.max_side_product < 0.0);
        line(&mut out, "diameter-decay", w.max_diameter_ratio, "<= 1+1e-9", w.max_diameter_ratio <= tol::DIAMETER_RATIO);
        line(&mut out, "facet-hyperplane", w.max_facet_residual, "<= 1e-12", w.max_facet_residual <= tol::FACET);
        line(
            &mut out,
            "label-accounting",
            self.max_label_mismatch as f64,
            "== 0",
            self.max_label_mismatch == 0,
        );
        for f in &self.failures {
            let _ = writeln!(out, "FAILURE: {f}");
        }
        let _ = writeln!(out, "{}", if self.passed() { "PASS" } else { "FAIL" });
        out
    }
}

pub fn summarize_validation(records: Vec<RunRecord>) -> ValidationSummary {
    let mut summary = ValidationSummary {
        runs: records.len(),
        worst: ValidationReport::default(),
        max_label_mismatch: 0,
        failures: Vec::new(),
    };
    for record in records {
        match record {
            Ok(o) => {
                if let Some(r) = &o.validation {
                    summary.worst.merge(r);
                }
                let expected = o.dim as u64 + o.bisections.unwrap_or(0);
                summary.max_label_mismatch = summary
                    .max_label_mismatch
                    .max(o.labels_used.abs_diff(expected));
            }
            Err(f) => summary.failures.push(f),
        }
    }
    summary
}

/// Runs the simplex learner with every invariant check enabled.
pub fn validate_suite(
    config: &ExperimentConfig,
    fault: Option<Fault>,
) -> Result<ValidationSummary, HarnessError> {
    if config.command != Command::Validate {
        return Err(HarnessError::Config("validate_suite needs a validate config".into()));
    }
    let mut config = config.clone();
    config.validate = true;
    Ok(summarize_validation(execute_with_fault(&config, fault)?))
}

#[cfg(test)]
mod tests {
    use super::config::Settings;
    use super::*;

    fn config(command: Command, settings: Settings) -> ExperimentConfig {
        ExperimentConfig::resolve(command, settings).unwrap()
    }

    #[test]
    fn run_reports_worked_two_dim_values() {
        let c = config(
            Command::Run,
            Settings {
                dim: Some(vec![2]),
                epsilon: Some(vec![0.01]),
                ..Settings::default()
            },
        );
        let outcomes = require_success(execute(&c).unwrap()).unwrap();
        assert_eq!(outcomes.len(), 1);
        assert_eq!(outcomes[0].labels_used, 9);
        assert_eq!(outcomes[0].label_bound, Some(70));
        assert!(summarize_runs(&outcomes).contains("labels_used      9"));
    }

    #[test]
    fn compare_pairs_targets_and_budgets() {
        let c = config(
            Command::Compare,
            Settings {
                dim: Some(vec![4]),
                stop: Some(config::StopMode::Error),
                epsilon: Some(vec![0.01]),
                seeds: Some(3),
                jobs: Some(2),
                ..Settings::default()
            },
        );
        let outcomes = require_success(execute(&c).unwrap()).unwrap();
        assert_eq!(outcomes.len(), 9);
        for chunk in outcomes.chunks(3) {
            assert_eq!(chunk[0].algorithm, Algorithm::Vsm);
            assert!(chunk.iter().all(|o| o.target == chunk[0].target && o.seed == chunk[0].seed));
            assert!(chunk.iter().all(|o| o.labels_used == chunk[0].labels_used));
        }
        let rows = trace_rows(&outcomes, false);
        assert!(rows.windows(2).all(|w| (w[0].run_id, w[0].query_index) < (w[1].run_id, w[1].query_index)));
        assert!(rows.iter().all(|r| r.wall_ns.is_none()));
        assert!(rows.iter().all(|r| r.diameter.is_some() == (r.algorithm == "vsm")));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let base = Settings {
            dim: Some(vec![3]),
            budget: Some(30),
            seeds: Some(4),
            ..Settings::default()
        };
        let one = config(Command::Compare, Settings { jobs: Some(1), ..base.clone() });
        let four = config(Command::Compare, Settings { jobs: Some(4), ..base });
        let a = trace_rows(&require_success(execute(&one).unwrap()).unwrap(), false);
        let b = trace_rows(&require_success(execute(&four).unwrap()).unwrap(), false);
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_summary_holds_the_guarantee() {
        let c = config(
            Command::Sweep,
            Settings {
                dim: Some(vec![2, 3]),
                seeds: Some(3),
                ..Settings::default()
            },
        );
        let outcomes = require_success(execute(&c).unwrap()).unwrap();
        let cells = sweep_cells(&outcomes);
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|c| c.guarantee_held && c.runs == 3));
        assert!(format_sweep(&cells).lines().count() == 5);
    }

    #[test]
    fn validation_catches_a_flipped_cut() {
        let c = config(
            Command::Validate,
            Settings {
                dim: Some(vec![3, 4]),
                seeds: Some(5),
                ..Settings::default()
            },
        );
        let clean = validate_suite(&c, None).unwrap();
        assert!(clean.passed(), "{}", clean.format());
        assert_eq!(clean.runs, 10);

        let broken = validate_suite(&c, Some(Fault::FlipKeepSide { at_bisection: 2 })).unwrap();
        assert!(!broken.passed());
        assert_eq!(broken.failures.len(), 10);
        for f in &broken.failures {
            match f.error {
                Error::InvariantViolation { invariant, iteration, .. } => {
                    assert_eq!(invariant, crate::error::Invariant::Containment);
                    assert_eq!(iteration, 2);
                }
                ref other => panic!("unexpected {other:?}"),
            }
        }
        assert!(broken.format().contains("FAILURE: run"));
    }
}
