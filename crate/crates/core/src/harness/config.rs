//! Experiment configuration: flags and an optional TOML file with the same
//! keys, flags taking precedence.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use super::HarnessError;
use crate::vsm::StopRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Vsm,
    Uncertainty,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Vsm, Algorithm::Uncertainty, Algorithm::Random];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Vsm => "vsm",
            Algorithm::Uncertainty => "uncertainty",
            Algorithm::Random => "random",
        }
    }

    pub(crate) fn stream(self) -> u64 {
        match self {
            Algorithm::Vsm => 1,
            Algorithm::Uncertainty => 2,
            Algorithm::Random => 3,
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopMode {
    Error,
    Budget,
    Diameter,
    Margin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Compare,
    Sweep,
    Validate,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> From<OneOrMany<T>> for Vec<T> {
    fn from(v: OneOrMany<T>) -> Self {
        match v {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(xs) => xs,
        }
    }
}

fn one_or_many<'de, D, T>(d: D) -> Result<Option<Vec<T>>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(Option::<OneOrMany<T>>::deserialize(d)?.map(Into::into))
}

/// Unresolved settings, as read from flags or a config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    #[serde(default, deserialize_with = "one_or_many")]
    pub dim: Option<Vec<usize>>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub epsilon: Option<Vec<f64>>,
    pub budget: Option<u64>,
    pub delta: Option<f64>,
    pub stop: Option<StopMode>,
    pub gamma: Option<f64>,
    pub radius: Option<f64>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub algs: Option<Vec<Algorithm>>,
    pub seeds: Option<u64>,
    pub master_seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub validate: Option<bool>,
    pub jobs: Option<usize>,
    pub wall_clock: Option<bool>,
}

impl Settings {
    /// `self` with every value present in `over` replaced.
    pub fn overlay(self, over: Settings) -> Settings {
        Settings {
            dim: over.dim.or(self.dim),
            epsilon: over.epsilon.or(self.epsilon),
            budget: over.budget.or(self.budget),
            delta: over.delta.or(self.delta),
            stop: over.stop.or(self.stop),
            gamma: over.gamma.or(self.gamma),
            radius: over.radius.or(self.radius),
            algs: over.algs.or(self.algs),
            seeds: over.seeds.or(self.seeds),
            master_seed: over.master_seed.or(self.master_seed),
            out: over.out.or(self.out),
            validate: over.validate.or(self.validate),
            jobs: over.jobs.or(self.jobs),
            wall_clock: over.wall_clock.or(self.wall_clock),
        }
    }

    pub fn from_toml(text: &str) -> Result<Settings, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Settings, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }
}

/// Parses `2,5,10` or `2-8` (inclusive) or any comma-separated mix.
pub fn parse_dims(text: &str) -> Result<Vec<usize>, String> {
    let mut dims = Vec::new();
    for token in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((lo, hi)) = token.split_once('-') {
            let lo: usize = lo.trim().parse().map_err(|_| format!("bad dimension `{lo}`"))?;
            let hi: usize = hi.trim().parse().map_err(|_| format!("bad dimension `{hi}`"))?;
            if lo > hi {
                return Err(format!("empty dimension range `{token}`"));
            }
            dims.extend(lo..=hi);
        } else {
            dims.push(token.parse().map_err(|_| format!("bad dimension `{token}`"))?);
        }
    }
    if dims.is_empty() {
        return Err("no dimensions given".into());
    }
    Ok(dims)
}

/// How runs are stopped, after resolving defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopSpec {
    /// Target generalization error, one run set per entry of `epsilons`.
    Error,
    /// Fixed total label budget for every algorithm.
    Labels(u64),
    /// Worst-case bisection budget derived from each entry of `epsilons`.
    BudgetFromEpsilon,
    Diameter(f64),
    Margin { gamma: f64, radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub dims: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub stop: StopSpec,
    pub algorithms: Vec<Algorithm>,
    pub seeds: u64,
    pub master_seed: u64,
    pub validate: bool,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub wall_clock: bool,
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    /// Fills in per-command defaults and checks consistency.
    pub fn resolve(command: Command, s: Settings) -> Result<Self, HarnessError> {
        let default_dims = match command {
            Command::Sweep => vec![2, 5, 10, 20],
            Command::Validate => (2..=8).collect(),
            Command::Run | Command::Compare => vec![10],
        };
        let default_eps = match command {
            Command::Sweep => vec![1e-2, 1e-3],
            _ => vec![1e-3],
        };
        let dims = s.dim.clone().unwrap_or(default_dims);
        let epsilon_given = s.epsilon.is_some();
        let epsilons = s.epsilon.clone().unwrap_or(default_eps);
        let algorithms = s.algs.clone().unwrap_or_else(|| match command {
            Command::Compare => Algorithm::ALL.to_vec(),
            _ => vec![Algorithm::Vsm],
        });
        let seeds = s.seeds.unwrap_or(match command {
            Command::Run => 1,
            Command::Validate => 100,
            _ => 25,
        });

        if dims.is_empty() {
            return Err(config_err("no dimensions given"));
        }
        if let Some(d) = dims.iter().find(|d| **d < 2) {
            return Err(config_err(format!("dimension must be at least 2, got {d}")));
        }
        if epsilons.is_empty() {
            return Err(config_err("no target errors given"));
        }
        if seeds == 0 {
            return Err(config_err("seeds must be at least 1"));
        }
        if algorithms.is_empty() {
            return Err(config_err("no algorithms selected"));
        }
        if matches!(command, Command::Run | Command::Compare)
            && (dims.len() > 1 || epsilons.len() > 1)
        {
            return Err(config_err(
                "run and compare take a single --dim and --epsilon; use sweep for grids",
            ));
        }
        if command == Command::Validate && algorithms != [Algorithm::Vsm] {
            return Err(config_err("validate only runs the vsm algorithm"));
        }
        let baselines = algorithms.iter().any(|a| *a != Algorithm::Vsm);
        if baselines
            && !algorithms.contains(&Algorithm::Vsm)
            && matches!(s.stop, Some(StopMode::Error | StopMode::Diameter | StopMode::Margin))
        {
            return Err(config_err(
                "baselines take their budget from the vsm run in this stop mode; \
                 add vsm to --algs or use --stop budget",
            ));
        }
        if s.jobs == Some(0) {
            return Err(config_err("jobs must be at least 1"));
        }

        let mode = s.stop.unwrap_or(match (command, s.budget, epsilon_given) {
            (_, Some(_), false) => StopMode::Budget,
            (Command::Compare, None, false) => StopMode::Budget,
            _ => StopMode::Error,
        });
        let stray = |key: &str, present: bool| -> Result<(), HarnessError> {
            if present {
                Err(config_err(format!(
                    "`{key}` does not apply to --stop {}; give exactly one stop specification",
                    format!("{mode:?}").to_lowercase()
                )))
            } else {
                Ok(())
            }
        };
        let stop = match mode {
            StopMode::Error => {
                stray("budget", s.budget.is_some())?;
                stray("delta", s.delta.is_some())?;
                stray("gamma", s.gamma.is_some())?;
                StopSpec::Error
            }
            StopMode::Budget => {
                stray("delta", s.delta.is_some())?;
                stray("gamma", s.gamma.is_some())?;
                match (s.budget, epsilon_given) {
                    (Some(_), true) => {
                        return Err(config_err(
                            "give either --budget or --epsilon for --stop budget, not both",
                        ))
                    }
                    (Some(b), false) => StopSpec::Labels(b),
                    (None, true) => StopSpec::BudgetFromEpsilon,
                    (None, false) => StopSpec::Labels(300),
                }
            }
            StopMode::Diameter => {
                stray("budget", s.budget.is_some())?;
                stray("gamma", s.gamma.is_some())?;
                stray("epsilon", epsilon_given)?;
                StopSpec::Diameter(
                    s.delta
                        .ok_or_else(|| config_err("--stop diameter needs --delta"))?,
                )
            }
            StopMode::Margin => {
                stray("budget", s.budget.is_some())?;
                stray("delta", s.delta.is_some())?;
                stray("epsilon", epsilon_given)?;
                StopSpec::Margin {
                    gamma: s
                        .gamma
                        .ok_or_else(|| config_err("--stop margin needs --gamma"))?,
                    radius: s.radius.unwrap_or(1.0),
                }
            }
        };
        if mode != StopMode::Margin && s.radius.is_some() {
            stray("radius", true)?;
        }

        let config = ExperimentConfig {
            command,
            dims,
            epsilons,
            stop,
            algorithms,
            seeds,
            master_seed: s.master_seed.unwrap_or(0),
            validate: s.validate.unwrap_or(command == Command::Validate),
            out: s.out,
            jobs: s.jobs,
            wall_clock: s.wall_clock.unwrap_or(false),
        };
        for &dim in &config.dims {
            for &eps in &config.epsilons {
                if let Some(rule) = config.vsm_stop(dim, eps)? {
                    rule.check(dim).map_err(|e| config_err(e.to_string()))?;
                }
                if let StopSpec::Labels(b) = config.stop {
                    if b <= dim as u64 {
                        return Err(config_err(format!(
                            "budget {b} must exceed the dimension {dim}"
                        )));
                    }
                }
            }
        }
        Ok(config)
    }

    /// The simplex learner's stop rule for one grid cell.
    pub fn vsm_stop(&self, dim: usize, epsilon: f64) -> Result<Option<StopRule>, HarnessError> {
        Ok(Some(match self.stop {
            StopSpec::Error => StopRule::TargetError(epsilon),
            StopSpec::Labels(b) => StopRule::IterationBudget(b.saturating_sub(dim as u64)),
            StopSpec::BudgetFromEpsilon => {
                let p = crate::vsm::label_budget(dim, epsilon)
                    .map_err(|e| config_err(e.to_string()))?;
                StopRule::IterationBudget(p.max(1))
            }
            StopSpec::Diameter(delta) => StopRule::DiameterThreshold(delta),
            StopSpec::Margin { gamma, radius } => StopRule::MarginThreshold { gamma, radius },
        }))
    }

    /// Grid cells `(dim, epsilon)` in execution order. Epsilon only varies
    /// for the stop modes that read it.
    pub fn cells(&self) -> Vec<(usize, f64)> {
        let eps: Vec<f64> = match self.stop {
            StopSpec::Error | StopSpec::BudgetFromEpsilon => self.epsilons.clone(),
            _ => vec![f64::NAN],
        };
        self.dims
            .iter()
            .flat_map(|&d| eps.iter().map(move |&e| (d, e)))
            .collect()
    }
}
