//! Experiment configuration: one point of the learning/testing game plus a
//! grid of manipulation fractions.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use robust_dist::adversary::BudgetPolicy;
use robust_dist::bounds::{validate_constraint, ConstraintSpec, Task};
use robust_dist::dist::{paninski_dist, Distribution, PaninskiIndex};
use robust_dist::testing::{CompressionConstants, TesterConfig, ThresholdMode};
use robust_dist::Seed;

use crate::error::ConfigError;

pub const DEFAULT_LEARNING_TRIALS: usize = 200;
pub const DEFAULT_TESTING_TRIALS: usize = 500;

/// How the Paninski sign vector is chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SignPolicy {
    /// A fresh uniformly random `z` every trial.
    #[default]
    Fresh,
    Fixed { signs: Vec<i8> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    #[default]
    Uniform,
    Paninski {
        alpha: f64,
        #[serde(default)]
        z: SignPolicy,
    },
    Explicit {
        probs: Vec<f64>,
    },
    /// Risk is the largest per-source mean; only meaningful for learning.
    WorstOf {
        sources: Vec<SourceSpec>,
    },
}

impl SourceSpec {
    pub fn label(&self) -> &'static str {
        match self {
            SourceSpec::Uniform => "uniform",
            SourceSpec::Paninski { .. } => "paninski",
            SourceSpec::Explicit { .. } => "explicit",
            SourceSpec::WorstOf { .. } => "worst_of",
        }
    }

    /// The distribution used in one trial; `seed` only matters for fresh signs.
    pub fn realize(&self, k: usize, seed: Seed) -> robust_dist::Result<Distribution<f64>> {
        match self {
            SourceSpec::Uniform => Distribution::uniform(k),
            SourceSpec::Paninski { alpha, z: SignPolicy::Fresh } => paninski_dist(&PaninskiIndex::random(k, *alpha, seed)?, k),
            SourceSpec::Paninski { alpha, z: SignPolicy::Fixed { signs } } => {
                paninski_dist(&PaninskiIndex::new(signs.clone(), *alpha)?, k)
            }
            SourceSpec::Explicit { probs } => Distribution::new(probs.clone()),
            SourceSpec::WorstOf { .. } => Err(robust_dist::Error::InvalidParameter("worst_of has no single distribution".into())),
        }
    }

    fn validate(&self, k: usize, path: &str, errs: &mut Vec<String>, nested: bool) {
        let probe = Seed(0);
        match self {
            SourceSpec::WorstOf { sources } => {
                if nested {
                    errs.push(format!("{path}: worst_of cannot be nested"));
                } else if sources.is_empty() {
                    errs.push(format!("{path}: worst_of needs at least one source"));
                }
                for (i, s) in sources.iter().enumerate() {
                    s.validate(k, &format!("{path}.sources[{i}]"), errs, true);
                }
            }
            other => {
                if let Err(e) = other.realize(k, probe) {
                    errs.push(format!("{path}: {e}"));
                }
            }
        }
    }
}

/// Which messages are targeted in a testing experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttackTarget {
    Null,
    Alternate,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackSpec {
    #[default]
    None,
    Flatten,
    Spike {
        #[serde(default)]
        target: usize,
    },
    /// Floods hashed messages toward `target_set`; empty means the first half
    /// of `[k]`.
    HashFlood {
        #[serde(default)]
        target_set: Vec<usize>,
    },
    /// Couples each user's honest message law with the law the messages would
    /// have under `toward`.
    Coupling {
        #[serde(default)]
        policy: BudgetPolicy,
        #[serde(default)]
        toward: SourceSpec,
    },
}

impl AttackSpec {
    pub fn label(&self) -> &'static str {
        match self {
            AttackSpec::None => "none",
            AttackSpec::Flatten => "flatten",
            AttackSpec::Spike { .. } => "spike",
            AttackSpec::HashFlood { .. } => "hash_flood",
            AttackSpec::Coupling { policy: BudgetPolicy::Partial, .. } => "coupling",
            AttackSpec::Coupling { policy: BudgetPolicy::Strict, .. } => "coupling_strict",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Empirical,
    Hashing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TesterSpec {
    pub alpha: f64,
    #[serde(default = "default_c2")]
    pub c2: f64,
    #[serde(default = "default_calibration_trials")]
    pub calibration_trials: usize,
    #[serde(default)]
    pub mode: ThresholdMode,
    #[serde(default = "default_quantile")]
    pub quantile: f64,
    /// Budget slack used by the threshold; defaults to each grid point's gamma.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub compression: Option<CompressionConstants>,
}

fn default_c2() -> f64 {
    TesterConfig::<f64>::DEFAULT_C2
}

fn default_calibration_trials() -> usize {
    TesterConfig::<f64>::DEFAULT_CALIBRATION_TRIALS
}

fn default_quantile() -> f64 {
    0.95
}

impl TesterSpec {
    pub fn config(&self, grid_gamma: f64, seed: Seed) -> TesterConfig<f64> {
        TesterConfig {
            alpha: self.alpha,
            gamma: self.gamma.unwrap_or(grid_gamma),
            c2: self.c2,
            calibration_trials: self.calibration_trials,
            mode: self.mode,
            quantile: self.quantile,
            seed,
        }
    }
}

fn default_constraint() -> ConstraintSpec {
    ConstraintSpec::Unconstrained
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub k: usize,
    pub n: usize,
    #[serde(default = "default_constraint")]
    pub constraint: ConstraintSpec,
    pub gammas: Vec<f64>,
    /// Learning: the distribution to learn.
    #[serde(default)]
    pub source: SourceSpec,
    /// Testing: the reference `q`; uniform for uniformity testing.
    #[serde(default)]
    pub reference: SourceSpec,
    /// Testing: far distributions whose rejection rate is measured.
    #[serde(default)]
    pub alternates: Vec<SourceSpec>,
    #[serde(default)]
    pub attack: AttackSpec,
    #[serde(default)]
    pub attack_target: AttackTarget,
    #[serde(default)]
    pub estimator: Option<EstimatorKind>,
    #[serde(default)]
    pub tester: Option<TesterSpec>,
    /// Defaults to 200 for learning and 500 for testing.
    #[serde(default)]
    pub trials: Option<usize>,
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn trial_count(&self) -> usize {
        self.trials.unwrap_or(match self.task {
            Task::Learning => DEFAULT_LEARNING_TRIALS,
            _ => DEFAULT_TESTING_TRIALS,
        })
    }

    pub fn ell(&self) -> Option<u32> {
        match self.constraint {
            ConstraintSpec::Bits { ell } => Some(ell),
            _ => None,
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self.constraint {
            ConstraintSpec::Ldp { epsilon } => Some(epsilon),
            _ => None,
        }
    }

    /// Size of the message alphabet the adversary rewrites.
    pub fn message_alphabet(&self) -> usize {
        match (self.constraint, self.task) {
            (ConstraintSpec::Bits { ell }, Task::Learning) => 1usize << ell,
            (ConstraintSpec::Bits { ell }, _) if (1u64 << ell) < self.k as u64 => 1usize << ell,
            _ => self.k,
        }
    }

    pub fn estimator_kind(&self) -> EstimatorKind {
        self.estimator.unwrap_or(match self.constraint {
            ConstraintSpec::Bits { .. } => EstimatorKind::Hashing,
            _ => EstimatorKind::Empirical,
        })
    }

    pub fn compression(&self) -> CompressionConstants {
        self.tester.as_ref().and_then(|t| t.compression).unwrap_or_default()
    }

    /// Every problem with the config, not just the first.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        if self.k < 2 {
            errs.push(format!("k must be at least 2, got {}", self.k));
        }
        if self.n == 0 {
            errs.push("n must be at least 1".into());
        }
        if self.trials == Some(0) {
            errs.push("trials must be at least 1".into());
        }
        if self.gammas.is_empty() {
            errs.push("gammas must list at least one value".into());
        }
        for (i, g) in self.gammas.iter().enumerate() {
            if !(0.0..=1.0).contains(g) {
                errs.push(format!("gammas[{i}] = {g} is outside [0, 1]"));
            }
        }
        if let Err(e) = validate_constraint(&self.constraint) {
            errs.push(format!("constraint: {e}"));
        }
        if matches!(self.constraint, ConstraintSpec::Ldp { .. }) {
            errs.push("ldp constraints are supported by `bounds` only, not by learning or testing experiments".into());
        }
        if let ConstraintSpec::Bits { ell } = self.constraint {
            if ell > 20 {
                errs.push(format!("ell = {ell} is too large for simulation (at most 20)"));
            }
        }
        let k = self.k.max(2);
        match self.task {
            Task::Learning => {
                self.source.validate(k, "source", &mut errs, false);
                if let Some(e) = self.estimator {
                    let want = if self.ell().is_some() { EstimatorKind::Hashing } else { EstimatorKind::Empirical };
                    if e != want {
                        errs.push(format!("estimator {e:?} does not match the constraint; use {want:?}"));
                    }
                }
                if self.tester.is_some() {
                    errs.push("tester is only used by testing tasks".into());
                }
                if !self.alternates.is_empty() {
                    errs.push("alternates are only used by testing tasks".into());
                }
            }
            Task::IdentityTesting | Task::UniformityTesting => {
                if matches!(self.reference, SourceSpec::WorstOf { .. }) {
                    errs.push("reference cannot be worst_of".into());
                } else {
                    self.reference.validate(k, "reference", &mut errs, true);
                }
                if self.task == Task::UniformityTesting && self.reference != SourceSpec::Uniform {
                    errs.push("uniformity testing requires reference = uniform".into());
                }
                for (i, a) in self.alternates.iter().enumerate() {
                    if matches!(a, SourceSpec::WorstOf { .. }) {
                        errs.push(format!("alternates[{i}] cannot be worst_of"));
                    } else {
                        a.validate(k, &format!("alternates[{i}]"), &mut errs, true);
                    }
                }
                if self.estimator.is_some() {
                    errs.push("estimator is only used by learning".into());
                }
                match &self.tester {
                    None => errs.push("testing tasks need a [tester] section".into()),
                    Some(t) => {
                        if let Err(e) = t.config(t.gamma.unwrap_or(0.0), Seed(0)).validate() {
                            errs.push(format!("tester: {e}"));
                        }
                        if let Some(c) = &t.compression {
                            if let Err(e) = c.validate() {
                                errs.push(format!("tester.compression: {e}"));
                            }
                        }
                        if self.ell().is_some() && self.n < t.compression.unwrap_or_default().batches() {
                            errs.push(format!("n = {} is smaller than the number of batches", self.n));
                        }
                    }
                }
                if matches!(self.reference, SourceSpec::Paninski { z: SignPolicy::Fresh, .. }) {
                    errs.push("reference must be fixed; use explicit probabilities or fixed signs".into());
                }
            }
        }
        let alphabet = self.message_alphabet();
        match &self.attack {
            AttackSpec::Spike { target } if *target >= alphabet => {
                errs.push(format!("attack.target = {target} is outside the message alphabet of size {alphabet}"));
            }
            AttackSpec::HashFlood { target_set } => {
                if !(self.task == Task::Learning && self.ell().is_some()) {
                    errs.push("hash_flood attacks need a learning task with a bits constraint".into());
                }
                if let Some(t) = target_set.iter().find(|&&t| t >= self.k) {
                    errs.push(format!("attack.target_set contains {t}, outside [0, {})", self.k));
                }
            }
            AttackSpec::Coupling { toward, .. } => {
                if matches!(toward, SourceSpec::WorstOf { .. }) {
                    errs.push("attack.toward cannot be worst_of".into());
                } else {
                    toward.validate(k, "attack.toward", &mut errs, true);
                }
            }
            _ => {}
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }
}
