//! Inputs and outputs of the `bounds` and `emd` subcommands, which evaluate
//! formulas and exact transport problems without Monte Carlo.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use robust_dist::bounds::{emd_bound_paninski, rate, BoundKind, ConstraintSpec, RateCurve, RatePoint, Task};
use robust_dist::dist::{paninski_dist, tv_distance, Distribution, PaninskiIndex};
use robust_dist::emd::{exact_emd_hamming, naive_coupling_emd_bound, FiniteJoint};

use crate::error::{ConfigError, Result};
use crate::report::RiskRow;

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> std::result::Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
}

fn sha256_json<T: Serialize>(v: &T) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(v).expect("config serializes")))
}

/// A grid of rate evaluations: every combination of `ks`, `ns`, `gammas` and
/// `constraints`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub task: Task,
    pub ks: Vec<usize>,
    pub ns: Vec<usize>,
    #[serde(default = "zero_gamma")]
    pub gammas: Vec<f64>,
    #[serde(default = "unconstrained")]
    pub constraints: Vec<ConstraintSpec>,
}

fn zero_gamma() -> Vec<f64> {
    vec![0.0]
}

fn unconstrained() -> Vec<ConstraintSpec> {
    vec![ConstraintSpec::Unconstrained]
}

impl BoundsConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, ConfigError> {
        parse(text)
    }

    /// Grid points in `constraint, k, n, gamma` order.
    pub fn points(&self) -> Vec<RatePoint> {
        let mut out = Vec::new();
        for &constraint in &self.constraints {
            for &k in &self.ks {
                for &n in &self.ns {
                    for &gamma in &self.gammas {
                        out.push(RatePoint { k, n, constraint, gamma });
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        let mut errs = Vec::new();
        if self.ks.is_empty() || self.ns.is_empty() || self.gammas.is_empty() || self.constraints.is_empty() {
            errs.push("ks, ns, gammas and constraints must all be nonempty".to_string());
        }
        for p in self.points() {
            if let Err(e) = rate(self.task, p.k, p.n, &p.constraint, p.gamma) {
                errs.push(format!("point k={}, n={}, gamma={}, {:?}: {e}", p.k, p.n, p.gamma, p.constraint));
            }
        }
        errs.dedup();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub config: BoundsConfig,
    pub upper: RateCurve,
    pub lower: RateCurve,
}

pub fn evaluate_bounds(cfg: &BoundsConfig) -> Result<BoundsReport> {
    cfg.validate()?;
    let points = cfg.points();
    Ok(BoundsReport {
        config: cfg.clone(),
        upper: RateCurve::evaluate(cfg.task, BoundKind::Upper, &points)?,
        lower: RateCurve::evaluate(cfg.task, BoundKind::Lower, &points)?,
    })
}

impl BoundsReport {
    /// One row per grid point in the experiment schema; `value` is the upper
    /// rate and there are no trials.
    pub fn rows(&self) -> Vec<RiskRow> {
        let hash = sha256_json(&self.config);
        self.upper
            .points
            .iter()
            .zip(&self.lower.points)
            .map(|((p, up), (_, lo))| RiskRow {
                task: self.config.task.label().to_string(),
                k: p.k,
                n: p.n,
                ell: match p.constraint {
                    ConstraintSpec::Bits { ell } => Some(ell),
                    _ => None,
                },
                epsilon: match p.constraint {
                    ConstraintSpec::Ldp { epsilon } => Some(epsilon),
                    _ => None,
                },
                gamma: p.gamma,
                attack: "none".into(),
                metric: "rate".into(),
                value: *up,
                stderr: 0.0,
                trials: 0,
                bound_upper: *up,
                bound_lower: *lo,
                seed: 0,
                config_hash: hash.clone(),
            })
            .collect()
    }
}

/// A law over a short message sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JointSpec {
    /// Independent coordinates with the listed marginals.
    Product { coords: Vec<Vec<f64>> },
    /// `n` i.i.d. draws from `paninski(z, alpha)`, averaged over every sign
    /// vector `z`.
    PaninskiMixture { k: usize, n: usize, alpha: f64 },
    /// `n` i.i.d. uniform draws on `[k]`.
    UniformProduct { k: usize, n: usize },
    /// Mass in mixed-radix order, coordinate 0 most significant.
    Explicit { dims: Vec<usize>, mass: Vec<f64> },
}

impl JointSpec {
    /// Per-coordinate marginals when the law is a product.
    pub fn product_coords(&self) -> Option<robust_dist::Result<Vec<Distribution<f64>>>> {
        match self {
            JointSpec::Product { coords } => Some(coords.iter().map(|c| Distribution::new(c.clone())).collect()),
            JointSpec::UniformProduct { k, n } => Some(Distribution::uniform(*k).map(|u| vec![u; *n])),
            _ => None,
        }
    }

    pub fn build(&self) -> robust_dist::Result<FiniteJoint<f64>> {
        match self {
            JointSpec::Product { .. } | JointSpec::UniformProduct { .. } => {
                FiniteJoint::product(&self.product_coords().expect("product law")?)
            }
            JointSpec::PaninskiMixture { k, n, alpha } => {
                let family = PaninskiIndex::enumerate(*k, *alpha)?;
                let w = 1.0 / family.len() as f64;
                let parts = family
                    .iter()
                    .map(|z| Ok((w, FiniteJoint::product(&vec![paninski_dist(z, *k)?; *n])?)))
                    .collect::<robust_dist::Result<Vec<_>>>()?;
                FiniteJoint::mixture(&parts)
            }
            JointSpec::Explicit { dims, mass } => FiniteJoint::new(dims.clone(), mass.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmdConfig {
    pub p: JointSpec,
    pub q: JointSpec,
}

impl EmdConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, ConfigError> {
        parse(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmdReport {
    pub config: EmdConfig,
    pub emd: f64,
    /// Sum of per-coordinate TV distances, when both laws are products.
    pub naive_bound: Option<f64>,
    /// `tv(p, q)` for single-coordinate laws.
    pub tv: Option<f64>,
    /// The closed-form bound, when one law is a Paninski mixture and the other
    /// the matching uniform product.
    pub paninski_bound: Option<f64>,
}

impl EmdReport {
    pub fn pairs(&self) -> Vec<(String, f64)> {
        let mut out = vec![("emd".to_string(), self.emd)];
        let named = [("naive_bound", self.naive_bound), ("tv", self.tv), ("paninski_bound", self.paninski_bound)];
        out.extend(named.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
        out
    }
}

pub fn evaluate_emd(cfg: &EmdConfig) -> Result<EmdReport> {
    let p = cfg.p.build().map_err(|e| ConfigError::Invalid(vec![format!("p: {e}")]))?;
    let q = cfg.q.build().map_err(|e| ConfigError::Invalid(vec![format!("q: {e}")]))?;
    if p.dims() != q.dims() {
        return Err(ConfigError::Invalid(vec![format!("p has shape {:?} but q has shape {:?}", p.dims(), q.dims())]).into());
    }
    let emd = exact_emd_hamming(&p, &q)?;
    let naive_bound = match (cfg.p.product_coords(), cfg.q.product_coords()) {
        (Some(a), Some(b)) => Some(naive_coupling_emd_bound(&a?, &b?)?),
        _ => None,
    };
    let tv = if p.dims().len() == 1 { Some(tv_distance(&p.marginal(0)?, &q.marginal(0)?)?) } else { None };
    let paninski_bound = match (&cfg.p, &cfg.q) {
        // the distance is symmetric, so either orientation qualifies
        (JointSpec::PaninskiMixture { k, n, alpha }, JointSpec::UniformProduct { k: k2, n: n2 })
        | (JointSpec::UniformProduct { k: k2, n: n2 }, JointSpec::PaninskiMixture { k, n, alpha })
            if k == k2 && n == n2 =>
        {
            Some(emd_bound_paninski(*n, *k, *alpha))
        }
        _ => None,
    };
    Ok(EmdReport { config: cfg.clone(), emd, naive_bound, tv, paninski_bound })
}
