//! Monte Carlo engine.
//!
//! Trial `t` draws everything from `Seed(master).derive("trial", t)`, and the
//! same honest transcript is attacked at every grid point (common random
//! numbers). Trials run on a rayon pool, are collected in index order and
//! reduced sequentially, so reports do not depend on the worker count.

use std::time::Instant;

use rayon::prelude::*;

use robust_dist::adversary::{
    build_maximal_coupling, coupling_attack, flatten_attack, hash_flood_attack, null_attack, spike_attack, AttackBudget,
    AttackOutcome, CouplingKernel, CouplingPlan,
};
use robust_dist::bounds::{rate, ConstraintSpec, Task};
use robust_dist::channels::{output_distribution, DomainCompressor, HashFunction};
use robust_dist::dist::{half_l1, sample, tv_distance, Distribution};
use robust_dist::estimation::{empirical_estimator, hashing_estimator, EstimateReport};
use robust_dist::testing::{BatchedTranscript, CompressedIdentityTester, IdentityTester, UniformityTester};
use robust_dist::Seed;

use crate::config::{AttackSpec, AttackTarget, ExperimentConfig, SourceSpec};
use crate::error::{ConfigError, HarnessError, Result};
use crate::report::{RiskReport, RiskRow};

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
    /// Record wall-clock time in the report. Off by default so that reports
    /// are byte-stable.
    pub timing: bool,
}

fn pool(opts: &RunOptions) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        b = b.num_threads(w.max(1));
    }
    b.build().map_err(|e| HarnessError::Runtime(format!("cannot start worker pool: {e}")))
}

/// Runs trials `0..trials` in parallel and returns their results in index order.
fn run_trials<R: Send>(opts: &RunOptions, trials: usize, f: impl Fn(usize) -> Result<R> + Sync) -> Result<Vec<R>> {
    pool(opts)?.install(|| (0..trials).into_par_iter().map(&f).collect())
}

/// Mean and standard error (sample standard deviation over `sqrt(len)`).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RiskReport> {
    match cfg.task {
        Task::Learning => run_learning_experiment(cfg, opts),
        Task::IdentityTesting | Task::UniformityTesting => run_testing_experiment(cfg, opts),
    }
}

/// Everything the adversary may look at besides the messages.
struct AttackView<'a> {
    alphabet: usize,
    k: usize,
    hashes: Option<&'a [HashFunction]>,
    plan: Option<&'a CouplingPlan<f64>>,
}

fn apply_attack(spec: &AttackSpec, y: &[usize], view: &AttackView<'_>, budget: &AttackBudget, seed: Seed) -> Result<AttackOutcome> {
    Ok(match spec {
        AttackSpec::None => null_attack(y, budget)?,
        AttackSpec::Flatten => flatten_attack(y, view.alphabet, budget)?,
        AttackSpec::Spike { target } => spike_attack(y, view.alphabet, *target, budget)?,
        AttackSpec::HashFlood { target_set } => {
            let hashes = view.hashes.ok_or_else(|| HarnessError::Runtime("hash_flood needs hashed messages".into()))?;
            let default: Vec<usize>;
            let set = if target_set.is_empty() {
                default = (0..view.k / 2).collect();
                &default
            } else {
                target_set
            };
            hash_flood_attack(y, hashes, set, budget, seed)?
        }
        AttackSpec::Coupling { policy, .. } => {
            let plan = view.plan.ok_or_else(|| HarnessError::Runtime("coupling plan missing".into()))?;
            coupling_attack(y, plan, budget, seed, *policy)?
        }
    })
}

fn budgets(cfg: &ExperimentConfig) -> Result<Vec<AttackBudget>> {
    cfg.gammas.iter().map(|&g| AttackBudget::new(g, cfg.n).map_err(HarnessError::from)).collect()
}

fn validated(cfg: &ExperimentConfig, want_learning: bool) -> Result<()> {
    cfg.validate()?;
    if (cfg.task == Task::Learning) != want_learning {
        let msg = if want_learning { "learning needs task = DL" } else { "testing needs task = IT or UT" };
        return Err(ConfigError::Invalid(vec![msg.into()]).into());
    }
    Ok(())
}

fn row_template(cfg: &ExperimentConfig, hash: &str, gamma: f64) -> Result<RiskRow> {
    let b = rate(cfg.task, cfg.k, cfg.n, &cfg.constraint, gamma)?;
    Ok(RiskRow {
        task: cfg.task.label().to_string(),
        k: cfg.k,
        n: cfg.n,
        ell: cfg.ell(),
        epsilon: cfg.epsilon(),
        gamma,
        attack: cfg.attack.label().to_string(),
        metric: String::new(),
        value: 0.0,
        stderr: 0.0,
        trials: cfg.trial_count(),
        bound_upper: b.upper,
        bound_lower: b.lower,
        seed: cfg.master_seed,
        config_hash: hash.to_string(),
    })
}

/// Learning metrics of one (trial, grid point).
#[derive(Debug, Clone, Copy)]
struct LearnSample {
    tv_error: f64,
    raw_tv_error: f64,
    attack_shift: f64,
}

const LEARN_METRICS: [&str; 3] = ["tv_error", "raw_tv_error", "attack_shift"];

impl LearnSample {
    fn get(&self, i: usize) -> f64 {
        [self.tv_error, self.raw_tv_error, self.attack_shift][i]
    }
}

fn estimate(cfg: &ExperimentConfig, z: &[usize], hashes: Option<&[HashFunction]>) -> Result<EstimateReport<f64>> {
    Ok(match (cfg.ell(), hashes) {
        (Some(ell), Some(h)) => hashing_estimator(z, h, ell, cfg.k)?,
        _ => empirical_estimator(z, cfg.k)?,
    })
}

/// One learning trial against a single source; one sample per grid point.
fn learning_trial(cfg: &ExperimentConfig, source: &SourceSpec, budgets: &[AttackBudget], ts: Seed) -> Result<Vec<LearnSample>> {
    let k = cfg.k;
    let p = source.realize(k, ts.derive("source", 0))?;
    let x = sample(&p, cfg.n, ts.derive("x", 0))?.values;
    let hashes: Option<Vec<HashFunction>> = match cfg.ell() {
        Some(ell) => Some((0..cfg.n).map(|i| HashFunction::random(k, ell, ts.derive("hash", i as u64))).collect::<robust_dist::Result<_>>()?),
        None => None,
    };
    let y: Vec<usize> = match &hashes {
        Some(h) => x.iter().zip(h).map(|(&xi, hi)| hi.apply(xi)).collect(),
        None => x,
    };
    let honest = estimate(cfg, &y, hashes.as_deref())?;
    let plan = match &cfg.attack {
        AttackSpec::Coupling { toward, .. } => {
            let target = toward.realize(k, ts.derive("toward", 0))?;
            Some(match &hashes {
                None => CouplingPlan::shared(build_maximal_coupling(&p, &target)?, cfg.n)?,
                Some(hs) => {
                    let pairs = hs
                        .iter()
                        .map(|h| {
                            let w = h.to_channel::<f64>()?;
                            Ok((output_distribution(&w, &p)?, output_distribution(&w, &target)?))
                        })
                        .collect::<robust_dist::Result<Vec<_>>>()?;
                    CouplingPlan::per_user(&pairs)?
                }
            })
        }
        _ => None,
    };
    let view = AttackView { alphabet: cfg.message_alphabet(), k, hashes: hashes.as_deref(), plan: plan.as_ref() };
    let mut out = Vec::with_capacity(budgets.len());
    for budget in budgets {
        let (est, shift) = if budget.m() == 0 {
            (honest.clone(), 0.0)
        } else {
            let z = apply_attack(&cfg.attack, &y, &view, budget, ts.derive("attack", 0))?.z;
            let est = estimate(cfg, &z, hashes.as_deref())?;
            let shift = half_l1(&est.raw, &honest.raw);
            (est, shift)
        };
        out.push(LearnSample {
            tv_error: tv_distance(&est.projected, &p)?,
            raw_tv_error: half_l1(&est.raw, p.probs()),
            attack_shift: shift,
        });
    }
    Ok(out)
}

/// Mean error of the learner under the configured source and attack, per
/// grid point. For a `worst_of` source each grid point reports the source with
/// the largest mean TV error.
pub fn run_learning_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RiskReport> {
    validated(cfg, true)?;
    let start = Instant::now();
    let budgets = budgets(cfg)?;
    let sources: Vec<SourceSpec> = match &cfg.source {
        SourceSpec::WorstOf { sources } => sources.clone(),
        s => vec![s.clone()],
    };
    let master = Seed(cfg.master_seed);
    let per_trial = run_trials(opts, cfg.trial_count(), |t| {
        let ts = master.derive("trial", t as u64);
        sources
            .iter()
            .enumerate()
            .map(|(si, s)| learning_trial(cfg, s, &budgets, ts.derive("source-slot", si as u64)))
            .collect::<Result<Vec<_>>>()
    })?;
    let hash = cfg.hash();
    let mut rows = Vec::new();
    for (gi, &gamma) in cfg.gammas.iter().enumerate() {
        let stats: Vec<Vec<(f64, f64)>> = (0..sources.len())
            .map(|si| {
                (0..LEARN_METRICS.len())
                    .map(|mi| mean_se(&per_trial.iter().map(|tr| tr[si][gi].get(mi)).collect::<Vec<_>>()))
                    .collect()
            })
            .collect();
        let worst = (0..sources.len()).fold(0, |best, si| if stats[si][0].0 > stats[best][0].0 { si } else { best });
        for (mi, name) in LEARN_METRICS.iter().enumerate() {
            let mut row = row_template(cfg, &hash, gamma)?;
            row.metric = name.to_string();
            (row.value, row.stderr) = stats[worst][mi];
            rows.push(row);
        }
    }
    Ok(RiskReport::new(cfg.clone(), hash, rows, opts.timing.then(|| start.elapsed().as_millis() as u64)))
}

enum BuiltTester {
    Uniform(UniformityTester<f64>),
    Identity(IdentityTester<f64>),
    Compressed(CompressedIdentityTester<f64>),
}

fn build_tester(cfg: &ExperimentConfig, q: &Distribution<f64>, gamma: f64) -> Result<BuiltTester> {
    let spec = cfg.tester.as_ref().ok_or_else(|| ConfigError::Invalid(vec!["missing tester".into()]))?;
    let tcfg = spec.config(gamma, Seed(cfg.master_seed).derive("tester", 0));
    Ok(match (cfg.constraint, cfg.task) {
        (ConstraintSpec::Bits { ell }, _) => {
            BuiltTester::Compressed(CompressedIdentityTester::new(cfg.k, ell, q, cfg.n, tcfg, cfg.compression())?)
        }
        (_, Task::UniformityTesting) => BuiltTester::Uniform(UniformityTester::new(cfg.k, cfg.n, tcfg)?),
        _ => BuiltTester::Identity(IdentityTester::new(q, cfg.n, tcfg)?),
    })
}

/// Coupling kernels for messages drawn from `p`, pushed toward `target`.
fn testing_plan(
    cfg: &ExperimentConfig,
    p: &Distribution<f64>,
    target: &Distribution<f64>,
    transcript: Option<&BatchedTranscript>,
) -> Result<CouplingPlan<f64>> {
    match (cfg.ell(), transcript) {
        (Some(ell), Some(t)) if (1u64 << ell) < cfg.k as u64 => {
            let mut kernels: Vec<CouplingKernel<f64>> = Vec::with_capacity(t.batches.len());
            let mut owner = vec![0usize; cfg.n];
            for (j, (range, &s)) in t.batches.iter().zip(&t.compressor_seeds).enumerate() {
                let phi = DomainCompressor::random(cfg.k, ell, s)?;
                kernels.push(build_maximal_coupling(&phi.compress_dist(p)?, &phi.compress_dist(target)?)?);
                owner[range.clone()].iter_mut().for_each(|o| *o = j);
            }
            Ok(CouplingPlan::new(kernels, owner)?)
        }
        _ => Ok(CouplingPlan::shared(build_maximal_coupling(p, target)?, cfg.n)?),
    }
}

fn alternate_labels(cfg: &ExperimentConfig) -> Vec<String> {
    let base: Vec<&str> = cfg.alternates.iter().map(SourceSpec::label).collect();
    base.iter()
        .enumerate()
        .map(|(i, b)| if base.iter().filter(|o| *o == b).count() > 1 { format!("{b}_{i}") } else { b.to_string() })
        .collect()
}

/// Yes-rate under `p == q` and no-rate under each alternate, per grid point.
/// The advantage of an alternate is `P(no | alternate) - P(no | null)`,
/// estimated from paired trials.
pub fn run_testing_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RiskReport> {
    validated(cfg, false)?;
    let start = Instant::now();
    let budgets = budgets(cfg)?;
    let master = Seed(cfg.master_seed);
    let q = cfg.reference.realize(cfg.k, master.derive("reference", 0))?;
    let testers = cfg.gammas.iter().map(|&g| build_tester(cfg, &q, g)).collect::<Result<Vec<_>>>()?;
    let hypotheses: Vec<SourceSpec> = std::iter::once(cfg.reference.clone()).chain(cfg.alternates.iter().cloned()).collect();
    let compressor = testers.iter().find_map(|t| match t {
        BuiltTester::Compressed(c) => Some(c),
        _ => None,
    });
    let alphabet = cfg.message_alphabet();
    // per trial: [grid point][hypothesis] -> answered yes
    let per_trial: Vec<Vec<Vec<bool>>> = run_trials(opts, cfg.trial_count(), |t| {
        let ts = master.derive("trial", t as u64);
        let mut by_hyp = Vec::with_capacity(hypotheses.len());
        for (h, src) in hypotheses.iter().enumerate() {
            let hs = ts.derive("hypothesis", h as u64);
            let p = if h == 0 { q.clone() } else { src.realize(cfg.k, hs.derive("source", 0))? };
            let x = sample(&p, cfg.n, hs.derive("x", 0))?.values;
            let transcript = match compressor {
                Some(c) => Some(c.encode(&x, hs.derive("public", 0))?),
                None => None,
            };
            let y = transcript.as_ref().map_or(x, |t| t.messages.clone());
            let attacked = match cfg.attack_target {
                AttackTarget::Both => true,
                AttackTarget::Null => h == 0,
                AttackTarget::Alternate => h > 0,
            };
            let plan = match (&cfg.attack, attacked) {
                (AttackSpec::Coupling { toward, .. }, true) => {
                    Some(testing_plan(cfg, &p, &toward.realize(cfg.k, hs.derive("toward", 0))?, transcript.as_ref())?)
                }
                _ => None,
            };
            let view = AttackView { alphabet, k: cfg.k, hashes: None, plan: plan.as_ref() };
            let mut answers = Vec::with_capacity(budgets.len());
            for (budget, tester) in budgets.iter().zip(&testers) {
                let z = if attacked && budget.m() > 0 {
                    apply_attack(&cfg.attack, &y, &view, budget, hs.derive("attack", 0))?.z
                } else {
                    y.clone()
                };
                let yes = match tester {
                    BuiltTester::Uniform(u) => u.test(&z)?.is_yes(),
                    BuiltTester::Identity(i) => i.test(&z, hs.derive("goldreich", 0))?.is_yes(),
                    BuiltTester::Compressed(c) => {
                        let tr = transcript.as_ref().ok_or_else(|| HarnessError::Runtime("missing transcript".into()))?;
                        c.test_transcript(tr, &z, hs.derive("batch-test", 0))?.is_yes()
                    }
                };
                answers.push(yes);
            }
            by_hyp.push(answers);
        }
        // transpose to [grid][hypothesis]
        Ok((0..budgets.len()).map(|g| by_hyp.iter().map(|a| a[g]).collect()).collect())
    })?;
    let hash = cfg.hash();
    let labels = alternate_labels(cfg);
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    let mut rows = Vec::new();
    for (gi, &gamma) in cfg.gammas.iter().enumerate() {
        let null_yes: Vec<f64> = per_trial.iter().map(|tr| ind(tr[gi][0])).collect();
        let mut row = row_template(cfg, &hash, gamma)?;
        row.metric = "yes_rate_null".into();
        (row.value, row.stderr) = mean_se(&null_yes);
        rows.push(row);
        for (ai, label) in labels.iter().enumerate() {
            let alt_no: Vec<f64> = per_trial.iter().map(|tr| ind(!tr[gi][ai + 1])).collect();
            let mut row = row_template(cfg, &hash, gamma)?;
            row.metric = format!("no_rate_{label}");
            (row.value, row.stderr) = mean_se(&alt_no);
            rows.push(row);
            let adv: Vec<f64> = per_trial.iter().map(|tr| ind(!tr[gi][ai + 1]) - ind(!tr[gi][0])).collect();
            let mut row = row_template(cfg, &hash, gamma)?;
            row.metric = format!("advantage_{label}");
            (row.value, row.stderr) = mean_se(&adv);
            rows.push(row);
        }
    }
    Ok(RiskReport::new(cfg.clone(), hash, rows, opts.timing.then(|| start.elapsed().as_millis() as u64)))
}

/// Numeric fields a sweep may vary.
pub const SWEEP_AXES: [&str; 6] = ["k", "n", "ell", "alpha", "trials", "gamma"];

/// The config with `axis` set to `value` and a master seed derived from
/// `(master_seed, axis, value)`.
pub fn with_axis(template: &ExperimentConfig, axis: &str, value: f64) -> Result<ExperimentConfig> {
    let mut cfg = template.clone();
    let as_count = |v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(ConfigError::Invalid(vec![format!("{axis} must be a nonnegative integer, got {v}")]).into())
        }
    };
    match axis {
        "k" => cfg.k = as_count(value)?,
        "n" => cfg.n = as_count(value)?,
        "trials" => cfg.trials = Some(as_count(value)?),
        "gamma" => cfg.gammas = vec![value],
        "ell" => cfg.constraint = ConstraintSpec::Bits { ell: as_count(value)? as u32 },
        "alpha" => {
            // the tester and every Paninski source move together
            let mut touched = false;
            if let Some(t) = &mut cfg.tester {
                t.alpha = value;
                touched = true;
            }
            for src in std::iter::once(&mut cfg.source).chain(cfg.alternates.iter_mut()) {
                if let SourceSpec::Paninski { alpha, .. } = src {
                    *alpha = value;
                    touched = true;
                }
            }
            if !touched {
                return Err(ConfigError::Invalid(vec!["alpha sweeps need a tester or a paninski source".into()]).into());
            }
        }
        other => {
            return Err(ConfigError::Invalid(vec![format!("unknown sweep axis `{other}`; expected one of {}", SWEEP_AXES.join(", "))]).into())
        }
    }
    cfg.master_seed = Seed(template.master_seed).derive(axis, value.to_bits()).0;
    Ok(cfg)
}

/// One report per value, in order. Every derived config is validated before
/// the first run.
pub fn sweep(template: &ExperimentConfig, axis: &str, values: &[f64], opts: &RunOptions) -> Result<Vec<RiskReport>> {
    if !SWEEP_AXES.contains(&axis) {
        return Err(ConfigError::Invalid(vec![format!("unknown sweep axis `{axis}`; expected one of {}", SWEEP_AXES.join(", "))]).into());
    }
    let cfgs = values.iter().map(|&v| with_axis(template, axis, v)).collect::<Result<Vec<_>>>()?;
    for c in &cfgs {
        c.validate()?;
    }
    cfgs.iter().map(|c| run_experiment(c, opts)).collect()
}
