//! Laws of attacked transcripts and the information identities behind the
//! lower bounds, checked through the public API only.

use rand::Rng as _;
use robust_dist::adversary::{build_maximal_coupling, coupling_attack, AttackBudget, BudgetPolicy, CouplingPlan};
use robust_dist::channels::{channel_info_matrix, output_distribution, Channel, Constraint};
use robust_dist::dist::{chi_square_divergence, paninski_dist, sample, tv_distance, Distribution, PaninskiIndex};
use robust_dist::estimation::empirical_estimator;
use robust_dist::Seed;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chi_square_gof(observed: &[usize], expected: &Distribution<f64>) -> f64 {
    let total: usize = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(expected.probs())
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    1.0 - ChiSquared::new((observed.len() - 1) as f64).unwrap().cdf(stat)
}

/// Full-budget coupling from `p^n` lands on `q^n`: per-position symbol
/// frequencies pass a chi-square goodness-of-fit test at level 0.01.
#[test]
fn full_budget_coupling_pushes_p_onto_q() {
    let (k, n, trials) = (4usize, 50usize, 10_000u64);
    let p = Distribution::from_weights(&[4.0, 1.0, 1.0, 2.0]).unwrap();
    let q = Distribution::from_weights(&[1.0, 3.0, 2.0, 2.0]).unwrap();
    let plan = CouplingPlan::shared(build_maximal_coupling(&p, &q).unwrap(), n).unwrap();
    let budget = AttackBudget::new(1.0, n).unwrap();
    let mut by_position = vec![vec![0usize; k]; n];
    let mut changes = 0usize;
    for t in 0..trials {
        let s = Seed(2024).derive("trial", t);
        let y = sample(&p, n, s.derive("x", 0)).unwrap().values;
        let out = coupling_attack(&y, &plan, &budget, s.derive("attack", 0), BudgetPolicy::Strict).unwrap();
        assert!(!out.budget_exhausted);
        changes += out.changes(&y);
        for (i, &zi) in out.z.iter().enumerate() {
            by_position[i][zi] += 1;
        }
    }
    let pooled: Vec<usize> = (0..k).map(|x| by_position.iter().map(|c| c[x]).sum()).collect();
    assert!(chi_square_gof(&pooled, &q) > 0.01);
    for pos in [0, n / 2, n - 1] {
        assert!(chi_square_gof(&by_position[pos], &q) > 0.01 / 3.0, "position {pos}");
    }
    // mean changes per transcript: n tv(p, q), SE below 0.04 for these sizes
    let mean = changes as f64 / trials as f64;
    let want = n as f64 * tv_distance(&p, &q).unwrap();
    assert!((mean - want).abs() < 0.2, "{mean} vs {want}");
}

/// Strict policy never leaves a partially attacked transcript behind.
#[test]
fn strict_policy_is_all_or_nothing() {
    let n = 40;
    let p = Distribution::<f64>::point_mass(3, 0).unwrap();
    let q = Distribution::<f64>::uniform(3).unwrap();
    let plan = CouplingPlan::shared(build_maximal_coupling(&p, &q).unwrap(), n).unwrap();
    let y = vec![0usize; n];
    for t in 0..50 {
        let budget = AttackBudget::new(0.25, n).unwrap();
        let out = coupling_attack(&y, &plan, &budget, Seed(t), BudgetPolicy::Strict).unwrap();
        // about 27 intended changes against a budget of 10
        assert!(out.budget_exhausted);
        assert_eq!(out.z, y);
        let part = coupling_attack(&y, &plan, &budget, Seed(t), BudgetPolicy::Partial).unwrap();
        assert_eq!(part.changes(&y), budget.m());
    }
}

fn random_channel(k: usize, out: usize, seed: Seed) -> Channel<f64> {
    let mut rng = seed.rng();
    let mut m = Vec::with_capacity(k * out);
    for _ in 0..k {
        let row: Vec<f64> = (0..out).map(|_| rng.random::<f64>() + 1e-3).collect();
        let s: f64 = row.iter().sum();
        m.extend(row.into_iter().map(|v| v / s));
    }
    Channel::new(k, out, m, Constraint::Unconstrained).unwrap()
}

/// Averaging over every sign vector, `E_z chi2(W p_z, W u) = (4 alpha^2 / k)
/// tr H(W)`; the trace-norm form `8 alpha^2 / k ||H||_*` is an upper bound.
#[test]
fn mean_chi_square_is_the_information_trace() {
    for (t, &(k, out)) in [(2usize, 2usize), (4, 3), (6, 4), (8, 2), (8, 5)].iter().enumerate() {
        let w = random_channel(k, out, Seed(t as u64));
        let h = channel_info_matrix(&w).unwrap();
        let alpha = 0.2;
        let wu = output_distribution(&w, &Distribution::uniform(k).unwrap()).unwrap();
        let family = PaninskiIndex::enumerate(k, alpha).unwrap();
        let mean: f64 = family
            .iter()
            .map(|z| chi_square_divergence(&output_distribution(&w, &paninski_dist(z, k).unwrap()).unwrap(), &wu).unwrap())
            .sum::<f64>()
            / family.len() as f64;
        let trace = h.trace();
        assert!((mean - 4.0 * alpha * alpha / k as f64 * trace).abs() < 1e-12, "k={k}");
        assert!(mean <= 8.0 * alpha * alpha / k as f64 * h.trace_norm() + 1e-12);
    }
}

/// The server learns the pushed law, not the honest one, once every message
/// may be rewritten.
#[test]
fn learner_follows_the_coupled_law() {
    let n = 20_000;
    let p = Distribution::from_weights(&[5.0, 1.0, 1.0, 1.0, 2.0]).unwrap();
    let q = Distribution::<f64>::uniform(5).unwrap();
    let plan = CouplingPlan::shared(build_maximal_coupling(&p, &q).unwrap(), n).unwrap();
    let y = sample(&p, n, Seed(8)).unwrap().values;
    let z = coupling_attack(&y, &plan, &AttackBudget::new(1.0, n).unwrap(), Seed(9), BudgetPolicy::Partial).unwrap().z;
    let mut est = empirical_estimator::<f64>(&z, 5).unwrap();
    // sqrt(k / n) is about 0.016
    assert!(est.score(&q).unwrap() < 0.03);
    assert!(tv_distance(&est.projected, &p).unwrap() > 0.25);
}
