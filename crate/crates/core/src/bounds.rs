//! Minimax rate formulas with every hidden constant set to 1, and the
//! lower-bound diagnostics built from channel information matrices and
//! earth-mover budgets.
//!
//! Rates are reference curves for shape comparison; they carry no constants
//! and are capped at 1.

use serde::{Deserialize, Serialize};

use crate::channels::{channel_info_matrix, Channel};
use crate::error::{param, Error, Result};
use crate::scalar::Real;

pub use crate::channels::Constraint as ConstraintSpec;

pub fn validate_constraint(c: &ConstraintSpec) -> Result<()> {
    match *c {
        ConstraintSpec::Unconstrained => Ok(()),
        ConstraintSpec::Bits { ell } if (1..63).contains(&ell) => Ok(()),
        ConstraintSpec::Bits { ell } => Err(param(format!("ell must be in 1..63, got {ell}"))),
        ConstraintSpec::Ldp { epsilon } if epsilon > 0.0 && epsilon.is_finite() => Ok(()),
        ConstraintSpec::Ldp { epsilon } => Err(param(format!("epsilon must be positive, got {epsilon}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "DL")]
    Learning,
    #[serde(rename = "IT")]
    IdentityTesting,
    #[serde(rename = "UT")]
    UniformityTesting,
}

impl Task {
    pub fn label(self) -> &'static str {
        match self {
            Task::Learning => "DL",
            Task::IdentityTesting => "IT",
            Task::UniformityTesting => "UT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    pub upper: f64,
    pub lower: f64,
}

fn capped(upper: f64, lower: f64) -> RateBounds {
    RateBounds { upper: upper.min(1.0), lower: lower.min(1.0) }
}

fn check_point(k: usize, n: usize, gamma: f64, constraint: &ConstraintSpec) -> Result<()> {
    if k < 2 || n == 0 {
        return Err(param(format!("rates need k >= 2 and n >= 1, got k={k}, n={n}")));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(param(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    validate_constraint(constraint)
}

/// `min(2^ell, k)`: more bits than `log k` carry no extra information.
fn effective_bins(k: f64, ell: u32) -> f64 {
    (2f64).powi(ell as i32).min(k)
}

pub fn rate_dl(k: usize, n: usize, constraint: &ConstraintSpec, gamma: f64) -> Result<RateBounds> {
    check_point(k, n, gamma, constraint)?;
    let (kf, nf) = (k as f64, n as f64);
    let v = match *constraint {
        ConstraintSpec::Unconstrained => (kf / nf).sqrt() + gamma,
        ConstraintSpec::Bits { ell } => {
            let b = effective_bins(kf, ell);
            (kf * kf / (nf * b)).sqrt() + gamma * (kf / b).sqrt()
        }
        ConstraintSpec::Ldp { epsilon } => (kf * kf / (epsilon * epsilon * nf)).sqrt() + gamma * kf.sqrt() / epsilon,
    };
    Ok(capped(v, v))
}

/// Identity testing; uniformity testing has the same rates.
pub fn rate_it(k: usize, n: usize, constraint: &ConstraintSpec, gamma: f64) -> Result<RateBounds> {
    check_point(k, n, gamma, constraint)?;
    let (kf, nf) = (k as f64, n as f64);
    Ok(match *constraint {
        ConstraintSpec::Unconstrained => {
            let v = kf.powf(0.25) / nf.sqrt() + gamma + (kf * gamma / nf).sqrt() + (kf * gamma * gamma / nf).powf(0.25);
            capped(v, v)
        }
        ConstraintSpec::Bits { ell } => {
            let b = effective_bins(kf, ell);
            let base = (kf / (b.sqrt() * nf)).sqrt();
            let scale = (kf / b).sqrt();
            let shared = gamma + (b * gamma / nf).sqrt();
            let quartic = (b * gamma * gamma / nf).powf(0.25);
            capped(base + scale * (shared + quartic), base + scale * shared)
        }
        ConstraintSpec::Ldp { epsilon } => {
            let v = (kf / (epsilon * epsilon * nf)).sqrt() + kf.sqrt() * gamma / epsilon;
            capped(v, v)
        }
    })
}

pub fn rate(task: Task, k: usize, n: usize, constraint: &ConstraintSpec, gamma: f64) -> Result<RateBounds> {
    match task {
        Task::Learning => rate_dl(k, n, constraint, gamma),
        Task::IdentityTesting | Task::UniformityTesting => rate_it(k, n, constraint, gamma),
    }
}

/// `gamma * sqrt(k / max ||H(W)||_*)`, capped at 1.
pub fn lower_bound_from_trace_norm(k: usize, gamma: f64, max_trace_norm: f64) -> Result<f64> {
    if !(max_trace_norm > 0.0) || !max_trace_norm.is_finite() {
        return Err(param(format!("trace norm must be positive, got {max_trace_norm}")));
    }
    Ok((gamma * (k as f64 / max_trace_norm).sqrt()).min(1.0))
}

/// Which term attains the minimum in [`emd_bound_paninski`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmdBranch {
    /// `n alpha^2 / k`
    Quadratic,
    /// `sqrt(n) alpha^2 / sqrt(k)`
    Collision,
    /// `alpha`
    Linear,
}

fn emd_branches(n: f64, k: f64, alpha: f64) -> [(EmdBranch, f64); 3] {
    [
        (EmdBranch::Quadratic, n * alpha * alpha / k),
        (EmdBranch::Collision, n.sqrt() * alpha * alpha / k.sqrt()),
        (EmdBranch::Linear, alpha),
    ]
}

/// `n * min(n alpha^2 / k, sqrt(n) alpha^2 / sqrt(k), alpha)`.
pub fn emd_bound_paninski(n: usize, k: usize, alpha: f64) -> f64 {
    emd_bound_paninski_branch(n, k, alpha).1
}

pub fn emd_bound_paninski_branch(n: usize, k: usize, alpha: f64) -> (EmdBranch, f64) {
    let (branch, v) = emd_branches(n as f64, k as f64, alpha)
        .into_iter()
        .fold((EmdBranch::Linear, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    (branch, n as f64 * v)
}

/// `2 n alpha sqrt(max_W ||H(W)||_* / k)` over the given channels.
pub fn emd_bound_channels<T: Real>(channels: &[Channel<T>], n: usize, k: usize, alpha: T) -> Result<T> {
    if k % 2 == 1 {
        return Err(Error::OddAlphabet(k));
    }
    let mut max_norm = T::zero();
    for w in channels {
        if w.k() != k {
            return Err(Error::DimensionMismatch { left: w.k(), right: k });
        }
        max_norm = max_norm.max(channel_info_matrix(w)?.trace_norm());
    }
    Ok(T::lit(2.0) * T::from_count(n) * alpha * (max_norm / T::from_count(k)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetAlpha {
    pub alpha: f64,
    pub branch: EmdBranch,
}

/// Smallest Paninski `alpha` whose earth-mover budget reaches `gamma n / 2`,
/// i.e. the root of `emd_bound_paninski(n, k, alpha) = gamma n / 2`, found by
/// bisection and clamped to `alpha <= 1/2`.
pub fn paninski_alpha_for_budget(n: usize, k: usize, gamma: f64) -> Result<BudgetAlpha> {
    if !(0.0..=1.0).contains(&gamma) || n == 0 || k == 0 {
        return Err(param("need gamma in [0, 1], n >= 1, k >= 1"));
    }
    if gamma == 0.0 {
        return Ok(BudgetAlpha { alpha: 0.0, branch: emd_bound_paninski_branch(n, k, 0.0).0 });
    }
    let target = gamma * n as f64 / 2.0;
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    if emd_bound_paninski(n, k, hi) <= target {
        lo = hi;
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if emd_bound_paninski(n, k, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        lo = hi;
    }
    let branch = emd_bound_paninski_branch(n, k, lo).0;
    Ok(BudgetAlpha { alpha: lo, branch })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub k: usize,
    pub n: usize,
    pub constraint: ConstraintSpec,
    pub gamma: f64,
}

/// A rate formula evaluated on a list of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub task: Task,
    pub bound: BoundKind,
    pub formula: String,
    pub points: Vec<(RatePoint, f64)>,
}

impl RateCurve {
    pub fn evaluate(task: Task, bound: BoundKind, points: &[RatePoint]) -> Result<Self> {
        let mut out = Vec::with_capacity(points.len());
        let mut formula = String::new();
        for p in points {
            let r = rate(task, p.k, p.n, &p.constraint, p.gamma)?;
            let id = formula_id(task, &p.constraint, bound);
            if formula.is_empty() {
                formula = id;
            } else if formula != id {
                formula = "mixed".into();
            }
            out.push((*p, if bound == BoundKind::Upper { r.upper } else { r.lower }));
        }
        Ok(Self { task, bound, formula, points: out })
    }
}

pub fn formula_id(task: Task, constraint: &ConstraintSpec, bound: BoundKind) -> String {
    let c = match constraint {
        ConstraintSpec::Unconstrained => "unconstrained",
        ConstraintSpec::Bits { .. } => "bits",
        ConstraintSpec::Ldp { .. } => "ldp",
    };
    let b = match bound {
        BoundKind::Upper => "upper",
        BoundKind::Lower => "lower",
    };
    format!("{}_{c}_{b}", task.label().to_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{identity_channel, krr_channel, output_distribution, random_hash_channel, trace_norm};
    use crate::dist::{paninski_dist, tv_distance, Distribution, PaninskiIndex};
    use crate::emd::{exact_emd_hamming, naive_coupling_emd_bound, FiniteJoint};
    use crate::rng::Seed;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const NONE: ConstraintSpec = ConstraintSpec::Unconstrained;

    #[test]
    fn dl_examples() {
        assert_abs_diff_eq!(rate_dl(100, 10_000, &NONE, 0.0).unwrap().upper, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(rate_dl(100, 10_000, &NONE, 0.05).unwrap().upper, 0.15, epsilon = 1e-15);
        let bits = rate_dl(64, 5000, &ConstraintSpec::Bits { ell: 6 }, 0.02).unwrap();
        let plain = rate_dl(64, 5000, &NONE, 0.02).unwrap();
        assert_abs_diff_eq!(bits.upper, plain.upper, epsilon = 1e-15);
        assert_eq!(rate_dl(4, 1, &NONE, 1.0).unwrap().upper, 1.0);
        let ldp = rate_dl(16, 1600, &ConstraintSpec::Ldp { epsilon: 2.0 }, 0.01).unwrap();
        assert_abs_diff_eq!(ldp.upper, (256.0f64 / (4.0 * 1600.0)).sqrt() + 0.01 * 4.0 / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn it_examples() {
        let r = rate_it(256, 10_000, &NONE, 0.0).unwrap();
        assert_abs_diff_eq!(r.upper, 4.0 / 100.0, epsilon = 1e-15);
        let r = rate_it(256, 10_000, &NONE, 0.01).unwrap();
        let hand = 0.04 + 0.01 + (2.56f64 / 10_000.0).sqrt() + (0.0256f64 / 10_000.0).powf(0.25);
        assert_abs_diff_eq!(r.upper, hand, epsilon = 1e-15);
        assert_eq!(r.upper, r.lower);
        let bits = rate_it(256, 10_000, &ConstraintSpec::Bits { ell: 8 }, 0.01).unwrap();
        assert_abs_diff_eq!(bits.upper, r.upper, epsilon = 1e-12);
        assert!(bits.lower < bits.upper);
    }

    #[test]
    fn bad_points_are_rejected() {
        assert!(rate_dl(1, 10, &NONE, 0.0).is_err());
        assert!(rate_dl(4, 0, &NONE, 0.0).is_err());
        assert!(rate_it(4, 10, &NONE, 1.5).is_err());
        assert!(rate_it(4, 10, &ConstraintSpec::Bits { ell: 0 }, 0.1).is_err());
        assert!(rate_it(4, 10, &ConstraintSpec::Ldp { epsilon: 0.0 }, 0.1).is_err());
    }

    #[test]
    fn trace_norm_lower_bound_examples() {
        let (k, gamma) = (64usize, 0.05);
        for ell in 1..=5u32 {
            let b = 2f64.powi(ell as i32);
            assert_abs_diff_eq!(
                lower_bound_from_trace_norm(k, gamma, b).unwrap(),
                gamma * (k as f64 / b).sqrt(),
                epsilon = 1e-12
            );
        }
        let eps = 0.5;
        assert_abs_diff_eq!(lower_bound_from_trace_norm(k, gamma, eps * eps).unwrap(), gamma * 8.0 / eps, epsilon = 1e-12);
        assert_eq!(lower_bound_from_trace_norm(k, 0.0, 3.0).unwrap(), 0.0);
        assert!(lower_bound_from_trace_norm(k, 0.1, 0.0).is_err());
    }

    /// Measured trace norms never exceed the class maximum `2^ell`, and the
    /// identity channel on `2^ell` symbols attains it, so the corollary with
    /// the measured class maximum reproduces the direct lower-bound term.
    #[test]
    fn trace_norm_path_matches_direct_term() {
        let gamma = 0.03;
        for ell in 1..=3u32 {
            let k = 1usize << ell;
            let mut max_norm = identity_channel::<f64>(k).and_then(|w| channel_info_matrix(&w)).unwrap().trace_norm();
            for s in 0..50 {
                let (w, _) = random_hash_channel::<f64>(k, ell, Seed(s)).unwrap();
                let t = trace_norm(&channel_info_matrix(&w).unwrap());
                if t <= 0.0 {
                    continue;
                }
                assert!(lower_bound_from_trace_norm(k, gamma, t).unwrap() >= gamma * (k as f64 / 2f64.powi(ell as i32)).sqrt() - 1e-9);
                max_norm = max_norm.max(t);
            }
            let direct = rate_dl(k, 1 << 30, &ConstraintSpec::Bits { ell }, gamma).unwrap().lower;
            let via = lower_bound_from_trace_norm(k, gamma, max_norm).unwrap() + (k as f64 * k as f64 / ((1u64 << 30) as f64 * k as f64)).sqrt();
            assert_abs_diff_eq!(via, direct, epsilon = 1e-9);
        }
    }

    #[test]
    fn emd_paninski_examples() {
        assert_eq!(emd_bound_paninski(10, 4, 0.0), 0.0);
        let (b, v) = emd_bound_paninski_branch(100, 10_000, 0.1);
        assert_eq!(b, EmdBranch::Quadratic);
        assert_abs_diff_eq!(v, 100.0 * 100.0 * 0.01 / 10_000.0, epsilon = 1e-12);
        let (b, _) = emd_bound_paninski_branch(10_000, 100, 0.05);
        assert_eq!(b, EmdBranch::Collision);
        let (b, v) = emd_bound_paninski_branch(10_000, 100, 0.5);
        assert_eq!(b, EmdBranch::Linear);
        assert_abs_diff_eq!(v, 5000.0, epsilon = 1e-9);
        // crossover of the quadratic and collision branches at n = k
        let [q, c, _] = emd_branches(50.0, 50.0, 0.1);
        assert_abs_diff_eq!(q.1, c.1, epsilon = 1e-15);
        // collision and linear cross at alpha = sqrt(k / n)
        let [_, c, l] = emd_branches(400.0, 4.0, 0.1);
        assert_abs_diff_eq!(c.1, l.1, epsilon = 1e-15);
    }

    #[test]
    fn emd_paninski_dominates_exact_small_instance() {
        let (k, n, alpha) = (2usize, 2usize, 0.1);
        let u = Distribution::<f64>::uniform(k).unwrap();
        let parts: Vec<(f64, FiniteJoint<f64>)> = PaninskiIndex::enumerate(k, alpha)
            .unwrap()
            .iter()
            .map(|idx| {
                let p = paninski_dist(idx, k).unwrap();
                (0.5, FiniteJoint::product(&vec![p; n]).unwrap())
            })
            .collect();
        let mix = FiniteJoint::mixture(&parts).unwrap();
        let exact = exact_emd_hamming(&mix, &FiniteJoint::product(&vec![u; n]).unwrap()).unwrap();
        let bound = emd_bound_paninski(n, k, alpha);
        assert_abs_diff_eq!(exact, 0.02, epsilon = 1e-12);
        assert!(bound / exact >= 1.0 - 1e-9, "ratio {}", bound / exact);
    }

    #[test]
    fn emd_channel_examples() {
        let id = identity_channel::<f64>(2).unwrap();
        assert_abs_diff_eq!(emd_bound_channels(&[id], 7, 2, 0.1).unwrap(), 2.0 * 7.0 * 0.1, epsilon = 1e-12);
        let constant = Channel::<f64>::new(4, 2, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0], NONE).unwrap();
        assert_eq!(emd_bound_channels(&[constant], 7, 4, 0.1).unwrap(), 0.0);
        assert!(emd_bound_channels::<f64>(&[], 3, 3, 0.1).is_err());
    }

    #[test]
    fn emd_channel_bound_dominates_naive_coupling() {
        for k in [2usize, 4] {
            let mut channels = vec![identity_channel::<f64>(k).unwrap(), krr_channel::<f64>(k, 1.0).unwrap()];
            channels.extend((0..4).map(|s| random_hash_channel::<f64>(k, 1, Seed(s)).unwrap().0));
            let u = Distribution::uniform(k).unwrap();
            for n in 1..=3 {
                for w in &channels {
                    for idx in PaninskiIndex::enumerate(k, 0.2).unwrap() {
                        let p = paninski_dist(&idx, k).unwrap();
                        let per_p = vec![output_distribution(w, &p).unwrap(); n];
                        let per_q = vec![output_distribution(w, &u).unwrap(); n];
                        let naive = naive_coupling_emd_bound(&per_p, &per_q).unwrap();
                        let bound = emd_bound_channels(std::slice::from_ref(w), n, k, 0.2).unwrap();
                        assert!(naive <= bound + 1e-12, "k={k} n={n}: {naive} > {bound}");
                        assert!(tv_distance(&per_p[0], &per_q[0]).unwrap() * n as f64 <= bound + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn budget_alpha_branches_follow_rate_terms() {
        // (n, k, gamma) far from every crossover, with the dominant gamma term of the testing rate
        let cases = [
            (10_000usize, 100usize, 0.4, EmdBranch::Linear),
            (1_000, 100_000, 0.001, EmdBranch::Quadratic),
            (10_000, 1_000, 0.0001, EmdBranch::Collision),
        ];
        for (n, k, gamma, want) in cases {
            let sol = paninski_alpha_for_budget(n, k, gamma).unwrap();
            assert_eq!(sol.branch, want, "n={n} k={k} gamma={gamma}");
            assert_abs_diff_eq!(emd_bound_paninski(n, k, sol.alpha), gamma * n as f64 / 2.0, epsilon = 1e-9 * n as f64);
            let (nf, kf) = (n as f64, k as f64);
            let terms = [(EmdBranch::Linear, gamma), (EmdBranch::Quadratic, (kf * gamma / nf).sqrt()), (EmdBranch::Collision, (kf * gamma * gamma / nf).powf(0.25))];
            let dominant = terms.iter().fold(terms[0], |a, &b| if b.1 > a.1 { b } else { a });
            assert_eq!(dominant.0, want);
            let closed = [gamma / 2.0, (kf * gamma / (2.0 * nf)).sqrt(), (kf * gamma * gamma / (4.0 * nf)).powf(0.25)];
            assert_abs_diff_eq!(sol.alpha, closed.iter().cloned().fold(0.0, f64::max), epsilon = 1e-12);
        }
        assert_eq!(paninski_alpha_for_budget(10, 10, 1.0).unwrap().alpha, 0.5);
        assert_eq!(paninski_alpha_for_budget(10, 10, 0.0).unwrap().alpha, 0.0);
    }

    #[test]
    fn rate_curve_labels() {
        let pts: Vec<RatePoint> = [0.0, 0.01, 0.1].iter().map(|&g| RatePoint { k: 64, n: 4096, constraint: ConstraintSpec::Bits { ell: 3 }, gamma: g }).collect();
        let c = RateCurve::evaluate(Task::IdentityTesting, BoundKind::Lower, &pts).unwrap();
        assert_eq!(c.formula, "it_bits_lower");
        assert_eq!(c.points.len(), 3);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RateCurve>(&json).unwrap(), c);
    }

    fn constraints() -> impl Strategy<Value = ConstraintSpec> {
        prop_oneof![
            Just(ConstraintSpec::Unconstrained),
            (1u32..12).prop_map(|ell| ConstraintSpec::Bits { ell }),
            (0.05f64..5.0).prop_map(|epsilon| ConstraintSpec::Ldp { epsilon }),
        ]
    }

    proptest! {
        #[test]
        fn rates_are_in_unit_interval_and_ordered(
            k in 2usize..5000,
            n in 1usize..1_000_000,
            gamma in 0.0f64..=1.0,
            c in constraints(),
        ) {
            for task in [Task::Learning, Task::IdentityTesting, Task::UniformityTesting] {
                let r = rate(task, k, n, &c, gamma).unwrap();
                prop_assert!(r.lower > 0.0 && r.lower <= 1.0);
                prop_assert!(r.upper > 0.0 && r.upper <= 1.0);
                prop_assert!(r.upper >= r.lower);
            }
        }

        #[test]
        fn rates_are_monotone(k in 2usize..2000, n in 1usize..100_000, gamma in 0.0f64..0.5, c in constraints()) {
            let base = rate(Task::IdentityTesting, k, n, &c, gamma).unwrap();
            let more_n = rate(Task::IdentityTesting, k, n * 2, &c, gamma).unwrap();
            let more_gamma = rate(Task::IdentityTesting, k, n, &c, gamma * 2.0).unwrap();
            prop_assert!(more_n.upper <= base.upper + 1e-15);
            prop_assert!(more_gamma.upper >= base.upper - 1e-15);
        }
    }
}
