//! Manipulation attacks: given the intended messages `y`, rewrite at most
//! `floor(gamma * n)` of them.
//!
//! Every attack returns an [`AttackOutcome`] whose constructor asserts the
//! structural contract: the corrupted set fits the budget and the output agrees
//! with `y` everywhere else.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::channels::HashFunction;
use crate::dist::{tv_distance, Distribution, Sampler};
use crate::error::{param, Error, Result};
use crate::rng::Seed;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackBudget {
    gamma: f64,
    n: usize,
    m: usize,
}

impl AttackBudget {
    pub fn new(gamma: f64, n: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(param(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        // absorb representation error such as 0.29 * 100 = 28.999999999999996
        let m = ((gamma * n as f64) + 1e-9).floor() as usize;
        Ok(Self { gamma, n, m: m.min(n) })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Maximum number of messages the adversary may change.
    pub fn m(&self) -> usize {
        self.m
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub z: Vec<usize>,
    /// Sorted, distinct indices of manipulated users.
    pub corrupted: Vec<usize>,
    /// Set when the attack wanted more changes than the budget allowed.
    pub budget_exhausted: bool,
}

impl AttackOutcome {
    /// Panics if the outcome violates the budget or touches messages outside
    /// the corrupted set.
    pub fn checked(y: &[usize], z: Vec<usize>, mut corrupted: Vec<usize>, budget: &AttackBudget, budget_exhausted: bool) -> Self {
        corrupted.sort_unstable();
        corrupted.dedup();
        assert_eq!(y.len(), z.len(), "attack changed the transcript length");
        assert!(
            corrupted.len() <= budget.m(),
            "attack corrupted {} users with budget {}",
            corrupted.len(),
            budget.m()
        );
        let mut c = corrupted.iter().peekable();
        for (i, (a, b)) in y.iter().zip(&z).enumerate() {
            if c.peek() == Some(&&i) {
                c.next();
            } else {
                assert_eq!(a, b, "message {i} changed outside the corrupted set");
            }
        }
        Self { z, corrupted, budget_exhausted }
    }

    pub fn changes(&self, y: &[usize]) -> usize {
        y.iter().zip(&self.z).filter(|(a, b)| a != b).count()
    }
}

fn check_len(y: &[usize], budget: &AttackBudget) -> Result<()> {
    if y.len() != budget.n() {
        return Err(Error::DimensionMismatch { left: y.len(), right: budget.n() });
    }
    Ok(())
}

fn check_symbols(y: &[usize], k: usize) -> Result<()> {
    match y.iter().find(|&&s| s >= k) {
        Some(&symbol) => Err(Error::SymbolOutOfRange { symbol, size: k }),
        None => Ok(()),
    }
}

pub fn null_attack(y: &[usize], budget: &AttackBudget) -> Result<AttackOutcome> {
    check_len(y, budget)?;
    Ok(AttackOutcome::checked(y, y.to_vec(), Vec::new(), budget, false))
}

/// Conditional law `K(y' | y)` of a maximal coupling of `(P, Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingKernel<T> {
    k: usize,
    rows: Vec<Distribution<T>>,
    tv: T,
}

impl<T: Real> CouplingKernel<T> {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, y: usize) -> &Distribution<T> {
        &self.rows[y]
    }

    /// `tv(P, Q)`: the probability that the kernel changes a `P`-distributed symbol.
    pub fn tv(&self) -> T {
        self.tv
    }

    /// Pushforward of `p` through the kernel.
    pub fn push(&self, p: &Distribution<T>) -> Result<Distribution<T>> {
        if p.k() != self.k {
            return Err(Error::DimensionMismatch { left: p.k(), right: self.k });
        }
        let mut out = vec![T::zero(); self.k];
        for (y, &py) in p.probs().iter().enumerate() {
            for (o, &kv) in out.iter_mut().zip(self.rows[y].probs()) {
                *o += py * kv;
            }
        }
        Distribution::new(out)
    }
}

/// Keeps `y` with probability `min(P, Q)(y) / P(y)` and sends the excess to
/// symbols where `Q > P`, proportionally to the deficit. Rows with `P(y) = 0`
/// are identity rows.
pub fn build_maximal_coupling<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<CouplingKernel<T>> {
    let tv = tv_distance(p, q)?;
    let k = p.k();
    let deficit: Vec<T> = p.probs().iter().zip(q.probs()).map(|(&a, &b)| (b - a).max(T::zero())).collect();
    let deficit_total: T = deficit.iter().copied().sum();
    let mut rows = Vec::with_capacity(k);
    for y in 0..k {
        let (py, qy) = (p.prob(y), q.prob(y));
        let mut row = vec![T::zero(); k];
        if py <= T::zero() || deficit_total <= T::zero() {
            row[y] = T::one();
        } else {
            let stay = py.min(qy) / py;
            row[y] = stay;
            let excess = T::one() - stay;
            if excess > T::zero() {
                for (r, &d) in row.iter_mut().zip(&deficit) {
                    *r += excess * d / deficit_total;
                }
            }
        }
        rows.push(Distribution::from_weights(&row)?);
    }
    Ok(CouplingKernel { k, rows, tv })
}

/// Per-user coupling kernels; users may share a kernel.
#[derive(Debug, Clone)]
pub struct CouplingPlan<T> {
    kernels: Vec<CouplingKernel<T>>,
    samplers: Vec<Vec<Sampler<T>>>,
    user_kernel: Vec<usize>,
}

impl<T: Real> CouplingPlan<T> {
    pub fn new(kernels: Vec<CouplingKernel<T>>, user_kernel: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = user_kernel.iter().find(|&&i| i >= kernels.len()) {
            return Err(param(format!("user refers to kernel {bad} of {}", kernels.len())));
        }
        let samplers = kernels.iter().map(|kern| kern.rows.iter().map(Sampler::new).collect()).collect();
        Ok(Self { kernels, samplers, user_kernel })
    }

    /// One kernel for all `n` users.
    pub fn shared(kernel: CouplingKernel<T>, n: usize) -> Result<Self> {
        Self::new(vec![kernel], vec![0; n])
    }

    /// Independent `(P_i, Q_i)` per user.
    pub fn per_user(pairs: &[(Distribution<T>, Distribution<T>)]) -> Result<Self> {
        let kernels = pairs.iter().map(|(p, q)| build_maximal_coupling(p, q)).collect::<Result<Vec<_>>>()?;
        let n = kernels.len();
        Self::new(kernels, (0..n).collect())
    }

    pub fn n(&self) -> usize {
        self.user_kernel.len()
    }

    pub fn kernel(&self, user: usize) -> &CouplingKernel<T> {
        &self.kernels[self.user_kernel[user]]
    }

    /// `sum_i tv(P_i, Q_i)`: the expected number of changes the plan requests.
    pub fn expected_changes(&self) -> T {
        self.user_kernel.iter().map(|&i| self.kernels[i].tv).sum()
    }
}

/// How the coupling attack handles more intended changes than the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BudgetPolicy {
    /// Apply intended changes in a random order until the budget runs out.
    #[default]
    Partial,
    /// All or nothing: if the coupled transcript is too far, send `y` unchanged.
    Strict,
}

/// Draws `y'_i ~ K_i(. | y_i)` for every user, then applies the changes in a
/// seed-derived uniformly random order subject to the budget.
///
/// With `m == n` the output has exactly the product law of the `Q_i` whenever
/// `y` has the product law of the `P_i`.
pub fn coupling_attack<T: Real>(
    y: &[usize],
    plan: &CouplingPlan<T>,
    budget: &AttackBudget,
    seed: Seed,
    policy: BudgetPolicy,
) -> Result<AttackOutcome> {
    check_len(y, budget)?;
    if plan.n() != y.len() {
        return Err(Error::DimensionMismatch { left: plan.n(), right: y.len() });
    }
    let mut rng = seed.derive("coupling-draws", 0).rng();
    let mut intended = Vec::new();
    for (i, &yi) in y.iter().enumerate() {
        let kern = plan.user_kernel[i];
        if yi >= plan.kernels[kern].k {
            return Err(Error::SymbolOutOfRange { symbol: yi, size: plan.kernels[kern].k });
        }
        let to = plan.samplers[kern][yi].draw(&mut rng);
        if to != yi {
            intended.push((i, to));
        }
    }
    let m = budget.m();
    let mut z = y.to_vec();
    if intended.len() <= m {
        let corrupted = intended.iter().map(|c| c.0).collect();
        for (i, to) in intended {
            z[i] = to;
        }
        return Ok(AttackOutcome::checked(y, z, corrupted, budget, false));
    }
    match policy {
        BudgetPolicy::Strict => Ok(AttackOutcome::checked(y, z, Vec::new(), budget, true)),
        BudgetPolicy::Partial => {
            intended.shuffle(&mut seed.derive("coupling-order", 0).rng());
            intended.truncate(m);
            let corrupted = intended.iter().map(|c| c.0).collect();
            for (i, to) in intended {
                z[i] = to;
            }
            Ok(AttackOutcome::checked(y, z, corrupted, budget, true))
        }
    }
}

/// Per-symbol stacks of untouched message indices, in ascending order.
fn index_pool(y: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut pool = vec![Vec::new(); k];
    for (i, &s) in y.iter().enumerate().rev() {
        pool[s].push(i);
    }
    pool
}

/// Greedily moves messages from over-represented to under-represented symbols,
/// each move chosen to shrink the empirical distance to uniform the most.
pub fn flatten_attack(y: &[usize], k: usize, budget: &AttackBudget) -> Result<AttackOutcome> {
    check_len(y, budget)?;
    check_symbols(y, k)?;
    let n = y.len() as i64;
    let kk = k as i64;
    let mut count = vec![0i64; k];
    for &s in y {
        count[s] += 1;
    }
    let mut pool = index_pool(y, k);
    let mut z = y.to_vec();
    let mut corrupted = Vec::new();
    // k * |c - n/k| in integers
    let dev = |c: i64| (kk * c - n).abs();
    while corrupted.len() < budget.m() {
        let from = (0..k).filter(|&s| !pool[s].is_empty()).max_by_key(|&s| (count[s], std::cmp::Reverse(s)));
        let to = (0..k).min_by_key(|&s| (count[s], s));
        let (Some(a), Some(b)) = (from, to) else { break };
        if a == b {
            break;
        }
        let gain = dev(count[a]) + dev(count[b]) - dev(count[a] - 1) - dev(count[b] + 1);
        if gain <= 0 {
            break;
        }
        let i = pool[a].pop().expect("nonempty pool");
        z[i] = b;
        count[a] -= 1;
        count[b] += 1;
        corrupted.push(i);
    }
    Ok(AttackOutcome::checked(y, z, corrupted, budget, false))
}

/// Rewrites up to `m` messages, taken from the currently most common
/// non-target symbols, to `target`.
pub fn spike_attack(y: &[usize], k: usize, target: usize, budget: &AttackBudget) -> Result<AttackOutcome> {
    check_len(y, budget)?;
    check_symbols(y, k)?;
    if target >= k {
        return Err(Error::SymbolOutOfRange { symbol: target, size: k });
    }
    let mut count = vec![0usize; k];
    for &s in y {
        count[s] += 1;
    }
    let mut pool = index_pool(y, k);
    let mut z = y.to_vec();
    let mut corrupted = Vec::new();
    while corrupted.len() < budget.m() {
        let from = (0..k)
            .filter(|&s| s != target && !pool[s].is_empty())
            .max_by_key(|&s| (count[s], std::cmp::Reverse(s)));
        let Some(a) = from else { break };
        let i = pool[a].pop().expect("nonempty pool");
        z[i] = target;
        count[a] -= 1;
        count[target] += 1;
        corrupted.push(i);
    }
    Ok(AttackOutcome::checked(y, z, corrupted, budget, false))
}

/// Against the hashing estimator: each corrupted user reports the bin whose
/// preimage covers the most target symbols and the fewest others. Corrupted
/// users are the first `m` of a seed-derived permutation.
pub fn hash_flood_attack(
    y: &[usize],
    hashes: &[HashFunction],
    target_set: &[usize],
    budget: &AttackBudget,
    seed: Seed,
) -> Result<AttackOutcome> {
    check_len(y, budget)?;
    if hashes.len() != y.len() {
        return Err(Error::DimensionMismatch { left: hashes.len(), right: y.len() });
    }
    let Some(h0) = hashes.first() else {
        return Ok(AttackOutcome::checked(y, Vec::new(), Vec::new(), budget, false));
    };
    let k = h0.k();
    let mut in_target = vec![false; k];
    for &t in target_set {
        if t >= k {
            return Err(Error::SymbolOutOfRange { symbol: t, size: k });
        }
        in_target[t] = true;
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.shuffle(&mut seed.derive("hash-flood-order", 0).rng());
    order.truncate(budget.m());
    let mut z = y.to_vec();
    let mut score = vec![0i64; h0.bins()];
    for &i in &order {
        let h = &hashes[i];
        score.iter_mut().for_each(|s| *s = 0);
        for (x, &t) in in_target.iter().enumerate() {
            score[h.apply(x)] += if t { 1 } else { -1 };
        }
        let best = (0..score.len()).max_by_key(|&b| (score[b], std::cmp::Reverse(b))).unwrap();
        z[i] = best;
    }
    Ok(AttackOutcome::checked(y, z, order, budget, false))
}
