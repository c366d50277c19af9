//! Discrete distributions over `[k]` and the basic divergences between them.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::rng::Seed;
use crate::scalar::Real;

/// A probability vector over `0..k`.
///
/// Construction validates nonnegativity and that the entries sum to one within
/// [`Real::prob_tol`]. Nothing is renormalized silently.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution<T> {
    probs: Vec<T>,
}

impl<T: Real> Distribution<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty probability vector".into()));
        }
        let mut total = T::zero();
        for (index, &p) in probs.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if p < T::zero() {
                return Err(Error::InvalidDistribution(format!("entry {index} is negative ({p})")));
            }
            total += p;
        }
        if (total - T::one()).abs() > T::prob_tol() {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(param("alphabet size must be positive"));
        }
        Ok(Self { probs: vec![T::one() / T::from_count(k); k] })
    }

    pub fn point_mass(k: usize, symbol: usize) -> Result<Self> {
        if symbol >= k {
            return Err(Error::SymbolOutOfRange { symbol, size: k });
        }
        let mut probs = vec![T::zero(); k];
        probs[symbol] = T::one();
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights. Fails on an all-zero or invalid vector.
    pub fn from_weights(weights: &[T]) -> Result<Self> {
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) || !total.is_finite() {
            return Err(Error::InvalidDistribution("weights must have positive finite sum".into()));
        }
        Self::new(weights.iter().map(|&w| w / total).collect())
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn prob(&self, x: usize) -> T {
        self.probs[x]
    }

    pub fn into_vec(self) -> Vec<T> {
        self.probs
    }

    pub fn cast<U: Real>(&self) -> Result<Distribution<U>> {
        Distribution::new(self.probs.iter().map(|p| U::from_f64(p.to_f64().unwrap()).unwrap()).collect())
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for Distribution<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw<T> {
            probs: Vec<T>,
        }
        let raw = Raw::<T>::deserialize(d)?;
        Distribution::new(raw.probs).map_err(serde::de::Error::custom)
    }
}

fn same_k<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<()> {
    if p.k() != q.k() {
        return Err(Error::DimensionMismatch { left: p.k(), right: q.k() });
    }
    Ok(())
}

/// `(1/2) * sum_x |p(x) - q(x)|`.
pub fn tv_distance<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T> {
    same_k(p, q)?;
    Ok(half_l1(p.probs(), q.probs()))
}

/// Half the l1 distance of two equal-length vectors (signed entries allowed).
pub fn half_l1<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let s: T = a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum();
    s / T::lit(2.0)
}

/// `sum_x (p(x) - q(x))^2 / q(x)`. Mass of `p` outside the support of `q` is an
/// error rather than an infinite value.
pub fn chi_square_divergence<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T> {
    same_k(p, q)?;
    let mut acc = T::zero();
    for (index, (&a, &b)) in p.probs().iter().zip(q.probs()).enumerate() {
        if b == T::zero() {
            if a > T::zero() {
                return Err(Error::SupportViolation { index });
            }
            continue;
        }
        acc += (a - b) * (a - b) / b;
    }
    Ok(acc)
}

/// Index `(z, alpha)` of a member of the Paninski family over `[2 * z.len()]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaninskiIndex<T> {
    z: Vec<i8>,
    alpha: T,
}

impl<T: Real> PaninskiIndex<T> {
    pub fn new(z: Vec<i8>, alpha: T) -> Result<Self> {
        if z.is_empty() {
            return Err(param("Paninski sign vector must be nonempty"));
        }
        if let Some(bad) = z.iter().find(|s| **s != 1 && **s != -1) {
            return Err(param(format!("Paninski signs must be +1 or -1, got {bad}")));
        }
        if !(alpha >= T::zero()) || T::lit(2.0) * alpha > T::one() {
            return Err(param(format!("Paninski alpha must lie in [0, 1/2], got {alpha}")));
        }
        Ok(Self { z, alpha })
    }

    /// Uniformly random signs for alphabet size `k`.
    pub fn random(k: usize, alpha: T, seed: Seed) -> Result<Self> {
        if k % 2 == 1 {
            return Err(Error::OddAlphabet(k));
        }
        let mut rng = seed.rng();
        let z = (0..k / 2).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        Self::new(z, alpha)
    }

    pub fn signs(&self) -> &[i8] {
        &self.z
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// All `2^(k/2)` sign vectors for alphabet `k`. Only sensible for tiny `k`.
    pub fn enumerate(k: usize, alpha: T) -> Result<Vec<Self>> {
        if k % 2 == 1 {
            return Err(Error::OddAlphabet(k));
        }
        let half = k / 2;
        if half >= 24 {
            return Err(param("refusing to enumerate more than 2^23 sign vectors"));
        }
        (0..1usize << half)
            .map(|mask| {
                let z = (0..half).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
                Self::new(z, alpha)
            })
            .collect()
    }
}

/// The perturbed-uniform distribution `p_z(2i) = (1 + 2 alpha z_i)/k`,
/// `p_z(2i+1) = (1 - 2 alpha z_i)/k` (0-based pairs). Its TV distance to the
/// uniform distribution is exactly `alpha`.
pub fn paninski_dist<T: Real>(idx: &PaninskiIndex<T>, k: usize) -> Result<Distribution<T>> {
    if k % 2 == 1 {
        return Err(Error::OddAlphabet(k));
    }
    if idx.z.len() * 2 != k {
        return Err(Error::DimensionMismatch { left: idx.z.len() * 2, right: k });
    }
    let kf = T::from_count(k);
    let two_alpha = T::lit(2.0) * idx.alpha;
    let mut probs = Vec::with_capacity(k);
    for &s in &idx.z {
        let delta = if s > 0 { two_alpha } else { -two_alpha };
        probs.push((T::one() + delta) / kf);
        probs.push((T::one() - delta) / kf);
    }
    Distribution::new(probs)
}

/// `n` i.i.d. draws together with the seed that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleBlock {
    pub values: Vec<usize>,
    pub seed: Seed,
}

/// Inverse-CDF sampler; build once, draw many times.
#[derive(Debug, Clone)]
pub struct Sampler<T> {
    cdf: Vec<T>,
    last_positive: usize,
}

impl<T: Real> Sampler<T> {
    pub fn new(p: &Distribution<T>) -> Self {
        let mut acc = T::zero();
        let cdf = p
            .probs()
            .iter()
            .map(|&x| {
                acc += x;
                acc
            })
            .collect();
        let last_positive = p.probs().iter().rposition(|&x| x > T::zero()).unwrap_or(0);
        Self { cdf, last_positive }
    }

    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = T::lit(rng.random::<f64>());
        let i = self.cdf.partition_point(|&c| c <= u);
        i.min(self.last_positive)
    }
}

pub fn sample<T: Real>(p: &Distribution<T>, n: usize, seed: Seed) -> Result<SampleBlock> {
    if n == 0 {
        return Err(param("sample size must be at least 1"));
    }
    let sampler = Sampler::new(p);
    let mut rng = seed.rng();
    let values = (0..n).map(|_| sampler.draw(&mut rng)).collect();
    Ok(SampleBlock { values, seed })
}

/// Symbol counts `M_x` over `0..k`.
pub fn counts(samples: &[usize], k: usize) -> Result<Vec<usize>> {
    let mut c = vec![0usize; k];
    for &s in samples {
        if s >= k {
            return Err(Error::SymbolOutOfRange { symbol: s, size: k });
        }
        c[s] += 1;
    }
    Ok(c)
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
///
/// A vector that already is a distribution is returned unchanged. For every
/// distribution `p`, `||proj(v) - p||_1 <= 2 ||v - p||_1`, so projecting a
/// signed estimate at most doubles its TV error.
pub fn simplex_project<T: Real>(v: &[T]) -> Result<Distribution<T>> {
    if v.is_empty() {
        return Err(param("cannot project an empty vector"));
    }
    if let Some(index) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    if let Ok(d) = Distribution::new(v.to_vec()) {
        return Ok(d);
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = T::zero();
    let mut theta = T::zero();
    for (j, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - T::one()) / T::from_count(j + 1);
        if u - t > T::zero() {
            theta = t;
        }
    }
    let mut w: Vec<T> = v.iter().map(|&x| (x - theta).max(T::zero())).collect();
    // Remove the rounding residue so the result passes strict validation.
    let total: T = w.iter().copied().sum();
    if total > T::zero() {
        for x in &mut w {
            *x /= total;
        }
    }
    Distribution::new(w)
}
