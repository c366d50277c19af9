//! Distribution learners run by the server on the (possibly manipulated)
//! messages.

use serde::{Deserialize, Serialize};

use crate::channels::HashFunction;
use crate::dist::{counts, simplex_project, tv_distance, Distribution};
use crate::error::{param, Error, Result};
use crate::scalar::{Field, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct EstimateReport<T> {
    /// Signed estimate; may leave the simplex.
    pub raw: Vec<T>,
    /// Nearest distribution to `raw` in the projection of [`simplex_project`].
    pub projected: Distribution<T>,
    pub tv_to_truth: Option<T>,
}

impl<T: Real> EstimateReport<T> {
    fn from_raw(raw: Vec<T>) -> Result<Self> {
        if let Some(index) = raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let projected = simplex_project(&raw)?;
        Ok(Self { raw, projected, tv_to_truth: None })
    }

    /// Records and returns `tv(projected, truth)`.
    pub fn score(&mut self, truth: &Distribution<T>) -> Result<T> {
        let tv = tv_distance(&self.projected, truth)?;
        self.tv_to_truth = Some(tv);
        Ok(tv)
    }
}

/// `raw(x) = M_x / n`.
pub fn empirical_estimator<T: Real>(z: &[usize], k: usize) -> Result<EstimateReport<T>> {
    if z.is_empty() {
        return Err(param("empirical estimator needs at least one sample"));
    }
    let n = T::from_count(z.len());
    let raw = counts(z, k)?.into_iter().map(|c| T::from_count(c) / n).collect();
    EstimateReport::from_raw(raw)
}

/// Inverts `E[count_x / n] = p(x) + (1 - p(x)) / 2^ell`:
/// `raw(x) = (2^ell count_x - n) / (n (2^ell - 1))`.
///
/// `hit_counts[x]` is the number of users with `h_i(x) = z_i`. Generic over
/// any field so the formula can be evaluated exactly.
pub fn hashing_raw<F: Field>(hit_counts: &[usize], n: usize, ell: u32) -> Result<Vec<F>> {
    if ell == 0 {
        return Err(param("hashing estimator needs ell >= 1"));
    }
    if n == 0 {
        return Err(param("hashing estimator needs at least one message"));
    }
    let lift = |v: usize| F::from_usize(v).ok_or_else(|| param("count not representable in the field"));
    let bins = lift(1usize << ell)?;
    let nf = lift(n)?;
    let denom = nf.clone() * (bins.clone() - F::one());
    hit_counts
        .iter()
        .map(|&c| Ok((bins.clone() * lift(c)? - nf.clone()) / denom.clone()))
        .collect()
}

/// `hit_counts[x] = #{i : h_i(x) = z_i}`; exact integers so the sum is
/// order-independent.
pub fn hash_hit_counts(z: &[usize], hashes: &[HashFunction], ell: u32, k: usize) -> Result<Vec<usize>> {
    if hashes.len() != z.len() {
        return Err(Error::DimensionMismatch { left: hashes.len(), right: z.len() });
    }
    let bins = 1usize << ell;
    let mut hits = vec![0usize; k];
    for (&zi, h) in z.iter().zip(hashes) {
        if h.k() != k || h.ell() != ell {
            return Err(param(format!("hash over [{}] -> 2^{} does not match k={k}, ell={ell}", h.k(), h.ell())));
        }
        if zi >= bins {
            return Err(Error::SymbolOutOfRange { symbol: zi, size: bins });
        }
        for (x, hit) in hits.iter_mut().enumerate() {
            *hit += usize::from(h.indicator(x, zi));
        }
    }
    Ok(hits)
}

pub fn hashing_estimator<T: Real>(z: &[usize], hashes: &[HashFunction], ell: u32, k: usize) -> Result<EstimateReport<T>> {
    if ell == 0 {
        return Err(param("hashing estimator needs ell >= 1"));
    }
    let hits = hash_hit_counts(z, hashes, ell, k)?;
    EstimateReport::from_raw(hashing_raw(&hits, z.len(), ell)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::sample;
    use crate::rng::Seed;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    #[test]
    fn empirical_examples() {
        let r = empirical_estimator::<f64>(&[0, 0, 1, 2], 4).unwrap();
        assert_eq!(r.raw, vec![0.5, 0.25, 0.25, 0.0]);
        assert_eq!(r.projected.probs(), r.raw.as_slice());
        let r = empirical_estimator::<f64>(&[2], 3).unwrap();
        assert_eq!(r.projected.probs(), &[0.0, 0.0, 1.0]);
        assert!(empirical_estimator::<f64>(&[], 3).is_err());
        assert!(empirical_estimator::<f64>(&[3], 3).is_err());
    }

    #[test]
    fn empirical_error_shrinks_with_n() {
        let p = Distribution::<f64>::from_weights(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let mean_err = |n: usize| {
            (0..200)
                .map(|t| {
                    let z = sample(&p, n, Seed(t).derive("n", n as u64)).unwrap().values;
                    empirical_estimator(&z, 5).unwrap().score(&p).unwrap()
                })
                .sum::<f64>()
                / 200.0
        };
        let (small, large) = (mean_err(400), mean_err(6400));
        // 16x the samples: error ratio near 4 for a sqrt(k/n) rate
        assert!((small / large - 4.0).abs() < 1.0, "ratio {}", small / large);
    }

    #[test]
    fn hashing_single_user_example() {
        // first seed whose table is the identity on {0, 1}
        let h = (0..)
            .map(|s| HashFunction::random(2, 1, Seed(s)).unwrap())
            .find(|h| h.apply(0) == 0 && h.apply(1) == 1)
            .unwrap();
        let r = hashing_estimator::<f64>(&[0], &[h], 1, 2).unwrap();
        assert_eq!(r.raw, vec![1.0, -1.0]);
        assert_eq!(r.projected.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn hashing_centered_counts_give_uniform() {
        let raw: Vec<f64> = hashing_raw(&[2, 2, 2], 8, 2).unwrap();
        assert_eq!(raw, vec![0.0; 3]);
        assert_eq!(simplex_project(&raw).unwrap().probs(), &[1.0 / 3.0; 3]);
    }

    #[test]
    fn hashing_rejects_bad_inputs() {
        let h = HashFunction::random(4, 2, Seed(1)).unwrap();
        assert!(hashing_raw::<f64>(&[1], 1, 0).is_err());
        assert!(hashing_estimator::<f64>(&[0, 1], std::slice::from_ref(&h), 2, 4).is_err());
        assert!(hashing_estimator::<f64>(&[4], std::slice::from_ref(&h), 2, 4).is_err());
        assert!(hashing_estimator::<f64>(&[0], &[h], 1, 4).is_err());
    }

    /// Exhausts every hash table `[k] -> [2^ell]` and every input symbol and
    /// evaluates both sides in exact rational arithmetic.
    #[test]
    fn hashing_single_sample_identity_is_exact() {
        for &(k, ell) in &[(2usize, 1u32), (3, 1), (4, 2), (5, 1), (6, 2), (8, 1), (8, 2)] {
            let bins = 1usize << ell;
            let weights: Vec<i64> = (0..k as i64).map(|x| 1 + (x * 5) % 7).collect();
            let total: i64 = weights.iter().sum();
            let p: Vec<Q> = weights.iter().map(|&w| Q::new(w, total)).collect();
            let tables = bins.pow(k as u32);
            let mut hit_mass = vec![Q::from_integer(0); k];
            let mut raw_mass = vec![Q::from_integer(0); k];
            let mut table = vec![0usize; k];
            for code in 0..tables {
                let mut c = code;
                for t in table.iter_mut() {
                    *t = c % bins;
                    c /= bins;
                }
                for (xs, &px) in p.iter().enumerate() {
                    let hits: Vec<usize> = (0..k).map(|x| usize::from(table[x] == table[xs])).collect();
                    let raw: Vec<Q> = hashing_raw(&hits, 1, ell).unwrap();
                    for x in 0..k {
                        hit_mass[x] += px * Q::from_integer(hits[x] as i64);
                        raw_mass[x] += px * raw[x];
                    }
                }
            }
            let norm = Q::from_integer(tables as i64);
            let b = Q::from_integer(bins as i64);
            for x in 0..k {
                let one = Q::from_integer(1);
                assert_eq!(hit_mass[x] / norm, p[x] + (one - p[x]) / b, "k={k} ell={ell} x={x}");
                assert_eq!(raw_mass[x] / norm, p[x], "k={k} ell={ell} x={x}");
            }
        }
    }

    #[test]
    fn hashing_raw_is_unbiased_monte_carlo() {
        let (k, ell, n, reps) = (100usize, 4u32, 20_000usize, 200u64);
        let w: Vec<f64> = (0..k).map(|x| 1.0 + (x % 10) as f64).collect();
        let p = Distribution::from_weights(&w).unwrap();
        let mut sum = vec![0.0; k];
        let mut sum_sq = vec![0.0; k];
        for r in 0..reps {
            let seed = Seed(99).derive("rep", r);
            let xs = sample(&p, n, seed.derive("x", 0)).unwrap().values;
            let hashes: Vec<HashFunction> =
                (0..n).map(|i| HashFunction::random(k, ell, seed.derive("hash", i as u64)).unwrap()).collect();
            let z: Vec<usize> = xs.iter().zip(&hashes).map(|(&x, h)| h.apply(x)).collect();
            let raw = hashing_estimator::<f64>(&z, &hashes, ell, k).unwrap().raw;
            for x in 0..k {
                sum[x] += raw[x];
                sum_sq[x] += raw[x] * raw[x];
            }
        }
        let m = reps as f64;
        for x in 0..k {
            let mean = sum[x] / m;
            let var = (sum_sq[x] / m - mean * mean) * m / (m - 1.0);
            let se = (var / m).sqrt();
            assert!((mean - p.prob(x)).abs() <= 4.0 * se, "x={x}: {mean} vs {} (se {se})", p.prob(x));
        }
    }

    #[test]
    fn hashing_is_deterministic() {
        let hashes: Vec<HashFunction> = (0..50).map(|i| HashFunction::random(10, 2, Seed(i)).unwrap()).collect();
        let z: Vec<usize> = (0..50).map(|i| i % 4).collect();
        let a = hashing_estimator::<f64>(&z, &hashes, 2, 10).unwrap();
        let b = hashing_estimator::<f64>(&z, &hashes, 2, 10).unwrap();
        assert_eq!(a, b);
    }
}
