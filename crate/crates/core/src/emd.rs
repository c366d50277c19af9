//! Laws over short message sequences and their exact earth-mover distance
//! under the Hamming metric.
//!
//! Only desk-scale instances are supported: the support of a [`FiniteJoint`]
//! is materialized atom by atom, and the transport problem is solved exactly
//! as a min-cost flow on the bipartite atom graph.

use crate::dist::{tv_distance, Distribution};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_ATOM_CAP: usize = 1_000_000;

/// A probability law on `[d_0] x [d_1] x ... x [d_{n-1}]`.
///
/// Atoms are stored in mixed-radix order with coordinate 0 most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteJoint<T> {
    dims: Vec<usize>,
    mass: Vec<T>,
}

fn atom_count(dims: &[usize], cap: usize) -> Result<usize> {
    let mut atoms: usize = 1;
    for &d in dims {
        if d == 0 {
            return Err(crate::error::param("coordinate alphabets must be nonempty"));
        }
        atoms = atoms.checked_mul(d).filter(|a| *a <= cap).ok_or(Error::SupportCapExceeded {
            atoms: dims.iter().fold(1usize, |a, d| a.saturating_mul(*d)),
            cap,
        })?;
    }
    Ok(atoms)
}

impl<T: Real> FiniteJoint<T> {
    pub fn new(dims: Vec<usize>, mass: Vec<T>) -> Result<Self> {
        Self::with_cap(dims, mass, DEFAULT_ATOM_CAP)
    }

    pub fn with_cap(dims: Vec<usize>, mass: Vec<T>, cap: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(crate::error::param("a joint law needs at least one coordinate"));
        }
        let atoms = atom_count(&dims, cap)?;
        if mass.len() != atoms {
            return Err(Error::DimensionMismatch { left: mass.len(), right: atoms });
        }
        // reuse the simplex validation of Distribution
        let mass = Distribution::new(mass)?.into_vec();
        Ok(Self { dims, mass })
    }

    /// Product law of independent coordinates.
    pub fn product(coords: &[Distribution<T>]) -> Result<Self> {
        Self::product_with_cap(coords, DEFAULT_ATOM_CAP)
    }

    pub fn product_with_cap(coords: &[Distribution<T>], cap: usize) -> Result<Self> {
        let dims: Vec<usize> = coords.iter().map(Distribution::k).collect();
        if dims.is_empty() {
            return Err(crate::error::param("a joint law needs at least one coordinate"));
        }
        atom_count(&dims, cap)?;
        let mut mass = vec![T::one()];
        for c in coords {
            let mut next = Vec::with_capacity(mass.len() * c.k());
            for &m in &mass {
                next.extend(c.probs().iter().map(|&p| m * p));
            }
            mass = next;
        }
        Self::with_cap(dims, mass, cap)
    }

    /// Convex combination of laws on the same support.
    pub fn mixture(parts: &[(T, FiniteJoint<T>)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| crate::error::param("empty mixture"))?;
        let dims = first.1.dims.clone();
        let mut mass = vec![T::zero(); first.1.mass.len()];
        for (w, j) in parts {
            if j.dims != dims {
                return Err(Error::DimensionMismatch { left: j.mass.len(), right: mass.len() });
            }
            for (acc, &m) in mass.iter_mut().zip(&j.mass) {
                *acc += *w * m;
            }
        }
        Self::new(dims, mass)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    pub fn atoms(&self) -> usize {
        self.mass.len()
    }

    /// Coordinates of atom `index`.
    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    /// Marginal law of coordinate `i`.
    pub fn marginal(&self, i: usize) -> Result<Distribution<T>> {
        let mut m = vec![T::zero(); self.dims[i]];
        for (a, &w) in self.mass.iter().enumerate() {
            m[self.decode(a)[i]] += w;
        }
        Distribution::new(m)
    }
}

/// Minimum over couplings of the expected Hamming distance between the two
/// sequences.
pub fn exact_emd_hamming<T: Real>(q1: &FiniteJoint<T>, q2: &FiniteJoint<T>) -> Result<T> {
    if q1.dims != q2.dims {
        return Err(Error::DimensionMismatch { left: q1.atoms(), right: q2.atoms() });
    }
    let words: Vec<Vec<usize>> = (0..q1.atoms()).map(|a| q1.decode(a)).collect();
    let hamming = |a: usize, b: usize| words[a].iter().zip(&words[b]).filter(|(x, y)| x != y).count() as i64;

    // Under a metric cost the shared mass min(q1, q2) can stay in place, so
    // only the excesses have to be transported.
    let mut supply = Vec::new();
    let mut demand = Vec::new();
    for (a, (&x, &y)) in q1.mass.iter().zip(&q2.mass).enumerate() {
        if x > y {
            supply.push((a, x - y));
        } else if y > x {
            demand.push((a, y - x));
        }
    }
    if supply.is_empty() || demand.is_empty() {
        return Ok(T::zero());
    }
    let cost: Vec<Vec<i64>> = supply
        .iter()
        .map(|&(a, _)| demand.iter().map(|&(b, _)| hamming(a, b)).collect())
        .collect();
    let s: Vec<T> = supply.iter().map(|x| x.1).collect();
    let d: Vec<T> = demand.iter().map(|x| x.1).collect();
    Ok(transport(&s, &d, &cost))
}

/// Exact balanced transportation by successive shortest paths.
///
/// Costs are small nonnegative integers, so Dijkstra with integer potentials is
/// exact; flows are in `T`. Every augmentation exhausts a supply, a demand or a
/// reverse arc, so the loop terminates.
fn transport<T: Real>(supply: &[T], demand: &[T], cost: &[Vec<i64>]) -> T {
    let a = supply.len();
    let b = demand.len();
    let total: T = supply.iter().copied().sum();
    let tol = T::epsilon() * T::lit(64.0) * total.max(T::one());
    let mut rem_s = supply.to_vec();
    let mut rem_d = demand.to_vec();
    let mut flow = vec![vec![T::zero(); b]; a];
    // Potentials for supply nodes (0..a) and demand nodes (a..a+b) are the
    // true shortest distances from a virtual source with zero-cost arcs to
    // every supply node; the virtual source keeps potential 0.
    let mut pot = vec![0i64; a + b];
    const INF: i64 = i64::MAX / 4;

    loop {
        let mut dist = vec![INF; a + b];
        let mut prev = vec![usize::MAX; a + b];
        let mut done = vec![false; a + b];
        let mut any = false;
        for i in 0..a {
            if rem_s[i] > tol {
                // reduced cost of the virtual arc source -> i
                dist[i] = -pot[i];
                any = true;
            }
        }
        if !any {
            break;
        }
        loop {
            let mut u = usize::MAX;
            let mut best = INF;
            for v in 0..a + b {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < a {
                for j in 0..b {
                    let v = a + j;
                    let nd = dist[u] + cost[u][j] + pot[u] - pot[v];
                    if nd < dist[v] {
                        dist[v] = nd;
                        prev[v] = u;
                    }
                }
            } else {
                let j = u - a;
                for i in 0..a {
                    if flow[i][j] > tol {
                        let nd = dist[u] - cost[i][j] + pot[u] - pot[i];
                        if nd < dist[i] {
                            dist[i] = nd;
                            prev[i] = u;
                        }
                    }
                }
            }
        }
        // nearest demand node that still needs mass
        let target = (0..b)
            .filter(|&j| rem_d[j] > tol && dist[a + j] < INF)
            .min_by_key(|&j| dist[a + j] + pot[a + j]);
        let Some(tj) = target else { break };
        for v in 0..a + b {
            if dist[v] < INF {
                pot[v] += dist[v];
            }
        }
        // walk back to the source supply node, tracking the bottleneck
        let mut bottleneck = rem_d[tj];
        let mut v = a + tj;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= a {
                bottleneck = bottleneck.min(flow[v][u - a]);
            }
            v = u;
        }
        bottleneck = bottleneck.min(rem_s[v]);
        rem_s[v] -= bottleneck;
        rem_d[tj] -= bottleneck;
        let mut v = a + tj;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < a {
                flow[u][v - a] += bottleneck;
            } else {
                flow[v][u - a] -= bottleneck;
            }
            v = u;
        }
    }

    let mut out = T::zero();
    for i in 0..a {
        for j in 0..b {
            out += flow[i][j] * T::from_i64(cost[i][j]).unwrap();
        }
    }
    out
}

/// Sum of per-coordinate TV distances: the cost of coupling each coordinate
/// independently and maximally. Upper-bounds the EMD between the products.
pub fn naive_coupling_emd_bound<T: Real>(per_p: &[Distribution<T>], per_q: &[Distribution<T>]) -> Result<T> {
    if per_p.len() != per_q.len() {
        return Err(Error::DimensionMismatch { left: per_p.len(), right: per_q.len() });
    }
    per_p.iter().zip(per_q).map(|(p, q)| tv_distance(p, q)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn d(v: &[f64]) -> Distribution<f64> {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn single_coordinate_equals_tv() {
        let p = d(&[0.1, 0.6, 0.3]);
        let q = d(&[0.5, 0.2, 0.3]);
        let e = exact_emd_hamming(&FiniteJoint::product(std::slice::from_ref(&p)).unwrap(), &FiniteJoint::product(std::slice::from_ref(&q)).unwrap()).unwrap();
        assert_abs_diff_eq!(e, tv_distance(&p, &q).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn identical_laws_have_zero_distance() {
        let q = FiniteJoint::product(&[d(&[0.2, 0.8]), d(&[0.5, 0.5])]).unwrap();
        assert_eq!(exact_emd_hamming(&q, &q).unwrap(), 0.0);
    }

    #[test]
    fn point_masses_differ_in_every_coordinate() {
        let ones = FiniteJoint::product(&[d(&[0.0, 1.0]), d(&[0.0, 1.0])]).unwrap();
        let zeros = FiniteJoint::product(&[d(&[1.0, 0.0]), d(&[1.0, 0.0])]).unwrap();
        assert_abs_diff_eq!(exact_emd_hamming(&ones, &zeros).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn optimal_plan_beats_naive_routing() {
        // mass on 00 -> 11 vs mass split 01/10: naive matching of (00->01, 11->10) costs 1
        let q1 = FiniteJoint::new(vec![2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let q2 = FiniteJoint::new(vec![2, 2], vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        assert_abs_diff_eq!(exact_emd_hamming(&q1, &q2).unwrap(), 1.0, epsilon = 1e-12);
        // a plan that needs a reverse arc to reach optimum
        let q1 = FiniteJoint::new(vec![3], vec![0.5, 0.5, 0.0]).unwrap();
        let q2 = FiniteJoint::new(vec![3], vec![0.0, 0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(exact_emd_hamming(&q1, &q2).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn cap_and_shape_errors() {
        assert!(matches!(
            FiniteJoint::<f64>::with_cap(vec![10, 10], vec![0.01; 100], 50),
            Err(Error::SupportCapExceeded { atoms: 100, cap: 50 })
        ));
        let a = FiniteJoint::product(&[d(&[0.5, 0.5])]).unwrap();
        let b = FiniteJoint::product(&[d(&[0.5, 0.5]), d(&[0.5, 0.5])]).unwrap();
        assert!(exact_emd_hamming(&a, &b).is_err());
        assert!(FiniteJoint::new(vec![2, 2], vec![0.25; 3]).is_err());
    }

    #[test]
    fn naive_bound_examples() {
        let p = vec![d(&[0.5, 0.5]), d(&[0.1, 0.9])];
        assert_eq!(naive_coupling_emd_bound(&p, &p).unwrap(), 0.0);
        let q = vec![d(&[0.7, 0.3]), d(&[0.4, 0.6])];
        assert_abs_diff_eq!(naive_coupling_emd_bound(&p, &q).unwrap(), 0.5, epsilon = 1e-12);
        assert!(naive_coupling_emd_bound(&p, &q[..1]).is_err());
    }

    #[test]
    fn marginals_and_decoding() {
        let j = FiniteJoint::product(&[d(&[0.25, 0.75]), d(&[0.1, 0.2, 0.7])]).unwrap();
        assert_eq!(j.decode(4), vec![1, 1]);
        assert_abs_diff_eq!(j.marginal(1).unwrap().prob(2), 0.7, epsilon = 1e-12);
    }

    /// Exhaustive oracle for 2-atom-per-side transport: the plan has one free
    /// parameter; scan it finely.
    fn scan_oracle(s: [f64; 2], t: [f64; 2], c: [[f64; 2]; 2]) -> f64 {
        let lo = (s[0] - t[1]).max(0.0);
        let hi = s[0].min(t[0]);
        let mut best = f64::INFINITY;
        for step in 0..=10_000 {
            let f00 = lo + (hi - lo) * step as f64 / 10_000.0;
            let f01 = s[0] - f00;
            let f10 = t[0] - f00;
            let f11 = s[1] - f10;
            best = best.min(f00 * c[0][0] + f01 * c[0][1] + f10 * c[1][0] + f11 * c[1][1]);
        }
        best
    }

    fn dist_strategy(k: usize) -> impl Strategy<Value = Distribution<f64>> {
        prop::collection::vec(0.0f64..1.0, k).prop_filter_map("mass", |w| Distribution::from_weights(&w).ok())
    }

    proptest! {
        #[test]
        fn transport_matches_scan_oracle(s0 in 0.0f64..1.0, t0 in 0.0f64..1.0, c in prop::array::uniform4(0i64..4)) {
            let cost = vec![vec![c[0], c[1]], vec![c[2], c[3]]];
            let got = transport(&[s0, 1.0 - s0], &[t0, 1.0 - t0], &cost);
            let want = scan_oracle([s0, 1.0 - s0], [t0, 1.0 - t0], [[c[0] as f64, c[1] as f64], [c[2] as f64, c[3] as f64]]);
            // the scan grid resolution bounds the oracle error
            prop_assert!(got <= want + 1e-9);
            prop_assert!(got >= want - 4.0 * 1e-4);
        }

        #[test]
        fn emd_is_bounded_by_naive_coupling(
            (ps, qs) in (1usize..=3, 2usize..=4).prop_flat_map(|(n, k)| (
                prop::collection::vec(dist_strategy(k), n),
                prop::collection::vec(dist_strategy(k), n),
            ))
        ) {
            let j1 = FiniteJoint::product(&ps).unwrap();
            let j2 = FiniteJoint::product(&qs).unwrap();
            let exact = exact_emd_hamming(&j1, &j2).unwrap();
            let naive = naive_coupling_emd_bound(&ps, &qs).unwrap();
            prop_assert!(exact <= naive + 1e-9);
            // EMD dominates the largest single-coordinate TV
            for (p, q) in ps.iter().zip(&qs) {
                prop_assert!(exact + 1e-9 >= tv_distance(p, q).unwrap());
            }
            prop_assert!((exact - exact_emd_hamming(&j2, &j1).unwrap()).abs() < 1e-9);
        }
    }
}
