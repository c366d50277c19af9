//! Message channels `W(y | x)` from `[k]` to a finite message alphabet.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::{param, Error, Result};
use crate::rng::Seed;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Identity,
    Hash,
    Compression,
    Krr,
    Custom,
}

/// The information constraint a channel is certified to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    Unconstrained,
    Bits { ell: u32 },
    Ldp { epsilon: f64 },
}

/// A dense row-stochastic `k x y_size` matrix plus its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel<T> {
    k: usize,
    y_size: usize,
    matrix: Vec<T>,
    kind: ChannelKind,
    constraint: Constraint,
    /// For deterministic channels, the image of each input.
    map: Option<Vec<usize>>,
}

fn pow2(ell: u32) -> Result<usize> {
    if ell == 0 || ell >= usize::BITS - 1 {
        return Err(param(format!("message length ell must be in 1..{}, got {ell}", usize::BITS - 1)));
    }
    Ok(1usize << ell)
}

impl<T: Real> Channel<T> {
    /// Validates row-stochasticity and the declared constraint.
    pub fn new(k: usize, y_size: usize, matrix: Vec<T>, constraint: Constraint) -> Result<Self> {
        Self::build(k, y_size, matrix, ChannelKind::Custom, constraint)
    }

    fn build(k: usize, y_size: usize, matrix: Vec<T>, kind: ChannelKind, constraint: Constraint) -> Result<Self> {
        if k == 0 || y_size == 0 {
            return Err(param("channel alphabets must be nonempty"));
        }
        if matrix.len() != k * y_size {
            return Err(Error::DimensionMismatch { left: matrix.len(), right: k * y_size });
        }
        for (x, row) in matrix.chunks(y_size).enumerate() {
            if let Err(e) = Distribution::new(row.to_vec()) {
                return Err(param(format!("row {x} is not a distribution: {e}")));
            }
        }
        match constraint {
            Constraint::Unconstrained => {}
            Constraint::Bits { ell } => {
                if y_size != pow2(ell)? {
                    return Err(param(format!("an {ell}-bit channel needs {} outputs, got {y_size}", 1usize << ell)));
                }
            }
            Constraint::Ldp { epsilon } => {
                if !(epsilon > 0.0) {
                    return Err(param("LDP epsilon must be positive"));
                }
                let bound = T::lit(epsilon.exp()) * (T::one() + T::prob_tol());
                for y in 0..y_size {
                    let col = (0..k).map(|x| matrix[x * y_size + y]);
                    let (lo, hi) = col.fold((T::infinity(), T::zero()), |(lo, hi), w| (lo.min(w), hi.max(w)));
                    if hi > bound * lo {
                        return Err(param(format!("output {y} violates the {epsilon}-LDP ratio bound")));
                    }
                }
            }
        }
        let map = deterministic_map(k, y_size, &matrix);
        Ok(Self { k, y_size, matrix, kind, constraint, map })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn row(&self, x: usize) -> &[T] {
        &self.matrix[x * self.y_size..(x + 1) * self.y_size]
    }

    /// `W(y | x)`.
    pub fn prob(&self, y: usize, x: usize) -> T {
        self.matrix[x * self.y_size + y]
    }

    pub fn is_deterministic(&self) -> bool {
        self.map.is_some()
    }
}

fn deterministic_map<T: Real>(k: usize, y_size: usize, matrix: &[T]) -> Option<Vec<usize>> {
    (0..k)
        .map(|x| {
            let row = &matrix[x * y_size..(x + 1) * y_size];
            row.iter().position(|&w| w == T::one())
        })
        .collect()
}

fn table_channel<T: Real>(k: usize, y_size: usize, table: &[usize], kind: ChannelKind, constraint: Constraint) -> Result<Channel<T>> {
    let mut matrix = vec![T::zero(); k * y_size];
    for (x, &y) in table.iter().enumerate() {
        matrix[x * y_size + y] = T::one();
    }
    Channel::build(k, y_size, matrix, kind, constraint)
}

pub fn identity_channel<T: Real>(k: usize) -> Result<Channel<T>> {
    if k < 2 {
        return Err(param("identity channel needs k >= 2"));
    }
    let table: Vec<usize> = (0..k).collect();
    table_channel(k, k, &table, ChannelKind::Identity, Constraint::Unconstrained)
}

/// A hash `h: [k] -> [2^ell]` with every `h(x)` independent and uniform.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashFunction {
    k: usize,
    ell: u32,
    table: Vec<u32>,
    seed: Seed,
}

impl HashFunction {
    pub fn random(k: usize, ell: u32, seed: Seed) -> Result<Self> {
        let bins = pow2(ell)?;
        if ell > 31 {
            return Err(param("hash tables store bins as u32"));
        }
        if k < 2 {
            return Err(param("hashing needs k >= 2"));
        }
        let mut rng = seed.rng();
        let table = (0..k).map(|_| rng.random_range(0..bins) as u32).collect();
        Ok(Self { k, ell, table, seed })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn bins(&self) -> usize {
        1 << self.ell
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.table[x] as usize
    }

    pub fn table(&self) -> &[u32] {
        &self.table
    }

    /// `T_h(x, y) = 1{h(x) = y}`.
    #[inline]
    pub fn indicator(&self, x: usize, y: usize) -> bool {
        self.table[x] as usize == y
    }

    pub fn to_channel<T: Real>(&self) -> Result<Channel<T>> {
        let table: Vec<usize> = self.table.iter().map(|&b| b as usize).collect();
        table_channel(self.k, self.bins(), &table, ChannelKind::Hash, Constraint::Bits { ell: self.ell })
    }
}

pub fn random_hash_channel<T: Real>(k: usize, ell: u32, seed: Seed) -> Result<(Channel<T>, HashFunction)> {
    let h = HashFunction::random(k, ell, seed)?;
    Ok((h.to_channel()?, h))
}

/// A uniformly random near-balanced partition of `[k]` into `2^ell` parts;
/// part sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainCompressor {
    k: usize,
    ell: u32,
    part: Vec<usize>,
    seed: Seed,
}

impl DomainCompressor {
    pub fn random(k: usize, ell: u32, seed: Seed) -> Result<Self> {
        let parts = pow2(ell)?;
        if parts >= k {
            return Err(param(format!("2^ell = {parts} must be below k = {k}; use the identity channel instead")));
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut seed.rng());
        let mut part = vec![0; k];
        for (pos, &x) in order.iter().enumerate() {
            part[x] = pos % parts;
        }
        Ok(Self { k, ell, part, seed })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn parts(&self) -> usize {
        1 << self.ell
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    #[inline]
    pub fn compress(&self, x: usize) -> usize {
        self.part[x]
    }

    /// Law of the part index when the input is drawn from `p`.
    pub fn compress_dist<T: Real>(&self, p: &Distribution<T>) -> Result<Distribution<T>> {
        if p.k() != self.k {
            return Err(Error::DimensionMismatch { left: p.k(), right: self.k });
        }
        let mut out = vec![T::zero(); self.parts()];
        for (x, &px) in p.probs().iter().enumerate() {
            out[self.part[x]] += px;
        }
        Distribution::new(out)
    }

    pub fn to_channel<T: Real>(&self) -> Result<Channel<T>> {
        table_channel(self.k, self.parts(), &self.part, ChannelKind::Compression, Constraint::Bits { ell: self.ell })
    }
}

pub fn domain_compression_channel<T: Real>(k: usize, ell: u32, seed: Seed) -> Result<Channel<T>> {
    DomainCompressor::random(k, ell, seed)?.to_channel()
}

/// k-ary randomized response: keep `x` with probability `e^eps/(e^eps + k - 1)`,
/// otherwise report one of the other symbols uniformly.
pub fn krr_channel<T: Real>(k: usize, epsilon: f64) -> Result<Channel<T>> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(param("epsilon must be positive and finite"));
    }
    if k < 2 {
        return Err(param("randomized response needs k >= 2"));
    }
    let e = T::lit(epsilon.exp());
    let denom = e + T::from_count(k - 1);
    let keep = e / denom;
    let flip = T::one() / denom;
    let mut matrix = vec![flip; k * k];
    for x in 0..k {
        matrix[x * k + x] = keep;
    }
    Channel::build(k, k, matrix, ChannelKind::Krr, Constraint::Ldp { epsilon })
}

/// `y -> sum_x p(x) W(y | x)`.
pub fn output_distribution<T: Real>(w: &Channel<T>, p: &Distribution<T>) -> Result<Distribution<T>> {
    if w.k != p.k() {
        return Err(Error::DimensionMismatch { left: w.k, right: p.k() });
    }
    let mut out = vec![T::zero(); w.y_size];
    for (x, &px) in p.probs().iter().enumerate() {
        if px == T::zero() {
            continue;
        }
        for (o, &wy) in out.iter_mut().zip(w.row(x)) {
            *o += px * wy;
        }
    }
    Distribution::new(out)
}

/// Draws `y ~ W(. | x)`. Deterministic channels ignore the seed.
pub fn channel_apply<T: Real>(w: &Channel<T>, x: usize, seed: Seed) -> Result<usize> {
    let mut rng = seed.rng();
    channel_apply_with(w, x, &mut rng)
}

pub fn channel_apply_with<T: Real, R: rand::Rng + ?Sized>(w: &Channel<T>, x: usize, rng: &mut R) -> Result<usize> {
    if x >= w.k {
        return Err(Error::SymbolOutOfRange { symbol: x, size: w.k });
    }
    if let Some(map) = &w.map {
        return Ok(map[x]);
    }
    let u = T::lit(rng.random::<f64>());
    let mut acc = T::zero();
    let row = w.row(x);
    for (y, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(y);
        }
    }
    Ok(row.iter().rposition(|&p| p > T::zero()).unwrap_or(0))
}

/// Symmetric `(k/2) x (k/2)` matrix measuring how much a channel exposes the
/// paired perturbations of the Paninski family.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelInfoMatrix<T> {
    dim: usize,
    entries: Vec<T>,
}

impl<T: Real> ChannelInfoMatrix<T> {
    /// Row-major entries; symmetry is checked to `1e-9` (relative to scale).
    pub fn from_entries(dim: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { left: entries.len(), right: dim * dim });
        }
        let scale = entries.iter().fold(T::one(), |m, v| m.max(v.abs()));
        let tol = T::prob_tol() * scale;
        for r in 0..dim {
            for c in 0..r {
                if (entries[r * dim + c] - entries[c * dim + r]).abs() > tol {
                    return Err(Error::NotSymmetric { row: r, col: c });
                }
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.entries[r * self.dim + c]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        symmetric_eigenvalues(self.dim, &self.entries)
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues().into_iter().fold(T::infinity(), T::min)
    }

    /// Sum of absolute eigenvalues.
    pub fn trace_norm(&self) -> T {
        self.eigenvalues().into_iter().map(T::abs).sum()
    }
}

/// `H(i1, i2) = sum_y (W(y|2i1) - W(y|2i1+1)) (W(y|2i2) - W(y|2i2+1)) / sum_x W(y|x)`
/// (0-based pairs). Outputs that no input can emit contribute nothing.
pub fn channel_info_matrix<T: Real>(w: &Channel<T>) -> Result<ChannelInfoMatrix<T>> {
    if w.k % 2 == 1 {
        return Err(Error::OddAlphabet(w.k));
    }
    let half = w.k / 2;
    let mut entries = vec![T::zero(); half * half];
    let mut diff = vec![T::zero(); half];
    for y in 0..w.y_size {
        let col_sum: T = (0..w.k).map(|x| w.prob(y, x)).sum();
        if col_sum <= T::zero() {
            continue;
        }
        for (i, d) in diff.iter_mut().enumerate() {
            *d = w.prob(y, 2 * i) - w.prob(y, 2 * i + 1);
        }
        for i1 in 0..half {
            if diff[i1] == T::zero() {
                continue;
            }
            let a = diff[i1] / col_sum;
            for i2 in 0..half {
                entries[i1 * half + i2] += a * diff[i2];
            }
        }
    }
    // symmetrize the rounding of the two accumulation orders
    for r in 0..half {
        for c in 0..r {
            let m = (entries[r * half + c] + entries[c * half + r]) / T::lit(2.0);
            entries[r * half + c] = m;
            entries[c * half + r] = m;
        }
    }
    ChannelInfoMatrix::from_entries(half, entries)
}

pub fn trace_norm<T: Real>(m: &ChannelInfoMatrix<T>) -> T {
    m.trace_norm()
}

/// Trace norm of an arbitrary row-major square matrix; rejects asymmetric input.
pub fn symmetric_trace_norm<T: Real>(dim: usize, entries: &[T]) -> Result<T> {
    Ok(ChannelInfoMatrix::from_entries(dim, entries.to_vec())?.trace_norm())
}

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
fn symmetric_eigenvalues<T: Real>(n: usize, entries: &[T]) -> Vec<T> {
    let mut a = entries.to_vec();
    let idx = |r: usize, c: usize| r * n + c;
    let frob: T = a.iter().map(|&v| v * v).sum::<T>().sqrt();
    if frob == T::zero() {
        return vec![T::zero(); n];
    }
    let tol = T::epsilon() * frob;
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| a[idx(r, c)] * a[idx(r, c)])
            .sum::<T>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[idx(p, q)];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let app = a[idx(p, p)];
                let aqq = a[idx(q, q)];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[idx(k, p)];
                    let akq = a[idx(k, q)];
                    a[idx(k, p)] = c * akp - s * akq;
                    a[idx(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[idx(p, k)];
                    let aqk = a[idx(q, k)];
                    a[idx(p, k)] = c * apk - s * aqk;
                    a[idx(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[idx(i, i)]).collect()
}

/// Replayable description of a channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelDescriptor {
    Identity { k: usize },
    Hash { k: usize, ell: u32, seed: Seed },
    Compression { k: usize, ell: u32, seed: Seed },
    Krr { k: usize, epsilon: f64 },
    Custom { k: usize, y_size: usize, matrix: Vec<f64>, constraint: Constraint },
}

impl ChannelDescriptor {
    pub fn build<T: Real>(&self) -> Result<Channel<T>> {
        match self {
            ChannelDescriptor::Identity { k } => identity_channel(*k),
            ChannelDescriptor::Hash { k, ell, seed } => HashFunction::random(*k, *ell, *seed)?.to_channel(),
            ChannelDescriptor::Compression { k, ell, seed } => domain_compression_channel(*k, *ell, *seed),
            ChannelDescriptor::Krr { k, epsilon } => krr_channel(*k, *epsilon),
            ChannelDescriptor::Custom { k, y_size, matrix, constraint } => {
                Channel::new(*k, *y_size, matrix.iter().map(|&v| T::lit(v)).collect(), *constraint)
            }
        }
    }
}
