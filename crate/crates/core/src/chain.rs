//! Reversible generators on the support of a measure.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice_measure::{homogeneity, render_bits, BooleanMeasure};
use crate::negdep::adjacent_bits;
use crate::scalar::{self, serde_scalar, Scalar};

/// Relative slack on detailed balance and row sums for real generators.
pub const REAL_BALANCE_TOL: f64 = 1e-12;

/// A Markov rate matrix indexed by `measure.support()`, reversible for the measure.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator<S> {
    measure: BooleanMeasure<S>,
    rates: Vec<S>,
}

impl<S: Scalar> Generator<S> {
    /// Builds a generator from its off-diagonal part (the diagonal of `rates`
    /// is ignored and rebuilt so that rows sum to zero).
    pub fn from_off_diagonal(measure: BooleanMeasure<S>, mut rates: Vec<S>) -> Result<Self> {
        let size = measure.len();
        if rates.len() != size * size {
            return Err(Error::Validation(format!(
                "rate matrix has {} entries, expected {size}x{size}",
                rates.len()
            )));
        }
        for i in 0..size {
            rates[i * size + i] = S::zero();
            let out = scalar::sum((0..size).map(|j| rates[i * size + j].clone()));
            rates[i * size + i] = -out;
        }
        let q = Self { measure, rates };
        q.check_entries()?;
        Ok(q)
    }

    /// Builds a generator from a full matrix whose rows must already sum to zero.
    pub fn from_matrix(measure: BooleanMeasure<S>, rates: Vec<S>) -> Result<Self> {
        let size = measure.len();
        if rates.len() != size * size {
            return Err(Error::Validation(format!(
                "rate matrix has {} entries, expected {size}x{size}",
                rates.len()
            )));
        }
        let mut worst: Option<(usize, S)> = None;
        for i in 0..size {
            let row = scalar::sum((0..size).map(|j| rates[i * size + j].clone()));
            let scale = S::max_of(&S::one(), &rates[i * size + i].abs());
            if !row.abs().approx_le(&S::zero(), REAL_BALANCE_TOL * scale.as_f64()) {
                if worst.as_ref().is_none_or(|(_, w)| row.abs() > *w) {
                    worst = Some((i, row.abs()));
                }
            }
        }
        if let Some((i, r)) = worst {
            return Err(Error::Validation(format!(
                "row {} sums to {} instead of 0",
                render_bits(measure.dimension(), measure.support()[i]),
                r.render()
            )));
        }
        Self::from_off_diagonal(measure, rates)
    }

    /// Builds a generator from sparse off-diagonal `(from, to, rate)` triples.
    pub fn from_pairs(
        measure: BooleanMeasure<S>,
        pairs: impl IntoIterator<Item = (usize, usize, S)>,
    ) -> Result<Self> {
        let size = measure.len();
        let mut rates = vec![S::zero(); size * size];
        for (i, j, r) in pairs {
            if i >= size || j >= size {
                return Err(Error::Validation(format!("rate index ({i},{j}) outside support")));
            }
            rates[i * size + j] = r;
        }
        Self::from_off_diagonal(measure, rates)
    }

    pub fn zero(measure: BooleanMeasure<S>) -> Self {
        let size = measure.len();
        Self {
            measure,
            rates: vec![S::zero(); size * size],
        }
    }

    fn check_entries(&self) -> Result<()> {
        let size = self.size();
        let n = self.measure.dimension();
        let name = |i: usize| render_bits(n, self.measure.support()[i]);
        for i in 0..size {
            for j in 0..size {
                if i != j && self.rate(i, j).lt_zero() {
                    return Err(Error::Validation(format!(
                        "negative rate {} from {} to {}",
                        self.rate(i, j).render(),
                        name(i),
                        name(j)
                    )));
                }
            }
        }
        let (residual, worst) = self.balance_residual();
        let ok = if S::EXACT { residual == 0.0 } else { residual <= REAL_BALANCE_TOL };
        if !ok {
            let (i, j) = worst.expect("positive residual has a location");
            return Err(Error::Validation(format!(
                "detailed balance fails between {} and {} (relative violation {residual:e})",
                name(i),
                name(j)
            )));
        }
        Ok(())
    }

    /// Largest relative detailed-balance violation and where it occurs.
    fn balance_residual(&self) -> (f64, Option<(usize, usize)>) {
        let size = self.size();
        let pi = self.measure.weights();
        let mut worst = (0.0, None);
        for i in 0..size {
            for j in i + 1..size {
                let a = pi[i].clone() * self.rate(i, j).clone();
                let b = pi[j].clone() * self.rate(j, i).clone();
                if a == b {
                    continue;
                }
                let scale = S::max_of(&a.abs(), &b.abs()).as_f64();
                let r = ((a - b).abs()).as_f64() / scale;
                let r = if S::EXACT && r == 0.0 { f64::MIN_POSITIVE } else { r };
                if r > worst.0 {
                    worst = (r, Some((i, j)));
                }
            }
        }
        worst
    }

    pub fn measure(&self) -> &BooleanMeasure<S> {
        &self.measure
    }

    pub fn size(&self) -> usize {
        self.measure.len()
    }

    pub fn rate(&self, i: usize, j: usize) -> &S {
        &self.rates[i * self.size() + j]
    }

    pub fn rates(&self) -> &[S] {
        &self.rates
    }

    /// Positive off-diagonal entries.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, &S)> + '_ {
        let size = self.size();
        self.rates
            .iter()
            .enumerate()
            .map(move |(k, r)| (k / size, k % size, r))
            .filter(|(i, j, r)| i != j && r.gt_zero())
    }

    /// `Δ(Q) = max_x -Q(x,x)`.
    pub fn delta(&self) -> S {
        (0..self.size())
            .map(|i| -self.rate(i, i).clone())
            .fold(S::zero(), |a, b| S::max_of(&a, &b))
    }

    pub fn scaled(&self, factor: &S) -> Self {
        Self {
            measure: self.measure.clone(),
            rates: self.rates.iter().map(|r| r.clone() * factor.clone()).collect(),
        }
    }

    /// Entrywise convex-style combination `Σ c_k Q_k` over generators on the
    /// same measure.
    pub fn combine(parts: &[(S, &Generator<S>)]) -> Result<Self> {
        let (_, first) = parts
            .first()
            .ok_or_else(|| Error::Construction("empty combination".into()))?;
        let size = first.size();
        let mut rates = vec![S::zero(); size * size];
        for (c, q) in parts {
            if q.measure.support() != first.measure.support() {
                return Err(Error::Validation("combining generators on different supports".into()));
            }
            for (acc, r) in rates.iter_mut().zip(&q.rates) {
                *acc = acc.clone() + c.clone() * r.clone();
            }
        }
        Self::from_off_diagonal(first.measure.clone(), rates)
    }

    pub fn to_f64(&self) -> Generator<f64> {
        Generator {
            measure: self.measure.to_f64(),
            rates: self.rates.iter().map(Scalar::as_f64).collect(),
        }
    }

    pub fn matrix_f64(&self) -> DMatrix<f64> {
        let size = self.size();
        DMatrix::from_fn(size, size, |i, j| self.rate(i, j).as_f64())
    }

    pub fn reversibility_residual(&self) -> f64 {
        self.balance_residual().0
    }
}

/// Summary statistics of a generator. `None` for `m` / `M` means there are no
/// adjacent support pairs (a vacuous `+∞`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainStats<S: Scalar> {
    #[serde(serialize_with = "serde_scalar::one")]
    pub delta: S,
    #[serde(serialize_with = "serde_scalar::opt")]
    pub m: Option<S>,
    #[serde(rename = "M", serialize_with = "serde_scalar::opt")]
    pub big_m: Option<S>,
    pub flip_swap: bool,
    pub normalized: bool,
    pub reversibility_residual: f64,
}

pub fn validate<S: Scalar>(q: &Generator<S>) -> Result<ChainStats<S>> {
    q.check_entries()?;
    let support = q.measure().support();
    let mut m: Option<S> = None;
    let mut big_m: Option<S> = None;
    for i in 0..q.size() {
        for j in i + 1..q.size() {
            if !adjacent_bits(support[i], support[j]) {
                continue;
            }
            let (a, b) = (q.rate(i, j), q.rate(j, i));
            let lo = S::min_of(a, b);
            let hi = S::max_of(a, b);
            m = Some(match m {
                Some(v) => S::min_of(&v, &lo),
                None => lo,
            });
            big_m = Some(match big_m {
                Some(v) => S::min_of(&v, &hi),
                None => hi,
            });
        }
    }
    let flip_swap = q
        .transitions()
        .all(|(i, j, _)| adjacent_bits(support[i], support[j]));
    let delta = q.delta();
    Ok(ChainStats {
        normalized: delta <= S::one(),
        delta,
        m,
        big_m,
        flip_swap,
        reversibility_residual: q.reversibility_residual(),
    })
}

/// `2kn` with `k` the homogeneity degree, or `n²` (`k = n/2`) otherwise.
pub fn walk_scale<S: Scalar>(m: &BooleanMeasure<S>) -> Option<S> {
    let n = m.dimension();
    match homogeneity(m) {
        Some(0) => None,
        Some(k) => Some(S::from_count(2 * k * n)),
        None => Some(S::from_count(n * n)),
    }
}

/// Metropolis chain on flip/swap moves with rates `min{π(y)/π(x), 1} / (2kn)`.
pub fn build_mcmc<S: Scalar>(m: &BooleanMeasure<S>) -> Generator<S> {
    let Some(scale) = walk_scale(m) else {
        return Generator::zero(m.clone());
    };
    let support = m.support();
    let pi = m.weights();
    let size = m.len();
    let mut rates = vec![S::zero(); size * size];
    for i in 0..size {
        for j in 0..size {
            if i != j && adjacent_bits(support[i], support[j]) {
                let ratio = S::min_of(&(pi[j].clone() / pi[i].clone()), &S::one());
                rates[i * size + j] = ratio / scale.clone();
            }
        }
    }
    Generator::from_off_diagonal(m.clone(), rates).expect("metropolis rates are reversible")
}

/// Bases-exchange walk: rate `1/(2kn)` between adjacent support states of a
/// uniform `k`-homogeneous measure.
pub fn build_bases_exchange<S: Scalar>(m: &BooleanMeasure<S>) -> Result<Generator<S>> {
    let Some(k) = homogeneity(m) else {
        return Err(Error::Precondition("bases-exchange walk needs a homogeneous measure".into()));
    };
    if !m.is_uniform() {
        return Err(Error::Precondition("bases-exchange walk needs a uniform measure".into()));
    }
    if k == 0 {
        return Ok(Generator::zero(m.clone()));
    }
    let rate = S::one() / S::from_count(2 * k * m.dimension());
    let support = m.support();
    let size = m.len();
    let mut rates = vec![S::zero(); size * size];
    for i in 0..size {
        for j in 0..size {
            if i != j && adjacent_bits(support[i], support[j]) {
                rates[i * size + j] = rate.clone();
            }
        }
    }
    Generator::from_off_diagonal(m.clone(), rates)
}

/// Rescales by `1/Δ(Q)`.
pub fn normalize<S: Scalar>(q: &Generator<S>) -> Result<Generator<S>> {
    let delta = q.delta();
    if !delta.gt_zero() {
        return Err(Error::Domain("cannot normalize the zero generator".into()));
    }
    Ok(q.scaled(&(S::one() / delta)))
}

/// Communicating classes of the positive-rate graph, as support indices.
pub fn communicating_classes<S: Scalar>(q: &Generator<S>) -> Vec<Vec<usize>> {
    let size = q.size();
    let mut parent: Vec<usize> = (0..size).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, j, _) in q.transitions() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; size];
    for x in 0..size {
        let r = find(&mut parent, x);
        if slot[r] == usize::MAX {
            slot[r] = classes.len();
            classes.push(Vec::new());
        }
        classes[slot[r]].push(x);
    }
    classes
}

pub fn ensure_irreducible<S: Scalar>(q: &Generator<S>) -> Result<()> {
    let classes = communicating_classes(q);
    if classes.len() <= 1 {
        return Ok(());
    }
    let n = q.measure().dimension();
    let support = q.measure().support();
    Err(Error::Reducible(
        classes
            .iter()
            .map(|c| c.iter().map(|&i| render_bits(n, support[i])).collect())
            .collect(),
    ))
}

#[derive(Serialize)]
pub struct RateEntry {
    pub from: String,
    pub to: String,
    pub rate: serde_json::Value,
}

/// Generator file layout: support bit-strings plus sparse off-diagonal rates.
#[derive(Serialize)]
pub struct GeneratorView {
    pub n: usize,
    pub support: Vec<String>,
    pub rates: Vec<RateEntry>,
}

impl<S: Scalar> From<&Generator<S>> for GeneratorView {
    fn from(q: &Generator<S>) -> Self {
        let n = q.measure().dimension();
        let support = q.measure().support();
        GeneratorView {
            n,
            support: q.measure().states().map(|s| s.to_string()).collect(),
            rates: q
                .transitions()
                .map(|(i, j, r)| RateEntry {
                    from: render_bits(n, support[i]),
                    to: render_bits(n, support[j]),
                    rate: r.to_json(),
                })
                .collect(),
        }
    }
}
