//! Probability measures on the boolean lattice `{0,1}^n`.
//!
//! States are stored as `u64` masks. Coordinate `i` (0-based) lives in bit
//! `n - 1 - i`, so the mask of a state is the binary number spelled by its
//! bit-string (`"110"` is `x_0 = 1, x_1 = 1, x_2 = 0`, mask 6) and ascending
//! mask order is lexicographic bit-string order. Every support is kept sorted
//! that way, which makes all downstream matrices deterministic.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num::Signed;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{self, Rational, Scalar};

/// Largest supported dimension.
pub const MAX_DIMENSION: usize = 63;

/// Weight ratio below which an L-ensemble state is treated as outside the support.
pub const L_ENSEMBLE_SUPPORT_THRESHOLD: f64 = 1e-14;

#[inline]
pub fn coord_mask(n: usize, i: usize) -> u64 {
    debug_assert!(i < n);
    1u64 << (n - 1 - i)
}

#[inline]
pub fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[inline]
pub fn bit(n: usize, bits: u64, i: usize) -> bool {
    bits & coord_mask(n, i) != 0
}

pub fn render_bits(n: usize, bits: u64) -> String {
    (0..n).map(|i| if bit(n, bits, i) { '1' } else { '0' }).collect()
}

/// A point of `{0,1}^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVector {
    n: usize,
    bits: u64,
}

impl BitVector {
    pub fn new(n: usize, bits: u64) -> Result<Self> {
        if n == 0 || n > MAX_DIMENSION {
            return Err(Error::Construction(format!(
                "dimension must be in 1..={MAX_DIMENSION}, got {n}"
            )));
        }
        if bits & !full_mask(n) != 0 {
            return Err(Error::Construction(format!(
                "mask {bits:#b} has bits above dimension {n}"
            )));
        }
        Ok(Self { n, bits })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(n, 0)
    }

    /// Parses a bit-string, first character = coordinate 0.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut bits = 0u64;
        for c in s.chars() {
            bits <<= 1;
            match c {
                '0' => {}
                '1' => bits |= 1,
                _ => return Err(Error::Parse(format!("invalid bit-string {s:?}"))),
            }
        }
        Self::new(s.len(), bits)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        bit(self.n, self.bits, i)
    }

    pub fn with(&self, i: usize, value: bool) -> Self {
        let m = coord_mask(self.n, i);
        let bits = if value { self.bits | m } else { self.bits & !m };
        Self { n: self.n, bits }
    }

    pub fn ones(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn hamming(&self, other: &Self) -> usize {
        (self.bits ^ other.bits).count_ones() as usize
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_bits(self.n, self.bits))
    }
}

/// A finite probability measure on `{0,1}^n` with strictly positive weights on
/// its (sorted) support.
#[derive(Clone, Debug, PartialEq)]
pub struct BooleanMeasure<S> {
    n: usize,
    support: Vec<u64>,
    weights: Vec<S>,
}

impl<S: Scalar> BooleanMeasure<S> {
    /// Validating constructor: weights must be positive and sum to one.
    pub fn new(n: usize, entries: Vec<(u64, S)>) -> Result<Self> {
        let m = Self::assemble(n, entries)?;
        let total = scalar::sum(m.weights.iter().cloned());
        if !total.approx_eq(&S::one(), S::SUM_TOL) {
            return Err(Error::Validation(format!(
                "weights sum to {} instead of 1",
                total.render()
            )));
        }
        Ok(m)
    }

    /// Like [`BooleanMeasure::new`] but rescales the weights to total mass one.
    /// Zero weights are dropped.
    pub fn normalized(n: usize, entries: Vec<(u64, S)>) -> Result<Self> {
        let entries: Vec<_> = entries.into_iter().filter(|(_, w)| !w.is_zero()).collect();
        let mut m = Self::assemble(n, entries)?;
        let total = scalar::sum(m.weights.iter().cloned());
        for w in &mut m.weights {
            *w = w.clone() / total.clone();
        }
        Ok(m)
    }

    fn assemble(n: usize, mut entries: Vec<(u64, S)>) -> Result<Self> {
        if n == 0 || n > MAX_DIMENSION {
            return Err(Error::Construction(format!(
                "dimension must be in 1..={MAX_DIMENSION}, got {n}"
            )));
        }
        if entries.is_empty() {
            return Err(Error::Construction("empty support".into()));
        }
        entries.sort_by_key(|(b, _)| *b);
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::Construction(format!(
                    "state {} listed twice",
                    render_bits(n, pair[0].0)
                )));
            }
        }
        for (b, w) in &entries {
            if b & !full_mask(n) != 0 {
                return Err(Error::Construction(format!(
                    "state mask {b:#b} exceeds dimension {n}"
                )));
            }
            if !w.gt_zero() {
                return Err(Error::Validation(format!(
                    "non-positive weight {} at state {}",
                    w.render(),
                    render_bits(n, *b)
                )));
            }
        }
        let (support, weights) = entries.into_iter().unzip();
        Ok(Self {
            n,
            support,
            weights,
        })
    }

    pub fn point_mass(state: BitVector) -> Self {
        Self {
            n: state.dimension(),
            support: vec![state.bits()],
            weights: vec![S::one()],
        }
    }

    pub fn uniform(n: usize, states: impl IntoIterator<Item = u64>) -> Result<Self> {
        let states: Vec<u64> = states.into_iter().collect();
        let w = S::one() / S::from_count(states.len().max(1));
        Self::new(n, states.into_iter().map(|b| (b, w.clone())).collect())
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn weight(&self, index: usize) -> &S {
        &self.weights[index]
    }

    pub fn state(&self, index: usize) -> BitVector {
        BitVector {
            n: self.n,
            bits: self.support[index],
        }
    }

    pub fn states(&self) -> impl Iterator<Item = BitVector> + '_ {
        self.support.iter().map(|&bits| BitVector { n: self.n, bits })
    }

    pub fn index_of(&self, bits: u64) -> Option<usize> {
        self.support.binary_search(&bits).ok()
    }

    /// Probability of a state outside or inside the support.
    pub fn prob(&self, bits: u64) -> S {
        self.index_of(bits)
            .map(|i| self.weights[i].clone())
            .unwrap_or_else(S::zero)
    }

    pub fn mass_where(&self, mut pred: impl FnMut(u64) -> bool) -> S {
        scalar::sum(
            self.support
                .iter()
                .zip(&self.weights)
                .filter(|(b, _)| pred(**b))
                .map(|(_, w)| w.clone()),
        )
    }

    pub fn is_uniform(&self) -> bool {
        self.weights.iter().all(|w| w.approx_eq(&self.weights[0], 1e-12))
    }

    /// Mean of coordinate `i`.
    pub fn marginal(&self, i: usize) -> S {
        let m = coord_mask(self.n, i);
        self.mass_where(|b| b & m != 0)
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(Scalar::as_f64).collect()
    }

    pub fn to_f64(&self) -> BooleanMeasure<f64> {
        BooleanMeasure {
            n: self.n,
            support: self.support.clone(),
            weights: self.weights_f64(),
        }
    }

    /// Renormalized restriction to a subset of support indices (kept in the
    /// same `n` coordinates).
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Construction("restriction to an empty block".into()));
        }
        let mass = scalar::sum(indices.iter().map(|&i| self.weights[i].clone()));
        let mut entries: Vec<(u64, S)> = indices
            .iter()
            .map(|&i| (self.support[i], self.weights[i].clone() / mass.clone()))
            .collect();
        entries.sort_by_key(|(b, _)| *b);
        Ok(Self {
            n: self.n,
            support: entries.iter().map(|(b, _)| *b).collect(),
            weights: entries.into_iter().map(|(_, w)| w).collect(),
        })
    }

    /// Total mass of the support, which should be one.
    pub fn total_mass(&self) -> S {
        scalar::sum(self.weights.iter().cloned())
    }
}

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

fn check_open_unit<S: Scalar>(p: &[S]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Construction("empty probability vector".into()));
    }
    for (i, pi) in p.iter().enumerate() {
        if !(pi.gt_zero() && *pi < S::one()) {
            return Err(Error::Validation(format!(
                "p[{i}] = {} is not in (0,1)",
                pi.render()
            )));
        }
    }
    Ok(())
}

fn product_weight<S: Scalar>(p: &[S], bits: u64) -> S {
    let n = p.len();
    p.iter().enumerate().fold(S::one(), |acc, (i, pi)| {
        if bit(n, bits, i) {
            acc * pi.clone()
        } else {
            acc * (S::one() - pi.clone())
        }
    })
}

/// Independent coordinates with `P(x_i = 1) = p[i]`.
pub fn product<S: Scalar>(p: &[S]) -> Result<BooleanMeasure<S>> {
    check_open_unit(p)?;
    let n = p.len();
    if n > 24 {
        return Err(Error::Construction(format!("product of dimension {n} is too large to enumerate")));
    }
    BooleanMeasure::normalized(n, (0..1u64 << n).map(|b| (b, product_weight(p, b))).collect())
}

/// The product law conditioned on `x_1 + ... + x_n = k`.
pub fn conditioned_sum<S: Scalar>(p: &[S], k: usize) -> Result<BooleanMeasure<S>> {
    check_open_unit(p)?;
    let n = p.len();
    if n > 24 {
        return Err(Error::Construction(format!("slice of dimension {n} is too large to enumerate")));
    }
    let entries: Vec<_> = (0..1u64 << n)
        .filter(|b| b.count_ones() as usize == k)
        .map(|b| (b, product_weight(p, b)))
        .collect();
    if entries.is_empty() {
        return Err(Error::Construction(format!(
            "the slice x_1 + ... + x_{n} = {k} is empty"
        )));
    }
    BooleanMeasure::normalized(n, entries)
}

/// Uniform law on the edge-indicator vectors of spanning trees; coordinate
/// `i` is `edges[i]`.
pub fn spanning_tree<S: Scalar>(vertices: usize, edges: &[(usize, usize)]) -> Result<BooleanMeasure<S>> {
    let n = edges.len();
    if n == 0 {
        return Err(Error::Construction("spanning-tree graph has no edges".into()));
    }
    if n > 24 {
        return Err(Error::Construction(format!("{n} edges are too many to enumerate")));
    }
    if let Some(&(u, v)) = edges.iter().find(|(u, v)| *u >= vertices || *v >= vertices) {
        return Err(Error::Construction(format!(
            "edge ({u},{v}) refers to a vertex outside 0..{vertices}"
        )));
    }
    let tree_size = vertices.saturating_sub(1);
    let trees: Vec<u64> = (0..1u64 << n)
        .filter(|b| b.count_ones() as usize == tree_size)
        .filter(|&b| is_forest(vertices, edges, n, b))
        .collect();
    if trees.is_empty() {
        return Err(Error::Construction(
            "graph is disconnected: it has no spanning tree".into(),
        ));
    }
    BooleanMeasure::uniform(n, trees)
}

fn is_forest(vertices: usize, edges: &[(usize, usize)], n: usize, bits: u64) -> bool {
    let mut parent: Vec<usize> = (0..vertices).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for (i, &(u, v)) in edges.iter().enumerate() {
        if !bit(n, bits, i) {
            continue;
        }
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru == rv {
            return false;
        }
        parent[ru] = rv;
    }
    true
}

/// L-ensemble: `P(S) = det(L_S) / det(I + L)` over all `S ⊆ [n]`.
pub fn l_ensemble(kernel: &[Vec<f64>]) -> Result<BooleanMeasure<f64>> {
    let n = kernel.len();
    if n == 0 {
        return Err(Error::Construction("empty L-ensemble kernel".into()));
    }
    if n > 20 {
        return Err(Error::Construction(format!("kernel of size {n} is too large to enumerate")));
    }
    if kernel.iter().any(|row| row.len() != n) {
        return Err(Error::Validation("L-ensemble kernel is not square".into()));
    }
    let l = DMatrix::from_fn(n, n, |i, j| kernel[i][j]);
    if l.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("L-ensemble kernel has non-finite entries".into()));
    }
    let scale = l.iter().fold(1f64, |a, v| a.max(v.abs()));
    for i in 0..n {
        for j in 0..i {
            if (l[(i, j)] - l[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Validation(format!(
                    "L-ensemble kernel is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    let sym = (&l + l.transpose()) * 0.5;
    let min_eig = sym.clone().symmetric_eigenvalues().min();
    if min_eig < -1e-10 * scale {
        return Err(Error::Validation(format!(
            "L-ensemble kernel is not positive semidefinite (eigenvalue {min_eig:e})"
        )));
    }
    let mut raw = Vec::with_capacity(1 << n);
    for b in 0..1u64 << n {
        let idx: Vec<usize> = (0..n).filter(|&i| bit(n, b, i)).collect();
        let det = if idx.is_empty() {
            1.0
        } else {
            sym.select_rows(&idx).select_columns(&idx).determinant()
        };
        raw.push((b, det));
    }
    let max_w = raw.iter().fold(0f64, |a, (_, w)| a.max(*w));
    let cutoff = L_ENSEMBLE_SUPPORT_THRESHOLD * max_w;
    let kept: Vec<(u64, f64)> = raw.iter().copied().filter(|(_, w)| *w > cutoff).collect();
    if kept.len() < raw.len() {
        let dropped_mass: f64 = raw.iter().filter(|(_, w)| *w <= cutoff).map(|(_, w)| w.abs()).sum();
        log::warn!(
            "l-ensemble: dropped {} near-zero states (|mass| {:e}) and renormalized",
            raw.len() - kept.len(),
            dropped_mass
        );
    }
    let normalizer = (DMatrix::<f64>::identity(n, n) + &sym).determinant();
    let total: f64 = kept.iter().map(|(_, w)| w).sum();
    if (total - normalizer).abs() > 1e-8 * normalizer.abs().max(1.0) {
        log::warn!("l-ensemble: principal minors sum to {total}, det(I+L) = {normalizer}");
    }
    BooleanMeasure::normalized(n, kept)
}

/// A measure description, as carried by measure files.
#[derive(Clone, Debug, PartialEq)]
pub enum MeasureSpec {
    Explicit(Vec<(BitVector, Rational)>),
    Product(Vec<Rational>),
    ConditionedSum { p: Vec<Rational>, k: usize },
    LEnsemble(Vec<Vec<f64>>),
    SpanningTree { vertices: usize, edges: Vec<(usize, usize)> },
}

/// A measure built from a spec; exact unless the spec forces floating point.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyMeasure {
    Exact(BooleanMeasure<Rational>),
    Real(BooleanMeasure<f64>),
}

impl AnyMeasure {
    pub fn dimension(&self) -> usize {
        match self {
            AnyMeasure::Exact(m) => m.dimension(),
            AnyMeasure::Real(m) => m.dimension(),
        }
    }

    pub fn to_f64(&self) -> BooleanMeasure<f64> {
        match self {
            AnyMeasure::Exact(m) => m.to_f64(),
            AnyMeasure::Real(m) => m.clone(),
        }
    }
}

pub fn build_measure(n: usize, spec: &MeasureSpec) -> Result<AnyMeasure> {
    let expect = |len: usize, what: &str| -> Result<()> {
        if len != n {
            Err(Error::Validation(format!("{what} has {len} coordinates but n = {n}")))
        } else {
            Ok(())
        }
    };
    Ok(match spec {
        MeasureSpec::Explicit(entries) => {
            for (s, _) in entries {
                expect(s.dimension(), "explicit state")?;
            }
            if entries.iter().any(|(_, w)| w.lt_zero()) {
                return Err(Error::Validation("explicit weights must be non-negative".into()));
            }
            let entries = entries.iter().map(|(s, w)| (s.bits(), w.clone())).collect();
            AnyMeasure::Exact(BooleanMeasure::normalized(n, entries)?)
        }
        MeasureSpec::Product(p) => {
            expect(p.len(), "product spec")?;
            AnyMeasure::Exact(product(p)?)
        }
        MeasureSpec::ConditionedSum { p, k } => {
            expect(p.len(), "conditioned-sum spec")?;
            AnyMeasure::Exact(conditioned_sum(p, *k)?)
        }
        MeasureSpec::LEnsemble(l) => {
            expect(l.len(), "L-ensemble kernel")?;
            AnyMeasure::Real(l_ensemble(l)?)
        }
        MeasureSpec::SpanningTree { vertices, edges } => {
            expect(edges.len(), "spanning-tree edge list")?;
            AnyMeasure::Exact(spanning_tree(*vertices, edges)?)
        }
    })
}

// ---------------------------------------------------------------------------
// Conditioning and splitting
// ---------------------------------------------------------------------------

/// A conditional law on the free coordinates, re-indexed in increasing order.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditioned<S> {
    pub measure: BooleanMeasure<S>,
    /// `coordinates[j]` is the original index of new coordinate `j`.
    pub coordinates: Vec<usize>,
}

/// Conditions on `X_i = assignment[i]` for every assigned coordinate.
pub fn condition<S: Scalar>(
    m: &BooleanMeasure<S>,
    assignment: &BTreeMap<usize, bool>,
) -> Result<Conditioned<S>> {
    let n = m.dimension();
    if let Some(&i) = assignment.keys().find(|&&i| i >= n) {
        return Err(Error::Domain(format!("coordinate {i} out of range for n = {n}")));
    }
    let coordinates: Vec<usize> = (0..n).filter(|i| !assignment.contains_key(i)).collect();
    if coordinates.is_empty() {
        return Err(Error::Construction(
            "conditioning on every coordinate leaves a zero-dimensional law".into(),
        ));
    }
    let (fixed_mask, fixed_value) = assignment_masks(n, assignment);
    let entries: Vec<(u64, S)> = m
        .support()
        .iter()
        .zip(m.weights())
        .filter(|(b, _)| *b & fixed_mask == fixed_value)
        .map(|(&b, w)| (compress(n, b, &coordinates), w.clone()))
        .collect();
    if entries.is_empty() {
        return Err(Error::Domain(format!(
            "conditioning event {} has probability zero",
            render_assignment(assignment)
        )));
    }
    Ok(Conditioned {
        measure: BooleanMeasure::normalized(coordinates.len(), entries)?,
        coordinates,
    })
}

pub(crate) fn assignment_masks(n: usize, assignment: &BTreeMap<usize, bool>) -> (u64, u64) {
    assignment.iter().fold((0, 0), |(mask, value), (&i, &v)| {
        let c = coord_mask(n, i);
        (mask | c, if v { value | c } else { value })
    })
}

fn render_assignment(assignment: &BTreeMap<usize, bool>) -> String {
    let parts: Vec<String> = assignment
        .iter()
        .map(|(i, v)| format!("x_{i}={}", u8::from(*v)))
        .collect();
    format!("{{{}}}", parts.join(", "))
}

/// Projects `bits` onto the listed coordinates (in order).
pub(crate) fn compress(n: usize, bits: u64, coordinates: &[usize]) -> u64 {
    let k = coordinates.len();
    coordinates.iter().enumerate().fold(0, |acc, (j, &i)| {
        if bit(n, bits, i) {
            acc | coord_mask(k, j)
        } else {
            acc
        }
    })
}

/// Returns `k` when every support state has exactly `k` ones.
pub fn homogeneity<S: Scalar>(m: &BooleanMeasure<S>) -> Option<usize> {
    let k = m.support().first()?.count_ones();
    m.support()
        .iter()
        .all(|b| b.count_ones() == k)
        .then_some(k as usize)
}

/// The two-block decomposition along one coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct Split<S> {
    pub coordinate: usize,
    /// `(mass of x_l = 0, mass of x_l = 1)`.
    pub masses: [S; 2],
    /// Renormalized block laws, still on all `n` coordinates.
    pub blocks: [BooleanMeasure<S>; 2],
    /// Support indices of each block in the parent measure.
    pub indices: [Vec<usize>; 2],
}

pub fn split<S: Scalar>(m: &BooleanMeasure<S>, coordinate: usize) -> Result<Split<S>> {
    let n = m.dimension();
    if coordinate >= n {
        return Err(Error::Domain(format!("coordinate {coordinate} out of range for n = {n}")));
    }
    let c = coord_mask(n, coordinate);
    let (ones, zeros): (Vec<usize>, Vec<usize>) = (0..m.len()).partition(|&i| m.support()[i] & c != 0);
    for (value, block) in [(0u8, &zeros), (1u8, &ones)] {
        if block.is_empty() {
            return Err(Error::Split {
                coordinate,
                empty_value: value,
            });
        }
    }
    let mass = |idx: &[usize]| scalar::sum(idx.iter().map(|&i| m.weight(i).clone()));
    Ok(Split {
        coordinate,
        masses: [mass(&zeros), mass(&ones)],
        blocks: [m.restrict(&zeros)?, m.restrict(&ones)?],
        indices: [zeros, ones],
    })
}

/// Serializable view: bit-string support and weights.
#[derive(Serialize)]
pub struct MeasureView {
    pub n: usize,
    pub support: Vec<String>,
    pub weights: Vec<serde_json::Value>,
    pub exact: bool,
    pub homogeneity: Option<usize>,
}

impl<S: Scalar> From<&BooleanMeasure<S>> for MeasureView {
    fn from(m: &BooleanMeasure<S>) -> Self {
        MeasureView {
            n: m.dimension(),
            support: m.states().map(|s| s.to_string()).collect(),
            weights: m.weights().iter().map(Scalar::to_json).collect(),
            exact: S::EXACT,
            homogeneity: homogeneity(m),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn states(m: &BooleanMeasure<Rational>) -> Vec<String> {
        m.states().map(|s| s.to_string()).collect()
    }

    fn triangle() -> BooleanMeasure<Rational> {
        spanning_tree(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn bitvector_layout() {
        let x = BitVector::parse("110").unwrap();
        assert_eq!(x.bits(), 6);
        assert!(x.get(0) && x.get(1) && !x.get(2));
        assert_eq!(x.with(2, true).to_string(), "111");
        assert!(BitVector::new(2, 4).is_err());
        assert!(BitVector::parse("").is_err());
    }

    #[test]
    fn triangle_spanning_trees_by_brute_force() {
        // every 2-subset of the triangle's edges is connected and acyclic
        let m = triangle();
        assert_eq!(states(&m), ["011", "101", "110"]);
        assert!(m.weights().iter().all(|w| *w == q(1, 3)));
    }

    #[test]
    fn four_cycle_and_k4_tree_counts() {
        let c4 = spanning_tree::<Rational>(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert_eq!(c4.len(), 4);
        assert_eq!(homogeneity(&c4), Some(3));
        let k4 = spanning_tree::<Rational>(
            4,
            &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        )
        .unwrap();
        assert_eq!(k4.len(), 16); // Cayley: 4^(4-2)
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let err = spanning_tree::<Rational>(4, &[(0, 1), (2, 3)]).unwrap_err();
        assert!(err.to_string().contains("disconnected"));
    }

    #[test]
    fn fair_product_is_uniform() {
        let m = product(&[q(1, 2), q(1, 2)]).unwrap();
        assert_eq!(states(&m), ["00", "01", "10", "11"]);
        assert!(m.weights().iter().all(|w| *w == q(1, 4)));
        assert_eq!(homogeneity(&m), None);
    }

    #[test]
    fn fair_slice_is_uniform() {
        let m = conditioned_sum(&[q(1, 2), q(1, 2)], 1).unwrap();
        assert_eq!(states(&m), ["01", "10"]);
        assert!(m.weights().iter().all(|w| *w == q(1, 2)));
        assert_eq!(homogeneity(&m), Some(1));
    }

    #[test]
    fn product_rejects_degenerate_probabilities() {
        assert!(product(&[q(0, 1)]).is_err());
        assert!(product(&[q(1, 1)]).is_err());
        assert!(conditioned_sum(&[q(1, 2)], 2).is_err());
    }

    #[test]
    fn exact_weights_sum_to_one() {
        let m = product(&[q(3, 10), q(6, 10), q(8, 10)]).unwrap();
        assert_eq!(m.total_mass(), q(1, 1));
        for k in 0..=3 {
            let s = conditioned_sum(&[q(3, 10), q(6, 10), q(8, 10)], k).unwrap();
            assert_eq!(s.total_mass(), q(1, 1));
            assert_eq!(homogeneity(&s), Some(k));
        }
    }

    #[test]
    fn diagonal_l_ensemble_is_a_product() {
        let diag = [0.5, 2.0, 1.0, 3.5];
        let mut l = vec![vec![0.0; 4]; 4];
        for (i, d) in diag.iter().enumerate() {
            l[i][i] = *d;
        }
        let dpp = l_ensemble(&l).unwrap();
        let p: Vec<f64> = diag.iter().map(|d| d / (1.0 + d)).collect();
        let prod = product(&p).unwrap();
        assert_eq!(dpp.support(), prod.support());
        for (a, b) in dpp.weights().iter().zip(prod.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((dpp.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_l_ensemble_drops_null_states() {
        // rank one: only sets of size <= 1 have positive determinant
        let l = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let m = l_ensemble(&l).unwrap();
        let s: Vec<String> = m.states().map(|s| s.to_string()).collect();
        assert_eq!(s, ["00", "01", "10"]);
        assert!((m.weights()[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn indefinite_kernel_is_rejected() {
        let l = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(l_ensemble(&l), Err(Error::Validation(_))));
        let l = vec![vec![1.0, 0.5], vec![0.4, 1.0]];
        assert!(matches!(l_ensemble(&l), Err(Error::Validation(_))));
    }

    #[test]
    fn condition_examples() {
        let cube = product(&[q(1, 2), q(1, 2)]).unwrap();
        let c = condition(&cube, &BTreeMap::from([(1, true)])).unwrap();
        assert_eq!(c.coordinates, [0]);
        assert_eq!(states(&c.measure), ["0", "1"]);
        assert!(c.measure.weights().iter().all(|w| *w == q(1, 2)));

        let t = triangle();
        let c = condition(&t, &BTreeMap::from([(2, false)])).unwrap();
        assert_eq!(c.coordinates, [0, 1]);
        assert_eq!(states(&c.measure), ["11"]);
        assert_eq!(c.measure.weights(), [q(1, 1)]);

        let c = condition(&t, &BTreeMap::from([(2, true)])).unwrap();
        assert_eq!(states(&c.measure), ["01", "10"]);
        assert!(c.measure.weights().iter().all(|w| *w == q(1, 2)));
    }

    #[test]
    fn condition_on_null_event_reports_assignment() {
        let t = triangle();
        let err = condition(&t, &BTreeMap::from([(0, false), (1, false)])).unwrap_err();
        assert!(matches!(err, Error::Domain(ref s) if s.contains("x_0=0") && s.contains("x_1=0")));
    }

    #[test]
    fn homogeneity_examples() {
        assert_eq!(homogeneity(&triangle()), Some(2));
        let origin = BooleanMeasure::<Rational>::point_mass(BitVector::zeros(3).unwrap());
        assert_eq!(homogeneity(&origin), Some(0));
    }

    #[test]
    fn split_examples() {
        let slice = conditioned_sum(&[q(1, 2), q(1, 2)], 1).unwrap();
        let s = split(&slice, 0).unwrap();
        assert_eq!(s.masses, [q(1, 2), q(1, 2)]);
        assert_eq!(s.blocks[0].len(), 1);
        assert_eq!(s.blocks[1].len(), 1);

        let s = split(&triangle(), 2).unwrap();
        assert_eq!(s.masses, [q(1, 3), q(2, 3)]);
        assert_eq!(states(&s.blocks[0]), ["110"]);
        assert_eq!(states(&s.blocks[1]), ["011", "101"]);
        assert!(s.blocks[1].weights().iter().all(|w| *w == q(1, 2)));

        let coin = product(&[q(3, 10)]).unwrap();
        let s = split(&coin, 0).unwrap();
        assert_eq!(s.masses, [q(7, 10), q(3, 10)]);
    }

    #[test]
    fn split_with_empty_block_names_coordinate() {
        let err = split(&triangle(), 0).map(|_| ()).err();
        assert!(err.is_none());
        let m = BooleanMeasure::<Rational>::uniform(2, [0b10, 0b11]).unwrap();
        match split(&m, 0) {
            Err(Error::Split { coordinate: 0, empty_value: 0 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
