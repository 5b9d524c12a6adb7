//! Covering relation, stochastic covering couplings and the SCP check.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::lattice_measure::{bit, coord_mask, render_bits, split, BitVector, BooleanMeasure};
use crate::scalar::{self, Scalar};

/// Feasibility slack on total mass for floating-point flows.
pub const REAL_FEASIBILITY_TOL: f64 = 1e-10;

/// Default dimension ceiling for exhaustive SCP enumeration.
pub const DEFAULT_SCP_CEILING: usize = 10;

/// Default number of sampled triples.
pub const DEFAULT_SCP_SAMPLES: usize = 10_000;

/// `x ▷ y`: `x` equals `y` or is `y` with one coordinate raised.
pub fn covers(x: BitVector, y: BitVector) -> Result<bool> {
    if x.dimension() != y.dimension() {
        return Err(Error::Dimension {
            left: x.dimension(),
            right: y.dimension(),
        });
    }
    Ok(covers_bits(x.bits(), y.bits()))
}

#[inline]
pub fn covers_bits(x: u64, y: u64) -> bool {
    y & !x == 0 && (x & !y).count_ones() <= 1
}

#[inline]
pub fn is_flip(x: u64, y: u64) -> bool {
    (x ^ y).count_ones() == 1
}

#[inline]
pub fn is_swap(x: u64, y: u64) -> bool {
    (x & !y).count_ones() == 1 && (y & !x).count_ones() == 1
}

/// `x ∼ y`: the states differ by a flip or a swap.
#[inline]
pub fn adjacent_bits(x: u64, y: u64) -> bool {
    is_flip(x, y) || is_swap(x, y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Pairs `(x, y)` with `x ▷ y`.
    Covering,
    /// Pairs differing by a flip or a swap.
    Adjacency,
}

impl Relation {
    pub fn admits(self, x: u64, y: u64) -> bool {
        match self {
            Relation::Covering => covers_bits(x, y),
            Relation::Adjacency => adjacent_bits(x, y),
        }
    }
}

/// A joint law on `left × right` whose positive entries obey `relation`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling<S> {
    n: usize,
    left: Vec<u64>,
    right: Vec<u64>,
    mass: Vec<S>,
    relation: Relation,
}

impl<S: Scalar> Coupling<S> {
    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn left_support(&self) -> &[u64] {
        &self.left
    }

    pub fn right_support(&self) -> &[u64] {
        &self.right
    }

    pub fn relation(&self) -> Relation {
        self.relation
    }

    pub fn mass(&self, i: usize, j: usize) -> &S {
        &self.mass[i * self.right.len() + j]
    }

    /// Positive atoms as `(left index, right index, mass)`.
    pub fn atoms(&self) -> impl Iterator<Item = (usize, usize, &S)> + '_ {
        let cols = self.right.len();
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, w)| w.gt_zero())
            .map(move |(k, w)| (k / cols, k % cols, w))
    }

    /// Mass of the atom `(x, y)` given as states.
    pub fn mass_of(&self, x: u64, y: u64) -> S {
        match (self.left.binary_search(&x), self.right.binary_search(&y)) {
            (Ok(i), Ok(j)) => self.mass(i, j).clone(),
            _ => S::zero(),
        }
    }

    pub fn left_marginal(&self) -> Vec<S> {
        (0..self.left.len())
            .map(|i| scalar::sum((0..self.right.len()).map(|j| self.mass(i, j).clone())))
            .collect()
    }

    pub fn right_marginal(&self) -> Vec<S> {
        (0..self.right.len())
            .map(|j| scalar::sum((0..self.left.len()).map(|i| self.mass(i, j).clone())))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let (rows, cols) = (self.left.len(), self.right.len());
        let mass = (0..cols * rows)
            .map(|k| self.mass(k % rows, k / rows).clone())
            .collect();
        Self {
            n: self.n,
            left: self.right.clone(),
            right: self.left.clone(),
            mass,
            relation: self.relation,
        }
    }

    /// Checks marginals against the given laws (exactly for rationals, within
    /// `1e-10` for reals) and that every atom lies in the relation.
    pub fn verify(&self, left_law: &[S], right_law: &[S]) -> Result<()> {
        if left_law.len() != self.left.len() || right_law.len() != self.right.len() {
            return Err(Error::Validation("coupling marginals have the wrong length".into()));
        }
        let check = |side: &str, got: Vec<S>, want: &[S], states: &[u64]| -> Result<()> {
            for ((g, w), s) in got.iter().zip(want).zip(states) {
                if !g.approx_eq(w, REAL_FEASIBILITY_TOL) {
                    return Err(Error::Validation(format!(
                        "{side} marginal at {} is {} instead of {}",
                        render_bits(self.n, *s),
                        g.render(),
                        w.render()
                    )));
                }
            }
            Ok(())
        };
        check("left", self.left_marginal(), left_law, &self.left)?;
        check("right", self.right_marginal(), right_law, &self.right)?;
        for (i, j, w) in self.atoms() {
            if w.lt_zero() || !self.relation.admits(self.left[i], self.right[j]) {
                return Err(Error::Validation(format!(
                    "atom ({}, {}) is outside the {:?} relation",
                    render_bits(self.n, self.left[i]),
                    render_bits(self.n, self.right[j]),
                    self.relation
                )));
            }
        }
        Ok(())
    }
}

#[derive(Serialize)]
pub struct CouplingAtom {
    pub x: String,
    pub y: String,
    pub mass: serde_json::Value,
}

#[derive(Serialize)]
pub struct CouplingView {
    pub relation: Relation,
    pub atoms: Vec<CouplingAtom>,
}

impl<S: Scalar> From<&Coupling<S>> for CouplingView {
    fn from(c: &Coupling<S>) -> Self {
        CouplingView {
            relation: c.relation,
            atoms: c
                .atoms()
                .map(|(i, j, w)| CouplingAtom {
                    x: render_bits(c.n, c.left[i]),
                    y: render_bits(c.n, c.right[j]),
                    mass: w.to_json(),
                })
                .collect(),
        }
    }
}

/// Why a covering coupling does not exist: a set of left states whose mass
/// exceeds the mass of everything they can cover.
#[derive(Clone, Debug, PartialEq)]
pub struct HallViolation<S> {
    pub n: usize,
    pub left_states: Vec<u64>,
    pub left_mass: S,
    pub reachable_states: Vec<u64>,
    pub reachable_mass: S,
    pub max_flow: S,
}

impl<S: Scalar> fmt::Display for HallViolation<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: &[u64]| {
            v.iter()
                .map(|b| render_bits(self.n, *b))
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(
            f,
            "max flow {} < 1: states {{{}}} carry mass {} but only cover {{{}}} of mass {}",
            self.max_flow.render(),
            show(&self.left_states),
            self.left_mass.render(),
            show(&self.reachable_states),
            self.reachable_mass.render()
        )
    }
}

/// Solves the transportation problem between `mu` and `nu` restricted to
/// covering pairs. Both sides list `(state, mass)` sorted by state.
fn cover_flow<S: Scalar>(
    n: usize,
    mu: &[(u64, S)],
    nu: &[(u64, S)],
) -> std::result::Result<Vec<S>, HallViolation<S>> {
    let (l, r) = (mu.len(), nu.len());
    let (source, sink) = (0, l + r + 1);
    let mut net = FlowNetwork::new(l + r + 2);
    for (i, (_, w)) in mu.iter().enumerate() {
        net.add_edge(source, 1 + i, w.clone());
    }
    // middle arcs exceed any cut through the source/sink arcs
    let unbounded = S::from_count(2);
    let mut middle = Vec::new();
    for (i, (x, _)) in mu.iter().enumerate() {
        for (j, (y, _)) in nu.iter().enumerate() {
            if covers_bits(*x, *y) {
                middle.push((i, j, net.add_edge(1 + i, 1 + l + j, unbounded.clone())));
            }
        }
    }
    for (j, (_, w)) in nu.iter().enumerate() {
        net.add_edge(1 + l + j, sink, w.clone());
    }
    let flow = net.max_flow(source, sink);
    let total = scalar::sum(mu.iter().map(|(_, w)| w.clone()));
    let nu_total = scalar::sum(nu.iter().map(|(_, w)| w.clone()));
    let target = S::min_of(&total, &nu_total);
    if !flow.approx_eq(&target, REAL_FEASIBILITY_TOL) || !total.approx_eq(&nu_total, REAL_FEASIBILITY_TOL) {
        let reach = net.residual_reachable(source);
        let left: Vec<usize> = (0..l).filter(|&i| reach[1 + i]).collect();
        let right: Vec<usize> = (0..r).filter(|&j| reach[1 + l + j]).collect();
        return Err(HallViolation {
            n,
            left_states: left.iter().map(|&i| mu[i].0).collect(),
            left_mass: scalar::sum(left.iter().map(|&i| mu[i].1.clone())),
            reachable_states: right.iter().map(|&j| nu[j].0).collect(),
            reachable_mass: scalar::sum(right.iter().map(|&j| nu[j].1.clone())),
            max_flow: flow,
        });
    }
    let mut mass = vec![S::zero(); l * r];
    for (i, j, e) in middle {
        let f = net.flow(e);
        if f.gt_zero() && !f.is_negligible() {
            mass[i * r + j] = f;
        }
    }
    Ok(mass)
}

/// A coupling of `(mu, nu)` carried by `{x ▷ y}` if one exists.
pub fn stochastic_cover_coupling<S: Scalar>(
    mu: &BooleanMeasure<S>,
    nu: &BooleanMeasure<S>,
) -> Result<Option<Coupling<S>>> {
    if mu.dimension() != nu.dimension() {
        return Err(Error::Dimension {
            left: mu.dimension(),
            right: nu.dimension(),
        });
    }
    let side = |m: &BooleanMeasure<S>| -> Vec<(u64, S)> {
        m.support().iter().copied().zip(m.weights().iter().cloned()).collect()
    };
    Ok(cover_flow(mu.dimension(), &side(mu), &side(nu)).ok().map(|mass| Coupling {
        n: mu.dimension(),
        left: mu.support().to_vec(),
        right: nu.support().to_vec(),
        mass,
        relation: Relation::Covering,
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScpMode {
    Full,
    Sampled { seed: u64, count: usize },
}

#[derive(Clone, Debug)]
pub struct ScpOptions {
    pub mode: ScpMode,
    pub ceiling: usize,
    pub keep_couplings: bool,
}

impl Default for ScpOptions {
    fn default() -> Self {
        Self {
            mode: ScpMode::Full,
            ceiling: DEFAULT_SCP_CEILING,
            keep_couplings: false,
        }
    }
}

/// A failing triple `(S, x, y)`: `x ▷ y` on `S`, yet `π(·|X_S = y)` does not
/// cover `π(·|X_S = x)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScpWitness {
    /// Conditioned coordinates (0-based), ascending.
    pub subset: Vec<usize>,
    /// Bit-strings over `subset`, in subset order.
    pub x: String,
    pub y: String,
    pub explanation: String,
}

#[derive(Serialize)]
pub struct StoredCoupling {
    pub subset: Vec<usize>,
    pub x: String,
    pub y: String,
    pub coupling: CouplingView,
}

#[derive(Serialize)]
pub struct ScpReport {
    pub holds: bool,
    pub checked_triples: usize,
    pub mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub witness: Option<ScpWitness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<StoredCoupling>>,
}

#[derive(Clone, Copy, Debug)]
struct Triple {
    subset: u64,
    y: u64,
    raised: u64,
}

/// Conditional law given `X_S = value`, as `(state with S cleared, mass)`.
fn conditional<S: Scalar>(m: &BooleanMeasure<S>, subset: u64, value: u64) -> Vec<(u64, S)> {
    let mut entries: Vec<(u64, S)> = m
        .support()
        .iter()
        .zip(m.weights())
        .filter(|(b, _)| *b & subset == value)
        .map(|(b, w)| (b & !subset, w.clone()))
        .collect();
    let total = scalar::sum(entries.iter().map(|(_, w)| w.clone()));
    for e in &mut entries {
        e.1 = e.1.clone() / total.clone();
    }
    entries.sort_by_key(|(b, _)| *b);
    entries
}

fn subset_coordinates(n: usize, subset: u64) -> Vec<usize> {
    (0..n).filter(|&i| bit(n, subset, i)).collect()
}

/// Subsets of `[n]` in order of size, then lexicographically by coordinate list.
fn ordered_subsets(n: usize) -> Vec<u64> {
    let mut subsets: Vec<u64> = (0..1u64 << n).collect();
    subsets.sort_by_cached_key(|&s| (s.count_ones(), subset_coordinates(n, s)));
    subsets
}

/// Triples on `subset` in ascending `(y, raised coordinate)` order, `y`
/// enumerated as a bit-string over the subset.
fn triples_on(n: usize, subset: u64) -> Vec<Triple> {
    let coords = subset_coordinates(n, subset);
    let k = coords.len();
    let mut out = Vec::new();
    for code in 0..1u64 << k {
        let y = expand(n, &coords, code);
        for &c in &coords {
            let raised = coord_mask(n, c);
            if y & raised == 0 {
                out.push(Triple { subset, y, raised });
            }
        }
    }
    out
}

fn expand(n: usize, coords: &[usize], code: u64) -> u64 {
    let k = coords.len();
    coords.iter().enumerate().fold(0, |acc, (j, &i)| {
        if code & coord_mask(k, j) != 0 {
            acc | coord_mask(n, i)
        } else {
            acc
        }
    })
}

struct TripleOutcome<S> {
    witness: Option<ScpWitness>,
    coupling: Option<Coupling<S>>,
}

fn evaluate_triple<S: Scalar>(m: &BooleanMeasure<S>, t: Triple, keep: bool) -> Option<TripleOutcome<S>> {
    let n = m.dimension();
    let x = t.y | t.raised;
    let (py, px) = (
        m.mass_where(|b| b & t.subset == t.y),
        m.mass_where(|b| b & t.subset == x),
    );
    if !py.gt_zero() || !px.gt_zero() {
        return None;
    }
    let given_y = conditional(m, t.subset, t.y);
    let given_x = conditional(m, t.subset, x);
    let coords = subset_coordinates(n, t.subset);
    let render = |v: u64| -> String {
        coords.iter().map(|&i| if bit(n, v, i) { '1' } else { '0' }).collect()
    };
    Some(match cover_flow(n, &given_y, &given_x) {
        Ok(mass) => TripleOutcome {
            witness: None,
            coupling: keep.then(|| Coupling {
                n,
                left: given_y.iter().map(|(b, _)| *b).collect(),
                right: given_x.iter().map(|(b, _)| *b).collect(),
                mass,
                relation: Relation::Covering,
            }),
        },
        Err(violation) => TripleOutcome {
            witness: Some(ScpWitness {
                subset: coords.clone(),
                x: render(x),
                y: render(t.y),
                explanation: violation.to_string(),
            }),
            coupling: None,
        },
    })
}

/// Checks the stochastic covering property exhaustively or on sampled triples.
pub fn check_scp<S: Scalar>(m: &BooleanMeasure<S>, options: &ScpOptions) -> Result<ScpReport> {
    let n = m.dimension();
    let triples: Vec<Triple> = match options.mode {
        ScpMode::Full => {
            if n > options.ceiling {
                return Err(Error::Ceiling {
                    n,
                    ceiling: options.ceiling,
                });
            }
            ordered_subsets(n)
                .into_iter()
                .flat_map(|s| triples_on(n, s))
                .collect()
        }
        ScpMode::Sampled { seed, count } => sample_triples(m, seed, count),
    };
    let outcomes: Vec<Option<TripleOutcome<S>>> = triples
        .par_iter()
        .map(|&t| evaluate_triple(m, t, options.keep_couplings))
        .collect();
    let mut checked = 0;
    let mut witness = None;
    let mut stored = Vec::new();
    for (t, outcome) in triples.iter().zip(outcomes) {
        let Some(outcome) = outcome else { continue };
        checked += 1;
        if witness.is_none() {
            witness = outcome.witness;
        }
        if let Some(c) = outcome.coupling {
            let coords = subset_coordinates(n, t.subset);
            let render = |v: u64| -> String {
                coords.iter().map(|&i| if bit(n, v, i) { '1' } else { '0' }).collect()
            };
            stored.push(StoredCoupling {
                subset: coords.clone(),
                x: render(t.y | t.raised),
                y: render(t.y),
                coupling: CouplingView::from(&c),
            });
        }
    }
    let (mode, seed) = match options.mode {
        ScpMode::Full => ("full", None),
        ScpMode::Sampled { seed, .. } => ("sampled", Some(seed)),
    };
    Ok(ScpReport {
        holds: witness.is_none(),
        checked_triples: checked,
        mode,
        seed,
        witness,
        couplings: options.keep_couplings.then_some(stored),
    })
}

/// Draws triples uniformly from `{(S, y, i) : i ∈ S, y_i = 0}` with both
/// conditioning events of positive probability.
fn sample_triples<S: Scalar>(m: &BooleanMeasure<S>, seed: u64, count: usize) -> Vec<Triple> {
    let n = m.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let budget = count.saturating_mul(1000).max(1000);
    while out.len() < count && attempts < budget {
        attempts += 1;
        // per coordinate: outside S, in S with value 0, in S with value 1
        let (mut subset, mut y) = (0u64, 0u64);
        for i in 0..n {
            match rng.random_range(0..3u8) {
                0 => {}
                1 => subset |= coord_mask(n, i),
                _ => {
                    subset |= coord_mask(n, i);
                    y |= coord_mask(n, i);
                }
            }
        }
        let raised = coord_mask(n, rng.random_range(0..n));
        if subset & raised == 0 || y & raised != 0 {
            continue;
        }
        let x = y | raised;
        let positive = |v: u64| m.support().iter().any(|b| b & subset == v);
        if positive(y) && positive(x) {
            out.push(Triple { subset, y, raised });
        }
    }
    out
}

/// The coupling of the two blocks along coordinate `coordinate`: a coupling
/// of `π_0` and `π_1` (full states) carried by flip/swap pairs, obtained from
/// the covering coupling of the conditionals on the other coordinates.
pub fn flip_swap_coupling<S: Scalar>(m: &BooleanMeasure<S>, coordinate: usize) -> Result<Coupling<S>> {
    let n = m.dimension();
    let parts = split(m, coordinate)?;
    let c = coord_mask(n, coordinate);
    let side = |b: &BooleanMeasure<S>| -> Vec<(u64, S)> {
        b.support().iter().map(|s| s & !c).zip(b.weights().iter().cloned()).collect()
    };
    let (mu, nu) = (side(&parts.blocks[0]), side(&parts.blocks[1]));
    let mass = cover_flow(n, &mu, &nu).map_err(|v| {
        Error::ScpViolation(format!(
            "blocks of coordinate {coordinate} cannot be coupled by a covering coupling: {v}"
        ))
    })?;
    let coupling = Coupling {
        n,
        left: parts.blocks[0].support().to_vec(),
        right: parts.blocks[1].support().to_vec(),
        mass,
        relation: Relation::Adjacency,
    };
    debug_assert!(coupling
        .verify(parts.blocks[0].weights(), parts.blocks[1].weights())
        .is_ok());
    Ok(coupling)
}

/// Conditional law of the free coordinates given `X_S = value`, keyed by the
/// assignment; exposed for diagnostics.
pub fn conditional_law<S: Scalar>(
    m: &BooleanMeasure<S>,
    assignment: &BTreeMap<usize, bool>,
) -> Vec<(u64, S)> {
    let (mask, value) = crate::lattice_measure::assignment_masks(m.dimension(), assignment);
    conditional(m, mask, value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_measure::{conditioned_sum, product, spanning_tree};
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn bv(s: &str) -> BitVector {
        BitVector::parse(s).unwrap()
    }

    #[test]
    fn covers_examples() {
        assert!(covers(bv("100"), bv("000")).unwrap());
        assert!(!covers(bv("110"), bv("000")).unwrap());
        assert!(covers(bv("011"), bv("011")).unwrap());
        assert!(!covers(bv("000"), bv("100")).unwrap());
        assert!(matches!(covers(bv("10"), bv("100")), Err(Error::Dimension { .. })));
    }

    #[test]
    fn point_masses_cover() {
        let one = BooleanMeasure::<Rational>::point_mass(bv("1"));
        let zero = BooleanMeasure::<Rational>::point_mass(bv("0"));
        let c = stochastic_cover_coupling(&one, &zero).unwrap().unwrap();
        let atoms: Vec<_> = c.atoms().collect();
        assert_eq!(atoms, [(0, 0, &q(1, 1))]);
        assert!(stochastic_cover_coupling(&zero, &one).unwrap().is_none());
    }

    #[test]
    fn bernoulli_covering_follows_the_means() {
        let low = product(&[q(1, 5)]).unwrap();
        let high = product(&[q(4, 5)]).unwrap();
        assert!(stochastic_cover_coupling(&low, &high).unwrap().is_none());
        let c = stochastic_cover_coupling(&high, &low).unwrap().unwrap();
        assert_eq!(c.mass_of(1, 1), q(1, 5));
        assert_eq!(c.mass_of(1, 0), q(3, 5));
        assert_eq!(c.mass_of(0, 0), q(1, 5));
        assert_eq!(c.mass_of(0, 1), q(0, 1));
        c.verify(high.weights(), low.weights()).unwrap();
    }

    #[test]
    fn scp_holds_for_the_fair_square() {
        let m = product(&[q(1, 2), q(1, 2)]).unwrap();
        let r = check_scp(&m, &ScpOptions::default()).unwrap();
        assert!(r.holds);
        // S = {0}: y = 0 raised at 0; S = {1}: same; S = {0,1}: 4 triples
        assert_eq!(r.checked_triples, 6);
    }

    #[test]
    fn positively_correlated_pair_fails_with_the_expected_witness() {
        let m = BooleanMeasure::new(
            2,
            vec![(0b00, q(2, 5)), (0b01, q(1, 10)), (0b10, q(1, 10)), (0b11, q(2, 5))],
        )
        .unwrap();
        let r = check_scp(&m, &ScpOptions::default()).unwrap();
        assert!(!r.holds);
        let w = r.witness.unwrap();
        assert_eq!(w.subset, [0]);
        assert_eq!((w.x.as_str(), w.y.as_str()), ("1", "0"));
    }

    #[test]
    fn triangle_trees_have_scp() {
        let t = spanning_tree::<Rational>(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert!(check_scp(&t, &ScpOptions::default()).unwrap().holds);
    }

    #[test]
    fn ceiling_refuses_full_mode() {
        let m = product(&vec![q(1, 2); 4]).unwrap();
        let opts = ScpOptions {
            ceiling: 3,
            ..ScpOptions::default()
        };
        assert!(matches!(check_scp(&m, &opts), Err(Error::Ceiling { n: 4, ceiling: 3 })));
    }

    #[test]
    fn sampled_mode_is_reproducible() {
        let m = conditioned_sum(&[q(1, 3), q(1, 2), q(2, 3), q(1, 4)], 2).unwrap();
        let opts = ScpOptions {
            mode: ScpMode::Sampled { seed: 7, count: 200 },
            ..ScpOptions::default()
        };
        let a = check_scp(&m, &opts).unwrap();
        let b = check_scp(&m, &opts).unwrap();
        assert!(a.holds && b.holds);
        assert_eq!(a.checked_triples, 200);
        assert_eq!(a.seed, Some(7));
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn sampled_mode_finds_the_bad_pair() {
        let m = BooleanMeasure::new(
            2,
            vec![(0b00, q(2, 5)), (0b01, q(1, 10)), (0b10, q(1, 10)), (0b11, q(2, 5))],
        )
        .unwrap();
        let opts = ScpOptions {
            mode: ScpMode::Sampled { seed: 0, count: 50 },
            ..ScpOptions::default()
        };
        assert!(!check_scp(&m, &opts).unwrap().holds);
    }

    #[test]
    fn flip_swap_coupling_examples() {
        let slice = conditioned_sum(&[q(1, 2), q(1, 2)], 1).unwrap();
        let k = flip_swap_coupling(&slice, 0).unwrap();
        assert_eq!(k.mass_of(0b01, 0b10), q(1, 1));

        let t = spanning_tree::<Rational>(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let k = flip_swap_coupling(&t, 2).unwrap();
        assert_eq!(k.mass_of(0b110, 0b101), q(1, 2));
        assert_eq!(k.mass_of(0b110, 0b011), q(1, 2));
        assert!(k.atoms().all(|(i, j, _)| is_swap(k.left_support()[i], k.right_support()[j])));

        let sq = product(&[q(1, 2), q(1, 2)]).unwrap();
        let k = flip_swap_coupling(&sq, 1).unwrap();
        assert_eq!(k.mass_of(0b00, 0b01), q(1, 2));
        assert_eq!(k.mass_of(0b10, 0b11), q(1, 2));
        assert_eq!(k.atoms().count(), 2);
    }

    #[test]
    fn flip_swap_coupling_fails_without_scp() {
        let m = BooleanMeasure::new(
            2,
            vec![(0b00, q(2, 5)), (0b01, q(1, 10)), (0b10, q(1, 10)), (0b11, q(2, 5))],
        )
        .unwrap();
        assert!(matches!(flip_swap_coupling(&m, 0), Err(Error::ScpViolation(_))));
        let point = BooleanMeasure::<Rational>::point_mass(bv("10"));
        assert!(matches!(flip_swap_coupling(&point, 0), Err(Error::Split { .. })));
    }

    #[test]
    fn transpose_swaps_marginals() {
        let t = spanning_tree::<Rational>(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let k = flip_swap_coupling(&t, 2).unwrap();
        let kt = k.transpose();
        assert_eq!(kt.left_marginal(), k.right_marginal());
        assert_eq!(kt.mass_of(0b101, 0b110), q(1, 2));
    }
}
