//! Projection / restriction decompositions, coupling quality `χ`, recursive
//! certificates for generators of SCP measures, and the flip-swap walk
//! synthesis.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::chain::{validate, Generator, GeneratorView};
use crate::error::{Error, Result};
use crate::functional::{relative_gap, Edges, FormKind, Observable};
use crate::lattice_measure::{coord_mask, homogeneity, render_bits, split, BooleanMeasure};
use crate::negdep::{check_scp, flip_swap_coupling, Coupling, CouplingView, ScpMode, ScpOptions};
use crate::scalar::{self, serde_scalar, Scalar};

/// Slack for real-valued certificate comparisons.
pub const REAL_CHECK_TOL: f64 = 1e-12;

/// A coupling between two blocks, indexed by parent support positions.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockCoupling<S> {
    /// `(x, y, κ(x, y))` with `x` in the first block and `y` in the second.
    pub atoms: Vec<(usize, usize, S)>,
}

impl<S: Scalar> BlockCoupling<S> {
    pub fn transpose(&self) -> Self {
        Self {
            atoms: self.atoms.iter().map(|(x, y, w)| (*y, *x, w.clone())).collect(),
        }
    }

    /// Re-indexes a state-level coupling onto the support of `m`.
    pub fn from_coupling(m: &BooleanMeasure<S>, c: &Coupling<S>) -> Result<Self> {
        let locate = |s: u64| {
            m.index_of(s).ok_or_else(|| {
                Error::Validation(format!(
                    "coupled state {} is outside the support",
                    render_bits(m.dimension(), s)
                ))
            })
        };
        let atoms = c
            .atoms()
            .map(|(i, j, w)| Ok((locate(c.left_support()[i])?, locate(c.right_support()[j])?, w.clone())))
            .collect::<Result<_>>()?;
        Ok(Self { atoms })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition<S> {
    /// Support indices of each block, ascending.
    pub partition: Vec<Vec<usize>>,
    /// `π̄(i)`.
    pub masses: Vec<S>,
    /// Projection chain on block labels; block `i` is the state with mask `i`.
    pub projection: Generator<S>,
    /// Restriction chains, each on its own block.
    pub restrictions: Vec<Generator<S>>,
    pub couplings: BTreeMap<(usize, usize), BlockCoupling<S>>,
    parent: Generator<S>,
}

fn label_dimension(blocks: usize) -> usize {
    let mut n = 1;
    while (1usize << n) < blocks {
        n += 1;
    }
    n
}

pub fn project_restrict<S: Scalar>(q: &Generator<S>, partition: &[Vec<usize>]) -> Result<Decomposition<S>> {
    let size = q.size();
    let mut owner = vec![usize::MAX; size];
    for (b, block) in partition.iter().enumerate() {
        if block.is_empty() {
            return Err(Error::Construction(format!("block {b} of the partition is empty")));
        }
        for &x in block {
            if x >= size {
                return Err(Error::Construction(format!("partition index {x} outside the support")));
            }
            if owner[x] != usize::MAX {
                return Err(Error::Construction(format!("state index {x} lies in two blocks")));
            }
            owner[x] = b;
        }
    }
    if let Some(x) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(Error::Construction(format!("state index {x} lies in no block")));
    }
    let mut partition: Vec<Vec<usize>> = partition.to_vec();
    partition.iter_mut().for_each(|b| b.sort_unstable());
    let blocks = partition.len();
    let m = q.measure();
    let masses: Vec<S> = partition
        .iter()
        .map(|b| scalar::sum(b.iter().map(|&x| m.weight(x).clone())))
        .collect();

    let mut flow = vec![S::zero(); blocks * blocks];
    for (x, y, r) in q.transitions() {
        let (i, j) = (owner[x], owner[y]);
        if i != j {
            flow[i * blocks + j] = flow[i * blocks + j].clone() + m.weight(x).clone() * r.clone();
        }
    }
    let labels = BooleanMeasure::new(
        label_dimension(blocks),
        masses.iter().enumerate().map(|(i, w)| (i as u64, w.clone())).collect(),
    )?;
    let projected = (0..blocks * blocks)
        .map(|k| flow[k].clone() / masses[k / blocks].clone())
        .collect();
    let projection = Generator::from_off_diagonal(labels, projected)?;

    let restrictions = partition
        .iter()
        .map(|block| {
            let law = m.restrict(block)?;
            let rates = block
                .iter()
                .flat_map(|&x| block.iter().map(move |&y| (x, y)))
                .map(|(x, y)| if x == y { S::zero() } else { q.rate(x, y).clone() })
                .collect();
            Generator::from_off_diagonal(law, rates)
        })
        .collect::<Result<_>>()?;

    Ok(Decomposition {
        partition,
        masses,
        projection,
        restrictions,
        couplings: BTreeMap::new(),
        parent: q.clone(),
    })
}

impl<S: Scalar> Decomposition<S> {
    pub fn parent(&self) -> &Generator<S> {
        &self.parent
    }

    pub fn blocks(&self) -> usize {
        self.partition.len()
    }

    /// `Q̄(i, j)`.
    pub fn projected_rate(&self, i: usize, j: usize) -> &S {
        self.projection.rate(i, j)
    }

    /// Installs `κ` for `(i, j)` and its transpose for `(j, i)` after checking
    /// that its marginals are `π_i` and `π_j`.
    pub fn set_coupling(&mut self, i: usize, j: usize, kappa: BlockCoupling<S>) -> Result<()> {
        let m = self.parent.measure();
        let mut left = vec![S::zero(); self.partition[i].len()];
        let mut right = vec![S::zero(); self.partition[j].len()];
        for (x, y, w) in &kappa.atoms {
            let (Ok(a), Ok(b)) = (self.partition[i].binary_search(x), self.partition[j].binary_search(y)) else {
                return Err(Error::Validation(format!("coupling atom ({x}, {y}) is not in blocks ({i}, {j})")));
            };
            left[a] = left[a].clone() + w.clone();
            right[b] = right[b].clone() + w.clone();
        }
        for (side, block, got) in [(i, &self.partition[i], &left), (j, &self.partition[j], &right)] {
            for (x, g) in block.iter().zip(got) {
                let want = m.weight(*x).clone() / self.masses[side].clone();
                if !g.approx_eq(&want, 1e-10) {
                    return Err(Error::Validation(format!(
                        "coupling marginal on block {side} at {} is {} instead of {}",
                        render_bits(m.dimension(), m.support()[*x]),
                        g.render(),
                        want.render()
                    )));
                }
            }
        }
        self.couplings.insert((j, i), kappa.transpose());
        self.couplings.insert((i, j), kappa);
        Ok(())
    }
}

/// Two-block decomposition on coordinate `ell` (block `v` holds `x_ell = v`),
/// coupled by the flip/swap coupling the SCP provides.
pub fn split_decomposition<S: Scalar>(q: &Generator<S>, ell: usize) -> Result<Decomposition<S>> {
    let kappa = flip_swap_coupling(q.measure(), ell)?;
    split_decomposition_with(q, ell, &kappa)
}

/// As [`split_decomposition`], with a caller-supplied coupling of the blocks.
pub fn split_decomposition_with<S: Scalar>(
    q: &Generator<S>,
    ell: usize,
    kappa: &Coupling<S>,
) -> Result<Decomposition<S>> {
    let parts = split(q.measure(), ell)?;
    let [zeros, ones] = parts.indices;
    let mut d = project_restrict(q, &[zeros, ones])?;
    d.set_coupling(0, 1, BlockCoupling::from_coupling(q.measure(), kappa)?)?;
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairChi<S: Scalar> {
    pub blocks: (usize, usize),
    /// Smallest ratio over the pair's coupled atoms.
    #[serde(serialize_with = "serde_scalar::one")]
    pub chi: S,
    /// Smallest crude lower bound `max{Q(x,y)/Q̄(i,j), Q(y,x)/Q̄(j,i)}` over the atoms.
    #[serde(serialize_with = "serde_scalar::one")]
    pub crude_floor: S,
    /// Every atom's ratio dominates its own crude bound.
    pub crude_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiReport<S: Scalar> {
    /// `None` when no pair has `Q̄(i,j) > 0`.
    #[serde(serialize_with = "serde_scalar::opt")]
    pub chi: Option<S>,
    pub pairs: Vec<PairChi<S>>,
    /// Some coupled atom has `Q(x, y) = 0`, forcing `χ = 0`.
    pub zero: bool,
}

pub fn chi<S: Scalar>(d: &Decomposition<S>) -> Result<ChiReport<S>> {
    let q = &d.parent;
    let m = q.measure();
    let mut pairs = Vec::new();
    let mut zero = false;
    for i in 0..d.blocks() {
        for j in 0..d.blocks() {
            if i == j || !d.projected_rate(i, j).gt_zero() {
                continue;
            }
            let kappa = d
                .couplings
                .get(&(i, j))
                .ok_or_else(|| Error::Precondition(format!("no coupling for blocks ({i}, {j})")))?;
            let flow = d.masses[i].clone() * d.projected_rate(i, j).clone();
            let mut best: Option<(S, S)> = None;
            let mut crude_holds = true;
            for (x, y, w) in &kappa.atoms {
                if !w.gt_zero() {
                    continue;
                }
                let ratio = m.weight(*x).clone() * q.rate(*x, *y).clone() / (flow.clone() * w.clone());
                let crude = S::max_of(
                    &(q.rate(*x, *y).clone() / d.projected_rate(i, j).clone()),
                    &(q.rate(*y, *x).clone() / d.projected_rate(j, i).clone()),
                );
                zero |= ratio.is_zero();
                crude_holds &= crude.approx_le(&ratio, REAL_CHECK_TOL);
                best = Some(match best {
                    Some((c, f)) => (S::min_of(&c, &ratio), S::min_of(&f, &crude)),
                    None => (ratio, crude),
                });
            }
            let (chi, crude_floor) =
                best.ok_or_else(|| Error::Validation(format!("coupling for blocks ({i}, {j}) is empty")))?;
            pairs.push(PairChi {
                blocks: (i, j),
                chi,
                crude_floor,
                crude_holds,
            });
        }
    }
    let chi = pairs.iter().map(|p| p.chi.clone()).reduce(|a, b| S::min_of(&a, &b));
    Ok(ChiReport { chi, pairs, zero })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    /// `[lhs, rhs]` of the variance and entropy decompositions.
    pub variance: [f64; 2],
    pub entropy: [f64; 2],
    /// `[lhs, rhs]` of the local-form decomposition for each kind.
    pub local: BTreeMap<&'static str, [f64; 2]>,
    /// Cross-block part of each local form.
    pub cross: BTreeMap<&'static str, f64>,
    pub max_residual: f64,
}

fn block_values(d: &Decomposition<impl Scalar>, block: usize, f: &[f64]) -> Vec<f64> {
    d.partition[block].iter().map(|&x| f[x]).collect()
}

/// Block means `f̄(i) = E_{π_i} f`.
pub fn projected_observable<S: Scalar>(d: &Decomposition<S>, f: &Observable) -> Vec<f64> {
    (0..d.blocks())
        .map(|b| {
            let e = Edges::new(&d.restrictions[b]);
            e.mean(&block_values(d, b, f.values()))
        })
        .collect()
}

pub fn identity_check<S: Scalar>(d: &Decomposition<S>, f: &Observable) -> Result<IdentityReport> {
    if f.len() != d.parent.size() {
        return Err(Error::Dimension {
            left: f.len(),
            right: d.parent.size(),
        });
    }
    if !f.is_positive() {
        return Err(Error::Domain("identity check needs a positive observable".into()));
    }
    let v = f.values();
    let whole = Edges::new(&d.parent);
    let parts: Vec<Edges> = d.restrictions.iter().map(Edges::new).collect();
    let proj = Edges::new(&d.projection);
    let masses: Vec<f64> = d.masses.iter().map(Scalar::as_f64).collect();
    let fbar = projected_observable(d, f);
    let local_f: Vec<Vec<f64>> = (0..d.blocks()).map(|b| block_values(d, b, v)).collect();

    let mut owner = vec![0; v.len()];
    for (b, block) in d.partition.iter().enumerate() {
        block.iter().for_each(|&x| owner[x] = b);
    }

    let decompose = |global: fn(&Edges, &[f64]) -> f64| -> [f64; 2] {
        let inner: f64 = (0..d.blocks()).map(|b| masses[b] * global(&parts[b], &local_f[b])).sum();
        [global(&whole, v), inner + global(&proj, &fbar)]
    };
    let variance = decompose(Edges::variance);
    let entropy = decompose(Edges::entropy);

    let mut local = BTreeMap::new();
    let mut cross = BTreeMap::new();
    for kind in FormKind::ALL {
        let across: f64 = whole
            .edges
            .iter()
            .filter(|(x, y, _)| owner[*x] != owner[*y])
            .map(|&(x, y, w)| w * kind.psi(v[x], v[y]))
            .sum();
        let inner: f64 = (0..d.blocks()).map(|b| masses[b] * parts[b].local(kind, &local_f[b])).sum();
        local.insert(kind.name(), [whole.local(kind, v), inner + across]);
        cross.insert(kind.name(), across);
    }
    let max_residual = [variance, entropy]
        .iter()
        .chain(local.values())
        .map(|[a, b]| relative_gap(*a, *b))
        .fold(0.0, f64::max);
    Ok(IdentityReport {
        variance,
        entropy,
        local,
        cross,
        max_residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JensenCheck {
    pub blocks: (usize, usize),
    pub kind: FormKind,
    /// `Σ κ(x,y) Ψ(f(x), f(y))`.
    pub averaged: f64,
    /// `Ψ(f̄(i), f̄(j))`.
    pub projected: f64,
    pub holds: bool,
}

/// The convexity step: for each coupled pair and kind, the `κ`-average of `Ψ`
/// dominates `Ψ` at the block means.
pub fn jensen_check<S: Scalar>(d: &Decomposition<S>, f: &Observable) -> Result<Vec<JensenCheck>> {
    if !f.is_positive() {
        return Err(Error::Domain("Jensen check needs a positive observable".into()));
    }
    let v = f.values();
    let fbar = projected_observable(d, f);
    let mut out = Vec::new();
    for (&(i, j), kappa) in &d.couplings {
        for kind in FormKind::ALL {
            let averaged: f64 = kappa
                .atoms
                .iter()
                .map(|(x, y, w)| w.as_f64() * kind.psi(v[*x], v[*y]))
                .sum();
            let projected = kind.psi(fbar[i], fbar[j]);
            out.push(JensenCheck {
                blocks: (i, j),
                kind,
                averaged,
                projected,
                holds: projected <= averaged + 1e-12 * averaged.abs().max(projected.abs()),
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Lambda,
    Alpha,
    Rho,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Lambda => "lambda",
            Target::Alpha => "alpha",
            Target::Rho => "rho",
        }
    }

    pub fn kind(self) -> FormKind {
        match self {
            Target::Lambda => FormKind::Poincare,
            Target::Alpha => FormKind::Mlsi,
            Target::Rho => FormKind::Lsi,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lambda" | "poincare" | "pi" => Ok(Target::Lambda),
            "alpha" | "mlsi" => Ok(Target::Alpha),
            "rho" | "lsi" => Ok(Target::Rho),
            other => Err(Error::Parse(format!("unknown target {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct CertifyOptions {
    /// Re-run the SCP check on every restricted measure.
    pub paranoid: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeCheck {
    pub name: &'static str,
    pub lhs: serde_json::Value,
    pub rhs: serde_json::Value,
    pub pass: bool,
}

fn node_check<S: Scalar>(name: &'static str, lhs: &S, rhs: &S) -> NodeCheck {
    NodeCheck {
        name,
        lhs: lhs.to_json(),
        rhs: rhs.to_json(),
        pass: rhs.approx_le(lhs, REAL_CHECK_TOL),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CertificateNode {
    Leaf {
        state: String,
    },
    Split {
        coordinate: usize,
        support: Vec<String>,
        chi: serde_json::Value,
        a: serde_json::Value,
        b: serde_json::Value,
        two_state: serde_json::Value,
        #[serde(rename = "M")]
        big_m: serde_json::Value,
        m: serde_json::Value,
        /// `χ` times the two-state floor for the target.
        local_bound: serde_json::Value,
        /// `min{local_bound, children}`.
        node_bound: serde_json::Value,
        checks: Vec<NodeCheck>,
        children: Vec<CertificateNode>,
    },
}

impl CertificateNode {
    pub fn checks(&self) -> Vec<&NodeCheck> {
        match self {
            CertificateNode::Leaf { .. } => Vec::new(),
            CertificateNode::Split { checks, children, .. } => checks
                .iter()
                .chain(children.iter().flat_map(|c| c.checks()))
                .collect(),
        }
    }

    pub fn count(&self) -> usize {
        match self {
            CertificateNode::Leaf { .. } => 1,
            CertificateNode::Split { children, .. } => 1 + children.iter().map(|c| c.count()).sum::<usize>(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate<S: Scalar> {
    pub target: Target,
    /// Bound verified at every node: `M(Q)` for λ and α, `m(Q)` for ρ.
    #[serde(serialize_with = "serde_scalar::opt")]
    pub claimed_bound: Option<S>,
    /// Bound after the hierarchy upgrade: `max{M, 2m}`, `max{M, 4m}` or `m`.
    #[serde(serialize_with = "serde_scalar::opt")]
    pub hierarchy_bound: Option<S>,
    /// Bound produced by the recursion itself (`None` for a single state).
    #[serde(serialize_with = "serde_scalar::opt")]
    pub recursive_bound: Option<S>,
    #[serde(rename = "M", serialize_with = "serde_scalar::opt")]
    pub big_m: Option<S>,
    #[serde(serialize_with = "serde_scalar::opt")]
    pub m: Option<S>,
    pub holds: bool,
    pub vacuous: bool,
    pub nodes: usize,
    pub failed_check: Option<String>,
    pub root: CertificateNode,
}

fn opt_min<S: Scalar>(a: Option<S>, b: Option<S>) -> Option<S> {
    match (a, b) {
        (Some(x), Some(y)) => Some(S::min_of(&x, &y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn json_opt<S: Scalar>(v: &Option<S>) -> serde_json::Value {
    v.as_ref().map_or(serde_json::Value::from("vacuous"), Scalar::to_json)
}

fn certify_node<S: Scalar>(
    q: &Generator<S>,
    target: Target,
    opts: &CertifyOptions,
) -> Result<(CertificateNode, Option<S>)> {
    let m = q.measure();
    let n = m.dimension();
    if m.len() == 1 {
        return Ok((
            CertificateNode::Leaf {
                state: render_bits(n, m.support()[0]),
            },
            None,
        ));
    }
    if opts.paranoid {
        let mode = if n <= crate::negdep::DEFAULT_SCP_CEILING {
            ScpMode::Full
        } else {
            ScpMode::Sampled {
                seed: 0,
                count: crate::negdep::DEFAULT_SCP_SAMPLES,
            }
        };
        let report = check_scp(
            m,
            &ScpOptions {
                mode,
                ..ScpOptions::default()
            },
        )?;
        if !report.holds {
            return Err(Error::ScpViolation(format!(
                "restricted measure on {} states fails the SCP",
                m.len()
            )));
        }
    }
    let ell = (0..n)
        .find(|&l| {
            let c = coord_mask(n, l);
            m.support().iter().any(|s| s & c == 0) && m.support().iter().any(|s| s & c != 0)
        })
        .expect("two distinct states differ in some coordinate");
    let d = split_decomposition(q, ell)?;
    let stats = validate(q)?;
    let a = d.projected_rate(0, 1).clone();
    let b = d.projected_rate(1, 0).clone();
    let report = chi(&d)?;
    let chi_value = report.chi.clone().unwrap_or_else(S::zero);
    let two = crate::functional::two_state_constants(&a, &b).ok();
    let floor = match target {
        Target::Lambda | Target::Alpha => a.clone() + b.clone(),
        Target::Rho => S::min_of(&a, &b),
    };
    let local_bound = chi_value.clone() * floor.clone();

    let mut checks = Vec::new();
    match (target, &stats.big_m, &stats.m) {
        (Target::Lambda | Target::Alpha, Some(big_m), _) => {
            checks.push(node_check("chi*(a+b) >= M", &local_bound, big_m));
        }
        (Target::Rho, _, Some(small_m)) => {
            checks.push(node_check("chi*min(a,b) >= m", &local_bound, small_m));
        }
        _ => checks.push(NodeCheck {
            name: "adjacent pairs exist",
            lhs: serde_json::Value::from(false),
            rhs: serde_json::Value::from(true),
            pass: false,
        }),
    }
    for p in &report.pairs {
        checks.push(node_check("chi >= crude floor", &chi_value, &p.crude_floor));
        checks.push(NodeCheck {
            name: "atom ratios dominate crude bounds",
            lhs: serde_json::Value::from(p.crude_holds),
            rhs: serde_json::Value::from(true),
            pass: p.crude_holds,
        });
    }
    if a.gt_zero() && b.gt_zero() {
        if let (Some(big_m), Some(small_m)) = (&stats.big_m, &stats.m) {
            let scp_floor = S::max_of(
                &(big_m.clone() / S::max_of(&a, &b)),
                &(small_m.clone() / S::min_of(&a, &b)),
            );
            checks.push(node_check("chi >= max{M/max(a,b), m/min(a,b)}", &chi_value, &scp_floor));
        }
    }

    let [left, right] = [&d.restrictions[0], &d.restrictions[1]];
    let (l, r) = rayon::join(|| certify_node(left, target, opts), || certify_node(right, target, opts));
    let (l, r) = (l?, r?);
    let node_bound = opt_min(Some(local_bound.clone()), opt_min(l.1, r.1));
    let node = CertificateNode::Split {
        coordinate: ell,
        support: m.states().map(|s| s.to_string()).collect(),
        chi: json_opt(&report.chi),
        a: a.to_json(),
        b: b.to_json(),
        two_state: two.map_or(serde_json::Value::Null, |t| serde_json::to_value(t).unwrap_or_default()),
        big_m: json_opt(&stats.big_m),
        m: json_opt(&stats.m),
        local_bound: local_bound.to_json(),
        node_bound: json_opt(&node_bound),
        checks,
        children: vec![l.0, r.0],
    };
    Ok((node, node_bound))
}

/// Replays the induction behind the universal bounds `λ, α ≥ M(Q)` and
/// `ρ ≥ m(Q)` for a reversible generator of an SCP measure.
pub fn certify_main<S: Scalar>(
    measure: &BooleanMeasure<S>,
    q: &Generator<S>,
    target: Target,
    opts: &CertifyOptions,
) -> Result<Certificate<S>> {
    if q.measure().support() != measure.support() || q.measure().weights() != measure.weights() {
        return Err(Error::Validation("generator is not built on the given measure".into()));
    }
    let stats = validate(q)?;
    let (root, recursive_bound) = certify_node(q, target, opts)?;
    let claimed_bound = match target {
        Target::Lambda | Target::Alpha => stats.big_m.clone(),
        Target::Rho => stats.m.clone(),
    };
    let factor = match target {
        Target::Lambda => 2,
        Target::Alpha => 4,
        Target::Rho => 1,
    };
    let hierarchy_bound = match (&stats.big_m, &stats.m) {
        (Some(big), Some(small)) if target != Target::Rho => {
            Some(S::max_of(big, &(S::from_count(factor) * small.clone())))
        }
        _ => stats.m.clone().filter(|_| target == Target::Rho),
    };
    let failed_check = root.checks().into_iter().find(|c| !c.pass).map(|c| c.name.to_string());
    let bound_ok = match (&recursive_bound, &claimed_bound) {
        (Some(r), Some(c)) => c.approx_le(r, REAL_CHECK_TOL),
        _ => true,
    };
    let nodes = root.count();
    Ok(Certificate {
        target,
        vacuous: claimed_bound.is_none() || claimed_bound.as_ref().is_some_and(|c| c.is_zero()),
        holds: failed_check.is_none() && bound_ok,
        claimed_bound,
        hierarchy_bound,
        recursive_bound,
        big_m: stats.big_m,
        m: stats.m,
        nodes,
        failed_check,
        root,
    })
}

// ---------------------------------------------------------------------------
// Flip-swap synthesis
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct CoordinateWalk<S> {
    pub coordinate: usize,
    pub walk: Generator<S>,
    /// Coupling of the two blocks; `None` when a block is empty.
    pub coupling: Option<Coupling<S>>,
}

#[derive(Clone, Debug)]
pub struct SynthesisResult<S> {
    pub per_coordinate: Vec<CoordinateWalk<S>>,
    pub averaged: Generator<S>,
    /// `None` for a single-state support.
    pub normalized: Option<Generator<S>>,
    pub delta: S,
    pub delta_bound: S,
    pub homogeneity: Option<usize>,
    pub diagonal_checks: usize,
    pub diagonal_failures: Vec<String>,
}

impl<S: Scalar> SynthesisResult<S> {
    pub fn delta_within_bound(&self) -> bool {
        self.delta.approx_le(&self.delta_bound, REAL_CHECK_TOL)
    }
}

#[derive(Serialize)]
pub struct SynthesisView {
    pub per_coordinate: BTreeMap<usize, GeneratorView>,
    pub averaged: GeneratorView,
    pub normalized: Option<GeneratorView>,
    pub delta: serde_json::Value,
    pub delta_bound: serde_json::Value,
    pub homogeneity: Option<usize>,
    pub diagonal_checks: usize,
    pub diagonal_failures: Vec<String>,
    pub couplings: BTreeMap<usize, CouplingView>,
}

impl<S: Scalar> From<&SynthesisResult<S>> for SynthesisView {
    fn from(r: &SynthesisResult<S>) -> Self {
        SynthesisView {
            per_coordinate: r
                .per_coordinate
                .iter()
                .map(|c| (c.coordinate, GeneratorView::from(&c.walk)))
                .collect(),
            averaged: GeneratorView::from(&r.averaged),
            normalized: r.normalized.as_ref().map(GeneratorView::from),
            delta: r.delta.to_json(),
            delta_bound: r.delta_bound.to_json(),
            homogeneity: r.homogeneity,
            diagonal_checks: r.diagonal_checks,
            diagonal_failures: r.diagonal_failures.clone(),
            couplings: r
                .per_coordinate
                .iter()
                .filter_map(|c| c.coupling.as_ref().map(|k| (c.coordinate, CouplingView::from(k))))
                .collect(),
        }
    }
}

struct Synthesizer<S> {
    memo: HashMap<(u64, Vec<u64>), Generator<S>>,
    checks: usize,
    failures: Vec<String>,
}

impl<S: Scalar> Synthesizer<S> {
    /// `Q* = (1/|A|) Σ_{ℓ ∈ A} Q^(ℓ)` for the measure `pi`, whose support is
    /// constant off the active coordinates `A`.
    fn averaged(&mut self, pi: &BooleanMeasure<S>, active: u64) -> Result<Generator<S>> {
        if pi.len() == 1 {
            return Ok(Generator::zero(pi.clone()));
        }
        let key = (active, pi.support().to_vec());
        if let Some(q) = self.memo.get(&key) {
            return Ok(q.clone());
        }
        let coords: Vec<usize> = (0..pi.dimension())
            .filter(|&l| active & coord_mask(pi.dimension(), l) != 0)
            .collect();
        if coords.is_empty() {
            return Err(Error::Construction("no active coordinate separates the support".into()));
        }
        let walks = coords
            .iter()
            .map(|&l| Ok(self.coordinate_walk(pi, l, active)?.0))
            .collect::<Result<Vec<_>>>()?;
        let weight = S::one() / S::from_count(coords.len());
        let parts: Vec<(S, &Generator<S>)> = walks.iter().map(|w| (weight.clone(), w)).collect();
        let q = Generator::combine(&parts)?;
        self.memo.insert(key, q.clone());
        Ok(q)
    }

    /// `Q^(ℓ)`: recursive walks inside the two blocks plus cross rates
    /// `π̄(0)π̄(1)κ(x,y)/π(x)`.
    fn coordinate_walk(
        &mut self,
        pi: &BooleanMeasure<S>,
        ell: usize,
        active: u64,
    ) -> Result<(Generator<S>, Option<Coupling<S>>)> {
        let n = pi.dimension();
        let rest = active & !coord_mask(n, ell);
        let parts = match split(pi, ell) {
            Ok(p) => p,
            Err(Error::Split { .. }) => return Ok((self.averaged(pi, rest)?, None)),
            Err(e) => return Err(e),
        };
        let q0 = self.averaged(&parts.blocks[0], rest)?;
        let q1 = self.averaged(&parts.blocks[1], rest)?;
        let kappa = flip_swap_coupling(pi, ell)?;
        let size = pi.len();
        let mut rates = vec![S::zero(); size * size];
        for (sub, idx) in [(&q0, &parts.indices[0]), (&q1, &parts.indices[1])] {
            for (i, j, r) in sub.transitions() {
                rates[idx[i] * size + idx[j]] = r.clone();
            }
        }
        let [p0, p1] = parts.masses.clone();
        let both = p0.clone() * p1.clone();
        for (i, j, w) in kappa.atoms() {
            let (x, y) = (parts.indices[0][i], parts.indices[1][j]);
            rates[x * size + y] = both.clone() * w.clone() / pi.weight(x).clone();
            rates[y * size + x] = both.clone() * w.clone() / pi.weight(y).clone();
        }
        let q = Generator::from_off_diagonal(pi.clone(), rates)?;
        for (block, sub, other) in [(0, &q0, &p1), (1, &q1, &p0)] {
            let cap = sub.delta() + other.clone();
            for &x in &parts.indices[block] {
                self.checks += 1;
                let out = -q.rate(x, x).clone();
                if !out.approx_le(&cap, REAL_CHECK_TOL) {
                    self.failures.push(format!(
                        "coordinate {ell}: -Q({s},{s}) = {} exceeds {}",
                        out.render(),
                        cap.render(),
                        s = render_bits(n, pi.support()[x])
                    ));
                }
            }
        }
        Ok((q, Some(kappa)))
    }
}

/// Builds the flip-swap walk `Q*` with `λ, α ≥ 1` and `Δ(Q*) ≤ n` (or `2k`
/// for `k`-homogeneous measures), together with every `Q^(ℓ)`.
pub fn synthesize_flip_swap<S: Scalar>(m: &BooleanMeasure<S>) -> Result<SynthesisResult<S>> {
    let n = m.dimension();
    let all = crate::lattice_measure::full_mask(n);
    let mut synth = Synthesizer {
        memo: HashMap::new(),
        checks: 0,
        failures: Vec::new(),
    };
    let mut per_coordinate = Vec::with_capacity(n);
    for ell in 0..n {
        let (walk, coupling) = if m.len() == 1 {
            (Generator::zero(m.clone()), None)
        } else {
            synth.coordinate_walk(m, ell, all)?
        };
        per_coordinate.push(CoordinateWalk {
            coordinate: ell,
            walk,
            coupling,
        });
    }
    let weight = S::one() / S::from_count(n);
    let parts: Vec<(S, &Generator<S>)> = per_coordinate.iter().map(|c| (weight.clone(), &c.walk)).collect();
    let averaged = Generator::combine(&parts)?;
    let delta = averaged.delta();
    let k = homogeneity(m);
    let delta_bound = match k {
        Some(k) => S::from_count(2 * k),
        None => S::from_count(n),
    };
    let normalized = crate::chain::normalize(&averaged).ok();
    Ok(SynthesisResult {
        per_coordinate,
        averaged,
        normalized,
        delta,
        delta_bound,
        homogeneity: k,
        diagonal_checks: synth.checks,
        diagonal_failures: synth.failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_bases_exchange, build_mcmc};
    use crate::functional::poincare_exact;
    use crate::lattice_measure::{conditioned_sum, product, spanning_tree};
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn triangle() -> BooleanMeasure<Rational> {
        spanning_tree(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn projection_of_fair_slice() {
        let m = conditioned_sum(&[q(1, 2), q(1, 2)], 1).unwrap();
        let d = split_decomposition(&build_mcmc(&m), 0).unwrap();
        assert_eq!(*d.projected_rate(0, 1), q(1, 4));
        assert_eq!(*d.projected_rate(1, 0), q(1, 4));
        assert!(d.restrictions.iter().all(|r| r.size() == 1));
    }

    #[test]
    fn trivial_partition() {
        let g = build_bases_exchange(&triangle()).unwrap();
        let d = project_restrict(&g, &[vec![0, 1, 2]]).unwrap();
        assert_eq!(d.projection.size(), 1);
        assert_eq!(*d.projection.rate(0, 0), q(0, 1));
        assert_eq!(d.restrictions[0], g);
    }

    #[test]
    fn triangle_split_on_last_edge() {
        // support 011, 101, 110; coordinate 2 separates {110} from {011, 101}
        let g = build_bases_exchange(&triangle()).unwrap();
        let d = split_decomposition(&g, 2).unwrap();
        assert_eq!(d.masses, vec![q(1, 3), q(2, 3)]);
        assert_eq!(*d.projected_rate(0, 1), q(1, 6));
        assert_eq!(*d.projected_rate(1, 0), q(1, 12));
        assert_eq!(
            d.masses[0].clone() * d.projected_rate(0, 1).clone(),
            d.masses[1].clone() * d.projected_rate(1, 0).clone()
        );
    }

    #[test]
    fn bad_partitions_are_rejected() {
        let g = build_bases_exchange(&triangle()).unwrap();
        assert!(project_restrict(&g, &[vec![0, 1], vec![1, 2]]).is_err());
        assert!(project_restrict(&g, &[vec![0, 1]]).is_err());
        assert!(project_restrict(&g, &[vec![0, 1, 2], vec![]]).is_err());
    }

    #[test]
    fn chi_of_bernoulli_synthesis_is_one() {
        let m = product(&[q(1, 3)]).unwrap();
        let s = synthesize_flip_swap(&m).unwrap();
        let w = &s.per_coordinate[0];
        let d = split_decomposition_with(&w.walk, 0, w.coupling.as_ref().unwrap()).unwrap();
        let r = chi(&d).unwrap();
        assert_eq!(r.chi, Some(q(1, 1)));
        assert!(r.pairs.iter().all(|p| p.crude_holds && p.crude_floor <= q(1, 1)));
    }

    #[test]
    fn chi_is_zero_when_a_state_has_no_cross_move() {
        let cube = product(&[q(1, 2), q(1, 2)]).unwrap();
        // 00 <-> 10 across coordinate 0; 01 has no move into {10, 11}
        let g = Generator::from_pairs(
            cube.clone(),
            [(0, 2, q(1, 1)), (2, 0, q(1, 1)), (0, 1, q(1, 1)), (1, 0, q(1, 1)), (2, 3, q(1, 1)), (3, 2, q(1, 1))],
        )
        .unwrap();
        let d = split_decomposition(&g, 0).unwrap();
        let r = chi(&d).unwrap();
        assert!(r.zero);
        assert_eq!(r.chi, Some(q(0, 1)));
    }

    #[test]
    fn missing_coupling_is_an_error() {
        let g = build_bases_exchange(&triangle()).unwrap();
        let parts = split(g.measure(), 2).unwrap();
        let d = project_restrict(&g, &parts.indices).unwrap();
        assert!(matches!(chi(&d), Err(Error::Precondition(_))));
    }

    #[test]
    fn identities_on_the_triangle() {
        let g = build_bases_exchange(&triangle()).unwrap();
        let d = split_decomposition(&g, 2).unwrap();
        let f = Observable::new(vec![0.7, 2.3, 1.1]).unwrap();
        let r = identity_check(&d, &f).unwrap();
        assert!(r.max_residual < 1e-12, "{r:?}");
        assert!(jensen_check(&d, &f).unwrap().iter().all(|j| j.holds));
        let c = identity_check(&d, &Observable::new(vec![3.0; 3]).unwrap()).unwrap();
        assert_eq!(c.variance, [0.0, 0.0]);
        assert!(c.entropy[0].abs() < 1e-15 && c.entropy[1].abs() < 1e-15);
    }

    #[test]
    fn cross_term_sums_over_the_cut() {
        let g = build_bases_exchange(&triangle()).unwrap();
        let d = split_decomposition(&g, 2).unwrap();
        // support order 011, 101, 110; 110 alone on one side
        let f = Observable::new(vec![1.0, 1.0, 2.0]).unwrap();
        let r = identity_check(&d, &f).unwrap();
        let expected = 2.0 * (1.0 / 3.0) * (1.0 / 12.0) * 1.0;
        assert!((r.cross["poincare"] - expected).abs() < 1e-15);
    }

    #[test]
    fn certificates_on_small_chains() {
        let slice = conditioned_sum(&vec![q(1, 2); 4], 2).unwrap();
        let g = build_mcmc(&slice);
        let c = certify_main(&slice, &g, Target::Lambda, &CertifyOptions::default()).unwrap();
        assert!(c.holds, "{:?}", c.failed_check);
        assert_eq!(c.claimed_bound, Some(q(1, 16)));
        assert_eq!(c.hierarchy_bound, Some(q(1, 8)));
        assert!(poincare_exact(&g).unwrap().value >= 0.125 - 1e-12);
        let c = certify_main(&slice, &g, Target::Alpha, &CertifyOptions { paranoid: true }).unwrap();
        assert!(c.holds);
        assert_eq!(c.claimed_bound, Some(q(1, 16)));

        let tri = triangle();
        let g = build_bases_exchange(&tri).unwrap();
        let rho = certify_main(&tri, &g, Target::Rho, &CertifyOptions::default()).unwrap();
        assert!(rho.holds);
        assert_eq!(rho.claimed_bound, Some(q(1, 12)));
        let alpha = certify_main(&tri, &g, Target::Alpha, &CertifyOptions::default()).unwrap();
        assert_eq!(alpha.hierarchy_bound, Some(q(1, 3)));

        let single = BooleanMeasure::<Rational>::uniform(2, [0b01]).unwrap();
        let c = certify_main(&single, &build_mcmc(&single), Target::Alpha, &CertifyOptions::default()).unwrap();
        assert!(c.holds && c.vacuous);
        assert!(matches!(c.root, CertificateNode::Leaf { .. }));
    }

    #[test]
    fn synthesis_examples() {
        let s = synthesize_flip_swap(&product(&[q(1, 3)]).unwrap()).unwrap();
        assert_eq!(*s.averaged.rate(0, 1), q(1, 3));
        assert_eq!(*s.averaged.rate(1, 0), q(2, 3));
        assert!((poincare_exact(&s.averaged).unwrap().value - 1.0).abs() < 1e-12);

        let swap = conditioned_sum(&[q(1, 2), q(1, 2)], 1).unwrap();
        let s = synthesize_flip_swap(&swap).unwrap();
        assert_eq!(*s.averaged.rate(0, 1), q(1, 2));
        assert_eq!(s.delta, q(1, 2));
        assert_eq!(s.delta_bound, q(2, 1));

        let tri = triangle();
        let s = synthesize_flip_swap(&tri).unwrap();
        let stats = validate(&s.averaged).unwrap();
        assert!(stats.flip_swap);
        assert!(s.delta <= q(4, 1) && s.delta_within_bound());
        assert!(s.diagonal_failures.is_empty() && s.diagonal_checks > 0);
        assert!(poincare_exact(&s.averaged).unwrap().value >= 1.0 - 1e-9);
    }
}
