//! Dirichlet forms, variance and entropy, and the Poincaré / modified
//! log-Sobolev / log-Sobolev constants of a reversible generator.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{ensure_irreducible, Generator};
use crate::error::{Error, Result};
use crate::lattice_measure::{BooleanMeasure, BitVector};
use crate::scalar::{serde_scalar, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormKind {
    Poincare,
    Mlsi,
    Lsi,
}

impl FormKind {
    pub const ALL: [FormKind; 3] = [FormKind::Poincare, FormKind::Mlsi, FormKind::Lsi];

    /// Local variation `Ψ(u, v)`.
    pub fn psi(self, u: f64, v: f64) -> f64 {
        match self {
            FormKind::Poincare => (u - v) * (u - v),
            FormKind::Mlsi => {
                if u == v {
                    0.0
                } else {
                    (u - v) * (u.ln() - v.ln())
                }
            }
            FormKind::Lsi => {
                let d = u.sqrt() - v.sqrt();
                d * d
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FormKind::Poincare => "poincare",
            FormKind::Mlsi => "mlsi",
            FormKind::Lsi => "lsi",
        }
    }
}

impl fmt::Display for FormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poincare" | "pi" | "lambda" => Ok(FormKind::Poincare),
            "mlsi" | "alpha" => Ok(FormKind::Mlsi),
            "lsi" | "rho" => Ok(FormKind::Lsi),
            other => Err(Error::Parse(format!("unknown inequality kind {other:?}"))),
        }
    }
}

/// Real values aligned with a measure's support.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Observable {
    values: Vec<f64>,
}

impl Observable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("observable entry {i} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn from_fn<S>(m: &BooleanMeasure<S>, f: impl FnMut(BitVector) -> f64) -> Result<Self>
    where
        S: Scalar,
    {
        Self::new(m.states().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| f(v)).collect())
    }

    fn require_len(&self, size: usize) -> Result<()> {
        if self.values.len() != size {
            return Err(Error::Dimension {
                left: self.values.len(),
                right: size,
            });
        }
        Ok(())
    }

    fn require_positive(&self) -> Result<()> {
        match self.values.iter().position(|&v| v <= 0.0) {
            Some(i) => Err(Error::Domain(format!(
                "observable entry {i} = {} is not positive",
                self.values[i]
            ))),
            None => Ok(()),
        }
    }
}

/// `φ(u) = u log u - u + 1` with `log u` supplied, series near `u = 1`.
fn phi(u: f64, log_u: f64) -> f64 {
    let d = u - 1.0;
    if d.abs() < 1e-2 {
        // Σ_{k≥2} (-1)^k d^k / (k(k-1))
        let mut term = d * d;
        let mut acc = 0.0;
        for k in 2..14 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * term / (k * (k - 1)) as f64;
            term *= d;
        }
        acc
    } else if u == 0.0 {
        1.0
    } else {
        u * log_u - u + 1.0
    }
}

/// Symmetric edge weights `π(x)Q(x,y)` over `x < y` with positive rate.
#[derive(Clone, Debug)]
pub(crate) struct Edges {
    pub(crate) pi: Vec<f64>,
    pub(crate) edges: Vec<(usize, usize, f64)>,
}

impl Edges {
    pub(crate) fn new<S: Scalar>(q: &Generator<S>) -> Self {
        let pi = q.measure().weights_f64();
        let size = q.size();
        let mut edges = Vec::new();
        for i in 0..size {
            for j in i + 1..size {
                let a = q.measure().weight(i).clone() * q.rate(i, j).clone();
                let b = q.measure().weight(j).clone() * q.rate(j, i).clone();
                let w = 0.5 * (a.as_f64() + b.as_f64());
                if w > 0.0 {
                    edges.push((i, j, w));
                }
            }
        }
        Self { pi, edges }
    }

    pub(crate) fn local(&self, kind: FormKind, f: &[f64]) -> f64 {
        self.edges.iter().map(|&(i, j, w)| w * kind.psi(f[i], f[j])).sum()
    }

    pub(crate) fn mean(&self, f: &[f64]) -> f64 {
        self.pi.iter().zip(f).map(|(p, v)| p * v).sum()
    }

    pub(crate) fn variance(&self, f: &[f64]) -> f64 {
        let m = self.mean(f);
        self.pi.iter().zip(f).map(|(p, v)| p * (v - m) * (v - m)).sum()
    }

    pub(crate) fn entropy(&self, f: &[f64]) -> f64 {
        let m = self.mean(f);
        if m <= 0.0 {
            return 0.0;
        }
        self.pi
            .iter()
            .zip(f)
            .map(|(p, &v)| {
                let u = v / m;
                p * m * phi(u, u.ln())
            })
            .sum::<f64>()
            .max(0.0)
    }

    /// `E(f,f)/Var`, `E(f,log f)/Ent` or `E(√f,√f)/Ent`.
    pub(crate) fn ratio(&self, kind: FormKind, f: &[f64]) -> f64 {
        let den = match kind {
            FormKind::Poincare => self.variance(f),
            _ => self.entropy(f),
        };
        self.local(kind, f) / den
    }
}

/// Three local Ψ-sums, one per inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalForms {
    pub poincare: f64,
    pub mlsi: f64,
    pub lsi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FormReport {
    pub dirichlet_ff: f64,
    pub dirichlet_flogf: f64,
    pub dirichlet_sqrt: f64,
    pub variance: f64,
    pub entropy: f64,
    pub local_forms: LocalForms,
}

impl FormReport {
    /// Largest relative gap between a Dirichlet form and its local sum.
    pub fn identity_residual(&self) -> f64 {
        [
            (self.dirichlet_ff, self.local_forms.poincare),
            (self.dirichlet_flogf, self.local_forms.mlsi),
            (self.dirichlet_sqrt, self.local_forms.lsi),
        ]
        .iter()
        .map(|&(a, b)| relative_gap(a, b))
        .fold(0.0, f64::max)
    }
}

pub(crate) fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `E_π(f, g) = -E_π[f Qg]`.
pub fn dirichlet<S: Scalar>(q: &Generator<S>, f: &[f64], g: &[f64]) -> f64 {
    let size = q.size();
    let mut acc = 0.0;
    for x in 0..size {
        let mut qg = 0.0;
        for y in 0..size {
            if y != x {
                qg += q.rate(x, y).as_f64() * (g[y] - g[x]);
            }
        }
        acc -= q.measure().weight(x).as_f64() * f[x] * qg;
    }
    acc
}

pub fn evaluate_forms<S: Scalar>(q: &Generator<S>, f: &Observable) -> Result<FormReport> {
    f.require_len(q.size())?;
    f.require_positive()?;
    let v = f.values();
    let logf: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let sqrtf: Vec<f64> = v.iter().map(|x| x.sqrt()).collect();
    let e = Edges::new(q);
    Ok(FormReport {
        dirichlet_ff: dirichlet(q, v, v),
        dirichlet_flogf: dirichlet(q, v, &logf),
        dirichlet_sqrt: dirichlet(q, &sqrtf, &sqrtf),
        variance: e.variance(v),
        entropy: e.entropy(v),
        local_forms: LocalForms {
            poincare: e.local(FormKind::Poincare, v),
            mlsi: e.local(FormKind::Mlsi, v),
            lsi: e.local(FormKind::Lsi, v),
        },
    })
}

/// The ratio whose infimum over non-constant positive `f` is the constant of `kind`.
pub fn ratio<S: Scalar>(q: &Generator<S>, kind: FormKind, f: &Observable) -> Result<f64> {
    f.require_len(q.size())?;
    if kind != FormKind::Poincare {
        f.require_positive()?;
    }
    let e = Edges::new(q);
    let den = match kind {
        FormKind::Poincare => e.variance(f.values()),
        _ => e.entropy(f.values()),
    };
    if den <= 0.0 {
        return Err(Error::Domain("ratio undefined for a constant observable".into()));
    }
    Ok(e.local(kind, f.values()) / den)
}

pub fn ratio_pi<S: Scalar>(q: &Generator<S>, f: &Observable) -> Result<f64> {
    ratio(q, FormKind::Poincare, f)
}

pub fn ratio_mlsi<S: Scalar>(q: &Generator<S>, f: &Observable) -> Result<f64> {
    ratio(q, FormKind::Mlsi, f)
}

pub fn ratio_lsi<S: Scalar>(q: &Generator<S>, f: &Observable) -> Result<f64> {
    ratio(q, FormKind::Lsi, f)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantEstimate {
    pub kind: FormKind,
    pub value: f64,
    pub witness: Observable,
    pub exact: bool,
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

fn require_nontrivial<S: Scalar>(q: &Generator<S>) -> Result<()> {
    if q.size() < 2 {
        return Err(Error::Precondition("constants need a support of at least two states".into()));
    }
    ensure_irreducible(q)
}

/// Second eigenpair of `-D^{1/2} Q D^{-1/2}`, eigenvector pulled back by `D^{-1/2}`.
fn spectral_gap(e: &Edges, size: usize) -> (f64, Vec<f64>) {
    let mut a = DMatrix::<f64>::zeros(size, size);
    for &(i, j, w) in &e.edges {
        let s = w / (e.pi[i] * e.pi[j]).sqrt();
        a[(i, j)] -= s;
        a[(j, i)] -= s;
        a[(i, i)] += w / e.pi[i];
        a[(j, j)] += w / e.pi[j];
    }
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let k = order[1];
    let g = (0..size)
        .map(|i| eig.eigenvectors[(i, k)] / e.pi[i].sqrt())
        .collect();
    (eig.eigenvalues[k].max(0.0), g)
}

fn shifted(g: &[f64], amplitude: f64) -> Vec<f64> {
    let top = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    g.iter().map(|v| 1.0 + amplitude * v / top).collect()
}

/// Spectral gap; the witness is `1 + g / (2 max|g|)` for the gap eigenvector `g`.
pub fn poincare_exact<S: Scalar>(q: &Generator<S>) -> Result<ConstantEstimate> {
    require_nontrivial(q)?;
    let e = Edges::new(q);
    let (value, g) = spectral_gap(&e, q.size());
    Ok(ConstantEstimate {
        kind: FormKind::Poincare,
        value,
        witness: Observable::new(shifted(&g, 0.5))?,
        exact: true,
        restarts: 0,
        iterations: 0,
        seed: 0,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SobolevOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for SobolevOptions {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iter: 5000,
            seed: 0,
            tol: 1e-12,
        }
    }
}

/// `(ratio, gradient)` in the log-parameterization `f = exp(g)`; `None` when
/// the entropy is degenerate.
fn ratio_and_gradient(e: &Edges, kind: FormKind, g: &[f64], tol: f64) -> Option<(f64, Vec<f64>)> {
    let f: Vec<f64> = g.iter().map(|v| v.exp()).collect();
    let mean = e.mean(&f);
    let ent = e.entropy(&f);
    if !(ent > tol * mean) {
        return None;
    }
    let lmean = mean.ln();
    let mut dn = vec![0.0; g.len()];
    let num = match kind {
        FormKind::Mlsi => {
            let mut num = 0.0;
            for &(i, j, w) in &e.edges {
                let (df, dg) = (f[i] - f[j], g[i] - g[j]);
                num += w * df * dg;
                dn[i] += w * (f[i] * dg + df);
                dn[j] += w * (-f[j] * dg - df);
            }
            num
        }
        FormKind::Lsi => {
            let s: Vec<f64> = g.iter().map(|v| (0.5 * v).exp()).collect();
            let mut num = 0.0;
            for &(i, j, w) in &e.edges {
                let ds = s[i] - s[j];
                num += w * ds * ds;
                dn[i] += w * ds * s[i];
                dn[j] -= w * ds * s[j];
            }
            num
        }
        FormKind::Poincare => unreachable!("poincare has an exact solver"),
    };
    let r = num / ent;
    let grad = (0..g.len())
        .map(|x| (dn[x] - r * e.pi[x] * f[x] * (g[x] - lmean)) / ent)
        .collect();
    Some((r, grad))
}

struct Descent {
    ratio: f64,
    g: Vec<f64>,
    iterations: usize,
}

fn recenter(g: &mut [f64]) {
    let top = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    g.iter_mut().for_each(|v| *v -= top);
}

/// Gradient descent on `g = log f` with step halving on non-decrease.
fn descend(e: &Edges, kind: FormKind, mut g: Vec<f64>, opts: &SobolevOptions) -> Option<Descent> {
    recenter(&mut g);
    let (mut r, mut grad) = ratio_and_gradient(e, kind, &g, opts.tol)?;
    let mut step = 0.5;
    let mut stalled = 0;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let scale = grad.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 || step < 1e-30 {
            break;
        }
        let mut cand: Vec<f64> = g.iter().zip(&grad).map(|(x, d)| x - step * d / scale).collect();
        recenter(&mut cand);
        match ratio_and_gradient(e, kind, &cand, opts.tol) {
            Some((rc, gc)) if rc < r => {
                stalled = if r - rc <= 1e-15 * r { stalled + 1 } else { 0 };
                r = rc;
                grad = gc;
                g = cand;
                step = (step * 2.0).min(4.0);
                if stalled >= 8 {
                    break;
                }
            }
            _ => step *= 0.5,
        }
    }
    Some(Descent { ratio: r, g, iterations })
}

const SEED_AMPLITUDE: f64 = 1e-4;
const SPREADS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 4.0];

/// Upper estimate of the MLSI or LSI constant by multi-start descent.
pub fn sobolev_estimate<S: Scalar>(
    q: &Generator<S>,
    kind: FormKind,
    opts: &SobolevOptions,
) -> Result<ConstantEstimate> {
    if kind == FormKind::Poincare {
        return poincare_exact(q);
    }
    require_nontrivial(q)?;
    let size = q.size();
    let e = Edges::new(q);
    let (_, eigvec) = spectral_gap(&e, size);
    let runs: Vec<Option<(f64, Vec<f64>, usize)>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let start: Vec<f64> = match r {
                0 => shifted(&eigvec, SEED_AMPLITUDE).iter().map(|v| v.ln()).collect(),
                1 => shifted(&eigvec, 0.5).iter().map(|v| v.ln()).collect(),
                _ => {
                    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                    rng.set_stream(r as u64);
                    let normal = Normal::new(0.0, SPREADS[r % SPREADS.len()]).expect("positive spread");
                    (0..size).map(|_| normal.sample(&mut rng)).collect()
                }
            };
            let d = descend(&e, kind, start, opts)?;
            let witness: Vec<f64> = d.g.iter().map(|v| v.exp()).collect();
            let value = e.ratio(kind, &witness);
            let _ = d.ratio;
            (value.is_finite() && witness.windows(2).any(|w| w[0] != w[1]))
                .then_some((value, witness, d.iterations))
        })
        .collect();
    let best = runs
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .ok_or_else(|| Error::Estimation(format!("all {} restarts were degenerate", opts.restarts)))?;
    Ok(ConstantEstimate {
        kind,
        value: best.0,
        witness: Observable::new(best.1)?,
        exact: false,
        restarts: opts.restarts,
        iterations: best.2,
        seed: opts.seed,
    })
}

/// Closed forms for the two-state chain with rates `a` (0→1) and `b` (1→0).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoStateConstants<S: Scalar> {
    #[serde(serialize_with = "serde_scalar::one")]
    pub a: S,
    #[serde(serialize_with = "serde_scalar::one")]
    pub b: S,
    #[serde(serialize_with = "serde_scalar::one")]
    pub lambda: S,
    #[serde(serialize_with = "serde_scalar::many")]
    pub alpha_interval: [S; 2],
    pub rho: f64,
    #[serde(serialize_with = "serde_scalar::one")]
    pub rho_floor: S,
    pub degenerate: bool,
}

pub fn two_state_constants<S: Scalar>(a: &S, b: &S) -> Result<TwoStateConstants<S>> {
    if a.lt_zero() || b.lt_zero() {
        return Err(Error::Domain("two-state rates must be non-negative".into()));
    }
    if a.is_zero() && b.is_zero() {
        return Err(Error::Domain("two-state rates cannot both be zero".into()));
    }
    let lambda = a.clone() + b.clone();
    let degenerate = a.is_zero() || b.is_zero();
    let rho = if degenerate {
        0.0
    } else if a == b {
        a.as_f64()
    } else {
        let (af, bf) = (a.as_f64(), b.as_f64());
        let r = af / bf - 1.0;
        bf * r / r.ln_1p()
    };
    Ok(TwoStateConstants {
        a: a.clone(),
        b: b.clone(),
        alpha_interval: [lambda.clone(), lambda.clone() + lambda.clone()],
        lambda,
        rho,
        rho_floor: S::min_of(a, b),
        degenerate,
    })
}

/// The chain on `{0, 1}` jumping `0→1` at rate `a` and `1→0` at rate `b`.
pub fn two_state_generator<S: Scalar>(a: &S, b: &S) -> Result<Generator<S>> {
    if !a.gt_zero() || !b.gt_zero() {
        return Err(Error::Domain("two-state generator needs positive rates".into()));
    }
    let total = a.clone() + b.clone();
    let m = BooleanMeasure::new(1, vec![(0, b.clone() / total.clone()), (1, a.clone() / total)])?;
    Generator::from_pairs(m, [(0, 1, a.clone()), (1, 0, b.clone())])
}

/// `min_x 1/log(1/π(x))`, an upper bound on the LSI constant of any normalized generator.
pub fn rho_ceiling<S: Scalar>(m: &BooleanMeasure<S>) -> Result<f64> {
    if m.len() < 2 {
        return Err(Error::Precondition("rho ceiling needs at least two support states".into()));
    }
    Ok(m
        .weights()
        .iter()
        .map(|w| 1.0 / (-w.as_f64().ln()))
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_bases_exchange, build_mcmc};
    use crate::lattice_measure::{product, spanning_tree};
    use crate::scalar::Rational;
    use std::f64::consts::E;

    fn sym(rate: f64) -> Generator<f64> {
        two_state_generator(&rate, &rate).unwrap()
    }

    #[test]
    fn forms_on_symmetric_coin() {
        let q = sym(1.0);
        let r = evaluate_forms(&q, &Observable::new(vec![1.0, 2.0]).unwrap()).unwrap();
        assert!((r.dirichlet_ff - 0.5).abs() < 1e-15);
        assert!((r.variance - 0.25).abs() < 1e-15);
        assert!(r.identity_residual() < 1e-12);

        let r = evaluate_forms(&q, &Observable::new(vec![1.0, E]).unwrap()).unwrap();
        let expected = E / 2.0 - (1.0 + E) / 2.0 * ((1.0 + E) / 2.0).ln();
        assert!((r.entropy - expected).abs() < 1e-14, "{}", r.entropy);
        assert!((r.entropy - 0.206261).abs() < 1e-6);
    }

    #[test]
    fn constant_observable_has_zero_forms() {
        let q = build_mcmc(&product(&[0.3, 0.6]).unwrap());
        let r = evaluate_forms(&q, &Observable::new(vec![2.5; 4]).unwrap()).unwrap();
        for v in [r.dirichlet_ff, r.dirichlet_flogf, r.dirichlet_sqrt, r.variance, r.entropy] {
            assert!(v.abs() < 1e-15);
        }
        assert!(matches!(
            evaluate_forms(&q, &Observable::new(vec![1.0, 0.0, 1.0, 1.0]).unwrap()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn entropy_series_matches_direct_form() {
        for d in [1e-3, -4e-3, 9e-3, -9.9e-3] {
            let u: f64 = 1.0 + d;
            let direct = u * u.ln() - u + 1.0;
            assert!((phi(u, u.ln()) - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn poincare_examples() {
        let g = poincare_exact(&sym(1.0)).unwrap();
        assert!((g.value - 2.0).abs() < 1e-12);
        assert!((ratio_pi(&sym(1.0), &g.witness).unwrap() - g.value).abs() < 1e-9);

        let tri = spanning_tree::<Rational>(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let g = poincare_exact(&build_bases_exchange(&tri).unwrap()).unwrap();
        assert!((g.value - 0.25).abs() < 1e-12);

        let cube = product(&[0.5, 0.5]).unwrap();
        let flips = Generator::from_off_diagonal(
            cube.clone(),
            (0..16)
                .map(|k| {
                    let (i, j) = (cube.support()[k / 4], cube.support()[k % 4]);
                    if (i ^ j).count_ones() == 1 { 0.5 } else { 0.0 }
                })
                .collect(),
        )
        .unwrap();
        assert!((poincare_exact(&flips).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_state_sobolev_estimates() {
        let opts = SobolevOptions::default();
        let a = sobolev_estimate(&sym(1.0), FormKind::Mlsi, &opts).unwrap();
        assert!((2.0..=4.0 + 1e-9).contains(&a.value), "{}", a.value);
        let r = sobolev_estimate(&sym(1.0), FormKind::Lsi, &opts).unwrap();
        assert!((r.value - 1.0).abs() < 1e-4, "{}", r.value);
        let q = two_state_generator(&2.0, &3.0).unwrap();
        let r = sobolev_estimate(&q, FormKind::Lsi, &opts).unwrap();
        assert!((r.value - 1.0 / 1.5f64.ln()).abs() < 1e-3, "{}", r.value);
        assert!((ratio_lsi(&q, &r.witness).unwrap() - r.value).abs() < 1e-9);
        assert!(!r.exact && r.witness.is_positive() && !r.witness.is_constant());
    }

    #[test]
    fn reducible_chains_are_rejected() {
        let m = product(&[0.5]).unwrap();
        let q = Generator::zero(m);
        let res = poincare_exact(&q);
        assert!(matches!(res, Err(Error::Reducible(_))), "{res:?}");
        assert!(matches!(
            sobolev_estimate(&q, FormKind::Lsi, &SobolevOptions::default()),
            Err(Error::Reducible(_))
        ));
    }

    #[test]
    fn two_state_closed_forms() {
        let q = |n, d| Rational::from_ratio(n, d);
        let c = two_state_constants(&q(1, 1), &q(1, 1)).unwrap();
        assert_eq!(c.lambda, q(2, 1));
        assert_eq!(c.alpha_interval, [q(2, 1), q(4, 1)]);
        assert_eq!(c.rho, 1.0);
        let c = two_state_constants(&q(1, 8), &q(1, 4)).unwrap();
        assert_eq!(c.lambda, q(3, 8));
        assert!((c.rho - 0.125 / 2f64.ln()).abs() < 1e-15);
        assert!((c.rho - 0.18034).abs() < 1e-5);
        assert_eq!(two_state_constants(&q(5, 1), &q(5, 1)).unwrap().rho, 5.0);
        let c = two_state_constants(&q(1, 1), &q(0, 1)).unwrap();
        assert!(c.degenerate && c.rho == 0.0);
        assert!(two_state_constants(&q(0, 1), &q(0, 1)).is_err());
    }

    #[test]
    fn rho_ceiling_examples() {
        let u4 = BooleanMeasure::<f64>::uniform(2, 0..4).unwrap();
        assert!((rho_ceiling(&u4).unwrap() - 1.0 / 4f64.ln()).abs() < 1e-15);
        let u2 = BooleanMeasure::<f64>::uniform(1, 0..2).unwrap();
        assert!((rho_ceiling(&u2).unwrap() - 1.4427).abs() < 1e-4);
        let w = (-2.0f64).exp();
        let m = BooleanMeasure::new(1, vec![(0, w), (1, 1.0 - w)]).unwrap();
        assert!((rho_ceiling(&m).unwrap() - 0.5).abs() < 1e-15);
        assert!(rho_ceiling(&BooleanMeasure::<f64>::uniform(1, [1]).unwrap()).is_err());
    }
}
