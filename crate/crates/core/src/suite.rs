//! Reference corpus and the end-to-end acceptance checks run by `suite run`.

use std::f64::consts::E;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{build_mcmc, validate};
use crate::concentration::{default_grid, herbst_check, lipschitz_constant, pemantle_peres_check, Metric};
use crate::decompose::{
    certify_main, chi, identity_check, jensen_check, split_decomposition, split_decomposition_with,
    synthesize_flip_swap, CertifyOptions, Target,
};
use crate::dynamics::{evolve, mixing_bound, mixing_time, BoundKind};
use crate::functional::{
    poincare_exact, ratio_lsi, ratio_mlsi, ratio_pi, sobolev_estimate, two_state_generator, FormKind, Observable,
    SobolevOptions,
};
use crate::lattice_measure::{
    conditioned_sum, homogeneity, l_ensemble, product, spanning_tree, AnyMeasure, BooleanMeasure,
};
use crate::negdep::{check_scp, ScpOptions};
use crate::{Error, Rational, Result, Scalar};

macro_rules! with_measure {
    ($any:expr, $m:ident => $body:expr) => {
        match $any {
            AnyMeasure::Exact($m) => $body,
            AnyMeasure::Real($m) => $body,
        }
    };
}

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: String,
    pub measure: AnyMeasure,
}

fn q(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

/// `L = B Bᵀ` with standard normal `B`.
pub fn random_psd_kernel(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let b: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|t| b[i][t] * b[j][t]).sum()).collect())
        .collect()
}

/// `π(00) = π(11) = 2/5`, `π(01) = π(10) = 1/10`: positively correlated, so not SCP.
pub fn correlated_pair() -> Result<BooleanMeasure<Rational>> {
    BooleanMeasure::new(
        2,
        vec![(0b00, q(2, 5)), (0b01, q(1, 10)), (0b10, q(1, 10)), (0b11, q(2, 5))],
    )
}

pub fn corpus(seed: u64) -> Result<Vec<CorpusEntry>> {
    let mut out = Vec::new();
    let mut push = |name: String, measure: AnyMeasure| out.push(CorpusEntry { name, measure });
    for n in 1..=4 {
        push(format!("cube{n}"), AnyMeasure::Exact(product(&vec![q(1, 2); n])?));
    }
    let p = [q(3, 10), q(3, 5), q(4, 5)];
    push("product(0.3,0.6,0.8)".into(), AnyMeasure::Exact(product(&p)?));
    for k in 0..=3 {
        push(format!("product(0.3,0.6,0.8)|k={k}"), AnyMeasure::Exact(conditioned_sum(&p, k)?));
    }
    for (n, k) in [(4, 2), (5, 2), (6, 3)] {
        push(format!("slice({n},{k})"), AnyMeasure::Exact(conditioned_sum(&vec![q(1, 2); n], k)?));
    }
    push(
        "trees(triangle)".into(),
        AnyMeasure::Exact(spanning_tree(3, &[(0, 1), (1, 2), (0, 2)])?),
    );
    push(
        "trees(C4)".into(),
        AnyMeasure::Exact(spanning_tree(4, &[(0, 1), (1, 2), (2, 3), (0, 3)])?),
    );
    push(
        "trees(K4)".into(),
        AnyMeasure::Exact(spanning_tree(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])?),
    );
    push("dpp5".into(), AnyMeasure::Real(l_ensemble(&random_psd_kernel(5, seed))?));
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub title: &'static str,
    pub pass: bool,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        let mut s = format!(
            "criterion {:>2} [{}] {} ({} checks",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            self.checks
        );
        if !self.failures.is_empty() {
            let _ = write!(s, ", {} failed; first: {}", self.failures.len(), self.failures[0]);
        }
        s.push(')');
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub corpus: Vec<String>,
    pub criteria: Vec<CriterionOutcome>,
    pub all_pass: bool,
}

#[derive(Clone, Debug, Default)]
pub struct SuiteOptions {
    pub seed: u64,
}

pub const CRITERIA: [(usize, &str); 10] = [
    (1, "two-state closed forms"),
    (2, "hierarchy per witness"),
    (3, "SCP verdicts"),
    (4, "universal lower bounds for the Metropolis walk"),
    (5, "homogeneous MLSI bound and mixing"),
    (6, "flip-swap synthesis"),
    (7, "decomposition identities"),
    (8, "chi bookkeeping"),
    (9, "concentration"),
    (10, "dynamics oracle"),
];

#[derive(Default)]
struct Tally {
    checks: usize,
    failures: Vec<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(msg());
        }
    }

    fn run(&mut self, label: &str, body: impl FnOnce(&mut Tally) -> Result<()>) {
        if let Err(e) = body(self) {
            self.checks += 1;
            self.failures.push(format!("{label}: {e}"));
        }
    }
}

fn le(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn run_criterion(id: usize, corpus: &[CorpusEntry], opts: &SuiteOptions) -> CriterionOutcome {
    let mut t = Tally::default();
    let sobolev = SobolevOptions {
        seed: opts.seed,
        ..SobolevOptions::default()
    };
    match id {
        1 => two_state(&mut t, opts.seed),
        3 => {
            for e in corpus {
                t.run(&e.name, |t| {
                    let r = with_measure!(&e.measure, m => check_scp(m, &ScpOptions::default())?);
                    t.check(r.holds, || format!("{}: SCP reported false", e.name));
                    Ok(())
                });
            }
            t.run("correlated pair", |t| {
                let r = check_scp(&correlated_pair()?, &ScpOptions::default())?;
                let w = r.witness.as_ref();
                let expected = w.is_some_and(|w| w.subset == [0] && w.x == "1" && w.y == "0");
                t.check(!r.holds && expected, || {
                    format!("correlated pair: holds = {}, witness = {:?}", r.holds, r.witness)
                });
                Ok(())
            });
        }
        10 => dynamics_oracle(&mut t),
        _ => {
            for (index, e) in corpus.iter().enumerate() {
                let stream = ((id as u64) << 32) | index as u64;
                t.run(&e.name, |t| {
                    with_measure!(&e.measure, m => match id {
                        2 => hierarchy(t, &e.name, m, &sobolev),
                        4 => main_bounds(t, &e.name, m, &sobolev),
                        5 => homogeneous_mlsi(t, &e.name, m),
                        6 => synthesis(t, &e.name, m),
                        7 => identities(t, &e.name, m, rng_for(opts.seed, stream)),
                        8 => chi_bookkeeping(t, &e.name, m),
                        9 => concentration(t, &e.name, m, rng_for(opts.seed, stream)),
                        _ => Err(Error::Precondition(format!("no acceptance criterion {id}"))),
                    })
                });
            }
        }
    }
    let title = CRITERIA.iter().find(|(i, _)| *i == id).map_or("unknown", |(_, s)| *s);
    CriterionOutcome {
        id,
        title,
        pass: t.failures.is_empty(),
        checks: t.checks,
        failures: t.failures,
    }
}

pub fn run_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    let corpus = corpus(opts.seed)?;
    let criteria: Vec<CriterionOutcome> = CRITERIA
        .par_iter()
        .map(|(id, _)| run_criterion(*id, &corpus, opts))
        .collect();
    Ok(SuiteReport {
        seed: opts.seed,
        corpus: corpus.iter().map(|e| e.name.clone()).collect(),
        all_pass: criteria.iter().all(|c| c.pass),
        criteria,
    })
}

fn two_state(t: &mut Tally, seed: u64) {
    let mut rng = rng_for(seed, 1);
    for _ in 0..25 {
        let a: f64 = rng.random_range(0.2..5.0);
        let b: f64 = rng.random_range(0.2..5.0);
        t.run(&format!("(a, b) = ({a}, {b})"), |t| {
            let q = two_state_generator(&a, &b)?;
            let lambda = poincare_exact(&q)?.value;
            t.check((lambda - (a + b)).abs() <= 1e-10, || {
                format!("({a}, {b}): lambda = {lambda}, expected {}", a + b)
            });
            let rho = sobolev_estimate(&q, FormKind::Lsi, &SobolevOptions { seed, ..Default::default() })?.value;
            let expected = (a - b) / (a.ln() - b.ln());
            t.check((rho - expected).abs() <= 1e-3, || {
                format!("({a}, {b}): rho = {rho}, expected {expected}")
            });
            Ok(())
        });
    }
}

fn dynamics_oracle(t: &mut Tally) {
    for (a, b) in [(1.0, 1.0), (1.0, 2.0), (0.5, 3.0), (2.0, 0.25)] {
        t.run(&format!("two-state ({a}, {b})"), |t| {
            let q = two_state_generator(&a, &b)?;
            for j in 1..=50 {
                let time = j as f64 / 10.0;
                let decay = 1.0 - (-(a + b) * time).exp();
                let from0 = [1.0 - a / (a + b) * decay, a / (a + b) * decay];
                let from1 = [b / (a + b) * decay, 1.0 - b / (a + b) * decay];
                for (x, expected) in [(0, from0), (1, from1)] {
                    let p = evolve(&q, x, time)?;
                    let err = p.iter().zip(expected).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
                    t.check(err <= 1e-10, || format!("({a}, {b}) from {x} at t = {time}: error {err:e}"));
                }
            }
            Ok(())
        });
    }
    t.run("symmetric mixing", |t| {
        let q = two_state_generator(&1.0, &1.0)?;
        for eps in [0.05, 0.1, 0.25, 0.4] {
            let got = mixing_time(&q, 0, eps)?;
            let expected = 0.5 * (1.0 / (2.0 * eps)).ln();
            t.check((got - expected).abs() <= 1e-5, || {
                format!("eps = {eps}: t_mix = {got}, expected {expected}")
            });
        }
        Ok(())
    });
}

fn hierarchy<S: Scalar>(t: &mut Tally, name: &str, m: &BooleanMeasure<S>, opts: &SobolevOptions) -> Result<()> {
    if m.len() < 2 {
        return Ok(());
    }
    let q = build_mcmc(m);
    let f = sobolev_estimate(&q, FormKind::Lsi, opts)?.witness;
    let (rl, rm, rp) = (ratio_lsi(&q, &f)?, ratio_mlsi(&q, &f)?, ratio_pi(&q, &f)?);
    t.check(le(4.0 * rl, rm, 1e-9), || format!("{name}: 4 rho(f) = {} > alpha(f) = {rm}", 4.0 * rl));
    t.check(le(rm, 2.0 * rp, 1e-9), || format!("{name}: alpha(f) = {rm} > 2 lambda(f) = {}", 2.0 * rp));
    Ok(())
}

fn main_bounds<S: Scalar>(t: &mut Tally, name: &str, m: &BooleanMeasure<S>, opts: &SobolevOptions) -> Result<()> {
    if m.len() < 2 {
        return Ok(());
    }
    let q = build_mcmc(m);
    let stats = validate(&q)?;
    let (big, small) = match (&stats.big_m, &stats.m) {
        (Some(b), Some(s)) => (b.as_f64(), s.as_f64()),
        _ => return Err(Error::Validation("M and m are undefined on a multi-state support".into())),
    };
    let lambda = poincare_exact(&q)?.value;
    let alpha = sobolev_estimate(&q, FormKind::Mlsi, opts)?.value;
    let rho = sobolev_estimate(&q, FormKind::Lsi, opts)?.value;
    let (lb_l, lb_a) = (big.max(2.0 * small), big.max(4.0 * small));
    t.check(lambda >= lb_l - 1e-10, || format!("{name}: lambda = {lambda} < {lb_l}"));
    t.check(alpha >= lb_a - 1e-6, || format!("{name}: alpha estimate {alpha} < {lb_a}"));
    t.check(rho >= small - 1e-6, || format!("{name}: rho estimate {rho} < {small}"));
    Ok(())
}

fn homogeneous_mlsi<S: Scalar>(t: &mut Tally, name: &str, m: &BooleanMeasure<S>) -> Result<()> {
    let k = match homogeneity(m) {
        Some(k) if m.len() >= 2 => k,
        _ => return Ok(()),
    };
    let n = m.dimension();
    let q = build_mcmc(m);
    let cert = certify_main(m, &q, Target::Alpha, &CertifyOptions::default())?;
    let expected = S::from_ratio(1, (2 * k * n) as i64);
    t.check(cert.holds, || format!("{name}: certificate failed at {:?}", cert.failed_check));
    t.check(
        cert.claimed_bound.as_ref().is_some_and(|b| b.approx_eq(&expected, 0.0)),
        || format!("{name}: certified alpha {:?}, expected 1/{}", cert.claimed_bound, 2 * k * n),
    );
    let constant = 1.0 / (2 * k * n) as f64;
    for x in 0..m.len() {
        let pi = m.weight(x).as_f64();
        if pi >= 1.0 / E {
            continue;
        }
        for eps in [0.25, 0.125] {
            let got = mixing_time(&q, x, eps)?;
            let bound = mixing_bound(BoundKind::Mlsi, constant, pi, eps)?.value;
            t.check(got <= bound, || format!("{name}: t_mix({}, {eps}) = {got} > {bound}", m.state(x)));
        }
    }
    Ok(())
}

fn synthesis<S: Scalar>(t: &mut Tally, name: &str, m: &BooleanMeasure<S>) -> Result<()> {
    let r = synthesize_flip_swap(m)?;
    let n = m.dimension();
    let expected_bound = match homogeneity(m) {
        Some(k) => S::from_count(2 * k),
        None => S::from_count(n),
    };
    t.check(r.delta_bound == expected_bound, || {
        format!("{name}: delta bound {} instead of {}", r.delta_bound.render(), expected_bound.render())
    });
    t.check(r.delta_within_bound(), || {
        format!("{name}: delta {} exceeds {}", r.delta.render(), r.delta_bound.render())
    });
    t.check(r.diagonal_failures.is_empty(), || format!("{name}: {:?}", r.diagonal_failures));
    if m.len() < 2 {
        return Ok(());
    }
    let stats = validate(&r.averaged)?;
    t.check(stats.flip_swap, || format!("{name}: synthesized walk is not flip-swap"));
    let normalized = r
        .normalized
        .as_ref()
        .ok_or_else(|| Error::Validation("synthesized walk has no normalization".into()))?;
    let lambda = poincare_exact(normalized)?.value;
    let floor = 1.0 / r.delta_bound.as_f64();
    t.check(lambda >= floor - 1e-9, || format!("{name}: normalized lambda {lambda} < {floor}"));
    Ok(())
}

fn random_positive(rng: &mut ChaCha8Rng, size: usize) -> Result<Observable> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    Observable::new((0..size).map(|_| f64::exp(normal.sample(rng))).collect())
}

fn identities<S: Scalar>(t: &mut Tally, name: &str, m: &BooleanMeasure<S>, mut rng: ChaCha8Rng) -> Result<()> {
    if m.len() < 2 {
        return Ok(());
    }
    let q = build_mcmc(m);
    for ell in 0..m.dimension() {
        let d = match split_decomposition(&q, ell) {
            Ok(d) => d,
            Err(Error::Split { .. }) => continue,
            Err(e) => return Err(e),
        };
        for _ in 0..100 {
            let f = random_positive(&mut rng, m.len())?;
            let r = identity_check(&d, &f)?;
            t.check(r.max_residual <= 1e-10, || {
                format!("{name}, split {ell}: identity residual {:e}", r.max_residual)
            });
            for j in jensen_check(&d, &f)? {
                t.check(j.holds, || {
                    format!("{name}, split {ell}, {:?}: averaged {} < projected {}", j.kind, j.averaged, j.projected)
                });
            }
        }
    }
    Ok(())
}

fn chi_bookkeeping<S: Scalar>(t: &mut Tally, name: &str, m: &BooleanMeasure<S>) -> Result<()> {
    let r = synthesize_flip_swap(m)?;
    for w in &r.per_coordinate {
        let Some(kappa) = &w.coupling else { continue };
        let d = split_decomposition_with(&w.walk, w.coordinate, kappa)?;
        let report = chi(&d)?;
        let ell = w.coordinate;
        let Some(c) = &report.chi else {
            t.check(false, || format!("{name}, coordinate {ell}: no coupled pair"));
            continue;
        };
        let via0 = d.masses[0].clone() / d.projected_rate(1, 0).clone();
        let via1 = d.masses[1].clone() / d.projected_rate(0, 1).clone();
        t.check(c.approx_eq(&via0, 1e-10) && c.approx_eq(&via1, 1e-10), || {
            format!("{name}, coordinate {ell}: chi {} vs {} and {}", c.render(), via0.render(), via1.render())
        });
        for p in &report.pairs {
            t.check(p.crude_holds && p.crude_floor.approx_le(c, 1e-10), || {
                format!("{name}, coordinate {ell}: crude floor {} above chi {}", p.crude_floor.render(), c.render())
            });
        }
    }
    Ok(())
}

fn concentration<S: Scalar>(t: &mut Tally, name: &str, m: &BooleanMeasure<S>, mut rng: ChaCha8Rng) -> Result<()> {
    if m.len() < 2 {
        return Ok(());
    }
    let q = build_mcmc(m);
    let cert = certify_main(m, &q, Target::Alpha, &CertifyOptions::default())?;
    t.check(cert.holds, || format!("{name}: alpha certificate failed at {:?}", cert.failed_check));
    let alpha = cert
        .claimed_bound
        .as_ref()
        .ok_or_else(|| Error::Validation("no certified alpha on a multi-state support".into()))?
        .as_f64();
    let homogeneous = homogeneity(m).is_some();
    let mut drawn = 0;
    while drawn < 20 {
        let raw = Observable::new((0..m.len()).map(|_| rng.random::<f64>()).collect())?;
        let lip = lipschitz_constant(&raw, m, Metric::Hamming)?;
        if lip == 0.0 {
            continue;
        }
        drawn += 1;
        let f = raw.map(|v| v / lip)?;
        let grid = default_grid(&f, crate::concentration::DEFAULT_GRID_POINTS);
        let h = herbst_check(m, &q, &f, alpha, &grid)?;
        t.check(h.all_pass, || format!("{name}: Herbst bound violated for {:?}", f.values()));
        if homogeneous {
            let p = pemantle_peres_check(m, &f, &grid, Metric::Hamming)?;
            t.check(p.all_pass, || format!("{name}: Pemantle-Peres bound violated for {:?}", f.values()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_shape() {
        let c = corpus(0).unwrap();
        assert_eq!(c.len(), 16);
        let sizes: Vec<usize> = c.iter().map(|e| with_measure!(&e.measure, m => m.len())).collect();
        assert_eq!(&sizes[..4], &[2, 4, 8, 16]);
        assert_eq!(&sizes[5..9], &[1, 3, 3, 1]);
        assert_eq!(&sizes[9..12], &[6, 10, 20]);
        assert_eq!(&sizes[12..15], &[3, 4, 16]);
        assert_eq!(sizes[15], 32);
    }

    #[test]
    fn kernel_is_symmetric_psd() {
        let l = random_psd_kernel(5, 0);
        for i in 0..5 {
            assert!(l[i][i] > 0.0);
            for j in 0..5 {
                assert_eq!(l[i][j], l[j][i]);
            }
        }
        assert_eq!(l, random_psd_kernel(5, 0));
    }

    #[test]
    fn outcome_line_format() {
        let o = CriterionOutcome {
            id: 3,
            title: "SCP verdicts",
            pass: false,
            checks: 4,
            failures: vec!["x".into()],
        };
        assert_eq!(o.line(), "criterion  3 [FAIL] SCP verdicts (4 checks, 1 failed; first: x)");
    }
}
