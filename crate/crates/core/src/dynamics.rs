//! Semigroup evolution by uniformization, total variation, mixing times and
//! the functional-inequality mixing bounds.

use std::str::FromStr;

use serde::Serialize;

use crate::chain::{ensure_irreducible, Generator};
use crate::decompose::{certify_main, CertifyOptions, Target};
use crate::error::{Error, Result};
use crate::functional::poincare_exact;
use crate::lattice_measure::render_bits;
use crate::scalar::Scalar;

/// Largest neglected Poisson mass in [`evolve`].
pub const POISSON_TAIL: f64 = 1e-12;
/// Absolute time resolution of [`mixing_time`].
pub const TIME_TOLERANCE: f64 = 1e-6;
const DOUBLING_CAP: usize = 200;

/// Row `x` of `e^{tQ}` as a Poisson mixture of powers of `P = I + Q/Δ`.
pub fn evolve<S: Scalar>(q: &Generator<S>, x: usize, t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("time must be a finite t >= 0, got {t}")));
    }
    let size = q.size();
    if x >= size {
        return Err(Error::Domain(format!("start index {x} outside the support")));
    }
    let mut point = vec![0.0; size];
    point[x] = 1.0;
    let delta = q.delta().as_f64();
    if t == 0.0 || delta == 0.0 {
        return Ok(point);
    }
    let rates: Vec<Vec<(usize, f64)>> = (0..size)
        .map(|i| {
            (0..size)
                .filter(|&j| j != i)
                .map(|j| (j, q.rate(i, j).as_f64() / delta))
                .filter(|&(_, p)| p > 0.0)
                .collect()
        })
        .collect();
    let stay: Vec<f64> = (0..size).map(|i| 1.0 + q.rate(i, i).as_f64() / delta).collect();

    let lambda = delta * t;
    let log_lambda = lambda.ln();
    let mut log_w = -lambda;
    let mut current = point;
    let mut out = vec![0.0; size];
    let mut j = 0usize;
    loop {
        let w = log_w.exp();
        out.iter_mut().zip(&current).for_each(|(o, c)| *o += w * c);
        let next_log_w = log_w + log_lambda - ((j + 1) as f64).ln();
        let ratio = lambda / (j + 2) as f64;
        if (j + 1) as f64 > lambda && ratio < 1.0 && next_log_w.exp() / (1.0 - ratio) <= POISSON_TAIL {
            break;
        }
        let mut next = vec![0.0; size];
        for (i, &c) in current.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            next[i] += c * stay[i];
            for &(k, p) in &rates[i] {
                next[k] += c * p;
            }
        }
        current = next;
        log_w = next_log_w;
        j += 1;
    }
    Ok(out)
}

/// `‖μ − ν‖_TV`, half the `ℓ¹` distance.
pub fn tv(mu: &[f64], nu: &[f64]) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::Dimension {
            left: mu.len(),
            right: nu.len(),
        });
    }
    Ok(0.5 * mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Distance to stationarity from `x` at time `t`.
pub fn distance_to_stationarity<S: Scalar>(q: &Generator<S>, x: usize, t: f64) -> Result<f64> {
    tv(&evolve(q, x, t)?, &q.measure().weights_f64())
}

/// `min{t ≥ 0 : ‖p_t(x,·) − π‖_TV ≤ ε}` by doubling then bisection; returns
/// the upper end of the final bracket.
pub fn mixing_time<S: Scalar>(q: &Generator<S>, x: usize, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    ensure_irreducible(q)?;
    let d = |t: f64| distance_to_stationarity(q, x, t);
    if d(0.0)? <= epsilon {
        return Ok(0.0);
    }
    let delta = q.delta().as_f64();
    let (mut lo, mut hi) = (0.0, 1.0 / delta);
    let mut doublings = 0;
    while d(hi)? > epsilon {
        doublings += 1;
        if doublings > DOUBLING_CAP {
            return Err(Error::NoConvergence(format!(
                "distance still above {epsilon} at t = {hi}"
            )));
        }
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > TIME_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if d(mid)? <= epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Pi,
    Mlsi,
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pi" | "poincare" | "lambda" => Ok(BoundKind::Pi),
            "mlsi" | "alpha" => Ok(BoundKind::Mlsi),
            other => Err(Error::Parse(format!("unknown bound kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MixingBound {
    pub kind: BoundKind,
    pub value: f64,
    /// `log log(1/π(x))` was negative (`π(x) ≥ 1/e`) and replaced by 0.
    pub loglog_floored: bool,
}

fn loglog(pi_x: f64) -> (f64, bool) {
    let v = (1.0 / pi_x).ln().ln();
    if v < 0.0 || v.is_nan() {
        (0.0, true)
    } else {
        (v, false)
    }
}

fn check_inputs(constant: f64, pi_x: f64, epsilon: f64) -> Result<()> {
    if !(constant > 0.0) || !constant.is_finite() {
        return Err(Error::Domain(format!("constant must be positive, got {constant}")));
    }
    if !(pi_x > 0.0 && pi_x < 1.0) {
        return Err(Error::Domain(format!("pi(x) must lie in (0, 1), got {pi_x}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

/// `(1/2λ)(log 1/π(x) + log 1/4ε²)` or `(1/α)(log log 1/π(x) + log 1/2ε²)`.
pub fn mixing_bound(kind: BoundKind, constant: f64, pi_x: f64, epsilon: f64) -> Result<MixingBound> {
    check_inputs(constant, pi_x, epsilon)?;
    let eps2 = epsilon * epsilon;
    Ok(match kind {
        BoundKind::Pi => MixingBound {
            kind,
            value: ((1.0 / pi_x).ln() + (1.0 / (4.0 * eps2)).ln()) / (2.0 * constant),
            loglog_floored: false,
        },
        BoundKind::Mlsi => {
            let (ll, floored) = loglog(pi_x);
            MixingBound {
                kind,
                value: (ll + (1.0 / (2.0 * eps2)).ln()) / constant,
                loglog_floored: floored,
            }
        }
    })
}

/// `2kn(log log 1/π(x) + log 2/ε²)`, the closed form for the Metropolis walk.
pub fn metropolis_bound(k: usize, n: usize, pi_x: f64, epsilon: f64) -> Result<MixingBound> {
    check_inputs(1.0, pi_x, epsilon)?;
    let (ll, floored) = loglog(pi_x);
    Ok(MixingBound {
        kind: BoundKind::Mlsi,
        value: (2 * k * n) as f64 * (ll + (2.0 / (epsilon * epsilon)).ln()),
        loglog_floored: floored,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantSource {
    pub value: f64,
    /// `exact` or `certificate`.
    pub provenance: &'static str,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingReport {
    pub start_state: String,
    pub epsilon: f64,
    pub t_mix: f64,
    pub bound_pi: Option<MixingBound>,
    pub bound_mlsi: Option<MixingBound>,
    pub lambda: Option<ConstantSource>,
    pub alpha: Option<ConstantSource>,
    /// `t_mix` is at most every available bound.
    pub within_bounds: bool,
}

/// Mixing time from `x` with bounds from the exact spectral gap and the
/// certified MLSI constant.
pub fn mixing_report<S: Scalar>(q: &Generator<S>, x: usize, epsilon: f64) -> Result<MixingReport> {
    let m = q.measure();
    let t_mix = mixing_time(q, x, epsilon)?;
    let pi_x = m.weight(x).as_f64();
    let gap = poincare_exact(q)?.value;
    let lambda = (gap > 0.0).then(|| ConstantSource {
        value: gap,
        provenance: "exact",
        detail: "spectral gap".into(),
    });
    let cert = certify_main(m, q, Target::Alpha, &CertifyOptions::default())?;
    let alpha = match (&cert.claimed_bound, cert.holds) {
        (Some(b), true) if b.gt_zero() => Some(ConstantSource {
            value: b.as_f64(),
            provenance: "certificate",
            detail: format!("alpha >= M(Q) = {} over {} nodes", b.render(), cert.nodes),
        }),
        _ => None,
    };
    let bound_pi = lambda
        .as_ref()
        .map(|c| mixing_bound(BoundKind::Pi, c.value, pi_x, epsilon))
        .transpose()?;
    let bound_mlsi = alpha
        .as_ref()
        .map(|c| mixing_bound(BoundKind::Mlsi, c.value, pi_x, epsilon))
        .transpose()?;
    let within_bounds = [&bound_pi, &bound_mlsi]
        .iter()
        .filter_map(|b| b.as_ref())
        .all(|b| t_mix <= b.value);
    Ok(MixingReport {
        start_state: render_bits(m.dimension(), m.support()[x]),
        epsilon,
        t_mix,
        bound_pi,
        bound_mlsi,
        lambda,
        alpha,
        within_bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_bases_exchange;
    use crate::functional::two_state_generator;
    use crate::lattice_measure::spanning_tree;
    use crate::scalar::Rational;

    #[test]
    fn two_state_semigroup() {
        let q = two_state_generator(&1.0, &1.0).unwrap();
        assert_eq!(evolve(&q, 0, 0.0).unwrap(), vec![1.0, 0.0]);
        for t in [0.1, 0.7, 2.0, 5.0] {
            let p = evolve(&q, 0, t).unwrap();
            let e = (-2.0 * t).exp() / 2.0;
            assert!((p[0] - (0.5 + e)).abs() < 1e-12 && (p[1] - (0.5 - e)).abs() < 1e-12);
        }
        let far = evolve(&q, 1, 40.0).unwrap();
        assert!(tv(&far, &[0.5, 0.5]).unwrap() < 1e-8);
        assert!(evolve(&q, 0, -1.0).is_err());
    }

    #[test]
    fn large_times_do_not_underflow() {
        let q = two_state_generator(&3.0, &1.0).unwrap();
        let p = evolve(&q, 0, 400.0).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!((p[1] - 0.75).abs() < 1e-10);
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(tv(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((tv(&[0.7, 0.3], &[0.5, 0.5]).unwrap() - 0.2).abs() < 1e-15);
        assert!(tv(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn mixing_time_examples() {
        let q = two_state_generator(&1.0, &1.0).unwrap();
        let t = mixing_time(&q, 0, 0.25).unwrap();
        assert!((t - 0.5 * 2f64.ln()).abs() < 1e-5);
        assert_eq!(mixing_time(&q, 0, 0.5).unwrap(), 0.0);
        assert!(mixing_time(&q, 0, 1.0).is_err());

        let tri = spanning_tree::<Rational>(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let g = build_bases_exchange(&tri).unwrap();
        let r = mixing_report(&g, 0, 0.125).unwrap();
        assert!(r.within_bounds, "{r:?}");
        assert_eq!(r.alpha.as_ref().unwrap().provenance, "certificate");
    }

    #[test]
    fn bound_formulas() {
        let b = mixing_bound(BoundKind::Mlsi, 0.25, 1.0 / 16.0, 0.125).unwrap();
        assert!((b.value - 4.0 * (16f64.ln().ln() + 32f64.ln())).abs() < 1e-12);
        assert!((b.value - 17.942).abs() < 1e-3);
        let b = mixing_bound(BoundKind::Pi, 0.5, 0.25, 0.25).unwrap();
        assert!((b.value - 2.0 * 4f64.ln()).abs() < 1e-12);
        let b = mixing_bound(BoundKind::Mlsi, 1.0, 0.5, 0.25).unwrap();
        assert!(b.loglog_floored);
        assert!((b.value - 8f64.ln()).abs() < 1e-12);
        assert!(mixing_bound(BoundKind::Mlsi, 0.0, 0.5, 0.25).is_err());
        assert!(mixing_bound(BoundKind::Pi, 1.0, 1.0, 0.25).is_err());
    }

    #[test]
    fn metropolis_form_is_looser_than_mlsi_form() {
        let (k, n) = (2, 4);
        for pi_x in [1e-3, 1.0 / 16.0, 0.2] {
            for eps in [0.25, 0.125] {
                let m = mixing_bound(BoundKind::Mlsi, 1.0 / (2 * k * n) as f64, pi_x, eps).unwrap();
                let c = metropolis_bound(k, n, pi_x, eps).unwrap();
                assert!((c.value - m.value - (2 * k * n) as f64 * 4f64.ln()).abs() < 1e-9);
            }
        }
    }
}
