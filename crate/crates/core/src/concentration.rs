//! Sub-Gaussian tail bounds checked against exact enumerated tails.

use std::str::FromStr;

use serde::Serialize;

use crate::chain::Generator;
use crate::error::{Error, Result};
use crate::functional::Observable;
use crate::lattice_measure::{homogeneity, BooleanMeasure};
use crate::scalar::Scalar;

/// `v(f) = max_x Σ_y Q(x,y) [f(y) − f(x)]₊²`.
pub fn quad_variation<S: Scalar>(q: &Generator<S>, f: &Observable) -> Result<f64> {
    let v = f.values();
    if v.len() != q.size() {
        return Err(Error::Dimension {
            left: v.len(),
            right: q.size(),
        });
    }
    let mut best = 0.0f64;
    for x in 0..q.size() {
        let mut acc = 0.0;
        for y in 0..q.size() {
            let rise = v[y] - v[x];
            if y != x && rise > 0.0 {
                acc += q.rate(x, y).as_f64() * rise * rise;
            }
        }
        best = best.max(acc);
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Number of differing coordinates.
    #[default]
    Hamming,
    /// Fewest flips and swaps between two states: `max(#1→0, #0→1)`.
    FlipSwap,
}

impl Metric {
    pub fn distance(self, x: u64, y: u64) -> u32 {
        match self {
            Metric::Hamming => (x ^ y).count_ones(),
            Metric::FlipSwap => (x & !y).count_ones().max((y & !x).count_ones()),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hamming" => Ok(Metric::Hamming),
            "flip-swap" | "flipswap" | "swap" => Ok(Metric::FlipSwap),
            other => Err(Error::Parse(format!("unknown metric {other:?}"))),
        }
    }
}

/// `max |f(x) − f(y)| / d(x, y)` over distinct support pairs.
pub fn lipschitz_constant<S: Scalar>(f: &Observable, m: &BooleanMeasure<S>, metric: Metric) -> Result<f64> {
    if m.len() < 2 {
        return Err(Error::Precondition("Lipschitz constant needs two support states".into()));
    }
    if f.len() != m.len() {
        return Err(Error::Dimension {
            left: f.len(),
            right: m.len(),
        });
    }
    let (s, v) = (m.support(), f.values());
    let mut best = 0.0f64;
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            best = best.max((v[i] - v[j]).abs() / metric.distance(s[i], s[j]) as f64);
        }
    }
    Ok(best)
}

/// `count` evenly spaced thresholds from 0 to the range of `f`.
pub fn default_grid(f: &Observable, count: usize) -> Vec<f64> {
    let v = f.values();
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = if v.is_empty() { 0.0 } else { hi - lo };
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count).map(|i| range * i as f64 / (count - 1) as f64).collect(),
    }
}

pub const DEFAULT_GRID_POINTS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailPoint {
    pub a: f64,
    pub exact: f64,
    pub bound: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "bound", rename_all = "kebab-case")]
pub enum TailConstants {
    Herbst { alpha: f64, v: f64 },
    PemantlePeres { k: usize, lipschitz: f64, metric: Metric },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailReport {
    pub f: Observable,
    pub mean: f64,
    pub points: Vec<TailPoint>,
    pub constants: TailConstants,
    /// The observable was divided by this Lipschitz constant before checking.
    pub rescaled_by: Option<f64>,
    /// The bound degenerates to 1 (no information).
    pub vacuous: bool,
    pub all_pass: bool,
}

/// `π(f ≥ E f + a)`, counting values within rounding of the threshold.
pub fn upper_tail<S: Scalar>(m: &BooleanMeasure<S>, f: &Observable, mean: f64, a: f64) -> f64 {
    let v = f.values();
    let scale = v.iter().fold(mean.abs() + a.abs(), |s, x| s.max(x.abs())).max(1.0);
    let threshold = mean + a - 1e-12 * scale;
    m.weights()
        .iter()
        .zip(v)
        .filter(|(_, &x)| x >= threshold)
        .fold(0.0, |acc, (w, _)| acc + w.as_f64())
}

fn mean_of<S: Scalar>(m: &BooleanMeasure<S>, f: &Observable) -> f64 {
    m.weights().iter().zip(f.values()).map(|(w, x)| w.as_f64() * x).sum()
}

fn tail_points<S: Scalar>(
    m: &BooleanMeasure<S>,
    f: &Observable,
    grid: &[f64],
    bound: impl Fn(f64) -> f64,
) -> Result<(f64, Vec<TailPoint>)> {
    if let Some(a) = grid.iter().find(|a| !(**a >= 0.0)) {
        return Err(Error::Domain(format!("tail threshold {a} is negative")));
    }
    let mean = mean_of(m, f);
    let points = grid
        .iter()
        .map(|&a| {
            let exact = upper_tail(m, f, mean, a);
            let b = bound(a);
            TailPoint {
                a,
                exact,
                bound: b,
                margin: b - exact,
                pass: exact <= b + 1e-12,
            }
        })
        .collect();
    Ok((mean, points))
}

/// Checks `π(f ≥ E f + a) ≤ exp(−α a² / 4v(f))` on a grid.
pub fn herbst_check<S: Scalar>(
    m: &BooleanMeasure<S>,
    q: &Generator<S>,
    f: &Observable,
    alpha_lb: f64,
    grid: &[f64],
) -> Result<TailReport> {
    if q.measure().support() != m.support() {
        return Err(Error::Validation("generator and measure have different supports".into()));
    }
    if !(alpha_lb >= 0.0) {
        return Err(Error::Domain(format!("alpha lower bound must be non-negative, got {alpha_lb}")));
    }
    let v = quad_variation(q, f)?;
    let vacuous = v == 0.0 || alpha_lb == 0.0;
    let (mean, points) = tail_points(m, f, grid, |a| {
        if vacuous {
            1.0
        } else {
            (-alpha_lb * a * a / (4.0 * v)).exp()
        }
    })?;
    Ok(TailReport {
        f: f.clone(),
        mean,
        all_pass: points.iter().all(|p| p.pass),
        points,
        constants: TailConstants::Herbst { alpha: alpha_lb, v },
        rescaled_by: None,
        vacuous,
    })
}

/// Checks `π(f ≥ E f + a) ≤ exp(−a² / 8k)` for a `k`-homogeneous measure,
/// rescaling `f` to be 1-Lipschitz under `metric` if needed.
pub fn pemantle_peres_check<S: Scalar>(
    m: &BooleanMeasure<S>,
    f: &Observable,
    grid: &[f64],
    metric: Metric,
) -> Result<TailReport> {
    let k = homogeneity(m)
        .ok_or_else(|| Error::Precondition("Pemantle-Peres bound needs a homogeneous measure".into()))?;
    let lipschitz = if m.len() < 2 { 0.0 } else { lipschitz_constant(f, m, metric)? };
    let (g, rescaled_by) = if lipschitz > 1.0 {
        (f.map(|x| x / lipschitz)?, Some(lipschitz))
    } else {
        (f.clone(), None)
    };
    let vacuous = k == 0;
    let (mean, points) = tail_points(m, &g, grid, |a| {
        if vacuous {
            1.0
        } else {
            (-a * a / (8.0 * k as f64)).exp()
        }
    })?;
    Ok(TailReport {
        f: g,
        mean,
        all_pass: points.iter().all(|p| p.pass),
        points,
        constants: TailConstants::PemantlePeres { k, lipschitz, metric },
        rescaled_by,
        vacuous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_bases_exchange, build_mcmc};
    use crate::functional::two_state_generator;
    use crate::lattice_measure::{conditioned_sum, spanning_tree, BitVector};
    use crate::scalar::Rational;

    fn obs<S: Scalar>(m: &BooleanMeasure<S>, f: impl FnMut(BitVector) -> f64) -> Observable {
        Observable::from_fn(m, f).unwrap()
    }

    fn slice42() -> BooleanMeasure<Rational> {
        conditioned_sum(&vec![Rational::from_ratio(1, 2); 4], 2).unwrap()
    }

    #[test]
    fn quad_variation_examples() {
        let q = two_state_generator(&1.0, &1.0).unwrap();
        assert_eq!(quad_variation(&q, &Observable::new(vec![0.0, 1.0]).unwrap()).unwrap(), 1.0);
        assert_eq!(quad_variation(&q, &Observable::new(vec![3.0, 3.0]).unwrap()).unwrap(), 0.0);
        let swap = conditioned_sum(&[Rational::from_ratio(1, 2), Rational::from_ratio(1, 2)], 1).unwrap();
        let v = quad_variation(&build_mcmc(&swap), &Observable::new(vec![0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(v, 0.25);
    }

    #[test]
    fn quad_variation_is_quadratic() {
        let m = slice42();
        let q = build_mcmc(&m);
        let f = obs(&m, |x| x.ones() as f64 + if x.get(0) { 0.3 } else { 0.0 });
        let base = quad_variation(&q, &f).unwrap();
        let scaled = quad_variation(&q, &f.map(|x| 2.5 * x).unwrap()).unwrap();
        assert!((scaled - 6.25 * base).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_examples() {
        let m = slice42();
        let sum = obs(&m, |x| x.ones() as f64);
        assert_eq!(lipschitz_constant(&sum, &m, Metric::Hamming).unwrap(), 0.0);
        let cube = crate::lattice_measure::product(&[0.5, 0.5, 0.5]).unwrap();
        let sum = obs(&cube, |x| x.ones() as f64);
        assert_eq!(lipschitz_constant(&sum, &cube, Metric::Hamming).unwrap(), 1.0);
        let twice = obs(&cube, |x| if x.get(0) { 2.0 } else { 0.0 });
        assert_eq!(lipschitz_constant(&twice, &cube, Metric::Hamming).unwrap(), 2.0);
        let flat = obs(&cube, |_| 1.0);
        assert_eq!(lipschitz_constant(&flat, &cube, Metric::Hamming).unwrap(), 0.0);
        assert_eq!(Metric::FlipSwap.distance(0b1100, 0b0011), 2);
        assert_eq!(Metric::FlipSwap.distance(0b1100, 0b0111), 2);
        assert_eq!(Metric::Hamming.distance(0b1100, 0b0011), 4);
    }

    #[test]
    fn herbst_on_slice() {
        let m = slice42();
        let q = build_mcmc(&m);
        let f = obs(&m, |x| (x.get(0) as u8 + x.get(1) as u8) as f64);
        let r = herbst_check(&m, &q, &f, 1.0 / 16.0, &[0.5, 1.0]).unwrap();
        assert!(r.all_pass);
        for p in &r.points {
            assert!((p.exact - 1.0 / 6.0).abs() < 1e-15);
        }
        let flat = obs(&m, |_| 2.0);
        let r = herbst_check(&m, &q, &flat, 1.0 / 16.0, &[0.0, 0.5]).unwrap();
        assert!(r.all_pass && r.vacuous);
        assert_eq!(r.points[1].exact, 0.0);
    }

    #[test]
    fn herbst_on_triangle_and_lower_tail() {
        let tri = spanning_tree::<Rational>(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let q = build_bases_exchange(&tri).unwrap();
        let f = obs(&tri, |x| x.get(0) as u8 as f64);
        let grid = default_grid(&f, DEFAULT_GRID_POINTS);
        assert_eq!(grid.len(), 16);
        assert!(herbst_check(&tri, &q, &f, 1.0 / 3.0, &grid).unwrap().all_pass);
        let neg = f.map(|x| -x).unwrap();
        assert!(herbst_check(&tri, &q, &neg, 1.0 / 3.0, &grid).unwrap().all_pass);
    }

    #[test]
    fn pemantle_peres_examples() {
        let m = slice42();
        let f = obs(&m, |x| (x.get(0) as u8 + x.get(1) as u8) as f64);
        let r = pemantle_peres_check(&m, &f, &[0.0, 1.0], Metric::Hamming).unwrap();
        assert!(r.all_pass);
        assert_eq!(r.points[0].bound, 1.0);
        assert!((r.points[1].exact - 1.0 / 6.0).abs() < 1e-15);
        assert!((r.points[1].bound - (-1.0f64 / 16.0).exp()).abs() < 1e-15);

        let tri = spanning_tree::<Rational>(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let f = obs(&tri, |x| x.get(0) as u8 as f64);
        let r = pemantle_peres_check(&tri, &f, &[0.6], Metric::Hamming).unwrap();
        assert!((r.mean - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.points[0].exact, 0.0);

        let steep = obs(&tri, |x| 3.0 * x.get(0) as u8 as f64);
        let r = pemantle_peres_check(&tri, &steep, &[0.5], Metric::Hamming).unwrap();
        // spanning trees of a triangle sit at Hamming distance 2
        assert_eq!(r.rescaled_by, Some(1.5));

        let cube = crate::lattice_measure::product(&[0.5, 0.5]).unwrap();
        let f = obs(&cube, |x| x.ones() as f64);
        assert!(matches!(
            pemantle_peres_check(&cube, &f, &[0.5], Metric::Hamming),
            Err(Error::Precondition(_))
        ));
    }
}
