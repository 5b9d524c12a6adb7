//! JSON layouts for measures and generators.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::{json, Value};

use crate::chain::{Generator, GeneratorView};
use crate::lattice_measure::{build_measure, AnyMeasure, BitVector, BooleanMeasure, MeasureSpec};
use crate::scalar::{rational_from_json, Scalar};
use crate::{Error, Result};

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SpecDoc {
    Explicit {
        weights: WeightsDoc,
    },
    Product {
        p: Vec<Value>,
    },
    ConditionedSum {
        p: Vec<Value>,
        k: usize,
    },
    LEnsemble {
        #[serde(rename = "L", alias = "l")]
        l: Vec<Vec<f64>>,
    },
    SpanningTree {
        vertices: usize,
        edges: Vec<(usize, usize)>,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WeightsDoc {
    Map(BTreeMap<String, Value>),
    List(Vec<(String, Value)>),
}

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string())
}

fn rationals(values: &[Value]) -> Result<Vec<crate::Rational>> {
    values.iter().map(rational_from_json).collect()
}

/// Reads `{"n": .., "spec": {"kind": ..}}`; a flattened `{"n": .., "kind": ..}` is also accepted.
pub fn parse_measure_spec(doc: &Value) -> Result<(usize, MeasureSpec)> {
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::Parse("measure document must be a JSON object".into()))?;
    let n = obj
        .get("n")
        .ok_or_else(|| Error::Parse("measure document is missing the \"n\" field".into()))?
        .as_u64()
        .ok_or_else(|| Error::Parse("\"n\" must be a non-negative integer".into()))?
        as usize;
    let spec_value = match obj.get("spec") {
        Some(s) => s.clone(),
        None => {
            let mut flat = obj.clone();
            flat.remove("n");
            Value::Object(flat)
        }
    };
    let spec: SpecDoc = serde_json::from_value(spec_value).map_err(parse_err)?;
    let spec = match spec {
        SpecDoc::Explicit { weights } => {
            let pairs = match weights {
                WeightsDoc::Map(m) => m.into_iter().collect::<Vec<_>>(),
                WeightsDoc::List(l) => l,
            };
            let mut entries = Vec::with_capacity(pairs.len());
            for (state, w) in pairs {
                let x = BitVector::parse(&state)?;
                entries.push((x, rational_from_json(&w)?));
            }
            MeasureSpec::Explicit(entries)
        }
        SpecDoc::Product { p } => MeasureSpec::Product(rationals(&p)?),
        SpecDoc::ConditionedSum { p, k } => MeasureSpec::ConditionedSum { p: rationals(&p)?, k },
        SpecDoc::LEnsemble { l } => MeasureSpec::LEnsemble(l),
        SpecDoc::SpanningTree { vertices, edges } => MeasureSpec::SpanningTree { vertices, edges },
    };
    Ok((n, spec))
}

pub fn parse_measure(doc: &Value) -> Result<AnyMeasure> {
    let (n, spec) = parse_measure_spec(doc)?;
    build_measure(n, &spec)
}

pub fn parse_measure_str(text: &str) -> Result<AnyMeasure> {
    let doc: Value = serde_json::from_str(text).map_err(parse_err)?;
    parse_measure(&doc)
}

/// Explicit measure document that `parse_measure` reads back.
pub fn measure_document<S: Scalar>(m: &BooleanMeasure<S>) -> Value {
    let weights: serde_json::Map<String, Value> = m
        .states()
        .zip(m.weights())
        .map(|(x, w)| (x.to_string(), Value::String(w.render())))
        .collect();
    json!({
        "n": m.dimension(),
        "spec": { "kind": "explicit", "weights": weights },
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RateDoc {
    from: String,
    to: String,
    rate: Value,
}

#[derive(Deserialize)]
struct GeneratorDoc {
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    support: Option<Vec<String>>,
    rates: Vec<RateDoc>,
}

/// Reads a generator file against `measure`; a listed support must match the measure's.
pub fn parse_generator<S: Scalar>(doc: &Value, measure: &BooleanMeasure<S>) -> Result<Generator<S>> {
    let doc: GeneratorDoc = serde_json::from_value(doc.clone()).map_err(parse_err)?;
    let n = measure.dimension();
    if let Some(dn) = doc.n {
        if dn != n {
            return Err(Error::Dimension { left: dn, right: n });
        }
    }
    let lookup = |s: &str| -> Result<usize> {
        let x = BitVector::parse(s)?;
        if x.dimension() != n {
            return Err(Error::Dimension { left: x.dimension(), right: n });
        }
        measure
            .index_of(x.bits())
            .ok_or_else(|| Error::Validation(format!("state {s} is outside the measure support")))
    };
    if let Some(support) = &doc.support {
        let mut listed = support.iter().map(|s| lookup(s)).collect::<Result<Vec<_>>>()?;
        listed.sort_unstable();
        listed.dedup();
        if listed.len() != measure.len() {
            return Err(Error::Validation(format!(
                "generator support lists {} states but the measure has {}",
                listed.len(),
                measure.len()
            )));
        }
    }
    let mut pairs = Vec::with_capacity(doc.rates.len());
    for r in &doc.rates {
        pairs.push((lookup(&r.from)?, lookup(&r.to)?, S::from_json(&r.rate)?));
    }
    Generator::from_pairs(measure.clone(), pairs)
}

pub fn generator_document<S: Scalar>(q: &Generator<S>) -> Value {
    serde_json::to_value(GeneratorView::from(q)).expect("generator view serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_mcmc;
    use crate::Rational;

    #[test]
    fn nested_and_flat_layouts() {
        let nested = json!({"n": 2, "spec": {"kind": "product", "p": ["1/2", "0.25"]}});
        let flat = json!({"n": 2, "kind": "product", "p": ["1/2", "0.25"]});
        assert_eq!(parse_measure(&nested).unwrap(), parse_measure(&flat).unwrap());
        match parse_measure(&nested).unwrap() {
            AnyMeasure::Exact(m) => {
                assert_eq!(m.prob(BitVector::parse("11").unwrap().bits()), Rational::from_ratio(1, 8))
            }
            AnyMeasure::Real(_) => panic!("product should be exact"),
        }
    }

    #[test]
    fn missing_n_is_rejected() {
        let err = parse_measure(&json!({"kind": "product", "p": [0.5]})).unwrap_err();
        assert!(err.to_string().contains("\"n\""));
    }

    #[test]
    fn unknown_kind_is_rejected() {
        assert!(parse_measure(&json!({"n": 1, "spec": {"kind": "gibbs"}})).is_err());
    }

    #[test]
    fn explicit_roundtrip() {
        let doc = json!({"n": 2, "spec": {"kind": "explicit",
            "weights": {"00": "2", "01": 1, "11": "1/2"}}});
        let AnyMeasure::Exact(m) = parse_measure(&doc).unwrap() else { panic!() };
        assert_eq!(m.len(), 3);
        let again = parse_measure(&measure_document(&m)).unwrap();
        assert_eq!(again, AnyMeasure::Exact(m));
    }

    #[test]
    fn l_ensemble_is_real() {
        let doc = json!({"n": 2, "spec": {"kind": "l_ensemble", "L": [[1.0, 0.5], [0.5, 1.0]]}});
        assert!(matches!(parse_measure(&doc).unwrap(), AnyMeasure::Real(_)));
    }

    #[test]
    fn generator_roundtrip() {
        let AnyMeasure::Exact(m) =
            parse_measure(&json!({"n": 3, "spec": {"kind": "spanning_tree", "vertices": 3,
                "edges": [[0, 1], [1, 2], [0, 2]]}}))
            .unwrap()
        else {
            panic!()
        };
        let q = build_mcmc(&m);
        let back = parse_generator(&generator_document(&q), &m).unwrap();
        assert_eq!(back.rates(), q.rates());
        let real = parse_generator(&generator_document(&q), &m.to_f64()).unwrap();
        assert!((real.rate(0, 1) - q.rate(0, 1).as_f64()).abs() < 1e-15);
    }

    #[test]
    fn generator_outside_support_is_rejected() {
        let AnyMeasure::Exact(m) =
            parse_measure(&json!({"n": 2, "spec": {"kind": "conditioned_sum", "p": [0.5, 0.5], "k": 1}}))
                .unwrap()
        else {
            panic!()
        };
        let doc = json!({"rates": [{"from": "01", "to": "11", "rate": 1}]});
        assert!(parse_generator(&doc, &m).is_err());
    }
}
