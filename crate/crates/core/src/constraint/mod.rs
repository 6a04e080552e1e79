//! Metadata constraints: a small boolean grammar over categorical fields,
//! the time field and measures, evaluated per signal and intersected with a
//! geometric ranking.

mod ast;
mod parser;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{CompareOp, ConstraintExpr, Literal};
pub use parser::parse;

use crate::model::{Dataset, FieldKind, RankedMatches, Schema, Signal};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("type mismatch on `{field}`: {message}")]
    TypeMismatch { field: String, message: String },
    #[error("invalid range on `{field}`: {message}")]
    InvalidRange { field: String, message: String },
}

/// Whether `signal` satisfies `expr`.
///
/// Time ranges test overlap with the signal's time extent; value ranges and
/// measure comparisons hold when at least one point satisfies them. The
/// expression is assumed valid for `schema`; unknown fields never match.
pub fn evaluate(expr: &ConstraintExpr, signal: &Signal, schema: &Schema) -> bool {
    match expr {
        ConstraintExpr::Compare { field, op, value } => match (schema.field_kind(field), value) {
            (Some(FieldKind::Categorical), Literal::Text(v)) => {
                signal.dims().get(field).is_some_and(|d| op.holds(d, v))
            }
            (Some(FieldKind::Measure(m)), Literal::Number(v)) => {
                signal.points().iter().any(|p| op.holds(&p.y[m], v))
            }
            (Some(FieldKind::Time), Literal::Time(v)) => {
                let r = signal.time_range();
                match op {
                    CompareOp::Eq => r.contains(*v),
                    CompareOp::Ne => !(r.min == *v && r.max == *v),
                    CompareOp::Lt => r.min < *v,
                    CompareOp::Le => r.min <= *v,
                    CompareOp::Gt => r.max > *v,
                    CompareOp::Ge => r.max >= *v,
                }
            }
            _ => false,
        },
        ConstraintExpr::In { field, values } => signal
            .dims()
            .get(field)
            .is_some_and(|d| values.iter().any(|v| v == d)),
        ConstraintExpr::TimeRange { start, end } => {
            let r = signal.time_range();
            start.is_none_or(|s| s <= r.max) && end.is_none_or(|e| r.min <= e)
        }
        ConstraintExpr::ValueRange { measure, lo, hi } => match schema.field_kind(measure) {
            Some(FieldKind::Measure(m)) => signal.points().iter().any(|p| {
                let y = p.y[m];
                lo.is_none_or(|l| l <= y) && hi.is_none_or(|h| y <= h)
            }),
            _ => false,
        },
        ConstraintExpr::And { left, right } => {
            evaluate(left, signal, schema) && evaluate(right, signal, schema)
        }
        ConstraintExpr::Or { left, right } => {
            evaluate(left, signal, schema) || evaluate(right, signal, schema)
        }
        ConstraintExpr::Not { inner } => !evaluate(inner, signal, schema),
    }
}

/// Ids of the signals in `dataset` satisfying `expr`.
pub fn satisfying_ids(expr: &ConstraintExpr, dataset: &Dataset) -> HashSet<String> {
    dataset
        .signals()
        .iter()
        .filter(|s| evaluate(expr, s, dataset.schema()))
        .map(|s| s.id().to_string())
        .collect()
}

/// Keeps the ranked entries whose id is in `allowed`, preserving order.
pub fn intersect(ranked: &RankedMatches, allowed: &HashSet<String>) -> RankedMatches {
    RankedMatches {
        entries: ranked
            .entries
            .iter()
            .filter(|e| allowed.contains(&e.signal_id))
            .cloned()
            .collect(),
    }
}

/// A constraint as supplied by a client: grammar text or a structured tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Annotation {
    Text(String),
    Expr(ConstraintExpr),
}

/// Turns client annotations into constraints. Implementations other than
/// the structured one (free-form text, sketched annotations) plug in here.
pub trait AnnotationInterpreter: Send + Sync {
    fn interpret(&self, annotation: &Annotation, schema: &Schema) -> Result<ConstraintExpr, ConstraintError>;
}

/// Accepts the textual grammar or an already structured expression.
#[derive(Debug, Clone, Copy, Default)]
pub struct StructuredInterpreter;

impl AnnotationInterpreter for StructuredInterpreter {
    fn interpret(&self, annotation: &Annotation, schema: &Schema) -> Result<ConstraintExpr, ConstraintError> {
        let expr = match annotation {
            Annotation::Text(src) => parse(src, schema)?,
            Annotation::Expr(e) => e.clone(),
        };
        expr.validate(schema)?;
        Ok(expr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Point, RankedEntry};
    use std::collections::BTreeMap;

    fn schema() -> Schema {
        Schema::new(
            "year",
            vec!["country".into(), "region".into()],
            vec!["price".into(), "volume".into()],
        )
        .unwrap()
    }

    fn year(y: i32) -> f64 {
        crate::time::parse_timestamp(&y.to_string()).unwrap()
    }

    fn signal(country: &str, region: &str, years: &[i32], prices: &[f64]) -> Signal {
        let dims = BTreeMap::from([
            ("country".to_string(), country.to_string()),
            ("region".to_string(), region.to_string()),
        ]);
        let points = years
            .iter()
            .zip(prices)
            .map(|(&y, &p)| Point {
                t: year(y),
                y: vec![p, 1.0],
            })
            .collect();
        Signal::new(format!("{country}/{region}"), dims, points).unwrap()
    }

    #[test]
    fn year_literal_becomes_open_time_range() {
        let e = parse("year >= 1970", &schema()).unwrap();
        assert_eq!(
            e,
            ConstraintExpr::TimeRange {
                start: Some(0.0),
                end: None
            }
        );
    }

    #[test]
    fn precedence_and_keywords() {
        let s = schema();
        let e = parse("country = 'FR' or country = 'DE' AND NOT region = \"EU\"", &s).unwrap();
        let fr = ConstraintExpr::Compare {
            field: "country".into(),
            op: CompareOp::Eq,
            value: Literal::Text("FR".into()),
        };
        let de = ConstraintExpr::Compare {
            field: "country".into(),
            op: CompareOp::Eq,
            value: Literal::Text("DE".into()),
        };
        let eu = ConstraintExpr::Compare {
            field: "region".into(),
            op: CompareOp::Eq,
            value: Literal::Text("EU".into()),
        };
        assert_eq!(e, fr.or(de.and(eu.negate())));
    }

    #[test]
    fn measure_ranges_and_strict_compares() {
        let s = schema();
        assert_eq!(
            parse("price BETWEEN 1 AND 2.5", &s).unwrap(),
            ConstraintExpr::ValueRange {
                measure: "price".into(),
                lo: Some(1.0),
                hi: Some(2.5)
            }
        );
        assert_eq!(
            parse("price > -3e2", &s).unwrap(),
            ConstraintExpr::Compare {
                field: "price".into(),
                op: CompareOp::Gt,
                value: Literal::Number(-300.0)
            }
        );
        assert_eq!(
            parse("year = '1980-06-01'", &s).unwrap(),
            ConstraintExpr::TimeRange {
                start: Some(328_665_600.0),
                end: Some(328_665_600.0)
            }
        );
    }

    #[test]
    fn errors_carry_positions_and_kinds() {
        let s = schema();
        assert!(matches!(
            parse("country = ", &s),
            Err(ConstraintError::Syntax { position: 10, .. })
        ));
        assert!(matches!(
            parse("country = 'x' 'y'", &s),
            Err(ConstraintError::Syntax { position: 14, .. })
        ));
        assert_eq!(
            parse("colour = 'red'", &s),
            Err(ConstraintError::UnknownField("colour".into()))
        );
        assert!(matches!(
            parse("price = 'cheap'", &s),
            Err(ConstraintError::TypeMismatch { .. })
        ));
        assert!(matches!(
            parse("price IN (1, 2)", &s),
            Err(ConstraintError::TypeMismatch { .. })
        ));
        assert!(matches!(
            parse("price BETWEEN 3 AND 1", &s),
            Err(ConstraintError::InvalidRange { .. })
        ));
        assert!(matches!(
            parse("year > 1970.5", &s),
            Err(ConstraintError::TypeMismatch { .. })
        ));
        assert!(matches!(
            parse("(country = 'x'", &s),
            Err(ConstraintError::Syntax { .. })
        ));
        assert!(matches!(
            parse("country = 'x", &s),
            Err(ConstraintError::Syntax { position: 10, .. })
        ));
    }

    #[test]
    fn categorical_numbers_keep_spelling() {
        let e = parse("region IN (007, 'b')", &schema()).unwrap();
        assert_eq!(
            e,
            ConstraintExpr::In {
                field: "region".into(),
                values: vec!["007".into(), "b".into()]
            }
        );
    }

    #[test]
    fn evaluation_semantics() {
        let s = schema();
        let a = signal("FR", "EU", &[1960, 1975], &[1.0, 5.0]);
        let check = |src: &str| evaluate(&parse(src, &s).unwrap(), &a, &s);
        assert!(check("year >= 1970"));
        assert!(check("year BETWEEN 1950 AND 1960"));
        assert!(!check("year >= 1976"));
        assert!(!check("year < 1960"));
        assert!(check("price >= 4"));
        assert!(!check("price BETWEEN 2 AND 4"));
        assert!(check("price > 4.5 AND country IN ('FR', 'DE')"));
        assert!(!check("NOT country = 'FR'"));
        assert!(check("country < 'GB'"));
        assert!(check("volume = 1"));
    }

    #[test]
    fn printing_round_trips() {
        let s = schema();
        for src in [
            "year >= 1970",
            "country = 'O\\'Neil' OR (region != 'x' AND NOT price < 3)",
            "a OR b",
            "country IN ('a', 'b') AND (country = 'c' OR country = 'd')",
            "NOT (year BETWEEN '2000-01-01T00:00:00.5Z' AND 2001)",
            "price = 0.1 AND (volume <= -2 AND volume >= -10)",
        ] {
            let Ok(e) = parse(src, &s) else {
                continue;
            };
            let printed = e.to_text(&s);
            assert_eq!(parse(&printed, &s).unwrap(), e, "{printed}");
        }
    }

    #[test]
    fn structured_annotations_are_validated() {
        let s = schema();
        let bad = Annotation::Expr(ConstraintExpr::ValueRange {
            measure: "country".into(),
            lo: Some(1.0),
            hi: None,
        });
        assert!(matches!(
            StructuredInterpreter.interpret(&bad, &s),
            Err(ConstraintError::TypeMismatch { .. })
        ));
        let json = r#"{"type":"time_range","start":0.0,"end":null}"#;
        let a: Annotation = serde_json::from_str(json).unwrap();
        assert_eq!(
            StructuredInterpreter.interpret(&a, &s).unwrap(),
            ConstraintExpr::TimeRange {
                start: Some(0.0),
                end: None
            }
        );
        let t: Annotation = serde_json::from_str(r#""year >= 1970""#).unwrap();
        assert_eq!(
            StructuredInterpreter.interpret(&t, &s).unwrap(),
            ConstraintExpr::TimeRange {
                start: Some(0.0),
                end: None
            }
        );
    }

    #[test]
    fn intersect_keeps_order() {
        let ranked = RankedMatches::from_unsorted(vec![
            RankedEntry {
                signal_id: "b".into(),
                score: 2.0,
                alignment: None,
            },
            RankedEntry {
                signal_id: "a".into(),
                score: 1.0,
                alignment: None,
            },
            RankedEntry {
                signal_id: "c".into(),
                score: 3.0,
                alignment: None,
            },
        ]);
        let allowed: HashSet<String> = ["c".to_string(), "a".to_string()].into();
        assert_eq!(intersect(&ranked, &allowed).ids(), vec!["a", "c"]);
    }
}
