use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use trendsketch_core::constraint::{
    evaluate, intersect, parse, satisfying_ids, CompareOp, ConstraintExpr, Literal,
};
use trendsketch_core::model::{Dataset, Point, RankedEntry, RankedMatches, Schema, Signal};

fn schema() -> Schema {
    Schema::new(
        "time",
        vec!["name".into(), "basin".into()],
        vec!["wind".into(), "pressure".into()],
    )
    .unwrap()
}

const NAMES: [&str; 4] = ["ana", "bob", "cy", "O'Hara"];
const BASINS: [&str; 3] = ["Atlantic", "Pacific", "Indian Ocean"];

fn dataset() -> Dataset {
    let mut signals = Vec::new();
    for (i, name) in NAMES.iter().enumerate() {
        for (j, basin) in BASINS.iter().enumerate() {
            let dims = BTreeMap::from([
                ("name".to_string(), name.to_string()),
                ("basin".to_string(), basin.to_string()),
            ]);
            let start = (i * 3 + j) as f64 * 86_400.0 * 200.0;
            let points = (0..4)
                .map(|k| {
                    Point::new(
                        start + k as f64 * 86_400.0 * 30.0,
                        vec![(i + k) as f64 * 10.0, 1000.0 - (j * k) as f64],
                    )
                })
                .collect();
            signals.push(Signal::new(format!("{name}/{basin}"), dims, points).unwrap());
        }
    }
    Dataset::new("storms", schema(), signals).unwrap()
}

fn op() -> impl Strategy<Value = CompareOp> {
    prop_oneof![
        Just(CompareOp::Eq),
        Just(CompareOp::Ne),
        Just(CompareOp::Lt),
        Just(CompareOp::Le),
        Just(CompareOp::Gt),
        Just(CompareOp::Ge),
    ]
}

fn day() -> impl Strategy<Value = f64> {
    (0i64..2600).prop_map(|d| d as f64 * 86_400.0)
}

fn leaf() -> impl Strategy<Value = ConstraintExpr> {
    let text = prop_oneof![
        prop::sample::select(NAMES.to_vec()).prop_map(|s| ("name", s)),
        prop::sample::select(BASINS.to_vec()).prop_map(|s| ("basin", s)),
    ];
    let measure = prop::sample::select(vec!["wind", "pressure"]);
    prop_oneof![
        (text.clone(), op()).prop_map(|((f, v), op)| ConstraintExpr::Compare {
            field: f.into(),
            op,
            value: Literal::Text(v.into()),
        }),
        prop::collection::vec(prop::sample::select(BASINS.to_vec()), 1..3).prop_map(|vs| {
            ConstraintExpr::In {
                field: "basin".into(),
                values: vs.into_iter().map(String::from).collect(),
            }
        }),
        (prop::option::of(day()), prop::option::of(day()))
            .prop_filter("one bound", |(a, b)| a.is_some() || b.is_some())
            .prop_map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => ConstraintExpr::TimeRange {
                    start: Some(a.min(b)),
                    end: Some(a.max(b))
                },
                (a, b) => ConstraintExpr::TimeRange { start: a, end: b },
            }),
        (
            op().prop_filter("strict", |o| matches!(
                o,
                CompareOp::Lt | CompareOp::Gt | CompareOp::Ne
            )),
            day()
        )
            .prop_map(|(op, t)| ConstraintExpr::Compare {
                field: "time".into(),
                op,
                value: Literal::Time(t)
            }),
        (
            measure.clone(),
            prop::option::of(-5i32..60),
            prop::option::of(-5i32..60)
        )
            .prop_filter("one bound", |(_, a, b)| a.is_some() || b.is_some())
            .prop_map(|(m, a, b)| {
                let (lo, hi) = match (a, b) {
                    (Some(a), Some(b)) => (Some(a.min(b) as f64), Some(a.max(b) as f64)),
                    (a, b) => (a.map(f64::from), b.map(f64::from)),
                };
                ConstraintExpr::ValueRange {
                    measure: m.into(),
                    lo,
                    hi,
                }
            }),
        (
            measure,
            op().prop_filter("strict", |o| matches!(
                o,
                CompareOp::Lt | CompareOp::Gt | CompareOp::Ne
            )),
            -50i32..1100
        )
            .prop_map(|(m, op, v)| ConstraintExpr::Compare {
                field: m.into(),
                op,
                value: Literal::Number(f64::from(v) / 4.0),
            }),
    ]
}

fn expr() -> impl Strategy<Value = ConstraintExpr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.and(b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.or(b)),
            inner.prop_map(ConstraintExpr::negate),
        ]
    })
}

fn ranking(ds: &Dataset, seed: u64) -> RankedMatches {
    RankedMatches::from_unsorted(
        ds.signals()
            .iter()
            .enumerate()
            .map(|(i, s)| RankedEntry {
                signal_id: s.id().to_string(),
                score: ((i as u64 * 7919 + seed) % 13) as f64,
                alignment: None,
            })
            .collect(),
    )
}

proptest! {
    #[test]
    fn generated_expressions_are_valid(e in expr()) {
        prop_assert_eq!(e.validate(&schema()), Ok(()));
    }

    #[test]
    fn print_parse_round_trip(e in expr()) {
        let s = schema();
        let text = e.to_text(&s);
        prop_assert_eq!(parse(&text, &s), Ok(e), "{}", text);
    }

    #[test]
    fn de_morgan(a in expr(), b in expr()) {
        let ds = dataset();
        let s = ds.schema();
        let lhs = a.clone().and(b.clone()).negate();
        let rhs = a.clone().negate().or(b.clone().negate());
        let lhs2 = a.clone().or(b.clone()).negate();
        let rhs2 = a.negate().and(b.negate());
        for sig in ds.signals() {
            prop_assert_eq!(evaluate(&lhs, sig, s), evaluate(&rhs, sig, s));
            prop_assert_eq!(evaluate(&lhs2, sig, s), evaluate(&rhs2, sig, s));
        }
    }

    #[test]
    fn intersection_filters_in_order(e in expr(), seed in 0u64..1000) {
        let ds = dataset();
        let ranked = ranking(&ds, seed);
        let allowed = satisfying_ids(&e, &ds);
        let kept = intersect(&ranked, &allowed);
        let expected: Vec<&str> = ranked
            .entries
            .iter()
            .filter(|r| evaluate(&e, ds.signal(&r.signal_id).unwrap(), ds.schema()))
            .map(|r| r.signal_id.as_str())
            .collect();
        prop_assert_eq!(kept.ids(), expected);
        prop_assert_eq!(intersect(&kept, &allowed), kept.clone());
        let everything: HashSet<String> = ds.signals().iter().map(|s| s.id().to_string()).collect();
        prop_assert_eq!(intersect(&ranked, &everything), ranked);
    }

    #[test]
    fn json_ast_round_trip(e in expr()) {
        let json = serde_json::to_string(&e).unwrap();
        let back: ConstraintExpr = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, e);
    }
}

#[test]
fn storms_after_1970() {
    let s = schema();
    let e = parse("time >= 1970 AND basin = 'Atlantic'", &s).unwrap();
    assert_eq!(
        e,
        ConstraintExpr::TimeRange {
            start: Some(0.0),
            end: None
        }
        .and(ConstraintExpr::Compare {
            field: "basin".into(),
            op: CompareOp::Eq,
            value: Literal::Text("Atlantic".into()),
        })
    );
    let ds = dataset();
    let ids = satisfying_ids(&e, &ds);
    assert_eq!(ids.len(), NAMES.len());
}

#[test]
fn quoted_field_names() {
    let s = Schema::new("when", vec!["storm name".into()], vec!["v".into()]).unwrap();
    let e = parse("`storm name` = 'x'", &s).unwrap();
    assert_eq!(e.to_text(&s), "`storm name` = 'x'");
}
