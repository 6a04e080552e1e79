use proptest::prelude::*;
use trendsketch_core::ingest::{dataset_summary, export_csv, load_csv, CsvMapping, TimeFormat};

fn mapping() -> CsvMapping {
    CsvMapping {
        time_field: "date".into(),
        categorical_fields: vec!["name".into(), "sex".into()],
        measure_fields: vec!["count".into(), "share".into()],
        time_format: TimeFormat::Auto,
        dataset_id: None,
    }
}

prop_compose! {
    fn rows()(rows in prop::collection::vec(
        (prop::sample::select(vec!["Mary", "John", "Li, Wei", "\"Q\""]),
         prop::sample::select(vec!["F", "M"]),
         1880i32..1890,
         -1e6f64..1e6,
         0.0f64..1.0),
        1..60,
    )) -> Vec<(String, String, i32, f64, f64)> {
        rows.into_iter().map(|(n, s, y, c, p)| (n.to_string(), s.to_string(), y, c, p)).collect()
    }
}

fn to_csv(rows: &[(String, String, i32, f64, f64)]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "date", "sex", "count", "share"]).unwrap();
    for (n, s, y, c, p) in rows {
        w.write_record([n.clone(), y.to_string(), s.clone(), c.to_string(), p.to_string()])
            .unwrap();
    }
    w.into_inner().unwrap()
}

proptest! {
    #[test]
    fn ingest_is_deterministic_and_round_trips(rows in rows()) {
        let bytes = to_csv(&rows);
        let first = load_csv(&bytes, &mapping());
        let second = load_csv(&bytes, &mapping());
        match (first, second) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(&a.dataset, &b.dataset);
                prop_assert_eq!(&a.warnings, &b.warnings);
                let (csv, m) = export_csv(&a.dataset);
                let again = load_csv(&csv, &m).unwrap();
                prop_assert_eq!(&again.dataset, &a.dataset);
                prop_assert!(again.warnings.is_empty());
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            _ => prop_assert!(false, "nondeterministic outcome"),
        }
    }

    #[test]
    fn extents_bound_every_point_exactly(rows in rows()) {
        let Ok(out) = load_csv(&to_csv(&rows), &mapping()) else { return Ok(()) };
        let ds = out.dataset;
        let summary = dataset_summary(&ds);
        let all: Vec<_> = ds.signals().iter().flat_map(|s| s.points()).collect();
        let tmin = all.iter().map(|p| p.t).fold(f64::INFINITY, f64::min);
        let tmax = all.iter().map(|p| p.t).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!((summary.extents.time.min, summary.extents.time.max), (tmin, tmax));
        for m in 0..2 {
            let lo = all.iter().map(|p| p.y[m]).fold(f64::INFINITY, f64::min);
            let hi = all.iter().map(|p| p.y[m]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!((summary.extents.measures[m].min, summary.extents.measures[m].max), (lo, hi));
        }
        prop_assert_eq!(summary.point_count, all.len());
        prop_assert!(summary.cardinalities.values().all(|&c| c >= 1));
    }
}

#[test]
fn content_id_depends_on_bytes_and_mapping() {
    let bytes = b"name,date,sex,count,share\nA,1900,F,1,0\nA,1901,F,2,0\n";
    let a = load_csv(bytes, &mapping()).unwrap().dataset;
    let other = CsvMapping {
        time_format: TimeFormat::Year,
        ..mapping()
    };
    let b = load_csv(bytes, &other).unwrap().dataset;
    assert!(a.id().starts_with("ds-"));
    assert_ne!(a.id(), b.id());
    let named = CsvMapping {
        dataset_id: Some("babies".into()),
        ..mapping()
    };
    assert_eq!(load_csv(bytes, &named).unwrap().dataset.id(), "babies");
}
