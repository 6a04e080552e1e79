//! CSV and JSON loading, CSV export and dataset summaries.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{signal_id_from_dims, Dataset, Extents, ModelError, Point, Schema, Signal};
use crate::time::parse_timestamp;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("row {row}: cannot parse timestamp `{value}`")]
    MalformedTimestamp { row: usize, value: String },
    #[error("row {row}: cannot parse value `{value}` for measure `{field}`")]
    MalformedMeasure {
        row: usize,
        field: String,
        value: String,
    },
    #[error("no signal has at least two distinct timestamps")]
    NoSignals,
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeFormat {
    /// Bare year, ISO-8601 date or date-time.
    #[default]
    Auto,
    Iso8601,
    Year,
    /// Seconds since the epoch as a decimal number.
    EpochSeconds,
}

impl TimeFormat {
    pub fn parse(self, raw: &str) -> Option<f64> {
        let s = raw.trim();
        let is_year = !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
        match self {
            TimeFormat::Auto => parse_timestamp(s),
            TimeFormat::Iso8601 if is_year => None,
            TimeFormat::Iso8601 => parse_timestamp(s),
            TimeFormat::Year if is_year => parse_timestamp(s),
            TimeFormat::Year => None,
            TimeFormat::EpochSeconds => s.parse::<f64>().ok().filter(|v| v.is_finite()),
        }
    }
}

/// Which CSV columns play which role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvMapping {
    pub time_field: String,
    pub categorical_fields: Vec<String>,
    pub measure_fields: Vec<String>,
    #[serde(default)]
    pub time_format: TimeFormat,
    /// Overrides the content-derived dataset id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_id: Option<String>,
}

impl CsvMapping {
    pub fn schema(&self) -> Result<Schema, ModelError> {
        Schema::new(
            self.time_field.clone(),
            self.categorical_fields.clone(),
            self.measure_fields.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IngestWarning {
    /// Several rows shared a timestamp; the last row in file order was kept.
    DuplicateTimestamp {
        signal_id: String,
        t: f64,
        dropped_rows: Vec<usize>,
    },
    /// The signal had fewer than two distinct timestamps and was dropped.
    ShortSignal { signal_id: String, points: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    pub dataset: Dataset,
    pub warnings: Vec<IngestWarning>,
}

/// Content-derived dataset id: same bytes and mapping, same id.
pub fn content_id(bytes: &[u8], mapping: &CsvMapping) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.update([0u8]);
    h.update(serde_json::to_vec(mapping).expect("mapping serializes"));
    let digest = hex::encode(h.finalize());
    format!("ds-{}", &digest[..16])
}

struct Row {
    row: usize,
    t: f64,
    y: Vec<f64>,
}

/// Loads a CSV with a header row. Rows are grouped by their categorical
/// values into signals identified by those values joined with `/`.
///
/// Row numbers in errors and warnings count data rows from 1.
pub fn load_csv(bytes: &[u8], mapping: &CsvMapping) -> Result<IngestOutcome, IngestError> {
    let schema = mapping.schema()?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = reader.headers()?.clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let time_col = column(&schema.time_field)?;
    let dim_cols = schema
        .categorical_fields
        .iter()
        .map(|f| column(f))
        .collect::<Result<Vec<_>, _>>()?;
    let measure_cols = schema
        .measure_fields
        .iter()
        .map(|f| column(f))
        .collect::<Result<Vec<_>, _>>()?;

    let mut groups: BTreeMap<Vec<String>, Vec<Row>> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let cell = |c: usize| record.get(c).unwrap_or("");
        let raw_t = cell(time_col);
        let t = mapping
            .time_format
            .parse(raw_t)
            .ok_or_else(|| IngestError::MalformedTimestamp {
                row,
                value: raw_t.to_string(),
            })?;
        let y = measure_cols
            .iter()
            .zip(&schema.measure_fields)
            .map(|(&c, field)| {
                let raw = cell(c);
                raw.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| IngestError::MalformedMeasure {
                        row,
                        field: field.clone(),
                        value: raw.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let key = dim_cols.iter().map(|&c| cell(c).to_string()).collect();
        groups.entry(key).or_default().push(Row { row, t, y });
    }

    let mut warnings = Vec::new();
    let mut signals = Vec::new();
    for (key, mut rows) in groups {
        let id = signal_id_from_dims(key.iter().map(String::as_str));
        rows.sort_by(|a, b| a.t.total_cmp(&b.t));
        let mut points: Vec<Point> = Vec::with_capacity(rows.len());
        let mut last_row: Option<usize> = None;
        let mut dropped: Vec<usize> = Vec::new();
        for r in rows {
            if points.last().is_some_and(|p| p.t == r.t) {
                dropped.push(last_row.expect("previous row"));
                points.pop();
            } else if !dropped.is_empty() {
                warnings.push(IngestWarning::DuplicateTimestamp {
                    signal_id: id.clone(),
                    t: points.last().expect("previous point").t,
                    dropped_rows: std::mem::take(&mut dropped),
                });
            }
            points.push(Point::new(r.t, r.y));
            last_row = Some(r.row);
        }
        if !dropped.is_empty() {
            warnings.push(IngestWarning::DuplicateTimestamp {
                signal_id: id.clone(),
                t: points.last().expect("previous point").t,
                dropped_rows: dropped,
            });
        }
        if points.len() < 2 {
            warnings.push(IngestWarning::ShortSignal {
                signal_id: id,
                points: points.len(),
            });
            continue;
        }
        let dims = schema
            .categorical_fields
            .iter()
            .cloned()
            .zip(key)
            .collect::<BTreeMap<_, _>>();
        signals.push(Signal::new(id, dims, points)?);
    }
    if signals.is_empty() {
        return Err(IngestError::NoSignals);
    }
    signals.sort_by(|a, b| a.id().cmp(b.id()));
    let id = mapping
        .dataset_id
        .clone()
        .unwrap_or_else(|| content_id(bytes, mapping));
    let dataset = Dataset::new(id, schema, signals)?;
    Ok(IngestOutcome { dataset, warnings })
}

/// Reads a dataset in the JSON export format; extents are recomputed.
pub fn load_json(bytes: &[u8]) -> Result<Dataset, IngestError> {
    Ok(serde_json::from_slice(bytes)?)
}

pub fn export_json(dataset: &Dataset) -> String {
    serde_json::to_string_pretty(dataset).expect("datasets serialize")
}

/// Writes one row per point with epoch-second timestamps, plus the mapping
/// that re-ingests it into an equal dataset.
pub fn export_csv(dataset: &Dataset) -> (Vec<u8>, CsvMapping) {
    let schema = dataset.schema();
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once(schema.time_field.as_str())
        .chain(schema.categorical_fields.iter().map(String::as_str))
        .chain(schema.measure_fields.iter().map(String::as_str))
        .collect();
    w.write_record(&header).expect("in-memory write");
    for s in dataset.signals() {
        for p in s.points() {
            let mut rec = vec![format!("{}", p.t)];
            rec.extend(schema.categorical_fields.iter().map(|f| s.dims()[f].clone()));
            rec.extend(p.y.iter().map(|v| format!("{v}")));
            w.write_record(&rec).expect("in-memory write");
        }
    }
    let bytes = w.into_inner().expect("in-memory flush");
    let mapping = CsvMapping {
        time_field: schema.time_field.clone(),
        categorical_fields: schema.categorical_fields.clone(),
        measure_fields: schema.measure_fields.clone(),
        time_format: TimeFormat::EpochSeconds,
        dataset_id: Some(dataset.id().to_string()),
    };
    (bytes, mapping)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub dataset_id: String,
    pub signal_count: usize,
    pub point_count: usize,
    pub extents: Extents,
    /// Distinct values per categorical field.
    pub cardinalities: BTreeMap<String, usize>,
}

pub fn dataset_summary(dataset: &Dataset) -> DatasetSummary {
    let mut distinct: HashMap<&str, std::collections::HashSet<&str>> = HashMap::new();
    for s in dataset.signals() {
        for (k, v) in s.dims() {
            distinct.entry(k).or_default().insert(v);
        }
    }
    DatasetSummary {
        dataset_id: dataset.id().to_string(),
        signal_count: dataset.signals().len(),
        point_count: dataset.signals().iter().map(|s| s.points().len()).sum(),
        extents: dataset.global_extents().clone(),
        cardinalities: dataset
            .schema()
            .categorical_fields
            .iter()
            .map(|f| (f.clone(), distinct.get(f.as_str()).map_or(0, |d| d.len())))
            .collect(),
    }
}
