//! Domain types shared by every stage of the pipeline.
//!
//! All values here are immutable once constructed. Constructors validate
//! their invariants, so downstream code can rely on them without rechecking.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when checking that normalized coordinates lie in `[0, 1]`.
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("schema must name at least one {0} field")]
    EmptyFieldList(&'static str),
    #[error("field `{0}` appears more than once in the schema")]
    DuplicateField(String),
    #[error("signal `{id}` has {count} points, at least 2 are required")]
    TooFewPoints { id: String, count: usize },
    #[error("signal `{id}`: timestamps must be strictly increasing (point {index})")]
    NonIncreasingTime { id: String, index: usize },
    #[error("signal `{id}`: point {index} has {found} measures, expected {expected}")]
    MeasureArity {
        id: String,
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("signal `{id}`: non-finite value at point {index}")]
    NonFinite { id: String, index: usize },
    #[error("signal `{id}` is missing categorical field `{field}`")]
    MissingDim { id: String, field: String },
    #[error("duplicate signal id `{0}`")]
    DuplicateSignal(String),
    #[error("normalized signal `{id}`: coordinate {value} at point {index} is outside [0, 1]")]
    OutOfUnitRange { id: String, index: usize, value: f64 },
    #[error("invalid extents on axis `{axis}`: min {min} > max {max}")]
    InvalidExtents { axis: String, min: f64, max: f64 },
    #[error("invalid penalty configuration: {0}")]
    InvalidPenalty(String),
    #[error("distance matrix: {0}")]
    InvalidMatrix(String),
}

/// Field layout of a dataset: one time field, categorical dimensions and measures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub time_field: String,
    pub categorical_fields: Vec<String>,
    pub measure_fields: Vec<String>,
}

/// What kind of column a schema field is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Time,
    Categorical,
    Measure(usize),
}

impl Schema {
    pub fn new(
        time_field: impl Into<String>,
        categorical_fields: Vec<String>,
        measure_fields: Vec<String>,
    ) -> Result<Self, ModelError> {
        let schema = Schema {
            time_field: time_field.into(),
            categorical_fields,
            measure_fields,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.categorical_fields.is_empty() {
            return Err(ModelError::EmptyFieldList("categorical"));
        }
        if self.measure_fields.is_empty() {
            return Err(ModelError::EmptyFieldList("measure"));
        }
        let mut seen = HashSet::new();
        for name in std::iter::once(&self.time_field)
            .chain(&self.categorical_fields)
            .chain(&self.measure_fields)
        {
            if !seen.insert(name.as_str()) {
                return Err(ModelError::DuplicateField(name.clone()));
            }
        }
        Ok(())
    }

    pub fn field_kind(&self, name: &str) -> Option<FieldKind> {
        if name == self.time_field {
            return Some(FieldKind::Time);
        }
        if self.categorical_fields.iter().any(|f| f == name) {
            return Some(FieldKind::Categorical);
        }
        self.measure_fields
            .iter()
            .position(|f| f == name)
            .map(FieldKind::Measure)
    }

    pub fn measure_count(&self) -> usize {
        self.measure_fields.len()
    }
}

/// Closed interval `[min, max]` on one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
}

impl AxisRange {
    pub fn new(min: f64, max: f64) -> Self {
        AxisRange { min, max }
    }

    /// Smallest range containing every value, or `None` for an empty iterator.
    pub fn covering(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        values.into_iter().fold(None, |acc, v| match acc {
            None => Some(AxisRange::new(v, v)),
            Some(r) => Some(AxisRange::new(r.min.min(v), r.max.max(v))),
        })
    }

    pub fn union(&self, other: &AxisRange) -> AxisRange {
        AxisRange::new(self.min.min(other.min), self.max.max(other.max))
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn contains_range(&self, other: &AxisRange) -> bool {
        self.min <= other.min && other.max <= self.max
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }
}

/// Per-axis bounds: time plus one range per measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extents {
    pub time: AxisRange,
    pub measures: Vec<AxisRange>,
}

impl Extents {
    pub fn validate(&self) -> Result<(), ModelError> {
        let axes = std::iter::once(("time".to_string(), self.time)).chain(
            self.measures
                .iter()
                .enumerate()
                .map(|(i, r)| (format!("measure[{i}]"), *r)),
        );
        for (axis, r) in axes {
            if !(r.min <= r.max) {
                return Err(ModelError::InvalidExtents {
                    axis,
                    min: r.min,
                    max: r.max,
                });
            }
        }
        Ok(())
    }

    pub fn union(&self, other: &Extents) -> Extents {
        Extents {
            time: self.time.union(&other.time),
            measures: self
                .measures
                .iter()
                .zip(&other.measures)
                .map(|(a, b)| a.union(b))
                .collect(),
        }
    }

    pub fn contains(&self, other: &Extents) -> bool {
        self.time.contains_range(&other.time)
            && self.measures.len() == other.measures.len()
            && self
                .measures
                .iter()
                .zip(&other.measures)
                .all(|(a, b)| a.contains_range(b))
    }
}

/// One sample of a signal: time in seconds since the epoch plus a measure vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub t: f64,
    pub y: Vec<f64>,
}

impl Point {
    pub fn new(t: f64, y: Vec<f64>) -> Self {
        Point { t, y }
    }
}

/// One time series, identified by its categorical dimension values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSignal")]
pub struct Signal {
    id: String,
    dims: BTreeMap<String, String>,
    points: Vec<Point>,
}

#[derive(Deserialize)]
struct RawSignal {
    id: String,
    dims: BTreeMap<String, String>,
    points: Vec<Point>,
}

impl TryFrom<RawSignal> for Signal {
    type Error = ModelError;

    fn try_from(raw: RawSignal) -> Result<Self, Self::Error> {
        Signal::new(raw.id, raw.dims, raw.points)
    }
}

impl Signal {
    pub fn new(
        id: impl Into<String>,
        dims: BTreeMap<String, String>,
        points: Vec<Point>,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        if points.len() < 2 {
            return Err(ModelError::TooFewPoints {
                id,
                count: points.len(),
            });
        }
        let arity = points[0].y.len();
        for (index, p) in points.iter().enumerate() {
            if p.y.len() != arity {
                return Err(ModelError::MeasureArity {
                    id,
                    index,
                    expected: arity,
                    found: p.y.len(),
                });
            }
            if !p.t.is_finite() || p.y.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite { id, index });
            }
            if index > 0 && !(p.t > points[index - 1].t) {
                return Err(ModelError::NonIncreasingTime { id, index });
            }
        }
        Ok(Signal { id, dims, points })
    }

    /// Univariate convenience constructor with a single `name` dimension.
    pub fn univariate(id: impl Into<String>, samples: &[(f64, f64)]) -> Result<Self, ModelError> {
        let id = id.into();
        let dims = BTreeMap::from([("name".to_string(), id.clone())]);
        let points = samples.iter().map(|&(t, y)| Point::new(t, vec![y])).collect();
        Signal::new(id, dims, points)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dims(&self) -> &BTreeMap<String, String> {
        &self.dims
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn measure_count(&self) -> usize {
        self.points[0].y.len()
    }

    pub fn time_range(&self) -> AxisRange {
        AxisRange::new(self.points[0].t, self.points[self.points.len() - 1].t)
    }

    pub fn measure_range(&self, measure: usize) -> AxisRange {
        AxisRange::covering(self.points.iter().map(|p| p.y[measure]))
            .expect("signals have at least two points")
    }

    pub fn extents(&self) -> Extents {
        Extents {
            time: self.time_range(),
            measures: (0..self.measure_count()).map(|m| self.measure_range(m)).collect(),
        }
    }

    fn check_schema(&self, schema: &Schema) -> Result<(), ModelError> {
        for field in &schema.categorical_fields {
            if !self.dims.contains_key(field) {
                return Err(ModelError::MissingDim {
                    id: self.id.clone(),
                    field: field.clone(),
                });
            }
        }
        if self.measure_count() != schema.measure_count() {
            return Err(ModelError::MeasureArity {
                id: self.id.clone(),
                index: 0,
                expected: schema.measure_count(),
                found: self.measure_count(),
            });
        }
        Ok(())
    }
}

/// Identity derived from categorical values when no explicit id column exists.
pub fn signal_id_from_dims<'a>(values: impl IntoIterator<Item = &'a str>) -> String {
    values.into_iter().collect::<Vec<_>>().join("/")
}

/// A validated collection of signals sharing one schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset")]
pub struct Dataset {
    id: String,
    schema: Schema,
    signals: Vec<Signal>,
    global_extents: Extents,
}

#[derive(Deserialize)]
struct RawDataset {
    id: String,
    schema: Schema,
    signals: Vec<Signal>,
}

impl TryFrom<RawDataset> for Dataset {
    type Error = ModelError;

    fn try_from(raw: RawDataset) -> Result<Self, Self::Error> {
        Dataset::new(raw.id, raw.schema, raw.signals)
    }
}

impl Dataset {
    /// Validates the signals against the schema and computes global extents.
    pub fn new(id: impl Into<String>, schema: Schema, signals: Vec<Signal>) -> Result<Self, ModelError> {
        schema.validate()?;
        let mut ids = HashSet::new();
        for s in &signals {
            if !ids.insert(s.id()) {
                return Err(ModelError::DuplicateSignal(s.id().to_string()));
            }
            s.check_schema(&schema)?;
        }
        let global_extents = signals
            .iter()
            .map(Signal::extents)
            .reduce(|a, b| a.union(&b))
            .unwrap_or_else(|| Extents {
                time: AxisRange::new(0.0, 0.0),
                measures: vec![AxisRange::new(0.0, 0.0); schema.measure_count()],
            });
        Ok(Dataset {
            id: id.into(),
            schema,
            signals,
            global_extents,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn signals(&self) -> &[Signal] {
        &self.signals
    }

    pub fn signal(&self, id: &str) -> Option<&Signal> {
        self.signals.iter().find(|s| s.id() == id)
    }

    pub fn global_extents(&self) -> &Extents {
        &self.global_extents
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }
}

/// How raw coordinates are scaled into the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Each signal scaled by its own min/max.
    #[default]
    Local,
    /// All signals scaled by a fixed, externally supplied range.
    Global { extents: Extents },
}

/// A normalized sample: `t` and every component of `y` lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitPoint {
    pub t: f64,
    pub y: Vec<f64>,
}

impl UnitPoint {
    pub fn new(t: f64, y: Vec<f64>) -> Self {
        UnitPoint { t, y }
    }

    /// Coordinates in space-time order `(t, y0, y1, ...)`.
    pub fn coords(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.t).chain(self.y.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSignal {
    id: String,
    points: Vec<UnitPoint>,
    mode: NormalizationMode,
}

impl NormalizedSignal {
    /// Rejects coordinates outside `[0, 1]` by more than [`UNIT_TOLERANCE`];
    /// values within tolerance are clamped.
    pub fn new(
        id: impl Into<String>,
        mut points: Vec<UnitPoint>,
        mode: NormalizationMode,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        for (index, p) in points.iter_mut().enumerate() {
            for v in std::iter::once(&mut p.t).chain(p.y.iter_mut()) {
                if !(*v >= -UNIT_TOLERANCE && *v <= 1.0 + UNIT_TOLERANCE) {
                    return Err(ModelError::OutOfUnitRange { id, index, value: *v });
                }
                *v = v.clamp(0.0, 1.0);
            }
        }
        Ok(NormalizedSignal { id, points, mode })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn points(&self) -> &[UnitPoint] {
        &self.points
    }

    pub fn mode(&self) -> &NormalizationMode {
        &self.mode
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub(crate) fn with_points(&self, points: Vec<UnitPoint>) -> NormalizedSignal {
        NormalizedSignal {
            id: self.id.clone(),
            points,
            mode: self.mode.clone(),
        }
    }
}

/// Geometric summary of one simplified segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDescriptor {
    /// Euclidean length in normalized space-time.
    pub length: f64,
    pub mid_spatial: Vec<f64>,
    pub mid_time: f64,
    /// Per-measure `dy/dt` in normalized units.
    pub velocity: Vec<f64>,
}

impl SegmentDescriptor {
    pub fn dimension(&self) -> usize {
        self.mid_spatial.len()
    }
}

pub const DEFAULT_EPSILON: f64 = 0.02;
pub const DEFAULT_V_MAX: f64 = 10.0;
/// Range the UI precision slider maps onto.
pub const EPSILON_SLIDER_RANGE: (f64, f64) = (0.005, 0.1);

/// Linear map of a precision slider position in `[0, 1]` onto epsilon.
pub fn epsilon_from_slider(position: f64) -> f64 {
    let (lo, hi) = EPSILON_SLIDER_RANGE;
    lo + position.clamp(0.0, 1.0) * (hi - lo)
}

/// The seven user-settable weights plus simplification settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyConfig {
    pub w_len: f64,
    pub w_mid: f64,
    pub w_time: f64,
    pub w_vel: f64,
    pub w_skip: f64,
    pub w_count: f64,
    pub w_stretch: f64,
    pub epsilon: f64,
    pub v_max: f64,
    pub mode: NormalizationMode,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            w_len: 1.0,
            w_mid: 1.0,
            w_time: 1.0,
            w_vel: 1.0,
            w_skip: 1.0,
            w_count: 0.5,
            w_stretch: 0.2,
            epsilon: DEFAULT_EPSILON,
            v_max: DEFAULT_V_MAX,
            mode: NormalizationMode::Local,
        }
    }
}

impl PenaltyConfig {
    pub fn weights(&self) -> [(&'static str, f64); 7] {
        [
            ("w_len", self.w_len),
            ("w_mid", self.w_mid),
            ("w_time", self.w_time),
            ("w_vel", self.w_vel),
            ("w_skip", self.w_skip),
            ("w_count", self.w_count),
            ("w_stretch", self.w_stretch),
        ]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, w) in self.weights() {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(ModelError::InvalidPenalty(format!(
                    "{name} must be a finite non-negative number, got {w}"
                )));
            }
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(ModelError::InvalidPenalty(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.v_max > 0.0) {
            return Err(ModelError::InvalidPenalty(format!(
                "v_max must be positive, got {}",
                self.v_max
            )));
        }
        if let NormalizationMode::Global { extents } = &self.mode {
            extents.validate()?;
        }
        Ok(())
    }

    /// The part of the configuration an index is built for.
    pub fn build_config(&self) -> BuildConfig {
        BuildConfig {
            mode: self.mode.clone(),
            epsilon: self.epsilon,
        }
    }
}

/// Normalization mode and tolerance an index was built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub mode: NormalizationMode,
    pub epsilon: f64,
}

impl std::fmt::Display for BuildConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mode = match self.mode {
            NormalizationMode::Local => "local",
            NormalizationMode::Global { .. } => "global",
        };
        write!(f, "mode {mode}, epsilon {}", self.epsilon)
    }
}

/// Which sequence a segment index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Sketch,
    Signal,
}

/// Outcome of aligning two segment sequences.
///
/// Every segment index of each side appears either in `matches` or in one of
/// the skip lists, never both. `matches` is sorted and each consecutive pair
/// either advances both indices or repeats one of them while advancing the
/// other by exactly one (a segment absorbing its neighbour's counterpart).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub score: f64,
    pub matches: Vec<(usize, usize)>,
    pub skipped_interior: Vec<(Side, usize)>,
    pub skipped_boundary: Vec<(Side, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub signal_id: String,
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alignment: Option<AlignmentResult>,
}

/// Entries sorted ascending by score, ties broken by ascending signal id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankedMatches {
    pub entries: Vec<RankedEntry>,
}

impl RankedMatches {
    pub fn from_unsorted(mut entries: Vec<RankedEntry>) -> Self {
        entries.sort_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then_with(|| a.signal_id.cmp(&b.signal_id))
        });
        RankedMatches { entries }
    }

    pub fn truncate(mut self, k: usize) -> Self {
        self.entries.truncate(k);
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.signal_id.as_str()).collect()
    }
}

/// Square matrix of non-negative, finite distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    pub fn new(ids: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let n = ids.len();
        if values.len() != n || values.iter().any(|row| row.len() != n) {
            return Err(ModelError::InvalidMatrix(format!("expected a {n}x{n} matrix")));
        }
        for (i, row) in values.iter().enumerate() {
            if row[i] != 0.0 {
                return Err(ModelError::InvalidMatrix(format!(
                    "diagonal entry {i} is {}",
                    row[i]
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(ModelError::InvalidMatrix(format!(
                    "row {i} holds invalid distance {v}"
                )));
            }
        }
        Ok(DistanceMatrix { ids, values })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n()).all(|i| (0..i).all(|j| (self.values[i][j] - self.values[j][i]).abs() <= tol))
    }
}
