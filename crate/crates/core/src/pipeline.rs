//! Request and response types shared by the HTTP service and the CLI, and
//! the operations behind them. Both front ends serialize these same types.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{agglomerate, ClusterError, ClusterReport, Cut};
use crate::constraint::{intersect, satisfying_ids, Annotation, AnnotationInterpreter, ConstraintError};
use crate::model::{
    AxisRange, BuildConfig, Dataset, DistanceMatrix, Extents, NormalizationMode, PenaltyConfig, RankedEntry,
};
use crate::search::{build_index, pairwise_matrix, rank, Index, SearchError, Viewport, DEFAULT_K};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Local,
    Global,
}

/// Normalization as written by clients: `"local"`, `"global"` (the dataset's
/// own extents) or an explicit mode object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModeSpec {
    Named(ModeName),
    Explicit(NormalizationMode),
}

impl ModeSpec {
    pub fn resolve(&self, dataset_extents: &Extents) -> NormalizationMode {
        match self {
            ModeSpec::Named(ModeName::Local) => NormalizationMode::Local,
            ModeSpec::Named(ModeName::Global) => NormalizationMode::Global {
                extents: dataset_extents.clone(),
            },
            ModeSpec::Explicit(m) => m.clone(),
        }
    }
}

/// Partial penalty configuration. Omitted weights take the defaults; an
/// omitted mode or epsilon is inherited from the index being queried.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_len: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_mid: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_vel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_skip: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_count: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_stretch: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeSpec>,
}

impl PenaltyOverrides {
    /// Fills the gaps from `base` (an index's build settings) and the defaults.
    pub fn resolve(&self, dataset_extents: &Extents, base: Option<&BuildConfig>) -> PenaltyConfig {
        let d = PenaltyConfig::default();
        let mode = match (&self.mode, base) {
            (Some(m), _) => m.resolve(dataset_extents),
            (None, Some(b)) => b.mode.clone(),
            (None, None) => d.mode.clone(),
        };
        let epsilon = self.epsilon.or(base.map(|b| b.epsilon)).unwrap_or(d.epsilon);
        PenaltyConfig {
            w_len: self.w_len.unwrap_or(d.w_len),
            w_mid: self.w_mid.unwrap_or(d.w_mid),
            w_time: self.w_time.unwrap_or(d.w_time),
            w_vel: self.w_vel.unwrap_or(d.w_vel),
            w_skip: self.w_skip.unwrap_or(d.w_skip),
            w_count: self.w_count.unwrap_or(d.w_count),
            w_stretch: self.w_stretch.unwrap_or(d.w_stretch),
            v_max: self.v_max.unwrap_or(d.v_max),
            epsilon,
            mode,
        }
    }
}

/// A dataset together with one index built over it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexBundle {
    pub dataset: Dataset,
    pub index: Index,
}

pub fn build(dataset: &Dataset, penalties: &PenaltyOverrides) -> Result<Index, PipelineError> {
    let cfg = penalties.resolve(dataset.global_extents(), None);
    Ok(build_index(dataset, &cfg)?)
}

fn default_k() -> usize {
    DEFAULT_K
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    /// Canvas points in stroke order, origin top-left.
    pub sketch_points: Vec<[f64; 2]>,
    #[serde(default)]
    pub penalty_config: PenaltyOverrides,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<Annotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viewport: Option<Viewport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub matches: Vec<RankedEntry>,
    /// Ranked signals removed by the constraint, counted over the full
    /// ranking before truncation to `k`.
    pub dropped_by_constraint: usize,
}

/// Ranks every signal against the sketch, intersects with the constraint's
/// allowed set when one is given, then keeps the best `k`.
pub fn run_query(
    bundle: (&Dataset, &Index),
    req: &QueryRequest,
    interpreter: &dyn AnnotationInterpreter,
) -> Result<QueryResponse, PipelineError> {
    let (dataset, index) = bundle;
    if req.k == 0 {
        return Err(PipelineError::InvalidRequest("k must be at least 1".into()));
    }
    let constraint = req
        .constraint
        .as_ref()
        .map(|a| interpreter.interpret(a, dataset.schema()))
        .transpose()?;
    let cfg = req
        .penalty_config
        .resolve(dataset.global_extents(), Some(&index.build));
    let ranked = rank(index, &req.sketch_points, req.viewport.as_ref(), &cfg)?;
    let (kept, dropped) = match constraint {
        Some(expr) => {
            let allowed = satisfying_ids(&expr, dataset);
            let kept = intersect(&ranked, &allowed);
            let dropped = ranked.len() - kept.len();
            (kept, dropped)
        }
        None => (ranked, 0),
    };
    Ok(QueryResponse {
        matches: kept.truncate(req.k).entries,
        dropped_by_constraint: dropped,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterRequest {
    /// Defaults to `min(8, n)` clusters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<Cut>,
    #[serde(default)]
    pub penalty_config: PenaltyOverrides,
    #[serde(default)]
    pub include_matrix: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResponse {
    #[serde(flatten)]
    pub report: ClusterReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<DistanceMatrix>,
}

pub fn run_cluster(
    bundle: (&Dataset, &Index),
    req: &ClusterRequest,
) -> Result<ClusterResponse, PipelineError> {
    let (dataset, index) = bundle;
    let cfg = req
        .penalty_config
        .resolve(dataset.global_extents(), Some(&index.build));
    let matrix = pairwise_matrix(index, &cfg)?;
    let cut = req.cut.unwrap_or_else(|| Cut::default_for(matrix.n()));
    let report = agglomerate(&matrix, cut)?;
    Ok(ClusterResponse {
        report,
        matrix: req.include_matrix.then_some(matrix),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalMeta {
    pub id: String,
    pub dims: std::collections::BTreeMap<String, String>,
    pub point_count: usize,
    pub time: AxisRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalPage {
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub signals: Vec<SignalMeta>,
}

pub const DEFAULT_PAGE_LIMIT: usize = 100;

pub fn signal_page(dataset: &Dataset, offset: usize, limit: usize) -> SignalPage {
    let signals = dataset
        .signals()
        .iter()
        .skip(offset)
        .take(limit)
        .map(|s| SignalMeta {
            id: s.id().to_string(),
            dims: s.dims().clone(),
            point_count: s.points().len(),
            time: s.time_range(),
        })
        .collect();
    SignalPage {
        total: dataset.signals().len(),
        offset,
        limit,
        signals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::StructuredInterpreter;
    use crate::model::{Schema, Signal};
    use crate::search::canvas_trace;
    use std::collections::BTreeMap;

    fn dataset() -> Dataset {
        let schema = Schema::new("t", vec!["name".into(), "basin".into()], vec!["v".into()]).unwrap();
        let shapes: [(&str, &str, [f64; 4]); 4] = [
            ("up", "Atlantic", [0.0, 1.0, 2.0, 3.0]),
            ("down", "Pacific", [3.0, 2.0, 1.0, 0.0]),
            ("peak", "Atlantic", [0.0, 3.0, 3.0, 0.0]),
            ("dip", "Pacific", [3.0, 0.0, 0.0, 3.0]),
        ];
        let signals = shapes
            .iter()
            .map(|(name, basin, ys)| {
                let dims = BTreeMap::from([
                    ("name".to_string(), name.to_string()),
                    ("basin".to_string(), basin.to_string()),
                ]);
                let pts = ys
                    .iter()
                    .enumerate()
                    .map(|(i, &y)| crate::model::Point::new(i as f64 * 10.0, vec![y]))
                    .collect();
                Signal::new(*name, dims, pts).unwrap()
            })
            .collect();
        Dataset::new("d", schema, signals).unwrap()
    }

    #[test]
    fn overrides_inherit_build_settings() {
        let ds = dataset();
        let o: PenaltyOverrides = serde_json::from_str(r#"{"w_skip": 3.0, "mode": "global"}"#).unwrap();
        let cfg = o.resolve(ds.global_extents(), None);
        assert_eq!(cfg.w_skip, 3.0);
        assert_eq!(cfg.w_len, 1.0);
        assert_eq!(
            cfg.mode,
            NormalizationMode::Global {
                extents: ds.global_extents().clone()
            }
        );
        let base = BuildConfig {
            mode: NormalizationMode::Local,
            epsilon: 0.05,
        };
        let inherited = PenaltyOverrides::default().resolve(ds.global_extents(), Some(&base));
        assert_eq!(inherited.epsilon, 0.05);
        assert!(serde_json::from_str::<PenaltyOverrides>(r#"{"w_skp": 1}"#).is_err());
    }

    #[test]
    fn query_with_constraint_intersects() {
        let ds = dataset();
        let index = build(&ds, &PenaltyOverrides::default()).unwrap();
        let trace = canvas_trace(ds.signal("peak").unwrap());
        let plain = QueryRequest {
            sketch_points: trace.clone(),
            penalty_config: PenaltyOverrides::default(),
            k: 10,
            constraint: None,
            viewport: None,
        };
        let all = run_query((&ds, &index), &plain, &StructuredInterpreter).unwrap();
        assert_eq!(all.matches.len(), 4);
        assert_eq!(all.matches[0].signal_id, "peak");
        assert!(all.matches[0].score < 1e-9);
        let constrained = QueryRequest {
            constraint: Some(Annotation::Text("basin = 'Pacific'".into())),
            ..plain.clone()
        };
        let some = run_query((&ds, &index), &constrained, &StructuredInterpreter).unwrap();
        assert_eq!(some.dropped_by_constraint, 2);
        let ids: Vec<&str> = some.matches.iter().map(|m| m.signal_id.as_str()).collect();
        let expected: Vec<&str> = all
            .matches
            .iter()
            .map(|m| m.signal_id.as_str())
            .filter(|id| *id == "down" || *id == "dip")
            .collect();
        assert_eq!(ids, expected);
        let bad = QueryRequest {
            constraint: Some(Annotation::Text("ocean = 'x'".into())),
            ..plain.clone()
        };
        assert!(matches!(
            run_query((&ds, &index), &bad, &StructuredInterpreter),
            Err(PipelineError::Constraint(ConstraintError::UnknownField(_)))
        ));
        let stale = QueryRequest {
            penalty_config: PenaltyOverrides {
                epsilon: Some(0.07),
                ..Default::default()
            },
            ..plain
        };
        assert!(matches!(
            run_query((&ds, &index), &stale, &StructuredInterpreter),
            Err(PipelineError::Search(SearchError::StaleIndex { .. }))
        ));
    }

    #[test]
    fn cluster_defaults_and_matrix() {
        let ds = dataset();
        let index = build(&ds, &PenaltyOverrides::default()).unwrap();
        let req = ClusterRequest {
            cut: Some(Cut::Count(2)),
            include_matrix: true,
            ..Default::default()
        };
        let resp = run_cluster((&ds, &index), &req).unwrap();
        assert_eq!(resp.report.clusters.len(), 2);
        assert_eq!(resp.matrix.unwrap().n(), 4);
        let default = run_cluster((&ds, &index), &ClusterRequest::default()).unwrap();
        assert_eq!(default.report.cut, Cut::Count(4));
        assert!(default.matrix.is_none());
    }

    #[test]
    fn pages() {
        let ds = dataset();
        let p = signal_page(&ds, 1, 2);
        assert_eq!(p.total, 4);
        assert_eq!(p.signals.len(), 2);
        assert_eq!(p.signals[0].id, ds.signals()[1].id());
        assert!(signal_page(&ds, 10, 2).signals.is_empty());
    }
}
