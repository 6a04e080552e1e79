//! Index construction, sketch queries (1 x N) and the all-pairs matrix (N x N).

mod sketch;

pub use sketch::{canvas_trace, sketch_to_unit, viewport_for_extents, Viewport};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{align, AlignError};
use crate::geometry::{describe, normalize, simplify, GeometryError};
use crate::model::{
    BuildConfig, Dataset, DistanceMatrix, ModelError, NormalizedSignal, PenaltyConfig, RankedEntry,
    RankedMatches, SegmentDescriptor,
};

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("dataset has no signals")]
    EmptyDataset,
    #[error("no signal could be indexed ({} rejected)", .0.len())]
    NothingIndexable(Vec<Unindexable>),
    #[error("index was built with {index}; request uses {requested}")]
    StaleIndex {
        index: BuildConfig,
        requested: BuildConfig,
    },
    #[error("degenerate sketch: {0}")]
    DegenerateSketch(String),
    #[error("global normalization needs a viewport to place the sketch")]
    MissingViewport,
    #[error("invalid viewport: {0}")]
    InvalidViewport(String),
    #[error("sketch leaves the global extents on axis `{0}`")]
    SketchOutOfRange(String),
    #[error("sketches can describe 1 or 2 measures, dataset has {0}")]
    UnsupportedSketchDimension(usize),
    #[error(transparent)]
    Penalty(#[from] ModelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Align(#[from] AlignError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedSignal {
    pub id: String,
    /// Simplified normalized polyline.
    pub polyline: NormalizedSignal,
    pub descriptors: Vec<SegmentDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unindexable {
    pub id: String,
    pub reason: String,
}

/// Preprocessed descriptors for every signal of a dataset, for one build config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Index {
    pub dataset_id: String,
    pub build: BuildConfig,
    pub measure_count: usize,
    pub entries: Vec<IndexedSignal>,
    pub unindexable: Vec<Unindexable>,
}

impl Index {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.id.as_str()).collect()
    }

    pub fn ensure_compatible(&self, cfg: &PenaltyConfig) -> Result<(), SearchError> {
        let requested = cfg.build_config();
        if requested != self.build {
            return Err(SearchError::StaleIndex {
                index: self.build.clone(),
                requested,
            });
        }
        Ok(())
    }
}

/// Normalizes, simplifies and describes every signal. Signals that fail are
/// recorded as unindexable instead of failing the whole build.
pub fn build_index(dataset: &Dataset, cfg: &PenaltyConfig) -> Result<Index, SearchError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(SearchError::EmptyDataset);
    }
    let outcomes: Vec<Result<IndexedSignal, Unindexable>> = dataset
        .signals()
        .par_iter()
        .map(|signal| {
            let prepared = normalize(signal, &cfg.mode)
                .and_then(|n| simplify(&n, cfg.epsilon))
                .and_then(|polyline| {
                    let descriptors = describe(&polyline)?;
                    Ok((polyline, descriptors))
                });
            match prepared {
                Ok((polyline, descriptors)) => Ok(IndexedSignal {
                    id: signal.id().to_string(),
                    polyline,
                    descriptors,
                }),
                Err(e) => Err(Unindexable {
                    id: signal.id().to_string(),
                    reason: e.to_string(),
                }),
            }
        })
        .collect();

    let mut entries = Vec::new();
    let mut unindexable = Vec::new();
    for o in outcomes {
        match o {
            Ok(e) => entries.push(e),
            Err(u) => unindexable.push(u),
        }
    }
    if entries.is_empty() {
        return Err(SearchError::NothingIndexable(unindexable));
    }
    Ok(Index {
        dataset_id: dataset.id().to_string(),
        build: cfg.build_config(),
        measure_count: dataset.schema().measure_count(),
        entries,
        unindexable,
    })
}

/// Runs a sketch through the same normalize/simplify/describe pipeline.
pub fn sketch_descriptors(
    index: &Index,
    points: &[[f64; 2]],
    viewport: Option<&Viewport>,
    cfg: &PenaltyConfig,
) -> Result<Vec<SegmentDescriptor>, SearchError> {
    let unit = sketch_to_unit(points, index.measure_count, &cfg.mode, viewport)?;
    let sketch = NormalizedSignal::new("sketch", unit, cfg.mode.clone())?;
    Ok(describe(&simplify(&sketch, cfg.epsilon)?)?)
}

/// Scores every indexed signal against the sketch, best first.
pub fn rank(
    index: &Index,
    points: &[[f64; 2]],
    viewport: Option<&Viewport>,
    cfg: &PenaltyConfig,
) -> Result<RankedMatches, SearchError> {
    cfg.validate()?;
    index.ensure_compatible(cfg)?;
    let sketch = sketch_descriptors(index, points, viewport, cfg)?;
    rank_descriptors(index, &sketch, cfg)
}

pub fn rank_descriptors(
    index: &Index,
    sketch: &[SegmentDescriptor],
    cfg: &PenaltyConfig,
) -> Result<RankedMatches, SearchError> {
    let entries = index
        .entries
        .par_iter()
        .map(|e| {
            let alignment = align(sketch, &e.descriptors, cfg)?;
            Ok(RankedEntry {
                signal_id: e.id.clone(),
                score: alignment.score,
                alignment: Some(alignment),
            })
        })
        .collect::<Result<Vec<_>, AlignError>>()?;
    Ok(RankedMatches::from_unsorted(entries))
}

/// The `k` best matches for a sketch.
pub fn query(
    index: &Index,
    points: &[[f64; 2]],
    viewport: Option<&Viewport>,
    cfg: &PenaltyConfig,
    k: usize,
) -> Result<RankedMatches, SearchError> {
    Ok(rank(index, points, viewport, cfg)?.truncate(k))
}

/// Distance between two indexed signals.
///
/// Alignment treats its two inputs differently (boundary skips are only
/// discounted on the signal side), so the pairwise distance averages both
/// directions to stay symmetric.
pub fn pair_distance(
    a: &[SegmentDescriptor],
    b: &[SegmentDescriptor],
    cfg: &PenaltyConfig,
) -> Result<f64, AlignError> {
    let ab = align(a, b, cfg)?.score;
    let ba = align(b, a, cfg)?.score;
    Ok((ab + ba) / 2.0)
}

/// All-pairs distance matrix over the index, computed on the upper triangle
/// in parallel and mirrored.
pub fn pairwise_matrix(index: &Index, cfg: &PenaltyConfig) -> Result<DistanceMatrix, SearchError> {
    cfg.validate()?;
    index.ensure_compatible(cfg)?;
    let n = index.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let upper = pairs
        .par_iter()
        .map(|&(i, j)| pair_distance(&index.entries[i].descriptors, &index.entries[j].descriptors, cfg))
        .collect::<Result<Vec<f64>, AlignError>>()?;
    let mut values = vec![vec![0.0; n]; n];
    for (&(i, j), d) in pairs.iter().zip(upper) {
        values[i][j] = d;
        values[j][i] = d;
    }
    let ids = index.entries.iter().map(|e| e.id.clone()).collect();
    Ok(DistanceMatrix::new(ids, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::brute_force_align;
    use crate::model::{AxisRange, Extents, NormalizationMode, Schema, Signal};

    fn dataset(signals: Vec<Signal>) -> Dataset {
        let schema = Schema::new("t", vec!["name".into()], vec!["v".into()]).unwrap();
        Dataset::new("d", schema, signals).unwrap()
    }

    fn wave(id: &str, ys: &[f64]) -> Signal {
        let s: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, y)| (i as f64, *y)).collect();
        Signal::univariate(id, &s).unwrap()
    }

    #[test]
    fn builds_one_entry_per_signal() {
        let ds = dataset(vec![
            wave("a", &[0.0, 1.0, 0.0]),
            wave("b", &[1.0, 0.0, 1.0]),
            wave("c", &[0.0, 0.5, 1.0]),
        ]);
        let idx = build_index(&ds, &PenaltyConfig::default()).unwrap();
        assert_eq!(idx.len(), 3);
        assert!(idx.unindexable.is_empty());
    }

    #[test]
    fn two_point_signal_has_one_segment() {
        let ds = dataset(vec![wave("a", &[0.0, 1.0])]);
        let idx = build_index(&ds, &PenaltyConfig::default()).unwrap();
        assert_eq!(idx.entries[0].descriptors.len(), 1);
    }

    #[test]
    fn global_violations_are_isolated() {
        let ds = dataset(vec![wave("a", &[0.0, 1.0]), wave("b", &[0.0, 50.0])]);
        let cfg = PenaltyConfig {
            mode: NormalizationMode::Global {
                extents: Extents {
                    time: AxisRange::new(0.0, 1.0),
                    measures: vec![AxisRange::new(0.0, 10.0)],
                },
            },
            ..Default::default()
        };
        let idx = build_index(&ds, &cfg).unwrap();
        assert_eq!(idx.ids(), vec!["a"]);
        assert_eq!(idx.unindexable.len(), 1);
        assert_eq!(idx.unindexable[0].id, "b");
    }

    #[test]
    fn all_unindexable_is_an_error() {
        let ds = dataset(vec![wave("b", &[0.0, 50.0])]);
        let cfg = PenaltyConfig {
            mode: NormalizationMode::Global {
                extents: Extents {
                    time: AxisRange::new(0.0, 1.0),
                    measures: vec![AxisRange::new(0.0, 10.0)],
                },
            },
            ..Default::default()
        };
        assert!(matches!(
            build_index(&ds, &cfg),
            Err(SearchError::NothingIndexable(_))
        ));
    }

    #[test]
    fn exact_trace_ranks_first_with_zero() {
        let a = wave("a", &[0.0, 3.0, 1.0, 4.0, 2.0]);
        let ds = dataset(vec![a.clone(), wave("b", &[4.0, 0.0, 4.0, 0.0, 4.0])]);
        let cfg = PenaltyConfig::default();
        let idx = build_index(&ds, &cfg).unwrap();
        let res = query(&idx, &canvas_trace(&a), None, &cfg, 1).unwrap();
        assert_eq!(res.ids(), vec!["a"]);
        assert_eq!(res.entries[0].score, 0.0);
    }

    #[test]
    fn k_larger_than_index_returns_all() {
        let ds = dataset(vec![wave("a", &[0.0, 1.0]), wave("b", &[1.0, 0.0])]);
        let cfg = PenaltyConfig::default();
        let idx = build_index(&ds, &cfg).unwrap();
        let res = query(&idx, &[[0.0, 0.0], [1.0, 1.0]], None, &cfg, 50).unwrap();
        assert_eq!(res.len(), 2);
    }

    #[test]
    fn identical_signals_tie_by_id() {
        let ds = dataset(vec![wave("z", &[0.0, 2.0, 1.0]), wave("m", &[0.0, 2.0, 1.0])]);
        let cfg = PenaltyConfig::default();
        let idx = build_index(&ds, &cfg).unwrap();
        let res = query(&idx, &[[0.0, 0.0], [1.0, 1.0]], None, &cfg, 2).unwrap();
        assert_eq!(res.ids(), vec!["m", "z"]);
        assert_eq!(res.entries[0].score, res.entries[1].score);
    }

    #[test]
    fn mismatched_config_is_stale() {
        let ds = dataset(vec![wave("a", &[0.0, 1.0])]);
        let idx = build_index(&ds, &PenaltyConfig::default()).unwrap();
        let cfg = PenaltyConfig {
            epsilon: 0.05,
            ..Default::default()
        };
        assert!(matches!(
            query(&idx, &[[0.0, 0.0], [1.0, 1.0]], None, &cfg, 1),
            Err(SearchError::StaleIndex { .. })
        ));
        assert!(matches!(
            pairwise_matrix(&idx, &cfg),
            Err(SearchError::StaleIndex { .. })
        ));
    }

    #[test]
    fn single_signal_matrix() {
        let ds = dataset(vec![wave("a", &[0.0, 1.0, 0.2])]);
        let cfg = PenaltyConfig::default();
        let m = pairwise_matrix(&build_index(&ds, &cfg).unwrap(), &cfg).unwrap();
        assert_eq!(m.rows(), &[vec![0.0]]);
    }

    #[test]
    fn identical_signals_give_zero_matrix() {
        let ds = dataset(vec![wave("a", &[0.0, 1.0, 0.2]), wave("b", &[0.0, 1.0, 0.2])]);
        let cfg = PenaltyConfig::default();
        let m = pairwise_matrix(&build_index(&ds, &cfg).unwrap(), &cfg).unwrap();
        assert_eq!(m.rows(), &[vec![0.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn matrix_cells_match_brute_force() {
        let ds = dataset(vec![
            wave("a", &[0.0, 1.0, 0.2, 0.9]),
            wave("b", &[1.0, 0.0, 0.5]),
            wave("c", &[0.0, 0.3, 0.3, 1.0, 0.0]),
            wave("d", &[0.2, 0.8]),
        ]);
        let cfg = PenaltyConfig::default();
        let idx = build_index(&ds, &cfg).unwrap();
        let m = pairwise_matrix(&idx, &cfg).unwrap();
        assert!(m.is_symmetric(1e-9));
        for i in 0..4 {
            for j in 0..4 {
                let (a, b) = (&idx.entries[i].descriptors, &idx.entries[j].descriptors);
                let expected = if i == j {
                    0.0
                } else {
                    (brute_force_align(a, b, &cfg).unwrap().score
                        + brute_force_align(b, a, &cfg).unwrap().score)
                        / 2.0
                };
                assert!((m.get(i, j) - expected).abs() < 1e-9, "cell ({i},{j})");
            }
        }
    }
}
