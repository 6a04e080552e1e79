//! Normalization, Douglas–Peucker simplification and segment descriptors.

use thiserror::Error;

use crate::model::{
    AxisRange, Extents, ModelError, NormalizationMode, NormalizedSignal, SegmentDescriptor, Signal, UnitPoint,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error(
        "signal `{id}` exceeds the global extents on axis `{axis}`: {value_range:?} not within {extents:?}"
    )]
    RangeViolation {
        id: String,
        axis: String,
        value_range: AxisRange,
        extents: AxisRange,
    },
    #[error("global extents have {expected} measure axes but signal `{id}` has {found}")]
    ExtentsArity {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("segment {index} of `{id}` has zero duration")]
    DegenerateSegment { id: String, index: usize },
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn axis_name(measure: Option<usize>) -> String {
    match measure {
        None => "time".to_string(),
        Some(m) => format!("measure[{m}]"),
    }
}

/// Maps `v` into `[0, 1]` relative to `range`; a degenerate range maps to 0.5.
pub fn scale_unit(v: f64, range: &AxisRange) -> f64 {
    if range.max == range.min {
        0.5
    } else {
        (v - range.min) / (range.max - range.min)
    }
}

/// Scales the time axis and every measure axis into `[0, 1]`.
pub fn normalize(signal: &Signal, mode: &NormalizationMode) -> Result<NormalizedSignal, GeometryError> {
    let own = signal.extents();
    let scale: Extents = match mode {
        NormalizationMode::Local => own,
        NormalizationMode::Global { extents } => {
            extents.validate()?;
            if extents.measures.len() != own.measures.len() {
                return Err(GeometryError::ExtentsArity {
                    id: signal.id().to_string(),
                    expected: extents.measures.len(),
                    found: own.measures.len(),
                });
            }
            let axes = std::iter::once((None, &extents.time, &own.time)).chain(
                extents
                    .measures
                    .iter()
                    .zip(&own.measures)
                    .enumerate()
                    .map(|(m, (e, o))| (Some(m), e, o)),
            );
            for (axis, bound, actual) in axes {
                if !bound.contains_range(actual) {
                    return Err(GeometryError::RangeViolation {
                        id: signal.id().to_string(),
                        axis: axis_name(axis),
                        value_range: *actual,
                        extents: *bound,
                    });
                }
            }
            extents.clone()
        }
    };
    let points = signal
        .points()
        .iter()
        .map(|p| {
            UnitPoint::new(
                scale_unit(p.t, &scale.time),
                p.y.iter()
                    .zip(&scale.measures)
                    .map(|(v, r)| scale_unit(*v, r))
                    .collect(),
            )
        })
        .collect();
    Ok(NormalizedSignal::new(signal.id(), points, mode.clone())?)
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Distance from `p` to the infinite line through `a` and `b`, or to `a` when
/// the two coincide. Works in any dimension.
pub fn perpendicular_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = dot(&ab, &ab);
    if len2 == 0.0 {
        return norm(&ap);
    }
    let s = dot(&ap, &ab) / len2;
    let residual: Vec<f64> = ap.iter().zip(&ab).map(|(x, d)| x - s * d).collect();
    norm(&residual)
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = dot(&ab, &ab);
    if len2 == 0.0 {
        return norm(&ap);
    }
    let s = (dot(&ap, &ab) / len2).clamp(0.0, 1.0);
    let residual: Vec<f64> = ap.iter().zip(&ab).map(|(x, d)| x - s * d).collect();
    norm(&residual)
}

/// Indices of the points Douglas–Peucker keeps for `coords` at tolerance `epsilon`.
///
/// A range is split at its farthest interior point (first one on ties) while
/// that point lies more than `epsilon` from the chord. Distances are measured
/// to the chord as a closed segment, so every dropped point is within
/// `epsilon` of the resulting polyline.
pub fn douglas_peucker_indices(coords: &[Vec<f64>], epsilon: f64) -> Vec<usize> {
    let n = coords.len();
    if n <= 2 {
        return (0..n).collect();
    }
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    let mut stack = vec![(0usize, n - 1)];
    while let Some((first, last)) = stack.pop() {
        if last <= first + 1 {
            continue;
        }
        let mut farthest = first;
        let mut max_dist = 0.0;
        for i in first + 1..last {
            let d = segment_distance(&coords[i], &coords[first], &coords[last]);
            if d > max_dist {
                max_dist = d;
                farthest = i;
            }
        }
        if max_dist > epsilon {
            keep[farthest] = true;
            stack.push((farthest, last));
            stack.push((first, farthest));
        }
    }
    (0..n).filter(|&i| keep[i]).collect()
}

pub fn simplify(signal: &NormalizedSignal, epsilon: f64) -> Result<NormalizedSignal, GeometryError> {
    if !(epsilon > 0.0) {
        return Err(GeometryError::InvalidEpsilon(epsilon));
    }
    if signal.len() < 2 {
        return Err(GeometryError::TooFewPoints(signal.len()));
    }
    let coords: Vec<Vec<f64>> = signal.points().iter().map(|p| p.coords().collect()).collect();
    let kept = douglas_peucker_indices(&coords, epsilon)
        .into_iter()
        .map(|i| signal.points()[i].clone())
        .collect();
    Ok(signal.with_points(kept))
}

/// One descriptor per consecutive point pair.
pub fn describe(signal: &NormalizedSignal) -> Result<Vec<SegmentDescriptor>, GeometryError> {
    describe_points(signal.id(), signal.points())
}

pub(crate) fn describe_points(
    id: &str,
    points: &[UnitPoint],
) -> Result<Vec<SegmentDescriptor>, GeometryError> {
    if points.len() < 2 {
        return Err(GeometryError::TooFewPoints(points.len()));
    }
    points
        .windows(2)
        .enumerate()
        .map(|(index, w)| {
            let (a, b) = (&w[0], &w[1]);
            let dt = b.t - a.t;
            if dt == 0.0 {
                return Err(GeometryError::DegenerateSegment {
                    id: id.to_string(),
                    index,
                });
            }
            let dy = sub(&b.y, &a.y);
            Ok(SegmentDescriptor {
                length: (dt * dt + dot(&dy, &dy)).sqrt(),
                mid_spatial: a.y.iter().zip(&b.y).map(|(u, v)| (u + v) / 2.0).collect(),
                mid_time: (a.t + b.t) / 2.0,
                velocity: dy.iter().map(|d| d / dt).collect(),
            })
        })
        .collect()
}

/// Merges runs of consecutive points sharing a time coordinate, keeping the
/// last point of each run.
pub fn dedup_time(points: Vec<UnitPoint>) -> Vec<UnitPoint> {
    let mut out: Vec<UnitPoint> = Vec::with_capacity(points.len());
    for p in points {
        match out.last_mut() {
            Some(last) if last.t == p.t => *last = p,
            _ => out.push(p),
        }
    }
    out
}
