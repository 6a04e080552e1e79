//! Canvas sketch to normalized polyline.
//!
//! Canvas coordinates grow rightwards and downwards, so the y axis is flipped
//! (up means a larger value). For univariate data x is time. For two-measure
//! data (e.g. tracks on a map) x and y are the two measures and time follows
//! the stroke order, parameterized by cumulative arc length.

use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::geometry::{dedup_time, scale_unit};
use crate::model::{AxisRange, Extents, NormalizationMode, Signal, UnitPoint};

/// Maps canvas pixels onto data values under global normalization.
///
/// The canvas spans `[0, width] x [0, height]` with the origin top-left. For
/// univariate data x spans `time` and y spans `measures[0]` (top = max). For
/// two-measure data x spans `measures[0]` and y spans `measures[1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub width: f64,
    pub height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<AxisRange>,
    pub measures: Vec<AxisRange>,
}

/// Canvas points of a univariate signal's polyline: `x = t`, `y = -value`.
/// Under local normalization this sketch reproduces the signal exactly.
pub fn canvas_trace(signal: &Signal) -> Vec<[f64; 2]> {
    signal.points().iter().map(|p| [p.t, -p.y[0]]).collect()
}

fn dedup_exact(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(points.len());
    for p in points {
        if out.last() != Some(p) {
            out.push(*p);
        }
    }
    out
}

fn degenerate(msg: &str) -> SearchError {
    SearchError::DegenerateSketch(msg.to_string())
}

fn bbox(values: impl Iterator<Item = f64> + Clone) -> AxisRange {
    AxisRange::covering(values).unwrap_or(AxisRange::new(0.0, 0.0))
}

fn in_unit(v: f64, axis: &str) -> Result<f64, SearchError> {
    if (-1e-9..=1.0 + 1e-9).contains(&v) {
        Ok(v.clamp(0.0, 1.0))
    } else {
        Err(SearchError::SketchOutOfRange(axis.to_string()))
    }
}

fn lerp(range: &AxisRange, f: f64) -> f64 {
    range.min + f * range.span()
}

fn viewport_for<'a>(
    viewport: Option<&'a Viewport>,
    measure_count: usize,
) -> Result<&'a Viewport, SearchError> {
    let vp = viewport.ok_or(SearchError::MissingViewport)?;
    if !(vp.width > 0.0 && vp.height > 0.0) || vp.measures.len() != measure_count {
        return Err(SearchError::InvalidViewport(format!(
            "expected positive canvas size and {measure_count} measure range(s)"
        )));
    }
    if measure_count == 1 && vp.time.is_none() {
        return Err(SearchError::InvalidViewport(
            "univariate viewport needs a time range".into(),
        ));
    }
    Ok(vp)
}

/// Converts canvas points into normalized sample points ready for simplification.
pub fn sketch_to_unit(
    points: &[[f64; 2]],
    measure_count: usize,
    mode: &NormalizationMode,
    viewport: Option<&Viewport>,
) -> Result<Vec<UnitPoint>, SearchError> {
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(degenerate("non-finite coordinate"));
    }
    let pts = dedup_exact(points);
    if pts.len() < 2 {
        return Err(degenerate("fewer than 2 distinct points"));
    }
    let unit = match measure_count {
        1 => univariate(&pts, mode, viewport)?,
        2 => bivariate(&pts, mode, viewport)?,
        k => return Err(SearchError::UnsupportedSketchDimension(k)),
    };
    let unit = dedup_time(unit);
    if unit.len() < 2 {
        return Err(degenerate("fewer than 2 distinct time positions"));
    }
    Ok(unit)
}

fn univariate(
    pts: &[[f64; 2]],
    mode: &NormalizationMode,
    viewport: Option<&Viewport>,
) -> Result<Vec<UnitPoint>, SearchError> {
    // Backtracking strokes are dropped: time only moves forward.
    let mut forward: Vec<[f64; 2]> = Vec::with_capacity(pts.len());
    for p in pts {
        if forward.last().is_none_or(|l| p[0] >= l[0]) {
            forward.push(*p);
        }
    }
    match mode {
        NormalizationMode::Local => {
            let xs = bbox(forward.iter().map(|p| p[0]));
            let ys = bbox(forward.iter().map(|p| p[1]));
            if xs.span() == 0.0 {
                return Err(degenerate("sketch has no horizontal extent"));
            }
            Ok(forward
                .iter()
                .map(|p| {
                    // flipped: top of the box is the largest value
                    let y = if ys.span() == 0.0 {
                        0.5
                    } else {
                        (ys.max - p[1]) / (ys.max - ys.min)
                    };
                    UnitPoint::new((p[0] - xs.min) / (xs.max - xs.min), vec![y])
                })
                .collect())
        }
        NormalizationMode::Global { extents } => {
            let vp = viewport_for(viewport, 1)?;
            let time = vp.time.expect("checked by viewport_for");
            forward
                .iter()
                .map(|p| {
                    let t = lerp(&time, p[0] / vp.width);
                    let v = lerp(&vp.measures[0], 1.0 - p[1] / vp.height);
                    Ok(UnitPoint::new(
                        in_unit(scale_unit(t, &extents.time), "time")?,
                        vec![in_unit(scale_unit(v, &extents.measures[0]), "measure[0]")?],
                    ))
                })
                .collect()
        }
    }
}

fn bivariate(
    pts: &[[f64; 2]],
    mode: &NormalizationMode,
    viewport: Option<&Viewport>,
) -> Result<Vec<UnitPoint>, SearchError> {
    let mut arc = Vec::with_capacity(pts.len());
    let mut total = 0.0;
    arc.push(0.0);
    for w in pts.windows(2) {
        total += ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
        arc.push(total);
    }
    let values: Vec<[f64; 2]> = match mode {
        NormalizationMode::Local => {
            let xs = bbox(pts.iter().map(|p| p[0]));
            let ys = bbox(pts.iter().map(|p| p[1]));
            pts.iter()
                .map(|p| [scale_unit(p[0], &xs), 1.0 - scale_unit(p[1], &ys)])
                .collect()
        }
        NormalizationMode::Global { extents } => {
            let vp = viewport_for(viewport, 2)?;
            pts.iter()
                .map(|p| {
                    let a = lerp(&vp.measures[0], p[0] / vp.width);
                    let b = lerp(&vp.measures[1], 1.0 - p[1] / vp.height);
                    Ok([
                        in_unit(scale_unit(a, &extents.measures[0]), "measure[0]")?,
                        in_unit(scale_unit(b, &extents.measures[1]), "measure[1]")?,
                    ])
                })
                .collect::<Result<_, SearchError>>()?
        }
    };
    Ok(arc
        .iter()
        .zip(values)
        .map(|(s, v)| UnitPoint::new(s / total, v.to_vec()))
        .collect())
}

/// Viewport covering exactly the given extents on a `width x height` canvas.
pub fn viewport_for_extents(extents: &Extents, width: f64, height: f64) -> Viewport {
    Viewport {
        width,
        height,
        time: (extents.measures.len() == 1).then_some(extents.time),
        measures: extents.measures.clone(),
    }
}
