//! Penalty-weighted segment distance and least-cost segment alignment.
//!
//! A correspondence between a sketch and a signal is a chain of matched
//! segment pairs. Between two consecutive pairs either both sides advance
//! (any segments jumped over are skipped) or one side repeats its segment
//! while the other advances by one, so a segment may absorb several
//! neighbours on the other side instead of being skipped.
//!
//! Costs:
//! * each matched pair costs [`segment_distance`];
//! * each skipped sketch segment costs `w_skip`;
//! * a skipped signal segment costs `w_stretch` when it lies before the first
//!   or after the last matched signal segment, `w_skip` otherwise;
//! * `w_count * |m - n|` is added once for the segment-count difference.

mod oracle;

pub use oracle::{brute_force_align, ORACLE_MAX_SEGMENTS};

use thiserror::Error;

use crate::model::{AlignmentResult, PenaltyConfig, SegmentDescriptor, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error("{0:?} descriptor list is empty")]
    Empty(Side),
    #[error("descriptor dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("brute-force alignment is limited to {max} segments per side, got {m}x{n}")]
    OracleTooLarge { m: usize, n: usize, max: usize },
    #[error("invalid correspondence: {0}")]
    InvalidCorrespondence(String),
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Weighted descriptor difference between two segments.
pub fn segment_distance(
    a: &SegmentDescriptor,
    b: &SegmentDescriptor,
    cfg: &PenaltyConfig,
) -> Result<f64, AlignError> {
    if a.dimension() != b.dimension() || a.velocity.len() != b.velocity.len() {
        return Err(AlignError::DimensionMismatch {
            expected: a.dimension(),
            found: b.dimension(),
        });
    }
    Ok(unchecked_distance(a, b, cfg))
}

fn unchecked_distance(a: &SegmentDescriptor, b: &SegmentDescriptor, cfg: &PenaltyConfig) -> f64 {
    cfg.w_len * (a.length - b.length).abs()
        + cfg.w_mid * euclid(&a.mid_spatial, &b.mid_spatial)
        + cfg.w_time * (a.mid_time - b.mid_time).abs()
        + cfg.w_vel * euclid(&a.velocity, &b.velocity).min(cfg.v_max)
}

fn check_inputs(sketch: &[SegmentDescriptor], signal: &[SegmentDescriptor]) -> Result<(), AlignError> {
    if sketch.is_empty() {
        return Err(AlignError::Empty(Side::Sketch));
    }
    if signal.is_empty() {
        return Err(AlignError::Empty(Side::Signal));
    }
    let dim = sketch[0].dimension();
    for d in sketch.iter().chain(signal) {
        if d.dimension() != dim || d.velocity.len() != dim {
            return Err(AlignError::DimensionMismatch {
                expected: dim,
                found: d.dimension(),
            });
        }
    }
    Ok(())
}

pub(crate) fn distance_table(
    sketch: &[SegmentDescriptor],
    signal: &[SegmentDescriptor],
    cfg: &PenaltyConfig,
) -> Vec<Vec<f64>> {
    sketch
        .iter()
        .map(|a| signal.iter().map(|b| unchecked_distance(a, b, cfg)).collect())
        .collect()
}

/// Where the alignment stands after consuming a prefix of both sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// No match yet; signal skips here are leading boundary skips.
    Lead,
    /// The last consumed pair was a match.
    Matched,
    /// Only sketch skips since the last match.
    SketchGap,
    /// Interior signal skips pending; a later match must close them.
    SignalGap,
    /// Past the last match; signal skips here are trailing boundary skips.
    Trail,
}

type Cell = (Phase, usize, usize);

struct Table {
    cols: usize,
    cost: Vec<[f64; 5]>,
    back: Vec<[Option<Cell>; 5]>,
}

impl Table {
    fn new(m: usize, n: usize) -> Self {
        let size = (m + 1) * (n + 1);
        Table {
            cols: n + 1,
            cost: vec![[f64::INFINITY; 5]; size],
            back: vec![[None; 5]; size],
        }
    }

    fn get(&self, phase: Phase, i: usize, j: usize) -> f64 {
        self.cost[i * self.cols + j][phase as usize]
    }

    /// Picks the cheapest `(predecessor, step cost)`; earlier candidates win ties.
    fn settle(&mut self, phase: Phase, i: usize, j: usize, preds: &[(Cell, f64)]) {
        let mut best = f64::INFINITY;
        let mut from = None;
        for &((p, pi, pj), step) in preds {
            let c = self.get(p, pi, pj) + step;
            if c < best {
                best = c;
                from = Some((p, pi, pj));
            }
        }
        let k = i * self.cols + j;
        self.cost[k][phase as usize] = best;
        self.back[k][phase as usize] = from;
    }
}

/// Minimum-cost correspondence between sketch and signal segments.
pub fn align(
    sketch: &[SegmentDescriptor],
    signal: &[SegmentDescriptor],
    cfg: &PenaltyConfig,
) -> Result<AlignmentResult, AlignError> {
    check_inputs(sketch, signal)?;
    let dist = distance_table(sketch, signal, cfg);
    Ok(align_with_table(&dist, cfg))
}

pub(crate) fn align_with_table(dist: &[Vec<f64>], cfg: &PenaltyConfig) -> AlignmentResult {
    use Phase::*;
    let m = dist.len();
    let n = dist[0].len();
    let mut t = Table::new(m, n);
    t.cost[0][Lead as usize] = 0.0;

    let (skip, stretch) = (cfg.w_skip, cfg.w_stretch);
    let mut preds: Vec<(Cell, f64)> = Vec::with_capacity(6);
    for i in 0..=m {
        for j in 0..=n {
            if i == 0 && j == 0 {
                continue;
            }
            // Sketch-side steps consume sketch segment i, signal-side steps
            // consume signal segment j.
            let sketch_step = |p: Phase| (i > 0).then(|| ((p, i - 1, j), skip));
            let signal_step = |p: Phase, cost: f64| (j > 0).then(|| ((p, i, j - 1), cost));

            preds.clear();
            preds.extend(sketch_step(Lead));
            preds.extend(signal_step(Lead, stretch));
            t.settle(Lead, i, j, &preds);

            if i > 0 && j > 0 {
                let d = dist[i - 1][j - 1];
                preds.clear();
                preds.extend(
                    [
                        (Matched, i - 1, j - 1),
                        (SketchGap, i - 1, j - 1),
                        (SignalGap, i - 1, j - 1),
                        (Lead, i - 1, j - 1),
                        (Matched, i - 1, j),
                        (Matched, i, j - 1),
                    ]
                    .map(|c| (c, d)),
                );
                t.settle(Matched, i, j, &preds);
            }

            preds.clear();
            preds.extend(sketch_step(Matched));
            preds.extend(sketch_step(SketchGap));
            t.settle(SketchGap, i, j, &preds);

            preds.clear();
            preds.extend(sketch_step(SignalGap));
            for p in [Matched, SketchGap, SignalGap] {
                preds.extend(signal_step(p, skip));
            }
            t.settle(SignalGap, i, j, &preds);

            preds.clear();
            preds.extend(sketch_step(Trail));
            for p in [Matched, SketchGap, Trail] {
                preds.extend(signal_step(p, stretch));
            }
            t.settle(Trail, i, j, &preds);
        }
    }

    let mut end = (Matched, m, n);
    let mut best = f64::INFINITY;
    for p in [Matched, SketchGap, Trail, Lead] {
        let c = t.get(p, m, n);
        if c < best {
            best = c;
            end = (p, m, n);
        }
    }

    let mut matches = Vec::new();
    let mut cur = Some(end);
    while let Some((phase, i, j)) = cur {
        if phase == Matched {
            matches.push((i - 1, j - 1));
        }
        cur = t.back[i * t.cols + j][phase as usize];
    }
    matches.reverse();

    let (skipped_interior, skipped_boundary) = classify_skips(m, n, &matches);
    AlignmentResult {
        score: best + cfg.w_count * m.abs_diff(n) as f64,
        matches,
        skipped_interior,
        skipped_boundary,
    }
}

/// Splits unmatched segments of both sides into interior and boundary skips.
///
/// A segment is a boundary skip when it lies before the first or after the
/// last matched segment of its side (or when nothing matched at all).
pub fn classify_skips(
    m: usize,
    n: usize,
    matches: &[(usize, usize)],
) -> (Vec<(Side, usize)>, Vec<(Side, usize)>) {
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    for (side, len) in [(Side::Sketch, m), (Side::Signal, n)] {
        let pick = |&(a, b): &(usize, usize)| if side == Side::Sketch { a } else { b };
        let matched: Vec<usize> = matches.iter().map(pick).collect();
        let lo = matched.iter().min().copied();
        let hi = matched.iter().max().copied();
        for idx in 0..len {
            if matched.contains(&idx) {
                continue;
            }
            match (lo, hi) {
                (Some(lo), Some(hi)) if idx > lo && idx < hi => interior.push((side, idx)),
                _ => boundary.push((side, idx)),
            }
        }
    }
    (interior, boundary)
}

/// Checks that `matches` is a chain the aligner could produce.
pub fn validate_correspondence(m: usize, n: usize, matches: &[(usize, usize)]) -> Result<(), AlignError> {
    for &(i, j) in matches {
        if i >= m || j >= n {
            return Err(AlignError::InvalidCorrespondence(format!(
                "pair ({i}, {j}) out of range for {m}x{n}"
            )));
        }
    }
    for w in matches.windows(2) {
        let ((i0, j0), (i1, j1)) = (w[0], w[1]);
        let advance = i1 > i0 && j1 > j0;
        let repeat = (i1 == i0 && j1 == j0 + 1) || (j1 == j0 && i1 == i0 + 1);
        if !advance && !repeat {
            return Err(AlignError::InvalidCorrespondence(format!(
                "step ({i0}, {j0}) -> ({i1}, {j1}) is not monotone"
            )));
        }
    }
    Ok(())
}

/// Cost of an explicit correspondence, computed from scratch.
pub fn correspondence_cost(
    sketch: &[SegmentDescriptor],
    signal: &[SegmentDescriptor],
    matches: &[(usize, usize)],
    cfg: &PenaltyConfig,
) -> Result<f64, AlignError> {
    check_inputs(sketch, signal)?;
    let (m, n) = (sketch.len(), signal.len());
    validate_correspondence(m, n, matches)?;
    let matched: f64 = matches
        .iter()
        .map(|&(i, j)| unchecked_distance(&sketch[i], &signal[j], cfg))
        .sum();
    let (interior, boundary) = classify_skips(m, n, matches);
    let skips: f64 = interior
        .iter()
        .map(|_| cfg.w_skip)
        .chain(boundary.iter().map(|(side, _)| match side {
            Side::Sketch => cfg.w_skip,
            Side::Signal => cfg.w_stretch,
        }))
        .sum();
    Ok(matched + skips + cfg.w_count * m.abs_diff(n) as f64)
}
