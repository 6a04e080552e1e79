//! Exhaustive alignment used to cross-check the dynamic program.
//!
//! Enumerates every correspondence chain and prices each one directly from
//! the skip rules, without sharing any code with the DP recurrence.

use super::{check_inputs, segment_distance, AlignError};
use crate::model::{AlignmentResult, PenaltyConfig, SegmentDescriptor, Side};

/// Largest sequence length (per side) the oracle accepts.
pub const ORACLE_MAX_SEGMENTS: usize = 6;

fn price(
    dist: &[Vec<f64>],
    chain: &[(usize, usize)],
    cfg: &PenaltyConfig,
) -> (f64, Vec<(Side, usize)>, Vec<(Side, usize)>) {
    let (m, n) = (dist.len(), dist[0].len());
    let mut total: f64 = chain.iter().map(|&(i, j)| dist[i][j]).sum();
    let mut interior = Vec::new();
    let mut boundary = Vec::new();

    let sketch_used: Vec<usize> = chain.iter().map(|p| p.0).collect();
    let signal_used: Vec<usize> = chain.iter().map(|p| p.1).collect();

    for i in (0..m).filter(|i| !sketch_used.contains(i)) {
        total += cfg.w_skip;
        let inside = chain.first().is_some_and(|f| f.0 < i) && chain.last().is_some_and(|l| i < l.0);
        if inside {
            interior.push((Side::Sketch, i));
        } else {
            boundary.push((Side::Sketch, i));
        }
    }
    for j in (0..n).filter(|j| !signal_used.contains(j)) {
        let before_any = signal_used.iter().all(|&u| u > j);
        let after_all = signal_used.iter().all(|&u| u < j);
        if before_any || after_all {
            total += cfg.w_stretch;
            boundary.push((Side::Signal, j));
        } else {
            total += cfg.w_skip;
            interior.push((Side::Signal, j));
        }
    }
    total += cfg.w_count * (m as f64 - n as f64).abs();
    (total, interior, boundary)
}

fn explore(m: usize, n: usize, chain: &mut Vec<(usize, usize)>, visit: &mut dyn FnMut(&[(usize, usize)])) {
    visit(chain);
    let next: Vec<(usize, usize)> = match chain.last() {
        None => (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect(),
        Some(&(i, j)) => {
            let mut v = Vec::new();
            if i + 1 < m {
                v.push((i + 1, j));
            }
            if j + 1 < n {
                v.push((i, j + 1));
            }
            for a in i + 1..m {
                for b in j + 1..n {
                    v.push((a, b));
                }
            }
            v
        }
    };
    for pair in next {
        chain.push(pair);
        explore(m, n, chain, visit);
        chain.pop();
    }
}

/// Minimum-cost alignment found by enumerating every correspondence chain.
///
/// Exponential in the sequence lengths, so both are capped at
/// [`ORACLE_MAX_SEGMENTS`].
pub fn brute_force_align(
    sketch: &[SegmentDescriptor],
    signal: &[SegmentDescriptor],
    cfg: &PenaltyConfig,
) -> Result<AlignmentResult, AlignError> {
    check_inputs(sketch, signal)?;
    let (m, n) = (sketch.len(), signal.len());
    if m > ORACLE_MAX_SEGMENTS || n > ORACLE_MAX_SEGMENTS {
        return Err(AlignError::OracleTooLarge {
            m,
            n,
            max: ORACLE_MAX_SEGMENTS,
        });
    }
    let dist: Vec<Vec<f64>> = sketch
        .iter()
        .map(|a| {
            signal
                .iter()
                .map(|b| segment_distance(a, b, cfg))
                .collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()?;

    let mut best: Option<AlignmentResult> = None;
    explore(m, n, &mut Vec::new(), &mut |chain| {
        let (score, skipped_interior, skipped_boundary) = price(&dist, chain, cfg);
        if best.as_ref().is_none_or(|b| score < b.score) {
            best = Some(AlignmentResult {
                score,
                matches: chain.to_vec(),
                skipped_interior,
                skipped_boundary,
            });
        }
    });
    Ok(best.expect("the empty chain is always visited"))
}

#[cfg(test)]
mod tests {
    use super::super::{align, correspondence_cost};
    use super::*;

    fn seg(length: f64, mid: f64) -> SegmentDescriptor {
        SegmentDescriptor {
            length,
            mid_spatial: vec![mid],
            mid_time: 0.5,
            velocity: vec![0.0],
        }
    }

    #[test]
    fn rejects_large_inputs() {
        let xs = vec![seg(0.1, 0.1); 7];
        assert!(matches!(
            brute_force_align(&xs, &xs[..2], &PenaltyConfig::default()),
            Err(AlignError::OracleTooLarge { m: 7, n: 2, .. })
        ));
    }

    #[test]
    fn identical_inputs_score_zero() {
        let xs = vec![seg(0.1, 0.1), seg(0.4, 0.7), seg(0.2, 0.3)];
        assert_eq!(
            brute_force_align(&xs, &xs, &PenaltyConfig::default())
                .unwrap()
                .score,
            0.0
        );
    }

    #[test]
    fn single_forced_match() {
        let cfg = PenaltyConfig {
            w_len: 1.0,
            w_mid: 0.0,
            w_time: 0.0,
            w_vel: 0.0,
            w_skip: 5.0,
            w_stretch: 5.0,
            ..Default::default()
        };
        let r = brute_force_align(&[seg(0.5, 0.2)], &[seg(0.3, 0.2)], &cfg).unwrap();
        assert!((r.score - 0.2).abs() < 1e-12);
        assert_eq!(r.matches, vec![(0, 0)]);
    }

    #[test]
    fn chain_count_for_small_grid() {
        // Hand count for 2x2: empty, 4 singletons, and the chains
        // (0,0)->(1,0), (0,0)->(0,1), (0,0)->(1,1), (0,1)->(1,1),
        // (1,0)->(1,1), (0,0)->(1,0)->(1,1), (0,0)->(0,1)->(1,1).
        let mut count = 0;
        explore(2, 2, &mut Vec::new(), &mut |_| count += 1);
        assert_eq!(count, 12);
    }

    #[test]
    fn oracle_prices_match_shared_cost_function() {
        let sketch = vec![seg(0.1, 0.1), seg(0.4, 0.7), seg(0.2, 0.3)];
        let signal = vec![seg(0.3, 0.2), seg(0.2, 0.9)];
        let cfg = PenaltyConfig::default();
        let dist: Vec<Vec<f64>> = sketch
            .iter()
            .map(|a| {
                signal
                    .iter()
                    .map(|b| segment_distance(a, b, &cfg).unwrap())
                    .collect()
            })
            .collect();
        explore(3, 2, &mut Vec::new(), &mut |chain| {
            let (p, _, _) = price(&dist, chain, &cfg);
            let c = correspondence_cost(&sketch, &signal, chain, &cfg).unwrap();
            assert!((p - c).abs() < 1e-12, "{chain:?}");
        });
        let dp = align(&sketch, &signal, &cfg).unwrap();
        let bf = brute_force_align(&sketch, &signal, &cfg).unwrap();
        assert!((dp.score - bf.score).abs() < 1e-12);
    }
}
