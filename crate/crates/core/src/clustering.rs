//! Average-linkage agglomerative clustering and medoid selection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::DistanceMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("cluster count {k} must be between 1 and {n}")]
    InvalidCount { k: usize, n: usize },
    #[error("distance threshold must be non-negative, got {0}")]
    InvalidThreshold(f64),
    #[error("distance matrix is empty")]
    EmptyMatrix,
    #[error("distance matrix is not symmetric")]
    Asymmetric,
    #[error("medoid of an empty member list")]
    EmptyCluster,
    #[error("unknown member id `{0}`")]
    UnknownMember(String),
}

/// Where to stop merging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cut {
    /// Stop when this many clusters remain.
    Count(usize),
    /// Stop before the first merge whose linkage distance exceeds this value.
    Threshold(f64),
}

impl Cut {
    pub fn default_for(n: usize) -> Cut {
        Cut::Count(n.clamp(1, 8))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    #[default]
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub member_ids: Vec<String>,
    pub medoid_id: String,
}

/// One merge step: the two clusters (by member ids) and their linkage distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub clusters: Vec<Cluster>,
    pub cut: Cut,
    pub linkage: Linkage,
    pub merges: Vec<Merge>,
}

const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Bottom-up merging with average linkage.
///
/// Linkage between clusters A and B is the mean of all raw distances between
/// their members, tracked as a running sum so it is never re-derived from
/// earlier averages. Ties go to the pair whose smallest member indices are
/// lexicographically smallest.
pub fn agglomerate(matrix: &DistanceMatrix, cut: Cut) -> Result<ClusterReport, ClusterError> {
    let n = matrix.n();
    if n == 0 {
        return Err(ClusterError::EmptyMatrix);
    }
    if !matrix.is_symmetric(SYMMETRY_TOLERANCE) {
        return Err(ClusterError::Asymmetric);
    }
    match cut {
        Cut::Count(k) if k == 0 || k > n => return Err(ClusterError::InvalidCount { k, n }),
        Cut::Threshold(t) if !(t >= 0.0) => return Err(ClusterError::InvalidThreshold(t)),
        _ => {}
    }

    // Active clusters as sorted member index lists; cross[a][b] holds the sum
    // of raw distances between clusters a and b.
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut cross: Vec<Vec<f64>> = matrix.rows().to_vec();
    let mut active = n;
    let mut merges = Vec::new();

    while active > 1 {
        if let Cut::Count(k) = cut {
            if active <= k {
                break;
            }
        }
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..n {
            let Some(ma) = &members[a] else { continue };
            for b in a + 1..n {
                let Some(mb) = &members[b] else { continue };
                let linkage = cross[a][b] / (ma.len() * mb.len()) as f64;
                let key = (ma[0].min(mb[0]), ma[0].max(mb[0]));
                let better = match &best {
                    None => true,
                    Some((d, k, _, _)) => linkage < *d || (linkage == *d && key < *k),
                };
                if better {
                    best = Some((linkage, key, a, b));
                }
            }
        }
        let (distance, _, a, b) = best.expect("at least two active clusters");
        if let Cut::Threshold(t) = cut {
            if distance > t {
                break;
            }
        }
        let mb = members[b].take().expect("active");
        let ma = members[a].take().expect("active");
        merges.push(Merge {
            left: ma.iter().map(|&i| matrix.ids()[i].clone()).collect(),
            right: mb.iter().map(|&i| matrix.ids()[i].clone()).collect(),
            distance,
        });
        let mut merged = ma;
        merged.extend(mb);
        merged.sort_unstable();
        for c in 0..n {
            if c != a && members[c].is_some() {
                let s = cross[a][c] + cross[b][c];
                cross[a][c] = s;
                cross[c][a] = s;
            }
        }
        members[a] = Some(merged);
        active -= 1;
    }

    let mut clusters = members
        .into_iter()
        .flatten()
        .map(|idx| {
            let member_ids: Vec<String> = idx.iter().map(|&i| matrix.ids()[i].clone()).collect();
            let medoid_id = medoid_of_indices(&idx, matrix);
            Cluster {
                member_ids,
                medoid_id,
            }
        })
        .collect::<Vec<_>>();
    clusters.sort_by(|x, y| {
        x.member_ids
            .len()
            .cmp(&y.member_ids.len())
            .reverse()
            .then_with(|| x.member_ids.cmp(&y.member_ids))
    });

    Ok(ClusterReport {
        clusters,
        cut,
        linkage: Linkage::Average,
        merges,
    })
}

fn medoid_of_indices(idx: &[usize], matrix: &DistanceMatrix) -> String {
    let ids = matrix.ids();
    idx.iter()
        .map(|&i| (idx.iter().map(|&j| matrix.get(i, j)).sum::<f64>(), &ids[i]))
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)))
        .map(|(_, id)| id.clone())
        .expect("clusters are non-empty")
}

/// Member minimizing the summed distance to all other members; ties go to
/// the lowest id.
pub fn medoid(member_ids: &[String], matrix: &DistanceMatrix) -> Result<String, ClusterError> {
    if member_ids.is_empty() {
        return Err(ClusterError::EmptyCluster);
    }
    let idx = member_ids
        .iter()
        .map(|id| {
            matrix
                .index_of(id)
                .ok_or_else(|| ClusterError::UnknownMember(id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(medoid_of_indices(&idx, matrix))
}
