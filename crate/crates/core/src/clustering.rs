//! Clustering kernels shared by the external and internal analyses: a
//! density-threshold clustering over per-process performance vectors, and an
//! exact one-dimensional k-means over scalar values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of severity categories used throughout the pipeline.
pub const SEVERITY_CLUSTERS: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("performance vectors must share one length (expected {expected}, got {got})")]
    LengthMismatch { expected: usize, got: usize },
    #[error("clustering input is empty")]
    Empty,
    #[error("severity is undefined: every vector has zero length")]
    AllZeroVectors,
    #[error("clustering input contains a non-finite value")]
    NonFinite,
}

/// One process's values of a chosen metric across all code regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfVector {
    /// Process rank that owns this vector.
    pub owner: usize,
    pub values: Vec<f64>,
}

impl PerfVector {
    pub fn new(owner: usize, values: Vec<f64>) -> Self {
        PerfVector { owner, values }
    }

    pub fn magnitude(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Euclidean distance between two equal-length vectors.
pub fn euclidean_distance(a: &PerfVector, b: &PerfVector) -> Result<f64, ClusterError> {
    if a.values.len() != b.values.len() {
        return Err(ClusterError::LengthMismatch {
            expected: a.values.len(),
            got: b.values.len(),
        });
    }
    Ok(distance_unchecked(&a.values, &b.values))
}

/// Vector length: the distance to the zero vector.
pub fn vector_length(a: &PerfVector) -> f64 {
    a.magnitude()
}

fn distance_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// A partition of process ranks into clusters. Isolated points are singleton
/// clusters. Canonical form: members sorted ascending, clusters ordered by
/// smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusteringOutcome {
    pub clusters: Vec<Vec<usize>>,
}

impl ClusteringOutcome {
    /// Canonicalizes the given clusters.
    pub fn from_clusters(mut clusters: Vec<Vec<usize>>) -> Self {
        for c in &mut clusters {
            c.sort_unstable();
        }
        clusters.retain(|c| !c.is_empty());
        clusters.sort_by_key(|c| c[0]);
        ClusteringOutcome { clusters }
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    /// Canonical cluster index of a rank, if present.
    pub fn cluster_of(&self, rank: usize) -> Option<usize> {
        self.clusters.iter().position(|c| c.contains(&rank))
    }
}

/// Density-threshold clustering over performance vectors.
///
/// Seeds are taken in ascending owner order among not-yet-clustered points. A
/// seed `p` forms a cluster when strictly more than `count_threshold` points
/// (the seed included) lie within `threshold_fraction * length(p)`; the
/// cluster claims every in-threshold point that is still unassigned. Assigned
/// points are never re-seeded or re-assigned. Leftover points become
/// singleton clusters.
pub fn density_cluster(
    vectors: &[PerfVector],
    threshold_fraction: f64,
    count_threshold: usize,
) -> Result<ClusteringOutcome, ClusterError> {
    if vectors.is_empty() {
        return Err(ClusterError::Empty);
    }
    let dim = vectors[0].values.len();
    for v in vectors {
        if v.values.len() != dim {
            return Err(ClusterError::LengthMismatch {
                expected: dim,
                got: v.values.len(),
            });
        }
        if v.values.iter().any(|x| !x.is_finite()) {
            return Err(ClusterError::NonFinite);
        }
    }

    let mut order: Vec<usize> = (0..vectors.len()).collect();
    order.sort_by_key(|&i| vectors[i].owner);

    let mut assigned = vec![false; vectors.len()];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &p in &order {
        if assigned[p] {
            continue;
        }
        let threshold = threshold_fraction * vectors[p].magnitude();
        // A zero-length seed has threshold 0 and cannot even claim itself.
        let in_threshold: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&q| distance_unchecked(&vectors[p].values, &vectors[q].values) < threshold)
            .collect();
        if in_threshold.len() > count_threshold {
            let members: Vec<usize> = in_threshold
                .into_iter()
                .filter(|&q| !assigned[q])
                .collect();
            for &q in &members {
                assigned[q] = true;
            }
            clusters.push(members.iter().map(|&q| vectors[q].owner).collect());
        }
    }
    for &p in &order {
        if !assigned[p] {
            clusters.push(vec![vectors[p].owner]);
        }
    }
    Ok(ClusteringOutcome::from_clusters(clusters))
}

/// Dissimilarity severity: max pairwise distance over min nonzero length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissimilaritySeverity {
    pub value: f64,
    /// Number of zero-length vectors excluded from the minimum.
    pub zero_length_excluded: usize,
}

pub fn dissimilarity_severity(
    vectors: &[PerfVector],
) -> Result<DissimilaritySeverity, ClusterError> {
    if vectors.len() < 2 {
        return Err(ClusterError::Empty);
    }
    let dim = vectors[0].values.len();
    for v in vectors {
        if v.values.len() != dim {
            return Err(ClusterError::LengthMismatch {
                expected: dim,
                got: v.values.len(),
            });
        }
    }
    let mut max_dist = 0.0f64;
    for i in 0..vectors.len() {
        for j in (i + 1)..vectors.len() {
            let d = distance_unchecked(&vectors[i].values, &vectors[j].values);
            max_dist = max_dist.max(d);
        }
    }
    let mut min_len = f64::INFINITY;
    let mut excluded = 0usize;
    for v in vectors {
        let len = v.magnitude();
        if len > 0.0 {
            min_len = min_len.min(len);
        } else {
            excluded += 1;
        }
    }
    if !min_len.is_finite() {
        return Err(ClusterError::AllZeroVectors);
    }
    Ok(DissimilaritySeverity {
        value: max_dist / min_len,
        zero_length_excluded: excluded,
    })
}

/// Severity category of a code region, ordered by numeric value.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum SeverityCategory {
    VeryLow = 0,
    Low = 1,
    Medium = 2,
    High = 3,
    VeryHigh = 4,
}

impl SeverityCategory {
    pub fn label(self) -> &'static str {
        match self {
            SeverityCategory::VeryLow => "very low",
            SeverityCategory::Low => "low",
            SeverityCategory::Medium => "medium",
            SeverityCategory::High => "high",
            SeverityCategory::VeryHigh => "very high",
        }
    }

    pub const ALL: [SeverityCategory; 5] = [
        SeverityCategory::VeryLow,
        SeverityCategory::Low,
        SeverityCategory::Medium,
        SeverityCategory::High,
        SeverityCategory::VeryHigh,
    ];

    fn from_rank(rank: usize) -> SeverityCategory {
        Self::ALL[rank]
    }
}

/// Result of one-dimensional k-means: per-value cluster indices, ordered by
/// ascending cluster centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarClusters {
    pub assignments: Vec<usize>,
    pub cluster_count: usize,
}

/// Exact one-dimensional k-means: the partition minimizing within-cluster sum
/// of squares, found by dynamic programming over the sorted values. Clusters
/// never split runs of equal values; when fewer than `k` distinct values
/// exist, each distinct value is its own cluster. Deterministic.
pub fn kmeans_scalar(values: &[f64], k: usize) -> Result<ScalarClusters, ClusterError> {
    if values.is_empty() {
        return Err(ClusterError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ClusterError::NonFinite);
    }
    assert!(k >= 1, "k must be at least 1");

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));

    // Collapse to runs of equal values; clusters are unions of whole runs.
    let mut runs: Vec<(f64, usize)> = Vec::new();
    for &i in &order {
        match runs.last_mut() {
            Some((v, c)) if *v == values[i] => *c += 1,
            _ => runs.push((values[i], 1)),
        }
    }
    let r = runs.len();
    let k_eff = k.min(r);

    // Shift by the mean for numerical conditioning; WCSS is shift-invariant.
    let total: usize = runs.iter().map(|&(_, c)| c).sum();
    let mean = runs.iter().map(|&(v, c)| v * c as f64).sum::<f64>() / total as f64;
    let mut s1 = vec![0.0f64; r + 1];
    let mut s2 = vec![0.0f64; r + 1];
    let mut cnt = vec![0usize; r + 1];
    for (i, &(v, c)) in runs.iter().enumerate() {
        let x = v - mean;
        s1[i + 1] = s1[i] + x * c as f64;
        s2[i + 1] = s2[i] + x * x * c as f64;
        cnt[i + 1] = cnt[i] + c;
    }
    let cost = |a: usize, b: usize| -> f64 {
        let n = (cnt[b] - cnt[a]) as f64;
        let sum = s1[b] - s1[a];
        ((s2[b] - s2[a]) - sum * sum / n).max(0.0)
    };

    // dp[t][i]: best cost of the first i runs in t clusters.
    let mut dp = vec![vec![f64::INFINITY; r + 1]; k_eff + 1];
    let mut back = vec![vec![0usize; r + 1]; k_eff + 1];
    for i in 1..=r {
        dp[1][i] = cost(0, i);
    }
    for t in 2..=k_eff {
        for i in t..=r {
            for s in (t - 1)..i {
                let cand = dp[t - 1][s] + cost(s, i);
                if cand < dp[t][i] {
                    dp[t][i] = cand;
                    back[t][i] = s;
                }
            }
        }
    }

    let mut boundaries = vec![r];
    let mut i = r;
    for t in (2..=k_eff).rev() {
        i = back[t][i];
        boundaries.push(i);
    }
    boundaries.push(0);
    boundaries.reverse();

    // Map each original index to its cluster (clusters already ascend by value).
    let mut run_cluster = vec![0usize; r];
    for c in 0..k_eff {
        for run in boundaries[c]..boundaries[c + 1] {
            run_cluster[run] = c;
        }
    }
    let mut assignments = vec![0usize; values.len()];
    let mut run_idx = 0usize;
    for &i in &order {
        if values[i] != runs[run_idx].0 {
            run_idx += 1;
        }
        assignments[i] = run_cluster[run_idx];
    }
    Ok(ScalarClusters {
        assignments,
        cluster_count: k_eff,
    })
}

/// Classifies scalar values into the five severity categories via k-means.
///
/// Clusters are ranked by ascending centroid. With five populated clusters
/// they map onto VeryLow..VeryHigh directly; with fewer, categories are
/// assigned from VeryLow upward, except that the cluster containing the
/// global maximum is always VeryHigh.
pub fn severity_classify(values: &[f64]) -> Result<Vec<SeverityCategory>, ClusterError> {
    let clusters = kmeans_scalar(values, SEVERITY_CLUSTERS)?;
    let p = clusters.cluster_count;
    let categories: Vec<SeverityCategory> = clusters
        .assignments
        .iter()
        .map(|&c| {
            if c == p - 1 {
                SeverityCategory::VeryHigh
            } else {
                SeverityCategory::from_rank(c)
            }
        })
        .collect();
    Ok(categories)
}
