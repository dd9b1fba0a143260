//! External bottleneck detection and localization.
//!
//! Existence is decided by density clustering of per-process CPU-time
//! vectors: more than one cluster means the processes diverge and an external
//! bottleneck exists. Localization walks the code-region tree top-down,
//! zeroing and restoring vector components to find which regions drive the
//! cluster structure.

use crate::clustering::{
    density_cluster, dissimilarity_severity, ClusterError, ClusteringOutcome, PerfVector,
};
use crate::profile::{MetricKind, Profile, RegionId};
use crate::AnalysisConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("external analysis needs at least 2 processes")]
    SingleProcess,
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("program wall time of process {0} is not positive")]
    NonPositiveWallTime(usize),
    #[error("external decision table needs a non-empty CCCR set")]
    EmptyCccrSet,
    #[error("profile error: {0}")]
    Profile(String),
}

/// Outcome of the existence check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalDetection {
    pub outcome: ClusteringOutcome,
    /// Dissimilarity severity S; 0 when undefined because all vectors are zero.
    pub severity: f64,
    pub bottlenecks_exist: bool,
    /// Processes whose CPU-time vector has zero length (excluded from the
    /// severity minimum; reported as a degenerate-input notice).
    pub zero_length_processes: Vec<usize>,
}

/// Clusters CPU-time vectors and computes the severity S.
pub fn detect_external(
    profile: &Profile,
    config: &AnalysisConfig,
) -> Result<ExternalDetection, AnalysisError> {
    if profile.process_count < 2 {
        return Err(AnalysisError::SingleProcess);
    }
    let vectors = cpu_vectors(profile)?;
    let outcome = density_cluster(&vectors, config.threshold_fraction, config.count_threshold)?;
    let zero_length: Vec<usize> = vectors
        .iter()
        .filter(|v| v.magnitude() == 0.0)
        .map(|v| v.owner)
        .collect();
    let severity = match dissimilarity_severity(&vectors) {
        Ok(s) => s.value,
        Err(ClusterError::AllZeroVectors) => return Err(ClusterError::AllZeroVectors.into()),
        Err(e) => return Err(e.into()),
    };
    let bottlenecks_exist = outcome.cluster_count() > 1;
    Ok(ExternalDetection {
        outcome,
        severity,
        bottlenecks_exist,
        zero_length_processes: zero_length,
    })
}

/// True when the canonical partitions differ in cluster count or membership.
pub fn clustering_changed(reference: &ClusteringOutcome, candidate: &ClusteringOutcome) -> bool {
    reference != candidate
}

fn cpu_vectors(profile: &Profile) -> Result<Vec<PerfVector>, AnalysisError> {
    (0..profile.process_count)
        .map(|rank| {
            profile
                .perf_vector(rank, MetricKind::CpuTime)
                .map_err(|e| AnalysisError::Profile(e.to_string()))
        })
        .collect()
}

/// A search target: a real region or a composite of depth-1 regions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CcrTarget {
    Region(RegionId),
    Composite(Vec<RegionId>),
}

impl CcrTarget {
    pub fn label(&self) -> String {
        match self {
            CcrTarget::Region(r) => format!("region {r}"),
            CcrTarget::Composite(members) => {
                let ids: Vec<String> = members.iter().map(|r| r.to_string()).collect();
                format!("regions {}", ids.join("+"))
            }
        }
    }

    pub fn regions(&self) -> Vec<RegionId> {
        match self {
            CcrTarget::Region(r) => vec![*r],
            CcrTarget::Composite(members) => members.clone(),
        }
    }
}

/// One discovered critical code region at a search level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcrEntry {
    pub target: CcrTarget,
    /// Search level: 1 for depth-1 regions (or composites), increasing down
    /// the tree.
    pub level: usize,
    pub is_cccr: bool,
    /// Index of the parent entry within the tree, if any.
    pub parent: Option<usize>,
}

/// All critical code regions found by the search, with CCCR flags.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CcrTree {
    pub entries: Vec<CcrEntry>,
    /// Set when even the composite sweep found nothing.
    pub exhausted: bool,
}

impl CcrTree {
    pub fn cccr_regions(&self) -> BTreeSet<RegionId> {
        self.entries
            .iter()
            .filter(|e| e.is_cccr)
            .flat_map(|e| e.target.regions())
            .collect()
    }

    pub fn cccr_entries(&self) -> impl Iterator<Item = &CcrEntry> {
        self.entries.iter().filter(|e| e.is_cccr)
    }

    /// Root-to-CCCR chains of entry indices, one per CCCR.
    pub fn chains(&self) -> Vec<Vec<usize>> {
        let mut chains = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            if !e.is_cccr {
                continue;
            }
            let mut chain = vec![i];
            let mut cur = e;
            while let Some(p) = cur.parent {
                chain.push(p);
                cur = &self.entries[p];
            }
            chain.reverse();
            chains.push(chain);
        }
        chains
    }
}

/// Per-search view of the vector columns: a set of depth-1 columns (real or
/// composite) plus the per-region children used for descent.
struct SearchSpace {
    /// (target, child targets) for every depth-1 node of this search.
    depth_one: Vec<CcrTarget>,
}

struct Searcher<'a> {
    profile: &'a Profile,
    config: &'a AnalysisConfig,
    /// Full original CPU-time vectors, row per process.
    base: Vec<Vec<f64>>,
}

impl<'a> Searcher<'a> {
    /// Vector value of a target: sum over its member regions.
    fn value(&self, rank: usize, target: &CcrTarget) -> f64 {
        target
            .regions()
            .iter()
            .map(|r| self.base[rank][r.index()])
            .sum()
    }

    /// Builds clustering inputs for the level-1 picture: one component per
    /// depth-1 target (deeper components are zeroed, i.e. omitted), with the
    /// listed targets zeroed and `restored` (a deeper region) appended.
    fn vectors(
        &self,
        space: &SearchSpace,
        zeroed: &[&CcrTarget],
        restored: Option<RegionId>,
    ) -> Vec<PerfVector> {
        (0..self.profile.process_count)
            .map(|rank| {
                let mut values: Vec<f64> = space
                    .depth_one
                    .iter()
                    .map(|t| {
                        if zeroed.iter().any(|z| *z == t) {
                            0.0
                        } else {
                            self.value(rank, t)
                        }
                    })
                    .collect();
                if let Some(r) = restored {
                    values.push(self.base[rank][r.index()]);
                }
                PerfVector::new(rank, values)
            })
            .collect()
    }

    fn cluster(&self, vectors: &[PerfVector]) -> Result<ClusteringOutcome, AnalysisError> {
        Ok(density_cluster(
            vectors,
            self.config.threshold_fraction,
            self.config.count_threshold,
        )?)
    }

    /// Level-1 sweep: a depth-1 target is a 1-CCR when zeroing it changes
    /// the clustering relative to the reference.
    fn one_ccr_sweep(
        &self,
        space: &SearchSpace,
        reference: &ClusteringOutcome,
    ) -> Result<Vec<CcrTarget>, AnalysisError> {
        let mut found: Vec<CcrTarget> = Vec::new();
        for target in &space.depth_one {
            let live = (0..self.profile.process_count).any(|rank| self.value(rank, target) > 0.0);
            if !live {
                continue;
            }
            let outcome = self.cluster(&self.vectors(space, &[target], None))?;
            if clustering_changed(reference, &outcome) {
                found.push(target.clone());
            }
        }
        Ok(found)
    }

    /// Runs steps 1-4 over one search space. Returns discovered entries.
    fn run(&self, space: &SearchSpace) -> Result<Vec<CcrEntry>, AnalysisError> {
        let reference = self.cluster(&self.vectors(space, &[], None))?;
        let mut entries: Vec<CcrEntry> = Vec::new();
        let one_ccrs = self.one_ccr_sweep(space, &reference)?;

        // Steps 3-4: descend each 1-CCR chain. A child is an L-CCR when the
        // child alone (ancestors zeroed) reproduces the reference partition;
        // a CCR none of whose children is a CCR is a CCCR.
        for target in one_ccrs {
            let entry_idx = entries.len();
            entries.push(CcrEntry {
                target: target.clone(),
                level: 1,
                is_cccr: false,
                parent: None,
            });
            let children = self.children_of(&target);
            self.descend(space, &reference, &target, entry_idx, children, &mut entries)?;
        }
        Ok(entries)
    }

    fn children_of(&self, target: &CcrTarget) -> Vec<RegionId> {
        let mut out = Vec::new();
        for r in target.regions() {
            out.extend(self.profile.tree.node(r).children.iter().copied());
        }
        out
    }

    fn descend(
        &self,
        space: &SearchSpace,
        reference: &ClusteringOutcome,
        ancestor: &CcrTarget,
        ancestor_idx: usize,
        children: Vec<RegionId>,
        entries: &mut Vec<CcrEntry>,
    ) -> Result<(), AnalysisError> {
        let mut any_child_ccr = false;
        for child in children {
            let outcome =
                self.cluster(&self.vectors(space, &[ancestor], Some(child)))?;
            if !clustering_changed(reference, &outcome) {
                any_child_ccr = true;
                let idx = entries.len();
                let level = entries[ancestor_idx].level + 1;
                entries.push(CcrEntry {
                    target: CcrTarget::Region(child),
                    level,
                    is_cccr: false,
                    parent: Some(ancestor_idx),
                });
                let grand = self.profile.tree.node(child).children.clone();
                self.descend(space, reference, ancestor, idx, grand, entries)?;
            }
        }
        if !any_child_ccr {
            entries[ancestor_idx].is_cccr = true;
        }
        Ok(())
    }
}

/// The level-1 sweep of the primary (non-composite) space: depth-1 regions
/// whose removal changes the clustering.
pub fn one_ccrs(
    profile: &Profile,
    config: &AnalysisConfig,
) -> Result<Vec<RegionId>, AnalysisError> {
    let searcher = Searcher::new(profile, config)?;
    let space = SearchSpace {
        depth_one: profile
            .tree
            .depth_one()
            .iter()
            .map(|&r| CcrTarget::Region(r))
            .collect(),
    };
    let reference = searcher.cluster(&searcher.vectors(&space, &[], None))?;
    Ok(searcher
        .one_ccr_sweep(&space, &reference)?
        .into_iter()
        .flat_map(|t| t.regions())
        .collect())
}

/// Top-down search for external critical code regions over CPU-time vectors.
///
/// Works on the level-1 picture (components of depth > 1 zeroed). A depth-1
/// region whose removal changes the clustering is a 1-CCR; descending, a
/// child that alone reproduces the reference partition is an L-CCR; a CCR
/// with no CCR child is a CCCR. If no 1-CCR exists, composites of s = 2..r-1
/// depth-1 regions are tried in lexicographic order, stopping at the first s
/// that yields any CCCR.
pub fn search_external(
    profile: &Profile,
    config: &AnalysisConfig,
) -> Result<CcrTree, AnalysisError> {
    if profile.process_count < 2 {
        return Err(AnalysisError::SingleProcess);
    }
    let base: Vec<Vec<f64>> = (0..profile.process_count)
        .map(|rank| {
            profile
                .perf_vector(rank, MetricKind::CpuTime)
                .map(|v| v.values)
                .map_err(|e| AnalysisError::Profile(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let searcher = Searcher {
        profile,
        config,
        base,
    };

    let depth_one: Vec<CcrTarget> = profile
        .tree
        .depth_one()
        .iter()
        .map(|&r| CcrTarget::Region(r))
        .collect();
    let entries = searcher.run(&SearchSpace {
        depth_one: depth_one.clone(),
    })?;
    if !entries.is_empty() {
        return Ok(CcrTree {
            entries,
            exhausted: false,
        });
    }

    // Step 5: composite sweep.
    let singles: Vec<RegionId> = profile.tree.depth_one().to_vec();
    let r = singles.len();
    for s in 2..r {
        let mut level_entries: Vec<CcrEntry> = Vec::new();
        for combo in combinations(&singles, s) {
            let composite = CcrTarget::Composite(combo.clone());
            let mut depth_one: Vec<CcrTarget> = vec![composite];
            depth_one.extend(
                singles
                    .iter()
                    .filter(|r| !combo.contains(r))
                    .map(|&r| CcrTarget::Region(r)),
            );
            let found = searcher.run(&SearchSpace { depth_one })?;
            let offset = level_entries.len();
            for mut e in found {
                e.parent = e.parent.map(|p| p + offset);
                level_entries.push(e);
            }
        }
        if level_entries.iter().any(|e| e.is_cccr) {
            return Ok(CcrTree {
                entries: level_entries,
                exhausted: false,
            });
        }
    }
    Ok(CcrTree {
        entries: Vec::new(),
        exhausted: true,
    })
}

/// All s-element subsets in lexicographic order of member ids.
fn combinations(items: &[RegionId], s: usize) -> Vec<Vec<RegionId>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(s);
    fn rec(
        items: &[RegionId],
        s: usize,
        start: usize,
        current: &mut Vec<RegionId>,
        out: &mut Vec<Vec<RegionId>>,
    ) {
        if current.len() == s {
            out.push(current.clone());
            return;
        }
        let remaining = s - current.len();
        for i in start..=items.len().saturating_sub(remaining) {
            current.push(items[i]);
            rec(items, s, i + 1, current, out);
            current.pop();
        }
    }
    rec(items, s, 0, &mut current, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::ClusteringOutcome;
    use crate::profile::{ingest_profile, RawProfile, RawRegion, RegionMetrics};

    fn outcome(clusters: &[&[usize]]) -> ClusteringOutcome {
        ClusteringOutcome::from_clusters(clusters.iter().map(|c| c.to_vec()).collect())
    }

    #[test]
    fn changed_detects_count_and_membership() {
        let a = outcome(&[&[0, 1], &[2]]);
        let b = outcome(&[&[0], &[1], &[2]]);
        let c = outcome(&[&[0, 1], &[2, 3]]);
        let d = outcome(&[&[0, 2], &[1, 3]]);
        assert!(!clustering_changed(&a, &a.clone()));
        assert!(clustering_changed(&a, &b));
        assert!(clustering_changed(&c, &d));
    }

    /// Builds a profile with the given tree and per-process cpu times.
    /// `parents[i]` is the parent of region i+1 (0 = none).
    pub(crate) fn cpu_profile(parents: &[u32], cpu: &[Vec<f64>]) -> crate::Profile {
        let n = parents.len();
        let regions = (0..n)
            .map(|i| RawRegion {
                id: i as i64 + 1,
                name: format!("r{}", i + 1),
                parent: (parents[i] != 0).then_some(parents[i] as i64),
                depth: None,
            })
            .collect();
        let metrics = cpu
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&c| RegionMetrics {
                        wall_time: c,
                        cpu_time: c,
                        ..Default::default()
                    })
                    .collect()
            })
            .collect();
        let raw = RawProfile {
            version: 1,
            regions,
            processes: cpu.len(),
            program_wall_time: vec![1000.0; cpu.len()],
            metrics,
        };
        let doc = serde_json::to_vec(&raw).unwrap();
        ingest_profile(&doc).unwrap()
    }

    #[test]
    fn identical_processes_have_no_external_bottleneck() {
        let p = cpu_profile(
            &[0, 0, 0],
            &[
                vec![5.0, 6.0, 7.0],
                vec![5.0, 6.0, 7.0],
                vec![5.0, 6.0, 7.0],
                vec![5.0, 6.0, 7.0],
            ],
        );
        let d = detect_external(&p, &AnalysisConfig::default()).unwrap();
        assert_eq!(d.outcome.cluster_count(), 1);
        assert_eq!(d.severity, 0.0);
        assert!(!d.bottlenecks_exist);
    }

    #[test]
    fn single_process_is_not_applicable() {
        let p = cpu_profile(&[0], &[vec![1.0]]);
        assert_eq!(
            detect_external(&p, &AnalysisConfig::default()),
            Err(AnalysisError::SingleProcess)
        );
    }

    #[test]
    fn variance_in_one_leaf_region_makes_it_cccr() {
        // Region 2 carries all inter-process variance; 8 processes in two
        // groups, constant elsewhere. count_threshold=2 needs groups > 2.
        let mut cpu = Vec::new();
        for rank in 0..8 {
            let r2 = if rank < 4 { 10.0 } else { 100.0 };
            cpu.push(vec![50.0, r2, 30.0]);
        }
        let p = cpu_profile(&[0, 0, 0], &cpu);
        let cfg = AnalysisConfig::default();
        let d = detect_external(&p, &cfg).unwrap();
        assert!(d.bottlenecks_exist);
        let tree = search_external(&p, &cfg).unwrap();
        assert!(!tree.exhausted);
        assert_eq!(tree.cccr_regions(), [RegionId(2)].into_iter().collect());
        let entry = tree.entries.iter().find(|e| e.is_cccr).unwrap();
        assert_eq!(entry.level, 1);
    }

    #[test]
    fn nested_variance_chain_reaches_depth_two() {
        // Region 3 is a child of region 1 and carries the variance; region 1
        // is inclusive of region 3.
        let mut cpu = Vec::new();
        for rank in 0..8 {
            let v = if rank < 4 { 10.0 } else { 100.0 };
            cpu.push(vec![v + 20.0, 40.0, v]);
        }
        let p = cpu_profile(&[0, 0, 1], &cpu);
        let tree = search_external(&p, &AnalysisConfig::default()).unwrap();
        let cccrs = tree.cccr_regions();
        assert_eq!(cccrs, [RegionId(3)].into_iter().collect());
        let chain = &tree.chains()[0];
        assert_eq!(tree.entries[chain[0]].target, CcrTarget::Region(RegionId(1)));
        assert_eq!(tree.entries[chain[1]].target, CcrTarget::Region(RegionId(3)));
        assert_eq!(tree.entries[chain[1]].level, 2);
    }

    #[test]
    fn split_variance_needs_composite() {
        // Variance split evenly across regions 1 and 2: each group differs by
        // +6 in both, which stays above the threshold when either region is
        // zeroed alone (partition unchanged, so neither is a 1-CCR), but
        // zeroing their composite collapses the groups.
        let mut cpu = Vec::new();
        for rank in 0..8 {
            let (a, b) = if rank < 4 { (10.0, 10.0) } else { (16.0, 16.0) };
            cpu.push(vec![a, b, 40.0]);
        }
        let p = cpu_profile(&[0, 0, 0], &cpu);
        let cfg = AnalysisConfig::default();
        let d = detect_external(&p, &cfg).unwrap();
        assert!(d.bottlenecks_exist);
        let tree = search_external(&p, &cfg).unwrap();
        assert!(!tree.exhausted);
        let cccrs: Vec<_> = tree.cccr_entries().collect();
        assert_eq!(cccrs.len(), 1);
        assert_eq!(
            cccrs[0].target,
            CcrTarget::Composite(vec![RegionId(1), RegionId(2)])
        );
    }

    #[test]
    fn search_leaves_profile_unmodified() {
        let mut cpu = Vec::new();
        for rank in 0..8 {
            let r2 = if rank < 4 { 10.0 } else { 100.0 };
            cpu.push(vec![50.0, r2, 30.0]);
        }
        let p = cpu_profile(&[0, 0, 0], &cpu);
        let before = p.clone();
        let _ = search_external(&p, &AnalysisConfig::default()).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn combinations_are_lexicographic() {
        let ids: Vec<RegionId> = (1..=4).map(RegionId).collect();
        let combos = combinations(&ids, 2);
        let expect: Vec<Vec<u32>> = vec![
            vec![1, 2],
            vec![1, 3],
            vec![1, 4],
            vec![2, 3],
            vec![2, 4],
            vec![3, 4],
        ];
        let got: Vec<Vec<u32>> = combos
            .iter()
            .map(|c| c.iter().map(|r| r.0).collect())
            .collect();
        assert_eq!(got, expect);
    }
}
