//! Code-region tree, raw and derived metrics, and profile ingestion.
//!
//! A profile is a dense per-process, per-region table of metric records over
//! a nested code-region hierarchy. Profiles arrive as JSON documents (see
//! `ingest_profile`); all analysis types are immutable after ingestion.

use crate::clustering::PerfVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported profile version {0} (expected 1)")]
    UnsupportedVersion(u64),
    #[error("profile declares no regions")]
    NoRegions,
    #[error("region id {0} is not positive")]
    NonPositiveRegionId(i64),
    #[error("duplicate region id {0}")]
    DuplicateRegionId(u64),
    #[error("region {region} references unknown parent {parent}")]
    UnknownParent { region: u64, parent: u64 },
    #[error("region {0} is part of a parent cycle")]
    RegionCycle(u64),
    #[error("region {region} declares depth {declared} but its parent chain gives {computed}")]
    DepthMismatch {
        region: u64,
        declared: u32,
        computed: u32,
    },
    #[error("process count must be at least 1")]
    NoProcesses,
    #[error("program_wall_time has {got} entries, expected {expected}")]
    WallTimeShape { expected: usize, got: usize },
    #[error("program_wall_time[{rank}] is negative or non-finite")]
    BadWallTime { rank: usize },
    #[error("metrics table has {got} process rows, expected {expected}")]
    MetricsRows { expected: usize, got: usize },
    #[error("metrics row for process {rank} has {got} cells, expected {expected}")]
    MetricsCells {
        rank: usize,
        expected: usize,
        got: usize,
    },
    #[error("metric {field} of region {region} in process {rank} is negative or non-finite")]
    NegativeMetric {
        rank: usize,
        region: u64,
        field: &'static str,
    },
    #[error("count {field} of region {region} in process {rank} is not integral within 1e-6")]
    NonIntegralCount {
        rank: usize,
        region: u64,
        field: &'static str,
    },
    #[error(
        "cpu_time {cpu} exceeds wall_time {wall} for region {region} in process {rank}"
    )]
    CpuExceedsWall {
        rank: usize,
        region: u64,
        cpu: f64,
        wall: f64,
    },
    #[error("unknown process rank {rank} (profile has {count} processes)")]
    UnknownRank { rank: usize, count: usize },
}

/// Identifier of a code region; dense 1..=n after ingestion.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct RegionId(pub u32);

impl RegionId {
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl std::fmt::Display for RegionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeRegionNode {
    pub id: RegionId,
    pub name: String,
    /// Depth below the synthetic whole-program root; the root's children have
    /// depth 1.
    pub depth: u32,
    pub parent: Option<RegionId>,
    pub children: Vec<RegionId>,
}

/// The nested code-region hierarchy. The whole-program root is synthetic
/// (depth 0) and is never itself a code region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeRegionTree {
    nodes: Vec<CodeRegionNode>,
    depth_one: Vec<RegionId>,
}

impl CodeRegionTree {
    pub fn region_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: RegionId) -> &CodeRegionNode {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> &[CodeRegionNode] {
        &self.nodes
    }

    /// Children of the synthetic root.
    pub fn depth_one(&self) -> &[RegionId] {
        &self.depth_one
    }

    pub fn regions(&self) -> impl Iterator<Item = RegionId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    pub fn is_leaf(&self, id: RegionId) -> bool {
        self.node(id).children.is_empty()
    }

    /// Ancestor chain from the region's depth-1 ancestor down to the region
    /// itself, inclusive.
    pub fn ancestor_path(&self, id: RegionId) -> Vec<RegionId> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.node(cur).parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }
}

/// Raw per-region counters and times collected for one process.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionMetrics {
    pub wall_time: f64,
    pub cpu_time: f64,
    pub cycles: f64,
    pub instructions: f64,
    pub l1_miss: f64,
    pub l1_access: f64,
    pub l2_miss: f64,
    pub l2_access: f64,
    pub disk_io_bytes: f64,
    pub net_io_bytes: f64,
}

impl RegionMetrics {
    /// Miss fraction per the miss/(miss+access) convention; 0 when there is
    /// no cache traffic.
    pub fn l1_miss_rate(&self) -> f64 {
        ratio(self.l1_miss, self.l1_miss + self.l1_access)
    }

    pub fn l2_miss_rate(&self) -> f64 {
        ratio(self.l2_miss, self.l2_miss + self.l2_access)
    }

    /// Cycles per instruction; 0 when no instructions were counted.
    pub fn cpi(&self) -> f64 {
        ratio(self.cycles, self.instructions)
    }

    /// Computes a derived metric from this record alone.
    ///
    /// Panics if `kind` is not derivable from a single record (raw kinds, or
    /// Crnm which needs whole-profile context).
    pub fn derived_metric(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::L1MissRate => self.l1_miss_rate(),
            MetricKind::L2MissRate => self.l2_miss_rate(),
            MetricKind::Cpi => self.cpi(),
            other => panic!("{other:?} is not derivable from a single RegionMetrics"),
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// The metrics a performance vector can be built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    CpuTime,
    WallTime,
    L1MissRate,
    L2MissRate,
    DiskIo,
    NetIo,
    Instructions,
    Cpi,
    Crnm,
}

/// A validated per-process, per-region profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub tree: CodeRegionTree,
    pub process_count: usize,
    /// Whole-program wall time per process rank.
    pub program_wall_time: Vec<f64>,
    /// Dense table, row-major by rank then region index.
    metrics: Vec<RegionMetrics>,
}

impl Profile {
    pub fn region_count(&self) -> usize {
        self.tree.region_count()
    }

    pub fn metrics(&self, rank: usize, region: RegionId) -> &RegionMetrics {
        &self.metrics[rank * self.region_count() + region.index()]
    }

    /// Value of the given metric for one (process, region) cell. Derived
    /// kinds fall back to 0 on zero denominators; regions absent from a
    /// process's call path hold all-zero cells and so yield 0.
    pub fn metric_value(&self, rank: usize, region: RegionId, kind: MetricKind) -> f64 {
        let m = self.metrics(rank, region);
        match kind {
            MetricKind::CpuTime => m.cpu_time,
            MetricKind::WallTime => m.wall_time,
            MetricKind::L1MissRate => m.l1_miss_rate(),
            MetricKind::L2MissRate => m.l2_miss_rate(),
            MetricKind::DiskIo => m.disk_io_bytes,
            MetricKind::NetIo => m.net_io_bytes,
            MetricKind::Instructions => m.instructions,
            MetricKind::Cpi => m.cpi(),
            MetricKind::Crnm => {
                let wpwt = self.program_wall_time[rank];
                if wpwt == 0.0 {
                    0.0
                } else {
                    (m.wall_time / wpwt) * m.cpi()
                }
            }
        }
    }

    /// The per-process performance vector over all regions, ordered by id.
    pub fn perf_vector(&self, rank: usize, kind: MetricKind) -> Result<PerfVector, ProfileError> {
        if rank >= self.process_count {
            return Err(ProfileError::UnknownRank {
                rank,
                count: self.process_count,
            });
        }
        let values = self
            .tree
            .regions()
            .map(|r| self.metric_value(rank, r, kind))
            .collect();
        Ok(PerfVector::new(rank, values))
    }

    /// Vector over a subset of regions only (ascending id order).
    pub fn restricted_vector(
        &self,
        rank: usize,
        kind: MetricKind,
        regions: &[RegionId],
    ) -> Result<PerfVector, ProfileError> {
        if rank >= self.process_count {
            return Err(ProfileError::UnknownRank {
                rank,
                count: self.process_count,
            });
        }
        let values = regions
            .iter()
            .map(|&r| self.metric_value(rank, r, kind))
            .collect();
        Ok(PerfVector::new(rank, values))
    }

    /// Builds a profile from already-validated parts. Used by the synthetic
    /// generator; ingestion goes through `ingest_profile`.
    pub fn from_parts(
        tree: CodeRegionTree,
        process_count: usize,
        program_wall_time: Vec<f64>,
        metrics: Vec<RegionMetrics>,
    ) -> Profile {
        assert_eq!(program_wall_time.len(), process_count);
        assert_eq!(metrics.len(), process_count * tree.region_count());
        Profile {
            tree,
            process_count,
            program_wall_time,
            metrics,
        }
    }
}

// ---------------------------------------------------------------------------
// External document schema
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct RawProfile {
    pub version: u64,
    pub regions: Vec<RawRegion>,
    pub processes: usize,
    pub program_wall_time: Vec<f64>,
    pub metrics: Vec<Vec<RegionMetrics>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct RawRegion {
    pub id: i64,
    pub name: String,
    pub parent: Option<i64>,
    /// Optional declared depth, cross-checked against the parent chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
}

const COUNT_FIELDS: [(&str, fn(&RegionMetrics) -> f64); 8] = [
    ("cycles", |m| m.cycles),
    ("instructions", |m| m.instructions),
    ("l1_miss", |m| m.l1_miss),
    ("l1_access", |m| m.l1_access),
    ("l2_miss", |m| m.l2_miss),
    ("l2_access", |m| m.l2_access),
    ("disk_io_bytes", |m| m.disk_io_bytes),
    ("net_io_bytes", |m| m.net_io_bytes),
];

/// Parses and validates a profile document.
///
/// Region ids are remapped to dense 1..=n in ascending order of their
/// original ids; the `metrics` arrays are expected in that same order.
pub fn ingest_profile(document: &[u8]) -> Result<Profile, ProfileError> {
    let raw: RawProfile =
        serde_json::from_slice(document).map_err(|e| ProfileError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    profile_from_raw(raw)
}

pub(crate) fn profile_from_raw(raw: RawProfile) -> Result<Profile, ProfileError> {
    if raw.version != 1 {
        return Err(ProfileError::UnsupportedVersion(raw.version));
    }
    if raw.regions.is_empty() {
        return Err(ProfileError::NoRegions);
    }
    if raw.processes == 0 {
        return Err(ProfileError::NoProcesses);
    }

    // Remap sparse ids to dense 1..=n, preserving ascending original order.
    let mut originals: Vec<i64> = Vec::with_capacity(raw.regions.len());
    for r in &raw.regions {
        if r.id <= 0 {
            return Err(ProfileError::NonPositiveRegionId(r.id));
        }
        originals.push(r.id);
    }
    let mut sorted_ids = originals.clone();
    sorted_ids.sort_unstable();
    sorted_ids.dedup();
    if sorted_ids.len() != originals.len() {
        let dup = originals
            .iter()
            .find(|id| originals.iter().filter(|x| x == id).count() > 1)
            .copied()
            .unwrap();
        return Err(ProfileError::DuplicateRegionId(dup as u64));
    }
    let dense_of = |orig: i64| -> Option<RegionId> {
        sorted_ids
            .binary_search(&orig)
            .ok()
            .map(|i| RegionId(i as u32 + 1))
    };

    let mut by_dense: Vec<&RawRegion> = raw.regions.iter().collect();
    by_dense.sort_by_key(|r| r.id);

    let mut nodes: Vec<CodeRegionNode> = Vec::with_capacity(by_dense.len());
    for (i, r) in by_dense.iter().enumerate() {
        let parent = match r.parent {
            None => None,
            Some(p) => Some(dense_of(p).ok_or(ProfileError::UnknownParent {
                region: r.id as u64,
                parent: p as u64,
            })?),
        };
        nodes.push(CodeRegionNode {
            id: RegionId(i as u32 + 1),
            name: r.name.clone(),
            depth: 0,
            parent,
            children: Vec::new(),
        });
    }

    // Depths from parent chains, with cycle detection. depth 0 = unresolved.
    let n = nodes.len();
    let mut depths = vec![0u32; n];
    for i in 0..n {
        if depths[i] != 0 {
            continue;
        }
        // Walk up until a resolved node or a root; the chain holds the path.
        let mut chain = Vec::new();
        let mut cur = i;
        while depths[cur] == 0 {
            if chain.contains(&cur) {
                return Err(ProfileError::RegionCycle(by_dense[cur].id as u64));
            }
            chain.push(cur);
            match nodes[cur].parent {
                None => break,
                Some(p) => cur = p.index(),
            }
        }
        // Resolve the chain from the root end down.
        for &idx in chain.iter().rev() {
            depths[idx] = match nodes[idx].parent {
                None => 1,
                Some(p) => {
                    debug_assert_ne!(depths[p.index()], 0);
                    depths[p.index()] + 1
                }
            };
        }
    }
    for (i, r) in by_dense.iter().enumerate() {
        if let Some(declared) = r.depth {
            if declared != depths[i] {
                return Err(ProfileError::DepthMismatch {
                    region: r.id as u64,
                    declared,
                    computed: depths[i],
                });
            }
        }
    }
    for i in 0..n {
        nodes[i].depth = depths[i];
    }
    let mut depth_one = Vec::new();
    for i in 0..n {
        match nodes[i].parent {
            None => depth_one.push(RegionId(i as u32 + 1)),
            Some(p) => {
                let child = nodes[i].id;
                nodes[p.index()].children.push(child);
            }
        }
    }
    let tree = CodeRegionTree { nodes, depth_one };

    // Metric table shape and value validation.
    if raw.program_wall_time.len() != raw.processes {
        return Err(ProfileError::WallTimeShape {
            expected: raw.processes,
            got: raw.program_wall_time.len(),
        });
    }
    for (rank, &w) in raw.program_wall_time.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(ProfileError::BadWallTime { rank });
        }
    }
    if raw.metrics.len() != raw.processes {
        return Err(ProfileError::MetricsRows {
            expected: raw.processes,
            got: raw.metrics.len(),
        });
    }
    let mut table = Vec::with_capacity(raw.processes * n);
    for (rank, row) in raw.metrics.iter().enumerate() {
        if row.len() != n {
            return Err(ProfileError::MetricsCells {
                rank,
                expected: n,
                got: row.len(),
            });
        }
        for (i, cell) in row.iter().enumerate() {
            let region = by_dense[i].id as u64;
            let all = [
                ("wall_time", cell.wall_time),
                ("cpu_time", cell.cpu_time),
                ("cycles", cell.cycles),
                ("instructions", cell.instructions),
                ("l1_miss", cell.l1_miss),
                ("l1_access", cell.l1_access),
                ("l2_miss", cell.l2_miss),
                ("l2_access", cell.l2_access),
                ("disk_io_bytes", cell.disk_io_bytes),
                ("net_io_bytes", cell.net_io_bytes),
            ];
            for (field, value) in all {
                if !value.is_finite() || value < 0.0 {
                    return Err(ProfileError::NegativeMetric {
                        rank,
                        region,
                        field,
                    });
                }
            }
            for (field, get) in COUNT_FIELDS {
                let v = get(cell);
                if (v - v.round()).abs() > 1e-6 {
                    return Err(ProfileError::NonIntegralCount {
                        rank,
                        region,
                        field,
                    });
                }
            }
            // cpu_time <= wall_time within 1e-9 relative tolerance.
            let tol = 1e-9 * cell.wall_time.max(cell.cpu_time);
            if cell.cpu_time > cell.wall_time + tol {
                return Err(ProfileError::CpuExceedsWall {
                    rank,
                    region,
                    cpu: cell.cpu_time,
                    wall: cell.wall_time,
                });
            }
            table.push(*cell);
        }
    }

    Ok(Profile {
        tree,
        process_count: raw.processes,
        program_wall_time: raw.program_wall_time,
        metrics: table,
    })
}

pub(crate) fn profile_to_raw(profile: &Profile) -> RawProfile {
    let regions = profile
        .tree
        .nodes()
        .iter()
        .map(|n| RawRegion {
            id: n.id.0 as i64,
            name: n.name.clone(),
            parent: n.parent.map(|p| p.0 as i64),
            depth: None,
        })
        .collect();
    let metrics = (0..profile.process_count)
        .map(|rank| {
            profile
                .tree
                .regions()
                .map(|r| *profile.metrics(rank, r))
                .collect()
        })
        .collect();
    RawProfile {
        version: 1,
        regions,
        processes: profile.process_count,
        program_wall_time: profile.program_wall_time.clone(),
        metrics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_doc() -> String {
        r#"{
            "version": 1,
            "regions": [{"id": 1, "name": "whole", "parent": null}],
            "processes": 1,
            "program_wall_time": [1.0],
            "metrics": [[{"wall_time": 1.0, "cpu_time": 0.0, "cycles": 0, "instructions": 0,
                          "l1_miss": 0, "l1_access": 0, "l2_miss": 0, "l2_access": 0,
                          "disk_io_bytes": 0, "net_io_bytes": 0}]]
        }"#
        .to_string()
    }

    #[test]
    fn minimal_document_ingests() {
        let p = ingest_profile(minimal_doc().as_bytes()).unwrap();
        assert_eq!(p.process_count, 1);
        assert_eq!(p.region_count(), 1);
        assert_eq!(p.tree.node(RegionId(1)).depth, 1);
    }

    #[test]
    fn declared_depth_mismatch_is_rejected() {
        let doc = r#"{
            "version": 1,
            "regions": [{"id": 1, "name": "a", "parent": null},
                        {"id": 2, "name": "b", "parent": 1, "depth": 3}],
            "processes": 1,
            "program_wall_time": [1.0],
            "metrics": [[
                {"wall_time": 1.0, "cpu_time": 0.0, "cycles": 0, "instructions": 0,
                 "l1_miss": 0, "l1_access": 0, "l2_miss": 0, "l2_access": 0,
                 "disk_io_bytes": 0, "net_io_bytes": 0},
                {"wall_time": 1.0, "cpu_time": 0.0, "cycles": 0, "instructions": 0,
                 "l1_miss": 0, "l1_access": 0, "l2_miss": 0, "l2_access": 0,
                 "disk_io_bytes": 0, "net_io_bytes": 0}
            ]]
        }"#;
        match ingest_profile(doc.as_bytes()) {
            Err(ProfileError::DepthMismatch {
                region,
                declared,
                computed,
            }) => {
                assert_eq!((region, declared, computed), (2, 3, 2));
            }
            other => panic!("expected depth mismatch, got {other:?}"),
        }
    }

    #[test]
    fn orphan_parent_is_rejected() {
        let doc = minimal_doc().replace(r#""parent": null"#, r#""parent": 9"#);
        assert!(matches!(
            ingest_profile(doc.as_bytes()),
            Err(ProfileError::UnknownParent { region: 1, parent: 9 })
        ));
    }

    #[test]
    fn malformed_document_reports_position() {
        let err = ingest_profile(b"{ \"version\": ").unwrap_err();
        match err {
            ProfileError::Parse { line, .. } => assert!(line >= 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_metric_cell_is_rejected() {
        let doc = r#"{
            "version": 1,
            "regions": [{"id": 1, "name": "a", "parent": null},
                        {"id": 2, "name": "b", "parent": null}],
            "processes": 1,
            "program_wall_time": [1.0],
            "metrics": [[
                {"wall_time": 1.0, "cpu_time": 0.0, "cycles": 0, "instructions": 0,
                 "l1_miss": 0, "l1_access": 0, "l2_miss": 0, "l2_access": 0,
                 "disk_io_bytes": 0, "net_io_bytes": 0}
            ]]
        }"#;
        assert!(matches!(
            ingest_profile(doc.as_bytes()),
            Err(ProfileError::MetricsCells { rank: 0, expected: 2, got: 1 })
        ));
    }

    #[test]
    fn sparse_ids_are_remapped_dense() {
        let doc = r#"{
            "version": 1,
            "regions": [{"id": 10, "name": "a", "parent": null},
                        {"id": 40, "name": "c", "parent": 10},
                        {"id": 20, "name": "b", "parent": null}],
            "processes": 1,
            "program_wall_time": [1.0],
            "metrics": [[
                {"wall_time": 1.0, "cpu_time": 0.5, "cycles": 0, "instructions": 0,
                 "l1_miss": 0, "l1_access": 0, "l2_miss": 0, "l2_access": 0,
                 "disk_io_bytes": 0, "net_io_bytes": 0},
                {"wall_time": 0.5, "cpu_time": 0.25, "cycles": 0, "instructions": 0,
                 "l1_miss": 0, "l1_access": 0, "l2_miss": 0, "l2_access": 0,
                 "disk_io_bytes": 0, "net_io_bytes": 0},
                {"wall_time": 0.25, "cpu_time": 0.1, "cycles": 0, "instructions": 0,
                 "l1_miss": 0, "l1_access": 0, "l2_miss": 0, "l2_access": 0,
                 "disk_io_bytes": 0, "net_io_bytes": 0}
            ]]
        }"#;
        let p = ingest_profile(doc.as_bytes()).unwrap();
        // Ascending original order: 10 -> 1 (a), 20 -> 2 (b), 40 -> 3 (c).
        assert_eq!(p.tree.node(RegionId(1)).name, "a");
        assert_eq!(p.tree.node(RegionId(2)).name, "b");
        assert_eq!(p.tree.node(RegionId(3)).name, "c");
        assert_eq!(p.tree.node(RegionId(3)).parent, Some(RegionId(1)));
        assert_eq!(p.tree.node(RegionId(3)).depth, 2);
        assert_eq!(p.tree.depth_one(), &[RegionId(1), RegionId(2)]);
        // Metrics arrays are ordered by original id: cell 1 belongs to region 40 -> dense 3? No:
        // they are ordered by region id ascending, so cell order is 10, 20, 40 after remap.
        // The document above lists cells in ascending-original order (10, 40, 20) -- the
        // contract is ascending id, so cell[1] belongs to id 20.
        assert_eq!(p.metrics(0, RegionId(2)).wall_time, 0.5);
    }

    #[test]
    fn cpu_exceeding_wall_is_rejected() {
        let doc = minimal_doc().replace(r#""cpu_time": 0.0"#, r#""cpu_time": 1.5"#);
        assert!(matches!(
            ingest_profile(doc.as_bytes()),
            Err(ProfileError::CpuExceedsWall { .. })
        ));
    }

    #[test]
    fn non_integral_count_is_rejected() {
        let doc = minimal_doc().replace(r#""cycles": 0"#, r#""cycles": 1.5"#);
        assert!(matches!(
            ingest_profile(doc.as_bytes()),
            Err(ProfileError::NonIntegralCount { field: "cycles", .. })
        ));
    }

    #[test]
    fn derived_metric_conventions() {
        let mut m = RegionMetrics::default();
        m.l1_miss = 0.0;
        m.l1_access = 100.0;
        assert_eq!(m.derived_metric(MetricKind::L1MissRate), 0.0);
        m.l1_access = 0.0;
        assert_eq!(m.derived_metric(MetricKind::L1MissRate), 0.0);
        m.cycles = 400.0;
        m.instructions = 100.0;
        assert_eq!(m.derived_metric(MetricKind::Cpi), 4.0);
        m.l1_miss = 25.0;
        m.l1_access = 75.0;
        assert_eq!(m.derived_metric(MetricKind::L1MissRate), 0.25);
    }

    #[test]
    fn derived_metric_scale_consistency() {
        let mut m = RegionMetrics::default();
        m.l1_miss = 3.0;
        m.l1_access = 17.0;
        let r1 = m.l1_miss_rate();
        m.l1_miss *= 1000.0;
        m.l1_access *= 1000.0;
        assert!((m.l1_miss_rate() - r1).abs() < 1e-12);
    }

    #[test]
    fn perf_vector_extracts_by_region_order() {
        let doc = r#"{
            "version": 1,
            "regions": [{"id": 1, "name": "a", "parent": null},
                        {"id": 2, "name": "b", "parent": null},
                        {"id": 3, "name": "c", "parent": null}],
            "processes": 1,
            "program_wall_time": [6.0],
            "metrics": [[
                {"wall_time": 1.0, "cpu_time": 1.0, "cycles": 0, "instructions": 0,
                 "l1_miss": 0, "l1_access": 0, "l2_miss": 0, "l2_access": 0,
                 "disk_io_bytes": 0, "net_io_bytes": 0},
                {"wall_time": 2.0, "cpu_time": 2.0, "cycles": 0, "instructions": 0,
                 "l1_miss": 0, "l1_access": 0, "l2_miss": 0, "l2_access": 0,
                 "disk_io_bytes": 0, "net_io_bytes": 0},
                {"wall_time": 3.0, "cpu_time": 3.0, "cycles": 0, "instructions": 0,
                 "l1_miss": 0, "l1_access": 0, "l2_miss": 0, "l2_access": 0,
                 "disk_io_bytes": 0, "net_io_bytes": 0}
            ]]
        }"#;
        let p = ingest_profile(doc.as_bytes()).unwrap();
        let v = p.perf_vector(0, MetricKind::CpuTime).unwrap();
        assert_eq!(v.values, vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            p.perf_vector(3, MetricKind::CpuTime),
            Err(ProfileError::UnknownRank { rank: 3, count: 1 })
        ));
    }

    #[test]
    fn depth_invariant_holds_after_ingest() {
        let doc = r#"{
            "version": 1,
            "regions": [{"id": 1, "name": "a", "parent": null},
                        {"id": 2, "name": "b", "parent": 1},
                        {"id": 3, "name": "c", "parent": 2},
                        {"id": 4, "name": "d", "parent": 1}],
            "processes": 1,
            "program_wall_time": [1.0],
            "metrics": [[
                {"wall_time": 0, "cpu_time": 0, "cycles": 0, "instructions": 0,
                 "l1_miss": 0, "l1_access": 0, "l2_miss": 0, "l2_access": 0,
                 "disk_io_bytes": 0, "net_io_bytes": 0},
                {"wall_time": 0, "cpu_time": 0, "cycles": 0, "instructions": 0,
                 "l1_miss": 0, "l1_access": 0, "l2_miss": 0, "l2_access": 0,
                 "disk_io_bytes": 0, "net_io_bytes": 0},
                {"wall_time": 0, "cpu_time": 0, "cycles": 0, "instructions": 0,
                 "l1_miss": 0, "l1_access": 0, "l2_miss": 0, "l2_access": 0,
                 "disk_io_bytes": 0, "net_io_bytes": 0},
                {"wall_time": 0, "cpu_time": 0, "cycles": 0, "instructions": 0,
                 "l1_miss": 0, "l1_access": 0, "l2_miss": 0, "l2_access": 0,
                 "disk_io_bytes": 0, "net_io_bytes": 0}
            ]]
        }"#;
        let p = ingest_profile(doc.as_bytes()).unwrap();
        for node in p.tree.nodes() {
            match node.parent {
                None => assert_eq!(node.depth, 1),
                Some(parent) => assert_eq!(node.depth, p.tree.node(parent).depth + 1),
            }
        }
        assert_eq!(p.tree.ancestor_path(RegionId(3)),
                   vec![RegionId(1), RegionId(2), RegionId(3)]);
    }

    #[test]
    fn cycle_is_rejected() {
        let doc = r#"{
            "version": 1,
            "regions": [{"id": 1, "name": "a", "parent": 2},
                        {"id": 2, "name": "b", "parent": 1}],
            "processes": 1,
            "program_wall_time": [1.0],
            "metrics": [[
                {"wall_time": 0, "cpu_time": 0, "cycles": 0, "instructions": 0,
                 "l1_miss": 0, "l1_access": 0, "l2_miss": 0, "l2_access": 0,
                 "disk_io_bytes": 0, "net_io_bytes": 0},
                {"wall_time": 0, "cpu_time": 0, "cycles": 0, "instructions": 0,
                 "l1_miss": 0, "l1_access": 0, "l2_miss": 0, "l2_access": 0,
                 "disk_io_bytes": 0, "net_io_bytes": 0}
            ]]
        }"#;
        assert!(matches!(
            ingest_profile(doc.as_bytes()),
            Err(ProfileError::RegionCycle(_))
        ));
    }
}
