//! Rough-set root-cause engine: decision tables, discernibility matrices,
//! core extraction, and the builders that turn profiles into decision tables.

use crate::clustering::{density_cluster, severity_classify, SeverityCategory};
use crate::external::AnalysisError;
use crate::internal::InternalResult;
use crate::profile::{MetricKind, Profile, RegionId};
use crate::AnalysisConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RoughSetError {
    #[error("decision table is inconsistent: decisions differ only where attributes agree")]
    InconsistentTable,
    #[error("no attribute cell discerns any pair of entries")]
    NoDiscernibleCells,
}

/// The five metric attributes used for root-cause tables, in order a1..a5.
pub const ATTRIBUTE_KINDS: [MetricKind; 5] = [
    MetricKind::L1MissRate,
    MetricKind::L2MissRate,
    MetricKind::DiskIo,
    MetricKind::NetIo,
    MetricKind::Instructions,
];

/// Human-readable cause names for a1..a5.
pub const ATTRIBUTE_LABELS: [&str; 5] = [
    "L1 cache miss rate",
    "L2 cache miss rate",
    "disk I/O quantity",
    "network I/O quantity",
    "executing instruction number",
];

/// A set of attribute indices, stored as a bitmask. Supports up to 26
/// attributes, far beyond the five used here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttrSet(pub u32);

impl AttrSet {
    pub const EMPTY: AttrSet = AttrSet(0);

    pub fn singleton(i: usize) -> AttrSet {
        AttrSet(1 << i)
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1 << i;
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: AttrSet) -> AttrSet {
        AttrSet(self.0 | other.0)
    }

    pub fn intersects(self, other: AttrSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_subset(self, other: AttrSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&i| self.contains(i))
    }

    /// Renders as concatenated attribute names, e.g. "a2a3".
    pub fn render(self, names: &[String]) -> String {
        self.iter().map(|i| names[i].as_str()).collect()
    }
}

/// Whether attribute values are binary high/low labels or cluster indices;
/// decides how positive entries and "high" values are read off the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableKind {
    /// Entries are process ranks; values are canonical cluster indices; a
    /// positive entry is one whose decision differs from the majority.
    External,
    /// Entries are region ids; values are 0/1; decision 1 marks a bottleneck.
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub id: u32,
    pub values: Vec<u32>,
    pub decision: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTable {
    pub kind: TableKind,
    pub attribute_names: Vec<String>,
    pub entries: Vec<TableEntry>,
}

impl DecisionTable {
    pub fn arity(&self) -> usize {
        self.attribute_names.len()
    }
}

/// One cell of the discernibility matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    /// Decisions agree.
    Zero,
    /// Decisions differ but every attribute agrees (the -1 case).
    Conflict,
    Attrs(AttrSet),
}

/// Upper-triangular matrix of attribute-difference sets between entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscernibilityMatrix {
    pub size: usize,
    pub attribute_names: Vec<String>,
    /// Row-major upper triangle, cell (i, j) for i < j.
    cells: Vec<Cell>,
}

impl DiscernibilityMatrix {
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.size);
        // Offset of row i within the packed upper triangle.
        i * self.size - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn cell(&self, i: usize, j: usize) -> Cell {
        self.cells[self.index(i, j)]
    }

    pub fn attr_cells(&self) -> impl Iterator<Item = AttrSet> + '_ {
        self.cells.iter().filter_map(|c| match c {
            Cell::Attrs(s) => Some(*s),
            _ => None,
        })
    }

    pub fn conflict_count(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| matches!(c, Cell::Conflict))
            .count()
    }
}

/// Builds the discernibility matrix per the three-case rule: equal decisions
/// give Zero; differing decisions give the set of differing attributes, or
/// Conflict when the attribute rows are identical.
pub fn build_discernibility(table: &DecisionTable) -> DiscernibilityMatrix {
    let n = table.entries.len();
    let mut cells = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let a = &table.entries[i];
            let b = &table.entries[j];
            let cell = if a.decision == b.decision {
                Cell::Zero
            } else {
                let mut set = AttrSet::EMPTY;
                for k in 0..table.arity() {
                    if a.values[k] != b.values[k] {
                        set.insert(k);
                    }
                }
                if set.is_empty() {
                    Cell::Conflict
                } else {
                    Cell::Attrs(set)
                }
            };
            cells.push(cell);
        }
    }
    DiscernibilityMatrix {
        size: n,
        attribute_names: table.attribute_names.clone(),
        cells,
    }
}

/// Result of core extraction: all tied minimal attribute sets plus the
/// intermediates kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreResult {
    /// Winning attribute sets, lexicographically ordered.
    pub cores: Vec<AttrSet>,
    /// Singleton-cell attributes (the initial core set).
    pub singleton_core: AttrSet,
    /// Retained CNF clauses after absorption.
    pub cnf_clauses: Vec<AttrSet>,
    /// Conflict cells encountered (table inconsistency diagnostics).
    pub conflict_cells: usize,
}

/// Extracts the core attribute sets from a discernibility matrix.
///
/// Singleton cells seed the core set; cells disjoint from it become CNF
/// clauses (absorbing supersets); the CNF is expanded to DNF and the minors
/// with minimum cardinality win, ties broken by how often a minor occurs in
/// the expansion, remaining ties returned together.
pub fn extract_core(matrix: &DiscernibilityMatrix) -> Result<CoreResult, RoughSetError> {
    let attr_cells: Vec<AttrSet> = matrix.attr_cells().collect();
    let conflicts = matrix.conflict_count();
    if attr_cells.is_empty() {
        return Err(if conflicts > 0 {
            RoughSetError::InconsistentTable
        } else {
            RoughSetError::NoDiscernibleCells
        });
    }

    let mut core = AttrSet::EMPTY;
    for &cell in &attr_cells {
        if cell.len() == 1 {
            core = core.union(cell);
        }
    }

    // Clauses: cells disjoint from the core, deduplicated, supersets absorbed.
    let mut clauses: Vec<AttrSet> = attr_cells
        .iter()
        .copied()
        .filter(|c| !c.intersects(core))
        .collect();
    clauses.sort_by_key(|c| (c.len(), c.0));
    clauses.dedup();
    let mut retained: Vec<AttrSet> = Vec::new();
    for c in clauses {
        if !retained.iter().any(|r| r.is_subset(c)) {
            retained.push(c);
        }
    }

    // Expand CNF to DNF, counting how many choice paths yield each minor.
    let mut minors: Vec<(AttrSet, usize)> = vec![(core, 1)];
    for clause in &retained {
        let mut next: Vec<(AttrSet, usize)> = Vec::new();
        for &(m, count) in &minors {
            for attr in clause.iter() {
                let mut grown = m;
                grown.insert(attr);
                match next.iter_mut().find(|(s, _)| *s == grown) {
                    Some((_, c)) => *c += count,
                    None => next.push((grown, count)),
                }
            }
        }
        minors = next;
    }

    let min_len = minors.iter().map(|(s, _)| s.len()).min().unwrap();
    let max_count = minors
        .iter()
        .filter(|(s, _)| s.len() == min_len)
        .map(|&(_, c)| c)
        .max()
        .unwrap();
    let mut cores: Vec<AttrSet> = minors
        .into_iter()
        .filter(|&(s, c)| s.len() == min_len && c == max_count)
        .map(|(s, _)| s)
        .collect();
    cores.sort();
    cores.dedup();

    Ok(CoreResult {
        cores,
        singleton_core: core,
        cnf_clauses: retained,
        conflict_cells: conflicts,
    })
}

fn standard_attribute_names() -> Vec<String> {
    (1..=5).map(|i| format!("a{i}")).collect()
}

/// Decision table for external bottlenecks: one entry per process rank.
///
/// For each attribute, per-process vectors are built over the CCCR regions
/// only and density-clustered; the entry value is the process's canonical
/// cluster index. The decision is the cluster index from the CPU-time
/// clustering of the same restricted vectors.
pub fn external_decision_table(
    profile: &Profile,
    cccrs: &BTreeSet<RegionId>,
    config: &AnalysisConfig,
) -> Result<DecisionTable, AnalysisError> {
    if cccrs.is_empty() {
        return Err(AnalysisError::EmptyCccrSet);
    }
    let regions: Vec<RegionId> = cccrs.iter().copied().collect();
    let m = profile.process_count;

    let mut columns: Vec<Vec<u32>> = Vec::with_capacity(ATTRIBUTE_KINDS.len());
    for kind in ATTRIBUTE_KINDS {
        columns.push(cluster_labels(profile, kind, &regions, config, m)?);
    }
    let decisions = cluster_labels(profile, MetricKind::CpuTime, &regions, config, m)?;

    let entries = (0..m)
        .map(|rank| TableEntry {
            id: rank as u32,
            values: columns.iter().map(|col| col[rank]).collect(),
            decision: decisions[rank],
        })
        .collect();
    Ok(DecisionTable {
        kind: TableKind::External,
        attribute_names: standard_attribute_names(),
        entries,
    })
}

fn cluster_labels(
    profile: &Profile,
    kind: MetricKind,
    regions: &[RegionId],
    config: &AnalysisConfig,
    m: usize,
) -> Result<Vec<u32>, AnalysisError> {
    let vectors: Vec<_> = (0..m)
        .map(|rank| profile.restricted_vector(rank, kind, regions))
        .collect::<Result<_, _>>()
        .map_err(|e| AnalysisError::Profile(e.to_string()))?;
    let outcome = density_cluster(&vectors, config.threshold_fraction, config.count_threshold)?;
    let mut labels = vec![0u32; m];
    for (idx, cluster) in outcome.clusters.iter().enumerate() {
        for &rank in cluster {
            labels[rank] = idx as u32;
        }
    }
    Ok(labels)
}

/// Decision table for internal bottlenecks: one entry per region.
///
/// Each attribute is averaged per region across all processes and severity
/// classified; the value is 1 for categories above medium. The decision is 1
/// for critical code regions (severity high or very high).
pub fn internal_decision_table(
    profile: &Profile,
    internal: &InternalResult,
) -> Result<DecisionTable, AnalysisError> {
    let regions: Vec<RegionId> = profile.tree.regions().collect();
    let m = profile.process_count;

    let mut columns: Vec<Vec<u32>> = Vec::with_capacity(ATTRIBUTE_KINDS.len());
    for kind in ATTRIBUTE_KINDS {
        let averages: Vec<f64> = regions
            .iter()
            .map(|&r| {
                (0..m)
                    .map(|rank| profile.metric_value(rank, r, kind))
                    .sum::<f64>()
                    / m as f64
            })
            .collect();
        let categories = severity_classify(&averages)?;
        columns.push(
            categories
                .iter()
                .map(|&c| u32::from(c > SeverityCategory::Medium))
                .collect(),
        );
    }

    let entries = regions
        .iter()
        .enumerate()
        .map(|(i, &r)| TableEntry {
            id: r.0,
            values: columns.iter().map(|col| col[i]).collect(),
            decision: u32::from(internal.ccrs.contains(&r)),
        })
        .collect();
    Ok(DecisionTable {
        kind: TableKind::Internal,
        attribute_names: standard_attribute_names(),
        entries,
    })
}

/// Root cause of one positive-decision entry: the core attributes whose
/// value is "high" for that entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootCause {
    pub entry: u32,
    pub attributes: AttrSet,
}

/// Reads root causes off the table using the first (lexicographic) core.
///
/// Internal tables: positive entries have decision 1 and an attribute is high
/// when its value is 1. External tables: positive entries are those whose
/// decision differs from the majority cluster, and an attribute is high when
/// its value differs from that column's majority label.
pub fn root_cause_report(table: &DecisionTable, core: &CoreResult) -> Vec<RootCause> {
    let core_set = match core.cores.first() {
        Some(c) => *c,
        None => return Vec::new(),
    };
    let collect = |pred: &dyn Fn(usize) -> bool| {
        let mut s = AttrSet::EMPTY;
        for k in core_set.iter().filter(|&k| pred(k)) {
            s.insert(k);
        }
        s
    };
    match table.kind {
        TableKind::Internal => table
            .entries
            .iter()
            .filter(|e| e.decision == 1)
            .map(|e| RootCause {
                entry: e.id,
                attributes: collect(&|k| e.values[k] == 1),
            })
            .filter(|rc| !rc.attributes.is_empty())
            .collect(),
        TableKind::External => {
            let majority_decision = majority(table.entries.iter().map(|e| e.decision));
            let majority_value: Vec<u32> = (0..table.arity())
                .map(|k| majority(table.entries.iter().map(|e| e.values[k])))
                .collect();
            table
                .entries
                .iter()
                .filter(|e| e.decision != majority_decision)
                .map(|e| RootCause {
                    entry: e.id,
                    attributes: collect(&|k| e.values[k] != majority_value[k]),
                })
                .filter(|rc| !rc.attributes.is_empty())
                .collect()
        }
    }
}

/// Most frequent label; ties break toward the smallest label.
fn majority(values: impl Iterator<Item = u32>) -> u32 {
    let mut counts: Vec<(u32, usize)> = Vec::new();
    for v in values {
        match counts.iter_mut().find(|(label, _)| *label == v) {
            Some((_, c)) => *c += 1,
            None => counts.push((v, 1)),
        }
    }
    counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    counts[0].0
}

/// The built-in worked example: a four-entry weather table with categorical
/// values encoded as small integers.
pub fn demo_table() -> DecisionTable {
    // sunny=0/overcast=1; hot=0/cool=1; high=0/low=1; false=0/true=1; N=0/P=1
    let rows = [
        (0, [0, 0, 0, 0], 0),
        (1, [0, 0, 0, 1], 0),
        (2, [1, 0, 0, 0], 1),
        (3, [0, 1, 1, 0], 1),
    ];
    DecisionTable {
        kind: TableKind::Internal,
        attribute_names: (1..=4).map(|i| format!("a{i}")).collect(),
        entries: rows
            .iter()
            .map(|&(id, values, decision)| TableEntry {
                id,
                values: values.to_vec(),
                decision,
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attrs(bits: &[usize]) -> AttrSet {
        let mut s = AttrSet::EMPTY;
        for &b in bits {
            s.insert(b);
        }
        s
    }

    #[test]
    fn demo_table_matrix_matches_worked_example() {
        let m = build_discernibility(&demo_table());
        assert_eq!(m.cell(0, 1), Cell::Zero);
        assert_eq!(m.cell(0, 2), Cell::Attrs(attrs(&[0])));
        assert_eq!(m.cell(0, 3), Cell::Attrs(attrs(&[1, 2])));
        assert_eq!(m.cell(1, 2), Cell::Attrs(attrs(&[0, 3])));
        assert_eq!(m.cell(1, 3), Cell::Attrs(attrs(&[1, 2, 3])));
        assert_eq!(m.cell(2, 3), Cell::Zero);
    }

    #[test]
    fn demo_table_core_has_two_alternatives() {
        let m = build_discernibility(&demo_table());
        let core = extract_core(&m).unwrap();
        assert_eq!(core.singleton_core, attrs(&[0]));
        assert_eq!(core.cnf_clauses, vec![attrs(&[1, 2])]);
        assert_eq!(core.cores, vec![attrs(&[0, 1]), attrs(&[0, 2])]);
    }

    #[test]
    fn same_decision_gives_zero_cell() {
        let table = DecisionTable {
            kind: TableKind::Internal,
            attribute_names: vec!["a1".into()],
            entries: vec![
                TableEntry { id: 0, values: vec![0], decision: 1 },
                TableEntry { id: 1, values: vec![1], decision: 1 },
            ],
        };
        let m = build_discernibility(&table);
        assert_eq!(m.cell(0, 1), Cell::Zero);
    }

    #[test]
    fn identical_attrs_different_decision_is_conflict() {
        let table = DecisionTable {
            kind: TableKind::Internal,
            attribute_names: vec!["a1".into()],
            entries: vec![
                TableEntry { id: 0, values: vec![3], decision: 0 },
                TableEntry { id: 1, values: vec![3], decision: 1 },
            ],
        };
        let m = build_discernibility(&table);
        assert_eq!(m.cell(0, 1), Cell::Conflict);
        assert_eq!(extract_core(&m), Err(RoughSetError::InconsistentTable));
    }

    #[test]
    fn all_zero_matrix_has_no_discernible_cells() {
        let table = DecisionTable {
            kind: TableKind::Internal,
            attribute_names: vec!["a1".into()],
            entries: vec![
                TableEntry { id: 0, values: vec![1], decision: 0 },
                TableEntry { id: 1, values: vec![2], decision: 0 },
            ],
        };
        let m = build_discernibility(&table);
        assert_eq!(extract_core(&m), Err(RoughSetError::NoDiscernibleCells));
    }

    #[test]
    fn cores_are_hitting_sets() {
        let table = demo_table();
        let m = build_discernibility(&table);
        let core = extract_core(&m).unwrap();
        for c in &core.cores {
            for cell in m.attr_cells() {
                assert!(c.intersects(cell), "{c:?} misses {cell:?}");
            }
        }
    }

    #[test]
    fn majority_breaks_ties_toward_smallest() {
        assert_eq!(majority([0, 1, 1, 2, 2].into_iter()), 1);
        assert_eq!(majority([4, 3, 4, 3].into_iter()), 3);
    }
}
