//! Internal bottleneck analysis: CRNM computation, severity classification,
//! and refinement of critical code regions to their cores.

use crate::clustering::{severity_classify, SeverityCategory};
use crate::external::AnalysisError;
use crate::profile::{Profile, RegionId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Per-region CRNM values: (region wall time / program wall time) x CPI for
/// each process, and their arithmetic mean over all processes (zeros for
/// regions off a process's call path included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrnmRecord {
    pub region: RegionId,
    pub per_process: Vec<f64>,
    pub average: f64,
}

pub fn compute_crnm(profile: &Profile) -> Result<Vec<CrnmRecord>, AnalysisError> {
    for (rank, &w) in profile.program_wall_time.iter().enumerate() {
        if w <= 0.0 {
            return Err(AnalysisError::NonPositiveWallTime(rank));
        }
    }
    let m = profile.process_count;
    Ok(profile
        .tree
        .regions()
        .map(|region| {
            let per_process: Vec<f64> = (0..m)
                .map(|rank| {
                    let cell = profile.metrics(rank, region);
                    (cell.wall_time / profile.program_wall_time[rank]) * cell.cpi()
                })
                .collect();
            let average = per_process.iter().sum::<f64>() / m as f64;
            CrnmRecord {
                region,
                per_process,
                average,
            }
        })
        .collect())
}

/// Classified regions plus the refined bottleneck sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalResult {
    pub records: Vec<CrnmRecord>,
    /// Category per region, aligned with `records`.
    pub categories: Vec<SeverityCategory>,
    /// Critical code regions: severity high or very high.
    pub ccrs: BTreeSet<RegionId>,
    /// Cores of critical code regions: leaf CCRs, and non-leaf CCRs whose
    /// children all rank strictly lower.
    pub cccrs: BTreeSet<RegionId>,
    /// All regions fell into a single severity cluster.
    pub degenerate: bool,
}

impl InternalResult {
    pub fn category_of(&self, region: RegionId) -> SeverityCategory {
        self.categories[region.index()]
    }
}

/// Classifies all regions by average CRNM and refines CCRs to CCCRs.
pub fn find_internal(profile: &Profile) -> Result<InternalResult, AnalysisError> {
    let records = compute_crnm(profile)?;
    let averages: Vec<f64> = records.iter().map(|r| r.average).collect();
    let categories = severity_classify(&averages)?;
    let degenerate = categories.iter().all(|&c| c == categories[0]);

    let ccrs: BTreeSet<RegionId> = records
        .iter()
        .zip(&categories)
        .filter(|(_, &c)| c >= SeverityCategory::High)
        .map(|(r, _)| r.region)
        .collect();

    let mut cccrs = BTreeSet::new();
    for &region in &ccrs {
        let node = profile.tree.node(region);
        let qualifies = if node.children.is_empty() {
            true
        } else {
            let own = categories[region.index()];
            node.children
                .iter()
                .all(|c| categories[c.index()] < own)
        };
        if qualifies {
            cccrs.insert(region);
        }
    }

    Ok(InternalResult {
        records,
        categories,
        ccrs,
        cccrs,
        degenerate,
    })
}
