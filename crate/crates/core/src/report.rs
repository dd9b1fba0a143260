//! Pipeline orchestration and report rendering.
//!
//! `analyze` runs detection, search, classification, and root-cause
//! extraction, returning a serializable report; `render_text` turns that
//! report into the fixed text format, so a stored report document re-renders
//! to the identical text.

use crate::clustering::SeverityCategory;
use crate::external::{detect_external, search_external, AnalysisError, CcrTree};
use crate::internal::find_internal;
use crate::profile::Profile;
use crate::rough_set::{
    build_discernibility, extract_core, external_decision_table, internal_decision_table,
    root_cause_report, Cell, CoreResult, DecisionTable, DiscernibilityMatrix, RootCause,
    ATTRIBUTE_LABELS,
};
use crate::AnalysisConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSection {
    /// Single-process profiles skip the external stage entirely.
    pub skipped_single_process: bool,
    pub clusters: Vec<Vec<usize>>,
    pub severity: f64,
    pub bottlenecks_exist: bool,
    pub zero_length_processes: Vec<usize>,
    pub ccr_tree: Option<CcrTree>,
    pub table: Option<DecisionTable>,
    pub core: Option<CoreResult>,
    pub root_causes: Vec<RootCause>,
    /// Set when core extraction failed (inconsistent or indiscernible table).
    pub core_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalSection {
    /// (region id, average CRNM), ascending by region id.
    pub crnm_averages: Vec<(u32, f64)>,
    /// Region ids per category, highest first, ordered by descending CRNM
    /// within each category.
    pub category_lines: Vec<(SeverityCategory, Vec<u32>)>,
    pub degenerate: bool,
    pub ccrs: Vec<u32>,
    pub cccrs: Vec<u32>,
    pub table: Option<DecisionTable>,
    pub core: Option<CoreResult>,
    pub root_causes: Vec<RootCause>,
    pub core_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub config: AnalysisConfig,
    pub external: ExternalSection,
    pub internal: InternalSection,
}

/// Runs the full pipeline.
pub fn analyze(profile: &Profile, config: &AnalysisConfig) -> Result<AnalysisReport, AnalysisError> {
    let external = analyze_external(profile, config)?;
    let internal = analyze_internal(profile)?;
    Ok(AnalysisReport {
        config: *config,
        external,
        internal,
    })
}

fn analyze_external(
    profile: &Profile,
    config: &AnalysisConfig,
) -> Result<ExternalSection, AnalysisError> {
    if profile.process_count < 2 {
        return Ok(ExternalSection {
            skipped_single_process: true,
            clusters: vec![vec![0]],
            severity: 0.0,
            bottlenecks_exist: false,
            zero_length_processes: Vec::new(),
            ccr_tree: None,
            table: None,
            core: None,
            root_causes: Vec::new(),
            core_note: None,
        });
    }
    let detection = detect_external(profile, config)?;
    let mut section = ExternalSection {
        skipped_single_process: false,
        clusters: detection.outcome.clusters.clone(),
        severity: detection.severity,
        bottlenecks_exist: detection.bottlenecks_exist,
        zero_length_processes: detection.zero_length_processes.clone(),
        ccr_tree: None,
        table: None,
        core: None,
        root_causes: Vec::new(),
        core_note: None,
    };
    if !detection.bottlenecks_exist {
        return Ok(section);
    }
    let tree = search_external(profile, config)?;
    let cccrs = tree.cccr_regions();
    section.ccr_tree = Some(tree);
    if cccrs.is_empty() {
        section.core_note = Some("search exhausted without finding a core region".into());
        return Ok(section);
    }
    let table = external_decision_table(profile, &cccrs, config)?;
    match extract_core(&build_discernibility(&table)) {
        Ok(core) => {
            section.root_causes = root_cause_report(&table, &core);
            section.core = Some(core);
        }
        Err(e) => section.core_note = Some(e.to_string()),
    }
    section.table = Some(table);
    Ok(section)
}

fn analyze_internal(profile: &Profile) -> Result<InternalSection, AnalysisError> {
    let result = find_internal(profile)?;
    let crnm_averages: Vec<(u32, f64)> = result
        .records
        .iter()
        .map(|r| (r.region.0, r.average))
        .collect();

    let mut category_lines = Vec::new();
    for category in SeverityCategory::ALL.iter().rev() {
        let mut members: Vec<(u32, f64)> = result
            .records
            .iter()
            .filter(|r| result.category_of(r.region) == *category)
            .map(|r| (r.region.0, r.average))
            .collect();
        members.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        category_lines.push((*category, members.into_iter().map(|(id, _)| id).collect()));
    }

    let ccrs: Vec<u32> = result.ccrs.iter().map(|r| r.0).collect();
    let cccrs: Vec<u32> = result.cccrs.iter().map(|r| r.0).collect();
    let mut section = InternalSection {
        crnm_averages,
        category_lines,
        degenerate: result.degenerate,
        ccrs,
        cccrs,
        table: None,
        core: None,
        root_causes: Vec::new(),
        core_note: None,
    };
    if section.ccrs.is_empty() {
        return Ok(section);
    }
    let table = internal_decision_table(profile, &result)?;
    match extract_core(&build_discernibility(&table)) {
        Ok(core) => {
            section.root_causes = root_cause_report(&table, &core);
            section.core = Some(core);
        }
        Err(e) => section.core_note = Some(e.to_string()),
    }
    section.table = Some(table);
    Ok(section)
}

fn render_core_sets(core: &CoreResult, names: &[String]) -> String {
    core.cores
        .iter()
        .map(|set| {
            let attrs: Vec<&str> = set.iter().map(|i| names[i].as_str()).collect();
            format!("{{{}}}", attrs.join(", "))
        })
        .collect::<Vec<_>>()
        .join(" or ")
}

fn attr_labels(set: crate::rough_set::AttrSet) -> String {
    set.iter()
        .map(|i| ATTRIBUTE_LABELS[i])
        .collect::<Vec<_>>()
        .join(", ")
}

/// Renders the analysis report as text. Deterministic for a given report.
pub fn render_text(report: &AnalysisReport) -> String {
    let mut out = String::new();
    let ext = &report.external;

    out.push_str("Performance similarity\n");
    if ext.skipped_single_process {
        out.push_str("single-process profile: external analysis skipped\n");
    } else {
        let n = ext.clusters.len();
        if n == 1 {
            out.push_str("there is 1 kind of processes\n");
        } else {
            out.push_str(&format!("there are {n} kinds of processes\n"));
        }
        for (i, cluster) in ext.clusters.iter().enumerate() {
            let ranks: Vec<String> = cluster.iter().map(|r| r.to_string()).collect();
            out.push_str(&format!("kind {i}: {}\n", ranks.join(" ")));
        }
        if !ext.zero_length_processes.is_empty() {
            let ranks: Vec<String> = ext
                .zero_length_processes
                .iter()
                .map(|r| r.to_string())
                .collect();
            out.push_str(&format!(
                "note: zero-length vectors excluded from severity: {}\n",
                ranks.join(" ")
            ));
        }
        if ext.bottlenecks_exist {
            out.push_str(&format!("dissimilarity severity, S: {:.6}\n", ext.severity));
            if let Some(tree) = &ext.ccr_tree {
                if tree.exhausted {
                    out.push_str("no CCCR found: composite search exhausted\n");
                } else {
                    let cccrs: Vec<String> = tree
                        .cccr_entries()
                        .map(|e| e.target.label())
                        .collect();
                    out.push_str(&format!("CCCR: {}\n", cccrs.join(", ")));
                    out.push_str("CCR tree:\n");
                    for chain in tree.chains() {
                        let parts: Vec<String> = chain
                            .iter()
                            .map(|&i| {
                                let e = &tree.entries[i];
                                let mark = if e.is_cccr {
                                    format!("{}-CCR & CCCR", e.level)
                                } else {
                                    format!("{}-CCR", e.level)
                                };
                                format!("{} ({})", e.target.label(), mark)
                            })
                            .collect();
                        out.push_str(&format!("{}\n", parts.join(" ---> ")));
                    }
                }
            }
            if let Some(core) = &ext.core {
                let names = &ext.table.as_ref().unwrap().attribute_names;
                out.push_str(&format!("external core: {}\n", render_core_sets(core, names)));
                if core.conflict_cells > 0 {
                    out.push_str(&format!(
                        "note: {} conflicting entry pair(s) excluded\n",
                        core.conflict_cells
                    ));
                }
                if ext.root_causes.is_empty() {
                    out.push_str("external root causes: none attributable\n");
                } else {
                    out.push_str("external root causes:\n");
                    for rc in &ext.root_causes {
                        out.push_str(&format!(
                            "process {}: {}\n",
                            rc.entry,
                            attr_labels(rc.attributes)
                        ));
                    }
                }
            } else if let Some(note) = &ext.core_note {
                out.push_str(&format!("external root causes indeterminate: {note}\n"));
            }
        }
    }

    let int = &report.internal;
    out.push_str("\nInternal bottlenecks\n");
    for (category, ids) in &int.category_lines {
        let list: Vec<String> = ids.iter().map(|id| id.to_string()).collect();
        out.push_str(&format!("{}: {}\n", category.label(), list.join(", ")));
    }
    if int.degenerate {
        out.push_str("note: all regions share one severity cluster (degenerate)\n");
    }
    out.push_str("CRNM averages:\n");
    for (id, avg) in &int.crnm_averages {
        out.push_str(&format!("region {id}: {avg:.4}\n"));
    }
    if int.cccrs.is_empty() {
        out.push_str("no internal bottlenecks\n");
    } else {
        let list: Vec<String> = int.cccrs.iter().map(|id| format!("region {id}")).collect();
        out.push_str(&format!("CCCR: {}\n", list.join(", ")));
    }
    if let Some(core) = &int.core {
        let names = &int.table.as_ref().unwrap().attribute_names;
        out.push_str(&format!("internal core: {}\n", render_core_sets(core, names)));
        if core.conflict_cells > 0 {
            out.push_str(&format!(
                "note: {} conflicting entry pair(s) excluded\n",
                core.conflict_cells
            ));
        }
        if int.root_causes.is_empty() {
            out.push_str("internal root causes: none attributable\n");
        } else {
            out.push_str("internal root causes:\n");
            for rc in &int.root_causes {
                out.push_str(&format!(
                    "region {}: {}\n",
                    rc.entry,
                    attr_labels(rc.attributes)
                ));
            }
        }
    } else if let Some(note) = &int.core_note {
        out.push_str(&format!("internal root causes indeterminate: {note}\n"));
    }
    out
}

/// Renders a decision table in the fixed column layout.
pub fn render_decision_table(table: &DecisionTable) -> String {
    let mut widths: Vec<usize> = Vec::new();
    let mut header: Vec<String> = vec!["ID".to_string()];
    header.extend(table.attribute_names.iter().cloned());
    header.push("D".to_string());
    let mut rows: Vec<Vec<String>> = vec![header];
    for e in &table.entries {
        let mut row = vec![e.id.to_string()];
        row.extend(e.values.iter().map(|v| v.to_string()));
        row.push(e.decision.to_string());
        rows.push(row);
    }
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            if widths.len() <= i {
                widths.push(0);
            }
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:width$}", c, width = widths[i]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Renders the upper triangle of a discernibility matrix; `-1` marks a
/// conflict and attribute sets are shown as concatenated names.
pub fn render_matrix(matrix: &DiscernibilityMatrix) -> String {
    let n = matrix.size;
    let mut cells: Vec<Vec<String>> = vec![vec![String::new(); n]; n];
    let mut width = 1;
    for i in 0..n {
        for j in (i + 1)..n {
            let text = match matrix.cell(i, j) {
                Cell::Zero => "0".to_string(),
                Cell::Conflict => "-1".to_string(),
                Cell::Attrs(set) => set.render(&matrix.attribute_names),
            };
            width = width.max(text.len());
            cells[i][j] = text;
        }
    }
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if j > i {
                    format!("{:>width$}", c, width = width)
                } else {
                    " ".repeat(width)
                }
            })
            .collect();
        out.push_str(line.join(" ").trim_end());
        out.push('\n');
    }
    out
}

/// Renders both decision tables and their matrices for a profile.
pub fn render_tables(profile: &Profile, config: &AnalysisConfig) -> Result<String, AnalysisError> {
    let mut out = String::new();
    let internal = find_internal(profile)?;

    if profile.process_count >= 2 {
        let detection = detect_external(profile, config)?;
        if detection.bottlenecks_exist {
            let tree = search_external(profile, config)?;
            let cccrs = tree.cccr_regions();
            if !cccrs.is_empty() {
                let table = external_decision_table(profile, &cccrs, config)?;
                let regions: Vec<String> = cccrs.iter().map(|r| format!("region {r}")).collect();
                out.push_str(&format!(
                    "External decision table (CCCR: {}):\n",
                    regions.join(", ")
                ));
                out.push_str(&render_decision_table(&table));
                out.push_str("\nExternal discernibility matrix:\n");
                out.push_str(&render_matrix(&build_discernibility(&table)));
                out.push('\n');
            }
        }
    }

    let table = internal_decision_table(profile, &internal)?;
    out.push_str("Internal decision table:\n");
    out.push_str(&render_decision_table(&table));
    out.push_str("\nInternal discernibility matrix:\n");
    out.push_str(&render_matrix(&build_discernibility(&table)));
    Ok(out)
}

/// The built-in worked example rendered as table plus matrix.
pub fn render_demo() -> String {
    let table = crate::rough_set::demo_table();
    let matrix = build_discernibility(&table);
    let core = extract_core(&matrix).expect("demo table has a core");
    let mut out = String::new();
    out.push_str("Demo decision table:\n");
    out.push_str(&render_decision_table(&table));
    out.push_str("\nDiscernibility matrix:\n");
    out.push_str(&render_matrix(&matrix));
    out.push_str(&format!(
        "\ncore: {}\n",
        render_core_sets(&core, &table.attribute_names)
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn report_round_trips_through_json() {
        let profile = fixtures::npar1way();
        let config = AnalysisConfig::default();
        let report = analyze(&profile, &config).unwrap();
        let text = render_text(&report);
        let json = serde_json::to_string(&report).unwrap();
        let back: AnalysisReport = serde_json::from_str(&json).unwrap();
        assert_eq!(render_text(&back), text);
    }

    #[test]
    fn npar_report_has_fig_16_block() {
        let profile = fixtures::npar1way();
        let report = analyze(&profile, &AnalysisConfig::default()).unwrap();
        let text = render_text(&report);
        assert!(text.starts_with(
            "Performance similarity\nthere is 1 kind of processes\nkind 0: 0 1 2 3 4 5 6 7\n"
        ));
        assert!(!text.contains("dissimilarity severity"));
    }

    #[test]
    fn demo_rendering_shows_core_alternatives() {
        let text = render_demo();
        assert!(text.contains("core: {a1, a2} or {a1, a3}"));
        assert!(text.contains("a2a3"));
    }
}
