//! Golden-file checks: the checked-in fixture documents and the reference
//! report must match the constructors byte for byte.
//!
//! Run `cargo test -p spmd-analysis --test fixtures_golden -- --ignored`
//! to regenerate the files after an intentional fixture change.

use spmd_analysis::{fixtures, report, synth, AnalysisConfig};
use std::path::PathBuf;

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn st_report_text() -> String {
    // The st fixture reproduces its pinned clustering at count_threshold 1.
    let config = AnalysisConfig::new(0.10, 1).unwrap();
    let result = report::analyze(&fixtures::st(), &config).unwrap();
    report::render_text(&result)
}

#[test]
fn st_fixture_matches_golden_file() {
    let golden = std::fs::read(fixtures_dir().join("st.json")).expect("fixtures/st.json");
    assert_eq!(synth::emit_fixture(&fixtures::st()), golden);
}

#[test]
fn npar1way_fixture_matches_golden_file() {
    let golden =
        std::fs::read(fixtures_dir().join("npar1way.json")).expect("fixtures/npar1way.json");
    assert_eq!(synth::emit_fixture(&fixtures::npar1way()), golden);
}

#[test]
fn st_report_matches_golden_file() {
    let golden =
        std::fs::read_to_string(fixtures_dir().join("st_report.txt")).expect("st_report.txt");
    assert_eq!(st_report_text(), golden);
}

#[test]
fn golden_fixtures_reingest_equal() {
    let bytes = std::fs::read(fixtures_dir().join("st.json")).expect("fixtures/st.json");
    let profile = spmd_analysis::ingest_profile(&bytes).unwrap();
    assert_eq!(profile, fixtures::st());
}

#[test]
#[ignore = "writes the golden files"]
fn regenerate_golden_files() {
    let dir = fixtures_dir();
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("st.json"), synth::emit_fixture(&fixtures::st())).unwrap();
    std::fs::write(
        dir.join("npar1way.json"),
        synth::emit_fixture(&fixtures::npar1way()),
    )
    .unwrap();
    std::fs::write(dir.join("st_report.txt"), st_report_text()).unwrap();
}
