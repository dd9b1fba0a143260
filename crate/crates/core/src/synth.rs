//! Synthetic SPMD profile generator with controllable bottleneck injection.
//!
//! Generation is deterministic given (spec, seed). Baseline metrics receive
//! multiplicative uniform noise within +/-1% drawn from a SplitMix64 stream;
//! injections are applied after noise; derived consistency (cpu <= wall,
//! cycles = cpu x clock, instructions = cycles / CPI) is enforced last.

use crate::profile::{
    profile_from_raw, profile_to_raw, Profile, ProfileError, RawProfile, RawRegion, RegionMetrics,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("spec parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("spec has no regions")]
    NoRegions,
    #[error("spec needs at least 1 process")]
    NoProcesses,
    #[error("injection targets unknown region {0}")]
    UnknownTarget(u32),
    #[error("injection rank {rank} is out of range for {processes} processes")]
    BadRank { rank: usize, processes: usize },
    #[error("injection multiplier must be positive, got {0}")]
    BadMultiplier(f64),
    #[error("{field} of region {region} must be {requirement}")]
    BadBaseline {
        region: u32,
        field: &'static str,
        requirement: &'static str,
    },
    #[error("generated profile failed validation: {0}")]
    Invalid(String),
}

/// SplitMix64: the documented noise source. Constants are fixed by the
/// algorithm, so any implementation reproduces the same stream from a seed.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Multiplicative noise factor in [1 - amp, 1 + amp).
    fn noise(&mut self, amp: f64) -> f64 {
        1.0 + (self.next_f64() * 2.0 - 1.0) * amp
    }
}

/// Baseline behavior of one region, identical across processes before noise
/// and injections.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineRegion {
    pub wall_time: f64,
    pub cpu_time: f64,
    /// Target cycles-per-instruction; instructions = cycles / cpi.
    pub cpi: f64,
    pub l1_miss_rate: f64,
    /// Total L1 references (miss + access).
    pub l1_traffic: f64,
    pub l2_miss_rate: f64,
    pub l2_traffic: f64,
    pub disk_io_bytes: f64,
    pub net_io_bytes: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthRegion {
    pub id: u32,
    pub name: String,
    pub parent: Option<u32>,
    pub baseline: BaselineRegion,
}

/// Bottleneck injections, applied after noise. `ranks: None` means all.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Injection {
    /// Scales cpu, wall, and the underlying work of the target region on the
    /// affected ranks: a workload imbalance.
    LoadImbalance {
        target: u32,
        multiplier: f64,
        ranks: Option<Vec<usize>>,
    },
    /// Scales the L2 miss rate (clamped to 0.95) and slows the region by a
    /// stall penalty proportional to the added miss rate.
    HighL2Miss {
        target: u32,
        multiplier: f64,
        ranks: Option<Vec<usize>>,
    },
    /// Scales disk bytes; wall time grows by the extra bytes at 100 MB/s.
    HighDiskIo {
        target: u32,
        multiplier: f64,
        ranks: Option<Vec<usize>>,
    },
    /// Scales network bytes; wall time grows by the extra bytes at 125 MB/s.
    HighNetIo {
        target: u32,
        multiplier: f64,
        ranks: Option<Vec<usize>>,
    },
    /// Scales executed instructions (cpu and wall follow at constant CPI).
    HighInstructionCount {
        target: u32,
        multiplier: f64,
        ranks: Option<Vec<usize>>,
    },
}

impl Injection {
    fn target(&self) -> u32 {
        match self {
            Injection::LoadImbalance { target, .. }
            | Injection::HighL2Miss { target, .. }
            | Injection::HighDiskIo { target, .. }
            | Injection::HighNetIo { target, .. }
            | Injection::HighInstructionCount { target, .. } => *target,
        }
    }

    fn multiplier(&self) -> f64 {
        match self {
            Injection::LoadImbalance { multiplier, .. }
            | Injection::HighL2Miss { multiplier, .. }
            | Injection::HighDiskIo { multiplier, .. }
            | Injection::HighNetIo { multiplier, .. }
            | Injection::HighInstructionCount { multiplier, .. } => *multiplier,
        }
    }

    fn ranks(&self) -> &Option<Vec<usize>> {
        match self {
            Injection::LoadImbalance { ranks, .. }
            | Injection::HighL2Miss { ranks, .. }
            | Injection::HighDiskIo { ranks, .. }
            | Injection::HighNetIo { ranks, .. }
            | Injection::HighInstructionCount { ranks, .. } => ranks,
        }
    }

    fn applies(&self, rank: usize) -> bool {
        match self.ranks() {
            None => true,
            Some(rs) => rs.contains(&rank),
        }
    }
}

pub const DISK_BANDWIDTH_BYTES_PER_SEC: f64 = 100e6;
pub const NET_BANDWIDTH_BYTES_PER_SEC: f64 = 125e6;
/// Extra cycles per instruction per unit of added L2 miss rate.
pub const L2_MISS_CPI_PENALTY: f64 = 4.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub processes: usize,
    /// Nominal clock in Hz; cycles = cpu_time x clock.
    #[serde(default = "default_clock")]
    pub clock_hz: f64,
    /// Fraction of uninstrumented program wall time added on top of the
    /// depth-1 wall-time sum.
    #[serde(default = "default_slack")]
    pub program_wall_slack: f64,
    /// Noise amplitude (multiplicative, uniform). Default 1%.
    #[serde(default = "default_noise")]
    pub noise_amplitude: f64,
    pub regions: Vec<SynthRegion>,
    #[serde(default)]
    pub injections: Vec<Injection>,
}

fn default_clock() -> f64 {
    2e9
}
fn default_slack() -> f64 {
    0.05
}
fn default_noise() -> f64 {
    0.01
}

pub fn parse_spec(document: &[u8]) -> Result<SynthSpec, SynthError> {
    serde_json::from_slice(document).map_err(|e| SynthError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn validate_spec(spec: &SynthSpec) -> Result<(), SynthError> {
    if spec.regions.is_empty() {
        return Err(SynthError::NoRegions);
    }
    if spec.processes == 0 {
        return Err(SynthError::NoProcesses);
    }
    for r in &spec.regions {
        let b = &r.baseline;
        let checks: [(&'static str, f64, bool); 5] = [
            ("wall_time", b.wall_time, b.wall_time >= 0.0),
            ("cpu_time", b.cpu_time, b.cpu_time >= 0.0),
            ("cpi", b.cpi, b.cpi > 0.0),
            (
                "l1_miss_rate",
                b.l1_miss_rate,
                (0.0..=1.0).contains(&b.l1_miss_rate),
            ),
            (
                "l2_miss_rate",
                b.l2_miss_rate,
                (0.0..=1.0).contains(&b.l2_miss_rate),
            ),
        ];
        for (field, _, ok) in checks {
            if !ok {
                return Err(SynthError::BadBaseline {
                    region: r.id,
                    field,
                    requirement: "non-negative (cpi positive, rates in [0,1])",
                });
            }
        }
    }
    for inj in &spec.injections {
        if !spec.regions.iter().any(|r| r.id == inj.target()) {
            return Err(SynthError::UnknownTarget(inj.target()));
        }
        if inj.multiplier() <= 0.0 {
            return Err(SynthError::BadMultiplier(inj.multiplier()));
        }
        if let Some(ranks) = inj.ranks() {
            for &rank in ranks {
                if rank >= spec.processes {
                    return Err(SynthError::BadRank {
                        rank,
                        processes: spec.processes,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Working state of one (process, region) cell before finalization.
#[derive(Debug, Clone)]
struct Draft {
    wall: f64,
    cpu: f64,
    cpi: f64,
    l1_rate: f64,
    l1_traffic: f64,
    l2_rate: f64,
    l2_traffic: f64,
    disk: f64,
    net: f64,
}

/// Generates a profile from a spec and a noise seed.
///
/// Noise draw order is fixed: for each rank, for each region in spec order,
/// six draws (wall, cpu, l1_traffic, l2_traffic, disk, net).
pub fn generate(spec: &SynthSpec, noise_seed: u64) -> Result<Profile, SynthError> {
    validate_spec(spec)?;
    let mut rng = SplitMix64::new(noise_seed);
    let amp = spec.noise_amplitude;
    let m = spec.processes;

    let mut drafts: Vec<Vec<Draft>> = Vec::with_capacity(m);
    for _rank in 0..m {
        let mut row = Vec::with_capacity(spec.regions.len());
        for region in &spec.regions {
            let b = &region.baseline;
            let wall = b.wall_time * rng.noise(amp);
            let cpu = (b.cpu_time * rng.noise(amp)).min(wall);
            row.push(Draft {
                wall,
                cpu,
                cpi: b.cpi,
                l1_rate: b.l1_miss_rate,
                l1_traffic: b.l1_traffic * rng.noise(amp),
                l2_rate: b.l2_miss_rate,
                l2_traffic: b.l2_traffic * rng.noise(amp),
                disk: b.disk_io_bytes * rng.noise(amp),
                net: b.net_io_bytes * rng.noise(amp),
            });
        }
        drafts.push(row);
    }

    for inj in &spec.injections {
        let idx = spec
            .regions
            .iter()
            .position(|r| r.id == inj.target())
            .unwrap();
        for (rank, row) in drafts.iter_mut().enumerate() {
            if !inj.applies(rank) {
                continue;
            }
            let d = &mut row[idx];
            let mult = inj.multiplier();
            match inj {
                Injection::LoadImbalance { .. } | Injection::HighInstructionCount { .. } => {
                    d.cpu *= mult;
                    d.wall *= mult;
                    d.l1_traffic *= mult;
                    d.l2_traffic *= mult;
                }
                Injection::HighL2Miss { .. } => {
                    let old = d.l2_rate;
                    d.l2_rate = (old * mult).min(0.95);
                    let slowdown =
                        1.0 + L2_MISS_CPI_PENALTY * (d.l2_rate - old) / d.cpi.max(1e-12);
                    d.cpi *= slowdown;
                    d.cpu *= slowdown;
                    d.wall *= slowdown;
                }
                Injection::HighDiskIo { .. } => {
                    let extra = d.disk * (mult - 1.0);
                    d.disk *= mult;
                    d.wall += extra / DISK_BANDWIDTH_BYTES_PER_SEC;
                }
                Injection::HighNetIo { .. } => {
                    let extra = d.net * (mult - 1.0);
                    d.net *= mult;
                    d.wall += extra / NET_BANDWIDTH_BYTES_PER_SEC;
                }
            }
        }
    }

    // Finalize: integral counts, wall >= cpu, cycles from the nominal clock.
    let mut metrics: Vec<Vec<RegionMetrics>> = Vec::with_capacity(m);
    let mut program_wall = Vec::with_capacity(m);
    for row in &drafts {
        let mut cells = Vec::with_capacity(row.len());
        for d in row {
            let wall = d.wall.max(d.cpu);
            let cycles = (d.cpu * spec.clock_hz).round();
            let instructions = (cycles / d.cpi).round();
            let l1_traffic = d.l1_traffic.round();
            let l1_miss = (d.l1_rate * l1_traffic).round();
            let l2_traffic = d.l2_traffic.round();
            let l2_miss = (d.l2_rate * l2_traffic).round();
            cells.push(RegionMetrics {
                wall_time: wall,
                cpu_time: d.cpu,
                cycles,
                instructions,
                l1_miss,
                l1_access: l1_traffic - l1_miss,
                l2_miss,
                l2_access: l2_traffic - l2_miss,
                disk_io_bytes: d.disk.round(),
                net_io_bytes: d.net.round(),
            });
        }
        let depth_one_wall: f64 = spec
            .regions
            .iter()
            .zip(&cells)
            .filter(|(r, _)| r.parent.is_none())
            .map(|(_, c)| c.wall_time)
            .sum();
        program_wall.push(depth_one_wall * (1.0 + spec.program_wall_slack));
        metrics.push(cells);
    }

    let raw = RawProfile {
        version: 1,
        regions: spec
            .regions
            .iter()
            .map(|r| RawRegion {
                id: r.id as i64,
                name: r.name.clone(),
                parent: r.parent.map(|p| p as i64),
                depth: None,
            })
            .collect(),
        processes: m,
        program_wall_time: program_wall,
        metrics,
    };
    profile_from_raw(raw).map_err(|e: ProfileError| SynthError::Invalid(e.to_string()))
}

/// Serializes a profile to the canonical document format. Round-trips through
/// `ingest_profile` to an equal profile.
pub fn emit_fixture(profile: &Profile) -> Vec<u8> {
    let raw = profile_to_raw(profile);
    let mut bytes = serde_json::to_vec_pretty(&raw).expect("profile serializes");
    bytes.push(b'\n');
    bytes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::external::detect_external;
    use crate::profile::ingest_profile;
    use crate::AnalysisConfig;

    pub(crate) fn flat_spec(regions: usize, processes: usize) -> SynthSpec {
        SynthSpec {
            processes,
            clock_hz: 2e9,
            program_wall_slack: 0.05,
            noise_amplitude: 0.01,
            regions: (1..=regions as u32)
                .map(|id| SynthRegion {
                    id,
                    name: format!("r{id}"),
                    parent: None,
                    baseline: BaselineRegion {
                        wall_time: 2.0 + id as f64,
                        cpu_time: 1.5 + id as f64,
                        cpi: 1.0 + 0.1 * id as f64,
                        l1_miss_rate: 0.01 * id as f64,
                        l1_traffic: 1e9,
                        l2_miss_rate: 0.005 * id as f64,
                        l2_traffic: 1e8,
                        disk_io_bytes: 1e6 * id as f64,
                        net_io_bytes: 2e6 * id as f64,
                    },
                })
                .collect(),
            injections: Vec::new(),
        }
    }

    #[test]
    fn zero_noise_no_injection_gives_identical_processes() {
        let mut spec = flat_spec(4, 6);
        spec.noise_amplitude = 0.0;
        let p = generate(&spec, 42).unwrap();
        let d = detect_external(&p, &AnalysisConfig::default()).unwrap();
        assert_eq!(d.outcome.cluster_count(), 1);
        assert!(!d.bottlenecks_exist);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = flat_spec(5, 4);
        let a = generate(&spec, 7).unwrap();
        let b = generate(&spec, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(emit_fixture(&a), emit_fixture(&b));
        let c = generate(&spec, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn emit_round_trips() {
        let mut spec = flat_spec(6, 5);
        spec.regions[3].parent = Some(1);
        spec.injections.push(Injection::HighDiskIo {
            target: 2,
            multiplier: 4.0,
            ranks: None,
        });
        let p = generate(&spec, 123).unwrap();
        let bytes = emit_fixture(&p);
        let q = ingest_profile(&bytes).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn load_imbalance_splits_clusters() {
        let mut spec = flat_spec(5, 8);
        spec.injections.push(Injection::LoadImbalance {
            target: 3,
            multiplier: 3.0,
            ranks: Some(vec![4, 5, 6, 7]),
        });
        let p = generate(&spec, 9).unwrap();
        let d = detect_external(&p, &AnalysisConfig::default()).unwrap();
        assert!(d.bottlenecks_exist);
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let mut spec = flat_spec(2, 2);
        spec.injections.push(Injection::HighNetIo {
            target: 99,
            multiplier: 2.0,
            ranks: None,
        });
        assert_eq!(
            generate(&spec, 0).unwrap_err(),
            SynthError::UnknownTarget(99)
        );
        let mut spec = flat_spec(2, 2);
        spec.injections.push(Injection::LoadImbalance {
            target: 1,
            multiplier: 0.0,
            ranks: None,
        });
        assert!(matches!(
            generate(&spec, 0).unwrap_err(),
            SynthError::BadMultiplier(_)
        ));
        let mut spec = flat_spec(2, 2);
        spec.regions[0].baseline.l1_miss_rate = 1.5;
        assert!(matches!(
            generate(&spec, 0).unwrap_err(),
            SynthError::BadBaseline { .. }
        ));
    }

    #[test]
    fn splitmix_reference_values() {
        // First outputs for seed 0, per the published SplitMix64 algorithm.
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220A8397B1DCDAF);
        assert_eq!(rng.next_u64(), 0x6E789E6AA1B965F4);
        assert_eq!(rng.next_u64(), 0x06C45D188009454F);
    }
}
