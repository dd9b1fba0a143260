//! Reference fixtures: two constructed profiles whose analysis results are
//! pinned by the golden files and the acceptance suite.
//!
//! The `st` profile is built so that, at `count_threshold = 1`, the CPU-time
//! clustering yields exactly the partition {0},{1,2},{3},{4,6},{5,7} with
//! dissimilarity severity 0.783958, the external search finds region 14 as a
//! 1-CCR and region 11 as the 2-CCR core, and the internal severity lines and
//! both decision tables come out to their pinned values. The `npar1way`
//! profile clusters into a single kind of process and exercises the internal
//! path only.

use crate::profile::{profile_from_raw, Profile, RawProfile, RawRegion, RegionMetrics};

/// Target dissimilarity severity of the `st` fixture.
pub const ST_SEVERITY: f64 = 0.783958;

const ST_CLOCK: f64 = 2e9;

/// Region-11 CPU seconds for ranks 1..7; rank 0 is solved from the severity
/// equation. Pair gaps (0.3) stay far below every cluster threshold; group
/// gaps (>= 23) stay above.
const ST_U_TAIL: [f64; 7] = [132.0, 132.3, 159.0, 185.0, 212.0, 185.3, 212.3];

/// Per-process whole-program wall time is `ST_W0 + u_i + (own + region-12 cpu)`.
const ST_W0: f64 = 880.0;

/// Constant depth-1 regions of the `st` profile:
/// (id, cpu, wall, instructions, l1_rate, l1_traffic, l2_rate, l2_traffic, disk, net).
const ST_CONST_REGIONS: [(u32, f64, f64, f64, f64, f64, f64, f64, f64, f64); 11] = [
    (1, 2.0, 9.47, 3e9, 0.008, 5e8, 0.004, 2.5e8, 0.0, 0.0),
    (2, 10.0, 46.31, 16e9, 0.0605, 9e8, 0.010, 3e8, 0.0, 0.0),
    (3, 2.0, 8.68, 3e9, 0.008, 5e8, 0.004, 2.5e8, 0.0, 0.0),
    (4, 3.0, 12.28, 10e9, 0.018, 5e8, 0.004, 2.5e8, 0.0, 0.0),
    (5, 49.0, 201.32, 163e9, 0.0605, 9e8, 0.016, 5e8, 0.0, 0.0),
    (6, 45.8, 202.27, 163e9, 0.0605, 9e8, 0.016, 5e8, 0.0, 0.0),
    (7, 3.0, 18.42, 10e9, 0.018, 5e8, 0.004, 2.5e8, 0.0, 0.0),
    (8, 71.9, 178.95, 163e9, 0.030, 8e8, 0.016, 5e8, 1.06e11, 0.0),
    (9, 3.1, 19.52, 10e9, 0.0605, 9e8, 0.010, 3e8, 0.0, 0.0),
    (10, 4.0, 20.0, 16e9, 0.0605, 9e8, 0.010, 3e8, 0.0, 0.0),
    (13, 4.0, 16.42, 16e9, 0.030, 8e8, 0.004, 2.5e8, 0.0, 0.0),
];

// Region 12 and the body of region 14 (their metrics are folded into 14's
// inclusive cells).
const ST_CPU_12: f64 = 5.0;
const ST_WALL_12: f64 = 14.0;
const ST_INSTR_12: f64 = 16e9;
const ST_CPU_OWN: f64 = 3.0;
const ST_WALL_OWN: f64 = 6.5;
const ST_INSTR_OWN: f64 = 10e9;

/// Solves the rank-0 region-11 CPU time so that the severity comes out to
/// `ST_SEVERITY` exactly: sqrt(2) * (u_max - u_0) = S * length(vector 0).
fn st_u0() -> f64 {
    let b2: f64 = ST_CONST_REGIONS.iter().map(|r| r.1 * r.1).sum();
    let k = ST_CPU_12 + ST_CPU_OWN;
    let u_max = ST_U_TAIL[6];
    let s2 = ST_SEVERITY * ST_SEVERITY;
    let d = b2 + ST_CPU_12 * ST_CPU_12 + k * k;
    let a = 2.0 - 2.0 * s2;
    let b = -(4.0 * u_max + 2.0 * s2 * k);
    let c = 2.0 * u_max * u_max - s2 * d;
    (-b - (b * b - 4.0 * a * c).sqrt()) / (2.0 * a)
}

/// Region-11 CPU seconds per rank.
pub fn st_u_values() -> [f64; 8] {
    let u0 = st_u0();
    [
        u0,
        ST_U_TAIL[0],
        ST_U_TAIL[1],
        ST_U_TAIL[2],
        ST_U_TAIL[3],
        ST_U_TAIL[4],
        ST_U_TAIL[5],
        ST_U_TAIL[6],
    ]
}

fn cell(
    cpu: f64,
    wall: f64,
    instructions: f64,
    l1_rate: f64,
    l1_traffic: f64,
    l2_rate: f64,
    l2_traffic: f64,
    disk: f64,
    net: f64,
) -> RegionMetrics {
    let cycles = (cpu * ST_CLOCK).round();
    let l1_miss = (l1_rate * l1_traffic).round();
    let l2_miss = (l2_rate * l2_traffic).round();
    RegionMetrics {
        wall_time: wall,
        cpu_time: cpu,
        cycles,
        instructions: instructions.round(),
        l1_miss,
        l1_access: l1_traffic - l1_miss,
        l2_miss,
        l2_access: l2_traffic - l2_miss,
        disk_io_bytes: disk,
        net_io_bytes: net,
    }
}

/// The 8-process, 14-region fixture. Regions 11 and 12 are nested in region
/// 14 (inclusive accounting); all other regions are depth 1.
pub fn st() -> Profile {
    let u = st_u_values();
    let m = 8;

    let mut regions: Vec<RawRegion> = (1..=14u32)
        .map(|id| RawRegion {
            id: id as i64,
            name: format!("cr{id}"),
            parent: matches!(id, 11 | 12).then_some(14),
            depth: None,
        })
        .collect();
    regions.sort_by_key(|r| r.id);

    let mut metrics = Vec::with_capacity(m);
    let mut program_wall = Vec::with_capacity(m);
    for rank in 0..m {
        let ui = u[rank];
        // Region 11: all inter-process variance lives here.
        let l1_miss_11 = if matches!(rank, 0 | 1 | 2 | 4) { 5e7 } else { 1.2e8 };
        let l2_miss_11 = match rank {
            0..=3 => 2e7,
            4 | 5 => 1e8,
            _ => 1.78e8,
        };
        let net_11 = if matches!(rank, 5 | 6) { 3e8 } else { 2e8 };
        let r11 = RegionMetrics {
            wall_time: ui,
            cpu_time: ui,
            cycles: (ui * ST_CLOCK).round(),
            instructions: (ui * 1e9).round(),
            l1_miss: l1_miss_11,
            l1_access: 1e9 - l1_miss_11,
            l2_miss: l2_miss_11,
            l2_access: 1e9 - l2_miss_11,
            disk_io_bytes: 1e6,
            net_io_bytes: net_11,
        };
        let r12 = cell(
            ST_CPU_12, ST_WALL_12, ST_INSTR_12, 0.030, 4e8, 0.004, 2.5e8, 0.0, 1e8,
        );
        // Region 14 is inclusive of its own body plus regions 11 and 12.
        let own = cell(
            ST_CPU_OWN, ST_WALL_OWN, ST_INSTR_OWN, 0.030, 4e8, 0.004, 2.5e8, 0.0, 0.0,
        );
        let r14 = RegionMetrics {
            wall_time: own.wall_time + r12.wall_time + r11.wall_time,
            cpu_time: own.cpu_time + r12.cpu_time + r11.cpu_time,
            cycles: own.cycles + r12.cycles + r11.cycles,
            instructions: own.instructions + r12.instructions + r11.instructions,
            l1_miss: own.l1_miss + r12.l1_miss + r11.l1_miss,
            l1_access: own.l1_access + r12.l1_access + r11.l1_access,
            l2_miss: own.l2_miss + r12.l2_miss + r11.l2_miss,
            l2_access: own.l2_access + r12.l2_access + r11.l2_access,
            disk_io_bytes: own.disk_io_bytes + r12.disk_io_bytes + r11.disk_io_bytes,
            net_io_bytes: own.net_io_bytes + r12.net_io_bytes + r11.net_io_bytes,
        };

        let mut row = Vec::with_capacity(14);
        for id in 1..=14u32 {
            let cell = match id {
                11 => r11,
                12 => r12,
                14 => r14,
                _ => {
                    let c = ST_CONST_REGIONS.iter().find(|r| r.0 == id).unwrap();
                    cell(c.1, c.2, c.3, c.4, c.5, c.6, c.7, c.8, c.9)
                }
            };
            row.push(cell);
        }
        metrics.push(row);
        program_wall.push(ST_W0 + ui + ST_CPU_12 + ST_CPU_OWN);
    }

    profile_from_raw(RawProfile {
        version: 1,
        regions,
        processes: m,
        program_wall_time: program_wall,
        metrics,
    })
    .expect("st fixture is valid")
}

/// The 8-process, 12-region fixture: every process behaves identically, so
/// only the internal analysis finds anything.
pub fn npar1way() -> Profile {
    // (id, cpu, wall, instructions, l1_rate, l1_traffic, l2_rate, l2_traffic, disk, net)
    let spec: [(u32, f64, f64, f64, f64, f64, f64, f64, f64, f64); 12] = [
        (1, 0.25, 1.08, 5e8, 0.008, 5e8, 0.004, 2.5e8, 0.0, 0.0),
        (2, 2.5, 3.12, 2e9, 0.035, 6e8, 0.030, 3e8, 2.5e8, 9e8),
        (3, 9.0, 18.6, 1.55e10, 0.035, 6e8, 0.030, 3e8, 0.0, 6e8),
        (4, 2.0, 4.08, 4e9, 0.008, 5e8, 0.004, 2.5e8, 1e8, 0.0),
        (5, 0.7, 1.2, 5e8, 0.008, 5e8, 0.004, 2.5e8, 0.0, 0.0),
        (6, 3.0, 3.0, 2e9, 0.035, 6e8, 0.030, 3e8, 2.5e8, 9e8),
        (7, 1.0, 1.92, 4e9, 0.17, 1e9, 0.012, 2.5e8, 1e8, 0.0),
        (8, 1.0, 1.68, 4e9, 0.02, 5e8, 0.21, 1e9, 0.0, 0.0),
        (9, 0.9, 1.6, 4e9, 0.02, 5e8, 0.012, 2.5e8, 5e9, 0.0),
        (10, 5.0, 12.6, 1.5e10, 0.035, 6e8, 0.030, 3e8, 0.0, 6e8),
        (11, 0.8, 1.1625, 5e8, 0.008, 5e8, 0.004, 2.5e8, 0.0, 0.0),
        (12, 30.0, 36.0, 3e10, 0.035, 6e8, 0.030, 3e8, 0.0, 7e9),
    ];
    let m = 8;
    let row: Vec<RegionMetrics> = spec
        .iter()
        .map(|c| cell(c.1, c.2, c.3, c.4, c.5, c.6, c.7, c.8, c.9))
        .collect();
    let regions = spec
        .iter()
        .map(|c| RawRegion {
            id: c.0 as i64,
            name: format!("cr{}", c.0),
            parent: None,
            depth: None,
        })
        .collect();
    profile_from_raw(RawProfile {
        version: 1,
        regions,
        processes: m,
        program_wall_time: vec![120.0; m],
        metrics: vec![row; m],
    })
    .expect("npar1way fixture is valid")
}
