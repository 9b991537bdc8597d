//! Seeded generators for the bundled example data.
//!
//! The files under `data/` are the output of these functions; regenerate
//! them with `ccsim gen-fixtures`.

use chrono::{DateTime, TimeDelta, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::traces::{CarbonSample, CarbonTrace, SynthKind, TraceError, WorkloadSample, WorkloadTrace};

pub const CARBON_SEED: u64 = 20_210_601;
pub const WORKLOAD_SEED: u64 = 4_250;
pub const FIXTURE_HOURS: usize = 96;
pub const FIXTURE_JOBS: usize = 50;

pub const LOW_COV_REGION: &str = "low-cov";
pub const MEDIUM_COV_REGION: &str = "medium-cov";
pub const HIGH_COV_REGION: &str = "high-cov";

pub fn fixture_start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2021, 6, 1, 0, 0, 0).unwrap()
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

/// Hourly intensity for three regions with low, medium and high variability:
/// a daily cycle plus multiplicative noise.
pub fn carbon_fixture() -> Result<Vec<CarbonTrace>, TraceError> {
    let shapes = [
        (LOW_COV_REGION, 120.0, 12.0, 0.03, 5.0),
        (MEDIUM_COV_REGION, 380.0, 140.0, 0.06, 40.0),
        (HIGH_COV_REGION, 260.0, 230.0, 0.08, 20.0),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(CARBON_SEED);
    let mut out = Vec::new();
    for (region, mean, amplitude, noise, floor) in shapes {
        let daily = SynthKind::Sinusoid {
            mean,
            amplitude,
            period: 24,
            phase: 6.0,
        }
        .values(FIXTURE_HOURS)?;
        let samples = daily
            .into_iter()
            .enumerate()
            .map(|(h, v)| {
                let jitter = 1.0 + noise * (2.0 * rng.random::<f64>() - 1.0);
                CarbonSample {
                    timestamp: fixture_start() + TimeDelta::hours(h as i64),
                    intensity: round4((v * jitter).max(floor)),
                }
            })
            .collect();
        out.push(CarbonTrace::new(region, samples, TimeDelta::hours(1))?);
    }
    Ok(out)
}

/// Five-minute CPU series (fractions of the baseline server) for
/// `FIXTURE_JOBS` jobs of mixed shape: steady, diurnal, bursty, stepped and
/// random-walk.
pub fn workload_fixture() -> Result<Vec<WorkloadTrace>, TraceError> {
    let len = FIXTURE_HOURS * 12;
    let mut rng = ChaCha8Rng::seed_from_u64(WORKLOAD_SEED);
    let mut out = Vec::with_capacity(FIXTURE_JOBS);
    for j in 0..FIXTURE_JOBS {
        let values: Vec<f64> = match j % 5 {
            0 => {
                let level = rng.random_range(0.15..0.85);
                (0..len).map(|_| level * (1.0 + 0.05 * (2.0 * rng.random::<f64>() - 1.0))).collect()
            }
            1 => {
                let mean: f64 = rng.random_range(0.3..0.6);
                let amp = rng.random_range(0.1..mean.min(0.35));
                let phase = rng.random_range(0.0..288.0);
                SynthKind::Sinusoid {
                    mean,
                    amplitude: amp,
                    period: 288,
                    phase,
                }
                .values(len)?
            }
            2 => {
                let base = rng.random_range(0.05..0.3);
                let mut v = Vec::with_capacity(len);
                let mut burst_left = 0usize;
                let mut height = 0.0;
                for _ in 0..len {
                    if burst_left == 0 && rng.random_bool(0.02) {
                        burst_left = rng.random_range(3..24);
                        height = rng.random_range(0.4..0.95);
                    }
                    if burst_left > 0 {
                        burst_left -= 1;
                        v.push(height);
                    } else {
                        v.push(base * (1.0 + 0.1 * (2.0 * rng.random::<f64>() - 1.0)));
                    }
                }
                v
            }
            3 => {
                let low = rng.random_range(0.05..0.3);
                let high = rng.random_range(0.5..0.95);
                let period = rng.random_range(12..72);
                SynthKind::Step { low, high, period }.values(len)?
            }
            _ => {
                let mut x: f64 = rng.random_range(0.2..0.8);
                (0..len)
                    .map(|_| {
                        x = (x + 0.04 * (2.0 * rng.random::<f64>() - 1.0)).clamp(0.02, 0.98);
                        x
                    })
                    .collect()
            }
        };
        let mem_gb = round4(rng.random_range(1.0..8.0));
        let samples = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                let avg = round4(v.clamp(0.0, 1.0));
                WorkloadSample {
                    timestamp: fixture_start() + TimeDelta::minutes(5 * i as i64),
                    cpu_avg: avg,
                    cpu_min: round4(avg * 0.8),
                    cpu_max: round4((avg * 1.2).min(1.0).max(avg)),
                    mem_gb,
                }
            })
            .collect();
        out.push(WorkloadTrace::new(format!("job-{j:02}"), samples, TimeDelta::minutes(5))?);
    }
    Ok(out)
}

/// Twelve hours at a steady 500 g/kWh.
pub fn demo_carbon() -> Result<CarbonTrace, TraceError> {
    let samples = (0..12)
        .map(|h| CarbonSample {
            timestamp: fixture_start() + TimeDelta::hours(h),
            intensity: 500.0,
        })
        .collect();
    CarbonTrace::new("demo", samples, TimeDelta::hours(1))
}

/// A light job that never needs more than a small server.
pub fn demo_workload() -> Result<WorkloadTrace, TraceError> {
    let samples = (0..144)
        .map(|i| {
            let avg = if i % 12 < 6 { 0.10 } else { 0.12 };
            WorkloadSample {
                timestamp: fixture_start() + TimeDelta::minutes(5 * i),
                cpu_avg: avg,
                cpu_min: avg,
                cpu_max: avg,
                mem_gb: 7.0,
            }
        })
        .collect();
    WorkloadTrace::new("demo", samples, TimeDelta::minutes(5))
}

/// Starts on the 8-core baseline over its target and settles on the 2-core
/// server after a single migration.
pub const DEMO_CONFIG: &str = r#"{
  "fleet": {
    "baseline_id": "1x",
    "servers": [
      { "id": "0.25x", "capacity_multiple": 0.25, "cores": 2, "base_power_w": 25.0, "peak_power_w": 50.0, "memory_gb": 8.0 },
      { "id": "0.5x", "capacity_multiple": 0.5, "cores": 4, "base_power_w": 50.0, "peak_power_w": 100.0, "memory_gb": 16.0 },
      { "id": "1x", "capacity_multiple": 1.0, "cores": 8, "base_power_w": 100.0, "peak_power_w": 200.0, "memory_gb": 32.0 },
      { "id": "2x", "capacity_multiple": 2.0, "cores": 16, "base_power_w": 200.0, "peak_power_w": 400.0, "memory_gb": 64.0 }
    ]
  },
  "container": { "c_target_g_per_hr": 20.0, "epsilon": 0.05, "memory_gb": 7.0 },
  "policy": { "kind": "cc-efficiency", "quota_mode": "cores" },
  "sim": { "step_s": 300, "demand_scale": 1.0, "seed": 1, "suspend_baseload_attributed": true },
  "migration": { "c0_s": 10.0, "c1_s_per_gb": 15.0, "mode": "stop-and-copy" }
}
"#;
