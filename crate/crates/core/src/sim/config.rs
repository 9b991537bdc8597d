//! JSON run configuration.
//!
//! ```json
//! {
//!   "fleet": { "baseline_id": "1x", "servers": [ ... ] },
//!   "container": { "c_target_g_per_hr": 80, "epsilon": 0.05, "memory_gb": 7, "min_dwell_s": 600 },
//!   "policy": { "kind": "cc-efficiency", "quota_mode": "cores" },
//!   "sim": { "step_s": 300, "demand_scale": 1, "seed": 7, "suspend_baseload_attributed": true },
//!   "migration": { "c0_s": 10, "c1_s_per_gb": 15, "mode": "stop-and-copy" },
//!   "availability": { "4x": 0.5 }
//! }
//! ```
//!
//! `container` and `policy` are required. Unknown keys are rejected.

use std::collections::BTreeMap;

use chrono::TimeDelta;
use serde::Deserialize;

use super::{MigrationMode, MigrationModel, PolicyKind, SimConfig, SimError};
use crate::fleet::Fleet;
use crate::policy::{ContainerConfig, QuotaMode, Variant};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    #[serde(default)]
    fleet: Option<Fleet>,
    container: ContainerDoc,
    policy: PolicyDoc,
    #[serde(default)]
    sim: SimDoc,
    #[serde(default)]
    migration: MigrationDoc,
    #[serde(default)]
    availability: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContainerDoc {
    c_target_g_per_hr: f64,
    #[serde(default = "default_epsilon")]
    epsilon: f64,
    #[serde(default = "default_memory")]
    memory_gb: f64,
    /// Defaults to two steps.
    #[serde(default)]
    min_dwell_s: Option<f64>,
}

fn default_epsilon() -> f64 {
    ContainerConfig::DEFAULT_EPSILON
}

fn default_memory() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyDoc {
    kind: PolicyKind,
    #[serde(default)]
    quota_mode: QuotaMode,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimDoc {
    #[serde(default = "default_step")]
    step_s: f64,
    #[serde(default = "default_scale")]
    demand_scale: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_true")]
    suspend_baseload_attributed: bool,
}

impl Default for SimDoc {
    fn default() -> Self {
        SimDoc {
            step_s: default_step(),
            demand_scale: default_scale(),
            seed: 0,
            suspend_baseload_attributed: true,
        }
    }
}

fn default_step() -> f64 {
    300.0
}

fn default_scale() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MigrationDoc {
    #[serde(default = "default_c0")]
    c0_s: f64,
    #[serde(default = "default_c1")]
    c1_s_per_gb: f64,
    #[serde(default)]
    mode: MigrationMode,
}

impl Default for MigrationDoc {
    fn default() -> Self {
        let m = MigrationModel::default();
        MigrationDoc {
            c0_s: m.c0_s,
            c1_s_per_gb: m.c1_s_per_gb,
            mode: m.mode,
        }
    }
}

fn default_c0() -> f64 {
    MigrationModel::default().c0_s
}

fn default_c1() -> f64 {
    MigrationModel::default().c1_s_per_gb
}

fn seconds(s: f64, what: &str) -> Result<TimeDelta, SimError> {
    if !(s.is_finite() && s >= 0.0) {
        return Err(SimError::Config(format!("{what} must be a finite number of seconds >= 0")));
    }
    TimeDelta::try_milliseconds((s * 1000.0).round() as i64)
        .ok_or_else(|| SimError::Config(format!("{what} is out of range")))
}

/// Parses and validates a configuration document. Errors name the offending
/// JSON path.
pub fn parse_config(json: &str) -> Result<SimConfig, SimError> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let doc: ConfigDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        SimError::Config(format!("at `{path}`: {}", e.into_inner()))
    })?;
    let step = seconds(doc.sim.step_s, "sim.step_s")?;
    let min_dwell = match doc.container.min_dwell_s {
        Some(s) => seconds(s, "container.min_dwell_s")?,
        None => step * 2,
    };
    let variant = match doc.policy.kind {
        PolicyKind::CcPerformance => Variant::Performance,
        _ => Variant::Efficiency,
    };
    let container = ContainerConfig {
        c_target: doc.container.c_target_g_per_hr,
        epsilon: doc.container.epsilon,
        variant,
        memory_gb: doc.container.memory_gb,
        min_dwell,
        quota_mode: doc.policy.quota_mode,
    };
    let cfg = SimConfig {
        step,
        fleet: doc.fleet.unwrap_or_else(Fleet::standard),
        container,
        policy_kind: doc.policy.kind,
        migration: MigrationModel {
            c0_s: doc.migration.c0_s,
            c1_s_per_gb: doc.migration.c1_s_per_gb,
            mode: doc.migration.mode,
        },
        demand_scale: doc.sim.demand_scale,
        availability: doc.availability,
        seed: doc.sim.seed,
        suspend_baseload_attributed: doc.sim.suspend_baseload_attributed,
    };
    cfg.validate()?;
    Ok(cfg)
}
