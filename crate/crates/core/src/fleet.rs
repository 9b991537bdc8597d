//! Server size classes, the linear utilization-to-power model, and the linear
//! performance model that normalizes demand against the baseline server.
//!
//! All CPU quantities are fractions of the baseline server's capacity. A
//! demand of `0.4` runs at 20% utilization on a `2×` server and at 80% on a
//! `0.5×` server.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when deciding whether a container sits at its quota ceiling.
pub const QUOTA_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FleetError {
    #[error("utilization {0} outside [0, 1]")]
    Utilization(f64),
    #[error("quota {0} outside [0, 1]")]
    Quota(f64),
    #[error("demand {0} must be finite and non-negative")]
    Demand(f64),
    #[error("{granted} cores requested but server `{server}` has {cores}")]
    Cores {
        server: String,
        granted: u32,
        cores: u32,
    },
    #[error("invalid server `{id}`: {reason}")]
    InvalidServer { id: String, reason: String },
    #[error("invalid fleet: {0}")]
    InvalidFleet(String),
}

/// One server size class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSpec {
    pub id: String,
    /// Capacity relative to the baseline server (baseline = 1.0).
    pub capacity_multiple: f64,
    pub cores: u32,
    pub base_power_w: f64,
    pub peak_power_w: f64,
    pub memory_gb: f64,
}

impl ServerSpec {
    pub fn new(
        id: impl Into<String>,
        capacity_multiple: f64,
        cores: u32,
        base_power_w: f64,
        peak_power_w: f64,
        memory_gb: f64,
    ) -> Result<Self, FleetError> {
        let spec = ServerSpec {
            id: id.into(),
            capacity_multiple,
            cores,
            base_power_w,
            peak_power_w,
            memory_gb,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), FleetError> {
        let bad = |reason: &str| {
            Err(FleetError::InvalidServer {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.id.is_empty() {
            return bad("empty id");
        }
        if !(self.capacity_multiple.is_finite() && self.capacity_multiple > 0.0) {
            return bad("capacity_multiple must be > 0");
        }
        if self.cores == 0 {
            return bad("cores must be positive");
        }
        if !(self.base_power_w.is_finite() && self.base_power_w > 0.0) {
            return bad("base_power_w must be > 0");
        }
        if !(self.peak_power_w.is_finite() && self.peak_power_w > self.base_power_w) {
            return bad("peak_power_w must exceed base_power_w");
        }
        if !(self.memory_gb.is_finite() && self.memory_gb > 0.0) {
            return bad("memory_gb must be > 0");
        }
        Ok(())
    }

    /// Linear power model: baseload plus a marginal term proportional to
    /// utilization.
    pub fn power(&self, utilization: f64) -> Result<f64, FleetError> {
        if !(0.0..=1.0).contains(&utilization) {
            return Err(FleetError::Utilization(utilization));
        }
        Ok(self.power_unchecked(utilization))
    }

    pub(crate) fn power_unchecked(&self, utilization: f64) -> f64 {
        self.base_power_w + (self.peak_power_w - self.base_power_w) * utilization
    }

    /// Projects a demand (in baseline units) onto this server under `quota`.
    pub fn project(&self, demand: f64, quota: f64) -> Result<Projection, FleetError> {
        if !(demand.is_finite() && demand >= 0.0) {
            return Err(FleetError::Demand(demand));
        }
        if !(0.0..=1.0).contains(&quota) {
            return Err(FleetError::Quota(quota));
        }
        Ok(self.project_unchecked(demand, quota))
    }

    pub(crate) fn project_unchecked(&self, demand: f64, quota: f64) -> Projection {
        let ceiling = self.capacity_multiple * quota;
        let granted = demand.min(ceiling);
        let utilization = (granted / self.capacity_multiple).clamp(0.0, 1.0);
        Projection {
            server_id: self.id.clone(),
            utilization,
            granted,
            power_w: self.power_unchecked(utilization),
            throttle_baseline_units: (demand - granted).max(0.0),
        }
    }

    /// Estimates demand from an observed utilization under `quota`.
    ///
    /// An unthrottled observation converts directly. A container pinned at
    /// its quota ceiling is assumed to need twice what it was granted; the
    /// next observation corrects the guess if it was too optimistic.
    pub fn infer_demand(&self, observed_utilization: f64, quota: f64) -> Result<f64, FleetError> {
        if !(0.0..=1.0).contains(&observed_utilization) {
            return Err(FleetError::Utilization(observed_utilization));
        }
        if !(0.0..=1.0).contains(&quota) {
            return Err(FleetError::Quota(quota));
        }
        let granted = observed_utilization * self.capacity_multiple;
        if observed_utilization < quota - QUOTA_EPS {
            Ok(granted)
        } else {
            Ok(2.0 * granted)
        }
    }

    /// Quota fraction corresponding to a cgroup-style core grant.
    pub fn quota_from_cores(&self, cores_granted: u32) -> Result<f64, FleetError> {
        if cores_granted > self.cores {
            return Err(FleetError::Cores {
                server: self.id.clone(),
                granted: cores_granted,
                cores: self.cores,
            });
        }
        Ok(f64::from(cores_granted) / f64::from(self.cores))
    }

    /// Largest whole-core quota not above `quota`.
    pub fn floor_to_cores(&self, quota: f64) -> f64 {
        let cores = f64::from(self.cores);
        ((quota * cores) + 1e-9).floor().clamp(0.0, cores) / cores
    }
}

/// Free-function form of [`ServerSpec::power`].
pub fn power(server: &ServerSpec, utilization: f64) -> Result<f64, FleetError> {
    server.power(utilization)
}

/// Free-function form of [`ServerSpec::project`].
pub fn project(demand: f64, server: &ServerSpec, quota: f64) -> Result<Projection, FleetError> {
    server.project(demand, quota)
}

/// Free-function form of [`ServerSpec::infer_demand`].
pub fn infer_demand(
    observed_utilization: f64,
    server: &ServerSpec,
    quota: f64,
) -> Result<f64, FleetError> {
    server.infer_demand(observed_utilization, quota)
}

/// Free-function form of [`ServerSpec::quota_from_cores`].
pub fn quota_from_cores(cores_granted: u32, server: &ServerSpec) -> Result<f64, FleetError> {
    server.quota_from_cores(cores_granted)
}

/// Utilization, power and unmet demand of a container on a given server.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    pub server_id: String,
    pub utilization: f64,
    /// Demand actually served, in baseline units.
    pub granted: f64,
    pub power_w: f64,
    pub throttle_baseline_units: f64,
}

/// A family of homogeneous servers that differ only in size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FleetDef", into = "FleetDef")]
pub struct Fleet {
    servers: Vec<ServerSpec>,
    baseline: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FleetDef {
    baseline_id: String,
    servers: Vec<ServerSpec>,
}

impl TryFrom<FleetDef> for Fleet {
    type Error = FleetError;

    fn try_from(def: FleetDef) -> Result<Self, Self::Error> {
        Fleet::new(def.servers, &def.baseline_id)
    }
}

impl From<Fleet> for FleetDef {
    fn from(fleet: Fleet) -> Self {
        FleetDef {
            baseline_id: fleet.baseline().id.clone(),
            servers: fleet.servers,
        }
    }
}

impl Fleet {
    pub fn new(mut servers: Vec<ServerSpec>, baseline_id: &str) -> Result<Self, FleetError> {
        if servers.is_empty() {
            return Err(FleetError::InvalidFleet("fleet has no servers".into()));
        }
        for s in &servers {
            s.validate()?;
        }
        servers.sort_by(|a, b| a.capacity_multiple.total_cmp(&b.capacity_multiple));
        for pair in servers.windows(2) {
            if pair[0].capacity_multiple == pair[1].capacity_multiple {
                return Err(FleetError::InvalidFleet(format!(
                    "servers `{}` and `{}` share capacity multiple {}",
                    pair[0].id, pair[1].id, pair[0].capacity_multiple
                )));
            }
        }
        let mut ids: Vec<&str> = servers.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(dup) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(FleetError::InvalidFleet(format!("duplicate server id `{}`", dup[0])));
        }
        let baseline = servers
            .iter()
            .position(|s| s.id == baseline_id)
            .ok_or_else(|| FleetError::InvalidFleet(format!("baseline `{baseline_id}` not in fleet")))?;
        if servers[baseline].capacity_multiple != 1.0 {
            return Err(FleetError::InvalidFleet(format!(
                "baseline `{baseline_id}` must have capacity_multiple 1.0"
            )));
        }
        Ok(Fleet { servers, baseline })
    }

    /// The five-size family used for evaluation: `0.25×` to `4×` around a
    /// 100 W / 200 W, 8-core baseline, with power, cores and memory scaled
    /// in proportion to capacity.
    pub fn standard() -> Self {
        Self::proportional(&[0.25, 0.5, 1.0, 2.0, 4.0], 8, 100.0, 200.0, 32.0)
    }

    /// Builds a family whose power, cores and memory scale with capacity.
    pub fn proportional(
        multiples: &[f64],
        baseline_cores: u32,
        baseline_base_w: f64,
        baseline_peak_w: f64,
        baseline_memory_gb: f64,
    ) -> Self {
        let servers = multiples
            .iter()
            .map(|&m| ServerSpec {
                id: server_label(m),
                capacity_multiple: m,
                cores: ((f64::from(baseline_cores) * m).round() as u32).max(1),
                base_power_w: baseline_base_w * m,
                peak_power_w: baseline_peak_w * m,
                memory_gb: baseline_memory_gb * m,
            })
            .collect();
        Fleet::new(servers, &server_label(1.0)).expect("proportional fleet must contain 1.0")
    }

    /// Servers in ascending capacity order.
    pub fn servers(&self) -> &[ServerSpec] {
        &self.servers
    }

    pub fn baseline(&self) -> &ServerSpec {
        &self.servers[self.baseline]
    }

    pub fn baseline_index(&self) -> usize {
        self.baseline
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.servers.iter().position(|s| s.id == id)
    }

    pub fn get(&self, id: &str) -> Option<&ServerSpec> {
        self.servers.iter().find(|s| s.id == id)
    }

    pub fn len(&self) -> usize {
        self.servers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.servers.is_empty()
    }
}

/// `1x`, `0.25x`, `4x`, ...
pub fn server_label(multiple: f64) -> String {
    format!("{multiple}x")
}
