//! Discrete-time replay of a workload trace against a carbon trace.
//!
//! Every step the monitor observes the container under its current
//! configuration, the policy is consulted once, and the chosen action takes
//! effect within the same step. Migration downtime shorter than a step is
//! charged pro rata; longer downtime carries into the following steps.

mod config;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, TimeDelta, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fleet::{Fleet, ServerSpec};
use crate::policy::{
    self, emissions_rate, Action, ActionKind, ContainerConfig, ContainerState, PolicyError, PolicyInputs, Rules,
    Status,
};
use crate::provider::{CarbonProvider, ProviderError};
use crate::traces::{CarbonTrace, WorkloadTrace};

pub use config::parse_config;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(String),
    #[error("workload and carbon traces do not overlap for a full step")]
    NoOverlap,
    #[error("step {step:?} and trace resolution {resolution:?} do not divide each other")]
    Step { step: TimeDelta, resolution: TimeDelta },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("writing records: {0}")]
    Output(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    CcEfficiency,
    CcPerformance,
    VerticalOnly,
    SuspendResume,
    CarbonAgnostic,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::CcEfficiency,
        PolicyKind::CcPerformance,
        PolicyKind::VerticalOnly,
        PolicyKind::SuspendResume,
        PolicyKind::CarbonAgnostic,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::CcEfficiency => "cc-efficiency",
            PolicyKind::CcPerformance => "cc-performance",
            PolicyKind::VerticalOnly => "vertical-only",
            PolicyKind::SuspendResume => "suspend-resume",
            PolicyKind::CarbonAgnostic => "carbon-agnostic",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown policy `{0}`; expected one of cc-efficiency, cc-performance, vertical-only, suspend-resume, carbon-agnostic")]
pub struct UnknownPolicy(pub String);

impl FromStr for PolicyKind {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.label() == s.trim())
            .ok_or_else(|| UnknownPolicy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MigrationMode {
    #[default]
    StopAndCopy,
    /// No downtime; the source server stays powered for the transfer.
    Live,
}

/// Transfer time affine in the container's memory footprint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MigrationModel {
    pub c0_s: f64,
    pub c1_s_per_gb: f64,
    pub mode: MigrationMode,
}

impl Default for MigrationModel {
    fn default() -> Self {
        MigrationModel {
            c0_s: 10.0,
            c1_s_per_gb: 15.0,
            mode: MigrationMode::StopAndCopy,
        }
    }
}

impl MigrationModel {
    /// Seconds needed to move a container of `memory_gb`.
    pub fn transfer_s(&self, memory_gb: f64) -> f64 {
        self.c0_s + self.c1_s_per_gb * memory_gb
    }

    /// Seconds the container is down; zero for live migration.
    pub fn downtime_s(&self, memory_gb: f64) -> f64 {
        match self.mode {
            MigrationMode::StopAndCopy => self.transfer_s(memory_gb),
            MigrationMode::Live => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub step: TimeDelta,
    pub fleet: Fleet,
    pub container: ContainerConfig,
    pub policy_kind: PolicyKind,
    pub migration: MigrationModel,
    pub demand_scale: f64,
    /// Per-server probability that the server can be provisioned at a step.
    pub availability: BTreeMap<String, f64>,
    pub seed: u64,
    pub suspend_baseload_attributed: bool,
}

impl SimConfig {
    /// Standard fleet, 5-minute steps, default migration model.
    pub fn new(container: ContainerConfig, policy_kind: PolicyKind) -> Self {
        SimConfig {
            step: TimeDelta::minutes(5),
            fleet: Fleet::standard(),
            container,
            policy_kind,
            migration: MigrationModel::default(),
            demand_scale: 1.0,
            availability: BTreeMap::new(),
            seed: 0,
            suspend_baseload_attributed: true,
        }
    }

    /// Same run with another policy and target.
    pub fn with_policy(&self, kind: PolicyKind, c_target: f64) -> Self {
        let mut cfg = self.clone();
        cfg.policy_kind = kind;
        cfg.container.c_target = c_target;
        cfg.container.variant = match kind {
            PolicyKind::CcPerformance => policy::Variant::Performance,
            _ => policy::Variant::Efficiency,
        };
        cfg
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.step <= TimeDelta::zero() {
            return Err(SimError::Config("step must be positive".into()));
        }
        self.container
            .validate()
            .map_err(|e| SimError::Config(e.to_string()))?;
        if !(self.demand_scale.is_finite() && self.demand_scale > 0.0) {
            return Err(SimError::Config("demand_scale must be > 0".into()));
        }
        let m = &self.migration;
        if !(m.c0_s.is_finite() && m.c0_s >= 0.0 && m.c1_s_per_gb.is_finite() && m.c1_s_per_gb >= 0.0) {
            return Err(SimError::Config("migration coefficients must be >= 0".into()));
        }
        for (id, p) in &self.availability {
            if self.fleet.get(id).is_none() {
                return Err(SimError::Config(format!("availability names unknown server `{id}`")));
            }
            if !(0.0..=1.0).contains(p) {
                return Err(SimError::Config(format!("availability of `{id}` is {p}, not in [0, 1]")));
            }
        }
        Ok(())
    }

    fn step_s(&self) -> f64 {
        self.step.num_milliseconds() as f64 / 1000.0
    }

    /// Whether `server_id` can be provisioned at `step_index`.
    pub fn provision(&self, server_id: &str, step_index: u64) -> Result<bool, SimError> {
        let index = self
            .fleet
            .index_of(server_id)
            .ok_or_else(|| SimError::Config(format!("unknown server `{server_id}`")))?;
        let p = self.availability.get(server_id).copied().unwrap_or(1.0);
        Ok(provision(self.seed, step_index, index, p))
    }
}

/// Seeded Bernoulli draw, a pure function of `(seed, step, server)`.
pub fn provision(seed: u64, step_index: u64, server_index: usize, probability: f64) -> bool {
    if probability >= 1.0 {
        return true;
    }
    if probability <= 0.0 {
        return false;
    }
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&step_index.to_le_bytes());
    key[16..24].copy_from_slice(&(server_index as u64).to_le_bytes());
    key[24..].copy_from_slice(b"avail\0\0\0");
    ChaCha8Rng::from_seed(key).random::<f64>() < probability
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: DateTime<Utc>,
    pub demand: f64,
    /// The monitor's demand estimate the policy acted on.
    pub demand_estimate: f64,
    pub server_id: String,
    pub capacity_multiple: f64,
    pub quota: f64,
    pub cores: f64,
    pub status: Status,
    pub utilization: f64,
    pub power_w: f64,
    pub intensity: f64,
    pub emissions_rate_g_per_hr: f64,
    pub target_g_per_hr: f64,
    pub granted: f64,
    pub throttle_baseline_units: f64,
    pub downtime_s: f64,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub job_id: String,
    pub region: String,
    pub policy_kind: PolicyKind,
    pub c_target: f64,
    pub step: TimeDelta,
    pub suspend_baseload_attributed: bool,
    pub records: Vec<StepRecord>,
}

impl SimResult {
    pub fn actions(&self) -> impl Iterator<Item = &Action> {
        self.records.iter().map(|r| &r.action)
    }

    pub fn migration_count(&self) -> usize {
        self.actions().filter(|a| a.is_migration()).count()
    }
}

pub const RECORDS_HEADER: [&str; 16] = [
    "t",
    "demand",
    "server_id",
    "capacity_multiple",
    "quota",
    "cores",
    "status",
    "utilization",
    "power_w",
    "intensity",
    "emissions_g_per_hr",
    "target_g_per_hr",
    "throttle",
    "downtime_s",
    "action",
    "reason",
];

pub fn write_records_csv<W: Write>(result: &SimResult, out: W) -> Result<(), SimError> {
    let err = |e: csv::Error| SimError::Output(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORDS_HEADER).map_err(err)?;
    for r in &result.records {
        w.write_record([
            r.t.to_rfc3339_opts(SecondsFormat::Secs, true),
            r.demand.to_string(),
            r.server_id.clone(),
            r.capacity_multiple.to_string(),
            r.quota.to_string(),
            r.cores.to_string(),
            r.status.label().to_string(),
            r.utilization.to_string(),
            r.power_w.to_string(),
            r.intensity.to_string(),
            r.emissions_rate_g_per_hr.to_string(),
            r.target_g_per_hr.to_string(),
            r.throttle_baseline_units.to_string(),
            r.downtime_s.to_string(),
            r.action.to_string(),
            r.action.reason.clone(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| SimError::Output(e.to_string()))
}

/// Carbon-agnostic step: the baseline server at full quota.
pub fn baseline_carbon_agnostic(demand: f64, intensity: f64, baseline: &ServerSpec) -> (crate::Projection, f64) {
    let p = baseline.project_unchecked(demand, 1.0);
    let e = emissions_rate(p.power_w, intensity);
    (p, e)
}

/// Suspend-resume decision: run at full quota on the baseline server while
/// its projected emissions stay at or below the target, suspend otherwise.
pub fn baseline_suspend_resume(demand: f64, intensity: f64, baseline: &ServerSpec, c_target: f64) -> bool {
    let (_, e) = baseline_carbon_agnostic(demand, intensity, baseline);
    e <= c_target
}

/// Vertical scaling and suspension without migration.
pub fn baseline_vertical_only(
    cfg: &ContainerConfig,
    state: &ContainerState,
    inputs: &PolicyInputs,
) -> Result<Action, PolicyError> {
    policy::step_vertical_only(cfg, state, inputs)
}

fn suspend_resume_action(state: &ContainerState, run: bool) -> Action {
    match (state.status, run) {
        (Status::Running, false) => Action {
            kind: ActionKind::Suspend,
            reason: "projected emissions above target".into(),
        },
        (Status::Suspended, true) => Action {
            kind: ActionKind::Resume { quota: 1.0 },
            reason: "projected emissions at or below target".into(),
        },
        _ => Action::noop("no change"),
    }
}

/// Overlap of the two traces as a step grid.
fn grid(workload: &WorkloadTrace, span: Option<(DateTime<Utc>, DateTime<Utc>)>, step: TimeDelta) -> Result<(DateTime<Utc>, usize), SimError> {
    let (mut start, mut end) = (workload.start(), workload.end());
    if let Some((s, e)) = span {
        start = start.max(s);
        end = end.min(e);
    }
    if end <= start {
        return Err(SimError::NoOverlap);
    }
    let n = ((end - start).num_milliseconds() / step.num_milliseconds()) as usize;
    if n == 0 {
        return Err(SimError::NoOverlap);
    }
    Ok((start, n))
}

fn check_divides(step: TimeDelta, resolution: TimeDelta) -> Result<(), SimError> {
    let (a, b) = (step.num_milliseconds(), resolution.num_milliseconds());
    if a > 0 && b > 0 && (a % b == 0 || b % a == 0) {
        Ok(())
    } else {
        Err(SimError::Step { step, resolution })
    }
}

fn cpu_at(workload: &WorkloadTrace, t: DateTime<Utc>) -> f64 {
    let idx = (t - workload.start()).num_milliseconds() / workload.resolution.num_milliseconds();
    workload.samples[idx as usize].cpu_avg
}

/// Replays `workload` against a recorded carbon trace.
pub fn run(workload: &WorkloadTrace, carbon: &CarbonTrace, cfg: &SimConfig) -> Result<SimResult, SimError> {
    check_divides(cfg.step, carbon.resolution)?;
    let provider = CarbonProvider::from_trace(carbon.clone());
    run_inner(workload, &provider, Some((carbon.start(), carbon.end())), &carbon.region, cfg)
}

/// Replays `workload` against any provider; a live provider is read once per
/// step.
pub fn run_with_provider(
    workload: &WorkloadTrace,
    provider: &CarbonProvider,
    region: &str,
    cfg: &SimConfig,
) -> Result<SimResult, SimError> {
    let span = match provider {
        CarbonProvider::Trace(p) => {
            check_divides(cfg.step, p.trace().resolution)?;
            Some((p.trace().start(), p.trace().end()))
        }
        CarbonProvider::Live(_) => None,
    };
    run_inner(workload, provider, span, region, cfg)
}

/// A migration whose transfer continues past the step it started in.
#[derive(Debug, Clone, Copy)]
struct Transfer {
    from: usize,
    remaining_s: f64,
}

fn run_inner(
    workload: &WorkloadTrace,
    provider: &CarbonProvider,
    span: Option<(DateTime<Utc>, DateTime<Utc>)>,
    region: &str,
    cfg: &SimConfig,
) -> Result<SimResult, SimError> {
    cfg.validate()?;
    check_divides(cfg.step, workload.resolution)?;
    let (start, n) = grid(workload, span, cfg.step)?;
    let fleet = &cfg.fleet;
    let servers = fleet.servers();
    let step_s = cfg.step_s();
    let live = cfg.migration.mode == MigrationMode::Live;
    let probabilities: Vec<f64> = servers
        .iter()
        .map(|s| cfg.availability.get(&s.id).copied().unwrap_or(1.0))
        .collect();
    let rules = match cfg.policy_kind {
        PolicyKind::CcEfficiency => Some(Rules::Efficiency),
        PolicyKind::CcPerformance => Some(Rules::Performance),
        PolicyKind::VerticalOnly => Some(Rules::VerticalOnly),
        PolicyKind::SuspendResume | PolicyKind::CarbonAgnostic => None,
    };

    let mut state = ContainerState::new(fleet.baseline().id.clone());
    let mut current = fleet.baseline_index();
    let mut transfer: Option<Transfer> = None;
    let mut estimate = 0.0;
    let mut records = Vec::with_capacity(n);
    let mut available = vec![true; servers.len()];

    for k in 0..n {
        let t = start + cfg.step * k as i32;
        let demand = cpu_at(workload, t) * cfg.demand_scale;
        let intensity = provider.intensity_at(t)?;

        let observable = state.status == Status::Running && transfer.is_none() && state.quota > 0.0;
        if k == 0 {
            estimate = demand;
        } else if observable {
            let server = &servers[current];
            let u = server.project_unchecked(demand, state.quota).utilization;
            estimate = server.infer_demand(u, state.quota).map_err(|e| SimError::Config(e.to_string()))?;
        }

        for (i, slot) in available.iter_mut().enumerate() {
            *slot = i == current || provision(cfg.seed, k as u64, i, probabilities[i]);
        }

        let action = if transfer.is_some() {
            Action::noop("migration in progress")
        } else {
            let inputs = PolicyInputs::new(estimate, intensity, t, fleet).with_availability(&available);
            match (rules, cfg.policy_kind) {
                (Some(rules), _) => policy::decide(&cfg.container, &state, &inputs, rules)?,
                (None, PolicyKind::SuspendResume) => {
                    let run = baseline_suspend_resume(estimate, intensity, fleet.baseline(), cfg.container.c_target);
                    suspend_resume_action(&state, run)
                }
                (None, _) => Action::noop("carbon-agnostic"),
            }
        };

        // Seconds of this step the container is down, and seconds the source
        // server is kept powered for a transfer.
        let mut down_s = 0.0;
        let mut source_s = 0.0;
        let mut source_base_w = 0.0;
        if let Some(tr) = transfer.take() {
            let here = tr.remaining_s.min(step_s);
            source_s = here;
            if !live {
                down_s = here;
            }
            source_base_w = servers[tr.from].base_power_w;
            if tr.remaining_s > step_s {
                let remaining_s = tr.remaining_s - step_s;
                transfer = Some(Transfer {
                    from: tr.from,
                    remaining_s,
                });
                if !live {
                    state.status = Status::Migrating {
                        remaining: TimeDelta::milliseconds((remaining_s * 1000.0).round() as i64),
                    };
                }
            } else if !live {
                state.status = Status::Running;
            }
        }

        match &action.kind {
            ActionKind::NoOp => {}
            ActionKind::SetQuota { quota } => state.quota = *quota,
            ActionKind::Suspend => {
                state.status = Status::Suspended;
                state.quota = 0.0;
            }
            ActionKind::Resume { quota } => {
                state.status = Status::Running;
                state.quota = *quota;
            }
            ActionKind::MigrateTo { server_id, quota } => {
                let to = fleet
                    .index_of(server_id)
                    .ok_or_else(|| PolicyError::UnknownServer(server_id.clone()))?;
                let from = current;
                let total_s = cfg.migration.transfer_s(cfg.container.memory_gb);
                let here = total_s.min(step_s);
                source_s = here;
                source_base_w = servers[from].base_power_w;
                if !live {
                    down_s = here;
                }
                current = to;
                state.server_id = server_id.clone();
                state.quota = *quota;
                state.status = Status::Running;
                state.last_migration_at = Some(t);
                if total_s > step_s {
                    let remaining_s = total_s - step_s;
                    transfer = Some(Transfer { from, remaining_s });
                    if !live {
                        state.status = Status::Migrating {
                            remaining: TimeDelta::milliseconds((remaining_s * 1000.0).round() as i64),
                        };
                    }
                }
            }
        }

        let server = &servers[current];
        let f_down = down_s / step_s;
        let f_source = if live { source_s / step_s } else { 0.0 };
        let (run_util, run_power, run_granted) = match state.status {
            Status::Suspended => {
                let p = if cfg.suspend_baseload_attributed { server.base_power_w } else { 0.0 };
                (0.0, p, 0.0)
            }
            _ => {
                let p = server.project_unchecked(demand, state.quota);
                (p.utilization, p.power_w, p.granted)
            }
        };
        let down_power = if live { 0.0 } else { source_base_w };
        let power_w = f_down * down_power + (1.0 - f_down) * run_power + f_source * source_base_w;
        let granted = (1.0 - f_down) * run_granted;
        let status = if f_down >= 1.0 {
            Status::Migrating {
                remaining: TimeDelta::milliseconds((transfer.map_or(0.0, |t| t.remaining_s) * 1000.0).round() as i64),
            }
        } else {
            state.status
        };
        records.push(StepRecord {
            t,
            demand,
            demand_estimate: estimate,
            server_id: server.id.clone(),
            capacity_multiple: server.capacity_multiple,
            quota: state.quota,
            cores: state.quota * f64::from(server.cores),
            status,
            utilization: (1.0 - f_down) * run_util,
            power_w,
            intensity,
            emissions_rate_g_per_hr: emissions_rate(power_w, intensity),
            target_g_per_hr: cfg.container.c_target,
            granted,
            throttle_baseline_units: (demand - granted).max(0.0),
            downtime_s: down_s,
            action,
        });
    }

    Ok(SimResult {
        job_id: workload.job_id.clone(),
        region: region.to_string(),
        policy_kind: cfg.policy_kind,
        c_target: cfg.container.c_target,
        step: cfg.step,
        suspend_baseload_attributed: cfg.suspend_baseload_attributed,
        records,
    })
}
