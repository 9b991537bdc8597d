//! The carbon-target enforcement policy.
//!
//! Each monitoring interval the policy compares the container's projected
//! emissions on its current server with the trigger bound `(1 − ε)·C_target`
//! and picks one action: change the quota, migrate, suspend or resume.
//!
//! Quotas act as power caps. The quota a container may hold on a server is
//! the largest one whose fully used allocation stays under the bound, so a
//! burst between two intervals cannot push emissions past the target.
//!
//! Decision order:
//!
//! 1. At or over the bound, or throttled by a carbon-imposed cap: scale the
//!    quota down to the cap, unless the next smaller server serves the demand
//!    with no more throttling at lower emissions, in which case migrate there.
//!    When even a zero quota on the current server exceeds the bound, migrate
//!    straight to the largest smaller server that can meet it.
//! 2. Zero cap on the smallest reachable server: suspend.
//! 3. Suspended: resume once the cap allows a non-zero quota.
//! 4. Below the bound: lower a quota that exceeds the cap; raise the quota of
//!    a throttled container up to the cap; a container throttled at full
//!    quota moves to the smallest larger server that relieves the throttling.
//! 5. Variant rules, then no-op.
//!
//! The efficiency variant additionally moves an unthrottled container to the
//! smallest smaller server that still serves its demand without throttling.
//! The performance variant raises the quota to the cap regardless of demand
//! and moves to the largest larger server that stays under the bound without
//! throttling more.

use std::fmt;

use chrono::{DateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fleet::{Fleet, Projection, ServerSpec};

/// Slack for quota and throttle comparisons.
const TOL: f64 = 1e-12;
/// Relative slack for "at the bound".
const BOUND_RTOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("invalid container config: {0}")]
    Config(String),
    #[error("server `{0}` is not in the fleet")]
    UnknownServer(String),
    #[error("invalid policy inputs: {0}")]
    Inputs(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Efficiency,
    Performance,
}

/// How quotas are granted on a server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QuotaMode {
    /// Whole cores, like a cgroup cpuset.
    #[default]
    Cores,
    /// Any fraction, like a CFS time-slice quota.
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainerConfig {
    /// g·CO₂e/hr
    pub c_target: f64,
    /// Fraction of `c_target` below it at which enforcement starts.
    pub epsilon: f64,
    pub variant: Variant,
    pub memory_gb: f64,
    /// Minimum time between two migrations.
    pub min_dwell: TimeDelta,
    pub quota_mode: QuotaMode,
}

impl ContainerConfig {
    pub const DEFAULT_EPSILON: f64 = 0.05;

    pub fn new(c_target: f64, variant: Variant) -> Result<Self, PolicyError> {
        let cfg = ContainerConfig {
            c_target,
            epsilon: Self::DEFAULT_EPSILON,
            variant,
            memory_gb: 1.0,
            min_dwell: TimeDelta::minutes(10),
            quota_mode: QuotaMode::Cores,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.c_target.is_finite() && self.c_target > 0.0) {
            return Err(PolicyError::Config(format!("c_target {} must be > 0", self.c_target)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(PolicyError::Config(format!("epsilon {} must be in [0, 1)", self.epsilon)));
        }
        if !(self.memory_gb.is_finite() && self.memory_gb >= 0.0) {
            return Err(PolicyError::Config("memory_gb must be >= 0".into()));
        }
        if self.min_dwell < TimeDelta::zero() {
            return Err(PolicyError::Config("min_dwell must be >= 0".into()));
        }
        Ok(())
    }

    /// Emissions rate at which enforcement triggers.
    pub fn bound(&self) -> f64 {
        (1.0 - self.epsilon) * self.c_target
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "status")]
pub enum Status {
    Running,
    Suspended,
    Migrating {
        #[serde(skip)]
        remaining: TimeDelta,
    },
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::Suspended => "suspended",
            Status::Migrating { .. } => "migrating",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainerState {
    pub server_id: String,
    pub quota: f64,
    pub status: Status,
    pub last_migration_at: Option<DateTime<Utc>>,
}

impl ContainerState {
    /// Freshly registered: running on `server_id` with its full capacity.
    pub fn new(server_id: impl Into<String>) -> Self {
        ContainerState {
            server_id: server_id.into(),
            quota: 1.0,
            status: Status::Running,
            last_migration_at: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ActionKind {
    NoOp,
    SetQuota { quota: f64 },
    /// Migrate and run at `quota` on arrival.
    MigrateTo { server_id: String, quota: f64 },
    Suspend,
    Resume { quota: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Action {
    pub kind: ActionKind,
    pub reason: String,
}

impl Action {
    fn new(kind: ActionKind, reason: impl Into<String>) -> Self {
        Action {
            kind,
            reason: reason.into(),
        }
    }

    pub fn noop(reason: impl Into<String>) -> Self {
        Self::new(ActionKind::NoOp, reason)
    }

    pub fn is_migration(&self) -> bool {
        matches!(self.kind, ActionKind::MigrateTo { .. })
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ActionKind::NoOp => write!(f, "noop"),
            ActionKind::SetQuota { quota } => write!(f, "set-quota({quota})"),
            ActionKind::MigrateTo { server_id, quota } => write!(f, "migrate-to({server_id},{quota})"),
            ActionKind::Suspend => write!(f, "suspend"),
            ActionKind::Resume { quota } => write!(f, "resume({quota})"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PolicyInputs<'a> {
    /// Estimated demand in baseline units.
    pub demand: f64,
    /// g·CO₂e/kWh
    pub intensity: f64,
    pub now: DateTime<Utc>,
    pub fleet: &'a Fleet,
    /// Per-server availability in fleet order; empty means all available.
    pub availability: &'a [bool],
}

impl<'a> PolicyInputs<'a> {
    pub fn new(demand: f64, intensity: f64, now: DateTime<Utc>, fleet: &'a Fleet) -> Self {
        PolicyInputs {
            demand,
            intensity,
            now,
            fleet,
            availability: &[],
        }
    }

    pub fn with_availability(mut self, availability: &'a [bool]) -> Self {
        self.availability = availability;
        self
    }
}

/// g·CO₂e/hr for a power draw at a given grid intensity.
pub fn emissions_rate(power_w: f64, intensity: f64) -> f64 {
    power_w / 1000.0 * intensity
}

/// Largest quota in `[0, 1]` whose fully used allocation keeps the server's
/// emissions at or below `(1 − ε)·c_target`. Zero when the baseload alone is
/// over the bound.
pub fn max_quota_for_target(server: &ServerSpec, intensity: f64, c_target: f64, epsilon: f64) -> f64 {
    if intensity <= 0.0 {
        return 1.0;
    }
    let budget_w = (1.0 - epsilon) * c_target * 1000.0 / intensity;
    if budget_w <= server.base_power_w {
        return 0.0;
    }
    ((budget_w - server.base_power_w) / (server.peak_power_w - server.base_power_w)).clamp(0.0, 1.0)
}

/// Which rule set to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rules {
    General,
    Efficiency,
    Performance,
    /// General rules with every migration disabled.
    VerticalOnly,
}

impl Rules {
    fn migrates(self) -> bool {
        self != Rules::VerticalOnly
    }
}

pub fn step_general(cfg: &ContainerConfig, state: &ContainerState, inputs: &PolicyInputs) -> Result<Action, PolicyError> {
    decide(cfg, state, inputs, Rules::General)
}

pub fn step_efficiency(
    cfg: &ContainerConfig,
    state: &ContainerState,
    inputs: &PolicyInputs,
) -> Result<Action, PolicyError> {
    decide(cfg, state, inputs, Rules::Efficiency)
}

pub fn step_performance(
    cfg: &ContainerConfig,
    state: &ContainerState,
    inputs: &PolicyInputs,
) -> Result<Action, PolicyError> {
    decide(cfg, state, inputs, Rules::Performance)
}

/// Vertical scaling and suspend/resume only.
pub fn step_vertical_only(
    cfg: &ContainerConfig,
    state: &ContainerState,
    inputs: &PolicyInputs,
) -> Result<Action, PolicyError> {
    decide(cfg, state, inputs, Rules::VerticalOnly)
}

/// The variant's own rule set.
pub fn step(cfg: &ContainerConfig, state: &ContainerState, inputs: &PolicyInputs) -> Result<Action, PolicyError> {
    let rules = match cfg.variant {
        Variant::Efficiency => Rules::Efficiency,
        Variant::Performance => Rules::Performance,
    };
    decide(cfg, state, inputs, rules)
}

/// A server evaluated at the current demand under its carbon cap.
struct Candidate<'a> {
    server: &'a ServerSpec,
    cap: f64,
    feasible: bool,
    at_cap: Projection,
    emissions: f64,
}

struct Ctx<'a> {
    cfg: &'a ContainerConfig,
    inputs: &'a PolicyInputs<'a>,
    bound: f64,
}

impl<'a> Ctx<'a> {
    fn cap(&self, server: &ServerSpec) -> f64 {
        let q = max_quota_for_target(server, self.inputs.intensity, self.cfg.c_target, self.cfg.epsilon);
        match self.cfg.quota_mode {
            QuotaMode::Cores => server.floor_to_cores(q),
            QuotaMode::Continuous => q,
        }
    }

    fn emissions(&self, p: &Projection) -> f64 {
        emissions_rate(p.power_w, self.inputs.intensity)
    }

    fn candidate(&self, index: usize) -> Candidate<'a> {
        let server = &self.inputs.fleet.servers()[index];
        let cap = self.cap(server);
        let at_cap = server.project_unchecked(self.inputs.demand, cap);
        Candidate {
            server,
            cap,
            feasible: emissions_rate(server.base_power_w, self.inputs.intensity) <= self.bound,
            emissions: self.emissions(&at_cap),
            at_cap,
        }
    }

    fn available(&self, index: usize) -> bool {
        self.inputs.availability.is_empty() || self.inputs.availability[index]
    }

    /// Available servers strictly smaller than `current`, largest first.
    fn smaller(&self, current: usize) -> impl Iterator<Item = Candidate<'a>> + '_ {
        (0..current).rev().filter(|&j| self.available(j)).map(|j| self.candidate(j))
    }

    /// Available servers strictly larger than `current`, smallest first.
    fn larger(&self, current: usize) -> impl Iterator<Item = Candidate<'a>> + '_ {
        (current + 1..self.inputs.fleet.len())
            .filter(|&k| self.available(k))
            .map(|k| self.candidate(k))
    }
}

fn migrate(c: &Candidate, reason: String) -> Action {
    Action::new(
        ActionKind::MigrateTo {
            server_id: c.server.id.clone(),
            quota: c.cap,
        },
        reason,
    )
}

/// Applies `rules` to one monitoring interval.
pub fn decide(
    cfg: &ContainerConfig,
    state: &ContainerState,
    inputs: &PolicyInputs,
    rules: Rules,
) -> Result<Action, PolicyError> {
    cfg.validate()?;
    if !(inputs.demand.is_finite() && inputs.demand >= 0.0) {
        return Err(PolicyError::Inputs(format!("demand {}", inputs.demand)));
    }
    if !(inputs.intensity.is_finite() && inputs.intensity >= 0.0) {
        return Err(PolicyError::Inputs(format!("intensity {}", inputs.intensity)));
    }
    if !inputs.availability.is_empty() && inputs.availability.len() != inputs.fleet.len() {
        return Err(PolicyError::Inputs(format!(
            "availability has {} entries for {} servers",
            inputs.availability.len(),
            inputs.fleet.len()
        )));
    }
    let current = inputs
        .fleet
        .index_of(&state.server_id)
        .ok_or_else(|| PolicyError::UnknownServer(state.server_id.clone()))?;
    if !(0.0..=1.0).contains(&state.quota) {
        return Err(PolicyError::Inputs(format!("quota {}", state.quota)));
    }
    if let Status::Migrating { .. } = state.status {
        return Ok(Action::noop("migration in progress"));
    }

    let ctx = Ctx {
        cfg,
        inputs,
        bound: cfg.bound(),
    };
    let dwell_ok = state
        .last_migration_at
        .is_none_or(|at| inputs.now - at >= cfg.min_dwell);
    let can_migrate = rules.migrates() && dwell_ok;
    let here = ctx.candidate(current);

    // Largest smaller server that meets the bound, else the smallest one.
    let escape_down = || -> Option<Candidate> {
        let mut smallest = None;
        for c in ctx.smaller(current) {
            if c.feasible && c.cap > 0.0 {
                return Some(c);
            }
            smallest = Some(c);
        }
        smallest
    };

    if state.status == Status::Suspended {
        if here.cap > 0.0 {
            return Ok(Action::new(
                ActionKind::Resume { quota: here.cap },
                format!("carbon cap allows quota {:.3} again", here.cap),
            ));
        }
        if can_migrate {
            if let Some(c) = escape_down() {
                if c.feasible && c.cap > 0.0 {
                    let reason = format!("resume on {}, which meets the target", c.server.id);
                    return Ok(migrate(&c, reason));
                }
                if !here.feasible {
                    let reason = format!("move to {} for a lower baseload", c.server.id);
                    return Ok(migrate(&c, reason));
                }
            }
        }
        return Ok(Action::noop("suspended: target still unreachable"));
    }

    let now_proj = here.server.project_unchecked(inputs.demand, state.quota);
    let now_emissions = ctx.emissions(&now_proj);
    let throttled = now_proj.throttle_baseline_units > TOL;
    let at_bound = now_emissions >= ctx.bound * (1.0 - BOUND_RTOL);
    let carbon_capped = throttled && state.quota >= here.cap - TOL && here.cap < 1.0 - TOL;

    // Rule 1: enforcement.
    if at_bound || carbon_capped {
        if can_migrate {
            if !here.feasible {
                if let Some(c) = escape_down() {
                    let reason = format!(
                        "baseload on {} alone exceeds the bound; moving to {}",
                        here.server.id, c.server.id
                    );
                    return Ok(migrate(&c, reason));
                }
            } else if let Some(c) = ctx.smaller(current).next() {
                let less_throttle =
                    c.at_cap.throttle_baseline_units <= here.at_cap.throttle_baseline_units + TOL;
                if c.emissions < here.emissions && less_throttle {
                    let reason = format!(
                        "{} serves the demand at {:.2} g/h vs {:.2} g/h scaled down here",
                        c.server.id, c.emissions, here.emissions
                    );
                    return Ok(migrate(&c, reason));
                }
            }
        }
        // Rule 2.
        let smallest_reachable = !rules.migrates() || ctx.smaller(current).next().is_none();
        if here.cap <= 0.0 && smallest_reachable {
            return Ok(Action::new(ActionKind::Suspend, "fully throttled on the smallest reachable server"));
        }
        if (here.cap - state.quota).abs() > TOL {
            return Ok(Action::new(
                ActionKind::SetQuota { quota: here.cap },
                format!("scale to carbon-bounded quota {:.3}", here.cap),
            ));
        }
        return Ok(Action::noop("holding at carbon-bounded quota"));
    }

    // Rule 4: below the bound.
    if state.quota > here.cap + TOL {
        return Ok(Action::new(
            ActionKind::SetQuota { quota: here.cap },
            format!("lower quota ceiling to {:.3}", here.cap),
        ));
    }
    if state.quota < here.cap - TOL && (throttled || rules == Rules::Performance) {
        let why = if throttled { "throttled below target" } else { "reserve capacity" };
        return Ok(Action::new(
            ActionKind::SetQuota { quota: here.cap },
            format!("scale up to {:.3}: {why}", here.cap),
        ));
    }
    if !can_migrate {
        return Ok(Action::noop("no rule fired"));
    }
    if throttled {
        let mut best: Option<Candidate> = None;
        for c in ctx.larger(current) {
            if !c.feasible || c.cap <= 0.0 || c.emissions > ctx.bound {
                continue;
            }
            let thr = c.at_cap.throttle_baseline_units;
            if thr + TOL >= now_proj.throttle_baseline_units {
                continue;
            }
            let better = best
                .as_ref()
                .is_none_or(|b| thr < b.at_cap.throttle_baseline_units - TOL);
            if better {
                let done = thr <= TOL;
                best = Some(c);
                if done {
                    break;
                }
            }
        }
        if let Some(c) = best {
            let reason = format!("throttled at full quota; {} relieves it under target", c.server.id);
            return Ok(migrate(&c, reason));
        }
        return Ok(Action::noop("throttled; no larger server helps under target"));
    }
    match rules {
        Rules::Efficiency => {
            let mut pick = None;
            for c in ctx.smaller(current) {
                if c.at_cap.throttle_baseline_units <= TOL && c.at_cap.power_w < now_proj.power_w {
                    pick = Some(c);
                }
            }
            if let Some(c) = pick {
                let reason = format!("underutilized; {} serves the demand with less power", c.server.id);
                return Ok(migrate(&c, reason));
            }
        }
        Rules::Performance => {
            let mut pick = None;
            for c in ctx.larger(current) {
                let no_worse = c.at_cap.throttle_baseline_units <= now_proj.throttle_baseline_units + TOL;
                if c.feasible && no_worse && c.emissions < ctx.bound * (1.0 - BOUND_RTOL) {
                    pick = Some(c);
                }
            }
            if let Some(c) = pick {
                let reason = format!("{} fits under the target; keep reserve capacity", c.server.id);
                return Ok(migrate(&c, reason));
            }
        }
        Rules::General | Rules::VerticalOnly => {}
    }
    Ok(Action::noop("no rule fired"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn now() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2021, 6, 1, 12, 0, 0).unwrap()
    }

    fn big_small() -> Fleet {
        Fleet::new(
            vec![
                ServerSpec::new("small", 1.0, 8, 50.0, 100.0, 16.0).unwrap(),
                ServerSpec::new("big", 2.0, 16, 100.0, 200.0, 32.0).unwrap(),
            ],
            "small",
        )
        .unwrap()
    }

    fn cfg(c_target: f64, epsilon: f64, variant: Variant) -> ContainerConfig {
        ContainerConfig {
            epsilon,
            quota_mode: QuotaMode::Continuous,
            ..ContainerConfig::new(c_target, variant).unwrap()
        }
    }

    #[test]
    fn emissions_rate_examples() {
        assert!((emissions_rate(150.0, 300.91) - 45.1365).abs() < 1e-12);
        assert_eq!(emissions_rate(123.0, 0.0), 0.0);
        assert_eq!(emissions_rate(200.0, 500.0), 100.0);
    }

    #[test]
    fn max_quota_examples() {
        let s = ServerSpec::new("b", 1.0, 8, 100.0, 200.0, 16.0).unwrap();
        assert_eq!(max_quota_for_target(&s, 500.0, 80.0, 0.0), 0.6);
        assert_eq!(max_quota_for_target(&s, 0.0, 80.0, 0.0), 1.0);
        assert_eq!(max_quota_for_target(&s, 1000.0, 80.0, 0.0), 0.0);
        assert_eq!(max_quota_for_target(&s, 100.0, 80.0, 0.0), 1.0);
    }

    #[test]
    fn big_to_small_worked_example() {
        // Intensity 1000 g/kWh, bound 150 g/h: big capped at 50% draws 150 W.
        let fleet = big_small();
        let cfg = cfg(150.0, 0.0, Variant::Efficiency);
        let state = ContainerState {
            server_id: "big".into(),
            quota: 0.5,
            status: Status::Running,
            last_migration_at: None,
        };
        let inputs = PolicyInputs::new(1.0, 1000.0, now(), &fleet);
        let big = fleet.get("big").unwrap();
        let small = fleet.get("small").unwrap();
        assert_eq!(big.project(1.0, 0.5).unwrap().power_w, 150.0);
        assert_eq!(small.project(1.0, 1.0).unwrap().power_w, 100.0);
        for rules in [Rules::General, Rules::Efficiency, Rules::Performance] {
            let a = decide(&cfg, &state, &inputs, rules).unwrap();
            assert_eq!(
                a.kind,
                ActionKind::MigrateTo {
                    server_id: "small".into(),
                    quota: 1.0
                },
                "{rules:?}"
            );
        }
        let vo = step_vertical_only(&cfg, &state, &inputs).unwrap();
        assert_eq!(vo.kind, ActionKind::NoOp);
    }

    #[test]
    fn far_below_target_is_noop() {
        let fleet = Fleet::standard();
        let cfg = cfg(500.0, 0.05, Variant::Efficiency);
        let state = ContainerState::new("1x");
        let inputs = PolicyInputs::new(0.9, 100.0, now(), &fleet);
        assert_eq!(step_general(&cfg, &state, &inputs).unwrap().kind, ActionKind::NoOp);
    }

    #[test]
    fn suspends_when_smallest_baseload_exceeds_bound() {
        let fleet = Fleet::standard();
        let smallest = &fleet.servers()[0];
        // 25 W baseload at 1000 g/kWh is 25 g/h; the bound is 19 g/h.
        let cfg = cfg(20.0, 0.05, Variant::Efficiency);
        assert!(emissions_rate(smallest.base_power_w, 1000.0) > cfg.bound());
        let state = ContainerState {
            server_id: smallest.id.clone(),
            quota: 1.0,
            status: Status::Running,
            last_migration_at: None,
        };
        let inputs = PolicyInputs::new(0.2, 1000.0, now(), &fleet);
        assert_eq!(step_general(&cfg, &state, &inputs).unwrap().kind, ActionKind::Suspend);
    }

    #[test]
    fn vertical_only_scales_then_suspends_then_resumes() {
        let fleet = big_small();
        let cfg = cfg(150.0, 0.0, Variant::Efficiency);
        let mut state = ContainerState::new("big");
        state.quota = 1.0;
        let inputs = PolicyInputs::new(1.0, 1000.0, now(), &fleet);
        assert_eq!(
            step_vertical_only(&cfg, &state, &inputs).unwrap().kind,
            ActionKind::SetQuota { quota: 0.5 }
        );
        state.quota = 0.0;
        let hot = PolicyInputs::new(1.0, 2000.0, now(), &fleet);
        assert_eq!(step_vertical_only(&cfg, &state, &hot).unwrap().kind, ActionKind::Suspend);
        state.status = Status::Suspended;
        assert_eq!(
            step_vertical_only(&cfg, &state, &inputs).unwrap().kind,
            ActionKind::Resume { quota: 0.5 }
        );
    }

    #[test]
    fn efficiency_moves_down_when_underutilized() {
        let fleet = Fleet::proportional(&[1.0, 2.0], 8, 100.0, 200.0, 32.0);
        let cfg = cfg(1000.0, 0.05, Variant::Efficiency);
        let state = ContainerState::new("2x");
        let inputs = PolicyInputs::new(0.5, 300.0, now(), &fleet);
        let a = step_efficiency(&cfg, &state, &inputs).unwrap();
        assert_eq!(
            a.kind,
            ActionKind::MigrateTo {
                server_id: "1x".into(),
                quota: 1.0
            }
        );
        // General and performance rules do not move an unthrottled container down.
        assert_eq!(step_general(&cfg, &state, &inputs).unwrap().kind, ActionKind::NoOp);
        assert_eq!(step_performance(&cfg, &state, &inputs).unwrap().kind, ActionKind::NoOp);
    }

    #[test]
    fn efficiency_keeps_a_full_server() {
        let fleet = Fleet::standard();
        let cfg = cfg(1000.0, 0.05, Variant::Efficiency);
        let state = ContainerState::new("1x");
        let inputs = PolicyInputs::new(1.0, 300.0, now(), &fleet);
        assert_eq!(step_efficiency(&cfg, &state, &inputs).unwrap().kind, ActionKind::NoOp);
        let smallest = ContainerState::new("0.25x");
        let inputs = PolicyInputs::new(0.1, 300.0, now(), &fleet);
        assert_eq!(step_efficiency(&cfg, &smallest, &inputs).unwrap().kind, ActionKind::NoOp);
    }

    #[test]
    fn performance_moves_idle_container_up() {
        let fleet = Fleet::standard();
        // 4x baseload 400 W at 100 g/kWh is 40 g/h, under the 95 g/h bound.
        let cfg = cfg(100.0, 0.05, Variant::Performance);
        let state = ContainerState::new("1x");
        let inputs = PolicyInputs::new(0.05, 100.0, now(), &fleet);
        let a = step_performance(&cfg, &state, &inputs).unwrap();
        match a.kind {
            ActionKind::MigrateTo { server_id, quota } => {
                assert_eq!(server_id, "4x");
                assert!(quota > 0.0);
            }
            other => panic!("expected migration, got {other:?}"),
        }
    }

    #[test]
    fn performance_scales_down_on_spike_like_general() {
        let fleet = big_small();
        let cfg = cfg(150.0, 0.0, Variant::Performance);
        let state = ContainerState::new("big");
        let inputs = PolicyInputs::new(1.0, 1000.0, now(), &fleet);
        assert_eq!(
            step_performance(&cfg, &state, &inputs).unwrap(),
            step_general(&cfg, &state, &inputs).unwrap()
        );
    }

    #[test]
    fn performance_does_not_move_down_when_demand_drops() {
        let fleet = Fleet::standard();
        let cfg = cfg(1000.0, 0.05, Variant::Performance);
        let state = ContainerState::new("4x");
        let inputs = PolicyInputs::new(0.05, 100.0, now(), &fleet);
        assert_eq!(step_performance(&cfg, &state, &inputs).unwrap().kind, ActionKind::NoOp);
    }

    #[test]
    fn dwell_blocks_back_to_back_migrations() {
        let fleet = Fleet::proportional(&[1.0, 2.0], 8, 100.0, 200.0, 32.0);
        let cfg = cfg(1000.0, 0.05, Variant::Efficiency);
        let mut state = ContainerState::new("2x");
        state.last_migration_at = Some(now() - TimeDelta::minutes(5));
        let inputs = PolicyInputs::new(0.5, 300.0, now(), &fleet);
        assert_eq!(step_efficiency(&cfg, &state, &inputs).unwrap().kind, ActionKind::NoOp);
        state.last_migration_at = Some(now() - TimeDelta::minutes(10));
        assert!(step_efficiency(&cfg, &state, &inputs).unwrap().is_migration());
    }

    #[test]
    fn unavailable_candidate_is_skipped() {
        let fleet = Fleet::standard();
        let cfg = cfg(1000.0, 0.05, Variant::Efficiency);
        let state = ContainerState::new("1x");
        let inputs = PolicyInputs::new(0.2, 300.0, now(), &fleet);
        let all = step_efficiency(&cfg, &state, &inputs).unwrap();
        assert_eq!(
            all.kind,
            ActionKind::MigrateTo {
                server_id: "0.25x".into(),
                quota: 1.0
            }
        );
        let avail = [false, true, true, true, true];
        let a = step_efficiency(&cfg, &state, &inputs.with_availability(&avail)).unwrap();
        assert_eq!(
            a.kind,
            ActionKind::MigrateTo {
                server_id: "0.5x".into(),
                quota: 1.0
            }
        );
    }

    #[test]
    fn throttled_at_full_quota_moves_up() {
        let fleet = Fleet::standard();
        let cfg = cfg(1000.0, 0.05, Variant::Efficiency);
        let state = ContainerState::new("1x");
        let inputs = PolicyInputs::new(1.6, 300.0, now(), &fleet);
        let a = step_general(&cfg, &state, &inputs).unwrap();
        assert_eq!(
            a.kind,
            ActionKind::MigrateTo {
                server_id: "2x".into(),
                quota: 1.0
            }
        );
    }

    #[test]
    fn infeasible_server_escapes_several_sizes() {
        let fleet = Fleet::standard();
        // Bound 47.5 g/h at 500 g/kWh allows 95 W: only 0.5x and below.
        let cfg = cfg(50.0, 0.05, Variant::Efficiency);
        let state = ContainerState::new("4x");
        let inputs = PolicyInputs::new(0.3, 500.0, now(), &fleet);
        match step_general(&cfg, &state, &inputs).unwrap().kind {
            ActionKind::MigrateTo { server_id, .. } => assert_eq!(server_id, "0.5x"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cores_mode_rounds_quota_down() {
        let fleet = Fleet::standard();
        let cfg = ContainerConfig {
            epsilon: 0.0,
            ..ContainerConfig::new(80.0, Variant::Efficiency).unwrap()
        };
        let state = ContainerState::new("1x");
        let inputs = PolicyInputs::new(2.0, 500.0, now(), &fleet).with_availability(&[false, false, true, false, false]);
        // Continuous cap is 0.6; 8 cores round it to 4/8.
        assert_eq!(
            step_general(&cfg, &state, &inputs).unwrap().kind,
            ActionKind::SetQuota { quota: 0.5 }
        );
    }

    #[test]
    fn migrating_state_is_noop_and_bad_inputs_error() {
        let fleet = Fleet::standard();
        let cfg = cfg(100.0, 0.05, Variant::Efficiency);
        let mut state = ContainerState::new("1x");
        state.status = Status::Migrating {
            remaining: TimeDelta::seconds(30),
        };
        let inputs = PolicyInputs::new(0.5, 300.0, now(), &fleet);
        assert_eq!(step_general(&cfg, &state, &inputs).unwrap().kind, ActionKind::NoOp);
        let ghost = ContainerState::new("9x");
        assert!(matches!(step_general(&cfg, &ghost, &inputs), Err(PolicyError::UnknownServer(_))));
        let bad = PolicyInputs::new(-1.0, 300.0, now(), &fleet);
        assert!(step_general(&cfg, &ContainerState::new("1x"), &bad).is_err());
        assert!(ContainerConfig::new(0.0, Variant::Efficiency).is_err());
        let mut c = cfg.clone();
        c.epsilon = 1.0;
        assert!(c.validate().is_err());
    }
}
