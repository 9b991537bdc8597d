//! A from-scratch re-evaluation of the enforcement rules, used to check the
//! simulator's action sequence step by step.
//!
//! Every step recomputes each server's cap, projection and feasibility from
//! the raw inputs and picks an action by filtering the whole fleet, instead
//! of walking neighbours the way the library does.

use carbon_containers::fleet::ServerSpec;

const TOL: f64 = 1e-12;
const RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Act {
    NoOp,
    SetQuota(f64),
    Migrate(usize, f64),
    Suspend,
    Resume(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Efficiency,
    Performance,
    VerticalOnly,
    SuspendResume,
    Agnostic,
}

#[derive(Debug, Clone)]
pub struct Setup {
    pub servers: Vec<ServerSpec>,
    pub baseline: usize,
    pub kind: Kind,
    pub c_target: f64,
    pub epsilon: f64,
    pub cores_mode: bool,
    pub dwell_steps: i64,
    pub transfer_s: f64,
    pub step_s: f64,
}

/// Per-step inputs: true demand, intensity and which servers can be provisioned.
pub struct StepInput<'a> {
    pub demand: f64,
    pub intensity: f64,
    pub available: &'a [bool],
}

struct Eval {
    cap: f64,
    feasible: bool,
    throttle: f64,
    power: f64,
    emissions: f64,
}

fn power(s: &ServerSpec, granted: f64) -> f64 {
    s.base_power_w + (s.peak_power_w - s.base_power_w) * (granted / s.capacity_multiple).min(1.0)
}

fn eval(setup: &Setup, s: &ServerSpec, d: f64, intensity: f64, bound: f64, quota: Option<f64>) -> Eval {
    let cap = if intensity <= 0.0 {
        1.0
    } else {
        let budget = (1.0 - setup.epsilon) * setup.c_target * 1000.0 / intensity;
        let raw = if budget <= s.base_power_w {
            0.0
        } else {
            ((budget - s.base_power_w) / (s.peak_power_w - s.base_power_w)).clamp(0.0, 1.0)
        };
        if setup.cores_mode {
            let c = f64::from(s.cores);
            (raw * c + 1e-9).floor().clamp(0.0, c) / c
        } else {
            raw
        }
    };
    let q = quota.unwrap_or(cap);
    let granted = d.min(s.capacity_multiple * q);
    let p = power(s, granted);
    Eval {
        cap,
        feasible: s.base_power_w / 1000.0 * intensity <= bound,
        throttle: (d - granted).max(0.0),
        power: p,
        emissions: p / 1000.0 * intensity,
    }
}

/// Runs the rules over a whole input stream and returns one action per step.
pub fn replay(setup: &Setup, inputs: &[StepInput]) -> Vec<Act> {
    let bound = (1.0 - setup.epsilon) * setup.c_target;
    let mut at = setup.baseline;
    let mut quota = 1.0;
    let mut suspended = false;
    let mut busy_until: i64 = -1;
    let mut last_move: Option<i64> = None;
    let mut est = 0.0;
    let mut out = Vec::with_capacity(inputs.len());

    for (k, input) in inputs.iter().enumerate() {
        let k = k as i64;
        let busy = k <= busy_until;
        let d = input.demand;
        if k == 0 {
            est = d;
        } else if !suspended && !busy && quota > 0.0 {
            let s = &setup.servers[at];
            let granted = d.min(s.capacity_multiple * quota);
            let u = granted / s.capacity_multiple;
            est = if u < quota - TOL { u * s.capacity_multiple } else { 2.0 * u * s.capacity_multiple };
        }
        let mut avail: Vec<bool> = input.available.to_vec();
        avail[at] = true;

        let act = if busy {
            Act::NoOp
        } else {
            match setup.kind {
                Kind::Agnostic => Act::NoOp,
                Kind::SuspendResume => {
                    let b = &setup.servers[setup.baseline];
                    let ok = power(b, est.min(b.capacity_multiple)) / 1000.0 * input.intensity <= setup.c_target;
                    match (suspended, ok) {
                        (false, false) => Act::Suspend,
                        (true, true) => Act::Resume(1.0),
                        _ => Act::NoOp,
                    }
                }
                _ => {
                    let all: Vec<Eval> = setup
                        .servers
                        .iter()
                        .map(|s| eval(setup, s, est, input.intensity, bound, None))
                        .collect();
                    let dwell_ok = last_move.is_none_or(|m| k - m >= setup.dwell_steps);
                    rules(setup, &all, &avail, at, quota, suspended, dwell_ok, est, input.intensity, bound)
                }
            }
        };

        match act {
            Act::NoOp => {}
            Act::SetQuota(q) => quota = q,
            Act::Suspend => {
                suspended = true;
                quota = 0.0;
            }
            Act::Resume(q) => {
                suspended = false;
                quota = q;
            }
            Act::Migrate(j, q) => {
                at = j;
                quota = q;
                suspended = false;
                last_move = Some(k);
                // Busy for every later step the transfer still runs into.
                let mut j = 1;
                while setup.transfer_s - j as f64 * setup.step_s > 0.0 {
                    busy_until = k + j;
                    j += 1;
                }
            }
        }
        out.push(act);
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn rules(
    setup: &Setup,
    all: &[Eval],
    avail: &[bool],
    i: usize,
    q: f64,
    suspended: bool,
    dwell_ok: bool,
    est: f64,
    intensity: f64,
    bound: f64,
) -> Act {
    let migrates = setup.kind != Kind::VerticalOnly;
    let can_move = migrates && dwell_ok;
    let smaller: Vec<usize> = (0..i).filter(|&j| avail[j]).collect();
    let larger: Vec<usize> = (i + 1..all.len()).filter(|&j| avail[j]).collect();
    let good_below: Vec<usize> = smaller.iter().copied().filter(|&j| all[j].feasible && all[j].cap > 0.0).collect();
    let here = &all[i];

    if suspended {
        if here.cap > 0.0 {
            return Act::Resume(here.cap);
        }
        if can_move && !smaller.is_empty() {
            if let Some(&j) = good_below.last() {
                return Act::Migrate(j, all[j].cap);
            }
            if !here.feasible {
                return Act::Migrate(smaller[0], all[smaller[0]].cap);
            }
        }
        return Act::NoOp;
    }

    let now = eval(setup, &setup.servers[i], est, intensity, bound, Some(q));
    let throttled = now.throttle > TOL;
    let over = now.emissions >= bound * (1.0 - RTOL);
    let capped = throttled && q >= here.cap - TOL && here.cap < 1.0 - TOL;

    if over || capped {
        if can_move && !smaller.is_empty() {
            if !here.feasible {
                let j = good_below.last().copied().unwrap_or(smaller[0]);
                return Act::Migrate(j, all[j].cap);
            }
            let j = *smaller.last().unwrap();
            if all[j].emissions < here.emissions && all[j].throttle <= here.throttle + TOL {
                return Act::Migrate(j, all[j].cap);
            }
        }
        if here.cap <= 0.0 && (!migrates || smaller.is_empty()) {
            return Act::Suspend;
        }
        if (here.cap - q).abs() > TOL {
            return Act::SetQuota(here.cap);
        }
        return Act::NoOp;
    }
    if q > here.cap + TOL {
        return Act::SetQuota(here.cap);
    }
    if q < here.cap - TOL && (throttled || setup.kind == Kind::Performance) {
        return Act::SetQuota(here.cap);
    }
    if !can_move {
        return Act::NoOp;
    }
    if throttled {
        let ok: Vec<usize> = larger
            .iter()
            .copied()
            .filter(|&j| {
                let c = &all[j];
                c.feasible && c.cap > 0.0 && c.emissions <= bound && c.throttle + TOL < now.throttle
            })
            .collect();
        if let Some(&j) = ok.iter().find(|&&j| all[j].throttle <= TOL) {
            return Act::Migrate(j, all[j].cap);
        }
        let least = ok.iter().map(|&j| all[j].throttle).fold(f64::INFINITY, f64::min);
        return match ok.iter().find(|&&j| all[j].throttle == least) {
            Some(&j) => Act::Migrate(j, all[j].cap),
            None => Act::NoOp,
        };
    }
    match setup.kind {
        Kind::Efficiency => {
            if let Some(&j) = smaller
                .iter()
                .find(|&&j| all[j].throttle <= TOL && all[j].power < now.power)
            {
                return Act::Migrate(j, all[j].cap);
            }
        }
        Kind::Performance => {
            if let Some(&j) = larger.iter().rev().find(|&&j| {
                let c = &all[j];
                c.feasible && c.throttle <= now.throttle + TOL && c.emissions < bound * (1.0 - RTOL)
            }) {
                return Act::Migrate(j, all[j].cap);
            }
        }
        _ => {}
    }
    Act::NoOp
}
