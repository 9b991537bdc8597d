//! Per-run summaries and cross-job aggregation.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::sim::{PolicyKind, SimConfig, SimResult};
use crate::policy::Status;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("result has no steps")]
    Empty,
    #[error("job sets differ at target {target}: {policy} ran {found:?}, expected {expected:?}")]
    MismatchedJobs {
        target: f64,
        policy: PolicyKind,
        found: Vec<String>,
        expected: Vec<String>,
    },
    #[error("job `{job}` appears twice for {policy} at target {target}")]
    DuplicateJob { job: String, policy: PolicyKind, target: f64 },
    #[error("output: {0}")]
    Output(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServerTime {
    pub capacity_multiple: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub job_id: String,
    pub region: String,
    pub policy: PolicyKind,
    pub c_target: f64,
    pub suspend_baseload_attributed: bool,
    pub steps: usize,
    pub avg_emissions_g_per_hr: f64,
    pub total_emissions_g: f64,
    /// Percent of baseline-server capacity left unserved, averaged over time.
    pub throttling_pct: f64,
    pub suspended_fraction: f64,
    pub migration_count: usize,
    /// Steps whose emissions exceed the raw target.
    pub violation_fraction: f64,
    /// Ascending by capacity; every fleet server appears.
    pub time_on_server: Vec<ServerTime>,
}

impl Summary {
    pub fn attribution_label(&self) -> &'static str {
        if self.suspend_baseload_attributed {
            "baseload-attributed"
        } else {
            "baseload-excluded"
        }
    }

    /// Flat snake_case JSON object.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("job_id".into(), self.job_id.clone().into());
        m.insert("region".into(), self.region.clone().into());
        m.insert("policy".into(), self.policy.label().into());
        m.insert("c_target_g_per_hr".into(), self.c_target.into());
        m.insert("attribution_mode".into(), self.attribution_label().into());
        m.insert("steps".into(), self.steps.into());
        m.insert("avg_emissions_g_per_hr".into(), self.avg_emissions_g_per_hr.into());
        m.insert("total_emissions_g".into(), self.total_emissions_g.into());
        m.insert("throttling_pct".into(), self.throttling_pct.into());
        m.insert("suspended_fraction".into(), self.suspended_fraction.into());
        m.insert("migration_count".into(), self.migration_count.into());
        m.insert("violation_fraction".into(), self.violation_fraction.into());
        for st in &self.time_on_server {
            m.insert(format!("time_on_server_{}", st.capacity_multiple), st.fraction.into());
        }
        Value::Object(m)
    }
}

pub fn summarize(result: &SimResult, cfg: &SimConfig) -> Result<Summary, MetricsError> {
    let records = &result.records;
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = records.len() as f64;
    let step_h = result.step.num_milliseconds() as f64 / 3_600_000.0;
    let total_g: f64 = records.iter().map(|r| r.emissions_rate_g_per_hr * step_h).sum();
    let throttle: f64 = records.iter().map(|r| r.throttle_baseline_units).sum();
    let suspended = records.iter().filter(|r| r.status == Status::Suspended).count();
    let violations = records
        .iter()
        .filter(|r| r.emissions_rate_g_per_hr > result.c_target)
        .count();
    let mut steps_on: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        *steps_on.entry(r.server_id.as_str()).or_default() += 1;
    }
    let time_on_server = cfg
        .fleet
        .servers()
        .iter()
        .map(|s| ServerTime {
            capacity_multiple: s.capacity_multiple,
            fraction: steps_on.get(s.id.as_str()).copied().unwrap_or(0) as f64 / n,
        })
        .collect();
    Ok(Summary {
        job_id: result.job_id.clone(),
        region: result.region.clone(),
        policy: result.policy_kind,
        c_target: result.c_target,
        suspend_baseload_attributed: result.suspend_baseload_attributed,
        steps: records.len(),
        avg_emissions_g_per_hr: total_g / (n * step_h),
        total_emissions_g: total_g,
        throttling_pct: 100.0 * throttle / n,
        suspended_fraction: suspended as f64 / n,
        migration_count: result.migration_count(),
        violation_fraction: violations as f64 / n,
        time_on_server,
    })
}

pub fn write_summary_json<W: Write>(summary: &Summary, mut out: W) -> Result<(), MetricsError> {
    let text = serde_json::to_string_pretty(&summary.to_json()).map_err(|e| MetricsError::Output(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| MetricsError::Output(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub policy: PolicyKind,
    pub target_g_per_hr: f64,
    pub jobs: usize,
    pub mean_emissions: f64,
    pub std_emissions: f64,
    pub mean_throttle_pct: f64,
    pub std_throttle_pct: f64,
}

/// Population mean and standard deviation.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

type Groups<'a> = BTreeMap<(u64, PolicyKind), Vec<&'a Summary>>;

/// Groups by `(target, policy)` with jobs sorted by id, and checks that
/// every policy ran the same jobs at each target.
fn group(summaries: &[Summary]) -> Result<Groups<'_>, MetricsError> {
    let mut groups: Groups = BTreeMap::new();
    for s in summaries {
        groups.entry((s.c_target.to_bits(), s.policy)).or_default().push(s);
    }
    let mut expected: BTreeMap<u64, Vec<String>> = BTreeMap::new();
    for ((target_bits, policy), jobs) in groups.iter_mut() {
        jobs.sort_by(|a, b| a.job_id.cmp(&b.job_id));
        let target = f64::from_bits(*target_bits);
        if let Some(w) = jobs.windows(2).find(|w| w[0].job_id == w[1].job_id) {
            return Err(MetricsError::DuplicateJob {
                job: w[0].job_id.clone(),
                policy: *policy,
                target,
            });
        }
        let ids: Vec<String> = jobs.iter().map(|s| s.job_id.clone()).collect();
        match expected.get(target_bits) {
            Some(exp) if *exp != ids => {
                return Err(MetricsError::MismatchedJobs {
                    target,
                    policy: *policy,
                    found: ids,
                    expected: exp.clone(),
                })
            }
            Some(_) => {}
            None => {
                expected.insert(*target_bits, ids);
            }
        }
    }
    Ok(groups)
}

fn sorted_keys(groups: &Groups) -> Vec<(u64, PolicyKind)> {
    let mut keys: Vec<_> = groups.keys().copied().collect();
    keys.sort_by(|a, b| a.1.cmp(&b.1).then(f64::from_bits(a.0).total_cmp(&f64::from_bits(b.0))));
    keys
}

/// Mean and σ of emissions and throttling per `(policy, target)`, ordered by
/// policy then target. Independent of the order of `summaries`.
pub fn compare(summaries: &[Summary]) -> Result<Vec<ComparisonRow>, MetricsError> {
    let groups = group(summaries)?;
    Ok(sorted_keys(&groups)
        .into_iter()
        .map(|key| {
            let jobs = &groups[&key];
            let e: Vec<f64> = jobs.iter().map(|s| s.avg_emissions_g_per_hr).collect();
            let t: Vec<f64> = jobs.iter().map(|s| s.throttling_pct).collect();
            let (mean_emissions, std_emissions) = mean_std(&e);
            let (mean_throttle_pct, std_throttle_pct) = mean_std(&t);
            ComparisonRow {
                policy: key.1,
                target_g_per_hr: f64::from_bits(key.0),
                jobs: jobs.len(),
                mean_emissions,
                std_emissions,
                mean_throttle_pct,
                std_throttle_pct,
            }
        })
        .collect())
}

pub const COMPARISON_HEADER: [&str; 6] = [
    "policy",
    "target_g_per_hr",
    "mean_emissions",
    "std_emissions",
    "mean_throttle_pct",
    "std_throttle_pct",
];

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], out: W) -> Result<(), MetricsError> {
    let err = |e: csv::Error| MetricsError::Output(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPARISON_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.policy.label().to_string(),
            r.target_g_per_hr.to_string(),
            r.mean_emissions.to_string(),
            r.std_emissions.to_string(),
            r.mean_throttle_pct.to_string(),
            r.std_throttle_pct.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| MetricsError::Output(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServerTimeRow {
    pub policy: PolicyKind,
    pub target_g_per_hr: f64,
    pub capacity_multiple: f64,
    pub fraction: f64,
}

/// Job-averaged share of time on each server size per `(policy, target)`.
pub fn server_time_distribution(summaries: &[Summary]) -> Result<Vec<ServerTimeRow>, MetricsError> {
    let groups = group(summaries)?;
    let mut rows = Vec::new();
    for key in sorted_keys(&groups) {
        let jobs = &groups[&key];
        let mut acc: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
        for s in jobs {
            for st in &s.time_on_server {
                let e = acc.entry(st.capacity_multiple.to_bits()).or_insert((st.capacity_multiple, 0.0));
                e.1 += st.fraction;
            }
        }
        let mut sizes: Vec<(f64, f64)> = acc.into_values().collect();
        sizes.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (capacity_multiple, sum) in sizes {
            rows.push(ServerTimeRow {
                policy: key.1,
                target_g_per_hr: f64::from_bits(key.0),
                capacity_multiple,
                fraction: sum / jobs.len() as f64,
            });
        }
    }
    Ok(rows)
}

pub const SERVER_TIME_HEADER: [&str; 4] = ["policy", "target_g_per_hr", "capacity_multiple", "fraction"];

pub fn write_server_time_csv<W: Write>(rows: &[ServerTimeRow], out: W) -> Result<(), MetricsError> {
    let err = |e: csv::Error| MetricsError::Output(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SERVER_TIME_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.policy.label().to_string(),
            r.target_g_per_hr.to_string(),
            r.capacity_multiple.to_string(),
            r.fraction.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| MetricsError::Output(e.to_string()))
}
