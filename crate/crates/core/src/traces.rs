//! Carbon-intensity and workload traces: CSV parsing and serialization,
//! summary statistics, and synthetic trace generation.
//!
//! Percent columns are converted to fractions at parse time. Gaps in a trace
//! are errors unless forward-fill is requested explicitly.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, SecondsFormat, TimeDelta, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub const CARBON_HEADER: [&str; 3] = ["timestamp", "region", "carbon_intensity_gco2_per_kwh"];
pub const WORKLOAD_HEADER: [&str; 6] = [
    "timestamp",
    "job_id",
    "cpu_avg_pct",
    "cpu_min_pct",
    "cpu_max_pct",
    "mem_gb",
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("bad header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: timestamp not strictly increasing for `{series}`")]
    NonMonotonic { line: u64, series: String },
    #[error("line {line}: spacing of {found_s}s for `{series}` where {expected_s}s expected")]
    Spacing {
        line: u64,
        series: String,
        expected_s: i64,
        found_s: i64,
    },
    #[error("no samples{}", .0.as_deref().map(|f| format!(" matching `{f}`")).unwrap_or_default())]
    Empty(Option<String>),
    #[error("input holds several series ({0}); pick one with a filter")]
    MultipleSeries(String),
    #[error("statistics of an empty series")]
    EmptySeries,
    #[error("coefficient of variation undefined for mean {0}")]
    ZeroMean(f64),
    #[error("trace `{region}` has {len} samples, shorter than one day")]
    ShortTrace { region: String, len: usize },
    #[error("bucket edges must be non-empty, finite and strictly increasing")]
    InvalidBuckets,
    #[error("invalid trace parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn csv_error(err: csv::Error) -> TraceError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => TraceError::Io(e),
        other => TraceError::Malformed {
            line,
            msg: format!("{other:?}"),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CarbonSample {
    pub timestamp: DateTime<Utc>,
    /// g·CO₂e/kWh
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarbonTrace {
    pub region: String,
    pub samples: Vec<CarbonSample>,
    #[serde(skip)]
    pub resolution: TimeDelta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorkloadSample {
    pub timestamp: DateTime<Utc>,
    /// Fraction of baseline capacity.
    pub cpu_avg: f64,
    pub cpu_min: f64,
    pub cpu_max: f64,
    pub mem_gb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkloadTrace {
    pub job_id: String,
    pub samples: Vec<WorkloadSample>,
    #[serde(skip)]
    pub resolution: TimeDelta,
}

pub fn default_carbon_resolution() -> TimeDelta {
    TimeDelta::hours(1)
}

pub fn default_workload_resolution() -> TimeDelta {
    TimeDelta::minutes(5)
}

fn check_spacing(
    stamps: impl Iterator<Item = DateTime<Utc>>,
    resolution: TimeDelta,
    series: &str,
) -> Result<(), TraceError> {
    let mut prev: Option<DateTime<Utc>> = None;
    for (i, t) in stamps.enumerate() {
        if let Some(p) = prev {
            let line = i as u64 + 1;
            if t <= p {
                return Err(TraceError::NonMonotonic {
                    line,
                    series: series.to_string(),
                });
            }
            if t - p != resolution {
                return Err(TraceError::Spacing {
                    line,
                    series: series.to_string(),
                    expected_s: resolution.num_seconds(),
                    found_s: (t - p).num_seconds(),
                });
            }
        }
        prev = Some(t);
    }
    Ok(())
}

impl CarbonTrace {
    pub fn new(
        region: impl Into<String>,
        samples: Vec<CarbonSample>,
        resolution: TimeDelta,
    ) -> Result<Self, TraceError> {
        let region = region.into();
        if samples.is_empty() {
            return Err(TraceError::Empty(Some(region)));
        }
        if resolution <= TimeDelta::zero() {
            return Err(TraceError::InvalidParams("resolution must be positive".into()));
        }
        if let Some(bad) = samples.iter().position(|s| !(s.intensity.is_finite() && s.intensity >= 0.0)) {
            return Err(TraceError::Malformed {
                line: bad as u64 + 1,
                msg: format!("intensity {} must be finite and >= 0", samples[bad].intensity),
            });
        }
        check_spacing(samples.iter().map(|s| s.timestamp), resolution, &region)?;
        Ok(CarbonTrace {
            region,
            samples,
            resolution,
        })
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.samples[0].timestamp
    }

    /// Exclusive end of the last sample's interval.
    pub fn end(&self) -> DateTime<Utc> {
        self.samples[self.samples.len() - 1].timestamp + self.resolution
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.intensity).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

impl WorkloadTrace {
    pub fn new(
        job_id: impl Into<String>,
        samples: Vec<WorkloadSample>,
        resolution: TimeDelta,
    ) -> Result<Self, TraceError> {
        let job_id = job_id.into();
        if samples.is_empty() {
            return Err(TraceError::Empty(Some(job_id)));
        }
        if resolution <= TimeDelta::zero() {
            return Err(TraceError::InvalidParams("resolution must be positive".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            if let Err(msg) = validate_workload_sample(s) {
                return Err(TraceError::Malformed {
                    line: i as u64 + 1,
                    msg,
                });
            }
        }
        check_spacing(samples.iter().map(|s| s.timestamp), resolution, &job_id)?;
        Ok(WorkloadTrace {
            job_id,
            samples,
            resolution,
        })
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.samples[0].timestamp
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.samples[self.samples.len() - 1].timestamp + self.resolution
    }

    pub fn cpu_avg(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.cpu_avg).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn validate_workload_sample(s: &WorkloadSample) -> Result<(), String> {
    let vals = [s.cpu_avg, s.cpu_min, s.cpu_max, s.mem_gb];
    if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err("cpu and memory values must be finite and >= 0".into());
    }
    if s.cpu_min > s.cpu_max {
        return Err(format!("cpu_min {} exceeds cpu_max {}", s.cpu_min, s.cpu_max));
    }
    if s.cpu_avg < s.cpu_min || s.cpu_avg > s.cpu_max {
        return Err(format!(
            "cpu_avg {} outside [cpu_min {}, cpu_max {}]",
            s.cpu_avg, s.cpu_min, s.cpu_max
        ));
    }
    Ok(())
}

/// Options shared by both CSV parsers.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Expected spacing; `None` selects the per-kind default.
    pub resolution: Option<TimeDelta>,
    /// Fill whole-interval gaps with the previous sample instead of failing.
    pub fill_forward: bool,
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), TraceError> {
    let found_fields: Vec<&str> = found.iter().map(str::trim).collect();
    if found_fields != expected {
        return Err(TraceError::Header {
            expected: expected.join(","),
            found: found_fields.join(","),
        });
    }
    Ok(())
}

fn parse_time(line: u64, raw: &str) -> Result<DateTime<Utc>, TraceError> {
    DateTime::parse_from_rfc3339(raw.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| TraceError::Malformed {
            line,
            msg: format!("bad timestamp `{raw}`: {e}"),
        })
}

fn parse_num(line: u64, column: &str, raw: &str) -> Result<f64, TraceError> {
    let v: f64 = raw.trim().parse().map_err(|_| TraceError::Malformed {
        line,
        msg: format!("{column}: `{raw}` is not a number"),
    })?;
    if !v.is_finite() || v < 0.0 {
        return Err(TraceError::Malformed {
            line,
            msg: format!("{column}: {v} must be finite and >= 0"),
        });
    }
    Ok(v)
}

/// Rows of one series, tagged with their source line for diagnostics.
struct Series<T> {
    rows: Vec<(u64, DateTime<Utc>, T)>,
}

/// Orders, checks and optionally forward-fills one series.
fn finish_series<T: Clone>(
    name: &str,
    series: Series<T>,
    resolution: TimeDelta,
    fill_forward: bool,
) -> Result<Vec<(DateTime<Utc>, T)>, TraceError> {
    let mut out: Vec<(DateTime<Utc>, T)> = Vec::with_capacity(series.rows.len());
    for (line, t, v) in series.rows {
        if let Some((prev_t, prev_v)) = out.last().cloned() {
            if t <= prev_t {
                return Err(TraceError::NonMonotonic {
                    line,
                    series: name.to_string(),
                });
            }
            let gap = t - prev_t;
            if gap != resolution {
                let whole = gap.num_seconds() % resolution.num_seconds() == 0;
                if !(fill_forward && whole) {
                    return Err(TraceError::Spacing {
                        line,
                        series: name.to_string(),
                        expected_s: resolution.num_seconds(),
                        found_s: gap.num_seconds(),
                    });
                }
                let mut fill_t = prev_t + resolution;
                while fill_t < t {
                    out.push((fill_t, prev_v.clone()));
                    fill_t += resolution;
                }
            }
        }
        out.push((t, v));
    }
    Ok(out)
}

fn read_carbon_rows<R: Read>(source: R) -> Result<BTreeMap<String, Series<f64>>, TraceError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    check_header(reader.headers().map_err(csv_error)?, &CARBON_HEADER)?;
    let mut by_region: BTreeMap<String, Series<f64>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let t = parse_time(line, &rec[0])?;
        let region = rec[1].to_string();
        if region.is_empty() {
            return Err(TraceError::Malformed {
                line,
                msg: "empty region".into(),
            });
        }
        let intensity = parse_num(line, CARBON_HEADER[2], &rec[2])?;
        by_region
            .entry(region)
            .or_insert_with(|| Series { rows: Vec::new() })
            .rows
            .push((line, t, intensity));
    }
    Ok(by_region)
}

fn build_carbon(
    region: String,
    series: Series<f64>,
    opts: ParseOptions,
) -> Result<CarbonTrace, TraceError> {
    let resolution = opts.resolution.unwrap_or_else(default_carbon_resolution);
    let rows = finish_series(&region, series, resolution, opts.fill_forward)?;
    let samples = rows
        .into_iter()
        .map(|(timestamp, intensity)| CarbonSample {
            timestamp,
            intensity,
        })
        .collect();
    CarbonTrace::new(region, samples, resolution)
}

/// Parses one region's carbon trace. Without a filter the input must hold a
/// single region.
pub fn parse_carbon_trace<R: Read>(
    source: R,
    region_filter: Option<&str>,
    opts: ParseOptions,
) -> Result<CarbonTrace, TraceError> {
    let mut by_region = read_carbon_rows(source)?;
    let (region, series) = match region_filter {
        Some(f) => {
            let series = by_region
                .remove(f)
                .ok_or_else(|| TraceError::Empty(Some(f.to_string())))?;
            (f.to_string(), series)
        }
        None => {
            if by_region.len() > 1 {
                let names: Vec<&str> = by_region.keys().map(String::as_str).collect();
                return Err(TraceError::MultipleSeries(names.join(", ")));
            }
            by_region.pop_first().ok_or(TraceError::Empty(None))?
        }
    };
    build_carbon(region, series, opts)
}

/// Parses every region in the input, sorted by region name.
pub fn parse_carbon_traces<R: Read>(source: R, opts: ParseOptions) -> Result<Vec<CarbonTrace>, TraceError> {
    let by_region = read_carbon_rows(source)?;
    if by_region.is_empty() {
        return Err(TraceError::Empty(None));
    }
    by_region
        .into_iter()
        .map(|(region, series)| build_carbon(region, series, opts))
        .collect()
}

type WorkloadRow = (f64, f64, f64, f64);

fn read_workload_rows<R: Read>(source: R) -> Result<BTreeMap<String, Series<WorkloadRow>>, TraceError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    check_header(reader.headers().map_err(csv_error)?, &WORKLOAD_HEADER)?;
    let mut by_job: BTreeMap<String, Series<WorkloadRow>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let t = parse_time(line, &rec[0])?;
        let job = rec[1].to_string();
        if job.is_empty() {
            return Err(TraceError::Malformed {
                line,
                msg: "empty job_id".into(),
            });
        }
        let avg = parse_num(line, WORKLOAD_HEADER[2], &rec[2])? / 100.0;
        let min = parse_num(line, WORKLOAD_HEADER[3], &rec[3])? / 100.0;
        let max = parse_num(line, WORKLOAD_HEADER[4], &rec[4])? / 100.0;
        let mem = parse_num(line, WORKLOAD_HEADER[5], &rec[5])?;
        let sample = WorkloadSample {
            timestamp: t,
            cpu_avg: avg,
            cpu_min: min,
            cpu_max: max,
            mem_gb: mem,
        };
        validate_workload_sample(&sample).map_err(|msg| TraceError::Malformed { line, msg })?;
        by_job
            .entry(job)
            .or_insert_with(|| Series { rows: Vec::new() })
            .rows
            .push((line, t, (avg, min, max, mem)));
    }
    Ok(by_job)
}

fn build_workload(
    job_id: String,
    series: Series<WorkloadRow>,
    opts: ParseOptions,
) -> Result<WorkloadTrace, TraceError> {
    let resolution = opts.resolution.unwrap_or_else(default_workload_resolution);
    let rows = finish_series(&job_id, series, resolution, opts.fill_forward)?;
    let samples = rows
        .into_iter()
        .map(|(timestamp, (cpu_avg, cpu_min, cpu_max, mem_gb))| WorkloadSample {
            timestamp,
            cpu_avg,
            cpu_min,
            cpu_max,
            mem_gb,
        })
        .collect();
    WorkloadTrace::new(job_id, samples, resolution)
}

/// Parses one job's workload trace. Without a filter the input must hold a
/// single job.
pub fn parse_workload_trace<R: Read>(
    source: R,
    job_filter: Option<&str>,
    opts: ParseOptions,
) -> Result<WorkloadTrace, TraceError> {
    let mut by_job = read_workload_rows(source)?;
    let (job, series) = match job_filter {
        Some(f) => {
            let series = by_job
                .remove(f)
                .ok_or_else(|| TraceError::Empty(Some(f.to_string())))?;
            (f.to_string(), series)
        }
        None => {
            if by_job.len() > 1 {
                let names: Vec<&str> = by_job.keys().map(String::as_str).collect();
                return Err(TraceError::MultipleSeries(names.join(", ")));
            }
            by_job.pop_first().ok_or(TraceError::Empty(None))?
        }
    };
    build_workload(job, series, opts)
}

/// Parses every job in the input, sorted by job id.
pub fn parse_workload_traces<R: Read>(source: R, opts: ParseOptions) -> Result<Vec<WorkloadTrace>, TraceError> {
    let by_job = read_workload_rows(source)?;
    if by_job.is_empty() {
        return Err(TraceError::Empty(None));
    }
    by_job
        .into_iter()
        .map(|(job, series)| build_workload(job, series, opts))
        .collect()
}

fn fmt_time(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Formats with six significant digits, without a trailing exponent for
/// ordinary magnitudes.
pub fn fmt_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.5e}").parse().unwrap_or(v);
    format!("{rounded}")
}

pub fn write_carbon_csv<W: Write>(traces: &[CarbonTrace], out: W) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CARBON_HEADER).map_err(csv_error)?;
    for trace in traces {
        for s in &trace.samples {
            w.write_record([fmt_time(&s.timestamp), trace.region.clone(), fmt_sig6(s.intensity)])
                .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_workload_csv<W: Write>(traces: &[WorkloadTrace], out: W) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(WORKLOAD_HEADER).map_err(csv_error)?;
    for trace in traces {
        for s in &trace.samples {
            w.write_record([
                fmt_time(&s.timestamp),
                trace.job_id.clone(),
                fmt_sig6(s.cpu_avg * 100.0),
                fmt_sig6(s.cpu_min * 100.0),
                fmt_sig6(s.cpu_max * 100.0),
                fmt_sig6(s.mem_gb),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Mean, population standard deviation and coefficient of variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStats {
    pub mean: f64,
    pub stddev: f64,
    pub cov: f64,
}

/// Uses the population standard deviation. A zero mean leaves the CoV
/// undefined and is reported as an error.
pub fn compute_stats(series: &[f64]) -> Result<TraceStats, TraceError> {
    if series.is_empty() {
        return Err(TraceError::EmptySeries);
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let stddev = var.sqrt();
    if mean <= 0.0 || mean.is_nan() {
        return Err(TraceError::ZeroMean(mean));
    }
    Ok(TraceStats {
        mean,
        stddev,
        cov: stddev / mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovMode {
    /// One CoV over every hourly sample.
    WholeSeries,
    /// CoV of each 24-sample day, averaged over days.
    DailyAveraged,
}

impl CovMode {
    pub fn label(self) -> &'static str {
        match self {
            CovMode::WholeSeries => "whole",
            CovMode::DailyAveraged => "daily",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionStats {
    pub region: String,
    pub mean: f64,
    pub cov: f64,
    pub mode: CovMode,
}

pub const SAMPLES_PER_DAY: usize = 24;

/// Per-region mean and CoV, sorted by increasing CoV (ties by region name).
/// Daily mode ignores a trailing partial day.
pub fn carbon_region_report(traces: &[CarbonTrace], mode: CovMode) -> Result<Vec<RegionStats>, TraceError> {
    let mut rows = Vec::with_capacity(traces.len());
    for trace in traces {
        let values = trace.intensities();
        let whole = compute_stats(&values)?;
        let cov = match mode {
            CovMode::WholeSeries => whole.cov,
            CovMode::DailyAveraged => {
                let days: Vec<&[f64]> = values.chunks_exact(SAMPLES_PER_DAY).collect();
                if days.is_empty() {
                    return Err(TraceError::ShortTrace {
                        region: trace.region.clone(),
                        len: values.len(),
                    });
                }
                let mut total = 0.0;
                for day in &days {
                    total += compute_stats(day)?.cov;
                }
                total / days.len() as f64
            }
        };
        rows.push(RegionStats {
            region: trace.region.clone(),
            mean: whole.mean,
            cov,
            mode,
        });
    }
    rows.sort_by(|a, b| a.cov.total_cmp(&b.cov).then_with(|| a.region.cmp(&b.region)));
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBucket {
    pub label: String,
    pub lower: f64,
    pub upper: f64,
    pub jobs: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovHistogram {
    pub buckets: Vec<HistogramBucket>,
    /// Jobs whose CPU series has zero mean.
    pub undefined_jobs: usize,
    pub undefined_percent: f64,
    pub total_jobs: usize,
}

const EDGE_RTOL: f64 = 1e-9;

/// Buckets jobs by the CoV of their average-CPU series.
///
/// With edges `e1 < … < en` the buckets are `[0, e1)`, `[e1, e2)`, …,
/// `[e(n-1), en]` and `(en, ∞)`: "below e1" and "above en" are both strict.
pub fn workload_cov_histogram(traces: &[WorkloadTrace], bucket_edges: &[f64]) -> Result<CovHistogram, TraceError> {
    if bucket_edges.is_empty()
        || bucket_edges.iter().any(|e| !e.is_finite() || *e < 0.0)
        || bucket_edges.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(TraceError::InvalidBuckets);
    }
    let n = bucket_edges.len();
    let mut counts = vec![0usize; n + 1];
    let mut undefined = 0usize;
    for trace in traces {
        match compute_stats(&trace.cpu_avg()) {
            Ok(stats) => counts[bucket_index(stats.cov, bucket_edges)] += 1,
            Err(TraceError::ZeroMean(_)) => undefined += 1,
            Err(e) => return Err(e),
        }
    }
    let total = traces.len();
    let pct = |c: usize| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 };
    let mut buckets = Vec::with_capacity(n + 1);
    for (i, &count) in counts.iter().enumerate() {
        let lower = if i == 0 { 0.0 } else { bucket_edges[i - 1] };
        let upper = if i == n { f64::INFINITY } else { bucket_edges[i] };
        let label = if i == 0 {
            format!("[0,{upper})")
        } else if i == n {
            format!("({lower},inf)")
        } else if i == n - 1 {
            format!("[{lower},{upper}]")
        } else {
            format!("[{lower},{upper})")
        };
        buckets.push(HistogramBucket {
            label,
            lower,
            upper,
            jobs: count,
            percent: pct(count),
        });
    }
    Ok(CovHistogram {
        buckets,
        undefined_jobs: undefined,
        undefined_percent: pct(undefined),
        total_jobs: total,
    })
}

fn bucket_index(cov: f64, edges: &[f64]) -> usize {
    let n = edges.len();
    // Rounding in the CoV should not push a value across an edge.
    let cov = edges
        .iter()
        .copied()
        .find(|&e| (cov - e).abs() <= EDGE_RTOL * e.max(1.0))
        .unwrap_or(cov);
    if cov > edges[n - 1] {
        return n;
    }
    if cov == edges[n - 1] {
        return n - 1;
    }
    edges.iter().position(|&e| cov < e).unwrap_or(n)
}

/// Shape of a synthetic series.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthKind {
    Constant {
        value: f64,
    },
    /// `mean + amplitude·sin(2π(i + phase)/period)` with `period` in samples.
    Sinusoid {
        mean: f64,
        amplitude: f64,
        period: usize,
        phase: f64,
    },
    /// Alternates `low`/`high` in blocks of `period` samples, starting low.
    Step {
        low: f64,
        high: f64,
        period: usize,
    },
    /// `base` with random bursts drawn from a seeded generator.
    Bursty {
        base: f64,
        burst_max: f64,
        probability: f64,
        seed: u64,
    },
}

/// Where and how densely a synthetic series is laid out.
#[derive(Debug, Clone, Copy)]
pub struct SynthLayout {
    pub start: DateTime<Utc>,
    pub resolution: TimeDelta,
    pub len: usize,
}

impl SynthKind {
    /// Generates `len` values. Parameters that would produce a negative value
    /// are rejected rather than clamped.
    pub fn values(&self, len: usize) -> Result<Vec<f64>, TraceError> {
        let bad = |m: &str| Err(TraceError::InvalidParams(m.to_string()));
        if len == 0 {
            return bad("length must be positive");
        }
        let out: Vec<f64> = match *self {
            SynthKind::Constant { value } => {
                if !(value.is_finite() && value >= 0.0) {
                    return bad("constant value must be >= 0");
                }
                vec![value; len]
            }
            SynthKind::Sinusoid {
                mean,
                amplitude,
                period,
                phase,
            } => {
                if !(amplitude.is_finite() && amplitude >= 0.0) || period == 0 || !mean.is_finite() {
                    return bad("sinusoid needs amplitude >= 0 and period > 0");
                }
                if mean - amplitude < 0.0 {
                    return bad("sinusoid would go negative (amplitude > mean)");
                }
                (0..len)
                    .map(|i| {
                        let x = std::f64::consts::TAU * (i as f64 + phase) / period as f64;
                        mean + amplitude * x.sin()
                    })
                    .collect()
            }
            SynthKind::Step { low, high, period } => {
                if period == 0 || !(low.is_finite() && high.is_finite()) || low < 0.0 || high < 0.0 {
                    return bad("step needs non-negative levels and period > 0");
                }
                (0..len).map(|i| if (i / period) % 2 == 0 { low } else { high }).collect()
            }
            SynthKind::Bursty {
                base,
                burst_max,
                probability,
                seed,
            } => {
                if !(base.is_finite() && base >= 0.0 && burst_max.is_finite() && burst_max >= 0.0) {
                    return bad("bursty needs non-negative base and burst height");
                }
                if !(0.0..=1.0).contains(&probability) {
                    return bad("burst probability must be in [0, 1]");
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..len)
                    .map(|_| {
                        let burst = rng.random_bool(probability);
                        let height: f64 = rng.random::<f64>() * burst_max;
                        if burst {
                            base + height
                        } else {
                            base
                        }
                    })
                    .collect()
            }
        };
        Ok(out)
    }
}

pub fn synth_carbon_trace(region: &str, kind: &SynthKind, layout: SynthLayout) -> Result<CarbonTrace, TraceError> {
    let samples = kind
        .values(layout.len)?
        .into_iter()
        .enumerate()
        .map(|(i, intensity)| CarbonSample {
            timestamp: layout.start + layout.resolution * i as i32,
            intensity,
        })
        .collect();
    CarbonTrace::new(region, samples, layout.resolution)
}

/// Values are CPU fractions of baseline capacity; min and max equal the
/// average.
pub fn synth_workload_trace(
    job_id: &str,
    kind: &SynthKind,
    layout: SynthLayout,
    mem_gb: f64,
) -> Result<WorkloadTrace, TraceError> {
    if !(mem_gb.is_finite() && mem_gb >= 0.0) {
        return Err(TraceError::InvalidParams("mem_gb must be >= 0".into()));
    }
    let samples = kind
        .values(layout.len)?
        .into_iter()
        .enumerate()
        .map(|(i, cpu)| WorkloadSample {
            timestamp: layout.start + layout.resolution * i as i32,
            cpu_avg: cpu,
            cpu_min: cpu,
            cpu_max: cpu,
            mem_gb,
        })
        .collect();
    WorkloadTrace::new(job_id, samples, layout.resolution)
}
