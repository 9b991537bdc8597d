use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use carbon_containers::fixtures;
use carbon_containers::metrics::{self, Summary};
use carbon_containers::provider::{CarbonProvider, HttpTransport, LiveConfig, LiveProvider, SystemClock};
use carbon_containers::sim::{self, PolicyKind, SimConfig};
use carbon_containers::traces::{self, CarbonTrace, CovMode, ParseOptions, WorkloadTrace};

/// Marks errors caused by bad flags or inputs (exit code 2).
#[derive(Debug)]
struct InputError(String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input<T, E: fmt::Display>(r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| InputError(e.to_string()).into())
}

fn input_err(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "ccsim", version, about = "Carbon-target container policy simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Whole,
    Daily,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantSel {
    Both,
    Efficiency,
    Performance,
}

#[derive(clap::Args)]
struct Batch {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    workload: PathBuf,
    #[arg(long)]
    carbon: PathBuf,
    /// Region to use when the carbon file holds several.
    #[arg(long)]
    region: Option<String>,
    /// Comma-separated targets in g/hr.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    targets: Vec<String>,
    /// Number of jobs to sample; all jobs when omitted.
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed for job sampling.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs_parallel: usize,
    /// Use each job's peak memory from the trace for migration cost.
    #[arg(long)]
    memory_from_trace: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Mean and CoV of carbon intensity per region, by increasing CoV.
    AnalyzeCarbon {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value = "whole")]
        mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Histogram of per-job CPU CoV over a seeded sample of jobs.
    AnalyzeWorkload {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1")]
        buckets: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replays one job and writes records.csv and summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        workload: PathBuf,
        #[arg(long)]
        carbon: Option<PathBuf>,
        #[arg(long)]
        job: String,
        #[arg(long)]
        region: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Read intensity from the API named by CARBON_API_URL / CARBON_API_TOKEN.
        #[arg(long)]
        live: bool,
    },
    /// Mean and standard deviation of emissions and throttling per policy and target.
    Compare {
        #[command(flatten)]
        batch: Batch,
        /// Comma-separated policy names.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        policies: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Both policy variants across targets, with time spent per server size.
    Sweep {
        #[command(flatten)]
        batch: Batch,
        #[arg(long, value_enum, default_value = "both")]
        variant: VariantSel,
        #[arg(long)]
        out: PathBuf,
    },
    /// Writes the bundled example traces and demo config.
    GenFixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<InputError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::AnalyzeCarbon { trace, mode, out } => analyze_carbon(&trace, mode, out.as_deref()),
        Command::AnalyzeWorkload {
            trace,
            sample,
            seed,
            buckets,
            out,
        } => analyze_workload(&trace, sample, seed, &buckets, out.as_deref()),
        Command::Simulate {
            config,
            workload,
            carbon,
            job,
            region,
            out,
            live,
        } => simulate(&config, &workload, carbon.as_deref(), &job, region.as_deref(), &out, live),
        Command::Compare { batch, policies, out } => {
            let policies = policies
                .iter()
                .map(|p| input(p.parse::<PolicyKind>()))
                .collect::<Result<Vec<_>>>()?;
            let summaries = run_batch(&batch, &policies)?;
            let rows = metrics::compare(&summaries)?;
            let mut buf = Vec::new();
            metrics::write_comparison_csv(&rows, &mut buf)?;
            emit(out.as_deref(), &buf)
        }
        Command::Sweep { batch, variant, out } => {
            let policies: &[PolicyKind] = match variant {
                VariantSel::Both => &[PolicyKind::CcEfficiency, PolicyKind::CcPerformance],
                VariantSel::Efficiency => &[PolicyKind::CcEfficiency],
                VariantSel::Performance => &[PolicyKind::CcPerformance],
            };
            let summaries = run_batch(&batch, policies)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut buf = Vec::new();
            metrics::write_comparison_csv(&metrics::compare(&summaries)?, &mut buf)?;
            write_file(&out.join("comparison.csv"), &buf)?;
            let mut buf = Vec::new();
            metrics::write_server_time_csv(&metrics::server_time_distribution(&summaries)?, &mut buf)?;
            write_file(&out.join("server_time.csv"), &buf)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::GenFixtures { out } => gen_fixtures(&out),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| input_err(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Writes to `out`, or to stdout when absent.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_file(p, bytes),
        None => {
            io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn read_carbon(path: &Path, region: Option<&str>) -> Result<CarbonTrace> {
    let all = input(traces::parse_carbon_traces(open(path)?, ParseOptions::default()))
        .with_context(|| format!("parsing {}", path.display()))?;
    match region {
        Some(r) => all
            .into_iter()
            .find(|t| t.region == r)
            .ok_or_else(|| input_err(format!("region `{r}` not in {}", path.display()))),
        None if all.len() == 1 => Ok(all.into_iter().next().expect("one trace")),
        None => {
            let names: Vec<&str> = all.iter().map(|t| t.region.as_str()).collect();
            Err(input_err(format!("--region required; file has {}", names.join(", "))))
        }
    }
}

fn read_workloads(path: &Path) -> Result<Vec<WorkloadTrace>> {
    input(traces::parse_workload_traces(open(path)?, ParseOptions::default()))
        .with_context(|| format!("parsing {}", path.display()))
}

/// `n` jobs drawn without replacement, in job-id order.
fn sample_jobs(jobs: Vec<WorkloadTrace>, n: Option<usize>, seed: u64) -> Result<Vec<WorkloadTrace>> {
    let Some(n) = n else { return Ok(jobs) };
    if n == 0 || n > jobs.len() {
        return Err(input_err(format!("cannot sample {n} of {} jobs", jobs.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, jobs.len(), n).into_vec();
    picked.sort_unstable();
    let mut slots: Vec<Option<WorkloadTrace>> = jobs.into_iter().map(Some).collect();
    Ok(picked.into_iter().map(|i| slots[i].take().expect("distinct")).collect())
}

fn analyze_carbon(path: &Path, mode: Mode, out: Option<&Path>) -> Result<()> {
    let all = input(traces::parse_carbon_traces(open(path)?, ParseOptions::default()))
        .with_context(|| format!("parsing {}", path.display()))?;
    let mode = match mode {
        Mode::Whole => CovMode::WholeSeries,
        Mode::Daily => CovMode::DailyAveraged,
    };
    let rows = input(traces::carbon_region_report(&all, mode))?;
    let mut csv = String::from("region,mean,cov,mode\n");
    for r in &rows {
        println!("{:<20} mean {:>10.3}  cov {:.4}", r.region, r.mean, r.cov);
        csv.push_str(&format!("{},{},{},{}\n", r.region, r.mean, r.cov, r.mode.label()));
    }
    if let Some(p) = out {
        write_file(p, csv.as_bytes())?;
    }
    Ok(())
}

fn analyze_workload(path: &Path, sample: Option<usize>, seed: u64, edges: &[f64], out: Option<&Path>) -> Result<()> {
    let jobs = sample_jobs(read_workloads(path)?, sample, seed)?;
    let h = input(traces::workload_cov_histogram(&jobs, edges))?;
    let mut csv = String::from("bucket,jobs,percent\n");
    for b in &h.buckets {
        println!("{:<14} {:>6} {:>7.2}%", b.label, b.jobs, b.percent);
        csv.push_str(&format!("\"{}\",{},{}\n", b.label, b.jobs, b.percent));
    }
    println!("{:<14} {:>6} {:>7.2}%", "undefined", h.undefined_jobs, h.undefined_percent);
    csv.push_str(&format!("undefined,{},{}\n", h.undefined_jobs, h.undefined_percent));
    if let Some(p) = out {
        write_file(p, csv.as_bytes())?;
    }
    Ok(())
}

fn load_config(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path).map_err(|e| input_err(format!("{}: {e}", path.display())))?;
    input(sim::parse_config(&text)).with_context(|| format!("config {}", path.display()))
}

fn simulate(
    config: &Path,
    workload: &Path,
    carbon: Option<&Path>,
    job: &str,
    region: Option<&str>,
    out: &Path,
    live: bool,
) -> Result<()> {
    let cfg = load_config(config)?;
    let trace = read_workloads(workload)?
        .into_iter()
        .find(|w| w.job_id == job)
        .ok_or_else(|| input_err(format!("job `{job}` not in {}", workload.display())))?;
    let result = if live {
        let region = region.ok_or_else(|| input_err("--live needs --region"))?;
        let live_cfg = input(LiveConfig::from_env(region))?;
        let provider = CarbonProvider::Live(LiveProvider::new(
            live_cfg,
            Arc::new(HttpTransport),
            Arc::new(SystemClock),
        ));
        sim::run_with_provider(&trace, &provider, region, &cfg)?
    } else {
        let carbon = carbon.ok_or_else(|| input_err("--carbon is required unless --live is set"))?;
        let ct = read_carbon(carbon, region)?;
        input(sim::run(&trace, &ct, &cfg))?
    };
    let summary = metrics::summarize(&result, &cfg)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(File::create(out.join("records.csv"))?);
    sim::write_records_csv(&result, &mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(out.join("summary.json"))?);
    metrics::write_summary_json(&summary, &mut w)?;
    w.flush()?;
    println!(
        "{} on {}: {:.3} g/hr average, {:.3}% throttled, {} migrations",
        summary.job_id, summary.region, summary.avg_emissions_g_per_hr, summary.throttling_pct, summary.migration_count
    );
    Ok(())
}

fn parse_targets(raw: &[String]) -> Result<Vec<f64>> {
    let mut targets = Vec::new();
    for t in raw.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let v: f64 = t.parse().map_err(|_| input_err(format!("bad target `{t}`")))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(input_err(format!("target {v} must be > 0")));
        }
        targets.push(v);
    }
    if targets.is_empty() {
        bail!(InputError("--targets is empty".into()));
    }
    Ok(targets)
}

fn run_batch(batch: &Batch, policies: &[PolicyKind]) -> Result<Vec<Summary>> {
    if batch.jobs_parallel == 0 {
        return Err(input_err("--jobs-parallel must be >= 1"));
    }
    let targets = parse_targets(&batch.targets)?;
    let base = load_config(&batch.config)?;
    let carbon = read_carbon(&batch.carbon, batch.region.as_deref())?;
    let jobs = sample_jobs(read_workloads(&batch.workload)?, batch.jobs, batch.seed)?;
    let mut cells = Vec::new();
    for &p in policies {
        for &t in &targets {
            for job in &jobs {
                cells.push((p, t, job));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(batch.jobs_parallel)
        .build()
        .context("building thread pool")?;
    // Ordered collect keeps results independent of completion order.
    let results: Vec<Result<Summary>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(p, t, job)| {
                let mut cfg = base.with_policy(p, t);
                if batch.memory_from_trace {
                    cfg.container.memory_gb = job.samples.iter().map(|s| s.mem_gb).fold(0.0, f64::max);
                }
                let r = input(sim::run(job, &carbon, &cfg))
                    .with_context(|| format!("{} / {t} / {}", p.label(), job.job_id))?;
                Ok(metrics::summarize(&r, &cfg)?)
            })
            .collect()
    });
    results.into_iter().collect()
}

fn gen_fixtures(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut buf = Vec::new();
    traces::write_carbon_csv(&fixtures::carbon_fixture()?, &mut buf)?;
    write_file(&out.join("carbon_fixture.csv"), &buf)?;
    let mut buf = Vec::new();
    traces::write_workload_csv(&fixtures::workload_fixture()?, &mut buf)?;
    write_file(&out.join("workload_fixture.csv"), &buf)?;
    let mut buf = Vec::new();
    traces::write_carbon_csv(&[fixtures::demo_carbon()?], &mut buf)?;
    write_file(&out.join("demo_carbon.csv"), &buf)?;
    let mut buf = Vec::new();
    traces::write_workload_csv(&[fixtures::demo_workload()?], &mut buf)?;
    write_file(&out.join("demo_workload.csv"), &buf)?;
    write_file(&out.join("demo_config.json"), fixtures::DEMO_CONFIG.as_bytes())?;
    println!("wrote fixtures to {}", out.display());
    Ok(())
}
