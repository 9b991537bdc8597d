use carbon_containers::fleet::{Fleet, ServerSpec};
use carbon_containers::metrics::{compare, summarize};
use carbon_containers::policy::{
    decide, emissions_rate, max_quota_for_target, ActionKind, ContainerConfig, ContainerState, PolicyInputs,
    QuotaMode, Rules, Status, Variant,
};
use carbon_containers::sim::{provision, run, MigrationMode, PolicyKind, SimConfig};
use carbon_containers::provider::TraceProvider;
use carbon_containers::traces::{
    carbon_region_report, compute_stats, parse_carbon_traces, parse_workload_traces, workload_cov_histogram,
    write_carbon_csv, write_workload_csv, CarbonSample, CarbonTrace, CovMode, ParseOptions, WorkloadSample,
    WorkloadTrace,
};
use chrono::{DateTime, TimeDelta, TimeZone, Utc};
use proptest::prelude::*;

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2022, 3, 1, 0, 0, 0).unwrap()
}

fn traces(demand: &[f64], intensity: &[f64]) -> (WorkloadTrace, CarbonTrace) {
    let step = TimeDelta::minutes(5);
    let w = demand
        .iter()
        .enumerate()
        .map(|(i, &d)| WorkloadSample {
            timestamp: t0() + step * i as i32,
            cpu_avg: d,
            cpu_min: d,
            cpu_max: d,
            mem_gb: 1.0,
        })
        .collect();
    let c = intensity
        .iter()
        .enumerate()
        .map(|(i, &v)| CarbonSample {
            timestamp: t0() + step * i as i32,
            intensity: v,
        })
        .collect();
    (
        WorkloadTrace::new("p", w, step).unwrap(),
        CarbonTrace::new("r", c, step).unwrap(),
    )
}

fn arb_fleet() -> impl Strategy<Value = Fleet> {
    prop_oneof![
        Just(Fleet::standard()),
        (50.0..150.0f64, 1.2..3.0f64).prop_map(|(base, ratio)| Fleet::proportional(
            &[0.5, 1.0, 2.0],
            8,
            base,
            base * ratio,
            16.0
        )),
    ]
}

#[derive(Debug, Clone)]
struct Instance {
    fleet: Fleet,
    demand: Vec<f64>,
    intensity: Vec<f64>,
    c_target: f64,
    epsilon: f64,
    quota_mode: QuotaMode,
    dwell_steps: i32,
    memory_gb: f64,
    live: bool,
    attributed: bool,
    availability: f64,
    seed: u64,
}

fn arb_instance() -> impl Strategy<Value = Instance> {
    (4usize..24).prop_flat_map(|len| {
        (
            arb_fleet(),
            prop::collection::vec(0.0..1.6f64, len),
            prop::collection::vec(0.0..900.0f64, len),
            5.0..150.0f64,
            0.0..0.2f64,
            prop_oneof![Just(QuotaMode::Cores), Just(QuotaMode::Continuous)],
            0i32..4,
            0.0..30.0f64,
            any::<bool>(),
            any::<bool>(),
            prop_oneof![Just(1.0), 0.3..1.0f64],
            any::<u64>(),
        )
            .prop_map(
                |(fleet, demand, intensity, c_target, epsilon, quota_mode, dwell_steps, memory_gb, live, attributed, availability, seed)| {
                    Instance {
                        fleet,
                        demand,
                        intensity,
                        c_target,
                        epsilon,
                        quota_mode,
                        dwell_steps,
                        memory_gb,
                        live,
                        attributed,
                        availability,
                        seed,
                    }
                },
            )
    })
}

fn config(inst: &Instance, kind: PolicyKind) -> SimConfig {
    let container = ContainerConfig {
        epsilon: inst.epsilon,
        memory_gb: inst.memory_gb,
        min_dwell: TimeDelta::minutes(5) * inst.dwell_steps,
        quota_mode: inst.quota_mode,
        ..ContainerConfig::new(inst.c_target, Variant::Efficiency).unwrap()
    };
    let mut cfg = SimConfig::new(container, kind).with_policy(kind, inst.c_target);
    cfg.fleet = inst.fleet.clone();
    cfg.seed = inst.seed;
    cfg.suspend_baseload_attributed = inst.attributed;
    cfg.migration.mode = if inst.live { MigrationMode::Live } else { MigrationMode::StopAndCopy };
    for s in inst.fleet.servers() {
        if s.id != inst.fleet.baseline().id {
            cfg.availability.insert(s.id.clone(), inst.availability);
        }
    }
    cfg
}

fn arb_kind() -> impl Strategy<Value = PolicyKind> {
    prop::sample::select(PolicyKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sim_is_deterministic(inst in arb_instance(), kind in arb_kind()) {
        let (w, c) = traces(&inst.demand, &inst.intensity);
        let cfg = config(&inst, kind);
        prop_assert_eq!(run(&w, &c, &cfg).unwrap(), run(&w, &c, &cfg).unwrap());
    }

    #[test]
    fn accounting_laws(inst in arb_instance(), kind in arb_kind()) {
        let (w, c) = traces(&inst.demand, &inst.intensity);
        let cfg = config(&inst, kind);
        let r = run(&w, &c, &cfg).unwrap();
        prop_assert_eq!(r.records.len(), inst.demand.len());
        let mut grams = 0.0;
        let mut source: Option<String> = None;
        for (k, rec) in r.records.iter().enumerate() {
            // A transfer keeps the server it left powered until it completes.
            if rec.action.is_migration() {
                let prev = if k == 0 { inst.fleet.baseline().id.clone() } else { r.records[k - 1].server_id.clone() };
                source = Some(prev);
            } else if rec.downtime_s == 0.0 {
                source = None;
            }
            prop_assert!((rec.emissions_rate_g_per_hr - rec.power_w / 1000.0 * rec.intensity).abs() <= 1e-9 * (1.0 + rec.emissions_rate_g_per_hr));
            grams += rec.power_w * rec.intensity / 1000.0 / 12.0;
            prop_assert!((rec.granted + rec.throttle_baseline_units - rec.demand).abs() < 1e-9);
            if matches!(rec.status, Status::Suspended | Status::Migrating { .. }) {
                prop_assert_eq!(rec.granted, 0.0);
            }
            if inst.attributed {
                let floor = inst
                    .fleet
                    .servers()
                    .iter()
                    .enumerate()
                    .filter(|(i, s)| {
                        s.id == rec.server_id
                            || source.as_deref() == Some(s.id.as_str())
                            || provision(inst.seed, k as u64, *i, cfg.availability.get(&s.id).copied().unwrap_or(1.0))
                    })
                    .map(|(_, s)| s.base_power_w)
                    .fold(f64::INFINITY, f64::min);
                prop_assert!(rec.emissions_rate_g_per_hr >= emissions_rate(floor, rec.intensity) - 1e-9);
            }
        }
        let s = summarize(&r, &cfg).unwrap();
        prop_assert!((s.total_emissions_g - grams).abs() <= 1e-6 * grams.max(1e-12));
        let share: f64 = s.time_on_server.iter().map(|t| t.fraction).sum();
        prop_assert!((share - 1.0).abs() < 1e-9);
        for f in [s.suspended_fraction, s.violation_fraction] {
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }

    #[test]
    fn migrations_respect_dwell(inst in arb_instance(), kind in arb_kind()) {
        let (w, c) = traces(&inst.demand, &inst.intensity);
        let cfg = config(&inst, kind);
        let r = run(&w, &c, &cfg).unwrap();
        let times: Vec<_> = r.records.iter().filter(|x| x.action.is_migration()).map(|x| x.t).collect();
        for pair in times.windows(2) {
            prop_assert!(pair[1] - pair[0] >= cfg.container.min_dwell);
        }
        for rec in &r.records {
            if let ActionKind::MigrateTo { server_id, .. } = &rec.action.kind {
                prop_assert!(inst.fleet.get(server_id).is_some());
            }
        }
    }

    #[test]
    fn compare_is_permutation_invariant(vals in prop::collection::vec((0.0..100.0f64, 0.0..50.0f64), 1..12), seed in any::<u64>()) {
        let (w, c) = traces(&[0.5; 4], &[100.0; 4]);
        let cfg = SimConfig::new(ContainerConfig::new(30.0, Variant::Efficiency).unwrap(), PolicyKind::CcEfficiency);
        let base = summarize(&run(&w, &c, &cfg).unwrap(), &cfg).unwrap();
        let mut summaries: Vec<_> = vals
            .iter()
            .enumerate()
            .map(|(i, &(e, t))| {
                let mut s = base.clone();
                s.job_id = format!("j{i}");
                s.avg_emissions_g_per_hr = e;
                s.throttling_pct = t;
                s
            })
            .collect();
        let a = compare(&summaries).unwrap();
        let mut rng = seed;
        for i in (1..summaries.len()).rev() {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            summaries.swap(i, (rng >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(a, compare(&summaries).unwrap());
    }

    #[test]
    fn cov_is_scale_invariant(xs in prop::collection::vec(0.01..100.0f64, 2..64), k in 0.01..1000.0f64) {
        let a = compute_stats(&xs).unwrap();
        let scaled: Vec<f64> = xs.iter().map(|x| x * k).collect();
        let b = compute_stats(&scaled).unwrap();
        prop_assert!((a.cov - b.cov).abs() <= 1e-9 * (1.0 + a.cov));
    }
}

#[derive(Debug, Clone)]
struct Decision {
    fleet: Fleet,
    cfg: ContainerConfig,
    state: ContainerState,
    demand: f64,
    intensity: f64,
    availability: Vec<bool>,
}

fn arb_decision() -> impl Strategy<Value = Decision> {
    (
        arb_fleet(),
        5.0..150.0f64,
        0.0..0.2f64,
        prop_oneof![Just(QuotaMode::Cores), Just(QuotaMode::Continuous)],
        0usize..5,
        0.0..=1.0f64,
        prop_oneof![Just(Status::Running), Just(Status::Suspended)],
        prop::option::of(0i64..30),
        0.0..2.0f64,
        0.0..900.0f64,
        prop::collection::vec(any::<bool>(), 5),
    )
        .prop_map(|(fleet, c_target, epsilon, quota_mode, idx, quota, status, since, demand, intensity, avail)| {
            let idx = idx % fleet.len();
            let cfg = ContainerConfig {
                epsilon,
                quota_mode,
                ..ContainerConfig::new(c_target, Variant::Efficiency).unwrap()
            };
            let server = &fleet.servers()[idx];
            let quota = match (status, quota_mode) {
                (Status::Suspended, _) => 0.0,
                (_, QuotaMode::Cores) => server.floor_to_cores(quota),
                _ => quota,
            };
            let state = ContainerState {
                server_id: server.id.clone(),
                quota,
                status,
                last_migration_at: since.map(|m| t0() - TimeDelta::minutes(m)),
            };
            let mut availability: Vec<bool> = avail.into_iter().take(fleet.len()).collect();
            availability[idx] = true;
            Decision {
                fleet,
                cfg,
                state,
                demand,
                intensity,
                availability,
            }
        })
}

fn resulting(d: &Decision, kind: &ActionKind) -> Option<(ServerSpec, f64)> {
    let here = d.fleet.get(&d.state.server_id).unwrap().clone();
    match kind {
        ActionKind::NoOp if d.state.status == Status::Suspended => None,
        ActionKind::NoOp => Some((here, d.state.quota)),
        ActionKind::SetQuota { quota } | ActionKind::Resume { quota } => Some((here, *quota)),
        ActionKind::MigrateTo { server_id, quota } => Some((d.fleet.get(server_id).unwrap().clone(), *quota)),
        ActionKind::Suspend => None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn policy_is_deterministic(d in arb_decision()) {
        let inputs = PolicyInputs::new(d.demand, d.intensity, t0(), &d.fleet).with_availability(&d.availability);
        for rules in [Rules::General, Rules::Efficiency, Rules::Performance, Rules::VerticalOnly] {
            prop_assert_eq!(decide(&d.cfg, &d.state, &inputs, rules).unwrap(), decide(&d.cfg, &d.state, &inputs, rules).unwrap());
        }
    }

    /// The configuration an action leads to meets the bound, unless the
    /// action suspends or nothing permitted can reach the bound.
    #[test]
    fn actions_respect_target(d in arb_decision()) {
        let inputs = PolicyInputs::new(d.demand, d.intensity, t0(), &d.fleet).with_availability(&d.availability);
        let bound = d.cfg.bound();
        for rules in [Rules::General, Rules::Efficiency, Rules::Performance, Rules::VerticalOnly] {
            let a = decide(&d.cfg, &d.state, &inputs, rules).unwrap();
            let Some((server, quota)) = resulting(&d, &a.kind) else { continue };
            let p = server.project(d.demand, quota).unwrap();
            let e = emissions_rate(p.power_w, d.intensity);
            if e <= bound * (1.0 + 1e-9) {
                continue;
            }
            // Only an infeasible server can exceed the bound.
            prop_assert!(emissions_rate(server.base_power_w, d.intensity) > bound, "{a:?} e={e} bound={bound}");
            let idx = d.fleet.index_of(&server.id).unwrap();
            let smaller_available = (0..idx).any(|j| d.availability[j]);
            let dwell_ok = d.state.last_migration_at.is_none_or(|at| t0() - at >= d.cfg.min_dwell);
            let stuck = !smaller_available || !dwell_ok || rules == Rules::VerticalOnly
                || (0..idx).filter(|&j| d.availability[j]).all(|j| {
                    emissions_rate(d.fleet.servers()[j].base_power_w, d.intensity) > bound
                }) && a.is_migration();
            prop_assert!(stuck, "{rules:?} {a:?} leaves {} over the bound", server.id);
        }
    }

    #[test]
    fn efficiency_never_throttles_below_target(d in arb_decision()) {
        let mut d = d;
        d.cfg.quota_mode = QuotaMode::Continuous;
        if d.state.status == Status::Running {
            d.state.quota = d.state.quota.clamp(0.0, 1.0);
        }
        let inputs = PolicyInputs::new(d.demand, d.intensity, t0(), &d.fleet).with_availability(&d.availability);
        let a = decide(&d.cfg, &d.state, &inputs, Rules::Efficiency).unwrap();
        if let Some((server, quota)) = resulting(&d, &a.kind) {
            if d.demand <= server.capacity_multiple {
                let unthrottled = server.power(d.demand / server.capacity_multiple).unwrap();
                if emissions_rate(unthrottled, d.intensity) <= d.cfg.bound() * (1.0 - 1e-9) {
                    let p = server.project(d.demand, quota).unwrap();
                    prop_assert!(p.throttle_baseline_units < 1e-9, "{a:?} throttles {}", p.throttle_baseline_units);
                }
            }
        }
    }

    #[test]
    fn quota_cap_is_the_largest_meeting_bound(
        base in 10.0..200.0f64, ratio in 1.1..3.0f64, intensity in 1.0..900.0f64, c in 1.0..200.0f64, eps in 0.0..0.3f64
    ) {
        let s = ServerSpec::new("s", 1.0, 8, base, base * ratio, 16.0).unwrap();
        let q = max_quota_for_target(&s, intensity, c, eps);
        prop_assert!((0.0..=1.0).contains(&q));
        let bound = (1.0 - eps) * c;
        if q > 0.0 {
            prop_assert!(emissions_rate(s.power(q).unwrap(), intensity) <= bound * (1.0 + 1e-12));
        }
        if q < 1.0 {
            let above = (q + 1e-6).min(1.0);
            prop_assert!(emissions_rate(s.power(above).unwrap(), intensity) > bound);
        }
    }
}

fn close6(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-5 * a.abs().max(b.abs()) + 1e-12
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn carbon_csv_round_trips(series in prop::collection::vec(prop::collection::vec(0.0..2000.0f64, 1..30), 1..4)) {
        let traces: Vec<CarbonTrace> = series
            .iter()
            .enumerate()
            .map(|(r, xs)| {
                let samples = xs
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| CarbonSample { timestamp: t0() + TimeDelta::hours(i as i64), intensity: v })
                    .collect();
                CarbonTrace::new(format!("r{r}"), samples, TimeDelta::hours(1)).unwrap()
            })
            .collect();
        let mut first = Vec::new();
        write_carbon_csv(&traces, &mut first).unwrap();
        let parsed = parse_carbon_traces(first.as_slice(), ParseOptions::default()).unwrap();
        let mut second = Vec::new();
        write_carbon_csv(&parsed, &mut second).unwrap();
        prop_assert_eq!(&first, &second);
        prop_assert_eq!(parsed.len(), traces.len());
        for (a, b) in traces.iter().zip(&parsed) {
            prop_assert_eq!(&a.region, &b.region);
            for (x, y) in a.samples.iter().zip(&b.samples) {
                prop_assert_eq!(x.timestamp, y.timestamp);
                prop_assert!(close6(x.intensity, y.intensity));
            }
        }
    }

    #[test]
    fn workload_csv_round_trips(jobs in prop::collection::vec((prop::collection::vec(0.0..1.0f64, 1..30), 0.1..64.0f64), 1..4)) {
        let traces: Vec<WorkloadTrace> = jobs
            .iter()
            .enumerate()
            .map(|(j, (xs, mem))| {
                let samples = xs
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| WorkloadSample {
                        timestamp: t0() + TimeDelta::minutes(5 * i as i64),
                        cpu_avg: v,
                        cpu_min: v * 0.5,
                        cpu_max: v,
                        mem_gb: *mem,
                    })
                    .collect();
                WorkloadTrace::new(format!("j{j}"), samples, TimeDelta::minutes(5)).unwrap()
            })
            .collect();
        let mut first = Vec::new();
        write_workload_csv(&traces, &mut first).unwrap();
        let parsed = parse_workload_traces(first.as_slice(), ParseOptions::default()).unwrap();
        let mut second = Vec::new();
        write_workload_csv(&parsed, &mut second).unwrap();
        prop_assert_eq!(&first, &second);
        for (a, b) in traces.iter().zip(&parsed) {
            prop_assert_eq!(&a.job_id, &b.job_id);
            for (x, y) in a.samples.iter().zip(&b.samples) {
                prop_assert!(close6(x.cpu_avg, y.cpu_avg) && close6(x.mem_gb, y.mem_gb));
            }
        }
    }

    #[test]
    fn histogram_percentages_sum_to_100(jobs in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 1..20), 1..20)) {
        let traces: Vec<WorkloadTrace> = jobs
            .iter()
            .enumerate()
            .map(|(j, xs)| traces_for_job(j, xs))
            .collect();
        let h = workload_cov_histogram(&traces, &[0.25, 0.5, 1.0]).unwrap();
        let total: f64 = h.buckets.iter().map(|b| b.percent).sum::<f64>() + h.undefined_percent;
        prop_assert!((total - 100.0).abs() <= 0.01);
    }

    #[test]
    fn region_report_is_sorted(series in prop::collection::vec(prop::collection::vec(1.0..900.0f64, 48), 1..6), daily in any::<bool>()) {
        let traces: Vec<CarbonTrace> = series
            .iter()
            .enumerate()
            .map(|(r, xs)| {
                let samples = xs
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| CarbonSample { timestamp: t0() + TimeDelta::hours(i as i64), intensity: v })
                    .collect();
                CarbonTrace::new(format!("r{r}"), samples, TimeDelta::hours(1)).unwrap()
            })
            .collect();
        let mode = if daily { CovMode::DailyAveraged } else { CovMode::WholeSeries };
        let report = carbon_region_report(&traces, mode).unwrap();
        prop_assert!(report.windows(2).all(|w| w[0].cov <= w[1].cov));
    }

    #[test]
    fn trace_lookup_is_constant_within_the_hour(xs in prop::collection::vec(0.0..900.0f64, 1..24), h in 0usize..24, m1 in 0i64..60, m2 in 0i64..60) {
        let samples = xs
            .iter()
            .enumerate()
            .map(|(i, &v)| CarbonSample { timestamp: t0() + TimeDelta::hours(i as i64), intensity: v })
            .collect();
        let p = TraceProvider::new(CarbonTrace::new("r", samples, TimeDelta::hours(1)).unwrap());
        let h = (h % xs.len()) as i64;
        let a = p.intensity_at(t0() + TimeDelta::hours(h) + TimeDelta::minutes(m1)).unwrap();
        let b = p.intensity_at(t0() + TimeDelta::hours(h) + TimeDelta::minutes(m2)).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(a, xs[h as usize]);
    }

    #[test]
    fn power_is_monotone(base in 0.0..500.0f64, extra in 0.0..500.0f64, u1 in 0.0..=1.0f64, u2 in 0.0..=1.0f64) {
        let s = ServerSpec::new("s", 1.0, 8, base, base + extra, 16.0).unwrap();
        let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
        prop_assert!(s.power(lo).unwrap() <= s.power(hi).unwrap());
        prop_assert_eq!(s.power(0.0).unwrap(), base);
        prop_assert_eq!(s.power(1.0).unwrap(), base + extra);
    }

    #[test]
    fn projection_laws(fleet in arb_fleet(), d in 0.0..5.0f64, q in 0.0..=1.0f64) {
        for s in fleet.servers() {
            let p = s.project(d, q).unwrap();
            prop_assert_eq!(p.throttle_baseline_units == 0.0, d <= s.capacity_multiple * q);
            if d < s.capacity_multiple {
                let full = s.project(d, 1.0).unwrap();
                let back = s.infer_demand(full.utilization, 1.0).unwrap();
                prop_assert!((back - d).abs() <= 1e-9);
            }
        }
        for pair in fleet.servers().windows(2) {
            let small = pair[0].project(d, 1.0).unwrap();
            let large = pair[1].project(d, 1.0).unwrap();
            prop_assert!(large.throttle_baseline_units <= small.throttle_baseline_units);
        }
    }

    /// Holds with continuous quotas, no dwell, every server available and
    /// transfers shorter than a step. Each relaxation admits counterexamples.
    #[test]
    fn performance_never_chooses_a_smaller_server(inst in arb_instance()) {
        let mut inst = inst;
        inst.quota_mode = QuotaMode::Continuous;
        inst.dwell_steps = 0;
        inst.availability = 1.0;
        inst.memory_gb = inst.memory_gb.min(16.0);
        let (w, c) = traces(&inst.demand, &inst.intensity);
        let e = run(&w, &c, &config(&inst, PolicyKind::CcEfficiency)).unwrap();
        let p = run(&w, &c, &config(&inst, PolicyKind::CcPerformance)).unwrap();
        for (a, b) in e.records.iter().zip(&p.records) {
            prop_assert!(b.capacity_multiple >= a.capacity_multiple, "at {}: {} vs {}", a.t, b.server_id, a.server_id);
        }
    }
}

fn traces_for_job(j: usize, xs: &[f64]) -> WorkloadTrace {
    let samples = xs
        .iter()
        .enumerate()
        .map(|(i, &v)| WorkloadSample {
            timestamp: t0() + TimeDelta::minutes(5 * i as i64),
            cpu_avg: v,
            cpu_min: v,
            cpu_max: v,
            mem_gb: 1.0,
        })
        .collect();
    WorkloadTrace::new(format!("j{j}"), samples, TimeDelta::minutes(5)).unwrap()
}

/// Every stream over a small value grid, both variants side by side.
#[test]
fn variant_ordering_on_every_small_stream() {
    let demands = [0.1, 0.45, 0.9, 1.7];
    let intensities = [0.0, 60.0, 300.0, 850.0];
    let grid: Vec<(f64, f64)> = demands.iter().flat_map(|&d| intensities.iter().map(move |&i| (d, i))).collect();
    let mut checked = 0;
    for target in [8.0, 30.0, 90.0] {
        for a in &grid {
            for b in &grid {
                for c in &grid {
                    let inst = Instance {
                        fleet: Fleet::standard(),
                        demand: vec![a.0, b.0, c.0],
                        intensity: vec![a.1, b.1, c.1],
                        c_target: target,
                        epsilon: 0.05,
                        quota_mode: QuotaMode::Continuous,
                        dwell_steps: 0,
                        memory_gb: 4.0,
                        live: false,
                        attributed: true,
                        availability: 1.0,
                        seed: 0,
                    };
                    let (w, tr) = traces(&inst.demand, &inst.intensity);
                    let e = run(&w, &tr, &config(&inst, PolicyKind::CcEfficiency)).unwrap();
                    let p = run(&w, &tr, &config(&inst, PolicyKind::CcPerformance)).unwrap();
                    for (x, y) in e.records.iter().zip(&p.records) {
                        assert!(y.capacity_multiple >= x.capacity_multiple, "{inst:?}");
                    }
                    checked += 1;
                }
            }
        }
    }
    assert_eq!(checked, 3 * 16 * 16 * 16);
}
