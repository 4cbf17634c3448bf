use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use uavplan_core::calibration::{self, FitResult};
use uavplan_core::decision::{self, DecisionError};
use uavplan_core::energy::{self, AltitudeRange};
use uavplan_core::metrics;
use uavplan_core::profiles::{self, MissionProfiles, ModelPerfTable};
use uavplan_core::report::{self as savings_report, Comparison};
use uavplan_core::sampling::{self, RateSearchConfig, RateSearchResult};
use uavplan_core::simulator::{self, DetectabilityModel, Scene, SceneSpec};
use uavplan_core::{Candidate, FlightParams};

use crate::report::RunContext;
use crate::{
    Calibrate, Command, CompareArgs, DecideArgs, EnergyArgs, MetricsArgs, Outcome, SearchArgs,
    SimulateArgs, PROFILE_DIR_ENV,
};

const DEFAULT_GRID: [f64; 9] = [20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0];

pub fn run(command: &Command, ctx: &mut RunContext) -> Result<Outcome> {
    match command {
        Command::Calibrate(c) => calibrate(c, ctx),
        Command::Energy(a) => energy_cmd(a, ctx),
        Command::Metrics(a) => metrics_cmd(a, ctx),
        Command::SearchRate(a) => search_cmd(a, ctx),
        Command::Decide(a) => decide_cmd(a, ctx),
        Command::Simulate(a) => simulate_cmd(a, ctx),
        Command::Compare(a) => compare_cmd(a, ctx),
    }
}

fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("output serializes")
}

fn ok(output: Value, text: String) -> Result<Outcome> {
    Ok(Outcome {
        output,
        text,
        infeasible: false,
    })
}

fn tag<E: std::fmt::Display>(module: &'static str) -> impl Fn(E) -> anyhow::Error {
    move |e| anyhow!("{module}: {e}")
}

fn profile_dir() -> Option<PathBuf> {
    std::env::var_os(PROFILE_DIR_ENV).map(PathBuf::from)
}

fn profiles_path(arg: &Option<PathBuf>) -> Result<PathBuf> {
    match (arg, profile_dir()) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(dir)) => Ok(dir.join("profiles.json")),
        (None, None) => bail!("cli: no profiles given; pass --profiles or set {PROFILE_DIR_ENV}"),
    }
}

fn load_profiles(arg: &Option<PathBuf>, ctx: &mut RunContext) -> Result<MissionProfiles> {
    let path = profiles_path(arg)?;
    ctx.record(&path)?;
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("profiles: cannot read {}", path.display()))?;
    let p: MissionProfiles = serde_json::from_str(&text)
        .map_err(|e| anyhow!("profiles: {}: {e}", path.display()))?;
    for w in p.validate().map_err(tag("profiles"))? {
        ctx.warn("profiles", w);
    }
    Ok(p)
}

fn read_json<T: for<'de> serde::Deserialize<'de>>(
    path: &Path,
    module: &'static str,
    ctx: &mut RunContext,
) -> Result<T> {
    ctx.record(path)?;
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("{module}: cannot read {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| anyhow!("{module}: {}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes") + "\n";
    std::fs::write(path, text).with_context(|| format!("cli: cannot write {}", path.display()))
}

fn fit_text(name: &str, fit: &FitResult) -> String {
    let value = if fit.value.abs() < 1e-2 {
        format!("{:.6e}", fit.value)
    } else {
        format!("{:.6}", fit.value)
    };
    let mut s = format!(
        "{name} = {value}\nsamples = {}\nresidual rms = {:.6}",
        fit.sample_count, fit.residual_rms
    );
    if let Some(cv) = fit.cv {
        let _ = write!(s, "\nflight-time cv = {:.2}%", 100.0 * cv);
    }
    s
}

fn calibrate(c: &Calibrate, ctx: &mut RunContext) -> Result<Outcome> {
    match c {
        Calibrate::Camera { log } => {
            ctx.record(log)?;
            let samples = calibration::load_footprint_log(log).map_err(tag("calibration"))?;
            let fit = calibration::fit_theta(&samples).map_err(tag("calibration"))?;
            ok(to_value(&fit), fit_text("theta", &fit))
        }
        Calibrate::Uav {
            log,
            theta,
            profiles,
        } => {
            let camera = match theta {
                Some(t) => profiles::CameraProfile::new(*t),
                None => load_profiles(profiles, ctx)?.camera,
            };
            ctx.record(log)?;
            let samples = calibration::load_endurance_log(log).map_err(tag("calibration"))?;
            let fit = calibration::fit_alpha(&samples, &camera).map_err(tag("calibration"))?;
            if fit.cv_exceeds_threshold() {
                ctx.warn(
                    "calibration",
                    format!(
                        "flight-time cv {:.2}% exceeds {:.0}%; flight time may depend on altitude or speed",
                        100.0 * fit.cv.unwrap_or(0.0),
                        100.0 * calibration::CV_WARN_THRESHOLD
                    ),
                );
            }
            ok(to_value(&fit), fit_text("alpha", &fit))
        }
    }
}

fn range_text(label: &str, r: &AltitudeRange) -> String {
    format!(
        "{label}: target {:.3} Wh/km², equal-energy altitude {:.2} m, grid step {:.1} m, n = {}",
        r.p_target, r.equal_energy_altitude, r.spacing, r.n
    )
}

fn energy_cmd(a: &EnergyArgs, ctx: &mut RunContext) -> Result<Outcome> {
    let p = load_profiles(&a.profiles, ctx)?;
    let params = FlightParams {
        model_id: a.model.clone(),
        h: a.alt,
        v: a.speed,
        r: a.rate,
    };
    let b = energy::system_energy(&p, &params).map_err(tag("energy"))?;
    let grid = a.grid.clone().unwrap_or_else(|| DEFAULT_GRID.to_vec());
    let derived = energy::derive_altitude_range(&p, &grid, p.uav.v_max, None).map_err(tag("energy"))?;
    let explicit = a
        .p_target
        .map(|t| energy::derive_altitude_range(&p, &grid, p.uav.v_max, Some(t)))
        .transpose()
        .map_err(tag("energy"))?;
    for w in derived.warnings.iter().chain(explicit.iter().flat_map(|r| &r.warnings)) {
        ctx.warn("energy", w.clone());
    }
    let mut text = format!(
        "model {}  h {} m  v {} m/s  r {} Hz\n\
         P_uav          {:>10.3} Wh/km²\n\
         P_edge run     {:>10.3} Wh/km²\n\
         P_edge standby {:>10.3} Wh/km²\n\
         P_system       {:>10.3} Wh/km²\n",
        params.model_id, params.h, params.v, params.r, b.p_uav, b.p_edge_run, b.p_edge_standby, b.p_system
    );
    text.push_str(&range_text("altitude range (full-rate target)", &derived));
    if let Some(r) = &explicit {
        text.push('\n');
        text.push_str(&range_text("altitude range (given target)", r));
    }
    ok(
        json!({
            "params": params,
            "energy": b,
            "altitude_range": derived,
            "altitude_range_given_target": explicit,
        }),
        text,
    )
}

fn metrics_text(m: &metrics::MetricReport) -> String {
    let precision = if m.precision_defined {
        format!("{:.4}", m.precision)
    } else {
        format!("{:.4} (no detections)", m.precision)
    };
    let recall = if m.recall_defined {
        format!("{:.4}", m.recall)
    } else {
        format!("{:.4} (no tracks)", m.recall)
    };
    format!(
        "TP1 {}  FP {}  TP2 {}  FN {}\nprecision {precision}\nrecall    {recall}",
        m.tp1, m.fp, m.tp2, m.fn_
    )
}

fn metrics_cmd(a: &MetricsArgs, ctx: &mut RunContext) -> Result<Outcome> {
    ctx.record(&a.trace)?;
    ctx.record(&a.truth)?;
    let mut trace = metrics::load_trace(&a.trace).map_err(tag("metrics"))?;
    let truth = metrics::load_truth(&a.truth).map_err(tag("metrics"))?;
    if let Some(rate) = a.rate {
        if !(rate > 0.0) {
            bail!("metrics: --rate must be > 0, got {rate}");
        }
        trace = trace.subsample(rate);
    }
    let m = metrics::evaluate(&trace, &truth, a.iou).map_err(tag("metrics"))?;
    ok(to_value(&m), metrics_text(&m))
}

fn native_rate(trace: &metrics::DetectionTrace) -> Option<f64> {
    let (first, last) = (trace.frames.first()?, trace.frames.last()?);
    let span = last.timestamp - first.timestamp;
    (span > 0.0).then(|| (trace.frames.len() - 1) as f64 / span)
}

fn search_text(r: &RateSearchResult) -> String {
    let mut s = format!(
        "rate {:.4} Hz  recall {:.4}  oracle calls {}\nprobes:",
        r.rate, r.recall, r.oracle_calls
    );
    for p in &r.evaluations {
        let _ = write!(s, "\n  {:>10.4} Hz  {:.4}", p.rate, p.recall);
    }
    s
}

fn search_cmd(a: &SearchArgs, ctx: &mut RunContext) -> Result<Outcome> {
    let r1 = match (a.r1, a.d_far, a.speed) {
        (Some(r1), _, _) => r1,
        (None, Some(d), Some(v)) => sampling::initial_rate(d, v)
            .ok_or_else(|| anyhow!("sampling: --d-far and --speed must be > 0"))?,
        _ => bail!("sampling: give --r1, or --d-far with --speed"),
    };
    let result = if let (Some(trace_path), Some(truth_path)) = (&a.trace, &a.truth) {
        ctx.record(trace_path)?;
        ctx.record(truth_path)?;
        let trace = metrics::load_trace(trace_path).map_err(tag("metrics"))?;
        let truth = metrics::load_truth(truth_path).map_err(tag("metrics"))?;
        let config = RateSearchConfig {
            r1,
            epsilon: a.epsilon,
            r_limit: a.r_limit.or_else(|| native_rate(&trace)),
        };
        sampling::search(&config, |r| {
            metrics::evaluate(&trace.subsample(r), &truth, a.iou).map(|m| m.recall)
        })
        .map_err(tag("sampling"))?
    } else if let Some(scene_path) = &a.scene {
        let need = |what: &str| anyhow!("sampling: the simulated oracle needs --{what}");
        let spec: SceneSpec = read_json(scene_path, "simulator", ctx)?;
        let det_path = a.detectability.as_ref().ok_or_else(|| need("detectability"))?;
        let detectability: DetectabilityModel = read_json(det_path, "simulator", ctx)?;
        detectability.validate().map_err(tag("simulator"))?;
        let p = load_profiles(&a.profiles, ctx)?;
        let model = a.model.as_ref().ok_or_else(|| need("model"))?;
        let h = a.alt.ok_or_else(|| need("alt"))?;
        let v = a.speed.ok_or_else(|| need("speed"))?;
        let r_max = p
            .edge
            .model(model)
            .ok_or_else(|| anyhow!("sampling: unknown model `{model}`"))?
            .r_max;
        let scenes = scene_ensemble(&spec, a.seeds)?;
        let config = RateSearchConfig {
            r1,
            epsilon: a.epsilon,
            r_limit: Some(a.r_limit.map_or(r_max, |l| l.min(r_max))),
        };
        sampling::search(&config, |r| {
            simulator::mean_recall(&scenes, &p, &detectability, model, h, v, r)
        })
        .map_err(tag("sampling"))?
    } else {
        bail!("sampling: give --trace/--truth or --scene for the recall oracle");
    };
    log::debug!(
        "doubling peaked at {} Hz after {} oracle calls",
        result.doubling_peak,
        result.oracle_calls
    );
    ok(to_value(&result), search_text(&result))
}

fn scene_ensemble(spec: &SceneSpec, seeds: u64) -> Result<Vec<Scene>> {
    if seeds == 0 {
        bail!("simulator: --seeds must be at least 1");
    }
    (0..seeds)
        .map(|k| {
            let mut s = spec.clone();
            s.seed = spec.seed.wrapping_add(k);
            simulator::generate_scene(&s).map_err(tag("simulator"))
        })
        .collect()
}

fn table_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("profiles: cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    Ok(paths)
}

fn candidate_line(c: &Candidate) -> String {
    format!(
        "{:<10} {:>7.1} {:>7.3} {:>8.4} {:>7.4} {:>10.4}",
        c.params.model_id, c.params.h, c.params.v, c.params.r, c.perf, c.energy
    )
}

fn decide_cmd(a: &DecideArgs, ctx: &mut RunContext) -> Result<Outcome> {
    let mut p = load_profiles(&a.profiles, ctx)?;
    let tables_dir = a
        .tables
        .clone()
        .or_else(|| profile_dir().map(|d| d.join("tables")).filter(|d| d.is_dir()));
    if let Some(dir) = &tables_dir {
        let files = table_files(dir)?;
        for f in &files {
            ctx.record(f)?;
        }
        let tables = profiles::load_tables_dir(dir).map_err(tag("profiles"))?;
        for w in p.add_tables(tables).map_err(tag("profiles"))? {
            ctx.warn("profiles", w);
        }
    }
    if let Some(v) = a.perf_min {
        p.task.perf_min = v;
    }
    if let Some(v) = a.beta {
        p.task.beta = v;
    }
    if a.n.is_some() {
        p.task.n = a.n;
    }
    p.task.validate("task").map_err(tag("profiles"))?;
    if p.tables.is_empty() {
        bail!("decision: no performance tables; pass --tables or include them in the profiles");
    }
    let task = p.task.clone();
    if task.n.is_none() {
        for t in &p.tables {
            let r = energy::derive_altitude_range(&p, &t.altitudes, p.uav.v_max, None)
                .map_err(tag("energy"))?;
            for w in r.warnings {
                ctx.warn("energy", format!("{}: {w}", t.model_id));
            }
        }
    }

    let mut candidates = Vec::new();
    for t in &p.tables {
        candidates.extend(decision::decide_single_model(t, &p, &task).map_err(tag("decision"))?);
    }
    let audit = if a.audit {
        Some(decision::audit(&p.tables, &p, &task).map_err(tag("decision"))?)
    } else {
        None
    };

    let mut text = format!(
        "{:<10} {:>7} {:>7} {:>8} {:>7} {:>10}\n",
        "model", "h (m)", "v (m/s)", "r (Hz)", "perf", "Wh/km²"
    );
    for c in &candidates {
        text.push_str(&candidate_line(c));
        text.push('\n');
    }
    match decision::decide(&p.tables, &p, &task) {
        Ok(rec) => {
            let _ = write!(
                text,
                "\nrecommended: {}\nminimum energy {:.4} Wh/km², {} of {} candidates beyond beta = {}",
                candidate_line(&rec.chosen),
                rec.energy_min,
                rec.filtered_by_beta,
                rec.candidates_considered,
                task.beta
            );
            if let Some(audit) = &audit {
                audit_text(&mut text, audit);
            }
            ok(
                json!({ "recommendation": rec, "candidates": candidates, "audit": audit }),
                text,
            )
        }
        Err(DecisionError::Infeasible {
            perf_min,
            best_perf_max,
        }) => {
            let _ = write!(
                text,
                "\ninfeasible: no flight reaches perf_min {perf_min}; best perf_max is {best_perf_max}"
            );
            Ok(Outcome {
                output: json!({
                    "infeasible": { "perf_min": perf_min, "best_perf_max": best_perf_max },
                    "candidates": candidates,
                    "audit": audit,
                }),
                text,
                infeasible: true,
            })
        }
        Err(e) => Err(anyhow!("decision: {e}")),
    }
}

fn audit_text(text: &mut String, audit: &decision::AuditReport) {
    let _ = write!(
        text,
        "\naudit: windowed decision {} the pruned exhaustive search",
        if audit.oracle_agrees { "matches" } else { "DIFFERS from" }
    );
    if let Some(u) = &audit.brute_force_unpruned {
        let _ = write!(text, "\nunwindowed optimum: {}", candidate_line(&u.chosen));
    }
    if let (Some(e), Some(p)) = (audit.regret_energy, audit.regret_perf) {
        let _ = write!(text, "\npruning regret: energy {e:+.4} Wh/km², perf {p:+.4}");
    }
}

fn simulate_cmd(a: &SimulateArgs, ctx: &mut RunContext) -> Result<Outcome> {
    let spec: SceneSpec = read_json(&a.scene, "simulator", ctx)?;
    spec.validate().map_err(tag("simulator"))?;
    let detectability: DetectabilityModel = read_json(&a.detectability, "simulator", ctx)?;
    detectability.validate().map_err(tag("simulator"))?;
    let p = load_profiles(&a.profiles, ctx)?;
    let models: Vec<String> = match &a.model {
        Some(m) => m.clone(),
        None => {
            let mut ids: Vec<String> = Vec::new();
            for e in &detectability.entries {
                if !ids.contains(&e.model_id) {
                    ids.push(e.model_id.clone());
                }
            }
            ids
        }
    };
    let altitudes = a.altitudes.clone().unwrap_or_else(|| DEFAULT_GRID.to_vec());
    let speeds = a
        .speeds
        .clone()
        .unwrap_or_else(|| vec![2.0, 4.0, 6.0, 8.0, p.uav.v_max]);
    std::fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("cli: cannot create {}", a.out_dir.display()))?;

    let mut written = Vec::new();
    let footprint = simulator::synthetic_footprint_log(&p.camera, &altitudes, a.repeats, a.noise, a.log_seed);
    let path = a.out_dir.join("footprint.csv");
    let file = std::fs::File::create(&path).with_context(|| format!("cli: cannot write {}", path.display()))?;
    calibration::write_footprint_log(file, &footprint).map_err(tag("calibration"))?;
    written.push(path);
    let endurance = simulator::synthetic_endurance_log(&p, &altitudes, &speeds, a.noise, a.log_seed);
    let path = a.out_dir.join("endurance.csv");
    let file = std::fs::File::create(&path).with_context(|| format!("cli: cannot write {}", path.display()))?;
    calibration::write_endurance_log(file, &endurance).map_err(tag("calibration"))?;
    written.push(path);

    if let Some(f) = &a.flight {
        let [h, v, r] = f[..] else {
            bail!("simulator: --flight takes ALT,SPEED,RATE");
        };
        let model = models
            .first()
            .ok_or_else(|| anyhow!("simulator: no model to fly"))?;
        let scene = simulator::generate_scene(&spec).map_err(tag("simulator"))?;
        let params = FlightParams {
            model_id: model.clone(),
            h,
            v,
            r,
        };
        let flight = simulator::simulate_flight(&scene, &p, &detectability, &params)
            .map_err(tag("simulator"))?;
        for (name, value) in [
            ("trace.json", to_value(&flight.trace)),
            ("truth.json", to_value(&flight.truth)),
        ] {
            let path = a.out_dir.join(name);
            write_json(&path, &value)?;
            written.push(path);
        }
    }

    let mut tables: Vec<ModelPerfTable> = Vec::new();
    if let Some(rates) = &a.rates {
        let scenes = scene_ensemble(&spec, a.seeds)?;
        let dir = a.out_dir.join("tables");
        std::fs::create_dir_all(&dir).with_context(|| format!("cli: cannot create {}", dir.display()))?;
        for model in &models {
            let r_max = p
                .edge
                .model(model)
                .ok_or_else(|| anyhow!("simulator: unknown model `{model}`"))?
                .r_max;
            let usable: Vec<f64> = rates.iter().copied().filter(|&r| r <= r_max).collect();
            if usable.len() < rates.len() {
                ctx.warn(
                    "simulator",
                    format!("{model}: dropped {} rates above r_max {r_max}", rates.len() - usable.len()),
                );
            }
            if usable.is_empty() {
                ctx.warn("simulator", format!("{model}: no usable rates; table skipped"));
                continue;
            }
            let table = simulator::build_perf_table(
                &scenes,
                &p,
                &detectability,
                model,
                &altitudes,
                &usable,
                a.benchmark_speed,
            )
            .map_err(tag("simulator"))?;
            let path = dir.join(format!("{model}.json"));
            profiles::save_table(&path, &table).map_err(tag("profiles"))?;
            written.push(path);
            tables.push(table);
        }
    }

    let files: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
    let mut text = String::from("wrote:");
    for f in &files {
        let _ = write!(text, "\n  {f}");
    }
    for t in &tables {
        let shown: Vec<String> = t.perf_max.iter().map(|v| format!("{v:.3}")).collect();
        let _ = write!(text, "\n{} perf_max: [{}]", t.model_id, shown.join(", "));
    }
    ok(json!({ "files": files, "tables": tables }), text)
}

fn compare_cmd(a: &CompareArgs, ctx: &mut RunContext) -> Result<Outcome> {
    let mut reports = Vec::new();
    let mut text = String::new();
    for path in &a.inputs {
        let c: Comparison = read_json(path, "report", ctx)?;
        let r = savings_report::savings(&c).map_err(tag("report"))?;
        let _ = writeln!(
            text,
            "{}: recommended `{}` at {:.3} Wh",
            r.name, r.recommended, r.recommended_energy
        );
        for s in &r.savings {
            let _ = writeln!(text, "  {:<20} {:>8.3} Wh  saving {:>7.2}%", s.label, s.energy, 100.0 * s.ratio);
        }
        if let Some(m) = r.max_saving {
            let _ = writeln!(text, "  largest saving {:.2}%", 100.0 * m);
        }
        reports.push(r);
    }
    ok(to_value(&reports), text.trim_end().to_string())
}
