//! End-to-end scenario execution and artifact writing.
//!
//! One trajectory is simulated from the scenario seed and every engine runs
//! on its observations. Replicates differ only in their sampling streams.
//! All CSV and summary artifacts are deterministic; wall-clock timings go to
//! a separate `timings.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use abpf_core::analysis::bounds::block_shape;
use abpf_core::analysis::{
    monte_carlo_errors, spatial_spread, bias_bound, BoundOptions, BoundReport, ErrorReport,
    InnerExponent,
};
use abpf_core::exact::ExactFilter;
use abpf_core::graph::{partition_stats, PartitionSchedule, PartitionStats};
use abpf_core::model::{check_mixing_bounds, simulate, MixingReport, Trajectory};
use abpf_core::particle::{empirical_local_measure, run_abpf, BlockedEnsemble};
use abpf_core::{DenseDistribution, RngPolicy};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{engine, HarnessError, HarnessResult};
use crate::scenario::{Built, InnerSpec, Scenario};

/// Column layout of `results.csv`.
pub const RESULT_COLUMNS: [&str; 6] = ["engine", "replicate", "time", "site", "metric", "value"];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub engine: String,
    /// Replicate index, or `all` for aggregates.
    pub replicate: String,
    pub time: usize,
    pub site: usize,
    pub metric: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub digest: String,
    pub seed: u64,
    pub artifacts: Vec<PathBuf>,
    /// Exact bias of the scheduled blocked filter, when both exact engines ran.
    pub report: Option<ErrorReport>,
    pub bounds: Option<BoundReport>,
    pub engine_errors: BTreeMap<String, String>,
    pub timings: BTreeMap<String, f64>,
}

pub fn bound_options(s: &Scenario) -> HarnessResult<BoundOptions> {
    Ok(BoundOptions {
        constants: s.bounds.constants()?,
        inner: match s.bounds.inner {
            InnerSpec::PerSchedule => InnerExponent::PerSchedule,
            InnerSpec::ThetaOnly => InnerExponent::ThetaOnly,
        },
    })
}

/// Partition statistics, mixing constants and the bias bound.
pub struct Diagnostics {
    pub stats: PartitionStats,
    pub mixing: MixingReport,
    pub epsilon: f64,
    pub bounds: Result<BoundReport, String>,
}

pub fn diagnostics(s: &Scenario, built: &Built) -> HarnessResult<Diagnostics> {
    let stats = partition_stats(&built.graph, &built.schedule, s.bounds.stats_beta).map_err(engine)?;
    let mixing = check_mixing_bounds(&built.model);
    let epsilon = s.bounds.epsilon.unwrap_or(mixing.epsilon);
    let bounds = bias_bound(&stats, epsilon, mixing.delta, built.graph.radius(), bound_options(s)?)
        .map_err(|e| e.to_string());
    Ok(Diagnostics {
        stats,
        mixing,
        epsilon,
        bounds,
    })
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> HarnessResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let sites = traj.states[0].len();
    let mut header = vec!["time".to_string(), "kind".to_string()];
    header.extend((0..sites).map(|v| format!("x{v}")));
    w.write_record(&header)?;
    for (t, x) in traj.states.iter().enumerate() {
        let mut row = vec![t.to_string(), "state".into()];
        row.extend(x.iter().map(u8::to_string));
        w.write_record(&row)?;
        if t > 0 {
            let mut row = vec![t.to_string(), "observation".into()];
            row.extend(traj.observations[t - 1].iter().map(u8::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `site, metric, value` rows for θ_m, ϑ_m, Δ_d, ∇_d and every `d(v, ∂K_j(v))`.
pub fn write_stats(path: &Path, stats: &PartitionStats) -> HarnessResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["site", "metric", "value"])?;
    for v in 0..stats.vertex_count() {
        let mut put = |metric: String, value: String| w.write_record([v.to_string(), metric, value]);
        put("theta_m".into(), stats.theta_m[v].to_string())?;
        put("vartheta_m".into(), stats.vartheta_m[v].to_string())?;
        put("delta_d".into(), stats.delta_d[v].to_string())?;
        put("nabla_d".into(), stats.nabla_d[v].to_string())?;
        for (j, row) in stats.boundary_distances.iter().enumerate() {
            let d = if row[v] == usize::MAX { "inf".to_string() } else { row[v].to_string() };
            put(format!("boundary_distance_{j}"), d)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_bounds(path: &Path, bounds: &BoundReport) -> HarnessResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["site", "metric", "value"])?;
    for (v, (a, b)) in bounds.first_rhs.iter().zip(&bounds.second_rhs).enumerate() {
        w.write_record([v.to_string(), "first_rhs".into(), a.to_string()])?;
        w.write_record([v.to_string(), "second_rhs".into(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn stats_json(stats: &PartitionStats) -> Value {
    json!({
        "m": stats.m(),
        "beta": stats.beta,
        "theta_m": stats.theta_m,
        "vartheta_m": stats.vartheta_m,
        "delta": stats.delta,
        "delta_k": stats.delta_k,
        "delta_d": stats.delta_d,
        "nabla_d": stats.nabla_d,
        "block_size_max": stats.block_size_max,
        "theta_lower": stats.theta_lower,
        "vartheta_upper": stats.vartheta_upper,
        "has_unbounded": stats.has_unbounded,
    })
}

pub fn bounds_json(b: &BoundReport) -> Value {
    json!({
        "epsilon": b.epsilon,
        "epsilon0": b.epsilon0,
        "beta": b.beta,
        "first_rhs": b.first_rhs,
        "second_rhs": b.second_rhs,
        "epsilon_above_threshold": b.hypotheses.epsilon_above_threshold,
        "bounded_boundaries": b.hypotheses.bounded_boundaries,
    })
}

fn grid_rows(rows: &mut Vec<Row>, engine: &str, metric: &'static str, values: &[Vec<f64>]) {
    for (t, per_site) in values.iter().enumerate() {
        for (v, &value) in per_site.iter().enumerate() {
            rows.push(Row {
                engine: engine.to_string(),
                replicate: "all".into(),
                time: t,
                site: v,
                metric,
                value,
            });
        }
    }
}

fn window_rows(rows: &mut Vec<Row>, engine: &str, report: &ErrorReport) {
    let n = report.bias.len() - 1;
    for (v, &value) in report.bias_window.iter().enumerate() {
        rows.push(Row {
            engine: engine.to_string(),
            replicate: "all".into(),
            time: n,
            site: v,
            metric: "bias_window",
            value,
        });
    }
}

/// Posterior probability of state 1 at every site.
fn site_p1(e: &BlockedEnsemble) -> abpf_core::Result<Vec<f64>> {
    (0..e.site_count())
        .map(|v| {
            let m = empirical_local_measure(e, &[v])?;
            Ok(m.probs().get(1).copied().unwrap_or(0.0))
        })
        .collect()
}

struct ParticleEngine {
    name: &'static str,
    schedule: PartitionSchedule,
    /// Exact law of the ideal filter this engine approximates.
    ideal: Option<Vec<DenseDistribution>>,
}

fn write_rows(path: &Path, rows: &[Row]) -> HarnessResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.engine.clone(),
            r.replicate.clone(),
            r.time.to_string(),
            r.site.to_string(),
            r.metric.to_string(),
            r.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every selected engine and writes artifacts under `out`.
pub fn run_scenario(s: &Scenario, out: &Path) -> HarnessResult<RunResult> {
    let built = s.validate()?;
    let seed = s.seed()?;
    let digest = s.digest();
    fs::create_dir_all(out)?;
    let mut artifacts = Vec::new();
    let mut timings = BTreeMap::new();
    let mut engine_errors = BTreeMap::new();
    let mut rows = Vec::new();
    let mut summary = serde_json::Map::new();
    summary.insert("digest".into(), json!(digest));
    summary.insert("seed".into(), json!(seed));
    summary.insert("scenario".into(), serde_json::to_value(s).expect("scenario serializes"));

    let clock = Instant::now();
    let traj = simulate(&built.model, &built.mu, s.horizon, seed).map_err(engine)?;
    timings.insert("simulate".to_string(), clock.elapsed().as_secs_f64());
    let path = out.join("trajectory.csv");
    write_trajectory(&path, &traj)?;
    artifacts.push(path);

    let diag = diagnostics(s, &built)?;
    let path = out.join("stats.csv");
    write_stats(&path, &diag.stats)?;
    artifacts.push(path);
    summary.insert("stats".into(), stats_json(&diag.stats));
    summary.insert(
        "mixing".into(),
        json!({
            "epsilon": diag.mixing.epsilon,
            "kappa": diag.mixing.kappa,
            "delta": diag.mixing.delta,
            "epsilon0": diag.mixing.epsilon0,
            "passes_threshold": diag.mixing.passes_threshold,
            "epsilon_used": diag.epsilon,
        }),
    );
    let bounds = match &diag.bounds {
        Ok(b) => {
            let path = out.join("bounds.csv");
            write_bounds(&path, b)?;
            artifacts.push(path);
            summary.insert("bounds".into(), bounds_json(b));
            Some(b.clone())
        }
        Err(msg) => {
            summary.insert("bounds".into(), json!({ "refused": msg }));
            None
        }
    };

    // Exact references.
    let mut exact = None;
    let mut blocked = None;
    let mut fixed: Vec<Option<Vec<DenseDistribution>>> = vec![None; built.schedule.m()];
    if s.engines.exact || s.engines.blocked_exact {
        let filter = ExactFilter::new(&built.model).map_err(engine)?;
        if s.engines.exact {
            let clock = Instant::now();
            match filter.run(&built.mu, &traj.observations) {
                Ok(r) => exact = Some(r),
                Err(e) => {
                    engine_errors.insert("exact".to_string(), e.to_string());
                }
            }
            timings.insert("exact".to_string(), clock.elapsed().as_secs_f64());
        }
        if s.engines.blocked_exact {
            let clock = Instant::now();
            match filter.run_blocked(&built.mu, &traj.observations, &built.schedule) {
                Ok(r) => blocked = Some(r),
                Err(e) => {
                    engine_errors.insert("blocked-exact".to_string(), e.to_string());
                }
            }
            for (j, slot) in fixed.iter_mut().enumerate() {
                let sched = PartitionSchedule::fixed(built.schedule.partition(j).clone());
                match filter.run_blocked(&built.mu, &traj.observations, &sched) {
                    Ok(r) => *slot = Some(r),
                    Err(e) => {
                        engine_errors.insert(format!("blocked-exact-fixed{j}"), e.to_string());
                    }
                }
            }
            timings.insert("blocked-exact".to_string(), clock.elapsed().as_secs_f64());
        }
    }

    let mut report = None;
    let mut profiles = serde_json::Map::new();
    if let Some(pi) = &exact {
        let labelled = std::iter::once(("blocked-exact".to_string(), blocked.as_ref()))
            .chain(fixed.iter().enumerate().map(|(j, f)| (format!("blocked-exact-fixed{j}"), f.as_ref())));
        for (label, tilde) in labelled {
            let Some(tilde) = tilde else { continue };
            let r = ErrorReport::from_filters(pi, tilde, s.window).map_err(engine)?;
            grid_rows(&mut rows, &label, "bias", &r.bias);
            window_rows(&mut rows, &label, &r);
            profiles.insert(
                label.clone(),
                json!({
                    "bias_window": r.bias_window,
                    "spread_range": r.bias_spread.0,
                    "spread_std": r.bias_spread.1,
                    "mean": r.bias_window.iter().sum::<f64>() / r.bias_window.len() as f64,
                }),
            );
            if label == "blocked-exact" {
                report = Some(r);
            }
        }
    }
    summary.insert("bias_profiles".into(), Value::Object(profiles));

    // Particle engines.
    let mut particle_engines = Vec::new();
    if s.engines.bootstrap {
        particle_engines.push(ParticleEngine {
            name: "bootstrap",
            schedule: PartitionSchedule::trivial(built.graph.vertex_count()),
            ideal: exact.clone(),
        });
    }
    if s.engines.blocked_pf {
        particle_engines.push(ParticleEngine {
            name: "blocked-pf",
            schedule: PartitionSchedule::fixed(built.schedule.partition(0).clone()),
            ideal: fixed[0].clone(),
        });
    }
    if s.engines.abpf {
        particle_engines.push(ParticleEngine {
            name: "abpf",
            schedule: built.schedule.clone(),
            ideal: blocked.clone(),
        });
    }
    let policy = RngPolicy::new(seed);
    let mut mc = serde_json::Map::new();
    for pe in &particle_engines {
        for &n in &s.particles {
            let label = format!("{}/N={n}", pe.name);
            let clock = Instant::now();
            let runs: abpf_core::Result<Vec<Vec<BlockedEnsemble>>> = (0..s.replicates as u64)
                .into_par_iter()
                .map(|r| run_abpf(&built.model, &built.mu, &traj.observations, &pe.schedule, n, &policy, r))
                .collect();
            timings.insert(label.clone(), clock.elapsed().as_secs_f64());
            let runs = match runs {
                Ok(r) => r,
                Err(e) => {
                    engine_errors.insert(label, e.to_string());
                    continue;
                }
            };
            let outcome: abpf_core::Result<()> = (|| {
                for (r, run) in runs.iter().enumerate() {
                    for (t, e) in run.iter().enumerate() {
                        for (v, p) in site_p1(e)?.into_iter().enumerate() {
                            rows.push(Row {
                                engine: label.clone(),
                                replicate: r.to_string(),
                                time: t,
                                site: v,
                                metric: "p1",
                                value: p,
                            });
                        }
                    }
                }
                let mut entry = serde_json::Map::new();
                if let Some(pi) = &exact {
                    let total = monte_carlo_errors(&runs, pi)?;
                    grid_rows(&mut rows, &label, "total", &total);
                    let last = total.last().expect("non-empty");
                    entry.insert("total_final_mean".into(), json!(last.iter().sum::<f64>() / last.len() as f64));
                    entry.insert("total_final_spread".into(), json!(spatial_spread(last)?.0));
                }
                if let Some(ideal) = &pe.ideal {
                    let variance = monte_carlo_errors(&runs, ideal)?;
                    grid_rows(&mut rows, &label, "variance", &variance);
                }
                let k = pe.schedule.max_block_size();
                if let Ok(shape) = block_shape(k, n, s.bounds.alpha, s.bounds.variance_beta) {
                    entry.insert("variance_shape".into(), json!(shape));
                }
                mc.insert(label.clone(), Value::Object(entry));
                Ok(())
            })();
            if let Err(e) = outcome {
                engine_errors.insert(label.clone(), e.to_string());
            }
            let dir = out.join("ensembles");
            fs::create_dir_all(&dir)?;
            let path = dir.join(format!("{}-N{n}.csv", pe.name));
            let final_ensemble = runs[0].last().expect("non-empty");
            final_ensemble
                .write_csv(fs::File::create(&path)?)
                .map_err(engine)?;
            artifacts.push(path);
        }
    }
    summary.insert("particles".into(), Value::Object(mc));
    summary.insert("engine_errors".into(), json!(engine_errors));

    let path = out.join("results.csv");
    write_rows(&path, &rows)?;
    artifacts.push(path);
    let path = out.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&Value::Object(summary)).expect("json"))?;
    artifacts.push(path);
    let path = out.join("timings.json");
    fs::write(&path, serde_json::to_string_pretty(&timings).expect("json"))?;
    artifacts.push(path);

    Ok(RunResult {
        digest,
        seed,
        artifacts,
        report,
        bounds,
        engine_errors,
        timings,
    })
}

impl RunResult {
    /// Engine failures as an error, for the CLI exit status.
    pub fn check(&self) -> HarnessResult<()> {
        if self.engine_errors.is_empty() {
            Ok(())
        } else {
            let msgs: Vec<String> = self
                .engine_errors
                .iter()
                .map(|(k, v)| format!("{k}: {v}"))
                .collect();
            Err(HarnessError::Engine(msgs.join("; ")))
        }
    }
}
