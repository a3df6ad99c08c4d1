//! Thin console wrappers around the statistics, bound and correlation tools.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use abpf_core::analysis::bounds::bias_rate;
use abpf_core::analysis::{block_corr_measure, corr_measure};
use abpf_core::exact::ExactFilter;
use abpf_core::model::simulate;

use crate::error::{engine, HarnessError, HarnessResult};
use crate::runner::{diagnostics, write_bounds, write_stats};
use crate::scenario::Scenario;

fn fmt(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x:.6}")
    }
}

pub fn cmd_stats(s: &Scenario, out: &Path) -> HarnessResult<String> {
    let built = s.validate()?;
    let d = diagnostics(s, &built)?;
    fs::create_dir_all(out)?;
    write_stats(&out.join("stats.csv"), &d.stats)?;
    let st = &d.stats;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "m = {}  Δ = {}  Δ_K = {}  |K|_∞ = {}  β = {}",
        st.m(),
        st.delta,
        st.delta_k,
        st.block_size_max,
        st.beta
    );
    let _ = writeln!(text, "{:>4}  {:>10}  {:>10}  {:>4}  {:>4}", "site", "theta_m", "vartheta_m", "Δ_d", "∇_d");
    for v in 0..st.vertex_count() {
        let _ = writeln!(
            text,
            "{v:>4}  {:>10}  {:>10}  {:>4}  {:>4}",
            fmt(st.theta_m[v]),
            fmt(st.vartheta_m[v]),
            st.delta_d[v],
            st.nabla_d[v]
        );
    }
    Ok(text)
}

pub fn cmd_bounds(s: &Scenario, out: &Path) -> HarnessResult<String> {
    let built = s.validate()?;
    let d = diagnostics(s, &built)?;
    let b = d.bounds.map_err(HarnessError::Engine)?;
    fs::create_dir_all(out)?;
    write_bounds(&out.join("bounds.csv"), &b)?;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "ε = {}  ε_0 = {}  β = {}  ε > ε_0 (18): {}",
        b.epsilon, b.epsilon0, fmt(b.beta), b.hypotheses.epsilon_above_threshold
    );
    let _ = writeln!(text, "{:>4}  {:>12}  {:>12}", "site", "first_rhs", "second_rhs");
    for v in 0..b.first_rhs.len() {
        let _ = writeln!(text, "{v:>4}  {:>12}  {:>12}", fmt(b.first_rhs[v]), fmt(b.second_rhs[v]));
    }
    Ok(text)
}

/// Correlation tables of the blocked exact filter along the scenario's
/// trajectory, for the full conditional and for every partition.
pub fn cmd_diagnose_corr(s: &Scenario, out: &Path) -> HarnessResult<String> {
    let built = s.validate()?;
    let d = diagnostics(s, &built)?;
    let beta = match bias_rate(d.epsilon, d.mixing.delta, built.graph.radius(), s.bounds.constants()?) {
        Ok(b) if b.is_finite() => b,
        _ => s.bounds.stats_beta,
    };
    let traj = simulate(&built.model, &built.mu, s.horizon, s.seed()?).map_err(engine)?;
    let filter = ExactFilter::new(&built.model).map_err(engine)?;
    let laws = filter
        .run_blocked(&built.mu, &traj.observations, &built.schedule)
        .map_err(engine)?;

    fs::create_dir_all(out)?;
    let mut table = csv::Writer::from_path(out.join("corr.csv"))?;
    table.write_record(["time", "measure", "v", "v_prime", "value"])?;
    let mut summary = csv::Writer::from_path(out.join("corr_summary.csv"))?;
    summary.write_record(["time", "measure", "beta", "corr", "argmax"])?;
    let mut text = String::new();
    let _ = writeln!(text, "β = {beta}");
    let n = laws.len() - 1;
    for (t, nu) in laws.iter().enumerate() {
        let mut reports = vec![("full".to_string(), corr_measure(nu, &built.model, beta).map_err(engine)?)];
        for (j, p) in built.schedule.partitions().iter().enumerate() {
            reports.push((format!("partition{j}"), block_corr_measure(nu, &built.model, p, beta).map_err(engine)?));
        }
        for (label, r) in &reports {
            for (v, row) in r.table.iter().enumerate() {
                for (w, c) in row.iter().enumerate() {
                    table.write_record([t.to_string(), label.clone(), v.to_string(), w.to_string(), c.to_string()])?;
                }
            }
            summary.write_record([t.to_string(), label.clone(), beta.to_string(), r.corr.to_string(), r.argmax.to_string()])?;
        }
        let _ = writeln!(text, "t = {t:>3}  corr = {}", fmt(reports[0].1.corr));
        if t == n {
            let _ = writeln!(text, "C table at t = {t}:");
            for row in &reports[0].1.table {
                let cells: Vec<String> = row.iter().map(|c| format!("{c:.3e}")).collect();
                let _ = writeln!(text, "  {}", cells.join("  "));
            }
        }
    }
    table.flush()?;
    summary.flush()?;
    Ok(text)
}
