//! Calculators for the bias and variance bounds.

use crate::error::{invalid, Error, Result};
use crate::graph::PartitionStats;
use crate::model::{epsilon_threshold, BoundConstants};

/// How the exponent of the second bias bound treats `θ_m(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerExponent {
    /// `exp[-β e^{-β(Δ_d - ∇_d)} (1/m) θ_m(v)]`, with the extra `1/m`.
    #[default]
    PerSchedule,
    /// `exp[-β e^{-β(Δ_d - ∇_d)} θ_m(v)]`.
    ThetaOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BoundOptions {
    pub constants: BoundConstants,
    pub inner: InnerExponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HypothesisFlags {
    /// `ε > ε_0` with the bias-bound constant 18.
    pub epsilon_above_threshold: bool,
    /// Every vertex has a finite boundary distance in every partition.
    pub bounded_boundaries: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub epsilon: f64,
    /// Threshold under the selected constants.
    pub epsilon0: f64,
    /// Infinite when `ε = 1`.
    pub beta: f64,
    /// `(8e^{-β}/(1-e^{-β}))(1-ε^{2Δ}) ϑ_m(v)`.
    pub first_rhs: Vec<f64>,
    /// The exponential form, per [`InnerExponent`].
    pub second_rhs: Vec<f64>,
    pub hypotheses: HypothesisFlags,
}

/// `β = -(2r)^{-1} log[cΔ²(1-ε^{2Δ})]`, infinite at `ε = 1`.
pub fn bias_rate(epsilon: f64, delta: usize, r: usize, constants: BoundConstants) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if delta == 0 || r == 0 {
        return Err(invalid("delta and r must be positive"));
    }
    let d = delta as f64;
    let q = 1.0 - epsilon.powi(2 * delta as i32);
    if q <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let beta = -(constants.value() * d * d * q).ln() / (2.0 * r as f64);
    if beta > 0.0 {
        Ok(beta)
    } else {
        Err(Error::NonPositiveRate { value: beta })
    }
}

/// Per-site right-hand sides of the time-averaged bias bound.
///
/// `stats` supplies the boundary distances; its own `β` is ignored in favour
/// of the rate derived from `epsilon`. When a vertex has no boundary in some
/// partition the second form falls back to its prefactor.
pub fn bias_bound(
    stats: &PartitionStats,
    epsilon: f64,
    delta: usize,
    r: usize,
    options: BoundOptions,
) -> Result<BoundReport> {
    let beta = bias_rate(epsilon, delta, r, options.constants)?;
    let sites = stats.vertex_count();
    let hypotheses = HypothesisFlags {
        epsilon_above_threshold: epsilon > epsilon_threshold(delta, BoundConstants::Eighteen),
        bounded_boundaries: !stats.has_unbounded,
    };
    let epsilon0 = epsilon_threshold(delta, options.constants);
    if beta.is_infinite() {
        return Ok(BoundReport {
            epsilon,
            epsilon0,
            beta,
            first_rhs: vec![0.0; sites],
            second_rhs: vec![0.0; sites],
            hypotheses,
        });
    }
    let q = 1.0 - epsilon.powi(2 * delta as i32);
    let prefactor = 8.0 * (-beta).exp() / -(-beta).exp_m1() * q;
    let first_rhs = stats.vartheta_at(beta).into_iter().map(|t| prefactor * t).collect();
    let m = stats.m() as f64;
    let second_rhs = (0..sites)
        .map(|v| {
            if !stats.theta_m[v].is_finite() {
                return prefactor;
            }
            let spread = (stats.delta_d[v] - stats.nabla_d[v]) as f64;
            let theta = match options.inner {
                InnerExponent::PerSchedule => stats.theta_m[v] / m,
                InnerExponent::ThetaOnly => stats.theta_m[v],
            };
            prefactor * (-beta * (-beta * spread).exp() * theta).exp()
        })
        .collect();
    Ok(BoundReport {
        epsilon,
        epsilon0,
        beta,
        first_rhs,
        second_rhs,
        hypotheses,
    })
}

/// `α |K|_∞ e^{β|K|_∞} / √N`.
///
/// The variance bound leaves `α` and `β` unspecified, so this only traces
/// the shape of the bound in block size and particle count.
pub fn error_bound_shape(stats: &PartitionStats, n: usize, alpha: f64, beta: f64) -> Result<f64> {
    block_shape(stats.block_size_max, n, alpha, beta)
}

pub fn block_shape(block_size: usize, n: usize, alpha: f64, beta: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("particle count must be positive"));
    }
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(invalid("alpha and beta must be positive"));
    }
    let k = block_size as f64;
    Ok(alpha * k * (beta * k).exp() / (n as f64).sqrt())
}

/// Evaluates `|ax - b/x| ≤ |a - b| x²`.
pub fn minor_inequality_holds(a: f64, b: f64, x: f64) -> Result<bool> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(invalid("a and b must be positive and finite"));
    }
    if !(x >= 1.0 && x.is_finite()) {
        return Err(invalid("x must be finite and at least 1"));
    }
    Ok((a * x - b / x).abs() <= (a - b).abs() * x * x)
}
