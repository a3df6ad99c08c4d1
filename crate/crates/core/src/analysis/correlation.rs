//! Brute-force decay-of-correlation diagnostics.
//!
//! `μ^v_{x,z}` is the law of `X_{n-1}^v` given the rest of `X_{n-1}` and the
//! next state `X_n = z` when `X_{n-1} ~ μ`. The coefficient `C_{vv'}` measures
//! how far that law moves when `x^{v'}` is perturbed, and `corr(μ, β)` sums the
//! coefficients with weights `e^{β d(v,v')}`. The block variants condition on
//! `X_n^K` only.
//!
//! Every quantity is computed by enumeration over the joint space, so models
//! are limited to [`CORR_SPACE_CAP`] configurations.

use rayon::prelude::*;

use crate::distribution::{decode_into, encode, DenseDistribution};
use crate::error::{invalid, Error, Result};
use crate::graph::{decay, Partition};
use crate::model::FieldModel;

/// Largest joint space (six binary sites) the diagnostics enumerate.
pub const CORR_SPACE_CAP: u128 = 64;

fn check(mu: &DenseDistribution, model: &FieldModel) -> Result<()> {
    if mu.radices() != model.alphabets() {
        return Err(invalid("measure is not defined on the model's state space"));
    }
    let size = model.state_space_size();
    if size > CORR_SPACE_CAP {
        return Err(Error::SpaceTooLarge {
            what: "correlation enumeration",
            size,
            cap: CORR_SPACE_CAP,
        });
    }
    Ok(())
}

/// `μ^v_x` reweighted by `Π_{u ∈ factors} p^u(x, z^u)` and normalized, or
/// `None` when the conditioning event has probability zero.
fn reweighted(
    mu: &DenseDistribution,
    model: &FieldModel,
    v: usize,
    factors: &[usize],
    x: &[u8],
    z: &[u8],
) -> Option<Vec<f64>> {
    let mut xa = x.to_vec();
    let weights: Vec<f64> = (0..model.alphabets()[v])
        .map(|a| {
            xa[v] = a as u8;
            let prior = mu.prob(&xa);
            if prior == 0.0 {
                return 0.0;
            }
            prior
                * factors
                    .iter()
                    .map(|&u| model.transition_prob(u, &xa, z[u]))
                    .product::<f64>()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    (total > 0.0).then(|| weights.into_iter().map(|w| w / total).collect())
}

fn conditional(
    mu: &DenseDistribution,
    model: &FieldModel,
    v: usize,
    factors: &[usize],
    x: &[u8],
    z: &[u8],
) -> Result<DenseDistribution> {
    check(mu, model)?;
    model.graph().check_vertex(v)?;
    model.check_state(x)?;
    model.check_state(z)?;
    let probs = reweighted(mu, model, v, factors, x, z).ok_or(Error::DegenerateConditioning { site: v })?;
    Ok(DenseDistribution::from_raw(vec![model.alphabets()[v]], probs))
}

/// `μ^v_{x,z}` as a table over `X^v`.
pub fn conditional_measure(
    mu: &DenseDistribution,
    model: &FieldModel,
    v: usize,
    x: &[u8],
    z: &[u8],
) -> Result<DenseDistribution> {
    let factors = model.graph().neighborhood(v)?.to_vec();
    conditional(mu, model, v, &factors, x, z)
}

/// `μ^{v,K}_{x,z}`: as [`conditional_measure`] with only `X_n^K` observed.
pub fn block_conditional_measure(
    mu: &DenseDistribution,
    model: &FieldModel,
    v: usize,
    block: &[usize],
    x: &[u8],
    z: &[u8],
) -> Result<DenseDistribution> {
    let factors: Vec<usize> = model
        .graph()
        .neighborhood(v)?
        .iter()
        .copied()
        .filter(|u| block.contains(u))
        .collect();
    conditional(mu, model, v, &factors, x, z)
}

/// `½ sup_z sup_{x, x̃} ‖μ^v_{x,z} - μ^v_{x̃,z}‖` for every `v'`, with the
/// reweighting restricted to `factors`. Pairs whose conditional is undefined
/// are skipped.
fn coefficient_row(mu: &DenseDistribution, model: &FieldModel, v: usize, factors: &[usize]) -> Vec<f64> {
    let radices = model.alphabets();
    let sites = radices.len();
    let size = mu.len();
    let z_radices: Vec<usize> = factors.iter().map(|&u| radices[u]).collect();
    let z_count: usize = z_radices.iter().product();
    let mut row = vec![0.0f64; sites];
    let mut x = vec![0u8; sites];
    let mut z = vec![0u8; sites];
    let mut zf = vec![0u8; factors.len()];
    for zi in 0..z_count {
        decode_into(&z_radices, zi, &mut zf);
        for (&u, &val) in factors.iter().zip(&zf) {
            z[u] = val;
        }
        // The conditional ignores x^v; index it by the x with x^v = 0.
        let table: Vec<Option<Vec<f64>>> = (0..size)
            .map(|i| {
                decode_into(radices, i, &mut x);
                if x[v] != 0 {
                    return None;
                }
                reweighted(mu, model, v, factors, &x, &z)
            })
            .collect();
        for (i, cond) in table.iter().enumerate() {
            let Some(cond) = cond else { continue };
            decode_into(radices, i, &mut x);
            for (w, slot) in row.iter_mut().enumerate() {
                if w == v {
                    continue;
                }
                let own = x[w];
                for b in own as usize + 1..radices[w] {
                    x[w] = b as u8;
                    if let Some(other) = &table[encode(radices, &x)] {
                        let l1: f64 = cond.iter().zip(other).map(|(p, q)| (p - q).abs()).sum();
                        *slot = slot.max(0.5 * l1);
                    }
                }
                x[w] = own;
            }
        }
    }
    row
}

/// `C^μ_{vv'}`.
pub fn corr_coefficient(mu: &DenseDistribution, model: &FieldModel, v: usize, v_prime: usize) -> Result<f64> {
    check(mu, model)?;
    model.graph().check_vertex(v)?;
    model.graph().check_vertex(v_prime)?;
    Ok(coefficient_row(mu, model, v, model.graph().neighborhood(v)?)[v_prime])
}

/// `C̃^{K,μ}_{vv'}`, including the maximum over blocks.
pub fn block_corr_coefficient(
    mu: &DenseDistribution,
    model: &FieldModel,
    partition: &Partition,
    v: usize,
    v_prime: usize,
) -> Result<f64> {
    check(mu, model)?;
    model.graph().check_vertex(v_prime)?;
    Ok(block_row(mu, model, partition, v)?[v_prime])
}

fn block_row(mu: &DenseDistribution, model: &FieldModel, partition: &Partition, v: usize) -> Result<Vec<f64>> {
    if partition.vertex_count() != model.site_count() {
        return Err(invalid("partition does not cover the model's sites"));
    }
    let nbhd = model.graph().neighborhood(v)?;
    let mut row = vec![0.0f64; model.site_count()];
    for block in partition.blocks() {
        let factors: Vec<usize> = nbhd.iter().copied().filter(|u| block.contains(u)).collect();
        for (slot, c) in row.iter_mut().zip(coefficient_row(mu, model, v, &factors)) {
            *slot = slot.max(c);
        }
    }
    Ok(row)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrReport {
    pub beta: f64,
    /// `table[v][v']`.
    pub table: Vec<Vec<f64>>,
    pub corr: f64,
    /// The most sensitive site.
    pub argmax: usize,
}

/// `max_v Σ_{v'} e^{β d(v,v')} table[v][v']` and its maximizing `v`.
pub fn weighted_max(model: &FieldModel, table: &[Vec<f64>], beta: f64) -> (f64, usize) {
    let g = model.graph();
    let mut best = (f64::NEG_INFINITY, 0);
    for (v, row) in table.iter().enumerate() {
        let s: f64 = row
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0.0)
            .map(|(w, &c)| c / decay(beta, g.distance(v, w)))
            .sum();
        if s > best.0 {
            best = (s, v);
        }
    }
    best
}

fn report(model: &FieldModel, table: Vec<Vec<f64>>, beta: f64) -> Result<CorrReport> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(invalid(format!("beta must be finite and non-negative, got {beta}")));
    }
    let (corr, argmax) = weighted_max(model, &table, beta);
    Ok(CorrReport {
        beta,
        table,
        corr,
        argmax,
    })
}

/// `corr(μ, β)` with the full coefficient table.
pub fn corr_measure(mu: &DenseDistribution, model: &FieldModel, beta: f64) -> Result<CorrReport> {
    check(mu, model)?;
    let g = model.graph();
    let table = (0..model.site_count())
        .into_par_iter()
        .map(|v| coefficient_row(mu, model, v, g.nbhd(v)))
        .collect();
    report(model, table, beta)
}

/// `corr̃_K(μ, β)` with the full block coefficient table.
pub fn block_corr_measure(
    mu: &DenseDistribution,
    model: &FieldModel,
    partition: &Partition,
    beta: f64,
) -> Result<CorrReport> {
    check(mu, model)?;
    let table = (0..model.site_count())
        .into_par_iter()
        .map(|v| block_row(mu, model, partition, v))
        .collect::<Result<_>>()?;
    report(model, table, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_cycle_graph, FieldGraph};
    use crate::model::make_uniform_mixture_model;
    use proptest::prelude::*;

    fn cycle_model(n: usize, lambda: f64) -> FieldModel {
        make_uniform_mixture_model(build_cycle_graph(n, 1).unwrap(), lambda, 1.0, 0.2).unwrap()
    }

    fn random_mu(sites: usize, weights: &[f64]) -> DenseDistribution {
        DenseDistribution::from_weights(vec![2; sites], weights.to_vec()).unwrap()
    }

    /// Conditions the two-time joint table `μ(x) p(x, z)` directly.
    fn joint_oracle(mu: &DenseDistribution, model: &FieldModel, v: usize, observed: &[usize], x: &[u8], z: &[u8]) -> Vec<f64> {
        let size = mu.len();
        let mut out = vec![0.0; 2];
        for xi in 0..size {
            let xp = mu.decode(xi);
            if (0..xp.len()).any(|u| u != v && xp[u] != x[u]) {
                continue;
            }
            for zi in 0..size {
                let zp = mu.decode(zi);
                if observed.iter().any(|&u| zp[u] != z[u]) {
                    continue;
                }
                let p: f64 = (0..zp.len()).map(|u| model.transition_prob(u, &xp, zp[u])).product();
                out[xp[v] as usize] += mu.prob(&xp) * p;
            }
        }
        let total: f64 = out.iter().sum();
        out.iter().map(|w| w / total).collect()
    }

    #[test]
    fn uniform_kernel_and_uniform_mu() {
        let m = cycle_model(3, 1.0);
        let mu = DenseDistribution::uniform(vec![2; 3]).unwrap();
        let c = conditional_measure(&mu, &m, 1, &[1, 0, 1], &[0, 0, 1]).unwrap();
        assert_eq!(c.probs(), &[0.5, 0.5]);
        let r = corr_measure(&mu, &m, 1.0).unwrap();
        assert_eq!(r.corr, 0.0);
    }

    #[test]
    fn single_site_is_bayes_posterior() {
        let g = FieldGraph::new(1, &[], 1).unwrap();
        let m = FieldModel::from_tables(g, vec![2], vec![2], vec![vec![0.7, 0.3, 0.2, 0.8]], vec![vec![0.5; 4]]).unwrap();
        let mu = DenseDistribution::from_probs(vec![2], vec![0.4, 0.6]).unwrap();
        let c = conditional_measure(&mu, &m, 0, &[0], &[1]).unwrap();
        let expect = 0.4 * 0.3 / (0.4 * 0.3 + 0.6 * 0.8);
        assert!((c.probs()[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn matches_joint_table_oracle() {
        let m = cycle_model(3, 0.3);
        let mu = random_mu(3, &[0.3, 1.2, 0.7, 0.1, 0.9, 0.4, 1.5, 0.6]);
        let blocks: [&[usize]; 3] = [&[0, 1, 2], &[0, 1], &[2]];
        for xi in 0..8 {
            let x = mu.decode(xi);
            for zi in 0..8 {
                let z = mu.decode(zi);
                for v in 0..3 {
                    let c = conditional_measure(&mu, &m, v, &x, &z).unwrap();
                    let o = joint_oracle(&mu, &m, v, &[0, 1, 2], &x, &z);
                    assert!((c.probs()[0] - o[0]).abs() < 1e-12);
                    for k in blocks {
                        let c = block_conditional_measure(&mu, &m, v, k, &x, &z).unwrap();
                        let o = joint_oracle(&mu, &m, v, k, &x, &z);
                        assert!((c.probs()[0] - o[0]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn block_conditional_edge_cases() {
        let m = cycle_model(5, 0.4);
        let weights: Vec<f64> = (0..32).map(|i| 1.0 + (i % 7) as f64).collect();
        let mu = random_mu(5, &weights);
        let x = [1, 0, 1, 1, 0];
        let z = [0, 1, 1, 0, 1];
        let full = conditional_measure(&mu, &m, 1, &x, &z).unwrap();
        let within = block_conditional_measure(&mu, &m, 1, &[0, 1, 2, 3], &x, &z).unwrap();
        assert_eq!(full, within);
        // N(1) misses block {3, 4}: the plain conditional of μ.
        let far = block_conditional_measure(&mu, &m, 1, &[3, 4], &x, &z).unwrap();
        let p0 = mu.prob(&[1, 0, 1, 1, 0]);
        let p1 = mu.prob(&[1, 1, 1, 1, 0]);
        assert!((far.probs()[1] - p1 / (p0 + p1)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_conditioning() {
        let m = cycle_model(3, 0.5);
        let mu = DenseDistribution::point_mass(vec![2; 3], &[0, 0, 0]).unwrap();
        assert_eq!(
            conditional_measure(&mu, &m, 0, &[0, 1, 0], &[0, 0, 0]).unwrap_err(),
            Error::DegenerateConditioning { site: 0 }
        );
        // Point masses have no perturbable conditionals.
        assert_eq!(corr_measure(&mu, &m, 1.0).unwrap().corr, 0.0);
    }

    #[test]
    fn self_coefficient_vanishes() {
        let m = cycle_model(4, 0.2);
        let weights: Vec<f64> = (0..16).map(|i| 0.5 + (i * 3 % 5) as f64).collect();
        let mu = random_mu(4, &weights);
        for v in 0..4 {
            assert_eq!(corr_coefficient(&mu, &m, v, v).unwrap(), 0.0);
        }
        let r = corr_measure(&mu, &m, 0.5).unwrap();
        assert!(r.table.iter().flatten().all(|&c| (0.0..=1.0).contains(&c)));
        assert!(r.corr > 0.0);
    }

    #[test]
    fn cap_is_enforced() {
        let m = cycle_model(7, 0.5);
        let mu = DenseDistribution::uniform(vec![2; 7]).unwrap();
        assert!(matches!(corr_measure(&mu, &m, 1.0), Err(Error::SpaceTooLarge { .. })));
    }

    #[test]
    fn weighted_max_by_hand() {
        let m = cycle_model(3, 0.5);
        let table = vec![vec![0.0, 0.1, 0.0], vec![0.0, 0.0, 0.3], vec![0.2, 0.0, 0.0]];
        let (c, v) = weighted_max(&m, &table, 2f64.ln());
        assert_eq!(v, 1);
        assert!((c - 0.6).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn corr_is_monotone_in_beta(
            weights in proptest::collection::vec(0.05f64..1.0, 16),
            lambda in 0.0f64..1.0,
            b1 in 0.0f64..3.0,
            b2 in 0.0f64..3.0,
        ) {
            let m = cycle_model(4, lambda);
            let mu = random_mu(4, &weights);
            let (lo, hi) = if b1 < b2 { (b1, b2) } else { (b2, b1) };
            let a = corr_measure(&mu, &m, lo).unwrap();
            let b = corr_measure(&mu, &m, hi).unwrap();
            prop_assert!(a.corr <= b.corr + 1e-15);
            prop_assert!(a.table.iter().flatten().all(|&c| (0.0..=1.0 + 1e-12).contains(&c)));
        }
    }
}
