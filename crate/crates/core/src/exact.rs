//! Dense exact filtering.
//!
//! Ground truth for every bias measurement: the Bayes filter `π_n`, the ideal
//! blocked filter `π̃_n` that inserts the blocking projection between
//! prediction and correction, and an independent path-enumeration oracle.
//! Everything is dense over the joint space, so sizes are capped.

use rayon::prelude::*;

use crate::distribution::{decode_into, encode, space_size, DenseDistribution, InitialLaw};
use crate::error::{invalid, Error, Result};
use crate::graph::{Partition, PartitionSchedule};
use crate::model::{likelihood, transition_density, FieldModel};

/// Default cap on the joint configuration count (12 binary sites).
pub const DEFAULT_SPACE_CAP: u128 = 4096;
/// Default cap on the number of enumerated state paths.
pub const DEFAULT_PATH_CAP: u128 = 10_000_000;

const DRIFT_WARN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceLimits {
    pub space_cap: u128,
    pub path_cap: u128,
}

impl Default for SpaceLimits {
    fn default() -> Self {
        Self {
            space_cap: DEFAULT_SPACE_CAP,
            path_cap: DEFAULT_PATH_CAP,
        }
    }
}

/// Exact filtering operators bound to one model.
#[derive(Debug, Clone)]
pub struct ExactFilter<'m> {
    model: &'m FieldModel,
    size: usize,
    limits: SpaceLimits,
}

impl<'m> ExactFilter<'m> {
    pub fn new(model: &'m FieldModel) -> Result<Self> {
        Self::with_limits(model, SpaceLimits::default())
    }

    pub fn with_limits(model: &'m FieldModel, limits: SpaceLimits) -> Result<Self> {
        let size = model.state_space_size();
        if size > limits.space_cap {
            return Err(Error::SpaceTooLarge {
                what: "dense joint table",
                size,
                cap: limits.space_cap,
            });
        }
        Ok(Self {
            model,
            size: size as usize,
            limits,
        })
    }

    pub fn model(&self) -> &FieldModel {
        self.model
    }

    fn check(&self, rho: &DenseDistribution) -> Result<()> {
        if rho.radices() != self.model.alphabets() {
            return Err(invalid("distribution is not defined on the model's state space"));
        }
        Ok(())
    }

    /// `Pρ`: one step of the signal dynamics.
    pub fn predict(&self, rho: &DenseDistribution) -> Result<DenseDistribution> {
        self.check(rho)?;
        let model = self.model;
        let radices = model.alphabets();
        let sites = radices.len();
        let offsets: Vec<usize> = radices
            .iter()
            .scan(0, |acc, &r| {
                let o = *acc;
                *acc += r;
                Some(o)
            })
            .collect();
        let width: usize = radices.iter().sum();

        // Per-source site rows, only for sources carrying mass.
        let sources: Vec<(f64, Vec<f64>)> = (0..self.size)
            .filter(|&i| rho.probs()[i] > 0.0)
            .map(|i| {
                let mut x = vec![0u8; sites];
                decode_into(radices, i, &mut x);
                let mut rows = Vec::with_capacity(width);
                for v in 0..sites {
                    rows.extend_from_slice(model.transition_row(v, &x));
                }
                (rho.probs()[i], rows)
            })
            .collect();

        let probs: Vec<f64> = (0..self.size)
            .into_par_iter()
            .map_init(
                || vec![0u8; sites],
                |z, target| {
                    decode_into(radices, target, z);
                    sources
                        .iter()
                        .map(|(w, rows)| {
                            let mut p = *w;
                            for v in 0..sites {
                                p *= rows[offsets[v] + z[v] as usize];
                            }
                            p
                        })
                        .sum()
                },
            )
            .collect();
        Ok(renormalize(radices.to_vec(), probs, "prediction"))
    }

    /// `C_n ρ`: Bayes correction by the observation `y`.
    pub fn correct(&self, rho: &DenseDistribution, y: &[u8]) -> Result<DenseDistribution> {
        self.check(rho)?;
        self.model.check_observation(y)?;
        let model = self.model;
        let radices = model.alphabets();
        let mut x = vec![0u8; radices.len()];
        let weights: Vec<f64> = rho
            .probs()
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                if p == 0.0 {
                    return 0.0;
                }
                decode_into(radices, i, &mut x);
                p * (0..radices.len())
                    .map(|v| model.observation_prob(v, x[v], y[v]))
                    .product::<f64>()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::DegenerateEvidence);
        }
        Ok(DenseDistribution::from_raw(
            radices.to_vec(),
            weights.into_iter().map(|w| w / total).collect(),
        ))
    }

    /// `π_0 = μ`, `π_n = C_n P π_{n-1}`.
    pub fn run(&self, mu: &InitialLaw, observations: &[Vec<u8>]) -> Result<Vec<DenseDistribution>> {
        let mut out = vec![mu.to_dense(self.model.alphabets())?];
        for y in observations {
            let prior = self.predict(out.last().expect("non-empty"))?;
            out.push(self.correct(&prior, y)?);
        }
        Ok(out)
    }

    /// `π̃_0 = μ`, `π̃_n = C_n B(K_{σ(n)}) P π̃_{n-1}`.
    pub fn run_blocked(
        &self,
        mu: &InitialLaw,
        observations: &[Vec<u8>],
        schedule: &PartitionSchedule,
    ) -> Result<Vec<DenseDistribution>> {
        for p in schedule.partitions() {
            if p.vertex_count() != self.model.site_count() {
                return Err(invalid("schedule does not partition the model's sites"));
            }
        }
        let mut out = vec![mu.to_dense(self.model.alphabets())?];
        for (k, y) in observations.iter().enumerate() {
            let prior = self.predict(out.last().expect("non-empty"))?;
            let blocked = blocking(&prior, schedule.partition_at(k + 1))?;
            out.push(self.correct(&blocked, y)?);
        }
        Ok(out)
    }

    /// Filtering laws by brute-force enumeration of state paths.
    ///
    /// For each `t`, sums `μ(x_0) Π p(x_{k-1}, x_k) Π g(x_k, y_k)` over every
    /// path `x_0..x_t` and normalizes the `x_t` marginal. No recursion is
    /// shared with [`ExactFilter::run`].
    pub fn path_oracle(
        &self,
        mu: &InitialLaw,
        observations: &[Vec<u8>],
    ) -> Result<Vec<DenseDistribution>> {
        let model = self.model;
        let radices = model.alphabets();
        let mu = mu.to_dense(radices)?;
        let n = observations.len();
        let paths = (self.size as u128).saturating_pow(n as u32 + 1);
        if paths > self.limits.path_cap {
            return Err(Error::SpaceTooLarge {
                what: "path enumeration",
                size: paths,
                cap: self.limits.path_cap,
            });
        }
        for y in observations {
            model.check_observation(y)?;
        }
        let sites = radices.len();
        let mut out = Vec::with_capacity(n + 1);
        for t in 0..=n {
            let count = self.size.pow(t as u32 + 1);
            let mut states = vec![vec![0u8; sites]; t + 1];
            let mut marginal = vec![0.0; self.size];
            for p in 0..count {
                // Path digits can exceed u8, so decode by hand.
                let mut rest = p;
                for state in states.iter_mut() {
                    decode_into(radices, rest % self.size, state);
                    rest /= self.size;
                }
                let mut w = mu.prob(&states[0]);
                for k in 1..=t {
                    if w == 0.0 {
                        break;
                    }
                    w *= transition_density(model, &states[k - 1], &states[k])?;
                    w *= likelihood(model, &states[k], &observations[k - 1])?;
                }
                marginal[encode(radices, &states[t])] += w;
            }
            let total: f64 = marginal.iter().sum();
            if total.is_nan() || total <= 0.0 {
                return Err(Error::DegenerateEvidence);
            }
            out.push(DenseDistribution::from_raw(
                radices.to_vec(),
                marginal.into_iter().map(|w| w / total).collect(),
            ));
        }
        Ok(out)
    }
}

fn renormalize(radices: Vec<usize>, mut probs: Vec<f64>, what: &str) -> DenseDistribution {
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > DRIFT_WARN {
        log::warn!("{what}: mass drifted to {total} before renormalization");
    }
    for p in &mut probs {
        *p /= total;
    }
    DenseDistribution::from_raw(radices, probs)
}

fn check_subset(n: usize, j: &[usize]) -> Result<Vec<usize>> {
    let mut sorted = j.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != j.len() {
        return Err(invalid("site set has duplicates"));
    }
    if sorted.is_empty() {
        return Err(invalid("site set is empty"));
    }
    if let Some(&v) = sorted.iter().find(|&&v| v >= n) {
        return Err(invalid(format!("site {v} out of range")));
    }
    Ok(sorted)
}

/// `B^J ρ`: the marginal on `J`, with sites in ascending order.
pub fn block_marginal(rho: &DenseDistribution, j: &[usize]) -> Result<DenseDistribution> {
    let j = check_subset(rho.site_count(), j)?;
    let radices = rho.radices();
    let sub_radices: Vec<usize> = j.iter().map(|&v| radices[v]).collect();
    let sub_size = space_size(&sub_radices) as usize;
    let mut probs = vec![0.0; sub_size];
    let mut x = vec![0u8; radices.len()];
    let mut sub = vec![0u8; j.len()];
    for (i, &p) in rho.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        decode_into(radices, i, &mut x);
        for (s, &v) in sub.iter_mut().zip(&j) {
            *s = x[v];
        }
        probs[encode(&sub_radices, &sub)] += p;
    }
    Ok(DenseDistribution::from_raw(sub_radices, probs))
}

/// `B(K)ρ = ⊗_{K} B^K ρ` as a joint table.
pub fn blocking(rho: &DenseDistribution, partition: &Partition) -> Result<DenseDistribution> {
    if partition.vertex_count() != rho.site_count() {
        return Err(invalid("partition does not cover the distribution's sites"));
    }
    if partition.len() == 1 {
        return Ok(rho.clone());
    }
    let marginals = partition
        .blocks()
        .iter()
        .map(|b| block_marginal(rho, b))
        .collect::<Result<Vec<_>>>()?;
    let radices = rho.radices();
    let mut x = vec![0u8; radices.len()];
    let mut subs: Vec<Vec<u8>> = partition.blocks().iter().map(|b| vec![0u8; b.len()]).collect();
    let probs = (0..rho.len())
        .map(|i| {
            decode_into(radices, i, &mut x);
            partition
                .blocks()
                .iter()
                .zip(&marginals)
                .zip(subs.iter_mut())
                .map(|((b, m), sub)| {
                    for (s, &v) in sub.iter_mut().zip(b) {
                        *s = x[v];
                    }
                    m.prob(sub)
                })
                .product()
        })
        .collect();
    Ok(renormalize(radices.to_vec(), probs, "blocking"))
}

/// `‖ρ - ρ'‖_J`: L1 distance between the `J` marginals.
pub fn local_tv(rho: &DenseDistribution, other: &DenseDistribution, j: &[usize]) -> Result<f64> {
    if rho.radices() != other.radices() {
        return Err(invalid("distributions live on different spaces"));
    }
    let a = block_marginal(rho, j)?;
    let b = block_marginal(other, j)?;
    Ok(a.probs()
        .iter()
        .zip(b.probs())
        .map(|(p, q)| (p - q).abs())
        .sum())
}
