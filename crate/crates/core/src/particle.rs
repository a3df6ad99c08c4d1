//! Particle approximations: the adaptively blocked particle filter and its
//! special cases.
//!
//! A step resamples from the product-over-blocks measure of the previous
//! ensemble, propagates every site through its local kernel, then weights
//! each block of the current partition separately. The bootstrap filter is
//! the same step with the single block `{V}`.
//!
//! Randomness is drawn from [`RngPolicy`] streams: initialization from
//! `(Init, replicate, 0, 0)`, the resampling of block `K` at step `k` from
//! `(Resample, replicate, k, K)` and the propagation of site `v` at step `k`
//! from `(Propagate, replicate, k, v)`.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::distribution::{check_config, csv_error, decode_into, encode, space_size, DenseDistribution, InitialLaw};
use crate::error::{invalid, Error, Result};
use crate::graph::{Partition, PartitionSchedule};
use crate::model::{sample_row, FieldModel};
use crate::rng::{Purpose, RngPolicy};

/// Largest joint table [`empirical_local_measure`] will build.
pub const LOCAL_TABLE_CAP: u128 = 1 << 20;

/// `π̂_k`: particles with one normalized weight table per block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedEnsemble {
    radices: Vec<usize>,
    /// Row-major, `particles[i * sites + v] = x^v(i)`.
    particles: Vec<u8>,
    partition: Partition,
    /// `σ(k)`, or `None` for the time-0 view of `μ`.
    partition_index: Option<usize>,
    weights: Vec<Vec<f64>>,
    time: usize,
}

impl BlockedEnsemble {
    /// Builds an ensemble from raw parts, checking shapes and normalization.
    pub fn from_parts(
        radices: Vec<usize>,
        particles: Vec<u8>,
        partition: Partition,
        partition_index: Option<usize>,
        weights: Vec<Vec<f64>>,
        time: usize,
    ) -> Result<Self> {
        let sites = radices.len();
        if sites == 0 || particles.is_empty() || !particles.len().is_multiple_of(sites) {
            return Err(invalid("particle buffer does not hold whole configurations"));
        }
        let n = particles.len() / sites;
        for x in particles.chunks_exact(sites) {
            check_config(&radices, x)?;
        }
        if partition.vertex_count() != sites {
            return Err(invalid("partition does not cover the particle sites"));
        }
        if weights.len() != partition.len() {
            return Err(invalid("one weight table per block is required"));
        }
        for w in &weights {
            if w.len() != n {
                return Err(invalid("weight table length differs from the particle count"));
            }
            if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(invalid("weights must be finite and non-negative"));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-10 {
                return Err(invalid(format!("block weights sum to {total}")));
            }
        }
        Ok(Self {
            radices,
            particles,
            partition,
            partition_index,
            weights,
            time,
        })
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn site_count(&self) -> usize {
        self.radices.len()
    }

    /// Particle count `N`.
    pub fn len(&self) -> usize {
        self.particles.len() / self.radices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particle(&self, i: usize) -> &[u8] {
        let s = self.site_count();
        &self.particles[i * s..(i + 1) * s]
    }

    pub fn particles(&self) -> &[u8] {
        &self.particles
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn partition_index(&self) -> Option<usize> {
        self.partition_index
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn time(&self) -> usize {
        self.time
    }

    /// Writes `particle, x0.., w0..` rows, one weight column per block.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["particle".to_string()];
        header.extend((0..self.site_count()).map(|v| format!("x{v}")));
        header.extend((0..self.partition.len()).map(|k| format!("w{k}")));
        w.write_record(&header).map_err(csv_error)?;
        for i in 0..self.len() {
            let mut row = vec![i.to_string()];
            row.extend(self.particle(i).iter().map(u8::to_string));
            row.extend(self.weights.iter().map(|t| t[i].to_string()));
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush().map_err(|e| invalid(e.to_string()))
    }
}

/// `π̂_0 = μ`: `N` i.i.d. draws with uniform weights under `{V}`.
pub fn init_ensemble(
    model: &FieldModel,
    mu: &InitialLaw,
    n: usize,
    policy: &RngPolicy,
    replicate: u64,
) -> Result<BlockedEnsemble> {
    if n == 0 {
        return Err(invalid("particle count must be at least 1"));
    }
    mu.check(model.alphabets())?;
    let sites = model.site_count();
    let mut rng = policy.stream(Purpose::Init, replicate, 0, 0);
    let mut particles = vec![0u8; n * sites];
    for x in particles.chunks_exact_mut(sites) {
        mu.sample_into(&mut rng, x);
    }
    Ok(BlockedEnsemble {
        radices: model.alphabets().to_vec(),
        particles,
        partition: Partition::single_block(sites),
        partition_index: None,
        weights: vec![vec![1.0 / n as f64; n]],
        time: 0,
    })
}

/// Draws `N` configurations i.i.d. from `⊗_K Σ_i w^K(i) δ_{x^K(i)}`.
///
/// Each new particle takes one ancestor index per block, drawn
/// independently, and splices the block coordinates together. The draws for
/// step `time` use the `(Resample, replicate, time, K)` streams.
pub fn resample_product(
    e: &BlockedEnsemble,
    policy: &RngPolicy,
    replicate: u64,
    time: u64,
) -> Vec<u8> {
    let n = e.len();
    let sites = e.site_count();
    let ancestors: Vec<Vec<usize>> = e
        .weights
        .par_iter()
        .enumerate()
        .map(|(k, w)| {
            let mut rng = policy.stream(Purpose::Resample, replicate, time, k as u64);
            let dist = WeightedIndex::new(w).expect("normalized block weights");
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        })
        .collect();
    let mut out = vec![0u8; n * sites];
    for (block, idx) in e.partition.blocks().iter().zip(&ancestors) {
        for (i, &a) in idx.iter().enumerate() {
            for &v in block {
                out[i * sites + v] = e.particles[a * sites + v];
            }
        }
    }
    out
}

/// Samples `x_k^v(i) ~ p^v(x̂_{k-1}(i), ·)` for every site and particle.
pub fn propagate(
    model: &FieldModel,
    parents: &[u8],
    policy: &RngPolicy,
    replicate: u64,
    time: u64,
) -> Vec<u8> {
    let sites = model.site_count();
    let n = parents.len() / sites;
    let columns: Vec<Vec<u8>> = (0..sites)
        .into_par_iter()
        .map(|v| {
            let mut rng = policy.stream(Purpose::Propagate, replicate, time, v as u64);
            parents
                .chunks_exact(sites)
                .map(|x| sample_row(model.transition_row(v, x), &mut rng))
                .collect()
        })
        .collect();
    let mut out = vec![0u8; n * sites];
    for (v, col) in columns.iter().enumerate() {
        for (i, &z) in col.iter().enumerate() {
            out[i * sites + v] = z;
        }
    }
    out
}

/// Per-block normalized likelihood weights, computed in log space.
pub fn blockwise_weights(
    model: &FieldModel,
    configs: &[u8],
    y: &[u8],
    partition: &Partition,
) -> Result<Vec<Vec<f64>>> {
    model.check_observation(y)?;
    let sites = model.site_count();
    if partition.vertex_count() != sites {
        return Err(invalid("partition does not cover the model's sites"));
    }
    if configs.is_empty() || !configs.len().is_multiple_of(sites) {
        return Err(invalid("particle buffer does not hold whole configurations"));
    }
    partition
        .blocks()
        .par_iter()
        .enumerate()
        .map(|(k, block)| {
            let logw: Vec<f64> = configs
                .chunks_exact(sites)
                .map(|x| {
                    block
                        .iter()
                        .map(|&v| model.observation_prob(v, x[v], y[v]).ln())
                        .sum()
                })
                .collect();
            let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(Error::DegenerateBlock { block: k });
            }
            let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
            let total: f64 = w.iter().sum();
            Ok(w.into_iter().map(|x| x / total).collect())
        })
        .collect()
}

/// One step `π̂_k = C_k B(K_{σ(k)}) S^N P π̂_{k-1}` at time `k = e.time() + 1`.
pub fn abpf_step(
    model: &FieldModel,
    e: &BlockedEnsemble,
    y: &[u8],
    schedule: &PartitionSchedule,
    policy: &RngPolicy,
    replicate: u64,
) -> Result<BlockedEnsemble> {
    if e.radices() != model.alphabets() {
        return Err(invalid("ensemble is not defined on the model's state space"));
    }
    model.check_observation(y)?;
    let k = e.time + 1;
    let partition = schedule.partition_at(k);
    if partition.vertex_count() != model.site_count() {
        return Err(invalid("schedule does not partition the model's sites"));
    }
    let parents = resample_product(e, policy, replicate, k as u64);
    let particles = propagate(model, &parents, policy, replicate, k as u64);
    let weights = blockwise_weights(model, &particles, y, partition)?;
    Ok(BlockedEnsemble {
        radices: e.radices.clone(),
        particles,
        partition: partition.clone(),
        partition_index: Some(schedule.sigma(k)),
        weights,
        time: k,
    })
}

/// Bootstrap step `C_k S^N P`: [`abpf_step`] under the trivial schedule.
pub fn bootstrap_step(
    model: &FieldModel,
    e: &BlockedEnsemble,
    y: &[u8],
    policy: &RngPolicy,
    replicate: u64,
) -> Result<BlockedEnsemble> {
    let trivial = PartitionSchedule::trivial(model.site_count());
    abpf_step(model, e, y, &trivial, policy, replicate)
}

/// Runs the blocked filter over all observations, returning `π̂_0..π̂_n`.
pub fn run_abpf(
    model: &FieldModel,
    mu: &InitialLaw,
    observations: &[Vec<u8>],
    schedule: &PartitionSchedule,
    n_particles: usize,
    policy: &RngPolicy,
    replicate: u64,
) -> Result<Vec<BlockedEnsemble>> {
    let mut out = vec![init_ensemble(model, mu, n_particles, policy, replicate)?];
    for y in observations {
        let next = abpf_step(model, out.last().expect("non-empty"), y, schedule, policy, replicate)?;
        out.push(next);
    }
    Ok(out)
}

pub fn run_bootstrap(
    model: &FieldModel,
    mu: &InitialLaw,
    observations: &[Vec<u8>],
    n_particles: usize,
    policy: &RngPolicy,
    replicate: u64,
) -> Result<Vec<BlockedEnsemble>> {
    let trivial = PartitionSchedule::trivial(model.site_count());
    run_abpf(model, mu, observations, &trivial, n_particles, policy, replicate)
}

/// Marginal of `π̂` on `J` as a table over `X^J`, sites ascending.
///
/// Within a block the marginal is the weighted atom measure of the block's
/// particles; across blocks the factors multiply.
pub fn empirical_local_measure(e: &BlockedEnsemble, j: &[usize]) -> Result<DenseDistribution> {
    let mut j = j.to_vec();
    j.sort_unstable();
    j.dedup();
    if j.is_empty() {
        return Err(invalid("site set is empty"));
    }
    let sites = e.site_count();
    if let Some(&v) = j.iter().find(|&&v| v >= sites) {
        return Err(invalid(format!("site {v} out of range")));
    }
    let radices: Vec<usize> = j.iter().map(|&v| e.radices[v]).collect();
    let size = space_size(&radices);
    if size > LOCAL_TABLE_CAP {
        return Err(Error::SpaceTooLarge {
            what: "local empirical table",
            size,
            cap: LOCAL_TABLE_CAP,
        });
    }

    // Group J by block; positions index into J.
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for (pos, &v) in j.iter().enumerate() {
        let k = e.partition.block_of(v);
        match groups.iter_mut().find(|(b, _)| *b == k) {
            Some((_, g)) => g.push(pos),
            None => groups.push((k, vec![pos])),
        }
    }
    let factors: Vec<(Vec<usize>, Vec<usize>, Vec<f64>)> = groups
        .into_iter()
        .map(|(k, pos)| {
            let sub_radices: Vec<usize> = pos.iter().map(|&p| radices[p]).collect();
            let mut table = vec![0.0; space_size(&sub_radices) as usize];
            let mut sub = vec![0u8; pos.len()];
            for (i, &w) in e.weights[k].iter().enumerate() {
                let x = e.particle(i);
                for (s, &p) in sub.iter_mut().zip(&pos) {
                    *s = x[j[p]];
                }
                table[encode(&sub_radices, &sub)] += w;
            }
            (pos, sub_radices, table)
        })
        .collect();

    let mut x = vec![0u8; j.len()];
    let mut probs = Vec::with_capacity(size as usize);
    for idx in 0..size as usize {
        decode_into(&radices, idx, &mut x);
        let p: f64 = factors
            .iter()
            .map(|(pos, sub_radices, table)| {
                let sub: Vec<u8> = pos.iter().map(|&p| x[p]).collect();
                table[encode(sub_radices, &sub)]
            })
            .product();
        probs.push(p);
    }
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    DenseDistribution::from_probs(radices, probs)
}

/// `S^N ρ`: the empirical law of `N` i.i.d. draws from `ρ`.
pub fn sampling_operator<R: Rng + ?Sized>(
    rho: &DenseDistribution,
    n: usize,
    rng: &mut R,
) -> Result<DenseDistribution> {
    if n == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let dist = WeightedIndex::new(rho.probs()).map_err(|e| invalid(e.to_string()))?;
    let mut counts = vec![0usize; rho.len()];
    for _ in 0..n {
        counts[dist.sample(rng)] += 1;
    }
    DenseDistribution::from_probs(
        rho.radices().to_vec(),
        counts.into_iter().map(|c| c as f64 / n as f64).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_cycle_graph, shifted_cycle_partitions, FieldGraph};
    use crate::model::make_uniform_mixture_model;

    fn model(n: usize, lambda: f64, noise: f64) -> FieldModel {
        make_uniform_mixture_model(build_cycle_graph(n, 1).unwrap(), lambda, 1.0, noise).unwrap()
    }

    fn two_block_ensemble() -> BlockedEnsemble {
        BlockedEnsemble::from_parts(
            vec![2; 4],
            vec![1, 1, 0, 0, 0, 0, 1, 1],
            Partition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap(),
            Some(0),
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            3,
        )
        .unwrap()
    }

    #[test]
    fn init_cases() {
        let m = model(3, 0.5, 0.2);
        let p = RngPolicy::new(1);
        let e = init_ensemble(&m, &InitialLaw::Point(vec![1, 0, 1]), 5, &p, 0).unwrap();
        assert_eq!(e.len(), 5);
        assert!((0..5).all(|i| e.particle(i) == [1, 0, 1]));
        let e = init_ensemble(&m, &InitialLaw::Point(vec![1, 0, 1]), 1, &p, 0).unwrap();
        assert_eq!(e.weights(), &[vec![1.0]]);
        assert!(init_ensemble(&m, &InitialLaw::Point(vec![1, 0, 1]), 0, &p, 0).is_err());
    }

    #[test]
    fn init_marginals_match_mu() {
        let m = model(3, 0.5, 0.2);
        let mu = DenseDistribution::product(&[vec![0.3, 0.7], vec![0.5, 0.5], vec![0.9, 0.1]]).unwrap();
        let n = 10_000;
        let e = init_ensemble(&m, &InitialLaw::Dense(mu), n, &RngPolicy::new(2), 0).unwrap();
        for (v, q) in [(0, 0.7), (1, 0.5), (2, 0.1)] {
            let freq = (0..n).filter(|&i| e.particle(i)[v] == 1).count() as f64 / n as f64;
            let se = (q * (1.0 - q) / n as f64).sqrt();
            assert!((freq - q).abs() < 3.5 * se, "site {v}: {freq}");
        }
    }

    #[test]
    fn product_resampling_splices_blocks() {
        let e = two_block_ensemble();
        let out = resample_product(&e, &RngPolicy::new(3), 0, 4);
        for x in out.chunks_exact(4) {
            assert_eq!(x, [1, 1, 1, 1]);
        }
        let single = BlockedEnsemble::from_parts(
            vec![2; 2],
            vec![1, 0, 0, 1, 0, 0],
            Partition::single_block(2),
            Some(0),
            vec![vec![1.0, 0.0, 0.0]],
            1,
        )
        .unwrap();
        for x in resample_product(&single, &RngPolicy::new(3), 0, 2).chunks_exact(2) {
            assert_eq!(x, [1, 0]);
        }
    }

    #[test]
    fn resampled_indices_follow_block_weights() {
        // Particle i holds value i in both sites, so each block coordinate
        // identifies its ancestor.
        let n = 4usize;
        let big = 10_000usize;
        let w0 = vec![0.1, 0.2, 0.3, 0.4];
        let w1 = vec![0.4, 0.4, 0.1, 0.1];
        let e = BlockedEnsemble::from_parts(
            vec![4, 4],
            (0..n as u8).flat_map(|i| [i, i]).collect(),
            Partition::new(2, vec![vec![0], vec![1]]).unwrap(),
            Some(0),
            vec![w0.clone(), w1.clone()],
            0,
        )
        .unwrap();
        let mut e = e;
        // Pad to N = 10^4 by repeating the four particles with scaled weights.
        let reps = big / n;
        e.particles = e.particles.repeat(reps);
        e.weights = e
            .weights
            .iter()
            .map(|w| w.iter().map(|x| x / reps as f64).collect::<Vec<_>>().repeat(reps))
            .collect();
        let out = resample_product(&e, &RngPolicy::new(9), 0, 1);
        for (v, w) in [(0, &w0), (1, &w1)] {
            let mut chi2 = 0.0;
            for (a, &p) in w.iter().enumerate() {
                let obs = out.chunks_exact(2).filter(|x| x[v] == a as u8).count() as f64;
                let exp = p * big as f64;
                chi2 += (obs - exp).powi(2) / exp;
            }
            // Three degrees of freedom: mean 3, sd sqrt(6).
            assert!(chi2 < 3.0 + 3.0 * 6f64.sqrt(), "site {v}: chi2 {chi2}");
        }
    }

    #[test]
    fn propagate_cases() {
        let uni = model(3, 1.0, 0.2);
        let p = RngPolicy::new(4);
        let n = 20_000;
        let out = propagate(&uni, &vec![1u8; 3 * n], &p, 0, 1);
        for v in 0..3 {
            let ones = out.chunks_exact(3).filter(|x| x[v] == 1).count() as f64 / n as f64;
            assert!((ones - 0.5).abs() < 3.5 * (0.25 / n as f64).sqrt());
        }

        let g = FieldGraph::new(1, &[], 1).unwrap();
        let flip = FieldModel::from_tables(g, vec![2], vec![2], vec![vec![0.0, 1.0, 1.0, 0.0]], vec![vec![0.5; 4]]).unwrap();
        assert_eq!(propagate(&flip, &[0, 1, 1, 0], &p, 0, 1), vec![1, 0, 0, 1]);
    }

    #[test]
    fn one_step_transition_frequencies() {
        let m = model(3, 0.2, 0.2);
        let n = 100_000;
        let parent = [1u8, 1, 0];
        let out = propagate(&m, &parent.repeat(n), &RngPolicy::new(5), 0, 1);
        for v in 0..3 {
            let q = m.transition_prob(v, &parent, 1);
            let freq = out.chunks_exact(3).filter(|x| x[v] == 1).count() as f64 / n as f64;
            assert!((freq - q).abs() < 3.5 * (q * (1.0 - q) / n as f64).sqrt());
        }
    }

    #[test]
    fn weight_cases() {
        let g = FieldGraph::new(1, &[], 1).unwrap();
        let m = FieldModel::from_tables(
            g,
            vec![2],
            vec![2],
            vec![vec![0.5; 4]],
            vec![vec![0.9, 0.1, 0.1, 0.9]],
        )
        .unwrap();
        let w = blockwise_weights(&m, &[1, 0], &[1], &Partition::single_block(1)).unwrap();
        assert!((w[0][0] - 0.9).abs() < 1e-15 && (w[0][1] - 0.1).abs() < 1e-15);
        let w = blockwise_weights(&m, &[0], &[1], &Partition::single_block(1)).unwrap();
        assert_eq!(w, vec![vec![1.0]]);

        let flat = model(4, 0.5, 0.5);
        let p = Partition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let w = blockwise_weights(&flat, &[0, 1, 0, 1, 1, 1, 0, 0, 1, 0, 1, 0], &[1, 1, 0, 0], &p).unwrap();
        for table in w {
            assert!(table.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        }

        let g = FieldGraph::new(1, &[], 1).unwrap();
        let exact = FieldModel::from_tables(g, vec![2], vec![2], vec![vec![0.5; 4]], vec![vec![1.0, 0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(
            blockwise_weights(&exact, &[0, 0], &[1], &Partition::single_block(1)).unwrap_err(),
            Error::DegenerateBlock { block: 0 }
        );
    }

    #[test]
    fn long_blocks_do_not_underflow() {
        let g = build_cycle_graph(400, 1).unwrap();
        let m = make_uniform_mixture_model(g, 0.5, 1.0, 0.05).unwrap();
        let mut configs = vec![0u8; 800];
        configs[400..].fill(1);
        let w = blockwise_weights(&m, &configs, &vec![1u8; 400], &Partition::single_block(400)).unwrap();
        assert_eq!(w[0], vec![0.0, 1.0]);
    }

    #[test]
    fn bootstrap_is_single_block_abpf() {
        let m = model(5, 0.6, 0.2);
        let p = RngPolicy::new(6);
        let e = init_ensemble(&m, &InitialLaw::Point(vec![0; 5]), 50, &p, 2).unwrap();
        let y = [1, 0, 1, 1, 0];
        let a = abpf_step(&m, &e, &y, &PartitionSchedule::trivial(5), &p, 2).unwrap();
        let b = bootstrap_step(&m, &e, &y, &p, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.partition_index(), Some(0));
        assert_eq!(a.time(), 1);
    }

    #[test]
    fn single_particle_bootstrap_is_simulation() {
        let m = model(3, 0.6, 0.2);
        let p = RngPolicy::new(7);
        let e = init_ensemble(&m, &InitialLaw::Point(vec![0; 3]), 1, &p, 0).unwrap();
        let next = bootstrap_step(&m, &e, &[1, 1, 1], &p, 0).unwrap();
        assert_eq!(next.weights(), &[vec![1.0]]);
        let expect = propagate(&m, &[0, 0, 0], &p, 0, 1);
        assert_eq!(next.particle(0), expect.as_slice());
    }

    #[test]
    fn steps_follow_the_schedule() {
        let m = model(5, 0.6, 0.2);
        let s = shifted_cycle_partitions(m.graph(), &[2, 3], 5).unwrap();
        let p = RngPolicy::new(8);
        let obs = vec![vec![1, 0, 1, 0, 0]; 7];
        let run = run_abpf(&m, &InitialLaw::Point(vec![0; 5]), &obs, &s, 30, &p, 0).unwrap();
        for (k, e) in run.iter().enumerate().skip(1) {
            assert_eq!(e.partition_index(), Some(s.sigma(k)));
            assert_eq!(e.partition(), s.partition_at(k));
            for w in e.weights() {
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            }
        }
        let again = run_abpf(&m, &InitialLaw::Point(vec![0; 5]), &obs, &s, 30, &p, 0).unwrap();
        assert_eq!(run, again);
        let other = run_abpf(&m, &InitialLaw::Point(vec![0; 5]), &obs, &s, 30, &p, 1).unwrap();
        assert_ne!(run, other);
    }

    #[test]
    fn local_measure_by_hand() {
        // N=3, blocks {0,1} and {2}.
        let e = BlockedEnsemble::from_parts(
            vec![2; 3],
            vec![0, 0, 1, 1, 0, 0, 1, 1, 1],
            Partition::new(3, vec![vec![0, 1], vec![2]]).unwrap(),
            Some(0),
            vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.6, 0.3]],
            1,
        )
        .unwrap();
        let site = empirical_local_measure(&e, &[0]).unwrap();
        assert!((site.probs()[1] - 0.5).abs() < 1e-15);
        let inside = empirical_local_measure(&e, &[0, 1]).unwrap();
        assert!((inside.prob(&[0, 0]) - 0.5).abs() < 1e-15);
        assert!((inside.prob(&[1, 0]) - 0.3).abs() < 1e-15);
        assert!((inside.prob(&[1, 1]) - 0.2).abs() < 1e-15);
        // Site 2 is 1 with weight 0.1 + 0.3.
        let across = empirical_local_measure(&e, &[1, 2]).unwrap();
        assert!((across.prob(&[0, 1]) - 0.8 * 0.4).abs() < 1e-15);
        assert!((across.prob(&[1, 0]) - 0.2 * 0.6).abs() < 1e-15);
        assert!(empirical_local_measure(&e, &[3]).is_err());
    }

    #[test]
    fn product_resampling_needs_no_original_holder() {
        let e = two_block_ensemble();
        let joint = empirical_local_measure(&e, &[0, 1, 2, 3]).unwrap();
        assert_eq!(joint.prob(&[1, 1, 1, 1]), 1.0);
        assert!((0..e.len()).all(|i| e.particle(i) != [1, 1, 1, 1]));
    }

    #[test]
    fn sampling_operator_cases() {
        let rho = DenseDistribution::uniform(vec![4]).unwrap();
        let mut rng = RngPolicy::new(10).stream(Purpose::Sampling, 0, 0, 0);
        let one = sampling_operator(&rho, 1, &mut rng).unwrap();
        assert_eq!(one.probs().iter().filter(|&&p| p == 1.0).count(), 1);
        assert!(sampling_operator(&rho, 0, &mut rng).is_err());
    }

    #[test]
    fn csv_dump_layout() {
        let mut buf = Vec::new();
        two_block_ensemble().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "particle,x0,x1,x2,x3,w0,w1");
        assert_eq!(lines[1], "0,1,1,0,0,1,0");
    }
}
