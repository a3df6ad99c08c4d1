//! Discrete dynamic random-field models.
//!
//! Site `v` evolves by a local kernel `p^v(x^{N(v)}, z^v)` and is observed
//! through `g^v(x^v, y^v)`. Tables hold conditional probabilities. Densities
//! are taken relative to the uniform probability measure on each alphabet, so
//! `density = probability × alphabet size` and the uniform kernel has density 1.

use std::io::Write;

use rand::Rng;

use crate::distribution::{csv_error, decode_into, space_size, InitialLaw};
use crate::error::{invalid, Error, Result};
use crate::graph::{compute_delta, FieldGraph};
use crate::rng::{Purpose, RngPolicy};

const ROW_SUM_TOL: f64 = 1e-12;

/// Transition table of one site, indexed by the neighborhood configuration.
#[derive(Debug, Clone, PartialEq)]
struct LocalKernel {
    neighbors: Vec<usize>,
    strides: Vec<usize>,
    states: usize,
    probs: Vec<f64>,
}

impl LocalKernel {
    fn row_index(&self, x: &[u8]) -> usize {
        self.neighbors
            .iter()
            .zip(&self.strides)
            .map(|(&u, &s)| x[u] as usize * s)
            .sum()
    }

    fn row(&self, x: &[u8]) -> &[f64] {
        let r = self.row_index(x);
        &self.probs[r * self.states..(r + 1) * self.states]
    }

    fn rows(&self) -> usize {
        self.probs.len() / self.states
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldModel {
    graph: FieldGraph,
    alphabets: Vec<usize>,
    obs_alphabets: Vec<usize>,
    transition: Vec<LocalKernel>,
    /// `observation[v][x * |Y^v| + y]`.
    observation: Vec<Vec<f64>>,
}

impl FieldModel {
    /// Builds a model from explicit tables.
    ///
    /// `transition[v]` has one row per configuration of `N(v)` (mixed radix
    /// over the sorted neighborhood, first neighbor least significant) and
    /// `|X^v|` columns. `observation[v]` has `|X^v|` rows of `|Y^v|` columns.
    pub fn from_tables(
        graph: FieldGraph,
        alphabets: Vec<usize>,
        obs_alphabets: Vec<usize>,
        transition: Vec<Vec<f64>>,
        observation: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = graph.vertex_count();
        if !graph.is_connected() {
            return Err(Error::Disconnected);
        }
        if alphabets.len() != n || obs_alphabets.len() != n {
            return Err(invalid("one alphabet per site is required"));
        }
        if transition.len() != n || observation.len() != n {
            return Err(invalid("one transition and one observation table per site"));
        }
        if alphabets.iter().chain(&obs_alphabets).any(|&a| a == 0 || a > 255) {
            return Err(invalid("alphabet sizes must be in 1..=255"));
        }

        let mut kernels = Vec::with_capacity(n);
        for (v, probs) in transition.into_iter().enumerate() {
            let neighbors = graph.nbhd(v).to_vec();
            let mut strides = Vec::with_capacity(neighbors.len());
            let mut rows = 1usize;
            for &u in &neighbors {
                strides.push(rows);
                rows *= alphabets[u];
            }
            let states = alphabets[v];
            if probs.len() != rows * states {
                return Err(invalid(format!(
                    "transition table of site {v} has {} entries, expected {}",
                    probs.len(),
                    rows * states
                )));
            }
            check_rows(&probs, states, &format!("transition table of site {v}"))?;
            kernels.push(LocalKernel {
                neighbors,
                strides,
                states,
                probs,
            });
        }
        for (v, table) in observation.iter().enumerate() {
            if table.len() != alphabets[v] * obs_alphabets[v] {
                return Err(invalid(format!("observation table of site {v} has the wrong size")));
            }
            check_rows(table, obs_alphabets[v], &format!("observation table of site {v}"))?;
        }

        Ok(Self {
            graph,
            alphabets,
            obs_alphabets,
            transition: kernels,
            observation,
        })
    }

    pub fn graph(&self) -> &FieldGraph {
        &self.graph
    }

    pub fn site_count(&self) -> usize {
        self.alphabets.len()
    }

    pub fn alphabets(&self) -> &[usize] {
        &self.alphabets
    }

    pub fn obs_alphabets(&self) -> &[usize] {
        &self.obs_alphabets
    }

    pub fn state_space_size(&self) -> u128 {
        space_size(&self.alphabets)
    }

    /// `P(X_n^v = · | X_{n-1} = x)`; reads only `x^{N(v)}`.
    pub fn transition_row(&self, v: usize, x: &[u8]) -> &[f64] {
        self.transition[v].row(x)
    }

    pub fn transition_prob(&self, v: usize, x: &[u8], z_v: u8) -> f64 {
        self.transition[v].row(x)[z_v as usize]
    }

    /// `p^v(x, z^v)` relative to the uniform reference.
    pub fn site_transition_density(&self, v: usize, x: &[u8], z_v: u8) -> f64 {
        self.transition_prob(v, x, z_v) * self.alphabets[v] as f64
    }

    pub fn observation_prob(&self, v: usize, x_v: u8, y_v: u8) -> f64 {
        self.observation[v][x_v as usize * self.obs_alphabets[v] + y_v as usize]
    }

    /// `g^v(x^v, y^v)` relative to the uniform reference.
    pub fn site_observation_density(&self, v: usize, x_v: u8, y_v: u8) -> f64 {
        self.observation_prob(v, x_v, y_v) * self.obs_alphabets[v] as f64
    }

    /// Sites whose kernels read `x^v`, i.e. `{u : v ∈ N(u)}`. Equals `N(v)`
    /// because hop distance is symmetric.
    pub fn dependents(&self, v: usize) -> &[usize] {
        self.graph.nbhd(v)
    }

    pub(crate) fn check_state(&self, x: &[u8]) -> Result<()> {
        crate::distribution::check_config(&self.alphabets, x)
    }

    pub(crate) fn check_observation(&self, y: &[u8]) -> Result<()> {
        crate::distribution::check_config(&self.obs_alphabets, y)
            .map_err(|e| invalid(format!("observation: {e}")))
    }

    /// Writes `site, row, neighborhood, z, probability, density` rows.
    pub fn write_kernels_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["site", "row", "neighborhood", "z", "probability", "density"])
            .map_err(csv_error)?;
        for (v, k) in self.transition.iter().enumerate() {
            let radices: Vec<usize> = k.neighbors.iter().map(|&u| self.alphabets[u]).collect();
            let mut nb = vec![0u8; radices.len()];
            for row in 0..k.rows() {
                decode_into(&radices, row, &mut nb);
                let nb_text = k
                    .neighbors
                    .iter()
                    .zip(&nb)
                    .map(|(u, x)| format!("x{u}={x}"))
                    .collect::<Vec<_>>()
                    .join(" ");
                for z in 0..k.states {
                    let p = k.probs[row * k.states + z];
                    w.write_record([
                        v.to_string(),
                        row.to_string(),
                        nb_text.clone(),
                        z.to_string(),
                        p.to_string(),
                        (p * k.states as f64).to_string(),
                    ])
                    .map_err(csv_error)?;
                }
            }
        }
        w.flush().map_err(|e| invalid(e.to_string()))
    }

    fn transition_densities(&self) -> impl Iterator<Item = f64> + '_ {
        self.transition
            .iter()
            .flat_map(|k| k.probs.iter().map(move |p| p * k.states as f64))
    }

    fn observation_densities(&self) -> impl Iterator<Item = f64> + '_ {
        self.observation
            .iter()
            .zip(&self.obs_alphabets)
            .flat_map(|(t, &ny)| t.iter().map(move |p| p * ny as f64))
    }
}

fn check_rows(probs: &[f64], width: usize, what: &str) -> Result<()> {
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(invalid(format!("{what} has a negative or non-finite entry")));
    }
    for (r, row) in probs.chunks(width).enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(invalid(format!("{what}: row {r} sums to {s}")));
        }
    }
    Ok(())
}

fn spin(x: u8) -> f64 {
    if x == 0 {
        -1.0
    } else {
        1.0
    }
}

/// Binary model mixing a uniform kernel with a ferromagnetic one.
///
/// `p^v = λ·uniform + (1-λ)·base` where
/// `base(x^{N(v)}, z) ∝ exp(coupling · s(z) · Σ_{u∈N(v)} s(x^u))`, `s(0) = -1`,
/// `s(1) = +1`. Observations flip the site value with probability `obs_noise`.
pub fn make_uniform_mixture_model(
    graph: FieldGraph,
    lambda: f64,
    coupling: f64,
    obs_noise: f64,
) -> Result<FieldModel> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid(format!("mixing weight must be in [0, 1], got {lambda}")));
    }
    if !coupling.is_finite() {
        return Err(invalid("coupling must be finite"));
    }
    if !(obs_noise > 0.0 && obs_noise <= 0.5) {
        return Err(invalid(format!("observation noise must be in (0, 0.5], got {obs_noise}")));
    }
    let n = graph.vertex_count();
    let transition = (0..n)
        .map(|v| {
            let k = graph.nbhd(v).len();
            let mut table = Vec::with_capacity(2 << k);
            for row in 0..(1usize << k) {
                let field: f64 = (0..k).map(|j| spin(((row >> j) & 1) as u8)).sum();
                // Logistic form of the two-state softmax, stable for large couplings.
                let up = 1.0 / (1.0 + (-2.0 * coupling * field).exp());
                let base = [1.0 - up, up];
                for b in base {
                    table.push(lambda * 0.5 + (1.0 - lambda) * b);
                }
            }
            table
        })
        .collect();
    let observation = vec![vec![1.0 - obs_noise, obs_noise, obs_noise, 1.0 - obs_noise]; n];
    FieldModel::from_tables(graph, vec![2; n], vec![2; n], transition, observation)
}

/// Which constant appears in the `ε_0` threshold and the rate `β`.
///
/// The bias bound uses 18; the correlation-decay estimates use 16.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundConstants {
    #[default]
    Eighteen,
    Sixteen,
}

impl BoundConstants {
    pub fn value(self) -> f64 {
        match self {
            BoundConstants::Eighteen => 18.0,
            BoundConstants::Sixteen => 16.0,
        }
    }
}

/// `ε_0 = (1 - 1/(cΔ²))^{1/(2Δ)}`.
pub fn epsilon_threshold(delta: usize, constants: BoundConstants) -> f64 {
    let d = delta as f64;
    (1.0 - 1.0 / (constants.value() * d * d)).powf(1.0 / (2.0 * d))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingReport {
    /// Largest `ε` with `ε ≤ p^v ≤ 1/ε` over every table entry.
    pub epsilon: f64,
    /// Same for the observation densities.
    pub kappa: f64,
    pub delta: usize,
    pub epsilon0: f64,
    pub passes_threshold: bool,
}

fn mixing_constant(densities: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = densities.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
    if lo <= 0.0 {
        0.0
    } else {
        lo.min(1.0 / hi)
    }
}

pub fn check_mixing_bounds(model: &FieldModel) -> MixingReport {
    let epsilon = mixing_constant(model.transition_densities());
    let kappa = mixing_constant(model.observation_densities());
    let delta = compute_delta(model.graph());
    let epsilon0 = epsilon_threshold(delta, BoundConstants::Eighteen);
    MixingReport {
        epsilon,
        kappa,
        delta,
        epsilon0,
        passes_threshold: epsilon > epsilon0,
    }
}

/// Product of site transition densities `p(x, z) = Π_v p^v(x, z^v)`.
pub fn transition_density(model: &FieldModel, x: &[u8], z: &[u8]) -> Result<f64> {
    model.check_state(x)?;
    model.check_state(z)?;
    Ok((0..model.site_count())
        .map(|v| model.site_transition_density(v, x, z[v]))
        .product())
}

/// Product of site observation densities `g(x, y) = Π_v g^v(x^v, y^v)`.
pub fn likelihood(model: &FieldModel, x: &[u8], y: &[u8]) -> Result<f64> {
    model.check_state(x)?;
    model.check_observation(y)?;
    Ok((0..model.site_count())
        .map(|v| model.site_observation_density(v, x[v], y[v]))
        .product())
}

/// Draws an index from a probability row by inversion.
pub(crate) fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> u8 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i as u8;
            }
        }
    }
    last as u8
}

/// Draws `z ~ p(x, ·)` site by site.
pub fn step_state<R: Rng + ?Sized>(model: &FieldModel, x: &[u8], z: &mut [u8], rng: &mut R) {
    for (v, slot) in z.iter_mut().enumerate() {
        *slot = sample_row(model.transition_row(v, x), rng);
    }
}

/// Draws `y ~ g(x, ·)` site by site.
pub fn observe_state<R: Rng + ?Sized>(model: &FieldModel, x: &[u8], y: &mut [u8], rng: &mut R) {
    for (v, slot) in y.iter_mut().enumerate() {
        let ny = model.obs_alphabets[v];
        let row = &model.observation[v][x[v] as usize * ny..(x[v] as usize + 1) * ny];
        *slot = sample_row(row, rng);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `X_0, …, X_n`.
    pub states: Vec<Vec<u8>>,
    /// `Y_1, …, Y_n`.
    pub observations: Vec<Vec<u8>>,
    pub seed: u64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.observations.len()
    }
}

/// Simulates the signal and its observations for `n` steps.
pub fn simulate(model: &FieldModel, mu: &InitialLaw, n: usize, seed: u64) -> Result<Trajectory> {
    mu.check(model.alphabets())?;
    let mut rng = RngPolicy::new(seed).stream(Purpose::Trajectory, 0, 0, 0);
    let sites = model.site_count();
    let mut x = vec![0u8; sites];
    mu.sample_into(&mut rng, &mut x);
    let mut states = vec![x];
    let mut observations = Vec::with_capacity(n);
    for _ in 0..n {
        let prev = states.last().expect("non-empty");
        let mut z = vec![0u8; sites];
        step_state(model, prev, &mut z, &mut rng);
        let mut y = vec![0u8; sites];
        observe_state(model, &z, &mut y, &mut rng);
        states.push(z);
        observations.push(y);
    }
    Ok(Trajectory {
        states,
        observations,
        seed,
    })
}
