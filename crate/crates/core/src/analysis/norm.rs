//! Error norms, bias profiles and spatial summaries.

use rayon::prelude::*;

use crate::distribution::{space_size, DenseDistribution, InitialLaw};
use crate::error::{invalid, Error, Result};
use crate::exact::{block_marginal, local_tv, ExactFilter};
use crate::graph::PartitionSchedule;
use crate::model::FieldModel;
use crate::particle::{empirical_local_measure, BlockedEnsemble};

/// Largest `|X^J|` accepted by [`rms_norm_estimate`].
pub const RMS_TABLE_CAP: u128 = 16;

/// Anything with a marginal on a set of sites.
pub trait LocalMeasure {
    /// Table over `X^J`, sites ascending.
    fn local_table(&self, j: &[usize]) -> Result<DenseDistribution>;
}

impl LocalMeasure for DenseDistribution {
    fn local_table(&self, j: &[usize]) -> Result<DenseDistribution> {
        block_marginal(self, j)
    }
}

impl<M: LocalMeasure + ?Sized> LocalMeasure for &M {
    fn local_table(&self, j: &[usize]) -> Result<DenseDistribution> {
        (**self).local_table(j)
    }
}

impl LocalMeasure for BlockedEnsemble {
    fn local_table(&self, j: &[usize]) -> Result<DenseDistribution> {
        empirical_local_measure(self, j)
    }
}

/// `⦀ρ - ρ'⦀_J` estimated over replicates of a random measure `ρ`.
///
/// The supremum over `|f| ≤ 1` is attained at a ±1 function, and the
/// objective only depends on `f` up to sign, so `2^{|X^J|-1}` functions are
/// scanned exactly.
pub fn rms_norm_estimate<M: LocalMeasure>(
    runs: &[M],
    reference: &DenseDistribution,
    j: &[usize],
) -> Result<f64> {
    if runs.is_empty() {
        return Err(invalid("at least one replicate is required"));
    }
    let target = reference.local_table(j)?;
    let k = target.len();
    if k as u128 > RMS_TABLE_CAP {
        return Err(Error::SpaceTooLarge {
            what: "test-function table",
            size: space_size(target.radices()),
            cap: RMS_TABLE_CAP,
        });
    }
    // Second-moment matrix of the deviations.
    let mut second = vec![0.0; k * k];
    for run in runs {
        let table = run.local_table(j)?;
        if table.radices() != target.radices() {
            return Err(invalid("replicate lives on a different space"));
        }
        let d: Vec<f64> = table
            .probs()
            .iter()
            .zip(target.probs())
            .map(|(a, b)| a - b)
            .collect();
        for a in 0..k {
            for b in 0..k {
                second[a * k + b] += d[a] * d[b];
            }
        }
    }
    let r = runs.len() as f64;
    let mut best = 0.0f64;
    let mut f = vec![0.0; k];
    for pattern in 0..1usize << (k - 1) {
        for (a, slot) in f.iter_mut().enumerate() {
            *slot = if a > 0 && pattern >> (a - 1) & 1 == 1 { -1.0 } else { 1.0 };
        }
        let mut q = 0.0;
        for a in 0..k {
            let row = &second[a * k..(a + 1) * k];
            q += f[a] * row.iter().zip(&f).map(|(m, fb)| m * fb).sum::<f64>();
        }
        best = best.max(q / r);
    }
    Ok(best.max(0.0).sqrt())
}

/// Per-time, per-site `⦀π_t - ρ_t⦀_v` over replicate runs.
///
/// `runs[r][t]` is replicate `r` at time `t`; `reference[t]` the exact law.
pub fn monte_carlo_errors<M: LocalMeasure + Sync>(
    runs: &[Vec<M>],
    reference: &[DenseDistribution],
) -> Result<Vec<Vec<f64>>> {
    if runs.iter().any(|r| r.len() != reference.len()) {
        return Err(invalid("replicate horizons differ from the reference"));
    }
    let sites = reference.first().map_or(0, DenseDistribution::site_count);
    (0..reference.len())
        .into_par_iter()
        .map(|t| {
            let column: Vec<&M> = runs.iter().map(|r| &r[t]).collect();
            (0..sites)
                .map(|v| rms_norm_estimate(&column, &reference[t], &[v]))
                .collect()
        })
        .collect()
}

/// `(max - min, population standard deviation)` across sites.
pub fn spatial_spread(profile: &[f64]) -> Result<(f64, f64)> {
    if profile.is_empty() {
        return Err(invalid("profile is empty"));
    }
    let max = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = profile.iter().copied().fold(f64::INFINITY, f64::min);
    let n = profile.len() as f64;
    let mean = profile.iter().sum::<f64>() / n;
    let var = profile.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok((max - min, var.sqrt()))
}

/// `(1/m) Σ_{k=0}^{m-1} values[n-k][v]` for every site.
pub fn window_average(values: &[Vec<f64>], n: usize, m: usize) -> Result<Vec<f64>> {
    if m == 0 || m > n + 1 || n >= values.len() {
        return Err(invalid(format!(
            "window {m} ending at {n} does not fit {} times",
            values.len()
        )));
    }
    let sites = values[n].len();
    Ok((0..sites)
        .map(|v| (0..m).map(|k| values[n - k][v]).sum::<f64>() / m as f64)
        .collect())
}

/// Bias and Monte Carlo error summaries over one observation record.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// `bias[t][v] = ‖π_t - π̃_t‖_v`.
    pub bias: Vec<Vec<f64>>,
    pub window: usize,
    /// Window-averaged bias at the final time.
    pub bias_window: Vec<f64>,
    pub bias_spread: (f64, f64),
    /// Estimates of `⦀π_t - π̂_t⦀_v`, when particle runs were supplied.
    pub total: Option<Vec<Vec<f64>>>,
    /// Estimates of `⦀π̃_t - π̂_t⦀_v`.
    pub variance: Option<Vec<Vec<f64>>>,
}

impl ErrorReport {
    /// Builds the exact part from filter outputs sharing one observation record.
    pub fn from_filters(
        exact: &[DenseDistribution],
        blocked: &[DenseDistribution],
        window: usize,
    ) -> Result<Self> {
        if exact.len() != blocked.len() || exact.is_empty() {
            return Err(invalid("filter outputs must be non-empty and of equal length"));
        }
        let bias: Vec<Vec<f64>> = exact
            .iter()
            .zip(blocked)
            .map(|(a, b)| {
                (0..a.site_count())
                    .map(|v| local_tv(a, b, &[v]))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let n = bias.len() - 1;
        let bias_window = window_average(&bias, n, window)?;
        let bias_spread = spatial_spread(&bias_window)?;
        Ok(Self {
            bias,
            window,
            bias_window,
            bias_spread,
            total: None,
            variance: None,
        })
    }

    /// Adds Monte Carlo estimates from particle runs on the same observations.
    pub fn with_particles(
        mut self,
        runs: &[Vec<BlockedEnsemble>],
        exact: &[DenseDistribution],
        blocked: &[DenseDistribution],
    ) -> Result<Self> {
        self.total = Some(monte_carlo_errors(runs, exact)?);
        self.variance = Some(monte_carlo_errors(runs, blocked)?);
        Ok(self)
    }
}

/// Exact bias `‖π_t - π̃_t‖_v` of the blocked filter under `schedule`.
pub fn bias_profile(
    model: &FieldModel,
    mu: &InitialLaw,
    observations: &[Vec<u8>],
    schedule: &PartitionSchedule,
    window: usize,
) -> Result<ErrorReport> {
    if observations.len() < window {
        return Err(invalid("the horizon is shorter than the window"));
    }
    let filter = ExactFilter::new(model)?;
    let exact = filter.run(mu, observations)?;
    let blocked = filter.run_blocked(mu, observations, schedule)?;
    ErrorReport::from_filters(&exact, &blocked, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_cycle_graph, Partition};
    use crate::model::{make_uniform_mixture_model, simulate};
    use crate::particle::sampling_operator;
    use crate::rng::{Purpose, RngPolicy};

    #[test]
    fn spread_cases() {
        assert_eq!(spatial_spread(&[0.3; 4]).unwrap(), (0.0, 0.0));
        let (range, sd) = spatial_spread(&[0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(range, 1.0);
        assert!((sd - 0.4).abs() < 1e-15);
        assert!(spatial_spread(&[]).is_err());
    }

    #[test]
    fn rms_of_exact_copies_is_zero() {
        let rho = DenseDistribution::from_weights(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let runs = vec![rho.clone(); 5];
        assert_eq!(rms_norm_estimate(&runs, &rho, &[0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn single_replicate_is_local_tv() {
        let a = DenseDistribution::from_weights(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = DenseDistribution::from_weights(vec![2, 2], vec![4.0, 1.0, 1.0, 4.0]).unwrap();
        for j in [vec![0], vec![1], vec![0, 1]] {
            let rms = rms_norm_estimate(std::slice::from_ref(&b), &a, &j).unwrap();
            assert!((rms - local_tv(&a, &b, &j).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn rms_brute_force_oracle() {
        // Scan every ±1 function directly instead of through the moment matrix.
        let reference = DenseDistribution::uniform(vec![3]).unwrap();
        let runs: Vec<DenseDistribution> = [[0.5, 0.2, 0.3], [0.1, 0.3, 0.6], [0.3, 0.3, 0.4]]
            .iter()
            .map(|p| DenseDistribution::from_probs(vec![3], p.to_vec()).unwrap())
            .collect();
        let mut best = 0.0f64;
        for pattern in 0..8 {
            let f: Vec<f64> = (0..3).map(|a| if pattern >> a & 1 == 1 { -1.0 } else { 1.0 }).collect();
            let ms: f64 = runs
                .iter()
                .map(|r| {
                    r.probs()
                        .iter()
                        .zip(reference.probs())
                        .zip(&f)
                        .map(|((p, q), f)| (p - q) * f)
                        .sum::<f64>()
                        .powi(2)
                })
                .sum::<f64>()
                / 3.0;
            best = best.max(ms.sqrt());
        }
        let got = rms_norm_estimate(&runs, &reference, &[0]).unwrap();
        assert!((got - best).abs() < 1e-14);
    }

    #[test]
    fn rms_cap() {
        let rho = DenseDistribution::uniform(vec![2; 5]).unwrap();
        assert!(matches!(
            rms_norm_estimate(std::slice::from_ref(&rho), &rho, &[0, 1, 2, 3, 4]),
            Err(Error::SpaceTooLarge { .. })
        ));
        assert!(rms_norm_estimate::<DenseDistribution>(&[], &rho, &[0]).is_err());
    }

    #[test]
    fn sampling_error_halves_when_n_quadruples() {
        let rho = DenseDistribution::uniform(vec![4]).unwrap();
        let policy = RngPolicy::new(12);
        let err = |n: usize| {
            let runs: Vec<_> = (0..1000)
                .map(|r| {
                    let mut rng = policy.stream(Purpose::Sampling, r, n as u64, 0);
                    sampling_operator(&rho, n, &mut rng).unwrap()
                })
                .collect();
            rms_norm_estimate(&runs, &rho, &[0]).unwrap()
        };
        let ratio = err(100) / err(400);
        assert!((ratio - 2.0).abs() < 0.25, "ratio {ratio}");
    }

    #[test]
    fn window_average_cases() {
        let values = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]];
        assert_eq!(window_average(&values, 2, 2).unwrap(), vec![3.0, 4.0]);
        assert_eq!(window_average(&values, 2, 1).unwrap(), vec![4.0, 5.0]);
        assert!(window_average(&values, 2, 4).is_err());
        assert!(window_average(&values, 3, 1).is_err());
    }

    #[test]
    fn trivial_schedule_has_no_bias() {
        let g = build_cycle_graph(5, 1).unwrap();
        let m = make_uniform_mixture_model(g, 0.5, 1.0, 0.2).unwrap();
        let mu = InitialLaw::Point(vec![0; 5]);
        let traj = simulate(&m, &mu, 6, 1).unwrap();
        let report = bias_profile(&m, &mu, &traj.observations, &PartitionSchedule::trivial(5), 3).unwrap();
        assert!(report.bias.iter().flatten().all(|&b| b == 0.0));
    }

    #[test]
    fn uninformative_uniform_model_has_no_bias() {
        let g = build_cycle_graph(5, 1).unwrap();
        let m = make_uniform_mixture_model(g, 1.0, 1.0, 0.5).unwrap();
        let mu = InitialLaw::Point(vec![0; 5]);
        let split = Partition::new(5, vec![vec![0, 1], vec![2, 3, 4]]).unwrap();
        let obs = vec![vec![1, 0, 1, 1, 0]; 4];
        let report = bias_profile(&m, &mu, &obs, &PartitionSchedule::fixed(split), 2).unwrap();
        assert!(report.bias.iter().flatten().all(|&b| b < 1e-14));
        assert_eq!(report.bias_spread.0, 0.0);
    }
}
