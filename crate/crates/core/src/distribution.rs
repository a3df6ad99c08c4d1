//! Dense probability tables over joint configurations.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{invalid, Error, Result};

const NORMALIZATION_TOL: f64 = 1e-10;

/// Number of joint configurations, saturating on overflow.
pub fn space_size(radices: &[usize]) -> u128 {
    radices
        .iter()
        .fold(1u128, |acc, &r| acc.saturating_mul(r as u128))
}

/// Mixed-radix index with site 0 least significant.
pub fn encode(radices: &[usize], config: &[u8]) -> usize {
    let mut idx = 0;
    for (&r, &x) in radices.iter().zip(config).rev() {
        idx = idx * r + x as usize;
    }
    idx
}

pub fn decode_into(radices: &[usize], mut idx: usize, out: &mut [u8]) {
    for (&r, slot) in radices.iter().zip(out.iter_mut()) {
        *slot = (idx % r) as u8;
        idx /= r;
    }
}

pub fn decode(radices: &[usize], idx: usize) -> Vec<u8> {
    let mut out = vec![0; radices.len()];
    decode_into(radices, idx, &mut out);
    out
}

/// Exact law on the product of finite site alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseDistribution {
    radices: Vec<usize>,
    probs: Vec<f64>,
}

impl DenseDistribution {
    pub fn from_probs(radices: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        check_radices(&radices)?;
        let size = space_size(&radices);
        if size != probs.len() as u128 {
            return Err(invalid(format!(
                "table has {} entries, the space has {size} configurations",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("probabilities must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { radices, probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(radices: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(invalid("weights must have a positive finite sum"));
        }
        Self::from_probs(radices, weights.into_iter().map(|w| w / total).collect())
    }

    pub(crate) fn from_raw(radices: Vec<usize>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(space_size(&radices), probs.len() as u128);
        Self { radices, probs }
    }

    pub fn uniform(radices: Vec<usize>) -> Result<Self> {
        check_radices(&radices)?;
        let size = space_size(&radices);
        let size = usize::try_from(size).map_err(|_| invalid("space too large"))?;
        Ok(Self {
            radices,
            probs: vec![1.0 / size as f64; size],
        })
    }

    pub fn point_mass(radices: Vec<usize>, config: &[u8]) -> Result<Self> {
        check_config(&radices, config)?;
        let size = usize::try_from(space_size(&radices)).map_err(|_| invalid("space too large"))?;
        let mut probs = vec![0.0; size];
        probs[encode(&radices, config)] = 1.0;
        Ok(Self { radices, probs })
    }

    /// Product of independent site marginals.
    pub fn product(marginals: &[Vec<f64>]) -> Result<Self> {
        let radices: Vec<usize> = marginals.iter().map(Vec::len).collect();
        check_radices(&radices)?;
        let size = usize::try_from(space_size(&radices)).map_err(|_| invalid("space too large"))?;
        let mut config = vec![0u8; radices.len()];
        let probs = (0..size)
            .map(|idx| {
                decode_into(&radices, idx, &mut config);
                marginals
                    .iter()
                    .zip(&config)
                    .map(|(m, &x)| m[x as usize])
                    .product()
            })
            .collect();
        Self::from_probs(radices, probs)
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn site_count(&self) -> usize {
        self.radices.len()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, config: &[u8]) -> f64 {
        self.probs[encode(&self.radices, config)]
    }

    pub fn encode(&self, config: &[u8]) -> usize {
        encode(&self.radices, config)
    }

    pub fn decode(&self, idx: usize) -> Vec<u8> {
        decode(&self.radices, idx)
    }

    /// Expectation of a function of the configuration index.
    pub fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.probs.iter().enumerate().map(|(i, &p)| p * f(i)).sum()
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        // The table is normalized, so the weighted index always exists.
        WeightedIndex::new(&self.probs)
            .expect("normalized table")
            .sample(rng)
    }

    /// Writes `index, x0, x1, ..., probability` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string()];
        header.extend((0..self.site_count()).map(|v| format!("x{v}")));
        header.push("probability".into());
        w.write_record(&header).map_err(csv_error)?;
        for (idx, p) in self.probs.iter().enumerate() {
            let mut row = vec![idx.to_string()];
            row.extend(self.decode(idx).iter().map(u8::to_string));
            row.push(p.to_string());
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush().map_err(|e| invalid(e.to_string()))
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    invalid(format!("csv: {e}"))
}

fn check_radices(radices: &[usize]) -> Result<()> {
    if radices.is_empty() {
        return Err(invalid("a distribution needs at least one site"));
    }
    if let Some(r) = radices.iter().find(|&&r| r == 0 || r > 255) {
        return Err(invalid(format!("alphabet size {r} outside 1..=255")));
    }
    Ok(())
}

pub(crate) fn check_config(radices: &[usize], config: &[u8]) -> Result<()> {
    if config.len() != radices.len() {
        return Err(invalid(format!(
            "configuration has {} sites, expected {}",
            config.len(),
            radices.len()
        )));
    }
    if let Some((v, (&x, &r))) = config
        .iter()
        .zip(radices)
        .enumerate()
        .find(|(_, (&x, &r))| x as usize >= r)
    {
        return Err(invalid(format!("site {v} value {x} outside alphabet of size {r}")));
    }
    Ok(())
}

/// Initial law `μ` of the signal.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    Point(Vec<u8>),
    Dense(DenseDistribution),
    /// Independent sites with the given marginals.
    Product(Vec<Vec<f64>>),
}

impl InitialLaw {
    pub fn to_dense(&self, radices: &[usize]) -> Result<DenseDistribution> {
        match self {
            InitialLaw::Point(x) => DenseDistribution::point_mass(radices.to_vec(), x),
            InitialLaw::Dense(d) => {
                if d.radices() != radices {
                    return Err(invalid("initial law is defined on a different space"));
                }
                Ok(d.clone())
            }
            InitialLaw::Product(m) => {
                self.check(radices)?;
                DenseDistribution::product(m)
            }
        }
    }

    pub(crate) fn check(&self, radices: &[usize]) -> Result<()> {
        match self {
            InitialLaw::Point(x) => check_config(radices, x),
            InitialLaw::Dense(d) if d.radices() != radices => {
                Err(invalid("initial law is defined on a different space"))
            }
            InitialLaw::Dense(_) => Ok(()),
            InitialLaw::Product(m) => {
                if m.len() != radices.len() || m.iter().zip(radices).any(|(p, &r)| p.len() != r) {
                    return Err(invalid("product marginals do not match the site alphabets"));
                }
                for p in m {
                    let total: f64 = p.iter().sum();
                    if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (total - 1.0).abs() > NORMALIZATION_TOL {
                        return Err(invalid("product marginals must be probability vectors"));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [u8]) {
        match self {
            InitialLaw::Point(x) => out.copy_from_slice(x),
            InitialLaw::Dense(d) => {
                let idx = d.sample_index(rng);
                decode_into(d.radices(), idx, out);
            }
            InitialLaw::Product(m) => {
                for (slot, p) in out.iter_mut().zip(m) {
                    *slot = crate::model::sample_row(p, rng);
                }
            }
        }
    }
}
