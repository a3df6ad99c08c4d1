//! Scenario files: strict TOML schema, validation and presets.

use std::path::Path;

use abpf_core::distribution::space_size;
use abpf_core::exact::DEFAULT_SPACE_CAP;
use abpf_core::graph::{
    build_cycle_graph, build_torus_grid, shifted_cycle_partitions, torus_tiling_partitions,
    FieldGraph, Partition, PartitionSchedule, SwitchingSignal,
};
use abpf_core::model::{make_uniform_mixture_model, BoundConstants, FieldModel};
use abpf_core::InitialLaw;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, HarnessResult};

pub const PRESETS: &[(&str, &str)] = &[
    ("cycle5-shifts", include_str!("../presets/cycle5-shifts.toml")),
    ("cycle5-partial", include_str!("../presets/cycle5-partial.toml")),
    ("torus-4x4", include_str!("../presets/torus-4x4.toml")),
    ("torus-6x6-9offsets", include_str!("../presets/torus-6x6-9offsets.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub horizon: usize,
    pub window: usize,
    #[serde(default)]
    pub particles: Vec<usize>,
    #[serde(default = "one")]
    pub replicates: usize,
    pub graph: GraphSpec,
    pub model: ModelSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub engines: EngineSpec,
    #[serde(default)]
    pub bounds: BoundsSpec,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFamily {
    Cycle,
    Torus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub family: GraphFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    pub radius: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub lambda: f64,
    pub coupling: f64,
    pub obs_noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    #[default]
    Point,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default)]
    pub kind: InitialKind,
    /// Point-mass configuration; all zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    ShiftedCycle,
    TorusTiling,
    Explicit,
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub generator: Generator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_sizes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tile: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partitions: Option<Vec<Vec<Vec<usize>>>>,
    /// Explicit switching sequence; cyclic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSpec {
    #[serde(default)]
    pub exact: bool,
    #[serde(default)]
    pub blocked_exact: bool,
    #[serde(default)]
    pub bootstrap: bool,
    #[serde(default)]
    pub blocked_pf: bool,
    #[serde(default)]
    pub abpf: bool,
}

impl Default for EngineSpec {
    fn default() -> Self {
        Self {
            exact: true,
            blocked_exact: true,
            bootstrap: false,
            blocked_pf: false,
            abpf: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerSpec {
    #[default]
    PerSchedule,
    ThetaOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    /// Rate used for `ϑ_m` in the partition statistics.
    #[serde(default = "unit")]
    pub stats_beta: f64,
    /// Mixing constant; measured from the model when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// 18 or 16.
    #[serde(default = "eighteen")]
    pub constants: u32,
    #[serde(default)]
    pub inner: InnerSpec,
    #[serde(default = "unit")]
    pub alpha: f64,
    #[serde(default = "unit")]
    pub variance_beta: f64,
}

fn unit() -> f64 {
    1.0
}

fn eighteen() -> u32 {
    18
}

impl Default for BoundsSpec {
    fn default() -> Self {
        Self {
            stats_beta: 1.0,
            epsilon: None,
            constants: 18,
            inner: InnerSpec::PerSchedule,
            alpha: 1.0,
            variance_beta: 1.0,
        }
    }
}

impl BoundsSpec {
    pub fn constants(&self) -> HarnessResult<BoundConstants> {
        match self.constants {
            18 => Ok(BoundConstants::Eighteen),
            16 => Ok(BoundConstants::Sixteen),
            c => Err(HarnessError::Validation(format!(
                "bounds.constants must be 16 or 18, got {c}"
            ))),
        }
    }
}

/// Model objects built from a validated scenario.
#[derive(Debug, Clone)]
pub struct Built {
    pub graph: FieldGraph,
    pub model: FieldModel,
    pub mu: InitialLaw,
    pub schedule: PartitionSchedule,
}

fn validation<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Validation(e.to_string())
}

impl Scenario {
    pub fn from_toml(text: &str) -> HarnessResult<Self> {
        toml::from_str(text).map_err(validation)
    }

    pub fn to_toml(&self) -> HarnessResult<String> {
        toml::to_string(self).map_err(validation)
    }

    pub fn seed(&self) -> HarnessResult<u64> {
        self.seed
            .ok_or_else(|| HarnessError::Validation("missing field `seed`".into()))
    }

    /// SHA-256 of the canonical JSON form (keys sorted).
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(self).expect("scenario serializes");
        let canonical = serde_json::to_string(&value).expect("json value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Checks every constraint that does not need the engines.
    pub fn validate(&self) -> HarnessResult<Built> {
        self.seed()?;
        if self.horizon == 0 {
            return Err(validation("horizon must be positive"));
        }
        if self.window == 0 || self.window > self.horizon {
            return Err(validation(format!(
                "window must be in 1..={}, got {}",
                self.horizon, self.window
            )));
        }
        if self.replicates == 0 {
            return Err(validation("replicates must be positive"));
        }
        if self.particles.contains(&0) {
            return Err(validation("particle counts must be positive"));
        }
        let e = &self.engines;
        if (e.bootstrap || e.blocked_pf || e.abpf) && self.particles.is_empty() {
            return Err(validation("particle engines need a non-empty `particles` list"));
        }
        self.bounds.constants()?;
        if !(self.bounds.stats_beta > 0.0 && self.bounds.stats_beta.is_finite()) {
            return Err(validation("bounds.stats_beta must be positive"));
        }

        let graph = self.build_graph()?;
        let n = graph.vertex_count();
        if (e.exact || e.blocked_exact) && space_size(&vec![2; n]) > DEFAULT_SPACE_CAP {
            return Err(validation(format!(
                "exact engines need at most {DEFAULT_SPACE_CAP} joint configurations; \
                 {n} binary sites give {}",
                space_size(&vec![2; n])
            )));
        }
        let model = make_uniform_mixture_model(
            graph.clone(),
            self.model.lambda,
            self.model.coupling,
            self.model.obs_noise,
        )
        .map_err(validation)?;
        let mu = match self.initial.kind {
            InitialKind::Point => {
                let state = self.initial.state.clone().unwrap_or_else(|| vec![0; n]);
                if state.len() != n || state.iter().any(|&x| x > 1) {
                    return Err(validation("initial.state must hold one 0/1 value per site"));
                }
                InitialLaw::Point(state)
            }
            InitialKind::Uniform => {
                if self.initial.state.is_some() {
                    return Err(validation("initial.state only applies to point initial laws"));
                }
                InitialLaw::Product(vec![vec![0.5, 0.5]; n])
            }
        };
        let schedule = self.build_schedule(&graph)?;
        Ok(Built {
            graph,
            model,
            mu,
            schedule,
        })
    }

    fn build_graph(&self) -> HarnessResult<FieldGraph> {
        let g = &self.graph;
        match g.family {
            GraphFamily::Cycle => {
                if g.width.is_some() || g.height.is_some() {
                    return Err(validation("cycle graphs take `size`, not width/height"));
                }
                let size = g.size.ok_or_else(|| validation("cycle graphs need `size`"))?;
                build_cycle_graph(size, g.radius).map_err(validation)
            }
            GraphFamily::Torus => {
                if g.size.is_some() {
                    return Err(validation("torus graphs take width/height, not `size`"));
                }
                let w = g.width.ok_or_else(|| validation("torus graphs need `width`"))?;
                let h = g.height.ok_or_else(|| validation("torus graphs need `height`"))?;
                build_torus_grid(w, h, g.radius).map_err(validation)
            }
        }
    }

    fn build_schedule(&self, graph: &FieldGraph) -> HarnessResult<PartitionSchedule> {
        let s = &self.schedule;
        let n = graph.vertex_count();
        let base = match s.generator {
            Generator::ShiftedCycle => {
                let sizes = s
                    .block_sizes
                    .as_ref()
                    .ok_or_else(|| validation("shifted-cycle schedules need `block_sizes`"))?;
                let shifts = s.shifts.unwrap_or(n);
                shifted_cycle_partitions(graph, sizes, shifts).map_err(validation)?
            }
            Generator::TorusTiling => {
                let [tw, th] = s.tile.ok_or_else(|| validation("torus-tiling schedules need `tile`"))?;
                let offsets: Vec<(usize, usize)> = s
                    .offsets
                    .as_ref()
                    .ok_or_else(|| validation("torus-tiling schedules need `offsets`"))?
                    .iter()
                    .map(|&[x, y]| (x, y))
                    .collect();
                torus_tiling_partitions(graph, tw, th, &offsets).map_err(validation)?
            }
            Generator::Explicit => {
                let parts = s
                    .partitions
                    .as_ref()
                    .ok_or_else(|| validation("explicit schedules need `partitions`"))?;
                let partitions = parts
                    .iter()
                    .map(|blocks| Partition::new(n, blocks.clone()))
                    .collect::<abpf_core::Result<Vec<_>>>()
                    .map_err(validation)?;
                PartitionSchedule::cyclic(partitions).map_err(validation)?
            }
            Generator::Trivial => PartitionSchedule::trivial(n),
        };
        match &s.sigma {
            None => Ok(base),
            Some(seq) => PartitionSchedule::new(
                base.partitions().to_vec(),
                SwitchingSignal::Explicit(seq.clone()),
            )
            .map_err(validation),
        }
    }
}

pub fn load_scenario(path: &Path) -> HarnessResult<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let s = Scenario::from_toml(&text)
        .map_err(|e| HarnessError::Validation(format!("{}: {e}", path.display())))?;
    Ok(s)
}

pub fn save_scenario(s: &Scenario, path: &Path) -> HarnessResult<()> {
    std::fs::write(path, s.to_toml()?).map_err(|e| HarnessError::Io(e.to_string()))
}

pub fn preset(name: &str) -> HarnessResult<Scenario> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| {
            let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
            HarnessError::Validation(format!("unknown preset `{name}`; known: {}", names.join(", ")))
        })?;
    Scenario::from_toml(text)
}
