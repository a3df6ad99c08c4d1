//! Field graphs, partitions and partition-derived statistics.
//!
//! A [`FieldGraph`] is a finite undirected graph with an all-pairs hop distance
//! table and a neighborhood radius `r`. A [`PartitionSchedule`] holds `m`
//! partitions of the vertex set and a switching signal choosing one of them at
//! every time step. [`partition_stats`] reduces a schedule to the per-site
//! boundary-distance summaries that drive the bias bound.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{invalid, Result};

/// Distance between vertices in different components, and the distance to an
/// empty boundary. Larger than every finite distance.
pub const UNREACHABLE: usize = usize::MAX;

/// `e^{-beta d}` with `d = UNREACHABLE` mapped to exactly zero.
pub fn decay(beta: f64, d: usize) -> f64 {
    if d == UNREACHABLE {
        0.0
    } else {
        (-beta * d as f64).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphShape {
    General,
    Cycle { n: usize },
    /// Vertex `(x, y)` has index `y * width + x`.
    Torus { width: usize, height: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldGraph {
    vertex_count: usize,
    radius: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    dist: Vec<usize>,
    neighborhoods: Vec<Vec<usize>>,
    shape: GraphShape,
}

impl FieldGraph {
    /// Builds a graph from an edge list. Edges are unordered; self-loops and
    /// duplicates are rejected.
    pub fn new(vertex_count: usize, edges: &[(usize, usize)], radius: usize) -> Result<Self> {
        Self::with_shape(vertex_count, edges, radius, GraphShape::General)
    }

    fn with_shape(
        vertex_count: usize,
        edges: &[(usize, usize)],
        radius: usize,
        shape: GraphShape,
    ) -> Result<Self> {
        if vertex_count == 0 {
            return Err(invalid("graph needs at least one vertex"));
        }
        if radius == 0 {
            return Err(invalid("neighborhood radius must be positive"));
        }
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); vertex_count];
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= vertex_count || b >= vertex_count {
                return Err(invalid(format!("edge ({a}, {b}) references a missing vertex")));
            }
            if a == b {
                return Err(invalid(format!("self-loop at vertex {a}")));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(invalid(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
            normalized.push(e);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }

        let dist = all_pairs_bfs(&adjacency);
        let neighborhoods = (0..vertex_count)
            .map(|v| {
                (0..vertex_count)
                    .filter(|&u| dist[v * vertex_count + u] <= radius)
                    .collect()
            })
            .collect();

        Ok(Self {
            vertex_count,
            radius,
            edges: normalized,
            adjacency,
            dist,
            neighborhoods,
            shape,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn adjacent(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn shape(&self) -> GraphShape {
        self.shape
    }

    /// Hop distance, or [`UNREACHABLE`] across components.
    pub fn distance(&self, u: usize, v: usize) -> usize {
        self.dist[u * self.vertex_count + v]
    }

    /// Sorted vertices within `r` hops of `v`, including `v`.
    pub fn neighborhood(&self, v: usize) -> Result<&[usize]> {
        self.check_vertex(v)?;
        Ok(&self.neighborhoods[v])
    }

    pub(crate) fn nbhd(&self, v: usize) -> &[usize] {
        &self.neighborhoods[v]
    }

    pub fn is_connected(&self) -> bool {
        self.dist[..self.vertex_count].iter().all(|&d| d != UNREACHABLE)
    }

    /// Minimum hop distance over vertex pairs drawn from `a` and `b`.
    pub fn set_distance(&self, a: &[usize], b: &[usize]) -> usize {
        a.iter()
            .flat_map(|&u| b.iter().map(move |&v| (u, v)))
            .map(|(u, v)| self.distance(u, v))
            .min()
            .unwrap_or(UNREACHABLE)
    }

    pub(crate) fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.vertex_count {
            Ok(())
        } else {
            Err(invalid(format!(
                "vertex {v} out of range for a graph with {} vertices",
                self.vertex_count
            )))
        }
    }
}

fn all_pairs_bfs(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut dist = vec![UNREACHABLE; n * n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        let row = &mut dist[s * n..(s + 1) * n];
        row[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &w in &adjacency[u] {
                if row[w] == UNREACHABLE {
                    row[w] = row[u] + 1;
                    queue.push_back(w);
                }
            }
        }
    }
    dist
}

/// The cycle `C_n` with edges `{i, i+1 mod n}`.
pub fn build_cycle_graph(n: usize, radius: usize) -> Result<FieldGraph> {
    if n < 3 {
        return Err(invalid(format!("cycle needs at least 3 vertices, got {n}")));
    }
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    FieldGraph::with_shape(n, &edges, radius, GraphShape::Cycle { n })
}

/// A `width × height` lattice with four-neighbor wraparound adjacency.
pub fn build_torus_grid(width: usize, height: usize, radius: usize) -> Result<FieldGraph> {
    if width < 3 || height < 3 {
        return Err(invalid(format!(
            "torus dimensions must be at least 3x3, got {width}x{height}"
        )));
    }
    let idx = |x: usize, y: usize| y * width + x;
    let mut edges = Vec::with_capacity(2 * width * height);
    for y in 0..height {
        for x in 0..width {
            edges.push((idx(x, y), idx((x + 1) % width, y)));
            edges.push((idx(x, y), idx(x, (y + 1) % height)));
        }
    }
    FieldGraph::with_shape(width * height, &edges, radius, GraphShape::Torus { width, height })
}

/// `Δ`: the largest neighborhood cardinality.
pub fn compute_delta(g: &FieldGraph) -> usize {
    g.neighborhoods.iter().map(Vec::len).max().unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

impl Partition {
    /// Validates that `blocks` are non-empty, disjoint and cover `0..vertex_count`.
    /// Vertices inside each block are sorted.
    pub fn new(vertex_count: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut block_of = vec![usize::MAX; vertex_count];
        let mut blocks = blocks;
        for (k, block) in blocks.iter_mut().enumerate() {
            if block.is_empty() {
                return Err(invalid(format!("block {k} is empty")));
            }
            block.sort_unstable();
            for &v in block.iter() {
                if v >= vertex_count {
                    return Err(invalid(format!("block {k} holds missing vertex {v}")));
                }
                if block_of[v] != usize::MAX {
                    return Err(invalid(format!("vertex {v} appears in more than one block")));
                }
                block_of[v] = k;
            }
        }
        if let Some(v) = block_of.iter().position(|&k| k == usize::MAX) {
            return Err(invalid(format!("vertex {v} is not covered by any block")));
        }
        Ok(Self { blocks, block_of })
    }

    /// The trivial partition `{V}`.
    pub fn single_block(vertex_count: usize) -> Self {
        Self {
            blocks: vec![(0..vertex_count).collect()],
            block_of: vec![0; vertex_count],
        }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &[usize] {
        &self.blocks[k]
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.block_of.len()
    }

    pub fn block_of(&self, v: usize) -> usize {
        self.block_of[v]
    }

    pub fn max_block_size(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Maps a time index `s ≥ 1` to a partition index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SwitchingSignal {
    /// `σ(s) = s mod m`.
    Cyclic,
    /// `σ(s) = sequence[(s - 1) mod len]`.
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSchedule {
    partitions: Vec<Partition>,
    signal: SwitchingSignal,
}

impl PartitionSchedule {
    pub fn new(partitions: Vec<Partition>, signal: SwitchingSignal) -> Result<Self> {
        let Some(first) = partitions.first() else {
            return Err(invalid("schedule needs at least one partition"));
        };
        let n = first.vertex_count();
        if partitions.iter().any(|p| p.vertex_count() != n) {
            return Err(invalid("partitions in a schedule must cover the same vertex set"));
        }
        if let SwitchingSignal::Explicit(seq) = &signal {
            if seq.is_empty() {
                return Err(invalid("explicit switching sequence is empty"));
            }
            if let Some(&bad) = seq.iter().find(|&&j| j >= partitions.len()) {
                return Err(invalid(format!(
                    "switching sequence selects partition {bad} of {}",
                    partitions.len()
                )));
            }
        }
        Ok(Self { partitions, signal })
    }

    pub fn cyclic(partitions: Vec<Partition>) -> Result<Self> {
        Self::new(partitions, SwitchingSignal::Cyclic)
    }

    /// Schedule with the single partition `{V}`; the blocked filters reduce to
    /// the unblocked ones.
    pub fn trivial(vertex_count: usize) -> Self {
        Self {
            partitions: vec![Partition::single_block(vertex_count)],
            signal: SwitchingSignal::Cyclic,
        }
    }

    /// Schedule that always uses `partition` (`m = 1`).
    pub fn fixed(partition: Partition) -> Self {
        Self {
            partitions: vec![partition],
            signal: SwitchingSignal::Cyclic,
        }
    }

    pub fn m(&self) -> usize {
        self.partitions.len()
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn partition(&self, j: usize) -> &Partition {
        &self.partitions[j]
    }

    pub fn signal(&self) -> &SwitchingSignal {
        &self.signal
    }

    pub fn is_cyclic(&self) -> bool {
        matches!(self.signal, SwitchingSignal::Cyclic)
    }

    pub fn sigma(&self, s: usize) -> usize {
        match &self.signal {
            SwitchingSignal::Cyclic => s % self.partitions.len(),
            SwitchingSignal::Explicit(seq) => seq[s.saturating_sub(1) % seq.len()],
        }
    }

    pub fn partition_at(&self, s: usize) -> &Partition {
        &self.partitions[self.sigma(s)]
    }

    /// `|K|_∞`: the largest block over all partitions.
    pub fn max_block_size(&self) -> usize {
        self.partitions.iter().map(Partition::max_block_size).max().unwrap_or(0)
    }
}

/// `Δ_K`: the largest number of blocks within distance `r` of a block, over
/// all partitions of the schedule. Block distance is the minimum vertex-pair
/// hop distance, so each block counts itself.
pub fn compute_delta_k(g: &FieldGraph, schedule: &PartitionSchedule) -> usize {
    let r = g.radius();
    schedule
        .partitions()
        .iter()
        .flat_map(|p| {
            p.blocks().iter().map(move |k| {
                p.blocks()
                    .iter()
                    .filter(|other| g.set_distance(k, other) <= r)
                    .count()
            })
        })
        .max()
        .unwrap_or(0)
}

/// `∂K`: vertices of block `k` whose neighborhood is not contained in the block.
pub fn block_boundary(g: &FieldGraph, p: &Partition, k: usize) -> Result<Vec<usize>> {
    if k >= p.len() {
        return Err(invalid(format!("block {k} out of range for {} blocks", p.len())));
    }
    check_partition(g, p)?;
    Ok(p.block(k)
        .iter()
        .copied()
        .filter(|&v| g.nbhd(v).iter().any(|&u| p.block_of(u) != k))
        .collect())
}

/// `d(v, ∂K(v))`, with [`UNREACHABLE`] for an empty boundary.
pub fn dist_to_boundary(g: &FieldGraph, p: &Partition, v: usize) -> Result<usize> {
    g.check_vertex(v)?;
    let boundary = block_boundary(g, p, p.block_of(v))?;
    Ok(boundary
        .iter()
        .map(|&u| g.distance(v, u))
        .min()
        .unwrap_or(UNREACHABLE))
}

fn check_partition(g: &FieldGraph, p: &Partition) -> Result<()> {
    if p.vertex_count() != g.vertex_count() {
        return Err(invalid(format!(
            "partition covers {} vertices, graph has {}",
            p.vertex_count(),
            g.vertex_count()
        )));
    }
    Ok(())
}

fn boundary_distance_row(g: &FieldGraph, p: &Partition) -> Vec<usize> {
    let boundaries: Vec<Vec<usize>> = (0..p.len())
        .map(|k| block_boundary(g, p, k).expect("validated partition"))
        .collect();
    (0..g.vertex_count())
        .map(|v| {
            boundaries[p.block_of(v)]
                .iter()
                .map(|&u| g.distance(v, u))
                .min()
                .unwrap_or(UNREACHABLE)
        })
        .collect()
}

/// Boundary-distance summaries of a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionStats {
    /// `boundary_distances[j][v] = d(v, ∂K_j(v))`.
    pub boundary_distances: Vec<Vec<usize>>,
    pub beta: f64,
    /// Mean boundary distance over the `m` partitions; infinite when some
    /// boundary is empty.
    pub theta_m: Vec<f64>,
    /// Mean of `e^{-β d(v, ∂K_j(v))}` over the partitions.
    pub vartheta_m: Vec<f64>,
    pub delta: usize,
    pub delta_k: usize,
    /// `Δ_d(v)`: largest boundary distance over partitions.
    pub delta_d: Vec<usize>,
    /// `∇_d(v)`: smallest boundary distance over partitions.
    pub nabla_d: Vec<usize>,
    pub block_size_max: usize,
    /// `θ = min_v θ_m(v)`.
    pub theta_lower: f64,
    /// `ϑ = max_v ϑ_m(v)`.
    pub vartheta_upper: f64,
    /// Set when some vertex sits in a block with an empty boundary.
    pub has_unbounded: bool,
}

impl PartitionStats {
    pub fn m(&self) -> usize {
        self.boundary_distances.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.theta_m.len()
    }

    /// `ϑ_m(v)` evaluated at a different rate.
    pub fn vartheta_at(&self, beta: f64) -> Vec<f64> {
        let m = self.m() as f64;
        (0..self.vertex_count())
            .map(|v| {
                self.boundary_distances
                    .iter()
                    .map(|row| decay(beta, row[v]))
                    .sum::<f64>()
                    / m
            })
            .collect()
    }
}

pub fn partition_stats(
    g: &FieldGraph,
    schedule: &PartitionSchedule,
    beta: f64,
) -> Result<PartitionStats> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid(format!("beta must be positive and finite, got {beta}")));
    }
    for p in schedule.partitions() {
        check_partition(g, p)?;
    }
    let boundary_distances: Vec<Vec<usize>> = schedule
        .partitions()
        .iter()
        .map(|p| boundary_distance_row(g, p))
        .collect();
    let n = g.vertex_count();
    let m = schedule.m() as f64;

    let mut theta_m = Vec::with_capacity(n);
    let mut delta_d = Vec::with_capacity(n);
    let mut nabla_d = Vec::with_capacity(n);
    let mut has_unbounded = false;
    for v in 0..n {
        let column = boundary_distances.iter().map(|row| row[v]);
        let unbounded = column.clone().any(|d| d == UNREACHABLE);
        has_unbounded |= unbounded;
        theta_m.push(if unbounded {
            f64::INFINITY
        } else {
            column.clone().sum::<usize>() as f64 / m
        });
        delta_d.push(column.clone().max().unwrap_or(0));
        nabla_d.push(column.min().unwrap_or(0));
    }

    let mut stats = PartitionStats {
        boundary_distances,
        beta,
        theta_m,
        vartheta_m: Vec::new(),
        delta: compute_delta(g),
        delta_k: compute_delta_k(g, schedule),
        delta_d,
        nabla_d,
        block_size_max: schedule.max_block_size(),
        theta_lower: 0.0,
        vartheta_upper: 0.0,
        has_unbounded,
    };
    stats.vartheta_m = stats.vartheta_at(beta);
    stats.theta_lower = stats.theta_m.iter().copied().fold(f64::INFINITY, f64::min);
    stats.vartheta_upper = stats.vartheta_m.iter().copied().fold(0.0, f64::max);
    Ok(stats)
}

/// Rotations of a contiguous-block partition of a cycle.
///
/// The base partition cuts `0..n` into consecutive runs of `block_sizes`;
/// partition `j` shifts every block by `j` vertices. The schedule is cyclic.
pub fn shifted_cycle_partitions(
    g: &FieldGraph,
    block_sizes: &[usize],
    shifts: usize,
) -> Result<PartitionSchedule> {
    let n = g.vertex_count();
    if block_sizes.contains(&0) {
        return Err(invalid("block sizes must be positive"));
    }
    let total: usize = block_sizes.iter().sum();
    if total != n {
        return Err(invalid(format!("block sizes sum to {total}, graph has {n} vertices")));
    }
    if shifts == 0 || shifts > n {
        return Err(invalid(format!("number of shifts must be in 1..={n}, got {shifts}")));
    }
    let partitions = (0..shifts)
        .map(|j| {
            let mut start = 0;
            let blocks = block_sizes
                .iter()
                .map(|&size| {
                    let block = (start..start + size).map(|i| (i + j) % n).collect();
                    start += size;
                    block
                })
                .collect();
            Partition::new(n, blocks)
        })
        .collect::<Result<Vec<_>>>()?;
    PartitionSchedule::cyclic(partitions)
}

/// Tilings of a torus by `tile_w × tile_h` rectangles, one partition per
/// offset. Offset `(dx, dy)` moves every tile right by `dx` and down by `dy`
/// with wraparound. The schedule is cyclic.
pub fn torus_tiling_partitions(
    g: &FieldGraph,
    tile_w: usize,
    tile_h: usize,
    offsets: &[(usize, usize)],
) -> Result<PartitionSchedule> {
    let GraphShape::Torus { width, height } = g.shape() else {
        return Err(invalid("torus tiling needs a graph built by build_torus_grid"));
    };
    if tile_w == 0 || tile_h == 0 || width % tile_w != 0 || height % tile_h != 0 {
        return Err(invalid(format!(
            "tile {tile_w}x{tile_h} does not divide the {width}x{height} torus"
        )));
    }
    if offsets.is_empty() {
        return Err(invalid("at least one tiling offset is needed"));
    }
    let tiles_x = width / tile_w;
    let tiles_y = height / tile_h;
    let partitions = offsets
        .iter()
        .map(|&(dx, dy)| {
            if dx >= width || dy >= height {
                return Err(invalid(format!("offset ({dx}, {dy}) outside the torus")));
            }
            let mut blocks = vec![Vec::with_capacity(tile_w * tile_h); tiles_x * tiles_y];
            for y in 0..height {
                for x in 0..width {
                    let tx = ((x + width - dx) % width) / tile_w;
                    let ty = ((y + height - dy) % height) / tile_h;
                    blocks[ty * tiles_x + tx].push(y * width + x);
                }
            }
            Partition::new(width * height, blocks)
        })
        .collect::<Result<Vec<_>>>()?;
    PartitionSchedule::cyclic(partitions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c5() -> FieldGraph {
        build_cycle_graph(5, 1).unwrap()
    }

    fn cycle5(m: usize) -> PartitionSchedule {
        shifted_cycle_partitions(&c5(), &[2, 3], m).unwrap()
    }

    #[test]
    fn cycle_distances_and_neighborhoods() {
        let g = c5();
        assert_eq!(g.vertex_count(), 5);
        assert_eq!(g.distance(0, 2), 2);
        assert_eq!(g.neighborhood(0).unwrap(), &[0, 1, 4]);
        let g2 = build_cycle_graph(5, 2).unwrap();
        assert_eq!(g2.neighborhood(0).unwrap(), &[0, 1, 2, 3, 4]);
        let g3 = build_cycle_graph(3, 1).unwrap();
        for v in 0..3 {
            assert_eq!(g3.neighborhood(v).unwrap(), &[0, 1, 2]);
        }
        assert!(build_cycle_graph(2, 1).is_err());
        assert!(g.neighborhood(5).is_err());
    }

    #[test]
    fn torus_regular_and_sized() {
        let g = build_torus_grid(3, 3, 1).unwrap();
        assert!((0..9).all(|v| g.adjacent(v).len() == 4));
        let g = build_torus_grid(3, 4, 1).unwrap();
        assert_eq!(g.vertex_count(), 12);
        assert_eq!(g.edges().len(), 24);
        assert!(build_torus_grid(2, 5, 1).is_err());
        let g = build_torus_grid(4, 4, 1).unwrap();
        assert!((0..16).all(|v| g.neighborhood(v).unwrap().len() == 5));
    }

    #[test]
    fn torus_opposite_corner_matches_coordinate_oracle() {
        let g = build_torus_grid(4, 4, 1).unwrap();
        let wrap = |a: usize, b: usize, n: usize| {
            let d = a.abs_diff(b);
            d.min(n - d)
        };
        for u in 0..16 {
            for v in 0..16 {
                let expect = wrap(u % 4, v % 4, 4) + wrap(u / 4, v / 4, 4);
                assert_eq!(g.distance(u, v), expect);
            }
        }
        // Opposite corners (0,0) and (2,2) of the fundamental domain.
        assert_eq!(g.distance(0, 2 * 4 + 2), 4);
    }

    #[test]
    fn rejects_malformed_edges() {
        assert!(FieldGraph::new(3, &[(0, 0)], 1).is_err());
        assert!(FieldGraph::new(3, &[(0, 1), (1, 0)], 1).is_err());
        assert!(FieldGraph::new(3, &[(0, 3)], 1).is_err());
        assert!(FieldGraph::new(3, &[(0, 1)], 0).is_err());
    }

    #[test]
    fn disconnected_distance_is_sentinel() {
        let g = FieldGraph::new(4, &[(0, 1), (2, 3)], 1).unwrap();
        assert!(!g.is_connected());
        assert_eq!(g.distance(0, 2), UNREACHABLE);
        assert!(g.distance(0, 2) > g.distance(0, 1));
    }

    #[test]
    fn delta_values() {
        assert_eq!(compute_delta(&c5()), 3);
        assert_eq!(compute_delta(&build_cycle_graph(5, 2).unwrap()), 5);
        assert_eq!(compute_delta(&build_torus_grid(4, 4, 1).unwrap()), 5);
    }

    #[test]
    fn delta_k_values() {
        let g = c5();
        assert_eq!(compute_delta_k(&g, &PartitionSchedule::trivial(5)), 1);
        let p = Partition::new(5, vec![vec![0, 1], vec![2, 3, 4]]).unwrap();
        assert_eq!(compute_delta_k(&g, &PartitionSchedule::fixed(p)), 2);
    }

    #[test]
    fn delta_k_torus_tiles_matches_block_distance_oracle() {
        let g = build_torus_grid(4, 4, 1).unwrap();
        let s = torus_tiling_partitions(&g, 2, 2, &[(0, 0)]).unwrap();
        // Oracle: coordinate distance between tiles, enumerated pairwise.
        let coord = |v: usize| (v % 4, v / 4);
        let wrap = |a: usize, b: usize| {
            let d = a.abs_diff(b);
            d.min(4 - d)
        };
        let blocks = s.partition(0).blocks();
        let mut best = 0;
        for a in blocks {
            let mut count = 0;
            for b in blocks {
                let mut dmin = usize::MAX;
                for &u in a {
                    for &v in b {
                        let (ux, uy) = coord(u);
                        let (vx, vy) = coord(v);
                        dmin = dmin.min(wrap(ux, vx) + wrap(uy, vy));
                    }
                }
                if dmin <= 1 {
                    count += 1;
                }
            }
            best = best.max(count);
        }
        assert_eq!(best, 3);
        assert_eq!(compute_delta_k(&g, &s), best);
    }

    #[test]
    fn boundaries_on_c5() {
        let g = c5();
        let p = Partition::new(5, vec![vec![0, 1], vec![2, 3, 4]]).unwrap();
        assert_eq!(block_boundary(&g, &p, 1).unwrap(), vec![2, 4]);
        assert_eq!(block_boundary(&g, &p, 0).unwrap(), vec![0, 1]);
        let whole = Partition::single_block(5);
        assert!(block_boundary(&g, &whole, 0).unwrap().is_empty());

        assert_eq!(dist_to_boundary(&g, &p, 3).unwrap(), 1);
        assert_eq!(dist_to_boundary(&g, &p, 0).unwrap(), 0);
        assert_eq!(dist_to_boundary(&g, &whole, 2).unwrap(), UNREACHABLE);
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(Partition::new(3, vec![vec![0, 1]]).is_err());
        assert!(Partition::new(3, vec![vec![0, 1, 2], vec![]]).is_err());
        assert!(PartitionSchedule::new(
            vec![Partition::single_block(3)],
            SwitchingSignal::Explicit(vec![1])
        )
        .is_err());
    }

    #[test]
    fn cycle5_partitions_are_rotations() {
        let s = cycle5(5);
        let expected = [
            [vec![0, 1], vec![2, 3, 4]],
            [vec![1, 2], vec![0, 3, 4]],
            [vec![2, 3], vec![0, 1, 4]],
            [vec![3, 4], vec![0, 1, 2]],
            [vec![0, 4], vec![1, 2, 3]],
        ];
        for (j, blocks) in expected.iter().enumerate() {
            assert_eq!(s.partition(j).blocks(), &blocks[..]);
        }
        assert!(s.is_cyclic());
        assert_eq!(s.sigma(1), 1);
        assert_eq!(s.sigma(5), 0);
        assert_eq!(s.sigma(7), 2);
    }

    #[test]
    fn cycle5_theta_is_one_fifth_everywhere() {
        let stats = partition_stats(&c5(), &cycle5(5), 1.0).unwrap();
        assert!(stats.theta_m.iter().all(|&t| t == 1.0 / 5.0));
        assert_eq!(stats.theta_lower, 0.2);
        for beta in [0.1, 0.5, 2.0] {
            let stats = partition_stats(&c5(), &cycle5(5), beta).unwrap();
            let expect = (4.0 + (-beta).exp()) / 5.0;
            for &t in &stats.vartheta_m {
                assert!((t - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cycle5_partial_theta() {
        let stats = partition_stats(&c5(), &cycle5(4), 1.0).unwrap();
        assert_eq!(stats.theta_m, vec![0.25, 0.25, 0.0, 0.25, 0.25]);
    }

    #[test]
    fn single_block_schedule_flags_unbounded() {
        let stats = partition_stats(&c5(), &PartitionSchedule::trivial(5), 1.0).unwrap();
        assert!(stats.has_unbounded);
        assert!(stats.theta_m.iter().all(|t| t.is_infinite()));
        assert!(stats.vartheta_m.iter().all(|&t| t == 0.0));
        assert!(partition_stats(&c5(), &cycle5(5), 0.0).is_err());
    }

    #[test]
    fn trivial_cycle_schedule() {
        let s = shifted_cycle_partitions(&c5(), &[5], 1).unwrap();
        assert_eq!(s.m(), 1);
        assert_eq!(s.partition(0).len(), 1);
        assert!(shifted_cycle_partitions(&c5(), &[2, 2], 1).is_err());
        assert!(shifted_cycle_partitions(&c5(), &[2, 3], 6).is_err());
    }

    #[test]
    fn c6_rotations_make_each_vertex_interior_once() {
        let g = build_cycle_graph(6, 1).unwrap();
        let s = shifted_cycle_partitions(&g, &[3, 3], 3).unwrap();
        let stats = partition_stats(&g, &s, 1.0).unwrap();
        for v in 0..6 {
            let interior = stats.boundary_distances.iter().filter(|row| row[v] > 0).count();
            assert_eq!(interior, 1, "vertex {v}");
        }
    }

    #[test]
    fn torus_tilings() {
        let g = build_torus_grid(4, 4, 1).unwrap();
        let s = torus_tiling_partitions(&g, 2, 2, &[(0, 0), (1, 1)]).unwrap();
        assert_eq!(s.m(), 2);
        assert!(s.partitions().iter().all(|p| p.len() == 4));
        let single = torus_tiling_partitions(&g, 2, 2, &[(0, 0)]).unwrap();
        let stats = partition_stats(&g, &single, 1.0).unwrap();
        assert!(stats.theta_m.iter().all(|&t| t == 0.0));
        assert!(torus_tiling_partitions(&g, 3, 2, &[(0, 0)]).is_err());
        assert!(torus_tiling_partitions(&c5(), 1, 1, &[(0, 0)]).is_err());

        let g6 = build_torus_grid(6, 6, 1).unwrap();
        let offsets: Vec<_> = (0..3).flat_map(|dy| (0..3).map(move |dx| (dx, dy))).collect();
        let s6 = torus_tiling_partitions(&g6, 3, 3, &offsets).unwrap();
        let stats = partition_stats(&g6, &s6, 1.0).unwrap();
        let t0 = stats.theta_m[0];
        assert!(t0 > 0.0);
        assert!(stats.theta_m.iter().all(|&t| t == t0));
    }

    fn arb_cycle_schedule() -> impl Strategy<Value = (FieldGraph, PartitionSchedule)> {
        (4usize..10, 1usize..3).prop_flat_map(|(n, r)| {
            (Just(n), Just(r), 1usize..n, 1usize..=n).prop_map(|(n, r, cut, m)| {
                let g = build_cycle_graph(n, r).unwrap();
                let s = shifted_cycle_partitions(&g, &[cut, n - cut], m).unwrap();
                (g, s)
            })
        })
    }

    proptest! {
        #[test]
        fn theta_between_min_and_max((g, s) in arb_cycle_schedule(), beta in 0.01f64..3.0) {
            let stats = partition_stats(&g, &s, beta).unwrap();
            for v in 0..g.vertex_count() {
                prop_assert!(stats.nabla_d[v] <= stats.delta_d[v]);
                if !stats.theta_m[v].is_finite() {
                    continue;
                }
                prop_assert!(stats.nabla_d[v] as f64 <= stats.theta_m[v] + 1e-12);
                prop_assert!(stats.theta_m[v] <= stats.delta_d[v] as f64 + 1e-12);
                prop_assert!(stats.vartheta_m[v] > 0.0 && stats.vartheta_m[v] <= 1.0);
                prop_assert!(stats.theta_lower <= stats.theta_m[v]);
                prop_assert!(stats.vartheta_m[v] <= stats.vartheta_upper);
            }
        }

        #[test]
        fn vartheta_decreases_in_beta((g, s) in arb_cycle_schedule(), beta in 0.01f64..3.0, extra in 0.0f64..2.0) {
            let stats = partition_stats(&g, &s, beta).unwrap();
            let lo = stats.vartheta_at(beta + extra);
            for v in 0..g.vertex_count() {
                prop_assert!(lo[v] <= stats.vartheta_m[v] + 1e-15);
            }
        }

        #[test]
        fn boundary_membership_matches_zero_distance((g, s) in arb_cycle_schedule()) {
            for p in s.partitions() {
                for k in 0..p.len() {
                    let b = block_boundary(&g, p, k).unwrap();
                    prop_assert!(b.iter().all(|v| p.block(k).contains(v)));
                    for &v in p.block(k) {
                        let d = dist_to_boundary(&g, p, v).unwrap();
                        prop_assert_eq!(b.contains(&v), d == 0);
                    }
                }
            }
        }

        #[test]
        fn rotation_leaves_boundary_distance_unchanged(n in 4usize..10, cut_frac in 0.1f64..0.9, shift in 0usize..10, v in 0usize..10) {
            let cut = ((n as f64 * cut_frac) as usize).clamp(1, n - 1);
            let g = build_cycle_graph(n, 1).unwrap();
            let s = shifted_cycle_partitions(&g, &[cut, n - cut], n).unwrap();
            let (shift, v) = (shift % n, v % n);
            let d0 = dist_to_boundary(&g, s.partition(0), v).unwrap();
            let d1 = dist_to_boundary(&g, s.partition(shift), (v + shift) % n).unwrap();
            prop_assert_eq!(d0, d1);
        }
    }
}
