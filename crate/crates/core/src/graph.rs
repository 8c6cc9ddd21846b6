//! Graph environments, shortest-path distances, and the covering and
//! configuration types that live on top of them.
//!
//! Vertices are dense indices `0..n`. Grids are indexed row-major, so the
//! cell at `(row, col)` is vertex `row * cols + col`.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};

pub type Vertex = usize;

/// An undirected edge with a positive length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: Vertex,
    pub v: Vertex,
    pub weight: f64,
}

/// A connected weighted undirected graph with all-pairs distances.
///
/// Immutable once built; distances are computed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    vertex_count: usize,
    edges: Vec<Edge>,
    dist: Vec<f64>,
    coords: Option<Vec<[f64; 2]>>,
}

impl Environment {
    /// Builds an environment from an explicit edge list.
    pub fn new(vertex_count: usize, edges: Vec<Edge>) -> Result<Self> {
        let dist = all_pairs_distances(vertex_count, &edges)?;
        Ok(Self {
            vertex_count,
            edges,
            dist,
            coords: None,
        })
    }

    /// Builds a 4-connected `rows x cols` grid with uniform edge weight.
    ///
    /// Vertex `r * cols + c` gets planar coordinates `(r, c)`.
    pub fn grid(rows: usize, cols: usize, weight: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyGrid { rows, cols });
        }
        let mut edges = Vec::with_capacity(2 * rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    edges.push(Edge {
                        u: v,
                        v: v + 1,
                        weight,
                    });
                }
                if r + 1 < rows {
                    edges.push(Edge {
                        u: v,
                        v: v + cols,
                        weight,
                    });
                }
            }
        }
        let coords = (0..rows * cols)
            .map(|v| [(v / cols) as f64, (v % cols) as f64])
            .collect();
        Self::new(rows * cols, edges)?.with_coords(coords)
    }

    /// Attaches planar coordinates, one per vertex.
    pub fn with_coords(mut self, coords: Vec<[f64; 2]>) -> Result<Self> {
        if coords.len() != self.vertex_count {
            return Err(Error::DimensionMismatch {
                what: "vertex coordinates",
                expected: self.vertex_count,
                found: coords.len(),
            });
        }
        self.coords = Some(coords);
        Ok(self)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    /// Shortest-path distance `d_G(u, v)`.
    #[inline]
    pub fn dist(&self, u: Vertex, v: Vertex) -> f64 {
        self.dist[u * self.vertex_count + v]
    }

    /// Distances from `u` to every vertex.
    #[inline]
    pub fn dist_row(&self, u: Vertex) -> &[f64] {
        let n = self.vertex_count;
        &self.dist[u * n..(u + 1) * n]
    }

    /// Row-major `n x n` distance matrix.
    pub fn distance_matrix(&self) -> &[f64] {
        &self.dist
    }

    pub fn check_vertex(&self, v: Vertex) -> Result<()> {
        if v < self.vertex_count {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange {
                vertex: v,
                count: self.vertex_count,
            })
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    vertex: Vertex,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then vertex index
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact all-pairs shortest-path distances by repeated Dijkstra.
///
/// Returns a row-major `n x n` matrix. Fails on invalid edges or if some
/// pair of vertices is not connected.
pub fn all_pairs_distances(vertex_count: usize, edges: &[Edge]) -> Result<Vec<f64>> {
    if vertex_count == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut adjacency: Vec<Vec<(Vertex, f64)>> = vec![Vec::new(); vertex_count];
    for e in edges {
        if e.u >= vertex_count || e.v >= vertex_count {
            return Err(Error::EdgeOutOfRange {
                u: e.u,
                v: e.v,
                count: vertex_count,
            });
        }
        if !(e.weight > 0.0) || !e.weight.is_finite() {
            return Err(Error::BadEdgeWeight {
                u: e.u,
                v: e.v,
                weight: e.weight,
            });
        }
        adjacency[e.u].push((e.v, e.weight));
        adjacency[e.v].push((e.u, e.weight));
    }

    let n = vertex_count;
    let mut dist = vec![f64::INFINITY; n * n];
    let mut heap = BinaryHeap::new();
    for source in 0..n {
        let row = &mut dist[source * n..(source + 1) * n];
        row[source] = 0.0;
        heap.push(HeapEntry {
            dist: 0.0,
            vertex: source,
        });
        while let Some(HeapEntry { dist: d, vertex }) = heap.pop() {
            if d > row[vertex] {
                continue;
            }
            for &(next, w) in &adjacency[vertex] {
                let nd = d + w;
                if nd < row[next] {
                    row[next] = nd;
                    heap.push(HeapEntry {
                        dist: nd,
                        vertex: next,
                    });
                }
            }
        }
        if let Some(to) = row.iter().position(|d| d.is_infinite()) {
            return Err(Error::Disconnected { from: source, to });
        }
    }
    // Dijkstra from both ends can disagree in the last bit; force symmetry.
    for u in 0..n {
        for v in (u + 1)..n {
            let d = dist[u * n + v].min(dist[v * n + u]);
            dist[u * n + v] = d;
            dist[v * n + u] = d;
        }
    }
    Ok(dist)
}

/// Robot positions: entry `i` is the vertex occupied by robot `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration(pub Vec<Vertex>);

impl Configuration {
    pub fn new(positions: Vec<Vertex>) -> Self {
        Self(positions)
    }

    pub fn robot_count(&self) -> usize {
        self.0.len()
    }

    pub fn positions(&self) -> &[Vertex] {
        &self.0
    }

    pub fn validate(&self, env: &Environment) -> Result<()> {
        self.0.iter().try_for_each(|&v| env.check_vertex(v))
    }
}

impl core::ops::Index<usize> for Configuration {
    type Output = Vertex;
    fn index(&self, i: usize) -> &Vertex {
        &self.0[i]
    }
}

/// One N-covering per task. `sets[j][i]` is the sorted vertex list robot
/// `i` serves for task `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Covering {
    sets: Vec<Vec<Vec<Vertex>>>,
}

impl Covering {
    /// Builds a covering from per-(task, robot) vertex lists. Lists are
    /// sorted and deduplicated.
    pub fn from_sets(mut sets: Vec<Vec<Vec<Vertex>>>) -> Self {
        for task in &mut sets {
            for set in task.iter_mut() {
                set.sort_unstable();
                set.dedup();
            }
        }
        Self { sets }
    }

    /// A covering where every robot serves every vertex for every task.
    pub fn full(vertex_count: usize, robot_count: usize, task_count: usize) -> Self {
        let all: Vec<Vertex> = (0..vertex_count).collect();
        Self {
            sets: vec![vec![all; robot_count]; task_count],
        }
    }

    pub fn task_count(&self) -> usize {
        self.sets.len()
    }

    pub fn robot_count(&self) -> usize {
        self.sets.first().map_or(0, Vec::len)
    }

    /// `P_i^j`
    pub fn set(&self, task: usize, robot: usize) -> &[Vertex] {
        &self.sets[task][robot]
    }

    pub(crate) fn set_mut(&mut self, task: usize, robot: usize) -> &mut Vec<Vertex> {
        &mut self.sets[task][robot]
    }

    pub fn sets(&self) -> &[Vec<Vec<Vertex>>] {
        &self.sets
    }

    /// Number of robots owning each vertex for `task`.
    pub fn owner_counts(&self, task: usize, vertex_count: usize) -> Vec<usize> {
        let mut counts = vec![0usize; vertex_count];
        for set in &self.sets[task] {
            for &v in set {
                counts[v] += 1;
            }
        }
        counts
    }

    /// True iff every task's sets have union `V` and all vertices are in range.
    pub fn is_covering(&self, vertex_count: usize) -> bool {
        (0..self.task_count()).all(|j| {
            self.sets[j].iter().flatten().all(|&v| v < vertex_count)
                && self.owner_counts(j, vertex_count).iter().all(|&c| c > 0)
        })
    }

    /// True iff the sets of `task` are pairwise disjoint with union `V`.
    pub fn is_partition(&self, task: usize, vertex_count: usize) -> bool {
        if self.sets[task].iter().flatten().any(|&v| v >= vertex_count) {
            return false;
        }
        self.owner_counts(task, vertex_count)
            .iter()
            .all(|&c| c == 1)
    }

    /// `Σ_j Σ_v |{i : v ∈ P_i^j}|`; equals `M·|V|` exactly when every task
    /// is partitioned.
    pub fn overlap_count(&self) -> usize {
        self.sets.iter().flatten().map(Vec::len).sum()
    }

    /// Union over tasks of the vertices owned by `robot`, sorted.
    pub fn robot_region(&self, robot: usize) -> Vec<Vertex> {
        let mut region: Vec<Vertex> = self
            .sets
            .iter()
            .flat_map(|task| task[robot].iter().copied())
            .collect();
        region.sort_unstable();
        region.dedup();
        region
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(weights: &[f64]) -> Environment {
        let edges = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| Edge {
                u: i,
                v: i + 1,
                weight: w,
            })
            .collect();
        Environment::new(weights.len() + 1, edges).unwrap()
    }

    #[test]
    fn grid_21x21_counts() {
        let env = Environment::grid(21, 21, 1.0).unwrap();
        assert_eq!(env.vertex_count(), 441);
        assert_eq!(env.edges().len(), 840);
    }

    #[test]
    fn grid_degenerate() {
        let env = Environment::grid(1, 1, 1.0).unwrap();
        assert_eq!(env.distance_matrix(), &[0.0]);
        let env = Environment::grid(1, 3, 1.0).unwrap();
        assert_eq!(env.dist(0, 2), 2.0);
        assert_eq!(
            Environment::grid(0, 4, 1.0),
            Err(Error::EmptyGrid { rows: 0, cols: 4 })
        );
    }

    #[test]
    fn grid_manhattan_distance() {
        let (rows, cols, w) = (4, 6, 0.5);
        let env = Environment::grid(rows, cols, w).unwrap();
        assert_eq!(env.edges().len(), rows * cols * 2 - rows - cols);
        for u in 0..rows * cols {
            for v in 0..rows * cols {
                let dr = (u / cols).abs_diff(v / cols);
                let dc = (u % cols).abs_diff(v % cols);
                assert_eq!(env.dist(u, v), (dr + dc) as f64 * w);
            }
        }
    }

    #[test]
    fn triangle_and_path() {
        let tri = Environment::new(
            3,
            vec![
                Edge {
                    u: 0,
                    v: 1,
                    weight: 1.0,
                },
                Edge {
                    u: 1,
                    v: 2,
                    weight: 1.0,
                },
                Edge {
                    u: 2,
                    v: 0,
                    weight: 1.0,
                },
            ],
        )
        .unwrap();
        for u in 0..3 {
            for v in 0..3 {
                assert_eq!(tri.dist(u, v), if u == v { 0.0 } else { 1.0 });
            }
        }
        assert_eq!(path(&[1.0, 2.0]).dist(0, 2), 3.0);
    }

    #[test]
    fn disconnected_is_reported() {
        let err = Environment::new(
            3,
            vec![Edge {
                u: 0,
                v: 1,
                weight: 1.0,
            }],
        )
        .unwrap_err();
        assert_eq!(err, Error::Disconnected { from: 0, to: 2 });
    }

    #[test]
    fn bad_edges_rejected() {
        assert!(matches!(
            Environment::new(
                2,
                vec![Edge {
                    u: 0,
                    v: 1,
                    weight: 0.0
                }]
            ),
            Err(Error::BadEdgeWeight { .. })
        ));
        assert!(matches!(
            Environment::new(
                2,
                vec![Edge {
                    u: 0,
                    v: 5,
                    weight: 1.0
                }]
            ),
            Err(Error::EdgeOutOfRange { .. })
        ));
    }

    #[test]
    fn partition_predicate() {
        let ok = Covering::from_sets(vec![vec![vec![0, 1], vec![2]]]);
        assert!(ok.is_partition(0, 3));
        let overlap = Covering::from_sets(vec![vec![vec![0, 1], vec![1, 2]]]);
        assert!(!overlap.is_partition(0, 3));
        let hole = Covering::from_sets(vec![vec![vec![0], vec![2]]]);
        assert!(!hole.is_partition(0, 3));
        assert!(!hole.is_covering(3));
    }

    #[test]
    fn overlap_counting() {
        let exact = Covering::from_sets(vec![vec![vec![0, 1], vec![2, 3, 4]]]);
        assert_eq!(exact.overlap_count(), 5);
        let doubled = Covering::from_sets(vec![vec![vec![0, 1, 2], vec![2, 3, 4]]]);
        assert_eq!(doubled.overlap_count(), 6);
        let two = Covering::from_sets(vec![
            vec![vec![0, 1], vec![2, 3, 4]],
            vec![vec![4], vec![0, 1, 2, 3]],
        ]);
        assert_eq!(two.overlap_count(), 10);
    }
}
