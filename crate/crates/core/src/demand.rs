//! Per-vertex, per-task demand fields.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{Environment, Vertex};

/// Nonnegative demand `φ^j(v)` for `M` tasks over `|V|` vertices.
///
/// Stored vertex-major: entry `v * M + j`, which is also the ordering of the
/// stacked demand vector used by the Gaussian-process model.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandField {
    vertex_count: usize,
    task_count: usize,
    values: Vec<f64>,
}

impl DemandField {
    /// Builds a field from a vertex-major flat vector. Entries must be
    /// finite and nonnegative.
    pub fn from_flat(vertex_count: usize, task_count: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != vertex_count * task_count {
            return Err(Error::DimensionMismatch {
                what: "demand values",
                expected: vertex_count * task_count,
                found: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidParameter {
                name: "demand",
                reason: format!("entries must be finite and nonnegative, found {bad}"),
            });
        }
        Ok(Self {
            vertex_count,
            task_count,
            values,
        })
    }

    /// Builds a field from rows `values[v][j]`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let task_count = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != task_count) {
            return Err(Error::DimensionMismatch {
                what: "demand row length",
                expected: task_count,
                found: r.len(),
            });
        }
        Self::from_flat(rows.len(), task_count, rows.concat())
    }

    pub fn zeros(vertex_count: usize, task_count: usize) -> Self {
        Self {
            vertex_count,
            task_count,
            values: vec![0.0; vertex_count * task_count],
        }
    }

    /// Clamps an arbitrary real vector (such as a posterior mean) to a
    /// valid field by mapping negative entries to zero.
    pub fn clamped(vertex_count: usize, task_count: usize, values: &[f64]) -> Result<Self> {
        let clamped = values
            .iter()
            .map(|&x| if x > 0.0 { x } else { 0.0 })
            .collect();
        Self::from_flat(vertex_count, task_count, clamped)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn task_count(&self) -> usize {
        self.task_count
    }

    #[inline]
    pub fn get(&self, vertex: Vertex, task: usize) -> f64 {
        self.values[vertex * self.task_count + task]
    }

    /// The stacked vector `[Φ(v_1); …; Φ(v_|V|)]`.
    pub fn flatten(&self) -> &[f64] {
        &self.values
    }

    /// Demand of one task over all vertices.
    pub fn column(&self, task: usize) -> Vec<f64> {
        (0..self.vertex_count).map(|v| self.get(v, task)).collect()
    }

    /// Keeps only the listed tasks, in the given order.
    pub fn select_tasks(&self, tasks: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.vertex_count * tasks.len());
        for v in 0..self.vertex_count {
            values.extend(tasks.iter().map(|&j| self.get(v, j)));
        }
        Self {
            vertex_count: self.vertex_count,
            task_count: tasks.len(),
            values,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|x| x * factor).collect(),
            ..self.clone()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }
}

/// One isotropic Gaussian bump of the mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub center: Vertex,
    pub amplitude: f64,
    /// Standard deviation in coordinate units.
    pub spread: f64,
}

/// Synthesizes a demand field as a per-task mixture of Gaussian bumps over
/// the environment's planar coordinates, normalized to unit sum per task.
///
/// `kernels[j]` lists the bumps of task `j`.
pub fn synthesize_gaussian_mixture(
    env: &Environment,
    kernels: &[Vec<Kernel>],
) -> Result<DemandField> {
    let coords = env.coords().ok_or(Error::InvalidParameter {
        name: "environment.coords",
        reason: "demand synthesis needs planar vertex coordinates".into(),
    })?;
    let n = env.vertex_count();
    let m = kernels.len();
    let mut values = vec![0.0; n * m];
    for (j, task_kernels) in kernels.iter().enumerate() {
        if task_kernels.is_empty() {
            return Err(Error::EmptyKernels { task: j });
        }
        for k in task_kernels {
            env.check_vertex(k.center)?;
            if !(k.amplitude > 0.0 && k.spread > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "kernel",
                    reason: format!(
                        "amplitude and spread must be positive (got {}, {})",
                        k.amplitude, k.spread
                    ),
                });
            }
        }
        let mut total = 0.0;
        for (v, p) in coords.iter().enumerate() {
            let phi: f64 = task_kernels
                .iter()
                .map(|k| {
                    let c = coords[k.center];
                    let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
                    let d2 = dx * dx + dy * dy;
                    k.amplitude * libm::exp(-d2 / (2.0 * k.spread * k.spread))
                })
                .sum();
            values[v * m + j] = phi;
            total += phi;
        }
        for v in 0..n {
            values[v * m + j] /= total;
        }
    }
    DemandField::from_flat(n, m, values)
}
