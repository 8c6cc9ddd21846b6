//! Multitask Gaussian-process model of the stacked demand vector.
//!
//! The prior covariance is `Σ₀ ⊗ K` in vertex-major order (entry `v·M + j`).
//! Each sample at vertex `v` observes all `M` task demands with isotropic
//! noise `σ²`. The posterior is kept in covariance form and updated with
//! rank-`M` conditioning steps, which is exact and stays well conditioned
//! even when `Σ₀` itself is numerically singular (smooth kernels on fine
//! grids).

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::demand::DemandField;
use crate::error::{Error, Result};
use crate::graph::Vertex;

/// Relative eigenvalue slack of the symmetric-PSD check.
pub const PSD_RTOL: f64 = 1e-10;

/// Squared-exponential kernel matrix
/// `σ_v² · exp(-‖x_a - x_b‖² / (2 l²))` over planar points.
pub fn se_kernel_matrix(
    coords: &[[f64; 2]],
    variance: f64,
    length_scale: f64,
) -> Result<DMatrix<f64>> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "variance",
            reason: alloc::format!("must be positive, got {variance}"),
        });
    }
    if !(length_scale > 0.0 && length_scale.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "length_scale",
            reason: alloc::format!("must be positive, got {length_scale}"),
        });
    }
    let n = coords.len();
    let denom = 2.0 * length_scale * length_scale;
    Ok(DMatrix::from_fn(n, n, |a, b| {
        let (dx, dy) = (coords[a][0] - coords[b][0], coords[a][1] - coords[b][1]);
        let d2 = dx * dx + dy * dy;
        variance * libm::exp(-d2 / denom)
    }))
}

/// `M x M` task covariance with unit variances and a common correlation.
pub fn uniform_task_covariance(task_count: usize, correlation: f64) -> DMatrix<f64> {
    DMatrix::from_fn(task_count, task_count, |a, b| {
        if a == b {
            1.0
        } else {
            correlation
        }
    })
}

/// Symmetric PSD check: symmetric to `PSD_RTOL` relative and smallest
/// eigenvalue `≥ -PSD_RTOL · largest`.
pub fn check_psd(m: &DMatrix<f64>, which: &'static str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotPsd { which });
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > PSD_RTOL * scale {
        return Err(Error::NotPsd { which });
    }
    if m.nrows() == 0 {
        return Ok(());
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone()).eigenvalues;
    let max = eig.max();
    if eig.min() < -PSD_RTOL * max.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd { which });
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix in decreasing order, with tiny
/// negative rounding clamped to zero.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut eig: Vec<f64> = nalgebra::SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .map(|&x| x.max(0.0))
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig
}

/// Gaussian prior `N(μ̃₀, Σ₀ ⊗ K)` with observation noise `σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct MtgpPrior {
    spatial: DMatrix<f64>,
    task: DMatrix<f64>,
    mean: DVector<f64>,
    noise_var: f64,
}

impl MtgpPrior {
    /// `mean` defaults to zero.
    pub fn new(
        spatial: DMatrix<f64>,
        task: DMatrix<f64>,
        mean: Option<DVector<f64>>,
        noise_var: f64,
    ) -> Result<Self> {
        check_psd(&spatial, "spatial covariance")?;
        check_psd(&task, "task covariance")?;
        let dim = spatial.nrows() * task.nrows();
        let mean = mean.unwrap_or_else(|| DVector::zeros(dim));
        if mean.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "prior mean",
                expected: dim,
                found: mean.len(),
            });
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "noise_var",
                reason: alloc::format!("must be positive, got {noise_var}"),
            });
        }
        Ok(Self {
            spatial,
            task,
            mean,
            noise_var,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.spatial.nrows()
    }

    pub fn task_count(&self) -> usize {
        self.task.nrows()
    }

    pub fn spatial(&self) -> &DMatrix<f64> {
        &self.spatial
    }

    pub fn task(&self) -> &DMatrix<f64> {
        &self.task
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Full prior covariance `Σ₀ ⊗ K`.
    pub fn covariance(&self) -> DMatrix<f64> {
        self.spatial.kronecker(&self.task)
    }

    /// Largest prior vertex-block trace, `max_v Σ₀[v,v] · tr(K)`.
    pub fn max_block_trace(&self) -> f64 {
        self.spatial.diagonal().max() * self.task.trace()
    }

    /// Restricts the prior to the listed tasks.
    pub fn select_tasks(&self, tasks: &[usize]) -> Self {
        let m = self.task_count();
        let task = DMatrix::from_fn(tasks.len(), tasks.len(), |a, b| {
            self.task[(tasks[a], tasks[b])]
        });
        let mean = DVector::from_iterator(
            self.vertex_count() * tasks.len(),
            (0..self.vertex_count()).flat_map(|v| tasks.iter().map(move |&j| self.mean[v * m + j])),
        );
        Self {
            spatial: self.spatial.clone(),
            task,
            mean,
            noise_var: self.noise_var,
        }
    }
}

/// Posterior `N(μ̃(t), Σ̃(t))` with per-vertex sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct MtgpPosterior {
    vertex_count: usize,
    task_count: usize,
    noise_var: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    counts: Vec<u64>,
    sums: Vec<f64>,
}

impl MtgpPosterior {
    /// The posterior before any observation, equal to the prior.
    pub fn from_prior(prior: &MtgpPrior) -> Self {
        let n = prior.vertex_count();
        let m = prior.task_count();
        Self {
            vertex_count: n,
            task_count: m,
            noise_var: prior.noise_var,
            mean: prior.mean.clone(),
            cov: prior.covariance(),
            counts: vec![0; n],
            sums: vec![0.0; n * m],
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn task_count(&self) -> usize {
        self.task_count
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Number of samples taken at each vertex, `n_i(t)`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Sum of sample vectors at each vertex, `s_i(t)`, vertex-major.
    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    fn check_vertex(&self, vertex: Vertex) -> Result<()> {
        if vertex < self.vertex_count {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange {
                vertex,
                count: self.vertex_count,
            })
        }
    }

    /// Conditions on one noisy `M`-vector sample at `vertex`.
    pub fn update(&mut self, vertex: Vertex, observation: &[f64]) -> Result<()> {
        self.update_batch(vertex, 1, observation)
    }

    /// Conditions on `count` samples at `vertex` whose sum is `sum`.
    ///
    /// Equivalent to `count` single updates: the average has noise
    /// `σ² / count`.
    pub fn update_batch(&mut self, vertex: Vertex, count: u64, sum: &[f64]) -> Result<()> {
        self.check_vertex(vertex)?;
        let m = self.task_count;
        if sum.len() != m {
            return Err(Error::DimensionMismatch {
                what: "observation length",
                expected: m,
                found: sum.len(),
            });
        }
        if sum.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "observation",
                reason: "observations must be finite".into(),
            });
        }
        if count == 0 {
            return Ok(());
        }
        let average: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        self.condition(vertex, self.noise_var / count as f64, Some(&average))?;
        self.counts[vertex] += count;
        for (acc, s) in self.sums[vertex * m..(vertex + 1) * m].iter_mut().zip(sum) {
            *acc += s;
        }
        Ok(())
    }

    /// Covariance-only conditioning on a sample location; the covariance
    /// update does not depend on the measured value.
    pub fn condition_covariance(&mut self, vertex: Vertex) -> Result<()> {
        self.check_vertex(vertex)?;
        self.condition(vertex, self.noise_var, None)
    }

    /// Rank-`M` conditioning `Σ ← Σ - W Wᵀ` with `W = Σ[:, B] L⁻ᵀ`,
    /// `L Lᵀ = Σ_BB + r I`. Writing the downdate as `W Wᵀ` keeps `Σ`
    /// exactly symmetric.
    fn condition(&mut self, vertex: Vertex, noise: f64, observation: Option<&[f64]>) -> Result<()> {
        let m = self.task_count;
        let dim = self.cov.nrows();
        let b = vertex * m;
        let cross = self.cov.columns(b, m).clone_owned();
        let mut s = cross.rows(b, m).clone_owned();
        for k in 0..m {
            s[(k, k)] += noise;
        }
        let chol = s.cholesky().ok_or(Error::Singular {
            context: "posterior update (block + noise)",
        })?;
        let l = chol.l();
        // Wᵀ = L⁻¹ Σ[B, :]
        let wt = l
            .solve_lower_triangular(&cross.transpose())
            .ok_or(Error::Singular {
                context: "posterior update (triangular solve)",
            })?;

        if let Some(y) = observation {
            let innovation = DVector::from_iterator(m, (0..m).map(|k| y[k] - self.mean[b + k]));
            let z = l
                .solve_lower_triangular(&innovation)
                .ok_or(Error::Singular {
                    context: "posterior mean update",
                })?;
            // μ += W z
            for k in 0..m {
                let zk = z[k];
                for r in 0..dim {
                    self.mean[r] += wt[(k, r)] * zk;
                }
            }
        }

        let w: Vec<f64> = wt.transpose().as_slice().to_vec(); // dim x m, column-major
        let data = self.cov.as_mut_slice();
        for c in 0..dim {
            let col = &mut data[c * dim..(c + 1) * dim];
            for k in 0..m {
                let wc = w[k * dim + c];
                if wc == 0.0 {
                    continue;
                }
                let wk = &w[k * dim..(k + 1) * dim];
                for (x, &wr) in col.iter_mut().zip(wk) {
                    *x -= wr * wc;
                }
            }
        }
        Ok(())
    }

    /// `M x M` diagonal block `Σ̃_v(t)` of the posterior covariance.
    pub fn vertex_block(&self, vertex: Vertex) -> Result<DMatrix<f64>> {
        self.check_vertex(vertex)?;
        let m = self.task_count;
        Ok(self
            .cov
            .view((vertex * m, vertex * m), (m, m))
            .clone_owned())
    }

    #[inline]
    pub fn block_trace(&self, vertex: Vertex) -> f64 {
        let m = self.task_count;
        (0..m)
            .map(|k| self.cov[(vertex * m + k, vertex * m + k)])
            .sum()
    }

    pub fn block_traces(&self) -> Vec<f64> {
        (0..self.vertex_count)
            .map(|v| self.block_trace(v))
            .collect()
    }

    pub fn max_block_trace(&self) -> f64 {
        (0..self.vertex_count)
            .map(|v| self.block_trace(v))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `|I_M + σ⁻² Σ̃_v|`
    pub fn block_information_det(&self, vertex: Vertex) -> f64 {
        let m = self.task_count;
        let b = vertex * m;
        let inv = 1.0 / self.noise_var;
        let at =
            |r: usize, c: usize| self.cov[(b + r, b + c)] * inv + if r == c { 1.0 } else { 0.0 };
        match m {
            1 => at(0, 0),
            2 => at(0, 0) * at(1, 1) - at(0, 1) * at(1, 0),
            _ => DMatrix::from_fn(m, m, at).determinant(),
        }
    }

    /// Greedy information-maximizing sample location:
    /// `argmax_v |I_M + σ⁻² Σ̃_v|`, lowest index on ties.
    pub fn greedy_select(&self) -> Vertex {
        let mut best = (0, f64::NEG_INFINITY);
        for v in 0..self.vertex_count {
            let d = self.block_information_det(v);
            if d > best.1 {
                best = (v, d);
            }
        }
        best.0
    }

    /// Demand estimate `max(0, μ̃(t))`.
    pub fn clamped_estimate(&self) -> DemandField {
        DemandField::clamped(self.vertex_count, self.task_count, self.mean.as_slice())
            .expect("posterior mean has matching dimensions")
    }
}

/// Mutual information `½ Σ_k ln|I_M + σ⁻² Σ̃_{s_k}(k-1)|` of sampling the
/// given sequence under `prior`.
pub fn mutual_information(sequence: &[Vertex], prior: &MtgpPrior) -> Result<f64> {
    let mut post = MtgpPosterior::from_prior(prior);
    let mut total = 0.0;
    for &s in sequence {
        post.check_vertex(s)?;
        total += 0.5 * libm::log(post.block_information_det(s));
        post.condition_covariance(s)?;
    }
    Ok(total)
}

/// Outcome of covariance-only greedy planning.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPlan {
    pub points: Vec<Vertex>,
    /// Whether the max block trace went below the threshold.
    pub reached: bool,
    /// Max block trace after the last planned point.
    pub final_max_trace: f64,
}

/// Greedy covariance-only planning until the max block trace is below
/// `threshold` or `limit` points have been planned.
pub fn plan_batch(post: &MtgpPosterior, threshold: f64, limit: usize) -> Result<BatchPlan> {
    let mut scratch = post.clone();
    let mut points = Vec::new();
    loop {
        let max_trace = scratch.max_block_trace();
        if max_trace < threshold {
            return Ok(BatchPlan {
                points,
                reached: true,
                final_max_trace: max_trace,
            });
        }
        if points.len() >= limit {
            return Ok(BatchPlan {
                points,
                reached: false,
                final_max_trace: max_trace,
            });
        }
        let s = scratch.greedy_select();
        scratch.condition_covariance(s)?;
        points.push(s);
    }
}

/// Greedy sampling locations that bring every vertex-block trace below
/// `threshold`. No measurements are needed to plan them.
pub fn exploration_batch(
    post: &MtgpPosterior,
    threshold: f64,
    max_points: usize,
) -> Result<Vec<Vertex>> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter {
            name: "threshold",
            reason: alloc::format!("must be positive, got {threshold}"),
        });
    }
    let plan = plan_batch(post, threshold, max_points)?;
    if plan.reached {
        Ok(plan.points)
    } else {
        Err(Error::BatchLimit {
            threshold,
            max_points,
        })
    }
}
