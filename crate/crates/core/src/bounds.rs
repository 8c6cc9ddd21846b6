//! Numeric verification of the information-gain bounds that drive the
//! exploration schedule:
//!
//! * multitask maximal information gain against the sum of single-task
//!   gains at eigenvalue-rescaled noise, and
//! * the decay of the largest posterior block trace under greedy sampling.
//!
//! Maxima over sampling sequences are found by enumerating multisets of
//! vertices (information is invariant under reordering a sequence).

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::graph::Vertex;
use crate::mtgp::{sorted_eigenvalues, MtgpPosterior, MtgpPrior};

/// Bound checks give up on exhaustive search beyond this many multisets
/// and fall back to greedy sequences.
pub const EXHAUSTIVE_LIMIT: usize = 250_000;

/// Absolute slack of every bound comparison.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// False when a greedy sequence stood in for an exhaustive maximum.
    pub exhaustive: bool,
}

impl BoundCheck {
    fn new(lhs: f64, rhs: f64, exhaustive: bool) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs + BOUND_TOL,
            exhaustive,
        }
    }
}

/// `½ ln|A|` for symmetric positive-definite `A`.
fn half_logdet_spd(a: DMatrix<f64>) -> f64 {
    match a.clone().cholesky() {
        Some(chol) => chol.l().diagonal().iter().map(|d| libm::log(*d)).sum(),
        None => 0.5 * libm::log(a.determinant()),
    }
}

/// `Σ₀` restricted to a sampling sequence, `(Σ_X)_{ab} = Σ₀[x_a, x_b]`.
fn gram(spatial: &DMatrix<f64>, seq: &[Vertex]) -> DMatrix<f64> {
    DMatrix::from_fn(seq.len(), seq.len(), |a, b| spatial[(seq[a], seq[b])])
}

/// `½ ln|I_{Mn} + σ⁻² (Σ_X ⊗ K)|`, the information of the stacked
/// observations of a sequence.
pub fn stacked_information(prior: &MtgpPrior, seq: &[Vertex]) -> f64 {
    let k = gram(prior.spatial(), seq).kronecker(prior.task()) / prior.noise_var();
    let dim = k.nrows();
    half_logdet_spd(k + DMatrix::identity(dim, dim))
}

/// `½ ln|I_n + Σ_X / noise|`, single-task information at the given noise.
/// Infinite noise carries no information.
pub fn single_task_information(spatial: &DMatrix<f64>, seq: &[Vertex], noise_var: f64) -> f64 {
    if !noise_var.is_finite() {
        return 0.0;
    }
    let k = gram(spatial, seq) / noise_var;
    let dim = k.nrows();
    half_logdet_spd(k + DMatrix::identity(dim, dim))
}

/// Number of size-`n` multisets of `vertices` elements, saturating.
pub fn multiset_count(vertices: usize, n: usize) -> usize {
    // C(vertices + n - 1, n)
    let mut acc: u128 = 1;
    for k in 0..n as u128 {
        acc = acc * (vertices as u128 + k) / (k + 1);
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Calls `visit` with every non-decreasing sequence in `0..vertices` of
/// length `n`.
pub fn for_each_multiset(vertices: usize, n: usize, mut visit: impl FnMut(&[Vertex])) {
    if n == 0 {
        visit(&[]);
        return;
    }
    if vertices == 0 {
        return;
    }
    let mut seq = vec![0usize; n];
    loop {
        visit(&seq);
        let mut pos = n;
        while pos > 0 && seq[pos - 1] == vertices - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return;
        }
        let next = seq[pos - 1] + 1;
        for x in &mut seq[pos - 1..] {
            *x = next;
        }
    }
}

/// Greedy sequence of length `n` from the prior.
pub fn greedy_sequence(prior: &MtgpPrior, n: usize) -> Result<Vec<Vertex>> {
    let mut post = MtgpPosterior::from_prior(prior);
    let mut seq = Vec::with_capacity(n);
    for _ in 0..n {
        let s = post.greedy_select();
        post.condition_covariance(s)?;
        seq.push(s);
    }
    Ok(seq)
}

/// `γ_n^K(σ²)`: maximal stacked information over all length-`n` sequences.
/// Returns the value and whether the search was exhaustive.
pub fn multitask_max_information(prior: &MtgpPrior, n: usize) -> Result<(f64, bool)> {
    if multiset_count(prior.vertex_count(), n) > EXHAUSTIVE_LIMIT {
        let seq = greedy_sequence(prior, n)?;
        return Ok((stacked_information(prior, &seq), false));
    }
    let mut best = f64::NEG_INFINITY;
    for_each_multiset(prior.vertex_count(), n, |seq| {
        best = best.max(stacked_information(prior, seq));
    });
    Ok((best, true))
}

/// `γ_n^sngl(noise)` for the spatial covariance alone.
pub fn single_task_max_information(
    spatial: &DMatrix<f64>,
    n: usize,
    noise_var: f64,
) -> (f64, bool) {
    if !noise_var.is_finite() {
        return (0.0, true);
    }
    let vertices = spatial.nrows();
    if multiset_count(vertices, n) > EXHAUSTIVE_LIMIT {
        // greedy on variance (the single-task information maximizer per step)
        let prior = MtgpPrior::new(spatial.clone(), DMatrix::identity(1, 1), None, noise_var)
            .expect("spatial covariance already validated");
        let seq = greedy_sequence(&prior, n).unwrap_or_default();
        return (single_task_information(spatial, &seq, noise_var), false);
    }
    let mut best = f64::NEG_INFINITY;
    for_each_multiset(vertices, n, |seq| {
        best = best.max(single_task_information(spatial, seq, noise_var));
    });
    (best, true)
}

/// Checks `γ_n^K(σ²) ≤ Σ_j γ_n^sngl(σ² / λ_j)` where `λ_j` are the task
/// covariance eigenvalues. A zero eigenvalue contributes nothing.
pub fn max_info_gain_bound_check(prior: &MtgpPrior, n: usize) -> Result<BoundCheck> {
    let (lhs, lhs_exact) = multitask_max_information(prior, n)?;
    let mut rhs = 0.0;
    let mut rhs_exact = true;
    for lambda in sorted_eigenvalues(prior.task()) {
        let noise = if lambda > 0.0 {
            prior.noise_var() / lambda
        } else {
            f64::INFINITY
        };
        let (g, exact) = single_task_max_information(prior.spatial(), n, noise);
        rhs += g;
        rhs_exact &= exact;
    }
    Ok(BoundCheck::new(lhs, rhs, lhs_exact && rhs_exact))
}

/// Checks that after `n` greedy samples
/// `max_v tr Σ̃_v(n) ≤ 2 σ̄₀² λ₁ / ln(1 + σ⁻² σ̄₀² λ₁) · γ_n^K / n`,
/// with `σ̄₀²` the largest diagonal of `Σ₀` and `λ₁` the largest task
/// eigenvalue. `None` for `n = 0`, where the bound is undefined.
pub fn uncertainty_reduction_bound_check(
    prior: &MtgpPrior,
    n: usize,
) -> Result<Option<BoundCheck>> {
    if n == 0 {
        return Ok(None);
    }
    let mut post = MtgpPosterior::from_prior(prior);
    for _ in 0..n {
        let s = post.greedy_select();
        post.condition_covariance(s)?;
    }
    let lhs = post.max_block_trace();

    let sigma0 = prior.spatial().diagonal().max();
    let lambda1 = sorted_eigenvalues(prior.task())
        .first()
        .copied()
        .unwrap_or(0.0);
    let scale = sigma0 * lambda1;
    let (gamma, exact) = multitask_max_information(prior, n)?;
    let factor = if scale > 0.0 {
        2.0 * scale / libm::log1p(scale / prior.noise_var())
    } else {
        0.0
    };
    Ok(Some(BoundCheck::new(lhs, factor * gamma / n as f64, exact)))
}
