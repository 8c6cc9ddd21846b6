//! Multitask coverage regret against the true demand field.

use alloc::vec::Vec;

use crate::coverage::{coverage_cost, equitable_partition, multitask_centers, ServiceModel};
use crate::demand::DemandField;
use crate::error::{Error, Result};
use crate::graph::{Configuration, Covering, Environment};

/// `R = 2ℋ(η, 𝒫) − ℋ(c(𝒫), 𝒫) − ℋ(η, 𝒱(η))`, all evaluated with
/// `true_field`.
///
/// The first gap measures how far robots sit from the centers of their
/// sets; the second how far the sets are from the equitable partition of
/// the current positions. Both are nonnegative, and the sum vanishes
/// exactly at centroidal equitable partitions.
pub fn instantaneous_regret(
    env: &Environment,
    model: &ServiceModel,
    true_field: &DemandField,
    config: &Configuration,
    cov: &Covering,
) -> f64 {
    let here = coverage_cost(env, model, true_field, config, cov);
    let centers = multitask_centers(env, model, true_field, cov, config).config;
    let at_centers = coverage_cost(env, model, true_field, &centers, cov);
    let equitable = equitable_partition(env, model, config);
    let best_partition = coverage_cost(env, model, true_field, config, &equitable);
    2.0 * here - at_centers - best_partition
}

/// What the system was doing during a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Exploration,
    Propagation,
    Coverage,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Exploration => "exploration",
            Phase::Propagation => "propagation",
            Phase::Coverage => "coverage",
        }
    }
}

/// Per-step regret with running sums.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretTrace {
    pub instantaneous: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub phases: Vec<Phase>,
}

impl RegretTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accumulate(&mut self, value: f64, phase: Phase) {
        debug_assert!(value.is_finite());
        let total = self.total() + value;
        self.instantaneous.push(value);
        self.cumulative.push(total);
        self.phases.push(phase);
    }

    pub fn len(&self) -> usize {
        self.instantaneous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instantaneous.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Least-squares slope of `ln(cumulative[t])` against `ln t` (1-based
    /// steps) over the trailing `window` fraction of the trace.
    pub fn loglog_slope(&self, window: f64) -> Result<f64> {
        loglog_slope(&self.cumulative, window)
    }
}

/// Least-squares slope of `ln y_t` against `ln t` over the trailing
/// `window` fraction of a cumulative series indexed from `t = 1`.
pub fn loglog_slope(cumulative: &[f64], window: f64) -> Result<f64> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: alloc::format!("must be in (0, 1], got {window}"),
        });
    }
    let len = cumulative.len();
    let take = libm::ceil(len as f64 * window) as usize;
    let start = len - take.min(len);
    if take < 2 {
        return Err(Error::ShortTrace { len: take });
    }
    let mut xs = Vec::with_capacity(take);
    let mut ys = Vec::with_capacity(take);
    for (offset, &y) in cumulative[start..].iter().enumerate() {
        let t = start + offset + 1;
        if !(y > 0.0) {
            return Err(Error::NonPositiveCumulative { step: t });
        }
        xs.push(libm::log(t as f64));
        ys.push(libm::log(y));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
