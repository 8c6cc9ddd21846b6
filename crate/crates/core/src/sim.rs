//! Shared plumbing for adaptive coverage runs: the immutable problem
//! inputs, per-step logs and a regret recorder that stops at the horizon.

use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};

use crate::coverage::{coverage_cost, ServiceModel};
use crate::demand::DemandField;
use crate::error::{Error, Result};
use crate::fmc::FmcState;
use crate::graph::{Configuration, Covering, Environment, Vertex};
use crate::mtgp::{MtgpPosterior, MtgpPrior};
use crate::regret::{instantaneous_regret, Phase, RegretTrace};

/// Immutable inputs of an adaptive coverage run.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub env: &'a Environment,
    pub model: &'a ServiceModel,
    /// Ground-truth demand; only used to draw samples and score regret.
    pub truth: &'a DemandField,
    pub prior: &'a MtgpPrior,
    /// Starting robot positions.
    pub initial: &'a Configuration,
}

impl Problem<'_> {
    pub fn validate(&self) -> Result<()> {
        self.model.check_dims(self.env, self.truth)?;
        self.initial.validate(self.env)?;
        let dims = [
            (
                "initial configuration",
                self.model.robot_count(),
                self.initial.robot_count(),
            ),
            (
                "prior vertex count",
                self.env.vertex_count(),
                self.prior.vertex_count(),
            ),
            (
                "prior task count",
                self.model.task_count(),
                self.prior.task_count(),
            ),
        ];
        for (what, expected, found) in dims {
            if expected != found {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    found,
                });
            }
        }
        Ok(())
    }

    /// A noisy `M`-vector sample `Φ(v) + ε`, `ε ~ N(0, σ² I)`.
    pub(crate) fn sample<R: rand::Rng>(&self, vertex: Vertex, rng: &mut R) -> Vec<f64> {
        let noise = Normal::new(0.0, libm::sqrt(self.prior.noise_var()))
            .expect("noise variance is positive");
        (0..self.truth.task_count())
            .map(|j| self.truth.get(vertex, j) + noise.sample(rng))
            .collect()
    }
}

/// One simulated time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    /// 1-based step index.
    pub step: usize,
    pub phase: Phase,
    pub epoch: usize,
    pub regret: f64,
    pub cumulative_regret: f64,
    /// Coverage cost of the current state under the true demand.
    pub cost_true: f64,
    /// Coverage cost of the current state under the planning estimate.
    pub cost_estimated: f64,
    pub max_block_trace: f64,
    /// Coverage steps only: every robot has had an unchanged contact since
    /// the last change of the coverage state.
    pub quiescent: bool,
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub trace: RegretTrace,
    pub steps: Vec<StepLog>,
    pub epochs: Vec<EpochSummary>,
    pub final_state: FmcState,
    /// Robot positions at the end of the run.
    pub final_positions: Configuration,
    pub final_estimate: DemandField,
    pub final_posterior: MtgpPosterior,
}

/// Per-epoch accounting of an epoch-based run.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub threshold: f64,
    pub batch_size: usize,
    pub exploration_steps: usize,
    pub propagation_steps: usize,
    pub coverage_steps: usize,
}

/// Scores and logs steps until the horizon is reached.
pub(crate) struct Recorder<'a> {
    problem: Problem<'a>,
    horizon: usize,
    pub trace: RegretTrace,
    pub steps: Vec<StepLog>,
    cache: Option<(Configuration, Covering, f64, f64)>,
}

pub(crate) struct StepContext<'s> {
    pub phase: Phase,
    pub epoch: usize,
    pub config: &'s Configuration,
    pub cov: &'s Covering,
    pub estimate: &'s DemandField,
    pub max_block_trace: f64,
    pub quiescent: bool,
}

impl<'a> Recorder<'a> {
    pub fn new(problem: Problem<'a>, horizon: usize) -> Self {
        Self {
            problem,
            horizon,
            trace: RegretTrace::new(),
            steps: Vec::with_capacity(horizon),
            cache: None,
        }
    }

    pub fn done(&self) -> bool {
        self.steps.len() >= self.horizon
    }

    pub fn remaining(&self) -> usize {
        self.horizon.saturating_sub(self.steps.len())
    }

    /// Logs one step; returns `false` once the horizon is reached.
    pub fn record(&mut self, ctx: StepContext<'_>) -> bool {
        if self.done() {
            return false;
        }
        let Problem {
            env, model, truth, ..
        } = self.problem;
        let (regret, cost_true) = match &self.cache {
            Some((c, p, r, h)) if c == ctx.config && p == ctx.cov => (*r, *h),
            _ => {
                let r = instantaneous_regret(env, model, truth, ctx.config, ctx.cov);
                let h = coverage_cost(env, model, truth, ctx.config, ctx.cov);
                self.cache = Some((ctx.config.clone(), ctx.cov.clone(), r, h));
                (r, h)
            }
        };
        self.trace.accumulate(regret, ctx.phase);
        self.steps.push(StepLog {
            step: self.steps.len() + 1,
            phase: ctx.phase,
            epoch: ctx.epoch,
            regret,
            cumulative_regret: self.trace.total(),
            cost_true,
            cost_estimated: coverage_cost(env, model, ctx.estimate, ctx.config, ctx.cov),
            max_block_trace: ctx.max_block_trace,
            quiescent: ctx.quiescent,
        });
        !self.done()
    }
}
