//! Deterministic sequencing of multitask learning and coverage.
//!
//! Time is split into epochs. Epoch `ℓ` runs
//!
//! 1. an exploration phase that visits a greedy batch of sampling points
//!    chosen to bring every posterior block trace below `α^ℓ τ`,
//! 2. an `N`-step propagation phase during which the base station folds the
//!    collected samples into the posterior, and
//! 3. `⌈β^ℓ⌉` base-station contacts of federated coverage on the refreshed
//!    demand estimate.
//!
//! Regret is scored every step against the true field.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coverage::multitask_centers;
use crate::demand::DemandField;
use crate::error::{Error, Result};
use crate::fmc::{fmc_step, CommSchedule, FmcState, Scheduler};
use crate::graph::{Configuration, Environment, Vertex};
use crate::mtgp::{plan_batch, MtgpPosterior};
use crate::regret::Phase;
use crate::sim::{EpochSummary, Problem, Recorder, RunLog, StepContext};

/// Tolerance on `α = β^{-2/3}` in theorem-matched mode.
const MATCH_TOL: f64 = 1e-9;

/// Epoch schedule of a DSMLC run.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochConfig {
    /// Exploration threshold decay, `0 < α < 1`.
    pub alpha: f64,
    /// Coverage-phase growth, `β > 1`.
    pub beta: f64,
    /// Base threshold `τ`; defaults to the prior's largest block trace.
    pub tau: Option<f64>,
    /// Total number of simulated steps.
    pub horizon: usize,
    /// Require `α = β^{-2/3}`.
    pub theorem_matched: bool,
}

impl EpochConfig {
    /// `α = β^{-2/3}` with theorem-matched validation.
    pub fn theorem_matched(beta: f64, horizon: usize) -> Self {
        Self {
            alpha: libm::pow(beta, -2.0 / 3.0),
            beta,
            tau: None,
            horizon,
            theorem_matched: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad =
            |name, reason: alloc::string::String| Err(Error::InvalidParameter { name, reason });
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(
                "alpha",
                alloc::format!("need 0 < alpha < 1, got {}", self.alpha),
            );
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return bad("beta", alloc::format!("need beta > 1, got {}", self.beta));
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0 && tau.is_finite()) {
                return bad("tau", alloc::format!("must be positive, got {tau}"));
            }
        }
        if self.theorem_matched {
            let want = libm::pow(self.beta, -2.0 / 3.0);
            if (self.alpha - want).abs() > MATCH_TOL {
                return bad(
                    "alpha",
                    alloc::format!(
                        "theorem-matched mode needs alpha = beta^(-2/3) = {want}, got {}",
                        self.alpha
                    ),
                );
            }
        }
        Ok(())
    }

    /// Number of coverage contacts in epoch `epoch` (1-based).
    pub fn coverage_steps(&self, epoch: usize) -> usize {
        libm::ceil(libm::pow(self.beta, epoch as f64)) as usize
    }

    /// Exploration threshold `α^ℓ τ` of epoch `epoch`.
    pub fn threshold(&self, epoch: usize, tau: f64) -> f64 {
        libm::pow(self.alpha, epoch as f64) * tau
    }
}

/// Where coverage gets its demand estimate from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimateSource {
    /// Clamped posterior mean.
    #[default]
    Posterior,
    /// The true field (oracle ablation). Sampling still happens.
    Oracle,
}

/// Sampling points of one exploration phase and how robots visit them.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationPlan {
    pub threshold: f64,
    pub batch: Vec<Vertex>,
    /// Whether the batch reaches the threshold (false when cut short by the
    /// point limit).
    pub reached: bool,
    /// Ordered sampling points per robot.
    pub routes: Vec<Vec<Vertex>>,
}

impl ExplorationPlan {
    /// One sample per robot per step; the phase lasts as long as the
    /// longest route.
    pub fn steps(&self) -> usize {
        self.routes.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Assigns each point to the nearest center (lowest robot index on ties)
/// and orders each robot's points by nearest neighbour starting from its
/// center.
pub fn assign_routes(
    env: &Environment,
    centers: &Configuration,
    points: &[Vertex],
) -> Vec<Vec<Vertex>> {
    let mut buckets = vec![Vec::new(); centers.robot_count()];
    for &p in points {
        let mut best = 0;
        for (i, &c) in centers.positions().iter().enumerate() {
            if env.dist(c, p) < env.dist(centers[best], p) {
                best = i;
            }
        }
        buckets[best].push(p);
    }
    buckets
        .into_iter()
        .enumerate()
        .map(|(i, mut left)| {
            let mut route = Vec::with_capacity(left.len());
            let mut here = centers[i];
            while !left.is_empty() {
                let mut k = 0;
                for (idx, &p) in left.iter().enumerate() {
                    if env.dist(here, p) < env.dist(here, left[k]) {
                        k = idx;
                    }
                }
                here = left.remove(k);
                route.push(here);
            }
            route
        })
        .collect()
}

/// Plans epoch `epoch`'s sampling batch from the current posterior and
/// splits it among robots around `centers`. At most `limit` points are
/// planned.
pub fn exploration_phase(
    epoch: usize,
    post: &MtgpPosterior,
    centers: &Configuration,
    env: &Environment,
    threshold: f64,
    limit: usize,
) -> Result<ExplorationPlan> {
    if epoch == 0 {
        return Err(Error::InvalidParameter {
            name: "epoch",
            reason: "epochs are numbered from 1".into(),
        });
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter {
            name: "threshold",
            reason: alloc::format!("must be positive, got {threshold}"),
        });
    }
    let plan = plan_batch(post, threshold, limit)?;
    let routes = assign_routes(env, centers, &plan.points);
    Ok(ExplorationPlan {
        threshold,
        batch: plan.points,
        reached: plan.reached,
        routes,
    })
}

/// A noisy measurement of all tasks at one vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub robot: usize,
    pub vertex: Vertex,
    pub observation: Vec<f64>,
}

/// Folds `samples` into the posterior (in order) and returns the clamped
/// posterior-mean estimate.
pub fn propagation_phase(samples: &[Sample], post: &mut MtgpPosterior) -> Result<DemandField> {
    for s in samples {
        post.update(s.vertex, &s.observation)?;
    }
    Ok(post.clamped_estimate())
}

/// Outcome of a coverage phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageOutcome {
    pub steps: usize,
    /// Contacts that changed the state.
    pub changes: usize,
    /// Whether every robot had an unchanged contact since the last change.
    pub quiescent: bool,
}

/// Tracks which robots have had an unchanged contact since the last
/// change of the coverage state.
#[derive(Debug, Clone)]
struct Quiet {
    quiet: Vec<bool>,
}

impl Quiet {
    fn new(robots: usize) -> Self {
        Self {
            quiet: vec![false; robots],
        }
    }

    fn observe(&mut self, robot: usize, changed: bool) -> bool {
        if changed {
            self.quiet.iter_mut().for_each(|q| *q = false);
        } else {
            self.quiet[robot] = true;
        }
        self.all()
    }

    fn all(&self) -> bool {
        self.quiet.iter().all(|&q| q)
    }
}

/// Runs up to `steps` federated coverage contacts on `estimate`, calling
/// `on_step(state, quiescent)` after each one. Stops early when `on_step`
/// returns `false`.
pub fn coverage_phase(
    state: &mut FmcState,
    scheduler: &mut Scheduler,
    env: &Environment,
    model: &crate::coverage::ServiceModel,
    estimate: &DemandField,
    steps: usize,
    mut on_step: impl FnMut(&FmcState, bool) -> bool,
) -> Result<CoverageOutcome> {
    let mut quiet = Quiet::new(model.robot_count());
    let mut out = CoverageOutcome {
        steps: 0,
        changes: 0,
        quiescent: false,
    };
    for _ in 0..steps {
        let contact = scheduler.next().expect("schedulers are infinite");
        let report = fmc_step(state, contact.robot, env, model, estimate)?;
        out.steps += 1;
        out.changes += usize::from(report.changed());
        out.quiescent = quiet.observe(contact.robot, report.changed());
        if !on_step(state, out.quiescent) {
            break;
        }
    }
    Ok(out)
}

/// Runs DSMLC for `cfg.horizon` steps.
///
/// The initial covering is the equitable partition of `problem.initial`.
/// `seed` drives the measurement noise only; the contact order comes from
/// `schedule`.
pub fn run_dsmlc(
    problem: &Problem<'_>,
    cfg: &EpochConfig,
    schedule: &CommSchedule,
    seed: u64,
    source: EstimateSource,
) -> Result<RunLog> {
    problem.validate()?;
    cfg.validate()?;
    let Problem {
        env,
        model,
        truth,
        prior,
        ..
    } = *problem;
    let robots = model.robot_count();

    let mut scheduler = schedule.scheduler(robots)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut post = MtgpPosterior::from_prior(prior);
    let mut state = FmcState::from_config(env, model, problem.initial.clone());
    let mut estimate = match source {
        EstimateSource::Posterior => post.clamped_estimate(),
        EstimateSource::Oracle => truth.clone(),
    };
    let tau = cfg.tau.unwrap_or_else(|| prior.max_block_trace());
    let mut rec = Recorder::new(*problem, cfg.horizon);
    let mut epochs = Vec::new();

    let mut epoch = 0;
    while !rec.done() {
        epoch += 1;
        let threshold = cfg.threshold(epoch, tau);

        // exploration: the covering stays frozen while robots sample
        let centers = if estimate.is_zero() {
            state.config.clone()
        } else {
            multitask_centers(env, model, &estimate, &state.cov, &state.config).config
        };
        let limit = robots.saturating_mul(rec.remaining());
        let plan = exploration_phase(epoch, &post, &centers, env, threshold, limit)?;
        let mut samples = Vec::with_capacity(plan.batch.len());
        let mut explored = 0;
        let trace_now = post.max_block_trace();
        for k in 0..plan.steps() {
            for (i, route) in plan.routes.iter().enumerate() {
                if let Some(&v) = route.get(k) {
                    state.config.0[i] = v;
                    samples.push(Sample {
                        robot: i,
                        vertex: v,
                        observation: problem.sample(v, &mut rng),
                    });
                }
            }
            explored += 1;
            let more = rec.record(StepContext {
                phase: Phase::Exploration,
                epoch,
                config: &state.config,
                cov: &state.cov,
                estimate: &estimate,
                max_block_trace: trace_now,
                quiescent: false,
            });
            if !more {
                break;
            }
        }

        // propagation
        let fresh = propagation_phase(&samples, &mut post)?;
        if source == EstimateSource::Posterior {
            estimate = fresh;
        }
        let trace_now = post.max_block_trace();
        let mut propagated = 0;
        while propagated < robots && !rec.done() {
            propagated += 1;
            rec.record(StepContext {
                phase: Phase::Propagation,
                epoch,
                config: &state.config,
                cov: &state.cov,
                estimate: &estimate,
                max_block_trace: trace_now,
                quiescent: false,
            });
        }

        // coverage
        let budget = cfg.coverage_steps(epoch).min(rec.remaining());
        let outcome = coverage_phase(
            &mut state,
            &mut scheduler,
            env,
            model,
            &estimate,
            budget,
            |s, quiescent| {
                rec.record(StepContext {
                    phase: Phase::Coverage,
                    epoch,
                    config: &s.config,
                    cov: &s.cov,
                    estimate: &estimate,
                    max_block_trace: trace_now,
                    quiescent,
                })
            },
        )?;

        epochs.push(EpochSummary {
            epoch,
            threshold,
            batch_size: samples.len(),
            exploration_steps: explored,
            propagation_steps: propagated,
            coverage_steps: outcome.steps,
        });
    }

    Ok(RunLog {
        trace: rec.trace,
        steps: rec.steps,
        epochs,
        final_positions: state.config.clone(),
        final_state: state,
        final_estimate: estimate,
        final_posterior: post,
    })
}
