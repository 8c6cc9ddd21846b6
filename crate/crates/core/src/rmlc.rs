//! Randomized multitask learning and coverage.
//!
//! Each step every robot flips a coin: with probability `p_i` it samples
//! the most uncertain vertex of its region, otherwise it moves to the
//! position suggested by federated coverage. Samples reach the base station
//! on the robot's next contact; `p_i = M_i / (M_i + κ)` where `M_i` is the
//! largest posterior block trace over the robot's region.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fmc::{fmc_step, CommSchedule, FmcState};
use crate::graph::{Covering, Vertex};
use crate::mtgp::MtgpPosterior;
use crate::regret::Phase;
use crate::sim::{Problem, Recorder, RunLog, StepContext};

#[derive(Debug, Clone, PartialEq)]
pub struct RmlcConfig {
    /// Exploration damping `κ > 0`; larger values sample less.
    pub kappa: f64,
    pub horizon: usize,
}

impl RmlcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kappa > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name: "kappa",
                reason: alloc::format!("must be positive, got {}", self.kappa),
            })
        }
    }
}

/// Most uncertain vertex of `robot`'s region and its block trace.
/// `None` when the robot owns nothing.
pub fn sampling_target(
    post: &MtgpPosterior,
    cov: &Covering,
    robot: usize,
) -> Option<(Vertex, f64)> {
    let mut best: Option<(Vertex, f64)> = None;
    for v in cov.robot_region(robot) {
        let t = post.block_trace(v);
        if best.is_none_or(|(_, b)| t > b) {
            best = Some((v, t));
        }
    }
    best
}

/// `M / (M + κ)`.
pub fn sampling_probability(max_trace: f64, kappa: f64) -> f64 {
    if max_trace > 0.0 {
        max_trace / (max_trace + kappa)
    } else {
        0.0
    }
}

/// Samples collected by one robot and not yet delivered, merged per vertex.
#[derive(Debug, Clone, Default)]
struct Pending {
    entries: Vec<(Vertex, u64, Vec<f64>)>,
}

impl Pending {
    fn push(&mut self, vertex: Vertex, obs: Vec<f64>) {
        match self.entries.iter_mut().find(|(v, _, _)| *v == vertex) {
            Some((_, count, sum)) => {
                *count += 1;
                sum.iter_mut().zip(&obs).for_each(|(s, o)| *s += o);
            }
            None => self.entries.push((vertex, 1, obs)),
        }
    }

    fn deliver(&mut self, post: &mut MtgpPosterior) -> Result<()> {
        for (v, count, sum) in self.entries.drain(..) {
            post.update_batch(v, count, &sum)?;
        }
        Ok(())
    }
}

/// Runs RMLC for `cfg.horizon` steps. Each step starts with one base-station
/// contact; regret is scored at the robots' actual positions.
pub fn run_rmlc(
    problem: &Problem<'_>,
    cfg: &RmlcConfig,
    schedule: &CommSchedule,
    seed: u64,
) -> Result<RunLog> {
    problem.validate()?;
    cfg.validate()?;
    let Problem {
        env, model, prior, ..
    } = *problem;
    let robots = model.robot_count();

    let mut scheduler = schedule.scheduler(robots)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut post = MtgpPosterior::from_prior(prior);
    let mut estimate = post.clamped_estimate();
    // suggested positions and the covering live at the base station
    let mut state = FmcState::from_config(env, model, problem.initial.clone());
    let mut positions = problem.initial.clone();
    let mut pending = vec![Pending::default(); robots];

    let mut targets = Vec::with_capacity(robots);
    let mut probs = Vec::with_capacity(robots);
    for i in 0..robots {
        let (t, m) = sampling_target(&post, &state.cov, i).unwrap_or((state.config[i], 0.0));
        targets.push(t);
        probs.push(sampling_probability(m, cfg.kappa));
    }

    let mut rec = Recorder::new(*problem, cfg.horizon);
    while !rec.done() {
        let r = scheduler.next().expect("schedulers are infinite").robot;
        pending[r].deliver(&mut post)?;
        estimate = post.clamped_estimate();
        fmc_step(&mut state, r, env, model, &estimate)?;
        let (t, m) = sampling_target(&post, &state.cov, r).unwrap_or((state.config[r], 0.0));
        targets[r] = t;
        probs[r] = sampling_probability(m, cfg.kappa);

        let mut sampled = false;
        for i in 0..robots {
            let u: f64 = rng.random();
            if u < probs[i] {
                positions.0[i] = targets[i];
                let obs = problem.sample(targets[i], &mut rng);
                pending[i].push(targets[i], obs);
                sampled = true;
            } else {
                positions.0[i] = state.config[i];
            }
        }
        rec.record(StepContext {
            phase: if sampled {
                Phase::Exploration
            } else {
                Phase::Coverage
            },
            epoch: 0,
            config: &positions,
            cov: &state.cov,
            estimate: &estimate,
            max_block_trace: post.max_block_trace(),
            quiescent: false,
        });
    }

    Ok(RunLog {
        trace: rec.trace,
        steps: rec.steps,
        epochs: Vec::new(),
        final_state: state,
        final_positions: positions,
        final_estimate: estimate,
        final_posterior: post,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::ServiceModel;
    use crate::demand::DemandField;
    use crate::graph::{Configuration, Environment};
    use crate::mtgp::{se_kernel_matrix, MtgpPrior};
    use nalgebra::DMatrix;

    fn path_problem() -> (Environment, ServiceModel, DemandField, MtgpPrior) {
        let env = Environment::grid(1, 6, 1.0).unwrap();
        let model = ServiceModel::linear(&[vec![1.0], vec![1.0]]).unwrap();
        let truth = DemandField::from_flat(6, 1, vec![0.0, 0.1, 0.2, 0.3, 0.2, 0.2]).unwrap();
        let coords: Vec<[f64; 2]> = (0..6).map(|v| [v as f64 / 5.0, 0.0]).collect();
        let prior = MtgpPrior::new(
            se_kernel_matrix(&coords, 1.0, 0.3).unwrap(),
            DMatrix::identity(1, 1),
            None,
            0.04,
        )
        .unwrap();
        (env, model, truth, prior)
    }

    #[test]
    fn probability_and_target() {
        assert_eq!(sampling_probability(0.0, 0.1), 0.0);
        assert!((sampling_probability(0.3, 0.1) - 0.75).abs() < 1e-15);
        let (_, _, _, prior) = path_problem();
        let post = MtgpPosterior::from_prior(&prior);
        let cov = Covering::from_sets(vec![vec![vec![2, 3], vec![]]]);
        // equal prior variances: lowest vertex wins
        assert_eq!(sampling_target(&post, &cov, 0), Some((2, 1.0)));
        assert_eq!(sampling_target(&post, &cov, 1), None);
    }

    #[test]
    fn huge_kappa_never_samples() {
        let (env, model, truth, prior) = path_problem();
        let initial = Configuration(vec![0, 5]);
        let problem = Problem {
            env: &env,
            model: &model,
            truth: &truth,
            prior: &prior,
            initial: &initial,
        };
        let cfg = RmlcConfig {
            kappa: 1e300,
            horizon: 40,
        };
        let log = run_rmlc(&problem, &cfg, &CommSchedule::RoundRobin, 3).unwrap();
        assert_eq!(log.steps.len(), 40);
        assert!(log.trace.phases.iter().all(|&p| p == Phase::Coverage));
        // nothing was learned and nobody moved
        assert!(log.final_estimate.is_zero());
        assert_eq!(log.final_positions, initial);
    }

    #[test]
    fn learns_with_small_kappa() {
        let (env, model, truth, prior) = path_problem();
        let initial = Configuration(vec![0, 1]);
        let problem = Problem {
            env: &env,
            model: &model,
            truth: &truth,
            prior: &prior,
            initial: &initial,
        };
        let cfg = RmlcConfig {
            kappa: 0.01,
            horizon: 200,
        };
        let log = run_rmlc(&problem, &cfg, &CommSchedule::RoundRobin, 3).unwrap();
        assert!(log.steps.last().unwrap().max_block_trace < 0.2);
        assert!(log.trace.instantaneous.iter().all(|&r| r >= -1e-9));
    }
}
