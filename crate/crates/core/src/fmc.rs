//! Federated multitask coverage: a base station updates one robot's
//! position and task sets per contact.
//!
//! Each contact first relocates the robot to a vertex minimizing `ℋ_inf`
//! (only on strict improvement), then grows its task sets with the vertices
//! it now serves strictly best and sheds shared vertices that another robot
//! serves at least as well. `U1 = ℋ_inf`, `U2` (best owner cost) and
//! `U3` (ownership multiplicity) are Lyapunov functions of this process.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coverage::{coverage_cost, equitable_partition, h_inf, tie_aware_argmin, ServiceModel};
use crate::demand::DemandField;
use crate::error::{Error, Result};
use crate::graph::{Configuration, Covering, Environment, Vertex};

/// A relocation must lower `ℋ_inf` by more than this relative amount.
/// Guards against cycling between candidates whose values differ only by
/// summation rounding.
pub const RELOCATION_RTOL: f64 = 1e-12;

/// Joint robot configuration and per-task coverings held by the base station.
#[derive(Debug, Clone, PartialEq)]
pub struct FmcState {
    pub config: Configuration,
    pub cov: Covering,
    /// Number of contacts processed so far.
    pub step: usize,
}

impl FmcState {
    pub fn new(config: Configuration, cov: Covering) -> Self {
        Self {
            config,
            cov,
            step: 0,
        }
    }

    /// Starts from `config` with its equitable partition as the covering.
    pub fn from_config(env: &Environment, model: &ServiceModel, config: Configuration) -> Self {
        let cov = equitable_partition(env, model, &config);
        Self::new(config, cov)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lyapunov {
    /// `ℋ_inf(η, Φ)`
    pub u1: f64,
    /// `Σ_j Σ_v min_{i owns v} f_i^j(d(η_i, v)) φ^j(v)`
    pub u2: f64,
    /// `Σ_j Σ_v |{i : v ∈ P_i^j}|`
    pub u3: usize,
}

pub fn lyapunov_values(
    state: &FmcState,
    env: &Environment,
    model: &ServiceModel,
    field: &DemandField,
) -> Lyapunov {
    let n = env.vertex_count();
    let mut u2 = 0.0;
    let mut owner_min = vec![f64::INFINITY; n];
    for j in 0..model.task_count() {
        owner_min.fill(f64::INFINITY);
        for i in 0..model.robot_count() {
            let row = env.dist_row(state.config[i]);
            for &v in state.cov.set(j, i) {
                owner_min[v] = owner_min[v].min(model.cost(i, j, row[v]));
            }
        }
        u2 += owner_min
            .iter()
            .enumerate()
            .filter(|&(v, _)| field.get(v, j) != 0.0)
            .map(|(v, c)| c * field.get(v, j))
            .sum::<f64>();
    }
    Lyapunov {
        u1: h_inf(env, model, field, &state.config),
        u2,
        u3: state.cov.overlap_count(),
    }
}

/// Outcome of one base-station contact.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub robot: usize,
    pub relocated: bool,
    pub from: Vertex,
    pub to: Vertex,
    /// Vertices added to `P_i^j`, per task.
    pub gained: Vec<Vec<Vertex>>,
    /// Vertices removed from `P_i^j`, per task.
    pub shed: Vec<Vec<Vertex>>,
    /// Lyapunov values after the step.
    pub lyapunov: Lyapunov,
}

impl StepReport {
    pub fn changed(&self) -> bool {
        self.relocated || self.gained.iter().chain(&self.shed).any(|s| !s.is_empty())
    }
}

/// `min_{i' ≠ robot} f_{i'}^j(d(η_{i'}, v))` for every task and vertex,
/// task-major. Infinite when `robot` is alone.
fn others_min(
    env: &Environment,
    model: &ServiceModel,
    config: &Configuration,
    robot: usize,
) -> Vec<f64> {
    let n = env.vertex_count();
    let mut out = vec![f64::INFINITY; model.task_count() * n];
    for j in 0..model.task_count() {
        let slot = &mut out[j * n..(j + 1) * n];
        for (i, &eta) in config.positions().iter().enumerate() {
            if i == robot {
                continue;
            }
            let row = env.dist_row(eta);
            for (v, best) in slot.iter_mut().enumerate() {
                let c = model.cost(i, j, row[v]);
                if c < *best {
                    *best = c;
                }
            }
        }
    }
    out
}

/// `ℋ_inf` of the configuration with `robot` moved to each vertex.
pub fn relocation_values(
    env: &Environment,
    model: &ServiceModel,
    field: &DemandField,
    config: &Configuration,
    robot: usize,
) -> Vec<f64> {
    let n = env.vertex_count();
    let others = others_min(env, model, config, robot);
    // (task, vertex, others_min, φ) over vertices with demand
    let terms: Vec<(f64, usize, f64, f64)> = (0..model.task_count())
        .flat_map(|j| (0..n).map(move |v| (j, v)))
        .filter_map(|(j, v)| {
            let phi = field.get(v, j);
            (phi != 0.0).then(|| (model.coefficient(robot, j), v, others[j * n + v], phi))
        })
        .collect();
    (0..n)
        .map(|c| {
            let row = env.dist_row(c);
            terms
                .iter()
                .map(|&(a, v, other, phi)| {
                    let own = a * model.shape(row[v]);
                    if own < other {
                        own * phi
                    } else {
                        other * phi
                    }
                })
                .sum()
        })
        .collect()
}

/// Processes one contact of `robot` with the base station.
pub fn fmc_step(
    state: &mut FmcState,
    robot: usize,
    env: &Environment,
    model: &ServiceModel,
    field: &DemandField,
) -> Result<StepReport> {
    if robot >= model.robot_count() {
        return Err(Error::RobotOutOfRange {
            robot,
            count: model.robot_count(),
        });
    }
    let n = env.vertex_count();
    let from = state.config[robot];

    let values = relocation_values(env, model, field, &state.config, robot);
    let current = values[from];
    let (best, best_value) = tie_aware_argmin(&values);
    let relocated = best_value < current - RELOCATION_RTOL * current.abs();
    if relocated {
        state.config.0[robot] = best;
    }
    let eta = state.config[robot];

    let others = others_min(env, model, &state.config, robot);
    let row = env.dist_row(eta);
    let mut gained = Vec::with_capacity(model.task_count());
    let mut shed = Vec::with_capacity(model.task_count());
    let mut owned_elsewhere = vec![false; n];
    for j in 0..model.task_count() {
        owned_elsewhere.fill(false);
        for i in (0..model.robot_count()).filter(|&i| i != robot) {
            for &v in state.cov.set(j, i) {
                owned_elsewhere[v] = true;
            }
        }
        let other = &others[j * n..(j + 1) * n];
        let own = |v: Vertex| model.cost(robot, j, row[v]);

        let old = state.cov.set(j, robot).to_vec();
        let removed: Vec<Vertex> = old
            .iter()
            .copied()
            .filter(|&v| owned_elsewhere[v] && own(v) >= other[v])
            .collect();
        let added: Vec<Vertex> = (0..n).filter(|&v| own(v) < other[v]).collect();

        let mut next: Vec<Vertex> = old
            .iter()
            .copied()
            .filter(|v| removed.binary_search(v).is_err())
            .chain(added.iter().copied())
            .collect();
        next.sort_unstable();
        next.dedup();

        gained.push(
            next.iter()
                .copied()
                .filter(|v| old.binary_search(v).is_err())
                .collect(),
        );
        shed.push(removed);
        *state.cov.set_mut(j, robot) = next;
    }
    state.step += 1;

    Ok(StepReport {
        robot,
        relocated,
        from,
        to: eta,
        gained,
        shed,
        lyapunov: lyapunov_values(state, env, model, field),
    })
}

/// How robots take turns contacting the base station.
#[derive(Debug, Clone, PartialEq)]
pub enum CommSchedule {
    /// Robots `0, 1, …, N-1, 0, 1, …`.
    RoundRobin,
    /// Each robot's gaps between consecutive contacts are drawn uniformly
    /// from `[lower, upper]`; contacts are served in time order, lowest
    /// robot index first on exact ties.
    BoundedRandom { lower: f64, upper: f64, seed: u64 },
}

impl CommSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CommSchedule::RoundRobin => Ok(()),
            CommSchedule::BoundedRandom { lower, upper, .. } => {
                if lower > 0.0 && upper > lower && upper.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter {
                        name: "schedule",
                        reason: alloc::format!("need 0 < lower < upper, got [{lower}, {upper}]"),
                    })
                }
            }
        }
    }

    pub fn scheduler(&self, robot_count: usize) -> Result<Scheduler> {
        self.validate()?;
        if robot_count == 0 {
            return Err(Error::InvalidParameter {
                name: "robot_count",
                reason: "need at least one robot".into(),
            });
        }
        Ok(match *self {
            CommSchedule::RoundRobin => Scheduler {
                robot_count,
                counter: 0,
                random: None,
            },
            CommSchedule::BoundedRandom { lower, upper, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let next = (0..robot_count)
                    .map(|_| rng.random_range(0.0..upper))
                    .collect();
                Scheduler {
                    robot_count,
                    counter: 0,
                    random: Some(RandomClock {
                        lower,
                        upper,
                        rng,
                        next,
                    }),
                }
            }
        })
    }
}

#[derive(Debug, Clone)]
struct RandomClock {
    lower: f64,
    upper: f64,
    rng: ChaCha8Rng,
    next: Vec<f64>,
}

/// A single base-station contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub robot: usize,
    /// Continuous contact time (equal to the event index for round-robin).
    pub time: f64,
}

/// Infinite stream of contacts produced by a [`CommSchedule`].
#[derive(Debug, Clone)]
pub struct Scheduler {
    robot_count: usize,
    counter: usize,
    random: Option<RandomClock>,
}

impl Iterator for Scheduler {
    type Item = Contact;

    fn next(&mut self) -> Option<Contact> {
        let contact = match &mut self.random {
            None => Contact {
                robot: self.counter % self.robot_count,
                time: self.counter as f64,
            },
            Some(clock) => {
                let mut robot = 0;
                for (i, &t) in clock.next.iter().enumerate() {
                    if t < clock.next[robot] {
                        robot = i;
                    }
                }
                let time = clock.next[robot];
                clock.next[robot] = time + clock.rng.random_range(clock.lower..=clock.upper);
                Contact { robot, time }
            }
        };
        self.counter += 1;
        Some(contact)
    }
}

/// One row of a coverage trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    /// 1-based contact index.
    pub step: usize,
    pub robot: usize,
    pub relocated: bool,
    pub changed: bool,
    pub lyapunov: Lyapunov,
    pub total_cost: f64,
}

/// A run that reached a fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    pub initial: Lyapunov,
    pub records: Vec<TrajectoryRecord>,
    pub final_state: FmcState,
    /// Number of contacts after which the state never changed again.
    pub converged_step: usize,
}

/// A run that exhausted its step budget; finite convergence
/// means this points at a bug or a too-small budget.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("no quiescence after {} contacts", records.len())]
pub struct NotConverged {
    pub records: Vec<TrajectoryRecord>,
    pub final_state: FmcState,
}

/// Runs contacts from `schedule` until every robot has had a contact that
/// changed nothing since the last change anywhere. Under round-robin this
/// is `N` consecutive unchanged contacts.
pub fn run_to_convergence(
    initial: FmcState,
    schedule: &CommSchedule,
    env: &Environment,
    model: &ServiceModel,
    field: &DemandField,
    max_steps: usize,
) -> core::result::Result<Convergence, NotConverged> {
    let n_robots = model.robot_count();
    let mut state = initial;
    let initial = lyapunov_values(&state, env, model, field);
    let mut records = Vec::new();
    let mut scheduler = match schedule.scheduler(n_robots) {
        Ok(s) => s,
        Err(_) => {
            return Err(NotConverged {
                records,
                final_state: state,
            })
        }
    };
    let mut quiet = vec![false; n_robots];
    let mut converged_step = 0;
    for k in 1..=max_steps {
        let contact = scheduler.next().expect("scheduler is infinite");
        let report = match fmc_step(&mut state, contact.robot, env, model, field) {
            Ok(r) => r,
            Err(_) => {
                return Err(NotConverged {
                    records,
                    final_state: state,
                })
            }
        };
        let changed = report.changed();
        records.push(TrajectoryRecord {
            step: k,
            robot: contact.robot,
            relocated: report.relocated,
            changed,
            lyapunov: report.lyapunov,
            total_cost: coverage_cost(env, model, field, &state.config, &state.cov),
        });
        if changed {
            quiet.fill(false);
            converged_step = k;
        } else {
            quiet[contact.robot] = true;
            if quiet.iter().all(|&q| q) {
                return Ok(Convergence {
                    initial,
                    records,
                    final_state: state,
                    converged_step,
                });
            }
        }
    }
    Err(NotConverged {
        records,
        final_state: state,
    })
}
