//! Multitask coverage cost, multitask centers, equitable partitions and the
//! centroidal-equitable fixed-point predicate.
//!
//! All argmins break ties towards the lowest vertex or robot index so that
//! simulation traces are reproducible.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::demand::DemandField;
use crate::error::{Error, Result};
use crate::graph::{Configuration, Covering, Environment, Vertex};

/// Relative tolerance under which two candidate-center objectives are
/// treated as tied. Objectives are sums over many vertices, so equal values
/// can differ by rounding depending on summation order.
pub const TIE_RTOL: f64 = 1e-12;

/// Heterogeneous service costs `f_i^j(d) = a_ij · d^p`.
///
/// `a_ij > 0` and `p > 0` make every `f_i^j` strictly increasing on `d ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceModel {
    robot_count: usize,
    task_count: usize,
    coeffs: Vec<f64>,
    exponent: f64,
}

impl ServiceModel {
    /// Linear costs from a robot-major coefficient table `coeffs[i][j]`.
    pub fn linear(coeffs: &[Vec<f64>]) -> Result<Self> {
        Self::power(coeffs, 1.0)
    }

    /// Costs `a_ij · d^exponent`.
    pub fn power(coeffs: &[Vec<f64>], exponent: f64) -> Result<Self> {
        let robot_count = coeffs.len();
        let task_count = coeffs.first().map_or(0, Vec::len);
        if robot_count == 0 || task_count == 0 {
            return Err(Error::InvalidParameter {
                name: "coefficients",
                reason: "need at least one robot and one task".into(),
            });
        }
        if let Some(row) = coeffs.iter().find(|r| r.len() != task_count) {
            return Err(Error::DimensionMismatch {
                what: "coefficient row length",
                expected: task_count,
                found: row.len(),
            });
        }
        if let Some(a) = coeffs
            .iter()
            .flatten()
            .find(|a| !(a.is_finite() && **a > 0.0))
        {
            return Err(Error::InvalidParameter {
                name: "coefficients",
                reason: format!("every a_ij must be positive and finite, found {a}"),
            });
        }
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(Error::InvalidParameter {
                name: "exponent",
                reason: format!("must be positive, found {exponent}"),
            });
        }
        Ok(Self {
            robot_count,
            task_count,
            coeffs: coeffs.concat(),
            exponent,
        })
    }

    /// Identical linear robots with unit coefficients.
    pub fn homogeneous(robot_count: usize, task_count: usize) -> Self {
        Self {
            robot_count,
            task_count,
            coeffs: vec![1.0; robot_count * task_count],
            exponent: 1.0,
        }
    }

    pub fn robot_count(&self) -> usize {
        self.robot_count
    }

    pub fn task_count(&self) -> usize {
        self.task_count
    }

    pub fn coefficient(&self, robot: usize, task: usize) -> f64 {
        self.coeffs[robot * self.task_count + task]
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// The distance shape `d^p` shared by all robots and tasks.
    #[inline]
    pub fn shape(&self, d: f64) -> f64 {
        if self.exponent == 1.0 {
            d
        } else {
            libm::pow(d, self.exponent)
        }
    }

    /// `f_i^j(d)`
    #[inline]
    pub fn cost(&self, robot: usize, task: usize, d: f64) -> f64 {
        self.coefficient(robot, task) * self.shape(d)
    }

    /// Multiplies every coefficient by `factor`.
    pub fn rescaled(&self, factor: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|a| a * factor).collect(),
            ..self.clone()
        }
    }

    /// Keeps only the listed tasks, in the given order.
    pub fn select_tasks(&self, tasks: &[usize]) -> Self {
        let coeffs = (0..self.robot_count)
            .flat_map(|i| tasks.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.coefficient(i, j))
            .collect();
        Self {
            robot_count: self.robot_count,
            task_count: tasks.len(),
            coeffs,
            exponent: self.exponent,
        }
    }

    pub(crate) fn check_dims(&self, env: &Environment, field: &DemandField) -> Result<()> {
        if field.task_count() != self.task_count {
            return Err(Error::DimensionMismatch {
                what: "demand task count",
                expected: self.task_count,
                found: field.task_count(),
            });
        }
        if field.vertex_count() != env.vertex_count() {
            return Err(Error::DimensionMismatch {
                what: "demand vertex count",
                expected: env.vertex_count(),
                found: field.vertex_count(),
            });
        }
        Ok(())
    }
}

/// Coverage cost split by robot and by task.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBreakdown {
    pub total: f64,
    pub per_robot: Vec<f64>,
    pub per_task: Vec<f64>,
}

/// `ℋ(η, 𝒫) = Σ_j Σ_i Σ_{v∈P_i^j} f_i^j(d_G(η_i, v)) φ^j(v)`.
pub fn multitask_cost(
    env: &Environment,
    model: &ServiceModel,
    field: &DemandField,
    config: &Configuration,
    cov: &Covering,
) -> CostBreakdown {
    let mut per_robot = vec![0.0; model.robot_count()];
    let mut per_task = vec![0.0; model.task_count()];
    for (j, task_total) in per_task.iter_mut().enumerate() {
        for (i, &eta) in config.positions().iter().enumerate() {
            let row = env.dist_row(eta);
            let term: f64 = cov
                .set(j, i)
                .iter()
                .map(|&v| model.cost(i, j, row[v]) * field.get(v, j))
                .sum();
            per_robot[i] += term;
            *task_total += term;
        }
    }
    CostBreakdown {
        total: per_task.iter().sum(),
        per_robot,
        per_task,
    }
}

/// Total cost only; see [`multitask_cost`].
pub fn coverage_cost(
    env: &Environment,
    model: &ServiceModel,
    field: &DemandField,
    config: &Configuration,
    cov: &Covering,
) -> f64 {
    multitask_cost(env, model, field, config, cov).total
}

/// Lowest service cost for `task` at `v` over all robots, with the robot
/// attaining it (lowest index on ties).
#[inline]
pub(crate) fn best_robot(
    env: &Environment,
    model: &ServiceModel,
    config: &Configuration,
    task: usize,
    v: Vertex,
) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &eta) in config.positions().iter().enumerate() {
        let c = model.cost(i, task, env.dist(eta, v));
        if c < best.1 {
            best = (i, c);
        }
    }
    best
}

/// `ℋ_inf(η, Φ) = Σ_j Σ_v min_i f_i^j(d_G(η_i, v)) φ^j(v)`.
pub fn h_inf(
    env: &Environment,
    model: &ServiceModel,
    field: &DemandField,
    config: &Configuration,
) -> f64 {
    let mut total = 0.0;
    for j in 0..model.task_count() {
        for v in 0..env.vertex_count() {
            let phi = field.get(v, j);
            if phi != 0.0 {
                total += best_robot(env, model, config, j, v).1 * phi;
            }
        }
    }
    total
}

/// Per-vertex weights `Σ_j a_ij φ^j(v) [v ∈ P_i^j]` of robot `i`'s center
/// objective, which then reads `Σ_v shape(d(c, v)) · w(v)`.
fn center_weights(
    model: &ServiceModel,
    field: &DemandField,
    cov: &Covering,
    robot: usize,
) -> Vec<(Vertex, f64)> {
    let mut weights: Vec<(Vertex, f64)> = Vec::new();
    for j in 0..model.task_count() {
        let a = model.coefficient(robot, j);
        weights.extend(cov.set(j, robot).iter().map(|&v| (v, a * field.get(v, j))));
    }
    weights.sort_unstable_by_key(|&(v, _)| v);
    let mut merged: Vec<(Vertex, f64)> = Vec::with_capacity(weights.len());
    for (v, w) in weights {
        match merged.last_mut() {
            Some(last) if last.0 == v => last.1 += w,
            _ => merged.push((v, w)),
        }
    }
    merged
}

/// Objective of robot `robot` placed at `candidate` for its assigned sets:
/// `Σ_j Σ_{v∈P_i^j} f_i^j(d_G(c, v)) φ^j(v)`.
pub fn center_objective(
    env: &Environment,
    model: &ServiceModel,
    field: &DemandField,
    cov: &Covering,
    robot: usize,
    candidate: Vertex,
) -> f64 {
    let row = env.dist_row(candidate);
    center_weights(model, field, cov, robot)
        .iter()
        .map(|&(v, w)| model.shape(row[v]) * w)
        .sum()
}

/// Index of the lowest entry, treating values within [`TIE_RTOL`] of the
/// minimum as tied and preferring the lowest index among them.
pub(crate) fn tie_aware_argmin(values: &[f64]) -> (usize, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let limit = min + TIE_RTOL * min.abs();
    let idx = values.iter().position(|&x| x <= limit).unwrap_or(0);
    (idx, min)
}

/// Objective of every candidate center for one robot.
fn center_objectives(
    env: &Environment,
    model: &ServiceModel,
    weights: &[(Vertex, f64)],
) -> Vec<f64> {
    (0..env.vertex_count())
        .map(|c| {
            let row = env.dist_row(c);
            weights.iter().map(|&(v, w)| model.shape(row[v]) * w).sum()
        })
        .collect()
}

/// Multitask centers of a covering.
#[derive(Debug, Clone, PartialEq)]
pub struct Centers {
    pub config: Configuration,
    /// Robots that own no vertex in any task; they keep their current
    /// position.
    pub idle: Vec<usize>,
}

/// Multitask centers `c(𝒫)`: for each robot, the vertex minimizing its
/// summed service cost over its assigned sets.
///
/// Every vertex is evaluated exactly. Robots owning no vertices keep their
/// position in `current` and are reported in [`Centers::idle`].
pub fn multitask_centers(
    env: &Environment,
    model: &ServiceModel,
    field: &DemandField,
    cov: &Covering,
    current: &Configuration,
) -> Centers {
    let mut positions = Vec::with_capacity(model.robot_count());
    let mut idle = Vec::new();
    for i in 0..model.robot_count() {
        let owns_any = (0..model.task_count()).any(|j| !cov.set(j, i).is_empty());
        if !owns_any {
            idle.push(i);
            positions.push(current[i]);
            continue;
        }
        let weights = center_weights(model, field, cov, i);
        let objectives = center_objectives(env, model, &weights);
        positions.push(tie_aware_argmin(&objectives).0);
    }
    Centers {
        config: Configuration(positions),
        idle,
    }
}

/// Multitask equitable partitions `𝒱(η)`: vertex `v` of task `j` goes to
/// the robot with the lowest `f_i^j(d_G(η_i, v))`, lowest index on ties.
///
/// Demand plays no role in the assignment; zero-demand vertices are still
/// owned by exactly one robot.
pub fn equitable_partition(
    env: &Environment,
    model: &ServiceModel,
    config: &Configuration,
) -> Covering {
    let mut sets = vec![vec![Vec::new(); model.robot_count()]; model.task_count()];
    for (j, task_sets) in sets.iter_mut().enumerate() {
        for v in 0..env.vertex_count() {
            let (i, _) = best_robot(env, model, config, j, v);
            task_sets[i].push(v);
        }
    }
    Covering::from_sets(sets)
}

/// One failed condition of the centroidal-equitable predicate.
#[derive(Debug, Clone, PartialEq)]
pub enum McepViolation {
    /// Task `task` does not cover `vertex` at all.
    Uncovered { task: usize, vertex: Vertex },
    /// `vertex` is owned by more than one robot for `task`.
    Overlap { task: usize, vertex: Vertex },
    /// Robot is not at a minimizer of its center objective.
    NotCenter {
        robot: usize,
        position: Vertex,
        best: Vertex,
        gap: f64,
    },
    /// `robot` owns `vertex` for `task` but some other robot serves it
    /// strictly cheaper.
    NotEquitable {
        task: usize,
        vertex: Vertex,
        robot: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct McepReport {
    pub violations: Vec<McepViolation>,
}

impl McepReport {
    pub fn is_mcep(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks whether `(config, cov)` is a multitask centroidal equitable
/// partition:
/// (a) every task is an exact partition,
/// (b) each robot attains the minimum of its center objective,
/// (c) every owner attains the per-vertex minimum service cost.
pub fn is_mcep(
    env: &Environment,
    model: &ServiceModel,
    field: &DemandField,
    config: &Configuration,
    cov: &Covering,
) -> McepReport {
    let n = env.vertex_count();
    let mut violations = Vec::new();
    for j in 0..cov.task_count() {
        for (v, &count) in cov.owner_counts(j, n).iter().enumerate() {
            match count {
                0 => violations.push(McepViolation::Uncovered { task: j, vertex: v }),
                1 => {}
                _ => violations.push(McepViolation::Overlap { task: j, vertex: v }),
            }
        }
    }
    for i in 0..model.robot_count() {
        let weights = center_weights(model, field, cov, i);
        if weights.is_empty() {
            continue;
        }
        let objectives = center_objectives(env, model, &weights);
        let (best, min) = tie_aware_argmin(&objectives);
        let here = objectives[config[i]];
        if here > min + TIE_RTOL * min.abs() {
            violations.push(McepViolation::NotCenter {
                robot: i,
                position: config[i],
                best,
                gap: here - min,
            });
        }
    }
    for j in 0..model.task_count() {
        for i in 0..model.robot_count() {
            for &v in cov.set(j, i) {
                let (_, min) = best_robot(env, model, config, j, v);
                if model.cost(i, j, env.dist(config[i], v)) > min {
                    violations.push(McepViolation::NotEquitable {
                        task: j,
                        vertex: v,
                        robot: i,
                    });
                }
            }
        }
    }
    McepReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    fn path(n: usize) -> Environment {
        let edges = (0..n - 1)
            .map(|i| Edge {
                u: i,
                v: i + 1,
                weight: 1.0,
            })
            .collect();
        Environment::new(n, edges).unwrap()
    }

    fn uniform(n: usize, m: usize) -> DemandField {
        DemandField::from_flat(n, m, vec![1.0; n * m]).unwrap()
    }

    #[test]
    fn path_cost_matches_hand_evaluation() {
        let env = path(3);
        let model = ServiceModel::homogeneous(1, 1);
        let cov = Covering::full(3, 1, 1);
        let cost = multitask_cost(&env, &model, &uniform(3, 1), &Configuration(vec![1]), &cov);
        // |1-0| + |1-1| + |1-2|
        assert_eq!(cost.total, 2.0);
        assert_eq!(cost.per_robot, vec![2.0]);
        let zero = DemandField::zeros(3, 1);
        assert_eq!(
            coverage_cost(&env, &model, &zero, &Configuration(vec![1]), &cov),
            0.0
        );
        let doubled = uniform(3, 1).scaled(2.0);
        assert_eq!(
            coverage_cost(&env, &model, &doubled, &Configuration(vec![0]), &cov),
            6.0
        );
    }

    #[test]
    fn h_inf_single_robot_equals_full_cost() {
        let env = path(4);
        let model = ServiceModel::linear(&[vec![1.5, 0.5]]).unwrap();
        let field = DemandField::from_rows(&[
            vec![0.1, 0.4],
            vec![0.2, 0.3],
            vec![0.3, 0.2],
            vec![0.4, 0.1],
        ])
        .unwrap();
        let config = Configuration(vec![2]);
        let full = coverage_cost(&env, &model, &field, &config, &Covering::full(4, 1, 2));
        assert!((h_inf(&env, &model, &field, &config) - full).abs() < 1e-15);
        assert_eq!(h_inf(&env, &model, &DemandField::zeros(4, 2), &config), 0.0);
    }

    #[test]
    fn center_of_uniform_path_is_middle() {
        let env = path(3);
        let model = ServiceModel::homogeneous(1, 1);
        let centers = multitask_centers(
            &env,
            &model,
            &uniform(3, 1),
            &Covering::full(3, 1, 1),
            &Configuration(vec![0]),
        );
        assert_eq!(centers.config, Configuration(vec![1]));
        assert!(centers.idle.is_empty());
    }

    #[test]
    fn center_sits_on_demand_atom() {
        let env = Environment::grid(3, 4, 1.0).unwrap();
        let model = ServiceModel::linear(&[vec![2.0], vec![1.0]]).unwrap();
        let mut phi = vec![0.0; 12];
        phi[7] = 1.0;
        let field = DemandField::from_flat(12, 1, phi).unwrap();
        let cov = Covering::from_sets(vec![vec![(0..12).collect(), vec![0, 1]]]);
        let c = multitask_centers(&env, &model, &field, &cov, &Configuration(vec![0, 0]));
        assert_eq!(c.config[0], 7);
    }

    #[test]
    fn duplicated_task_keeps_center() {
        let env = Environment::grid(3, 3, 1.0).unwrap();
        let rows: Vec<Vec<f64>> = (0..9).map(|v| vec![(v * v % 7) as f64 + 0.5]).collect();
        let single = DemandField::from_rows(&rows).unwrap();
        let double =
            DemandField::from_rows(&rows.iter().map(|r| vec![r[0], r[0]]).collect::<Vec<_>>())
                .unwrap();
        let c1 = multitask_centers(
            &env,
            &ServiceModel::homogeneous(1, 1),
            &single,
            &Covering::full(9, 1, 1),
            &Configuration(vec![0]),
        );
        let c2 = multitask_centers(
            &env,
            &ServiceModel::homogeneous(1, 2),
            &double,
            &Covering::full(9, 1, 2),
            &Configuration(vec![0]),
        );
        assert_eq!(c1.config, c2.config);
    }

    #[test]
    fn idle_robot_keeps_position() {
        let env = path(3);
        let model = ServiceModel::homogeneous(2, 1);
        let cov = Covering::from_sets(vec![vec![vec![0, 1, 2], vec![]]]);
        let c = multitask_centers(
            &env,
            &model,
            &uniform(3, 1),
            &cov,
            &Configuration(vec![0, 2]),
        );
        assert_eq!(c.config, Configuration(vec![1, 2]));
        assert_eq!(c.idle, vec![1]);
    }

    #[test]
    fn equitable_partition_cases() {
        let env = path(5);
        let single = equitable_partition(
            &env,
            &ServiceModel::homogeneous(1, 2),
            &Configuration(vec![3]),
        );
        assert_eq!(single.set(0, 0), &[0, 1, 2, 3, 4]);
        assert_eq!(single.set(1, 0), &[0, 1, 2, 3, 4]);

        let same = equitable_partition(
            &env,
            &ServiceModel::homogeneous(2, 1),
            &Configuration(vec![2, 2]),
        );
        assert_eq!(same.set(0, 0), &[0, 1, 2, 3, 4]);
        assert!(same.set(0, 1).is_empty());

        let split = equitable_partition(
            &env,
            &ServiceModel::homogeneous(2, 1),
            &Configuration(vec![0, 4]),
        );
        assert_eq!(split.set(0, 0), &[0, 1, 2]);
        assert_eq!(split.set(0, 1), &[3, 4]);
    }

    #[test]
    fn mcep_predicate() {
        let env = path(3);
        let model = ServiceModel::homogeneous(1, 1);
        let report = is_mcep(
            &env,
            &model,
            &uniform(3, 1),
            &Configuration(vec![1]),
            &Covering::full(3, 1, 1),
        );
        assert!(report.is_mcep(), "{report:?}");
        let off = is_mcep(
            &env,
            &model,
            &uniform(3, 1),
            &Configuration(vec![0]),
            &Covering::full(3, 1, 1),
        );
        assert!(matches!(
            off.violations[..],
            [McepViolation::NotCenter {
                robot: 0,
                best: 1,
                ..
            }]
        ));

        // two robots on a 5-path at the centers of {0,1} and {2,3,4}
        let env = path(5);
        let model = ServiceModel::homogeneous(2, 1);
        let field = uniform(5, 1);
        let config = Configuration(vec![0, 3]);
        let cov = equitable_partition(&env, &model, &config);
        assert!(is_mcep(&env, &model, &field, &config, &cov).is_mcep());
        // move vertex 4 from robot 1 to robot 0
        let bad = Covering::from_sets(vec![vec![vec![0, 1, 4], vec![2, 3]]]);
        let report = is_mcep(&env, &model, &field, &config, &bad);
        assert!(report.violations.contains(&McepViolation::NotEquitable {
            task: 0,
            vertex: 4,
            robot: 0
        }));
    }
}
