//! Self-checks against independent oracles: exhaustive argmin search for
//! centers and equitable partitions, dense joint-Gaussian conditioning for
//! the posterior, greedy monotonicity, and exhaustive sweeps of the two
//! information-gain bounds.

use mtcover::bounds::{max_info_gain_bound_check, uncertainty_reduction_bound_check};
use mtcover::mtgp::se_kernel_matrix;
use mtcover::{
    equitable_partition, multitask_centers, multitask_cost, Configuration, Covering, DemandField,
    Edge, Environment, MtgpPosterior, MtgpPrior, ServiceModel,
};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Outcome of one suite: how many cases ran and what went wrong.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.cases > 0
    }
}

/// Relative closeness with an absolute floor.
fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// A small coverage instance with an arbitrary covering.
#[derive(Debug, Clone)]
pub struct SmallInstance {
    pub env: Environment,
    pub edges: Vec<Edge>,
    pub model: ServiceModel,
    pub field: DemandField,
    pub config: Configuration,
    pub cov: Covering,
}

/// Random connected graph on `2..=max_vertices` vertices: a path backbone
/// plus random chords, weights in `[0.5, 2]`. Demand is uniform with some
/// exact zeros, exponent 1 or 2, and each (vertex, task) goes to a random
/// subset of robots.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    max_vertices: usize,
    robots: usize,
    max_tasks: usize,
) -> SmallInstance {
    let n = rng.random_range(2..=max_vertices);
    let tasks = rng.random_range(1..=max_tasks);
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push(Edge {
            u: v - 1,
            v,
            weight: rng.random_range(0.5..=2.0),
        });
    }
    for u in 0..n {
        for v in u + 2..n {
            if rng.random_bool(0.3) {
                edges.push(Edge {
                    u,
                    v,
                    weight: rng.random_range(0.5..=2.0),
                });
            }
        }
    }
    let env = Environment::new(n, edges.clone()).expect("backbone keeps the graph connected");
    let coeffs: Vec<Vec<f64>> = (0..robots)
        .map(|_| (0..tasks).map(|_| rng.random_range(0.5..=2.0)).collect())
        .collect();
    let exponent = if rng.random_bool(0.5) { 1.0 } else { 2.0 };
    let model = ServiceModel::power(&coeffs, exponent).expect("positive coefficients");
    let values = (0..n * tasks)
        .map(|_| {
            if rng.random_bool(0.2) {
                0.0
            } else {
                rng.random_range(0.0..1.0)
            }
        })
        .collect();
    let field = DemandField::from_flat(n, tasks, values).expect("matching size");
    let config = Configuration((0..robots).map(|_| rng.random_range(0..n)).collect());
    let sets = (0..tasks)
        .map(|_| {
            let mut per_robot = vec![Vec::new(); robots];
            for v in 0..n {
                for set in per_robot.iter_mut() {
                    if rng.random_bool(0.5) {
                        set.push(v);
                    }
                }
            }
            per_robot
        })
        .collect();
    SmallInstance {
        env,
        edges,
        model,
        field,
        config,
        cov: Covering::from_sets(sets),
    }
}

/// All-pairs shortest paths by Floyd-Warshall, row-major.
pub fn floyd_warshall(n: usize, edges: &[Edge]) -> Vec<f64> {
    let mut d = vec![f64::INFINITY; n * n];
    for v in 0..n {
        d[v * n + v] = 0.0;
    }
    for e in edges {
        let w = d[e.u * n + e.v].min(e.weight);
        d[e.u * n + e.v] = w;
        d[e.v * n + e.u] = w;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i * n + k] + d[k * n + j];
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                }
            }
        }
    }
    d
}

fn shape(model: &ServiceModel, d: f64) -> f64 {
    if model.exponent() == 1.0 {
        d
    } else {
        d.powf(model.exponent())
    }
}

/// Lowest index whose value is within `1e-12` (relative) of the minimum.
fn argmin_tie_low(values: &[f64]) -> usize {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    values
        .iter()
        .position(|&x| x <= min + 1e-12 * min.abs())
        .unwrap_or(0)
}

/// Exhaustive center search: every candidate's objective, for robot `i`.
pub fn center_objectives_oracle(inst: &SmallInstance, dist: &[f64], robot: usize) -> Vec<f64> {
    let n = inst.env.vertex_count();
    (0..n)
        .map(|c| {
            (0..inst.model.task_count())
                .map(|j| {
                    inst.cov
                        .set(j, robot)
                        .iter()
                        .map(|&v| {
                            inst.model.coefficient(robot, j)
                                * shape(&inst.model, dist[c * n + v])
                                * inst.field.get(v, j)
                        })
                        .sum::<f64>()
                })
                .sum()
        })
        .collect()
}

/// Checks centers, the equitable partition and the total cost of one
/// instance against exhaustive search. Returns a description of the first
/// mismatch.
pub fn check_instance(inst: &SmallInstance) -> Result<(), String> {
    let n = inst.env.vertex_count();
    let dist = floyd_warshall(n, &inst.edges);
    for (k, (&a, &b)) in dist.iter().zip(inst.env.distance_matrix()).enumerate() {
        if !close(a, b, 1e-12) {
            return Err(format!("distance {}->{}: {b} vs oracle {a}", k / n, k % n));
        }
    }

    let centers = multitask_centers(&inst.env, &inst.model, &inst.field, &inst.cov, &inst.config);
    for i in 0..inst.model.robot_count() {
        let owns = (0..inst.model.task_count()).any(|j| !inst.cov.set(j, i).is_empty());
        let got = centers.config[i];
        if !owns {
            if got != inst.config[i] || !centers.idle.contains(&i) {
                return Err(format!("idle robot {i} moved to {got}"));
            }
            continue;
        }
        let obj = center_objectives_oracle(inst, &dist, i);
        let want = argmin_tie_low(&obj);
        // a different index is acceptable only for a genuine numerical tie
        if got != want && !close(obj[got], obj[want], 1e-9) {
            return Err(format!(
                "robot {i}: center {got} ({}) vs oracle {want} ({})",
                obj[got], obj[want]
            ));
        }
    }

    let part = equitable_partition(&inst.env, &inst.model, &inst.config);
    for j in 0..inst.model.task_count() {
        for v in 0..n {
            let costs: Vec<f64> = (0..inst.model.robot_count())
                .map(|i| {
                    inst.model.coefficient(i, j) * shape(&inst.model, dist[inst.config[i] * n + v])
                })
                .collect();
            let want = argmin_tie_low(&costs);
            let owners: Vec<usize> = (0..inst.model.robot_count())
                .filter(|&i| part.set(j, i).contains(&v))
                .collect();
            match owners.as_slice() {
                [got] if *got == want || close(costs[*got], costs[want], 1e-9) => {}
                _ => {
                    return Err(format!(
                        "task {j} vertex {v}: owners {owners:?} vs oracle {want}"
                    ))
                }
            }
        }
    }

    let mut total = 0.0;
    for j in 0..inst.model.task_count() {
        for i in 0..inst.model.robot_count() {
            for &v in inst.cov.set(j, i) {
                total += inst.model.coefficient(i, j)
                    * shape(&inst.model, dist[inst.config[i] * n + v])
                    * inst.field.get(v, j);
            }
        }
    }
    let got = multitask_cost(&inst.env, &inst.model, &inst.field, &inst.config, &inst.cov).total;
    if !close(got, total, 1e-12) {
        return Err(format!("cost {got} vs oracle {total}"));
    }
    Ok(())
}

/// Centers, partitions and costs on random instances with `|V| ≤ 6`,
/// two robots and up to two tasks.
pub fn centers_partition_suite(seed: u64, instances: usize) -> SuiteReport {
    let mut report = SuiteReport::new("centers and partitions vs exhaustive search");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..instances {
        let inst = random_instance(&mut rng, 6, 2, 2);
        report.cases += 1;
        if let Err(e) = check_instance(&inst) {
            report.failures.push(format!("instance {k}: {e}"));
        }
    }
    report
}

/// Random PSD matrix `A Aᵀ / m` with standard normal `A`.
pub fn random_psd(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a: DMatrix<f64> = DMatrix::from_fn(m, m, |_, _| StandardNormal.sample(rng));
    let k: DMatrix<f64> = &a * a.transpose() / m as f64;
    // exact symmetry
    DMatrix::from_fn(m, m, |r, c| 0.5 * (k[(r, c)] + k[(c, r)]))
}

/// Random SE prior on uniform points in the unit square, with random
/// variance, length scale, noise, mean and task covariance.
pub fn random_prior(rng: &mut ChaCha8Rng, vertices: usize, task: DMatrix<f64>) -> MtgpPrior {
    let coords: Vec<[f64; 2]> = (0..vertices)
        .map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
        .collect();
    let variance = rng.random_range(0.5..=1.5);
    let length = rng.random_range(0.2..=0.8);
    let spatial = se_kernel_matrix(&coords, variance, length).expect("valid kernel parameters");
    let m = task.nrows();
    let mean = DVector::from_fn(vertices * m, |_, _| rng.random_range(-0.5..0.5));
    let noise = rng.random_range(0.05..=0.5);
    MtgpPrior::new(spatial, task, Some(mean), noise).expect("PSD by construction")
}

/// Joint-Gaussian conditioning of the stacked prior on every observation at
/// once: `μ + Σ Hᵀ S⁻¹ (y − Hμ)` and `Σ − Σ Hᵀ S⁻¹ H Σ` with
/// `S = H Σ Hᵀ + σ² I`.
pub fn dense_posterior(
    prior: &MtgpPrior,
    obs: &[(usize, Vec<f64>)],
) -> (DVector<f64>, DMatrix<f64>) {
    let m = prior.task_count();
    let dim = prior.vertex_count() * m;
    let rows = obs.len() * m;
    let h = DMatrix::from_fn(rows, dim, |r, c| {
        let (v, _) = &obs[r / m];
        if c == v * m + r % m {
            1.0
        } else {
            0.0
        }
    });
    let y = DVector::from_iterator(rows, obs.iter().flat_map(|(_, o)| o.iter().copied()));
    let sigma = prior.covariance();
    let mu = prior.mean();
    let s = &h * &sigma * h.transpose() + DMatrix::identity(rows, rows) * prior.noise_var();
    let s_inv = s.try_inverse().expect("noise keeps S invertible");
    let gain = &sigma * h.transpose() * s_inv;
    let mean = mu + &gain * (y - &h * mu);
    let cov = &sigma - &gain * &h * &sigma;
    (mean, cov)
}

fn max_abs_diff<'a>(a: impl Iterator<Item = &'a f64>, b: impl Iterator<Item = &'a f64>) -> f64 {
    a.zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Incremental updates against dense conditioning on random instances with
/// `|V| ≤ 12`, `M ≤ 3` and random PSD task covariance; also checks that
/// the observation order does not matter.
pub fn posterior_suite(seed: u64, instances: usize) -> SuiteReport {
    let mut report = SuiteReport::new("posterior updates vs dense conditioning");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..instances {
        let n = rng.random_range(1..=12);
        let m = rng.random_range(1..=3);
        let task = random_psd(m, &mut rng);
        let prior = random_prior(&mut rng, n, task);
        let count = rng.random_range(1..=10);
        let mut obs: Vec<(usize, Vec<f64>)> = (0..count)
            .map(|_| {
                let v = rng.random_range(0..n);
                (v, (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
            })
            .collect();
        report.cases += 1;
        let (mean, cov) = dense_posterior(&prior, &obs);
        let mut failed = None;
        for pass in 0..2 {
            let mut post = MtgpPosterior::from_prior(&prior);
            for (v, o) in &obs {
                if let Err(e) = post.update(*v, o) {
                    failed = Some(format!("update failed: {e}"));
                }
            }
            let dm = max_abs_diff(post.mean().iter(), mean.iter());
            let dc = max_abs_diff(post.covariance().iter(), cov.iter());
            if dm > 1e-8 || dc > 1e-8 {
                failed = Some(format!(
                    "order {pass}: mean off by {dm:e}, covariance off by {dc:e}"
                ));
            }
            obs.shuffle(&mut rng);
        }
        if let Some(e) = failed {
            report
                .failures
                .push(format!("instance {k} (|V|={n}, M={m}): {e}"));
        }
    }
    report
}

/// Greedy runs on random priors: the determinant `|I + σ⁻² Σ̃_s|` at the
/// selected vertex never increases from one step to the next.
pub fn greedy_monotonicity_suite(seed: u64, runs: usize, length: usize) -> SuiteReport {
    let mut report = SuiteReport::new("greedy selection criterion is non-increasing");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..runs {
        let n = rng.random_range(4..=16);
        let m = rng.random_range(1..=3);
        let task = random_psd(m, &mut rng);
        let prior = random_prior(&mut rng, n, task);
        let mut post = MtgpPosterior::from_prior(&prior);
        let mut prev = f64::INFINITY;
        report.cases += 1;
        for step in 0..length {
            let s = post.greedy_select();
            let det = post.block_information_det(s);
            if det > prev * (1.0 + 1e-12) {
                report.failures.push(format!(
                    "run {k} step {step}: criterion rose from {prev} to {det}"
                ));
                break;
            }
            prev = det;
            if let Err(e) = post.condition_covariance(s) {
                report.failures.push(format!("run {k} step {step}: {e}"));
                break;
            }
        }
    }
    report
}

/// Task covariances for the bound sweeps: identity, rank one, then random.
pub fn bound_task_matrices(rng: &mut ChaCha8Rng, m: usize, count: usize) -> Vec<DMatrix<f64>> {
    let mut out = vec![DMatrix::identity(m, m)];
    let u = DVector::from_fn(m, |_, _| rng.random_range(0.3..1.2));
    out.push(&u * u.transpose());
    while out.len() < count {
        out.push(random_psd(m, rng));
    }
    out.truncate(count);
    out
}

/// Exhaustive multitask information gain against the eigenvalue-rescaled
/// single-task sum, `|V| = 5`, `n ≤ 4`, `M = 2`.
pub fn info_gain_bound_suite(seed: u64, matrices: usize) -> SuiteReport {
    let mut report = SuiteReport::new("multitask information gain bound");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (k, task) in bound_task_matrices(&mut rng, 2, matrices)
        .into_iter()
        .enumerate()
    {
        let prior = random_prior(&mut rng, 5, task);
        for n in 1..=4 {
            report.cases += 1;
            match max_info_gain_bound_check(&prior, n) {
                Ok(c) if c.holds && c.exhaustive => {}
                Ok(c) => report.failures.push(format!(
                    "matrix {k} n={n}: lhs {} rhs {} exhaustive {}",
                    c.lhs, c.rhs, c.exhaustive
                )),
                Err(e) => report.failures.push(format!("matrix {k} n={n}: {e}")),
            }
        }
    }
    report
}

/// Greedy max block trace against the information-gain bound for
/// `n = 1..=8` on random small priors.
pub fn uncertainty_bound_suite(seed: u64, priors: usize) -> SuiteReport {
    let mut report = SuiteReport::new("greedy uncertainty reduction bound");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..priors {
        let task = random_psd(2, &mut rng);
        let prior = random_prior(&mut rng, 5, task);
        for n in 1..=8 {
            report.cases += 1;
            match uncertainty_reduction_bound_check(&prior, n) {
                Ok(Some(c)) if c.holds => {}
                Ok(Some(c)) => report
                    .failures
                    .push(format!("prior {k} n={n}: lhs {} rhs {}", c.lhs, c.rhs)),
                Ok(None) => report
                    .failures
                    .push(format!("prior {k} n={n}: bound undefined")),
                Err(e) => report.failures.push(format!("prior {k} n={n}: {e}")),
            }
        }
    }
    report
}

/// Every suite at its default size.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    vec![
        centers_partition_suite(seed, 200),
        posterior_suite(seed, 50),
        greedy_monotonicity_suite(seed, 20, 50),
        info_gain_bound_suite(seed, 10),
        uncertainty_bound_suite(seed, 10),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floyd_warshall_on_a_triangle() {
        let edges = vec![
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
                u: 0,
                v: 2,
                weight: 3.0,
            },
        ];
        assert_eq!(floyd_warshall(3, &edges)[2], 2.0);
    }

    #[test]
    fn dense_posterior_scalar() {
        let prior = MtgpPrior::new(
            DMatrix::from_element(1, 1, 2.0),
            DMatrix::identity(1, 1),
            None,
            1.0,
        )
        .unwrap();
        let (mean, cov) = dense_posterior(&prior, &[(0, vec![3.0])]);
        assert!((mean[0] - 2.0).abs() < 1e-15);
        assert!((cov[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn small_suites_pass() {
        for r in [
            centers_partition_suite(3, 20),
            posterior_suite(3, 5),
            greedy_monotonicity_suite(3, 2, 10),
            info_gain_bound_suite(3, 2),
            uncertainty_bound_suite(3, 2),
        ] {
            assert!(r.passed(), "{}: {:?}", r.name, r.failures);
        }
    }
}
