//! Turns a configuration into the immutable inputs of a run.

use mtcover::mtgp::{se_kernel_matrix, uniform_task_covariance};
use mtcover::{
    Configuration, DemandField, Edge, Environment, Kernel, MtgpPrior, Problem, ServiceModel,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{
    CoefficientSpec, ConfigError, EnvironmentSpec, ExperimentConfig, KernelSpec, DEFAULT_KERNELS,
};

/// Everything a run reads but never changes.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub env: Environment,
    pub model: ServiceModel,
    pub truth: DemandField,
    pub prior: MtgpPrior,
    pub initial: Configuration,
}

impl Scenario {
    pub fn problem(&self) -> Problem<'_> {
        Problem {
            env: &self.env,
            model: &self.model,
            truth: &self.truth,
            prior: &self.prior,
            initial: &self.initial,
        }
    }
}

fn core_err(field: &str) -> impl Fn(mtcover::Error) -> ConfigError + '_ {
    move |e| ConfigError::new(field, e.to_string())
}

pub fn build_environment(spec: &EnvironmentSpec) -> Result<Environment, ConfigError> {
    match spec {
        EnvironmentSpec::Grid { grid, weight } => {
            Environment::grid(grid[0], grid[1], *weight).map_err(core_err("environment"))
        }
        EnvironmentSpec::Explicit {
            vertices,
            edges,
            coords,
        } => {
            let edges = edges
                .iter()
                .map(|&(u, v, weight)| Edge { u, v, weight })
                .collect();
            let env = Environment::new(*vertices, edges).map_err(core_err("environment"))?;
            match coords {
                Some(c) => env
                    .with_coords(c.clone())
                    .map_err(core_err("environment.coords")),
                None => Ok(env),
            }
        }
    }
}

/// Draws `ξ_i ~ N(0, 1)` per robot and applies the coefficient rule.
pub fn coefficients(
    spec: &CoefficientSpec,
    robots: usize,
    tasks: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    match spec {
        CoefficientSpec::Matrix { matrix } => matrix.clone(),
        CoefficientSpec::Homogeneous => vec![vec![1.0; tasks]; robots],
        CoefficientSpec::Firefighting { .. } => {
            let firefighters = spec.firefighters(robots);
            (0..robots)
                .map(|i| {
                    let xi: f64 = StandardNormal.sample(rng);
                    let mut row = vec![(1.0 + 0.2 * xi).max(0.25)];
                    if tasks > 1 {
                        let base = if firefighters.contains(&i) { 1.5 } else { 2.3 };
                        row.push((base + 0.25 * xi).max(0.25));
                    }
                    row
                })
                .collect()
        }
    }
}

/// Bounding box `(min, extent)` of the coordinates, extent being the larger
/// side (one for a single point).
fn bounds(coords: &[[f64; 2]]) -> ([f64; 2], f64) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for c in coords {
        for k in 0..2 {
            lo[k] = lo[k].min(c[k]);
            hi[k] = hi[k].max(c[k]);
        }
    }
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    (lo, if extent > 0.0 { extent } else { 1.0 })
}

/// Coordinates shifted and scaled into the unit square.
pub fn unit_coords(coords: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let (lo, extent) = bounds(coords);
    coords
        .iter()
        .map(|c| [(c[0] - lo[0]) / extent, (c[1] - lo[1]) / extent])
        .collect()
}

/// Vertex nearest to the fractional position, lowest index on ties.
fn nearest_vertex(unit: &[[f64; 2]], at: [f64; 2]) -> usize {
    let d2 = |c: &[f64; 2]| (c[0] - at[0]).powi(2) + (c[1] - at[1]).powi(2);
    let mut best = 0;
    for (v, c) in unit.iter().enumerate() {
        if d2(c) < d2(&unit[best]) {
            best = v;
        }
    }
    best
}

pub fn build_demand(cfg: &ExperimentConfig, env: &Environment) -> Result<DemandField, ConfigError> {
    let coords = env.coords().ok_or_else(|| {
        ConfigError::new(
            "environment.coords",
            "demand synthesis needs vertex coordinates",
        )
    })?;
    let (_, extent) = bounds(coords);
    let unit = unit_coords(coords);
    let tasks = cfg.robots.tasks;
    let specs: Vec<Vec<KernelSpec>> = match &cfg.demand.kernels {
        Some(k) => k.clone(),
        None => (0..tasks)
            .map(|j| DEFAULT_KERNELS[j % 2].to_vec())
            .collect(),
    };
    let kernels: Vec<Vec<Kernel>> = specs
        .iter()
        .map(|list| {
            list.iter()
                .map(|k| Kernel {
                    center: nearest_vertex(&unit, k.at),
                    amplitude: k.amplitude,
                    spread: k.spread * extent,
                })
                .collect()
        })
        .collect();
    mtcover::synthesize_gaussian_mixture(env, &kernels).map_err(core_err("demand"))
}

pub fn build_prior(cfg: &ExperimentConfig, env: &Environment) -> Result<MtgpPrior, ConfigError> {
    let p = &cfg.prior;
    let coords = env.coords().ok_or_else(|| {
        ConfigError::new(
            "environment.coords",
            "the spatial prior needs vertex coordinates",
        )
    })?;
    let spatial = se_kernel_matrix(&unit_coords(coords), p.variance, p.length_scale)
        .map_err(core_err("prior"))?;
    let tasks = cfg.robots.tasks;
    let task = match &p.task_covariance {
        Some(rows) => DMatrix::from_fn(tasks, tasks, |a, b| rows[a][b]),
        None => uniform_task_covariance(tasks, p.correlation),
    };
    let mean = p.mean.as_ref().map(|m| DVector::from_column_slice(m));
    MtgpPrior::new(spatial, task, mean, p.noise * p.noise).map_err(core_err("prior"))
}

/// Builds the scenario for one seed. The seed fixes the heterogeneity
/// draws and, unless given explicitly, the starting vertices.
pub fn build_scenario(cfg: &ExperimentConfig, seed: u64) -> Result<Scenario, ConfigError> {
    cfg.validate()?;
    let env = build_environment(&cfg.environment)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = &cfg.robots;
    let coeffs = coefficients(&r.coefficients, r.count, r.tasks, &mut rng);
    let model =
        ServiceModel::power(&coeffs, r.exponent).map_err(core_err("robots.coefficients"))?;
    let initial = match &r.initial {
        Some(v) => Configuration(v.clone()),
        None => Configuration(
            rand::seq::index::sample(&mut rng, env.vertex_count(), r.count).into_vec(),
        ),
    };
    let truth = build_demand(cfg, &env)?;
    let prior = build_prior(cfg, &env)?;
    Ok(Scenario {
        env,
        model,
        truth,
        prior,
        initial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AlgorithmSpec;

    #[test]
    fn default_firefighting_scenario() {
        let cfg = ExperimentConfig::firefighting(AlgorithmSpec::Fmc, 10);
        let s = build_scenario(&cfg, 4).unwrap();
        assert_eq!(s.env.vertex_count(), 441);
        assert_eq!(s.model.robot_count(), 9);
        assert_eq!(s.model.task_count(), 2);
        assert_eq!(s.prior.task_count(), 2);
        let mut init = s.initial.0.clone();
        init.sort_unstable();
        init.dedup();
        assert_eq!(init.len(), 9);
        for i in 0..9 {
            assert!(s.model.coefficient(i, 0) >= 0.25 && s.model.coefficient(i, 1) >= 0.25);
        }
        for j in 0..2 {
            let sum: f64 = s.truth.column(j).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        // same seed, same scenario
        assert_eq!(s, build_scenario(&cfg, 4).unwrap());
        assert_ne!(s.model, build_scenario(&cfg, 5).unwrap().model);
    }

    #[test]
    fn firefighting_rule_shares_xi() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = coefficients(
            &CoefficientSpec::Firefighting {
                firefighters: Some(vec![1]),
            },
            3,
            2,
            &mut rng,
        );
        for (i, row) in a.iter().enumerate() {
            let xi = (row[0] - 1.0) / 0.2;
            let base = if i == 1 { 1.5 } else { 2.3 };
            if row[0] > 0.25 && row[1] > 0.25 {
                assert!((row[1] - (base + 0.25 * xi)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn explicit_matrix_used_verbatim() {
        let mut cfg = ExperimentConfig::firefighting(AlgorithmSpec::Fmc, 10);
        cfg.environment = EnvironmentSpec::Grid {
            grid: [3, 3],
            weight: 1.0,
        };
        cfg.robots.count = 2;
        cfg.robots.initial = Some(vec![0, 8]);
        cfg.robots.coefficients = CoefficientSpec::Matrix {
            matrix: vec![vec![0.5, 3.0], vec![2.0, 1.0]],
        };
        let s = build_scenario(&cfg, 0).unwrap();
        assert_eq!(s.model.coefficient(0, 1), 3.0);
        assert_eq!(s.model.coefficient(1, 0), 2.0);
        assert_eq!(s.initial, Configuration(vec![0, 8]));
    }

    #[test]
    fn unit_coords_span_the_square() {
        let u = unit_coords(&[[0.0, 0.0], [0.0, 4.0], [2.0, 4.0]]);
        assert_eq!(u, vec![[0.0, 0.0], [0.0, 1.0], [0.5, 1.0]]);
        assert_eq!(nearest_vertex(&u, [0.4, 0.9]), 2);
    }
}
