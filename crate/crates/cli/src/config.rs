//! Experiment configuration, read from JSON or TOML.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Configuration problem, tagged with the offending field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSpec,
    pub robots: RobotSpec,
    #[serde(default)]
    pub demand: DemandSpec,
    #[serde(default)]
    pub prior: PriorSpec,
    pub algorithm: AlgorithmSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    pub horizon: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Either a grid shorthand or an explicit weighted edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvironmentSpec {
    Grid {
        grid: [usize; 2],
        #[serde(default = "one")]
        weight: f64,
    },
    Explicit {
        vertices: usize,
        edges: Vec<(usize, usize, f64)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coords: Option<Vec<[f64; 2]>>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    pub count: usize,
    pub tasks: usize,
    #[serde(default)]
    pub coefficients: CoefficientSpec,
    /// Exponent `p` of `f(d) = a d^p`.
    #[serde(default = "one")]
    pub exponent: f64,
    /// Explicit starting vertices; random distinct vertices otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<usize>>,
}

/// How the service coefficients `a_ij` are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    /// `a_i1 = max(0.25, 1 + 0.2 ξ_i)`; for a second task
    /// `a_i2 = max(0.25, 1.5 + 0.25 ξ_i)` for firefighters and
    /// `max(0.25, 2.3 + 0.25 ξ_i)` for everyone else.
    Firefighting {
        /// Robot indices; when absent, robots 0, 2 and 5 among those that
        /// exist.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        firefighters: Option<Vec<usize>>,
    },
    /// All coefficients equal to one.
    Homogeneous,
    /// `matrix[i][j] = a_ij`, used verbatim.
    Matrix { matrix: Vec<Vec<f64>> },
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        CoefficientSpec::Firefighting { firefighters: None }
    }
}

const DEFAULT_FIREFIGHTERS: [usize; 3] = [0, 2, 5];

impl CoefficientSpec {
    /// Firefighter indices for a team of `robots`; empty for other rules.
    pub fn firefighters(&self, robots: usize) -> Vec<usize> {
        match self {
            CoefficientSpec::Firefighting {
                firefighters: Some(f),
            } => f.clone(),
            CoefficientSpec::Firefighting { firefighters: None } => DEFAULT_FIREFIGHTERS
                .iter()
                .copied()
                .filter(|&i| i < robots)
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Demand as per-task Gaussian mixtures. Positions are fractions of the
/// grid extent, `[row, col]` in `[0, 1]`; spreads are fractions of the
/// larger extent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<Vec<Vec<KernelSpec>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub at: [f64; 2],
    #[serde(default = "one")]
    pub amplitude: f64,
    pub spread: f64,
}

impl KernelSpec {
    const fn new(at: [f64; 2], amplitude: f64, spread: f64) -> Self {
        Self {
            at,
            amplitude,
            spread,
        }
    }
}

/// Default kernels: task 1 (monitoring) and task 2 (fire suppression).
/// Further tasks reuse these alternately.
pub const DEFAULT_KERNELS: [[KernelSpec; 3]; 2] = [
    [
        KernelSpec::new([0.25, 0.25], 1.0, 0.12),
        KernelSpec::new([0.70, 0.35], 0.8, 0.10),
        KernelSpec::new([0.40, 0.80], 0.6, 0.14),
    ],
    [
        KernelSpec::new([0.30, 0.35], 1.0, 0.08),
        KernelSpec::new([0.80, 0.75], 0.9, 0.10),
        KernelSpec::new([0.15, 0.80], 0.7, 0.08),
    ],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    /// `σ_v²`
    #[serde(default = "one")]
    pub variance: f64,
    /// Squared-exponential length scale on coordinates scaled to `[0, 1]`.
    #[serde(default = "default_length_scale")]
    pub length_scale: f64,
    /// Measurement noise standard deviation `σ`.
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Uniform inter-task correlation; ignored when `task_covariance` is set.
    #[serde(default = "default_correlation")]
    pub correlation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_covariance: Option<Vec<Vec<f64>>>,
    /// Prior mean, vertex-major; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            variance: 1.0,
            length_scale: default_length_scale(),
            noise: default_noise(),
            correlation: default_correlation(),
            task_covariance: None,
            mean: None,
        }
    }
}

fn default_length_scale() -> f64 {
    0.18
}

fn default_noise() -> f64 {
    0.2
}

fn default_correlation() -> f64 {
    0.65
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    Dsmlc {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau: Option<f64>,
        #[serde(default)]
        theorem_matched: bool,
        /// Cover with the true demand instead of the estimate.
        #[serde(default)]
        oracle: bool,
    },
    Rmlc {
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
    /// Federated coverage with the demand known.
    Fmc,
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmSpec::Dsmlc { .. } => "dsmlc",
            AlgorithmSpec::Rmlc { .. } => "rmlc",
            AlgorithmSpec::Fmc => "fmc",
        }
    }

    /// Default parameters for a named algorithm.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "dsmlc" => Some(AlgorithmSpec::Dsmlc {
                alpha: default_alpha(),
                beta: default_beta(),
                tau: None,
                theorem_matched: false,
                oracle: false,
            }),
            "rmlc" => Some(AlgorithmSpec::Rmlc {
                kappa: default_kappa(),
            }),
            "fmc" => Some(AlgorithmSpec::Fmc),
            _ => None,
        }
    }
}

fn default_alpha() -> f64 {
    0.5
}

fn default_beta() -> f64 {
    2.0
}

fn default_kappa() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    #[default]
    RoundRobin,
    /// Gaps uniform in `[lower, upper]`; the clock is seeded from the run
    /// seed.
    BoundedRandom { lower: f64, upper: f64 },
}

impl ExperimentConfig {
    /// The default firefighting scenario: 21×21 grid, 9 robots, 2 tasks.
    pub fn firefighting(algorithm: AlgorithmSpec, horizon: usize) -> Self {
        Self {
            environment: EnvironmentSpec::Grid {
                grid: [21, 21],
                weight: 1.0,
            },
            robots: RobotSpec {
                count: 9,
                tasks: 2,
                coefficients: CoefficientSpec::default(),
                exponent: 1.0,
                initial: None,
            },
            demand: DemandSpec::default(),
            prior: PriorSpec::default(),
            algorithm,
            schedule: ScheduleSpec::RoundRobin,
            horizon,
            seeds: default_seeds(),
            output: default_output(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| ConfigError::new("<json>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| ConfigError::new("<toml>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `.toml` files as TOML and anything else as JSON.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("<file>", format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "toml") {
            Self::from_toml(&text)
        } else {
            Self::from_json(&text)
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |field: &str, msg: String| Err(ConfigError::new(field, msg));
        let vertices = match &self.environment {
            EnvironmentSpec::Grid { grid, weight } => {
                if grid[0] == 0 || grid[1] == 0 {
                    return err(
                        "environment.grid",
                        format!("needs positive dimensions, got {grid:?}"),
                    );
                }
                if !(*weight > 0.0 && weight.is_finite()) {
                    return err(
                        "environment.weight",
                        format!("must be positive, got {weight}"),
                    );
                }
                grid[0] * grid[1]
            }
            EnvironmentSpec::Explicit {
                vertices, coords, ..
            } => {
                if *vertices == 0 {
                    return err("environment.vertices", "must be positive".into());
                }
                if coords.as_ref().is_some_and(|c| c.len() != *vertices) {
                    return err("environment.coords", format!("needs {vertices} entries"));
                }
                *vertices
            }
        };

        let r = &self.robots;
        if r.count == 0 {
            return err("robots.count", "must be positive".into());
        }
        if r.tasks == 0 {
            return err("robots.tasks", "must be positive".into());
        }
        if r.count > vertices {
            return err(
                "robots.count",
                format!("{} robots do not fit on {vertices} vertices", r.count),
            );
        }
        if !(r.exponent > 0.0 && r.exponent.is_finite()) {
            return err(
                "robots.exponent",
                format!("must be positive, got {}", r.exponent),
            );
        }
        match &r.coefficients {
            CoefficientSpec::Firefighting { firefighters } => {
                if r.tasks > 2 {
                    return err(
                        "robots.coefficients",
                        "the firefighting rule covers at most 2 tasks".into(),
                    );
                }
                // the role only shapes the second task's coefficient
                let listed = firefighters.as_deref().unwrap_or_default();
                if let Some(&bad) = listed.iter().find(|&&i| i >= r.count && r.tasks == 2) {
                    return err(
                        "robots.coefficients.firefighters",
                        format!("robot {bad} does not exist"),
                    );
                }
            }
            CoefficientSpec::Homogeneous => {}
            CoefficientSpec::Matrix { matrix } => {
                if matrix.len() != r.count || matrix.iter().any(|row| row.len() != r.tasks) {
                    return err(
                        "robots.coefficients.matrix",
                        format!("must be {}×{}", r.count, r.tasks),
                    );
                }
                if matrix
                    .iter()
                    .flatten()
                    .any(|a| !(*a > 0.0 && a.is_finite()))
                {
                    return err(
                        "robots.coefficients.matrix",
                        "entries must be positive".into(),
                    );
                }
            }
        }
        if let Some(init) = &r.initial {
            if init.len() != r.count {
                return err("robots.initial", format!("needs {} entries", r.count));
            }
            if let Some(&bad) = init.iter().find(|&&v| v >= vertices) {
                return err("robots.initial", format!("vertex {bad} out of range"));
            }
        }

        if let Some(kernels) = &self.demand.kernels {
            if kernels.len() != r.tasks {
                return err(
                    "demand.kernels",
                    format!("needs one list per task ({})", r.tasks),
                );
            }
            for (j, list) in kernels.iter().enumerate() {
                if list.is_empty() {
                    return err(
                        &format!("demand.kernels[{j}]"),
                        "needs at least one kernel".into(),
                    );
                }
                for (k, ker) in list.iter().enumerate() {
                    let field = format!("demand.kernels[{j}][{k}]");
                    if ker.at.iter().any(|x| !(0.0..=1.0).contains(x)) {
                        return err(&field, format!("position {:?} outside [0, 1]", ker.at));
                    }
                    if !(ker.spread > 0.0) || !(ker.amplitude >= 0.0) {
                        return err(
                            &field,
                            "needs positive spread and nonnegative amplitude".into(),
                        );
                    }
                }
            }
        }

        let p = &self.prior;
        for (name, value) in [
            ("prior.variance", p.variance),
            ("prior.length_scale", p.length_scale),
            ("prior.noise", p.noise),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return err(name, format!("must be positive, got {value}"));
            }
        }
        if !(-1.0..=1.0).contains(&p.correlation) {
            return err(
                "prior.correlation",
                format!("must be in [-1, 1], got {}", p.correlation),
            );
        }
        if let Some(k) = &p.task_covariance {
            if k.len() != r.tasks || k.iter().any(|row| row.len() != r.tasks) {
                return err(
                    "prior.task_covariance",
                    format!("must be {}×{}", r.tasks, r.tasks),
                );
            }
        }
        if let Some(mean) = &p.mean {
            if mean.len() != vertices * r.tasks {
                return err(
                    "prior.mean",
                    format!("needs {} entries", vertices * r.tasks),
                );
            }
        }

        match self.algorithm {
            AlgorithmSpec::Dsmlc { alpha, beta, .. } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return err("algorithm.alpha", format!("must be in (0, 1), got {alpha}"));
                }
                if !(beta > 1.0 && beta.is_finite()) {
                    return err("algorithm.beta", format!("must exceed 1, got {beta}"));
                }
            }
            AlgorithmSpec::Rmlc { kappa } => {
                if !(kappa > 0.0) {
                    return err("algorithm.kappa", format!("must be positive, got {kappa}"));
                }
            }
            AlgorithmSpec::Fmc => {}
        }
        if let ScheduleSpec::BoundedRandom { lower, upper } = self.schedule {
            if !(lower > 0.0 && upper > lower && upper.is_finite()) {
                return err(
                    "schedule",
                    format!("need 0 < lower < upper, got [{lower}, {upper}]"),
                );
            }
        }
        if self.horizon == 0 {
            return err("horizon", "must be positive".into());
        }
        if self.seeds.is_empty() {
            return err("seeds", "needs at least one seed".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::firefighting(AlgorithmSpec::from_name("dsmlc").unwrap(), 500);
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig::firefighting(AlgorithmSpec::Rmlc { kappa: 0.3 }, 50);
        cfg.robots.coefficients = CoefficientSpec::Matrix {
            matrix: vec![vec![1.0, 2.0]; 9],
        };
        cfg.schedule = ScheduleSpec::BoundedRandom {
            lower: 0.5,
            upper: 2.0,
        };
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn minimal_json_fills_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"environment": {"grid": [4, 5]},
                "robots": {"count": 2, "tasks": 1},
                "algorithm": {"name": "fmc"},
                "horizon": 10}"#,
        )
        .unwrap();
        assert_eq!(cfg.prior, PriorSpec::default());
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.schedule, ScheduleSpec::RoundRobin);
        assert_eq!(
            cfg.environment,
            EnvironmentSpec::Grid {
                grid: [4, 5],
                weight: 1.0
            }
        );
    }

    #[test]
    fn explicit_environment_parses() {
        let cfg = ExperimentConfig::from_json(
            r#"{"environment": {"vertices": 3, "edges": [[0, 1, 1.0], [1, 2, 2.5]]},
                "robots": {"count": 1, "tasks": 1, "coefficients": {"rule": "homogeneous"}},
                "algorithm": {"name": "rmlc"},
                "horizon": 5}"#,
        )
        .unwrap();
        assert!(matches!(
            cfg.environment,
            EnvironmentSpec::Explicit { vertices: 3, .. }
        ));
    }

    #[test]
    fn errors_name_the_field() {
        let mut cfg = ExperimentConfig::firefighting(AlgorithmSpec::Fmc, 10);
        cfg.prior.noise = 0.0;
        assert_eq!(cfg.validate().unwrap_err().field, "prior.noise");
        let mut cfg = ExperimentConfig::firefighting(
            AlgorithmSpec::Dsmlc {
                alpha: 1.5,
                beta: 2.0,
                tau: None,
                theorem_matched: false,
                oracle: false,
            },
            10,
        );
        assert_eq!(cfg.validate().unwrap_err().field, "algorithm.alpha");
        cfg.algorithm = AlgorithmSpec::Fmc;
        cfg.robots.coefficients = CoefficientSpec::Firefighting {
            firefighters: Some(vec![9]),
        };
        assert_eq!(
            cfg.validate().unwrap_err().field,
            "robots.coefficients.firefighters"
        );
        let bad = ExperimentConfig::from_json(
            r#"{"environment": {"grid": [2, 2]}, "robots": {"count": 1, "tasks": 1}, "algorithm": {"name": "nope"}, "horizon": 1}"#,
        );
        assert!(bad.is_err());
    }
}
