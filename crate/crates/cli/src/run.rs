//! Running experiments and writing their artifacts.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use mtcover::fmc::TrajectoryRecord;
use mtcover::{
    coverage_cost, fmc_step, instantaneous_regret, run_dsmlc, run_rmlc, CommSchedule, EpochConfig,
    EstimateSource, FmcState, Phase, RegretTrace, RmlcConfig, RunLog,
};
use serde::{Deserialize, Serialize};

use crate::config::{AlgorithmSpec, ConfigError, ExperimentConfig, ScheduleSpec};
use crate::formats;
use crate::plot::{self, LinePlot, Palette, PlotError, Series};
use crate::scenario::{build_scenario, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// Process exit status: 1 for configuration problems, 2 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<mtcover::Error> for CliError {
    fn from(e: mtcover::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<PlotError> for CliError {
    fn from(e: PlotError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Per-run summary; the same keys for every algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: String,
    pub seed: u64,
    #[serde(rename = "T")]
    pub t: usize,
    pub final_cumulative_regret: f64,
    /// Trailing-half log-log slope of cumulative regret, when defined.
    pub slope: Option<f64>,
    /// Step after which the coverage state stopped changing, when it did.
    pub converged_step: Option<usize>,
    pub final_cost_true: f64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: Summary,
}

pub fn schedule_for(spec: &ScheduleSpec, seed: u64) -> CommSchedule {
    match *spec {
        ScheduleSpec::RoundRobin => CommSchedule::RoundRobin,
        ScheduleSpec::BoundedRandom { lower, upper } => {
            CommSchedule::BoundedRandom { lower, upper, seed }
        }
    }
}

/// Known-demand federated coverage until quiescence or the horizon.
pub struct FmcRun {
    pub records: Vec<TrajectoryRecord>,
    pub trace: RegretTrace,
    pub final_state: FmcState,
    pub converged_step: Option<usize>,
}

pub fn run_fmc(s: &Scenario, schedule: &CommSchedule, horizon: usize) -> Result<FmcRun, CliError> {
    let (env, model, truth) = (&s.env, &s.model, &s.truth);
    let robots = model.robot_count();
    let mut state = FmcState::from_config(env, model, s.initial.clone());
    let mut scheduler = schedule.scheduler(robots)?;
    let mut records = Vec::new();
    let mut trace = RegretTrace::new();
    let mut quiet = vec![false; robots];
    let mut last_change = 0;
    let mut converged_step = None;
    for k in 1..=horizon {
        let contact = scheduler.next().expect("schedulers are infinite");
        let report = fmc_step(&mut state, contact.robot, env, model, truth)?;
        records.push(TrajectoryRecord {
            step: k,
            robot: contact.robot,
            relocated: report.relocated,
            changed: report.changed(),
            lyapunov: report.lyapunov,
            total_cost: coverage_cost(env, model, truth, &state.config, &state.cov),
        });
        trace.accumulate(
            instantaneous_regret(env, model, truth, &state.config, &state.cov),
            Phase::Coverage,
        );
        if report.changed() {
            quiet.fill(false);
            last_change = k;
        } else {
            quiet[contact.robot] = true;
            if quiet.iter().all(|&q| q) {
                converged_step = Some(last_change);
                break;
            }
        }
    }
    Ok(FmcRun {
        records,
        trace,
        final_state: state,
        converged_step,
    })
}

/// Runs the configured learning algorithm on a built scenario.
pub fn run_learning(cfg: &ExperimentConfig, s: &Scenario, seed: u64) -> Result<RunLog, CliError> {
    let schedule = schedule_for(&cfg.schedule, seed);
    let log = match cfg.algorithm {
        AlgorithmSpec::Dsmlc {
            alpha,
            beta,
            tau,
            theorem_matched,
            oracle,
        } => {
            let ec = EpochConfig {
                alpha,
                beta,
                tau,
                horizon: cfg.horizon,
                theorem_matched,
            };
            let source = if oracle {
                EstimateSource::Oracle
            } else {
                EstimateSource::Posterior
            };
            run_dsmlc(&s.problem(), &ec, &schedule, seed, source)?
        }
        AlgorithmSpec::Rmlc { kappa } => {
            let rc = RmlcConfig {
                kappa,
                horizon: cfg.horizon,
            };
            run_rmlc(&s.problem(), &rc, &schedule, seed)?
        }
        AlgorithmSpec::Fmc => {
            return Err(CliError::Runtime("fmc is not a learning algorithm".into()))
        }
    };
    Ok(log)
}

/// First step of the final streak of quiescent coverage steps, if the run
/// ends quiescent.
fn quiescent_since(log: &RunLog) -> Option<usize> {
    let mut since = None;
    for s in log.steps.iter().rev() {
        if s.phase == Phase::Coverage && s.quiescent {
            since = Some(s.step);
        } else {
            break;
        }
    }
    since
}

fn timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Runs one seed and writes everything under `dir`.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<RunArtifacts, CliError> {
    let s = build_scenario(cfg, seed)?;
    std::fs::create_dir_all(dir)?;
    formats::write_coords(&dir.join("coords.csv"), &s.env)?;
    formats::write_demand(&dir.join("demand.csv"), &s.truth)?;
    let n = s.env.vertex_count();

    let summary = match cfg.algorithm {
        AlgorithmSpec::Fmc => {
            let run = run_fmc(&s, &schedule_for(&cfg.schedule, seed), cfg.horizon)?;
            formats::write_trajectory(&dir.join("trajectory.csv"), &run.records)?;
            formats::write_regret(&dir.join("regret.csv"), &run.trace)?;
            formats::write_partition(&dir.join("partition.csv"), &run.final_state.cov, n)?;
            Summary {
                algorithm: cfg.algorithm.name().into(),
                seed,
                t: run.trace.len(),
                final_cumulative_regret: run.trace.total(),
                slope: run.trace.loglog_slope(0.5).ok(),
                converged_step: run.converged_step,
                final_cost_true: run.records.last().map_or(0.0, |r| r.total_cost),
                timestamp: timestamp(),
            }
        }
        _ => {
            let log = run_learning(cfg, &s, seed)?;
            formats::write_regret(&dir.join("regret.csv"), &log.trace)?;
            formats::write_run_log(&dir.join("run_log.csv"), &log.steps)?;
            formats::write_posterior(&dir.join("posterior.csv"), &log.final_posterior)?;
            formats::write_partition(&dir.join("partition.csv"), &log.final_state.cov, n)?;
            Summary {
                algorithm: cfg.algorithm.name().into(),
                seed,
                t: log.trace.len(),
                final_cumulative_regret: log.trace.total(),
                slope: log.trace.loglog_slope(0.5).ok(),
                converged_step: quiescent_since(&log),
                final_cost_true: log.steps.last().map_or(0.0, |st| st.cost_true),
                timestamp: timestamp(),
            }
        }
    };

    let summary_path = dir.join("summary.json");
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )?;
    let mut files: Vec<PathBuf> = ["coords.csv", "demand.csv", "regret.csv", "partition.csv"]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    for extra in ["trajectory.csv", "run_log.csv", "posterior.csv"] {
        let p = dir.join(extra);
        if p.exists() {
            files.push(p);
        }
    }
    files.extend(render_dir(dir)?);
    files.push(summary_path);
    Ok(RunArtifacts {
        dir: dir.to_path_buf(),
        files,
        summary,
    })
}

/// Output directory of one seed.
pub fn seed_dir(cfg: &ExperimentConfig, seed: u64) -> PathBuf {
    cfg.output
        .join(cfg.algorithm.name())
        .join(format!("seed_{seed}"))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunArtifacts>, CliError> {
    cfg.validate()?;
    cfg.seeds
        .iter()
        .map(|&seed| run_seed(cfg, seed, &seed_dir(cfg, seed)))
        .collect()
}

/// Runs every seed in `seeds` and writes `sweep.csv` plus a plot of the
/// mean cumulative regret.
pub fn run_sweep(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<RunArtifacts>, CliError> {
    let mut cfg = cfg.clone();
    cfg.seeds = seeds.to_vec();
    let runs = run_experiment(&cfg)?;
    let root = cfg.output.join(cfg.algorithm.name());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(root.join("sweep.csv"))?;
    w.write_record([
        "seed",
        "T",
        "final_cumulative_regret",
        "slope",
        "converged_step",
    ])?;
    let mut mean: Vec<f64> = Vec::new();
    for run in &runs {
        let s = &run.summary;
        w.write_record([
            s.seed.to_string(),
            s.t.to_string(),
            s.final_cumulative_regret.to_string(),
            s.slope.map_or(String::new(), |x| x.to_string()),
            s.converged_step.map_or(String::new(), |x| x.to_string()),
        ])?;
        let cols = formats::read_columns(&run.dir.join("regret.csv"), &["cumulative"])
            .map_err(CliError::Runtime)?;
        if mean.len() < cols[0].len() {
            mean.resize(cols[0].len(), 0.0);
        }
        for (m, c) in mean.iter_mut().zip(&cols[0]) {
            *m += c / runs.len() as f64;
        }
    }
    w.flush()?;
    let xs: Vec<f64> = (1..=mean.len()).map(|t| t as f64).collect();
    let svg = plot::line_plot(
        &LinePlot {
            title: "mean cumulative regret",
            xlabel: "step",
            ylabel: "cumulative regret",
            loglog: true,
            guide_slope: Some(2.0 / 3.0),
        },
        &[Series::new(cfg.algorithm.name(), &xs, &mean)],
    )?;
    plot::write_svg(&root.join("sweep_regret_loglog.svg"), &svg)?;
    Ok(runs)
}

fn task_columns(path: &Path, value: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let cols =
        formats::read_columns(path, &["vertex", "task", value]).map_err(CliError::Runtime)?;
    let tasks = cols[1].iter().fold(0.0f64, |a, &b| a.max(b)) as usize + 1;
    let vertices = cols[0].iter().fold(0.0f64, |a, &b| a.max(b)) as usize + 1;
    let mut out = vec![vec![0.0; vertices]; tasks];
    for k in 0..cols[0].len() {
        out[cols[1][k] as usize][cols[0][k] as usize] = cols[2][k];
    }
    Ok(out)
}

/// Renders every plot that the CSVs in `dir` support. At least one trace
/// (`regret.csv` or `trajectory.csv`) must be present.
pub fn render_dir(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    let mut emit = |name: String, svg: String| -> Result<(), CliError> {
        let p = dir.join(name);
        plot::write_svg(&p, &svg)?;
        written.push(p);
        Ok(())
    };
    let regret = dir.join("regret.csv");
    let trajectory = dir.join("trajectory.csv");
    if !regret.exists() && !trajectory.exists() {
        return Err(CliError::Runtime(format!(
            "missing trace: {}",
            regret.display()
        )));
    }
    if regret.exists() {
        let c =
            formats::read_columns(&regret, &["step", "cumulative"]).map_err(CliError::Runtime)?;
        let series = [Series::new("cumulative regret", &c[0], &c[1])];
        let lin = LinePlot {
            title: "cumulative regret",
            xlabel: "step",
            ylabel: "cumulative regret",
            loglog: false,
            guide_slope: None,
        };
        emit("regret.svg".into(), plot::line_plot(&lin, &series)?)?;
        let log = LinePlot {
            title: "cumulative regret (log-log)",
            loglog: true,
            guide_slope: Some(2.0 / 3.0),
            ..lin
        };
        match plot::line_plot(&log, &series) {
            Ok(svg) => emit("regret_loglog.svg".into(), svg)?,
            // an all-zero trace has nothing to show on log axes
            Err(PlotError::Empty(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    if trajectory.exists() {
        let c = formats::read_columns(&trajectory, &["step", "total_cost", "U1"])
            .map_err(CliError::Runtime)?;
        let spec = LinePlot {
            title: "coverage cost under known demand",
            xlabel: "contact",
            ylabel: "cost",
            loglog: false,
            guide_slope: None,
        };
        emit(
            "cost.svg".into(),
            plot::line_plot(
                &spec,
                &[
                    Series::new("H", &c[0], &c[1]),
                    Series::new("H_inf", &c[0], &c[2]),
                ],
            )?,
        )?;
    }

    let coords_path = dir.join("coords.csv");
    if !coords_path.exists() {
        return Ok(written);
    }
    let xy = formats::read_columns(&coords_path, &["x", "y"]).map_err(CliError::Runtime)?;
    let coords: Vec<[f64; 2]> = xy[0].iter().zip(&xy[1]).map(|(&x, &y)| [x, y]).collect();
    if coords.is_empty() {
        return Ok(written);
    }
    let maps: [(&str, &str, &str, Palette); 4] = [
        ("demand.csv", "phi", "demand", Palette::Continuous),
        (
            "posterior.csv",
            "mean",
            "posterior_mean",
            Palette::Continuous,
        ),
        (
            "posterior.csv",
            "block_trace",
            "uncertainty",
            Palette::Continuous,
        ),
        ("partition.csv", "label", "partition", Palette::Categorical),
    ];
    for (file, column, stem, palette) in maps {
        let path = dir.join(file);
        if !path.exists() {
            continue;
        }
        let per_task = task_columns(&path, column)?;
        // block traces repeat across tasks
        let per_task = if column == "block_trace" {
            per_task[..1].to_vec()
        } else {
            per_task
        };
        for (j, values) in per_task.iter().enumerate() {
            let (name, title) = if column == "block_trace" {
                (format!("{stem}.svg"), "posterior block trace".to_string())
            } else {
                (
                    format!("{stem}_task{}.svg", j + 1),
                    format!("{stem} (task {})", j + 1),
                )
            };
            emit(name, plot::heatmap(&title, &coords, values, palette)?)?;
        }
    }
    Ok(written)
}
