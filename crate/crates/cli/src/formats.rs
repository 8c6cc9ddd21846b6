//! CSV artifacts. Comma separated, one header row, `\n` line endings and
//! shortest round-trip float formatting, so equal inputs give equal bytes.

use std::io::Write;
use std::path::Path;

use mtcover::fmc::TrajectoryRecord;
use mtcover::{Covering, DemandField, Environment, MtgpPosterior, RegretTrace, StepLog};

pub type CsvResult<T> = Result<T, csv::Error>;

fn writer(path: &Path) -> CsvResult<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> CsvResult<()> {
    w.flush()?;
    Ok(())
}

/// `vertex,x,y`
pub fn write_coords(path: &Path, env: &Environment) -> CsvResult<()> {
    let mut w = writer(path)?;
    w.write_record(["vertex", "x", "y"])?;
    if let Some(coords) = env.coords() {
        for (v, c) in coords.iter().enumerate() {
            w.write_record([v.to_string(), c[0].to_string(), c[1].to_string()])?;
        }
    }
    finish(w)
}

/// `vertex,task,phi`
pub fn write_demand(path: &Path, field: &DemandField) -> CsvResult<()> {
    let mut w = writer(path)?;
    w.write_record(["vertex", "task", "phi"])?;
    for v in 0..field.vertex_count() {
        for j in 0..field.task_count() {
            w.write_record([v.to_string(), j.to_string(), field.get(v, j).to_string()])?;
        }
    }
    finish(w)
}

/// `step,robot_contacted,relocated,U1,U2,U3,total_cost`
pub fn write_trajectory(path: &Path, records: &[TrajectoryRecord]) -> CsvResult<()> {
    let mut w = writer(path)?;
    w.write_record([
        "step",
        "robot_contacted",
        "relocated",
        "U1",
        "U2",
        "U3",
        "total_cost",
    ])?;
    for r in records {
        w.write_record([
            r.step.to_string(),
            r.robot.to_string(),
            u8::from(r.relocated).to_string(),
            r.lyapunov.u1.to_string(),
            r.lyapunov.u2.to_string(),
            r.lyapunov.u3.to_string(),
            r.total_cost.to_string(),
        ])?;
    }
    finish(w)
}

/// `step,phase,instantaneous,cumulative`
pub fn write_regret(path: &Path, trace: &RegretTrace) -> CsvResult<()> {
    let mut w = writer(path)?;
    w.write_record(["step", "phase", "instantaneous", "cumulative"])?;
    for (t, ((r, c), p)) in trace
        .instantaneous
        .iter()
        .zip(&trace.cumulative)
        .zip(&trace.phases)
        .enumerate()
    {
        w.write_record([
            (t + 1).to_string(),
            p.as_str().to_string(),
            r.to_string(),
            c.to_string(),
        ])?;
    }
    finish(w)
}

/// `step,phase,epoch,regret,cumulative_regret,cost_true,cost_estimated,max_block_trace`
pub fn write_run_log(path: &Path, steps: &[StepLog]) -> CsvResult<()> {
    let mut w = writer(path)?;
    w.write_record([
        "step",
        "phase",
        "epoch",
        "regret",
        "cumulative_regret",
        "cost_true",
        "cost_estimated",
        "max_block_trace",
    ])?;
    for s in steps {
        w.write_record([
            s.step.to_string(),
            s.phase.as_str().to_string(),
            s.epoch.to_string(),
            s.regret.to_string(),
            s.cumulative_regret.to_string(),
            s.cost_true.to_string(),
            s.cost_estimated.to_string(),
            s.max_block_trace.to_string(),
        ])?;
    }
    finish(w)
}

/// `vertex,task,mean,block_trace`
pub fn write_posterior(path: &Path, post: &MtgpPosterior) -> CsvResult<()> {
    let mut w = writer(path)?;
    w.write_record(["vertex", "task", "mean", "block_trace"])?;
    let m = post.task_count();
    for v in 0..post.vertex_count() {
        let trace = post.block_trace(v).to_string();
        for j in 0..m {
            w.write_record([
                v.to_string(),
                j.to_string(),
                post.mean()[v * m + j].to_string(),
                trace.clone(),
            ])?;
        }
    }
    finish(w)
}

/// Label of a vertex in a partition map: `0` uncovered, `i + 1` for a vertex
/// owned only by robot `i`, and `max(10, N + 1)` when multiply covered.
pub fn partition_labels(cov: &Covering, task: usize, vertex_count: usize) -> Vec<usize> {
    let multiple = (cov.robot_count() + 1).max(10);
    let mut labels = vec![0usize; vertex_count];
    for i in 0..cov.robot_count() {
        for &v in cov.set(task, i) {
            labels[v] = if labels[v] == 0 { i + 1 } else { multiple };
        }
    }
    labels
}

/// `vertex,task,label` (see [`partition_labels`]).
pub fn write_partition(path: &Path, cov: &Covering, vertex_count: usize) -> CsvResult<()> {
    let mut w = writer(path)?;
    w.write_record(["vertex", "task", "label"])?;
    for j in 0..cov.task_count() {
        for (v, label) in partition_labels(cov, j, vertex_count)
            .into_iter()
            .enumerate()
        {
            w.write_record([v.to_string(), j.to_string(), label.to_string()])?;
        }
    }
    finish(w)
}

/// Reads named numeric columns of a CSV file. Fails when a column is
/// missing or a cell does not parse.
pub fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>, String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = rdr
        .headers()
        .map_err(|e| format!("{}: {e}", path.display()))?
        .clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == *n)
                .ok_or_else(|| format!("{}: no column {n}", path.display()))
        })
        .collect::<Result<_, _>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        for (k, &i) in idx.iter().enumerate() {
            let cell = rec.get(i).unwrap_or("");
            let x = cell.parse::<f64>().map_err(|_| {
                format!(
                    "{}: row {}: bad {} value {cell:?}",
                    path.display(),
                    row + 2,
                    names[k]
                )
            })?;
            cols[k].push(x);
        }
    }
    Ok(cols)
}
