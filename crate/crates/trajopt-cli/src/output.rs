//! CSV and report writers. All floats are formatted with 12 significant
//! digits so repeated runs produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use trajopt_core::scenarios::Scenario;
use trajopt_core::Trajectory;

/// Fixed-width scientific notation with 12 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.11e}")
}

/// One trajectory point row of `trajectories.csv`.
#[derive(Debug, Clone)]
pub struct TrajectoryRow {
    pub run_id: String,
    pub agent_id: usize,
    pub iter: usize,
    pub k: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub u: f64,
}

/// One residual row of `residuals.csv`.
#[derive(Debug, Clone)]
pub struct ResidualRow {
    pub iter: usize,
    pub agent_id: usize,
    pub primal_norm: f64,
    pub dual_norm: f64,
}

/// One row of `summary.csv`.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub method: String,
    pub guess: String,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn open(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("creating {}", path.display())
    })?))
}

/// Appends every point of `z` for one `(run, agent, iter)` to `rows`.
pub fn push_trajectory_rows(
    rows: &mut Vec<TrajectoryRow>,
    run_id: &str,
    agent_id: usize,
    iter: usize,
    dt: f64,
    z: &Trajectory,
) {
    for k in 0..=z.k() {
        let p = z.point(k);
        rows.push(TrajectoryRow {
            run_id: run_id.to_string(),
            agent_id,
            iter,
            k,
            t: k as f64 * dt,
            x: p[0],
            y: p[1],
            theta: p[2],
            u: p[3],
        });
    }
}

pub fn write_trajectories(path: &Path, rows: &[TrajectoryRow]) -> anyhow::Result<()> {
    let mut w = open(path)?;
    writeln!(w, "run_id,agent_id,iter,k,t,x,y,theta,u")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.run_id,
            r.agent_id,
            r.iter,
            r.k,
            fmt_float(r.t),
            fmt_float(r.x),
            fmt_float(r.y),
            fmt_float(r.theta),
            fmt_float(r.u)
        )?;
    }
    Ok(())
}

pub fn write_residuals(path: &Path, rows: &[ResidualRow]) -> anyhow::Result<()> {
    let mut w = open(path)?;
    writeln!(w, "iter,agent_id,primal_norm,dual_norm")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.iter,
            r.agent_id,
            fmt_float(r.primal_norm),
            fmt_float(r.dual_norm)
        )?;
    }
    Ok(())
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> anyhow::Result<()> {
    let mut w = open(path)?;
    writeln!(w, "method,guess,cost,iterations,converged")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.method,
            r.guess,
            fmt_float(r.cost),
            r.iterations,
            r.converged
        )?;
    }
    Ok(())
}

/// Renders the summary as a fixed-width text table.
pub fn write_report(path: &Path, scenario: &str, rows: &[SummaryRow]) -> anyhow::Result<()> {
    let mut w = open(path)?;
    writeln!(w, "scenario: {scenario}")?;
    writeln!(w)?;
    writeln!(
        w,
        "{:<8} {:<16} {:>20} {:>12} {:>10}",
        "method", "guess", "cost", "iterations", "converged"
    )?;
    writeln!(w, "{}", "-".repeat(70))?;
    for r in rows {
        writeln!(
            w,
            "{:<8} {:<16} {:>20} {:>12} {:>10}",
            r.method,
            r.guess,
            fmt_float(r.cost),
            r.iterations,
            r.converged
        )?;
    }
    Ok(())
}

/// Writes plotting side files: obstacle geometry, the terrain heightmap on a
/// regular lattice, and the initial guesses. Trajectory overlays per
/// iteration live in `trajectories.csv`.
pub fn emit_plot_data(dir: &Path, scenario: &Scenario) -> anyhow::Result<()> {
    let mut w = open(&dir.join("obstacles.csv"))?;
    writeln!(w, "cx,cy,r")?;
    for obs in &scenario.params.obstacles {
        writeln!(
            w,
            "{},{},{}",
            fmt_float(obs.center[0]),
            fmt_float(obs.center[1]),
            fmt_float(obs.radius)
        )?;
    }
    drop(w);

    if let Some(field) = &scenario.params.terrain {
        let mut w = open(&dir.join("terrain.csv"))?;
        writeln!(w, "x,y,cost")?;
        let (x0, x1, y0, y1) = (-1.0, 12.0, -6.0, 6.0);
        let (nx, ny) = (131, 121);
        for i in 0..nx {
            let x = x0 + (x1 - x0) * i as f64 / (nx - 1) as f64;
            for j in 0..ny {
                let y = y0 + (y1 - y0) * j as f64 / (ny - 1) as f64;
                let (c, _) = field.cost_at(nalgebra::Vector2::new(x, y));
                writeln!(w, "{},{},{}", fmt_float(x), fmt_float(y), fmt_float(c))?;
            }
        }
    }

    let mut rows = Vec::new();
    for (kind, z) in scenario.guesses() {
        push_trajectory_rows(&mut rows, kind.name(), 0, 0, scenario.params.dt, &z);
    }
    write_trajectories(&dir.join("guesses.csv"), &rows)?;
    Ok(())
}
