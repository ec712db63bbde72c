//! The solve driver: builds the scenario, runs the requested method(s), and
//! writes all output files.

use std::fs;
use std::path::Path;

use anyhow::Context;
use trajopt_core::scenarios::{make_guess, waypoint_guess, GuessKind, Scenario};
use trajopt_core::{
    build_scenario, multi_start, osscp_solve, true_penalized_cost, Trajectory,
};

use crate::config::{GuessSpec, RunConfig};
use crate::output::{
    emit_plot_data, push_trajectory_rows, write_report, write_residuals, write_summary,
    write_trajectories, ResidualRow, SummaryRow, TrajectoryRow,
};

/// What a run produced, for exit-code decisions and tests.
pub struct RunOutcome {
    pub all_converged: bool,
    pub summary: Vec<SummaryRow>,
}

fn resolve_guesses(
    scenario: &Scenario,
    specs: Option<&[GuessSpec]>,
) -> anyhow::Result<Vec<(String, Trajectory)>> {
    match specs {
        None => Ok(scenario
            .guesses()
            .into_iter()
            .map(|(kind, z)| (kind.name().to_string(), z))
            .collect()),
        Some(specs) => specs
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let z = match spec {
                    GuessSpec::Named(name) => {
                        let kind = GuessKind::parse(name)
                            .with_context(|| format!("guess #{i}"))?;
                        make_guess(kind, &scenario.params)
                    }
                    GuessSpec::Waypoints { waypoints } => {
                        waypoint_guess(&scenario.params, waypoints)
                    }
                };
                Ok((spec.label(i), z))
            })
            .collect(),
    }
}

/// Executes the configured run, writing `trajectories.csv`, `residuals.csv`,
/// `summary.csv`, and `report.txt` (plus plot data unless disabled) into
/// `out_dir`. Reported costs are recomputed from the final trajectories.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<RunOutcome> {
    let scenario = build_scenario(&cfg.scenario, &cfg.overrides)?;
    let guesses = resolve_guesses(&scenario, cfg.guesses.as_deref())?;
    anyhow::ensure!(!guesses.is_empty(), "at least one guess is required");
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let dt = scenario.params.dt;
    let mut traj_rows: Vec<TrajectoryRow> = Vec::new();
    let mut residual_rows: Vec<ResidualRow> = Vec::new();
    let mut summary: Vec<SummaryRow> = Vec::new();
    let mut all_converged = true;

    if cfg.method.runs_scp() {
        let inputs: Vec<Trajectory> = guesses.iter().map(|(_, z)| z.clone()).collect();
        let records = multi_start(&scenario.problem, &inputs, &scenario.scp);
        for ((name, _), record) in guesses.iter().zip(records) {
            let record = record.with_context(|| format!("scp run '{name}'"))?;
            let run_id = format!("scp-{name}");
            for (iter, z) in record.iterates.iter().enumerate() {
                push_trajectory_rows(&mut traj_rows, &run_id, 0, iter, dt, z);
            }
            let cost = true_penalized_cost(
                &scenario.problem,
                &scenario.scp.weights,
                record.final_trajectory(),
            )?
            .total;
            all_converged &= record.converged;
            summary.push(SummaryRow {
                method: "scp".to_string(),
                guess: name.clone(),
                cost,
                iterations: record.iterations,
                converged: record.converged,
            });
            log::info!(
                "scp '{name}': cost {cost:.6}, {} iterations, converged: {}",
                record.iterations,
                record.converged
            );
        }
    }

    if cfg.method.runs_osscp() {
        let inputs: Vec<Trajectory> = guesses.iter().map(|(_, z)| z.clone()).collect();
        let result = osscp_solve(&scenario.problem, &inputs, &scenario.osscp)
            .context("osscp run")?;
        for (iter, (state, agents)) in result
            .history
            .iter()
            .zip(&result.agent_history)
            .enumerate()
        {
            // agent_id 0 is the consensus trajectory
            push_trajectory_rows(&mut traj_rows, "osscp", 0, iter, dt, &state.zbar);
            for agent in agents {
                push_trajectory_rows(
                    &mut traj_rows,
                    "osscp",
                    agent.id + 1,
                    iter,
                    dt,
                    &agent.trajectory,
                );
            }
            if iter > 0 {
                for (i, primal) in state.primal_residuals.iter().enumerate() {
                    residual_rows.push(ResidualRow {
                        iter,
                        agent_id: i + 1,
                        primal_norm: *primal,
                        dual_norm: state.dual_residual,
                    });
                }
            }
        }
        let cost = true_penalized_cost(&scenario.problem, &scenario.osscp.weights, &result.zbar)?
            .total;
        all_converged &= result.converged;
        summary.push(SummaryRow {
            method: "osscp".to_string(),
            guess: "consensus".to_string(),
            cost,
            iterations: result.iterations,
            converged: result.converged,
        });
        log::info!(
            "osscp: cost {cost:.6}, {} iterations, converged: {} ({:?})",
            result.iterations,
            result.converged,
            result.stop_reason
        );
    }

    write_trajectories(&out_dir.join("trajectories.csv"), &traj_rows)?;
    write_residuals(&out_dir.join("residuals.csv"), &residual_rows)?;
    write_summary(&out_dir.join("summary.csv"), &summary)?;
    write_report(&out_dir.join("report.txt"), &cfg.scenario, &summary)?;
    if cfg.plot_data {
        emit_plot_data(out_dir, &scenario)?;
    }

    Ok(RunOutcome {
        all_converged,
        summary,
    })
}
