//! Multi-start standard SCP: independent prox-linear runs, one per initial
//! guess. Each run linearizes at its previous iterate, solves the penalized
//! convex subproblem with a quadratic trust region, and stops on stagnation
//! of the true penalized cost.

use rayon::prelude::*;

use crate::qp::{
    build_scp_qp, solve_qp_with, trajectory_from_solution, QpSettings, SolveStatus, WarmStart,
};
use crate::traj::{
    linearize, true_penalized_cost, PenaltyWeights, ProblemDefinition, Trajectory,
};
use crate::{Error, Result};

/// Configuration of a single prox-linear run.
#[derive(Debug, Clone)]
pub struct ScpConfig {
    pub weights: PenaltyWeights,
    /// Cost-stagnation tolerance: stop when the true penalized cost changes
    /// by no more than this between iterations.
    pub eps_c: f64,
    pub max_iters: usize,
    /// KKT tolerance for each convex subproblem.
    pub qp_tol: f64,
}

impl ScpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_c > 0.0) {
            return Err(Error::InvalidArgument("eps_c must be positive".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if !(self.qp_tol > 0.0) {
            return Err(Error::InvalidArgument("qp_tol must be positive".into()));
        }
        self.weights.validate()
    }
}

/// Full record of one run: every iterate, the true penalized cost sequence
/// (one entry more than iterations, starting at the guess), and per-iteration
/// subproblem statuses.
#[derive(Debug, Clone)]
pub struct ScpRunRecord {
    pub iterates: Vec<Trajectory>,
    pub costs: Vec<f64>,
    pub statuses: Vec<SolveStatus>,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ScpRunRecord {
    pub fn final_trajectory(&self) -> &Trajectory {
        self.iterates.last().expect("record holds the guess at least")
    }
}

/// Runs the prox-linear iteration from a single guess.
///
/// Iterates `z^{j+1} = argmin Γ(z^j, ·)` until `|J_pen(z^{j+1}) - J_pen(z^j)|
/// <= eps_c` or the iteration cap. The returned final trajectory satisfies
/// the box part of every `Z^c_k` exactly.
pub fn scp_solve(
    problem: &ProblemDefinition,
    guess: &Trajectory,
    cfg: &ScpConfig,
) -> Result<ScpRunRecord> {
    problem.check_shape(guess)?;
    cfg.validate()?;

    let settings = QpSettings {
        tol: cfg.qp_tol,
        ..QpSettings::default()
    };

    let mut current = guess.clone();
    let mut iterates = vec![current.clone()];
    let mut costs = vec![true_penalized_cost(problem, &cfg.weights, &current)?.total];
    let mut statuses = Vec::new();
    let mut converged = false;
    let mut warm: Option<WarmStart> = None;

    for iteration in 0..cfg.max_iters {
        let lin = linearize(problem, &current)?;
        let qp = build_scp_qp(&lin, &cfg.weights, &current)?;
        let sol = solve_qp_with(&qp, &settings, warm.as_ref());
        statuses.push(sol.status);
        if !sol.solved() {
            return Err(Error::Subproblem {
                iteration,
                status: sol.status,
            });
        }
        let next = trajectory_from_solution(&problem.dims, &sol.x)?;
        warm = Some(WarmStart { x: sol.x, y: sol.y });

        let cost = true_penalized_cost(problem, &cfg.weights, &next)?.total;
        let stagnated = (cost - *costs.last().unwrap()).abs() <= cfg.eps_c;
        current = next;
        iterates.push(current.clone());
        costs.push(cost);
        if stagnated {
            converged = true;
            break;
        }
    }

    // enforce the box part of Z^c exactly on the reported trajectory
    let mut data = current.as_vector().clone();
    let n_z = problem.dims.n_z();
    for k in 0..=problem.dims.k {
        let mut point = data.rows_mut(k * n_z, n_z);
        problem.convex_sets[k].clamp(&mut point);
    }
    let clamped = current.with_data(data)?;
    let final_cost = true_penalized_cost(problem, &cfg.weights, &clamped)?.total;
    *iterates.last_mut().unwrap() = clamped;
    *costs.last_mut().unwrap() = final_cost;

    let iterations = iterates.len() - 1;
    Ok(ScpRunRecord {
        iterates,
        costs,
        statuses,
        final_cost,
        iterations,
        converged,
    })
}

/// Runs [`scp_solve`] independently for each guess, in parallel. Record
/// order matches guess order; per-run failures are isolated in their slot.
pub fn multi_start(
    problem: &ProblemDefinition,
    guesses: &[Trajectory],
    cfg: &ScpConfig,
) -> Vec<Result<ScpRunRecord>> {
    guesses
        .par_iter()
        .map(|guess| scp_solve(problem, guess, cfg))
        .collect()
}
