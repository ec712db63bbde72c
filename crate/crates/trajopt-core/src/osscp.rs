//! Operator-splitting SCP: consensus ADMM over diversely initialized agents.
//!
//! Each outer iteration runs a parallel primal update per agent (an SCP-style
//! subproblem whose trust region is the consensus penalty), a consensus
//! update (Euclidean projection of the shifted agent mean onto the
//! convexified constraint set, relinearized at the agent-mean trajectory),
//! and a dual ascent step. Termination is by consensus residuals, cost
//! stagnation of the consensus trajectory, or the iteration cap.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::qp::{
    build_consensus_qp, project_onto_z_with, solve_qp_with, trajectory_from_solution, QpSettings,
    WarmStart,
};
use crate::traj::{
    linearize, true_penalized_cost, LinearizedProblem, PenaltyWeights, ProblemDefinition,
    Trajectory,
};
use crate::{Error, Result};

/// Maximum number of consecutive consensus-projection failures tolerated
/// before the solve aborts.
const MAX_PROJECTION_FAILURES: usize = 5;

/// One ADMM agent: a local trajectory copy and its dual variable, both in
/// the stacked trajectory layout.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub id: usize,
    pub trajectory: Trajectory,
    pub dual: Trajectory,
}

impl AgentState {
    pub fn new(id: usize, trajectory: Trajectory) -> Self {
        let dual = Trajectory::zeros_like(&trajectory);
        Self {
            id,
            trajectory,
            dual,
        }
    }
}

/// Snapshot of the consensus variable and residuals after one outer
/// iteration.
#[derive(Debug, Clone)]
pub struct ConsensusState {
    pub iteration: usize,
    pub zbar: Trajectory,
    /// `||z_i - zbar||` per agent.
    pub primal_residuals: Vec<f64>,
    /// `rho * ||zbar_new - zbar_old||`.
    pub dual_residual: f64,
    /// True penalized cost of the consensus trajectory.
    pub cost: f64,
    /// Whether the consensus projection succeeded this iteration; on failure
    /// the previous consensus trajectory is retained.
    pub projection_feasible: bool,
    /// Max violation of the convexified constraints (at this iteration's
    /// mean linearization) by `zbar`.
    pub consensus_violation: f64,
}

/// OS-SCP configuration.
#[derive(Debug, Clone)]
pub struct OsscpConfig {
    pub rho: f64,
    /// Primal (consensus) residual tolerance.
    pub eps_r: f64,
    /// Dual residual tolerance.
    pub eps_s: f64,
    /// Consensus cost-stagnation tolerance.
    pub eps_c: f64,
    pub max_iters: usize,
    pub weights: PenaltyWeights,
    pub qp_tol: f64,
    /// Optional per-component mask (length `n_z`, tiled over steps)
    /// restricting consensus to a subset of the stacked variables. `None`
    /// means full consensus.
    pub consensus_mask: Option<Vec<bool>>,
}

impl OsscpConfig {
    pub fn validate(&self, n_z: usize) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::InvalidArgument("rho must be positive".into()));
        }
        for (name, v) in [
            ("eps_r", self.eps_r),
            ("eps_s", self.eps_s),
            ("eps_c", self.eps_c),
            ("qp_tol", self.qp_tol),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if let Some(mask) = &self.consensus_mask {
            if mask.len() != n_z {
                return Err(Error::DimensionMismatch {
                    what: "consensus mask",
                    expected: n_z,
                    got: mask.len(),
                });
            }
        }
        self.weights.validate()
    }

    fn mask(&self) -> Option<&[bool]> {
        self.consensus_mask.as_deref()
    }
}

/// Why an OS-SCP solve stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Residuals,
    CostStagnation,
    IterationCap,
}

/// Full output of an OS-SCP solve.
#[derive(Debug, Clone)]
pub struct OsscpResult {
    /// Consensus snapshots, index 0 being the initialization.
    pub history: Vec<ConsensusState>,
    /// Agent states after each iteration's updates (same indexing as
    /// `history`; index 0 holds the initial agents).
    pub agent_history: Vec<Vec<AgentState>>,
    pub zbar: Trajectory,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl OsscpResult {
    pub fn final_agents(&self) -> &[AgentState] {
        self.agent_history.last().expect("nonempty history")
    }
}

fn masked_diff(a: &Trajectory, b: &Trajectory, mask: Option<&[bool]>, n_z: usize) -> DVector<f64> {
    let mut d = a.as_vector() - b.as_vector();
    if let Some(m) = mask {
        for i in 0..d.len() {
            if !m[i % n_z] {
                d[i] = 0.0;
            }
        }
    }
    d
}

/// Solves the agent subproblem: penalized linearized cost about the agent's
/// own previous trajectory plus the consensus penalty
/// `(rho/2) ||z - zbar + dual||^2`. The dual is left unchanged.
pub fn primal_update(
    problem: &ProblemDefinition,
    agent: &AgentState,
    zbar: &Trajectory,
    cfg: &OsscpConfig,
) -> Result<AgentState> {
    primal_update_warm(problem, agent, zbar, cfg, None).map(|(a, _)| a)
}

fn primal_update_warm(
    problem: &ProblemDefinition,
    agent: &AgentState,
    zbar: &Trajectory,
    cfg: &OsscpConfig,
    warm: Option<&WarmStart>,
) -> Result<(AgentState, WarmStart)> {
    problem.check_shape(&agent.trajectory)?;
    problem.check_shape(zbar)?;
    cfg.validate(problem.dims.n_z())?;

    let lin = linearize(problem, &agent.trajectory)?;
    let qp = build_consensus_qp(&lin, cfg.rho, zbar, &agent.dual, &cfg.weights, cfg.mask())?;
    let settings = QpSettings {
        tol: cfg.qp_tol,
        ..QpSettings::default()
    };
    let sol = solve_qp_with(&qp, &settings, warm);
    if !sol.solved() {
        return Err(Error::Subproblem {
            iteration: 0,
            status: sol.status,
        });
    }
    let trajectory = trajectory_from_solution(&problem.dims, &sol.x)?;
    Ok((
        AgentState {
            id: agent.id,
            trajectory,
            dual: agent.dual.clone(),
        },
        WarmStart { x: sol.x, y: sol.y },
    ))
}

/// Dual ascent: `dual += z_i - zbar` (restricted to the consensus mask).
pub fn dual_update(agent: &AgentState, zbar: &Trajectory, mask: Option<&[bool]>) -> AgentState {
    let n_z = zbar.n_z();
    let diff = masked_diff(&agent.trajectory, zbar, mask, n_z);
    let dual = agent
        .dual
        .with_data(agent.dual.as_vector() + diff)
        .expect("dual shape preserved");
    AgentState {
        id: agent.id,
        trajectory: agent.trajectory.clone(),
        dual,
    }
}

/// Consensus residual norms: per-agent primal gaps `||z_i - zbar_new||` and
/// the dual residual `rho * ||zbar_new - zbar_old||`.
pub fn residuals(
    agents: &[AgentState],
    zbar_new: &Trajectory,
    zbar_old: &Trajectory,
    rho: f64,
    mask: Option<&[bool]>,
) -> (Vec<f64>, f64) {
    let n_z = zbar_new.n_z();
    let primal = agents
        .iter()
        .map(|a| masked_diff(&a.trajectory, zbar_new, mask, n_z).norm())
        .collect();
    let dual = rho * masked_diff(zbar_new, zbar_old, mask, n_z).norm();
    (primal, dual)
}

/// Agent indices in a canonical order independent of their position in the
/// input, so consensus sums are exactly permutation-invariant.
fn canonical_order(agents: &[AgentState]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..agents.len()).collect();
    order.sort_by(|&a, &b| {
        let ta = agents[a].trajectory.as_vector().as_slice();
        let tb = agents[b].trajectory.as_vector().as_slice();
        let by_traj = ta
            .iter()
            .zip(tb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal);
        by_traj.then_with(|| {
            let da = agents[a].dual.as_vector().as_slice();
            let db = agents[b].dual.as_vector().as_slice();
            da.iter()
                .zip(db)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    order
}

fn mean_in_order(
    agents: &[AgentState],
    order: &[usize],
    with_duals: bool,
) -> DVector<f64> {
    let n = agents[0].trajectory.as_vector().len();
    let mut sum = DVector::zeros(n);
    for &i in order {
        sum += agents[i].trajectory.as_vector();
        if with_duals {
            sum += agents[i].dual.as_vector();
        }
    }
    sum / agents.len() as f64
}

/// Max violation of the convexified constraints by `z` at the linearization
/// stored in `lin`.
pub fn convexified_violation(lin: &LinearizedProblem, z: &Trajectory) -> f64 {
    let dims = lin.dims;
    let mut v: f64 = 0.0;
    for k in 0..dims.k {
        v = v.max(lin.dynamics_defect(k, z).amax());
    }
    for k in 0..=dims.k {
        if dims.n_g > 0 {
            v = v.max(lin.ineq_value(k, z).max().max(0.0));
        }
        if dims.n_h > 0 {
            v = v.max(lin.eq_value(k, z).amax());
        }
        let set = &lin.convex_sets[k];
        let p = z.point(k);
        for j in 0..p.len() {
            v = v.max((set.lb[j] - p[j]).max(p[j] - set.ub[j]).max(0.0));
        }
        if let Some((e, d)) = &set.eq {
            v = v.max((e * p - d).amax());
        }
    }
    v
}

struct ConsensusOutcome {
    zbar: Trajectory,
    lin_mean: LinearizedProblem,
    feasible: bool,
    warm: Option<WarmStart>,
}

fn consensus_update_inner(
    problem: &ProblemDefinition,
    agents: &[AgentState],
    cfg: &OsscpConfig,
    previous: &Trajectory,
    warm: Option<&WarmStart>,
) -> Result<ConsensusOutcome> {
    let order = canonical_order(agents);
    let mean = previous.with_data(mean_in_order(agents, &order, false))?;
    let shifted = previous.with_data(mean_in_order(agents, &order, true))?;
    let lin_mean = linearize(problem, &mean)?;
    let settings = QpSettings {
        tol: cfg.qp_tol,
        ..QpSettings::default()
    };
    match project_onto_z_with(&lin_mean, &shifted, cfg.mask(), &settings, warm) {
        Ok((zbar, sol)) => Ok(ConsensusOutcome {
            zbar,
            lin_mean,
            feasible: true,
            warm: Some(WarmStart { x: sol.x, y: sol.y }),
        }),
        Err(Error::InfeasibleProjection) | Err(Error::Subproblem { .. }) => Ok(ConsensusOutcome {
            zbar: previous.clone(),
            lin_mean,
            feasible: false,
            warm: None,
        }),
        Err(e) => Err(e),
    }
}

/// Consensus update: relinearizes the nonconvex constraints at the agent
/// mean and projects the dual-shifted agent mean onto the convexified set.
/// Returns the new consensus trajectory; on projection infeasibility the
/// previous consensus trajectory (`previous`) is returned unchanged.
pub fn consensus_update(
    problem: &ProblemDefinition,
    agents: &[AgentState],
    cfg: &OsscpConfig,
    previous: &Trajectory,
) -> Result<Trajectory> {
    if agents.is_empty() {
        return Err(Error::InvalidArgument("need at least one agent".into()));
    }
    consensus_update_inner(problem, agents, cfg, previous, None).map(|o| o.zbar)
}

/// Runs Operator-Splitting SCP from a set of initial guesses.
///
/// Duals start at zero; the initial consensus trajectory is the projection
/// of the guess mean onto the convexified set linearized at that mean.
/// Stops when all primal residuals fall below `eps_r` and the dual residual
/// below `eps_s`, on consensus cost stagnation below `eps_c`, or at the
/// iteration cap.
pub fn osscp_solve(
    problem: &ProblemDefinition,
    guesses: &[Trajectory],
    cfg: &OsscpConfig,
) -> Result<OsscpResult> {
    if guesses.is_empty() {
        return Err(Error::InvalidArgument("need at least one guess".into()));
    }
    cfg.validate(problem.dims.n_z())?;
    for g in guesses {
        problem.check_shape(g)?;
    }

    let mut agents: Vec<AgentState> = guesses
        .iter()
        .enumerate()
        .map(|(i, g)| AgentState::new(i, g.clone()))
        .collect();

    // initial consensus: projection of the guess mean
    let init = consensus_update_inner(problem, &agents, cfg, &agents[0].trajectory, None)?;
    let mut zbar = if init.feasible {
        init.zbar
    } else {
        // fall back to the raw mean when even the initial projection fails
        let order = canonical_order(&agents);
        agents[0]
            .trajectory
            .with_data(mean_in_order(&agents, &order, false))?
    };
    let mut projection_warm = init.warm;

    let init_cost = true_penalized_cost(problem, &cfg.weights, &zbar)?.total;
    let (init_primal, _) = residuals(&agents, &zbar, &zbar, cfg.rho, cfg.mask());
    let mut history = vec![ConsensusState {
        iteration: 0,
        zbar: zbar.clone(),
        primal_residuals: init_primal,
        dual_residual: f64::INFINITY,
        cost: init_cost,
        projection_feasible: init.feasible,
        consensus_violation: convexified_violation(&init.lin_mean, &zbar),
    }];
    let mut agent_history = vec![agents.clone()];

    let mut agent_warm: Vec<Option<WarmStart>> = vec![None; agents.len()];
    let mut projection_failures = 0usize;
    let mut converged = false;
    let mut stop_reason = StopReason::IterationCap;

    for iteration in 1..=cfg.max_iters {
        // primal updates, embarrassingly parallel over agents
        let updates: Vec<Result<(AgentState, WarmStart)>> = agents
            .par_iter()
            .zip(agent_warm.par_iter())
            .map(|(agent, warm)| {
                primal_update_warm(problem, agent, &zbar, cfg, warm.as_ref()).map_err(|e| {
                    Error::Agent {
                        agent: agent.id,
                        iteration,
                        source: Box::new(e),
                    }
                })
            })
            .collect();
        let mut next_agents = Vec::with_capacity(agents.len());
        for (slot, update) in agent_warm.iter_mut().zip(updates) {
            let (agent, warm) = update?;
            *slot = Some(warm);
            next_agents.push(agent);
        }
        agents = next_agents;

        // consensus update
        let outcome =
            consensus_update_inner(problem, &agents, cfg, &zbar, projection_warm.as_ref())?;
        if outcome.feasible {
            projection_failures = 0;
            projection_warm = outcome.warm;
        } else {
            projection_failures += 1;
            if projection_failures >= MAX_PROJECTION_FAILURES {
                return Err(Error::ConsensusStalled {
                    count: projection_failures,
                });
            }
        }
        let zbar_new = outcome.zbar;

        // dual updates
        agents = agents
            .iter()
            .map(|a| dual_update(a, &zbar_new, cfg.mask()))
            .collect();

        let (primal, dual) = residuals(&agents, &zbar_new, &zbar, cfg.rho, cfg.mask());
        let cost = true_penalized_cost(problem, &cfg.weights, &zbar_new)?.total;
        let prev_cost = history.last().unwrap().cost;
        let violation = convexified_violation(&outcome.lin_mean, &zbar_new);

        zbar = zbar_new;
        history.push(ConsensusState {
            iteration,
            zbar: zbar.clone(),
            primal_residuals: primal.clone(),
            dual_residual: dual,
            cost,
            projection_feasible: outcome.feasible,
            consensus_violation: violation,
        });
        agent_history.push(agents.clone());

        let max_primal = primal.iter().cloned().fold(0.0_f64, f64::max);
        if max_primal <= cfg.eps_r && dual <= cfg.eps_s {
            converged = true;
            stop_reason = StopReason::Residuals;
            break;
        }
        // cost stagnation alone is not enough: the consensus trajectory can
        // sit at the optimum from the start while agents are still far away
        if max_primal <= cfg.eps_r && (cost - prev_cost).abs() <= cfg.eps_c {
            converged = true;
            stop_reason = StopReason::CostStagnation;
            break;
        }
    }

    let iterations = history.len() - 1;
    Ok(OsscpResult {
        history,
        agent_history,
        zbar,
        iterations,
        converged,
        stop_reason,
    })
}
