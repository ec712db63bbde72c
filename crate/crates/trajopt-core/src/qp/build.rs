//! Assembly of the convex subproblems.
//!
//! Every 1-norm or absolute-value penalty term is replaced by slack
//! variables with linear cost: a slack `t` bounds `|expr|` through
//! `-t <= expr <= t` (or `expr <= t, t >= 0` for the positive-part
//! inequality penalty), so the subproblem optimum satisfies `t = |expr|`.
//! Variable layout: stacked trajectory first, then dynamics slacks,
//! inequality slacks, and equality slacks.

use nalgebra::DVector;

use super::solver::{solve_qp_with, QpSettings, WarmStart};
use super::{QuadraticProgram, SolveStatus, SubproblemSolution};
use crate::traj::{Dims, InequalityPenalty, LinearizedProblem, PenaltyWeights, Trajectory};
use crate::{Error, Result};

/// Variable offsets of the slack blocks for a given problem shape.
#[derive(Debug, Clone, Copy)]
pub struct QpLayout {
    pub dyn_slack: usize,
    pub ineq_slack: usize,
    pub eq_slack: usize,
    pub total: usize,
}

impl QpLayout {
    pub fn for_dims(dims: &Dims) -> Self {
        let dyn_slack = dims.stacked_len();
        let ineq_slack = dyn_slack + dims.k * dims.n_x;
        let eq_slack = ineq_slack + (dims.k + 1) * dims.n_g;
        let total = eq_slack + (dims.k + 1) * dims.n_h;
        Self {
            dyn_slack,
            ineq_slack,
            eq_slack,
            total,
        }
    }
}

fn add_cost_models(qp: &mut QuadraticProgram, lin: &LinearizedProblem) {
    let n_z = lin.dims.n_z();
    for k in 0..=lin.dims.k {
        let model = &lin.cost[k];
        let ref_k = DVector::from(lin.reference.point(k));
        let base = k * n_z;
        // expand c + q'(z - r) + 1/2 (z - r)'Q(z - r) in absolute coordinates
        let q_ref = &model.quadratic * &ref_k;
        for i in 0..n_z {
            qp.linear[base + i] += model.linear[i] - q_ref[i];
            for j in 0..n_z {
                qp.hessian[(base + i, base + j)] += model.quadratic[(i, j)];
            }
        }
        qp.constant +=
            model.constant - model.linear.dot(&ref_k) + 0.5 * q_ref.dot(&ref_k);
    }
}

fn add_proximal(
    qp: &mut QuadraticProgram,
    weight: f64,
    center: &DVector<f64>,
    n_z: usize,
    mask: Option<&[bool]>,
) {
    for idx in 0..center.len() {
        if let Some(m) = mask {
            if !m[idx % n_z] {
                continue;
            }
        }
        qp.hessian[(idx, idx)] += weight;
        qp.linear[idx] -= weight * center[idx];
        qp.constant += 0.5 * weight * center[idx] * center[idx];
    }
}

fn add_penalty_structure(
    qp: &mut QuadraticProgram,
    lin: &LinearizedProblem,
    weights: &PenaltyWeights,
    layout: &QpLayout,
) {
    let dims = lin.dims;
    let n_z = dims.n_z();

    // dynamics defect: x_{k+1} - f~_k(z_k) with slack on each component
    for k in 0..dims.k {
        let (f_val, a) = &lin.dynamics[k];
        let ref_k = DVector::from(lin.reference.point(k));
        let offset = a * &ref_k - f_val; // expr = z_{k+1}[i] - A z_k + offset_i
        for i in 0..dims.n_x {
            let s = layout.dyn_slack + k * dims.n_x + i;
            qp.linear[s] += weights.w1;
            qp.set_bound(s, 0.0, f64::INFINITY);
            let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(n_z + 2);
            coeffs.push(((k + 1) * n_z + i, 1.0));
            for j in 0..n_z {
                let v = a[(i, j)];
                if v != 0.0 {
                    coeffs.push((k * n_z + j, -v));
                }
            }
            // expr - s <= -offset_i  and  -expr - s <= offset_i
            let mut lo = coeffs.clone();
            lo.push((s, -1.0));
            qp.add_le_row(lo, -offset[i]);
            let mut hi: Vec<(usize, f64)> = coeffs.iter().map(|&(c, v)| (c, -v)).collect();
            hi.push((s, -1.0));
            qp.add_le_row(hi, offset[i]);
        }
    }

    // inequality g~: absolute value or positive part
    if dims.n_g > 0 {
        for k in 0..=dims.k {
            let (g_val, jac) = &lin.ineq[k];
            let ref_k = DVector::from(lin.reference.point(k));
            let j_ref = jac * &ref_k;
            for r in 0..dims.n_g {
                let s = layout.ineq_slack + k * dims.n_g + r;
                qp.linear[s] += weights.w2;
                qp.set_bound(s, 0.0, f64::INFINITY);
                let coeffs: Vec<(usize, f64)> = (0..n_z)
                    .filter(|&j| jac[(r, j)] != 0.0)
                    .map(|j| (k * n_z + j, jac[(r, j)]))
                    .collect();
                let rhs = j_ref[r] - g_val[r]; // g~ = J z - rhs
                let mut lo = coeffs.clone();
                lo.push((s, -1.0));
                qp.add_le_row(lo, rhs);
                if weights.ineq_mode == InequalityPenalty::AbsoluteValue {
                    let mut hi: Vec<(usize, f64)> =
                        coeffs.iter().map(|&(c, v)| (c, -v)).collect();
                    hi.push((s, -1.0));
                    qp.add_le_row(hi, -rhs);
                }
            }
        }
    }

    // equality h~: two-sided slack
    if dims.n_h > 0 {
        for k in 0..=dims.k {
            let (h_val, jac) = &lin.eq[k];
            let ref_k = DVector::from(lin.reference.point(k));
            let j_ref = jac * &ref_k;
            for r in 0..dims.n_h {
                let s = layout.eq_slack + k * dims.n_h + r;
                qp.linear[s] += weights.w3;
                qp.set_bound(s, 0.0, f64::INFINITY);
                let coeffs: Vec<(usize, f64)> = (0..n_z)
                    .filter(|&j| jac[(r, j)] != 0.0)
                    .map(|j| (k * n_z + j, jac[(r, j)]))
                    .collect();
                let rhs = j_ref[r] - h_val[r];
                let mut lo = coeffs.clone();
                lo.push((s, -1.0));
                qp.add_le_row(lo, rhs);
                let mut hi: Vec<(usize, f64)> = coeffs.iter().map(|&(c, v)| (c, -v)).collect();
                hi.push((s, -1.0));
                qp.add_le_row(hi, -rhs);
            }
        }
    }
}

fn add_convex_sets(qp: &mut QuadraticProgram, lin: &LinearizedProblem) {
    let n_z = lin.dims.n_z();
    for k in 0..=lin.dims.k {
        let set = &lin.convex_sets[k];
        for j in 0..n_z {
            qp.intersect_bound(k * n_z + j, set.lb[j], set.ub[j]);
        }
        if let Some((e, d)) = &set.eq {
            for r in 0..e.nrows() {
                let coeffs: Vec<(usize, f64)> = (0..n_z)
                    .filter(|&j| e[(r, j)] != 0.0)
                    .map(|j| (k * n_z + j, e[(r, j)]))
                    .collect();
                qp.add_eq_row(coeffs, d[r]);
            }
        }
    }
}

fn check_center(lin: &LinearizedProblem, center: &Trajectory) -> Result<()> {
    if !center.same_shape(&lin.reference) {
        return Err(Error::DimensionMismatch {
            what: "proximal center",
            expected: lin.reference.as_vector().len(),
            got: center.as_vector().len(),
        });
    }
    Ok(())
}

/// Builds the standard SCP subproblem: penalized linearized cost plus the
/// quadratic trust region `(wp/2) ||z - prox_center||^2`, with the convex
/// sets as hard constraints.
pub fn build_scp_qp(
    lin: &LinearizedProblem,
    weights: &PenaltyWeights,
    prox_center: &Trajectory,
) -> Result<QuadraticProgram> {
    check_center(lin, prox_center)?;
    weights.validate()?;
    let layout = QpLayout::for_dims(&lin.dims);
    let mut qp = QuadraticProgram::new(layout.total);
    add_cost_models(&mut qp, lin);
    add_proximal(
        &mut qp,
        weights.wp,
        prox_center.as_vector(),
        lin.dims.n_z(),
        None,
    );
    add_penalty_structure(&mut qp, lin, weights, &layout);
    add_convex_sets(&mut qp, lin);
    Ok(qp)
}

/// Builds the consensus primal-update subproblem: identical to the SCP
/// subproblem except the proximal term is `(rho/2) ||z - zbar + dual||^2`,
/// centered at `zbar - dual`. An optional per-component mask restricts the
/// consensus penalty to a subset of the stacked variables.
pub fn build_consensus_qp(
    lin: &LinearizedProblem,
    rho: f64,
    zbar: &Trajectory,
    dual: &Trajectory,
    weights: &PenaltyWeights,
    mask: Option<&[bool]>,
) -> Result<QuadraticProgram> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(
            "consensus penalty rho must be positive".into(),
        ));
    }
    check_center(lin, zbar)?;
    check_center(lin, dual)?;
    weights.validate()?;
    let layout = QpLayout::for_dims(&lin.dims);
    let mut qp = QuadraticProgram::new(layout.total);
    add_cost_models(&mut qp, lin);
    let center = zbar.as_vector() - dual.as_vector();
    add_proximal(&mut qp, rho, &center, lin.dims.n_z(), mask);
    // own-iterate damping: keeps each agent step inside the region where its
    // linearization is valid. Its gradient vanishes at the agent's previous
    // iterate, so consensus fixed points are unchanged.
    add_proximal(
        &mut qp,
        weights.wp,
        lin.reference.as_vector(),
        lin.dims.n_z(),
        None,
    );
    add_penalty_structure(&mut qp, lin, weights, &layout);
    add_convex_sets(&mut qp, lin);
    Ok(qp)
}

/// Extracts the trajectory prefix from a subproblem solution.
pub fn trajectory_from_solution(dims: &Dims, x: &DVector<f64>) -> Result<Trajectory> {
    let n = dims.stacked_len();
    let mut data = DVector::from(x.rows(0, n));
    // the final control is pinned to zero in the QP; remove solver noise
    let n_z = dims.n_z();
    for i in 0..dims.n_u {
        data[dims.k * n_z + dims.n_x + i] = 0.0;
    }
    Trajectory::from_stacked(dims.k, dims.n_x, dims.n_u, data)
}

/// Builds the QP of the Euclidean projection onto the convexified set
/// `Z = Z^c ∩ Z^n`: linearized dynamics as equalities, `g~ <= 0`, `h~ = 0`,
/// plus the convex sets.
fn build_projection_qp(
    lin: &LinearizedProblem,
    v: &Trajectory,
    mask: Option<&[bool]>,
) -> QuadraticProgram {
    let dims = lin.dims;
    let n_z = dims.n_z();
    let n = dims.stacked_len();
    let mut qp = QuadraticProgram::new(n);

    // objective 1/2 ||z - v||^2; unmasked components get a vanishing weight
    // so the program stays bounded while the mask dominates
    for idx in 0..n {
        let w = match mask {
            Some(m) if !m[idx % n_z] => 1e-6,
            _ => 1.0,
        };
        qp.hessian[(idx, idx)] = w;
        qp.linear[idx] = -w * v.as_vector()[idx];
        qp.constant += 0.5 * w * v.as_vector()[idx] * v.as_vector()[idx];
    }

    for k in 0..dims.k {
        let (f_val, a) = &lin.dynamics[k];
        let ref_k = DVector::from(lin.reference.point(k));
        let rhs = f_val - a * &ref_k; // x_{k+1} - A z_k = f - A r
        for i in 0..dims.n_x {
            let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(n_z + 1);
            coeffs.push(((k + 1) * n_z + i, 1.0));
            for j in 0..n_z {
                let val = a[(i, j)];
                if val != 0.0 {
                    coeffs.push((k * n_z + j, -val));
                }
            }
            qp.add_eq_row(coeffs, rhs[i]);
        }
    }

    if dims.n_g > 0 {
        for k in 0..=dims.k {
            let (g_val, jac) = &lin.ineq[k];
            let ref_k = DVector::from(lin.reference.point(k));
            let j_ref = jac * &ref_k;
            for r in 0..dims.n_g {
                let coeffs: Vec<(usize, f64)> = (0..n_z)
                    .filter(|&j| jac[(r, j)] != 0.0)
                    .map(|j| (k * n_z + j, jac[(r, j)]))
                    .collect();
                qp.add_le_row(coeffs, j_ref[r] - g_val[r]);
            }
        }
    }

    if dims.n_h > 0 {
        for k in 0..=dims.k {
            let (h_val, jac) = &lin.eq[k];
            let ref_k = DVector::from(lin.reference.point(k));
            let j_ref = jac * &ref_k;
            for r in 0..dims.n_h {
                let coeffs: Vec<(usize, f64)> = (0..n_z)
                    .filter(|&j| jac[(r, j)] != 0.0)
                    .map(|j| (k * n_z + j, jac[(r, j)]))
                    .collect();
                qp.add_eq_row(coeffs, j_ref[r] - h_val[r]);
            }
        }
    }

    add_convex_sets(&mut qp, lin);
    qp
}

/// Euclidean projection of `v` onto the convexified constraint set, with
/// explicit settings and optional warm start.
pub fn project_onto_z_with(
    lin: &LinearizedProblem,
    v: &Trajectory,
    mask: Option<&[bool]>,
    settings: &QpSettings,
    warm: Option<&WarmStart>,
) -> Result<(Trajectory, SubproblemSolution)> {
    check_center(lin, v)?;
    let qp = build_projection_qp(lin, v, mask);
    let sol = solve_qp_with(&qp, settings, warm);
    match sol.status {
        SolveStatus::Solved => {
            let traj = trajectory_from_solution(&lin.dims, &sol.x)?;
            Ok((traj, sol))
        }
        SolveStatus::Infeasible => Err(Error::InfeasibleProjection),
        SolveStatus::MaxIters => Err(Error::Subproblem {
            iteration: 0,
            status: SolveStatus::MaxIters,
        }),
    }
}

/// Euclidean projection of `v` onto `Z = Z^c ∩ Z^n` at the linearization
/// point of `lin` (expected to be the agent-mean trajectory).
pub fn project_onto_z(lin: &LinearizedProblem, v: &Trajectory) -> Result<Trajectory> {
    project_onto_z_with(lin, v, None, &QpSettings::default(), None).map(|(t, _)| t)
}
