//! Operator-splitting QP solver.
//!
//! Solves `min 1/2 x'Px + q'x  s.t.  l <= Ax <= u, lb <= x <= ub` with an
//! ADMM iteration (over-relaxed, per-row penalty, single Cholesky
//! factorization) and an active-set polish step that refines the iterate to
//! tight KKT residuals. Equality rows (`l == u`) get a heavier penalty.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{QuadraticProgram, SolveStatus, SubproblemSolution};
use super::sparse::CsrMatrix;

/// Solver settings. `tol` bounds each of the stationarity, primal
/// feasibility, and complementarity residuals of the returned solution.
#[derive(Debug, Clone, Copy)]
pub struct QpSettings {
    pub tol: f64,
    pub max_iters: usize,
    pub rho: f64,
    pub rho_eq_scale: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub check_interval: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 20_000,
            rho: 1.0,
            rho_eq_scale: 1e3,
            sigma: 1e-6,
            alpha: 1.6,
            check_interval: 25,
        }
    }
}

/// Warm-start data: primal iterate and constraint duals from a previous solve
/// of an identically shaped program.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

/// Solves the QP to tolerance `tol` with default settings.
pub fn solve_qp(qp: &QuadraticProgram, tol: f64) -> SubproblemSolution {
    solve_qp_with(
        qp,
        &QpSettings {
            tol,
            ..QpSettings::default()
        },
        None,
    )
}

struct Workspace {
    a: CsrMatrix,
    l: DVector<f64>,
    u: DVector<f64>,
    rho_vec: DVector<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl Workspace {
    /// Folds variable bounds into the constraint matrix as identity rows and
    /// factors `P + sigma I + A' diag(rho) A`.
    fn build(qp: &QuadraticProgram, settings: &QpSettings) -> Option<Self> {
        let n = qp.n();
        let m_rows = qp.rows().len();
        let m = m_rows + n;
        let mut triplets = Vec::new();
        let mut l = DVector::zeros(m);
        let mut u = DVector::zeros(m);
        for (i, row) in qp.rows().iter().enumerate() {
            for &(c, v) in &row.coeffs {
                triplets.push((i, c, v));
            }
            l[i] = row.lower;
            u[i] = row.upper;
        }
        for j in 0..n {
            triplets.push((m_rows + j, j, 1.0));
            l[m_rows + j] = qp.lb[j];
            u[m_rows + j] = qp.ub[j];
        }
        let a = CsrMatrix::from_triplets(m, n, &triplets);

        let mut ws = Self {
            a,
            l,
            u,
            rho_vec: DVector::zeros(m),
            chol: Cholesky::new(DMatrix::identity(1, 1))?,
        };
        ws.set_rho(qp, settings, settings.rho)?;
        Some(ws)
    }

    /// Updates the per-row penalty (equality rows scaled up) and refactors.
    fn set_rho(&mut self, qp: &QuadraticProgram, settings: &QpSettings, rho: f64) -> Option<()> {
        let m = self.l.len();
        for i in 0..m {
            self.rho_vec[i] = if self.l[i] == self.u[i] {
                rho * settings.rho_eq_scale
            } else {
                rho
            };
        }
        let n = qp.n();
        let mut kkt = qp.hessian.clone();
        for j in 0..n {
            kkt[(j, j)] += settings.sigma;
        }
        kkt += self.a.gram_weighted(&self.rho_vec);
        self.chol = Cholesky::new(kkt)?;
        Some(())
    }
}

fn residuals(
    qp: &QuadraticProgram,
    ws: &Workspace,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> (f64, f64, f64) {
    let ax = ws.a.mul_vec(x);
    let mut r_prim: f64 = 0.0;
    let mut r_comp: f64 = 0.0;
    for i in 0..ax.len() {
        let below = ws.l[i] - ax[i];
        let above = ax[i] - ws.u[i];
        r_prim = r_prim.max(below.max(above).max(0.0));
        // complementarity: a positive dual must pin the row at its upper
        // bound, a negative dual at its lower bound
        let yi = y[i];
        if yi > 0.0 {
            let slack = ws.u[i] - ax[i];
            r_comp = r_comp.max(if slack.is_finite() { yi * slack.max(0.0) } else { yi });
        } else if yi < 0.0 {
            let slack = ax[i] - ws.l[i];
            r_comp = r_comp.max(if slack.is_finite() {
                -yi * slack.max(0.0)
            } else {
                -yi
            });
        }
    }
    let r_dual = (&qp.hessian * x + &qp.linear + ws.a.tr_mul_vec(y)).amax();
    (r_prim, r_dual, r_comp)
}

/// Primal infeasibility certificate test on a dual direction `dy`.
fn is_infeasibility_certificate(ws: &Workspace, dy: &DVector<f64>) -> bool {
    let norm = dy.amax();
    if norm <= 1e-12 {
        return false;
    }
    let eps = 1e-10 * norm;
    if ws.a.tr_mul_vec(dy).amax() > eps {
        return false;
    }
    let mut support = 0.0;
    for i in 0..dy.len() {
        let d = dy[i];
        if d > 0.0 {
            if !ws.u[i].is_finite() {
                return false;
            }
            support += ws.u[i] * d;
        } else if d < 0.0 {
            if !ws.l[i].is_finite() {
                return false;
            }
            support += ws.l[i] * d;
        }
    }
    support < -eps
}

/// Active-set polish: solves the equality-constrained KKT system restricted
/// to the detected active rows, with light regularization plus iterative
/// refinement, and returns `(x, y)` if the linear solve succeeds.
fn polish(
    qp: &QuadraticProgram,
    ws: &Workspace,
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = qp.n();
    let m = ws.l.len();
    let act_tol = 1e-7;

    #[derive(Clone, Copy, PartialEq)]
    enum Act {
        Lower,
        Upper,
        Fixed,
    }
    let mut active: Vec<(usize, Act)> = Vec::new();
    for i in 0..m {
        if ws.l[i] == ws.u[i] {
            active.push((i, Act::Fixed));
        } else if (z[i] - ws.l[i]).abs() < act_tol || y[i] < -act_tol {
            active.push((i, Act::Lower));
        } else if (ws.u[i] - z[i]).abs() < act_tol || y[i] > act_tol {
            active.push((i, Act::Upper));
        }
    }

    // drop rows whose multiplier sign comes out wrong and re-solve
    for _round in 0..4 {
        let na = active.len();
        let dim = n + na;
        let delta = 1e-9;
        let mut kkt = DMatrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&qp.hessian);
        for j in 0..n {
            kkt[(j, j)] += delta;
        }
        for (a_idx, &(row, _)) in active.iter().enumerate() {
            for (c, v) in ws.a.row(row) {
                kkt[(c, n + a_idx)] = v;
                kkt[(n + a_idx, c)] = v;
            }
            kkt[(n + a_idx, n + a_idx)] = -delta;
        }
        let mut rhs = DVector::zeros(dim);
        for j in 0..n {
            rhs[j] = -qp.linear[j];
        }
        for (a_idx, &(row, act)) in active.iter().enumerate() {
            rhs[n + a_idx] = match act {
                Act::Lower => ws.l[row],
                Act::Upper | Act::Fixed => ws.u[row],
            };
        }
        let lu = kkt.clone().lu();
        let mut sol = lu.solve(&rhs)?;
        // two rounds of refinement against the unregularized system
        for _ in 0..2 {
            let mut resid = rhs.clone();
            // resid -= KKT_unreg * sol
            let px = &qp.hessian * sol.rows(0, n);
            for j in 0..n {
                resid[j] -= px[j];
            }
            for (a_idx, &(row, _)) in active.iter().enumerate() {
                let lambda = sol[n + a_idx];
                let mut ax = 0.0;
                for (c, v) in ws.a.row(row) {
                    resid[c] -= v * lambda;
                    ax += v * sol[c];
                }
                resid[n + a_idx] -= ax;
            }
            let corr = lu.solve(&resid)?;
            sol += corr;
        }

        let x_pol = DVector::from(sol.rows(0, n));
        let mut y_pol = DVector::zeros(m);
        let mut wrong_sign = false;
        let mut keep = Vec::with_capacity(active.len());
        for (a_idx, &(row, act)) in active.iter().enumerate() {
            let lambda = sol[n + a_idx];
            let ok = match act {
                Act::Fixed => true,
                Act::Lower => lambda <= 1e-10,
                Act::Upper => lambda >= -1e-10,
            };
            if ok {
                y_pol[row] = lambda;
                keep.push((row, act));
            } else {
                wrong_sign = true;
            }
        }
        if !wrong_sign {
            return Some((x_pol, y_pol));
        }
        if keep.len() == active.len() {
            return Some((x_pol, y_pol));
        }
        active = keep;
    }
    // fall back to the last iterate
    Some((x.clone(), y.clone()))
}

/// Core solve with explicit settings and optional warm start. Deterministic:
/// identical inputs produce bitwise-identical outputs.
pub fn solve_qp_with(
    qp: &QuadraticProgram,
    settings: &QpSettings,
    warm: Option<&WarmStart>,
) -> SubproblemSolution {
    let n = qp.n();

    // inconsistent bounds are infeasible outright
    let inconsistent = (0..n).any(|j| qp.lb[j] > qp.ub[j])
        || qp.rows().iter().any(|r| r.lower > r.upper);
    if inconsistent {
        return SubproblemSolution {
            x: DVector::zeros(n),
            y: DVector::zeros(qp.rows().len() + n),
            objective: f64::INFINITY,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            comp_residual: f64::INFINITY,
            iterations: 0,
            status: SolveStatus::Infeasible,
        };
    }

    let mut ws = match Workspace::build(qp, settings) {
        Some(ws) => ws,
        None => {
            // Cholesky of P + sigma I + A' rho A cannot fail for PSD P with
            // sigma > 0; treat failure as a numerically broken problem.
            return SubproblemSolution {
                x: DVector::zeros(n),
                y: DVector::zeros(qp.rows().len() + n),
                objective: f64::NAN,
                primal_residual: f64::INFINITY,
                dual_residual: f64::INFINITY,
                comp_residual: f64::INFINITY,
                iterations: 0,
                status: SolveStatus::MaxIters,
            };
        }
    };
    let m = ws.l.len();

    let mut x = warm
        .map(|w| w.x.clone())
        .unwrap_or_else(|| DVector::zeros(n));
    let mut y = warm
        .map(|w| w.y.clone())
        .unwrap_or_else(|| DVector::zeros(m));
    let mut z = ws.a.mul_vec(&x);
    for i in 0..m {
        z[i] = z[i].clamp(ws.l[i], ws.u[i]);
    }

    let alpha = settings.alpha;
    let mut y_prev_check = y.clone();
    let mut iterations = 0;
    let mut best: Option<(f64, DVector<f64>, DVector<f64>, f64, f64, f64)> = None;
    let mut rho = settings.rho;
    let mut checks = 0usize;
    let mut next_polish_check = 0usize;

    let finish = |x: DVector<f64>,
                  y_full: DVector<f64>,
                  iterations: usize,
                  status: SolveStatus,
                  res: (f64, f64, f64)| {
        let objective = 0.5 * (&qp.hessian * &x).dot(&x) + qp.linear.dot(&x) + qp.constant;
        SubproblemSolution {
            x,
            y: y_full,
            objective,
            primal_residual: res.0,
            dual_residual: res.1,
            comp_residual: res.2,
            iterations,
            status,
        }
    };

    loop {
        for _ in 0..settings.check_interval {
            // x update
            let mut rhs = DVector::zeros(n);
            for j in 0..n {
                rhs[j] = settings.sigma * x[j] - qp.linear[j];
            }
            let mut t = DVector::zeros(m);
            for i in 0..m {
                t[i] = ws.rho_vec[i] * z[i] - y[i];
            }
            rhs += ws.a.tr_mul_vec(&t);
            let x_tilde = ws.chol.solve(&rhs);
            let z_tilde = ws.a.mul_vec(&x_tilde);

            for j in 0..n {
                x[j] = alpha * x_tilde[j] + (1.0 - alpha) * x[j];
            }
            for i in 0..m {
                let z_relax = alpha * z_tilde[i] + (1.0 - alpha) * z[i];
                let z_new = (z_relax + y[i] / ws.rho_vec[i]).clamp(ws.l[i], ws.u[i]);
                y[i] += ws.rho_vec[i] * (z_relax - z_new);
                z[i] = z_new;
            }
            iterations += 1;
        }

        checks += 1;
        let res = residuals(qp, &ws, &x, &y);
        let max_res = res.0.max(res.1).max(res.2);
        match &best {
            Some((b, ..)) if *b <= max_res => {}
            _ => best = Some((max_res, x.clone(), y.clone(), res.0, res.1, res.2)),
        }

        if max_res <= settings.tol {
            return finish(x, y, iterations, SolveStatus::Solved, res);
        }

        // Attempt a polish once primal and dual residuals are loosely
        // converged; complementarity is excluded from the gate because the
        // polish itself is what drives it down. Rate-limited: each attempt
        // costs a dense KKT factorization.
        if res.0.max(res.1) <= 1e-3_f64.max(settings.tol) && checks >= next_polish_check {
            next_polish_check = checks + 4;
            if let Some((x_pol, y_pol)) = polish(qp, &ws, &x, &y, &z) {
                let res_pol = residuals(qp, &ws, &x_pol, &y_pol);
                let max_pol = res_pol.0.max(res_pol.1).max(res_pol.2);
                if max_pol <= settings.tol {
                    return finish(x_pol, y_pol, iterations, SolveStatus::Solved, res_pol);
                }
                if max_pol < max_res {
                    best = Some((max_pol, x_pol, y_pol, res_pol.0, res_pol.1, res_pol.2));
                }
            }
        }

        let dy = &y - &y_prev_check;
        if is_infeasibility_certificate(&ws, &dy) {
            return finish(x, y, iterations, SolveStatus::Infeasible, res);
        }
        y_prev_check.copy_from(&y);

        if iterations >= settings.max_iters {
            let (_, bx, by, rp, rd, rc) = best.unwrap();
            return finish(bx, by, iterations, SolveStatus::MaxIters, (rp, rd, rc));
        }

        // adaptive penalty: rebalance rho toward the primal/dual residual
        // ratio (scaled as in OSQP) and refactor when it moves enough
        if checks % 2 == 0 {
            let ax = ws.a.mul_vec(&x);
            let prim_scale = ax.amax().max(1.0);
            let dual_scale = (&qp.hessian * &x)
                .amax()
                .max(qp.linear.amax())
                .max(ws.a.tr_mul_vec(&y).amax())
                .max(1.0);
            let rp_rel = res.0 / prim_scale;
            let rd_rel = res.1 / dual_scale;
            if rp_rel > 0.0 && rd_rel > 0.0 {
                let ratio = (rp_rel / rd_rel).sqrt();
                if !(0.2..=5.0).contains(&ratio) {
                    let new_rho = (rho * ratio).clamp(1e-4, 1e6);
                    if new_rho != rho && ws.set_rho(qp, settings, new_rho).is_some() {
                        rho = new_rho;
                    }
                }
            }
        }
    }
}
