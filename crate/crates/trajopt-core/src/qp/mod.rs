//! Convex subproblem layer.
//!
//! The 1-norm penalty terms of the prox-linear cost are reformulated with
//! slack variables into a convex quadratic program over the stacked
//! trajectory plus slacks; the Euclidean projection onto the convexified
//! constraint set is a second QP over the trajectory alone. Both are solved
//! by the in-crate operator-splitting solver.

mod build;
mod solver;
mod sparse;

pub use build::{
    build_consensus_qp, build_scp_qp, project_onto_z, project_onto_z_with,
    trajectory_from_solution,
};
pub use solver::{solve_qp, solve_qp_with, QpSettings, WarmStart};

use nalgebra::{DMatrix, DVector};

/// One affine constraint row `lower <= coeffs . x <= upper`.
#[derive(Debug, Clone)]
pub struct ConstraintRow {
    pub coeffs: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
}

/// Convex quadratic program
/// `min 1/2 x'Px + q'x + c  s.t.  l <= Ax <= u, lb <= x <= ub`.
///
/// The Hessian is symmetric PSD by construction (scaled identities and
/// per-step cost blocks). Equalities are rows with `lower == upper`.
/// By convention of the builders in this module, the first
/// `(K + 1) * n_z` variables are the stacked trajectory and the remainder
/// are penalty slacks.
#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
    rows: Vec<ConstraintRow>,
}

impl QuadraticProgram {
    pub fn new(n: usize) -> Self {
        Self {
            hessian: DMatrix::zeros(n, n),
            linear: DVector::zeros(n),
            constant: 0.0,
            lb: DVector::from_element(n, f64::NEG_INFINITY),
            ub: DVector::from_element(n, f64::INFINITY),
            rows: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.linear.len()
    }

    pub fn rows(&self) -> &[ConstraintRow] {
        &self.rows
    }

    /// `coeffs . x = rhs`
    pub fn add_eq_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push(ConstraintRow {
            coeffs,
            lower: rhs,
            upper: rhs,
        });
    }

    /// `coeffs . x <= rhs`
    pub fn add_le_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push(ConstraintRow {
            coeffs,
            lower: f64::NEG_INFINITY,
            upper: rhs,
        });
    }

    pub fn add_range_row(&mut self, coeffs: Vec<(usize, f64)>, lower: f64, upper: f64) {
        self.rows.push(ConstraintRow {
            coeffs,
            lower,
            upper,
        });
    }

    pub fn set_bound(&mut self, var: usize, lower: f64, upper: f64) {
        self.lb[var] = lower;
        self.ub[var] = upper;
    }

    /// Tightens existing bounds by intersection.
    pub fn intersect_bound(&mut self, var: usize, lower: f64, upper: f64) {
        self.lb[var] = self.lb[var].max(lower);
        self.ub[var] = self.ub[var].min(upper);
    }

    pub fn objective_at(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.hessian * x).dot(x) + self.linear.dot(x) + self.constant
    }
}

/// Outcome classification of a QP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Solved,
    MaxIters,
    Infeasible,
}

/// Solution of a convex subproblem. `x` holds the full variable vector
/// (trajectory prefix plus slacks); `y` the constraint duals (rows first,
/// then variable bounds).
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub comp_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

impl SubproblemSolution {
    pub fn solved(&self) -> bool {
        self.status == SolveStatus::Solved
    }
}
