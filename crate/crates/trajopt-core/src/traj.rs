//! Discrete-time optimal control problem abstraction, trajectory containers,
//! and the linearization machinery behind the penalized convex subproblems.
//!
//! A trajectory stacks state and control at each step, `z_k = [x_k; u_k]`,
//! with `u_K` fixed to zero. The problem is described by callbacks for the
//! dynamics, costs, and constraints, each returning first-order data, plus a
//! per-step convex set (box bounds and optional affine equalities).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::{Error, Result};

/// Problem dimensions: `k` control intervals, so `k + 1` trajectory points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n_x: usize,
    pub n_u: usize,
    pub k: usize,
    pub n_g: usize,
    pub n_h: usize,
}

impl Dims {
    pub fn n_z(&self) -> usize {
        self.n_x + self.n_u
    }

    /// Number of trajectory points, `k + 1`.
    pub fn n_points(&self) -> usize {
        self.k + 1
    }

    /// Length of the stacked trajectory vector, `(k + 1) * n_z`.
    pub fn stacked_len(&self) -> usize {
        self.n_points() * self.n_z()
    }
}

/// Stacked state-control trajectory `z_0, ..., z_K`.
///
/// The same container is used for the ADMM dual variables, which share the
/// trajectory layout. The final control `u_K` is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    k: usize,
    n_x: usize,
    n_u: usize,
    data: DVector<f64>,
}

impl Trajectory {
    /// Builds a trajectory from a stacked vector, validating shape, finiteness,
    /// and the `u_K = 0` convention.
    pub fn from_stacked(k: usize, n_x: usize, n_u: usize, data: DVector<f64>) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidArgument("K must be at least 1".into()));
        }
        let n_z = n_x + n_u;
        let expected = (k + 1) * n_z;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "trajectory data",
                expected,
                got: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                what: "trajectory data",
                step: 0,
            });
        }
        let final_u = &data.as_slice()[k * n_z + n_x..];
        if final_u.iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidArgument(
                "final control u_K must be zero".into(),
            ));
        }
        Ok(Self { k, n_x, n_u, data })
    }

    /// All-zero trajectory of the given shape.
    pub fn zeros(k: usize, n_x: usize, n_u: usize) -> Self {
        let n_z = n_x + n_u;
        Self {
            k,
            n_x,
            n_u,
            data: DVector::zeros((k + 1) * n_z),
        }
    }

    pub fn zeros_like(other: &Trajectory) -> Self {
        Self::zeros(other.k, other.n_x, other.n_u)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_z(&self) -> usize {
        self.n_x + self.n_u
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.data
    }

    /// Stacked point `z_k = [x_k; u_k]`.
    pub fn point(&self, step: usize) -> DVectorView<'_, f64> {
        let n_z = self.n_z();
        self.data.rows(step * n_z, n_z)
    }

    pub fn state(&self, step: usize) -> DVectorView<'_, f64> {
        let n_z = self.n_z();
        self.data.rows(step * n_z, self.n_x)
    }

    pub fn control(&self, step: usize) -> DVectorView<'_, f64> {
        let n_z = self.n_z();
        self.data.rows(step * n_z + self.n_x, self.n_u)
    }

    pub fn set_point(&mut self, step: usize, value: &DVector<f64>) {
        let n_z = self.n_z();
        self.data.rows_mut(step * n_z, n_z).copy_from(value);
    }

    pub fn same_shape(&self, other: &Trajectory) -> bool {
        self.k == other.k && self.n_x == other.n_x && self.n_u == other.n_u
    }

    /// Replaces the stacked data, preserving shape. Zeroes `u_K` if the new
    /// data carries a tolerance-level residual there.
    pub fn with_data(&self, data: DVector<f64>) -> Result<Self> {
        let mut data = data;
        if data.len() == self.data.len() {
            let n_z = self.n_z();
            for i in 0..self.n_u {
                data[self.k * n_z + self.n_x + i] = 0.0;
            }
        }
        Self::from_stacked(self.k, self.n_x, self.n_u, data)
    }

    pub fn norm(&self) -> f64 {
        self.data.norm()
    }
}

/// Per-step convex set: box bounds on `z_k` plus optional affine equalities
/// `E z_k = d`. Fixed states (e.g. the initial condition) are expressed as
/// equal lower and upper bounds.
#[derive(Debug, Clone)]
pub struct ConvexSet {
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
    pub eq: Option<(DMatrix<f64>, DVector<f64>)>,
}

impl ConvexSet {
    /// Unbounded set of the given point dimension.
    pub fn free(n_z: usize) -> Self {
        Self {
            lb: DVector::from_element(n_z, f64::NEG_INFINITY),
            ub: DVector::from_element(n_z, f64::INFINITY),
            eq: None,
        }
    }

    /// Membership test with absolute tolerance `tol`.
    pub fn contains(&self, z: DVectorView<'_, f64>, tol: f64) -> bool {
        for i in 0..z.len() {
            if z[i] < self.lb[i] - tol || z[i] > self.ub[i] + tol {
                return false;
            }
        }
        if let Some((e, d)) = &self.eq {
            let r = e * z - d;
            if r.amax() > tol {
                return false;
            }
        }
        true
    }

    /// Euclidean projection onto the box part (affine equalities are not
    /// touched; fixed components are boxes here by convention).
    pub fn clamp(&self, z: &mut nalgebra::DVectorViewMut<'_, f64>) {
        for i in 0..z.len() {
            z[i] = z[i].clamp(self.lb[i], self.ub[i]);
        }
    }
}

/// Value and first-order data of a cost term at one trajectory point.
pub struct CostEval {
    pub value: f64,
    pub grad: DVector<f64>,
    /// Exact quadratic model for convex terms. Convex cost terms are passed
    /// through to the subproblem without linearization, which requires them
    /// to be quadratic; the Hessian must be constant in `z`.
    pub hess: Option<DMatrix<f64>>,
}

type CostFn = dyn Fn(usize, DVectorView<'_, f64>) -> CostEval + Send + Sync;

/// One additive cost term, evaluated per step.
#[derive(Clone)]
pub struct CostTerm {
    /// Convex terms keep their exact (quadratic) form in the subproblem;
    /// nonconvex terms are linearized about the reference.
    pub convex: bool,
    pub eval: Arc<CostFn>,
}

impl CostTerm {
    pub fn convex(eval: Arc<CostFn>) -> Self {
        Self { convex: true, eval }
    }

    pub fn nonconvex(eval: Arc<CostFn>) -> Self {
        Self { convex: false, eval }
    }
}

/// Callback returning a vector value and its Jacobian at `z_k`.
pub type VectorFn = dyn Fn(usize, DVectorView<'_, f64>) -> (DVector<f64>, DMatrix<f64>) + Send + Sync;

/// The nonconvex optimal control problem: dynamics, costs, constraints, and
/// per-step convex sets, all over stacked points `z_k = [x_k; u_k]`.
#[derive(Clone)]
pub struct ProblemDefinition {
    pub dims: Dims,
    /// `(k, z_k) -> (x_{k+1}, d x_{k+1} / d z_k)` for `k` in `0..K`.
    pub dynamics: Arc<VectorFn>,
    /// Running cost terms, summed over `k` in `0..K`.
    pub running_costs: Vec<CostTerm>,
    /// Terminal cost terms, evaluated at `k = K`.
    pub terminal_costs: Vec<CostTerm>,
    /// Nonconvex inequality constraints `g(z_k) <= 0`, `n_g` rows.
    pub ineq: Option<Arc<VectorFn>>,
    /// Nonconvex equality constraints `h(z_k) = 0`, `n_h` rows.
    pub eq: Option<Arc<VectorFn>>,
    /// Convex sets `Z^c_k`, one per trajectory point.
    pub convex_sets: Vec<ConvexSet>,
}

impl ProblemDefinition {
    /// Checks that a trajectory matches the problem shape.
    pub fn check_shape(&self, z: &Trajectory) -> Result<()> {
        if z.k() != self.dims.k || z.n_x() != self.dims.n_x || z.n_u() != self.dims.n_u {
            return Err(Error::DimensionMismatch {
                what: "trajectory shape",
                expected: self.dims.stacked_len(),
                got: z.as_vector().len(),
            });
        }
        Ok(())
    }

    /// True nonlinear cost `J_K + sum_k J_k` at `z`.
    pub fn cost(&self, z: &Trajectory) -> f64 {
        let mut total = 0.0;
        for k in 0..self.dims.k {
            for term in &self.running_costs {
                total += (term.eval)(k, z.point(k)).value;
            }
        }
        for term in &self.terminal_costs {
            total += (term.eval)(self.dims.k, z.point(self.dims.k)).value;
        }
        total
    }

    /// Whether `z` lies in every `Z^c_k` within `tol`.
    pub fn in_convex_set(&self, z: &Trajectory, tol: f64) -> bool {
        (0..=self.dims.k).all(|k| self.convex_sets[k].contains(z.point(k), tol))
    }
}

/// Penalty weights for the exact-penalty cost: `w1` on dynamics defects,
/// `w2` on inequality violations, `w3` on equality violations, and `wp` as
/// the proximal trust-region weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub wp: f64,
    pub ineq_mode: InequalityPenalty,
}

/// How linearized inequality values enter the penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InequalityPenalty {
    /// Penalize `|g|`: strictly feasible values are also charged.
    AbsoluteValue,
    /// Penalize `max(g, 0)`: only violations are charged. This is the
    /// variant the benchmarks use.
    PositivePart,
}

impl InequalityPenalty {
    pub fn apply(&self, g: f64) -> f64 {
        match self {
            InequalityPenalty::AbsoluteValue => g.abs(),
            InequalityPenalty::PositivePart => g.max(0.0),
        }
    }
}

impl PenaltyWeights {
    pub fn new(w1: f64, w2: f64, w3: f64, wp: f64) -> Self {
        Self {
            w1,
            w2,
            w3,
            wp,
            ineq_mode: InequalityPenalty::AbsoluteValue,
        }
    }

    pub fn with_mode(mut self, mode: InequalityPenalty) -> Self {
        self.ineq_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if [self.w1, self.w2, self.w3, self.wp]
            .iter()
            .any(|w| !w.is_finite() || *w < 0.0)
        {
            return Err(Error::InvalidArgument(
                "penalty weights must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Per-step quadratic cost model `c + q'(z - z_ref) + 1/2 (z - z_ref)' Q (z - z_ref)`,
/// assembled from exact convex terms and linearized nonconvex terms.
#[derive(Debug, Clone)]
pub struct QuadraticCostModel {
    pub constant: f64,
    pub linear: DVector<f64>,
    pub quadratic: DMatrix<f64>,
}

impl QuadraticCostModel {
    pub fn eval(&self, dz: &DVector<f64>) -> f64 {
        self.constant + self.linear.dot(dz) + 0.5 * (&self.quadratic * dz).dot(dz)
    }
}

/// First-order data of the problem at a reference trajectory.
///
/// All linear models are stored as `(value, jacobian)` pairs at the
/// reference; evaluating a model at the reference reproduces the value
/// exactly.
#[derive(Clone)]
pub struct LinearizedProblem {
    pub dims: Dims,
    pub reference: Trajectory,
    /// `(f_k(z_ref_k), A_k)` for `k` in `0..K`.
    pub dynamics: Vec<(DVector<f64>, DMatrix<f64>)>,
    /// `(g(z_ref_k), J_g)` for `k` in `0..=K`; empty when `n_g = 0`.
    pub ineq: Vec<(DVector<f64>, DMatrix<f64>)>,
    /// `(h(z_ref_k), J_h)` for `k` in `0..=K`; empty when `n_h = 0`.
    pub eq: Vec<(DVector<f64>, DMatrix<f64>)>,
    /// Per-step cost model (index `K` is the terminal cost).
    pub cost: Vec<QuadraticCostModel>,
    pub convex_sets: Vec<ConvexSet>,
}

impl LinearizedProblem {
    /// Linearized dynamics defect `x_{k+1} - f~_k(z_ref_k, z_k)`.
    pub fn dynamics_defect(&self, k: usize, z: &Trajectory) -> DVector<f64> {
        let (f_val, a) = &self.dynamics[k];
        let dz = DVector::from(z.point(k)) - DVector::from(self.reference.point(k));
        DVector::from(z.state(k + 1)) - (f_val + a * dz)
    }

    /// Linearized inequality value `g~(z_ref_k, z_k)`.
    pub fn ineq_value(&self, k: usize, z: &Trajectory) -> DVector<f64> {
        let (g_val, j) = &self.ineq[k];
        let dz = DVector::from(z.point(k)) - DVector::from(self.reference.point(k));
        g_val + j * dz
    }

    /// Linearized equality value `h~(z_ref_k, z_k)`.
    pub fn eq_value(&self, k: usize, z: &Trajectory) -> DVector<f64> {
        let (h_val, j) = &self.eq[k];
        let dz = DVector::from(z.point(k)) - DVector::from(self.reference.point(k));
        h_val + j * dz
    }

    /// Cost of the per-step models at `z` (convex terms exact, nonconvex
    /// terms linearized).
    pub fn cost(&self, z: &Trajectory) -> f64 {
        let mut total = 0.0;
        for k in 0..=self.dims.k {
            let dz = DVector::from(z.point(k)) - DVector::from(self.reference.point(k));
            total += self.cost[k].eval(&dz);
        }
        total
    }
}

fn check_finite(v: &DVector<f64>, what: &'static str, step: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what, step })
    }
}

fn check_finite_mat(m: &DMatrix<f64>, what: &'static str, step: usize) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what, step })
    }
}

/// Computes the exact first-order data of every callback at `reference`.
///
/// Convex cost terms keep their quadratic form; nonconvex terms contribute
/// value and gradient only.
pub fn linearize(problem: &ProblemDefinition, reference: &Trajectory) -> Result<LinearizedProblem> {
    problem.check_shape(reference)?;
    let dims = problem.dims;
    let n_z = dims.n_z();

    let mut dynamics = Vec::with_capacity(dims.k);
    for k in 0..dims.k {
        let (f_val, a) = (problem.dynamics)(k, reference.point(k));
        if f_val.len() != dims.n_x {
            return Err(Error::DimensionMismatch {
                what: "dynamics value",
                expected: dims.n_x,
                got: f_val.len(),
            });
        }
        if a.shape() != (dims.n_x, n_z) {
            return Err(Error::DimensionMismatch {
                what: "dynamics jacobian",
                expected: dims.n_x * n_z,
                got: a.len(),
            });
        }
        check_finite(&f_val, "dynamics value", k)?;
        check_finite_mat(&a, "dynamics jacobian", k)?;
        dynamics.push((f_val, a));
    }

    let mut ineq = Vec::new();
    if let Some(g) = &problem.ineq {
        for k in 0..=dims.k {
            let (val, jac) = g(k, reference.point(k));
            if val.len() != dims.n_g || jac.shape() != (dims.n_g, n_z) {
                return Err(Error::DimensionMismatch {
                    what: "inequality constraint",
                    expected: dims.n_g,
                    got: val.len(),
                });
            }
            check_finite(&val, "inequality value", k)?;
            check_finite_mat(&jac, "inequality jacobian", k)?;
            ineq.push((val, jac));
        }
    } else if dims.n_g != 0 {
        return Err(Error::InvalidArgument(
            "n_g > 0 but no inequality callback".into(),
        ));
    }

    let mut eq = Vec::new();
    if let Some(h) = &problem.eq {
        for k in 0..=dims.k {
            let (val, jac) = h(k, reference.point(k));
            if val.len() != dims.n_h || jac.shape() != (dims.n_h, n_z) {
                return Err(Error::DimensionMismatch {
                    what: "equality constraint",
                    expected: dims.n_h,
                    got: val.len(),
                });
            }
            check_finite(&val, "equality value", k)?;
            check_finite_mat(&jac, "equality jacobian", k)?;
            eq.push((val, jac));
        }
    } else if dims.n_h != 0 {
        return Err(Error::InvalidArgument(
            "n_h > 0 but no equality callback".into(),
        ));
    }

    let mut cost = Vec::with_capacity(dims.k + 1);
    for k in 0..=dims.k {
        let mut constant = 0.0;
        let mut linear = DVector::zeros(n_z);
        let mut quadratic = DMatrix::zeros(n_z, n_z);
        let terms = if k < dims.k {
            &problem.running_costs
        } else {
            &problem.terminal_costs
        };
        for term in terms {
            let e = (term.eval)(k, reference.point(k));
            if e.grad.len() != n_z {
                return Err(Error::DimensionMismatch {
                    what: "cost gradient",
                    expected: n_z,
                    got: e.grad.len(),
                });
            }
            if !e.value.is_finite() {
                return Err(Error::NonFinite {
                    what: "cost value",
                    step: k,
                });
            }
            check_finite(&e.grad, "cost gradient", k)?;
            constant += e.value;
            linear += &e.grad;
            if term.convex {
                if let Some(h) = e.hess {
                    check_finite_mat(&h, "cost hessian", k)?;
                    quadratic += h;
                }
            }
        }
        cost.push(QuadraticCostModel {
            constant,
            linear,
            quadratic,
        });
    }

    Ok(LinearizedProblem {
        dims,
        reference: reference.clone(),
        dynamics,
        ineq,
        eq,
        cost,
        convex_sets: problem.convex_sets.clone(),
    })
}

/// Breakdown of the exact-penalty cost. `total` is the finite part; the
/// convex-set indicator is reported separately as `in_convex_set`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenalizedCost {
    pub total: f64,
    pub cost: f64,
    pub dynamics_penalty: f64,
    pub ineq_penalty: f64,
    pub eq_penalty: f64,
    pub in_convex_set: bool,
}

/// Finite part of the penalized linearized cost at `z`, with the convex-set
/// indicator reported as a flag: cost model plus `w1 * sum_k ||defect_k||_1 +
/// w2 * sum |g~| + w3 * sum ||h~||_1` (or the positive-part variant for the
/// inequality term).
pub fn penalized_linear_cost(
    lin: &LinearizedProblem,
    weights: &PenaltyWeights,
    z: &Trajectory,
) -> Result<PenalizedCost> {
    if !z.same_shape(&lin.reference) {
        return Err(Error::DimensionMismatch {
            what: "trajectory shape",
            expected: lin.reference.as_vector().len(),
            got: z.as_vector().len(),
        });
    }
    weights.validate()?;
    let dims = lin.dims;

    let cost = lin.cost(z);
    let mut dyn_pen = 0.0;
    for k in 0..dims.k {
        dyn_pen += lin.dynamics_defect(k, z).lp_norm(1);
    }
    let mut ineq_pen = 0.0;
    if dims.n_g > 0 {
        for k in 0..=dims.k {
            ineq_pen += lin
                .ineq_value(k, z)
                .iter()
                .map(|&g| weights.ineq_mode.apply(g))
                .sum::<f64>();
        }
    }
    let mut eq_pen = 0.0;
    if dims.n_h > 0 {
        for k in 0..=dims.k {
            eq_pen += lin.eq_value(k, z).lp_norm(1);
        }
    }

    let in_convex_set =
        (0..=dims.k).all(|k| lin.convex_sets[k].contains(z.point(k), MEMBERSHIP_TOL));

    Ok(PenalizedCost {
        total: cost + weights.w1 * dyn_pen + weights.w2 * ineq_pen + weights.w3 * eq_pen,
        cost,
        dynamics_penalty: dyn_pen,
        ineq_penalty: ineq_pen,
        eq_penalty: eq_pen,
        in_convex_set,
    })
}

/// Absolute tolerance for convex-set membership reporting.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Same penalty structure as [`penalized_linear_cost`] but with the true
/// nonlinear dynamics, constraints, and costs. Used as the convergence
/// monitor of both engines.
pub fn true_penalized_cost(
    problem: &ProblemDefinition,
    weights: &PenaltyWeights,
    z: &Trajectory,
) -> Result<PenalizedCost> {
    problem.check_shape(z)?;
    weights.validate()?;
    let dims = problem.dims;

    let cost = problem.cost(z);
    let mut dyn_pen = 0.0;
    for k in 0..dims.k {
        let (f_val, _) = (problem.dynamics)(k, z.point(k));
        let defect = DVector::from(z.state(k + 1)) - f_val;
        dyn_pen += defect.lp_norm(1);
    }
    let mut ineq_pen = 0.0;
    if let Some(g) = &problem.ineq {
        for k in 0..=dims.k {
            let (val, _) = g(k, z.point(k));
            ineq_pen += val.iter().map(|&v| weights.ineq_mode.apply(v)).sum::<f64>();
        }
    }
    let mut eq_pen = 0.0;
    if let Some(h) = &problem.eq {
        for k in 0..=dims.k {
            let (val, _) = h(k, z.point(k));
            eq_pen += val.lp_norm(1);
        }
    }

    Ok(PenalizedCost {
        total: cost + weights.w1 * dyn_pen + weights.w2 * ineq_pen + weights.w3 * eq_pen,
        cost,
        dynamics_penalty: dyn_pen,
        ineq_penalty: ineq_pen,
        eq_penalty: eq_pen,
        in_convex_set: problem.in_convex_set(z, MEMBERSHIP_TOL),
    })
}
