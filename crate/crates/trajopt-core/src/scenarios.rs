//! Benchmark problems: constant-speed unicycle obstacle avoidance and its
//! Gaussian-terrain variant, plus the initial-guess generators.
//!
//! The unicycle state is `[r_x, r_y, theta]` with yaw rate as the single
//! control. Both scenarios share the geometry: two obstacles flanking a
//! central passage and a third, inactive one past the goal. The terrain
//! variant overlays Gaussian cost bumps that split the passage into a
//! penalized upper corridor and a negative-cost lower corridor.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, DVectorView, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::osscp::OsscpConfig;
use crate::scp::ScpConfig;
use crate::traj::{
    ConvexSet, CostEval, CostTerm, Dims, InequalityPenalty, PenaltyWeights, ProblemDefinition,
    Trajectory, VectorFn,
};
use crate::{Error, Result};

/// Names accepted by [`build_scenario`].
pub const SCENARIO_NAMES: &[&str] = &["unicycle-basic", "unicycle-terrain"];

/// Circular keep-out region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Obstacle avoidance constraint `g = R - ||p - c|| <= 0` with its gradient
/// with respect to the stacked point `z_k = [r_x, r_y, theta, u]`.
///
/// Away from the center the position gradient has unit norm; within `1e-9`
/// of the center it is fixed to `(-1, 0)` to remove the singularity.
pub fn obstacle_constraint(obs: &Obstacle, z_k: DVectorView<'_, f64>) -> (f64, DVector<f64>) {
    let d = Vector2::new(z_k[0] - obs.center[0], z_k[1] - obs.center[1]);
    let dist = d.norm();
    let mut grad = DVector::zeros(z_k.len());
    if dist < 1e-9 {
        grad[0] = -1.0;
    } else {
        grad[0] = -d.x / dist;
        grad[1] = -d.y / dist;
    }
    (obs.radius - dist, grad)
}

/// One Gaussian component of the terrain field. The signed `amplitude`
/// extends the unit-height field so the lower corridor can carry negative
/// cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerrainBump {
    pub amplitude: f64,
    pub mean: [f64; 2],
    /// Row-major 2x2 covariance; must be symmetric positive definite.
    pub cov: [[f64; 2]; 2],
}

impl TerrainBump {
    fn cov_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(
            self.cov[0][0],
            self.cov[0][1],
            self.cov[1][0],
            self.cov[1][1],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidArgument(
                "terrain amplitude must be finite".into(),
            ));
        }
        let c = self.cov_matrix();
        if (c.m12 - c.m21).abs() > 1e-12 {
            return Err(Error::InvalidArgument(
                "terrain covariance must be symmetric".into(),
            ));
        }
        if c.m11 <= 0.0 || c.determinant() <= 0.0 {
            return Err(Error::InvalidArgument(
                "terrain covariance must be positive definite".into(),
            ));
        }
        Ok(())
    }
}

/// Sum-of-Gaussians cost map over position.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TerrainField {
    pub bumps: Vec<TerrainBump>,
}

impl TerrainField {
    pub fn validate(&self) -> Result<()> {
        self.bumps.iter().try_for_each(TerrainBump::validate)
    }

    /// Field value and position gradient at `p`.
    pub fn cost_at(&self, p: Vector2<f64>) -> (f64, Vector2<f64>) {
        let mut value = 0.0;
        let mut grad = Vector2::zeros();
        for bump in &self.bumps {
            let inv = bump
                .cov_matrix()
                .try_inverse()
                .expect("validated covariance is invertible");
            let d = p - Vector2::new(bump.mean[0], bump.mean[1]);
            let e = bump.amplitude * (-0.5 * (inv * d).dot(&d)).exp();
            value += e;
            grad += -e * (inv * d);
        }
        (value, grad)
    }
}

/// Terrain cost and its gradient with respect to the stacked point `z_k`.
pub fn terrain_cost(field: &TerrainField, z_k: DVectorView<'_, f64>) -> (f64, DVector<f64>) {
    let (value, g) = field.cost_at(Vector2::new(z_k[0], z_k[1]));
    let mut grad = DVector::zeros(z_k.len());
    grad[0] = g.x;
    grad[1] = g.y;
    (value, grad)
}

/// Unicycle dynamics callback: `x_{k+1} = [r_x + v cos(theta) dt,
/// r_y + v sin(theta) dt, theta + u dt]` with its Jacobian in `z_k`.
pub fn unicycle_dynamics(dt: f64, speed: f64) -> Arc<VectorFn> {
    Arc::new(move |_k, z: DVectorView<'_, f64>| {
        let theta = z[2];
        let (s, c) = theta.sin_cos();
        let next = DVector::from_vec(vec![
            z[0] + speed * c * dt,
            z[1] + speed * s * dt,
            theta + z[3] * dt,
        ]);
        let mut jac = DMatrix::zeros(3, 4);
        jac[(0, 0)] = 1.0;
        jac[(0, 2)] = -speed * s * dt;
        jac[(1, 1)] = 1.0;
        jac[(1, 2)] = speed * c * dt;
        jac[(2, 2)] = 1.0;
        jac[(2, 3)] = dt;
        (next, jac)
    })
}

/// The four named initial-guess shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuessKind {
    Over,
    Straight,
    Under,
    LowerCorridor,
}

impl GuessKind {
    pub fn name(&self) -> &'static str {
        match self {
            GuessKind::Over => "over",
            GuessKind::Straight => "straight",
            GuessKind::Under => "under",
            GuessKind::LowerCorridor => "lower-corridor",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "over" => Ok(GuessKind::Over),
            "straight" => Ok(GuessKind::Straight),
            "under" => Ok(GuessKind::Under),
            "lower-corridor" => Ok(GuessKind::LowerCorridor),
            other => Err(Error::InvalidArgument(format!(
                "unknown guess kind '{other}'"
            ))),
        }
    }
}

/// Geometry and cost parameters shared by both benchmarks. Kept next to the
/// assembled [`ProblemDefinition`] so the CLI can echo the setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub k: usize,
    pub dt: f64,
    pub speed: f64,
    /// Initial state `[r_x, r_y, theta]`, fixed through the first convex set.
    pub start: [f64; 3],
    /// Goal position; heading is unpenalized.
    pub goal: [f64; 2],
    /// Diagonal terminal position weight `q` in `Q_g = diag(q, q, 0)`.
    pub q_goal: f64,
    pub u_max: f64,
    /// Perpendicular offset of the over/under arc waypoints.
    pub arc_offset: f64,
    /// Waypoint of the lower-corridor guess.
    pub lower_waypoint: [f64; 2],
    pub obstacles: Vec<Obstacle>,
    pub terrain: Option<TerrainField>,
}

impl ScenarioParams {
    pub fn dims(&self) -> Dims {
        Dims {
            n_x: 3,
            n_u: 1,
            k: self.k,
            n_g: self.obstacles.len(),
            n_h: 0,
        }
    }

    fn start_pos(&self) -> Vector2<f64> {
        Vector2::new(self.start[0], self.start[1])
    }

    fn goal_pos(&self) -> Vector2<f64> {
        Vector2::new(self.goal[0], self.goal[1])
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidArgument("K must be at least 2".into()));
        }
        for (name, v) in [
            ("dt", self.dt),
            ("speed", self.speed),
            ("q_goal", self.q_goal),
            ("u_max", self.u_max),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        for obs in &self.obstacles {
            if !(obs.radius > 0.0) {
                return Err(Error::InvalidArgument(
                    "obstacle radius must be positive".into(),
                ));
            }
        }
        if let Some(t) = &self.terrain {
            t.validate()?;
        }
        Ok(())
    }
}

/// A fully assembled benchmark: the problem, its parameters, and the solver
/// defaults. Immutable once built.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub params: ScenarioParams,
    pub problem: ProblemDefinition,
    pub scp: ScpConfig,
    pub osscp: OsscpConfig,
    /// Guesses used by default (in agent order for OS-SCP).
    pub default_guesses: Vec<GuessKind>,
}

impl Scenario {
    pub fn guess(&self, kind: GuessKind) -> Trajectory {
        make_guess(kind, &self.params)
    }

    /// Default guesses paired with their names, in agent order.
    pub fn guesses(&self) -> Vec<(GuessKind, Trajectory)> {
        self.default_guesses
            .iter()
            .map(|&kind| (kind, self.guess(kind)))
            .collect()
    }
}

/// Resamples a polyline to `n` points uniformly spaced in arc length.
fn sample_polyline(points: &[Vector2<f64>], n: usize) -> Vec<Vector2<f64>> {
    let mut cumulative = vec![0.0];
    for w in points.windows(2) {
        cumulative.push(cumulative.last().unwrap() + (w[1] - w[0]).norm());
    }
    let total = *cumulative.last().unwrap();
    if total <= 0.0 {
        return vec![points[0]; n];
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for i in 0..n {
        let s = total * i as f64 / (n - 1) as f64;
        while seg + 2 < cumulative.len() && cumulative[seg + 1] < s {
            seg += 1;
        }
        let span = cumulative[seg + 1] - cumulative[seg];
        let t = if span > 0.0 {
            (s - cumulative[seg]) / span
        } else {
            0.0
        };
        out.push(points[seg] + (points[seg + 1] - points[seg]) * t);
    }
    out
}

/// Samples a circular arc from `a` to `b` passing through `via`. Falls back
/// to the polyline through the waypoint when the three points are close to
/// collinear.
fn sample_arc(a: Vector2<f64>, via: Vector2<f64>, b: Vector2<f64>, n: usize) -> Vec<Vector2<f64>> {
    // circumcenter from the perpendicular-bisector linear system
    let d1 = via - a;
    let d2 = b - a;
    let det = d1.x * d2.y - d1.y * d2.x;
    if det.abs() < 1e-9 {
        return sample_polyline(&[a, via, b], n);
    }
    let u1 = 0.5 * d1.norm_squared();
    let u2 = 0.5 * d2.norm_squared();
    let cx = (u1 * d2.y - u2 * d1.y) / det;
    let cy = (u2 * d1.x - u1 * d2.x) / det;
    let center = a + Vector2::new(cx, cy);

    let angle = |p: Vector2<f64>| (p.y - center.y).atan2(p.x - center.x);
    let two_pi = std::f64::consts::TAU;
    let ccw = |from: f64, to: f64| (to - from).rem_euclid(two_pi);
    let (a0, a_via, a1) = (angle(a), angle(via), angle(b));
    // sweep in whichever direction passes through the waypoint first
    let sweep = if ccw(a0, a_via) <= ccw(a0, a1) {
        ccw(a0, a1)
    } else {
        -(two_pi - ccw(a0, a1))
    };
    let radius = (a - center).norm();
    (0..n)
        .map(|i| {
            let t = a0 + sweep * i as f64 / (n - 1) as f64;
            center + radius * Vector2::new(t.cos(), t.sin())
        })
        .collect()
}

/// Builds a trajectory from sampled positions: headings follow the segment
/// directions (unwrapped, no angle wrapping), and yaw rates are
/// back-computed from heading differences and clamped to the rate bound.
/// The result is generally not dynamically feasible; the penalties absorb
/// the defects.
fn trajectory_from_positions(params: &ScenarioParams, positions: &[Vector2<f64>]) -> Trajectory {
    let k = params.k;
    let n_z = 4;
    let mut theta = Vec::with_capacity(k + 1);
    theta.push(params.start[2]);
    for i in 0..k {
        let d = positions[i + 1] - positions[i];
        let raw = if d.norm() > 1e-12 {
            d.y.atan2(d.x)
        } else {
            theta[i]
        };
        // keep theta continuous relative to the previous heading
        let prev: f64 = theta[i];
        let wrapped = prev + (raw - prev + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU)
            - std::f64::consts::PI;
        theta.push(wrapped);
    }
    let mut data = DVector::zeros((k + 1) * n_z);
    for i in 0..=k {
        data[i * n_z] = positions[i].x;
        data[i * n_z + 1] = positions[i].y;
        data[i * n_z + 2] = theta[i];
        if i < k {
            let u = (theta[i + 1] - theta[i]) / params.dt;
            data[i * n_z + 3] = u.clamp(-params.u_max, params.u_max);
        }
    }
    Trajectory::from_stacked(k, 3, 1, data).expect("guess construction is shape-correct")
}

/// Generates one of the named initial guesses.
///
/// `straight` interpolates position linearly from start to goal; `over` and
/// `under` are circular arcs through a waypoint offset perpendicular to the
/// start-goal segment by the arc offset; `lower-corridor` is a piecewise
/// path through the lower-corridor waypoint.
pub fn make_guess(kind: GuessKind, params: &ScenarioParams) -> Trajectory {
    let a = params.start_pos();
    let b = params.goal_pos();
    let n = params.k + 1;
    let chord = b - a;
    let positions = if chord.norm() < 1e-12 {
        vec![a; n]
    } else {
        let mid = a + chord * 0.5;
        let normal = Vector2::new(-chord.y, chord.x).normalize();
        match kind {
            GuessKind::Straight => sample_polyline(&[a, b], n),
            GuessKind::Over => sample_arc(a, mid + normal * params.arc_offset, b, n),
            GuessKind::Under => sample_arc(a, mid - normal * params.arc_offset, b, n),
            GuessKind::LowerCorridor => {
                let w = Vector2::new(params.lower_waypoint[0], params.lower_waypoint[1]);
                sample_polyline(&[a, w, b], n)
            }
        }
    };
    trajectory_from_positions(params, &positions)
}

/// Builds a guess from explicit position waypoints: the polyline through
/// start, waypoints, and goal, resampled uniformly in arc length.
pub fn waypoint_guess(params: &ScenarioParams, waypoints: &[[f64; 2]]) -> Trajectory {
    let mut pts = vec![params.start_pos()];
    pts.extend(waypoints.iter().map(|w| Vector2::new(w[0], w[1])));
    pts.push(params.goal_pos());
    let positions = sample_polyline(&pts, params.k + 1);
    trajectory_from_positions(params, &positions)
}

/// Lateral position at mid-course: the `r_y` of the trajectory point whose
/// `r_x` is closest to the midpoint between start and goal.
pub fn mid_course_lateral(params: &ScenarioParams, z: &Trajectory) -> f64 {
    let mid_x = 0.5 * (params.start[0] + params.goal[0]);
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for k in 0..=z.k() {
        let d = (z.state(k)[0] - mid_x).abs();
        if d < best_dist {
            best_dist = d;
            best = k;
        }
    }
    z.state(best)[1]
}

/// Obstacle homotopy class of a trajectory: which side of / between the
/// corridor-forming obstacles it passes at mid-course.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomotopyClass {
    Over,
    Between,
    Under,
}

/// Classifies by the mid-course lateral position against the inner edges of
/// the two corridor-forming obstacles (the pair symmetric about the
/// start-goal axis).
pub fn classify_homotopy(params: &ScenarioParams, z: &Trajectory) -> HomotopyClass {
    let lateral = mid_course_lateral(params, z);
    let mut upper_edge = f64::INFINITY;
    let mut lower_edge = f64::NEG_INFINITY;
    for obs in &params.obstacles {
        let inner_low = obs.center[1] - obs.radius;
        let inner_high = obs.center[1] + obs.radius;
        if obs.center[1] > 0.0 {
            upper_edge = upper_edge.min(inner_low);
        } else if obs.center[1] < 0.0 {
            lower_edge = lower_edge.max(inner_high);
        }
    }
    if upper_edge.is_finite() && lateral > upper_edge {
        HomotopyClass::Over
    } else if lower_edge.is_finite() && lateral < lower_edge {
        HomotopyClass::Under
    } else {
        HomotopyClass::Between
    }
}

/// Config-file overrides of the scenario and solver defaults. All fields
/// optional; `None` keeps the default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioOverrides {
    pub k: Option<usize>,
    pub dt: Option<f64>,
    pub speed: Option<f64>,
    pub goal: Option<[f64; 2]>,
    pub q_goal: Option<f64>,
    pub u_max: Option<f64>,
    pub arc_offset: Option<f64>,
    pub obstacles: Option<Vec<Obstacle>>,
    pub terrain: Option<TerrainField>,
    pub w1: Option<f64>,
    pub w2: Option<f64>,
    pub w3: Option<f64>,
    pub wp: Option<f64>,
    pub ineq_penalty: Option<InequalityPenalty>,
    pub rho: Option<f64>,
    pub eps_r: Option<f64>,
    pub eps_s: Option<f64>,
    pub eps_c_scp: Option<f64>,
    pub eps_c_osscp: Option<f64>,
    pub max_iters_scp: Option<usize>,
    pub max_iters_osscp: Option<usize>,
    pub qp_tol: Option<f64>,
}

fn default_params() -> ScenarioParams {
    ScenarioParams {
        k: 40,
        dt: 0.25,
        speed: 1.0,
        start: [0.0, 0.0, 0.0],
        // slightly past the reachable range so the optimum has a nonzero,
        // well-conditioned cost
        goal: [10.5, 0.0],
        q_goal: 10.0,
        u_max: 2.0,
        arc_offset: 4.8,
        lower_waypoint: [5.0, -1.0],
        obstacles: vec![
            Obstacle {
                center: [5.0, 2.8],
                radius: 1.5,
            },
            Obstacle {
                center: [5.0, -2.8],
                radius: 1.5,
            },
            // inactive along all solution classes; keeps the geometry
            // symmetric about the start-goal axis
            Obstacle {
                center: [13.0, 0.0],
                radius: 1.5,
            },
        ],
        terrain: None,
    }
}

fn default_terrain() -> TerrainField {
    TerrainField {
        bumps: vec![
            // narrow positive ridge just below the axis: pushes the straight
            // guess up into the upper corridor and hides the well behind it
            TerrainBump {
                amplitude: 0.8,
                mean: [5.0, -0.3],
                cov: [[1.44, 0.0], [0.0, 0.09]],
            },
            // broad positive bump penalizing the upper corridor
            TerrainBump {
                amplitude: 1.0,
                mean: [5.0, 1.0],
                cov: [[1.44, 0.0], [0.0, 0.36]],
            },
            // negative-cost lower corridor
            TerrainBump {
                amplitude: -1.5,
                mean: [5.0, -1.0],
                cov: [[2.25, 0.0], [0.0, 0.1225]],
            },
        ],
    }
}

fn apply_overrides(params: &mut ScenarioParams, o: &ScenarioOverrides) {
    if let Some(k) = o.k {
        params.k = k;
    }
    if let Some(dt) = o.dt {
        params.dt = dt;
    }
    if let Some(speed) = o.speed {
        params.speed = speed;
    }
    if let Some(goal) = o.goal {
        params.goal = goal;
    }
    if let Some(q) = o.q_goal {
        params.q_goal = q;
    }
    if let Some(u) = o.u_max {
        params.u_max = u;
    }
    if let Some(a) = o.arc_offset {
        params.arc_offset = a;
    }
    if let Some(obs) = &o.obstacles {
        params.obstacles = obs.clone();
    }
    if let Some(t) = &o.terrain {
        params.terrain = Some(t.clone());
    }
}

/// Builds the [`ProblemDefinition`] for a parameter set: quadratic terminal
/// goal cost and running yaw-rate cost, obstacle inequality constraints,
/// optional terrain running cost, and per-step convex sets (fixed initial
/// state, yaw-rate bounds, pinned `u_K`).
pub fn build_problem(params: &ScenarioParams) -> Result<ProblemDefinition> {
    params.validate()?;
    let dims = params.dims();
    let n_z = dims.n_z();

    let mut running_costs = vec![CostTerm::convex(Arc::new(
        |_k, z: DVectorView<'_, f64>| {
            let u = z[3];
            let mut grad = DVector::zeros(4);
            grad[3] = 2.0 * u;
            let mut hess = DMatrix::zeros(4, 4);
            hess[(3, 3)] = 2.0;
            CostEval {
                value: u * u,
                grad,
                hess: Some(hess),
            }
        },
    ))];
    if let Some(field) = params.terrain.clone() {
        running_costs.push(CostTerm::nonconvex(Arc::new(
            move |_k, z: DVectorView<'_, f64>| {
                let (value, grad) = terrain_cost(&field, z);
                CostEval {
                    value,
                    grad,
                    hess: None,
                }
            },
        )));
    }

    let goal = params.goal_pos();
    let q_goal = params.q_goal;
    let terminal_costs = vec![CostTerm::convex(Arc::new(
        move |_k, z: DVectorView<'_, f64>| {
            let d = Vector2::new(z[0] - goal.x, z[1] - goal.y);
            let mut grad = DVector::zeros(4);
            grad[0] = 2.0 * q_goal * d.x;
            grad[1] = 2.0 * q_goal * d.y;
            let mut hess = DMatrix::zeros(4, 4);
            hess[(0, 0)] = 2.0 * q_goal;
            hess[(1, 1)] = 2.0 * q_goal;
            CostEval {
                value: q_goal * d.norm_squared(),
                grad,
                hess: Some(hess),
            }
        },
    ))];

    let obstacles = params.obstacles.clone();
    let ineq: Arc<VectorFn> = Arc::new(move |_k, z: DVectorView<'_, f64>| {
        let n = obstacles.len();
        let mut val = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, z.len());
        for (i, obs) in obstacles.iter().enumerate() {
            let (g, grad) = obstacle_constraint(obs, z);
            val[i] = g;
            jac.row_mut(i).copy_from_slice(grad.as_slice());
        }
        (val, jac)
    });

    let mut convex_sets = Vec::with_capacity(params.k + 1);
    for k in 0..=params.k {
        let mut set = ConvexSet::free(n_z);
        if k == 0 {
            for i in 0..3 {
                set.lb[i] = params.start[i];
                set.ub[i] = params.start[i];
            }
        }
        if k < params.k {
            set.lb[3] = -params.u_max;
            set.ub[3] = params.u_max;
        } else {
            set.lb[3] = 0.0;
            set.ub[3] = 0.0;
        }
        convex_sets.push(set);
    }

    Ok(ProblemDefinition {
        dims,
        dynamics: unicycle_dynamics(params.dt, params.speed),
        running_costs,
        terminal_costs,
        ineq: Some(ineq),
        eq: None,
        convex_sets,
    })
}

/// Assembles a named benchmark with its default guesses and solver configs,
/// after applying the overrides.
pub fn build_scenario(name: &str, overrides: &ScenarioOverrides) -> Result<Scenario> {
    let mut params = default_params();
    let mut default_guesses = vec![GuessKind::Over, GuessKind::Straight, GuessKind::Under];
    // the terrain landscape needs a looser consensus pull so agents can
    // explore before agreeing
    let default_rho;
    match name {
        "unicycle-basic" => {
            default_rho = 10.0;
        }
        "unicycle-terrain" => {
            params.terrain = Some(default_terrain());
            default_guesses.push(GuessKind::LowerCorridor);
            default_rho = 1.0;
        }
        other => return Err(Error::UnknownScenario(other.to_string())),
    }
    apply_overrides(&mut params, overrides);

    let weights = PenaltyWeights {
        w1: overrides.w1.unwrap_or(100.0),
        w2: overrides.w2.unwrap_or(100.0),
        w3: overrides.w3.unwrap_or(100.0),
        wp: overrides.wp.unwrap_or(10.0),
        ineq_mode: overrides
            .ineq_penalty
            .unwrap_or(InequalityPenalty::PositivePart),
    };
    let qp_tol = overrides.qp_tol.unwrap_or(1e-8);
    let scp = ScpConfig {
        weights,
        eps_c: overrides.eps_c_scp.unwrap_or(1e-4),
        max_iters: overrides.max_iters_scp.unwrap_or(100),
        qp_tol,
    };
    let osscp = OsscpConfig {
        rho: overrides.rho.unwrap_or(default_rho),
        eps_r: overrides.eps_r.unwrap_or(1e-3),
        eps_s: overrides.eps_s.unwrap_or(1e-3),
        // tighter than the SCP stagnation tolerance: consensus cost moves
        // slowly early on and must not trigger a premature stop
        eps_c: overrides.eps_c_osscp.unwrap_or(1e-7),
        max_iters: overrides.max_iters_osscp.unwrap_or(200),
        weights,
        qp_tol,
        consensus_mask: None,
    };

    let problem = build_problem(&params)?;
    Ok(Scenario {
        name: name.to_string(),
        params,
        problem,
        scp,
        osscp,
        default_guesses,
    })
}
