//! Independent verification of the QP layer: an active-set enumeration
//! oracle for small random programs, and the contraction properties of the
//! Euclidean projection onto a convexified constraint set.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trajopt_core::qp::{project_onto_z, solve_qp, QuadraticProgram};
use trajopt_core::traj::{ConvexSet, CostEval, CostTerm, Dims, ProblemDefinition, Trajectory};
use trajopt_core::linearize;

/// Brute-force oracle: enumerates every active-set combination (each
/// constraint inactive / at lower / at upper), solves the corresponding
/// equality-constrained KKT system, and returns the feasible candidate with
/// valid multiplier signs. Valid KKT points are global optima of the convex
/// program, so the first hit suffices.
fn active_set_oracle(qp: &QuadraticProgram) -> Option<DVector<f64>> {
    let n = qp.n();
    // gather all constraints as generic rows: real rows first, then bounds
    let mut rows: Vec<(Vec<(usize, f64)>, f64, f64)> = qp
        .rows()
        .iter()
        .map(|r| (r.coeffs.clone(), r.lower, r.upper))
        .collect();
    for j in 0..n {
        if qp.lb[j].is_finite() || qp.ub[j].is_finite() {
            rows.push((vec![(j, 1.0)], qp.lb[j], qp.ub[j]));
        }
    }
    let m = rows.len();
    let feas_tol = 1e-8;

    let mut combos = vec![0u8; m]; // 0 inactive, 1 lower, 2 upper
    loop {
        // build and solve the KKT system for this combination
        let active: Vec<(usize, f64)> = combos
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(i, &c)| {
                let rhs = if c == 1 { rows[i].1 } else { rows[i].2 };
                (i, rhs)
            })
            .collect();
        let valid = active.iter().all(|&(_, rhs)| rhs.is_finite());
        if valid {
            let na = active.len();
            let dim = n + na;
            let mut kkt = DMatrix::zeros(dim, dim);
            kkt.view_mut((0, 0), (n, n)).copy_from(&qp.hessian);
            for (a_idx, &(row, _)) in active.iter().enumerate() {
                for &(c, v) in &rows[row].0 {
                    kkt[(c, n + a_idx)] = v;
                    kkt[(n + a_idx, c)] = v;
                }
            }
            let mut rhs_v = DVector::zeros(dim);
            for j in 0..n {
                rhs_v[j] = -qp.linear[j];
            }
            for (a_idx, &(_, rhs)) in active.iter().enumerate() {
                rhs_v[n + a_idx] = rhs;
            }
            if let Some(sol) = kkt.lu().solve(&rhs_v) {
                let x = DVector::from(sol.rows(0, n));
                let mut ok = true;
                // primal feasibility on every constraint
                for (i, (coeffs, lo, hi)) in rows.iter().enumerate() {
                    let ax: f64 = coeffs.iter().map(|&(c, v)| v * x[c]).sum();
                    if ax < lo - feas_tol || ax > hi + feas_tol {
                        ok = false;
                        break;
                    }
                    // dual sign: lower-active needs lambda <= 0, upper >= 0
                    if combos[i] != 0 {
                        let a_idx = active.iter().position(|&(r, _)| r == i).unwrap();
                        let lambda = sol[n + a_idx];
                        if combos[i] == 1 && lambda > feas_tol {
                            ok = false;
                            break;
                        }
                        if combos[i] == 2 && lambda < -feas_tol {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    return Some(x);
                }
            }
        }
        // next combination
        let mut i = 0;
        loop {
            if i == m {
                return None;
            }
            combos[i] += 1;
            if combos[i] <= 2 {
                break;
            }
            combos[i] = 0;
            i += 1;
        }
    }
}

fn random_tiny_qp(rng: &mut ChaCha8Rng) -> QuadraticProgram {
    let n = rng.gen_range(2..=4);
    let m = rng.gen_range(1..=3);
    let mut qp = QuadraticProgram::new(n);
    // strictly convex Hessian: R'R + I
    let r = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    qp.hessian = r.transpose() * &r + DMatrix::identity(n, n);
    qp.linear = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
    // feasible by construction around a random interior point
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    for j in 0..n {
        qp.set_bound(j, x0[j] - rng.gen_range(0.2..2.0), x0[j] + rng.gen_range(0.2..2.0));
    }
    for _ in 0..m {
        let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-1.0..1.0))).collect();
        let ax: f64 = coeffs.iter().map(|&(j, v)| v * x0[j]).sum();
        let lo = ax - rng.gen_range(0.1..1.5);
        let hi = ax + rng.gen_range(0.1..1.5);
        if rng.gen_bool(0.3) {
            qp.add_eq_row(coeffs, ax);
        } else {
            qp.add_range_row(coeffs, lo, hi);
        }
    }
    qp
}

#[test]
fn solver_matches_active_set_enumeration_on_random_tiny_qps() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for case in 0..50 {
        let qp = random_tiny_qp(&mut rng);
        let oracle = active_set_oracle(&qp).expect("feasible by construction");
        let sol = solve_qp(&qp, 1e-9);
        assert!(sol.solved(), "case {case} not solved");
        let err = (&sol.x - &oracle).amax();
        assert!(
            err <= 1e-6,
            "case {case}: solver/oracle mismatch {err:.2e}\nsolver {:?}\noracle {:?}",
            sol.x.as_slice(),
            oracle.as_slice()
        );
    }
}

#[test]
fn solver_detects_infeasible_program() {
    let mut qp = QuadraticProgram::new(2);
    qp.hessian = DMatrix::identity(2, 2);
    qp.set_bound(0, 0.0, 1.0);
    qp.set_bound(1, 0.0, 1.0);
    // x0 + x1 >= 3 cannot hold inside the unit box
    qp.add_range_row(vec![(0, 1.0), (1, 1.0)], 3.0, f64::INFINITY);
    let sol = solve_qp(&qp, 1e-8);
    assert_eq!(sol.status, trajopt_core::SolveStatus::Infeasible);
}

#[test]
fn closed_form_box_clamp() {
    // unconstrained optimum (-2, 3) clamped to the unit box
    let mut qp = QuadraticProgram::new(2);
    qp.hessian = DMatrix::identity(2, 2);
    qp.linear = DVector::from_vec(vec![2.0, -3.0]);
    qp.set_bound(0, -1.0, 1.0);
    qp.set_bound(1, -1.0, 1.0);
    let sol = solve_qp(&qp, 1e-9);
    assert!(sol.solved());
    assert!((sol.x[0] - (-1.0)).abs() < 1e-8);
    assert!((sol.x[1] - 1.0).abs() < 1e-8);
}

/// Small affine-dynamics problem whose linearization is exact, so the
/// projection target set is a fixed polyhedron.
fn affine_problem(rng: &mut ChaCha8Rng) -> (ProblemDefinition, Trajectory) {
    let dims = Dims {
        n_x: 2,
        n_u: 1,
        k: 3,
        n_g: 1,
        n_h: 0,
    };
    let a_mats: Vec<DMatrix<f64>> = (0..dims.k)
        .map(|_| DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-0.5..0.5)) * 0.5
            + DMatrix::from_fn(2, 3, |i, j| if i == j { 1.0 } else { 0.0 }))
        .collect();
    let dynamics = {
        let a_mats = a_mats.clone();
        Arc::new(move |k: usize, z: nalgebra::DVectorView<'_, f64>| {
            let a = &a_mats[k];
            (a * z, a.clone())
        })
    };
    let g_row = DVector::from_fn(3, |_, _| rng.gen_range(-0.5..0.5));
    let ineq = {
        let g_row = g_row.clone();
        Arc::new(move |_k: usize, z: nalgebra::DVectorView<'_, f64>| {
            let v = g_row.dot(&DVector::from(z)) - 2.0;
            (
                DVector::from_element(1, v),
                DMatrix::from_row_slice(1, 3, g_row.as_slice()),
            )
        })
    };
    let cost = CostTerm::convex(Arc::new(|_k, z: nalgebra::DVectorView<'_, f64>| CostEval {
        value: z.norm_squared(),
        grad: DVector::from(z) * 2.0,
        hess: Some(DMatrix::identity(z.len(), z.len()) * 2.0),
    }));
    let convex_sets = (0..=dims.k)
        .map(|_| {
            let mut s = ConvexSet::free(3);
            for j in 0..3 {
                s.lb[j] = -5.0;
                s.ub[j] = 5.0;
            }
            s
        })
        .collect();
    let problem = ProblemDefinition {
        dims,
        dynamics,
        running_costs: vec![cost.clone()],
        terminal_costs: vec![cost],
        ineq: Some(ineq),
        eq: None,
        convex_sets,
    };
    let reference = Trajectory::zeros(dims.k, dims.n_x, dims.n_u);
    (problem, reference)
}

fn random_trajectory(rng: &mut ChaCha8Rng, like: &Trajectory) -> Trajectory {
    let data = DVector::from_fn(like.as_vector().len(), |_, _| rng.gen_range(-3.0..3.0));
    like.with_data(data).unwrap()
}

#[test]
fn projection_is_idempotent_and_nonexpansive() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for case in 0..100 {
        let (problem, reference) = affine_problem(&mut rng);
        let lin = linearize(&problem, &reference).unwrap();
        let v1 = random_trajectory(&mut rng, &reference);
        let v2 = random_trajectory(&mut rng, &reference);
        let p1 = project_onto_z(&lin, &v1).unwrap();
        let p2 = project_onto_z(&lin, &v2).unwrap();

        // idempotence: projecting a projection is a no-op
        let p1p = project_onto_z(&lin, &p1).unwrap();
        let idem = (p1p.as_vector() - p1.as_vector()).amax();
        assert!(idem <= 1e-6, "case {case}: projection not idempotent ({idem:.2e})");

        // nonexpansiveness: ||P(v1) - P(v2)|| <= ||v1 - v2||
        let lhs = (p1.as_vector() - p2.as_vector()).norm();
        let rhs = (v1.as_vector() - v2.as_vector()).norm();
        assert!(
            lhs <= rhs + 1e-7,
            "case {case}: projection expanded {lhs} > {rhs}"
        );
    }
}
