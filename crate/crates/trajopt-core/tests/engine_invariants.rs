//! Algorithmic invariants of both engines: prox-linear descent, the ADMM
//! dual-update identity, per-iteration consensus feasibility, and
//! permutation/ordering independence.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use trajopt_core::osscp::{dual_update, osscp_solve, AgentState};
use trajopt_core::scenarios::GuessKind;
use trajopt_core::traj::{ConvexSet, CostEval, CostTerm, Dims, ProblemDefinition, Trajectory};
use trajopt_core::{build_scenario, multi_start, scp_solve, OsscpConfig, ScpConfig};

/// Convex problem with a known optimum at the origin: identity "dynamics"
/// on the state, quadratic cost, start fixed at zero.
fn convex_problem() -> ProblemDefinition {
    let dims = Dims {
        n_x: 2,
        n_u: 1,
        k: 4,
        n_g: 0,
        n_h: 0,
    };
    let dynamics = Arc::new(|_k: usize, z: nalgebra::DVectorView<'_, f64>| {
        let mut a = DMatrix::zeros(2, 3);
        a[(0, 0)] = 1.0;
        a[(1, 1)] = 1.0;
        (&a * z, a)
    });
    let cost = CostTerm::convex(Arc::new(|_k, z: nalgebra::DVectorView<'_, f64>| CostEval {
        value: z.norm_squared(),
        grad: DVector::from(z) * 2.0,
        hess: Some(DMatrix::identity(z.len(), z.len()) * 2.0),
    }));
    let mut convex_sets: Vec<ConvexSet> = (0..=dims.k).map(|_| ConvexSet::free(3)).collect();
    for j in 0..2 {
        convex_sets[0].lb[j] = 0.0;
        convex_sets[0].ub[j] = 0.0;
    }
    ProblemDefinition {
        dims,
        dynamics,
        running_costs: vec![cost.clone()],
        terminal_costs: vec![cost],
        ineq: None,
        eq: None,
        convex_sets,
    }
}

fn convex_cfg() -> ScpConfig {
    ScpConfig {
        weights: trajopt_core::PenaltyWeights::new(100.0, 100.0, 100.0, 1.0),
        eps_c: 1e-10,
        max_iters: 50,
        qp_tol: 1e-10,
    }
}

#[test]
fn scp_fixed_point_on_convex_problem() {
    let problem = convex_problem();
    let guess = Trajectory::zeros(4, 2, 1); // the optimum
    let record = scp_solve(&problem, &guess, &convex_cfg()).unwrap();
    assert!(record.converged);
    assert_eq!(record.iterations, 1);
    let moved = (record.final_trajectory().as_vector() - guess.as_vector()).amax();
    assert!(moved <= 1e-8, "fixed point moved by {moved:.2e}");
}

#[test]
fn prox_linear_descent_on_benchmark() {
    let sc = build_scenario("unicycle-basic", &Default::default()).unwrap();
    for kind in [GuessKind::Over, GuessKind::Straight] {
        let record = scp_solve(&sc.problem, &sc.guess(kind), &sc.scp).unwrap();
        assert!(record.converged);
        for w in record.costs.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-6,
                "penalized cost increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }
}

#[test]
fn multi_start_is_order_independent() {
    let mut overrides = trajopt_core::ScenarioOverrides::default();
    overrides.k = Some(20); // smaller horizon keeps this test quick
    let sc = build_scenario("unicycle-basic", &overrides).unwrap();
    let guesses = [
        sc.guess(GuessKind::Over),
        sc.guess(GuessKind::Straight),
        sc.guess(GuessKind::Under),
    ];
    let fwd = multi_start(&sc.problem, &guesses, &sc.scp);
    let permuted = [guesses[2].clone(), guesses[0].clone(), guesses[1].clone()];
    let rev = multi_start(&sc.problem, &permuted, &sc.scp);
    for (i, j) in [(0usize, 1usize), (1, 2), (2, 0)] {
        let a = fwd[i].as_ref().unwrap();
        let b = rev[j].as_ref().unwrap();
        assert_eq!(a.final_cost, b.final_cost);
        assert_eq!(
            a.final_trajectory().as_vector(),
            b.final_trajectory().as_vector()
        );
    }
}

#[test]
fn dual_update_identity_is_exact() {
    let z = Trajectory::from_stacked(
        2,
        1,
        1,
        DVector::from_vec(vec![1.5, 0.5, -2.0, 0.25, 3.0, 0.0]),
    )
    .unwrap();
    let zbar = Trajectory::from_stacked(
        2,
        1,
        1,
        DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]),
    )
    .unwrap();
    let mut agent = AgentState::new(0, z.clone());
    agent = dual_update(&agent, &zbar, None);
    // xi^1 = xi^0 + (z - zbar), with xi^0 = 0, exactly
    let expected = z.as_vector() - zbar.as_vector();
    assert_eq!(agent.dual.as_vector(), &expected);
    // second update doubles it, still exactly
    agent = dual_update(&agent, &zbar, None);
    assert_eq!(agent.dual.as_vector(), &(expected * 2.0));
}

#[test]
fn consensus_stays_feasible_and_permutation_invariant() {
    let sc = build_scenario("unicycle-basic", &Default::default()).unwrap();
    let guesses = vec![
        sc.guess(GuessKind::Over),
        sc.guess(GuessKind::Straight),
        sc.guess(GuessKind::Under),
    ];
    let result = osscp_solve(&sc.problem, &guesses, &sc.osscp).unwrap();
    assert!(result.converged);

    // every successful consensus update satisfies its convexified constraints
    for state in &result.history {
        if state.projection_feasible {
            assert!(
                state.consensus_violation <= 1e-6,
                "iter {}: consensus violates convexified set by {:.2e}",
                state.iteration,
                state.consensus_violation
            );
        }
    }

    // permuting the agents leaves the consensus history unchanged
    let permuted = vec![guesses[1].clone(), guesses[2].clone(), guesses[0].clone()];
    let result_p = osscp_solve(&sc.problem, &permuted, &sc.osscp).unwrap();
    assert_eq!(result.history.len(), result_p.history.len());
    for (a, b) in result.history.iter().zip(&result_p.history) {
        let diff = (a.zbar.as_vector() - b.zbar.as_vector()).amax();
        assert!(
            diff <= 1e-9,
            "iter {}: consensus depends on agent order ({diff:.2e})",
            a.iteration
        );
    }
}

#[test]
fn single_agent_osscp_converges_on_convex_problem() {
    let problem = convex_problem();
    let scp = scp_solve(&problem, &Trajectory::zeros(4, 2, 1), &convex_cfg()).unwrap();
    let cfg = OsscpConfig {
        rho: 1.0,
        eps_r: 1e-8,
        eps_s: 1e-8,
        eps_c: 1e-12,
        max_iters: 300,
        weights: convex_cfg().weights,
        qp_tol: 1e-10,
        consensus_mask: None,
    };
    let mut guess = Trajectory::zeros(4, 2, 1);
    guess = guess
        .with_data(DVector::from_element(guess.as_vector().len(), 0.5))
        .unwrap();
    let result = osscp_solve(&problem, &[guess], &cfg).unwrap();
    assert!(result.converged);
    let diff = (result.zbar.as_vector() - scp.final_trajectory().as_vector()).amax();
    assert!(diff <= 1e-6, "single-agent consensus off by {diff:.2e}");
}
