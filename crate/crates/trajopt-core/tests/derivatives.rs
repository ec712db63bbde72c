//! Finite-difference verification of every analytic Jacobian and gradient:
//! unicycle dynamics, obstacle constraints, terrain field, and cost terms.

use nalgebra::{DVector, DVectorView};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trajopt_core::scenarios::{
    obstacle_constraint, terrain_cost, unicycle_dynamics, Obstacle, TerrainBump, TerrainField,
};
use trajopt_core::build_scenario;

const FD_STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-5;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Central finite difference of a scalar function of a stacked point.
fn fd_grad(f: &dyn Fn(DVectorView<'_, f64>) -> f64, z: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(z.len());
    for j in 0..z.len() {
        let mut hi = z.clone();
        let mut lo = z.clone();
        hi[j] += FD_STEP;
        lo[j] -= FD_STEP;
        g[j] = (f(hi.as_view()) - f(lo.as_view())) / (2.0 * FD_STEP);
    }
    g
}

fn random_point(rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_vec(vec![
        rng.gen_range(-2.0..12.0),
        rng.gen_range(-6.0..6.0),
        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        rng.gen_range(-2.0..2.0),
    ])
}

#[test]
fn unicycle_jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dynamics = unicycle_dynamics(0.25, 1.0);
    for _ in 0..100 {
        let z = random_point(&mut rng);
        let (_, jac) = dynamics(0, z.as_view());
        for i in 0..3 {
            let fd = fd_grad(&|p| dynamics(0, p).0[i], &z);
            for j in 0..4 {
                assert!(
                    rel_err(jac[(i, j)], fd[j]) <= REL_TOL,
                    "dynamics jac ({i},{j}): {} vs fd {}",
                    jac[(i, j)],
                    fd[j]
                );
            }
        }
    }
}

#[test]
fn obstacle_gradient_matches_finite_differences_and_is_unit_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let obs = Obstacle {
        center: [5.0, 2.8],
        radius: 1.5,
    };
    for _ in 0..100 {
        let z = random_point(&mut rng);
        let (_, grad) = obstacle_constraint(&obs, z.as_view());
        let fd = fd_grad(&|p| obstacle_constraint(&obs, p).0, &z);
        for j in 0..4 {
            assert!(
                rel_err(grad[j], fd[j]) <= REL_TOL,
                "obstacle grad [{j}]: {} vs fd {}",
                grad[j],
                fd[j]
            );
        }
        // position gradient of R - ||p - c|| has unit norm away from center
        let pos_norm = (grad[0] * grad[0] + grad[1] * grad[1]).sqrt();
        assert!((pos_norm - 1.0).abs() < 1e-12);
    }
}

#[test]
fn obstacle_gradient_defined_at_center() {
    let obs = Obstacle {
        center: [1.0, -2.0],
        radius: 0.5,
    };
    let z = DVector::from_vec(vec![1.0, -2.0, 0.3, 0.0]);
    let (g, grad) = obstacle_constraint(&obs, z.as_view());
    assert_eq!(g, 0.5);
    assert_eq!(grad[0], -1.0);
    assert_eq!(grad[1], 0.0);
}

fn test_field() -> TerrainField {
    TerrainField {
        bumps: vec![
            TerrainBump {
                amplitude: 1.0,
                mean: [5.0, 1.0],
                cov: [[1.44, 0.2], [0.2, 0.36]],
            },
            TerrainBump {
                amplitude: -1.5,
                mean: [5.0, -1.0],
                cov: [[2.25, -0.1], [-0.1, 0.25]],
            },
        ],
    }
}

#[test]
fn terrain_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let field = test_field();
    field.validate().unwrap();
    for _ in 0..100 {
        let z = random_point(&mut rng);
        let (_, grad) = terrain_cost(&field, z.as_view());
        let fd = fd_grad(&|p| terrain_cost(&field, p).0, &z);
        for j in 0..4 {
            assert!(
                rel_err(grad[j], fd[j]) <= REL_TOL,
                "terrain grad [{j}]: {} vs fd {}",
                grad[j],
                fd[j]
            );
        }
    }
}

#[test]
fn terrain_cost_bounded_by_total_amplitude() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let field = test_field();
    let bound: f64 = field.bumps.iter().map(|b| b.amplitude.abs()).sum();
    for _ in 0..500 {
        let z = random_point(&mut rng);
        let (v, _) = terrain_cost(&field, z.as_view());
        assert!(v.abs() <= bound + 1e-12);
    }
}

#[test]
fn scenario_cost_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for name in ["unicycle-basic", "unicycle-terrain"] {
        let sc = build_scenario(name, &Default::default()).unwrap();
        let terms = sc
            .problem
            .running_costs
            .iter()
            .chain(sc.problem.terminal_costs.iter());
        for term in terms {
            for _ in 0..100 {
                let z = random_point(&mut rng);
                let e = (term.eval)(0, z.as_view());
                let fd = fd_grad(&|p| (term.eval)(0, p).value, &z);
                for j in 0..4 {
                    assert!(
                        rel_err(e.grad[j], fd[j]) <= REL_TOL,
                        "{name} cost grad [{j}]: {} vs fd {}",
                        e.grad[j],
                        fd[j]
                    );
                }
            }
        }
    }
}
