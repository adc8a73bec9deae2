use std::sync::Arc;

use approx::assert_abs_diff_eq;
use porous_opt::control::optimize;
use porous_opt::mesh::structured_unit_square;
use porous_opt::model::{RunConfig, TwoPhaseModel, WellParams};
use porous_opt::solver::{run_adjoint, run_forward, NoForcing, Problem};

fn small_problem(w_tilde: f64) -> Problem {
    let mesh = structured_unit_square(6).unwrap();
    let wells = WellParams {
        sigma: 0.05,
        w_tilde,
        alpha0: 4.0,
        q_hat: 0.11,
        ..WellParams::default()
    }
    .build(&mesh)
    .unwrap();
    let config = RunConfig {
        pressure_steps: 4,
        saturation_steps: 8,
        ..RunConfig::default()
    };
    Problem::new(mesh, Arc::new(TwoPhaseModel::default()), wells, config).unwrap()
}

fn ramp(problem: &Problem) -> Vec<f64> {
    let n = problem.n_steps();
    (0..=n).map(|i| problem.wells.q_hat * i as f64 / n as f64).collect()
}

#[test]
fn velocity_divergence_matches_well_sources() {
    let problem = small_problem(1.0);
    let traj = run_forward(&problem, &ramp(&problem), &NoForcing).unwrap();
    let mesh = &problem.disc.mesh;
    let r = problem.config.ratio();
    for (m, u) in traj.u.iter().enumerate() {
        let div = u.divergence(mesh).unwrap();
        for k in 0..mesh.n_triangles() {
            assert_abs_diff_eq!(
                div.values[k],
                problem.wells.net_source(k) * traj.q[m * r],
                epsilon = 1e-9
            );
        }
        assert!(traj.p[m].is_zero_mean(mesh, 1e-12));
    }
}

#[test]
fn zero_terminal_weight_gives_zero_costates() {
    let problem = small_problem(0.0);
    let mut traj = run_forward(&problem, &ramp(&problem), &NoForcing).unwrap();
    run_adjoint(&problem, &mut traj, &NoForcing).unwrap();
    assert!(traj.has_costates());
    for c in &traj.c_star {
        assert!(c.values.iter().all(|v| *v == 0.0));
    }
    for u in &traj.u_star {
        assert!(u.values.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn zero_terminal_weight_drives_control_to_zero() {
    let problem = small_problem(0.0);
    let result = optimize(&problem, &problem.initial_control(), &NoForcing).unwrap();
    assert!(result.converged);
    assert_eq!(result.iterations, 2);
    assert!(result.control.iter().all(|q| *q == 0.0));
}

#[test]
fn optimal_control_respects_bounds() {
    let problem = small_problem(1.0);
    let result = optimize(&problem, &problem.initial_control(), &NoForcing).unwrap();
    assert!(result.converged, "{:?}", result.history.last());
    assert!(result.control.iter().all(|q| (0.0..=problem.wells.q_hat).contains(q)));
    assert!(result.projected_gradient_residual <= 1e-6);
}

#[test]
fn forward_sweep_is_independent_of_thread_count() {
    let problem = small_problem(1.0);
    let q = ramp(&problem);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_forward(&problem, &q, &NoForcing).unwrap())
    };
    let (a, b) = (run(1), run(3));
    for (x, y) in a.c.iter().zip(&b.c) {
        assert_eq!(x.values, y.values);
    }
}
