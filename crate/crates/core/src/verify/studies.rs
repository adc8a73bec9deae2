use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::manufactured::{square_wells, Manufactured};
use super::ConvergenceReport;
use crate::control::{optimize, time_norm};
use crate::error::{Error, Result};
use crate::fespaces::{P0Field, P1DGField, RT0Field};
use crate::mesh::{structured_unit_square, Point, PrimalMesh};
use crate::model::{Coefficients, RunConfig, TwoPhaseModel};
use crate::quadrature::TriangleRule;
use crate::solver::{run_adjoint, run_forward, Problem, Trajectory};

/// Levels and thresholds shared by the convergence studies. Level `n` uses
/// an `n x n` criss-cross mesh and `N = M = n` steps on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub levels: Vec<usize>,
    pub model: Arc<dyn Coefficients>,
    pub threshold: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            levels: vec![4, 8, 16, 32],
            model: Arc::new(TwoPhaseModel::default()),
            threshold: 0.85,
        }
    }
}

/// Report of a study together with its wall time.
#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub report: ConvergenceReport,
    pub wall_time: Duration,
    /// Largest `|div U*_m|` seen (costate study only).
    pub max_costate_divergence: f64,
    /// Active-set iterations per level (control study only).
    pub iterations: Vec<usize>,
}

fn state_control(t: f64) -> f64 {
    0.5 * (1.0 + t)
}

fn control_target(t: f64) -> f64 {
    0.5 + 0.8 * (2.0 * std::f64::consts::PI * t).sin()
}

fn manufactured(model: &Arc<dyn Coefficients>, control: fn(f64) -> f64, optimal: bool) -> Manufactured {
    Manufactured {
        model: model.clone(),
        final_time: 1.0,
        well_side: 0.25,
        alpha0: 10.0,
        q_hat: 1.0,
        control: Some(control),
        optimal_control: optimal,
        costate_scale: 1.0,
    }
}

fn level_problem(n: usize, man: &Manufactured) -> Result<(Problem, Vec<f64>)> {
    if !n.is_multiple_of(4) {
        return Err(Error::Config(format!("study level {n} must be a multiple of 4")));
    }
    let mesh = structured_unit_square(n)?;
    let wells = square_wells(&mesh, man.well_side, 0.0, man.alpha0, man.q_hat)?;
    let config = RunConfig {
        final_time: man.final_time,
        pressure_steps: n,
        saturation_steps: n,
        ..RunConfig::default()
    };
    let initial = P1DGField::interpolate(&mesh, |x| man.c(0.0, x));
    let problem = Problem::new(mesh, man.model.clone(), wells, config)?.with_initial(initial)?;
    let q = (0..=n).map(|i| man.q(problem.config.time(i))).collect();
    Ok((problem, q))
}

fn rule() -> TriangleRule {
    TriangleRule::with_degree(5).expect("tabulated")
}

/// `|u - U|_L2` for an RT0 field.
pub fn velocity_error(mesh: &PrimalMesh, u: &RT0Field, exact: impl Fn(&Point) -> Point) -> f64 {
    let rule = rule();
    (0..mesh.n_triangles())
        .map(|k| {
            rule.map(&mesh.tri_points(k), mesh.area(k))
                .map(|(x, w)| w * (exact(&x) - u.eval(mesh, k, &x)).norm_squared())
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// `|p - P|_L2` for a piecewise constant field.
pub fn pressure_error(mesh: &PrimalMesh, p: &P0Field, exact: impl Fn(&Point) -> f64) -> f64 {
    let rule = rule();
    (0..mesh.n_triangles())
        .map(|k| {
            rule.map(&mesh.tri_points(k), mesh.area(k))
                .map(|(x, w)| w * (exact(&x) - p.values[k]).powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// `|c - C|_L2` for a discontinuous P1 field.
pub fn saturation_error(mesh: &PrimalMesh, c: &P1DGField, exact: impl Fn(&Point) -> f64) -> f64 {
    let rule = rule();
    (0..mesh.n_triangles())
        .map(|k| {
            rule.map(&mesh.tri_points(k), mesh.area(k))
                .map(|(x, w)| w * (exact(&x) - c.eval(mesh, k, &x)).powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// Broken `H^1` error of a discontinuous P1 field against a continuous
/// `c`: elementwise gradient error plus jumps of `C` over interior edges,
/// each scaled by `1 / |e|`.
pub fn saturation_energy_error(mesh: &PrimalMesh, c: &P1DGField, gradient: impl Fn(&Point) -> Point) -> f64 {
    let rule = rule();
    let volume: f64 = (0..mesh.n_triangles())
        .map(|k| {
            let g = c.gradient(mesh, k);
            rule.map(&mesh.tri_points(k), mesh.area(k))
                .map(|(x, w)| w * (gradient(&x) - g).norm_squared())
                .sum::<f64>()
        })
        .sum();
    let jumps: f64 = mesh
        .edges()
        .iter()
        .filter_map(|e| e.right.map(|r| (e, r)))
        .map(|(e, r)| {
            let pa = mesh.vertices()[e.vertices[0]];
            let pb = mesh.vertices()[e.vertices[1]];
            let d = |x: &Point| c.eval(mesh, e.left, x) - c.eval(mesh, r, x);
            let (da, dm, db) = (d(&pa), d(&e.midpoint), d(&pb));
            (da * da + 4.0 * dm * dm + db * db) / 6.0
        })
        .sum();
    (volume + jumps).sqrt()
}

fn report(name: &str, levels: &[usize]) -> Result<ConvergenceReport> {
    let h: Vec<f64> = levels.iter().map(|n| 1.0 / *n as f64).collect();
    ConvergenceReport::new(name, h.clone(), h)
}

fn state_errors(problem: &Problem, traj: &Trajectory, man: &Manufactured) -> [f64; 4] {
    let mesh = &problem.disc.mesh;
    let t = problem.config.final_time;
    [
        velocity_error(mesh, traj.u.last().expect("final velocity"), |x| man.u(t, x)),
        pressure_error(mesh, traj.p.last().expect("final pressure"), |x| man.p(t, x)),
        saturation_error(mesh, traj.c.last().expect("final saturation"), |x| man.c(t, x)),
        saturation_energy_error(mesh, traj.c.last().expect("final saturation"), |x| man.grad_c(t, x)),
    ]
}

fn costate_errors(problem: &Problem, traj: &Trajectory, man: &Manufactured) -> [f64; 4] {
    let mesh = &problem.disc.mesh;
    [
        velocity_error(mesh, &traj.u_star[0], |x| man.u_star(0.0, x)),
        pressure_error(mesh, &traj.p_star[0], |x| man.p_star(0.0, x)),
        saturation_error(mesh, &traj.c_star[0], |x| man.c_star(0.0, x)),
        saturation_energy_error(mesh, &traj.c_star[0], |x| man.grad_c_star(0.0, x)),
    ]
}

/// State errors at `t = T` with `dt = h`: `u`, `p`, `c` in `L^2` and `c` in
/// the broken `H^1` norm.
pub fn manufactured_state_study(options: &StudyOptions) -> Result<StudyResult> {
    let start = Instant::now();
    let man = manufactured(&options.model, state_control, false);
    let mut errors = vec![Vec::new(); 4];
    for &n in &options.levels {
        let (problem, q) = level_problem(n, &man)?;
        let traj = run_forward(&problem, &q, &man)?;
        for (e, v) in errors.iter_mut().zip(state_errors(&problem, &traj, &man)) {
            e.push(v);
        }
        log::info!(
            "state study n={n}: {:?}",
            errors.iter().map(|e| e[e.len() - 1]).collect::<Vec<_>>()
        );
    }
    let mut report = report("state", &options.levels)?;
    for (name, e) in ["u_l2", "p_l2", "c_l2", "c_h1"].iter().zip(errors) {
        report.push(name, e, options.threshold);
    }
    Ok(StudyResult {
        report,
        wall_time: start.elapsed(),
        max_costate_divergence: 0.0,
        iterations: Vec::new(),
    })
}

/// Costate errors at `t = 0` (the state is solved with its own sources
/// first): `u*`, `p*`, `c*` in `L^2` and `c*` in the broken `H^1` norm.
pub fn manufactured_costate_study(options: &StudyOptions) -> Result<StudyResult> {
    let start = Instant::now();
    let man = manufactured(&options.model, state_control, false);
    let mut errors = vec![Vec::new(); 4];
    let mut divergence = 0.0f64;
    for &n in &options.levels {
        let (problem, q) = level_problem(n, &man)?;
        let mut traj = run_forward(&problem, &q, &man)?;
        run_adjoint(&problem, &mut traj, &man)?;
        divergence = traj
            .costate_reports
            .iter()
            .fold(divergence, |m, r| m.max(r.divergence_defect));
        for (e, v) in errors.iter_mut().zip(costate_errors(&problem, &traj, &man)) {
            e.push(v);
        }
        log::info!(
            "costate study n={n}: {:?}",
            errors.iter().map(|e| e[e.len() - 1]).collect::<Vec<_>>()
        );
    }
    let mut report = report("costate", &options.levels)?;
    for (name, e) in ["u_star_l2", "p_star_l2", "c_star_l2", "c_star_h1"].iter().zip(errors) {
        report.push(name, e, options.threshold);
    }
    Ok(StudyResult {
        report,
        wall_time: start.elapsed(),
        max_costate_divergence: divergence,
        iterations: Vec::new(),
    })
}

/// Optimal control with a known solution `q = clamp(q_target, 0, 1)`:
/// discrete `L^2(0, T)` error of the computed control.
pub fn control_study(options: &StudyOptions) -> Result<StudyResult> {
    let start = Instant::now();
    let man = manufactured(&options.model, control_target, true);
    let mut errors = Vec::new();
    let mut iterations = Vec::new();
    for &n in &options.levels {
        let (problem, q_exact) = level_problem(n, &man)?;
        let result = optimize(&problem, &problem.initial_control(), &man)?;
        if !result.converged {
            return Err(Error::State(format!(
                "control study level {n}: active sets did not settle in {} iterations",
                result.iterations
            )));
        }
        let diff: Vec<f64> = result.control.iter().zip(&q_exact).map(|(a, b)| a - b).collect();
        errors.push(time_norm(&diff, problem.config.dt()));
        iterations.push(result.iterations);
        log::info!(
            "control study n={n}: error {:.3e} in {} iterations",
            errors[errors.len() - 1],
            result.iterations
        );
    }
    let mut report = report("control", &options.levels)?;
    report.push("q_l2", errors, options.threshold);
    Ok(StudyResult {
        report,
        wall_time: start.elapsed(),
        max_costate_divergence: 0.0,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::NoForcing;

    #[test]
    fn constant_fields_are_reproduced() {
        let mesh = structured_unit_square(4).unwrap();
        let wells = square_wells(&mesh, 0.25, 0.0, 1.0, 1.0).unwrap();
        let config = RunConfig {
            pressure_steps: 2,
            saturation_steps: 4,
            initial_saturation: 0.6,
            ..RunConfig::default()
        };
        let p = Problem::new(mesh, Arc::new(TwoPhaseModel::default()), wells, config).unwrap();
        let mut traj = run_forward(&p, &[0.0; 5], &NoForcing).unwrap();
        run_adjoint(&p, &mut traj, &NoForcing).unwrap();
        let mesh = &p.disc.mesh;
        let c = traj.c.last().unwrap();
        assert!(saturation_error(mesh, c, |_| 0.6) <= 1e-10);
        assert!(saturation_energy_error(mesh, c, |_| Point::zeros()) <= 1e-10);
        assert!(velocity_error(mesh, traj.u.last().unwrap(), |_| Point::zeros()) <= 1e-10);
        assert!(pressure_error(mesh, traj.p.last().unwrap(), |_| 0.0) <= 1e-10);
        assert!(saturation_error(mesh, &traj.c_star[0], |_| 0.0) <= 1e-10);
        assert!(velocity_error(mesh, &traj.u_star[0], |_| Point::zeros()) <= 1e-10);
    }

    #[test]
    fn levels_must_be_multiples_of_four() {
        let options = StudyOptions {
            levels: vec![6, 12],
            ..StudyOptions::default()
        };
        assert!(matches!(manufactured_state_study(&options), Err(Error::Config(_))));
    }
}
