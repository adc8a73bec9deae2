//! Objective, reduced gradient, projection formula and the active-set loop.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::{run_adjoint, run_forward, Forcing, Problem, Trajectory};

/// Classification of one control node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Activity {
    /// Unconstrained value below zero.
    Lower,
    /// Unconstrained value above `q^`.
    Upper,
    Inactive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSetState {
    pub sets: Vec<Activity>,
    pub iteration: usize,
}

impl ActiveSetState {
    pub fn count(&self, a: Activity) -> usize {
        self.sets.iter().filter(|s| **s == a).count()
    }

    /// Same classification, ignoring the iteration counter.
    pub fn coincides(&self, other: &ActiveSetState) -> bool {
        self.sets == other.sets
    }
}

/// `J = 1/2 sum_n dt w_n int (C^n)^2 + alpha_0/2 sum_n dt (q^n)^2`, plus the
/// linear term of the forcing. Every control node carries weight `dt`.
pub fn objective(problem: &Problem, traj: &Trajectory, forcing: &dyn Forcing) -> f64 {
    let dt = problem.config.dt();
    let mesh = &problem.disc.mesh;
    let alpha0 = problem.wells.alpha0;
    let mut state = 0.0;
    for (n, c) in traj.c.iter().enumerate() {
        let w = problem.weights[n];
        if w != 0.0 {
            state += 0.5 * dt * w * c.l2_inner(c, mesh);
        }
    }
    let control: f64 = traj
        .q
        .iter()
        .enumerate()
        .map(|(n, q)| dt * (0.5 * alpha0 * q * q + forcing.control(traj.times[n]) * q))
        .sum();
    state + control
}

/// `g^n - alpha_0 q^n = int [f(C^n) r_0 C*^n - (r_0 - r_1) P*^n] dx` (plus the
/// forcing's control term).
pub fn gradient_without_penalty(problem: &Problem, traj: &Trajectory, forcing: &dyn Forcing) -> Result<Vec<f64>> {
    if !traj.has_costates() {
        return Err(Error::State("costates missing; run the adjoint sweep first".into()));
    }
    let disc = &problem.disc;
    let wells = &problem.wells;
    let model = problem.model.as_ref();
    let rule = &disc.quadrature.triangle;
    let injection: Vec<usize> = (0..disc.mesh.n_triangles()).filter(|k| wells.r0[*k] != 0.0).collect();
    let net: Vec<usize> = (0..disc.mesh.n_triangles())
        .filter(|k| wells.net_source(*k) != 0.0)
        .collect();
    Ok((0..traj.times.len())
        .map(|n| {
            let (c, cs) = (&traj.c[n], &traj.c_star[n]);
            let mut v = 0.0;
            for &k in &injection {
                let geo = &disc.elements[k];
                let quad: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(lam, w)| w * model.f(c.eval_bary(k, lam)) * cs.eval_bary(k, lam))
                    .sum();
                v += wells.r0[k] * quad * geo.area;
            }
            let ps = traj.p_star_at(n);
            for &k in &net {
                v -= wells.net_source(k) * ps.values[k] * disc.elements[k].area;
            }
            v + forcing.control(traj.times[n])
        })
        .collect())
}

/// Reduced gradient density `g^n` at every time node.
pub fn reduced_gradient_density(problem: &Problem, traj: &Trajectory, forcing: &dyn Forcing) -> Result<Vec<f64>> {
    let alpha0 = problem.wells.alpha0;
    Ok(gradient_without_penalty(problem, traj, forcing)?
        .into_iter()
        .zip(&traj.q)
        .map(|(g, q)| g + alpha0 * q)
        .collect())
}

/// `-g_without_penalty / alpha_0`, the value the projection clamps.
pub fn unconstrained_values(g_without_penalty: &[f64], alpha0: f64) -> Result<Vec<f64>> {
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(Error::Config(format!("wells.alpha0 must be positive, got {alpha0}")));
    }
    Ok(g_without_penalty.iter().map(|g| -g / alpha0).collect())
}

/// `q^n = max(0, min(q^, -g^n / alpha_0))`.
pub fn project_control(g_without_penalty: &[f64], alpha0: f64, q_hat: f64) -> Result<Vec<f64>> {
    Ok(unconstrained_values(g_without_penalty, alpha0)?
        .into_iter()
        .map(|v| v.clamp(0.0, q_hat))
        .collect())
}

/// Below 0: lower-active; above `q^`: upper-active; ties are inactive.
pub fn classify_active_sets(unconstrained: &[f64], q_hat: f64, iteration: usize) -> ActiveSetState {
    ActiveSetState {
        sets: unconstrained
            .iter()
            .map(|&v| {
                if v < 0.0 {
                    Activity::Lower
                } else if v > q_hat {
                    Activity::Upper
                } else {
                    Activity::Inactive
                }
            })
            .collect(),
        iteration,
    }
}

pub fn update_control(state: &ActiveSetState, unconstrained: &[f64], q_hat: f64) -> Vec<f64> {
    state
        .sets
        .iter()
        .zip(unconstrained)
        .map(|(s, &v)| match s {
            Activity::Lower => 0.0,
            Activity::Upper => q_hat,
            Activity::Inactive => v + 0.0,
        })
        .collect()
}

/// Discrete `L^2(0, T)` norm `sqrt(sum_n dt v_n^2)`.
pub fn time_norm(v: &[f64], dt: f64) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() * dt).sqrt()
}

/// `max_n |q^n - clamp(q^n - g^n)|`.
pub fn projected_gradient_residual(q: &[f64], gradient: &[f64], q_hat: f64) -> f64 {
    q.iter()
        .zip(gradient)
        .map(|(q, g)| (q - (q - g).clamp(0.0, q_hat)).abs())
        .fold(0.0, f64::max)
}

/// `min` over the `2 (N + 1)` coordinate extreme points `q~` of
/// `sum_n dt g^n (q~^n - q^n)`.
pub fn variational_residual(q: &[f64], gradient: &[f64], q_hat: f64, dt: f64) -> f64 {
    q.iter()
        .zip(gradient)
        .flat_map(|(q, g)| [dt * g * (0.0 - q), dt * g * (q_hat - q)])
        .fold(0.0, f64::min)
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub objective: f64,
    pub lower: usize,
    pub upper: usize,
    /// `|q_(k+1) - q_k|` in the discrete `L^2(0, T)` norm.
    pub step_norm: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub control: Vec<f64>,
    /// Forward and adjoint solution at `control`.
    pub trajectory: Trajectory,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub gradient: Vec<f64>,
    pub projected_gradient_residual: f64,
    pub variational_residual: f64,
}

/// Active-set loop: solve, classify, update; stops once two successive
/// classifications coincide and the control has settled to
/// `control_tolerance`, or after `max_iterations`.
pub fn optimize(problem: &Problem, initial: &[f64], forcing: &dyn Forcing) -> Result<OptimizeResult> {
    let cfg = &problem.config;
    let (alpha0, q_hat, dt) = (problem.wells.alpha0, problem.wells.q_hat, cfg.dt());
    unconstrained_values(&[], alpha0)?;
    problem.check_control(initial)?;
    let mut q = initial.to_vec();
    let mut previous: Option<ActiveSetState> = None;
    let mut history = Vec::new();
    let mut converged = false;
    for k in 0..cfg.max_iterations {
        let mut traj = run_forward(problem, &q, forcing)?;
        run_adjoint(problem, &mut traj, forcing)?;
        let j = objective(problem, &traj, forcing);
        let v = unconstrained_values(&gradient_without_penalty(problem, &traj, forcing)?, alpha0)?;
        let sets = classify_active_sets(&v, q_hat, k);
        let next = update_control(&sets, &v, q_hat);
        let diff: Vec<f64> = next.iter().zip(&q).map(|(a, b)| a - b).collect();
        let step_norm = time_norm(&diff, dt);
        history.push(IterationRecord {
            k,
            objective: j,
            lower: sets.count(Activity::Lower),
            upper: sets.count(Activity::Upper),
            step_norm,
        });
        log::info!(
            "iteration {k}: J = {j:.10e}, |A-| = {}, |A+| = {}, |dq| = {step_norm:.3e}",
            sets.count(Activity::Lower),
            sets.count(Activity::Upper)
        );
        let repeat = previous.as_ref().is_some_and(|p| p.coincides(&sets));
        q = next;
        if repeat && step_norm <= cfg.control_tolerance {
            converged = true;
            break;
        }
        previous = Some(sets);
    }
    let mut trajectory = run_forward(problem, &q, forcing)?;
    run_adjoint(problem, &mut trajectory, forcing)?;
    let gradient = reduced_gradient_density(problem, &trajectory, forcing)?;
    Ok(OptimizeResult {
        objective: objective(problem, &trajectory, forcing),
        projected_gradient_residual: projected_gradient_residual(&q, &gradient, q_hat),
        variational_residual: variational_residual(&q, &gradient, q_hat, dt),
        iterations: history.len(),
        control: q,
        trajectory,
        history,
        converged,
        gradient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::mesh::structured_unit_square;
    use crate::model::{RunConfig, TwoPhaseModel, WellParams};
    use crate::solver::NoForcing;

    #[test]
    fn projection_clamps() {
        let q = project_control(&[1.0, -3.0, -1.0], 1.0, 2.0).unwrap();
        assert_eq!(q, vec![0.0, 2.0, 1.0]);
        assert!(matches!(project_control(&[1.0], 0.0, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn update_after_classify_matches_projection() {
        let g: Vec<f64> = (0..41).map(|i| (i as f64 - 20.0) * 0.137).collect();
        let v = unconstrained_values(&g, 0.7).unwrap();
        let sets = classify_active_sets(&v, 1.5, 0);
        assert_eq!(
            sets.count(Activity::Lower) + sets.count(Activity::Upper) + sets.count(Activity::Inactive),
            41
        );
        assert_eq!(update_control(&sets, &v, 1.5), project_control(&g, 0.7, 1.5).unwrap());
        // Ties are inactive.
        let ties = classify_active_sets(&[0.0, 1.5], 1.5, 0);
        assert!(ties.sets.iter().all(|s| *s == Activity::Inactive));
    }

    fn problem(w_tilde: f64) -> Problem {
        let mesh = structured_unit_square(4).unwrap();
        let wells = WellParams {
            sigma: 0.0625,
            w_tilde,
            ..WellParams::default()
        }
        .build(&mesh)
        .unwrap();
        let config = RunConfig {
            saturation_steps: 4,
            pressure_steps: 2,
            ..RunConfig::default()
        };
        Problem::new(mesh, Arc::new(TwoPhaseModel::default()), wells, config).unwrap()
    }

    #[test]
    fn frozen_saturation_objective_integrates_the_window() {
        let p = problem(2.0);
        let traj = run_forward(&p, &[0.0; 5], &NoForcing).unwrap();
        let j = objective(&p, &traj, &NoForcing);
        // w~/2 c^2 |Omega| with c = 0.8.
        assert!((j - 0.64).abs() < 1e-12, "{j}");
    }

    #[test]
    fn zero_weight_converges_to_zero_in_two_iterations() {
        let p = problem(0.0);
        let r = optimize(&p, &p.initial_control(), &NoForcing).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 2);
        assert!(r.control.iter().all(|q| *q == 0.0));
        assert_eq!(r.projected_gradient_residual, 0.0);
    }

    #[test]
    fn optimizer_keeps_bounds() {
        let p = problem(1.0);
        let r = optimize(&p, &p.initial_control(), &NoForcing).unwrap();
        assert!(r.control.iter().all(|q| (0.0..=p.wells.q_hat).contains(q)));
        assert_eq!(r.history.len(), r.iterations);
    }
}
