use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::control::{objective, reduced_gradient_density};
use crate::error::{Error, Result};
use crate::mesh::structured_unit_square;
use crate::model::{RunConfig, TwoPhaseModel, WellParams};
use crate::solver::{run_adjoint, run_forward, Forcing, Problem};

/// Steps used by [`desk_gradient_case`] checks, largest first.
pub const DESK_STEPS: [f64; 7] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7];

/// Desk problem for the gradient check: 8x8 mesh, `N = M = 128`, terminal
/// window 1/4, `alpha_0 = 0.1`, initial saturation 0.3, with a smooth
/// interior control and a smooth positive direction. `w_tilde = 0`
/// decouples the costates.
pub fn desk_gradient_case(w_tilde: f64) -> Result<(Problem, Vec<f64>, Vec<f64>)> {
    let steps = 128;
    let mesh = structured_unit_square(8)?;
    let wells = WellParams {
        sigma: 1.0 / 16.0,
        w_tilde,
        alpha0: 0.1,
        ..WellParams::default()
    }
    .build(&mesh)?;
    let config = RunConfig {
        saturation_steps: steps,
        pressure_steps: steps,
        terminal_window: Some(0.25),
        initial_saturation: 0.3,
        ..RunConfig::default()
    };
    let problem = Problem::new(mesh, Arc::new(TwoPhaseModel::default()), wells, config)?;
    let times: Vec<f64> = (0..=steps).map(|n| problem.config.time(n)).collect();
    let q = times.iter().map(|t| 0.5 + 0.3 * (2.0 * PI * t).sin()).collect();
    let dq = times.iter().map(|t| 0.1 * (1.0 + 0.5 * (3.0 * t).cos())).collect();
    Ok((problem, q, dq))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GradientSample {
    pub step: f64,
    /// Central difference `(J(q + s dq) - J(q - s dq)) / (2 s)`.
    pub fd: f64,
    /// `|fd - adjoint| / max(|adjoint|, 1e-300)`.
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientCheck {
    /// `sum_n dt g^n dq^n` from one forward and one adjoint sweep.
    pub adjoint: f64,
    pub samples: Vec<GradientSample>,
    /// Index of the sample with the smallest error.
    pub best: usize,
}

impl GradientCheck {
    pub fn best_error(&self) -> f64 {
        self.samples[self.best].relative_error
    }

    /// Error falls from the largest step to the best one and rises again
    /// towards the smallest step (the roundoff branch), when both exist.
    pub fn is_v_shaped(&self) -> bool {
        let e: Vec<f64> = self.samples.iter().map(|s| s.relative_error).collect();
        self.best > 0 && self.best + 1 < e.len() && e[0] > e[self.best] && e[e.len() - 1] > e[self.best]
    }
}

/// Compares the adjoint directional derivative along `direction` with
/// central differences of `J` for every step in `steps`. `q` must lie in
/// the interior of the admissible box and `q +- s dq` must stay in it.
pub fn gradient_check(
    problem: &Problem,
    q: &[f64],
    direction: &[f64],
    steps: &[f64],
    forcing: &dyn Forcing,
) -> Result<GradientCheck> {
    problem.check_control(q)?;
    let q_hat = problem.wells.q_hat;
    if let Some((n, v)) = q.iter().enumerate().find(|(_, v)| !(**v > 0.0 && **v < q_hat)) {
        return Err(Error::Precondition(format!(
            "q^{n} = {v} is on the boundary of [0, {q_hat}]"
        )));
    }
    if direction.len() != q.len() {
        return Err(Error::MeshMismatch(format!(
            "direction has {} nodes, expected {}",
            direction.len(),
            q.len()
        )));
    }
    if steps.is_empty() {
        return Err(Error::Config("gradient check needs at least one step".into()));
    }
    let dt = problem.config.dt();
    let mut traj = run_forward(problem, q, forcing)?;
    run_adjoint(problem, &mut traj, forcing)?;
    let g = reduced_gradient_density(problem, &traj, forcing)?;
    let adjoint: f64 = g.iter().zip(direction).map(|(g, d)| dt * g * d).sum();
    let shifted = |s: f64| -> Result<f64> {
        let qs: Vec<f64> = q.iter().zip(direction).map(|(q, d)| q + s * d).collect();
        if qs.iter().any(|v| !(*v >= 0.0 && *v <= q_hat)) {
            return Err(Error::Precondition(format!("step {s} leaves the admissible box")));
        }
        Ok(objective(problem, &run_forward(problem, &qs, forcing)?, forcing))
    };
    let samples = steps
        .iter()
        .map(|&s| {
            let fd = (shifted(s)? - shifted(-s)?) / (2.0 * s);
            Ok(GradientSample {
                step: s,
                fd,
                relative_error: (fd - adjoint).abs() / adjoint.abs().max(1e-300),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = samples
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.relative_error.total_cmp(&b.1.relative_error))
        .map(|(i, _)| i)
        .expect("non-empty");
    Ok(GradientCheck { adjoint, samples, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::mesh::structured_unit_square;
    use crate::model::{RunConfig, TwoPhaseModel, WellParams};
    use crate::solver::NoForcing;

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
    fn decoupled_gradient_is_exact() {
        let p = problem(0.0);
        let q = vec![0.3, 0.4, 0.5, 0.6, 0.7];
        let dq = vec![0.1, -0.2, 0.1, 0.05, 0.1];
        let check = gradient_check(&p, &q, &dq, &[1e-2, 1e-4], &NoForcing).unwrap();
        assert!(check.best_error() <= 1e-8, "{check:?}");
    }

    #[test]
    fn boundary_control_is_rejected() {
        let p = problem(1.0);
        let q = vec![0.0, 0.4, 0.5, 0.6, 0.7];
        let r = gradient_check(&p, &q, &[0.1; 5], &[1e-3], &NoForcing);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }
}
