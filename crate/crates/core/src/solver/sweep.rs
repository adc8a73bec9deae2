use std::sync::Arc;

use super::darcy::{DarcySolver, SaddleSolveReport};
use super::linear::solve_sparse;
use super::{Forcing, Problem};
use crate::assembly::{
    assemble_darcy, assemble_darcy_costate_rhs, assemble_darcy_state_rhs, assemble_saturation_costate,
    assemble_saturation_state, diamond_vector_load, element_scalar_load, saturation_load,
};
use crate::error::{Error, Result};
use crate::fespaces::{P0Field, P1DGField, RT0Field};

/// Which extrapolation rule to use between pressure nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Forward in time from the two latest pressure nodes at or before `t`.
    State,
    /// Backward in time from the two nearest pressure nodes at or after `t`.
    Costate,
}

/// States and costates of one forward/adjoint pass.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Fine nodes `t^n`, `n = 0..=N`.
    pub times: Vec<f64>,
    /// Coarse nodes `t_m`, `m = 0..=M`.
    pub pressure_times: Vec<f64>,
    pub q: Vec<f64>,
    pub c: Vec<P1DGField>,
    pub u: Vec<RT0Field>,
    pub p: Vec<P0Field>,
    /// Velocity `U^n` used by the saturation step leaving `t^n`; `U^N = U_M`.
    pub velocity: Vec<RT0Field>,
    /// Costates; empty until [`run_adjoint`] has run.
    pub c_star: Vec<P1DGField>,
    pub u_star: Vec<RT0Field>,
    pub p_star: Vec<P0Field>,
    pub darcy_reports: Vec<SaddleSolveReport>,
    pub costate_reports: Vec<SaddleSolveReport>,
    /// Largest relative residual over the saturation solves.
    pub saturation_residual: f64,
    pub costate_saturation_residual: f64,
    solvers: Vec<Arc<DarcySolver>>,
}

impl Trajectory {
    pub fn has_costates(&self) -> bool {
        !self.c_star.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn n_pressure_steps(&self) -> usize {
        self.pressure_times.len() - 1
    }

    /// Costate pressure on the fine grid, constant on each `(t_(m-1), t_m]`.
    pub fn p_star_at(&self, n: usize) -> &P0Field {
        let r = self.n_steps() / self.n_pressure_steps();
        &self.p_star[n.div_ceil(r)]
    }
}

/// Velocity at time `t` from pressure-node fields.
///
/// State: coincident nodes return `U_m`; otherwise
/// `(1 + s) U_(m-1) - s U_(m-2)` with `t_(m-1) < t < t_m`, `s = (t - t_(m-1))/dt_p`,
/// and `U_0` on the first interval. Costate mirrors this with
/// `(1 + s) U*_(m+1) - s U*_(m+2)`, `s = (t_(m+1) - t)/dt_p`, and `U*_M` on the
/// last interval.
pub fn interpolate_velocity(
    fields: &[RT0Field],
    dt_pressure: f64,
    final_time: f64,
    t: f64,
    direction: Direction,
) -> Result<RT0Field> {
    let tol = 1e-12 * final_time;
    if !(t >= -tol && t <= final_time + tol) {
        return Err(Error::TimeRange { t, final_time });
    }
    let m_total = (final_time / dt_pressure).round() as usize;
    let pos = (t / dt_pressure).clamp(0.0, m_total as f64);
    let get = |m: usize| {
        fields
            .get(m)
            .ok_or_else(|| Error::State(format!("velocity at pressure node {m} is not available")))
    };
    let nearest = pos.round();
    if (pos - nearest).abs() <= 1e-9 {
        return get(nearest as usize).cloned();
    }
    match direction {
        Direction::State => {
            let m1 = pos.floor() as usize;
            if m1 == 0 {
                return get(0).cloned();
            }
            let s = pos - m1 as f64;
            Ok(get(m1)?.combine(1.0 + s, get(m1 - 1)?, -s))
        }
        Direction::Costate => {
            let m1 = pos.ceil() as usize;
            if m1 == m_total {
                return get(m_total).cloned();
            }
            let s = m1 as f64 - pos;
            Ok(get(m1)?.combine(1.0 + s, get(m1 + 1)?, -s))
        }
    }
}

/// `[phi D + dt (E_n + H_n)] C^(n+1) = phi D C^n + dt (G_n + source)`.
/// Coefficients use `C^n`, `U^n` and `q^n`. Returns the new saturation and
/// the relative residual of the solve.
pub fn step_saturation_forward(
    problem: &Problem,
    c: &P1DGField,
    u: &RT0Field,
    q: f64,
    source: Option<&[f64]>,
) -> Result<(P1DGField, f64)> {
    let disc = &problem.disc;
    let dt = problem.config.dt();
    let phi = problem.model.porosity();
    let terms = assemble_saturation_state(disc, problem.model.as_ref(), &problem.wells, c, u, q, problem.xi)?;
    let matrix = problem.mass.add(phi, &terms.e.add(1.0, &terms.h, 1.0), dt);
    let mut rhs = problem.mass.mul_vec(&c.values);
    for (i, r) in rhs.iter_mut().enumerate() {
        *r = phi * *r + dt * (terms.g[i] + source.map_or(0.0, |s| s[i]));
    }
    let (values, stats) = solve_sparse(matrix, &rhs, problem.config.solver_tolerance)?;
    Ok((P1DGField { values }, stats.relative_residual))
}

/// Implicit backward step
/// `[phi D + dt (-E_n + H_n + S_(n+1) + R_(n+1))] C*^n = phi D C*^(n+1) + dt (W_(n+1) - Z_(n+1) + source)`.
/// `E_n`, `H_n` are the forward step matrices (`C^n`, `U^n`); the remaining
/// terms use `C^(n+1)`, `U^(n+1)`, `U*^(n+1)`, `q^(n+1)` and `w_(n+1)`.
pub struct BackwardStep<'a> {
    pub c_star_next: &'a P1DGField,
    pub c: &'a P1DGField,
    pub u: &'a RT0Field,
    pub c_next: &'a P1DGField,
    pub u_next: &'a RT0Field,
    pub u_star_next: &'a RT0Field,
    pub q_next: f64,
    pub weight_next: f64,
    pub source: Option<&'a [f64]>,
}

pub fn step_saturation_backward(problem: &Problem, step: &BackwardStep<'_>) -> Result<(P1DGField, f64)> {
    let disc = &problem.disc;
    let model = problem.model.as_ref();
    let dt = problem.config.dt();
    let phi = model.porosity();
    let state = assemble_saturation_state(disc, model, &problem.wells, step.c, step.u, 0.0, problem.xi)?;
    let costate = assemble_saturation_costate(
        disc,
        model,
        &problem.wells,
        step.c_next,
        step.u_next,
        step.u_star_next,
        step.q_next,
        step.weight_next,
    )?;
    let operator = state
        .h
        .add(1.0, &state.e, -1.0)
        .add(1.0, &costate.s, 1.0)
        .add(1.0, &costate.r, 1.0);
    let matrix = problem.mass.add(phi, &operator, dt);
    let mut rhs = problem.mass.mul_vec(&step.c_star_next.values);
    for (i, r) in rhs.iter_mut().enumerate() {
        *r = phi * *r + dt * (costate.w[i] - costate.z[i] + step.source.map_or(0.0, |s| s[i]));
    }
    let (values, stats) = solve_sparse(matrix, &rhs, problem.config.solver_tolerance)?;
    Ok((P1DGField { values }, stats.relative_residual))
}

fn darcy_state(
    problem: &Problem,
    c: &P1DGField,
    q: f64,
    t: f64,
    forcing: &dyn Forcing,
) -> Result<(Arc<DarcySolver>, RT0Field, P0Field, SaddleSolveReport)> {
    let disc = &problem.disc;
    let matrices = assemble_darcy(disc, problem.model.as_ref(), c)?;
    let solver = Arc::new(DarcySolver::new(disc, matrices)?);
    let mut f = assemble_darcy_state_rhs(disc, &problem.wells, q);
    let tol = problem.config.solver_tolerance;
    let (u, p, report) = if forcing.is_active() {
        let g = diamond_vector_load(disc, |_, _, x| forcing.velocity(t, x))?;
        let mut extra = element_scalar_load(disc, |_, x| forcing.mass(t, x))?;
        // Zero-mean projection of the forced mass source.
        let mean = extra.iter().sum::<f64>() / disc.mesh.domain_area();
        for (k, v) in extra.iter_mut().enumerate() {
            *v -= mean * disc.elements[k].area;
        }
        f.iter_mut().zip(&extra).for_each(|(a, b)| *a += b);
        super::check_compatibility(&f)?;
        solver.solve(disc, &g, &f, tol)?
    } else {
        solver.solve_state(disc, &f, tol)?
    };
    Ok((solver, u, p, report))
}

/// Forward sweep: a Darcy solve at each pressure node (with `C_m = C^(n_m)`
/// and `q^(n_m)`) alternating with saturation steps driven by extrapolated
/// velocities.
#[allow(clippy::needless_range_loop)]
pub fn run_forward(problem: &Problem, q: &[f64], forcing: &dyn Forcing) -> Result<Trajectory> {
    problem.check_control(q)?;
    let cfg = &problem.config;
    let (n_total, m_total, r) = (cfg.saturation_steps, cfg.pressure_steps, cfg.ratio());
    let final_time = cfg.final_time;
    let mut traj = Trajectory {
        times: (0..=n_total).map(|n| cfg.time(n)).collect(),
        pressure_times: (0..=m_total).map(|m| cfg.pressure_time(m)).collect(),
        q: q.to_vec(),
        c: Vec::with_capacity(n_total + 1),
        u: Vec::with_capacity(m_total + 1),
        p: Vec::with_capacity(m_total + 1),
        velocity: Vec::with_capacity(n_total + 1),
        c_star: Vec::new(),
        u_star: Vec::new(),
        p_star: Vec::new(),
        darcy_reports: Vec::with_capacity(m_total + 1),
        costate_reports: Vec::new(),
        saturation_residual: 0.0,
        costate_saturation_residual: 0.0,
        solvers: Vec::with_capacity(m_total + 1),
    };
    traj.c.push(problem.initial.clone());
    for n in 0..=n_total {
        let m = n / r;
        let t = traj.times[n];
        if n % r == 0 {
            let (solver, u, p, report) =
                darcy_state(problem, &traj.c[n], q[n], t, forcing).map_err(|e| e.at_step(m, n))?;
            log::debug!(
                "darcy m={m}: residual {:.2e}, mass {:.2e}",
                report.relative_residual,
                report.mass_residual
            );
            traj.u.push(u);
            traj.p.push(p);
            traj.darcy_reports.push(report);
            traj.solvers.push(solver);
        }
        if n == n_total {
            traj.velocity.push(traj.u[m_total].clone());
            break;
        }
        let v = interpolate_velocity(&traj.u, cfg.dt_pressure(), final_time, t, Direction::State)
            .map_err(|e| e.at_step(m, n))?;
        let source = if forcing.is_active() {
            let t_next = traj.times[n + 1];
            Some(saturation_load(&problem.disc, |_, _, x| forcing.saturation(t_next, x)).map_err(|e| e.at_step(m, n))?)
        } else {
            None
        };
        let (c_next, res) =
            step_saturation_forward(problem, &traj.c[n], &v, q[n], source.as_deref()).map_err(|e| e.at_step(m, n))?;
        traj.saturation_residual = traj.saturation_residual.max(res);
        traj.velocity.push(v);
        traj.c.push(c_next);
    }
    Ok(traj)
}

fn darcy_costate(
    problem: &Problem,
    traj: &Trajectory,
    m: usize,
    n: usize,
    c_star: &P1DGField,
    forcing: &dyn Forcing,
) -> Result<(RT0Field, P0Field, SaddleSolveReport)> {
    let disc = &problem.disc;
    // b(C) grad C is taken one fine step ahead of t_m.
    let n_last = traj.c.len() - 1;
    let mut f = assemble_darcy_costate_rhs(disc, problem.model.as_ref(), &traj.c[(n + 1).min(n_last)], c_star)?;
    if forcing.is_active() {
        let t = traj.pressure_times[m];
        let g = diamond_vector_load(disc, |_, _, x| forcing.costate_velocity(t, x))?;
        f.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    traj.solvers[m].solve_costate(disc, &f, problem.config.solver_tolerance)
}

/// Backward sweep from `C*^N = 0`, filling the costates of `traj`. The
/// costate Darcy solve at `t_m` reuses the state factorisation of `A_m`.
pub fn run_adjoint(problem: &Problem, traj: &mut Trajectory, forcing: &dyn Forcing) -> Result<()> {
    let cfg = &problem.config;
    let (n_total, m_total, r) = (cfg.saturation_steps, cfg.pressure_steps, cfg.ratio());
    if traj.c.len() != n_total + 1 || traj.u.len() != m_total + 1 || traj.velocity.len() != n_total + 1 {
        return Err(Error::State("forward trajectory is incomplete".into()));
    }
    let final_time = cfg.final_time;
    let mut c_star = vec![P1DGField::zeros(&problem.disc.mesh); n_total + 1];
    let mut u_star = vec![RT0Field::zeros(&problem.disc.mesh); m_total + 1];
    let mut p_star = vec![P0Field::zeros(&problem.disc.mesh); m_total + 1];
    let mut reports = vec![None; m_total + 1];
    let mut max_res = 0.0f64;

    let (u, p, report) = darcy_costate(problem, traj, m_total, n_total, &c_star[n_total], forcing)
        .map_err(|e| e.at_step(m_total, n_total))?;
    u_star[m_total] = u;
    p_star[m_total] = p;
    reports[m_total] = Some(report);

    for n in (0..n_total).rev() {
        let m = n / r;
        let t_next = traj.times[n + 1];
        let u_star_next = interpolate_velocity(&u_star, cfg.dt_pressure(), final_time, t_next, Direction::Costate)
            .map_err(|e| e.at_step(m, n))?;
        let source = if forcing.is_active() {
            let t = traj.times[n];
            Some(
                saturation_load(&problem.disc, |_, _, x| forcing.costate_saturation(t, x))
                    .map_err(|e| e.at_step(m, n))?,
            )
        } else {
            None
        };
        let step = BackwardStep {
            c_star_next: &c_star[n + 1],
            c: &traj.c[n],
            u: &traj.velocity[n],
            c_next: &traj.c[n + 1],
            u_next: &traj.velocity[n + 1],
            u_star_next: &u_star_next,
            q_next: traj.q[n + 1],
            weight_next: problem.weights[n + 1],
            source: source.as_deref(),
        };
        let (cs, res) = step_saturation_backward(problem, &step).map_err(|e| e.at_step(m, n))?;
        max_res = max_res.max(res);
        c_star[n] = cs;
        if n % r == 0 {
            let (u, p, report) =
                darcy_costate(problem, traj, m, n, &c_star[n], forcing).map_err(|e| e.at_step(m, n))?;
            log::debug!("costate darcy m={m}: divergence {:.2e}", report.divergence_defect);
            u_star[m] = u;
            p_star[m] = p;
            reports[m] = Some(report);
        }
    }
    traj.c_star = c_star;
    traj.u_star = u_star;
    traj.p_star = p_star;
    traj.costate_reports = reports
        .into_iter()
        .map(|r| r.expect("every pressure node solved"))
        .collect();
    traj.costate_saturation_residual = max_res;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured_unit_square;
    use crate::model::{RunConfig, TwoPhaseModel, WellParams};
    use crate::solver::NoForcing;

    fn field(values: Vec<f64>) -> RT0Field {
        RT0Field { values }
    }

    #[test]
    fn interpolation_collapses_and_extrapolates_affine_data() {
        // U_m = a + b t_m with T = 1, M = 4.
        let fields: Vec<RT0Field> = (0..=4).map(|m| field(vec![1.0 + 2.0 * m as f64 / 4.0, -3.0])).collect();
        let at = |t: f64, d| interpolate_velocity(&fields, 0.25, 1.0, t, d).unwrap().values;
        assert_eq!(at(0.5, Direction::State), fields[2].values);
        assert_eq!(at(0.5, Direction::Costate), fields[2].values);
        assert_eq!(at(0.1, Direction::State), fields[0].values);
        assert_eq!(at(0.9, Direction::Costate), fields[4].values);
        for t in [0.3, 0.6, 0.95] {
            assert!((at(t, Direction::State)[0] - (1.0 + 2.0 * t)).abs() < 1e-12);
        }
        for t in [0.05, 0.4, 0.7] {
            assert!((at(t, Direction::Costate)[0] - (1.0 + 2.0 * t)).abs() < 1e-12);
        }
        assert!(matches!(
            interpolate_velocity(&fields, 0.25, 1.0, 1.5, Direction::State),
            Err(Error::TimeRange { .. })
        ));
    }

    fn problem(n: usize, steps: usize, pressure_steps: usize, w_tilde: f64) -> Problem {
        let mesh = structured_unit_square(n).unwrap();
        let params = WellParams {
            sigma: 0.04,
            w_tilde,
            ..WellParams::default()
        };
        let wells = params.build(&mesh).unwrap();
        let config = RunConfig {
            saturation_steps: steps,
            pressure_steps,
            ..RunConfig::default()
        };
        Problem::new(mesh, Arc::new(TwoPhaseModel::default()), wells, config).unwrap()
    }

    #[test]
    fn constant_saturation_is_preserved_without_injection() {
        let p = problem(4, 4, 2, 1.0);
        let traj = run_forward(&p, &[0.0; 5], &NoForcing).unwrap();
        for c in &traj.c {
            assert!(c.values.iter().all(|v| (v - 0.8).abs() < 1e-12));
        }
        assert!(traj.u.iter().all(|u| u.values.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn forward_and_adjoint_diagnostics() {
        let p = problem(6, 6, 3, 1.0);
        let q = vec![0.5; 7];
        let mut traj = run_forward(&p, &q, &NoForcing).unwrap();
        assert!(traj.darcy_reports.iter().all(|r| r.mass_residual <= 1e-10));
        assert!(traj.p.iter().all(|p0| p0.is_zero_mean(&p.disc.mesh, 1e-10)));
        run_adjoint(&p, &mut traj, &NoForcing).unwrap();
        assert!(traj.c_star[6].values.iter().all(|v| *v == 0.0));
        assert!(traj.c_star[0].l2_norm(&p.disc.mesh) > 0.0);
        for (u, report) in traj.u_star.iter().zip(&traj.costate_reports) {
            assert!(report.divergence_defect <= 1e-10);
            assert!(report.reused_factorization);
            let div = u.divergence(&p.disc.mesh).unwrap();
            assert!(div.values.iter().all(|v| v.abs() <= 1e-10));
        }
    }

    #[test]
    fn zero_terminal_weight_gives_zero_costates() {
        let p = problem(4, 4, 4, 0.0);
        let mut traj = run_forward(&p, &[0.7; 5], &NoForcing).unwrap();
        run_adjoint(&p, &mut traj, &NoForcing).unwrap();
        assert!(traj.c_star.iter().all(|c| c.values.iter().all(|v| *v == 0.0)));
        assert!(traj.p_star.iter().all(|p| p.values.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn failures_carry_step_indices() {
        let mut p = problem(3, 2, 2, 1.0);
        p.initial.values[0] = f64::NAN;
        let err = run_forward(&p, &[0.5; 3], &NoForcing).unwrap_err();
        assert!(matches!(err, Error::AtStep { m: 0, n: 0, .. }), "{err}");
    }
}
