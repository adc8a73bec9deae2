//! Subcommand implementations. Each writes its CSV/VTK outputs into the
//! output directory and returns the process exit code.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use porous_opt::assembly::{assemble_darcy, mass_matrix};
use porous_opt::control::{classify_active_sets, optimize, reduced_gradient_density, unconstrained_values, Activity};
use porous_opt::error::{Error, Result};
use porous_opt::mesh::{read_triangle_mesh, structured_unit_square, PrimalMesh};
use porous_opt::solver::{run_adjoint, run_forward, NoForcing, Problem, Trajectory};
use porous_opt::verify::{
    control_study, desk_gradient_case, gamma_contraction_study, gradient_check, manufactured_costate_study,
    manufactured_state_study, operator_identity_suite, StudyOptions, StudyResult, DESK_STEPS,
};

use crate::config::RunSpec;
use crate::output::{Cell, Provenance, Snapshot, Table, Writer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// Exit code for an error: input problems are configuration errors,
/// everything else a solver failure.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Config(_) | Error::Parse { .. } | Error::Structure(_) | Error::Conformity(_) | Error::Domain(_) => {
            EXIT_CONFIG
        }
        _ => EXIT_SOLVER,
    }
}

pub fn status_name(code: i32) -> &'static str {
    match code {
        EXIT_OK => "ok",
        EXIT_CONFIG => "config_error",
        EXIT_NOT_CONVERGED => "not_converged",
        _ => "solver_error",
    }
}

/// Mesh, problem and writer of one run.
pub struct Session {
    pub spec: RunSpec,
    pub problem: Problem,
    pub writer: Writer,
}

impl Session {
    pub fn new(spec: RunSpec, out: &Path) -> Result<Self> {
        let mesh = spec.mesh.load()?;
        let provenance = Provenance::new(&spec.numerical_fingerprint(), &mesh);
        let wells = spec.wells.build(&mesh)?;
        let problem = Problem::new(mesh, Arc::new(spec.model), wells, spec.run)?;
        let writer = Writer::new(out, provenance)?;
        Ok(Session { spec, problem, writer })
    }

    fn mesh(&self) -> &PrimalMesh {
        &self.problem.disc.mesh
    }

    /// Control from a CSV file (a `q` column, or the last column), or the
    /// configured initial control.
    pub fn control(&self, path: Option<&Path>) -> Result<Vec<f64>> {
        let q = match path {
            Some(path) => read_control(path)?,
            None => self.problem.initial_control(),
        };
        self.problem.check_control(&q)?;
        Ok(q)
    }

    fn write_state(&self, traj: &Trajectory) -> Result<()> {
        let mesh = self.mesh();
        let mut state = Table::new(&["n", "t", "q", "saturation_integral", "saturation_min", "saturation_max"]);
        for (n, c) in traj.c.iter().enumerate() {
            let integral: f64 = (0..mesh.n_triangles())
                .map(|k| mesh.area(k) * c.local(k).iter().sum::<f64>() / 3.0)
                .sum();
            let (lo, hi) = c
                .values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            state.push(vec![
                n.into(),
                traj.times[n].into(),
                traj.q[n].into(),
                integral.into(),
                lo.into(),
                hi.into(),
            ]);
        }
        self.writer.csv("state.csv", &state)?;
        let mut darcy = Table::new(&["m", "t", "relative_residual", "mass_residual", "divergence_defect"]);
        for (m, r) in traj.darcy_reports.iter().enumerate() {
            darcy.push(vec![
                m.into(),
                traj.pressure_times[m].into(),
                r.relative_residual.into(),
                r.mass_residual.into(),
                r.divergence_defect.into(),
            ]);
        }
        self.writer.csv("darcy.csv", &darcy)?;
        self.snapshots(traj, false)
    }

    fn write_costate(&self, traj: &Trajectory, gradient: &[f64]) -> Result<()> {
        let mesh = self.mesh();
        let mut costate = Table::new(&["n", "t", "c_star_l2", "gradient"]);
        for (n, cs) in traj.c_star.iter().enumerate() {
            costate.push(vec![
                n.into(),
                traj.times[n].into(),
                cs.l2_norm(mesh).into(),
                gradient[n].into(),
            ]);
        }
        self.writer.csv("costate.csv", &costate)?;
        let mut darcy = Table::new(&["m", "t", "relative_residual", "divergence_defect"]);
        for (m, r) in traj.costate_reports.iter().enumerate() {
            darcy.push(vec![
                m.into(),
                traj.pressure_times[m].into(),
                r.relative_residual.into(),
                r.divergence_defect.into(),
            ]);
        }
        self.writer.csv("costate_darcy.csv", &darcy)?;
        self.snapshots(traj, true)
    }

    fn snapshots(&self, traj: &Trajectory, costate: bool) -> Result<()> {
        let every = self.spec.output.save_every;
        if every == 0 {
            return Ok(());
        }
        let r = self.problem.config.ratio();
        let n_total = traj.n_steps();
        for n in (0..=n_total).filter(|n| n % every == 0 || *n == n_total) {
            let at_node = n % r == 0;
            let m = n / r;
            let snapshot = if costate {
                Snapshot {
                    time: traj.times[n],
                    saturation: Some(("c_star", &traj.c_star[n])),
                    velocity: at_node.then(|| ("u_star", &traj.u_star[m])),
                    pressure: at_node.then(|| ("p_star", &traj.p_star[m])),
                }
            } else {
                Snapshot {
                    time: traj.times[n],
                    saturation: Some(("c", &traj.c[n])),
                    velocity: Some(("u", &traj.velocity[n])),
                    pressure: at_node.then(|| ("p", &traj.p[m])),
                }
            };
            let name = if costate { "costate" } else { "state" };
            self.writer.vtk(&format!("{name}_{n:05}.vtk"), self.mesh(), &snapshot)?;
        }
        Ok(())
    }

    /// Darcy blocks and the saturation mass matrix at the initial state, in
    /// Matrix Market format.
    pub fn dump_matrices(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let disc = &self.problem.disc;
        let darcy = assemble_darcy(disc, self.problem.model.as_ref(), &self.problem.initial)?;
        fs::write(dir.join("darcy_a.mtx"), darcy.a.to_matrix_market())?;
        fs::write(dir.join("darcy_b.mtx"), darcy.b.to_matrix_market())?;
        fs::write(dir.join("saturation_mass.mtx"), mass_matrix(disc).to_matrix_market())?;
        Ok(())
    }

    pub fn forward(&self, control: Option<&Path>) -> Result<i32> {
        let q = self.control(control)?;
        let traj = run_forward(&self.problem, &q, &NoForcing)?;
        self.write_state(&traj)?;
        Ok(EXIT_OK)
    }

    pub fn adjoint(&self, control: Option<&Path>) -> Result<i32> {
        let q = self.control(control)?;
        let mut traj = run_forward(&self.problem, &q, &NoForcing)?;
        run_adjoint(&self.problem, &mut traj, &NoForcing)?;
        let gradient = reduced_gradient_density(&self.problem, &traj, &NoForcing)?;
        self.write_state(&traj)?;
        self.write_costate(&traj, &gradient)?;
        Ok(EXIT_OK)
    }

    pub fn optimize(&self, control: Option<&Path>) -> Result<i32> {
        let q0 = self.control(control)?;
        let result = optimize(&self.problem, &q0, &NoForcing)?;
        let mut history = Table::new(&["k", "objective", "lower_active", "upper_active", "step_norm"]);
        for h in &result.history {
            history.push(vec![
                h.k.into(),
                h.objective.into(),
                h.lower.into(),
                h.upper.into(),
                h.step_norm.into(),
            ]);
        }
        self.writer.csv("history.csv", &history)?;
        let alpha0 = self.problem.wells.alpha0;
        let without_penalty: Vec<f64> = result
            .gradient
            .iter()
            .zip(&result.control)
            .map(|(g, q)| g - alpha0 * q)
            .collect();
        let sets = classify_active_sets(
            &unconstrained_values(&without_penalty, alpha0)?,
            self.problem.wells.q_hat,
            result.iterations,
        );
        let mut control_table = Table::new(&["n", "t", "q", "gradient", "activity"]);
        for (n, q) in result.control.iter().enumerate() {
            let activity = match sets.sets[n] {
                Activity::Lower => "lower",
                Activity::Upper => "upper",
                Activity::Inactive => "inactive",
            };
            control_table.push(vec![
                n.into(),
                result.trajectory.times[n].into(),
                (*q).into(),
                result.gradient[n].into(),
                activity.into(),
            ]);
        }
        self.writer.csv("control.csv", &control_table)?;
        let mut summary = Table::new(&[
            "converged",
            "iterations",
            "objective",
            "projected_gradient_residual",
            "variational_residual",
        ]);
        summary.push(vec![
            if result.converged { "true" } else { "false" }.into(),
            result.iterations.into(),
            result.objective.into(),
            result.projected_gradient_residual.into(),
            result.variational_residual.into(),
        ]);
        self.writer.csv("summary.csv", &summary)?;
        self.write_state(&result.trajectory)?;
        self.write_costate(&result.trajectory, &result.gradient)?;
        println!(
            "{} after {} iterations: J = {:.10e}, projected-gradient residual {:.3e}",
            if result.converged { "converged" } else { "not converged" },
            result.iterations,
            result.objective,
            result.projected_gradient_residual
        );
        Ok(if result.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
    }
}

/// Reads a control series: one value per data row, from the `q` column
/// when a header names it, otherwise the last column. `#` lines are skipped.
pub fn read_control(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let name = path.display().to_string();
    let mut column: Option<usize> = None;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if values.is_empty() && column.is_none() && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            column = fields.iter().position(|f| *f == "q");
            if column.is_none() {
                return Err(Error::Parse {
                    path: name,
                    line: i + 1,
                    message: "header has no `q` column".into(),
                });
            }
            continue;
        }
        let idx = column.unwrap_or(fields.len() - 1);
        let v = fields
            .get(idx)
            .and_then(|f| f.parse::<f64>().ok())
            .ok_or_else(|| Error::Parse {
                path: name.clone(),
                line: i + 1,
                message: format!("expected a number in column {}", idx + 1),
            })?;
        values.push(v);
    }
    Ok(values)
}

/// Counts and size measures of the configured mesh.
pub fn mesh_info(spec: &RunSpec) -> Result<String> {
    let mesh = spec.mesh.load()?;
    Ok(format!(
        "vertices {}\ntriangles {}\nedges {}\ninterior_edges {}\nh {:.6e}\narea {:.6e}\nquasi_uniformity {:.6e}\n",
        mesh.n_vertices(),
        mesh.n_triangles(),
        mesh.n_edges(),
        mesh.n_interior_edges(),
        mesh.h(),
        mesh.domain_area(),
        mesh.quasi_uniformity()
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Operators,
    State,
    Costate,
    Control,
    Gradient,
}

fn study_table(result: &StudyResult) -> Table {
    let report = &result.report;
    let mut columns = vec!["h", "dt"];
    columns.extend(report.quantities.iter().map(|q| q.name.as_str()));
    let mut table = Table::new(&columns);
    for (i, (h, dt)) in report.h.iter().zip(&report.dt).enumerate() {
        let mut row: Vec<Cell> = vec![(*h).into(), (*dt).into()];
        row.extend(report.quantities.iter().map(|q| Cell::Float(q.errors[i])));
        table.push(row);
    }
    table
}

/// Runs one verification suite, prints a report and writes its CSV. The
/// suite fails (exit 1) when any of its checks fails.
pub fn verify(suite: Suite, writer: &Writer, unstructured: Option<&Path>) -> Result<i32> {
    let passed = match suite {
        Suite::Operators => {
            let mut meshes = vec![
                ("structured_8", structured_unit_square(8)?),
                ("structured_16", structured_unit_square(16)?),
            ];
            if let Some(base) = unstructured {
                meshes.push(("unstructured", read_triangle_mesh(base)?));
            }
            let mut table = Table::new(&[
                "mesh",
                "samples",
                "brel_defect",
                "eta_norm_defect",
                "contraction_ratio",
                "penalty_asymmetry",
                "penalty_min_rayleigh",
                "costate_divergence",
            ]);
            let mut ok = true;
            for (i, (name, mesh)) in meshes.iter().enumerate() {
                let r = operator_identity_suite(mesh, 100, i as u64 + 1)?;
                println!("{name}: {r:?}");
                ok &= r.passed(1e-12);
                table.push(vec![
                    (*name).into(),
                    r.samples.into(),
                    r.brel_defect.into(),
                    r.eta_norm_defect.into(),
                    r.contraction_ratio.into(),
                    r.penalty_asymmetry.into(),
                    r.penalty_min_rayleigh.into(),
                    r.costate_divergence.into(),
                ]);
            }
            writer.csv("verify_operators.csv", &table)?;
            let nested: Vec<PrimalMesh> = [4, 8, 16, 32]
                .iter()
                .map(|n| structured_unit_square(*n))
                .collect::<Result<_>>()?;
            let study = gamma_contraction_study(&nested, |x| {
                porous_opt::mesh::Point::new((3.0 * x.y).sin() + x.x * x.x, (2.0 * x.x).cos() - x.y)
            })?;
            let mut contraction = Table::new(&["h", "defect"]);
            for (h, d) in study.h.iter().zip(&study.defects) {
                contraction.push(vec![(*h).into(), (*d).into()]);
            }
            writer.csv("verify_contraction.csv", &contraction)?;
            println!(
                "gamma contraction: ratio {:.6}, rate {:.3}",
                study.contraction_ratio, study.rate
            );
            ok && study.contraction_ratio <= 1.0 && study.rate >= 0.9
        }
        Suite::State | Suite::Costate | Suite::Control => {
            let result = match suite {
                Suite::State => manufactured_state_study(&StudyOptions::default())?,
                Suite::Costate => manufactured_costate_study(&StudyOptions::default())?,
                _ => control_study(&StudyOptions {
                    levels: vec![8, 16, 32],
                    ..StudyOptions::default()
                })?,
            };
            print!("{}", result.report.table());
            writer.csv(&format!("verify_{}.csv", result.report.name), &study_table(&result))?;
            result.report.passed()
        }
        Suite::Gradient => {
            let mut table = Table::new(&["case", "step", "fd", "adjoint", "relative_error"]);
            let mut ok = true;
            for (case, w_tilde, tol) in [("coupled", 1.0, 1e-2), ("decoupled", 0.0, 1e-8)] {
                let (problem, q, dq) = desk_gradient_case(w_tilde)?;
                let check = gradient_check(&problem, &q, &dq, &DESK_STEPS, &NoForcing)?;
                for s in &check.samples {
                    table.push(vec![
                        case.into(),
                        s.step.into(),
                        s.fd.into(),
                        check.adjoint.into(),
                        s.relative_error.into(),
                    ]);
                }
                println!(
                    "{case}: best relative error {:.3e} at step {:e}",
                    check.best_error(),
                    check.samples[check.best].step
                );
                ok &= check.best_error() <= tol;
            }
            writer.csv("verify_gradient.csv", &table)?;
            ok
        }
    };
    println!("{}", if passed { "PASS" } else { "FAIL" });
    Ok(if passed { EXIT_OK } else { EXIT_SOLVER })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_files_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        fs::write(&a, "# comment\nn,t,q,gradient\n0,0.0,0.25,1\n1,0.5,0.5,2\n").unwrap();
        assert_eq!(read_control(&a).unwrap(), vec![0.25, 0.5]);
        let b = dir.path().join("b.csv");
        fs::write(&b, "0.1\n0.2\n").unwrap();
        assert_eq!(read_control(&b).unwrap(), vec![0.1, 0.2]);
        let c = dir.path().join("c.csv");
        fs::write(&c, "x,y\n1,2\n").unwrap();
        assert!(matches!(read_control(&c), Err(Error::Parse { .. })));
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Solver("x".into())), EXIT_SOLVER);
    }
}
