use std::time::{Duration, Instant};

use super::linear::SparseLu;
use crate::assembly::{DarcyMatrices, Discretization};
use crate::error::{Error, Result};
use crate::fespaces::{P0Field, RT0Field};
use crate::sparse::{norm2, TripletBuilder};

/// Diagnostics of one mixed solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleSolveReport {
    /// Relative residual of the whole block system.
    pub relative_residual: f64,
    /// `|B alpha - F| / |F|` (absolute when `F = 0`).
    pub mass_residual: f64,
    /// Largest elementwise `|div U - F_l/|T_l||`.
    pub divergence_defect: f64,
    pub reused_factorization: bool,
    pub wall_time: Duration,
}

/// Factorised mixed system `[A, -B^T; B, 0]` with the first pressure
/// unknown pinned to zero and the first mass row dropped (it is implied by
/// the others for slip velocities and compatible sources). Pressures are
/// shifted to zero mean after each solve.
#[derive(Debug)]
pub struct DarcySolver {
    lu: SparseLu,
    matrices: DarcyMatrices,
    areas: Vec<f64>,
    factor_time: Duration,
    solves: std::sync::atomic::AtomicUsize,
}

impl DarcySolver {
    pub fn new(disc: &Discretization, matrices: DarcyMatrices) -> Result<Self> {
        let start = Instant::now();
        let nu = disc.n_velocity();
        let np = disc.n_pressure();
        let n = nu + np - 1;
        let mut t = TripletBuilder::with_capacity(n, n, matrices.a.nnz() + 2 * matrices.b.nnz());
        t.extend(matrices.a.triplets());
        for (l, j, v) in matrices.b.triplets().filter(|(l, _, _)| *l > 0) {
            t.push(nu + l - 1, j, v);
            t.push(j, nu + l - 1, -v);
        }
        let lu = SparseLu::factor(t.build())?;
        Ok(DarcySolver {
            lu,
            matrices,
            areas: disc.mesh.areas().to_vec(),
            factor_time: start.elapsed(),
            solves: Default::default(),
        })
    }

    pub fn matrices(&self) -> &DarcyMatrices {
        &self.matrices
    }

    /// Solves with `first` in the velocity rows and `second` in the mass
    /// rows; `second` must sum to zero.
    pub fn solve(
        &self,
        disc: &Discretization,
        first: &[f64],
        second: &[f64],
        tol: f64,
    ) -> Result<(RT0Field, P0Field, SaddleSolveReport)> {
        let start = Instant::now();
        let nu = disc.n_velocity();
        let np = disc.n_pressure();
        if first.len() != nu || second.len() != np {
            return Err(Error::MeshMismatch(format!(
                "Darcy loads have lengths {}/{}, expected {nu}/{np}",
                first.len(),
                second.len()
            )));
        }
        check_compatibility(second)?;
        let mut rhs = Vec::with_capacity(nu + np - 1);
        rhs.extend_from_slice(first);
        rhs.extend_from_slice(&second[1..]);
        let (x, stats) = self.lu.solve(&rhs, tol)?;
        let alpha = &x[..nu];
        let mut u = RT0Field::zeros(&disc.mesh);
        for (i, &e) in disc.darcy_dofs.interior.iter().enumerate() {
            u.values[e] = alpha[i];
        }
        let mut pressure = Vec::with_capacity(np);
        pressure.push(0.0);
        pressure.extend_from_slice(&x[nu..]);
        let total: f64 = self.areas.iter().sum();
        let mean = pressure.iter().zip(&self.areas).map(|(p, a)| p * a).sum::<f64>() / total;
        pressure.iter_mut().for_each(|p| *p -= mean);
        let p = P0Field {
            values: pressure,
            zero_mean: true,
        };
        let balance: Vec<f64> = self
            .matrices
            .b
            .mul_vec(alpha)
            .iter()
            .zip(second)
            .map(|(bx, f)| bx - f)
            .collect();
        let scale = norm2(second);
        let mass_residual = if scale > 0.0 {
            norm2(&balance) / scale
        } else {
            norm2(&balance)
        };
        let divergence_defect = balance
            .iter()
            .zip(&self.areas)
            .fold(0.0f64, |m, (r, a)| m.max((r / a).abs()));
        let reused = self.solves.fetch_add(1, std::sync::atomic::Ordering::Relaxed) > 0;
        let wall_time = start.elapsed() + if reused { Duration::ZERO } else { self.factor_time };
        Ok((
            u,
            p,
            SaddleSolveReport {
                relative_residual: stats.relative_residual,
                mass_residual,
                divergence_defect,
                reused_factorization: reused,
                wall_time,
            },
        ))
    }

    /// State solve: zero velocity load, mass rows `F`.
    pub fn solve_state(
        &self,
        disc: &Discretization,
        f: &[f64],
        tol: f64,
    ) -> Result<(RT0Field, P0Field, SaddleSolveReport)> {
        self.solve(disc, &vec![0.0; disc.n_velocity()], f, tol)
    }

    /// Costate solve: velocity load `F*`, divergence-free constraint.
    pub fn solve_costate(
        &self,
        disc: &Discretization,
        f_star: &[f64],
        tol: f64,
    ) -> Result<(RT0Field, P0Field, SaddleSolveReport)> {
        self.solve(disc, f_star, &vec![0.0; disc.n_pressure()], tol)
    }
}

/// Rejects mass sources whose sum is not zero to `1e-10` relative.
pub fn check_compatibility(f: &[f64]) -> Result<()> {
    let sum: f64 = f.iter().sum();
    let scale: f64 = f.iter().map(|v| v.abs()).sum();
    if sum.abs() > 1e-10 * scale.max(1.0) {
        return Err(Error::Compatibility { sum });
    }
    Ok(())
}

/// Factor-and-solve for the state system.
pub fn solve_darcy_state(
    disc: &Discretization,
    matrices: DarcyMatrices,
    f: &[f64],
    tol: f64,
) -> Result<(RT0Field, P0Field, SaddleSolveReport)> {
    check_compatibility(f)?;
    DarcySolver::new(disc, matrices)?.solve_state(disc, f, tol)
}

/// Factor-and-solve for the costate system.
pub fn solve_darcy_costate(
    disc: &Discretization,
    matrices: DarcyMatrices,
    f_star: &[f64],
    tol: f64,
) -> Result<(RT0Field, P0Field, SaddleSolveReport)> {
    DarcySolver::new(disc, matrices)?.solve_costate(disc, f_star, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_darcy, assemble_darcy_state_rhs};
    use crate::fespaces::P1DGField;
    use crate::mesh::{structured_unit_square, Point};
    use crate::model::{build_wells, TwoPhaseModel};
    use crate::quadrature::QuadratureRule;

    fn setup(n: usize) -> (Discretization, DarcyMatrices) {
        let d = Discretization::new(structured_unit_square(n).unwrap(), QuadratureRule::default());
        let c = P1DGField::interpolate(&d.mesh, |x| 0.3 + 0.5 * x.x * x.y);
        let m = assemble_darcy(&d, &TwoPhaseModel::default(), &c).unwrap();
        (d, m)
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let (d, m) = setup(4);
        let (u, p, _) = solve_darcy_state(&d, m, &vec![0.0; d.n_pressure()], 1e-10).unwrap();
        assert!(u.values.iter().all(|v| *v == 0.0));
        assert!(p.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn divergence_matches_source_and_pressure_has_zero_mean() {
        let (d, m) = setup(8);
        let wells = build_wells(&d.mesh, Point::new(0.1, 0.1), Point::new(0.9, 0.9), 0.02).unwrap();
        let f = assemble_darcy_state_rhs(&d, &wells, 0.8);
        let (u, p, report) = solve_darcy_state(&d, m, &f, 1e-10).unwrap();
        assert!(report.mass_residual <= 1e-10);
        let div = u.divergence(&d.mesh).unwrap();
        for k in 0..d.n_pressure() {
            assert!((div.values[k] - 0.8 * wells.net_source(k)).abs() < 1e-8);
        }
        assert!(p.is_zero_mean(&d.mesh, 1e-10));
        assert!(u.satisfies_slip(&d.mesh, 0.0));
    }

    #[test]
    fn incompatible_source_is_rejected() {
        let (d, m) = setup(3);
        let mut f = vec![0.0; d.n_pressure()];
        f[0] = 1.0;
        assert!(matches!(
            solve_darcy_state(&d, m, &f, 1e-10),
            Err(Error::Compatibility { .. })
        ));
    }

    #[test]
    fn costate_velocity_is_divergence_free_and_reuse_is_identical() {
        let (d, m) = setup(6);
        let load: Vec<f64> = (0..d.n_velocity())
            .map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.1)
            .collect();
        let solver = DarcySolver::new(&d, m).unwrap();
        let (u1, p1, r1) = solver.solve_costate(&d, &load, 1e-10).unwrap();
        let (u2, p2, r2) = solver.solve_costate(&d, &load, 1e-10).unwrap();
        assert_eq!(u1, u2);
        assert_eq!(p1, p2);
        assert!(!r1.reused_factorization && r2.reused_factorization);
        assert!(r1.divergence_defect <= 1e-10);
        let div = u1.divergence(&d.mesh).unwrap();
        assert!(div.values.iter().all(|v| v.abs() <= 1e-10));
    }
}
