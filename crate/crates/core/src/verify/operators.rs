use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::fit_rate;
use crate::assembly::{assemble_darcy, assemble_h_terms, Discretization};
use crate::error::Result;
use crate::fespaces::{b_form, eta_h, gamma_h, P0Field, P1DGField, RT0Field};
use crate::mesh::{Point, PrimalMesh};
use crate::model::TwoPhaseModel;
use crate::quadrature::{QuadratureRule, TriangleRule};
use crate::solver::DarcySolver;

/// Worst defects of the transfer-operator identities over random fields.
#[derive(Debug, Clone, Serialize)]
pub struct OperatorReport {
    pub samples: usize,
    /// `max |b(gamma_h v, w) + (div v, w)| / max(1, |(div v, w)|)`.
    pub brel_defect: f64,
    /// `max | |eta_h z| - |z| | / |z|`.
    pub eta_norm_defect: f64,
    /// Largest `|gamma_h v| / |v|`; at most 1.
    pub contraction_ratio: f64,
    pub penalty_asymmetry: f64,
    /// Smallest `z^T T4 z / |z|^2` seen.
    pub penalty_min_rayleigh: f64,
    /// Largest elementwise divergence of a costate velocity.
    pub costate_divergence: f64,
}

impl OperatorReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.brel_defect <= tol
            && self.eta_norm_defect <= tol
            && self.contraction_ratio <= 1.0 + tol
            && self.penalty_asymmetry <= tol
            && self.penalty_min_rayleigh >= -tol
            && self.costate_divergence <= 1e-10
    }
}

/// Random RT0 field with zero normal flux on the boundary.
pub fn random_slip_field(mesh: &PrimalMesh, rng: &mut impl Rng) -> RT0Field {
    RT0Field {
        values: mesh
            .edges()
            .iter()
            .map(|e| {
                if e.right.is_some() {
                    rng.random_range(-1.0..1.0)
                } else {
                    0.0
                }
            })
            .collect(),
    }
}

/// Checks the `gamma_h` / `eta_h` identities and the penalty and costate
/// properties on `samples` random fields.
pub fn operator_identity_suite(mesh: &PrimalMesh, samples: usize, seed: u64) -> Result<OperatorReport> {
    let disc = Discretization::new(mesh.clone(), QuadratureRule::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OperatorReport {
        samples,
        brel_defect: 0.0,
        eta_norm_defect: 0.0,
        contraction_ratio: 0.0,
        penalty_asymmetry: 0.0,
        penalty_min_rayleigh: f64::INFINITY,
        costate_divergence: 0.0,
    };
    let model = TwoPhaseModel::default();
    for _ in 0..samples {
        let v = random_slip_field(mesh, &mut rng);
        let w = P0Field {
            values: (0..mesh.n_triangles()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            zero_mean: false,
        };
        let gv = gamma_h(mesh, &v)?;
        let lhs = b_form(mesh, &disc.diamonds, &gv, &w)?;
        let rhs = v.divergence(mesh)?.l2_inner(&w, mesh);
        report.brel_defect = report.brel_defect.max((lhs + rhs).abs() / rhs.abs().max(1.0));
        report.contraction_ratio = report
            .contraction_ratio
            .max(gv.l2_norm(&disc.diamonds) / v.l2_norm(mesh));

        let z = P1DGField {
            values: (0..disc.n_saturation()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let (nz, nez) = (z.l2_norm(mesh), eta_h(mesh, &z)?.l2_norm(mesh));
        report.eta_norm_defect = report.eta_norm_defect.max((nz - nez).abs() / nz);
    }

    let c = P1DGField {
        values: (0..disc.n_saturation()).map(|_| rng.random_range(0.0..1.0)).collect(),
    };
    let t4 = assemble_h_terms(&disc, &model, &c, 1.0)?.t4;
    report.penalty_asymmetry = t4.asymmetry();
    for _ in 0..samples.min(10) {
        let z: Vec<f64> = (0..disc.n_saturation()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rq = t4.bilinear(&z, &z) / z.iter().map(|x| x * x).sum::<f64>();
        report.penalty_min_rayleigh = report.penalty_min_rayleigh.min(rq);
    }

    let solver = DarcySolver::new(&disc, assemble_darcy(&disc, &model, &c)?)?;
    for _ in 0..3 {
        let load: Vec<f64> = (0..disc.n_velocity()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (u, _, _) = solver.solve_costate(&disc, &load, 1e-10)?;
        let div = u.divergence(mesh)?;
        report.costate_divergence = div.values.iter().fold(report.costate_divergence, |m, d| m.max(d.abs()));
    }
    Ok(report)
}

/// `|v - gamma_h v|` for an RT0 field: exact on each half of each diamond.
pub fn gamma_defect(mesh: &PrimalMesh, v: &RT0Field) -> Result<f64> {
    let gv = gamma_h(mesh, v)?;
    let rule = TriangleRule::with_degree(2)?;
    let mut sum = 0.0;
    for (e, edge) in mesh.edges().iter().enumerate() {
        let a = mesh.vertices()[edge.vertices[0]];
        let b = mesh.vertices()[edge.vertices[1]];
        for k in std::iter::once(edge.left).chain(edge.right) {
            let corners = [mesh.barycentre(k), a, b];
            let area = crate::mesh::signed_area(&corners[0], &a, &b).abs();
            sum += rule
                .map(&corners, area)
                .map(|(x, w)| w * (v.eval(mesh, k, &x) - gv.values[e]).norm_squared())
                .sum::<f64>();
        }
    }
    Ok(sum.sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub h: Vec<f64>,
    pub defects: Vec<f64>,
    /// Largest `|gamma_h v| / |v|` over the levels.
    pub contraction_ratio: f64,
    pub rate: f64,
}

/// Interpolates `field` on each mesh and records `|v - gamma_h v|`.
pub fn gamma_contraction_study(meshes: &[PrimalMesh], field: impl Fn(&Point) -> Point) -> Result<ContractionReport> {
    let mut h = Vec::new();
    let mut defects = Vec::new();
    let mut ratio = 0.0f64;
    for mesh in meshes {
        let v = RT0Field::interpolate(mesh, &field);
        let diamonds = crate::mesh::DiamondDualMesh::new(mesh);
        ratio = ratio.max(gamma_h(mesh, &v)?.l2_norm(&diamonds) / v.l2_norm(mesh));
        h.push(mesh.h());
        defects.push(gamma_defect(mesh, &v)?);
    }
    Ok(ContractionReport {
        rate: fit_rate(&h, &defects),
        h,
        defects,
        contraction_ratio: ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured_unit_square;

    #[test]
    fn identities_hold_on_a_small_mesh() {
        let r = operator_identity_suite(&structured_unit_square(4).unwrap(), 10, 3).unwrap();
        assert!(r.passed(1e-12), "{r:?}");
    }

    #[test]
    fn gamma_defect_vanishes_for_constants() {
        let m = structured_unit_square(3).unwrap();
        let v = RT0Field::interpolate(&m, |_| Point::new(1.0, -2.0));
        assert!(gamma_defect(&m, &v).unwrap() < 1e-13);
    }
}
