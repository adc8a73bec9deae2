use super::Discretization;
use crate::error::{Error, Result};
use crate::fespaces::{eta_h, P1DGField};
use crate::model::Coefficients;

/// Direct evaluation of the DFVE diffusion form `A_h(psi; phi, z)` from the
/// fields, without building a matrix. Edge terms run over interior edges.
pub fn trilinear_ah(
    disc: &Discretization,
    model: &dyn Coefficients,
    psi: &P1DGField,
    phi: &P1DGField,
    z: &P1DGField,
    xi: f64,
) -> Result<f64> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::Config(format!("xi must be positive, got {xi}")));
    }
    let mesh = &disc.mesh;
    let eta_z = eta_h(mesh, z)?;
    let eta_phi = eta_h(mesh, phi)?;
    psi.check(mesh)?;
    let seg = &disc.quadrature.segment;

    let mut fan = 0.0;
    for (index, cell) in disc.barycentric.cells().iter().enumerate() {
        let k = cell.triangle;
        let grad = phi.gradient(mesh, k);
        for s in &cell.interior {
            let dint: f64 = seg
                .scaled(s.length)
                .map(|(t, w)| w * model.diffusion(psi.eval(mesh, k, &(s.start + (s.end - s.start) * t))))
                .sum();
            fan -= eta_z.values[index] * dint * grad.dot(&s.normal);
        }
    }

    let (mut consistency, mut symmetry, mut penalty) = (0.0, 0.0, 0.0);
    for (e, edge) in mesh.edges().iter().enumerate() {
        let Some(r) = edge.right else { continue };
        let l = edge.left;
        let cl = 3 * l + mesh.local_edge(l, e).expect("edge of left triangle");
        let cr = 3 * r + mesh.local_edge(r, e).expect("edge of right triangle");
        let a = mesh.vertices()[edge.vertices[0]];
        let b = mesh.vertices()[edge.vertices[1]];
        let (gpl, gpr) = (phi.gradient(mesh, l), phi.gradient(mesh, r));
        let (gzl, gzr) = (z.gradient(mesh, l), z.gradient(mesh, r));
        let jump_eta_z = eta_z.values[cl] - eta_z.values[cr];
        let jump_eta_phi = eta_phi.values[cl] - eta_phi.values[cr];
        for (t, w) in seg.scaled(edge.length) {
            let x = a + (b - a) * t;
            let (dl, dr) = (
                model.diffusion(psi.eval(mesh, l, &x)),
                model.diffusion(psi.eval(mesh, r, &x)),
            );
            let avg_phi = (gpl * dl + gpr * dr).dot(&edge.normal) * 0.5;
            let avg_z = (gzl * dl + gzr * dr).dot(&edge.normal) * 0.5;
            consistency -= w * jump_eta_z * avg_phi;
            symmetry -= w * jump_eta_phi * avg_z;
            let jp = phi.eval(mesh, l, &x) - phi.eval(mesh, r, &x);
            let jz = z.eval(mesh, l, &x) - z.eval(mesh, r, &x);
            penalty += w * xi / edge.length * jp * jz;
        }
    }
    Ok(fan + consistency + symmetry + penalty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_h_terms;
    use crate::mesh::structured_unit_square;
    use crate::model::TwoPhaseModel;
    use crate::quadrature::QuadratureRule;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(rng: &mut ChaCha8Rng, n: usize) -> P1DGField {
        P1DGField {
            values: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn matches_matrix_form() {
        let d = Discretization::new(structured_unit_square(4).unwrap(), QuadratureRule::default());
        let model = TwoPhaseModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = d.n_saturation();
        for _ in 0..5 {
            let psi = P1DGField {
                values: (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
            };
            let phi = random_field(&mut rng, n);
            let z = random_field(&mut rng, n);
            let h = assemble_h_terms(&d, &model, &psi, 3.0).unwrap().sum();
            let from_matrix = h.bilinear(&z.values, &phi.values);
            let direct = trilinear_ah(&d, &model, &psi, &phi, &z, 3.0).unwrap();
            assert!(
                (from_matrix - direct).abs() <= 1e-12 * direct.abs().max(1.0),
                "{from_matrix} vs {direct}"
            );
        }
    }

    #[test]
    fn constant_trial_gives_zero() {
        let d = Discretization::new(structured_unit_square(3).unwrap(), QuadratureRule::default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = d.n_saturation();
        let psi = random_field(&mut rng, n);
        let z = random_field(&mut rng, n);
        let one = P1DGField::constant(&d.mesh, 1.0);
        let v = trilinear_ah(&d, &TwoPhaseModel::default(), &psi, &one, &z, 5.0).unwrap();
        assert!(v.abs() < 1e-13);
    }
}
