use super::{check_finite, collect_parallel, collect_vector, Discretization};
use crate::error::Result;
use crate::fespaces::P1DGField;
use crate::mesh::Point;
use crate::model::{Coefficients, WellModel};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Blocks of the mixed system on interior-edge velocity unknowns.
#[derive(Debug, Clone)]
pub struct DarcyMatrices {
    /// `A_ij = (alpha(C) Phi_j, gamma_h Phi_i)`.
    pub a: CsrMatrix,
    /// `B_lj = int_{T_l} div Phi_j`.
    pub b: CsrMatrix,
}

/// Test vectors `gamma_h Phi_i` restricted to diamond `e`: `(row, value)`.
fn diamond_tests(disc: &Discretization, e: usize) -> Vec<(usize, Point)> {
    let m = disc.mesh.edges()[e].midpoint;
    let mut out = Vec::with_capacity(6);
    for &(k, _) in &disc.edge_neighbours[e] {
        let g = &disc.elements[k];
        let w = disc.gamma_weight(k, e);
        for i in 0..3 {
            if let Some(row) = disc.darcy_dofs.index_of[g.edges[i]] {
                out.push((row, g.rt0(i, &m) * w));
            }
        }
    }
    out
}

pub fn assemble_darcy(disc: &Discretization, model: &dyn Coefficients, c: &P1DGField) -> Result<DarcyMatrices> {
    c.check(&disc.mesh)?;
    let n = disc.n_velocity();
    let a = collect_parallel(disc.mesh.n_edges(), n, n, |e| {
        let tests = diamond_tests(disc, e);
        if tests.is_empty() {
            return Ok(Vec::new());
        }
        let mut trials: Vec<(usize, Point)> = Vec::with_capacity(6);
        for &(k, l) in &disc.edge_neighbours[e] {
            let g = &disc.elements[k];
            let mut acc = [Point::zeros(); 3];
            for (lam, w) in disc.cell_quadrature(k, l) {
                let x = g.point(&lam);
                let alpha = model.alpha(c.eval_bary(k, &lam));
                for (j, v) in acc.iter_mut().enumerate() {
                    *v += g.rt0(j, &x) * (w * alpha);
                }
            }
            check_finite(k, "inverse mobility", acc.iter().flat_map(|v| [v.x, v.y]))?;
            for (edge, v) in g.edges.iter().zip(acc) {
                if let Some(col) = disc.darcy_dofs.index_of[*edge] {
                    trials.push((col, v));
                }
            }
        }
        Ok(tests
            .iter()
            .flat_map(|(row, t)| trials.iter().map(move |(col, v)| (*row, *col, t.dot(v))))
            .collect())
    })?;
    let mut b = TripletBuilder::with_capacity(disc.n_pressure(), n, 3 * disc.n_pressure());
    for (k, g) in disc.elements.iter().enumerate() {
        for j in 0..3 {
            if let Some(col) = disc.darcy_dofs.index_of[g.edges[j]] {
                b.push(k, col, g.signs[j] * g.edge_lengths[j]);
            }
        }
    }
    Ok(DarcyMatrices { a, b: b.build() })
}

/// `int_Omega g . gamma_h Phi_i` for every interior edge `i`; `g` receives
/// the triangle, barycentric coordinates in it and the physical point.
pub fn diamond_vector_load<G>(disc: &Discretization, g: G) -> Result<Vec<f64>>
where
    G: Fn(usize, &[f64; 3], &Point) -> Point + Sync,
{
    collect_vector(disc.mesh.n_edges(), disc.n_velocity(), |e| {
        let tests = diamond_tests(disc, e);
        if tests.is_empty() {
            return Ok(Vec::new());
        }
        let mut total = Point::zeros();
        for &(k, l) in &disc.edge_neighbours[e] {
            let geo = &disc.elements[k];
            for (lam, w) in disc.cell_quadrature(k, l) {
                total += g(k, &lam, &geo.point(&lam)) * w;
            }
            check_finite(k, "velocity load", [total.x, total.y])?;
        }
        Ok(tests.into_iter().map(|(row, t)| (row, t.dot(&total))).collect())
    })
}

/// `int_{T_l} g` for every triangle.
pub fn element_scalar_load<G>(disc: &Discretization, g: G) -> Result<Vec<f64>>
where
    G: Fn(usize, &Point) -> f64 + Sync,
{
    collect_vector(disc.mesh.n_triangles(), disc.n_pressure(), |k| {
        let geo = &disc.elements[k];
        let v: f64 = disc
            .quadrature
            .triangle
            .map(&geo.points, geo.area)
            .map(|(x, w)| w * g(k, &x))
            .sum();
        check_finite(k, "pressure load", [v])?;
        Ok(vec![(k, v)])
    })
}

/// `F_l = int_{T_l} (r_0 - r_1) q`, integrated exactly for indicator wells.
pub fn assemble_darcy_state_rhs(disc: &Discretization, wells: &WellModel, q: f64) -> Vec<f64> {
    (0..disc.n_pressure())
        .map(|k| wells.net_source(k) * q * disc.elements[k].area)
        .collect()
}

/// `F*_i = -int C* b(C) grad C . gamma_h Phi_i`.
pub fn assemble_darcy_costate_rhs(
    disc: &Discretization,
    model: &dyn Coefficients,
    c: &P1DGField,
    c_star: &P1DGField,
) -> Result<Vec<f64>> {
    c.check(&disc.mesh)?;
    c_star.check(&disc.mesh)?;
    let grads: Vec<Point> = (0..disc.mesh.n_triangles())
        .map(|k| c.gradient(&disc.mesh, k))
        .collect();
    diamond_vector_load(disc, |k, lam, _| {
        grads[k] * (-c_star.eval_bary(k, lam) * model.b(c.eval_bary(k, lam)))
    })
}
