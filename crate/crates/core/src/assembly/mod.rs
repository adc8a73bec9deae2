//! Matrices and load vectors of the fully discrete state and costate systems.
//!
//! Row index = test function, column index = trial function throughout.
//! Element loops run on the rayon pool; each element's contribution is
//! collected in element order and merged sequentially, so the resulting
//! matrices are bit-identical for any number of threads.

mod darcy;
mod saturation;
mod trilinear;

pub use darcy::{
    assemble_darcy, assemble_darcy_costate_rhs, assemble_darcy_state_rhs, diamond_vector_load, element_scalar_load,
    DarcyMatrices,
};
pub use saturation::{
    assemble_h_terms, assemble_saturation_costate, assemble_saturation_state, mass_matrix, saturation_load,
    CostateSaturationTerms, HTerms, StateSaturationTerms,
};
pub use trilinear::trilinear_ah;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{BarycentricDualMesh, DiamondDualMesh, Point, PrimalMesh};
use crate::quadrature::QuadratureRule;
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Cached per-triangle geometry.
#[derive(Debug, Clone)]
pub struct ElementGeometry {
    pub points: [Point; 3],
    pub grads: [Point; 3],
    pub area: f64,
    pub edges: [usize; 3],
    pub signs: [f64; 3],
    pub edge_lengths: [f64; 3],
}

impl ElementGeometry {
    /// Local RT0 basis function `i` at `x`.
    pub fn rt0(&self, i: usize, x: &Point) -> Point {
        (x - self.points[i]) * (self.signs[i] * self.edge_lengths[i] / (2.0 * self.area))
    }

    /// Physical point with barycentric coordinates `l`.
    pub fn point(&self, l: &[f64; 3]) -> Point {
        self.points[0] * l[0] + self.points[1] * l[1] + self.points[2] * l[2]
    }
}

/// Velocity unknowns: normal fluxes on interior edges (boundary fluxes are
/// fixed to zero).
#[derive(Debug, Clone)]
pub struct DarcyDofs {
    pub interior: Vec<usize>,
    pub index_of: Vec<Option<usize>>,
}

/// Mesh, dual meshes, quadrature and dof maps shared by every assembly call.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: PrimalMesh,
    pub diamonds: DiamondDualMesh,
    pub barycentric: BarycentricDualMesh,
    pub quadrature: QuadratureRule,
    pub darcy_dofs: DarcyDofs,
    pub elements: Vec<ElementGeometry>,
    /// For each edge, `[(triangle, local index)]` of its neighbours, left first.
    pub edge_neighbours: Vec<Vec<(usize, usize)>>,
}

impl Discretization {
    pub fn new(mesh: PrimalMesh, quadrature: QuadratureRule) -> Self {
        let diamonds = DiamondDualMesh::new(&mesh);
        let barycentric = BarycentricDualMesh::new(&mesh);
        let mut index_of = vec![None; mesh.n_edges()];
        let mut interior = Vec::with_capacity(mesh.n_interior_edges());
        for (e, edge) in mesh.edges().iter().enumerate() {
            if !edge.is_boundary() {
                index_of[e] = Some(interior.len());
                interior.push(e);
            }
        }
        let elements = (0..mesh.n_triangles())
            .map(|k| {
                let edges = mesh.tri_edges(k);
                ElementGeometry {
                    points: mesh.tri_points(k),
                    grads: mesh.barycentric_gradients(k),
                    area: mesh.area(k),
                    edges,
                    signs: mesh.tri_signs(k),
                    edge_lengths: edges.map(|e| mesh.edges()[e].length),
                }
            })
            .collect();
        let edge_neighbours = mesh
            .edges()
            .iter()
            .enumerate()
            .map(|(e, edge)| {
                std::iter::once(edge.left)
                    .chain(edge.right)
                    .map(|k| (k, mesh.local_edge(k, e).expect("adjacent triangle holds edge")))
                    .collect()
            })
            .collect();
        Discretization {
            mesh,
            diamonds,
            barycentric,
            quadrature,
            darcy_dofs: DarcyDofs { interior, index_of },
            elements,
            edge_neighbours,
        }
    }

    pub fn n_velocity(&self) -> usize {
        self.darcy_dofs.interior.len()
    }

    pub fn n_pressure(&self) -> usize {
        self.mesh.n_triangles()
    }

    pub fn n_saturation(&self) -> usize {
        3 * self.mesh.n_triangles()
    }

    /// Quadrature points of barycentric cell `l` of triangle `k` as
    /// `(barycentric coordinates in K, weight)`.
    pub fn cell_quadrature(&self, k: usize, l: usize) -> impl Iterator<Item = ([f64; 3], f64)> + '_ {
        let area = self.elements[k].area / 3.0;
        let (j1, j2) = ((l + 1) % 3, (l + 2) % 3);
        let rule = &self.quadrature.triangle;
        rule.points.iter().zip(&rule.weights).map(move |(mu, w)| {
            let mut lam = [mu[0] / 3.0; 3];
            lam[j1] += mu[1];
            lam[j2] += mu[2];
            (lam, w * area)
        })
    }

    /// Barycentric coordinates in triangle `k` of the point at parameter `s`
    /// along edge `e`, measured from `edge.vertices[0]`.
    pub fn edge_point_bary(&self, k: usize, e: usize, s: f64) -> [f64; 3] {
        let edge = &self.mesh.edges()[e];
        let tri = self.mesh.triangles()[k];
        let mut l = [0.0; 3];
        for (j, v) in tri.iter().enumerate() {
            if *v == edge.vertices[0] {
                l[j] = 1.0 - s;
            } else if *v == edge.vertices[1] {
                l[j] = s;
            }
        }
        l
    }

    /// Weight of triangle `k` in the midpoint average of `gamma_h` on edge `e`.
    pub fn gamma_weight(&self, k: usize, e: usize) -> f64 {
        let total: f64 = self.edge_neighbours[e]
            .iter()
            .map(|&(t, _)| self.elements[t].area)
            .sum();
        self.elements[k].area / total
    }
}

/// `(row, col, value)` triplets per element, merged in element order.
pub(crate) fn collect_parallel<F>(n: usize, nrows: usize, ncols: usize, f: F) -> Result<CsrMatrix>
where
    F: Fn(usize) -> Result<Vec<(usize, usize, f64)>> + Sync,
{
    let parts: Vec<Result<Vec<(usize, usize, f64)>>> = (0..n).into_par_iter().map(&f).collect();
    let mut t = TripletBuilder::with_capacity(nrows, ncols, 9 * n);
    for part in parts {
        t.extend(part?);
    }
    Ok(t.build())
}

/// Per-element vector contributions `(index, value)` merged in element order.
pub(crate) fn collect_vector<F>(n: usize, len: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<Vec<(usize, f64)>> + Sync,
{
    let parts: Vec<Result<Vec<(usize, f64)>>> = (0..n).into_par_iter().map(&f).collect();
    let mut v = vec![0.0; len];
    for part in parts {
        for (i, x) in part? {
            v[i] += x;
        }
    }
    Ok(v)
}

pub(crate) fn check_finite(element: usize, what: &str, values: impl IntoIterator<Item = f64>) -> Result<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::Assembly {
            element,
            message: format!("non-finite {what}"),
        })
    }
}

/// `eta_h Psi_a` on barycentric cell `l` of the same triangle.
#[inline]
pub(crate) fn eta_weight(a: usize, l: usize) -> f64 {
    if a == l {
        0.0
    } else {
        0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured_unit_square;

    #[test]
    fn cell_quadrature_integrates_barycentric_coordinates() {
        let d = Discretization::new(structured_unit_square(2).unwrap(), QuadratureRule::default());
        for l in 0..3 {
            let total: f64 = d.cell_quadrature(0, l).map(|(_, w)| w).sum();
            assert!((total - d.elements[0].area / 3.0).abs() < 1e-15);
            // Centroid of the cell has coordinate 1/9 on vertex l.
            let m: f64 = d.cell_quadrature(0, l).map(|(lam, w)| w * lam[l]).sum();
            assert!((m / total - 1.0 / 9.0).abs() < 1e-14);
        }
    }

    #[test]
    fn edge_parametrisation_is_shared_by_both_sides() {
        let d = Discretization::new(structured_unit_square(3).unwrap(), QuadratureRule::default());
        for (e, nb) in d.edge_neighbours.iter().enumerate() {
            for &(k, _) in nb {
                let x = d.elements[k].point(&d.edge_point_bary(k, e, 0.3));
                let edge = &d.mesh.edges()[e];
                let a = d.mesh.vertices()[edge.vertices[0]];
                let b = d.mesh.vertices()[edge.vertices[1]];
                assert!((x - (a + (b - a) * 0.3)).norm() < 1e-14);
            }
        }
    }
}
