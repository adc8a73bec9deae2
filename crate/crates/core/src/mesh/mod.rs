//! Primal triangulation and its two dual tessellations.
//!
//! The primal mesh stores vertices, counter-clockwise triangles and the edge
//! graph. Every edge carries a fixed unit normal: for an interior edge it
//! points from the adjacent triangle with the lower index (`left`) towards
//! the one with the higher index (`right`); for a boundary edge it points out
//! of the domain. All jump/average bookkeeping downstream consumes this
//! orientation through [`PrimalMesh::edge_sign`].
//!
//! Local numbering inside a triangle: local edge `i` is the edge opposite
//! local vertex `i`, so its endpoints are local vertices `i+1` and `i+2`
//! (mod 3).

mod dual;
pub mod io;
mod structured;

pub use dual::{BarycentricCell, BarycentricDualMesh, DiamondCell, DiamondDualMesh, DualSegment};
pub use io::{format_triangle_mesh, read_triangle_mesh, write_triangle_mesh};
pub use structured::{structured_rectangle, structured_unit_square};

use std::collections::HashMap;

use nalgebra::Vector2;

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Relative area below which a triangle is considered degenerate.
const DEGENERATE_AREA: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Endpoint vertex indices, ordered `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    /// Adjacent triangle with the lower index.
    pub left: usize,
    /// Second adjacent triangle, `None` on the boundary.
    pub right: Option<usize>,
    /// Unit normal, `left -> right` (outward on the boundary).
    pub normal: Point,
    pub midpoint: Point,
    pub length: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

/// Conforming triangulation of a polygonal domain.
#[derive(Debug, Clone)]
pub struct PrimalMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    tri_edges: Vec<[usize; 3]>,
    tri_signs: Vec<[f64; 3]>,
    areas: Vec<f64>,
    barycentres: Vec<Point>,
    diameters: Vec<f64>,
    h: f64,
}

impl PrimalMesh {
    /// Builds the mesh and its edge connectivity.
    ///
    /// Triangles given clockwise are reoriented. Duplicate or degenerate
    /// triangles are structural errors; edges shared by more than two
    /// triangles and hanging nodes are conformity errors.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Structure("mesh has no triangles".into()));
        }
        let nv = vertices.len();
        let mut tris = Vec::with_capacity(triangles.len());
        let mut seen: HashMap<[usize; 3], usize> = HashMap::new();
        let extent = bounding_extent(&vertices);
        for (k, t) in triangles.iter().enumerate() {
            for &v in t {
                if v >= nv {
                    return Err(Error::Structure(format!(
                        "triangle {k} references vertex {v}, but only {nv} vertices exist"
                    )));
                }
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Structure(format!("triangle {k} repeats a vertex")));
            }
            let mut key = *t;
            key.sort_unstable();
            if let Some(prev) = seen.insert(key, k) {
                return Err(Error::Structure(format!("triangles {prev} and {k} are duplicates")));
            }
            let signed = signed_area(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]);
            if signed.abs() <= DEGENERATE_AREA * extent * extent {
                return Err(Error::Structure(format!("triangle {k} is degenerate")));
            }
            tris.push(if signed > 0.0 { *t } else { [t[0], t[2], t[1]] });
        }

        let areas: Vec<f64> = tris
            .iter()
            .map(|t| signed_area(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]))
            .collect();
        let barycentres: Vec<Point> = tris
            .iter()
            .map(|t| (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0)
            .collect();
        let diameters: Vec<f64> = tris
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|v| vertices[v]);
                (a - b).norm().max((b - c).norm()).max((c - a).norm())
            })
            .collect();
        let h = diameters.iter().cloned().fold(0.0, f64::max);

        // Edges are numbered in order of discovery over the triangles.
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut tri_edges = vec![[0usize; 3]; tris.len()];
        for (k, t) in tris.iter().enumerate() {
            for i in 0..3 {
                let a = t[(i + 1) % 3];
                let b = t[(i + 2) % 3];
                let key = if a < b { [a, b] } else { [b, a] };
                match edge_index.get(&key) {
                    Some(&e) => {
                        let edge = &mut edges[e];
                        if edge.right.is_some() {
                            return Err(Error::Conformity(format!(
                                "edge ({}, {}) is shared by more than two triangles",
                                key[0], key[1]
                            )));
                        }
                        edge.right = Some(k);
                        tri_edges[k][i] = e;
                    }
                    None => {
                        let pa = vertices[key[0]];
                        let pb = vertices[key[1]];
                        let tangent = pb - pa;
                        let length = tangent.norm();
                        let mut normal = Point::new(tangent.y, -tangent.x) / length;
                        let midpoint = (pa + pb) * 0.5;
                        // Orient outward from `k`, which is the lower-index neighbour.
                        if normal.dot(&(midpoint - barycentres[k])) < 0.0 {
                            normal = -normal;
                        }
                        edge_index.insert(key, edges.len());
                        tri_edges[k][i] = edges.len();
                        edges.push(Edge {
                            vertices: key,
                            left: k,
                            right: None,
                            normal,
                            midpoint,
                            length,
                        });
                    }
                }
            }
        }

        let tri_signs: Vec<[f64; 3]> = tri_edges
            .iter()
            .enumerate()
            .map(|(k, te)| te.map(|e| if edges[e].left == k { 1.0 } else { -1.0 }))
            .collect();

        let mesh = PrimalMesh {
            vertices,
            triangles: tris,
            edges,
            tri_edges,
            tri_signs,
            areas,
            barycentres,
            diameters,
            h,
        };
        mesh.check_hanging_nodes()?;
        Ok(mesh)
    }

    /// A vertex lying strictly inside a boundary edge means two boundary
    /// edges overlap a single geometric segment: a hanging node.
    fn check_hanging_nodes(&self) -> Result<()> {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                used[v] = true;
            }
        }
        for (e, edge) in self.edges.iter().enumerate().filter(|(_, e)| e.is_boundary()) {
            let a = self.vertices[edge.vertices[0]];
            let b = self.vertices[edge.vertices[1]];
            let d = b - a;
            let len2 = d.norm_squared();
            for (v, p) in self.vertices.iter().enumerate() {
                if !used[v] || edge.vertices.contains(&v) {
                    continue;
                }
                let s = (p - a).dot(&d) / len2;
                if s <= 1e-12 || s >= 1.0 - 1e-12 {
                    continue;
                }
                let off = (a + d * s - p).norm();
                if off <= 1e-10 * len2.sqrt() {
                    return Err(Error::Conformity(format!(
                        "vertex {v} hangs on edge {e} ({}, {})",
                        edge.vertices[0], edge.vertices[1]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_interior_edges(&self) -> usize {
        self.edges.iter().filter(|e| !e.is_boundary()).count()
    }

    /// Global edge index of local edge `i` of triangle `k`.
    pub fn tri_edges(&self, k: usize) -> [usize; 3] {
        self.tri_edges[k]
    }

    /// `+1` if the global normal of local edge `i` is outward from `k`, else `-1`.
    pub fn edge_sign(&self, k: usize, i: usize) -> f64 {
        self.tri_signs[k][i]
    }

    pub fn tri_signs(&self, k: usize) -> [f64; 3] {
        self.tri_signs[k]
    }

    /// Vertex coordinates of triangle `k`, counter-clockwise.
    pub fn tri_points(&self, k: usize) -> [Point; 3] {
        self.triangles[k].map(|v| self.vertices[v])
    }

    pub fn area(&self, k: usize) -> f64 {
        self.areas[k]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn barycentre(&self, k: usize) -> Point {
        self.barycentres[k]
    }

    pub fn diameter(&self, k: usize) -> f64 {
        self.diameters[k]
    }

    /// Maximum element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn domain_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// `max h_K / min h_K`; measured, never enforced.
    pub fn quasi_uniformity(&self) -> f64 {
        let min = self.diameters.iter().cloned().fold(f64::INFINITY, f64::min);
        self.h / min
    }

    /// Local index of `edge` within triangle `k`.
    pub fn local_edge(&self, k: usize, edge: usize) -> Option<usize> {
        self.tri_edges[k].iter().position(|&e| e == edge)
    }

    /// Barycentric coordinates of `x` with respect to triangle `k`.
    pub fn barycentric(&self, k: usize, x: &Point) -> [f64; 3] {
        let [a, b, c] = self.tri_points(k);
        let area = self.areas[k];
        [
            signed_area(x, &b, &c) / area,
            signed_area(&a, x, &c) / area,
            signed_area(&a, &b, x) / area,
        ]
    }

    /// Gradients of the three barycentric coordinate functions on triangle `k`.
    pub fn barycentric_gradients(&self, k: usize) -> [Point; 3] {
        let p = self.tri_points(k);
        let two_area = 2.0 * self.areas[k];
        let mut g = [Point::zeros(); 3];
        for (i, gi) in g.iter_mut().enumerate() {
            let a = p[(i + 1) % 3];
            let b = p[(i + 2) % 3];
            // Inward normal of the opposite edge scaled by its length.
            *gi = Point::new(a.y - b.y, b.x - a.x) / two_area;
        }
        g
    }

    /// Index of a triangle containing `x`, if any.
    pub fn locate(&self, x: &Point) -> Option<usize> {
        (0..self.n_triangles()).find(|&k| {
            let l = self.barycentric(k, x);
            l.iter().all(|&v| v >= -1e-12)
        })
    }

    /// Uniform red refinement: every triangle is split into four through its
    /// edge midpoints. Halves `h` exactly.
    pub fn refine_uniform(&self) -> Result<PrimalMesh> {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend(self.edges.iter().map(|e| e.midpoint));
        let mut triangles = Vec::with_capacity(4 * self.n_triangles());
        for (k, t) in self.triangles.iter().enumerate() {
            let m = self.tri_edges[k].map(|e| nv + e);
            // m[i] is the midpoint opposite vertex i.
            triangles.push([t[0], m[2], m[1]]);
            triangles.push([m[2], t[1], m[0]]);
            triangles.push([m[1], m[0], t[2]]);
            triangles.push([m[0], m[1], m[2]]);
        }
        PrimalMesh::new(vertices, triangles)
    }
}

pub(crate) fn signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

fn bounding_extent(vertices: &[Point]) -> f64 {
    let mut lo = Point::repeat(f64::INFINITY);
    let mut hi = Point::repeat(f64::NEG_INFINITY);
    for p in vertices {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangle_square() -> PrimalMesh {
        let v = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        PrimalMesh::new(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    #[test]
    fn two_triangle_square_topology() {
        let m = two_triangle_square();
        assert_eq!(m.n_edges(), 5);
        assert_eq!(m.n_interior_edges(), 1);
        assert!((m.domain_area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reference_triangle() {
        let v = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let m = PrimalMesh::new(v, vec![[0, 1, 2]]).unwrap();
        assert!((m.area(0) - 0.5).abs() < 1e-15);
        assert!((m.h() - 2f64.sqrt()).abs() < 1e-15);
        assert!(m.edges().iter().all(|e| e.is_boundary()));
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let v = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let m = PrimalMesh::new(v, vec![[0, 2, 1]]).unwrap();
        assert!(m.area(0) > 0.0);
    }

    #[test]
    fn boundary_normals_point_outward() {
        let m = structured_unit_square(3).unwrap();
        let centre = Point::new(0.5, 0.5);
        for e in m.edges().iter().filter(|e| e.is_boundary()) {
            assert!(e.normal.dot(&(e.midpoint - centre)) > 0.0);
        }
    }

    #[test]
    fn interior_normals_point_from_lower_to_higher_triangle() {
        let m = structured_unit_square(4).unwrap();
        for e in m.edges().iter().filter(|e| !e.is_boundary()) {
            let r = e.right.unwrap();
            assert!(e.left < r);
            assert!(e.normal.dot(&(m.barycentre(r) - m.barycentre(e.left))) > 0.0);
        }
    }

    #[test]
    fn opposite_signs_from_both_sides() {
        let m = structured_unit_square(4).unwrap();
        for (ei, e) in m.edges().iter().enumerate() {
            if let Some(r) = e.right {
                let il = m.local_edge(e.left, ei).unwrap();
                let ir = m.local_edge(r, ei).unwrap();
                assert_eq!(m.edge_sign(e.left, il), 1.0);
                assert_eq!(m.edge_sign(r, ir), -1.0);
            }
        }
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let v = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)];
        assert!(matches!(PrimalMesh::new(v, vec![[0, 1, 2]]), Err(Error::Structure(_))));
    }

    #[test]
    fn duplicate_triangle_rejected() {
        let v = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        assert!(matches!(
            PrimalMesh::new(v, vec![[0, 1, 2], [1, 2, 0]]),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn out_of_range_index_rejected() {
        let v = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        assert!(matches!(PrimalMesh::new(v, vec![[0, 1, 3]]), Err(Error::Structure(_))));
    }

    #[test]
    fn hanging_node_rejected() {
        // Big triangle on the left, two small ones on the right sharing the
        // midpoint of the big triangle's right edge.
        let v = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 2.0),
            Point::new(1.0, 1.0),
            Point::new(2.0, 1.0),
        ];
        let tris = vec![[0, 1, 2], [1, 4, 3], [3, 4, 2]];
        assert!(matches!(PrimalMesh::new(v, tris), Err(Error::Conformity(_))));
    }

    #[test]
    fn triple_edge_rejected() {
        let v = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.5, 1.0),
            Point::new(0.5, -1.0),
            Point::new(0.5, 0.5),
        ];
        let tris = vec![[0, 1, 2], [0, 3, 1], [0, 1, 4]];
        assert!(matches!(PrimalMesh::new(v, tris), Err(Error::Conformity(_))));
    }

    #[test]
    fn refinement_halves_h_and_keeps_area() {
        let m = structured_unit_square(2).unwrap();
        let r = m.refine_uniform().unwrap();
        assert_eq!(r.n_triangles(), 4 * m.n_triangles());
        assert!((r.h() - 0.5 * m.h()).abs() < 1e-14);
        assert!((r.domain_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn barycentric_gradients_sum_to_zero() {
        let m = structured_unit_square(3).unwrap();
        for k in 0..m.n_triangles() {
            let g = m.barycentric_gradients(k);
            assert!((g[0] + g[1] + g[2]).norm() < 1e-12);
            let p = m.tri_points(k);
            // grad(lambda_0) . (p0 - p1) = 1
            assert!((g[0].dot(&(p[0] - p[1])) - 1.0).abs() < 1e-12);
        }
    }
}
