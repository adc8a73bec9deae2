use super::{signed_area, Point, PrimalMesh};

/// Straight piece of a dual cell boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSegment {
    pub start: Point,
    pub end: Point,
    /// Unit normal pointing out of the owning dual cell.
    pub normal: Point,
    pub length: f64,
    /// Primal triangle the segment lies in (or on, for a boundary edge).
    pub triangle: usize,
}

impl DualSegment {
    fn new(start: Point, end: Point, inside: Point, triangle: usize) -> Self {
        let t = end - start;
        let length = t.norm();
        let mut normal = Point::new(t.y, -t.x) / length;
        if normal.dot(&(inside - (start + end) * 0.5)) > 0.0 {
            normal = -normal;
        }
        DualSegment {
            start,
            end,
            normal,
            length,
            triangle,
        }
    }

    pub fn midpoint(&self) -> Point {
        (self.start + self.end) * 0.5
    }
}

/// Diamond cell `T*_M` attached to primal edge `edge`.
#[derive(Debug, Clone)]
pub struct DiamondCell {
    pub edge: usize,
    /// Counter-clockwise polygon: 4 corners for interior edges, 3 on the boundary.
    pub polygon: Vec<Point>,
    pub area: f64,
    /// `(triangle, area of the part of the cell inside it)`.
    pub halves: Vec<(usize, f64)>,
    /// Cell boundary, each piece tagged with the triangle containing it.
    pub segments: Vec<DualSegment>,
}

/// Dual grid with one cell per primal edge.
#[derive(Debug, Clone)]
pub struct DiamondDualMesh {
    cells: Vec<DiamondCell>,
}

impl DiamondDualMesh {
    pub fn new(mesh: &PrimalMesh) -> Self {
        let cells = mesh
            .edges()
            .iter()
            .enumerate()
            .map(|(e, edge)| {
                let a = mesh.vertices()[edge.vertices[0]];
                let b = mesh.vertices()[edge.vertices[1]];
                let mut halves = Vec::with_capacity(2);
                let mut segments = Vec::with_capacity(4);
                let mut neighbours = vec![edge.left];
                neighbours.extend(edge.right);
                for &k in &neighbours {
                    let bk = mesh.barycentre(k);
                    let inside = (a + b + bk) / 3.0;
                    halves.push((k, mesh.area(k) / 3.0));
                    segments.push(DualSegment::new(bk, a, inside, k));
                    segments.push(DualSegment::new(bk, b, inside, k));
                }
                let polygon = match edge.right {
                    Some(r) => vec![a, mesh.barycentre(r), b, mesh.barycentre(edge.left)],
                    None => {
                        let inside = (a + b + mesh.barycentre(edge.left)) / 3.0;
                        segments.push(DualSegment::new(a, b, inside, edge.left));
                        vec![a, b, mesh.barycentre(edge.left)]
                    }
                };
                let polygon = counter_clockwise(polygon);
                let area = polygon_area(&polygon);
                DiamondCell {
                    edge: e,
                    polygon,
                    area,
                    halves,
                    segments,
                }
            })
            .collect();
        DiamondDualMesh { cells }
    }

    pub fn cells(&self) -> &[DiamondCell] {
        &self.cells
    }

    pub fn cell(&self, edge: usize) -> &DiamondCell {
        &self.cells[edge]
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }
}

/// Sub-triangle `K*` joining the barycentre of `triangle` with the two
/// endpoints of its local edge `local_edge`.
#[derive(Debug, Clone)]
pub struct BarycentricCell {
    pub triangle: usize,
    pub local_edge: usize,
    /// Global index of the primal edge contained in the cell.
    pub edge: usize,
    /// `[b_K, v_{i+1}, v_{i+2}]`.
    pub corners: [Point; 3],
    pub area: f64,
    /// The two segments `b_K v_{i+1}` and `b_K v_{i+2}` interior to the triangle.
    pub interior: [DualSegment; 2],
}

/// Dual grid with three cells per primal triangle; cell `3k + i` belongs to
/// triangle `k` and contains its local edge `i`.
#[derive(Debug, Clone)]
pub struct BarycentricDualMesh {
    cells: Vec<BarycentricCell>,
}

impl BarycentricDualMesh {
    pub fn new(mesh: &PrimalMesh) -> Self {
        let mut cells = Vec::with_capacity(3 * mesh.n_triangles());
        for k in 0..mesh.n_triangles() {
            let p = mesh.tri_points(k);
            let bk = mesh.barycentre(k);
            let edges = mesh.tri_edges(k);
            for i in 0..3 {
                let v1 = p[(i + 1) % 3];
                let v2 = p[(i + 2) % 3];
                let inside = (bk + v1 + v2) / 3.0;
                cells.push(BarycentricCell {
                    triangle: k,
                    local_edge: i,
                    edge: edges[i],
                    corners: [bk, v1, v2],
                    area: signed_area(&bk, &v1, &v2).abs(),
                    interior: [DualSegment::new(bk, v1, inside, k), DualSegment::new(bk, v2, inside, k)],
                });
            }
        }
        BarycentricDualMesh { cells }
    }

    pub fn cells(&self) -> &[BarycentricCell] {
        &self.cells
    }

    pub fn cell(&self, index: usize) -> &BarycentricCell {
        &self.cells[index]
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }
}

fn polygon_area(p: &[Point]) -> f64 {
    let n = p.len();
    0.5 * (0..n)
        .map(|i| {
            let a = p[i];
            let b = p[(i + 1) % n];
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
}

fn counter_clockwise(mut p: Vec<Point>) -> Vec<Point> {
    if polygon_area(&p) < 0.0 {
        p.reverse();
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured_unit_square;

    fn reference() -> PrimalMesh {
        let v = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        PrimalMesh::new(v, vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn two_triangle_square_diamonds() {
        let v = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let m = PrimalMesh::new(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap();
        let d = DiamondDualMesh::new(&m);
        assert_eq!(d.len(), 5);
        let quads = d.cells().iter().filter(|c| c.polygon.len() == 4).count();
        assert_eq!(quads, 1);
        assert!((d.total_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reference_triangle_boundary_cells() {
        let m = reference();
        let d = DiamondDualMesh::new(&m);
        assert_eq!(d.len(), 3);
        for c in d.cells() {
            // Polygon area computed geometrically, compared to |K|/3.
            assert!((c.area - 0.5 / 3.0).abs() < 1e-15);
            assert_eq!(c.segments.len(), 3);
        }
    }

    #[test]
    fn interior_diamond_area_is_a_third_of_neighbours() {
        let m = structured_unit_square(5).unwrap();
        let d = DiamondDualMesh::new(&m);
        for c in d.cells() {
            let e = &m.edges()[c.edge];
            let expected = match e.right {
                Some(r) => (m.area(e.left) + m.area(r)) / 3.0,
                None => m.area(e.left) / 3.0,
            };
            assert!((c.area - expected).abs() < 1e-15);
            let halves: f64 = c.halves.iter().map(|h| h.1).sum();
            assert!((halves - c.area).abs() < 1e-15);
        }
    }

    #[test]
    fn diamond_boundary_is_closed() {
        let m = structured_unit_square(3).unwrap();
        let d = DiamondDualMesh::new(&m);
        for c in d.cells() {
            let s: Point = c.segments.iter().map(|s| s.normal * s.length).sum();
            assert!(s.norm() < 1e-14);
        }
    }

    #[test]
    fn barycentric_cells_of_reference_triangle() {
        let d = BarycentricDualMesh::new(&reference());
        assert_eq!(d.len(), 3);
        for c in d.cells() {
            assert!((c.area - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn barycentric_cells_of_skewed_triangle() {
        let v = vec![Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(0.0, 4.0)];
        let m = PrimalMesh::new(v, vec![[0, 1, 2]]).unwrap();
        let d = BarycentricDualMesh::new(&m);
        for c in d.cells() {
            // Shoelace on the corners, independent of signed_area.
            let [a, b, cc] = c.corners;
            let shoelace =
                0.5 * ((a.x * b.y - b.x * a.y) + (b.x * cc.y - cc.x * b.y) + (cc.x * a.y - a.x * cc.y)).abs();
            assert!((shoelace - 4.0 / 3.0).abs() < 1e-14);
            assert!((c.area - 4.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn barycentric_cells_partition_each_triangle() {
        let m = structured_unit_square(4).unwrap();
        let d = BarycentricDualMesh::new(&m);
        assert_eq!(d.len(), 3 * m.n_triangles());
        for k in 0..m.n_triangles() {
            let s: f64 = (0..3).map(|i| d.cell(3 * k + i).area).sum();
            assert!((s - m.area(k)).abs() < 1e-12 * m.area(k));
        }
        assert!((d.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn barycentric_fan_is_closed() {
        let m = structured_unit_square(3).unwrap();
        let d = BarycentricDualMesh::new(&m);
        for k in 0..m.n_triangles() {
            let s: Point = (0..3)
                .flat_map(|i| d.cell(3 * k + i).interior.iter())
                .map(|s| s.normal * s.length)
                .sum();
            assert!(s.norm() < 1e-14);
        }
    }

    #[test]
    fn cell_edge_tags_match_mesh() {
        let m = structured_unit_square(2).unwrap();
        let d = BarycentricDualMesh::new(&m);
        for c in d.cells() {
            let e = &m.edges()[c.edge];
            let ends = [m.vertices()[e.vertices[0]], m.vertices()[e.vertices[1]]];
            for p in [c.corners[1], c.corners[2]] {
                assert!(ends.iter().any(|q| (q - p).norm() < 1e-15));
            }
        }
    }
}
