use super::{Point, PrimalMesh};
use crate::error::{Error, Result};

/// `n x n` criss-cross triangulation of the unit square: every cell is cut
/// by one diagonal, alternating direction in a checkerboard pattern, giving
/// `2 n^2` triangles and `h = sqrt(2) / n`.
pub fn structured_unit_square(n: usize) -> Result<PrimalMesh> {
    structured_rectangle(n, n, [0.0, 0.0], [1.0, 1.0])
}

/// Criss-cross triangulation of `[lo.x, hi.x] x [lo.y, hi.y]` with `nx x ny` cells.
pub fn structured_rectangle(nx: usize, ny: usize, lo: [f64; 2], hi: [f64; 2]) -> Result<PrimalMesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::Config(
            "structured mesh needs at least one cell per direction".into(),
        ));
    }
    if !(hi[0] > lo[0] && hi[1] > lo[1]) {
        return Err(Error::Config("structured mesh needs a non-empty rectangle".into()));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Point::new(
                lo[0] + (hi[0] - lo[0]) * i as f64 / nx as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / ny as f64,
            ));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let a = id(i, j);
            let b = id(i + 1, j);
            let c = id(i + 1, j + 1);
            let d = id(i, j + 1);
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    PrimalMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criss_cross_counts_and_area() {
        for n in [1, 2, 5, 8] {
            let m = structured_unit_square(n).unwrap();
            assert_eq!(m.n_triangles(), 2 * n * n);
            assert_eq!(m.n_vertices(), (n + 1) * (n + 1));
            // V - E + F = 1 for a disc.
            assert_eq!(m.n_vertices() + m.n_triangles(), m.n_edges() + 1);
            let total: f64 = (0..m.n_triangles()).map(|k| m.area(k)).sum();
            assert!((total - 1.0).abs() < 1e-13);
            assert!((m.h() - 2f64.sqrt() / n as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn uniform_mesh_is_quasi_uniform() {
        let m = structured_unit_square(6).unwrap();
        assert!((m.quasi_uniformity() - 1.0).abs() < 1e-12);
    }
}
