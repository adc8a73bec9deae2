//! Discrete trial/test spaces and the transfer operators between them.
//!
//! * [`RT0Field`]: lowest-order Raviart-Thomas velocity, one normal
//!   component per edge midpoint, `alpha_e = (u . n_e)(M_e)`.
//! * [`P0Field`]: piecewise constant pressure, one value per triangle.
//! * [`P1DGField`]: discontinuous piecewise linear saturation, three vertex
//!   values per triangle (dof `3k + i` is vertex `i` of triangle `k`).
//! * [`DiamondPWConstantField`]: constant vector per diamond cell.
//! * [`DualPWConstantField`]: constant scalar per barycentric cell.
//!
//! Dofs follow mesh construction order (edges, triangles), so matrices are
//! reproducible for a given mesh file.

use crate::error::{Error, Result};
use crate::mesh::{DiamondDualMesh, Point, PrimalMesh};

fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::MeshMismatch(format!(
            "{what} has {got} values, mesh expects {expected}"
        )));
    }
    Ok(())
}

/// Local RT0 basis function of local edge `i` on triangle `k`, with unit
/// normal component along the global normal of that edge.
pub fn rt0_basis(mesh: &PrimalMesh, k: usize, i: usize, x: &Point) -> Point {
    let e = mesh.tri_edges(k)[i];
    let p = mesh.tri_points(k)[i];
    let scale = mesh.edge_sign(k, i) * mesh.edges()[e].length / (2.0 * mesh.area(k));
    (x - p) * scale
}

/// Constant divergence of the local basis function `rt0_basis(k, i)`.
pub fn rt0_basis_divergence(mesh: &PrimalMesh, k: usize, i: usize) -> f64 {
    let e = mesh.tri_edges(k)[i];
    mesh.edge_sign(k, i) * mesh.edges()[e].length / mesh.area(k)
}

/// Area-weighted average of the element-local values `v_K(M_e)` from the
/// triangles adjacent to `e`. The normal component is single-valued, so only
/// the tangential component is actually averaged.
pub fn midpoint_value(mesh: &PrimalMesh, e: usize, eval: impl Fn(usize) -> Point) -> Point {
    let edge = &mesh.edges()[e];
    match edge.right {
        None => eval(edge.left),
        Some(r) => {
            let (al, ar) = (mesh.area(edge.left), mesh.area(r));
            (eval(edge.left) * al + eval(r) * ar) / (al + ar)
        }
    }
}

/// `gamma_h Phi_j` restricted to the diamond of edge `j` itself.
pub fn rt0_basis_midpoint_value(mesh: &PrimalMesh, j: usize) -> Point {
    let m = mesh.edges()[j].midpoint;
    midpoint_value(mesh, j, |k| {
        let i = mesh.local_edge(k, j).expect("edge belongs to its neighbours");
        rt0_basis(mesh, k, i, &m)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RT0Field {
    pub values: Vec<f64>,
}

impl RT0Field {
    pub fn zeros(mesh: &PrimalMesh) -> Self {
        RT0Field {
            values: vec![0.0; mesh.n_edges()],
        }
    }

    pub fn from_values(mesh: &PrimalMesh, values: Vec<f64>) -> Result<Self> {
        check_len("RT0 field", values.len(), mesh.n_edges())?;
        Ok(RT0Field { values })
    }

    /// Midpoint normal-component interpolant of `f`. Exact for fields of the
    /// form `a + b x`.
    pub fn interpolate(mesh: &PrimalMesh, f: impl Fn(&Point) -> Point) -> Self {
        RT0Field {
            values: mesh.edges().iter().map(|e| f(&e.midpoint).dot(&e.normal)).collect(),
        }
    }

    pub fn check(&self, mesh: &PrimalMesh) -> Result<()> {
        check_len("RT0 field", self.values.len(), mesh.n_edges())
    }

    /// Value of the field restricted to triangle `k` at `x`.
    pub fn eval(&self, mesh: &PrimalMesh, k: usize, x: &Point) -> Point {
        let edges = mesh.tri_edges(k);
        (0..3).map(|i| rt0_basis(mesh, k, i, x) * self.values[edges[i]]).sum()
    }

    /// Whether the slip condition `v . n = 0` holds on every boundary edge.
    pub fn satisfies_slip(&self, mesh: &PrimalMesh, tol: f64) -> bool {
        mesh.edges()
            .iter()
            .zip(&self.values)
            .all(|(e, v)| !e.is_boundary() || v.abs() <= tol)
    }

    pub fn divergence(&self, mesh: &PrimalMesh) -> Result<P0Field> {
        rt0_divergence(mesh, self)
    }

    pub fn l2_norm(&self, mesh: &PrimalMesh) -> f64 {
        self.l2_inner(self, mesh).sqrt()
    }

    /// `(v, w)` on `Omega`; the edge-midpoint rule is exact for the quadratic integrand.
    pub fn l2_inner(&self, other: &RT0Field, mesh: &PrimalMesh) -> f64 {
        (0..mesh.n_triangles())
            .map(|k| {
                let w = mesh.area(k) / 3.0;
                mesh.tri_edges(k)
                    .iter()
                    .map(|&e| {
                        let m = mesh.edges()[e].midpoint;
                        w * self.eval(mesh, k, &m).dot(&other.eval(mesh, k, &m))
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &RT0Field, b: f64) -> RT0Field {
        RT0Field {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }
}

/// Elementwise constant divergence: signed flux sum over the area.
pub fn rt0_divergence(mesh: &PrimalMesh, v: &RT0Field) -> Result<P0Field> {
    v.check(mesh)?;
    let values = (0..mesh.n_triangles())
        .map(|k| {
            let edges = mesh.tri_edges(k);
            (0..3)
                .map(|i| v.values[edges[i]] * rt0_basis_divergence(mesh, k, i))
                .sum()
        })
        .collect();
    Ok(P0Field {
        values,
        zero_mean: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct P0Field {
    pub values: Vec<f64>,
    /// Set when the field is meant to live in the zero-mean space.
    pub zero_mean: bool,
}

impl P0Field {
    pub fn zeros(mesh: &PrimalMesh) -> Self {
        P0Field {
            values: vec![0.0; mesh.n_triangles()],
            zero_mean: false,
        }
    }

    pub fn from_values(mesh: &PrimalMesh, values: Vec<f64>) -> Result<Self> {
        check_len("P0 field", values.len(), mesh.n_triangles())?;
        Ok(P0Field {
            values,
            zero_mean: false,
        })
    }

    /// Barycentre interpolant, `beta_l = p(b_K)`.
    pub fn interpolate(mesh: &PrimalMesh, f: impl Fn(&Point) -> f64) -> Self {
        P0Field {
            values: (0..mesh.n_triangles()).map(|k| f(&mesh.barycentre(k))).collect(),
            zero_mean: false,
        }
    }

    pub fn check(&self, mesh: &PrimalMesh) -> Result<()> {
        check_len("P0 field", self.values.len(), mesh.n_triangles())
    }

    /// `sum_l beta_l |K_l|`.
    pub fn integral(&self, mesh: &PrimalMesh) -> f64 {
        self.values.iter().zip(mesh.areas()).map(|(v, a)| v * a).sum()
    }

    pub fn remove_mean(&mut self, mesh: &PrimalMesh) {
        let mean = self.integral(mesh) / mesh.domain_area();
        self.values.iter_mut().for_each(|v| *v -= mean);
        self.zero_mean = true;
    }

    /// Whether the zero-mean constraint holds to `tol * ||beta||_2`.
    pub fn is_zero_mean(&self, mesh: &PrimalMesh, tol: f64) -> bool {
        let norm = self.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.integral(mesh).abs() <= tol * norm.max(f64::MIN_POSITIVE)
    }

    pub fn l2_inner(&self, other: &P0Field, mesh: &PrimalMesh) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(mesh.areas())
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    pub fn l2_norm(&self, mesh: &PrimalMesh) -> f64 {
        self.l2_inner(self, mesh).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct P1DGField {
    pub values: Vec<f64>,
}

impl P1DGField {
    pub fn zeros(mesh: &PrimalMesh) -> Self {
        P1DGField {
            values: vec![0.0; 3 * mesh.n_triangles()],
        }
    }

    pub fn constant(mesh: &PrimalMesh, c: f64) -> Self {
        P1DGField {
            values: vec![c; 3 * mesh.n_triangles()],
        }
    }

    pub fn from_values(mesh: &PrimalMesh, values: Vec<f64>) -> Result<Self> {
        check_len("P1DG field", values.len(), 3 * mesh.n_triangles())?;
        Ok(P1DGField { values })
    }

    /// Nodal interpolant, element by element.
    pub fn interpolate(mesh: &PrimalMesh, f: impl Fn(&Point) -> f64) -> Self {
        let values = (0..mesh.n_triangles())
            .flat_map(|k| mesh.tri_points(k).map(|p| f(&p)))
            .collect();
        P1DGField { values }
    }

    pub fn check(&self, mesh: &PrimalMesh) -> Result<()> {
        check_len("P1DG field", self.values.len(), 3 * mesh.n_triangles())
    }

    pub fn local(&self, k: usize) -> [f64; 3] {
        [self.values[3 * k], self.values[3 * k + 1], self.values[3 * k + 2]]
    }

    /// Value of the restriction to triangle `k` at barycentric coordinates `l`.
    pub fn eval_bary(&self, k: usize, l: &[f64; 3]) -> f64 {
        let z = self.local(k);
        z[0] * l[0] + z[1] * l[1] + z[2] * l[2]
    }

    /// Value of the restriction to triangle `k` at `x` (extended affinely).
    pub fn eval(&self, mesh: &PrimalMesh, k: usize, x: &Point) -> f64 {
        self.eval_bary(k, &mesh.barycentric(k, x))
    }

    pub fn gradient(&self, mesh: &PrimalMesh, k: usize) -> Point {
        let g = mesh.barycentric_gradients(k);
        let z = self.local(k);
        g[0] * z[0] + g[1] * z[1] + g[2] * z[2]
    }

    /// `(z, w)`; the edge-midpoint rule is exact for the quadratic integrand.
    pub fn l2_inner(&self, other: &P1DGField, mesh: &PrimalMesh) -> f64 {
        (0..mesh.n_triangles())
            .map(|k| {
                let a = self.local(k);
                let b = other.local(k);
                let w = mesh.area(k) / 3.0;
                (0..3)
                    .map(|i| {
                        let (j, l) = ((i + 1) % 3, (i + 2) % 3);
                        w * 0.25 * (a[j] + a[l]) * (b[j] + b[l])
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn l2_norm(&self, mesh: &PrimalMesh) -> f64 {
        self.l2_inner(self, mesh).sqrt()
    }

    /// `(z, eta_h w)`: exact integral of `z` over each barycentric cell
    /// (centroid value times area) weighted by the cell value of `eta_h w`.
    pub fn eta_inner(&self, other: &P1DGField, mesh: &PrimalMesh) -> f64 {
        (0..mesh.n_triangles())
            .map(|k| {
                let z = self.local(k);
                let w = other.local(k);
                let a = mesh.area(k) / 3.0;
                (0..3)
                    .map(|i| {
                        let (j, l) = ((i + 1) % 3, (i + 2) % 3);
                        // Cell centroid has barycentric weight 1/9 on vertex i, 4/9 on j, l.
                        let centroid = (z[i] + 4.0 * z[j] + 4.0 * z[l]) / 9.0;
                        a * centroid * 0.5 * (w[j] + w[l])
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &P1DGField, b: f64) -> P1DGField {
        P1DGField {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiamondPWConstantField {
    pub values: Vec<Point>,
}

impl DiamondPWConstantField {
    pub fn l2_norm(&self, diamonds: &DiamondDualMesh) -> f64 {
        diamonds
            .cells()
            .iter()
            .zip(&self.values)
            .map(|(c, v)| c.area * v.norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualPWConstantField {
    pub values: Vec<f64>,
}

impl DualPWConstantField {
    /// Cell areas are `|K|/3`.
    pub fn l2_norm(&self, mesh: &PrimalMesh) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(c, v)| mesh.area(c / 3) / 3.0 * v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Transfer `U_h -> U_h*`: the value on each diamond is the field at the
/// edge midpoint. Interior midpoints see two element-local tangential
/// components; they are combined with area weights (see [`midpoint_value`]).
pub fn gamma_h(mesh: &PrimalMesh, v: &RT0Field) -> Result<DiamondPWConstantField> {
    v.check(mesh)?;
    let values = mesh
        .edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| midpoint_value(mesh, e, |k| v.eval(mesh, k, &edge.midpoint)))
        .collect();
    Ok(DiamondPWConstantField { values })
}

/// Transfer `M_h -> L_h`: the value on cell `3k + i` is the average of the
/// trace of `z|_K` over local edge `i`, i.e. its midpoint value.
pub fn eta_h(mesh: &PrimalMesh, z: &P1DGField) -> Result<DualPWConstantField> {
    z.check(mesh)?;
    let values = (0..mesh.n_triangles())
        .flat_map(|k| {
            let v = z.local(k);
            (0..3).map(move |i| 0.5 * (v[(i + 1) % 3] + v[(i + 2) % 3]))
        })
        .collect();
    Ok(DualPWConstantField { values })
}

/// `b(gamma_h v, w) = sum_i v(M_i) . oint_{dT*_i} w n ds`, evaluated
/// segment by segment on the diamond boundaries. With outward normals this
/// equals `-(div v, w)`.
pub fn b_form(mesh: &PrimalMesh, diamonds: &DiamondDualMesh, gv: &DiamondPWConstantField, w: &P0Field) -> Result<f64> {
    w.check(mesh)?;
    check_len("diamond field", gv.values.len(), diamonds.len())?;
    Ok(diamonds
        .cells()
        .iter()
        .zip(&gv.values)
        .map(|(cell, v)| {
            let flux: Point = cell
                .segments
                .iter()
                .map(|s| s.normal * (s.length * w.values[s.triangle]))
                .sum();
            v.dot(&flux)
        })
        .sum())
}

/// Mesh-dependent energy norm: elementwise `H^1` seminorm plus scaled jumps
/// over interior edges.
pub fn broken_h1_norm(mesh: &PrimalMesh, z: &P1DGField) -> Result<f64> {
    z.check(mesh)?;
    let volume: f64 = (0..mesh.n_triangles())
        .map(|k| mesh.area(k) * z.gradient(mesh, k).norm_squared())
        .sum();
    let jumps: f64 = mesh
        .edges()
        .iter()
        .filter_map(|e| e.right.map(|r| (e, r)))
        .map(|(e, r)| {
            let pa = mesh.vertices()[e.vertices[0]];
            let pb = mesh.vertices()[e.vertices[1]];
            let d = |x: &Point| z.eval(mesh, e.left, x) - z.eval(mesh, r, x);
            let (da, dm, db) = (d(&pa), d(&e.midpoint), d(&pb));
            // Simpson: exact for the squared affine jump.
            let integral = e.length / 6.0 * (da * da + 4.0 * dm * dm + db * db);
            integral / e.length
        })
        .sum();
    Ok((volume + jumps).sqrt())
}

/// Scalar jump `[[q]]` across edge `e` at `x`, returned as the coefficient
/// of the edge normal: `q_left - q_right` inside, `q` on the boundary.
pub fn scalar_jump(mesh: &PrimalMesh, e: usize, z: &P1DGField, x: &Point) -> f64 {
    let edge = &mesh.edges()[e];
    match edge.right {
        Some(r) => z.eval(mesh, edge.left, x) - z.eval(mesh, r, x),
        None => z.eval(mesh, edge.left, x),
    }
}

/// Average `<q>` across edge `e` at `x`; the single trace on the boundary.
pub fn scalar_average(mesh: &PrimalMesh, e: usize, z: &P1DGField, x: &Point) -> f64 {
    let edge = &mesh.edges()[e];
    match edge.right {
        Some(r) => 0.5 * (z.eval(mesh, edge.left, x) + z.eval(mesh, r, x)),
        None => z.eval(mesh, edge.left, x),
    }
}
