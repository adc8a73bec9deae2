use super::{check_finite, collect_parallel, collect_vector, eta_weight, Discretization};
use crate::error::{Error, Result};
use crate::fespaces::{P1DGField, RT0Field};
use crate::mesh::Point;
use crate::model::{Coefficients, WellModel};
use crate::sparse::CsrMatrix;

/// The four parts of the DFVE diffusion matrix `H = T1 + T2 + T3 + T4`.
#[derive(Debug, Clone)]
pub struct HTerms {
    /// Fluxes across the fan segments inside each triangle.
    pub t1: CsrMatrix,
    /// `-int_e [[eta z]] . <D grad phi>`.
    pub t2: CsrMatrix,
    /// `-int_e [[eta phi]] . <D grad z>`.
    pub t3: CsrMatrix,
    /// `(xi / h_e) int_e [[phi]] [[z]]`.
    pub t4: CsrMatrix,
}

impl HTerms {
    pub fn sum(&self) -> CsrMatrix {
        self.t1
            .add(1.0, &self.t2, 1.0)
            .add(1.0, &self.t3, 1.0)
            .add(1.0, &self.t4, 1.0)
    }
}

/// Matrices and load of the state saturation step.
#[derive(Debug, Clone)]
pub struct StateSaturationTerms {
    /// `E_ab = int b(C) U . grad Psi_b eta_h Psi_a`.
    pub e: CsrMatrix,
    pub h: CsrMatrix,
    /// `G_a = int f(C) r_0 q eta_h Psi_a`.
    pub g: Vec<f64>,
}

/// Extra matrices and loads of the costate saturation step.
#[derive(Debug, Clone)]
pub struct CostateSaturationTerms {
    /// `R_ab = int r_1 q b(C) Psi_b eta_h Psi_a`.
    pub r: CsrMatrix,
    /// `S_ab = int D'(C) grad C . grad Psi_b eta_h Psi_a`.
    pub s: CsrMatrix,
    /// `W_a = int w C eta_h Psi_a`.
    pub w: Vec<f64>,
    /// `Z_a = int alpha'(C) U . U* eta_h Psi_a`.
    pub z: Vec<f64>,
}

/// Element-local `3 x 3` integrals `sum_l eta_{a,l} int_{K*_l} kernel(lam, b)`.
fn local_cell_matrix(disc: &Discretization, k: usize, kernel: impl Fn(&[f64; 3], usize) -> f64) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for l in 0..3 {
        for (lam, w) in disc.cell_quadrature(k, l) {
            for b in 0..3 {
                let v = w * kernel(&lam, b);
                for (a, row) in m.iter_mut().enumerate() {
                    row[b] += eta_weight(a, l) * v;
                }
            }
        }
    }
    m
}

fn local_triplets(k: usize, m: &[[f64; 3]; 3]) -> Result<Vec<(usize, usize, f64)>> {
    check_finite(k, "saturation coefficient", m.iter().flatten().copied())?;
    Ok((0..3)
        .flat_map(|a| (0..3).map(move |b| (3 * k + a, 3 * k + b, m[a][b])))
        .collect())
}

fn element_matrix<'a, F>(disc: &Discretization, kernel_for: F) -> Result<CsrMatrix>
where
    F: Fn(usize) -> Box<dyn Fn(&[f64; 3], usize) -> f64 + 'a> + Sync,
{
    let n = disc.n_saturation();
    collect_parallel(disc.mesh.n_triangles(), n, n, |k| {
        let kernel = kernel_for(k);
        local_triplets(k, &local_cell_matrix(disc, k, kernel))
    })
}

/// `(Psi_b, eta_h Psi_a)`: block diagonal, `|K|/54 [[8,5,5],[5,8,5],[5,5,8]]`.
pub fn mass_matrix(disc: &Discretization) -> CsrMatrix {
    element_matrix(disc, |_| Box::new(|lam: &[f64; 3], b: usize| lam[b])).expect("finite geometry")
}

/// `int g eta_h Psi_a` for each saturation dof; `g` receives the triangle,
/// barycentric coordinates and physical point.
pub fn saturation_load<G>(disc: &Discretization, g: G) -> Result<Vec<f64>>
where
    G: Fn(usize, &[f64; 3], &Point) -> f64 + Sync,
{
    collect_vector(disc.mesh.n_triangles(), disc.n_saturation(), |k| {
        let geo = &disc.elements[k];
        let mut v = [0.0; 3];
        for l in 0..3 {
            for (lam, w) in disc.cell_quadrature(k, l) {
                let x = w * g(k, &lam, &geo.point(&lam));
                for (a, va) in v.iter_mut().enumerate() {
                    *va += eta_weight(a, l) * x;
                }
            }
        }
        check_finite(k, "saturation load", v)?;
        Ok((0..3).map(|a| (3 * k + a, v[a])).collect())
    })
}

fn rt0_local(disc: &Discretization, u: &RT0Field, k: usize, x: &Point) -> Point {
    let geo = &disc.elements[k];
    (0..3).map(|i| geo.rt0(i, x) * u.values[geo.edges[i]]).sum()
}

pub fn assemble_h_terms(disc: &Discretization, model: &dyn Coefficients, c: &P1DGField, xi: f64) -> Result<HTerms> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::Config(format!("xi must be positive, got {xi}")));
    }
    c.check(&disc.mesh)?;
    let n = disc.n_saturation();
    let seg = &disc.quadrature.segment;

    let t1 = collect_parallel(disc.mesh.n_triangles(), n, n, |k| {
        let geo = &disc.elements[k];
        let mut m = [[0.0; 3]; 3];
        for l in 0..3 {
            let cell = disc.barycentric.cell(3 * k + l);
            for (si, s) in cell.interior.iter().enumerate() {
                let vertex = (l + 1 + si) % 3;
                let mut dint = 0.0;
                for (t, w) in seg.scaled(s.length) {
                    let mut lam = [(1.0 - t) / 3.0; 3];
                    lam[vertex] += t;
                    dint += w * model.diffusion(c.eval_bary(k, &lam));
                }
                for b in 0..3 {
                    let flux = dint * geo.grads[b].dot(&s.normal);
                    for (a, row) in m.iter_mut().enumerate() {
                        row[b] -= eta_weight(a, l) * flux;
                    }
                }
            }
        }
        local_triplets(k, &m)
    })?;

    let edge_terms = |which: usize| {
        collect_parallel(disc.mesh.n_edges(), n, n, |e| {
            let nb = &disc.edge_neighbours[e];
            if nb.len() < 2 {
                return Ok(Vec::new());
            }
            let edge = &disc.mesh.edges()[e];
            let sides = [nb[0], nb[1]];
            let sign = [1.0, -1.0];
            // Per side: nodal traces at quadrature points and D grad Psi . n.
            let mut lam_q: [Vec<[f64; 3]>; 2] = [Vec::new(), Vec::new()];
            let mut d_q: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
            let mut weights = Vec::new();
            for (t, w) in seg.scaled(edge.length) {
                weights.push(w);
                for x in 0..2 {
                    let lam = disc.edge_point_bary(sides[x].0, e, t);
                    d_q[x].push(model.diffusion(c.eval_bary(sides[x].0, &lam)));
                    lam_q[x].push(lam);
                }
            }
            let gn = |x: usize, b: usize| disc.elements[sides[x].0].grads[b].dot(&edge.normal);
            let eta = |x: usize, a: usize| eta_weight(a, sides[x].1);
            let mut out = Vec::with_capacity(36);
            for x in 0..2 {
                for a in 0..3 {
                    let row = 3 * sides[x].0 + a;
                    for y in 0..2 {
                        for b in 0..3 {
                            let col = 3 * sides[y].0 + b;
                            let v = match which {
                                2 => {
                                    let dint: f64 = weights.iter().zip(&d_q[y]).map(|(w, d)| w * d).sum();
                                    -sign[x] * eta(x, a) * 0.5 * dint * gn(y, b)
                                }
                                3 => {
                                    let dint: f64 = weights.iter().zip(&d_q[x]).map(|(w, d)| w * d).sum();
                                    -sign[y] * eta(y, b) * 0.5 * dint * gn(x, a)
                                }
                                _ => {
                                    let jj: f64 = (0..weights.len())
                                        .map(|q| weights[q] * lam_q[x][q][a] * lam_q[y][q][b])
                                        .sum();
                                    xi / edge.length * sign[x] * sign[y] * jj
                                }
                            };
                            out.push((row, col, v));
                        }
                    }
                }
            }
            check_finite(sides[0].0, "edge diffusion", out.iter().map(|t| t.2))?;
            Ok(out)
        })
    };
    Ok(HTerms {
        t1,
        t2: edge_terms(2)?,
        t3: edge_terms(3)?,
        t4: edge_terms(4)?,
    })
}

pub fn assemble_saturation_state(
    disc: &Discretization,
    model: &dyn Coefficients,
    wells: &WellModel,
    c: &P1DGField,
    u: &RT0Field,
    q: f64,
    xi: f64,
) -> Result<StateSaturationTerms> {
    u.check(&disc.mesh)?;
    let h = assemble_h_terms(disc, model, c, xi)?.sum();
    let e = element_matrix(disc, |k| {
        let geo = &disc.elements[k];
        Box::new(move |lam: &[f64; 3], b: usize| {
            let x = geo.point(lam);
            model.b(c.eval_bary(k, lam)) * rt0_local(disc, u, k, &x).dot(&geo.grads[b])
        })
    })?;
    let g = saturation_load(disc, |k, lam, _| model.f(c.eval_bary(k, lam)) * wells.r0[k] * q)?;
    Ok(StateSaturationTerms { e, h, g })
}

#[allow(clippy::too_many_arguments)]
pub fn assemble_saturation_costate(
    disc: &Discretization,
    model: &dyn Coefficients,
    wells: &WellModel,
    c: &P1DGField,
    u: &RT0Field,
    u_star: &RT0Field,
    q: f64,
    weight: f64,
) -> Result<CostateSaturationTerms> {
    c.check(&disc.mesh)?;
    u.check(&disc.mesh)?;
    u_star.check(&disc.mesh)?;
    let r = element_matrix(disc, |k| {
        let r1 = wells.r1[k] * q;
        Box::new(move |lam: &[f64; 3], b: usize| {
            if r1 == 0.0 {
                0.0
            } else {
                r1 * model.b(c.eval_bary(k, lam)) * lam[b]
            }
        })
    })?;
    let s = element_matrix(disc, |k| {
        let geo = &disc.elements[k];
        let gc = c.gradient(&disc.mesh, k);
        Box::new(move |lam: &[f64; 3], b: usize| model.diffusion_prime(c.eval_bary(k, lam)) * gc.dot(&geo.grads[b]))
    })?;
    let w = saturation_load(disc, |k, lam, _| weight * c.eval_bary(k, lam))?;
    let z = saturation_load(disc, |k, lam, x| {
        model.alpha_prime(c.eval_bary(k, lam)) * rt0_local(disc, u, k, x).dot(&rt0_local(disc, u_star, k, x))
    })?;
    Ok(CostateSaturationTerms { r, s, w, z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured_unit_square;
    use crate::model::{build_wells, TwoPhaseModel};
    use crate::quadrature::QuadratureRule;

    fn disc(n: usize) -> Discretization {
        Discretization::new(structured_unit_square(n).unwrap(), QuadratureRule::default())
    }

    #[test]
    fn mass_matrix_local_block() {
        let d = disc(2);
        let m = mass_matrix(&d);
        let a = d.elements[0].area;
        for i in 0..3 {
            for j in 0..3 {
                let expected = a / 54.0 * if i == j { 8.0 } else { 5.0 };
                assert!((m.get(i, j) - expected).abs() < 1e-15);
            }
        }
        assert!(m.asymmetry() < 1e-16);
    }

    #[test]
    fn mass_matrix_is_the_eta_inner_product() {
        let d = disc(3);
        let m = mass_matrix(&d);
        let z = P1DGField::interpolate(&d.mesh, |x| x.x * x.y + 1.0);
        let w = P1DGField::interpolate(&d.mesh, |x| x.x - 2.0 * x.y);
        assert!((m.bilinear(&w.values, &z.values) - z.eta_inner(&w, &d.mesh)).abs() < 1e-14);
    }

    #[test]
    fn h_annihilates_constants() {
        let d = disc(4);
        let model = TwoPhaseModel::default();
        let c = P1DGField::interpolate(&d.mesh, |x| 0.3 + 0.4 * x.x * x.y);
        let h = assemble_h_terms(&d, &model, &c, 2.0).unwrap().sum();
        let ones = vec![1.0; d.n_saturation()];
        assert!(h.mul_vec(&ones).iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn penalty_is_symmetric_psd() {
        let d = disc(3);
        let terms = assemble_h_terms(&d, &TwoPhaseModel::default(), &P1DGField::constant(&d.mesh, 0.5), 1.0).unwrap();
        assert!(terms.t4.asymmetry() < 1e-15);
        let z = P1DGField::interpolate(&d.mesh, |x| (7.0 * x.x).sin());
        assert!(terms.t4.bilinear(&z.values, &z.values) >= -1e-15);
        // Continuous fields have no jumps.
        let z = P1DGField::interpolate(&d.mesh, |x| x.x + x.y);
        assert!(terms.t4.bilinear(&z.values, &z.values).abs() < 1e-13);
    }

    #[test]
    fn nonpositive_penalty_is_rejected() {
        let d = disc(2);
        let r = assemble_h_terms(&d, &TwoPhaseModel::default(), &P1DGField::zeros(&d.mesh), 0.0);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn costate_loads_vanish_for_trivial_inputs() {
        let d = disc(4);
        let model = TwoPhaseModel::default();
        let wells = build_wells(&d.mesh, Point::new(0.1, 0.1), Point::new(0.9, 0.9), 0.02).unwrap();
        let c = P1DGField::constant(&d.mesh, 0.6);
        let u = RT0Field::interpolate(&d.mesh, |x| Point::new(x.y, -x.x));
        let zero = RT0Field::zeros(&d.mesh);
        let t = assemble_saturation_costate(&d, &model, &wells, &c, &u, &zero, 0.5, 0.0).unwrap();
        assert!(t.w.iter().all(|v| *v == 0.0));
        assert!(t.z.iter().all(|v| *v == 0.0));
        assert!(t.s.values.iter().all(|v| *v == 0.0));
        // R lives on the production patch only.
        for (r, _, v) in t.r.triplets() {
            if v != 0.0 {
                assert!(wells.r1[r / 3] > 0.0);
            }
        }
    }

    #[test]
    fn nan_saturation_names_element() {
        let d = disc(2);
        let mut c = P1DGField::constant(&d.mesh, 0.5);
        c.values[7] = f64::NAN;
        let wells = build_wells(&d.mesh, Point::new(0.1, 0.1), Point::new(0.9, 0.9), 0.1).unwrap();
        let r = assemble_saturation_state(
            &d,
            &TwoPhaseModel::default(),
            &wells,
            &c,
            &RT0Field::zeros(&d.mesh),
            1.0,
            1.0,
        );
        match r {
            Err(Error::Assembly { element, .. }) => assert_eq!(element, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
