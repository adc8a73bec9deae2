//! Smooth prescribed states and costates on the unit square, with the source
//! terms that make them solve the forced equations.
//!
//! With `S = cos(pi x) cos(pi y)`, `V = (sin(pi x) cos(pi y), cos(pi x) sin(pi y))`
//! and `V' = (sin(pi x) cos(pi y), -cos(pi x) sin(pi y))`:
//!
//! ```text
//! c  = 1/2 + (1/4) S (1 - t/2)        u  = (1 + t) V      p  = (1/2)(1 + t) S
//! c* = (1 - t/T) S                    u* = (1 + t) V'     p* = (1 + t) cos(pi x) cos(2 pi y)
//! ```
//!
//! All have zero normal flux or zero normal derivative on the boundary,
//! `div u* = 0`, the pressures have zero mean and `c*(T) = 0`. The sources
//! (`x` dependence of the well indicators `r_0`, `r_1` included) are
//!
//! ```text
//! g_u  = alpha(c) u + grad p
//! g_p  = div u - (r_0 - r_1) q
//! g_c  = phi c_t - D'(c) |grad c|^2 - D(c) lap c + b(c) u . grad c - f(c) r_0 q
//! g_u* = alpha(c) u* + grad p* + c* b(c) grad c
//! g_c* = -phi c*_t - D(c) lap c* - b(c) u . grad c* + r_1 q b(c) c* - w c + alpha'(c) u . u*
//! ```
//!
//! (the `D'` terms of the costate equation cancel). For the control study
//! the linear objective term `g_q = -alpha_0 q_target - int [f(c) r_0 c* - (r_0 - r_1) p*]`
//! makes `q = clamp(q_target, 0, q^)` optimal.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Point, PrimalMesh};
use crate::model::{Coefficients, WellModel};
use crate::quadrature::SegmentRule;
use crate::solver::Forcing;

/// Wells on the squares `[0, a]^2` (injection) and `[1 - a, 1]^2`
/// (production); `a` must align with the mesh.
pub fn square_wells(mesh: &PrimalMesh, a: f64, w_tilde: f64, alpha0: f64, q_hat: f64) -> Result<WellModel> {
    let nt = mesh.n_triangles();
    let inside0 = |x: &Point| x.x < a && x.y < a;
    let inside1 = |x: &Point| x.x > 1.0 - a && x.y > 1.0 - a;
    let injection_cells: Vec<usize> = (0..nt).filter(|k| inside0(&mesh.barycentre(*k))).collect();
    let production_cells: Vec<usize> = (0..nt).filter(|k| inside1(&mesh.barycentre(*k))).collect();
    let sigma0: f64 = injection_cells.iter().map(|k| mesh.area(*k)).sum();
    let sigma1: f64 = production_cells.iter().map(|k| mesh.area(*k)).sum();
    let target = a * a;
    if (sigma0 - target).abs() > 1e-12 || (sigma1 - target).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "well squares of side {a} are not resolved by the mesh"
        )));
    }
    let mut r0 = vec![0.0; nt];
    let mut r1 = vec![0.0; nt];
    injection_cells.iter().for_each(|k| r0[*k] = 1.0 / target);
    production_cells.iter().for_each(|k| r1[*k] = 1.0 / target);
    Ok(WellModel {
        injection: Point::new(0.5 * a, 0.5 * a),
        production: Point::new(1.0 - 0.5 * a, 1.0 - 0.5 * a),
        injection_cells,
        production_cells,
        sigma0: target,
        sigma1: target,
        r0,
        r1,
        w_tilde,
        alpha0,
        q_hat,
    })
}

/// Prescribed solution and the matching [`Forcing`].
#[derive(Debug, Clone)]
pub struct Manufactured {
    pub model: Arc<dyn Coefficients>,
    pub final_time: f64,
    /// Side of the square well patches.
    pub well_side: f64,
    pub alpha0: f64,
    pub q_hat: f64,
    /// Control used in the sources; `None` gives `q = 0`.
    pub control: Option<fn(f64) -> f64>,
    /// Enables `g_q`, making `clamp(control, 0, q^)` the optimal control.
    pub optimal_control: bool,
    /// Scales the costates (0 disables them).
    pub costate_scale: f64,
}

fn s(x: &Point) -> f64 {
    (PI * x.x).cos() * (PI * x.y).cos()
}

fn v(x: &Point) -> Point {
    Point::new((PI * x.x).sin() * (PI * x.y).cos(), (PI * x.x).cos() * (PI * x.y).sin())
}

impl Manufactured {
    pub fn c(&self, t: f64, x: &Point) -> f64 {
        0.5 + 0.25 * s(x) * (1.0 - 0.5 * t)
    }

    pub fn grad_c(&self, t: f64, x: &Point) -> Point {
        v(x) * (-0.25 * PI * (1.0 - 0.5 * t))
    }

    fn c_t(&self, x: &Point) -> f64 {
        -0.125 * s(x)
    }

    fn lap_c(&self, t: f64, x: &Point) -> f64 {
        -2.0 * PI * PI * 0.25 * (1.0 - 0.5 * t) * s(x)
    }

    pub fn u(&self, t: f64, x: &Point) -> Point {
        v(x) * (1.0 + t)
    }

    fn div_u(&self, t: f64, x: &Point) -> f64 {
        2.0 * PI * (1.0 + t) * s(x)
    }

    pub fn p(&self, t: f64, x: &Point) -> f64 {
        0.5 * (1.0 + t) * s(x)
    }

    fn grad_p(&self, t: f64, x: &Point) -> Point {
        v(x) * (-0.5 * PI * (1.0 + t))
    }

    pub fn c_star(&self, t: f64, x: &Point) -> f64 {
        self.costate_scale * (1.0 - t / self.final_time) * s(x)
    }

    pub fn grad_c_star(&self, t: f64, x: &Point) -> Point {
        v(x) * (-PI * self.costate_scale * (1.0 - t / self.final_time))
    }

    fn c_star_t(&self, x: &Point) -> f64 {
        -self.costate_scale / self.final_time * s(x)
    }

    fn lap_c_star(&self, t: f64, x: &Point) -> f64 {
        -2.0 * PI * PI * self.c_star(t, x)
    }

    pub fn u_star(&self, t: f64, x: &Point) -> Point {
        Point::new(
            (PI * x.x).sin() * (PI * x.y).cos(),
            -(PI * x.x).cos() * (PI * x.y).sin(),
        ) * (self.costate_scale * (1.0 + t))
    }

    pub fn p_star(&self, t: f64, x: &Point) -> f64 {
        self.costate_scale * (1.0 + t) * (PI * x.x).cos() * (2.0 * PI * x.y).cos()
    }

    fn grad_p_star(&self, t: f64, x: &Point) -> Point {
        Point::new(
            -PI * (PI * x.x).sin() * (2.0 * PI * x.y).cos(),
            -2.0 * PI * (PI * x.x).cos() * (2.0 * PI * x.y).sin(),
        ) * (self.costate_scale * (1.0 + t))
    }

    /// Control entering the sources, `clamp`ed to the admissible box.
    pub fn q(&self, t: f64) -> f64 {
        self.control.map_or(0.0, |f| f(t).clamp(0.0, self.q_hat))
    }

    fn r0(&self, x: &Point) -> f64 {
        let a = self.well_side;
        if x.x < a && x.y < a {
            1.0 / (a * a)
        } else {
            0.0
        }
    }

    fn r1(&self, x: &Point) -> f64 {
        let a = self.well_side;
        if x.x > 1.0 - a && x.y > 1.0 - a {
            1.0 / (a * a)
        } else {
            0.0
        }
    }

    /// `int_Omega [f(c) r_0 c* - (r_0 - r_1) p*] dx` by composite Gauss
    /// quadrature over the two well squares.
    pub fn costate_integral(&self, t: f64) -> f64 {
        let rule = SegmentRule::gauss(5).expect("tabulated");
        let a = self.well_side;
        let cells = 8;
        let patch = |x0: f64, y0: f64, g: &dyn Fn(&Point) -> f64| -> f64 {
            let hc = a / cells as f64;
            let mut sum = 0.0;
            for i in 0..cells {
                for j in 0..cells {
                    for (sx, wx) in rule.points.iter().zip(&rule.weights) {
                        for (sy, wy) in rule.points.iter().zip(&rule.weights) {
                            let x = Point::new(x0 + (i as f64 + sx) * hc, y0 + (j as f64 + sy) * hc);
                            sum += wx * wy * hc * hc * g(&x);
                        }
                    }
                }
            }
            sum
        };
        let r = 1.0 / (a * a);
        let inj = patch(0.0, 0.0, &|x| {
            r * (self.model.f(self.c(t, x)) * self.c_star(t, x) - self.p_star(t, x))
        });
        let prod = patch(1.0 - a, 1.0 - a, &|x| r * self.p_star(t, x));
        inj + prod
    }

    /// Unclamped target whose projection is the optimal control.
    fn target(&self, t: f64) -> f64 {
        self.control.map_or(0.0, |f| f(t))
    }
}

impl Forcing for Manufactured {
    fn velocity(&self, t: f64, x: &Point) -> Point {
        self.u(t, x) * self.model.alpha(self.c(t, x)) + self.grad_p(t, x)
    }

    fn mass(&self, t: f64, x: &Point) -> f64 {
        self.div_u(t, x) - (self.r0(x) - self.r1(x)) * self.q(t)
    }

    fn saturation(&self, t: f64, x: &Point) -> f64 {
        let m = self.model.as_ref();
        let c = self.c(t, x);
        let gc = self.grad_c(t, x);
        m.porosity() * self.c_t(x) - m.diffusion_prime(c) * gc.norm_squared() - m.diffusion(c) * self.lap_c(t, x)
            + m.b(c) * self.u(t, x).dot(&gc)
            - m.f(c) * self.r0(x) * self.q(t)
    }

    fn costate_velocity(&self, t: f64, x: &Point) -> Point {
        let m = self.model.as_ref();
        let c = self.c(t, x);
        self.u_star(t, x) * m.alpha(c) + self.grad_p_star(t, x) + self.grad_c(t, x) * (self.c_star(t, x) * m.b(c))
    }

    fn costate_saturation(&self, t: f64, x: &Point) -> f64 {
        let m = self.model.as_ref();
        let c = self.c(t, x);
        let cs = self.c_star(t, x);
        -m.porosity() * self.c_star_t(x)
            - m.diffusion(c) * self.lap_c_star(t, x)
            - m.b(c) * self.u(t, x).dot(&self.grad_c_star(t, x))
            + self.r1(x) * self.q(t) * m.b(c) * cs
            + m.alpha_prime(c) * self.u(t, x).dot(&self.u_star(t, x))
    }

    fn control(&self, t: f64) -> f64 {
        if self.optimal_control {
            -self.alpha0 * self.target(t) - self.costate_integral(t)
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured_unit_square;
    use crate::model::TwoPhaseModel;

    fn sample() -> Manufactured {
        Manufactured {
            model: Arc::new(TwoPhaseModel::default()),
            final_time: 1.0,
            well_side: 0.25,
            alpha0: 1.0,
            q_hat: 1.0,
            control: Some(|t| 0.5 + t),
            optimal_control: false,
            costate_scale: 1.0,
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let m = sample();
        let x = Point::new(0.31, 0.67);
        let h = 1e-6;
        let dx = Point::new(h, 0.0);
        let dy = Point::new(0.0, h);
        let fd = |f: &dyn Fn(&Point) -> f64| {
            Point::new(
                (f(&(x + dx)) - f(&(x - dx))) / (2.0 * h),
                (f(&(x + dy)) - f(&(x - dy))) / (2.0 * h),
            )
        };
        assert!((fd(&|y| m.c(0.3, y)) - m.grad_c(0.3, &x)).norm() < 1e-8);
        assert!((fd(&|y| m.p(0.3, y)) - m.grad_p(0.3, &x)).norm() < 1e-8);
        assert!((fd(&|y| m.c_star(0.3, y)) - m.grad_c_star(0.3, &x)).norm() < 1e-8);
        assert!((fd(&|y| m.p_star(0.3, y)) - m.grad_p_star(0.3, &x)).norm() < 1e-8);
        let div_u =
            (m.u(0.3, &(x + dx)).x - m.u(0.3, &(x - dx)).x + m.u(0.3, &(x + dy)).y - m.u(0.3, &(x - dy)).y) / (2.0 * h);
        assert!((div_u - m.div_u(0.3, &x)).abs() < 1e-7);
        let div_us = (m.u_star(0.3, &(x + dx)).x - m.u_star(0.3, &(x - dx)).x + m.u_star(0.3, &(x + dy)).y
            - m.u_star(0.3, &(x - dy)).y)
            / (2.0 * h);
        assert!(div_us.abs() < 1e-7);
        let lap = (m.c(0.3, &(x + dx)) + m.c(0.3, &(x - dx)) + m.c(0.3, &(x + dy)) + m.c(0.3, &(x - dy))
            - 4.0 * m.c(0.3, &x))
            / (h * h);
        assert!((lap - m.lap_c(0.3, &x)).abs() < 1e-3);
    }

    #[test]
    fn square_wells_need_alignment() {
        let mesh = structured_unit_square(8).unwrap();
        let w = square_wells(&mesh, 0.25, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(w.injection_cells.len(), 8);
        assert!(square_wells(&structured_unit_square(3).unwrap(), 0.25, 0.0, 1.0, 1.0).is_err());
    }
}
