//! Coefficient functions, well regularisation and run configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Point, PrimalMesh};

/// Saturation-dependent coefficients and the (uniform) rock properties.
pub trait Coefficients: Send + Sync + std::fmt::Debug {
    /// Inverse mobility `alpha(c) = 1 / (kappa lambda(c))`.
    fn alpha(&self, c: f64) -> f64;
    fn alpha_prime(&self, c: f64) -> f64;
    /// Convection factor.
    fn b(&self, c: f64) -> f64;
    fn b_prime(&self, c: f64) -> f64;
    /// Capillary diffusion.
    fn diffusion(&self, c: f64) -> f64;
    fn diffusion_prime(&self, c: f64) -> f64;
    /// Source factor at the injection well.
    fn f(&self, c: f64) -> f64;
    fn f_prime(&self, c: f64) -> f64;
    fn porosity(&self) -> f64;
    fn permeability(&self) -> f64;
}

/// Quadratic relative permeabilities with a mobility floor and a constant
/// capillary-pressure slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoPhaseModel {
    pub mobility_floor: f64,
    pub capillary_slope: f64,
    pub porosity: f64,
    pub permeability: f64,
}

impl Default for TwoPhaseModel {
    fn default() -> Self {
        TwoPhaseModel {
            mobility_floor: 0.05,
            capillary_slope: 1.0,
            porosity: 1.0,
            permeability: 1.0,
        }
    }
}

impl TwoPhaseModel {
    pub fn lambda_o(&self, c: f64) -> f64 {
        self.mobility_floor + c * c
    }

    pub fn lambda_w(&self, c: f64) -> f64 {
        self.mobility_floor + (1.0 - c) * (1.0 - c)
    }

    pub fn lambda(&self, c: f64) -> f64 {
        self.lambda_o(c) + self.lambda_w(c)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("mobility_floor", self.mobility_floor),
            ("capillary_slope", self.capillary_slope),
            ("porosity", self.porosity),
            ("permeability", self.permeability),
        ];
        for (key, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "model.{key} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Coefficients for TwoPhaseModel {
    fn alpha(&self, c: f64) -> f64 {
        1.0 / (self.permeability * self.lambda(c))
    }

    fn alpha_prime(&self, c: f64) -> f64 {
        let kl = self.permeability * self.lambda(c);
        -self.permeability * (4.0 * c - 2.0) / (kl * kl)
    }

    fn b(&self, c: f64) -> f64 {
        2.0 * c
    }

    fn b_prime(&self, _c: f64) -> f64 {
        2.0
    }

    fn diffusion(&self, c: f64) -> f64 {
        self.permeability * self.lambda(c) * self.lambda_o(c) * self.lambda_w(c) * self.capillary_slope
    }

    fn diffusion_prime(&self, c: f64) -> f64 {
        let (l, lo, lw) = (self.lambda(c), self.lambda_o(c), self.lambda_w(c));
        let (dl, dlo, dlw) = (4.0 * c - 2.0, 2.0 * c, 2.0 * c - 2.0);
        self.permeability * self.capillary_slope * (dl * lo * lw + l * dlo * lw + l * lo * dlw)
    }

    fn f(&self, c: f64) -> f64 {
        -self.lambda_o(c)
    }

    fn f_prime(&self, c: f64) -> f64 {
        -2.0 * c
    }

    fn porosity(&self) -> f64 {
        self.porosity
    }

    fn permeability(&self) -> f64 {
        self.permeability
    }
}

/// Saturation-independent coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantModel {
    pub alpha: f64,
    pub b: f64,
    pub diffusion: f64,
    pub f: f64,
    pub porosity: f64,
}

impl Default for ConstantModel {
    fn default() -> Self {
        ConstantModel {
            alpha: 1.0,
            b: 1.0,
            diffusion: 1.0,
            f: -1.0,
            porosity: 1.0,
        }
    }
}

impl Coefficients for ConstantModel {
    fn alpha(&self, _: f64) -> f64 {
        self.alpha
    }
    fn alpha_prime(&self, _: f64) -> f64 {
        0.0
    }
    fn b(&self, _: f64) -> f64 {
        self.b
    }
    fn b_prime(&self, _: f64) -> f64 {
        0.0
    }
    fn diffusion(&self, _: f64) -> f64 {
        self.diffusion
    }
    fn diffusion_prime(&self, _: f64) -> f64 {
        0.0
    }
    fn f(&self, _: f64) -> f64 {
        self.f
    }
    fn f_prime(&self, _: f64) -> f64 {
        0.0
    }
    fn porosity(&self) -> f64 {
        self.porosity
    }
    fn permeability(&self) -> f64 {
        1.0 / self.alpha
    }
}

/// Bounds of a coefficient model sampled on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelBounds {
    /// `min / max` of `1 / alpha`.
    pub a_lower: f64,
    pub a_upper: f64,
    pub d_lower: f64,
    pub d_upper: f64,
    /// Largest sampled `|alpha'|`, `|D'|`, `|b'|` and `|f'|`.
    pub lipschitz_alpha: f64,
    pub lipschitz_diffusion: f64,
    pub lipschitz_b: f64,
    pub lipschitz_f: f64,
}

pub const BOUND_SAMPLES: usize = 1001;

pub fn model_bounds(model: &dyn Coefficients) -> ModelBounds {
    let mut b = ModelBounds {
        a_lower: f64::INFINITY,
        a_upper: f64::NEG_INFINITY,
        d_lower: f64::INFINITY,
        d_upper: f64::NEG_INFINITY,
        lipschitz_alpha: 0.0,
        lipschitz_diffusion: 0.0,
        lipschitz_b: 0.0,
        lipschitz_f: 0.0,
    };
    for i in 0..BOUND_SAMPLES {
        let c = i as f64 / (BOUND_SAMPLES - 1) as f64;
        let a = 1.0 / model.alpha(c);
        let d = model.diffusion(c);
        b.a_lower = b.a_lower.min(a);
        b.a_upper = b.a_upper.max(a);
        b.d_lower = b.d_lower.min(d);
        b.d_upper = b.d_upper.max(d);
        b.lipschitz_alpha = b.lipschitz_alpha.max(model.alpha_prime(c).abs());
        b.lipschitz_diffusion = b.lipschitz_diffusion.max(model.diffusion_prime(c).abs());
        b.lipschitz_b = b.lipschitz_b.max(model.b_prime(c).abs());
        b.lipschitz_f = b.lipschitz_f.max(model.f_prime(c).abs());
    }
    b
}

/// Injection/production patches and the economic data of the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct WellModel {
    pub injection: Point,
    pub production: Point,
    pub injection_cells: Vec<usize>,
    pub production_cells: Vec<usize>,
    /// Achieved patch areas.
    pub sigma0: f64,
    pub sigma1: f64,
    /// `r_0`, `r_1` per triangle (`1/sigma` on the patch, 0 elsewhere).
    pub r0: Vec<f64>,
    pub r1: Vec<f64>,
    /// Terminal price `w~`.
    pub w_tilde: f64,
    /// Control cost `alpha_0`.
    pub alpha0: f64,
    /// Upper control bound `q^`.
    pub q_hat: f64,
}

/// Well placement and prices as read from a run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WellParams {
    pub injection: [f64; 2],
    pub production: [f64; 2],
    pub sigma: f64,
    pub w_tilde: f64,
    pub alpha0: f64,
    pub q_hat: f64,
}

impl Default for WellParams {
    fn default() -> Self {
        WellParams {
            injection: [0.1, 0.1],
            production: [0.9, 0.9],
            sigma: 0.01,
            w_tilde: 1.0,
            alpha0: 1.0,
            q_hat: 1.0,
        }
    }
}

impl WellParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wells.sigma", self.sigma),
            ("wells.alpha0", self.alpha0),
            ("wells.q_hat", self.q_hat),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{key} must be positive and finite, got {v}")));
            }
        }
        if !(self.w_tilde.is_finite() && self.w_tilde >= 0.0) {
            return Err(Error::Config(format!(
                "wells.w_tilde must be non-negative, got {}",
                self.w_tilde
            )));
        }
        Ok(())
    }

    pub fn build(&self, mesh: &PrimalMesh) -> Result<WellModel> {
        self.validate()?;
        let mut wells = build_wells(
            mesh,
            Point::new(self.injection[0], self.injection[1]),
            Point::new(self.production[0], self.production[1]),
            self.sigma,
        )?;
        wells.w_tilde = self.w_tilde;
        wells.alpha0 = self.alpha0;
        wells.q_hat = self.q_hat;
        Ok(wells)
    }
}

/// Triangles whose barycentres are closest to `x`, taken until their area
/// reaches `target`.
fn grow_patch(mesh: &PrimalMesh, x: &Point, target: f64) -> (Vec<usize>, f64) {
    let mut order: Vec<(f64, usize)> = (0..mesh.n_triangles())
        .map(|k| ((mesh.barycentre(k) - x).norm(), k))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut cells = Vec::new();
    let mut area = 0.0;
    for (_, k) in order {
        cells.push(k);
        area += mesh.area(k);
        if area >= target {
            break;
        }
    }
    cells.sort_unstable();
    (cells, area)
}

/// Regularised point wells with unit total strength. Prices default to
/// `w~ = 1`, `alpha_0 = 1`, `q^ = 1`.
pub fn build_wells(mesh: &PrimalMesh, x0: Point, x1: Point, target_sigma: f64) -> Result<WellModel> {
    if !(target_sigma > 0.0 && target_sigma.is_finite()) {
        return Err(Error::Config(format!(
            "well patch area must be positive, got {target_sigma}"
        )));
    }
    if (x0 - x1).norm() == 0.0 {
        return Err(Error::Config("injection and production wells coincide".into()));
    }
    for (name, x) in [("injection", x0), ("production", x1)] {
        if mesh.locate(&x).is_none() {
            return Err(Error::Domain(format!(
                "{name} well ({}, {}) lies outside the mesh",
                x.x, x.y
            )));
        }
    }
    let (c0, s0) = grow_patch(mesh, &x0, target_sigma);
    let (c1, s1) = grow_patch(mesh, &x1, target_sigma);
    if let Some(k) = c0.iter().find(|k| c1.binary_search(k).is_ok()) {
        return Err(Error::Config(format!(
            "well patches overlap in triangle {k}; reduce sigma"
        )));
    }
    let indicator = |cells: &[usize], s: f64| {
        let mut r = vec![0.0; mesh.n_triangles()];
        cells.iter().for_each(|&k| r[k] = 1.0 / s);
        r
    };
    Ok(WellModel {
        injection: x0,
        production: x1,
        r0: indicator(&c0, s0),
        r1: indicator(&c1, s1),
        injection_cells: c0,
        production_cells: c1,
        sigma0: s0,
        sigma1: s1,
        w_tilde: 1.0,
        alpha0: 1.0,
        q_hat: 1.0,
    })
}

impl WellModel {
    /// `r_0 - r_1` on triangle `k`.
    pub fn net_source(&self, k: usize) -> f64 {
        self.r0[k] - self.r1[k]
    }
}

/// Time grids, penalty, quadrature and iteration controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub final_time: f64,
    /// Pressure (coarse) steps `M`.
    pub pressure_steps: usize,
    /// Saturation (fine) steps `N`, a multiple of `M`.
    pub saturation_steps: usize,
    /// Interior penalty; `10 d*` when unset.
    pub xi: Option<f64>,
    /// Length of the terminal weight window; `2 dt` when unset.
    pub terminal_window: Option<f64>,
    pub initial_saturation: f64,
    /// Initial control value; `q^ / 2` when unset.
    pub initial_control: Option<f64>,
    pub triangle_quadrature: usize,
    pub segment_quadrature: usize,
    /// Relative residual accepted from each linear solve.
    pub solver_tolerance: f64,
    pub max_iterations: usize,
    /// Active-set loop stops once the sets repeat and `|q_k+1 - q_k|` is below this.
    pub control_tolerance: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            final_time: 1.0,
            pressure_steps: 10,
            saturation_steps: 20,
            xi: None,
            terminal_window: None,
            initial_saturation: 0.8,
            initial_control: None,
            triangle_quadrature: 4,
            segment_quadrature: 2,
            solver_tolerance: 1e-10,
            max_iterations: 50,
            control_tolerance: 1e-9,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::Config(format!("{key}: {msg}")));
        if !(self.final_time.is_finite() && self.final_time > 0.0) {
            return bad("run.final_time", format!("must be positive, got {}", self.final_time));
        }
        if self.pressure_steps == 0 {
            return bad("run.pressure_steps", "must be at least 1".into());
        }
        if self.saturation_steps == 0 || !self.saturation_steps.is_multiple_of(self.pressure_steps) {
            return bad(
                "run.saturation_steps",
                format!(
                    "must be a positive multiple of pressure_steps ({})",
                    self.pressure_steps
                ),
            );
        }
        if let Some(xi) = self.xi {
            if !(xi.is_finite() && xi > 0.0) {
                return bad("run.xi", format!("must be positive, got {xi}"));
            }
        }
        if let Some(eps) = self.terminal_window {
            if !(eps > 0.0 && eps <= self.final_time) {
                return bad("run.terminal_window", format!("must lie in (0, final_time], got {eps}"));
            }
        }
        if !self.initial_saturation.is_finite() {
            return bad("run.initial_saturation", "must be finite".into());
        }
        if let Some(q) = self.initial_control {
            if !q.is_finite() {
                return bad("run.initial_control", "must be finite".into());
            }
        }
        if !(1..=5).contains(&self.triangle_quadrature) {
            return bad(
                "run.triangle_quadrature",
                format!("must be in 1..=5, got {}", self.triangle_quadrature),
            );
        }
        if !(1..=5).contains(&self.segment_quadrature) {
            return bad(
                "run.segment_quadrature",
                format!("must be in 1..=5, got {}", self.segment_quadrature),
            );
        }
        if !(self.solver_tolerance > 0.0 && self.solver_tolerance < 1.0) {
            return bad(
                "run.solver_tolerance",
                format!("must lie in (0, 1), got {}", self.solver_tolerance),
            );
        }
        if self.max_iterations == 0 {
            return bad("run.max_iterations", "must be at least 1".into());
        }
        if !(self.control_tolerance >= 0.0 && self.control_tolerance.is_finite()) {
            return bad("run.control_tolerance", "must be non-negative".into());
        }
        Ok(())
    }

    /// Saturation step `dt = T / N`.
    pub fn dt(&self) -> f64 {
        self.final_time / self.saturation_steps as f64
    }

    /// Pressure step `T / M`.
    pub fn dt_pressure(&self) -> f64 {
        self.final_time / self.pressure_steps as f64
    }

    /// Saturation steps per pressure step.
    pub fn ratio(&self) -> usize {
        self.saturation_steps / self.pressure_steps
    }

    /// Fine time node `t^n`.
    pub fn time(&self, n: usize) -> f64 {
        self.final_time * n as f64 / self.saturation_steps as f64
    }

    /// Coarse time node `t_m`.
    pub fn pressure_time(&self, m: usize) -> f64 {
        self.final_time * m as f64 / self.pressure_steps as f64
    }

    pub fn epsilon(&self) -> f64 {
        self.terminal_window.unwrap_or(2.0 * self.dt()).min(self.final_time)
    }

    pub fn penalty(&self, bounds: &ModelBounds) -> f64 {
        self.xi.unwrap_or(10.0 * bounds.d_upper)
    }

    /// Cell averages `w_n = (1/dt) int_{t^(n-1)}^{t^n} w dt` of the terminal
    /// weight `w = w~/eps` on `[T - eps, T]`, with `w_0 = 0`. They sum to
    /// `w~ / dt` exactly.
    pub fn terminal_weights(&self, w_tilde: f64) -> Vec<f64> {
        let eps = self.epsilon();
        let start = self.final_time - eps;
        let dt = self.dt();
        let mut w = vec![0.0; self.saturation_steps + 1];
        for (n, wn) in w.iter_mut().enumerate().skip(1) {
            let (a, b) = (self.time(n - 1), self.time(n));
            let overlap = (b - a.max(start)).max(0.0);
            *wn = w_tilde / eps * overlap / dt;
        }
        w
    }
}

/// Pointwise terminal weight `w(t)`.
pub fn terminal_weight(t: f64, final_time: f64, epsilon: f64, w_tilde: f64) -> f64 {
    if t >= final_time - epsilon && t <= final_time {
        w_tilde / epsilon
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured_unit_square;

    #[test]
    fn default_model_plug_in_values() {
        let m = TwoPhaseModel::default();
        let d = m.mobility_floor;
        assert!((m.alpha(0.0) - 1.0 / (2.0 * d + 1.0)).abs() < 1e-15);
        assert_eq!(m.b(0.0), 0.0);
        assert!((m.f(0.0) + d).abs() < 1e-15);
        assert_eq!(m.b(1.0), 2.0);
        assert!((m.f(1.0) + d + 1.0).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let m = TwoPhaseModel::default();
        let h = 1e-6;
        for i in 1..1000 {
            let c = i as f64 / 1000.0;
            let fd = |g: &dyn Fn(f64) -> f64| (g(c + h) - g(c - h)) / (2.0 * h);
            assert!((m.alpha_prime(c) - fd(&|x| m.alpha(x))).abs() < 1e-6);
            assert!((m.diffusion_prime(c) - fd(&|x| m.diffusion(x))).abs() < 1e-6);
            assert!((m.b_prime(c) - fd(&|x| m.b(x))).abs() < 1e-6);
            assert!((m.f_prime(c) - fd(&|x| m.f(x))).abs() < 1e-6);
        }
    }

    #[test]
    fn default_bounds_are_positive() {
        let b = model_bounds(&TwoPhaseModel::default());
        assert!(b.a_lower > 0.0 && b.a_lower <= b.a_upper);
        assert!(b.d_lower > 0.0 && b.d_lower <= b.d_upper);
        assert!(b.lipschitz_alpha.is_finite() && b.lipschitz_diffusion.is_finite());
    }

    #[test]
    fn single_element_patches() {
        let mesh = structured_unit_square(16).unwrap();
        let k = mesh.area(0);
        let w = build_wells(&mesh, Point::new(0.05, 0.02), Point::new(0.9, 0.9), 0.5 * k).unwrap();
        assert_eq!(w.injection_cells.len(), 1);
        assert_eq!(w.sigma0, k);
        assert!((w.r0[w.injection_cells[0]] - 1.0 / k).abs() < 1e-9);
    }

    #[test]
    fn quarter_five_spot_patches_are_disjoint_and_normalised() {
        let mesh = structured_unit_square(16).unwrap();
        let w = build_wells(&mesh, Point::new(0.1, 0.1), Point::new(0.9, 0.9), 0.01).unwrap();
        assert!(w.injection_cells.iter().all(|k| !w.production_cells.contains(k)));
        let i0: f64 = (0..mesh.n_triangles()).map(|k| w.r0[k] * mesh.area(k)).sum();
        let i1: f64 = (0..mesh.n_triangles()).map(|k| w.r1[k] * mesh.area(k)).sum();
        assert!((i0 - 1.0).abs() < 1e-12 && (i1 - 1.0).abs() < 1e-12);
        let net: f64 = (0..mesh.n_triangles()).map(|k| w.net_source(k) * mesh.area(k)).sum();
        assert!(net.abs() < 1e-12);
    }

    #[test]
    fn well_errors() {
        let mesh = structured_unit_square(4).unwrap();
        assert!(matches!(
            build_wells(&mesh, Point::new(1.5, 0.5), Point::new(0.5, 0.5), 0.01),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            build_wells(&mesh, Point::new(0.4, 0.4), Point::new(0.6, 0.6), 0.5),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn terminal_weights_integrate_to_price() {
        let cfg = RunConfig {
            saturation_steps: 40,
            pressure_steps: 8,
            terminal_window: Some(0.0625),
            ..RunConfig::default()
        };
        let w = cfg.terminal_weights(3.0);
        let total: f64 = w.iter().map(|x| x * cfg.dt()).sum();
        assert!((total - 3.0).abs() < 1e-12);
        assert_eq!(w[0], 0.0);
        assert!(w[..37].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn config_validation_names_keys() {
        let cfg = RunConfig {
            xi: Some(-1.0),
            ..RunConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("xi"));
        let cfg = RunConfig {
            saturation_steps: 7,
            pressure_steps: 2,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
