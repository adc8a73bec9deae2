//! Darcy saddle-point solves, saturation time steps and the two-grid
//! forward/adjoint sweeps.

pub mod darcy;
pub mod linear;
pub mod sweep;

use std::sync::Arc;

pub use darcy::{check_compatibility, solve_darcy_costate, solve_darcy_state, DarcySolver, SaddleSolveReport};
pub use linear::{solve_sparse, SolveStats, SparseLu};
pub use sweep::{
    interpolate_velocity, run_adjoint, run_forward, step_saturation_backward, step_saturation_forward, Direction,
    Trajectory,
};

use crate::assembly::{mass_matrix, Discretization};
use crate::error::{Error, Result};
use crate::fespaces::P1DGField;
use crate::mesh::{Point, PrimalMesh};
use crate::model::{model_bounds, Coefficients, RunConfig, WellModel};
use crate::sparse::CsrMatrix;

/// Extra source terms added to the discrete equations; used to build
/// problems with known solutions. Every method defaults to zero.
pub trait Forcing: Sync {
    /// Load of the state velocity equation, `int g . gamma_h v`.
    fn velocity(&self, _t: f64, _x: &Point) -> Point {
        Point::zeros()
    }
    /// Mass source added to `(r_0 - r_1) q`.
    fn mass(&self, _t: f64, _x: &Point) -> f64 {
        0.0
    }
    fn saturation(&self, _t: f64, _x: &Point) -> f64 {
        0.0
    }
    fn costate_velocity(&self, _t: f64, _x: &Point) -> Point {
        Point::zeros()
    }
    fn costate_saturation(&self, _t: f64, _x: &Point) -> f64 {
        0.0
    }
    /// Linear term `int g_q q dt` added to the objective.
    fn control(&self, _t: f64) -> f64 {
        0.0
    }
    /// `false` lets the sweeps skip assembling the extra loads.
    fn is_active(&self) -> bool {
        true
    }
}

/// The unforced problem.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoForcing;

impl Forcing for NoForcing {
    fn is_active(&self) -> bool {
        false
    }
}

/// Everything fixed across forward/adjoint sweeps.
#[derive(Debug, Clone)]
pub struct Problem {
    pub disc: Discretization,
    pub model: Arc<dyn Coefficients>,
    pub wells: WellModel,
    pub config: RunConfig,
    /// Interior penalty actually used.
    pub xi: f64,
    /// Saturation mass matrix `(Psi_b, eta_h Psi_a)`.
    pub mass: CsrMatrix,
    /// Time-averaged terminal weights `w_n`, `n = 0..=N`.
    pub weights: Vec<f64>,
    pub initial: P1DGField,
}

impl Problem {
    pub fn new(mesh: PrimalMesh, model: Arc<dyn Coefficients>, wells: WellModel, config: RunConfig) -> Result<Self> {
        config.validate()?;
        let nt = mesh.n_triangles();
        if wells.r0.len() != nt || wells.r1.len() != nt {
            return Err(Error::MeshMismatch(format!(
                "well indicators have {} entries, mesh has {nt} triangles",
                wells.r0.len()
            )));
        }
        let quadrature = crate::quadrature::QuadratureRule::new(config.triangle_quadrature, config.segment_quadrature)?;
        let disc = Discretization::new(mesh, quadrature);
        let xi = config.penalty(&model_bounds(model.as_ref()));
        let mass = mass_matrix(&disc);
        let weights = config.terminal_weights(wells.w_tilde);
        let initial = P1DGField::constant(&disc.mesh, config.initial_saturation);
        Ok(Problem {
            disc,
            model,
            wells,
            config,
            xi,
            mass,
            weights,
            initial,
        })
    }

    pub fn with_initial(mut self, initial: P1DGField) -> Result<Self> {
        initial.check(&self.disc.mesh)?;
        self.initial = initial;
        Ok(self)
    }

    pub fn n_steps(&self) -> usize {
        self.config.saturation_steps
    }

    pub fn n_pressure_steps(&self) -> usize {
        self.config.pressure_steps
    }

    /// Initial control, `q^ / 2` unless configured.
    pub fn initial_control(&self) -> Vec<f64> {
        let q0 = self.config.initial_control.unwrap_or(0.5 * self.wells.q_hat);
        vec![q0.clamp(0.0, self.wells.q_hat); self.n_steps() + 1]
    }

    /// Checks `q` has `N + 1` finite entries in `[0, q^]`.
    pub fn check_control(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.n_steps() + 1 {
            return Err(Error::MeshMismatch(format!(
                "control has {} nodes, expected {}",
                q.len(),
                self.n_steps() + 1
            )));
        }
        if let Some((n, v)) = q
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && **v <= self.wells.q_hat))
        {
            return Err(Error::Domain(format!("q^{n} = {v} outside [0, {}]", self.wells.q_hat)));
        }
        Ok(())
    }
}
