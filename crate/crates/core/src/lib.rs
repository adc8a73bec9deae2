//! Mixed finite-volume-element / discontinuous finite-volume-element
//! discretisation of water-injection optimal control for two-phase flow in
//! porous media, with an active-set optimiser.

pub mod assembly;
pub mod control;
pub mod error;
pub mod fespaces;
pub mod mesh;
pub mod model;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod verify;

pub use assembly::Discretization;
pub use error::{Error, Result};
pub use fespaces::{DiamondPWConstantField, DualPWConstantField, P0Field, P1DGField, RT0Field};
pub use mesh::{BarycentricDualMesh, DiamondDualMesh, Point, PrimalMesh};
pub use model::{Coefficients, ConstantModel, RunConfig, TwoPhaseModel, WellModel, WellParams};
pub use quadrature::QuadratureRule;
pub use sparse::CsrMatrix;
