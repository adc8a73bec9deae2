//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use porous_opt::mesh::structured_unit_square;
use porous_opt::model::{RunConfig, TwoPhaseModel, WellParams};
use porous_opt::solver::Problem;

/// Default model and wells on an `n x n` mesh with `steps` saturation steps
/// per pressure step count `steps / 4`.
pub fn problem(n: usize, steps: usize) -> Problem {
    let mesh = structured_unit_square(n).expect("mesh");
    let wells = WellParams::default().build(&mesh).expect("wells");
    let config = RunConfig {
        pressure_steps: steps / 4,
        saturation_steps: steps,
        ..RunConfig::default()
    };
    Problem::new(mesh, Arc::new(TwoPhaseModel::default()), wells, config).expect("problem")
}
