//! Operator identities, manufactured-solution convergence studies and the
//! finite-difference gradient oracle.

pub mod gradient;
pub mod manufactured;
pub mod operators;
pub mod studies;

pub use gradient::{desk_gradient_case, gradient_check, GradientCheck, GradientSample, DESK_STEPS};
pub use manufactured::{square_wells, Manufactured};
pub use operators::{gamma_contraction_study, operator_identity_suite, ContractionReport, OperatorReport};
pub use studies::{control_study, manufactured_costate_study, manufactured_state_study, StudyOptions, StudyResult};

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

/// Error sequence of one quantity over the levels of a study.
#[derive(Debug, Clone, Serialize)]
pub struct Quantity {
    pub name: String,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log h`.
    pub rate: f64,
    pub threshold: f64,
}

impl Quantity {
    pub fn passed(&self) -> bool {
        self.rate >= self.threshold
    }

    /// Observed rate between the two finest levels, assuming `h` halves.
    pub fn finest_rate(&self) -> f64 {
        let n = self.errors.len();
        (self.errors[n - 2] / self.errors[n - 1]).log2()
    }
}

/// Raw errors and fitted rates of a convergence study.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub name: String,
    pub h: Vec<f64>,
    pub dt: Vec<f64>,
    pub quantities: Vec<Quantity>,
}

impl ConvergenceReport {
    pub fn new(name: &str, h: Vec<f64>, dt: Vec<f64>) -> Result<Self> {
        if h.len() < 2 || h.len() != dt.len() {
            return Err(Error::Config(format!("{name}: need at least two levels")));
        }
        if h.windows(2).any(|w| (w[1] / w[0] - 0.5).abs() > 1e-9) {
            return Err(Error::Config(format!("{name}: levels are not nested (h must halve)")));
        }
        Ok(ConvergenceReport {
            name: name.to_string(),
            h,
            dt,
            quantities: Vec::new(),
        })
    }

    pub fn push(&mut self, name: &str, errors: Vec<f64>, threshold: f64) {
        let rate = fit_rate(&self.h, &errors);
        self.quantities.push(Quantity {
            name: name.to_string(),
            errors,
            rate,
            threshold,
        });
    }

    pub fn get(&self, name: &str) -> Option<&Quantity> {
        self.quantities.iter().find(|q| q.name == name)
    }

    pub fn passed(&self) -> bool {
        self.quantities.iter().all(Quantity::passed)
    }

    /// Human-readable table of all errors and rates.
    pub fn table(&self) -> String {
        let mut s = format!("{}\n{:>10} {:>10}", self.name, "h", "dt");
        for q in &self.quantities {
            let _ = write!(s, " {:>12}", q.name);
        }
        s.push('\n');
        for (i, (h, dt)) in self.h.iter().zip(&self.dt).enumerate() {
            let _ = write!(s, "{h:>10.5} {dt:>10.5}");
            for q in &self.quantities {
                let _ = write!(s, " {:>12.4e}", q.errors[i]);
            }
            s.push('\n');
        }
        let _ = write!(s, "{:>21}", "rate");
        for q in &self.quantities {
            let _ = write!(s, " {:>12.3}", q.rate);
        }
        s.push('\n');
        s
    }

    /// One row per level: `h,dt,<quantity errors...>`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,dt");
        for q in &self.quantities {
            let _ = write!(s, ",{}", q.name);
        }
        s.push('\n');
        for (i, (h, dt)) in self.h.iter().zip(&self.dt).enumerate() {
            let _ = write!(s, "{h:.17e},{dt:.17e}");
            for q in &self.quantities {
                let _ = write!(s, ",{:.17e}", q.errors[i]);
            }
            s.push('\n');
        }
        s
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_rate(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_of_exact_power_law() {
        let h = [0.25, 0.125, 0.0625];
        let e: Vec<f64> = h.iter().map(|h| 3.0 * h * h).collect();
        assert!((fit_rate(&h, &e) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_nested_levels_are_rejected() {
        assert!(ConvergenceReport::new("x", vec![0.25, 0.2], vec![0.1, 0.1]).is_err());
    }
}
