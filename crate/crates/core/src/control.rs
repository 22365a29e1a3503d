//! Feedback laws. A controller only ever sees the estimated state.

use crate::error::{Error, Result};
use crate::operators::{DensityMatrix, SpinOperators};

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Controller {
    #[default]
    Off,
    Constant(f64),
    /// `alpha (1 - Tr(rho_hat rho_target))^beta`.
    Population { target: usize, alpha: f64, beta: f64 },
    /// `alpha (J - target - Tr(J_z rho_hat))^beta`.
    Expectation { target: usize, alpha: f64, beta: f64 },
}

impl Controller {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let mut problems = Vec::new();
        match *self {
            Controller::Off => {}
            Controller::Constant(c) => {
                if !c.is_finite() {
                    problems.push(format!("controller.value = {c} must be finite"));
                }
            }
            Controller::Population { target, alpha, beta } | Controller::Expectation { target, alpha, beta } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    problems.push(format!("controller.alpha = {alpha} must be > 0"));
                }
                if !(beta >= 1.0 && beta.is_finite()) {
                    problems.push(format!("controller.beta = {beta} must be >= 1"));
                }
                if target >= dim {
                    problems.push(format!("controller.target = {target} must be < N = {dim}"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    /// Target basis index, if the law has one.
    pub fn target(&self) -> Option<usize> {
        match *self {
            Controller::Population { target, .. } | Controller::Expectation { target, .. } => Some(target),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Controller::Off => "off",
            Controller::Constant(_) => "constant",
            Controller::Population { .. } => "population",
            Controller::Expectation { .. } => "expectation",
        }
    }

    pub fn evaluate(&self, rho_hat: &DensityMatrix, ops: &SpinOperators) -> Result<f64> {
        if rho_hat.dim() != ops.dim() {
            return Err(Error::DimensionMismatch {
                expected: ops.dim(),
                found: rho_hat.dim(),
            });
        }
        Ok(match *self {
            Controller::Off => 0.0,
            Controller::Constant(c) => c,
            Controller::Population { target, alpha, beta } => {
                let base = (1.0 - rho_hat.population(target)).max(0.0);
                alpha * power(base, beta)
            }
            Controller::Expectation { target, alpha, beta } => {
                let base = ops.spin() - target as f64 - rho_hat.expectation(&ops.jz);
                alpha * power(base, beta)
            }
        })
    }
}

/// `b^beta`, with the odd extension `sign(b) |b|^beta` for non-integer
/// `beta` and negative `b`.
fn power(base: f64, beta: f64) -> f64 {
    if beta.fract() == 0.0 && beta.abs() < i32::MAX as f64 {
        base.powi(beta as i32)
    } else {
        base.signum() * base.abs().powf(beta)
    }
}
