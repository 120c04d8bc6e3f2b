//! The objective contract and the finite-difference gradient oracle.

use crate::error::{Error, Result};
use crate::vector::{check_len, ParamVector};

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Constants an objective knows in closed form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactConstants {
    /// Infimum of `|grad F|^2 / F` over any region.
    pub alpha: f64,
    /// Lipschitz constant of the gradient.
    pub c_lip: f64,
}

/// A non-negative loss `F` with an analytic gradient.
///
/// Implementations are immutable once built and must be safe to evaluate
/// from many workers at once.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, theta: &ParamVector) -> Result<f64>;

    fn gradient(&self, theta: &ParamVector) -> Result<ParamVector>;

    fn value_and_gradient(&self, theta: &ParamVector) -> Result<(f64, ParamVector)> {
        Ok((self.value(theta)?, self.gradient(theta)?))
    }

    fn name(&self) -> &str;

    fn exact_constants(&self) -> Option<ExactConstants> {
        None
    }

    /// Closed-form minimum of `F` over the shell
    /// `outer - 1 <= |theta - anchor| <= outer`, if known.
    fn exact_floor(&self, _anchor: &ParamVector, _outer: f64) -> Option<f64> {
        None
    }

    fn check_dim(&self, theta: &ParamVector) -> Result<()> {
        check_len(self.dim(), theta.len())
    }
}

/// Central-difference gradient, component `i` equal to
/// `(F(theta + h e_i) - F(theta - h e_i)) / (2h)`.
pub fn fd_gradient(obj: &dyn Objective, theta: &ParamVector, h: f64) -> Result<ParamVector> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::precondition(format!("finite-difference step must be positive, got {h}")));
    }
    obj.check_dim(theta)?;
    let mut probe = theta.clone().into_vec();
    let mut grad = Vec::with_capacity(probe.len());
    for i in 0..probe.len() {
        let x = probe[i];
        probe[i] = x + h;
        let up = obj.value(&ParamVector::from_finite(probe.clone()))?;
        probe[i] = x - h;
        let down = obj.value(&ParamVector::from_finite(probe.clone()))?;
        probe[i] = x;
        let g = (up - down) / (2.0 * h);
        if !g.is_finite() {
            return Err(Error::NonFiniteDifference { coordinate: i });
        }
        grad.push(g);
    }
    Ok(ParamVector::from_finite(grad))
}

/// Worst componentwise discrepancy between two gradients: relative where the
/// larger magnitude is at least `floor`, absolute below it.
pub fn gradient_discrepancy(analytic: &ParamVector, numeric: &ParamVector, floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, n)| {
            let scale = a.abs().max(n.abs());
            let diff = (a - n).abs();
            if scale < floor {
                diff
            } else {
                diff / scale
            }
        })
        .fold(0.0, f64::max)
}
