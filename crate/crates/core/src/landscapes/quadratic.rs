use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{ExactConstants, Objective};
use crate::vector::ParamVector;

/// `F(theta) = (a/2)|theta - center|^2`.
///
/// Every landscape constant is known exactly: `C_L = a`, `alpha = 2a` on any
/// region, and the annulus floor is the squared distance from the center to
/// the shell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticWell {
    center: ParamVector,
    scale: f64,
}

impl QuadraticWell {
    pub fn new(center: ParamVector, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::precondition(format!("curvature must be positive, got {scale}")));
        }
        Ok(QuadraticWell { center, scale })
    }

    pub fn center(&self) -> &ParamVector {
        &self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl Objective for QuadraticWell {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, theta: &ParamVector) -> Result<f64> {
        self.check_dim(theta)?;
        // Summed in the same order as |grad|^2, so the ratio |grad|^2 / F is
        // exactly 2a whenever a is a power of two.
        let sq: f64 = theta
            .iter()
            .zip(self.center.iter())
            .map(|(t, c)| (t - c) * (t - c))
            .sum();
        Ok(0.5 * self.scale * sq)
    }

    fn gradient(&self, theta: &ParamVector) -> Result<ParamVector> {
        self.check_dim(theta)?;
        Ok(ParamVector::from_finite(
            theta
                .iter()
                .zip(self.center.iter())
                .map(|(t, c)| self.scale * (t - c))
                .collect(),
        ))
    }

    fn name(&self) -> &str {
        "quadratic"
    }

    fn exact_constants(&self) -> Option<ExactConstants> {
        Some(ExactConstants {
            alpha: 2.0 * self.scale,
            c_lip: self.scale,
        })
    }

    fn exact_floor(&self, anchor: &ParamVector, outer: f64) -> Option<f64> {
        let offset = self.center.distance(anchor).ok()?;
        let inner = outer - 1.0;
        let gap = if offset < inner {
            inner - offset
        } else if offset > outer {
            offset - outer
        } else {
            0.0
        };
        Some(0.5 * self.scale * gap * gap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn well(center: Vec<f64>, a: f64) -> QuadraticWell {
        QuadraticWell::new(ParamVector::new(center).unwrap(), a).unwrap()
    }

    #[test]
    fn value_and_gradient_closed_forms() {
        let q = well(vec![1.0, -1.0], 3.0);
        let t = ParamVector::new(vec![2.0, 1.0]).unwrap();
        assert!((q.value(&t).unwrap() - 1.5 * 5.0).abs() < 1e-12);
        assert_eq!(q.gradient(&t).unwrap().into_vec(), vec![3.0, 6.0]);
        assert_eq!(q.value(q.center()).unwrap(), 0.0);
    }

    #[test]
    fn ratio_is_exactly_two_a_for_power_of_two_curvature() {
        for a in [0.5, 1.0, 2.0, 4.0] {
            let q = well(vec![0.3, 0.1, -0.7], a);
            let t = ParamVector::new(vec![1.1, -0.4, 2.5]).unwrap();
            let (f, g) = q.value_and_gradient(&t).unwrap();
            assert_eq!(g.norm_sq() / f, 2.0 * a);
        }
    }

    #[test]
    fn floor_closed_form() {
        let origin = ParamVector::zeros(3);
        let q = well(vec![0.0; 3], 1.0);
        assert_eq!(q.exact_floor(&origin, 3.0), Some(2.0));
        // Minimizer sitting on the inner sphere: floor vanishes.
        let touching = well(vec![2.0, 0.0, 0.0], 1.0);
        assert_eq!(touching.exact_floor(&origin, 3.0), Some(0.0));
        let offset = well(vec![0.5, 0.0, 0.0], 1.0);
        assert_eq!(offset.exact_floor(&origin, 3.0), Some(0.5 * 1.5 * 1.5));
    }

    #[test]
    fn rejects_bad_curvature_and_dimension() {
        assert!(QuadraticWell::new(ParamVector::zeros(2), 0.0).is_err());
        let q = well(vec![0.0; 2], 1.0);
        assert!(q.value(&ParamVector::zeros(3)).is_err());
    }
}
