//! Concrete objectives: the analytic quadratic well and the feedforward
//! network loss with its restricted subspace.

pub mod net;
pub mod quadratic;
pub mod theta;

pub use net::{chatterjee_init, Activation, Dataset, NetSpec, NetworkLoss};
pub use quadratic::QuadraticWell;
pub use theta::{ThetaSample, ThetaSubspace};

/// Lower bound on the network loss over `B(theta_0, R/2) ∩ Theta`:
///
/// `(alpha_tilde^2 / 2) (A - R/2)^2 (R/2)^(2L-4) (c_{L-1}..c_1 d_{L-1}..d_1)^2 |theta' - theta_0|^2
///  - (1/n) sum y_i^2`.
pub fn annulus_lower_bound(
    net: &NetSpec,
    alpha_tilde: f64,
    weight_min: f64,
    output_min: f64,
    distance: f64,
    mean_sq_target: f64,
) -> f64 {
    let half = weight_min / 2.0;
    let depth = net.depth() as i32;
    let coeff = 0.5
        * alpha_tilde.powi(2)
        * (output_min - half).powi(2)
        * half.powi(2 * depth - 4)
        * net.slope_width_product().powi(2);
    coeff * distance * distance - mean_sq_target
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_coefficient_for_reference_fixture() {
        // alpha~ = 0.01, A - R/2 = 1, (R/2)^2 = 4, (d_2 d_1)^2 = 36.
        let net = NetSpec::new(vec![4, 3, 2, 1], Activation::SoftTanh).unwrap();
        let b = annulus_lower_bound(&net, 0.01, 4.0, 3.0, 1.0, 0.0);
        assert!((b - 0.5 * 1e-4 * 4.0 * 36.0).abs() < 1e-15);
        assert_eq!(annulus_lower_bound(&net, 0.01, 4.0, 3.0, 0.0, 0.3), -0.3);
    }
}
