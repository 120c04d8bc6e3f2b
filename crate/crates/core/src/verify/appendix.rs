use crate::error::Result;
use crate::exec::Execution;
use crate::landscapes::{annulus_lower_bound, ThetaSubspace};
use crate::objective::Objective;
use crate::rng::RngStream;
use crate::vector;

#[derive(Clone, Debug, PartialEq)]
pub struct A1Report {
    pub points: usize,
    pub violations: usize,
    /// Smallest `F(theta') - bound(theta')` over the sample.
    pub min_margin: f64,
    /// Margin at the anchor, `2 mean(y^2)`.
    pub anchor_margin: f64,
    /// Coefficient of `|theta' - theta_0|^2` in the bound.
    pub coefficient: f64,
    pub acceptance_rate: f64,
}

/// Evaluates the quadratic lower bound for the network loss at `n_points`
/// members of `Theta` drawn from `B(theta_0, R/2)`, where `R` and `A` are
/// the hidden and output weight minima used to initialize the anchor.
pub fn certify_a1_bound(
    sub: &ThetaSubspace,
    weight_min: f64,
    output_min: f64,
    n_points: usize,
    rng: &mut RngStream,
    exec: Execution,
) -> Result<A1Report> {
    let loss = sub.loss();
    let net = loss.net();
    let mean_sq = loss.data().mean_sq_target();
    let bound = |d: f64| annulus_lower_bound(net, sub.alpha_tilde(), weight_min, output_min, d, mean_sq);
    let sample = sub.sample(weight_min / 2.0, n_points, rng, exec)?;
    let margins = exec.try_map(sample.points.len(), |i| {
        let p = &sample.points[i];
        let d = vector::distance(p.as_slice(), sub.anchor().as_slice());
        Ok::<_, crate::Error>(loss.value(p)? - bound(d))
    })?;
    Ok(A1Report {
        points: margins.len(),
        violations: margins.iter().filter(|m| **m < 0.0).count(),
        min_margin: margins.iter().cloned().fold(f64::INFINITY, f64::min),
        anchor_margin: loss.value(sub.anchor())? - bound(0.0),
        coefficient: bound(1.0) + mean_sq,
        acceptance_rate: sample.acceptance_rate(),
    })
}
