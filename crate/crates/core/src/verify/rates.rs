use crate::error::{Error, Result};
use crate::sgd::{rm_parameters, StepSchedule};

use super::ensemble::EnsembleStats;

/// Leading constant of the algebraic rate under Robbins-Monro steps with
/// i.i.d. noise of scale `c`: `gamma^2 c^2 C_L / (alpha gamma - 2)` for
/// `q = 1`, `gamma^2 c^2 C_L / (alpha gamma)` for `q < 1`.
pub fn lemma_constant(alpha: f64, c_lip: f64, gamma: f64, c: f64, q: f64) -> Result<f64> {
    let base = gamma * gamma * c * c * c_lip;
    if q == 1.0 {
        if !(alpha * gamma > 2.0) {
            return Err(Error::precondition(format!(
                "q = 1 requires gamma > 2/alpha = {}, got gamma = {gamma}",
                2.0 / alpha
            )));
        }
        Ok(base / (alpha * gamma - 2.0))
    } else {
        Ok(base / (alpha * gamma))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub q: f64,
    pub burn_in: usize,
    /// Mean of `k^q mean(F 1_{E_k})` over `k` in `[burn_in, K]`.
    pub fitted: f64,
    pub constant: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// Allowed ratio between the fitted and the theoretical constant.
pub const RATE_SLACK: f64 = 1.5;

/// Fits the leading constant of `E[F(theta_k)] ~ constant / k^q` on an
/// ensemble run with `schedule` and i.i.d. noise of scale `c`. The default
/// burn-in is `max(10 n0, K / 10)`.
pub fn fit_algebraic_rate(
    stats: &EnsembleStats,
    schedule: &StepSchedule,
    alpha: f64,
    c_lip: f64,
    c: f64,
    burn_in: Option<usize>,
) -> Result<RateFit> {
    let StepSchedule::RobbinsMonro { gamma, n0, q } = *schedule else {
        return Err(Error::precondition("rate fitting needs a Robbins-Monro schedule"));
    };
    schedule.validate()?;
    let n0_min = rm_parameters(alpha, c_lip, gamma, q)?;
    if n0 < n0_min {
        return Err(Error::precondition(format!(
            "n0 must be at least (2 C_L^2 gamma / alpha)^(1/q) = {n0_min}, got {n0}"
        )));
    }
    let constant = lemma_constant(alpha, c_lip, gamma, c, q)?;
    let horizon = stats.horizon;
    let burn_in = burn_in.unwrap_or_else(|| ((10.0 * n0).ceil() as usize).max(horizon / 10)).max(1);
    if burn_in > horizon {
        return Err(Error::precondition(format!("burn-in {burn_in} exceeds horizon {horizon}")));
    }
    let terms = (burn_in..=horizon).map(|k| (k as f64).powf(q) * stats.per_step[k].mean_f_event);
    let fitted = terms.sum::<f64>() / (horizon - burn_in + 1) as f64;
    let ratio = fitted / constant;
    Ok(RateFit {
        q,
        burn_in,
        fitted,
        constant,
        ratio,
        pass: ratio <= RATE_SLACK,
    })
}
