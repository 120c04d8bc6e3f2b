use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::noise::NoiseModel;
use crate::sgd::{rm_parameters, StepSchedule};

use super::ensemble::{for_each_run, EnsembleSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct EscapeStats {
    pub n_runs: usize,
    pub horizon: usize,
    pub escape_fraction: f64,
    /// First step outside the event ball, per run.
    pub exit_steps: Vec<Option<usize>>,
    /// Run average of `sum_{k<=n} |Z_k| / k`.
    pub mean_diagnostic: f64,
    /// `m_bar ln(horizon)`.
    pub diagnostic_target: f64,
    /// `(horizon, escape fraction by then)` for each requested horizon.
    pub by_horizon: Vec<(usize, f64)>,
    pub monotone: bool,
}

/// Runs the ensemble under rotated noise and harmonic-type steps and
/// records which runs leave `B(theta_0, r)` within the horizon.
///
/// Runs stop early only when they leave `B(theta_0, R)`; choose `R` large
/// so the noise diagnostic covers the full horizon.
pub fn escape_experiment(
    spec: &EnsembleSpec<'_>,
    alpha: f64,
    c_lip: f64,
    horizons: &[usize],
    exec: Execution,
) -> Result<EscapeStats> {
    let NoiseModel::AdversarialRotated(dist) = spec.noise else {
        return Err(Error::precondition("the escape experiment requires adversarial_rotated noise"));
    };
    let StepSchedule::RobbinsMonro { gamma, n0, q } = spec.schedule else {
        return Err(Error::precondition("the escape experiment requires a robbins_monro schedule"));
    };
    spec.schedule.validate()?;
    let n0_min = rm_parameters(alpha, c_lip, gamma, q)?;
    if n0 < n0_min {
        return Err(Error::precondition(format!(
            "n0 must be at least (2 C_L^2 gamma / alpha)^(1/q) = {n0_min}, got {n0}"
        )));
    }
    if !(gamma * alpha > 2.0) {
        return Err(Error::precondition(format!(
            "gamma must exceed 2/alpha = {}, got {gamma}",
            2.0 / alpha
        )));
    }
    let horizon = spec.options.horizon;
    if let Some(h) = horizons.iter().find(|&&h| h == 0 || h > horizon) {
        return Err(Error::precondition(format!("checkpoint horizon {h} is outside [1, {horizon}]")));
    }

    let mut exit_steps = Vec::with_capacity(spec.n_runs);
    let mut diag_sum = 0.0;
    for_each_run(spec, exec, |_, rec| {
        exit_steps.push(rec.event_alive_until);
        diag_sum += rec.noise_weighted_sum;
        Ok(())
    })?;

    let n = spec.n_runs as f64;
    let fraction_by = |h: usize| exit_steps.iter().filter(|e| e.is_some_and(|k| k <= h)).count() as f64 / n;
    let mut hs = horizons.to_vec();
    hs.sort_unstable();
    hs.dedup();
    let by_horizon: Vec<(usize, f64)> = hs.iter().map(|&h| (h, fraction_by(h))).collect();
    let monotone = by_horizon.windows(2).all(|w| w[1].1 >= w[0].1);
    Ok(EscapeStats {
        n_runs: spec.n_runs,
        horizon,
        escape_fraction: fraction_by(horizon),
        mean_diagnostic: diag_sum / n,
        diagnostic_target: dist.mean_abs() * (horizon as f64).ln(),
        exit_steps,
        by_horizon,
        monotone,
    })
}
