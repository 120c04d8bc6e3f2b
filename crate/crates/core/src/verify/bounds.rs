//! Theoretical bounds for constant-step SGD and the checks that compare an
//! ensemble against them.

use crate::constants::LandscapeCertificate;
use crate::error::{Error, Result};

use super::ensemble::EnsembleStats;

/// `(sqrt(2 C_L) + sqrt(sigma)) eta* F0 / (1 - sqrt(rho))`: the bound on the
/// expected path length while the event holds.
pub fn path_length_coefficient(cert: &LandscapeCertificate, f0: f64, sigma: f64) -> f64 {
    ((2.0 * cert.c_lip).sqrt() + sigma.sqrt()) * cert.eta_star * f0 / (1.0 - cert.rho.sqrt())
}

/// Unclamped bound on the probability of ever leaving `B(theta_0, R - 1)`:
/// `F0 ((sqrt(2 C_L) + sqrt(sigma)) eta* sqrt(rho) / (1 - sqrt(rho)) + rho^2 / (M0 (1 - rho)))`.
pub fn survival_bound_raw(cert: &LandscapeCertificate, f0: f64, sigma: f64) -> Result<f64> {
    if !(cert.m_floor > 0.0) {
        return Err(Error::InconsistentConstants(format!(
            "annulus floor M0 = {} is not positive",
            cert.m_floor
        )));
    }
    if !(cert.rho > 0.0 && cert.rho < 1.0) {
        return Err(Error::precondition(format!("rho = {} is outside (0, 1)", cert.rho)));
    }
    let sr = cert.rho.sqrt();
    let drift = ((2.0 * cert.c_lip).sqrt() + sigma.sqrt()) * cert.eta_star * sr / (1.0 - sr);
    let jump = cert.rho * cert.rho / (cert.m_floor * (1.0 - cert.rho));
    Ok(f0 * (drift + jump))
}

/// [`survival_bound_raw`] clamped to `[0, 1]`.
pub fn survival_bound(cert: &LandscapeCertificate, f0: f64, sigma: f64) -> Result<f64> {
    Ok(survival_bound_raw(cert, f0, sigma)?.clamp(0.0, 1.0))
}

/// Tail bound `(sqrt(2 C_L) + sqrt(sigma)) eta* F0 rho^(j/2) / (1 - sqrt(rho))`
/// on the expected remaining path length after step `j`.
pub fn cauchy_tail_bound(cert: &LandscapeCertificate, f0: f64, sigma: f64, j: usize) -> f64 {
    path_length_coefficient(cert, f0, sigma) * cert.rho.powf(j as f64 / 2.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    pub beta: f64,
    pub checkpoints: [usize; 4],
    /// `max over surviving runs of beta^k F(theta_k)` at each checkpoint.
    pub maxima: [f64; 4],
    pub surviving: usize,
    pub decreasing: bool,
}

/// Checks that `max_run beta^k F(theta_k)` strictly decreases across the
/// checkpoints `K/4, K/2, 3K/4, K` on surviving runs. Consecutive zero
/// maxima (loss underflowed to zero) count as decreasing.
pub fn check_geometric_decay(stats: &EnsembleStats, beta: f64) -> Result<DecayReport> {
    let theory = stats
        .theory
        .as_ref()
        .ok_or_else(|| Error::precondition("geometric decay needs a certificate"))?;
    if !(beta >= 1.0 && beta < 1.0 / theory.rho) {
        return Err(Error::precondition(format!(
            "beta must lie in [1, 1/rho) = [1, {}), got {beta}",
            1.0 / theory.rho
        )));
    }
    let cps = stats.checkpoints;
    let mut maxima = [0.0f64; 4];
    let mut surviving = 0;
    for run in stats.survivors() {
        surviving += 1;
        for i in 0..4 {
            let v = beta.powi(cps[i] as i32) * run.checkpoint_f[i];
            maxima[i] = maxima[i].max(v);
        }
    }
    let decreasing = surviving > 0 && maxima.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0));
    Ok(DecayReport {
        beta,
        checkpoints: cps,
        maxima,
        surviving,
        decreasing,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathLengthReport {
    pub delta_tilde: f64,
    pub quantile: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Compares the empirical `1 - delta_tilde` quantile of the event-weighted
/// path length with the Markov bound `path_coefficient / delta_tilde`.
pub fn path_length_quantile(stats: &EnsembleStats, delta_tilde: f64) -> Result<PathLengthReport> {
    if !(delta_tilde > 0.0 && delta_tilde <= 1.0) {
        return Err(Error::precondition(format!("delta_tilde must lie in (0, 1], got {delta_tilde}")));
    }
    let theory = stats
        .theory
        .as_ref()
        .ok_or_else(|| Error::precondition("path-length check needs a certificate"))?;
    let mut lengths: Vec<f64> = stats.runs.iter().map(|r| r.path_length).collect();
    lengths.sort_by(f64::total_cmp);
    let quantile = empirical_quantile(&lengths, 1.0 - delta_tilde);
    let bound = theory.path_coefficient / delta_tilde;
    Ok(PathLengthReport {
        delta_tilde,
        quantile,
        bound,
        pass: quantile <= bound,
    })
}

/// Lower empirical quantile of sorted data: the smallest value with at least
/// a fraction `p` of the sample at or below it.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}
