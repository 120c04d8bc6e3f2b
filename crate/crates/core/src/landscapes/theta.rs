//! The restricted parameter set on which the network loss grows
//! quadratically away from the zero-output initialization.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::landscapes::net::NetworkLoss;
use crate::rng::RngStream;
use crate::vector::{check_len, ParamVector};

/// Proposals drawn per sampler batch.
const BATCH: usize = 4096;
/// Batches evaluated per round before checking whether enough points exist.
const BATCHES_PER_ROUND: usize = 32;
pub const MIN_ACCEPTANCE: f64 = 1e-4;
pub const ACCEPTANCE_CHECK_AFTER: u64 = 1_000_000;

/// `{theta' : (W_1' x_i + b_1')_j >= alpha_tilde |theta' - theta_0| for all i, j,
///  and b_l' >= 0 for l >= 2}`.
#[derive(Clone, Debug)]
pub struct ThetaSubspace {
    loss: NetworkLoss,
    anchor: ParamVector,
    alpha_tilde: f64,
}

#[derive(Clone, Debug)]
pub struct ThetaSample {
    pub points: Vec<ParamVector>,
    pub proposals: u64,
    pub accepted: u64,
}

impl ThetaSample {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

impl ThetaSubspace {
    pub fn new(loss: NetworkLoss, anchor: ParamVector, alpha_tilde: f64) -> Result<Self> {
        check_len(loss.net().param_count(), anchor.len())?;
        if !(alpha_tilde > 0.0 && alpha_tilde.is_finite()) {
            return Err(Error::precondition(format!("alpha_tilde must be positive, got {alpha_tilde}")));
        }
        Ok(ThetaSubspace {
            loss,
            anchor,
            alpha_tilde,
        })
    }

    pub fn loss(&self) -> &NetworkLoss {
        &self.loss
    }

    pub fn anchor(&self) -> &ParamVector {
        &self.anchor
    }

    pub fn alpha_tilde(&self) -> f64 {
        self.alpha_tilde
    }

    /// Closed constraints: ties count as members. Dimension mismatches are
    /// non-members.
    pub fn contains(&self, theta: &ParamVector) -> bool {
        if theta.len() != self.anchor.len() {
            return false;
        }
        let net = self.loss.net();
        let th = theta.as_slice();
        let dist = crate::vector::distance(th, self.anchor.as_slice());
        let floor = self.alpha_tilde * dist;

        for l in 2..=net.depth() {
            let off = net.bias_offset(l);
            if th[off..off + net.widths()[l]].iter().any(|&b| b < 0.0) {
                return false;
            }
        }

        let (rows, cols) = (net.widths()[1], net.widths()[0]);
        let w1 = &th[net.weight_offset(1)..][..rows * cols];
        let b1 = &th[net.bias_offset(1)..][..rows];
        self.loss.data().inputs().iter().all(|x| {
            (0..rows).all(|j| {
                let pre: f64 = w1[j * cols..(j + 1) * cols]
                    .iter()
                    .zip(x)
                    .map(|(w, xi)| w * xi)
                    .sum::<f64>()
                    + b1[j];
                pre >= floor
            })
        })
    }

    /// Rejection-samples up to `count` members of `Theta` from the uniform
    /// distribution on the ball of `radius` about the anchor.
    ///
    /// Proposals come in fixed-size batches, each on its own stream derived
    /// from `rng`, so the result does not depend on the execution mode.
    pub fn sample(&self, radius: f64, count: usize, rng: &mut RngStream, exec: Execution) -> Result<ThetaSample> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::precondition(format!("sampling radius must be positive, got {radius}")));
        }
        let mut out = ThetaSample {
            points: Vec::new(),
            proposals: 0,
            accepted: 0,
        };
        if count == 0 {
            return Ok(out);
        }
        let batch_seed = rng.next_u64();
        let mut next_batch = 0u64;
        while out.points.len() < count {
            let batches = exec.map(BATCHES_PER_ROUND, |i| {
                let mut stream = RngStream::new(batch_seed, next_batch + i as u64);
                (0..BATCH)
                    .filter_map(|_| {
                        let p = stream.in_ball(&self.anchor, radius);
                        self.contains(&p).then_some(p)
                    })
                    .collect::<Vec<_>>()
            });
            next_batch += BATCHES_PER_ROUND as u64;
            for batch in batches {
                out.proposals += BATCH as u64;
                out.accepted += batch.len() as u64;
                out.points.extend(batch);
            }
            if out.proposals >= ACCEPTANCE_CHECK_AFTER && out.acceptance_rate() < MIN_ACCEPTANCE {
                return Err(Error::LowAcceptance {
                    rate: out.acceptance_rate(),
                    min: MIN_ACCEPTANCE,
                    proposals: out.proposals,
                });
            }
        }
        out.points.truncate(count);
        Ok(out)
    }
}
