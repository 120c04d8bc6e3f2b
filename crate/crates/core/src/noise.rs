//! Stochastic-gradient noise models.
//!
//! A stochastic gradient is `grad F(theta) + noise`. Three constructions are
//! provided: value-scaled noise `sqrt(sigma F(theta)) Z` that vanishes at
//! zero loss, i.i.d. noise with bounded moments, and i.i.d. noise whose draws
//! are all rotated onto one fixed direction.

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::rng::RngStream;
use crate::vector::{self, ParamVector};

/// Draws used to verify declared moments at construction.
pub const MOMENT_CHECK_DRAWS: usize = 100_000;
const MOMENT_CHECK_SEED: u64 = 0x6d6f_6d65_6e74;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZShape {
    /// Uniform on the sphere of radius `c`: `|Z| = c` for every draw.
    Sphere,
    /// Isotropic Gaussian with `E|Z|^2 = c^2`.
    Gaussian,
}

/// A zero-mean distribution on `R^d` with declared `E|Z|` and `E|Z|^m <= c^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZDist {
    dim: usize,
    scale: f64,
    shape: ZShape,
    moment_order: f64,
}

impl ZDist {
    pub fn sphere(dim: usize, scale: f64) -> Result<Self> {
        Self::new(dim, scale, ZShape::Sphere, 2.0)
    }

    pub fn gaussian(dim: usize, scale: f64) -> Result<Self> {
        Self::new(dim, scale, ZShape::Gaussian, 2.0)
    }

    /// Builds the distribution and checks its declared moments on
    /// [`MOMENT_CHECK_DRAWS`] draws: the empirical mean, `E|Z|` and
    /// `E|Z|^m` must sit within three standard errors of their declared
    /// values.
    pub fn new(dim: usize, scale: f64, shape: ZShape, moment_order: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::precondition("noise dimension must be positive"));
        }
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::precondition(format!("noise scale must be non-negative, got {scale}")));
        }
        if !(moment_order >= 2.0 && moment_order.is_finite()) {
            return Err(Error::precondition(format!("moment order must be at least 2, got {moment_order}")));
        }
        let dist = ZDist {
            dim,
            scale,
            shape,
            moment_order,
        };
        dist.verify_moments()?;
        Ok(dist)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `c`: the declared bound `E|Z|^m <= c^m`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shape(&self) -> ZShape {
        self.shape
    }

    pub fn moment_order(&self) -> f64 {
        self.moment_order
    }

    /// `E|Z|`.
    pub fn mean_abs(&self) -> f64 {
        match self.shape {
            ZShape::Sphere => self.scale,
            ZShape::Gaussian => self.scale * (2.0 / self.dim as f64).sqrt() * half_gamma_ratio(self.dim),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        match self.shape {
            ZShape::Sphere => {
                let mut z = rng.unit_sphere(self.dim);
                z.iter_mut().for_each(|v| *v *= self.scale);
                z
            }
            ZShape::Gaussian => {
                let s = self.scale / (self.dim as f64).sqrt();
                (0..self.dim).map(|_| s * rng.normal()).collect()
            }
        }
    }

    fn verify_moments(&self) -> Result<()> {
        let n = MOMENT_CHECK_DRAWS as f64;
        let mut rng = RngStream::new(MOMENT_CHECK_SEED, self.dim as u64);
        let mut sum = vec![0.0; self.dim];
        let mut abs = Welford::default();
        let mut pow = Welford::default();
        for _ in 0..MOMENT_CHECK_DRAWS {
            let z = self.sample(&mut rng);
            let r = vector::norm(&z);
            sum.iter_mut().zip(&z).for_each(|(s, v)| *s += v);
            abs.push(r);
            pow.push(r.powf(self.moment_order));
        }
        let slack = |target: f64| 1e-12 * target.abs().max(1e-300);
        let mean_norm = vector::norm(&sum) / n;
        // Each coordinate has variance c^2 / d, so |mean| concentrates at c / sqrt(n).
        if mean_norm > 3.0 * self.scale / n.sqrt() + slack(self.scale) {
            return Err(Error::precondition(format!(
                "noise mean {mean_norm} is not compatible with zero"
            )));
        }
        let m_bar = self.mean_abs();
        if (abs.mean() - m_bar).abs() > 3.0 * abs.standard_error() + slack(m_bar) {
            return Err(Error::precondition(format!(
                "empirical E|Z| = {} disagrees with declared {m_bar}",
                abs.mean()
            )));
        }
        let bound = self.scale.powf(self.moment_order);
        if pow.mean() > bound + 3.0 * pow.standard_error() + slack(bound) {
            return Err(Error::precondition(format!(
                "empirical E|Z|^{} = {} exceeds declared bound {bound}",
                self.moment_order,
                pow.mean()
            )));
        }
        Ok(())
    }
}

/// `Gamma((d + 1) / 2) / Gamma(d / 2)` by the two-step recursion from d = 1, 2.
fn half_gamma_ratio(dim: usize) -> f64 {
    let mut r = if dim % 2 == 1 {
        1.0 / std::f64::consts::PI.sqrt()
    } else {
        std::f64::consts::PI.sqrt() / 2.0
    };
    let mut d = if dim % 2 == 1 { 1 } else { 2 };
    while d < dim {
        r *= (d as f64 + 1.0) / d as f64;
        d += 2;
    }
    r
}

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel {
    /// `sqrt(sigma F(theta)) Z` with `Z` uniform on the unit sphere.
    MlScaled { sigma: f64 },
    BoundedIid(ZDist),
    /// `|Z_k| u` where `u` is the direction of the first draw.
    AdversarialRotated(ZDist),
}

/// Per-trajectory state. Only the rotated model uses it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoiseState {
    direction: Option<Vec<f64>>,
}

impl NoiseState {
    pub fn direction(&self) -> Option<&[f64]> {
        self.direction.as_deref()
    }
}

/// A stochastic gradient together with the raw noise magnitude `|Z|`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyGradient {
    pub gradient: ParamVector,
    pub noise: Vec<f64>,
    pub z_norm: f64,
}

impl NoiseModel {
    pub fn ml_scaled(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::precondition(format!("sigma must be non-negative, got {sigma}")));
        }
        Ok(NoiseModel::MlScaled { sigma })
    }

    /// The `sigma` entering the contraction factor. Zero for the i.i.d.
    /// models, whose noise does not scale with the loss.
    pub fn sigma(&self) -> f64 {
        match self {
            NoiseModel::MlScaled { sigma } => *sigma,
            _ => 0.0,
        }
    }

    pub fn dist(&self) -> Option<&ZDist> {
        match self {
            NoiseModel::MlScaled { .. } => None,
            NoiseModel::BoundedIid(d) | NoiseModel::AdversarialRotated(d) => Some(d),
        }
    }

    pub fn is_unbiased(&self) -> bool {
        !matches!(self, NoiseModel::AdversarialRotated(_))
    }

    /// Adds one noise draw to a known `(F, grad F)` pair.
    pub fn perturb(&self, f: f64, grad: &ParamVector, rng: &mut RngStream, state: &mut NoiseState) -> Result<NoisyGradient> {
        if f < 0.0 {
            return Err(Error::NegativeObjective(f));
        }
        let dim = grad.len();
        let (noise, z_norm) = match self {
            NoiseModel::MlScaled { sigma } => {
                let z = rng.unit_sphere(dim);
                let amp = (sigma * f).sqrt();
                (z.into_iter().map(|v| amp * v).collect::<Vec<_>>(), 1.0)
            }
            NoiseModel::BoundedIid(d) => {
                vector::check_len(d.dim, dim)?;
                let z = d.sample(rng);
                let r = vector::norm(&z);
                (z, r)
            }
            NoiseModel::AdversarialRotated(d) => {
                vector::check_len(d.dim, dim)?;
                let z = d.sample(rng);
                let r = vector::norm(&z);
                if state.direction.is_none() && r > 0.0 {
                    state.direction = Some(z.iter().map(|v| v / r).collect());
                }
                match &state.direction {
                    Some(u) => (u.iter().map(|v| r * v).collect(), r),
                    None => (vec![0.0; dim], r),
                }
            }
        };
        let gradient = ParamVector::new(grad.iter().zip(&noise).map(|(g, z)| g + z).collect())
            .map_err(|_| Error::NonFinite("stochastic gradient"))?;
        Ok(NoisyGradient {
            gradient,
            noise,
            z_norm,
        })
    }

    pub fn stochastic_gradient(
        &self,
        obj: &dyn Objective,
        theta: &ParamVector,
        rng: &mut RngStream,
        state: &mut NoiseState,
    ) -> Result<ParamVector> {
        let (f, g) = obj.value_and_gradient(theta)?;
        Ok(self.perturb(f, &g, rng, state)?.gradient)
    }
}

/// Monte Carlo moments of the noise component `g - grad F(theta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseMoments {
    /// `|mean of noise|`.
    pub mean_norm: f64,
    /// Mean of `|noise|^2`.
    pub second_moment: f64,
    /// Mean of `|noise|`.
    pub first_abs_moment: f64,
    /// Standard error of `second_moment`.
    pub second_moment_se: f64,
    /// Standard error of `first_abs_moment`.
    pub first_abs_moment_se: f64,
}

pub fn empirical_moments(
    model: &NoiseModel,
    obj: &dyn Objective,
    theta: &ParamVector,
    n: usize,
    rng: &mut RngStream,
) -> Result<NoiseMoments> {
    if n == 0 {
        return Err(Error::precondition("n must be at least 1"));
    }
    let (f, g) = obj.value_and_gradient(theta)?;
    let mut state = NoiseState::default();
    let mut sum = vec![0.0; g.len()];
    let mut sq = Welford::default();
    let mut abs = Welford::default();
    for _ in 0..n {
        let draw = model.perturb(f, &g, rng, &mut state)?;
        sum.iter_mut().zip(&draw.noise).for_each(|(s, v)| *s += v);
        let r = vector::norm(&draw.noise);
        sq.push(r * r);
        abs.push(r);
    }
    Ok(NoiseMoments {
        mean_norm: vector::norm(&sum) / n as f64,
        second_moment: sq.mean(),
        first_abs_moment: abs.mean(),
        second_moment_se: sq.standard_error(),
        first_abs_moment_se: abs.standard_error(),
    })
}

/// Running mean and variance.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub(crate) fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub(crate) fn mean(&self) -> f64 {
        self.mean
    }

    pub(crate) fn standard_error(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        }
    }
}
