//! Reproducible random streams.
//!
//! Every Monte Carlo trajectory owns one [`RngStream`] keyed by
//! `(seed, stream_id)`. The generator is ChaCha8 with the stream id mapped to
//! the cipher's stream selector, so distinct ids give disjoint keystreams and
//! results do not depend on how runs are scheduled across workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::vector::ParamVector;

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform direction on the unit sphere in `dim` dimensions.
    pub fn unit_sphere(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| self.normal()).collect();
            let n = crate::vector::norm(&v);
            if n > 1e-300 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }

    /// Uniform point in the ball of the given radius about `center`.
    pub fn in_ball(&mut self, center: &ParamVector, radius: f64) -> ParamVector {
        self.in_annulus(center, 0.0, radius)
    }

    /// Uniform point in the shell `inner <= |x - center| <= outer`.
    pub fn in_annulus(&mut self, center: &ParamVector, inner: f64, outer: f64) -> ParamVector {
        let dim = center.len();
        let dir = self.unit_sphere(dim);
        let d = dim as f64;
        let u = self.uniform();
        // Radius law for uniform volume measure. Work relative to `outer` to
        // keep powers well scaled in high dimension.
        let ratio_lo = (inner / outer).powf(d);
        let rho = outer * (ratio_lo + u * (1.0 - ratio_lo)).powf(1.0 / d);
        ParamVector::from_finite(
            center
                .iter()
                .zip(dir)
                .map(|(c, e)| c + rho * e)
                .collect(),
        )
    }
}
