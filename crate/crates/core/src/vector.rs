//! Flat real parameter vectors.

use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in parameter space. Length is fixed at construction and every
/// coordinate is finite.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().all(|c| c.is_finite()) {
            Ok(ParamVector(coords))
        } else {
            Err(Error::NonFinite("ParamVector::new"))
        }
    }

    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    /// Builds the `i`-th standard basis vector scaled by `scale`.
    pub fn basis(len: usize, i: usize, scale: f64) -> Self {
        let mut v = vec![0.0; len];
        v[i] = scale;
        ParamVector(v)
    }

    /// Wraps coordinates already known to be finite. Used on hot paths that
    /// check finiteness themselves.
    pub(crate) fn from_finite(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        ParamVector(coords)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.0)
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        check_len(self.len(), other.len())?;
        Ok(dot(&self.0, &other.0))
    }

    /// `|self - other|`.
    pub fn distance(&self, other: &ParamVector) -> Result<f64> {
        check_len(self.len(), other.len())?;
        Ok(distance(&self.0, &other.0))
    }

    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        axpy(-1.0, other, self)
    }

    pub fn add(&self, other: &ParamVector) -> Result<ParamVector> {
        axpy(1.0, other, self)
    }

    pub fn scale(&self, a: f64) -> Result<ParamVector> {
        finite(self.0.iter().map(|x| a * x).collect(), "ParamVector::scale")
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Debug for ParamVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ParamVector::new(v)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(v: ParamVector) -> Vec<f64> {
        v.0
    }
}

/// `a * x + y`, componentwise.
pub fn axpy(a: f64, x: &ParamVector, y: &ParamVector) -> Result<ParamVector> {
    check_len(y.len(), x.len())?;
    finite(
        x.0.iter().zip(&y.0).map(|(xi, yi)| a * xi + yi).collect(),
        "axpy",
    )
}

pub fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}

pub fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

fn finite(coords: Vec<f64>, op: &'static str) -> Result<ParamVector> {
    if coords.iter().all(|c| c.is_finite()) {
        Ok(ParamVector(coords))
    } else {
        Err(Error::NonFinite(op))
    }
}
