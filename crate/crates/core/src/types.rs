//! Points of the two unit spheres the learner works with.
//!
//! Queries live on the L2 unit sphere, hypotheses (halfspace normals) on the
//! L1 unit sphere. Both are thin wrappers over `Vec<f64>` that check their
//! norm on construction.

use crate::error::{Error, Result};
use crate::linalg::{l1_norm, l2_norm};

/// Norm tolerance accepted by [`QueryPoint::new`] and [`Hypothesis::new`].
pub const SPHERE_TOL: f64 = 1e-9;

fn check_coords(coords: &[f64]) -> Result<()> {
    if coords.len() < 2 {
        return Err(Error::InvalidDimension(coords.len()));
    }
    if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

/// A binary label. The sign of zero is taken to be positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    /// `sign(value)` with `sign(0) = +1`.
    pub fn of(value: f64) -> Self {
        if value >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

/// A unit vector on the L2 sphere: something the oracle can label.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryPoint(Vec<f64>);

impl QueryPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_coords(&coords)?;
        let norm = l2_norm(&coords);
        if (norm - 1.0).abs() > SPHERE_TOL {
            return Err(Error::InvalidArgument(format!(
                "query point must have unit L2 norm, got {norm}"
            )));
        }
        Ok(Self(coords))
    }

    /// Scales a nonzero vector onto the L2 sphere.
    pub fn normalize(mut coords: Vec<f64>) -> Result<Self> {
        check_coords(&coords)?;
        let norm = l2_norm(&coords);
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        coords.iter_mut().for_each(|c| *c /= norm);
        Ok(Self(coords))
    }

    pub fn basis(dim: usize, axis: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if axis >= dim {
            return Err(Error::InvalidArgument(format!(
                "axis {axis} out of range for dimension {dim}"
            )));
        }
        let mut coords = vec![0.0; dim];
        coords[axis] = 1.0;
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for QueryPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A homogeneous halfspace `x ↦ sign(w·x)`, represented by its normal `w`
/// on the L1 unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis(Vec<f64>);

impl Hypothesis {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_coords(&coords)?;
        let norm = l1_norm(&coords);
        if (norm - 1.0).abs() > SPHERE_TOL {
            return Err(Error::InvalidArgument(format!(
                "hypothesis must have unit L1 norm, got {norm}"
            )));
        }
        Ok(Self(coords))
    }

    /// Scales a nonzero vector onto the L1 sphere.
    pub fn normalize(mut coords: Vec<f64>) -> Result<Self> {
        check_coords(&coords)?;
        let norm = l1_norm(&coords);
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        coords.iter_mut().for_each(|c| *c /= norm);
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// The same direction scaled to unit L2 norm.
    pub fn to_unit_l2(&self) -> Vec<f64> {
        let norm = l2_norm(&self.0);
        self.0.iter().map(|c| c / norm).collect()
    }
}

impl AsRef<[f64]> for Hypothesis {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}
