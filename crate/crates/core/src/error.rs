use thiserror::Error;

use crate::vsm::{RunResult, TracePoint};

/// Errors produced by the learning core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate simplex: {0}")]
    DegenerateSimplex(String),

    #[error("invalid stop rule: {0}")]
    InvalidStopRule(String),

    #[error("oracle refused query: limit of {limit} labels reached")]
    QueryLimit { limit: u64 },

    #[error("oracle query budget of {limit} labels exhausted")]
    BudgetExceeded {
        limit: u64,
        partial: Box<RunResult>,
    },

    #[error("invariant `{invariant}` violated at iteration {iteration}: observed {observed:e}")]
    InvariantViolation {
        invariant: Invariant,
        iteration: u64,
        observed: f64,
    },

    #[error("max-margin fit did not converge: {reason}")]
    NonConvergence {
        reason: String,
        /// Learning curve recorded before the failure, if any.
        partial: Vec<TracePoint>,
    },

    #[error("margin {gamma} is infeasible for radius {radius} in dimension {dim} (acceptance {acceptance:e})")]
    InfeasibleMargin {
        gamma: f64,
        radius: f64,
        dim: usize,
        acceptance: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

/// The runtime checks performed by a validating run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Invariant {
    /// The target lies in the current simplex (non-negative barycentric weights).
    Containment,
    /// Barycentric weights of the target sum to one.
    AffineSum,
    /// The query is orthogonal to every vertex spanning its hyperplane.
    Orthogonality,
    /// The two endpoints of the cut edge fall on opposite sides of the query.
    Halving,
    /// Diameter stays under the longest-edge bisection decay envelope.
    DiameterDecay,
    /// Every vertex stays on the orthant facet of the L1 sphere.
    FacetHyperplane,
    /// Labels used equals basis queries plus bisections.
    LabelAccounting,
    /// The returned centroid meets the requested error.
    FinalError,
}

impl std::fmt::Display for Invariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Invariant::Containment => "containment",
            Invariant::AffineSum => "affine-sum",
            Invariant::Orthogonality => "orthogonality",
            Invariant::Halving => "halving",
            Invariant::DiameterDecay => "diameter-decay",
            Invariant::FacetHyperplane => "facet-hyperplane",
            Invariant::LabelAccounting => "label-accounting",
            Invariant::FinalError => "final-error",
        };
        f.write_str(name)
    }
}
