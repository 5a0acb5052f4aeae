//! The version space minimizer.
//!
//! The learner keeps a simplex on one facet of the L1 unit sphere that is
//! guaranteed to contain every hypothesis consistent with the labels seen so
//! far. It starts by querying the `n` basis vectors, which pins down the
//! orthant of the target and yields the simplex spanned by `±e_i`. Each
//! further query cuts the current longest edge in half:
//!
//! 1. take the longest edge `(a_i, a_j)` and its midpoint `a_new`;
//! 2. query the unit normal `v` of the hyperplane through the origin spanned
//!    by `a_new` and the `n − 2` vertices not on the edge;
//! 3. the hyperplane separates `a_i` from `a_j`, so the label of `v` tells
//!    which half holds the target: if it agrees with `sign(a_i·v)`, `a_j` is
//!    replaced by `a_new`, otherwise `a_i` is.
//!
//! The label bound does not depend on luck. After `p` bisections the
//! diameter is at most `√2 (√3/2)^⌊p/n⌋`, every point of a simplex of
//! diameter `δ` is within angle `2δ√n` of every other, and the generalization
//! error under the uniform sphere distribution is that angle over π.

use std::f64::consts::PI;
use std::time::Instant;

use crate::error::{Error, Invariant, Result};
use crate::linalg::{dot, nullspace_unit};
use crate::oracle::MembershipOracle;
use crate::simplex::{diameter_envelope, Replace, Simplex, DECAY_FACTOR};
use crate::types::{Hypothesis, Label, QueryPoint};

/// Tolerances checked by a validating run.
pub mod tolerance {
    /// Smallest barycentric weight of the target accepted as "inside".
    pub const CONTAINMENT: f64 = -1e-8;
    pub const AFFINE_SUM: f64 = 1e-9;
    pub const ORTHOGONALITY: f64 = 1e-10;
    /// Relative slack on the diameter decay envelope.
    pub const DIAMETER_RATIO: f64 = 1.0 + 1e-9;
    pub const FACET: f64 = 1e-12;
    /// `|a_i·v|` below this means `a_i` lies in the query hyperplane.
    pub const SIDE: f64 = 1e-12;
}

/// Largest `δ√n` accepted by a diameter-based stop rule. The angle bound
/// `θ ≤ 2 sin θ` used to turn a diameter into an error needs `θ < 1.895`.
pub const MAX_DELTA_SQRT_N: f64 = 0.9;

/// When the bisection loop stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop once the diameter guarantees generalization error at most `ε`,
    /// i.e. at diameter `πε / (2√n)`.
    TargetError(f64),
    /// Stop once the diameter is at most `δ`.
    DiameterThreshold(f64),
    /// Stop after exactly this many bisections.
    IterationBudget(u64),
    /// Stop at diameter `γ / (2√n R)`, which gives zero error on any
    /// distribution separable with margin `γ` and supported in the
    /// radius-`R` ball.
    MarginThreshold { gamma: f64, radius: f64 },
}

impl StopRule {
    /// Diameter at which the rule is satisfied, if it is diameter based.
    pub fn diameter_threshold(&self, dim: usize) -> Option<f64> {
        let sqrt_n = (dim as f64).sqrt();
        match *self {
            StopRule::TargetError(eps) => Some(PI * eps / (2.0 * sqrt_n)),
            StopRule::DiameterThreshold(delta) => Some(delta),
            StopRule::IterationBudget(_) => None,
            StopRule::MarginThreshold { gamma, radius } => Some(gamma / (2.0 * sqrt_n * radius)),
        }
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        match *self {
            StopRule::TargetError(eps) if !(eps > 0.0 && eps < 0.5) => {
                return Err(Error::InvalidStopRule(format!(
                    "target error must lie in (0, 0.5), got {eps}"
                )))
            }
            StopRule::DiameterThreshold(delta) if !(delta > 0.0) => {
                return Err(Error::InvalidStopRule(format!(
                    "diameter threshold must be positive, got {delta}"
                )))
            }
            StopRule::IterationBudget(0) => {
                return Err(Error::InvalidStopRule("iteration budget must be positive".into()))
            }
            StopRule::MarginThreshold { gamma, radius } if !(gamma > 0.0 && radius > 0.0) => {
                return Err(Error::InvalidStopRule(format!(
                    "margin and radius must be positive, got gamma = {gamma}, radius = {radius}"
                )))
            }
            _ => {}
        }
        if let Some(delta) = self.diameter_threshold(dim) {
            let scaled = delta * (dim as f64).sqrt();
            if scaled > MAX_DELTA_SQRT_N {
                return Err(Error::InvalidStopRule(format!(
                    "diameter threshold {delta} is too coarse for dimension {dim} \
                     (δ√n = {scaled:.3} > {MAX_DELTA_SQRT_N})"
                )));
            }
        }
        Ok(())
    }

    fn satisfied(&self, simplex: &Simplex) -> bool {
        match self {
            StopRule::IterationBudget(p) => simplex.generation() >= *p,
            _ => {
                let delta = self.diameter_threshold(simplex.dim()).unwrap_or(0.0);
                simplex.diameter() <= delta
            }
        }
    }
}

/// Worst-case bisection count sufficient for error at most `ε`:
/// `⌈n · log_{√3/2}(πε / (2√(2n)))⌉`, or 0 when the log argument is at
/// least 1. The total label count is this plus `n`.
pub fn label_budget(dim: usize, epsilon: f64) -> Result<u64> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "target error must be positive, got {epsilon}"
        )));
    }
    let n = dim as f64;
    Ok(decay_steps(n, PI * epsilon / (2.0 * (2.0 * n).sqrt())))
}

/// Bisection count sufficient for the margin stop rule:
/// `⌈n · log_{√3/2}(γ / (2√(2n) R))⌉`, clamped at 0.
pub fn margin_label_budget(dim: usize, gamma: f64, radius: f64) -> Result<u64> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    if !(gamma > 0.0 && radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "margin and radius must be positive, got gamma = {gamma}, radius = {radius}"
        )));
    }
    let n = dim as f64;
    Ok(decay_steps(n, gamma / (2.0 * (2.0 * n).sqrt() * radius)))
}

fn decay_steps(n: f64, argument: f64) -> u64 {
    if argument >= 1.0 {
        return 0;
    }
    (n * argument.ln() / DECAY_FACTOR.ln()).ceil() as u64
}

/// One sample of a learning curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// Labels used so far.
    pub query_index: u64,
    /// Simplex diameter; only the simplex learner has one.
    pub diameter: Option<f64>,
    /// Generalization error of the current hypothesis.
    pub error: f64,
    /// Nanoseconds since the run started.
    pub wall_ns: u64,
}

/// Worst observed slack of each runtime check over a validating run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    pub min_barycentric: f64,
    pub max_affine_residual: f64,
    pub max_orthogonality: f64,
    /// Largest `(a_i·v)(a_j·v)`; negative when every cut separated its edge.
    pub max_side_product: f64,
    pub max_diameter_ratio: f64,
    pub max_facet_residual: f64,
    pub checks: u64,
}

impl Default for ValidationReport {
    fn default() -> Self {
        Self {
            min_barycentric: f64::INFINITY,
            max_affine_residual: 0.0,
            max_orthogonality: 0.0,
            max_side_product: f64::NEG_INFINITY,
            max_diameter_ratio: 0.0,
            max_facet_residual: 0.0,
            checks: 0,
        }
    }
}

impl ValidationReport {
    pub fn merge(&mut self, other: &ValidationReport) {
        self.min_barycentric = self.min_barycentric.min(other.min_barycentric);
        self.max_affine_residual = self.max_affine_residual.max(other.max_affine_residual);
        self.max_orthogonality = self.max_orthogonality.max(other.max_orthogonality);
        self.max_side_product = self.max_side_product.max(other.max_side_product);
        self.max_diameter_ratio = self.max_diameter_ratio.max(other.max_diameter_ratio);
        self.max_facet_residual = self.max_facet_residual.max(other.max_facet_residual);
        self.checks += other.checks;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Centroid of the final simplex.
    pub hypothesis: Hypothesis,
    pub labels_used: u64,
    pub bisections: u64,
    pub final_diameter: f64,
    pub final_simplex: Simplex,
    /// One point after the basis queries, then one per bisection.
    pub trace: Vec<TracePoint>,
    /// Present when the run validated its invariants.
    pub validation: Option<ValidationReport>,
}

/// Deliberate corruption of a run, for exercising the validator.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Keep the wrong half at this (1-based) bisection.
    FlipKeepSide { at_bisection: u64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VsmOptions {
    /// Check every invariant after each step and abort on the first
    /// violation. Costs an `O(n³)` solve per bisection.
    pub validate: bool,
    #[doc(hidden)]
    pub fault: Option<Fault>,
}

impl VsmOptions {
    pub fn validating() -> Self {
        Self {
            validate: true,
            fault: None,
        }
    }
}

struct Validator {
    report: ValidationReport,
    target: Vec<f64>,
}

impl Validator {
    fn violation(invariant: Invariant, iteration: u64, observed: f64) -> Error {
        Error::InvariantViolation {
            invariant,
            iteration,
            observed,
        }
    }

    fn check_simplex(&mut self, simplex: &Simplex) -> Result<()> {
        let it = simplex.generation();
        let weights = simplex.barycentric(&self.target)?;
        let min = weights.iter().copied().fold(f64::INFINITY, f64::min);
        let sum_residual = (weights.iter().sum::<f64>() - 1.0).abs();
        let ratio = simplex.diameter() / diameter_envelope(simplex.dim(), it);
        let facet = simplex.facet_residual();
        let r = &mut self.report;
        r.min_barycentric = r.min_barycentric.min(min);
        r.max_affine_residual = r.max_affine_residual.max(sum_residual);
        r.max_diameter_ratio = r.max_diameter_ratio.max(ratio);
        r.max_facet_residual = r.max_facet_residual.max(facet);
        r.checks += 1;
        if min < tolerance::CONTAINMENT {
            return Err(Self::violation(Invariant::Containment, it, min));
        }
        if sum_residual > tolerance::AFFINE_SUM {
            return Err(Self::violation(Invariant::AffineSum, it, sum_residual));
        }
        if ratio > tolerance::DIAMETER_RATIO {
            return Err(Self::violation(Invariant::DiameterDecay, it, ratio));
        }
        if facet > tolerance::FACET {
            return Err(Self::violation(Invariant::FacetHyperplane, it, facet));
        }
        Ok(())
    }

    fn check_cut(
        &mut self,
        iteration: u64,
        spanning: &[Vec<f64>],
        normal: &[f64],
        side_i: f64,
        side_j: f64,
    ) -> Result<()> {
        let residual = spanning
            .iter()
            .map(|x| dot(normal, x).abs())
            .fold(0.0, f64::max);
        let product = side_i * side_j;
        let r = &mut self.report;
        r.max_orthogonality = r.max_orthogonality.max(residual);
        r.max_side_product = r.max_side_product.max(product);
        if residual > tolerance::ORTHOGONALITY {
            return Err(Self::violation(Invariant::Orthogonality, iteration, residual));
        }
        if Label::of(side_i) == Label::of(side_j) {
            return Err(Self::violation(Invariant::Halving, iteration, product));
        }
        Ok(())
    }
}

/// Centroid of the current simplex, scaled onto the L1 sphere.
fn centroid_hypothesis(simplex: &Simplex) -> Result<Hypothesis> {
    // The centroid already sits on the orthant facet; normalization only
    // removes rounding.
    Hypothesis::normalize(simplex.centroid())
}

fn run_result(
    simplex: &Simplex,
    labels_used: u64,
    trace: Vec<TracePoint>,
    validation: Option<ValidationReport>,
) -> Result<RunResult> {
    Ok(RunResult {
        hypothesis: centroid_hypothesis(simplex)?,
        labels_used,
        bisections: simplex.generation(),
        final_diameter: simplex.diameter(),
        final_simplex: simplex.clone(),
        trace,
        validation,
    })
}

/// Learns the oracle's halfspace with membership queries until `stop` holds.
///
/// A query limit on the oracle surfaces as [`Error::BudgetExceeded`] carrying
/// the run up to that point.
pub fn run_vsm(
    oracle: &mut MembershipOracle,
    dim: usize,
    stop: &StopRule,
    options: &VsmOptions,
) -> Result<RunResult> {
    stop.check(dim)?;
    if oracle.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: oracle.dim(),
        });
    }
    let started = Instant::now();
    let first_query = oracle.queries();
    let labels_used = |o: &MembershipOracle| o.queries() - first_query;
    let elapsed = || started.elapsed().as_nanos() as u64;

    let mut validator = options.validate.then(|| Validator {
        report: ValidationReport::default(),
        target: oracle.target().coords().to_vec(),
    });

    let mut labels = Vec::with_capacity(dim);
    for axis in 0..dim {
        match oracle.label(&QueryPoint::basis(dim, axis)?) {
            Ok(y) => labels.push(y),
            Err(Error::QueryLimit { limit }) => {
                // Not even the initial simplex exists yet.
                return Err(Error::InvalidArgument(format!(
                    "query limit {limit} is below the {dim} basis queries"
                )));
            }
            Err(e) => return Err(e),
        }
    }
    let mut simplex = Simplex::init_orthant(&labels)?;
    if let Some(v) = validator.as_mut() {
        v.check_simplex(&simplex)?;
    }
    let mut trace = vec![TracePoint {
        query_index: labels_used(oracle),
        diameter: Some(simplex.diameter()),
        error: oracle.error_of(&simplex.centroid())?,
        wall_ns: elapsed(),
    }];

    while !stop.satisfied(&simplex) {
        let iteration = simplex.generation() + 1;
        let edge = simplex.longest_edge();
        let (i, j) = (edge.i, edge.j);
        let midpoint = simplex.midpoint(i, j);
        let mut spanning: Vec<Vec<f64>> = (0..dim)
            .filter(|&k| k != i && k != j)
            .map(|k| simplex.vertex(k).to_vec())
            .collect();
        spanning.push(midpoint);
        let normal = nullspace_unit(&conditioned(&spanning))?;

        let side_i = dot(simplex.vertex(i), &normal);
        if side_i.abs() <= tolerance::SIDE {
            return Err(Error::DegenerateSimplex(format!(
                "vertex {i} lies on the query hyperplane at bisection {iteration} \
                 (|a_i·v| = {:e})",
                side_i.abs()
            )));
        }
        if let Some(v) = validator.as_mut() {
            let side_j = dot(simplex.vertex(j), &normal);
            v.check_cut(iteration, &spanning, &normal, side_i, side_j)?;
        }

        let y = match oracle.label(&QueryPoint::new(normal)?) {
            Ok(y) => y,
            Err(Error::QueryLimit { limit }) => {
                let partial = run_result(
                    &simplex,
                    labels_used(oracle),
                    trace,
                    validator.map(|v| v.report),
                )?;
                return Err(Error::BudgetExceeded {
                    limit,
                    partial: Box::new(partial),
                });
            }
            Err(e) => return Err(e),
        };
        let mut replace = if y == Label::of(side_i) {
            Replace::Second
        } else {
            Replace::First
        };
        if options.fault == Some(Fault::FlipKeepSide { at_bisection: iteration }) {
            replace = match replace {
                Replace::First => Replace::Second,
                Replace::Second => Replace::First,
            };
        }
        simplex.bisect(i, j, replace)?;

        if let Some(v) = validator.as_mut() {
            v.check_simplex(&simplex)?;
            let used = labels_used(oracle);
            if used != dim as u64 + simplex.generation() {
                return Err(Validator::violation(
                    Invariant::LabelAccounting,
                    iteration,
                    used as f64,
                ));
            }
        }
        trace.push(TracePoint {
            query_index: labels_used(oracle),
            diameter: Some(simplex.diameter()),
            error: oracle.error_of(&simplex.centroid())?,
            wall_ns: elapsed(),
        });
    }

    let result = run_result(
        &simplex,
        labels_used(oracle),
        trace,
        validator.as_ref().map(|v| v.report),
    )?;
    if validator.is_some() {
        if let StopRule::TargetError(eps) = stop {
            let err = oracle.error_of(result.hypothesis.coords())?;
            if err > *eps {
                return Err(Validator::violation(
                    Invariant::FinalError,
                    result.bisections,
                    err,
                ));
            }
        }
    }
    Ok(result)
}

/// Runs until the diameter reaches `γ / (2√n R)`. For a target separating
/// its data with margin `γ` (in unit L2 normalization) on points of norm at
/// most `R`, the returned hypothesis scores every such point with
/// `y (w·x) ≥ γ / (2√n)`.
pub fn run_margin_vsm(
    oracle: &mut MembershipOracle,
    dim: usize,
    gamma: f64,
    radius: f64,
    options: &VsmOptions,
) -> Result<RunResult> {
    run_vsm(oracle, dim, &StopRule::MarginThreshold { gamma, radius }, options)
}

/// Same row space as `rows`, better conditioned once the vertices cluster.
///
/// Late in a run every vertex sits within the diameter of the others, so the
/// raw rows are nearly parallel and their singular values shrink with the
/// diameter. Keeping the last row and replacing the others by unit
/// differences from it leaves only the simplex's shape in the condition
/// number.
fn conditioned(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let anchor = rows.last().expect("at least one spanning row");
    let unit = |v: Vec<f64>| {
        let norm = crate::linalg::l2_norm(&v);
        if norm > 0.0 {
            v.into_iter().map(|c| c / norm).collect()
        } else {
            v
        }
    };
    let mut out: Vec<Vec<f64>> = rows[..rows.len() - 1]
        .iter()
        .map(|r| unit(r.iter().zip(anchor).map(|(a, b)| a - b).collect()))
        .collect();
    out.push(unit(anchor.clone()));
    out
}
