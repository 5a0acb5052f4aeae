//! Comparison learners: uncertainty sampling and passive random sampling,
//! both refitting a hard-margin linear separator after every label.
//!
//! The separator is found as the minimum-norm point `p` of the convex hull
//! of the signed examples `z_k = y_k x_k`; its direction is the max-margin
//! homogeneous separator and `‖p‖` is the optimal margin. The hull point is
//! computed with Wolfe's minimum-norm-point algorithm, warm-started from the
//! previous fit as examples arrive. Any feasible `p` bounds the optimum
//! from above, which gives a stopping certificate:
//! `min_k z_k·p ≥ (1 − τ)‖p‖²` implies the margin of `p/‖p‖` is within a
//! factor `1 − τ` of optimal.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{dot, gaussian_vector, l2_norm, sample_l2_sphere, SeededRng};
use crate::oracle::MembershipOracle;
use crate::types::{Label, QueryPoint};
use crate::vsm::TracePoint;

/// Default relative margin tolerance of [`max_margin_fit`].
pub const DEFAULT_TOLERANCE: f64 = 0.1;

/// Major cycles allowed per fit before giving up.
pub const MAX_ITERATIONS: u64 = 100_000;

/// Corral weights at or below this are dropped.
const WEIGHT_TOL: f64 = 1e-12;

/// Squared hull-point norm below which the data are declared inseparable.
const ORIGIN_TOL: f64 = 1e-24;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledSet {
    points: Vec<Vec<f64>>,
    labels: Vec<Label>,
}

impl LabeledSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, point: Vec<f64>, label: Label) -> Result<()> {
        if let Some(first) = self.points.first() {
            if first.len() != point.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: point.len(),
                });
            }
        }
        self.points.push(point);
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Smallest `y (w·x)` over the set.
    pub fn min_margin(&self, w: &[f64]) -> f64 {
        self.points
            .iter()
            .zip(&self.labels)
            .map(|(x, y)| y.as_f64() * dot(w, x))
            .fold(f64::INFINITY, f64::min)
    }

    #[cfg(test)]
    fn signed(&self, k: usize) -> Vec<f64> {
        let y = self.labels[k].as_f64();
        self.points[k].iter().map(|x| y * x).collect()
    }
}

/// A max-margin fit that can be warm-started as examples arrive.
///
/// The hull point is maintained by Wolfe's minimum-norm-point method: a
/// corral of affinely independent atoms (at most `n + 1`) whose affine
/// minimizer is kept inside their convex hull. Each major cycle adds the
/// atom scoring lowest against the current point; minor cycles drop atoms
/// until the affine minimizer has positive weights again.
#[derive(Debug, Clone)]
pub struct MaxMarginLearner {
    tolerance: f64,
    max_iterations: u64,
    atoms: Vec<Vec<f64>>,
    corral: Vec<usize>,
    weights: Vec<f64>,
    hull_point: Vec<f64>,
}

impl MaxMarginLearner {
    pub fn new(tolerance: f64) -> Self {
        Self {
            tolerance,
            max_iterations: MAX_ITERATIONS,
            atoms: Vec::new(),
            corral: Vec::new(),
            weights: Vec::new(),
            hull_point: Vec::new(),
        }
    }

    /// Caps the number of major cycles per fit.
    pub fn with_max_iterations(mut self, cap: u64) -> Self {
        self.max_iterations = cap;
        self
    }

    pub fn push(&mut self, point: &[f64], label: Label) {
        let z: Vec<f64> = point.iter().map(|x| label.as_f64() * x).collect();
        if self.atoms.is_empty() {
            self.hull_point = z.clone();
            self.corral = vec![0];
            self.weights = vec![1.0];
        }
        self.atoms.push(z);
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Unit separator whose margin is within `1 − τ` of the optimum.
    pub fn fit(&mut self) -> Result<Vec<f64>> {
        if self.atoms.is_empty() {
            return Err(Error::InvalidArgument("cannot fit an empty set".into()));
        }
        let keep = 1.0 - self.tolerance;
        for _ in 0..self.max_iterations {
            let norm2 = dot(&self.hull_point, &self.hull_point);
            if norm2 <= ORIGIN_TOL {
                return Err(inseparable());
            }
            let (toward, min_score) = self
                .atoms
                .iter()
                .map(|z| dot(z, &self.hull_point))
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty");
            if min_score >= keep * norm2 {
                return Ok(self.direction());
            }
            if self.corral.contains(&toward) {
                // No atom improves the point at working precision.
                if min_score > 0.0 {
                    return Ok(self.direction());
                }
                return Err(inseparable());
            }
            self.corral.push(toward);
            self.weights.push(0.0);
            self.minor_cycles()?;
            if dot(&self.hull_point, &self.hull_point) >= norm2 {
                // Stalled at working precision.
                if min_score > 0.0 {
                    return Ok(self.direction());
                }
                return Err(inseparable());
            }
        }
        Err(Error::NonConvergence {
            reason: format!(
                "no {}-optimal margin after {} major cycles",
                self.tolerance, self.max_iterations
            ),
            partial: Vec::new(),
        })
    }

    fn direction(&self) -> Vec<f64> {
        let norm = l2_norm(&self.hull_point);
        self.hull_point.iter().map(|c| c / norm).collect()
    }

    fn minor_cycles(&mut self) -> Result<()> {
        loop {
            let affine = self.affine_minimizer();
            if affine.iter().all(|a| *a > WEIGHT_TOL) {
                self.weights = affine;
                break;
            }
            // Walk from the current weights towards the affine minimizer
            // until the first weight hits zero, then drop the zeros.
            let theta = self
                .weights
                .iter()
                .zip(&affine)
                .filter(|(_, a)| **a <= WEIGHT_TOL)
                .map(|(w, a)| w / (w - a))
                .fold(1.0, f64::min);
            let mut kept_corral = Vec::with_capacity(self.corral.len());
            let mut kept_weights = Vec::with_capacity(self.corral.len());
            for ((k, w), a) in self.corral.iter().zip(&self.weights).zip(&affine) {
                let moved = (1.0 - theta) * w + theta * a;
                if moved > WEIGHT_TOL {
                    kept_corral.push(*k);
                    kept_weights.push(moved);
                }
            }
            if kept_corral.is_empty() {
                return Err(inseparable());
            }
            self.corral = kept_corral;
            self.weights = kept_weights;
            if self.corral.len() == 1 {
                self.weights = vec![1.0];
                break;
            }
        }
        let total: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= total);
        let mut p = vec![0.0; self.hull_point.len()];
        for (k, w) in self.corral.iter().zip(&self.weights) {
            p.iter_mut()
                .zip(&self.atoms[*k])
                .for_each(|(acc, x)| *acc += w * x);
        }
        self.hull_point = p;
        Ok(())
    }

    // Weights (summing to one) of the minimum-norm point of the corral's
    // affine hull, by least squares on differences from the first atom.
    fn affine_minimizer(&self) -> Vec<f64> {
        let m = self.corral.len();
        if m == 1 {
            return vec![1.0];
        }
        let base = &self.atoms[self.corral[0]];
        let dim = base.len();
        let diffs = DMatrix::from_fn(dim, m - 1, |r, c| self.atoms[self.corral[c + 1]][r] - base[r]);
        let rhs = DVector::from_iterator(dim, base.iter().map(|x| -x));
        let beta = diffs
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .unwrap_or_else(|_| DVector::zeros(m - 1));
        let mut out = Vec::with_capacity(m);
        out.push(1.0 - beta.sum());
        out.extend(beta.iter().copied());
        out
    }
}

const INSEPARABLE: &str = "origin lies in the hull of the signed examples; data not separable";

fn inseparable() -> Error {
    Error::NonConvergence {
        reason: INSEPARABLE.into(),
        partial: Vec::new(),
    }
}

/// Hard-margin homogeneous separator of `data`, as a unit vector whose
/// margin is at least `(1 − τ)` times the optimal one.
pub fn max_margin_fit(data: &LabeledSet, tolerance: f64) -> Result<Vec<f64>> {
    if !(tolerance > 0.0 && tolerance < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "margin tolerance must lie in (0, 1), got {tolerance}"
        )));
    }
    let mut learner = MaxMarginLearner::new(tolerance);
    for (k, y) in data.labels.iter().enumerate() {
        learner.push(&data.points[k], *y);
    }
    learner.fit()
}

/// A uniform random unit vector orthogonal to `current`: a point on the
/// current decision boundary.
pub fn uncertainty_query(current: &[f64], rng: &mut SeededRng) -> Result<QueryPoint> {
    let dim = current.len();
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let norm = l2_norm(current);
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let unit: Vec<f64> = current.iter().map(|c| c / norm).collect();
    loop {
        let mut g = gaussian_vector(dim, rng);
        for _ in 0..2 {
            let along = dot(&g, &unit);
            g.iter_mut().zip(&unit).for_each(|(x, u)| *x -= along * u);
        }
        if l2_norm(&g) > 1e-6 {
            return QueryPoint::normalize(g);
        }
    }
}

struct Curve {
    started: Instant,
    points: Vec<TracePoint>,
}

impl Curve {
    fn new() -> Self {
        Self {
            started: Instant::now(),
            points: Vec::new(),
        }
    }

    fn record(&mut self, oracle: &MembershipOracle, first_query: u64, w: &[f64]) -> Result<()> {
        self.points.push(TracePoint {
            query_index: oracle.queries() - first_query,
            diameter: None,
            error: oracle.error_of(w)?,
            wall_ns: self.started.elapsed().as_nanos() as u64,
        });
        Ok(())
    }

    fn fail(self, err: Error) -> Error {
        match err {
            Error::NonConvergence { reason, .. } => Error::NonConvergence {
                reason,
                partial: self.points,
            },
            other => other,
        }
    }
}

/// Uncertainty sampling: query the `n` basis vectors, then repeatedly query
/// a random point on the current max-margin boundary and refit, until
/// `budget` labels are used. Records one curve point per fit.
pub fn run_uncertainty(
    oracle: &mut MembershipOracle,
    dim: usize,
    budget: u64,
    rng: &mut SeededRng,
) -> Result<Vec<TracePoint>> {
    check_run(oracle, dim)?;
    if budget <= dim as u64 {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} must exceed the {dim} initial basis queries"
        )));
    }
    let first_query = oracle.queries();
    let mut curve = Curve::new();
    let mut learner = MaxMarginLearner::new(DEFAULT_TOLERANCE);
    for axis in 0..dim {
        let e = QueryPoint::basis(dim, axis)?;
        let y = oracle.label(&e)?;
        learner.push(e.coords(), y);
    }
    let mut w = match learner.fit() {
        Ok(w) => w,
        Err(e) => return Err(curve.fail(e)),
    };
    curve.record(oracle, first_query, &w)?;
    while oracle.queries() - first_query < budget {
        let q = uncertainty_query(&w, rng)?;
        let y = oracle.label(&q)?;
        learner.push(q.coords(), y);
        match refit(&mut learner) {
            Ok(Some(fit)) => w = fit,
            Ok(None) => {}
            Err(e) => return Err(curve.fail(e)),
        }
        curve.record(oracle, first_query, &w)?;
    }
    Ok(curve.points)
}

/// Passive learning: label `budget` uniform sphere points, refitting after
/// each one. Records one curve point per label.
///
/// Until the first fit succeeds the hypothesis is the first labeled point,
/// signed by its label.
pub fn run_random(
    oracle: &mut MembershipOracle,
    dim: usize,
    budget: u64,
    rng: &mut SeededRng,
) -> Result<Vec<TracePoint>> {
    check_run(oracle, dim)?;
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be positive".into()));
    }
    let first_query = oracle.queries();
    let mut curve = Curve::new();
    let mut learner = MaxMarginLearner::new(DEFAULT_TOLERANCE);
    let mut w: Vec<f64> = Vec::new();
    while oracle.queries() - first_query < budget {
        let x = sample_l2_sphere(dim, rng)?;
        let y = oracle.label(&x)?;
        if w.is_empty() {
            w = x.coords().iter().map(|c| y.as_f64() * c).collect();
        }
        learner.push(x.coords(), y);
        match refit(&mut learner) {
            Ok(Some(fit)) => w = fit,
            Ok(None) => {}
            Err(e) => return Err(curve.fail(e)),
        }
        curve.record(oracle, first_query, &w)?;
    }
    Ok(curve.points)
}

/// Refits after a new label. Oracle labels always come from a halfspace, so
/// an "inseparable" verdict means the margin fell below working precision;
/// the previous hypothesis is then kept, as it still agrees with every label
/// up to rounding.
fn refit(learner: &mut MaxMarginLearner) -> Result<Option<Vec<f64>>> {
    match learner.fit() {
        Ok(w) => Ok(Some(w)),
        Err(Error::NonConvergence { reason, .. }) if reason == INSEPARABLE => Ok(None),
        Err(e) => Err(e),
    }
}

fn check_run(oracle: &MembershipOracle, dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    if oracle.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: oracle.dim(),
        });
    }
    Ok(())
}
