//! A synthetic membership oracle with a hidden target halfspace, plus the
//! error measures used to score hypotheses against it.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::linalg::{angle, dot, l2_norm, sample_l2_sphere, SeededRng};
use crate::types::{Hypothesis, Label, QueryPoint};

/// Labels points by the sign of their dot product with a hidden target.
///
/// The oracle is exact: every label equals `sign(x·w*)` with `sign(0) = +1`.
/// [`MembershipOracle::error_of`] lets callers score a hypothesis without
/// spending a label; the learners only use it to fill in traces.
#[derive(Debug, Clone)]
pub struct MembershipOracle {
    target: Hypothesis,
    queries: u64,
    limit: Option<u64>,
}

impl MembershipOracle {
    pub fn new(target: Hypothesis) -> Self {
        Self {
            target,
            queries: 0,
            limit: None,
        }
    }

    /// An oracle that refuses to answer once `limit` labels have been given.
    pub fn with_limit(target: Hypothesis, limit: u64) -> Self {
        Self {
            target,
            queries: 0,
            limit: Some(limit),
        }
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// Number of labels handed out so far.
    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn limit(&self) -> Option<u64> {
        self.limit
    }

    pub fn label(&mut self, x: &QueryPoint) -> Result<Label> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        if let Some(limit) = self.limit {
            if self.queries >= limit {
                return Err(Error::QueryLimit { limit });
            }
        }
        self.queries += 1;
        Ok(Label::of(dot(x.coords(), self.target.coords())))
    }

    /// Generalization error of `h` under the uniform sphere distribution.
    /// Does not count as a query.
    pub fn error_of(&self, h: &[f64]) -> Result<f64> {
        true_error(h, &self.target)
    }

    /// The hidden target. For evaluation and pairing only.
    pub fn target(&self) -> &Hypothesis {
        &self.target
    }
}

/// Disagreement probability between `h` and `target` for points uniform on
/// the L2 sphere: their angle divided by π.
pub fn true_error(h: &[f64], target: &Hypothesis) -> Result<f64> {
    Ok(angle(h, target.coords())? / PI)
}

/// Monte-Carlo estimate of the disagreement between `h` and `target` from
/// `samples` uniform points on the L2 sphere.
pub fn mc_error(h: &[f64], target: &Hypothesis, samples: u64, rng: &mut SeededRng) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let dim = target.dim();
    if h.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: h.len(),
        });
    }
    // Signs are scale invariant, so the Gaussian direction need not be
    // normalized onto the sphere.
    let mut x = vec![0.0; dim];
    let mut disagreements = 0u64;
    for _ in 0..samples {
        x.iter_mut().for_each(|c| *c = rng.sample(StandardNormal));
        if Label::of(dot(h, &x)) != Label::of(dot(target.coords(), &x)) {
            disagreements += 1;
        }
    }
    Ok(disagreements as f64 / samples as f64)
}

/// Smallest acceptance rate [`sample_margin_dataset`] will attempt.
pub const MIN_ACCEPTANCE: f64 = 1e-6;

/// Fraction of the radius-`radius` sphere in `R^dim` whose points lie at
/// distance at least `gamma` from a fixed hyperplane through the origin.
pub fn margin_acceptance(dim: usize, gamma: f64, radius: f64) -> f64 {
    let s = gamma / radius;
    if s <= 0.0 {
        return 1.0;
    }
    if s >= 1.0 {
        return 0.0;
    }
    // The squared coordinate of a uniform point on S^{n-1} is Beta(1/2, (n-1)/2).
    1.0 - beta_reg(0.5, (dim as f64 - 1.0) / 2.0, s * s)
}

/// Rejection-samples `count` points uniform on the radius-`radius` sphere
/// conditioned on `y (h·x) ≥ gamma`, labelled by `y = sign(h·x)`.
///
/// `separator` must have unit L2 norm.
pub fn sample_margin_dataset(
    separator: &[f64],
    gamma: f64,
    radius: f64,
    count: usize,
    rng: &mut SeededRng,
) -> Result<Vec<(Vec<f64>, Label)>> {
    let dim = separator.len();
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    if (l2_norm(separator) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("separator must have unit L2 norm".into()));
    }
    if !(gamma >= 0.0) || !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need gamma >= 0 and radius > 0, got gamma = {gamma}, radius = {radius}"
        )));
    }
    let acceptance = margin_acceptance(dim, gamma, radius);
    if acceptance < MIN_ACCEPTANCE {
        return Err(Error::InfeasibleMargin {
            gamma,
            radius,
            dim,
            acceptance,
        });
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let point: Vec<f64> = sample_l2_sphere(dim, rng)?
            .into_inner()
            .into_iter()
            .map(|c| c * radius)
            .collect();
        let score = dot(separator, &point);
        if score.abs() >= gamma {
            out.push((point, Label::of(score)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sample_l1_sphere;

    fn target(coords: &[f64]) -> Hypothesis {
        Hypothesis::normalize(coords.to_vec()).unwrap()
    }

    #[test]
    fn labels_follow_the_target() {
        let w = target(&[0.2, -0.5, 0.3]);
        let mut o = MembershipOracle::new(w.clone());
        let along = QueryPoint::normalize(w.coords().to_vec()).unwrap();
        let against = QueryPoint::normalize(w.coords().iter().map(|c| -c).collect()).unwrap();
        let ortho = QueryPoint::normalize(vec![0.5, 0.2, 0.0]).unwrap();
        assert_eq!(o.label(&along).unwrap(), Label::Positive);
        assert_eq!(o.label(&against).unwrap(), Label::Negative);
        assert_eq!(o.label(&ortho).unwrap(), Label::Positive);
        assert_eq!(o.label(&along).unwrap(), Label::Positive);
        assert_eq!(o.queries(), 4);

        let wrong = QueryPoint::basis(2, 0).unwrap();
        assert!(matches!(o.label(&wrong), Err(Error::DimensionMismatch { .. })));
        assert_eq!(o.queries(), 4);
    }

    #[test]
    fn query_limit() {
        let mut o = MembershipOracle::with_limit(target(&[1.0, 1.0]), 2);
        let x = QueryPoint::basis(2, 0).unwrap();
        o.label(&x).unwrap();
        o.label(&x).unwrap();
        assert!(matches!(o.label(&x), Err(Error::QueryLimit { limit: 2 })));
        assert_eq!(o.queries(), 2);
    }

    #[test]
    fn analytic_error_examples() {
        let w = target(&[0.5, 0.5]);
        assert_eq!(true_error(&[0.5, 0.5], &w).unwrap(), 0.0);
        assert!((true_error(&[1.0, -1.0], &w).unwrap() - 0.5).abs() < 1e-15);
        assert!((true_error(&[1.0, 0.0], &w).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(true_error(&[0.0, 0.0], &w), Err(Error::ZeroVector)));
    }

    #[test]
    fn monte_carlo_error_examples() {
        let mut rng = SeededRng::new(5);
        let w = target(&[0.3, -0.2, 0.5]);
        assert_eq!(mc_error(w.coords(), &w, 1000, &mut rng).unwrap(), 0.0);

        let ortho = [0.2, 0.3, 0.0];
        let m = 1_000_000;
        let e = mc_error(&ortho, &target(&[0.3, -0.2, 0.0]), m, &mut rng).unwrap();
        assert!((e - 0.5).abs() <= 0.002, "{e}");

        let a = sample_l1_sphere(4, &mut rng).unwrap();
        let b = sample_l1_sphere(4, &mut rng).unwrap();
        let exact = true_error(a.coords(), &b).unwrap();
        let est = mc_error(a.coords(), &b, m, &mut rng).unwrap();
        assert!((est - exact).abs() <= 4.0 * (exact * (1.0 - exact) / m as f64).sqrt());
        assert!(mc_error(a.coords(), &b, 0, &mut rng).is_err());
    }

    fn cap_fraction_by_quadrature(dim: usize, s: f64) -> f64 {
        // Density of one coordinate of a uniform point on S^{n-1} is
        // proportional to (1 − t²)^{(n−3)/2}; integrate with Simpson's rule.
        let density = |t: f64| (1.0 - t * t).max(0.0).powf((dim as f64 - 3.0) / 2.0);
        let simpson = |a: f64, b: f64| {
            let steps = 20_000;
            let h = (b - a) / steps as f64;
            let mut acc = density(a) + density(b);
            for k in 1..steps {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * density(a + k as f64 * h);
            }
            acc * h / 3.0
        };
        simpson(s, 1.0) / simpson(0.0, 1.0)
    }

    #[test]
    fn acceptance_matches_cap_measure() {
        for (dim, s) in [(5, 0.1), (5, 0.5), (7, 0.3), (9, 0.05)] {
            let analytic = margin_acceptance(dim, s, 1.0);
            let quad = cap_fraction_by_quadrature(dim, s);
            assert!((analytic - quad).abs() < 1e-7, "dim {dim}: {analytic} vs {quad}");
        }
        assert_eq!(margin_acceptance(5, 0.0, 1.0), 1.0);
        assert_eq!(margin_acceptance(5, 1.0, 1.0), 0.0);
    }

    #[test]
    fn margin_dataset_honours_margin() {
        let mut rng = SeededRng::new(11);
        let h = target(&[0.4, -0.1, 0.2, 0.2, 0.1]).to_unit_l2();
        let (gamma, radius) = (0.1, 1.0);
        let draws = 20_000;
        let data = sample_margin_dataset(&h, gamma, radius, draws, &mut rng).unwrap();
        assert_eq!(data.len(), draws);
        for (x, y) in &data {
            assert!((l2_norm(x) - radius).abs() < 1e-12);
            assert!(y.as_f64() * dot(&h, x) >= gamma - 1e-12);
        }

        // Empirical acceptance against the cap measure.
        let expected = cap_fraction_by_quadrature(5, gamma / radius);
        let trials = 100_000;
        let mut accepted = 0;
        for _ in 0..trials {
            let x = sample_l2_sphere(5, &mut rng).unwrap();
            if dot(&h, x.coords()).abs() >= gamma {
                accepted += 1;
            }
        }
        let rate = accepted as f64 / trials as f64;
        let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
        assert!((rate - expected).abs() < 4.0 * sigma, "{rate} vs {expected}");

        let all = sample_margin_dataset(&h, 0.0, 2.0, 100, &mut rng).unwrap();
        assert_eq!(all.len(), 100);
    }

    #[test]
    fn infeasible_margin() {
        let mut rng = SeededRng::new(0);
        let h = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(matches!(
            sample_margin_dataset(&h, 0.99, 1.0, 10, &mut rng),
            Err(Error::InfeasibleMargin { .. })
        ));
        assert!(matches!(
            sample_margin_dataset(&h, 1.5, 1.0, 10, &mut rng),
            Err(Error::InfeasibleMargin { .. })
        ));
        assert!(sample_margin_dataset(&[2.0, 0.0], 0.1, 1.0, 1, &mut rng).is_err());
    }
}
