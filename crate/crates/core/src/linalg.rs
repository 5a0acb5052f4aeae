//! Small dense kernels: norms, angles, hyperplane normals, barycentric
//! coordinates and seeded sampling on the L1 and L2 spheres.
//!
//! Vectors are plain `&[f64]` slices. The matrix work (singular value and LU
//! decompositions) is delegated to `nalgebra`; everything here is sized for
//! the handful-of-dimensions problems the learner produces.

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::types::{Hypothesis, QueryPoint};

/// Relative singular-value floor below which a set of vectors is treated as
/// rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Largest `|v·x|` tolerated from [`nullspace_unit`].
pub const NULLSPACE_RESIDUAL_TOL: f64 = 1e-10;

/// Coordinates with magnitude below this do not decide the normal's sign.
pub const SIGN_TOL: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Angle between two nonzero vectors, in `[0, π]`.
///
/// Computed as `2·atan2(‖û − v̂‖, ‖û + v̂‖)` on the unit vectors. This equals
/// `acos` of the normalized dot product clamped to `[-1, 1]`, but keeps full
/// relative accuracy for nearly parallel inputs, where `acos` loses half the
/// digits.
pub fn angle(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let nu = l2_norm(u);
    let nv = l2_norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (a, b) = (a / nu, b / nv);
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    Ok(2.0 * diff.sqrt().atan2(sum.sqrt()))
}

/// Unit normal of the hyperplane through the origin spanned by `n − 1`
/// vectors of `R^n`.
///
/// The sign is fixed so that the first coordinate with magnitude above
/// [`SIGN_TOL`] is positive. Rank deficiency (smallest singular value below
/// [`RANK_TOL`] times the largest) is reported as
/// [`Error::DegenerateSimplex`].
pub fn nullspace_unit(vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let dim = vectors.len() + 1;
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
    }

    // Pad with a zero row so the decomposition is square and the null
    // direction appears among the right singular vectors.
    let m = DMatrix::from_fn(dim, dim, |r, c| if r < dim - 1 { vectors[r][c] } else { 0.0 });
    let svd = m.svd(false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::DegenerateSimplex("singular value decomposition failed".into()))?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let null_idx = order[0];
    let smallest_kept = svd.singular_values[order[1]];
    let largest = svd.singular_values[order[dim - 1]];
    if !(largest > 0.0) || smallest_kept < RANK_TOL * largest {
        return Err(Error::DegenerateSimplex(format!(
            "spanning set has rank below {} (singular value ratio {:e})",
            dim - 1,
            if largest > 0.0 { smallest_kept / largest } else { 0.0 }
        )));
    }

    let mut normal: Vec<f64> = v_t.row(null_idx).iter().copied().collect();
    let norm = l2_norm(&normal);
    normal.iter_mut().for_each(|c| *c /= norm);
    if let Some(first) = normal.iter().find(|c| c.abs() > SIGN_TOL) {
        if *first < 0.0 {
            normal.iter_mut().for_each(|c| *c = -*c);
        }
    }

    let residual = vectors
        .iter()
        .map(|x| dot(&normal, x).abs())
        .fold(0.0, f64::max);
    if residual > NULLSPACE_RESIDUAL_TOL {
        return Err(Error::DegenerateSimplex(format!(
            "normal residual {residual:e} exceeds {NULLSPACE_RESIDUAL_TOL:e}"
        )));
    }
    Ok(normal)
}

/// Solves `Aᵀ c = point` where the rows of `A` are the simplex vertices.
///
/// When `point` lies in the affine hull of the vertices the coefficients sum
/// to one; non-negative coefficients then certify containment.
pub fn barycentric(vertices: &[Vec<f64>], point: &[f64]) -> Result<Vec<f64>> {
    let dim = point.len();
    if vertices.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: vertices.len(),
        });
    }
    for v in vertices {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
    }
    let columns = DMatrix::from_fn(dim, dim, |r, c| vertices[c][r]);
    let rhs = nalgebra::DVector::from_column_slice(point);
    let solution = columns
        .full_piv_lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DegenerateSimplex("vertex matrix is singular".into()))?;
    if solution.iter().any(|c| !c.is_finite()) {
        return Err(Error::DegenerateSimplex(
            "barycentric solve produced non-finite weights".into(),
        ));
    }
    Ok(solution.iter().copied().collect())
}

/// A deterministic, seedable random stream. The same seed yields the same
/// stream for a given build.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Combines a base seed with a stream index through the SplitMix64
/// finalizer. Used to derive independent per-run seeds from a master seed.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn gaussian_vector(dim: usize, rng: &mut SeededRng) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Uniform sample from the L2 unit sphere in `R^dim` (normalized Gaussian).
pub fn sample_l2_sphere(dim: usize, rng: &mut SeededRng) -> Result<QueryPoint> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    loop {
        let g = gaussian_vector(dim, rng);
        if l2_norm(&g) > 0.0 {
            return QueryPoint::normalize(g);
        }
    }
}

/// Uniform sample from the L1 unit sphere in `R^dim`.
///
/// Magnitudes are normalized exponentials (uniform on the standard simplex)
/// and each coordinate gets an independent fair sign.
pub fn sample_l1_sphere(dim: usize, rng: &mut SeededRng) -> Result<Hypothesis> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let magnitudes: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = magnitudes.iter().sum();
    let coords = magnitudes
        .into_iter()
        .map(|m| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            sign * m / total
        })
        .collect();
    Hypothesis::normalize(coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

    fn gram_schmidt_normal(vectors: &[Vec<f64>]) -> Vec<f64> {
        // Orthonormalize the inputs, then remove their span from the basis
        // vector with the largest leftover.
        let dim = vectors.len() + 1;
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for v in vectors {
            let mut w = v.clone();
            for b in &basis {
                let p = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
            let n = l2_norm(&w);
            basis.push(w.into_iter().map(|x| x / n).collect());
        }
        let mut best = vec![0.0; dim];
        for axis in 0..dim {
            let mut w = vec![0.0; dim];
            w[axis] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let p = dot(&w, b);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
                }
            }
            if l2_norm(&w) > l2_norm(&best) {
                best = w;
            }
        }
        let n = l2_norm(&best);
        best.into_iter().map(|x| x / n).collect()
    }

    #[test]
    fn norms_of_small_vectors() {
        assert_eq!(l2_norm(&[3.0, 4.0]), 5.0);
        assert_eq!(l1_norm(&[3.0, 4.0]), 7.0);
        for n in 2..7 {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            assert_eq!(l2_norm(&e), 1.0);
            assert_eq!(l1_norm(&e), 1.0);
            let flat = vec![1.0 / n as f64; n];
            assert!((l1_norm(&flat) - 1.0).abs() < 1e-15);
            assert!((l2_norm(&flat) - 1.0 / (n as f64).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn angle_examples() {
        assert_eq!(angle(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 0.0);
        assert!((angle(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((angle(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert!((angle(&[1.0, 1.0], &[-2.0, -2.0]).unwrap() - PI).abs() < 1e-15);
        // agrees with the clamped arccos away from the endpoints
        let (u, v) = ([0.3, -1.2, 0.4], [1.1, 0.2, -0.7]);
        let cos = (dot(&u, &v) / (l2_norm(&u) * l2_norm(&v))).clamp(-1.0, 1.0);
        assert!((angle(&u, &v).unwrap() - cos.acos()).abs() < 1e-14);
        assert!(matches!(angle(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroVector)));
        assert!(matches!(
            angle(&[1.0, 0.0], &[1.0, 0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn nullspace_examples() {
        let v = nullspace_unit(&[vec![0.5, 0.5]]).unwrap();
        assert!((v[0] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((v[1] + FRAC_1_SQRT_2).abs() < 1e-15);

        let v = nullspace_unit(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert!(v[0].abs() < 1e-15 && v[1].abs() < 1e-15);
        assert!((v[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nullspace_matches_gram_schmidt_in_six_dims() {
        let mut rng = SeededRng::new(6);
        let inputs: Vec<Vec<f64>> = (0..5).map(|_| gaussian_vector(6, &mut rng)).collect();
        let v = nullspace_unit(&inputs).unwrap();
        let reference = gram_schmidt_normal(&inputs);
        let aligned = dot(&v, &reference).abs();
        assert!((aligned - 1.0).abs() < 1e-12, "alignment {aligned}");
        for x in &inputs {
            assert!(dot(&v, x).abs() < 1e-10);
        }
    }

    #[test]
    fn nullspace_rejects_rank_deficiency() {
        let err = nullspace_unit(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]).unwrap_err();
        assert!(matches!(err, Error::DegenerateSimplex(_)));
        let err = nullspace_unit(&[vec![0.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::DegenerateSimplex(_)));
        assert!(matches!(
            nullspace_unit(&[vec![1.0, 0.0, 0.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn barycentric_examples() {
        let verts = vec![vec![0.75, 0.25], vec![0.5, 0.5]];
        let c = barycentric(&verts, &[0.7, 0.3]).unwrap();
        assert!((c[0] - 0.8).abs() < 1e-12 && (c[1] - 0.2).abs() < 1e-12);

        let verts = vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ];
        let c = barycentric(&verts, &verts[2]).unwrap();
        assert_eq!(c, vec![0.0, 0.0, 1.0, 0.0]);
        let centroid = [0.25, -0.25, 0.25, 0.25];
        let c = barycentric(&verts, &centroid).unwrap();
        assert!(c.iter().all(|x| (x - 0.25).abs() < 1e-15));

        let singular = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        assert!(matches!(
            barycentric(&singular, &[1.0, 1.0]),
            Err(Error::DegenerateSimplex(_))
        ));
    }

    #[test]
    fn samplers_land_on_their_spheres() {
        let mut rng = SeededRng::new(1);
        for dim in 2..12 {
            for _ in 0..50 {
                let x = sample_l2_sphere(dim, &mut rng).unwrap();
                assert!((l2_norm(x.coords()) - 1.0).abs() < 1e-12);
                let w = sample_l1_sphere(dim, &mut rng).unwrap();
                assert!((l1_norm(w.coords()) - 1.0).abs() < 1e-12);
            }
        }
        assert!(matches!(sample_l1_sphere(1, &mut rng), Err(Error::InvalidDimension(1))));
        assert!(matches!(sample_l2_sphere(1, &mut rng), Err(Error::InvalidDimension(1))));
    }

    fn ks_uniform(mut samples: Vec<f64>) -> f64 {
        // samples already mapped to [0, 1)
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        samples
            .iter()
            .enumerate()
            .map(|(i, &u)| {
                let lo = u - i as f64 / n;
                let hi = (i + 1) as f64 / n - u;
                lo.max(hi)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn l2_sampler_is_uniform_in_two_dims() {
        let mut rng = SeededRng::new(2024);
        let n = 100_000;
        let mut mean = [0.0; 2];
        let angles: Vec<f64> = (0..n)
            .map(|_| {
                let x = sample_l2_sphere(2, &mut rng).unwrap();
                mean[0] += x.coords()[0];
                mean[1] += x.coords()[1];
                let a = x.coords()[1].atan2(x.coords()[0]);
                a.rem_euclid(2.0 * PI) / (2.0 * PI)
            })
            .collect();
        let d = ks_uniform(angles);
        assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
        for m in mean {
            assert!((m / n as f64).abs() < 4.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn l1_sampler_marginal_and_signs() {
        let mut rng = SeededRng::new(77);
        let n = 100_000;
        let firsts: Vec<f64> = (0..n)
            .map(|_| sample_l1_sphere(2, &mut rng).unwrap().coords()[0].abs())
            .collect();
        let d = ks_uniform(firsts);
        assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");

        let draws = 10_000;
        let dim = 4;
        let mut positives = vec![0usize; dim];
        for _ in 0..draws {
            let w = sample_l1_sphere(dim, &mut rng).unwrap();
            for (p, c) in positives.iter_mut().zip(w.coords()) {
                if *c > 0.0 {
                    *p += 1;
                }
            }
        }
        let sigma = (draws as f64 * 0.25).sqrt();
        for p in positives {
            assert!((p as f64 - draws as f64 / 2.0).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::new(99);
        let mut b = SeededRng::new(99);
        for _ in 0..20 {
            let x = sample_l2_sphere(5, &mut a).unwrap();
            let y = sample_l2_sphere(5, &mut b).unwrap();
            assert_eq!(x, y);
        }
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
        assert_ne!(mix_seed(1, 0), mix_seed(2, 0));
    }

    proptest! {
        #[test]
        fn nullspace_residuals_across_dims(dim in 2usize..=12, seed in any::<u64>()) {
            let mut rng = SeededRng::new(seed);
            let inputs: Vec<Vec<f64>> = (0..dim - 1).map(|_| gaussian_vector(dim, &mut rng)).collect();
            let v = nullspace_unit(&inputs).unwrap();
            prop_assert!((l2_norm(&v) - 1.0).abs() <= 1e-12);
            for x in &inputs {
                prop_assert!(dot(&v, x).abs() <= 1e-10);
            }
        }

        #[test]
        fn barycentric_recovers_convex_weights(dim in 2usize..=10, seed in any::<u64>()) {
            let mut rng = SeededRng::new(seed);
            let verts: Vec<Vec<f64>> = (0..dim).map(|_| gaussian_vector(dim, &mut rng)).collect();
            let raw: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let mut point = vec![0.0; dim];
            for (w, v) in weights.iter().zip(&verts) {
                point.iter_mut().zip(v).for_each(|(p, x)| *p += w * x);
            }
            let c = barycentric(&verts, &point).unwrap();
            for (a, b) in c.iter().zip(&weights) {
                prop_assert!((a - b).abs() <= 1e-8);
            }
        }

        #[test]
        fn angle_symmetric_and_scale_invariant(
            u in proptest::collection::vec(-10.0f64..10.0, 3),
            v in proptest::collection::vec(-10.0f64..10.0, 3),
            alpha in 0.01f64..100.0,
        ) {
            prop_assume!(l2_norm(&u) > 1e-3 && l2_norm(&v) > 1e-3);
            let a = angle(&u, &v).unwrap();
            prop_assert!((a - angle(&v, &u).unwrap()).abs() <= 1e-12);
            let scaled: Vec<f64> = u.iter().map(|x| alpha * x).collect();
            prop_assert!((a - angle(&scaled, &v).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn l1_bounded_by_sqrt_n_l2(v in proptest::collection::vec(-5.0f64..5.0, 2..20)) {
            let n = v.len() as f64;
            prop_assert!(l1_norm(&v) <= n.sqrt() * l2_norm(&v) * (1.0 + 1e-12));
        }
    }
}
