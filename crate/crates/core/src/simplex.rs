//! The simplex that encloses the version space.
//!
//! Vertices are the rows of an `n × n` matrix. All of them lie on a single
//! facet of the L1 unit sphere, the one selected by the signs of the basis
//! queries, so every vertex `v` satisfies `Σ signs_i · v_i = 1`. Edge lengths
//! are cached and refreshed incrementally: a bisection moves one vertex, so
//! only the `n − 1` incident edges change.

use crate::error::{Error, Result};
use crate::linalg::{barycentric, distance};
use crate::types::Label;

/// Longest-edge bisection shrinks the diameter by at least this factor every
/// `n` bisections.
pub const DECAY_FACTOR: f64 = 0.866_025_403_784_438_6; // √3 / 2

/// Diameter of the initial orthant simplex.
pub const INITIAL_DIAMETER: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    vertices: Vec<Vec<f64>>,
    // Upper-triangular edge lengths, row-major over pairs i < j.
    edges: Vec<f64>,
    orthant_signs: Vec<Label>,
    generation: u64,
}

/// Which endpoint of the bisected edge is replaced by the midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Replace {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub length: f64,
}

fn pair_index(dim: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < dim);
    i * dim - i * (i + 1) / 2 + (j - i - 1)
}

impl Simplex {
    /// The simplex spanned by `labels_i · e_i`.
    pub fn init_orthant(labels: &[Label]) -> Result<Self> {
        let dim = labels.len();
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        let vertices = labels
            .iter()
            .enumerate()
            .map(|(i, y)| {
                let mut v = vec![0.0; dim];
                v[i] = y.as_f64();
                v
            })
            .collect();
        Ok(Self::from_parts(vertices, labels.to_vec(), 0))
    }

    /// Builds a simplex from explicit vertices. The vertices must lie on the
    /// facet `Σ signs_i · v_i = 1`.
    pub fn from_vertices(vertices: Vec<Vec<f64>>, orthant_signs: Vec<Label>) -> Result<Self> {
        let dim = orthant_signs.len();
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if vertices.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: vertices.len(),
            });
        }
        if let Some(v) = vertices.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        let s = Self::from_parts(vertices, orthant_signs, 0);
        let residual = s.facet_residual();
        if residual > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "vertices are off the orthant facet by {residual:e}"
            )));
        }
        Ok(s)
    }

    fn from_parts(vertices: Vec<Vec<f64>>, orthant_signs: Vec<Label>, generation: u64) -> Self {
        let dim = vertices.len();
        let mut edges = Vec::with_capacity(dim * (dim - 1) / 2);
        for i in 0..dim {
            for j in i + 1..dim {
                edges.push(distance(&vertices[i], &vertices[j]));
            }
        }
        Self {
            vertices,
            edges,
            orthant_signs,
            generation,
        }
    }

    pub fn dim(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, k: usize) -> &[f64] {
        &self.vertices[k]
    }

    pub fn orthant_signs(&self) -> &[Label] {
        &self.orthant_signs
    }

    /// Number of bisections applied since initialization.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn edge_length(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges[pair_index(self.dim(), a, b)]
    }

    /// The longest edge, ties broken by the lexicographically smallest pair.
    pub fn longest_edge(&self) -> Edge {
        let dim = self.dim();
        let mut best = Edge {
            i: 0,
            j: 1,
            length: self.edges[0],
        };
        let mut k = 0;
        for i in 0..dim {
            for j in i + 1..dim {
                if self.edges[k] > best.length {
                    best = Edge {
                        i,
                        j,
                        length: self.edges[k],
                    };
                }
                k += 1;
            }
        }
        best
    }

    pub fn diameter(&self) -> f64 {
        self.edges.iter().copied().fold(0.0, f64::max)
    }

    pub fn midpoint(&self, i: usize, j: usize) -> Vec<f64> {
        self.vertices[i]
            .iter()
            .zip(&self.vertices[j])
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// Replaces one endpoint of edge `(i, j)` by its midpoint, in place.
    pub fn bisect(&mut self, i: usize, j: usize, replace: Replace) -> Result<()> {
        let dim = self.dim();
        if i == j || i >= dim || j >= dim {
            return Err(Error::InvalidArgument(format!(
                "edge ({i}, {j}) is not a vertex pair of a {dim}-vertex simplex"
            )));
        }
        let mid = self.midpoint(i, j);
        if mid.iter().all(|c| *c == 0.0) {
            return Err(Error::DegenerateSimplex(format!(
                "midpoint of edge ({i}, {j}) is the origin"
            )));
        }
        let target = match replace {
            Replace::First => i,
            Replace::Second => j,
        };
        self.vertices[target] = mid;
        for k in 0..dim {
            if k != target {
                let (a, b) = if k < target { (k, target) } else { (target, k) };
                self.edges[pair_index(dim, a, b)] = distance(&self.vertices[a], &self.vertices[b]);
            }
        }
        if self.edge_length(i, j) == 0.0 {
            return Err(Error::DegenerateSimplex(format!(
                "edge ({i}, {j}) collapsed to zero length"
            )));
        }
        self.generation += 1;
        Ok(())
    }

    /// Arithmetic mean of the vertices.
    pub fn centroid(&self) -> Vec<f64> {
        let dim = self.dim();
        let mut c = vec![0.0; dim];
        for v in &self.vertices {
            c.iter_mut().zip(v).for_each(|(acc, x)| *acc += x);
        }
        c.iter_mut().for_each(|x| *x /= dim as f64);
        c
    }

    pub fn barycentric(&self, point: &[f64]) -> Result<Vec<f64>> {
        barycentric(&self.vertices, point)
    }

    /// Largest `|Σ signs_i · v_i − 1|` over all vertices.
    pub fn facet_residual(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| {
                let s: f64 = v
                    .iter()
                    .zip(&self.orthant_signs)
                    .map(|(x, y)| x * y.as_f64())
                    .sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest gap between a cached edge length and its recomputed value.
    pub fn cache_drift(&self) -> f64 {
        let fresh = Self::from_parts(self.vertices.clone(), self.orthant_signs.clone(), 0);
        self.edges
            .iter()
            .zip(&fresh.edges)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `√2 · (√3/2)^⌊p/n⌋`: the diameter bound after `p` longest-edge bisections
/// of the initial orthant simplex.
pub fn diameter_envelope(dim: usize, bisections: u64) -> f64 {
    INITIAL_DIAMETER * DECAY_FACTOR.powi((bisections / dim as u64) as i32)
}
