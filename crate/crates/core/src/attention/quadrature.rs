//! Gauss–Hermite rules for expectations over a standard normal variable.
//!
//! Nodes and weights come from the Golub–Welsch eigen-decomposition of the
//! Jacobi matrix of the probabilists' Hermite polynomials. Rules on the
//! doubling ladder are built once and cached.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Node counts available to the refinement loop.
pub const LADDER: [usize; 6] = [16, 32, 64, 128, 256, 512];

static RULES: [OnceLock<GaussHermite>; LADDER.len()] = [const { OnceLock::new() }; LADDER.len()];

#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    /// Sum to one.
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds an `n`-point rule for `E[f(Z)]`, `Z ~ N(0, 1)`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let off = (k as f64).sqrt();
            jacobi[(k - 1, k)] = off;
            jacobi[(k, k - 1)] = off;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    /// Cached rule for a ladder node count.
    pub fn cached(n: usize) -> Option<&'static GaussHermite> {
        LADDER
            .iter()
            .position(|&m| m == n)
            .map(|i| RULES[i].get_or_init(|| GaussHermite::new(n)))
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSettings {
    /// First rule tried; must be on [`LADDER`].
    pub initial_nodes: usize,
    /// Largest rule tried; must be on [`LADDER`].
    pub max_nodes: usize,
    /// Accept when two successive rules agree to this relative tolerance.
    pub rel_tol: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            initial_nodes: 32,
            max_nodes: 512,
            rel_tol: 1e-8,
        }
    }
}

/// Refinement doubling failed to settle.
#[derive(Debug, Clone, PartialEq)]
pub struct NonConvergence {
    pub nodes: usize,
    pub estimate: f64,
    pub previous: f64,
}

/// `E[f(Z)]` refined by doubling the node count until successive estimates
/// agree. Returns the finer estimate and its node count.
pub fn normal_expectation(
    f: impl Fn(f64) -> f64,
    settings: &QuadratureSettings,
) -> Result<(f64, usize), NonConvergence> {
    let start = LADDER
        .iter()
        .position(|&n| n >= settings.initial_nodes)
        .unwrap_or(0);
    let mut n = LADDER[start];
    let mut previous = GaussHermite::cached(n).expect("ladder rule").expect(&f);
    for &next in &LADDER[start + 1..] {
        if next > settings.max_nodes {
            break;
        }
        let estimate = GaussHermite::cached(next).expect("ladder rule").expect(&f);
        let scale = estimate.abs().max(previous.abs());
        if (estimate - previous).abs() <= settings.rel_tol * scale {
            return Ok((estimate, next));
        }
        if !estimate.is_finite() {
            return Err(NonConvergence {
                nodes: next,
                estimate,
                previous,
            });
        }
        previous = estimate;
        n = next;
    }
    Err(NonConvergence {
        nodes: n,
        estimate: previous,
        previous,
    })
}
