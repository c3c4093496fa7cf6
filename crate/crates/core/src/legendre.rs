//! Shifted orthonormal Legendre polynomials on `[0, 1]` and Gauss-Legendre rules.
//!
//! The basis `P_j` satisfies `∫₀¹ P_i P_j = δ_ij` with positive leading
//! coefficient, i.e. `P_j(x) = √(2j+1) L_j(2x − 1)` with `L_j` the classical
//! Legendre polynomial. Everything here is driven by the three-term recurrence
//!
//! ```text
//! (x − ½) P_j(x) = β_{j+1} P_{j+1}(x) + β_j P_{j−1}(x),   β_j = j ξ_j,   ξ_j = 1 / (2√(4j² − 1))
//! ```
//!
//! with `P_0 = 1`, `P_1 = (x − ½)/ξ_1 = √3 (2x − 1)`. The bare `ξ_j` give the
//! antiderivatives:
//!
//! ```text
//! ∫₀ˣ P_0 = ξ_0 P_0(x) + ξ_1 P_1(x)                 (ξ_0 = ½)
//! ∫₀ˣ P_j = ξ_{j+1} P_{j+1}(x) − ξ_j P_{j−1}(x),    j ≥ 1
//! ```

use crate::error::{EquipError, Result};

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-15;

/// `ξ_i = 1 / (2√|4i² − 1|)`; `ξ_0 = ½`.
pub fn xi(i: usize) -> f64 {
    let i = i as f64;
    1.0 / (2.0 * (4.0 * i * i - 1.0).abs().sqrt())
}

/// Recurrence coefficient `β_j = j ξ_j`.
fn beta(j: usize) -> f64 {
    j as f64 * xi(j)
}

/// Evaluates `P_0(x), …, P_n(x)` into `out` (length `n + 1`).
pub fn legendre_values(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    let t = x - 0.5;
    out[1] = t / xi(1);
    for j in 1..out.len() - 1 {
        out[j + 1] = (t * out[j] - beta(j) * out[j - 1]) / beta(j + 1);
    }
}

/// `P_j(x)`.
pub fn legendre_eval(j: usize, x: f64) -> f64 {
    let mut vals = vec![0.0; j + 1];
    legendre_values(x, &mut vals);
    vals[j]
}

/// `∫₀ᶜ P_j(x) dx` via the banded antiderivative identity.
pub fn legendre_int_eval(j: usize, c: f64) -> f64 {
    let mut vals = vec![0.0; j + 2];
    legendre_values(c, &mut vals);
    antiderivative_from_values(j, &vals)
}

/// Antiderivative `∫₀ᶜ P_j` from precomputed values `P_0(c) … P_{j+1}(c)`.
pub(crate) fn antiderivative_from_values(j: usize, vals: &[f64]) -> f64 {
    if j == 0 {
        xi(0) * vals[0] + xi(1) * vals[1]
    } else {
        xi(j + 1) * vals[j + 1] - xi(j) * vals[j - 1]
    }
}

/// `(P_n(x), P_n'(x))`, used by the Newton root refinement.
fn value_and_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let t = x - 0.5;
    let (mut p_prev, mut p) = (1.0, t / xi(1));
    let (mut d_prev, mut d) = (0.0, 1.0 / xi(1));
    for j in 1..n {
        let p_next = (t * p - beta(j) * p_prev) / beta(j + 1);
        let d_next = (p + t * d - beta(j) * d_prev) / beta(j + 1);
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d)
}

/// A `k`-point Gauss-Legendre rule on `[0, 1]`, exact for polynomials of degree `≤ 2k − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn k(&self) -> usize {
        self.nodes.len()
    }

    /// Ascending nodes in `(0, 1)`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ b_ℓ g(c_ℓ)`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }
}

/// Builds the `k`-point Gauss-Legendre rule on `[0, 1]`.
///
/// Nodes are the roots of `P_k`, refined by Newton's method from
/// Chebyshev-type guesses; only the lower half is refined and the upper half
/// is mirrored through `x ↦ 1 − x`, so node symmetry is exact. Weights use the
/// Christoffel form `b_i = 1 / Σ_{j<k} P_j(c_i)²`, which coincides with the
/// integral of the `i`-th Lagrange cardinal polynomial.
pub fn gauss_rule(k: usize) -> Result<QuadratureRule> {
    if k == 0 {
        return Err(EquipError::InvalidArgument(
            "quadrature rule needs k >= 1".into(),
        ));
    }
    let mut nodes = vec![0.0; k];
    let half = k / 2;
    for i in 0..half {
        let theta = std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5);
        let mut x = 0.5 * (1.0 - theta.cos());
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, d) = value_and_derivative(k, x);
            residual = p.abs();
            let dx = p / d;
            x -= dx;
            if residual <= NEWTON_TOL || dx.abs() <= NEWTON_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(EquipError::QuadratureNotConverged { k, residual });
        }
        nodes[i] = x;
        nodes[k - 1 - i] = 1.0 - x;
    }
    if k % 2 == 1 {
        nodes[half] = 0.5;
    }

    let mut vals = vec![0.0; k];
    let weights = nodes
        .iter()
        .map(|&x| {
            legendre_values(x, &mut vals);
            1.0 / vals.iter().map(|v| v * v).sum::<f64>()
        })
        .collect();

    Ok(QuadratureRule { nodes, weights })
}
