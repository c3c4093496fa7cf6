//! Constant matrices of the `s`-stage method in W-transformed form.
//!
//! The coefficient matrix factors as `A(α) = 𝒫 (X − αW) 𝒫ᵀ Ω`, where
//! `𝒫_{ij} = P_j(c_i)`, `Ω = diag(b)`, `X` is the tridiagonal Legendre matrix
//! and `W = e₂e₁ᵀ − e₁e₂ᵀ`. At `α = 0` this is the classical `s`-stage Gauss
//! tableau. All indices are 0-based: column `j` of `𝒫` holds `P_j`, which is
//! `P_{j−1}` in 1-based notation.

use nalgebra::{DMatrix, DVector};

use crate::error::{EquipError, Result};
use crate::legendre::{self, gauss_rule, xi, QuadratureRule};

#[derive(Debug, Clone)]
pub struct EquipTableau {
    s: usize,
    rule: QuadratureRule,
    xi: Vec<f64>,
    p_mat: DMatrix<f64>,
    omega: DMatrix<f64>,
    x_mat: DMatrix<f64>,
    w_mat: DMatrix<f64>,
    i_mat: DMatrix<f64>,
    phi1: DVector<f64>,
    phi2: DVector<f64>,
}

impl EquipTableau {
    pub fn stages(&self) -> usize {
        self.s
    }

    /// Method nodes `c_i` (roots of `P_s`).
    pub fn c(&self) -> &[f64] {
        self.rule.nodes()
    }

    /// Method weights `b_i`.
    pub fn b(&self) -> &[f64] {
        self.rule.weights()
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// `ξ_0 … ξ_{s−1}`.
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// `𝒫`, entry `(i, j) = P_j(c_i)`.
    pub fn p_mat(&self) -> &DMatrix<f64> {
        &self.p_mat
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn x_mat(&self) -> &DMatrix<f64> {
        &self.x_mat
    }

    pub fn w_mat(&self) -> &DMatrix<f64> {
        &self.w_mat
    }

    /// `𝓘`, entry `(i, j) = ∫₀^{c_i} P_j`.
    pub fn i_mat(&self) -> &DMatrix<f64> {
        &self.i_mat
    }

    /// `X⁻¹e₁`.
    pub fn phi1(&self) -> &DVector<f64> {
        &self.phi1
    }

    /// `X⁻¹e₂`.
    pub fn phi2(&self) -> &DVector<f64> {
        &self.phi2
    }

    /// `A(α) = 𝒫 (X − αW) 𝒫ᵀ Ω`.
    pub fn coefficient_matrix(&self, alpha: f64) -> DMatrix<f64> {
        let x_alpha = &self.x_mat - alpha * &self.w_mat;
        &self.p_mat * x_alpha * self.p_mat.transpose() * &self.omega
    }
}

/// Builds all `s`-dependent constants. Requires `s ≥ 2`.
pub fn build_tableau(s: usize) -> Result<EquipTableau> {
    if s < 2 {
        return Err(EquipError::InvalidArgument(format!(
            "stage count must be at least 2, got {s}"
        )));
    }
    let rule = gauss_rule(s)?;
    let xis: Vec<f64> = (0..s).map(xi).collect();

    let mut p_mat = DMatrix::zeros(s, s);
    let mut i_mat = DMatrix::zeros(s, s);
    let mut vals = vec![0.0; s + 1];
    for (i, &c) in rule.nodes().iter().enumerate() {
        legendre::legendre_values(c, &mut vals);
        for j in 0..s {
            p_mat[(i, j)] = vals[j];
            i_mat[(i, j)] = legendre::antiderivative_from_values(j, &vals);
        }
    }

    let omega = DMatrix::from_diagonal(&DVector::from_column_slice(rule.weights()));

    let mut x_mat = DMatrix::zeros(s, s);
    x_mat[(0, 0)] = xis[0];
    for i in 1..s {
        x_mat[(i, i - 1)] = xis[i];
        x_mat[(i - 1, i)] = -xis[i];
    }

    let mut w_mat = DMatrix::zeros(s, s);
    w_mat[(1, 0)] = 1.0;
    w_mat[(0, 1)] = -1.0;

    let phi1 = solve_banded(&xis, 0);
    let phi2 = solve_banded(&xis, 1);

    Ok(EquipTableau {
        s,
        rule,
        xi: xis,
        p_mat,
        omega,
        x_mat,
        w_mat,
        i_mat,
        phi1,
        phi2,
    })
}

/// Solves `X φ = e_unit` by tridiagonal elimination.
///
/// `X` has diagonal `(ξ_0, 0, …, 0)`, sub-diagonal `ξ_i` and super-diagonal
/// `−ξ_i`. The eliminated pivots are `d_0 = ξ_0`, `d_i = ξ_i² / d_{i−1} > 0`,
/// so no pivoting is needed.
fn solve_banded(xis: &[f64], unit: usize) -> DVector<f64> {
    let s = xis.len();
    let mut diag = vec![0.0; s];
    let mut rhs = vec![0.0; s];
    rhs[unit] = 1.0;
    diag[0] = xis[0];
    for i in 1..s {
        let m = xis[i] / diag[i - 1];
        diag[i] = m * xis[i];
        rhs[i] -= m * rhs[i - 1];
    }
    let mut phi = DVector::zeros(s);
    phi[s - 1] = rhs[s - 1] / diag[s - 1];
    for i in (0..s - 1).rev() {
        phi[i] = (rhs[i] + xis[i + 1] * phi[i + 1]) / diag[i];
    }
    phi
}
