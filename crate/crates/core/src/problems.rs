//! Conservative test problems.
//!
//! Each problem exposes a vector field `f`, the scalar invariant `C` that the
//! integrator enforces, its gradient, an optional constant canonical matrix
//! `J` (present only when `f = J∇C`), and quadratic invariants that are only
//! monitored. Canonical states are ordered `(q; p)`.

use std::f64::consts::PI;

use crate::error::{EquipError, Result};

/// Constant skew-symmetric matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SkewMatrix {
    /// `J = [[0, I_d], [−I_d, 0]]`.
    pub fn canonical(half_dim: usize) -> Self {
        let dim = 2 * half_dim;
        let mut data = vec![0.0; dim * dim];
        for i in 0..half_dim {
            data[i * dim + half_dim + i] = 1.0;
            data[(half_dim + i) * dim + i] = -1.0;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// `out = J v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// `uᵀ J v`.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, ui) in u.iter().enumerate() {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            acc += ui * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        }
        acc
    }
}

/// A monitored quadratic invariant `Q(y) = yᵀ S y` with `S` symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticInvariant {
    pub label: &'static str,
    dim: usize,
    sym: Vec<f64>,
}

impl QuadraticInvariant {
    pub fn new(label: &'static str, dim: usize, sym: Vec<f64>) -> Self {
        assert_eq!(sym.len(), dim * dim);
        Self { label, dim, sym }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += y[i] * self.sym[i * self.dim + j] * y[j];
            }
        }
        acc
    }

    /// `∇Q = 2 S y`.
    pub fn gradient(&self, y: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = 2.0
                * (0..self.dim)
                    .map(|j| self.sym[i * self.dim + j] * y[j])
                    .sum::<f64>();
        }
    }
}

/// An autonomous ODE `ẏ = f(y)` with a scalar first integral `C`.
///
/// Implementations must be pure: identical inputs give identical outputs.
pub trait ConservativeProblem: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()>;

    /// The invariant enforced by the integrator.
    fn invariant(&self, y: &[f64]) -> Result<f64>;

    fn invariant_gradient(&self, y: &[f64], grad: &mut [f64]) -> Result<()>;

    /// Constant `J` with `f = J∇C`, when the problem is canonical Hamiltonian.
    fn canonical_structure(&self) -> Option<&SkewMatrix> {
        None
    }

    fn quadratic_invariants(&self) -> &[QuadraticInvariant] {
        &[]
    }

    /// Analytic Jacobian `∂f/∂y` (row-major), when available.
    fn jacobian(&self, _y: &[f64], _jac: &mut [f64]) -> Option<Result<()>> {
        None
    }

    fn initial_state(&self) -> Vec<f64>;

    /// Period of the reference solution starting at [`initial_state`](Self::initial_state).
    fn period(&self) -> f64;
}

/// Problem keys accepted by [`by_key`].
pub const PROBLEM_KEYS: [&str; 4] = ["kepler", "pendulum", "poisson", "lotka"];

/// Looks up a problem with its default parameters.
pub fn by_key(key: &str) -> Result<Box<dyn ConservativeProblem>> {
    match key {
        "kepler" => Ok(Box::new(Kepler::new(0.5)?)),
        "pendulum" => Ok(Box::new(Pendulum::new())),
        "poisson" => Ok(Box::new(RigidPoisson::default())),
        "lotka" => Ok(Box::new(LotkaVolterra::default())),
        other => Err(EquipError::UnknownProblem(other.to_string())),
    }
}

/// Planar two-body problem, `H = ½‖p‖² − 1/‖q‖`.
#[derive(Debug, Clone)]
pub struct Kepler {
    eccentricity: f64,
    j: SkewMatrix,
    quad: [QuadraticInvariant; 1],
}

impl Kepler {
    pub fn new(eccentricity: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eccentricity) {
            return Err(EquipError::InvalidArgument(format!(
                "eccentricity must lie in [0, 1), got {eccentricity}"
            )));
        }
        // M = q₁p₂ − q₂p₁ as yᵀSy
        let mut sym = vec![0.0; 16];
        sym[3] = 0.5;
        sym[12] = 0.5;
        sym[6] = -0.5;
        sym[9] = -0.5;
        Ok(Self {
            eccentricity,
            j: SkewMatrix::canonical(2),
            quad: [QuadraticInvariant::new("angular_momentum", 4, sym)],
        })
    }

    pub fn eccentricity(&self) -> f64 {
        self.eccentricity
    }
}

impl ConservativeProblem for Kepler {
    fn name(&self) -> &str {
        "kepler"
    }

    fn dim(&self) -> usize {
        4
    }

    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let r2 = y[0] * y[0] + y[1] * y[1];
        let r3 = r2 * r2.sqrt();
        dy[0] = y[2];
        dy[1] = y[3];
        dy[2] = -y[0] / r3;
        dy[3] = -y[1] / r3;
        Ok(())
    }

    fn invariant(&self, y: &[f64]) -> Result<f64> {
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        Ok(0.5 * (y[2] * y[2] + y[3] * y[3]) - 1.0 / r)
    }

    fn invariant_gradient(&self, y: &[f64], grad: &mut [f64]) -> Result<()> {
        let r2 = y[0] * y[0] + y[1] * y[1];
        let r3 = r2 * r2.sqrt();
        grad[0] = y[0] / r3;
        grad[1] = y[1] / r3;
        grad[2] = y[2];
        grad[3] = y[3];
        Ok(())
    }

    fn canonical_structure(&self) -> Option<&SkewMatrix> {
        Some(&self.j)
    }

    fn quadratic_invariants(&self) -> &[QuadraticInvariant] {
        &self.quad
    }

    fn initial_state(&self) -> Vec<f64> {
        let e = self.eccentricity;
        vec![1.0 - e, 0.0, 0.0, ((1.0 + e) / (1.0 - e)).sqrt()]
    }

    fn period(&self) -> f64 {
        2.0 * PI
    }
}

/// Nonlinear pendulum, `H = ½p² − cos q`, started just below the separatrix.
#[derive(Debug, Clone)]
pub struct Pendulum {
    j: SkewMatrix,
}

impl Pendulum {
    pub const PERIOD: f64 = 28.571_094_801_855_44;

    pub fn new() -> Self {
        Self {
            j: SkewMatrix::canonical(1),
        }
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

impl ConservativeProblem for Pendulum {
    fn name(&self) -> &str {
        "pendulum"
    }

    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        dy[0] = y[1];
        dy[1] = -y[0].sin();
        Ok(())
    }

    fn invariant(&self, y: &[f64]) -> Result<f64> {
        Ok(0.5 * y[1] * y[1] - y[0].cos())
    }

    fn invariant_gradient(&self, y: &[f64], grad: &mut [f64]) -> Result<()> {
        grad[0] = y[0].sin();
        grad[1] = y[1];
        Ok(())
    }

    fn canonical_structure(&self) -> Option<&SkewMatrix> {
        Some(&self.j)
    }

    fn jacobian(&self, y: &[f64], jac: &mut [f64]) -> Option<Result<()>> {
        jac.copy_from_slice(&[0.0, 1.0, -y[0].cos(), 0.0]);
        Some(Ok(()))
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![0.0, 1.99999]
    }

    fn period(&self) -> f64 {
        Self::PERIOD
    }
}

/// Three-dimensional Poisson system `ẏ = B(y)∇H(y)` with
/// `H = y₁¹² + ½[(y₂ − y₃)² + (y₁ − y₃)²]` and Casimir `yᵀ diag(c) y`.
///
/// `B` is not constant, so the energy is enforced through its gradient.
#[derive(Debug, Clone)]
pub struct RigidPoisson {
    c: [f64; 3],
    y0: [f64; 3],
    period: f64,
    quad: [QuadraticInvariant; 1],
}

impl RigidPoisson {
    pub const DEFAULT_PERIOD: f64 = 0.531_026_695_984_27;

    /// Poisson structure with coefficients `c`, started at `(1, 1, 1)`.
    ///
    /// The stored period belongs to the default coefficients `(1, 5, −4)`.
    pub fn new(c1: f64, c2: f64, c3: f64) -> Self {
        let sym = vec![c1, 0.0, 0.0, 0.0, c2, 0.0, 0.0, 0.0, c3];
        Self {
            c: [c1, c2, c3],
            y0: [1.0, 1.0, 1.0],
            period: Self::DEFAULT_PERIOD,
            quad: [QuadraticInvariant::new("casimir", 3, sym)],
        }
    }

    /// `B(y)`, row-major.
    pub fn structure_matrix(&self, y: &[f64]) -> [f64; 9] {
        let [c1, c2, c3] = self.c;
        [
            0.0,
            c3 * y[2],
            -c2 * y[1],
            -c3 * y[2],
            0.0,
            c1 * y[0],
            c2 * y[1],
            -c1 * y[0],
            0.0,
        ]
    }

    fn energy_gradient(y: &[f64], g: &mut [f64]) {
        let d23 = y[1] - y[2];
        let d13 = y[0] - y[2];
        g[0] = 12.0 * y[0].powi(11) + d13;
        g[1] = d23;
        g[2] = -d23 - d13;
    }
}

impl Default for RigidPoisson {
    fn default() -> Self {
        Self::new(1.0, 5.0, -4.0)
    }
}

impl ConservativeProblem for RigidPoisson {
    fn name(&self) -> &str {
        "poisson"
    }

    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let mut g = [0.0; 3];
        Self::energy_gradient(y, &mut g);
        let b = self.structure_matrix(y);
        for i in 0..3 {
            dy[i] = b[3 * i] * g[0] + b[3 * i + 1] * g[1] + b[3 * i + 2] * g[2];
        }
        Ok(())
    }

    fn invariant(&self, y: &[f64]) -> Result<f64> {
        let d23 = y[1] - y[2];
        let d13 = y[0] - y[2];
        Ok(y[0].powi(12) + 0.5 * (d23 * d23 + d13 * d13))
    }

    fn invariant_gradient(&self, y: &[f64], grad: &mut [f64]) -> Result<()> {
        Self::energy_gradient(y, grad);
        Ok(())
    }

    fn quadratic_invariants(&self) -> &[QuadraticInvariant] {
        &self.quad
    }

    fn initial_state(&self) -> Vec<f64> {
        self.y0.to_vec()
    }

    fn period(&self) -> f64 {
        self.period
    }
}

/// Lotka-Volterra predator-prey model in Poisson form,
/// `H = a log y₁ − y₁ + b log y₂ − y₂`, `B(y) = [[0, y₁y₂], [−y₁y₂, 0]]`.
#[derive(Debug, Clone)]
pub struct LotkaVolterra {
    a: f64,
    b: f64,
    period: f64,
}

impl LotkaVolterra {
    pub const DEFAULT_PERIOD: f64 = 7.720_315_563_434_113;

    /// The stored period belongs to the default parameters `a = 1`, `b = 2`.
    pub fn new(a: f64, b: f64) -> Self {
        Self {
            a,
            b,
            period: Self::DEFAULT_PERIOD,
        }
    }

    fn check_domain(y: &[f64]) -> Result<()> {
        if y[0] > 0.0 && y[1] > 0.0 {
            Ok(())
        } else {
            Err(EquipError::Domain(format!(
                "Lotka-Volterra needs positive populations, got ({}, {})",
                y[0], y[1]
            )))
        }
    }
}

impl Default for LotkaVolterra {
    fn default() -> Self {
        Self::new(1.0, 2.0)
    }
}

impl ConservativeProblem for LotkaVolterra {
    fn name(&self) -> &str {
        "lotka"
    }

    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        Self::check_domain(y)?;
        dy[0] = y[0] * (self.b - y[1]);
        dy[1] = -y[1] * (self.a - y[0]);
        Ok(())
    }

    fn invariant(&self, y: &[f64]) -> Result<f64> {
        Self::check_domain(y)?;
        Ok(self.a * y[0].ln() - y[0] + self.b * y[1].ln() - y[1])
    }

    fn invariant_gradient(&self, y: &[f64], grad: &mut [f64]) -> Result<()> {
        Self::check_domain(y)?;
        grad[0] = self.a / y[0] - 1.0;
        grad[1] = self.b / y[1] - 1.0;
        Ok(())
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![0.1, 0.1]
    }

    fn period(&self) -> f64 {
        self.period
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kepler_initial_values() {
        let k = Kepler::new(0.5).unwrap();
        let y0 = k.initial_state();
        assert!((k.invariant(&y0).unwrap() + 0.5).abs() < 1e-15);
        let m = k.quadratic_invariants()[0].eval(&y0);
        assert!((m - 0.5 * 3f64.sqrt()).abs() < 1e-15);
        assert!(Kepler::new(1.0).is_err());
        assert!(Kepler::new(-0.1).is_err());
    }

    #[test]
    fn pendulum_initial_values() {
        let p = Pendulum::new();
        let y0 = p.initial_state();
        assert!((p.invariant(&y0).unwrap() - 0.99998000005).abs() < 1e-14);
        let mut g = [0.0; 2];
        p.invariant_gradient(&y0, &mut g).unwrap();
        assert_eq!(g, [0.0, 1.99999]);
        let mut f = [0.0; 2];
        p.rhs(&y0, &mut f).unwrap();
        assert_eq!(f, [1.99999, 0.0]);
    }

    #[test]
    fn poisson_initial_values() {
        let p = RigidPoisson::default();
        let y0 = p.initial_state();
        assert_eq!(p.invariant(&y0).unwrap(), 1.0);
        assert_eq!(p.quadratic_invariants()[0].eval(&y0), 2.0);
        let b = p.structure_matrix(&[0.3, -1.2, 2.5]);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(b[3 * i + j], -b[3 * j + i]);
            }
        }
    }

    #[test]
    fn lotka_initial_values_and_domain() {
        let p = LotkaVolterra::default();
        let y0 = p.initial_state();
        let h = p.invariant(&y0).unwrap();
        assert!((h - (3.0 * 0.1f64.ln() - 0.2)).abs() < 1e-15);
        assert!((h + 7.1077552789821368).abs() < 1e-7);
        let mut g = [0.0; 2];
        p.invariant_gradient(&y0, &mut g).unwrap();
        assert!((g[0] - 9.0).abs() < 1e-14 && (g[1] - 19.0).abs() < 1e-14);
        let mut f = [0.0; 2];
        assert!(matches!(
            p.rhs(&[0.0, 1.0], &mut f),
            Err(EquipError::Domain(_))
        ));
        assert!(p.invariant(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn keys() {
        for key in PROBLEM_KEYS {
            assert_eq!(by_key(key).unwrap().name(), key);
        }
        assert!(matches!(
            by_key("henon"),
            Err(EquipError::UnknownProblem(_))
        ));
    }

    #[test]
    fn canonical_j() {
        let j = SkewMatrix::canonical(2);
        assert_eq!(j.get(0, 2), 1.0);
        assert_eq!(j.get(3, 1), -1.0);
        let mut out = [0.0; 4];
        j.apply(&[1.0, 2.0, 3.0, 4.0], &mut out);
        assert_eq!(out, [3.0, 4.0, -1.0, -2.0]);
        assert_eq!(j.bilinear(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]), 0.0);
    }
}
