//! EQUIP(k, s) one-step map and fixed-step driver.
//!
//! A step is described by the spectral coefficients `γ_0 … γ_{s−1}` of the
//! stage polynomial `σ₁` in the shifted Legendre basis, and by the scalar `α`
//! that perturbs the Gauss tableau to `A(α)`. They solve
//!
//! ```text
//! γ = Ψ(α, γ)
//! α = (N̂(α, γ) + ΔC/h) / D̂(α, γ)
//! ```
//!
//! where `N̂`/`D̂` are `k`-point quadratures of the discrete line integral of
//! `∇C` along `σ₁` and the linear closing segment `σ₂`, and `ΔC` is the
//! invariant error accumulated so far. The new state is `y₁ = y₀ + h γ_0`.
//!
//! Each step first converges the Gauss coefficients `γ̄ = Ψ(0, γ̄)`. The
//! explicit update at `(0, γ̄)` gives the first `α`; after that `α` is
//! refined by secant steps on `r(α) = N̂ + ΔC/h − α D̂`, with `γ` iterated to
//! convergence at every trial `α` (warm-started from the previous one).
//!
//! `γ` is stored flat: block `j` occupies `gamma[j*m .. (j+1)*m]`.

use crate::error::{EquipError, Result};
use crate::legendre::{self, gauss_rule, QuadratureRule};
use crate::problems::ConservativeProblem;
use crate::tableau::{build_tableau, EquipTableau};

/// How `α` is chosen each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Enforce the invariant through `α`.
    Equip,
    /// Plain `s`-stage Gauss collocation (`α ≡ 0`).
    Gauss,
}

impl std::str::FromStr for Mode {
    type Err = EquipError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equip" => Ok(Mode::Equip),
            "gauss" => Ok(Mode::Gauss),
            other => Err(EquipError::InvalidArgument(format!(
                "unknown method `{other}` (expected equip or gauss)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    /// Stage count `s ≥ 2`.
    pub stages: usize,
    /// Quadrature points `k ≥ s` used for the line integrals.
    pub quad_points: usize,
    pub mode: Mode,
    /// Relative fixed-point tolerance.
    pub fp_tol: f64,
    pub max_iter: usize,
    /// Safeguard `|α| ≤ alpha_cap · h²`.
    pub alpha_cap: f64,
    /// Multiplier of `h² · scale` below which `|D̂|` counts as degenerate.
    pub denom_floor: f64,
    /// Feed the accumulated invariant error back into `α`.
    pub drift_correction: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            stages: 2,
            quad_points: 6,
            mode: Mode::Equip,
            fp_tol: 1e-14,
            max_iter: 100,
            alpha_cap: 10.0,
            denom_floor: 1e-10,
            drift_correction: true,
        }
    }
}

impl IntegratorConfig {
    pub fn equip(stages: usize, quad_points: usize) -> Self {
        Self {
            stages,
            quad_points,
            ..Self::default()
        }
    }

    pub fn gauss(stages: usize) -> Self {
        Self {
            stages,
            quad_points: stages,
            mode: Mode::Gauss,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(EquipError::InvalidArgument(msg));
        if self.stages < 2 {
            return bad(format!("stages must be >= 2, got {}", self.stages));
        }
        if self.quad_points < self.stages {
            return bad(format!(
                "quadrature points k = {} must be >= stages s = {}",
                self.quad_points, self.stages
            ));
        }
        if !(self.fp_tol > f64::EPSILON) {
            return bad(format!("fp_tol {} must exceed machine epsilon", self.fp_tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1".into());
        }
        if !(self.alpha_cap > 0.0) || !(self.denom_floor >= 0.0) {
            return bad("alpha_cap must be positive and denom_floor non-negative".into());
        }
        Ok(())
    }
}

/// Why a step reverted to `α = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FallbackReason {
    DegenerateDenominator,
    NotConverged,
    AlphaTooLarge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    /// Fixed-point sweeps, including those of an abandoned EQUIP attempt.
    pub iterations: usize,
    pub alpha_used: f64,
    pub fallback: Option<FallbackReason>,
    /// `|C(y₁) − C(y₀)|`.
    pub invariant_residual: f64,
}

impl StepDiagnostics {
    pub fn fell_back(&self) -> bool {
        self.fallback.is_some()
    }
}

/// State after a step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub t: f64,
    pub y: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha: f64,
    /// Signed invariant deviation from the reference value, carried to the next step.
    pub delta_c: f64,
}

/// Result of one `α` evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaUpdate {
    Value {
        alpha: f64,
        numerator: f64,
        denominator: f64,
    },
    /// `|D̂|` fell below the floor; `α` is not usable.
    Degenerate { numerator: f64, denominator: f64 },
}

/// Basis tables at a node set: `basis[ℓ*s + j] = P_j(x_ℓ)`, `antideriv[ℓ*s + j] = ∫₀^{x_ℓ} P_j`.
#[derive(Debug, Clone)]
struct NodeTables {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    basis: Vec<f64>,
    antideriv: Vec<f64>,
}

impl NodeTables {
    fn new(rule: &QuadratureRule, s: usize) -> Self {
        let n = rule.k();
        let mut basis = vec![0.0; n * s];
        let mut antideriv = vec![0.0; n * s];
        let mut vals = vec![0.0; s + 1];
        for (l, &x) in rule.nodes().iter().enumerate() {
            legendre::legendre_values(x, &mut vals);
            for j in 0..s {
                basis[l * s + j] = vals[j];
                antideriv[l * s + j] = legendre::antiderivative_from_values(j, &vals);
            }
        }
        Self {
            nodes: rule.nodes().to_vec(),
            weights: rule.weights().to_vec(),
            basis,
            antideriv,
        }
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }
}

/// Fixed-step EQUIP(k, s) / Gauss(s) integrator.
///
/// Holds only immutable tables; one instance can drive many integrations,
/// including concurrently.
#[derive(Debug, Clone)]
pub struct Integrator {
    config: IntegratorConfig,
    tableau: EquipTableau,
    rule: QuadratureRule,
    stage: NodeTables,
    quad: NodeTables,
    phi1: Vec<f64>,
    phi2: Vec<f64>,
}

impl Integrator {
    pub fn new(config: IntegratorConfig) -> Result<Self> {
        config.validate()?;
        let tableau = build_tableau(config.stages)?;
        let rule = gauss_rule(config.quad_points)?;
        let s = config.stages;
        let stage = NodeTables::new(tableau.rule(), s);
        let quad = NodeTables::new(&rule, s);
        let phi1 = tableau.phi1().iter().copied().collect();
        let phi2 = tableau.phi2().iter().copied().collect();
        Ok(Self {
            config,
            tableau,
            rule,
            stage,
            quad,
            phi1,
            phi2,
        })
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.config
    }

    pub fn tableau(&self) -> &EquipTableau {
        &self.tableau
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.rule
    }

    fn stages(&self) -> usize {
        self.config.stages
    }

    /// `v_j = φ₂ⱼ γ_0 − φ₁ⱼ γ_1` for all `j`, flat `s × m`.
    fn correction_direction(&self, gamma: &[f64], m: usize) -> Vec<f64> {
        let s = self.stages();
        let (g0, g1) = (&gamma[..m], &gamma[m..2 * m]);
        let mut v = vec![0.0; s * m];
        for j in 0..s {
            for d in 0..m {
                v[j * m + d] = self.phi2[j] * g0[d] - self.phi1[j] * g1[d];
            }
        }
        v
    }

    fn sigma1_on(&self, tables: &NodeTables, gamma: &[f64], alpha: f64, y0: &[f64], h: f64) -> Vec<f64> {
        let s = self.stages();
        let m = y0.len();
        let v = self.correction_direction(gamma, m);
        let w: Vec<f64> = gamma.iter().zip(&v).map(|(g, v)| g - alpha * v).collect();
        let mut out = Vec::with_capacity(tables.len() * m);
        for l in 0..tables.len() {
            let row = &tables.antideriv[l * s..(l + 1) * s];
            for d in 0..m {
                let inc: f64 = row.iter().enumerate().map(|(j, a)| a * w[j * m + d]).sum();
                out.push(y0[d] + h * inc);
            }
        }
        out
    }

    /// `σ₁(ĉ_ℓ h) = y₀ + h Σ_j [∫₀^{ĉ_ℓ} P_j] (γ_j − α(φ₂ⱼγ_0 − φ₁ⱼγ_1))` at the
    /// `k` quadrature nodes, flat `k × m`.
    pub fn sigma1_at_nodes(&self, gamma: &[f64], alpha: f64, y0: &[f64], h: f64) -> Vec<f64> {
        self.sigma1_on(&self.quad, gamma, alpha, y0, h)
    }

    /// `σ₁` at the `s` method nodes, i.e. the Runge-Kutta stage values of `A(α)`.
    pub fn sigma1_at_stages(&self, gamma: &[f64], alpha: f64, y0: &[f64], h: f64) -> Vec<f64> {
        self.sigma1_on(&self.stage, gamma, alpha, y0, h)
    }

    /// `σ₂(ĉ_ℓ) = y₁ + (ĉ_ℓ − 1) α h (φ₂₀γ_0 − φ₁₀γ_1)` at the quadrature nodes,
    /// flat `k × m`.
    pub fn sigma2_at_nodes(&self, y1: &[f64], alpha: f64, gamma: &[f64], h: f64) -> Vec<f64> {
        let m = y1.len();
        let (g0, g1) = (&gamma[..m], &gamma[m..2 * m]);
        let mut out = Vec::with_capacity(self.quad.len() * m);
        for &c in &self.quad.nodes {
            for d in 0..m {
                let v0 = self.phi2[0] * g0[d] - self.phi1[0] * g1[d];
                out.push(y1[d] + (c - 1.0) * alpha * h * v0);
            }
        }
        out
    }

    /// `Ψ(α, γ)`: `γ'_j = Σ_i b_i P_j(c_i) f(σ₁(c_i h))`.
    pub fn gamma_map(
        &self,
        problem: &dyn ConservativeProblem,
        alpha: f64,
        gamma: &[f64],
        y0: &[f64],
        h: f64,
    ) -> Result<Vec<f64>> {
        let stages = self.sigma1_at_stages(gamma, alpha, y0, h);
        self.project(problem, &self.stage, &stages, |p, y, out| p.rhs(y, out))
    }

    /// `Σ_ℓ w_ℓ P_j(x_ℓ) g(points_ℓ)` for `j < s`, flat `s × m`.
    fn project<G>(
        &self,
        problem: &dyn ConservativeProblem,
        tables: &NodeTables,
        points: &[f64],
        g: G,
    ) -> Result<Vec<f64>>
    where
        G: Fn(&dyn ConservativeProblem, &[f64], &mut [f64]) -> Result<()>,
    {
        let s = self.stages();
        let m = problem.dim();
        let mut out = vec![0.0; s * m];
        let mut val = vec![0.0; m];
        for l in 0..tables.len() {
            g(problem, &points[l * m..(l + 1) * m], &mut val)?;
            let wl = tables.weights[l];
            for j in 0..s {
                let c = wl * tables.basis[l * s + j];
                for d in 0..m {
                    out[j * m + d] += c * val[d];
                }
            }
        }
        Ok(out)
    }

    /// `Σ_ℓ w_ℓ g(points_ℓ)`.
    fn average<G>(
        &self,
        problem: &dyn ConservativeProblem,
        points: &[f64],
        g: G,
    ) -> Result<Vec<f64>>
    where
        G: Fn(&dyn ConservativeProblem, &[f64], &mut [f64]) -> Result<()>,
    {
        let m = problem.dim();
        let mut out = vec![0.0; m];
        let mut val = vec![0.0; m];
        for (l, &wl) in self.quad.weights.iter().enumerate() {
            g(problem, &points[l * m..(l + 1) * m], &mut val)?;
            for d in 0..m {
                out[d] += wl * val[d];
            }
        }
        Ok(out)
    }

    /// Quadrature estimates `(N̂, D̂)` of the line-integral numerator and
    /// denominator at the current iterate.
    ///
    /// With a canonical `J` the Hamiltonian form `γ̂_j(σ₁)ᵀ J (…)` is used,
    /// otherwise the general form with `ρ̂_j(σ₁)` built from `∇C`.
    pub fn line_integral_terms(
        &self,
        problem: &dyn ConservativeProblem,
        alpha: f64,
        gamma: &[f64],
        y0: &[f64],
        h: f64,
    ) -> Result<(f64, f64)> {
        let s = self.stages();
        let m = y0.len();
        let sig1 = self.sigma1_at_nodes(gamma, alpha, y0, h);
        let y1: Vec<f64> = y0.iter().zip(&gamma[..m]).map(|(y, g)| y + h * g).collect();
        let sig2 = self.sigma2_at_nodes(&y1, alpha, gamma, h);
        let v = self.correction_direction(gamma, m);

        let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };

        match problem.canonical_structure() {
            Some(j) => {
                let hat = self.project(problem, &self.quad, &sig1, |p, y, o| p.rhs(y, o))?;
                let bar = self.average(problem, &sig2, |p, y, o| p.rhs(y, o))?;
                let mut num = 0.0;
                for jj in 0..s {
                    num += j.bilinear(&hat[jj * m..(jj + 1) * m], &gamma[jj * m..(jj + 1) * m]);
                }
                let diff0: Vec<f64> = hat[..m].iter().zip(&bar).map(|(a, b)| a - b).collect();
                let mut den = j.bilinear(&diff0, &v[..m]);
                for jj in 1..s {
                    den += j.bilinear(&hat[jj * m..(jj + 1) * m], &v[jj * m..(jj + 1) * m]);
                }
                Ok((num, den))
            }
            None => {
                let rho = self.project(problem, &self.quad, &sig1, |p, y, o| {
                    p.invariant_gradient(y, o)
                })?;
                let rho_bar = self.average(problem, &sig2, |p, y, o| p.invariant_gradient(y, o))?;
                let mut num = 0.0;
                for jj in 0..s {
                    num += dot(&rho[jj * m..(jj + 1) * m], &gamma[jj * m..(jj + 1) * m]);
                }
                let diff0: Vec<f64> = rho[..m].iter().zip(&rho_bar).map(|(a, b)| a - b).collect();
                let mut den = dot(&diff0, &v[..m]);
                for jj in 1..s {
                    den += dot(&rho[jj * m..(jj + 1) * m], &v[jj * m..(jj + 1) * m]);
                }
                Ok((num, den))
            }
        }
    }

    /// `α̂ = (N̂ + ΔC/h) / D̂`, or [`AlphaUpdate::Degenerate`] when `|D̂| ≤ floor`.
    #[allow(clippy::too_many_arguments)]
    pub fn alpha_update(
        &self,
        problem: &dyn ConservativeProblem,
        alpha: f64,
        gamma: &[f64],
        y0: &[f64],
        h: f64,
        delta_c: f64,
        floor: f64,
    ) -> Result<AlphaUpdate> {
        let (numerator, denominator) = self.line_integral_terms(problem, alpha, gamma, y0, h)?;
        if !(denominator.abs() > floor) {
            return Ok(AlphaUpdate::Degenerate {
                numerator,
                denominator,
            });
        }
        let correction = if self.config.drift_correction {
            delta_c / h
        } else {
            0.0
        };
        Ok(AlphaUpdate::Value {
            alpha: (numerator + correction) / denominator,
            numerator,
            denominator,
        })
    }

    /// Degeneracy threshold `denom_floor · h² · ‖∇C(y₀)‖∞ ‖f(y₀)‖∞ max(1, ‖f'‖)`.
    ///
    /// `‖f'‖` is the analytic Jacobian's row-sum norm when available, else a
    /// finite-difference directional estimate along `f(y₀)`.
    pub fn denominator_floor(
        &self,
        problem: &dyn ConservativeProblem,
        y0: &[f64],
        h: f64,
    ) -> Result<f64> {
        let m = y0.len();
        let mut f0 = vec![0.0; m];
        problem.rhs(y0, &mut f0)?;
        let f0 = &f0[..];
        let mut g0 = vec![0.0; m];
        problem.invariant_gradient(y0, &mut g0)?;
        let f_norm = inf_norm(f0);
        let g_norm = inf_norm(&g0);
        let mut jac = vec![0.0; m * m];
        let lipschitz = match problem.jacobian(y0, &mut jac) {
            Some(Ok(())) => (0..m)
                .map(|i| jac[i * m..(i + 1) * m].iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            Some(Err(e)) => return Err(e),
            None if f_norm > 0.0 => {
                let delta = 1e-7 * inf_norm(y0).max(1.0);
                let probe: Vec<f64> = y0
                    .iter()
                    .zip(f0)
                    .map(|(y, f)| y + delta * f / f_norm)
                    .collect();
                let mut fp = vec![0.0; m];
                match problem.rhs(&probe, &mut fp) {
                    Ok(()) => {
                        let diff: Vec<f64> = fp.iter().zip(f0).map(|(a, b)| a - b).collect();
                        inf_norm(&diff) / delta
                    }
                    Err(_) => 1.0,
                }
            }
            None => 1.0,
        };
        Ok(self.config.denom_floor * h * h * g_norm * f_norm * lipschitz.max(1.0))
    }

    /// Iterates `γ ← Ψ(α, γ)` at fixed `α` to convergence.
    fn solve_fixed_alpha(
        &self,
        problem: &dyn ConservativeProblem,
        alpha: f64,
        mut gamma: Vec<f64>,
        y0: &[f64],
        h: f64,
    ) -> Result<(Vec<f64>, usize, bool)> {
        for it in 1..=self.config.max_iter {
            let next = self.gamma_map(problem, alpha, &gamma, y0, h)?;
            let err = relative_change(&next, &gamma);
            gamma = next;
            if err <= self.config.fp_tol {
                return Ok((gamma, it, true));
            }
            if !err.is_finite() {
                return Ok((gamma, it, false));
            }
        }
        Ok((gamma, self.config.max_iter, false))
    }

    /// Solves for `α` starting from the converged Gauss coefficients `γ̄`.
    ///
    /// The scalar residual `r(α) = N̂ + ΔC/h − α D̂`, evaluated with `γ`
    /// re-converged at each `α`, is driven to zero. The first update is the
    /// explicit `α̂ = (N̂ + ΔC/h)/D̂` at `(0, γ̄)`, later ones are secant steps.
    /// Converged when `h |r| ≤ fp_tol · max(1, |C(y₀)|)`.
    #[allow(clippy::too_many_arguments)]
    fn solve_equip(
        &self,
        problem: &dyn ConservativeProblem,
        gamma_bar: &[f64],
        y0: &[f64],
        h: f64,
        delta_c: f64,
        floor: f64,
        c0: f64,
    ) -> Result<std::result::Result<(Vec<f64>, f64, usize), (FallbackReason, usize)>> {
        let cap = self.config.alpha_cap * h * h;
        let target = self.config.fp_tol * c0.abs().max(1.0) / h;
        let correction = if self.config.drift_correction {
            delta_c / h
        } else {
            0.0
        };

        let (mut alpha, r0) =
            match self.alpha_update(problem, 0.0, gamma_bar, y0, h, delta_c, floor)? {
                AlphaUpdate::Value {
                    alpha, numerator, ..
                } => (alpha, numerator + correction),
                AlphaUpdate::Degenerate { .. } => {
                    return Ok(Err((FallbackReason::DegenerateDenominator, 0)))
                }
            };
        if r0.abs() <= target {
            return Ok(Ok((gamma_bar.to_vec(), 0.0, 0)));
        }
        let mut prev = (0.0, r0);
        let mut gamma = gamma_bar.to_vec();
        let mut sweeps = 0;
        for _ in 0..self.config.max_iter {
            if !alpha.is_finite() || alpha.abs() > 1e3 * cap {
                return Ok(Err((FallbackReason::AlphaTooLarge, sweeps)));
            }
            let (g, it, ok) = self.solve_fixed_alpha(problem, alpha, gamma, y0, h)?;
            sweeps += it;
            if !ok {
                return Ok(Err((FallbackReason::NotConverged, sweeps)));
            }
            gamma = g;
            let (num, den) = self.line_integral_terms(problem, alpha, &gamma, y0, h)?;
            let r = num + correction - alpha * den;
            if r.abs() <= target || (alpha - prev.0).abs() <= 4.0 * f64::EPSILON * alpha.abs() {
                if alpha.abs() > cap {
                    return Ok(Err((FallbackReason::AlphaTooLarge, sweeps)));
                }
                return Ok(Ok((gamma, alpha, sweeps)));
            }
            if r == prev.1 {
                return Ok(Err((FallbackReason::NotConverged, sweeps)));
            }
            let next = alpha - r * (alpha - prev.0) / (r - prev.1);
            prev = (alpha, r);
            alpha = next;
        }
        Ok(Err((FallbackReason::NotConverged, sweeps)))
    }

    /// Initial coefficients `Ψ(0, 0)`: `γ_0 = f(y₀)`, higher blocks from the
    /// (exactly vanishing) weighted sums of `P_j`.
    fn initial_gamma(&self, problem: &dyn ConservativeProblem, y0: &[f64], h: f64) -> Result<Vec<f64>> {
        let zeros = vec![0.0; self.stages() * y0.len()];
        self.gamma_map(problem, 0.0, &zeros, y0, h)
    }

    /// One step with `α` held fixed. `h` may be negative.
    ///
    /// Returns `y₁ = y₀ + h γ_0` and the number of sweeps.
    pub fn fixed_alpha_step(
        &self,
        problem: &dyn ConservativeProblem,
        y0: &[f64],
        h: f64,
        alpha: f64,
    ) -> Result<(Vec<f64>, usize)> {
        let gamma = self.initial_gamma(problem, y0, h)?;
        let (gamma, iters, converged) = self.solve_fixed_alpha(problem, alpha, gamma, y0, h)?;
        if !converged {
            return Err(EquipError::NotConverged {
                iterations: iters,
            });
        }
        let m = y0.len();
        Ok((advance(y0, &gamma[..m], h), iters))
    }

    /// One EQUIP (or Gauss) step from `(t0, y0)`.
    ///
    /// `delta_c_in` is the invariant deviation `C(y₀) − C_ref` accumulated so
    /// far; the returned state carries `C(y₁) − C_ref`. On a degenerate
    /// denominator, a stalled iteration or `|α| > alpha_cap·h²` the step is
    /// redone with `α = 0` and the fallback is recorded.
    pub fn step(
        &self,
        problem: &dyn ConservativeProblem,
        y0: &[f64],
        t0: f64,
        h: f64,
        delta_c_in: f64,
    ) -> Result<(StepState, StepDiagnostics)> {
        if !(h > 0.0) {
            return Err(EquipError::InvalidArgument(format!(
                "step size must be positive, got {h}"
            )));
        }
        let m = problem.dim();
        if y0.len() != m {
            return Err(EquipError::InvalidArgument(format!(
                "state has length {}, problem dimension is {m}",
                y0.len()
            )));
        }
        let c0 = problem.invariant(y0)?;
        let gamma0 = self.initial_gamma(problem, y0, h)?;
        let (gamma_bar, gauss_iters, ok) = self.solve_fixed_alpha(problem, 0.0, gamma0, y0, h)?;
        if !ok {
            return Err(EquipError::NotConverged {
                iterations: gauss_iters,
            });
        }

        let (gamma, alpha, iterations, fallback) = match self.config.mode {
            Mode::Gauss => (gamma_bar, 0.0, gauss_iters, None),
            Mode::Equip => {
                let floor = self.denominator_floor(problem, y0, h)?;
                match self.solve_equip(problem, &gamma_bar, y0, h, delta_c_in, floor, c0)? {
                    Ok((g, a, it)) => (g, a, gauss_iters + it, None),
                    Err((reason, spent)) => (gamma_bar, 0.0, gauss_iters + spent, Some(reason)),
                }
            }
        };

        let y1 = advance(y0, &gamma[..m], h);
        let c1 = problem.invariant(&y1)?;
        let reference = c0 - delta_c_in;
        let state = StepState {
            t: t0 + h,
            y: y1,
            gamma,
            alpha,
            delta_c: c1 - reference,
        };
        let diag = StepDiagnostics {
            iterations,
            alpha_used: alpha,
            fallback,
            invariant_residual: (c1 - c0).abs(),
        };
        Ok((state, diag))
    }

    /// Takes `n_steps` steps of size `h` from the problem's initial state.
    pub fn integrate(
        &self,
        problem: &dyn ConservativeProblem,
        h: f64,
        n_steps: usize,
    ) -> Result<Trajectory> {
        self.integrate_from(problem, &problem.initial_state(), h, n_steps)
    }

    /// Takes `n_steps` steps of size `h` from `y0`, carrying `ΔC` across steps.
    pub fn integrate_from(
        &self,
        problem: &dyn ConservativeProblem,
        y0: &[f64],
        h: f64,
        n_steps: usize,
    ) -> Result<Trajectory> {
        if n_steps == 0 {
            return Err(EquipError::InvalidArgument(
                "n_steps must be at least 1".into(),
            ));
        }
        let m = problem.dim();
        let quads = problem.quadratic_invariants();
        let c_init = problem.invariant(y0)?;

        let mut traj = Trajectory {
            dim: m,
            h,
            states: Vec::with_capacity((n_steps + 1) * m),
            invariant: Vec::with_capacity(n_steps + 1),
            quadratic: quads
                .iter()
                .map(|q| (q.label, Vec::with_capacity(n_steps + 1)))
                .collect(),
            alphas: Vec::with_capacity(n_steps),
            iterations: Vec::with_capacity(n_steps),
            fallbacks: 0,
        };
        traj.push_state(y0, c_init, problem);

        let mut y = y0.to_vec();
        let mut c = c_init;
        for i in 0..n_steps {
            let (state, diag) = self.step(problem, &y, i as f64 * h, h, c - c_init)?;
            y = state.y;
            c = problem.invariant(&y)?;
            traj.push_state(&y, c, problem);
            traj.alphas.push(diag.alpha_used);
            traj.iterations.push(diag.iterations);
            if diag.fell_back() {
                traj.fallbacks += 1;
            }
        }
        Ok(traj)
    }
}

/// Recorded output of [`Integrator::integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub h: f64,
    /// `(n + 1) × m`, row `i` is `y_i`.
    pub states: Vec<f64>,
    /// `C(y_i)`.
    pub invariant: Vec<f64>,
    /// Monitored quadratic invariants, one series per label.
    pub quadratic: Vec<(&'static str, Vec<f64>)>,
    /// `α_i` of steps `1..=n`.
    pub alphas: Vec<f64>,
    pub iterations: Vec<usize>,
    pub fallbacks: usize,
}

impl Trajectory {
    fn push_state(&mut self, y: &[f64], c: f64, problem: &dyn ConservativeProblem) {
        self.states.extend_from_slice(y);
        self.invariant.push(c);
        for (series, q) in self.quadratic.iter_mut().zip(problem.quadratic_invariants()) {
            series.1.push(q.eval(y));
        }
    }

    pub fn steps(&self) -> usize {
        self.invariant.len() - 1
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mean_iterations(&self) -> f64 {
        self.iterations.iter().sum::<usize>() as f64 / self.iterations.len() as f64
    }
}

fn advance(y0: &[f64], gamma0: &[f64], h: f64) -> Vec<f64> {
    y0.iter().zip(gamma0).map(|(y, g)| y + h * g).collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn relative_change(next: &[f64], prev: &[f64]) -> f64 {
    let diff = next
        .iter()
        .zip(prev)
        .fold(0.0, |acc: f64, (a, b)| acc.max((a - b).abs()));
    diff / inf_norm(prev).max(1.0)
}
