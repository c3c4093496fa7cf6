//! Energy and quadratic-invariant preserving (EQUIP) Runge-Kutta methods.
//!
//! EQUIP(k, s) perturbs the `s`-stage Gauss collocation method by a scalar
//! `α` per step, chosen so that a prescribed first integral is conserved
//! while the tableau stays symplectic. The crate provides the Legendre and
//! Gauss-Legendre machinery, the method tableau, four conservative test
//! problems, the integrator, and a benchmark harness.

pub mod error;
pub mod harness;
pub mod integrator;
pub mod legendre;
pub mod problems;
pub mod tableau;

pub use error::{EquipError, Result};
pub use integrator::{IntegratorConfig, Integrator, Mode, StepDiagnostics, StepState, Trajectory};
pub use legendre::{gauss_rule, legendre_eval, legendre_int_eval, QuadratureRule};
pub use problems::{by_key, ConservativeProblem};
pub use tableau::{build_tableau, EquipTableau};
