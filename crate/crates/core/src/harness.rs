//! Experiment driver: runs one problem/method over a list of step counts,
//! computes the error metrics and writes CSV.
//!
//! Two CSV layouts are produced. The table layout has one row per step count:
//!
//! ```text
//! n,h,error,rate,e_H,e_H_rate,e_quad,alpha_bar,alpha_rate,iters_per_step,fallback_count
//! ```
//!
//! The growth layout has one row per step count and period end:
//!
//! ```text
//! n,period,time,error,invariant_drift,quad_drift
//! ```
//!
//! Floats are written as `{:.16e}`; undefined fields are left empty.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{EquipError, Result};
use crate::integrator::{Integrator, IntegratorConfig, Mode, Trajectory};
use crate::problems::{by_key, ConservativeProblem};

pub const TABLE_HEADER: &str =
    "n,h,error,rate,e_H,e_H_rate,e_quad,alpha_bar,alpha_rate,iters_per_step,fallback_count";
pub const GROWTH_HEADER: &str = "n,period,time,error,invariant_drift,quad_drift";

/// What to run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub problem: String,
    pub mode: Mode,
    pub stages: usize,
    pub quad_points: usize,
    /// Steps per period, ascending.
    pub n_list: Vec<usize>,
    pub periods: usize,
    pub fp_tol: Option<f64>,
    pub drift_correction: bool,
}

impl ExperimentSpec {
    /// Defaults: `k = 6`, 10 periods, drift correction on.
    pub fn new(problem: &str, mode: Mode, stages: usize, n_list: Vec<usize>) -> Self {
        Self {
            problem: problem.to_string(),
            mode,
            stages,
            quad_points: 6,
            n_list,
            periods: 10,
            fp_tol: None,
            drift_correction: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(EquipError::InvalidArgument("n list is empty".into()));
        }
        if self.n_list.contains(&0) {
            return Err(EquipError::InvalidArgument("step counts must be positive".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EquipError::InvalidArgument(
                "n list must be strictly ascending".into(),
            ));
        }
        if self.periods == 0 {
            return Err(EquipError::InvalidArgument("periods must be at least 1".into()));
        }
        self.config().validate()
    }

    pub fn config(&self) -> IntegratorConfig {
        let mut cfg = match self.mode {
            Mode::Equip => IntegratorConfig::equip(self.stages, self.quad_points),
            Mode::Gauss => {
                let mut c = IntegratorConfig::gauss(self.stages);
                c.quad_points = self.quad_points.max(self.stages);
                c
            }
        };
        if let Some(tol) = self.fp_tol {
            cfg.fp_tol = tol;
        }
        cfg.drift_correction = self.drift_correction;
        cfg
    }
}

/// Summary of one integration over `periods` periods with `n` steps each.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub n: usize,
    pub h: f64,
    /// `‖y_{p n} − y₀‖∞` for `p = 1..=periods`.
    pub period_errors: Vec<f64>,
    /// `|C(y_{p n}) − C(y₀)|`.
    pub invariant_drift: Vec<f64>,
    /// Largest `|Q(y_{p n}) − Q(y₀)|` over the quadratic invariants, if any.
    pub quad_drift: Option<Vec<f64>>,
    pub e_h: f64,
    pub e_quad: Option<f64>,
    pub alpha_bar: f64,
    pub iters_per_step: f64,
    pub fallbacks: usize,
}

impl RunRecord {
    /// Maximum over period ends.
    pub fn error(&self) -> f64 {
        self.period_errors.iter().copied().fold(0.0, f64::max)
    }

    /// Error at the last period end.
    pub fn final_error(&self) -> f64 {
        *self.period_errors.last().unwrap_or(&0.0)
    }
}

/// One CSV table row.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub n: usize,
    pub h: f64,
    pub error: f64,
    pub rate: Option<f64>,
    pub e_h: f64,
    pub e_h_rate: Option<f64>,
    pub e_quad: Option<f64>,
    pub alpha_bar: f64,
    pub alpha_rate: Option<f64>,
    pub iters_per_step: f64,
    pub fallback_count: usize,
}

/// `√((1/N) Σ_{i=1..N} (H_i − H_0)²)`.
pub fn rms_invariant_error(series: &[f64]) -> Result<f64> {
    if series.len() < 2 {
        return Err(EquipError::InvalidArgument(
            "invariant series needs at least one step".into(),
        ));
    }
    let h0 = series[0];
    let n = (series.len() - 1) as f64;
    let sum: f64 = series[1..].iter().map(|v| (v - h0) * (v - h0)).sum();
    Ok((sum / n).sqrt())
}

/// Root mean square of the per-step `α`; 0 for an empty slice.
pub fn alpha_rms(alphas: &[f64]) -> f64 {
    if alphas.is_empty() {
        return 0.0;
    }
    (alphas.iter().map(|a| a * a).sum::<f64>() / alphas.len() as f64).sqrt()
}

/// `‖y_{p n} − y₀‖∞` for each period end `p = 1..=periods`.
pub fn period_errors(traj: &Trajectory, periods: usize, n: usize) -> Vec<f64> {
    let y0 = traj.state(0);
    (1..=periods)
        .map(|p| {
            traj.state(p * n)
                .iter()
                .zip(y0)
                .fold(0.0, |acc: f64, (a, b)| acc.max((a - b).abs()))
        })
        .collect()
}

/// Maximum of [`period_errors`]; the exact solution returns to `y₀` every period.
pub fn endpoint_error(traj: &Trajectory, periods: usize, n: usize) -> f64 {
    period_errors(traj, periods, n).into_iter().fold(0.0, f64::max)
}

/// Observed order `log(err_a / err_b) / log(n_b / n_a)`.
pub fn convergence_rate(err_a: f64, err_b: f64, n_a: usize, n_b: usize) -> f64 {
    (err_a / err_b).ln() / (n_b as f64 / n_a as f64).ln()
}

/// Least-squares slope of `log e_p` against `log p`, `p = 1, 2, …`.
///
/// Non-positive errors are skipped. `None` with fewer than two usable points.
pub fn growth_slope(period_errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = period_errors
        .iter()
        .enumerate()
        .filter(|(_, e)| **e > 0.0 && e.is_finite())
        .map(|(i, e)| (((i + 1) as f64).ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let len = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// Integrates one row of the experiment.
pub fn run_single(
    spec: &ExperimentSpec,
    problem: &dyn ConservativeProblem,
    n: usize,
) -> Result<RunRecord> {
    let integrator = Integrator::new(spec.config())?;
    let h = problem.period() / n as f64;
    let traj = integrator.integrate(problem, h, spec.periods * n)?;

    let c0 = traj.invariant[0];
    let invariant_drift = (1..=spec.periods)
        .map(|p| (traj.invariant[p * n] - c0).abs())
        .collect();
    let quad_drift = if traj.quadratic.is_empty() {
        None
    } else {
        Some(
            (1..=spec.periods)
                .map(|p| {
                    traj.quadratic
                        .iter()
                        .map(|(_, q)| (q[p * n] - q[0]).abs())
                        .fold(0.0, f64::max)
                })
                .collect(),
        )
    };
    let e_quad = traj
        .quadratic
        .iter()
        .map(|(_, q)| rms_invariant_error(q))
        .try_fold(None, |acc: Option<f64>, e| {
            e.map(|e| Some(acc.map_or(e, |a| a.max(e))))
        })?;

    Ok(RunRecord {
        n,
        h,
        period_errors: period_errors(&traj, spec.periods, n),
        invariant_drift,
        quad_drift,
        e_h: rms_invariant_error(&traj.invariant)?,
        e_quad,
        alpha_bar: alpha_rms(&traj.alphas),
        iters_per_step: traj.mean_iterations(),
        fallbacks: traj.fallbacks,
    })
}

/// Runs every `n` of the spec. Rows run in parallel; output keeps `n_list` order.
pub fn run_records(spec: &ExperimentSpec) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    let problem = by_key(&spec.problem)?;
    spec.n_list
        .par_iter()
        .map(|&n| run_single(spec, problem.as_ref(), n))
        .collect()
}

fn defined_rate(a: f64, b: f64, n_a: usize, n_b: usize) -> Option<f64> {
    if a > 0.0 && b > 0.0 {
        Some(convergence_rate(a, b, n_a, n_b)).filter(|r| r.is_finite())
    } else {
        None
    }
}

/// Table rows with rates between consecutive step counts.
pub fn report_rows(records: &[RunRecord]) -> Vec<ReportRow> {
    let mut rows = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let prev = i.checked_sub(1).map(|j| &records[j]);
        let rate_of = |f: fn(&RunRecord) -> f64| {
            prev.and_then(|p| defined_rate(f(p), f(r), p.n, r.n))
        };
        rows.push(ReportRow {
            n: r.n,
            h: r.h,
            error: r.error(),
            rate: rate_of(RunRecord::error),
            e_h: r.e_h,
            e_h_rate: rate_of(|r| r.e_h),
            e_quad: r.e_quad,
            alpha_bar: r.alpha_bar,
            alpha_rate: rate_of(|r| r.alpha_bar),
            iters_per_step: r.iters_per_step,
            fallback_count: r.fallbacks,
        });
    }
    rows
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ReportRow>> {
    Ok(report_rows(&run_records(spec)?))
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

pub fn write_table_csv<W: Write>(rows: &[ReportRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{TABLE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            fmt_f(r.h),
            fmt_f(r.error),
            fmt_opt(r.rate),
            fmt_f(r.e_h),
            fmt_opt(r.e_h_rate),
            fmt_opt(r.e_quad),
            fmt_f(r.alpha_bar),
            fmt_opt(r.alpha_rate),
            fmt_f(r.iters_per_step),
            r.fallback_count,
        )?;
    }
    Ok(())
}

/// Per-period rows; `time = p · n · h`.
pub fn write_growth_csv<W: Write>(records: &[RunRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{GROWTH_HEADER}")?;
    for r in records {
        for (i, e) in r.period_errors.iter().enumerate() {
            let p = i + 1;
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.n,
                p,
                fmt_f((p * r.n) as f64 * r.h),
                fmt_f(*e),
                fmt_f(r.invariant_drift[i]),
                fmt_opt(r.quad_drift.as_ref().map(|q| q[i])),
            )?;
        }
    }
    Ok(())
}
