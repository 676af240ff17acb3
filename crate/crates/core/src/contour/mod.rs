//! Vertical-line contour integrals for the partition function and for the
//! overlap moment generating function.
//!
//! Everything is centred on `G(gamma)`: the single integrand is
//! `f(s) = exp((N/2)(G(gamma + i s) - G(gamma)))` and the double integrand is
//! `f(s) f(r) E(s, r)` with `E = prod_i (1 - c u_i(s) u_i(r))^(-1/2)`,
//! `u_i(s) = 1/(gamma + i s - lambda_i)` and `c = t^2 / (4 beta^2 N^2)`.
//! The MGF is computed as `1 + D / I^2` with `D = int int f f (E - 1)`, which
//! is exact at `t = 0` and keeps full relative precision for small `t`.

mod diagnostics;
mod integrals;
mod logscale;
mod plan;

pub use diagnostics::{factorization_check, off_center_fraction, FactorizationReport, OffCenterReport};
pub use integrals::{
    effective_t, log_mgf_curvature, log_partition_function, marginal_second_moments,
    overlap_mgf_exact, overlap_variance_exact, partition_integral, partition_integral_with_error,
    saddle_denominator_approx, MgfEngine, MgfValue, PartitionEstimate,
};
pub use logscale::LogScaledComplex;
pub use plan::{plan_contour, plan_contour_with, ContourSpec, Panel, PlanOptions, MIN_CONTOUR_N};

use crate::error::{Result, SskError};
use crate::potential::{gamma_hat, SaddleInfo};
use crate::wigner::m_sc_derivative;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MgfMethod {
    Contour,
    SaddleApprox,
    Mc,
    Oracle,
}

impl MgfMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            MgfMethod::Contour => "contour",
            MgfMethod::SaddleApprox => "saddle-approx",
            MgfMethod::Mc => "mc",
            MgfMethod::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfCurve {
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub method: MgfMethod,
    pub normalized: bool,
}

impl MgfCurve {
    /// RFC-4180 rows `t,value,method,normalized`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(out);
        w.write_record(["t", "value", "method", "normalized"])?;
        for (t, v) in self.t_grid.iter().zip(&self.values) {
            w.write_record([
                format!("{t:.16e}"),
                format!("{v:.16e}"),
                self.method.as_str().to_string(),
                self.normalized.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Contour MGF on a grid, sharing one plan certified for the largest `|t|`.
pub fn mgf_curve_exact(
    p: &crate::potential::LogPotential<'_>,
    t_grid: &[f64],
    tol: f64,
    normalized: bool,
) -> Result<MgfCurve> {
    let t_max = t_grid.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let engine = MgfEngine::new(p, effective_t(p, t_max, normalized)?, tol)?;
    let values = t_grid
        .iter()
        .map(|&t| engine.mgf(t, normalized).map(|v| v.value))
        .collect::<Result<Vec<f64>>>()?;
    Ok(MgfCurve {
        t_grid: t_grid.to_vec(),
        values,
        method: MgfMethod::Contour,
        normalized,
    })
}

/// Which constant multiplies `t^2 (1 - beta^2) m'(gamma) / (4 beta^2)` in the
/// saddle-point exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantMode {
    /// Coefficient 1: limit `e^(t^2)`.
    Theorem,
    /// Coefficient 2.
    PropSaddle,
    /// Coefficient 1/2, from expanding `(N/2) G~` to first order in `c`: limit `e^(t^2/2)`.
    Rederived,
}

impl ConstantMode {
    pub const ALL: [ConstantMode; 3] = [
        ConstantMode::Theorem,
        ConstantMode::PropSaddle,
        ConstantMode::Rederived,
    ];

    pub fn kappa(self) -> f64 {
        match self {
            ConstantMode::Theorem => 1.0,
            ConstantMode::PropSaddle => 2.0,
            ConstantMode::Rederived => 0.5,
        }
    }
}

/// `exp(kappa t^2 (1 - beta^2) m_N'(gamma) / (4 beta^2))` with normalized `t`;
/// `m_N'(gamma) = G''(gamma)`.
pub fn overlap_mgf_saddle(saddle: &SaddleInfo, t: f64, mode: ConstantMode) -> Result<f64> {
    let beta = saddle.beta;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SskError::Domain(format!("saddle MGF needs 0 < beta < 1, got {beta}")));
    }
    Ok((mode.kappa() * t * t * (1.0 - beta * beta) * saddle.d2 / (4.0 * beta * beta)).exp())
}

/// Same formula with `m_N'(gamma)` replaced by `m_sc'(gamma_hat)`.
pub fn overlap_mgf_saddle_semicircle(beta: f64, t: f64, mode: ConstantMode) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SskError::Domain(format!("saddle MGF needs 0 < beta < 1, got {beta}")));
    }
    let mp = m_sc_derivative(Complex64::new(gamma_hat(beta)?, 0.0))?.re;
    Ok((mode.kappa() * t * t * (1.0 - beta * beta) * mp / (4.0 * beta * beta)).exp())
}
