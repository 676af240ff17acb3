use super::integrals::{effective_t, log_coupling};
use super::plan::{ContourSpec, Line, RuleCache};
use crate::error::{Result, SskError};
use crate::numeric::{linspace, KahanSum};
use crate::potential::LogPotential;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub n: usize,
    pub t: f64,
    pub delta1: f64,
    /// Half-width `N^(-2/3 + delta1)` of the central square.
    pub radius: f64,
    pub max_deviation: f64,
    /// `N^(-0.1)`.
    pub threshold: f64,
    pub within: bool,
}

/// Compares `exp((N/2)(G~(z, w) - G(z) - G(w)))` with
/// `exp(t^2 (1 - beta^2) / (8 beta^2) * (1/N) sum 1/((z - l)(w - l)))` on a
/// `points x points` grid of the central square around the saddle (normalized `t`).
pub fn factorization_check(
    p: &LogPotential<'_>,
    t: f64,
    delta1: f64,
    points: usize,
) -> Result<FactorizationReport> {
    if points < 2 {
        return Err(SskError::Domain("need at least 2 grid points".into()));
    }
    let n = p.n();
    let nf = n as f64;
    let beta = p.beta();
    let t_eff = effective_t(p, t, true)?;
    let saddle = p.find_saddle(1e-12)?;
    if saddle.gap <= t_eff.abs() / (2.0 * beta * nf) {
        return Err(SskError::Domain(format!(
            "saddle gap {} is below |t'|/(2 beta N); the factorization is not defined",
            saddle.gap
        )));
    }
    let line = Line::new(p, saddle.gamma)?;
    let c = t_eff * t_eff / (4.0 * beta * beta * nf * nf);
    let coef = t * t * (1.0 - beta * beta) / (8.0 * beta * beta);
    let radius = nf.powf(-2.0 / 3.0 + delta1);
    let grid = linspace(-radius, radius, points);
    let row = |s: f64| -> (Vec<Complex64>, Vec<f64>) {
        line.a
            .iter()
            .map(|&a| {
                let u = Complex64::new(a, s).inv();
                (u, u.norm())
            })
            .unzip()
    };
    let rows: Vec<_> = grid.iter().map(|&s| row(s)).collect();
    let mut worst = 0.0f64;
    for (u, ua) in &rows {
        for (v, va) in &rows {
            let exact = -0.5 * log_coupling(u, ua, v, va, c, false);
            let mut dd = crate::numeric::ComplexKahanSum::new();
            for k in 0..n {
                dd.add(u[k] * v[k]);
            }
            let approx = coef * dd.value() / nf;
            worst = worst.max(((exact - approx).exp() - 1.0).norm());
        }
    }
    let threshold = nf.powf(-0.1);
    Ok(FactorizationReport {
        n,
        t,
        delta1,
        radius,
        max_deviation: worst,
        threshold,
        within: worst <= threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffCenterReport {
    pub n: usize,
    pub delta1: f64,
    pub radius: f64,
    /// `int_{|s| > radius} |f| / int f`, including the certified tail.
    pub fraction: f64,
}

/// Share of the line integral's modulus mass beyond `|s| = N^(-2/3 + delta1)`.
pub fn off_center_fraction(
    p: &LogPotential<'_>,
    spec: &ContourSpec,
    delta1: f64,
) -> Result<OffCenterReport> {
    let line = Line::new(p, spec.gamma)?;
    let nf = p.n() as f64;
    let radius = nf.powf(-2.0 / 3.0 + delta1);
    let mut rules = RuleCache::new();
    let mut outside = KahanSum::new();
    let mut total = KahanSum::new();
    for pan in &spec.panels {
        let rule = rules.get(pan.nodes).clone();
        // split the panel that straddles the radius
        let pieces: Vec<(f64, f64)> = if pan.a < radius && radius < pan.b {
            vec![(pan.a, radius), (radius, pan.b)]
        } else {
            vec![(pan.a, pan.b)]
        };
        for (a, b) in pieces {
            for (s, w) in rule.mapped(a, b) {
                let f = line.f(s);
                total.add(w * f.re);
                if a >= radius {
                    outside.add(w * f.norm());
                }
            }
        }
    }
    let fraction = (outside.value() + 0.5 * spec.tail_bound) / total.value();
    Ok(OffCenterReport {
        n: p.n(),
        delta1,
        radius,
        fraction,
    })
}
