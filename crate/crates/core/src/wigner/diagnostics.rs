//! Random-matrix diagnostics: typical locations, rigidity, interval counts and
//! local-law residuals. All of them report; none of them assert.

use super::{m_n, m_sc, Spectrum};
use crate::error::{Result, SskError};
use crate::numeric::bisect_increasing;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Semicircle mass to the right of `x`: `(1/pi)(pi/2 - x sqrt(1-x^2) - asin x)`.
pub fn semicircle_tail_mass(x: f64) -> f64 {
    if x >= 1.0 {
        0.0
    } else if x <= -1.0 {
        1.0
    } else {
        (0.5 * PI - x * (1.0 - x * x).sqrt() - x.asin()) / PI
    }
}

pub fn semicircle_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    1.0 - semicircle_tail_mass(x)
}

/// Classical eigenvalue locations, decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypicalLocations {
    pub gammas: Vec<f64>,
}

impl TypicalLocations {
    pub fn n(&self) -> usize {
        self.gammas.len()
    }
}

/// Solves `N * int_{gamma_i}^1 rho_sc = i - 1/2` for every `i` by bisection.
pub fn typical_locations(n: usize) -> Result<TypicalLocations> {
    if n == 0 {
        return Err(SskError::InvalidDimension("n must be at least 1".into()));
    }
    let nf = n as f64;
    let gammas = (1..=n)
        .map(|i| {
            let target = (i as f64 - 0.5) / nf;
            // tail mass is decreasing in x, so negate it for the increasing solver
            let (lo, hi) = bisect_increasing(
                |x| target - semicircle_tail_mass(x),
                -1.0,
                1.0,
                0.0,
                200,
            );
            0.5 * (lo + hi)
        })
        .collect();
    Ok(TypicalLocations { gammas })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RigidityReport {
    /// `max_i |lambda_i - gamma_i| N^(2/3) min(i, N+1-i)^(1/3)`.
    pub statistic: f64,
    /// 1-based index attaining the maximum.
    pub argmax: usize,
    pub per_index: Vec<f64>,
}

pub fn rigidity_report(s: &Spectrum) -> Result<RigidityReport> {
    let n = s.n();
    let typical = typical_locations(n)?;
    let nf = n as f64;
    let scale = nf.powf(2.0 / 3.0);
    let per_index: Vec<f64> = s
        .lambdas()
        .iter()
        .zip(&typical.gammas)
        .enumerate()
        .map(|(k, (l, g))| {
            let i = k + 1;
            let edge_index = i.min(n + 1 - i) as f64;
            (l - g).abs() * scale * edge_index.cbrt()
        })
        .collect();
    let (argmax, statistic) = per_index
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(ia, a), (i, &v)| if v > a { (i, v) } else { (ia, a) });
    Ok(RigidityReport {
        statistic,
        argmax: argmax + 1,
        per_index,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalReport {
    pub intervals: Vec<(f64, f64)>,
    pub counts: Vec<usize>,
    pub semicircle_mass: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// `|#{lambda in I}/N - int_I rho_sc|` for each closed interval `I`.
pub fn interval_count_residual(s: &Spectrum, intervals: &[(f64, f64)]) -> Result<IntervalReport> {
    let nf = s.n() as f64;
    let mut counts = Vec::with_capacity(intervals.len());
    let mut masses = Vec::with_capacity(intervals.len());
    let mut residuals = Vec::with_capacity(intervals.len());
    for &(a, b) in intervals {
        if a.is_nan() || b.is_nan() || a > b {
            return Err(SskError::Domain(format!("bad interval [{a}, {b}]")));
        }
        let count = s.lambdas().iter().filter(|&&l| l >= a && l <= b).count();
        let mass = semicircle_cdf(b) - semicircle_cdf(a);
        counts.push(count);
        masses.push(mass);
        residuals.push((count as f64 / nf - mass).abs());
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(IntervalReport {
        intervals: intervals.to_vec(),
        counts,
        semicircle_mass: masses,
        residuals,
        max_residual,
    })
}

/// Dyadic partitions of `[-1, 1]` down to `2^levels` pieces, plus the whole line.
pub fn dyadic_intervals(levels: u32) -> Vec<(f64, f64)> {
    let mut out = vec![(f64::NEG_INFINITY, f64::INFINITY)];
    for k in 0..=levels {
        let pieces = 1usize << k;
        let width = 2.0 / pieces as f64;
        for j in 0..pieces {
            out.push((-1.0 + j as f64 * width, -1.0 + (j + 1) as f64 * width));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum LocalLawMode {
    /// Bulk domain `|E| <= 1/delta`, `N^(-1+delta) <= eta <= 1/delta`;
    /// bound `N^eps / (N eta)`.
    Inside { delta: f64, epsilon: f64 },
    /// Outside domain `|E| >= 1 + N^(-2/3+eps)`, `eta > 0`;
    /// bound `N^(-1+delta) / ((kappa+eta) + (kappa+eta)^2)`.
    Outside { delta: f64, epsilon: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalLawReport {
    pub mode: LocalLawMode,
    pub points: Vec<(f64, f64)>,
    pub residuals: Vec<f64>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// Quantiles of the ratio at 0.5, 0.9, 0.99, 1.0.
    pub quantiles: [f64; 4],
    pub exceed_count: usize,
}

/// Ratio of `|m_N - m_sc|` to the stated local-law bound on each grid point.
pub fn local_law_residual(
    s: &Spectrum,
    grid: &[Complex64],
    mode: LocalLawMode,
) -> Result<LocalLawReport> {
    let nf = s.n() as f64;
    let mut residuals = Vec::with_capacity(grid.len());
    let mut ratios = Vec::with_capacity(grid.len());
    for &z in grid {
        let (e, eta) = (z.re, z.im);
        let bound = match mode {
            LocalLawMode::Inside { delta, epsilon } => {
                let lo = nf.powf(-1.0 + delta);
                if e.abs() > 1.0 / delta || eta < lo * (1.0 - 1e-12) || eta > 1.0 / delta {
                    return Err(SskError::Domain(format!(
                        "z = {e}{eta:+}i outside the bulk domain for delta = {delta}"
                    )));
                }
                nf.powf(epsilon) / (nf * eta)
            }
            LocalLawMode::Outside { delta, epsilon } => {
                let edge = 1.0 + nf.powf(-2.0 / 3.0 + epsilon);
                if e.abs() < edge * (1.0 - 1e-12) || eta <= 0.0 {
                    return Err(SskError::Domain(format!(
                        "z = {e}{eta:+}i outside the exterior domain for epsilon = {epsilon}"
                    )));
                }
                let kappa = (e.abs() - 1.0).abs();
                let ke = kappa + eta;
                nf.powf(-1.0 + delta) / (ke + ke * ke)
            }
        };
        let r = (m_n(z, s, 0)? - m_sc(z)?).norm();
        residuals.push(r);
        ratios.push(r / bound);
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| -> f64 {
        if sorted.is_empty() {
            return f64::NAN;
        }
        let idx = ((sorted.len() - 1) as f64 * p).round() as usize;
        sorted[idx]
    };
    let quantiles = [q(0.5), q(0.9), q(0.99), q(1.0)];
    let max_ratio = sorted.last().copied().unwrap_or(f64::NAN);
    let exceed_count = ratios.iter().filter(|&&r| r > 1.0).count();
    Ok(LocalLawReport {
        mode,
        points: grid.iter().map(|z| (z.re, z.im)).collect(),
        residuals,
        ratios,
        max_ratio,
        quantiles,
        exceed_count,
    })
}

fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    let mut out: Vec<f64> = (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect();
    // endpoints exact, so grids never step outside their domain
    out[0] = a;
    out[n - 1] = b;
    out
}

/// Grid inside `S_N(delta)`: energies across the bulk and both edges, heights
/// log-spaced from `N^(-1+delta)` to `1/delta`.
pub fn inside_grid(n: usize, delta: f64, energies: usize, heights: usize) -> Vec<Complex64> {
    let nf = n as f64;
    let etas = geomspace(nf.powf(-1.0 + delta), 1.0 / delta, heights);
    let es = crate::numeric::linspace(-1.25, 1.25, energies);
    es.iter()
        .flat_map(|&e| etas.iter().map(move |&eta| Complex64::new(e, eta)))
        .collect()
}

/// Grid in the exterior domain: `|E| - 1` log-spaced from `N^(-2/3+eps)` to 2
/// on both sides, `eta` log-spaced from `1/N` to 1.
pub fn outside_grid(n: usize, epsilon: f64, energies: usize, heights: usize) -> Vec<Complex64> {
    let nf = n as f64;
    let kappas = geomspace(nf.powf(-2.0 / 3.0 + epsilon), 2.0, energies);
    let etas = geomspace(1.0 / nf, 1.0, heights);
    let mut out = Vec::with_capacity(2 * kappas.len() * etas.len());
    for &k in &kappas {
        for sign in [-1.0, 1.0] {
            for &eta in &etas {
                out.push(Complex64::new(sign * (1.0 + k), eta));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::GaussLegendre;
    use crate::wigner::{sample_spectrum, SpectrumMethod};

    #[test]
    fn typical_locations_symmetric_and_decreasing() {
        for n in [1usize, 2, 7, 10, 100] {
            let t = typical_locations(n).unwrap();
            assert!(t.gammas.windows(2).all(|w| w[0] > w[1]));
            assert!(t.gammas.iter().all(|g| g.abs() < 1.0));
            for i in 0..n {
                assert!((t.gammas[i] + t.gammas[n - 1 - i]).abs() < 1e-12);
            }
            for (i, g) in t.gammas.iter().enumerate() {
                let mass = semicircle_tail_mass(*g) * n as f64;
                assert!((mass - (i as f64 + 0.5)).abs() < 1e-12 * n as f64);
            }
        }
    }

    #[test]
    fn typical_location_n2_against_quadrature_bisection() {
        // independent route: tail mass by quadrature of rho_sc, then bisection
        let gl = GaussLegendre::new(80);
        let tail = |x: f64| {
            let (a, b) = (x.asin(), std::f64::consts::FRAC_PI_2);
            gl.integrate(a, b, |t| super::super::rho_sc(t.sin()) * t.cos())
        };
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if tail(mid) > 0.25 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let got = typical_locations(2).unwrap().gammas[0];
        assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
    }

    #[test]
    fn rigidity_zero_on_typical_and_reflection_invariant() {
        let t = typical_locations(64).unwrap();
        let s = Spectrum::new(t.gammas.clone()).unwrap();
        assert!(rigidity_report(&s).unwrap().statistic < 1e-9);

        let s = sample_spectrum(300, 8, SpectrumMethod::Dense).unwrap();
        let a = rigidity_report(&s).unwrap().statistic;
        let b = rigidity_report(&s.reflected()).unwrap().statistic;
        assert!((a - b).abs() < 1e-9 * a.max(1.0));
    }

    #[test]
    fn interval_residuals_basic() {
        let s = sample_spectrum(200, 1, SpectrumMethod::Dense).unwrap();
        let r = interval_count_residual(&s, &[(f64::NEG_INFINITY, f64::INFINITY)]).unwrap();
        assert_eq!(r.max_residual, 0.0);
        let r = interval_count_residual(&s, &[(1.5, 3.0), (-4.0, -1.3)]).unwrap();
        assert_eq!(r.counts, vec![0, 0]);
        assert!(interval_count_residual(&s, &[(1.0, 0.0)]).is_err());
    }

    #[test]
    fn typical_locations_reproduce_cdf() {
        let n = 50;
        let t = typical_locations(n).unwrap();
        for (i, g) in t.gammas.iter().enumerate() {
            let upper = semicircle_cdf(f64::INFINITY) - semicircle_cdf(*g);
            assert!((upper - (i as f64 + 0.5) / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn local_law_smoke_and_domains() {
        let s = Spectrum::new(vec![0.0]).unwrap();
        let r = local_law_residual(
            &s,
            &[Complex64::new(0.0, 10.0)],
            LocalLawMode::Inside {
                delta: 0.1,
                epsilon: 0.1,
            },
        )
        .unwrap();
        assert!(r.ratios[0].is_finite());

        let s = sample_spectrum(400, 2, SpectrumMethod::Dense).unwrap();
        let far = local_law_residual(
            &s,
            &[Complex64::new(0.2, 10.0)],
            LocalLawMode::Inside {
                delta: 0.1,
                epsilon: 0.1,
            },
        )
        .unwrap();
        assert!(far.max_ratio < 0.1, "far ratio {}", far.max_ratio);

        let bad = local_law_residual(
            &s,
            &[Complex64::new(0.0, 1e-6)],
            LocalLawMode::Inside {
                delta: 0.1,
                epsilon: 0.1,
            },
        );
        assert!(matches!(bad, Err(SskError::Domain(_))));
        let bad = local_law_residual(
            &s,
            &[Complex64::new(1.0, 0.1)],
            LocalLawMode::Outside {
                delta: 0.1,
                epsilon: 0.1,
            },
        );
        assert!(matches!(bad, Err(SskError::Domain(_))));
        let grid = outside_grid(400, 0.1, 6, 4);
        let out = local_law_residual(
            &s,
            &grid,
            LocalLawMode::Outside {
                delta: 0.1,
                epsilon: 0.1,
            },
        )
        .unwrap();
        assert_eq!(out.ratios.len(), grid.len());
    }
}
