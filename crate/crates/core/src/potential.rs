//! The log-potential `G(z) = 2 beta z - (1/N) sum log(z - lambda_i)`, the
//! two-replica potential `G~(z, w, t)`, their derivatives and the real saddle
//! point `gamma > lambda_1` where `G'(gamma) = 0`.
//!
//! Sign convention: `G'(z) = 2 beta - (1/N) sum 1/(z - lambda_i)`, so the saddle
//! solves `-m_N(gamma) = 2 beta`, mirroring `-m_sc(gamma_hat) = 2 beta`.

use crate::error::{Result, SskError};
use crate::numeric::{bisect_increasing, median, ComplexKahanSum, KahanSum};
use crate::statkit::{loglog_slope, SlopeFit};
use crate::wigner::{sample_spectrum, Spectrum, SpectrumMethod};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Inverse temperature, fixed or tied to `N` through the critical window
/// `beta_N = 1 - c N^(-1/3 + tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum BetaSchedule {
    Fixed { beta: f64 },
    CriticalWindow { c: f64, tau: f64 },
}

impl BetaSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BetaSchedule::Fixed { beta } => {
                if !(beta.is_finite() && beta > 0.0) {
                    return Err(SskError::Config(format!("beta must be positive, got {beta}")));
                }
            }
            BetaSchedule::CriticalWindow { c, tau } => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(SskError::Config(format!("window constant c must be positive, got {c}")));
                }
                if !(tau > 0.0 && tau < 1.0 / 3.0) {
                    return Err(SskError::Config(format!("tau must lie in (0, 1/3), got {tau}")));
                }
            }
        }
        Ok(())
    }

    /// `beta` at size `n`; window mode requires the result to land in (0, 1).
    pub fn beta_at(&self, n: usize) -> Result<f64> {
        self.validate()?;
        match *self {
            BetaSchedule::Fixed { beta } => Ok(beta),
            BetaSchedule::CriticalWindow { c, tau } => {
                let beta = 1.0 - c * (n as f64).powf(-1.0 / 3.0 + tau);
                if !(beta > 0.0 && beta < 1.0) {
                    return Err(SskError::Config(format!(
                        "window schedule gives beta = {beta} at N = {n}; need (0, 1)"
                    )));
                }
                Ok(beta)
            }
        }
    }

    pub fn tau(&self) -> Option<f64> {
        match *self {
            BetaSchedule::CriticalWindow { tau, .. } => Some(tau),
            BetaSchedule::Fixed { .. } => None,
        }
    }
}

/// `G` for a fixed spectrum and inverse temperature.
#[derive(Debug, Clone, Copy)]
pub struct LogPotential<'a> {
    beta: f64,
    spectrum: &'a Spectrum,
}

/// Saddle point and the local data the contour code needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleInfo {
    pub n: usize,
    pub beta: f64,
    pub gamma: f64,
    /// `(beta + 1/beta)/2`; only meaningful for `beta <= 1`.
    pub gamma_hat: Option<f64>,
    /// `gamma - lambda_1`.
    pub gap: f64,
    pub g_at_gamma: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
}

impl<'a> LogPotential<'a> {
    pub fn new(beta: f64, spectrum: &'a Spectrum) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(SskError::Domain(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { beta, spectrum })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn spectrum(&self) -> &'a Spectrum {
        self.spectrum
    }

    pub fn n(&self) -> usize {
        self.spectrum.n()
    }

    fn nf(&self) -> f64 {
        self.spectrum.n() as f64
    }

    /// `G(z)` for `Re z > lambda_1`, per-factor principal logarithms.
    pub fn g_value(&self, z: Complex64) -> Result<Complex64> {
        if !(z.re > self.spectrum.top()) {
            return Err(SskError::Domain(format!(
                "G requires Re z > lambda_1 = {} (got {})",
                self.spectrum.top(),
                z.re
            )));
        }
        let mut acc = ComplexKahanSum::new();
        for &l in self.spectrum.lambdas() {
            acc.add((z - l).ln());
        }
        Ok(2.0 * self.beta * z - acc.value() / self.nf())
    }

    /// `G(x)` on the real axis above the spectrum.
    pub fn g_real(&self, x: f64) -> f64 {
        let s: KahanSum = self.spectrum.lambdas().iter().map(|l| (x - l).ln()).collect();
        2.0 * self.beta * x - s.value() / self.nf()
    }

    /// `G^(k)(z)` for `k = 1..=4`.
    pub fn g_derivative(&self, z: Complex64, k: u32) -> Result<Complex64> {
        if !(1..=4).contains(&k) {
            return Err(SskError::Domain(format!("derivative order {k} not in 1..=4")));
        }
        let mut acc = ComplexKahanSum::new();
        for &l in self.spectrum.lambdas() {
            let d = z - l;
            if d.norm() <= f64::EPSILON * z.norm().max(1.0) {
                return Err(SskError::Pole { re: z.re, im: z.im });
            }
            acc.add(d.inv().powu(k));
        }
        let s = acc.value() / self.nf();
        Ok(match k {
            1 => 2.0 * self.beta - s,
            2 => s,
            3 => -2.0 * s,
            _ => 6.0 * s,
        })
    }

    /// `G'(x)` together with a scale for its rounding error.
    fn g_prime_real(&self, x: f64) -> (f64, f64) {
        let mut acc = KahanSum::new();
        for &l in self.spectrum.lambdas() {
            acc.add(1.0 / (x - l));
        }
        let s = acc.value() / self.nf();
        (2.0 * self.beta - s, 2.0 * self.beta + s.abs())
    }

    /// `(1/N) sum (x - lambda)^(-p)` for `p = 2, 3, 4`.
    fn inverse_power_sums(&self, x: f64) -> [f64; 3] {
        let mut acc = [KahanSum::new(); 3];
        for &l in self.spectrum.lambdas() {
            let r = 1.0 / (x - l);
            let r2 = r * r;
            acc[0].add(r2);
            acc[1].add(r2 * r);
            acc[2].add(r2 * r2);
        }
        let nf = self.nf();
        [acc[0].value() / nf, acc[1].value() / nf, acc[2].value() / nf]
    }

    /// Unique root of `G'` in `(lambda_1, inf)`. `tol` bounds `|G'(gamma)| / beta`
    /// (loosened to the rounding floor of the spectral sum when that is larger).
    pub fn find_saddle(&self, tol: f64) -> Result<SaddleInfo> {
        let beta = self.beta;
        let top = self.spectrum.top();
        let nf = self.nf();
        let lo0 = top + 1.0 / (3.0 * beta * nf);
        let (g_lo, _) = self.g_prime_real(lo0);
        if !g_lo.is_finite() || g_lo >= 0.0 {
            return Err(SskError::Numeric(format!(
                "G'(lambda_1 + 1/(3 beta N)) = {g_lo} is not negative"
            )));
        }
        let mut dist = 1.0;
        let mut hi = top + dist;
        let mut doublings = 0;
        loop {
            let (g, _) = self.g_prime_real(hi);
            if !g.is_finite() {
                return Err(SskError::Numeric(format!("G'({hi}) is not finite")));
            }
            if g > 0.0 {
                break;
            }
            dist *= 2.0;
            hi = top + dist;
            doublings += 1;
            if doublings > 2000 {
                return Err(SskError::Numeric("could not bracket the saddle point".into()));
            }
        }
        let lo = if hi - dist / 2.0 > lo0 && doublings > 0 {
            top + dist / 2.0
        } else {
            lo0
        };
        // bisection down to a fraction of the current gap estimate
        let gap_estimate = lo - top;
        let (mut lo, mut hi) =
            bisect_increasing(|x| self.g_prime_real(x).0, lo, hi, 1e-3 * gap_estimate, 400);

        let mut x = 0.5 * (lo + hi);
        let mut converged = false;
        for _ in 0..100 {
            let (g, scale) = self.g_prime_real(x);
            let floor = 64.0 * f64::EPSILON * scale;
            if g.abs() <= (tol * beta).max(floor) {
                converged = true;
                // a few extra steps while they still shrink |G'|
                for _ in 0..3 {
                    let next = x - g / self.inverse_power_sums(x)[0];
                    if !(next > lo && next < hi) {
                        break;
                    }
                    let (gn, _) = self.g_prime_real(next);
                    if gn.abs() >= g.abs() {
                        break;
                    }
                    x = next;
                    if gn == 0.0 {
                        break;
                    }
                }
                break;
            }
            if g < 0.0 {
                lo = lo.max(x);
            } else {
                hi = hi.min(x);
            }
            let d2 = self.inverse_power_sums(x)[0];
            let mut next = x - g / d2;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if next == x {
                converged = true;
                break;
            }
            x = next;
        }
        if !converged {
            return Err(SskError::Numeric(format!(
                "saddle refinement stalled at x = {x}, G' = {}",
                self.g_prime_real(x).0
            )));
        }
        let [d2, m3, m4] = self.inverse_power_sums(x);
        Ok(SaddleInfo {
            n: self.n(),
            beta,
            gamma: x,
            gamma_hat: if beta <= 1.0 { gamma_hat(beta).ok() } else { None },
            gap: x - top,
            g_at_gamma: self.g_real(x),
            d2,
            d3: -2.0 * m3,
            d4: 6.0 * m4,
        })
    }

    /// `2 beta (z + w) - (1/N) sum log((z - l)(w - l) - t^2/(4 beta^2 N^2))`,
    /// per-factor principal logarithms. A factor on the closed negative real
    /// axis is a branch-cut error.
    pub fn gtilde_value(&self, z: Complex64, w: Complex64, t: f64) -> Result<Complex64> {
        let nf = self.nf();
        let c = t * t / (4.0 * self.beta * self.beta * nf * nf);
        let mut acc = ComplexKahanSum::new();
        for &l in self.spectrum.lambdas() {
            let f = (z - l) * (w - l) - c;
            if f.im == 0.0 && f.re <= 0.0 {
                return Err(SskError::BranchCut {
                    re: f.re,
                    im: f.im,
                    context: format!("G~ factor at lambda = {l}"),
                });
            }
            acc.add(f.ln());
        }
        Ok(2.0 * self.beta * (z + w) - acc.value() / nf)
    }
}

/// `(beta + 1/beta)/2`, the root of `-m_sc(x) = 2 beta` for `0 < beta <= 1`.
pub fn gamma_hat(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(SskError::Domain(format!("gamma_hat needs 0 < beta <= 1, got {beta}")));
    }
    Ok(0.5 * (beta + 1.0 / beta))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapRow {
    pub n: usize,
    pub seed: u64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda1: f64,
    pub gap: f64,
    /// `gap * 3 beta N`, always > 1.
    pub gap_over_floor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapScalingReport {
    pub schedule: BetaSchedule,
    pub rows: Vec<GapRow>,
    pub ns: Vec<usize>,
    pub median_gaps: Vec<f64>,
    pub fit: Option<SlopeFit>,
    /// `-2/3 + 2 tau` in window mode.
    pub expected_slope: Option<f64>,
}

/// Per-seed saddle gaps `gamma - lambda_1` and the log-log slope of their
/// median against `N`.
pub fn gap_scaling_statistic(
    schedule: BetaSchedule,
    ns: &[usize],
    seeds: &[u64],
    method: SpectrumMethod,
) -> Result<GapScalingReport> {
    schedule.validate()?;
    let mut rows = Vec::with_capacity(ns.len() * seeds.len());
    let mut median_gaps = Vec::with_capacity(ns.len());
    for &n in ns {
        let beta = schedule.beta_at(n)?;
        let cells: Vec<Result<GapRow>> = crate::par::map(seeds, |&seed| {
            let s = sample_spectrum(n, seed, method)?;
            let saddle = LogPotential::new(beta, &s)?.find_saddle(1e-12)?;
            Ok(GapRow {
                n,
                seed,
                beta,
                gamma: saddle.gamma,
                lambda1: s.top(),
                gap: saddle.gap,
                gap_over_floor: saddle.gap * 3.0 * beta * n as f64,
            })
        });
        let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
        let gaps: Vec<f64> = cells.iter().map(|r| r.gap).collect();
        median_gaps.push(median(&gaps));
        rows.extend(cells);
    }
    let fit = if ns.len() >= 3 {
        let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        Some(loglog_slope(&xs, &median_gaps)?)
    } else {
        None
    };
    Ok(GapScalingReport {
        schedule,
        rows,
        ns: ns.to_vec(),
        median_gaps,
        fit,
        expected_slope: schedule.tau().map(|tau| -2.0 / 3.0 + 2.0 * tau),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivativeBoundReport {
    pub k: u32,
    pub tau: f64,
    pub epsilon_prime: f64,
    pub max_abs: f64,
    /// `N^(2k/3 - (2k-3) tau - 1 + eps')` for `k >= 2`, `N^eps'` for `k = 1`
    /// (constant taken as 1).
    pub bound: f64,
    pub ratio: f64,
    pub per_point: Vec<f64>,
}

/// The stated bound on `|G^(k)|` along the vertical line through the saddle.
pub fn derivative_bound(n: usize, k: u32, tau: f64, epsilon_prime: f64) -> f64 {
    let nf = n as f64;
    if k == 1 {
        nf.powf(epsilon_prime)
    } else {
        let kf = k as f64;
        nf.powf(2.0 * kf / 3.0 - (2.0 * kf - 3.0) * tau - 1.0 + epsilon_prime)
    }
}

/// `max_s |G^(k)(gamma + i s)|` over `s_grid` relative to [`derivative_bound`].
pub fn derivative_bound_check(
    p: &LogPotential<'_>,
    saddle: &SaddleInfo,
    s_grid: &[f64],
    k: u32,
    tau: f64,
    epsilon_prime: f64,
) -> Result<DerivativeBoundReport> {
    if !(1..=4).contains(&k) {
        return Err(SskError::Domain(format!("derivative order {k} not in 1..=4")));
    }
    let per_point = s_grid
        .iter()
        .map(|&s| {
            p.g_derivative(Complex64::new(saddle.gamma, s), k)
                .map(|v| v.norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_abs = per_point.iter().copied().fold(0.0, f64::max);
    let bound = derivative_bound(p.n(), k, tau, epsilon_prime);
    Ok(DerivativeBoundReport {
        k,
        tau,
        epsilon_prime,
        max_abs,
        bound,
        ratio: max_abs / bound,
        per_point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wigner::{m_sc, m_sc_derivative};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn spec(v: Vec<f64>) -> Spectrum {
        Spectrum::new(v).unwrap()
    }

    #[test]
    fn g_value_closed_forms() {
        let s = spec(vec![0.0]);
        let p = LogPotential::new(0.7, &s).unwrap();
        assert!((p.g_value(c(1.0, 0.0)).unwrap() - 1.4).norm() < 1e-15);
        let s = spec(vec![0.3; 5]);
        let p = LogPotential::new(0.4, &s).unwrap();
        assert!((p.g_value(c(1.3, 0.0)).unwrap().re - 0.8 * 1.3).abs() < 1e-15);
        assert!(matches!(p.g_value(c(0.2, 1.0)), Err(SskError::Domain(_))));
    }

    #[test]
    fn g_value_conjugate_symmetry() {
        let s = sample_spectrum(60, 3, SpectrumMethod::Dense).unwrap();
        let p = LogPotential::new(0.5, &s).unwrap();
        let gamma = p.find_saddle(1e-12).unwrap().gamma;
        let a = p.g_value(c(gamma, 0.1)).unwrap();
        let b = p.g_value(c(gamma, -0.1)).unwrap();
        assert!((a.conj() - b).norm() < 1e-14);
    }

    #[test]
    fn g_prime_one_point() {
        let s = spec(vec![0.0]);
        let beta = 0.8;
        let p = LogPotential::new(beta, &s).unwrap();
        let z = c(1.0 / (2.0 * beta), 0.0);
        assert!(p.g_derivative(z, 1).unwrap().norm() < 1e-15);
        let z = c(0.9, 0.4);
        let want = 2.0 * beta - z.inv();
        assert!((p.g_derivative(z, 1).unwrap() - want).norm() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let s = sample_spectrum(40, 1, SpectrumMethod::Dense).unwrap();
        let p = LogPotential::new(0.6, &s).unwrap();
        let gamma = p.find_saddle(1e-12).unwrap().gamma;
        let z = c(gamma + 0.05, 0.0);
        let h = 1e-5;
        for k in 2..=4u32 {
            let fd = (p.g_derivative(z + h, k - 1).unwrap() - p.g_derivative(z - h, k - 1).unwrap())
                / (2.0 * h);
            let exact = p.g_derivative(z, k).unwrap();
            assert!(
                (fd - exact).norm() / exact.norm() <= 1e-6,
                "k={k}: fd {fd} exact {exact}"
            );
        }
        // k = 1 against G itself
        let fd = (p.g_value(z + h).unwrap() - p.g_value(z - h).unwrap()) / (2.0 * h);
        let exact = p.g_derivative(z, 1).unwrap();
        assert!((fd - exact).norm() < 1e-8);
    }

    #[test]
    fn g_prime_is_two_beta_plus_m_n() {
        let s = sample_spectrum(30, 2, SpectrumMethod::Dense).unwrap();
        let p = LogPotential::new(0.5, &s).unwrap();
        let z = c(1.4, 0.2);
        let m = crate::wigner::m_n(z, &s, 0).unwrap();
        assert!((p.g_derivative(z, 1).unwrap() - (1.0 + m)).norm() < 1e-14);
    }

    #[test]
    fn saddle_closed_forms() {
        let s = spec(vec![0.0]);
        let sad = LogPotential::new(0.4, &s).unwrap().find_saddle(1e-12).unwrap();
        assert!((sad.gamma - 1.25).abs() < 1e-12);

        let s = spec(vec![-0.2; 7]);
        let sad = LogPotential::new(0.3, &s).unwrap().find_saddle(1e-12).unwrap();
        assert!((sad.gamma - (-0.2 + 1.0 / 0.6)).abs() < 1e-12);
    }

    #[test]
    fn saddle_root_is_bracketed_and_gap_floor_holds() {
        for seed in 0..4 {
            let s = sample_spectrum(200, seed, SpectrumMethod::Dense).unwrap();
            for beta in [0.3, 0.9, 1.5] {
                let p = LogPotential::new(beta, &s).unwrap();
                let sad = p.find_saddle(1e-12).unwrap();
                let delta = 1e-9 * sad.gap.max(1e-3);
                assert!(p.g_prime_real(sad.gamma - delta).0 < 0.0);
                assert!(p.g_prime_real(sad.gamma + delta).0 > 0.0);
                assert!(sad.gap > 1.0 / (3.0 * beta * 200.0));
                assert!(sad.d2 > 0.0);
            }
        }
    }

    #[test]
    fn saddle_close_to_gamma_hat_n2000() {
        let n = 2000;
        let bound = (n as f64).powf(-2.0 / 3.0);
        for seed in 0..3 {
            let s = sample_spectrum(n, 100 + seed, SpectrumMethod::Tridiagonal).unwrap();
            let sad = LogPotential::new(0.5, &s).unwrap().find_saddle(1e-12).unwrap();
            let gh = sad.gamma_hat.unwrap();
            assert!((sad.gamma - gh).abs() <= bound, "seed {seed}: {} vs {gh}", sad.gamma);
        }
    }

    #[test]
    fn gamma_hat_identities() {
        assert_eq!(gamma_hat(1.0).unwrap(), 1.0);
        assert_eq!(gamma_hat(0.5).unwrap(), 1.25);
        assert!((gamma_hat(0.9).unwrap() - 1.0 - 0.01 / 1.8).abs() < 1e-15);
        assert!(gamma_hat(0.0).is_err());
        for i in 1..100 {
            let beta = i as f64 / 100.0;
            let gh = gamma_hat(beta).unwrap();
            let m = m_sc(c(gh, 0.0)).unwrap().re;
            assert!((-m - 2.0 * beta).abs() < 1e-12, "beta {beta}");
            let mp = m_sc_derivative(c(gh, 0.0)).unwrap().re;
            // rounding gh to a double perturbs gh - 1 ~ (1-beta)^2 relatively, so the
            // residual is measured against the size of the terms
            let rhs = 4.0 * beta * beta;
            assert!(((1.0 - beta * beta) * mp - rhs).abs() <= 1e-12 * rhs.max(1.0), "beta {beta}");
        }
    }

    #[test]
    fn gtilde_reduces_and_is_symmetric() {
        let s = sample_spectrum(25, 6, SpectrumMethod::Dense).unwrap();
        let p = LogPotential::new(0.5, &s).unwrap();
        let g = p.find_saddle(1e-12).unwrap().gamma;
        let (z, w) = (c(g, 0.3), c(g, -0.7));
        let sum = p.g_value(z).unwrap() + p.g_value(w).unwrap();
        assert!((p.gtilde_value(z, w, 0.0).unwrap() - sum).norm() < 1e-14);
        let a = p.gtilde_value(z, w, 0.4).unwrap();
        let b = p.gtilde_value(w, z, 0.4).unwrap();
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn gtilde_scalar_oracle() {
        let s = spec(vec![0.0]);
        let p = LogPotential::new(1.0, &s).unwrap();
        let (z, w, t) = (c(2.0, 0.0), c(2.0, 0.0), 2.0);
        // N = 1: 2 beta (z + w) - log(z w - t^2 / (4 beta^2))
        let want = 2.0 * (z + w) - (z * w - t * t / 4.0).ln();
        assert!((p.gtilde_value(z, w, t).unwrap() - want).norm() < 1e-15);
        assert!((want.re - (8.0 - 3f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn gtilde_factors_avoid_the_cut_on_vertical_lines() {
        let s = sample_spectrum(30, 4, SpectrumMethod::Dense).unwrap();
        let beta = 0.5;
        let p = LogPotential::new(beta, &s).unwrap();
        let nf = 30.0;
        let t = 3.0;
        let gamma = p.find_saddle(1e-12).unwrap().gamma.max(s.top() + t / (2.0 * beta * nf) + 1e-3);
        let cc = t * t / (4.0 * beta * beta * nf * nf);
        for i in -40..=40 {
            for j in -40..=40 {
                let (sv, rv) = (i as f64 * 0.05, j as f64 * 0.05);
                for &l in s.lambdas() {
                    let f = (c(gamma, sv) - l) * (c(gamma, rv) - l) - cc;
                    if f.im.abs() < 1e-12 {
                        assert!(f.re > 0.0);
                    }
                }
                assert!(p.gtilde_value(c(gamma, sv), c(gamma, rv), t).is_ok());
            }
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(BetaSchedule::CriticalWindow { c: 1.0, tau: 0.4 }.validate().is_err());
        assert!(BetaSchedule::Fixed { beta: -1.0 }.validate().is_err());
        let b = BetaSchedule::CriticalWindow { c: 1.0, tau: 0.2 }.beta_at(1000).unwrap();
        assert!((b - (1.0 - 1000f64.powf(-1.0 / 3.0 + 0.2))).abs() < 1e-15);
        assert!(BetaSchedule::CriticalWindow { c: 5.0, tau: 0.3 }.beta_at(10).is_err());
    }

    #[test]
    fn derivative_bound_consistency() {
        let s = sample_spectrum(300, 2, SpectrumMethod::Dense).unwrap();
        let p = LogPotential::new(0.7, &s).unwrap();
        let sad = p.find_saddle(1e-12).unwrap();
        let r = derivative_bound_check(&p, &sad, &[0.0, 0.01], 2, 0.2, 0.1).unwrap();
        assert!((r.per_point[0] - sad.d2).abs() < 1e-10 * sad.d2);
        let b1 = derivative_bound(300, 3, 0.1, 0.1);
        let b2 = derivative_bound(300, 3, 0.2, 0.1);
        assert!(b2 < b1);
    }

    #[test]
    fn fixed_beta_gap_approaches_gamma_hat_minus_edge() {
        let rep = gap_scaling_statistic(
            BetaSchedule::Fixed { beta: 0.5 },
            &[1000, 2000, 4000],
            &[1, 2, 3],
            SpectrumMethod::Tridiagonal,
        )
        .unwrap();
        let last = *rep.median_gaps.last().unwrap();
        let want = gamma_hat(0.5).unwrap() - 1.0;
        assert!((last - want).abs() < 0.01, "gap {last} vs {want}");
        assert!(rep.rows.iter().all(|r| r.gap_over_floor > 1.0));
        assert!(rep.fit.unwrap().slope.abs() < 0.1);
    }
}
