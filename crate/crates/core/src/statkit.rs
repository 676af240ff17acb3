//! Goodness-of-fit tests, log-log fits and histograms.

use crate::error::{Result, SskError};
use crate::numeric::{ksum, mean};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub reference_mean: f64,
    pub reference_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr_slope: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }
}

pub const KS_MIN_SAMPLES: usize = 50;

pub fn normal_cdf(x: f64, mean: f64, variance: f64) -> f64 {
    0.5 * libm::erfc(-(x - mean) / (2.0 * variance).sqrt())
}

pub fn normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    (-d * d / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
}

/// Asymptotic Kolmogorov tail `Q(l) = 2 sum (-1)^(k-1) exp(-2 k^2 l^2)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.18 {
        // the alternating series has not started to converge; Q is 1 to 1e-12 here
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100u32 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Stephens' small-sample correction for the effective size `ne`.
fn ks_p_value(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

/// One-sample KS distance to `Normal(mean, variance)` with two-sided p-value.
pub fn ks_gaussian(samples: &[f64], mean: f64, variance: f64) -> Result<KsResult> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(SskError::TooFewSamples {
            need: KS_MIN_SAMPLES,
            got: samples.len(),
        });
    }
    if !(variance > 0.0 && variance.is_finite()) || !mean.is_finite() {
        return Err(SskError::Domain(format!(
            "reference Normal({mean}, {variance}) is not valid"
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(SskError::Domain("non-finite sample".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = normal_cdf(x, mean, variance);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
        n: v.len(),
        reference_mean: mean,
        reference_variance: variance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTwoSample {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Two-sample KS with `ne = n1 n2 / (n1 + n2)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTwoSample> {
    for s in [a, b] {
        if s.len() < KS_MIN_SAMPLES {
            return Err(SskError::TooFewSamples {
                need: KS_MIN_SAMPLES,
                got: s.len(),
            });
        }
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    y.sort_by(|p, q| p.total_cmp(q));
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    Ok(KsTwoSample {
        statistic: d,
        p_value: ks_p_value(d, n1 * n2 / (n1 + n2)),
        n1: x.len(),
        n2: y.len(),
    })
}

/// Least squares of `log y` on `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(SskError::Domain(format!(
            "slope fit needs equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(SskError::TooFewSamples {
            need: 3,
            got: xs.len(),
        });
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(SskError::Domain("slope fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (mx, my) = (mean(&lx), mean(&ly));
    let sxx = ksum(lx.iter().map(|x| (x - mx) * (x - mx)));
    if sxx == 0.0 {
        return Err(SskError::Degenerate("all x values coincide".into()));
    }
    let sxy = ksum(lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)));
    let syy = ksum(ly.iter().map(|y| (y - my) * (y - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr = ksum(
        lx.iter()
            .zip(&ly)
            .map(|(x, y)| (y - intercept - slope * x).powi(2)),
    )
    .max(0.0);
    let dof = (xs.len() - 2) as f64;
    Ok(SlopeFit {
        slope,
        intercept,
        stderr_slope: (ssr / dof / sxx).sqrt(),
        r2: if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 },
    })
}

/// Equal-width bins on `[min, max]`; the last bin is closed. A constant
/// sample gets unit-width bins centred on its value.
pub fn histogram(samples: &[f64], bins: usize) -> Result<Histogram> {
    if bins < 2 {
        return Err(SskError::Domain(format!("need at least 2 bins, got {bins}")));
    }
    if samples.is_empty() {
        return Err(SskError::TooFewSamples { need: 1, got: 0 });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(SskError::Domain("non-finite sample".into()));
    }
    let mut lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0u64; bins];
    for &x in samples {
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let total = samples.len() as f64;
    let density = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / (total * (w[1] - w[0])))
        .collect();
    Ok(Histogram {
        edges,
        counts,
        density,
    })
}

/// Adjusted Fisher–Pearson sample skewness.
pub fn skewness(xs: &[f64]) -> Result<f64> {
    if xs.len() < 3 {
        return Err(SskError::TooFewSamples {
            need: 3,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let m = mean(xs);
    let m2 = ksum(xs.iter().map(|x| (x - m).powi(2))) / n;
    let m3 = ksum(xs.iter().map(|x| (x - m).powi(3))) / n;
    if m2 == 0.0 {
        return Err(SskError::Degenerate("zero variance".into()));
    }
    Ok((n * (n - 1.0)).sqrt() / (n - 2.0) * m3 / m2.powf(1.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, tag};
    use rand::Rng;
    use rand_distr::{Distribution, Normal, Uniform};

    /// Standard normal quantile by bisection on the CDF.
    fn normal_quantile(p: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid, 0.0, 1.0) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Q(1) and Q(1.36) from the series evaluated independently
        let q1: f64 = 2.0
            * (1..=50)
                .map(|k: i32| (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64).exp())
                .sum::<f64>();
        assert!((kolmogorov_q(1.0) - q1).abs() < 1e-14);
        assert!((kolmogorov_q(1.0) - 0.26999967167735456).abs() < 1e-12);
        assert!((kolmogorov_q(1.3581) - 0.05).abs() < 1e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
        assert!(kolmogorov_q(0.2) > 0.999_99);
    }

    #[test]
    fn quantile_samples_have_minimal_distance() {
        let n = 1000;
        let xs: Vec<f64> = (1..=n)
            .map(|i| normal_quantile((i as f64 - 0.5) / n as f64))
            .collect();
        let r = ks_gaussian(&xs, 0.0, 1.0).unwrap();
        assert!(r.statistic <= 1.0 / (2.0 * n as f64) + 1e-12, "{}", r.statistic);
        assert!(r.p_value > 0.999);
    }

    #[test]
    fn ks_calibration_under_the_null() {
        let normal = Normal::new(0.0, 2f64.sqrt()).unwrap();
        let mut fails = 0;
        for rep in 0..100 {
            let mut rng = stream(11, tag::SYNTHETIC, rep);
            let xs: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
            if ks_gaussian(&xs, 0.0, 2.0).unwrap().p_value <= 0.001 {
                fails += 1;
            }
        }
        assert!(fails <= 1, "{fails} rejections");
    }

    #[test]
    fn ks_power_against_uniform() {
        let u = Uniform::new(-1.0, 1.0).unwrap();
        let mut rng = stream(12, tag::SYNTHETIC, 0);
        let xs: Vec<f64> = (0..10_000).map(|_| u.sample(&mut rng)).collect();
        assert!(ks_gaussian(&xs, 0.0, 2.0).unwrap().p_value < 1e-6);
    }

    #[test]
    fn ks_rejects_bad_input() {
        assert!(matches!(
            ks_gaussian(&[0.0; 10], 0.0, 1.0),
            Err(SskError::TooFewSamples { .. })
        ));
        assert!(ks_gaussian(&[0.0; 100], 0.0, 0.0).is_err());
    }

    #[test]
    fn two_sample_ks() {
        let mut rng = stream(13, tag::SYNTHETIC, 0);
        let a: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..3000).map(|_| rng.random::<f64>()).collect();
        let c: Vec<f64> = (0..3000).map(|_| rng.random::<f64>() + 0.2).collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.001);
        assert!(ks_two_sample(&a, &c).unwrap().p_value < 1e-10);
        assert_eq!(ks_two_sample(&a, &a).unwrap().statistic, 0.0);
    }

    #[test]
    fn slope_exact_power_and_constant() {
        let xs = [1.0, 2.0, 5.0, 10.0];
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let f = loglog_slope(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!(f.stderr_slope < 1e-12);
        let f = loglog_slope(&xs, &[3.0; 4]).unwrap();
        assert!(f.slope.abs() < 1e-14);
        assert!(loglog_slope(&xs, &[1.0, -1.0, 1.0, 1.0]).is_err());
        assert!(loglog_slope(&xs[..2], &ys[..2]).is_err());
    }

    #[test]
    fn slope_with_noise() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = stream(14, tag::SYNTHETIC, 0);
        let xs: Vec<f64> = (0..8).map(|i| 10f64.powf(i as f64 / 7.0)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| x.powf(-4.0 / 3.0) * (1.0 + 0.05 * normal.sample(&mut rng)))
            .collect();
        let f = loglog_slope(&xs, &ys).unwrap();
        assert!((f.slope + 4.0 / 3.0).abs() < 0.15);
    }

    #[test]
    fn histogram_basics() {
        let h = histogram(&[0.0, 1.0], 2).unwrap();
        assert_eq!(h.counts, vec![1, 1]);
        let mut rng = stream(15, tag::SYNTHETIC, 0);
        let xs: Vec<f64> = (0..1000).map(|_| rng.random::<f64>().powi(3)).collect();
        let h = histogram(&xs, 17).unwrap();
        let mass: f64 = h.density.iter().map(|d| d * h.width()).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert_eq!(h.counts.iter().sum::<u64>(), 1000);
        assert!(histogram(&[], 4).is_err());
        assert!(histogram(&xs, 1).is_err());
        let h = histogram(&[2.0; 5], 4).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 5);
    }

    #[test]
    fn histogram_matches_gaussian_density() {
        let normal = Normal::new(0.0, 2f64.sqrt()).unwrap();
        let mut rng = stream(16, tag::SYNTHETIC, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| normal.sample(&mut rng)).collect();
        let h = histogram(&xs, 64).unwrap();
        let dev = h
            .centers()
            .iter()
            .zip(&h.density)
            .map(|(c, d)| (d - normal_pdf(*c, 0.0, 2.0)).abs())
            .fold(0.0, f64::max);
        assert!(dev <= 0.02, "{dev}");
    }

    #[test]
    fn skewness_signs() {
        let mut rng = stream(17, tag::SYNTHETIC, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>().powi(4)).collect();
        assert!(skewness(&xs).unwrap() > 1.0);
        let sym: Vec<f64> = (-50..=50).map(|i| i as f64).collect();
        assert!(skewness(&sym).unwrap().abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ks_affine_invariance(
                xs in prop::collection::vec(-3.0f64..3.0, 50..120),
                a in 0.1f64..10.0,
                b in -5.0f64..5.0,
            ) {
                let r1 = ks_gaussian(&xs, 0.2, 1.3).unwrap();
                let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
                let r2 = ks_gaussian(&ys, a * 0.2 + b, a * a * 1.3).unwrap();
                prop_assert!((r1.statistic - r2.statistic).abs() < 1e-9);
            }

            #[test]
            fn slope_scale_equivariance(
                ys in prop::collection::vec(0.1f64..10.0, 3..10),
                k in 0.01f64..100.0,
            ) {
                let xs: Vec<f64> = (1..=ys.len()).map(|i| i as f64).collect();
                let f1 = loglog_slope(&xs, &ys).unwrap();
                let scaled: Vec<f64> = ys.iter().map(|y| y * k).collect();
                let f2 = loglog_slope(&xs, &scaled).unwrap();
                prop_assert!((f1.slope - f2.slope).abs() < 1e-12);
                prop_assert!((f2.intercept - f1.intercept - k.ln()).abs() < 1e-10);
            }
        }
    }
}
