use super::OverlapBatch;
use crate::error::{Result, SskError};
use serde::{Deserialize, Serialize};

pub const MIN_PAIRS: usize = 100;

/// Sample moments with delete-one jackknife standard errors. Skewness and
/// kurtosis are the plug-in `m3/m2^1.5` and `m4/m2^2 - 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub count: usize,
    pub mean: f64,
    pub mean_se: f64,
    /// Unbiased.
    pub variance: f64,
    pub variance_se: f64,
    pub skewness: f64,
    pub skewness_se: f64,
    pub excess_kurtosis: f64,
    pub excess_kurtosis_se: f64,
}

pub fn moment_summary(b: &OverlapBatch) -> Result<MomentSummary> {
    moment_summary_of(&b.u)
}

#[derive(Clone, Copy)]
struct Stats {
    mean: f64,
    var: f64,
    skew: f64,
    kurt: f64,
}

/// Statistics from power sums of centred data.
fn from_sums(n: f64, s1: f64, s2: f64, s3: f64, s4: f64) -> Stats {
    let m = s1 / n;
    let (e2, e3, e4) = (s2 / n, s3 / n, s4 / n);
    let m2 = e2 - m * m;
    let m3 = e3 - 3.0 * m * e2 + 2.0 * m * m * m;
    let m4 = e4 - 4.0 * m * e3 + 6.0 * m * m * e2 - 3.0 * m.powi(4);
    Stats {
        mean: m,
        var: m2 * n / (n - 1.0),
        skew: m3 / m2.powf(1.5),
        kurt: m4 / (m2 * m2) - 3.0,
    }
}

pub fn moment_summary_of(xs: &[f64]) -> Result<MomentSummary> {
    if xs.len() < MIN_PAIRS {
        return Err(SskError::TooFewSamples {
            need: MIN_PAIRS,
            got: xs.len(),
        });
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(SskError::Numeric("non-finite sample".into()));
    }
    let c = crate::numeric::mean(xs);
    let d: Vec<f64> = xs.iter().map(|x| x - c).collect();
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || scale <= 1e-14 * c.abs() {
        return Err(SskError::Degenerate("zero variance".into()));
    }
    let sums = |p: i32| crate::numeric::ksum(d.iter().map(|v| v.powi(p)));
    let (s1, s2, s3, s4) = (sums(1), sums(2), sums(3), sums(4));
    let n = d.len() as f64;
    let full = from_sums(n, s1, s2, s3, s4);
    let loo: Vec<Stats> = d
        .iter()
        .map(|&v| from_sums(n - 1.0, s1 - v, s2 - v * v, s3 - v.powi(3), s4 - v.powi(4)))
        .collect();
    let se = |f: fn(&Stats) -> f64| -> f64 {
        let vals: Vec<f64> = loo.iter().map(f).collect();
        let m = crate::numeric::mean(&vals);
        let ss = crate::numeric::ksum(vals.iter().map(|v| (v - m) * (v - m)));
        ((n - 1.0) / n * ss).sqrt()
    };
    Ok(MomentSummary {
        count: xs.len(),
        mean: full.mean + c,
        mean_se: se(|s| s.mean),
        variance: full.var,
        variance_se: se(|s| s.var),
        skewness: full.skew,
        skewness_se: se(|s| s.skew),
        excess_kurtosis: full.kurt,
        excess_kurtosis_se: se(|s| s.kurt),
    })
}
