use super::GibbsTarget;
use crate::error::{Result, SskError};
use crate::numeric::{GaussLegendre, KahanSum};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    /// Difference from the same rule at half the nodes.
    pub error: f64,
    pub nodes: usize,
}

/// `<exp(t <x, y>)>` for two independent replicas by direct angular
/// quadrature: periodic trapezoid on the circle (N = 2), Gauss-Legendre in
/// `cos(theta)` times trapezoid in `phi` on the 2-sphere (N = 3).
pub fn oracle_mgf_small_n(tgt: &GibbsTarget, t: f64, nodes: usize) -> Result<OracleValue> {
    if !t.is_finite() {
        return Err(SskError::Domain(format!("t must be finite, got {t}")));
    }
    if nodes < 4 {
        return Err(SskError::Domain(format!("need at least 4 nodes, got {nodes}")));
    }
    let rule = |m: usize| -> Result<f64> {
        match tgt.n() {
            2 => Ok(circle(tgt, t, m)),
            3 => Ok(sphere(tgt, t, m)),
            n => Err(SskError::UnsupportedDimension {
                n,
                reason: "angular oracle exists for N = 2 and N = 3 only".into(),
            }),
        }
    };
    let value = rule(nodes)?;
    let coarse = rule(nodes / 2)?;
    Ok(OracleValue {
        value,
        error: (value - coarse).abs(),
        nodes,
    })
}

/// The kernel depends on `theta_j - theta_k` only, so the double sum is
/// `sum_d K(d) sum_j w_j w_(j+d)`.
fn circle(tgt: &GibbsTarget, t: f64, m: usize) -> f64 {
    let l = tgt.spectrum.lambdas();
    let s = 2.0 * tgt.beta;
    let w: Vec<f64> = (0..m)
        .map(|j| {
            let th = 2.0 * PI * j as f64 / m as f64;
            let sn = th.sin();
            // shifted by lambda_1 so the largest weight is 1
            (s * (l[1] - l[0]) * sn * sn).exp()
        })
        .collect();
    let total: KahanSum = w.iter().copied().collect();
    let mut num = KahanSum::new();
    for d in 0..m {
        let k = (t * (2.0 * PI * d as f64 / m as f64).cos()).exp();
        let mut a = KahanSum::new();
        for j in 0..m {
            a.add(w[j] * w[(j + d) % m]);
        }
        num.add(k * a.value());
    }
    num.value() / (total.value() * total.value())
}

fn sphere(tgt: &GibbsTarget, t: f64, m: usize) -> f64 {
    let l = tgt.spectrum.lambdas();
    let s = 3.0 * tgt.beta;
    let gl = GaussLegendre::new(m);
    let nphi = 2 * m;
    let mut pts: Vec<[f64; 3]> = Vec::with_capacity(m * nphi);
    let mut wts: Vec<f64> = Vec::with_capacity(m * nphi);
    for (&u, &gw) in gl.nodes.iter().zip(&gl.weights) {
        let r = (1.0 - u * u).max(0.0).sqrt();
        for k in 0..nphi {
            let (sn, cs) = (2.0 * PI * k as f64 / nphi as f64).sin_cos();
            let x = [u, r * cs, r * sn];
            let e = (l[1] - l[0]) * x[1] * x[1] + (l[2] - l[0]) * x[2] * x[2];
            pts.push(x);
            wts.push(gw * (s * e).exp());
        }
    }
    let total: KahanSum = wts.iter().copied().collect();
    let rows = crate::par::map_range(pts.len(), |i| {
        let xi = pts[i];
        let mut acc = KahanSum::new();
        acc.add(0.5 * wts[i]);
        for j in i + 1..pts.len() {
            let xj = pts[j];
            let d = xi[0] * xj[0] + xi[1] * xj[1] + xi[2] * xj[2];
            acc.add(wts[j] * (t * (d - 1.0)).exp());
        }
        wts[i] * acc.value()
    });
    // kernel scaled by exp(-t) keeps terms bounded for t > 0
    let num: KahanSum = rows.into_iter().collect();
    let tt = total.value();
    2.0 * num.value() * t.exp() / (tt * tt)
}
