use super::logscale::LogScaledComplex;
use super::plan::{coupling_constants, plan_contour, ContourSpec, Line, RuleCache};
use crate::error::{Result, SskError};
use crate::numeric::{ksum, KahanSum};
use crate::potential::{LogPotential, SaddleInfo};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

fn check_spec(p: &LogPotential<'_>, spec: &ContourSpec) -> Result<()> {
    if spec.n != p.n() || spec.beta != p.beta() {
        return Err(SskError::Domain(format!(
            "contour plan was made for (N = {}, beta = {}), not (N = {}, beta = {})",
            spec.n,
            spec.beta,
            p.n(),
            p.beta()
        )));
    }
    Ok(())
}

/// Nodes and weights of the panels ending at or before `limit`; `half` uses
/// the embedded lower-order rule for error estimates.
fn nodes(spec: &ContourSpec, limit: f64, half: bool) -> (Vec<f64>, Vec<f64>) {
    let mut rules = RuleCache::new();
    let mut s = Vec::new();
    let mut w = Vec::new();
    for pan in spec.panels.iter().filter(|p| p.b <= limit) {
        let m = if half { pan.nodes / 2 } else { pan.nodes };
        for (x, wx) in rules.get(m).mapped(pan.a, pan.b) {
            s.push(x);
            w.push(wx);
        }
    }
    (s, w)
}

/// `int_R f(s) ds = 2 int_0^S Re f`, with `|Q_m - Q_{m/2}|` plus the tail bound.
fn line_integral(line: &Line, spec: &ContourSpec) -> (f64, f64) {
    let eval = |half: bool| {
        let (s, w) = nodes(spec, spec.truncation, half);
        2.0 * ksum(s.iter().zip(&w).map(|(&x, &wx)| wx * line.f(x).re))
    };
    let full = eval(false);
    let half = eval(true);
    (full, (full - half).abs() + spec.tail_bound)
}

/// `int_{gamma - iS}^{gamma + iS} exp((N/2)(G(z) - G(gamma))) dz`, which is
/// `i` times a positive real.
pub fn partition_integral(p: &LogPotential<'_>, spec: &ContourSpec) -> Result<LogScaledComplex> {
    Ok(partition_integral_with_error(p, spec)?.0)
}

/// [`partition_integral`] with an absolute error estimate on its modulus.
pub fn partition_integral_with_error(
    p: &LogPotential<'_>,
    spec: &ContourSpec,
) -> Result<(LogScaledComplex, f64)> {
    check_spec(p, spec)?;
    let line = Line::new(p, spec.gamma)?;
    let (value, err) = line_integral(&line, spec);
    if !(value > 0.0) {
        return Err(SskError::Numeric(format!(
            "partition integral came out non-positive ({value}); the contour plan is inadequate"
        )));
    }
    if err > spec.tol * spec.width0 * 10.0 {
        return Err(SskError::Quadrature {
            tol: spec.tol,
            estimate: err / spec.width0,
            hint: "panel rules disagree; replan with a smaller tol".into(),
        });
    }
    Ok((LogScaledComplex::new(value.ln(), PI / 2.0), err))
}

/// `i sqrt(4 pi / (N G''(gamma)))`, the Gaussian approximation of
/// [`partition_integral`].
pub fn saddle_denominator_approx(saddle: &SaddleInfo, n: usize) -> Result<LogScaledComplex> {
    if !(saddle.d2 > 0.0) {
        return Err(SskError::Domain(format!("G''(gamma) = {} is not positive", saddle.d2)));
    }
    Ok(LogScaledComplex::new(
        0.5 * (4.0 * PI / (n as f64 * saddle.d2)).ln(),
        PI / 2.0,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionEstimate {
    pub n: usize,
    pub beta: f64,
    pub log_z: f64,
    /// `log Z / N`.
    pub free_energy: f64,
    /// Modulus of the centred line integral.
    pub integral: f64,
    pub integral_error: f64,
    pub gamma: f64,
    pub g_at_gamma: f64,
}

/// `log Z_N = log Gamma(N/2) - (N/2 - 1) log(N beta) + (N/2) G(gamma) + log(I / (2 pi))`.
pub fn log_partition_function(p: &LogPotential<'_>, tol: f64) -> Result<PartitionEstimate> {
    let spec = plan_contour(p, 0.0, tol)?;
    let (li, err) = partition_integral_with_error(p, &spec)?;
    let nf = p.n() as f64;
    let log_z = libm::lgamma(0.5 * nf) - (0.5 * nf - 1.0) * (nf * p.beta()).ln()
        + 0.5 * nf * spec.g_anchor
        + li.log_magnitude
        - (2.0 * PI).ln();
    Ok(PartitionEstimate {
        n: p.n(),
        beta: p.beta(),
        log_z,
        free_energy: log_z / nf,
        integral: li.norm(),
        integral_error: err,
        gamma: spec.gamma,
        g_at_gamma: spec.g_anchor,
    })
}

/// `q_i = <x_i^2>` in the eigenbasis (same order as the spectrum), from
/// `[int f (2 beta N (z - lambda_i))^-1 dz] / [int f dz]`.
pub fn marginal_second_moments(p: &LogPotential<'_>, spec: &ContourSpec) -> Result<Vec<f64>> {
    check_spec(p, spec)?;
    let line = Line::new(p, spec.gamma)?;
    let (s, w) = nodes(spec, spec.truncation, false);
    let n = p.n();
    let mut num = vec![KahanSum::new(); n];
    let mut den = KahanSum::new();
    for (&x, &wx) in s.iter().zip(&w) {
        let f = line.f(x) * wx;
        den.add(f.re);
        for (acc, &a) in num.iter_mut().zip(&line.a) {
            // Re[f / (a + i x)]
            acc.add((f.re * a + f.im * x) / (a * a + x * x));
        }
    }
    let scale = 1.0 / (2.0 * p.beta() * n as f64 * den.value());
    let q: Vec<f64> = num.iter().map(|v| v.value() * scale).collect();
    if let Some(bad) = q.iter().position(|v| !(*v > 0.0)) {
        return Err(SskError::Numeric(format!(
            "marginal second moment q_{} = {} is not positive",
            bad + 1,
            q[bad]
        )));
    }
    Ok(q)
}

/// `N (1 - beta^2) sum q_i^2`, the variance of `sqrt(N(1 - beta^2)) R12`.
pub fn overlap_variance_exact(p: &LogPotential<'_>, spec: &ContourSpec) -> Result<f64> {
    let beta = p.beta();
    if !(beta < 1.0) {
        return Err(SskError::Domain(format!(
            "normalized overlap needs beta < 1, got {beta}"
        )));
    }
    let q = marginal_second_moments(p, spec)?;
    Ok(p.n() as f64 * (1.0 - beta * beta) * ksum(q.iter().map(|x| x * x)))
}

/// `t' = sqrt(N (1 - beta^2)) t`.
pub fn effective_t(p: &LogPotential<'_>, t: f64, normalized: bool) -> Result<f64> {
    if !normalized {
        return Ok(t);
    }
    let beta = p.beta();
    if !(beta < 1.0) {
        return Err(SskError::Domain(format!(
            "normalized t needs beta < 1, got {beta}"
        )));
    }
    Ok((p.n() as f64 * (1.0 - beta * beta)).sqrt() * t)
}

pub(crate) fn log1p_complex(d: Complex64) -> Complex64 {
    Complex64::new(
        0.5 * (2.0 * d.re + d.re * d.re + d.im * d.im).ln_1p(),
        d.im.atan2(1.0 + d.re),
    )
}

pub(crate) fn expm1_complex(x: Complex64) -> Complex64 {
    let h = 0.5 * x.im;
    let s = h.sin();
    Complex64::new(
        x.re.exp_m1() * x.im.cos() - 2.0 * s * s,
        x.re.exp() * x.im.sin(),
    )
}

/// `sum_k Log(1 - c u_k v_k)`. Factors are multiplied in chunks whose summed
/// `|c u v|` stays below 3/2; with every `|c u v| <= 1/4` the chunk product's
/// principal log then equals the sum of principal logs. The running product
/// is carried as `P - 1` so small couplings keep full relative precision.
pub(crate) fn log_coupling(
    u: &[Complex64],
    ua: &[f64],
    v: &[Complex64],
    va: &[f64],
    c: f64,
    conj_v: bool,
) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    let mut delta = Complex64::new(0.0, 0.0);
    let mut budget = 0.0;
    for k in 0..u.len() {
        let vk = if conj_v { v[k].conj() } else { v[k] };
        let y = c * (u[k] * vk);
        let ay = c * ua[k] * va[k];
        if budget + ay > 1.5 {
            total += log1p_complex(delta);
            delta = Complex64::new(0.0, 0.0);
            budget = 0.0;
        }
        budget += ay;
        delta -= y * (1.0 + delta);
    }
    total + log1p_complex(delta)
}

/// Line samples on `[0, S_2]` with everything the pair loop needs.
struct PairGrid {
    w: Vec<f64>,
    f: Vec<Complex64>,
    /// `|f| U`, the factor in the pair bound.
    h: Vec<f64>,
    /// Row-major `nodes x N`: `u_k(s) = 1/(a_k + i s)` and its modulus.
    u: Vec<Complex64>,
    ua: Vec<f64>,
}

impl PairGrid {
    fn new(line: &Line, spec: &ContourSpec, half: bool) -> Self {
        let (s, w) = nodes(spec, spec.truncation_2d, half);
        let n = line.n;
        let mut f = Vec::with_capacity(s.len());
        let mut h = Vec::with_capacity(s.len());
        let mut u = Vec::with_capacity(s.len() * n);
        let mut ua = Vec::with_capacity(s.len() * n);
        for &x in &s {
            let fx = line.f(x);
            f.push(fx);
            h.push(fx.norm() * line.u_norm(x));
            for &a in &line.a {
                let d = a * a + x * x;
                u.push(Complex64::new(a / d, -x / d));
                ua.push(1.0 / d.sqrt());
            }
        }
        Self { w, f, h, u, ua }
    }

    fn len(&self) -> usize {
        self.w.len()
    }

    /// `D = int int f(s) f(r) (E(s, r) - 1) ds dr` over `[-S_2, S_2]^2`, using
    /// `F(-s, -r) = conj F(s, r)` and `F(s, r) = F(r, s)`. Returns `(D, skipped)`
    /// where `skipped` bounds the pairs dropped by the a-priori bound.
    fn double_integral(&self, n: usize, c: f64, c0: f64, skip_budget: f64) -> (f64, f64) {
        let m = self.len();
        let pairs = (m * (m + 1) / 2).max(1) as f64;
        // each (i, j) enters as 2 * mult * (Re F(s_i, s_j) + Re F(s_i, -s_j))
        let skip_each = skip_budget / pairs;
        let rows: Vec<(f64, f64)> = crate::par::map_range(m, |i| {
            let ui = &self.u[i * n..(i + 1) * n];
            let uai = &self.ua[i * n..(i + 1) * n];
            let mut acc = KahanSum::new();
            let mut skipped = 0.0;
            for j in i..m {
                let mult = if j == i { 1.0 } else { 2.0 };
                let weight = 2.0 * mult * self.w[i] * self.w[j];
                let bound = 2.0 * weight * c0 * self.h[i] * self.h[j];
                if bound < skip_each {
                    skipped += bound;
                    continue;
                }
                let uj = &self.u[j * n..(j + 1) * n];
                let uaj = &self.ua[j * n..(j + 1) * n];
                let same = log_coupling(ui, uai, uj, uaj, c, false);
                let opposite = log_coupling(ui, uai, uj, uaj, c, true);
                let e_same = expm1_complex(-0.5 * same);
                let e_opp = expm1_complex(-0.5 * opposite);
                let fi = self.f[i];
                let fj = self.f[j];
                let v = (fi * fj * e_same).re + (fi * fj.conj() * e_opp).re;
                acc.add(weight * v);
            }
            (acc.value(), skipped)
        });
        let d = ksum(rows.iter().map(|r| r.0));
        let skipped = ksum(rows.iter().map(|r| r.1));
        (d, skipped)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfValue {
    /// As requested (normalized or not).
    pub t: f64,
    /// Coupling entering `G~`.
    pub t_eff: f64,
    pub value: f64,
    pub error_estimate: f64,
}

/// Evaluates `<exp(t R12)>` as `1 + D(t) / I^2` on one contour plan, valid
/// for every `|t_eff| <= spec.t_max`.
pub struct MgfEngine<'a> {
    p: LogPotential<'a>,
    spec: ContourSpec,
    line: Line,
    integral: f64,
    integral_error: f64,
    grid: PairGrid,
    half: PairGrid,
}

impl<'a> MgfEngine<'a> {
    pub fn new(p: &LogPotential<'a>, t_max_eff: f64, tol: f64) -> Result<Self> {
        let spec = plan_contour(p, t_max_eff.abs(), tol)?;
        Self::from_spec(p, spec)
    }

    pub fn from_spec(p: &LogPotential<'a>, spec: ContourSpec) -> Result<Self> {
        check_spec(p, &spec)?;
        let line = Line::new(p, spec.gamma)?;
        let (integral, integral_error) = line_integral(&line, &spec);
        if !(integral > 0.0) {
            return Err(SskError::Numeric(format!(
                "partition integral came out non-positive ({integral})"
            )));
        }
        let grid = PairGrid::new(&line, &spec, false);
        let half = PairGrid::new(&line, &spec, true);
        Ok(Self {
            p: *p,
            spec,
            line,
            integral,
            integral_error,
            grid,
            half,
        })
    }

    pub fn spec(&self) -> &ContourSpec {
        &self.spec
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// `<exp(t_eff R12)>`.
    pub fn mgf_eff(&self, t_eff: f64) -> Result<MgfValue> {
        if t_eff == 0.0 {
            return Ok(MgfValue {
                t: 0.0,
                t_eff: 0.0,
                value: 1.0,
                error_estimate: 0.0,
            });
        }
        if t_eff.abs() > self.spec.t_max * (1.0 + 1e-12) {
            return Err(SskError::Domain(format!(
                "|t| = {} exceeds the {} this contour plan is certified for",
                t_eff.abs(),
                self.spec.t_max
            )));
        }
        let n = self.line.n;
        let nf = n as f64;
        let beta = self.p.beta();
        let c = t_eff * t_eff / (4.0 * beta * beta * nf * nf);
        let a1 = self.line.a[0];
        if c >= a1 * a1 {
            return Err(SskError::Internal(format!(
                "branch condition violated: c = {c} >= a_1^2 = {}",
                a1 * a1
            )));
        }
        let (c0, _) = coupling_constants(&self.line, t_eff);
        let i2 = self.integral * self.integral;
        let skip_budget = 1e-3 * self.spec.tol * i2;
        let (d, skipped) = self.grid.double_integral(n, c, c0, skip_budget);
        let (d_half, _) = self.half.double_integral(n, c, c0, skip_budget);
        let ratio = d / i2;
        let rel_i = self.integral_error / self.integral;
        let err = (d - d_half).abs() / i2
            + (self.spec.tail_bound_2d + skipped) / i2
            + ratio.abs() * 2.0 * rel_i;
        let value = 1.0 + ratio;
        if !value.is_finite() {
            return Err(SskError::Numeric(format!("MGF at t = {t_eff} is not finite")));
        }
        Ok(MgfValue {
            t: t_eff,
            t_eff,
            value,
            error_estimate: err,
        })
    }

    /// `<exp(t R12)>` with `t` optionally normalized by `sqrt(N (1 - beta^2))`.
    pub fn mgf(&self, t: f64, normalized: bool) -> Result<MgfValue> {
        let t_eff = effective_t(&self.p, t, normalized)?;
        let mut v = self.mgf_eff(t_eff)?;
        v.t = t;
        Ok(v)
    }
}

/// `<exp(t R12)>` by the double contour ratio. `normalized` scales `t` by
/// `sqrt(N (1 - beta^2))`.
pub fn overlap_mgf_exact(p: &LogPotential<'_>, t: f64, tol: f64, normalized: bool) -> Result<f64> {
    let t_eff = effective_t(p, t, normalized)?;
    Ok(MgfEngine::new(p, t_eff, tol)?.mgf(t, normalized)?.value)
}

/// Route (a): `d^2/dt^2 log MGF` at 0 (normalized `t`) from two central
/// differences at `h` and `h/2`, Richardson-combined. The MGF is even, so
/// `2 log M(h) / h^2 = sigma^2 + O(h^2)`.
pub fn log_mgf_curvature(p: &LogPotential<'_>, h: f64, tol: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(SskError::Domain(format!("step must be positive, got {h}")));
    }
    let t_eff = effective_t(p, h, true)?;
    let engine = MgfEngine::new(p, t_eff, tol)?;
    let m1 = engine.mgf(h, true)?.value;
    let m2 = engine.mgf(0.5 * h, true)?.value;
    let s1 = 2.0 * m1.ln() / (h * h);
    let s2 = 2.0 * m2.ln() / (0.25 * h * h);
    Ok((4.0 * s2 - s1) / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wigner::{sample_spectrum, Spectrum, SpectrumMethod};

    fn spectrum(n: usize, seed: u64) -> Spectrum {
        sample_spectrum(n, seed, SpectrumMethod::Dense).unwrap()
    }

    #[test]
    fn complex_helpers_are_accurate() {
        let d = Complex64::new(0.3, -0.2);
        assert!((log1p_complex(d) - (1.0 + d).ln()).norm() <= 1e-15);
        assert!((expm1_complex(d) - (d.exp() - 1.0)).norm() <= 1e-15);
        // small arguments against their Taylor series
        let d = Complex64::new(1e-6, 2e-6);
        let log_series = d - d * d / 2.0 + d * d * d / 3.0;
        let exp_series = d + d * d / 2.0 + d * d * d / 6.0;
        assert!((log1p_complex(d) - log_series).norm() <= 1e-15 * d.norm());
        assert!((expm1_complex(d) - exp_series).norm() <= 1e-15 * d.norm());
        let tiny = Complex64::new(1e-20, -3e-20);
        assert!((log1p_complex(tiny) - tiny).norm() < 1e-34);
        assert!((expm1_complex(tiny) - tiny).norm() < 1e-34);
    }

    #[test]
    fn chunked_log_matches_per_factor_logs() {
        let u: Vec<Complex64> = (0..40)
            .map(|k| Complex64::new(0.4 + 0.01 * k as f64, 1.0 + 0.1 * k as f64).inv())
            .collect();
        let ua: Vec<f64> = u.iter().map(|z| z.norm()).collect();
        let c = 0.2 * 0.4 * 0.4;
        for conj in [false, true] {
            let direct: Complex64 = u
                .iter()
                .map(|&x| (1.0 - c * x * if conj { x.conj() } else { x }).ln())
                .sum();
            let chunked = log_coupling(&u, &ua, &u, &ua, c, conj);
            assert!((direct - chunked).norm() < 1e-13, "{direct} vs {chunked}");
        }
    }

    #[test]
    fn zero_beta_partition_function_is_one() {
        for (n, seed) in [(5, 1), (50, 2), (500, 3)] {
            let s = spectrum(n, seed);
            let p = LogPotential::new(1e-6, &s).unwrap();
            let z = log_partition_function(&p, 1e-7).unwrap();
            assert!(z.log_z.abs() < 1e-6, "n={n}: log Z = {}", z.log_z);
        }
    }

    #[test]
    fn single_point_oracle_for_partition_integral() {
        // all eigenvalues equal: Z = exp(beta N lambda)
        let s = Spectrum::new(vec![0.3; 9]).unwrap();
        let p = LogPotential::new(0.8, &s).unwrap();
        let z = log_partition_function(&p, 1e-10).unwrap();
        assert!((z.log_z - 0.8 * 9.0 * 0.3).abs() < 1e-8, "{}", z.log_z);
    }

    #[test]
    fn partition_integral_is_stable_under_refinement() {
        let s = spectrum(40, 7);
        let p = LogPotential::new(0.6, &s).unwrap();
        let a = plan_contour(&p, 0.0, 1e-10).unwrap();
        let mut b = a.clone();
        for pan in &mut b.panels {
            pan.nodes *= 2;
        }
        let ia = partition_integral(&p, &a).unwrap();
        let ib = partition_integral(&p, &b).unwrap();
        assert!((ia.log_magnitude - ib.log_magnitude).abs() < 1e-8);
        assert_eq!(ia.phase, PI / 2.0);
    }

    #[test]
    fn mgf_normalization_and_parity() {
        let s = spectrum(12, 3);
        let p = LogPotential::new(0.5, &s).unwrap();
        let engine = MgfEngine::new(&p, 2.0, 1e-8).unwrap();
        assert_eq!(engine.mgf_eff(0.0).unwrap().value, 1.0);
        for t in [0.3, 1.0, 2.0] {
            let a = engine.mgf_eff(t).unwrap().value;
            let b = engine.mgf_eff(-t).unwrap().value;
            assert!((a - b).abs() <= 1e-10);
            assert!(a >= 1.0);
        }
        assert!(engine.mgf_eff(2.5).is_err());
    }

    #[test]
    fn marginals_sum_to_one_and_flatten_at_high_temperature() {
        let s = spectrum(30, 8);
        let p = LogPotential::new(0.7, &s).unwrap();
        let spec = plan_contour(&p, 0.0, 1e-10).unwrap();
        let q = marginal_second_moments(&p, &spec).unwrap();
        assert!((ksum(q.iter().copied()) - 1.0).abs() < 1e-6);
        assert!(q.windows(2).all(|w| w[0] >= w[1]));

        let p0 = LogPotential::new(1e-7, &s).unwrap();
        let spec0 = plan_contour(&p0, 0.0, 1e-10).unwrap();
        let q0 = marginal_second_moments(&p0, &spec0).unwrap();
        assert!(q0.iter().all(|v| (v - 1.0 / 30.0).abs() < 1e-6));
        let var0 = overlap_variance_exact(&p0, &spec0).unwrap();
        assert!((var0 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn second_derivative_of_mgf_equals_sum_of_squared_marginals() {
        let n = 50;
        let s = spectrum(n, 9);
        let p = LogPotential::new(0.6, &s).unwrap();
        let spec = plan_contour(&p, 0.0, 1e-11).unwrap();
        let var_b = overlap_variance_exact(&p, &spec).unwrap();
        let var_a = log_mgf_curvature(&p, 0.2, 1e-11).unwrap();
        assert!((var_a / var_b - 1.0).abs() < 1e-3, "{var_a} vs {var_b}");
    }

    #[test]
    fn saddle_denominator_closed_form() {
        let s = Spectrum::new(vec![0.0]).unwrap();
        let sad = LogPotential::new(0.4, &s).unwrap().find_saddle(1e-12).unwrap();
        let v = saddle_denominator_approx(&sad, 1).unwrap().to_complex();
        let want = (4.0 * PI / 0.64).sqrt();
        assert!((v - Complex64::new(0.0, want)).norm() < 1e-13);
    }
}
