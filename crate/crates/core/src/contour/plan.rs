use crate::error::{Result, SskError};
use crate::numeric::{GaussLegendre, KahanSum};
use crate::potential::LogPotential;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

/// Contour quadrature needs an integrable tail bound, which decays like
/// `|s|^(-N/2)`.
pub const MIN_CONTOUR_N: usize = 5;

const DEFAULT_NODES: usize = 20;
const MAX_NODES: usize = 256;

/// The vertical line `Re z = anchor` seen through the distances
/// `a_i = anchor - lambda_i > 0`; `f(s) = exp((N/2)(G(anchor + i s) - G(anchor)))`.
#[derive(Debug, Clone)]
pub(crate) struct Line {
    pub n: usize,
    pub beta: f64,
    /// Increasing.
    pub a: Vec<f64>,
}

impl Line {
    pub fn new(p: &LogPotential<'_>, anchor: f64) -> Result<Self> {
        let top = p.spectrum().top();
        if !(anchor > top) {
            return Err(SskError::Domain(format!(
                "contour anchor {anchor} must exceed lambda_1 = {top}"
            )));
        }
        let mut a: Vec<f64> = p.spectrum().lambdas().iter().map(|l| anchor - l).collect();
        a.sort_by(|x, y| x.total_cmp(y));
        Ok(Self {
            n: p.n(),
            beta: p.beta(),
            a,
        })
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `log |f(s)| = -(1/4) sum log(1 + s^2/a^2)`.
    pub fn log_modulus(&self, s: f64) -> f64 {
        let acc: KahanSum = self.a.iter().map(|a| (s / a).powi(2).ln_1p()).collect();
        -0.25 * acc.value()
    }

    /// `-d log|f| / d log s`, increasing in `s`.
    pub fn decay_exponent(&self, s: f64) -> f64 {
        let acc: KahanSum = self
            .a
            .iter()
            .map(|a| {
                let x = (s / a).powi(2);
                x / (1.0 + x)
            })
            .collect();
        0.5 * acc.value()
    }

    /// `|d arg f / ds|`, nondecreasing in `s` when the anchor is at or right of the saddle.
    pub fn phase_rate(&self, s: f64) -> f64 {
        let acc: KahanSum = self.a.iter().map(|a| a / (a * a + s * s)).collect();
        (0.5 * self.nf() * (2.0 * self.beta - acc.value() / self.nf())).abs()
    }

    /// `sqrt(sum |1/(a + i s)|^2)`, decreasing in `s`.
    pub fn u_norm(&self, s: f64) -> f64 {
        let acc: KahanSum = self.a.iter().map(|a| 1.0 / (a * a + s * s)).collect();
        acc.value().sqrt()
    }

    pub fn log_f(&self, s: f64) -> Complex64 {
        let mut re = KahanSum::new();
        let mut im = KahanSum::new();
        for a in &self.a {
            re.add((s / a).powi(2).ln_1p());
            im.add((s / a).atan());
        }
        Complex64::new(
            -0.25 * re.value(),
            self.beta * self.nf() * s - 0.5 * im.value(),
        )
    }

    pub fn f(&self, s: f64) -> Complex64 {
        self.log_f(s).exp()
    }

    /// Two-sided bound on `int_{|s|>S} |f|` from log-convexity:
    /// `|f(s)| <= |f(S)| (s/S)^(-p(S))` for `s >= S`.
    pub fn tail_bound(&self, s: f64) -> f64 {
        let p = self.decay_exponent(s);
        if p <= 1.0 {
            return f64::INFINITY;
        }
        2.0 * self.log_modulus(s).exp() * s / (p - 1.0)
    }

    /// Two-sided bound on `int_{|s|>S} |f| U`, using
    /// `U(s) <= U(S) (S/s) sqrt(1 + a_max^2/S^2)`.
    pub fn weighted_tail_bound(&self, s: f64) -> f64 {
        let p = self.decay_exponent(s);
        if p <= 0.0 {
            return f64::INFINITY;
        }
        let amax = *self.a.last().expect("nonempty");
        2.0 * self.log_modulus(s).exp() * self.u_norm(s) * (s * s + amax * amax).sqrt() / p
    }

    /// `(1/N) sum a^-2 = G''(anchor)`.
    pub fn g2(&self) -> f64 {
        let acc: KahanSum = self.a.iter().map(|a| 1.0 / (a * a)).collect();
        acc.value() / self.nf()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
    pub nodes: usize,
}

/// Quadrature layout on `[0, S]` for the vertical line through `gamma`;
/// negative `s` follows from conjugate symmetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub n: usize,
    pub beta: f64,
    /// Real part of the line; the saddle unless the `t` precondition moved it.
    pub gamma: f64,
    pub saddle_gamma: f64,
    /// Largest `|t|` (unnormalized) the plan is certified for.
    pub t_max: f64,
    pub tol: f64,
    /// `(N G''(gamma))^(-1/2)`.
    pub width0: f64,
    pub truncation: f64,
    /// Truncation used by the double integral, a panel breakpoint `<= truncation`.
    pub truncation_2d: f64,
    pub panels: Vec<Panel>,
    pub tail_bound: f64,
    pub tail_bound_2d: f64,
    /// `G(gamma)`; every integrand is centred on it.
    pub g_anchor: f64,
}

impl ContourSpec {
    pub fn node_count(&self) -> usize {
        self.panels.iter().map(|p| p.nodes).sum()
    }

    pub fn node_count_2d(&self) -> usize {
        self.panels
            .iter()
            .filter(|p| p.b <= self.truncation_2d)
            .map(|p| p.nodes)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    /// Starting Gauss–Legendre order per panel.
    pub nodes_per_panel: usize,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            nodes_per_panel: DEFAULT_NODES,
        }
    }
}

pub(crate) struct RuleCache(HashMap<usize, GaussLegendre>);

impl RuleCache {
    pub fn new() -> Self {
        Self(HashMap::new())
    }

    pub fn get(&mut self, m: usize) -> &GaussLegendre {
        self.0.entry(m).or_insert_with(|| GaussLegendre::new(m))
    }
}

/// Anchor satisfying `anchor - lambda_1 >= 2 |t| / (2 beta N)`, so every
/// `|c u_i v_i| <= 1/4` on the double contour.
pub(crate) fn anchor_for(gamma: f64, top: f64, beta: f64, n: usize, t: f64) -> f64 {
    let need = 2.0 * t.abs() / (2.0 * beta * n as f64);
    if gamma - top >= need {
        gamma
    } else {
        top + need
    }
}

/// Bound constants for `|E(s, r) - 1| <= c0 U(s) U(r)`, where
/// `E = prod (1 - c u_i v_i)^(-1/2)`; returns `(c0, x0)` with `x0` the
/// bound on `|log E|` at the centre.
pub(crate) fn coupling_constants(line: &Line, t: f64) -> (f64, f64) {
    let nf = line.nf();
    let c = t * t / (4.0 * line.beta * line.beta * nf * nf);
    let a1 = line.a[0];
    let cp = 0.5 * c / (1.0 - c / (a1 * a1));
    let x0 = cp * line.g2() * nf;
    (cp * x0.exp(), x0)
}

/// Plans the quadrature for `int f(s) ds` and the double integral at
/// coupling `t` (unnormalized). `tol` is measured in units of the central
/// width, i.e. it is roughly a relative tolerance on the integrals.
pub fn plan_contour(p: &LogPotential<'_>, t: f64, tol: f64) -> Result<ContourSpec> {
    plan_contour_with(p, t, tol, PlanOptions::default())
}

pub fn plan_contour_with(
    p: &LogPotential<'_>,
    t: f64,
    tol: f64,
    opts: PlanOptions,
) -> Result<ContourSpec> {
    let n = p.n();
    if n < MIN_CONTOUR_N {
        return Err(SskError::UnsupportedDimension {
            n,
            reason: format!(
                "contour quadrature needs N >= {MIN_CONTOUR_N}; the |s|^(-N/2) tail is not integrable enough below that"
            ),
        });
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(SskError::Domain(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    if !t.is_finite() {
        return Err(SskError::Domain(format!("t must be finite, got {t}")));
    }
    if opts.nodes_per_panel < 4 || !opts.nodes_per_panel.is_multiple_of(2) || opts.nodes_per_panel > MAX_NODES {
        return Err(SskError::Domain(format!(
            "nodes per panel must be even in [4, {MAX_NODES}], got {}",
            opts.nodes_per_panel
        )));
    }
    let saddle = p.find_saddle(1e-12)?;
    let anchor = anchor_for(saddle.gamma, p.spectrum().top(), p.beta(), n, t);
    let line = Line::new(p, anchor)?;
    let width0 = 1.0 / (n as f64 * line.g2()).sqrt();

    // one-dimensional truncation: smallest S (to bisection accuracy) with p(S) > 3/2
    // and certified tail <= tol * width0
    let target1 = tol * width0;
    // p(S) -> N/2 >= 5/2, so a margin of 1/2 above 1 is always reachable
    let p_min = 1.5;
    let ok1 = |s: f64| line.decay_exponent(s) > p_min && line.tail_bound(s) <= target1;
    let s1 = smallest_satisfying(&ok1, 4.0 * width0)?;

    let mut rules = RuleCache::new();
    let mut panels = Vec::new();
    let mut end = 0.0;
    let mut width = width0;
    extend_panels(&line, &mut panels, &mut end, &mut width, s1, opts.nodes_per_panel);

    // double integral: |integrand| <= c0 h(s) h(r) with h = |f| U
    let (c0, x0) = coupling_constants(&line, t);
    let mod_integral = 2.0 * modulus_integral(&line, &panels, &mut rules) + line.tail_bound(end);
    let h_total = line.u_norm(0.0) * mod_integral;
    let i_ref = (4.0 * PI).sqrt() * width0;
    let target2 = tol * i_ref * i_ref * x0.min(1.0);
    let bound2 = |s: f64| {
        let th = line.weighted_tail_bound(s);
        c0 * (2.0 * th * h_total + th * th)
    };
    let mut truncation_2d = None;
    if t == 0.0 {
        truncation_2d = Some(panels[0].b);
    } else {
        for pan in &panels {
            if line.decay_exponent(pan.b) > p_min && bound2(pan.b) <= target2 {
                truncation_2d = Some(pan.b);
                break;
            }
        }
        let mut guard = 0;
        while truncation_2d.is_none() {
            let next = 2.0 * end;
            extend_panels(&line, &mut panels, &mut end, &mut width, next, opts.nodes_per_panel);
            if line.decay_exponent(end) > p_min && bound2(end) <= target2 {
                truncation_2d = Some(end);
            }
            guard += 1;
            if guard > 60 {
                return Err(SskError::Quadrature {
                    tol,
                    estimate: bound2(end),
                    hint: "double-contour tail bound did not fall below tolerance; increase tol or reduce |t|".into(),
                });
            }
        }
    }
    let truncation_2d = truncation_2d.expect("set above");

    // per-panel refinement of the Gauss–Legendre order
    let per_panel = target1 / panels.len() as f64;
    let mut worst = 0.0f64;
    for pan in panels.iter_mut() {
        loop {
            let (err, mass) = panel_error(&line, pan, &mut rules);
            // below this the estimate is rounding noise
            if err <= per_panel.max(64.0 * f64::EPSILON * mass) {
                break;
            }
            if pan.nodes * 2 > MAX_NODES {
                worst = worst.max(err);
                break;
            }
            pan.nodes *= 2;
        }
    }
    if worst > 0.0 {
        return Err(SskError::Quadrature {
            tol,
            estimate: worst,
            hint: format!(
                "a panel still exceeds its error budget at {MAX_NODES} nodes; loosen tol or raise nodes_per_panel"
            ),
        });
    }

    let tail_bound_2d = if t == 0.0 { 0.0 } else { bound2(truncation_2d) };
    Ok(ContourSpec {
        n,
        beta: p.beta(),
        gamma: anchor,
        saddle_gamma: saddle.gamma,
        t_max: t.abs(),
        tol,
        width0,
        truncation: end,
        truncation_2d,
        panels,
        tail_bound: line.tail_bound(end),
        tail_bound_2d,
        g_anchor: p.g_real(anchor),
    })
}

/// Smallest `S >= start` (doubling, then bisection in log scale) with `ok(S)`;
/// `ok` must be upward closed.
fn smallest_satisfying(ok: &dyn Fn(f64) -> bool, start: f64) -> Result<f64> {
    let mut hi = start;
    let mut doublings = 0;
    while !ok(hi) {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 || !hi.is_finite() {
            return Err(SskError::Quadrature {
                tol: f64::NAN,
                estimate: f64::INFINITY,
                hint: "no finite truncation satisfies the tail bound".into(),
            });
        }
    }
    if doublings == 0 {
        return Ok(hi);
    }
    let mut lo = hi / 2.0;
    for _ in 0..40 {
        let mid = (lo * hi).sqrt();
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi / lo < 1.0 + 1e-3 {
            break;
        }
    }
    Ok(hi)
}

/// Appends panels up to `target`. Widths double from the central width and
/// are capped so the phase advances by at most `2 pi` per panel.
fn extend_panels(
    line: &Line,
    panels: &mut Vec<Panel>,
    end: &mut f64,
    width: &mut f64,
    target: f64,
    nodes: usize,
) {
    while *end < target {
        let mut w = if panels.is_empty() { *width } else { 2.0 * *width };
        while w * line.phase_rate(*end + w) > 2.0 * PI && w > 1e-6 * *width {
            w *= 0.5;
        }
        let b = if *end + w >= target * (1.0 - 1e-12) { target } else { *end + w };
        panels.push(Panel { a: *end, b, nodes });
        *width = b - *end;
        *end = b;
    }
}

fn modulus_integral(line: &Line, panels: &[Panel], rules: &mut RuleCache) -> f64 {
    let mut acc = KahanSum::new();
    for pan in panels {
        let rule = rules.get(pan.nodes);
        for (s, w) in rule.mapped(pan.a, pan.b) {
            acc.add(w * line.log_modulus(s).exp());
        }
    }
    acc.value()
}

/// `|Q_m - Q_{m/2}|` for `f` and for `f` weighted by the most singular factor
/// `a_1/(a_1 + i s)`, together with `int |f|` over the panel.
fn panel_error(line: &Line, pan: &Panel, rules: &mut RuleCache) -> (f64, f64) {
    let a1 = line.a[0];
    let integrate = |rule: &GaussLegendre| {
        let mut qf = Complex64::new(0.0, 0.0);
        let mut qg = Complex64::new(0.0, 0.0);
        let mut mass = 0.0;
        for (s, w) in rule.mapped(pan.a, pan.b) {
            let f = line.f(s);
            qf += w * f;
            qg += w * f * a1 / Complex64::new(a1, s);
            mass += w * f.norm();
        }
        (qf, qg, mass)
    };
    let (f1, g1, mass) = integrate(rules.get(pan.nodes));
    let (f2, g2, _) = integrate(rules.get(pan.nodes / 2));
    ((f1 - f2).norm().max((g1 - g2).norm()), mass)
}
