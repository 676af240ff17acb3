//! Browser bindings. Every entry point returns a JSON string so the page can
//! plot it without any glue beyond `JSON.parse`.

use num_complex::Complex64;
use serde_json::{json, Value};
use ssk_core::contour::MgfEngine;
use ssk_core::potential::LogPotential;
use ssk_core::statkit::histogram;
use ssk_core::wigner::{rho_sc, sample_spectrum, Spectrum, SpectrumMethod};
use wasm_bindgen::prelude::*;

const MAX_DENSE_N: usize = 1500;
const MAX_N: usize = 20_000;
const MGF_TOL: f64 = 1e-8;

fn spectrum_for(n: usize, seed: u64) -> Result<Spectrum, String> {
    if n == 0 || n > MAX_N {
        return Err(format!("n must lie in 1..={MAX_N}"));
    }
    // the dense route is O(n^3); large sizes use the tridiagonal model, which has the same law
    let method = if n <= MAX_DENSE_N {
        SpectrumMethod::Dense
    } else {
        SpectrumMethod::Tridiagonal
    };
    sample_spectrum(n, seed, method).map_err(|e| e.to_string())
}

fn finish(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

/// Density histogram of one GOE spectrum next to the semicircle density.
/// Fields: `edges`, `density`, `centers`, `semicircle`, `top`.
#[wasm_bindgen]
pub fn spectrum_histogram(n: usize, seed: u64, bins: usize) -> Result<String, JsError> {
    finish(spectrum_histogram_value(n, seed, bins))
}

pub fn spectrum_histogram_value(n: usize, seed: u64, bins: usize) -> Result<Value, String> {
    let s = spectrum_for(n, seed)?;
    let h = histogram(s.lambdas(), bins.max(2)).map_err(|e| e.to_string())?;
    let centers = h.centers();
    let semicircle: Vec<f64> = centers.iter().map(|&x| rho_sc(x)).collect();
    Ok(json!({
        "n": n,
        "seed": seed,
        "edges": h.edges,
        "density": h.density,
        "centers": centers,
        "semicircle": semicircle,
        "top": s.top(),
    }))
}

/// `G'(x)` on `(lambda_1, lambda_1 + span]` with the saddle point marked.
/// Fields: `x`, `g_prime`, `gamma`, `gamma_hat`, `top`.
#[wasm_bindgen]
pub fn saddle_curve(n: usize, seed: u64, beta: f64, points: usize) -> Result<String, JsError> {
    finish(saddle_curve_value(n, seed, beta, points))
}

pub fn saddle_curve_value(n: usize, seed: u64, beta: f64, points: usize) -> Result<Value, String> {
    let s = spectrum_for(n, seed)?;
    let p = LogPotential::new(beta, &s).map_err(|e| e.to_string())?;
    let saddle = p.find_saddle(1e-12).map_err(|e| e.to_string())?;
    let top = s.top();
    let span = 2.0 * saddle.gap.max(0.05);
    let points = points.clamp(8, 4000);
    let mut xs = Vec::with_capacity(points);
    let mut gp = Vec::with_capacity(points);
    for i in 1..=points {
        // quadratic spacing resolves the pole at lambda_1
        let f = i as f64 / points as f64;
        let x = top + span * f * f;
        let v = p
            .g_derivative(Complex64::new(x, 0.0), 1)
            .map_err(|e| e.to_string())?
            .re;
        xs.push(x);
        gp.push(v);
    }
    Ok(json!({
        "n": n,
        "seed": seed,
        "beta": beta,
        "x": xs,
        "g_prime": gp,
        "gamma": saddle.gamma,
        "gamma_hat": saddle.gamma_hat,
        "gap": saddle.gap,
        "top": top,
    }))
}

/// `<exp(t u)>` for normalized `t` on `[-t_max, t_max]`, alongside
/// `exp(t^2/2)` and `exp(t^2)`. Needs `0 < beta < 1` and `n >= 5`.
/// Fields: `t`, `mgf`, `error`, `half`, `full`.
#[wasm_bindgen]
pub fn mgf_curve(n: usize, seed: u64, beta: f64, t_max: f64, points: usize) -> Result<String, JsError> {
    finish(mgf_curve_value(n, seed, beta, t_max, points))
}

pub fn mgf_curve_value(n: usize, seed: u64, beta: f64, t_max: f64, points: usize) -> Result<Value, String> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(format!("beta must lie in (0, 1), got {beta}"));
    }
    if !(t_max > 0.0 && t_max <= 4.0) {
        return Err(format!("t_max must lie in (0, 4], got {t_max}"));
    }
    let s = spectrum_for(n, seed)?;
    let p = LogPotential::new(beta, &s).map_err(|e| e.to_string())?;
    let t_eff = ssk_core::contour::effective_t(&p, t_max, true).map_err(|e| e.to_string())?;
    let engine = MgfEngine::new(&p, t_eff, MGF_TOL).map_err(|e| e.to_string())?;
    let points = points.clamp(3, 201);
    let (mut ts, mut mgf, mut err, mut half, mut full) = (vec![], vec![], vec![], vec![], vec![]);
    for i in 0..points {
        let t = -t_max + 2.0 * t_max * i as f64 / (points - 1) as f64;
        let v = engine.mgf(t, true).map_err(|e| e.to_string())?;
        ts.push(t);
        mgf.push(v.value);
        err.push(v.error_estimate);
        half.push((0.5 * t * t).exp());
        full.push((t * t).exp());
    }
    Ok(json!({
        "n": n,
        "seed": seed,
        "beta": beta,
        "t": ts,
        "mgf": mgf,
        "error": err,
        "half": half,
        "full": full,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_integrates_to_one() {
        let v = spectrum_histogram_value(200, 1, 20).unwrap();
        let edges: Vec<f64> = serde_json::from_value(v["edges"].clone()).unwrap();
        let density: Vec<f64> = serde_json::from_value(v["density"].clone()).unwrap();
        let mass: f64 = density.iter().zip(edges.windows(2)).map(|(d, w)| d * (w[1] - w[0])).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert_eq!(v["semicircle"].as_array().unwrap().len(), 20);
    }

    #[test]
    fn saddle_curve_crosses_zero_at_gamma() {
        let v = saddle_curve_value(100, 2, 0.5, 200).unwrap();
        let gamma = v["gamma"].as_f64().unwrap();
        let xs: Vec<f64> = serde_json::from_value(v["x"].clone()).unwrap();
        let gp: Vec<f64> = serde_json::from_value(v["g_prime"].clone()).unwrap();
        // G' increases through its root
        for (x, g) in xs.iter().zip(&gp) {
            if *x < gamma - 1e-9 {
                assert!(*g < 0.0);
            } else if *x > gamma + 1e-9 {
                assert!(*g > 0.0);
            }
        }
    }

    #[test]
    fn mgf_curve_is_even_and_one_at_zero() {
        let v = mgf_curve_value(50, 3, 0.5, 1.5, 7).unwrap();
        let m: Vec<f64> = serde_json::from_value(v["mgf"].clone()).unwrap();
        assert!((m[3] - 1.0).abs() < 1e-12);
        for i in 0..3 {
            assert!((m[i] - m[6 - i]).abs() < 1e-8);
            assert!(m[i] > 1.0);
        }
        assert!(mgf_curve_value(50, 3, 1.2, 1.5, 7).is_err());
    }

    #[test]
    fn bad_sizes_are_rejected() {
        assert!(spectrum_histogram_value(0, 1, 10).is_err());
        assert!(mgf_curve_value(3, 1, 0.5, 1.0, 5).is_err());
    }
}
