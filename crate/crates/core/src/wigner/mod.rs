//! Disorder sampling, spectra and semicircle analytics.
//!
//! Normalization: the Wigner matrix has off-diagonal variance `1/(4n)` and
//! diagonal variance `1/(2n)`, so the limiting spectral density is the
//! semicircle on `[-1, 1]`, `rho_sc(x) = (2/pi) sqrt(1 - x^2)`.

mod diagnostics;
mod eigen;
mod io;

pub use diagnostics::{
    dyadic_intervals, inside_grid, interval_count_residual, local_law_residual, outside_grid, rigidity_report,
    semicircle_cdf, semicircle_tail_mass, typical_locations, IntervalReport, LocalLawMode,
    LocalLawReport, RigidityReport, TypicalLocations,
};
pub use eigen::tridiagonal_eigenvalues;
pub use io::{read_spectrum_csv, spectrum_csv_string, write_spectrum_csv};

use crate::error::{Result, SskError};
use crate::numeric::{ksum, ComplexKahanSum};
use crate::rng::{self, tag};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Raw i.i.d. standard Gaussian couplings `g_ij`, row-major.
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    n: usize,
    entries: Vec<f64>,
    seed: u64,
}

impl CouplingMatrix {
    pub fn from_entries(n: usize, entries: Vec<f64>, seed: u64) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(SskError::InvalidDimension(format!(
                "coupling matrix needs n >= 1 and n^2 entries (n = {n}, got {})",
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(SskError::Numeric("non-finite coupling entry".into()));
        }
        Ok(Self { n, entries, seed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }
}

/// Real symmetric matrix under the edge-1 normalization.
#[derive(Debug, Clone)]
pub struct WignerMatrix {
    n: usize,
    entries: Vec<f64>,
    seed: Option<u64>,
}

impl WignerMatrix {
    /// Wraps a symmetric matrix given row-major. Symmetry must be exact.
    pub fn from_symmetric(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(SskError::InvalidDimension(format!(
                "matrix needs n >= 1 and n^2 entries (n = {n})"
            )));
        }
        for i in 0..n {
            for j in 0..i {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(SskError::Domain(format!("matrix not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self {
            n,
            entries,
            seed: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        ksum((0..self.n).map(|i| self.get(i, i)))
    }

    /// `(1/n) tr(M^2)`.
    pub fn normalized_second_moment(&self) -> f64 {
        ksum(self.entries.iter().map(|x| x * x)) / self.n as f64
    }
}

/// Eigenvalues sorted in decreasing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    lambdas: Vec<f64>,
}

impl Spectrum {
    /// Sorts the values in decreasing order. Rejects empty or non-finite input.
    pub fn new(mut lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(SskError::InvalidDimension("empty spectrum".into()));
        }
        if lambdas.iter().any(|x| !x.is_finite()) {
            return Err(SskError::Numeric("non-finite eigenvalue".into()));
        }
        lambdas.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { lambdas })
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Largest eigenvalue.
    pub fn top(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn sum(&self) -> f64 {
        ksum(self.lambdas.iter().copied())
    }

    /// The spectrum of `-M`: values negated, order reversed.
    pub fn reflected(&self) -> Spectrum {
        Spectrum {
            lambdas: self.lambdas.iter().rev().map(|x| -x).collect(),
        }
    }
}

/// How a spectrum is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMethod {
    /// Dense coupling matrix, symmetrized and diagonalized.
    #[default]
    Dense,
    /// Dumitriu–Edelman tridiagonal model with the same eigenvalue law (beta = 1).
    Tridiagonal,
}

/// `n^2` i.i.d. standard normals from the disorder stream of `seed`.
pub fn sample_disorder(n: usize, seed: u64) -> Result<CouplingMatrix> {
    if n == 0 {
        return Err(SskError::InvalidDimension("n must be at least 1".into()));
    }
    let mut rng = rng::stream(seed, tag::DISORDER, n as u64);
    let entries: Vec<f64> = (0..n * n).map(|_| StandardNormal.sample(&mut rng)).collect();
    CouplingMatrix::from_entries(n, entries, seed)
}

/// `M_ij = (g_ij + g_ji) / (2 sqrt(2n))`.
pub fn symmetrize(g: &CouplingMatrix) -> WignerMatrix {
    let n = g.n;
    let scale = 1.0 / (2.0 * (2.0 * n as f64).sqrt());
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = (g.get(i, j) + g.get(j, i)) * scale;
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    WignerMatrix {
        n,
        entries,
        seed: Some(g.seed),
    }
}

/// All eigenvalues of a symmetric matrix, decreasing.
pub fn spectrum(m: &WignerMatrix) -> Result<Spectrum> {
    let n = m.n;
    let seed = m.seed.unwrap_or(0);
    let dense = DMatrix::from_row_slice(n, n, &m.entries);
    // Householder reduction, then implicit QL on the tridiagonal form.
    let (diag, off) = nalgebra::linalg::SymmetricTridiagonal::new(dense).unpack_tridiagonal();
    let mut diag: Vec<f64> = diag.iter().copied().collect();
    let mut off: Vec<f64> = off.iter().copied().collect();
    tridiagonal_eigenvalues(&mut diag, &mut off).map_err(|reason| SskError::Eigen { seed, reason })?;
    let s = Spectrum::new(diag).map_err(|e| SskError::Eigen {
        seed,
        reason: e.to_string(),
    })?;
    let tr = m.trace();
    let scale = s.lambdas.iter().fold(1.0f64, |a, x| a.max(x.abs()));
    if (s.sum() - tr).abs() > 1e-10 * n as f64 * scale {
        return Err(SskError::Eigen {
            seed,
            reason: format!("trace check failed: sum {} vs trace {tr}", s.sum()),
        });
    }
    Ok(s)
}

/// Eigenvalues of an `n x n` GOE-type matrix drawn through the tridiagonal
/// model: diagonal `N(0, 1)`, off-diagonal `chi_k / sqrt 2` for
/// `k = n-1, ..., 1`, rescaled by `1/sqrt(2n)` to the edge-1 convention.
pub fn sample_tridiagonal_spectrum(n: usize, seed: u64) -> Result<Spectrum> {
    if n == 0 {
        return Err(SskError::InvalidDimension("n must be at least 1".into()));
    }
    let mut rng = rng::stream(seed, tag::TRIDIAGONAL, n as u64);
    let scale = 1.0 / (2.0 * n as f64).sqrt();
    let mut diag: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        })
        .collect();
    let mut off: Vec<f64> = (1..n)
        .rev()
        .map(|k| {
            let chi2 = ChiSquared::new(k as f64).expect("positive degrees of freedom");
            let c: f64 = chi2.sample(&mut rng);
            (c / 2.0).sqrt() * scale
        })
        .collect();
    tridiagonal_eigenvalues(&mut diag, &mut off).map_err(|reason| SskError::Eigen { seed, reason })?;
    Spectrum::new(diag)
}

/// Spectrum of the disorder realization `seed` using `method`.
pub fn sample_spectrum(n: usize, seed: u64, method: SpectrumMethod) -> Result<Spectrum> {
    match method {
        SpectrumMethod::Dense => spectrum(&symmetrize(&sample_disorder(n, seed)?)),
        SpectrumMethod::Tridiagonal => sample_tridiagonal_spectrum(n, seed),
    }
}

/// Semicircle density on `[-1, 1]`.
pub fn rho_sc(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        2.0 / std::f64::consts::PI * (1.0 - x * x).sqrt()
    }
}

fn check_off_cut(z: Complex64) -> Result<()> {
    if z.im == 0.0 && z.re.abs() < 1.0 {
        return Err(SskError::BranchCut {
            re: z.re,
            im: z.im,
            context: "m_sc is defined off the support (-1, 1)".into(),
        });
    }
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(SskError::Domain("non-finite argument".into()));
    }
    Ok(())
}

/// `z sqrt(1 - 1/z^2)` with the principal root; equals `sqrt(z^2 - 1)` on the
/// branch that behaves like `z` at infinity.
fn decaying_root(z: Complex64) -> Complex64 {
    // (z-1)(z+1)/z^2 keeps 1 - 1/z^2 accurate near the edges
    z * ((z - 1.0) * (z + 1.0) / (z * z)).sqrt()
}

/// Stieltjes transform of the semicircle, `2(-z + sqrt(z^2 - 1))`.
pub fn m_sc(z: Complex64) -> Result<Complex64> {
    check_off_cut(z)?;
    // 2(r - z) = -2/(z + r) since r^2 - z^2 = -1; |z + r| >= |z|
    Ok(-2.0 / (z + decaying_root(z)))
}

/// `m_sc'(z) = -2 + 2 z / sqrt(z^2 - 1)`.
pub fn m_sc_derivative(z: Complex64) -> Result<Complex64> {
    check_off_cut(z)?;
    let root = decaying_root(z);
    if root.norm() == 0.0 {
        return Err(SskError::BranchCut {
            re: z.re,
            im: z.im,
            context: "m_sc' diverges at the spectral edge".into(),
        });
    }
    Ok(2.0 / (root * (z + root)))
}

/// Real-line convenience for `m_sc` at `x > 1`.
pub fn m_sc_real(x: f64) -> Result<f64> {
    m_sc(Complex64::new(x, 0.0)).map(|z| z.re)
}

/// Empirical Stieltjes transform `(1/N) sum 1/(lambda_i - z)` and its
/// derivatives: order `k` gives `(k!/N) sum (lambda_i - z)^(-k-1)`.
pub fn m_n(z: Complex64, s: &Spectrum, order: u32) -> Result<Complex64> {
    if order > 2 {
        return Err(SskError::Domain(format!("m_N order {order} not supported (0..=2)")));
    }
    let mut acc = ComplexKahanSum::new();
    for &l in &s.lambdas {
        let d = Complex64::new(l, 0.0) - z;
        if d.norm() <= f64::EPSILON * z.norm().max(1.0) {
            return Err(SskError::Pole { re: z.re, im: z.im });
        }
        let inv = d.inv();
        let term = match order {
            0 => inv,
            1 => inv * inv,
            _ => 2.0 * inv * inv * inv,
        };
        acc.add(term);
    }
    Ok(acc.value() / s.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn disorder_is_deterministic() {
        let a = sample_disorder(1, 42).unwrap();
        let b = sample_disorder(1, 42).unwrap();
        assert_eq!(a.entries(), b.entries());
        assert!(matches!(sample_disorder(0, 1), Err(SskError::InvalidDimension(_))));
    }

    #[test]
    fn disorder_moments_n2000() {
        let g = sample_disorder(2000, 3).unwrap();
        let n2 = g.entries().len() as f64;
        let mean = ksum(g.entries().iter().copied()) / n2;
        let var = ksum(g.entries().iter().map(|x| (x - mean) * (x - mean))) / (n2 - 1.0);
        assert!(mean.abs() < 4.0 / 2000.0, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn symmetrize_constant_input() {
        let n = 3;
        let v = (2.0 * n as f64).sqrt();
        let g = CouplingMatrix::from_entries(n, vec![v; n * n], 0).unwrap();
        let m = symmetrize(&g);
        for x in m.entries() {
            assert_relative_eq!(*x, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn diagonal_and_two_by_two_spectra() {
        let m = WignerMatrix::from_symmetric(3, vec![3., 0., 0., 0., 1., 0., 0., 0., 2.]).unwrap();
        assert_eq!(spectrum(&m).unwrap().lambdas(), &[3.0, 2.0, 1.0]);
        let m = WignerMatrix::from_symmetric(2, vec![0., 1., 1., 0.]).unwrap();
        let s = spectrum(&m).unwrap();
        assert_relative_eq!(s.lambdas()[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(s.lambdas()[1], -1.0, epsilon = 1e-14);
    }

    #[test]
    fn trace_invariance_n500() {
        let m = symmetrize(&sample_disorder(500, 11).unwrap());
        let s = spectrum(&m).unwrap();
        assert!((s.sum() - m.trace()).abs() <= 1e-10 * 500.0);
        assert!(s.lambdas().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn second_moment_and_edge_n2000() {
        let m = symmetrize(&sample_disorder(2000, 5).unwrap());
        let mom = m.normalized_second_moment();
        assert!((mom - 0.25).abs() < 0.05 * 0.25, "second moment {mom}");
        let s = spectrum(&m).unwrap();
        assert!(s.top() > 0.9 && s.top() < 1.1, "top {}", s.top());
    }

    #[test]
    fn tridiagonal_model_matches_dense_statistics() {
        // Both routes share the semicircle: compare second moments and edge.
        let s = sample_tridiagonal_spectrum(2000, 9).unwrap();
        let mom = ksum(s.lambdas().iter().map(|x| x * x)) / 2000.0;
        assert!((mom - 0.25).abs() < 0.0125, "tridiagonal second moment {mom}");
        assert!(s.top() > 0.95 && s.top() < 1.05);
    }

    #[test]
    fn rho_sc_values() {
        assert_relative_eq!(rho_sc(0.0), 2.0 / std::f64::consts::PI);
        assert_eq!(rho_sc(1.0), 0.0);
        assert_eq!(rho_sc(-1.0), 0.0);
        let gl = crate::numeric::GaussLegendre::new(64);
        // substitute x = sin(theta) to remove the endpoint singularity
        let total = gl.integrate(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, |t| {
            rho_sc(t.sin()) * t.cos()
        });
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn m_sc_reference_values() {
        assert_relative_eq!(m_sc(c(1.25, 0.0)).unwrap().re, -1.0, epsilon = 1e-15);
        let want = 2.0 * (-10.0 + 99f64.sqrt());
        assert_relative_eq!(m_sc(c(10.0, 0.0)).unwrap().re, want, epsilon = 1e-14);
        assert_relative_eq!(want, -0.1002512579, epsilon = 1e-10);
        assert!(matches!(m_sc(c(0.3, 0.0)), Err(SskError::BranchCut { .. })));
    }

    #[test]
    fn m_sc_maps_upper_half_plane_and_solves_self_consistency() {
        for &re in &[-3.0, -1.0, -0.5, 0.0, 0.2, 0.99, 1.7] {
            for &im in &[1e-6, 0.01, 0.5, 3.0] {
                let z = c(re, im);
                let m = m_sc(z).unwrap();
                assert!(m.im > 0.0, "z={z} m={m}");
                let resid = m * (m / 4.0 + z) + 1.0;
                assert!(resid.norm() < 1e-12, "z={z} resid={resid}");
                let mc = m_sc(z.conj()).unwrap();
                assert!((mc - m.conj()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn m_sc_boundary_value_is_pi_rho() {
        for &x in &[-0.8, -0.1, 0.3, 0.7] {
            let m = m_sc(c(x, 1e-12)).unwrap();
            assert!((m.im - std::f64::consts::PI * rho_sc(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn m_n_small_spectra() {
        let s = Spectrum::new(vec![0.0]).unwrap();
        assert_relative_eq!(m_n(c(2.0, 0.0), &s, 0).unwrap().re, -0.5);
        let s = Spectrum::new(vec![-0.5, 0.5]).unwrap();
        assert_relative_eq!(m_n(c(2.0, 0.0), &s, 0).unwrap().re, -8.0 / 15.0, epsilon = 1e-15);
        assert!(matches!(m_n(c(0.5, 0.0), &s, 0), Err(SskError::Pole { .. })));
    }

    #[test]
    fn m_n_derivatives_match_finite_differences() {
        let s = sample_spectrum(50, 2, SpectrumMethod::Dense).unwrap();
        let z = c(2.0, 0.3);
        let h = 1e-5;
        for order in 1..=2u32 {
            let fd = (m_n(z + h, &s, order - 1).unwrap() - m_n(z - h, &s, order - 1).unwrap())
                / (2.0 * h);
            let exact = m_n(z, &s, order).unwrap();
            assert!((fd - exact).norm() / exact.norm() < 1e-6, "order {order}");
        }
    }

    #[test]
    fn m_n_conjugate_symmetry() {
        let s = sample_spectrum(40, 4, SpectrumMethod::Dense).unwrap();
        let z = c(0.3, 0.2);
        let a = m_n(z, &s, 0).unwrap();
        let b = m_n(z.conj(), &s, 0).unwrap();
        assert!((a.conj() - b).norm() < 1e-14);
    }
}
