use super::sampler::solve_envelope;
use super::*;
use crate::rng::{stream, tag};
use crate::statkit::ks_two_sample;
use proptest::prelude::*;

fn target(beta: f64, l: &[f64]) -> GibbsTarget {
    GibbsTarget::new(beta, Spectrum::new(l.to_vec()).unwrap()).unwrap()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = crate::numeric::mean(xs);
    (m, (crate::numeric::variance(xs) / xs.len() as f64).sqrt())
}

/// `I_0(x)` by its power series.
fn bessel_i0(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= (x / 2.0) * (x / 2.0) / (k as f64 * k as f64);
        sum += term;
    }
    sum
}

#[test]
fn envelope_solves_its_equation() {
    assert_eq!(solve_envelope(&[0.0; 7]).unwrap(), 7.0);
    let a = [0.0, -0.5, -3.0, -40.0, -400.0];
    let b = solve_envelope(&a).unwrap();
    assert!(b > 0.0 && b <= 5.0);
    let lhs: f64 = a.iter().map(|x| 1.0 / (b - 2.0 * x)).sum();
    assert!((lhs - 1.0).abs() < 1e-12);
    assert!(solve_envelope(&[0.0, 1.0]).is_err());
}

#[test]
fn equal_spectrum_accepts_every_proposal() {
    let tgt = target(2.0, &[0.3; 6]);
    let mut rng = stream(1, tag::SYNTHETIC, 0);
    let (draws, st) = sample_bingham_exact(&tgt, &mut rng, 500).unwrap();
    assert_eq!(st.proposals, 500);
    assert_eq!(st.accepted, 500);
    assert_eq!(st.b, 6.0);
    for x in &draws {
        let norm: f64 = x.iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }
    // uniform: E[x_1^2] = 1/N
    let x1: Vec<f64> = draws.iter().map(|x| x[0] * x[0]).collect();
    let (m, se) = mean_se(&x1);
    assert!((m - 1.0 / 6.0).abs() < 4.0 * se);
}

/// Second moments of the n = 3 fixture, from independent 2-sphere quadrature.
const N3_SECOND_MOMENTS: [f64; 3] = [0.5425504890959266, 0.28430384670652786, 0.17314566419754573];

#[test]
fn exact_sampler_matches_sphere_quadrature() {
    let tgt = target(1.0, &[0.5, 0.0, -0.5]);
    let mut rng = stream(7, tag::SYNTHETIC, 0);
    let (draws, st) = sample_bingham_exact(&tgt, &mut rng, 100_000).unwrap();
    assert!(st.acceptance_rate > 0.1);
    for (i, want) in N3_SECOND_MOMENTS.iter().enumerate() {
        let xs: Vec<f64> = draws.iter().map(|x| x[i] * x[i]).collect();
        let (m, se) = mean_se(&xs);
        assert!((m - want).abs() <= 3.0 * se, "coordinate {i}: {m} vs {want} (se {se})");
    }
}

#[test]
fn off_diagonal_covariance_vanishes_and_moments_sum_to_one() {
    let tgt = target(0.9, &[0.9, 0.4, 0.1, -0.2, -0.6]);
    let mut rng = stream(8, tag::SYNTHETIC, 0);
    let (draws, _) = sample_bingham_exact(&tgt, &mut rng, 40_000).unwrap();
    for i in 0..5 {
        for j in i + 1..5 {
            let xs: Vec<f64> = draws.iter().map(|x| x[i] * x[j]).collect();
            let (m, se) = mean_se(&xs);
            assert!(m.abs() <= 4.0 * se, "E[x{i} x{j}] = {m} (se {se})");
        }
    }
    let total: f64 = (0..5)
        .map(|i| crate::numeric::mean(&draws.iter().map(|x| x[i] * x[i]).collect::<Vec<_>>()))
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn mh_at_infinite_temperature_accepts_everything() {
    let tgt = target(0.0, &[1.0, 0.0, -1.0, 0.5]);
    let mut rng = stream(2, tag::SYNTHETIC, 0);
    let run = sample_mh(&tgt, &mut rng, 2000, 0.5, 0, 1).unwrap();
    assert_eq!(run.acceptance_rate, 1.0);
    assert_eq!(run.samples.len(), 2000);
}

#[test]
fn mh_agrees_with_exact_sampler_on_energy() {
    let s = crate::wigner::sample_spectrum(100, 3, crate::wigner::SpectrumMethod::Dense).unwrap();
    let tgt = GibbsTarget::new(0.8, s).unwrap();
    let mut rng = stream(3, tag::SYNTHETIC, 0);
    let run = sample_mh(&tgt, &mut rng, 10_000 * 40, 0.1, 20_000, 40).unwrap();
    assert!(run.acceptance_rate > 0.15 && run.acceptance_rate < 0.5, "{}", run.acceptance_rate);
    let (exact, _) = sample_bingham_exact(&tgt, &mut rng, 10_000).unwrap();
    let e_mh: Vec<f64> = run.samples.iter().map(|x| tgt.energy(x)).collect();
    let e_ex: Vec<f64> = exact.iter().map(|x| tgt.energy(x)).collect();
    let ks = ks_two_sample(&e_mh, &e_ex).unwrap();
    assert!(ks.p_value > 0.001, "KS p = {}", ks.p_value);
}

#[test]
fn uniform_overlap_has_unit_variance() {
    let s = crate::wigner::sample_spectrum(50, 4, crate::wigner::SpectrumMethod::Dense).unwrap();
    let tgt = GibbsTarget::new(0.0, s).unwrap();
    let b = overlap_batch(&tgt, SamplerKind::Exact, 11, 20_000).unwrap();
    assert_eq!(b.r12.len(), 20_000);
    let m = moment_summary(&b).unwrap();
    assert!((m.variance - 1.0).abs() <= 3.0 * m.variance_se, "{m:?}");
    assert!(m.mean.abs() <= 3.0 * m.mean_se);
}

#[test]
fn overlap_batch_is_deterministic_and_mean_zero() {
    let s = crate::wigner::sample_spectrum(30, 5, crate::wigner::SpectrumMethod::Dense).unwrap();
    let tgt = GibbsTarget::new(0.6, s).unwrap();
    let a = overlap_batch(&tgt, SamplerKind::Exact, 9, 1000).unwrap();
    let b = overlap_batch(&tgt, SamplerKind::Exact, 9, 1000).unwrap();
    assert_eq!(a, b);
    let m = moment_summary(&a).unwrap();
    assert!(m.mean.abs() <= 3.0 * m.mean_se);
    let mh = SamplerKind::Mh {
        step_size: 0.2,
        burn_in: 2000,
        thin: 10,
    };
    let c = overlap_batch(&tgt, mh, 9, 300).unwrap();
    assert_eq!(c.r12.len(), 300);
    assert!(c.r12.iter().all(|r| r.abs() <= 1.0));
    let mut csv = Vec::new();
    a.write_csv(&mut csv).unwrap();
    assert!(String::from_utf8(csv).unwrap().starts_with("pair_index,r12,u\r\n0,"));
}

#[test]
fn oracle_is_one_at_zero() {
    for l in [&[0.8, -0.3][..], &[0.5, 0.0, -0.5][..]] {
        let v = oracle_mgf_small_n(&target(0.7, l), 0.0, 32).unwrap();
        assert!((v.value - 1.0).abs() < 1e-12);
    }
    assert!(oracle_mgf_small_n(&target(0.7, &[0.1, 0.2, 0.3, 0.4]), 0.5, 32).is_err());
}

#[test]
fn uniform_circle_gives_bessel() {
    let v = oracle_mgf_small_n(&target(0.0, &[0.8, -0.3]), 1.0, 64).unwrap();
    assert!((v.value - bessel_i0(1.0)).abs() < 1e-13);
    assert!((v.value - 1.2660658777520082).abs() < 1e-13);
}

#[test]
fn circle_fixture_matches_reference() {
    // independent trapezoid evaluation at 2048 and 4096 nodes agree exactly
    let tgt = target(0.7, &[0.8, -0.3]);
    for (t, want) in [
        (0.25, 1.0177107975100175),
        (0.5, 1.0717102376221097),
        (1.0, 1.3010863824824854),
    ] {
        let v = oracle_mgf_small_n(&tgt, t, 256).unwrap();
        assert!((v.value - want).abs() < 1e-13, "t = {t}: {}", v.value);
        assert!(v.error < 1e-12);
    }
}

#[test]
fn sphere_oracle_converges_and_is_even() {
    let tgt = target(1.0, &[0.5, 0.0, -0.5]);
    let a = oracle_mgf_small_n(&tgt, 0.8, 24).unwrap();
    let b = oracle_mgf_small_n(&tgt, -0.8, 24).unwrap();
    assert!(a.error < 1e-10, "{a:?}");
    assert!((a.value - b.value).abs() < 1e-12);
    assert!(a.value > 1.0);
    // uniform 2-sphere: <exp(t cos psi)> = sinh(t)/t
    let u = oracle_mgf_small_n(&target(0.0, &[0.5, 0.0, -0.5]), 1.3, 24).unwrap();
    assert!((u.value - 1.3f64.sinh() / 1.3).abs() < 1e-12);
}

#[test]
fn moment_summary_errors() {
    let b = vec![0.7; 200];
    assert!(matches!(moment_summary_of(&b), Err(SskError::Degenerate(_))));
    assert!(matches!(moment_summary_of(&[1.0, 2.0]), Err(SskError::TooFewSamples { .. })));
}

#[test]
fn gaussian_synthetic_moments() {
    use rand_distr::{Distribution, Normal};
    let mut rng = stream(4, tag::SYNTHETIC, 0);
    let d = Normal::new(0.0, 2f64.sqrt()).unwrap();
    let xs: Vec<f64> = (0..50_000).map(|_| d.sample(&mut rng)).collect();
    let m = moment_summary_of(&xs).unwrap();
    assert!((m.variance - 2.0).abs() <= 3.0 * m.variance_se, "{m:?}");
    assert!(m.skewness.abs() <= 3.0 * m.skewness_se, "{m:?}");
    assert!(m.excess_kurtosis.abs() <= 3.0 * m.excess_kurtosis_se, "{m:?}");
    // jackknife SE of the mean equals s/sqrt(n)
    assert!((m.mean_se / (m.variance / xs.len() as f64).sqrt() - 1.0).abs() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_sampler_never_exceeds_envelope(
        l in prop::collection::vec(-1.0f64..1.0, 2..12),
        beta in 0.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let tgt = target(beta, &l);
        let mut rng = stream(seed, tag::SYNTHETIC, 0);
        // every proposal's log ratio is checked inside the sampler
        let (draws, st) = sample_bingham_exact(&tgt, &mut rng, 50).unwrap();
        prop_assert_eq!(draws.len(), 50);
        prop_assert!(st.b > 0.0 && st.b <= l.len() as f64);
    }

    #[test]
    fn overlaps_lie_in_unit_interval(seed in any::<u64>(), beta in 0.0f64..0.95) {
        let tgt = target(beta, &[0.9, 0.1, -0.2, -0.4, -0.7]);
        let b = overlap_batch(&tgt, SamplerKind::Exact, seed, 64).unwrap();
        prop_assert!(b.r12.iter().all(|r| r.abs() <= 1.0));
        prop_assert!(b.u.iter().all(|u| u.is_finite()));
    }
}
