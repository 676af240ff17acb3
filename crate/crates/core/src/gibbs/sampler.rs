use super::GibbsTarget;
use crate::error::{Result, SskError};
use crate::numeric::{bisect_increasing, KahanSum};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Proposals per stall check; fewer than `STALL_RATE * STALL_WINDOW`
/// acceptances in a window is an error.
const STALL_WINDOW: u64 = 1 << 22;
const STALL_RATE: f64 = 1e-6;

/// Exact rejection sampler for `exp(sum a_i x_i^2)` on the sphere with an
/// angular central Gaussian envelope.
#[derive(Debug, Clone)]
pub struct BinghamSampler {
    /// `a_i - max a <= 0`.
    shifted: Vec<f64>,
    /// `1/sqrt(omega_i)`, proposal standard deviations.
    scales: Vec<f64>,
    b: f64,
    log_bound: f64,
    proposals: u64,
    accepted: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactSamplerStats {
    pub b: f64,
    pub proposals: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
}

impl BinghamSampler {
    pub fn new(tgt: &GibbsTarget) -> Result<Self> {
        let n = tgt.n();
        let nf = n as f64;
        let scale = tgt.beta * nf;
        let top = tgt.spectrum.top();
        let shifted: Vec<f64> = tgt
            .spectrum
            .lambdas()
            .iter()
            .map(|l| scale * (l - top))
            .collect();
        let b = solve_envelope(&shifted)?;
        let scales = shifted
            .iter()
            .map(|a| 1.0 / (1.0 - 2.0 * a / b).sqrt())
            .collect();
        // sup of log(target / envelope), attained at v = (b - N)/2
        let log_bound = 0.5 * (b - nf) + 0.5 * nf * (nf / b).ln();
        Ok(Self {
            shifted,
            scales,
            b,
            log_bound,
            proposals: 0,
            accepted: 0,
        })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn stats(&self) -> ExactSamplerStats {
        ExactSamplerStats {
            b: self.b,
            proposals: self.proposals,
            accepted: self.accepted,
            acceptance_rate: if self.proposals == 0 {
                f64::NAN
            } else {
                self.accepted as f64 / self.proposals as f64
            },
        }
    }

    /// Writes one exact draw into `out` (length `N`).
    pub fn sample_into<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) -> Result<()> {
        let n = self.shifted.len();
        let nf = n as f64;
        debug_assert_eq!(out.len(), n);
        let mut window_start = (self.proposals, self.accepted);
        loop {
            self.proposals += 1;
            let mut norm2 = KahanSum::new();
            for (o, s) in out.iter_mut().zip(&self.scales) {
                let z: f64 = StandardNormal.sample(rng);
                *o = z * s;
                norm2.add(*o * *o);
            }
            let inv = 1.0 / norm2.value().sqrt();
            let mut v = KahanSum::new();
            for (o, a) in out.iter_mut().zip(&self.shifted) {
                *o *= inv;
                v.add(a * *o * *o);
            }
            let v = v.value();
            let log_ratio = v + 0.5 * nf * (1.0 - 2.0 * v / self.b).ln() - self.log_bound;
            if log_ratio > 1e-9 * (1.0 + v.abs() + self.log_bound.abs()) {
                return Err(SskError::Internal(format!(
                    "envelope bound violated: log ratio {log_ratio} > 0 (b = {})",
                    self.b
                )));
            }
            let u: f64 = rng.random();
            if u.ln() <= log_ratio {
                self.accepted += 1;
                return Ok(());
            }
            if self.proposals - window_start.0 >= STALL_WINDOW {
                let rate = (self.accepted - window_start.1) as f64 / STALL_WINDOW as f64;
                if rate < STALL_RATE {
                    return Err(SskError::Stall {
                        rate,
                        window: STALL_WINDOW as usize,
                        b: self.b,
                    });
                }
                window_start = (self.proposals, self.accepted);
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.shifted.len()];
        self.sample_into(rng, &mut out)?;
        Ok(out)
    }
}

/// Root of `sum 1/(b - 2 a_i) = 1` on `(0, N]` for `a_i <= 0`; the left side
/// decreases strictly in `b`.
pub(crate) fn solve_envelope(shifted: &[f64]) -> Result<f64> {
    let n = shifted.len() as f64;
    let h = |b: f64| -> f64 {
        let s: KahanSum = shifted.iter().map(|a| 1.0 / (b - 2.0 * a)).collect();
        1.0 - s.value()
    };
    if shifted.iter().any(|a| *a > 0.0 || !a.is_finite()) {
        return Err(SskError::Numeric("envelope solve needs finite a_i <= 0".into()));
    }
    let at_n = h(n);
    if at_n.abs() <= 1e-15 {
        return Ok(n);
    }
    if at_n < 0.0 {
        return Err(SskError::Numeric(format!(
            "envelope bracket failed: 1 - sum 1/(N - 2a) = {at_n} at b = N"
        )));
    }
    let lo = 1e-300f64.max(n * 1e-15);
    if h(lo) >= 0.0 {
        return Err(SskError::Numeric("envelope bracket failed near b = 0".into()));
    }
    let (lo, hi) = bisect_increasing(h, lo, n, 0.0, 2000);
    Ok(0.5 * (lo + hi))
}

/// `count` i.i.d. draws from the target.
pub fn sample_bingham_exact<R: Rng + ?Sized>(
    tgt: &GibbsTarget,
    rng: &mut R,
    count: usize,
) -> Result<(Vec<Vec<f64>>, ExactSamplerStats)> {
    if count == 0 {
        return Err(SskError::Domain("count must be at least 1".into()));
    }
    let mut sampler = BinghamSampler::new(tgt)?;
    let draws = (0..count)
        .map(|_| sampler.sample(rng))
        .collect::<Result<Vec<_>>>()?;
    Ok((draws, sampler.stats()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhRun {
    pub samples: Vec<Vec<f64>>,
    /// Acceptance over the post-burn-in steps.
    pub acceptance_rate: f64,
    pub step_size: f64,
    /// Step size after each tuning block of the burn-in.
    pub tuning_trace: Vec<f64>,
}

const TUNE_BLOCK: usize = 100;
const TARGET_ACCEPT: f64 = 0.3;

/// Random-walk Metropolis on the sphere: `x' = (x + h xi)/|x + h xi|`. The
/// proposal is symmetric, so the acceptance ratio is the density ratio.
pub struct MhChain {
    lambdas: Vec<f64>,
    scale: f64,
    x: Vec<f64>,
    energy: f64,
    step: f64,
    proposals: u64,
    accepted: u64,
    buf: Vec<f64>,
}

impl MhChain {
    pub fn new<R: Rng + ?Sized>(tgt: &GibbsTarget, rng: &mut R, step_size: f64) -> Result<Self> {
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(SskError::Domain(format!("step size must be positive, got {step_size}")));
        }
        let n = tgt.n();
        let lambdas = tgt.spectrum.lambdas().to_vec();
        let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        normalize(&mut x);
        let energy = energy_of(&lambdas, &x);
        Ok(Self {
            lambdas,
            scale: tgt.beta * n as f64,
            x,
            energy,
            step: step_size,
            proposals: 0,
            accepted: 0,
            buf: vec![0.0; n],
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        self.proposals += 1;
        for (b, x) in self.buf.iter_mut().zip(&self.x) {
            let xi: f64 = StandardNormal.sample(rng);
            *b = x + self.step * xi;
        }
        normalize(&mut self.buf);
        let e = energy_of(&self.lambdas, &self.buf);
        let log_alpha = self.scale * (e - self.energy);
        let u: f64 = rng.random();
        if log_alpha >= 0.0 || u.ln() < log_alpha {
            std::mem::swap(&mut self.x, &mut self.buf);
            self.energy = e;
            self.accepted += 1;
            true
        } else {
            false
        }
    }

    /// Burn-in with multiplicative step adaptation toward 30% acceptance.
    pub fn burn_in<R: Rng + ?Sized>(&mut self, rng: &mut R, steps: usize) -> Vec<f64> {
        let mut trace = Vec::new();
        let mut done = 0;
        while done < steps {
            let block = TUNE_BLOCK.min(steps - done);
            let mut acc = 0;
            for _ in 0..block {
                acc += self.step(rng) as usize;
            }
            done += block;
            let rate = acc as f64 / block as f64;
            self.step = (self.step * (2.0 * (rate - TARGET_ACCEPT)).exp()).clamp(1e-8, 1e3);
            trace.push(self.step);
        }
        self.proposals = 0;
        self.accepted = 0;
        trace
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }
}

fn normalize(x: &mut [f64]) {
    let s: KahanSum = x.iter().map(|v| v * v).collect();
    let inv = 1.0 / s.value().sqrt();
    x.iter_mut().for_each(|v| *v *= inv);
}

fn energy_of(lambdas: &[f64], x: &[f64]) -> f64 {
    let s: KahanSum = lambdas.iter().zip(x).map(|(l, v)| l * v * v).collect();
    s.value()
}

/// Metropolis chain: `burn_in` tuning steps, then `steps` steps emitting
/// every `thin`-th state.
pub fn sample_mh<R: Rng + ?Sized>(
    tgt: &GibbsTarget,
    rng: &mut R,
    steps: usize,
    step_size: f64,
    burn_in: usize,
    thin: usize,
) -> Result<MhRun> {
    if thin == 0 {
        return Err(SskError::Domain("thin must be at least 1".into()));
    }
    let mut chain = MhChain::new(tgt, rng, step_size)?;
    let tuning_trace = chain.burn_in(rng, burn_in);
    let mut samples = Vec::with_capacity(steps / thin);
    for k in 1..=steps {
        chain.step(rng);
        if k % thin == 0 {
            samples.push(chain.state().to_vec());
        }
    }
    Ok(MhRun {
        samples,
        acceptance_rate: chain.acceptance_rate(),
        step_size: chain.step_size(),
        tuning_trace,
    })
}
