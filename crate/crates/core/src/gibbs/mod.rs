//! Sampling from the spherical Gibbs measure in the eigenbasis of the
//! coupling matrix, replica overlaps, and brute-force quadrature oracles for
//! very small dimensions.
//!
//! The measure on the unit sphere has density proportional to
//! `exp(beta N sum_i lambda_i x_i^2)`. Overlaps are rotation invariant, so
//! eigenvectors are never needed.

mod moments;
mod oracle;
mod sampler;

pub use moments::{moment_summary, moment_summary_of, MomentSummary};
pub use oracle::{oracle_mgf_small_n, OracleValue};
pub use sampler::{sample_bingham_exact, sample_mh, BinghamSampler, ExactSamplerStats, MhChain, MhRun};

use crate::error::{Result, SskError};
use crate::rng::{stream, tag};
use crate::wigner::Spectrum;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsTarget {
    pub beta: f64,
    pub spectrum: Spectrum,
    /// Always true: coordinates are taken in the eigenbasis.
    pub eigenbasis: bool,
}

impl GibbsTarget {
    pub fn new(beta: f64, spectrum: Spectrum) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(SskError::Domain(format!("beta must be finite and >= 0, got {beta}")));
        }
        Ok(Self {
            beta,
            spectrum,
            eigenbasis: true,
        })
    }

    pub fn n(&self) -> usize {
        self.spectrum.n()
    }

    /// `sum lambda_i x_i^2`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        crate::numeric::ksum(self.spectrum.lambdas().iter().zip(x).map(|(l, v)| l * v * v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SamplerKind {
    Exact,
    Mh {
        step_size: f64,
        burn_in: usize,
        thin: usize,
    },
}

impl SamplerKind {
    pub fn tag(&self) -> &'static str {
        match self {
            SamplerKind::Exact => "exact",
            SamplerKind::Mh { .. } => "mh",
        }
    }
}

/// Pairs per RNG stream. Fixed so that output does not depend on the thread count.
pub const PAIRS_PER_CHUNK: usize = 256;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchDiagnostics {
    /// Envelope parameter of the exact sampler.
    pub b: Option<f64>,
    pub proposals: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    /// Tuned step size of the first chain of every chunk (MH only).
    pub step_sizes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapBatch {
    pub n: usize,
    pub beta: f64,
    pub r12: Vec<f64>,
    /// `sqrt(N (1 - beta^2)) r12`; `sqrt(N) r12` when `beta >= 1`.
    pub u: Vec<f64>,
    pub pair_count: usize,
    pub sampler: SamplerKind,
    pub seed: u64,
    pub chunk_size: usize,
    pub diagnostics: BatchDiagnostics,
}

impl OverlapBatch {
    pub fn scale(n: usize, beta: f64) -> f64 {
        let nf = n as f64;
        if beta < 1.0 {
            (nf * (1.0 - beta * beta)).sqrt()
        } else {
            nf.sqrt()
        }
    }

    /// RFC-4180 rows `pair_index,r12,u`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(out);
        w.write_record(["pair_index", "r12", "u"])?;
        for (i, (r, u)) in self.r12.iter().zip(&self.u).enumerate() {
            w.write_record([i.to_string(), format!("{r:.16e}"), format!("{u:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Empirical `E[exp(t u)]` with its standard error.
    pub fn empirical_mgf(&self, t: f64) -> (f64, f64) {
        let vals: Vec<f64> = self.u.iter().map(|u| (t * u).exp()).collect();
        let m = crate::numeric::mean(&vals);
        let se = (crate::numeric::variance(&vals) / vals.len() as f64).sqrt();
        (m, se)
    }
}

struct ChunkOut {
    r12: Vec<f64>,
    proposals: u64,
    accepted: u64,
    b: Option<f64>,
    step: Option<f64>,
}

/// Draws `2 pairs` vectors and forms disjoint pairs. Chunk `k` of
/// `PAIRS_PER_CHUNK` pairs uses stream `(seed, tag, k)`.
pub fn overlap_batch(
    tgt: &GibbsTarget,
    sampler: SamplerKind,
    seed: u64,
    pairs: usize,
) -> Result<OverlapBatch> {
    if pairs == 0 {
        return Err(SskError::Domain("pairs must be at least 1".into()));
    }
    let n = tgt.n();
    let chunks = pairs.div_ceil(PAIRS_PER_CHUNK);
    let outs = crate::par::map_range(chunks, |k| -> Result<ChunkOut> {
        let count = PAIRS_PER_CHUNK.min(pairs - k * PAIRS_PER_CHUNK);
        let mut r12 = Vec::with_capacity(count);
        match sampler {
            SamplerKind::Exact => {
                let mut rng = stream(seed, tag::GIBBS_EXACT, k as u64);
                let mut s = BinghamSampler::new(tgt)?;
                let mut x = vec![0.0; n];
                let mut y = vec![0.0; n];
                for _ in 0..count {
                    s.sample_into(&mut rng, &mut x)?;
                    s.sample_into(&mut rng, &mut y)?;
                    r12.push(dot(&x, &y));
                }
                let st = s.stats();
                Ok(ChunkOut {
                    r12,
                    proposals: st.proposals,
                    accepted: st.accepted,
                    b: Some(st.b),
                    step: None,
                })
            }
            SamplerKind::Mh {
                step_size,
                burn_in,
                thin,
            } => {
                if thin == 0 {
                    return Err(SskError::Domain("thin must be at least 1".into()));
                }
                let mut rng = stream(seed, tag::GIBBS_MH, k as u64);
                let mut a = MhChain::new(tgt, &mut rng, step_size)?;
                let mut b = MhChain::new(tgt, &mut rng, step_size)?;
                a.burn_in(&mut rng, burn_in);
                b.burn_in(&mut rng, burn_in);
                for _ in 0..count {
                    for _ in 0..thin {
                        a.step(&mut rng);
                        b.step(&mut rng);
                    }
                    r12.push(dot(a.state(), b.state()));
                }
                let steps = (2 * count * thin) as u64;
                let rate = 0.5 * (a.acceptance_rate() + b.acceptance_rate());
                Ok(ChunkOut {
                    r12,
                    proposals: steps,
                    accepted: (rate * steps as f64).round() as u64,
                    b: None,
                    step: Some(a.step_size()),
                })
            }
        }
    });
    let mut r12 = Vec::with_capacity(pairs);
    let mut diag = BatchDiagnostics::default();
    for o in outs {
        let o = o?;
        r12.extend(o.r12);
        diag.proposals += o.proposals;
        diag.accepted += o.accepted;
        diag.b = diag.b.or(o.b);
        diag.step_sizes.extend(o.step);
    }
    diag.acceptance_rate = diag.accepted as f64 / diag.proposals.max(1) as f64;
    if let Some(bad) = r12.iter().find(|r| !(r.abs() <= 1.0 + 1e-12)) {
        return Err(SskError::Internal(format!("overlap {bad} outside [-1, 1]")));
    }
    let scale = OverlapBatch::scale(n, tgt.beta);
    let u = r12.iter().map(|r| scale * r).collect();
    Ok(OverlapBatch {
        n,
        beta: tgt.beta,
        r12,
        u,
        pair_count: pairs,
        sampler,
        seed,
        chunk_size: PAIRS_PER_CHUNK,
        diagnostics: diag,
    })
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    crate::numeric::ksum(x.iter().zip(y).map(|(a, b)| a * b))
}

#[cfg(test)]
mod tests;
