use crate::error::{Result, SskError};
use crate::gibbs::PAIRS_PER_CHUNK;
use crate::potential::BetaSchedule;
use crate::wigner::SpectrumMethod;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    OverlapClt,
    SaddleScaling,
    Rigidity,
    FreeEnergy,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::OverlapClt,
        ExperimentKind::SaddleScaling,
        ExperimentKind::Rigidity,
        ExperimentKind::FreeEnergy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::OverlapClt => "overlap-clt",
            ExperimentKind::SaddleScaling => "saddle-scaling",
            ExperimentKind::Rigidity => "rigidity",
            ExperimentKind::FreeEnergy => "free-energy",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = SskError;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                SskError::Config(format!(
                    "unknown experiment {s:?}; expected one of overlap-clt, saddle-scaling, rigidity, free-energy"
                ))
            })
    }
}

/// Every threshold a verdict is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// KS significance level; a cell is Gaussian when `p > ks_alpha`.
    pub ks_alpha: f64,
    /// Share of cells that must pass KS.
    pub gaussian_fraction: f64,
    /// Largest relative disagreement among the three variance routes at the largest `N`.
    pub route_rel_tol: f64,
    /// Same, between curvature and marginal-moment routes at the smallest `N`.
    pub route_ab_rel_tol: f64,
    /// Standard errors allowed for the uniform control and pointwise MGF comparisons.
    pub se_multiple: f64,
    /// Share of `(cell, t)` points whose MC MGF is within `se_multiple` SE.
    pub mgf_point_fraction: f64,
    pub slope_tol: f64,
    /// Fixed-beta control: `|median gap - (gamma_hat - 1)|`.
    pub fixed_gap_tol: f64,
    /// Rigidity bound `N^rigidity_epsilon`.
    pub rigidity_epsilon: f64,
    /// Interval residual bound `N^interval_exponent`.
    pub interval_exponent: f64,
    pub local_law_max_ratio: f64,
    pub high_t_skew_max: f64,
    pub low_t_skew_min: f64,
    pub var_slope_expected: f64,
    pub var_slope_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ks_alpha: 1e-3,
            gaussian_fraction: 0.9,
            route_rel_tol: 0.05,
            route_ab_rel_tol: 0.02,
            se_multiple: 3.0,
            mgf_point_fraction: 0.95,
            slope_tol: 0.15,
            fixed_gap_tol: 0.01,
            rigidity_epsilon: 0.1,
            interval_exponent: -0.8,
            local_law_max_ratio: 1.0,
            high_t_skew_max: 0.2,
            low_t_skew_min: 0.1,
            var_slope_expected: -4.0 / 3.0,
            var_slope_tol: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chunking {
    pub pairs_per_chunk: usize,
}

/// Full description of a run. Replaying it reproduces every table byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub experiment: ExperimentKind,
    pub ns: Vec<usize>,
    pub seeds: Vec<u64>,
    pub schedules: Vec<BetaSchedule>,
    pub spectrum_method: SpectrumMethod,
    /// Normalized `t` values for MGF curves.
    pub t_grid: Vec<f64>,
    /// Contour quadrature tolerance.
    pub tol: f64,
    /// Step `h` of the log-MGF curvature estimate.
    pub curvature_step: f64,
    pub pairs: usize,
    /// Master seed of the Gibbs sampling streams.
    pub mc_seed: u64,
    /// Include a `beta = 0` control batch.
    pub control: bool,
    pub epsilon: f64,
    pub delta: f64,
    /// Half-width exponent of the central square; `1.5 tau` when absent.
    pub delta1: Option<f64>,
    pub dyadic_levels: u32,
    pub local_law_energies: usize,
    pub local_law_heights: usize,
    /// Size at which free-energy shape statistics are judged.
    pub shape_n: Option<usize>,
    pub histogram_bins: usize,
    pub tolerances: Tolerances,
    pub chunking: Chunking,
    pub code_version: String,
    /// Seconds since the Unix epoch when the run started. Not part of any table.
    pub created_unix: Option<u64>,
}

fn window(tau: f64) -> BetaSchedule {
    BetaSchedule::CriticalWindow { c: 1.0, tau }
}

impl RunManifest {
    pub fn default_for(kind: ExperimentKind) -> Self {
        let base = Self {
            experiment: kind,
            ns: vec![],
            seeds: (0..4).collect(),
            schedules: vec![],
            spectrum_method: SpectrumMethod::Dense,
            t_grid: (-6..=6).map(|k| k as f64 * 0.25).collect(),
            tol: 1e-8,
            curvature_step: 0.25,
            pairs: 10_000,
            mc_seed: 20_240_601,
            control: true,
            epsilon: 0.1,
            delta: 0.1,
            delta1: None,
            dyadic_levels: 4,
            local_law_energies: 41,
            local_law_heights: 12,
            shape_n: None,
            histogram_bins: 48,
            tolerances: Tolerances::default(),
            chunking: Chunking {
                pairs_per_chunk: PAIRS_PER_CHUNK,
            },
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: None,
        };
        match kind {
            ExperimentKind::OverlapClt => Self {
                ns: vec![512, 1024, 2048],
                schedules: vec![window(0.2)],
                ..base
            },
            ExperimentKind::SaddleScaling => Self {
                ns: vec![512, 1024, 2048, 4096],
                seeds: (0..20).collect(),
                schedules: vec![window(0.2), window(0.1), BetaSchedule::Fixed { beta: 0.5 }],
                spectrum_method: SpectrumMethod::Tridiagonal,
                ..base
            },
            ExperimentKind::Rigidity => Self {
                ns: vec![1000],
                seeds: (0..20).collect(),
                ..base
            },
            ExperimentKind::FreeEnergy => Self {
                ns: vec![250, 500, 1000, 2000],
                seeds: (0..200).collect(),
                schedules: vec![
                    BetaSchedule::Fixed { beta: 0.5 },
                    BetaSchedule::Fixed { beta: 1.5 },
                ],
                spectrum_method: SpectrumMethod::Tridiagonal,
                tol: 1e-10,
                shape_n: Some(1000),
                ..base
            },
        }
    }

    /// Defaults for `kind` overlaid with the keys of a JSON object.
    pub fn from_config(kind: Option<ExperimentKind>, config: &serde_json::Value) -> Result<Self> {
        let obj = config
            .as_object()
            .ok_or_else(|| SskError::Config("config must be a JSON object".into()))?;
        let kind = match (kind, obj.get("experiment")) {
            (Some(k), Some(v)) => {
                let named: ExperimentKind = serde_json::from_value(v.clone())
                    .map_err(|e| SskError::Config(format!("experiment: {e}")))?;
                if named != k {
                    return Err(SskError::Config(format!(
                        "config names experiment {named} but {k} was requested"
                    )));
                }
                k
            }
            (Some(k), None) => k,
            (None, Some(v)) => serde_json::from_value(v.clone())
                .map_err(|e| SskError::Config(format!("experiment: {e}")))?,
            (None, None) => return Err(SskError::Config("no experiment named".into())),
        };
        let mut merged = serde_json::to_value(Self::default_for(kind))?;
        overlay(&mut merged, config);
        let m: Self =
            serde_json::from_value(merged).map_err(|e| SskError::Config(format!("config: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SskError::Config(msg));
        if self.ns.is_empty() || self.ns.contains(&0) {
            return bad("ns must be a non-empty list of positive sizes".into());
        }
        if self.ns.windows(2).any(|w| w[0] >= w[1]) {
            return bad("ns must be strictly ascending".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must be non-empty".into());
        }
        if !(self.tol > 0.0 && self.tol < 1e-2) {
            return bad(format!("tol must lie in (0, 1e-2), got {}", self.tol));
        }
        if !(self.curvature_step > 0.0) {
            return bad("curvature_step must be positive".into());
        }
        if self.chunking.pairs_per_chunk != PAIRS_PER_CHUNK {
            return bad(format!(
                "this build samples in chunks of {PAIRS_PER_CHUNK} pairs, manifest says {}",
                self.chunking.pairs_per_chunk
            ));
        }
        if self.histogram_bins < 2 {
            return bad("histogram_bins must be at least 2".into());
        }
        for s in &self.schedules {
            s.validate()?;
        }
        match self.experiment {
            ExperimentKind::OverlapClt => {
                if self.schedules.len() != 1 || self.schedules[0].tau().is_none() {
                    return bad("overlap-clt needs exactly one critical-window schedule".into());
                }
                if self.pairs < 100 {
                    return bad("overlap-clt needs at least 100 pairs".into());
                }
                if self.ns[0] < crate::contour::MIN_CONTOUR_N {
                    return bad("overlap-clt needs N >= 5".into());
                }
            }
            ExperimentKind::SaddleScaling => {
                if self.schedules.is_empty() {
                    return bad("saddle-scaling needs at least one schedule".into());
                }
                if self.ns.len() < 3 {
                    return bad("saddle-scaling needs at least 3 sizes for a slope".into());
                }
            }
            ExperimentKind::Rigidity => {}
            ExperimentKind::FreeEnergy => {
                if self.schedules.is_empty() || self.schedules.iter().any(|s| s.tau().is_some()) {
                    return bad("free-energy needs fixed-beta schedules".into());
                }
                if self.seeds.len() < 50 {
                    return bad("free-energy needs at least 50 seeds".into());
                }
                if self.ns[0] < crate::contour::MIN_CONTOUR_N {
                    return bad("free-energy needs N >= 5".into());
                }
            }
        }
        Ok(())
    }

    pub fn delta1_for(&self, tau: f64) -> f64 {
        self.delta1.unwrap_or(1.5 * tau)
    }
}

/// Recursive merge: objects merge key by key, anything else replaces.
fn overlay(base: &mut serde_json::Value, top: &serde_json::Value) {
    match (base, top) {
        (serde_json::Value::Object(b), serde_json::Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, t) => *b = t.clone(),
    }
}

/// `"0..20"`, `"0..=3"` or `"1,5,9"`.
pub fn parse_u64_list(s: &str) -> Result<Vec<u64>> {
    let err = || SskError::Config(format!("cannot parse list {s:?}"));
    if let Some((a, b)) = s.split_once("..=") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| err())?, b.trim().parse().map_err(|_| err())?);
        return Ok((a..=b).collect());
    }
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| err())?, b.trim().parse().map_err(|_| err())?);
        return Ok((a..b).collect());
    }
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse().map_err(|_| err()))
        .collect()
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| SskError::Config(format!("cannot parse number {p:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for k in ExperimentKind::ALL {
            RunManifest::default_for(k).validate().unwrap();
            assert_eq!(k.as_str().parse::<ExperimentKind>().unwrap(), k);
        }
    }

    #[test]
    fn config_overlays_defaults() {
        let cfg = serde_json::json!({"ns": [50, 100], "tolerances": {"slope_tol": 0.3}});
        let m = RunManifest::from_config(Some(ExperimentKind::OverlapClt), &cfg).unwrap();
        assert_eq!(m.ns, vec![50, 100]);
        assert_eq!(m.tolerances.slope_tol, 0.3);
        assert_eq!(m.tolerances.ks_alpha, 1e-3);
        assert_eq!(m.pairs, 10_000);
    }

    #[test]
    fn config_errors() {
        let kind = Some(ExperimentKind::Rigidity);
        assert!(RunManifest::from_config(kind, &serde_json::json!([1])).is_err());
        assert!(RunManifest::from_config(kind, &serde_json::json!({"bogus": 1})).is_err());
        assert!(RunManifest::from_config(kind, &serde_json::json!({"ns": [10, 5]})).is_err());
        let wrong = serde_json::json!({"experiment": "free-energy"});
        assert!(RunManifest::from_config(kind, &wrong).is_err());
        let e = RunManifest::from_config(kind, &serde_json::json!({"tol": -1.0})).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_u64_list("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_u64_list("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_u64_list("5, 7").unwrap(), vec![5, 7]);
        assert!(parse_u64_list("a").is_err());
        assert_eq!(parse_f64_list("0,0.5,1").unwrap(), vec![0.0, 0.5, 1.0]);
    }
}
