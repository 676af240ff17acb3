//! Experiment orchestration and run directories.
//!
//! A run directory holds `manifest.json` (written before any computation),
//! `tables/*.csv`, `plots/*.svg` rendered from those tables only,
//! `report.json` and `log.txt`.

mod experiments;
mod manifest;
mod svg;
mod table;

pub use experiments::{
    cell_seed, exp_free_energy, exp_overlap_clt, exp_rigidity, exp_saddle_scaling, overlap_table_name, schedule_label,
};
pub use manifest::{parse_f64_list, parse_u64_list, Chunking, ExperimentKind, RunManifest, Tolerances};
pub use svg::{histogram_svg, loglog_svg};
pub use table::{fmt_f64, Cell, CsvData, Table};

use crate::error::{Result, SskError};
use crate::statkit::{histogram, loglog_slope};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// JSON has no NaN or infinity: non-finite numbers are written as `null` and
/// read back as NaN.
mod nullable {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        x.is_finite().then_some(*x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }

    pub mod map {
        use serde::{Deserialize, Deserializer, Serialize, Serializer};
        use std::collections::BTreeMap;

        pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
            let out: BTreeMap<&String, Option<f64>> =
                m.iter().map(|(k, v)| (k, v.is_finite().then_some(*v))).collect();
            out.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
            let m = BTreeMap::<String, Option<f64>>::deserialize(d)?;
            Ok(m.into_iter().map(|(k, v)| (k, v.unwrap_or(f64::NAN))).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub n: usize,
    pub seed: u64,
    /// Absent for experiments without an inverse temperature.
    pub beta: Option<f64>,
    #[serde(with = "nullable::map")]
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    #[serde(with = "nullable")]
    pub measured: f64,
    /// `<=`, `>=` or `>`.
    pub comparison: String,
    #[serde(with = "nullable")]
    pub threshold: f64,
    /// Field of `Tolerances` the threshold comes from.
    pub tolerance: String,
    pub detail: String,
}

impl Verdict {
    fn new(name: &str, measured: f64, cmp: &str, threshold: f64, key: &str, detail: String) -> Self {
        let passed = match cmp {
            "<=" => measured <= threshold,
            ">=" => measured >= threshold,
            _ => measured > threshold,
        };
        Self {
            name: name.to_string(),
            passed,
            measured,
            comparison: cmp.to_string(),
            threshold,
            tolerance: key.to_string(),
            detail,
        }
    }

    pub fn at_most(name: &str, measured: f64, threshold: f64, key: &str, detail: String) -> Self {
        Self::new(name, measured, "<=", threshold, key, detail)
    }

    pub fn at_least(name: &str, measured: f64, threshold: f64, key: &str, detail: String) -> Self {
        Self::new(name, measured, ">=", threshold, key, detail)
    }

    pub fn above(name: &str, measured: f64, threshold: f64, key: &str, detail: String) -> Self {
        Self::new(name, measured, ">", threshold, key, detail)
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {} {} {} [{}] {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            fmt_g(self.measured),
            self.comparison,
            fmt_g(self.threshold),
            self.tolerance,
            self.detail
        )
    }
}

fn fmt_g(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e5) {
        format!("{x:.4e}")
    } else {
        format!("{x:.4}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub rows: Vec<CellRow>,
    #[serde(with = "nullable::map")]
    pub aggregates: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

/// Runs the experiment in memory.
pub fn run_experiment(m: &RunManifest) -> Result<(ExperimentReport, Vec<Table>)> {
    m.validate()?;
    match m.experiment {
        ExperimentKind::OverlapClt => exp_overlap_clt(m),
        ExperimentKind::SaddleScaling => exp_saddle_scaling(m),
        ExperimentKind::Rigidity => exp_rigidity(m),
        ExperimentKind::FreeEnergy => exp_free_energy(m),
    }
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

struct Log(fs::File);

impl Log {
    fn line(&mut self, msg: &str) -> Result<()> {
        writeln!(self.0, "[{}] {msg}", now_unix())?;
        Ok(())
    }
}

/// Creates `dir`, writes the manifest, runs, and writes tables, plots and the report.
pub fn write_run(m: &RunManifest, dir: &Path) -> Result<ExperimentReport> {
    m.validate()?;
    fs::create_dir_all(dir.join("tables"))?;
    fs::create_dir_all(dir.join("plots"))?;
    let mut m = m.clone();
    m.created_unix.get_or_insert_with(now_unix);
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m)? + "\n")?;
    let mut log = Log(fs::File::create(dir.join("log.txt"))?);
    log.line(&format!("experiment {} (version {})", m.experiment, m.code_version))?;
    let start = Instant::now();
    let (rep, tables) = run_experiment(&m)?;
    log.line(&format!("computed in {:.1} s", start.elapsed().as_secs_f64()))?;
    for t in &tables {
        fs::write(dir.join("tables").join(format!("{}.csv", t.name)), t.to_bytes()?)?;
    }
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&rep)? + "\n")?;
    let plots = render_plots(dir)?;
    log.line(&format!("{} tables, {} plots", tables.len(), plots.len()))?;
    for v in &rep.verdicts {
        log.line(&v.line())?;
    }
    Ok(rep)
}

pub fn load_manifest(dir: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(dir.join("manifest.json"))
        .map_err(|e| SskError::Config(format!("cannot read {}: {e}", dir.join("manifest.json").display())))?;
    let m: RunManifest = serde_json::from_str(&text).map_err(|e| SskError::Config(format!("manifest: {e}")))?;
    m.validate()?;
    Ok(m)
}

pub fn load_report(dir: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(dir.join("report.json"))?;
    Ok(serde_json::from_str(&text)?)
}

fn table(dir: &Path, name: &str) -> Result<CsvData> {
    CsvData::read(&dir.join("tables").join(format!("{name}.csv")))
}

/// Renders every plot of a run from its CSV tables; returns the files written.
pub fn render_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let m = load_manifest(dir)?;
    let mut out: Vec<(String, String)> = Vec::new();
    match m.experiment {
        ExperimentKind::OverlapClt => {
            let cells = table(dir, "cells")?;
            let ns = cells.floats("n")?;
            let seeds = cells.floats("seed")?;
            let var_b = cells.floats("var_moments")?;
            let n_max = *m.ns.last().unwrap();
            for ((n, seed), v) in ns.iter().zip(&seeds).zip(&var_b) {
                if *n as usize != n_max {
                    continue;
                }
                let name = overlap_table_name(n_max, *seed as u64);
                let u = table(dir, &name)?.floats("u")?;
                let h = histogram(&u, m.histogram_bins)?;
                out.push((
                    format!("hist_u_n{n_max}_s{}", *seed as u64),
                    histogram_svg(
                        &format!("normalized overlap, N = {n_max}, seed {}", *seed as u64),
                        "u",
                        &h.edges,
                        &h.density,
                        Some((0.0, *v)),
                    ),
                ));
            }
        }
        ExperimentKind::SaddleScaling => {
            let meds = table(dir, "medians")?;
            let fits = table(dir, "fits")?;
            let labels = meds.texts("schedule")?;
            let ns = meds.floats("n")?;
            let gaps = meds.floats("median_gap")?;
            let fl = fits.texts("schedule")?;
            let slopes = fits.floats("slope")?;
            let icpt = fits.floats("intercept")?;
            for (k, label) in fl.iter().enumerate() {
                let idx: Vec<usize> = (0..labels.len()).filter(|&i| &labels[i] == label).collect();
                let xs: Vec<f64> = idx.iter().map(|&i| ns[i]).collect();
                let ys: Vec<f64> = idx.iter().map(|&i| gaps[i]).collect();
                out.push((
                    format!("gap_{label}"),
                    loglog_svg(
                        &format!("median saddle gap, {label}"),
                        "N",
                        "gamma - lambda_1",
                        &xs,
                        &ys,
                        Some((slopes[k], icpt[k])),
                    ),
                ));
            }
        }
        ExperimentKind::Rigidity => {
            let t = table(dir, "rigidity")?;
            let ns = t.floats("n")?;
            let rig = t.floats("rigidity")?;
            for &n in &m.ns {
                let vals: Vec<f64> = ns.iter().zip(&rig).filter(|(a, _)| **a as usize == n).map(|(_, r)| *r).collect();
                if vals.len() >= 2 {
                    let h = histogram(&vals, (vals.len() / 2).clamp(2, m.histogram_bins))?;
                    out.push((
                        format!("rigidity_n{n}"),
                        histogram_svg(&format!("rigidity statistic, N = {n}"), "statistic", &h.edges, &h.density, None),
                    ));
                }
            }
            if m.ns.len() >= 2 {
                let med: Vec<f64> = m
                    .ns
                    .iter()
                    .map(|&n| {
                        crate::numeric::median(
                            &ns.iter().zip(&rig).filter(|(a, _)| **a as usize == n).map(|(_, r)| *r).collect::<Vec<_>>(),
                        )
                    })
                    .collect();
                let xs: Vec<f64> = m.ns.iter().map(|&n| n as f64).collect();
                let fit = loglog_slope(&xs, &med).ok().map(|f| (f.slope, f.intercept));
                out.push(("rigidity_scaling".into(), loglog_svg("median rigidity", "N", "statistic", &xs, &med, fit)));
            }
        }
        ExperimentKind::FreeEnergy => {
            let fe = table(dir, "free_energy")?;
            let sm = table(dir, "free_energy_summary")?;
            let (fb, fnn, ff) = (fe.floats("beta")?, fe.floats("n")?, fe.floats("free_energy")?);
            let (sb, sn, sv) = (sm.floats("beta")?, sm.floats("n")?, sm.floats("variance")?);
            let shape_n = m.shape_n.unwrap_or(*m.ns.last().unwrap());
            let mut betas: Vec<f64> = sb.clone();
            betas.dedup();
            for beta in betas {
                let fs: Vec<f64> = (0..ff.len())
                    .filter(|&i| fb[i] == beta && fnn[i] as usize == shape_n)
                    .map(|i| ff[i])
                    .collect();
                if fs.len() >= 2 {
                    let mu = crate::numeric::mean(&fs);
                    let scaled: Vec<f64> = fs.iter().map(|f| shape_n as f64 * (f - mu)).collect();
                    let h = histogram(&scaled, m.histogram_bins.min(fs.len() / 4).max(2))?;
                    out.push((
                        format!("free_energy_hist_beta{beta}"),
                        histogram_svg(
                            &format!("N (F_N - mean), beta = {beta}, N = {shape_n}"),
                            "N (F_N - mean)",
                            &h.edges,
                            &h.density,
                            Some((0.0, crate::numeric::variance(&scaled))),
                        ),
                    ));
                }
                let idx: Vec<usize> = (0..sb.len()).filter(|&i| sb[i] == beta).collect();
                if idx.len() >= 3 {
                    let xs: Vec<f64> = idx.iter().map(|&i| sn[i]).collect();
                    let ys: Vec<f64> = idx.iter().map(|&i| sv[i]).collect();
                    let fit = loglog_slope(&xs, &ys)?;
                    out.push((
                        format!("free_energy_variance_beta{beta}"),
                        loglog_svg(
                            &format!("Var(F_N), beta = {beta}"),
                            "N",
                            "Var(F_N)",
                            &xs,
                            &ys,
                            Some((fit.slope, fit.intercept)),
                        ),
                    ));
                }
            }
        }
    }
    let mut written = Vec::with_capacity(out.len());
    for (name, svg) in out {
        let path = dir.join("plots").join(format!("{name}.svg"));
        fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub identical: Vec<String>,
    pub differing: Vec<String>,
    pub missing: Vec<String>,
}

impl ReplayOutcome {
    pub fn is_clean(&self) -> bool {
        self.differing.is_empty() && self.missing.is_empty()
    }
}

/// Re-runs a run directory's manifest and compares every table byte for byte.
pub fn replay(dir: &Path) -> Result<ReplayOutcome> {
    let m = load_manifest(dir)?;
    let (_, tables) = run_experiment(&m)?;
    let mut out = ReplayOutcome::default();
    for t in tables {
        let path = dir.join("tables").join(format!("{}.csv", t.name));
        match fs::read(&path) {
            Ok(bytes) if bytes == t.to_bytes()? => out.identical.push(t.name),
            Ok(_) => out.differing.push(t.name),
            Err(_) => out.missing.push(t.name),
        }
    }
    Ok(out)
}
