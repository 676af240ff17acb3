use clap::{Args, Parser, Subcommand, ValueEnum};
use ssk_core::contour::{
    effective_t, mgf_curve_exact, overlap_mgf_saddle, ConstantMode, MgfCurve, MgfMethod, MIN_CONTOUR_N,
};
use ssk_core::gibbs::{oracle_mgf_small_n, overlap_batch, GibbsTarget, SamplerKind};
use ssk_core::lab::{
    load_report, parse_f64_list, parse_u64_list, render_plots, replay, write_run, ExperimentKind, RunManifest,
};
use ssk_core::potential::LogPotential;
use ssk_core::wigner::{sample_spectrum, write_spectrum_csv, Spectrum, SpectrumMethod};
use ssk_core::{Result, SskError};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

// A closed stdout (for example `ssk ... | head`) surfaces as an error, not a panic.
macro_rules! say {
    ($($arg:tt)*) => {
        writeln!(io::stdout(), $($arg)*)?
    };
}

#[derive(Parser)]
#[command(name = "ssk", version, about = "Spherical SK contour-integral laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues of one disorder sample, as CSV.
    Spectrum {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Method::Dense)]
        method: Method,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Saddle point of G on (lambda_1, inf), as JSON.
    Saddle {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        beta: f64,
    },
    /// Overlap moment generating function on a t-grid, as CSV.
    Mgf {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        beta: f64,
        /// Comma-separated t values.
        #[arg(long, allow_hyphen_values = true)]
        t: String,
        /// Scale t by sqrt(N (1 - beta^2)).
        #[arg(long)]
        normalized: bool,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = MgfChoice::Auto)]
        via: MgfChoice,
        /// Saddle-approximation constant.
        #[arg(long, value_enum, default_value_t = Mode::Rederived)]
        mode: Mode,
        /// Angular quadrature nodes for the small-N oracle.
        #[arg(long, default_value_t = 256)]
        nodes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replica overlap batch, as CSV; sampler diagnostics as JSON.
    Sample {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 1)]
        mc_seed: u64,
        #[arg(long, value_enum, default_value_t = SamplerChoice::Exact)]
        sampler: SamplerChoice,
        #[arg(long, default_value_t = 0.1)]
        step_size: f64,
        #[arg(long, default_value_t = 5000)]
        burn_in: usize,
        #[arg(long, default_value_t = 20)]
        thin: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Run an experiment into a run directory.
    Experiment {
        /// overlap-clt, saddle-scaling, rigidity or free-energy.
        name: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated sizes.
        #[arg(long)]
        ns: Option<String>,
        /// `0..20`, `0..=3` or `1,5,9`.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        mc_seed: Option<u64>,
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
    /// Summarize a run directory and re-render its plots from the tables.
    Report {
        dir: PathBuf,
        /// Re-run the manifest and compare every table byte for byte.
        #[arg(long)]
        replay: bool,
    },
}

#[derive(Args)]
struct Source {
    #[arg(long)]
    n: Option<usize>,
    /// Explicit comma-separated spectrum instead of a disorder sample.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Method::Dense)]
    method: Method,
}

impl Source {
    fn spectrum(&self) -> Result<Spectrum> {
        match (&self.lambda, self.n) {
            (Some(l), n) => {
                let s = Spectrum::new(parse_f64_list(l)?)?;
                if let Some(n) = n {
                    if n != s.n() {
                        return Err(SskError::Config(format!("--n {n} but --lambda has {} values", s.n())));
                    }
                }
                Ok(s)
            }
            (None, Some(n)) => sample_spectrum(n, self.seed, self.method.into()),
            (None, None) => Err(SskError::Config("give --n or --lambda".into())),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Dense,
    Tridiagonal,
}

impl From<Method> for SpectrumMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Dense => SpectrumMethod::Dense,
            Method::Tridiagonal => SpectrumMethod::Tridiagonal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MgfChoice {
    /// Contour for N >= 5, angular oracle for N = 2, 3.
    Auto,
    Contour,
    Saddle,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Theorem,
    Prop,
    Rederived,
}

impl From<Mode> for ConstantMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Theorem => ConstantMode::Theorem,
            Mode::Prop => ConstantMode::PropSaddle,
            Mode::Rederived => ConstantMode::Rederived,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerChoice {
    Exact,
    Mh,
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

#[allow(clippy::too_many_arguments)]
fn mgf(
    s: &Spectrum,
    beta: f64,
    ts: &[f64],
    normalized: bool,
    tol: f64,
    via: MgfChoice,
    mode: ConstantMode,
    nodes: usize,
) -> Result<MgfCurve> {
    let p = LogPotential::new(beta, s)?;
    let via = match via {
        MgfChoice::Auto if s.n() >= MIN_CONTOUR_N => MgfChoice::Contour,
        MgfChoice::Auto => MgfChoice::Oracle,
        v => v,
    };
    match via {
        MgfChoice::Contour | MgfChoice::Auto => mgf_curve_exact(&p, ts, tol, normalized),
        MgfChoice::Saddle => {
            let sad = p.find_saddle(1e-12)?;
            let scale = effective_t(&p, 1.0, true)?;
            let values = ts
                .iter()
                .map(|&t| overlap_mgf_saddle(&sad, if normalized { t } else { t / scale }, mode))
                .collect::<Result<Vec<_>>>()?;
            Ok(MgfCurve {
                t_grid: ts.to_vec(),
                values,
                method: MgfMethod::SaddleApprox,
                normalized,
            })
        }
        MgfChoice::Oracle => {
            let tgt = GibbsTarget::new(beta, s.clone())?;
            let values = ts
                .iter()
                .map(|&t| {
                    let te = effective_t(&p, t, normalized)?;
                    oracle_mgf_small_n(&tgt, te, nodes).map(|v| v.value)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(MgfCurve {
                t_grid: ts.to_vec(),
                values,
                method: MgfMethod::Oracle,
                normalized,
            })
        }
    }
}

fn default_run_dir(kind: ExperimentKind) -> PathBuf {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Path::new("runs").join(format!("{kind}-{secs}"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Spectrum { n, seed, method, out } => {
            let s = sample_spectrum(n, seed, method.into())?;
            write_spectrum_csv(&s, sink(&out)?)?;
        }
        Command::Saddle { source, beta } => {
            let s = source.spectrum()?;
            let info = LogPotential::new(beta, &s)?.find_saddle(1e-12)?;
            say!("{}", serde_json::to_string_pretty(&info)?);
        }
        Command::Mgf {
            source,
            beta,
            t,
            normalized,
            tol,
            via,
            mode,
            nodes,
            out,
        } => {
            let s = source.spectrum()?;
            let ts = parse_f64_list(&t)?;
            if ts.is_empty() {
                return Err(SskError::Config("--t needs at least one value".into()));
            }
            let curve = mgf(&s, beta, &ts, normalized, tol, via, mode.into(), nodes)?;
            curve.write_csv(sink(&out)?)?;
        }
        Command::Sample {
            source,
            beta,
            pairs,
            mc_seed,
            sampler,
            step_size,
            burn_in,
            thin,
            out,
            diagnostics,
        } => {
            let tgt = GibbsTarget::new(beta, source.spectrum()?)?;
            let kind = match sampler {
                SamplerChoice::Exact => SamplerKind::Exact,
                SamplerChoice::Mh => SamplerKind::Mh {
                    step_size,
                    burn_in,
                    thin,
                },
            };
            let b = overlap_batch(&tgt, kind, mc_seed, pairs)?;
            b.write_csv(sink(&out)?)?;
            let diag = serde_json::json!({
                "sampler": kind,
                "pairs": b.pair_count,
                "seed": b.seed,
                "chunk_size": b.chunk_size,
                "diagnostics": b.diagnostics,
            });
            let text = serde_json::to_string_pretty(&diag)?;
            match diagnostics {
                Some(p) => fs::write(p, text + "\n")?,
                None => eprintln!("{text}"),
            }
        }
        Command::Experiment {
            name,
            config,
            out,
            ns,
            seeds,
            pairs,
            tol,
            mc_seed,
            method,
        } => {
            let kind: ExperimentKind = name.parse()?;
            let mut cfg = match &config {
                Some(p) => {
                    let text = fs::read_to_string(p)
                        .map_err(|e| SskError::Config(format!("cannot read {}: {e}", p.display())))?;
                    serde_json::from_str(&text).map_err(|e| SskError::Config(format!("{}: {e}", p.display())))?
                }
                None => serde_json::json!({}),
            };
            let obj = cfg
                .as_object_mut()
                .ok_or_else(|| SskError::Config("config must be a JSON object".into()))?;
            if let Some(v) = ns {
                let list: Vec<u64> = parse_u64_list(&v)?;
                obj.insert("ns".into(), serde_json::json!(list));
            }
            if let Some(v) = seeds {
                obj.insert("seeds".into(), serde_json::json!(parse_u64_list(&v)?));
            }
            if let Some(v) = pairs {
                obj.insert("pairs".into(), serde_json::json!(v));
            }
            if let Some(v) = tol {
                obj.insert("tol".into(), serde_json::json!(v));
            }
            if let Some(v) = mc_seed {
                obj.insert("mc_seed".into(), serde_json::json!(v));
            }
            if let Some(v) = method {
                obj.insert("spectrum_method".into(), serde_json::to_value(SpectrumMethod::from(v))?);
            }
            let manifest = RunManifest::from_config(Some(kind), &cfg)?;
            let dir = out.unwrap_or_else(|| default_run_dir(kind));
            let rep = write_run(&manifest, &dir)?;
            for v in &rep.verdicts {
                say!("{}", v.line());
            }
            for note in &rep.notes {
                say!("note: {note}");
            }
            say!("run directory: {}", dir.display());
        }
        Command::Report { dir, replay: do_replay } => {
            let rep = load_report(&dir)?;
            say!("experiment {}", rep.experiment);
            for v in &rep.verdicts {
                say!("{}", v.line());
            }
            for (k, v) in &rep.aggregates {
                say!("{k} = {v}");
            }
            for note in &rep.notes {
                say!("note: {note}");
            }
            let plots = render_plots(&dir)?;
            say!("rendered {} plots", plots.len());
            if do_replay {
                let r = replay(&dir)?;
                say!(
                    "replay: {} identical, {} differing, {} missing",
                    r.identical.len(),
                    r.differing.len(),
                    r.missing.len()
                );
                for name in r.differing.iter().chain(&r.missing) {
                    say!("  {name}");
                }
                if !r.is_clean() {
                    return Err(SskError::Internal("replay did not reproduce the tables".into()));
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn broken_pipe(e: &SskError) -> bool {
    match e {
        SskError::Io(io) => io.kind() == io::ErrorKind::BrokenPipe,
        SskError::Csv(c) => matches!(c.kind(), csv::ErrorKind::Io(io) if io.kind() == io::ErrorKind::BrokenPipe),
        _ => false,
    }
}
