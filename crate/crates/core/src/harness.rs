//! Experiment configuration, deterministic parallel replication, and report
//! writing for the `simulate` and `verify` entry points.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inference::{
    marginal_normal_check, qq_report, whiten, whiten_centered, QQReport, Reference, DEFAULT_GRID,
    MIN_NORMALITY_SAMPLES,
};
use crate::innovations::{stream_rng, stream_seed, InnovationDist};
use crate::moments::{moment_set, MomentSet};
use crate::oracle::{
    verify_finite_n_moments, verify_lemma_a1, verify_lemma_a2, verify_lemma_a3, LemmaReport,
    MAX_ORACLE_DIM,
};
use crate::population::{assemble_model, haar_orthogonal, PopulationModel, SpectrumSpec};
use crate::statistics::{replicate, ReplicationResult, SampleConfig};
use crate::symmat::{SymMatrix, TraceSet};

/// Version string embedded in every summary.
pub const VERSION: &str = env!("LSS_VERSION");

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "LSS_WORKERS";

/// Tolerance on every exact identity checked by the verification suite.
pub const VERIFY_TOL: f64 = 1e-9;

// Stream indices reserved for model construction; replication indices are
// always below these.
const SPECTRUM_STREAM: u64 = u64::MAX;
const ROTATION_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    fn writes_csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    fn writes_json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

/// A fully resolved `simulate` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub p: usize,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub dist: String,
    pub reps: usize,
    pub master_seed: u64,
    pub centered: bool,
    pub max_power: usize,
    pub diagonal_only: bool,
    /// Not serialized, so reports do not depend on where they are written.
    #[serde(skip)]
    pub output_dir: PathBuf,
    #[serde(skip, default = "default_format")]
    pub format: OutputFormat,
    /// Worker threads; `None` defers to `LSS_WORKERS`, then to the number of
    /// CPUs. Never affects results.
    #[serde(skip)]
    pub workers: Option<usize>,
}

fn default_format() -> OutputFormat {
    OutputFormat::Both
}

pub const DEFAULT_REPS: usize = 10_000;
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_OUTPUT_DIR: &str = "lss-out";

impl ExperimentConfig {
    /// Defaults for everything except the dimensions.
    pub fn new(p: usize, n: usize) -> Self {
        Self {
            p,
            n,
            alpha: 0.0,
            beta: 0.0,
            dist: "normal".into(),
            reps: DEFAULT_REPS,
            master_seed: DEFAULT_SEED,
            centered: false,
            max_power: 2,
            diagonal_only: false,
            output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
            format: OutputFormat::Both,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |field: &str, msg: String| Err(Error::Usage(format!("{field}: {msg}")));
        if self.p < 1 {
            return usage("p", "must be at least 1".into());
        }
        if self.n < 2 {
            return usage("n", "must be at least 2".into());
        }
        if self.reps < 1 {
            return usage("reps", "must be at least 1".into());
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return usage("alpha", format!("{} must be finite and >= 0", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return usage("beta", format!("{} outside [0, 1]", self.beta));
        }
        if !(1..=crate::statistics::MAX_POWER).contains(&self.max_power) {
            return usage(
                "max_power",
                format!(
                    "{} outside 1..={}",
                    self.max_power,
                    crate::statistics::MAX_POWER
                ),
            );
        }
        if self.workers == Some(0) {
            return usage("workers", "must be at least 1".into());
        }
        self.dist
            .parse::<InnovationDist>()
            .map_err(|e| Error::Usage(format!("dist: {e}")))?;
        Ok(())
    }

    /// Short hex digest of every field that influences results.
    pub fn digest(&self) -> String {
        let canonical = serde_json::json!({
            "p": self.p,
            "n": self.n,
            "alpha": self.alpha,
            "beta": self.beta,
            "dist": self.dist,
            "reps": self.reps,
            "master_seed": self.master_seed,
            "centered": self.centered,
            "max_power": self.max_power,
            "diagonal_only": self.diagonal_only,
        });
        let hash = Sha256::digest(canonical.to_string().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Flags of the `simulate` subcommand. Every field is optional so that flag
/// values can be layered over a config file and presets.
#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    /// key=value config file; flags override its values
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Dimension p (required, via flag or file)
    #[arg(long)]
    pub p: Option<usize>,
    /// Sample size n >= 2 (required, via flag or file)
    #[arg(long)]
    pub n: Option<usize>,
    /// Spike growth exponent alpha >= 0 [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Spike fraction beta in [0, 1] [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// normal | gamma:k:theta | rademacher | twopoint:prob [default: normal]
    #[arg(long)]
    pub dist: Option<String>,
    /// Number of replications [default: 10000]
    #[arg(long)]
    pub reps: Option<usize>,
    /// Master seed [default: 20240601]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also compute mean-centered statistics [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub centered: Option<bool>,
    /// Highest power of T_k, 1..=4 [default: 2]
    #[arg(long)]
    pub max_power: Option<usize>,
    /// Use Σ = Λ without a random rotation [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub diagonal_only: Option<bool>,
    /// Output directory [default: lss-out]
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// csv | json | both [default: both]
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Worker threads (overrides LSS_WORKERS)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Preset: p=50, n=500, reps=2000
    #[arg(long, conflicts_with = "paper_scale")]
    pub desk_scale: bool,
    /// Preset: p=100, n=1000, alpha=0.2, beta=0.1, gamma:4:0.5, reps=10000
    #[arg(long)]
    pub paper_scale: bool,
}

#[derive(Parser)]
#[command(name = "simulate", no_binary_name = true)]
struct SimulateCommand {
    #[command(flatten)]
    args: SimulateArgs,
}

/// Optional layer of configuration values.
#[derive(Debug, Clone, Default)]
struct ConfigLayer {
    p: Option<usize>,
    n: Option<usize>,
    alpha: Option<f64>,
    beta: Option<f64>,
    dist: Option<String>,
    reps: Option<usize>,
    seed: Option<u64>,
    centered: Option<bool>,
    max_power: Option<usize>,
    diagonal_only: Option<bool>,
    output_dir: Option<PathBuf>,
    format: Option<OutputFormat>,
    workers: Option<usize>,
}

impl ConfigLayer {
    fn over(self, base: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            p: self.p.or(base.p),
            n: self.n.or(base.n),
            alpha: self.alpha.or(base.alpha),
            beta: self.beta.or(base.beta),
            dist: self.dist.or(base.dist),
            reps: self.reps.or(base.reps),
            seed: self.seed.or(base.seed),
            centered: self.centered.or(base.centered),
            max_power: self.max_power.or(base.max_power),
            diagonal_only: self.diagonal_only.or(base.diagonal_only),
            output_dir: self.output_dir.or(base.output_dir),
            format: self.format.or(base.format),
            workers: self.workers.or(base.workers),
        }
    }

    fn from_args(a: &SimulateArgs) -> ConfigLayer {
        ConfigLayer {
            p: a.p,
            n: a.n,
            alpha: a.alpha,
            beta: a.beta,
            dist: a.dist.clone(),
            reps: a.reps,
            seed: a.seed,
            centered: a.centered,
            max_power: a.max_power,
            diagonal_only: a.diagonal_only,
            output_dir: a.output_dir.clone(),
            format: a.format,
            workers: a.workers,
        }
    }

    fn desk_scale() -> ConfigLayer {
        ConfigLayer {
            p: Some(50),
            n: Some(500),
            reps: Some(2000),
            ..Default::default()
        }
    }

    fn paper_scale() -> ConfigLayer {
        ConfigLayer {
            p: Some(100),
            n: Some(1000),
            alpha: Some(0.2),
            beta: Some(0.1),
            dist: Some("gamma:4:0.5".into()),
            reps: Some(10_000),
            ..Default::default()
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse::<T>()
        .map_err(|_| Error::Usage(format!("{key}: cannot parse '{raw}'")))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Usage(format!("{key}: '{raw}' is not a boolean"))),
    }
}

/// Parses `key = value` lines; `#` starts a comment. Unknown or repeated
/// keys are rejected.
fn parse_kv(text: &str) -> Result<ConfigLayer> {
    let mut layer = ConfigLayer::default();
    let mut seen = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Usage(format!("config line {}: expected key=value", lineno + 1))
        })?;
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        if let Some(prev) = seen.insert(key.clone(), value.to_string()) {
            return Err(Error::Usage(format!(
                "{key}: set twice in config file ('{prev}' and '{value}')"
            )));
        }
        match key.as_str() {
            "p" => layer.p = Some(parse_value(&key, value)?),
            "n" => layer.n = Some(parse_value(&key, value)?),
            "alpha" => layer.alpha = Some(parse_value(&key, value)?),
            "beta" => layer.beta = Some(parse_value(&key, value)?),
            "dist" => layer.dist = Some(value.to_string()),
            "reps" => layer.reps = Some(parse_value(&key, value)?),
            "seed" | "master_seed" => layer.seed = Some(parse_value(&key, value)?),
            "centered" => layer.centered = Some(parse_bool(&key, value)?),
            "max_power" => layer.max_power = Some(parse_value(&key, value)?),
            "diagonal_only" => layer.diagonal_only = Some(parse_bool(&key, value)?),
            "output_dir" => layer.output_dir = Some(PathBuf::from(value)),
            "format" => {
                layer.format =
                    Some(OutputFormat::from_str(value, true).map_err(|_| {
                        Error::Usage(format!("format: '{value}' is not csv|json|both"))
                    })?)
            }
            "workers" => layer.workers = Some(parse_value(&key, value)?),
            other => return Err(Error::Usage(format!("unknown config key '{other}'"))),
        }
    }
    Ok(layer)
}

/// Resolves parsed flags into a validated config. Precedence, highest
/// first: explicit flags, preset, config file, defaults.
pub fn resolve_config(args: &SimulateArgs) -> Result<ExperimentConfig> {
    let file_layer =
        match &args.config {
            Some(path) => parse_kv(&fs::read_to_string(path).map_err(|e| {
                Error::Usage(format!("config: cannot read {}: {e}", path.display()))
            })?)?,
            None => ConfigLayer::default(),
        };
    let preset = if args.desk_scale {
        ConfigLayer::desk_scale()
    } else if args.paper_scale {
        ConfigLayer::paper_scale()
    } else {
        ConfigLayer::default()
    };
    let merged = ConfigLayer::from_args(args).over(preset.over(file_layer));

    let mut missing = Vec::new();
    if merged.p.is_none() {
        missing.push("--p");
    }
    if merged.n.is_none() {
        missing.push("--n");
    }
    if !missing.is_empty() {
        return Err(Error::Usage(format!(
            "missing required flags: {} (set them on the command line, in --config, or use --desk-scale / --paper-scale)",
            missing.join(", ")
        )));
    }
    let mut cfg = ExperimentConfig::new(merged.p.unwrap(), merged.n.unwrap());
    cfg.alpha = merged.alpha.unwrap_or(cfg.alpha);
    cfg.beta = merged.beta.unwrap_or(cfg.beta);
    cfg.dist = merged.dist.unwrap_or(cfg.dist);
    cfg.reps = merged.reps.unwrap_or(cfg.reps);
    cfg.master_seed = merged.seed.unwrap_or(cfg.master_seed);
    cfg.centered = merged.centered.unwrap_or(cfg.centered);
    cfg.max_power = merged.max_power.unwrap_or(cfg.max_power);
    cfg.diagonal_only = merged.diagonal_only.unwrap_or(cfg.diagonal_only);
    cfg.output_dir = merged.output_dir.unwrap_or(cfg.output_dir);
    cfg.format = merged.format.unwrap_or(cfg.format);
    cfg.workers = merged.workers;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `simulate` flags (without the program or subcommand name).
pub fn parse_config<I, T>(args: I) -> Result<ExperimentConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cmd = SimulateCommand::try_parse_from(args).map_err(|e| Error::Usage(e.to_string()))?;
    resolve_config(&cmd.args)
}

/// Sample moments of `(T1, T2)` across replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMoments {
    pub mean_t1: f64,
    pub mean_t2: f64,
    pub var_t1: f64,
    pub var_t2: f64,
    pub cov_t1_t2: f64,
}

impl EmpiricalMoments {
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        let n = pairs.len() as f64;
        let mean_t1 = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_t2 = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let denom = (n - 1.0).max(1.0);
        let var_t1 = pairs.iter().map(|p| (p.0 - mean_t1).powi(2)).sum::<f64>() / denom;
        let var_t2 = pairs.iter().map(|p| (p.1 - mean_t2).powi(2)).sum::<f64>() / denom;
        let cov_t1_t2 = pairs
            .iter()
            .map(|p| (p.0 - mean_t1) * (p.1 - mean_t2))
            .sum::<f64>()
            / denom;
        Self {
            mean_t1,
            mean_t2,
            var_t1,
            var_t2,
            cov_t1_t2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub p: usize,
    pub spike_count: usize,
    pub spectral_norm: f64,
    pub diagonal: bool,
    pub traces: TraceSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteredSummary {
    pub ks: f64,
    pub e_t1_centered: f64,
    pub e_t2_centered: f64,
    pub empirical: EmpiricalMoments,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub version: String,
    pub config_digest: String,
    pub config: ExperimentConfig,
    pub ks: f64,
    pub reps: usize,
    pub moments: MomentSet,
    pub model: ModelSummary,
    pub empirical: EmpiricalMoments,
    /// KS distance of standardized `T_k` against N(0, 1), `k = 1..=max_power`.
    /// `None` when there are too few replications or the sample is constant.
    pub marginal_ks: Vec<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub centered: Option<CenteredSummary>,
    pub notes: Vec<String>,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub summary: ExperimentSummary,
    pub qq: QQReport,
    pub qq_centered: Option<QQReport>,
    pub replications: Vec<ReplicationResult>,
    pub ts: Vec<f64>,
    pub ts_centered: Option<Vec<f64>>,
    pub files: Vec<PathBuf>,
}

/// Builds the population model of a config: spectrum from the spectrum
/// stream, rotation from the rotation stream.
pub fn build_model(cfg: &ExperimentConfig) -> Result<PopulationModel> {
    let spec = SpectrumSpec::with_uniform_r(
        cfg.p,
        cfg.n,
        cfg.alpha,
        cfg.beta,
        stream_seed(cfg.master_seed, &[SPECTRUM_STREAM]),
        cfg.diagonal_only,
    )?;
    PopulationModel::from_spec(&spec, stream_seed(cfg.master_seed, &[ROTATION_STREAM]))
}

fn resolve_workers(cfg: &ExperimentConfig) -> Result<Option<usize>> {
    if let Some(w) = cfg.workers {
        return Ok(Some(w));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let w: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::Usage(format!("{WORKERS_ENV}: '{v}' is not a count")))?;
            if w == 0 {
                return Err(Error::Usage(format!("{WORKERS_ENV}: must be at least 1")));
            }
            Ok(Some(w))
        }
        Err(_) => Ok(None),
    }
}

/// Runs `f` on a pool of `workers` threads (rayon's default when `None`).
fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Usage(format!("workers: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every replication of `cfg` against `model`. Results are ordered by
/// replication index whatever the scheduling.
pub fn run_replications(
    cfg: &ExperimentConfig,
    model: &PopulationModel,
    dist: &InnovationDist,
) -> Result<Vec<ReplicationResult>> {
    let workers = resolve_workers(cfg)?;
    with_workers(workers, || {
        (0..cfg.reps as u64)
            .into_par_iter()
            .map(|rep| {
                replicate(&SampleConfig {
                    model,
                    dist,
                    n: cfg.n,
                    replication_index: rep,
                    master_seed: cfg.master_seed,
                    max_power: cfg.max_power,
                    centered: cfg.centered,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}

fn degenerate_context(err: Error, cfg: &ExperimentConfig) -> Error {
    match err {
        Error::DegenerateCovariance {
            psi11,
            psi12,
            psi22,
            det,
            ..
        } => Error::DegenerateCovariance {
            psi11,
            psi12,
            psi22,
            det,
            context: Some(format!(
                "dist={}, Σ: p={}, alpha={}, beta={}, diagonal_only={}",
                cfg.dist, cfg.p, cfg.alpha, cfg.beta, cfg.diagonal_only
            )),
        },
        other => other,
    }
}

/// Builds the model, runs all replications, whitens `(T1, T2)` and, when
/// `write` is set, writes the reports under `cfg.output_dir`.
pub fn run_experiment_with(cfg: &ExperimentConfig, write: bool) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let dist: InnovationDist = cfg.dist.parse()?;
    let model = build_model(cfg)?;
    let nu4 = dist.profile().nu4;
    let ms = moment_set(&model.traces, cfg.n, nu4, cfg.centered)?;
    ms.psi().inverse().map_err(|e| degenerate_context(e, cfg))?;

    let reps = run_replications(cfg, &model, &dist)?;
    let digest = cfg.digest();

    let ts = reps
        .iter()
        .map(|r| whiten(r.t[0], r.t[1], &ms).map(|v| v.ts))
        .collect::<Result<Vec<_>>>()?;
    let mut qq = qq_report(&ts, Reference::Chi2Df2, DEFAULT_GRID)?;
    qq.config_digest = digest.clone();

    let pairs: Vec<(f64, f64)> = reps.iter().map(|r| (r.t[0], r.t[1])).collect();
    let marginal_ks = (0..cfg.max_power)
        .map(|k| {
            if reps.len() < MIN_NORMALITY_SAMPLES {
                return None;
            }
            let tk: Vec<f64> = reps.iter().map(|r| r.t[k]).collect();
            marginal_normal_check(&tk).ok().map(|r| r.ks)
        })
        .collect();

    let (qq_centered, ts_centered, centered) = if cfg.centered {
        let cpairs: Vec<(f64, f64)> = reps
            .iter()
            .map(|r| r.t_centered.expect("centered statistics requested"))
            .collect();
        let tsc = cpairs
            .iter()
            .map(|&(a, b)| whiten_centered(a, b, &ms).map(|v| v.ts))
            .collect::<Result<Vec<_>>>()?;
        let mut qqc = qq_report(&tsc, Reference::Chi2Df2, DEFAULT_GRID)?;
        qqc.config_digest = digest.clone();
        let summary = CenteredSummary {
            ks: qqc.ks,
            e_t1_centered: ms.e_t1_centered.unwrap_or(f64::NAN),
            e_t2_centered: ms.e_t2_centered.unwrap_or(f64::NAN),
            empirical: EmpiricalMoments::from_pairs(&cpairs),
        };
        (Some(qqc), Some(tsc), Some(summary))
    } else {
        (None, None, None)
    };

    let mut notes = vec![
        "psi12 and psi22 are leading-order expressions; E T1, E T2 and psi11 are exact".to_string(),
    ];
    if cfg.centered {
        notes.push(
            "centered matrix uses divisor n: E T1_centered = (1 - 1/n) tr(Sigma)".to_string(),
        );
    }

    let summary = ExperimentSummary {
        version: VERSION.to_string(),
        config_digest: digest,
        config: cfg.clone(),
        ks: qq.ks,
        reps: reps.len(),
        moments: ms,
        model: ModelSummary {
            p: model.p(),
            spike_count: ((cfg.beta * cfg.p as f64) + 1e-9).floor() as usize,
            spectral_norm: model.spectral_norm(),
            diagonal: model.is_diagonal(),
            traces: model.traces,
        },
        empirical: EmpiricalMoments::from_pairs(&pairs),
        marginal_ks,
        centered,
        notes,
    };

    let mut outcome = ExperimentOutcome {
        summary,
        qq,
        qq_centered,
        replications: reps,
        ts,
        ts_centered,
        files: Vec::new(),
    };
    if write {
        outcome.files = write_reports(cfg, &outcome)?;
    }
    Ok(outcome)
}

/// [`run_experiment_with`] writing reports.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    run_experiment_with(cfg, true)
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn replications_csv(outcome: &ExperimentOutcome) -> String {
    let m = outcome.summary.config.max_power;
    let mut header: Vec<String> = (1..=m).map(|k| format!("t{k}")).collect();
    header.insert(0, "rep".into());
    header.push("ts".into());
    if outcome.ts_centered.is_some() {
        header.extend(["t1_centered", "t2_centered", "ts_centered"].map(String::from));
    }
    let mut out = header.join(",");
    out.push('\n');
    for (i, r) in outcome.replications.iter().enumerate() {
        let mut row = vec![r.replication_index.to_string()];
        row.extend(r.t.iter().map(|v| fmt17(*v)));
        row.push(fmt17(outcome.ts[i]));
        if let (Some((a, b)), Some(tsc)) = (r.t_centered, &outcome.ts_centered) {
            row.extend([fmt17(a), fmt17(b), fmt17(tsc[i])]);
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn write_file(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    files.push(path);
    Ok(())
}

/// Writes `qq.csv`, `replications.csv` (csv formats), `summary.json` (json
/// formats) and `qq_centered.csv` for centered runs.
pub fn write_reports(cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&cfg.output_dir)?;
    let dir = cfg.output_dir.as_path();
    let mut files = Vec::new();
    if cfg.format.writes_csv() {
        write_file(dir, "qq.csv", &outcome.qq.to_csv(), &mut files)?;
        write_file(
            dir,
            "replications.csv",
            &replications_csv(outcome),
            &mut files,
        )?;
        if let Some(qqc) = &outcome.qq_centered {
            write_file(dir, "qq_centered.csv", &qqc.to_csv(), &mut files)?;
        }
    }
    if cfg.format.writes_json() {
        let mut json = serde_json::to_string_pretty(&outcome.summary)?;
        json.push('\n');
        write_file(dir, "summary.json", &json, &mut files)?;
    }
    Ok(files)
}

/// Which innovation laws the verification grid draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DistPool {
    /// Rademacher and skewed two-point laws.
    Mixed,
    RademacherOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub version: String,
    pub max_dim: usize,
    pub cases: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Largest `abs_err` among exact identities, per lemma.
    pub max_abs_err: BTreeMap<String, f64>,
    /// Largest `abs_err` among leading-order comparisons, per quantity.
    pub leading_order_max_abs_err: BTreeMap<String, f64>,
    pub failures: Vec<String>,
    pub passed: bool,
    pub records: Vec<LemmaReport>,
}

fn random_symmetric(d: usize, rng: &mut impl Rng) -> SymMatrix {
    let a = nalgebra::DMatrix::<f64>::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    SymMatrix::from_symmetric_product(&a + a.transpose())
}

fn case_dist(pool: DistPool, case: usize, rng: &mut impl Rng) -> InnovationDist {
    match pool {
        DistPool::RademacherOnly => InnovationDist::rademacher(),
        DistPool::Mixed => {
            if case.is_multiple_of(3) {
                InnovationDist::rademacher()
            } else {
                let prob = (rng.random_range(0.05..0.95f64) * 100.0).round() / 100.0;
                InnovationDist::two_point(prob).expect("prob in (0, 1)")
            }
        }
    }
}

/// Runs the lemma and finite-`n` moment checks over `cases` randomized
/// matrices of dimension up to `max_dim`.
pub fn run_verification_suite(
    max_dim: usize,
    cases: usize,
    seed: u64,
    pool: DistPool,
) -> Result<VerificationReport> {
    if max_dim > MAX_ORACLE_DIM {
        return Err(Error::Guard(format!(
            "max_dim {max_dim} exceeds the oracle cap {MAX_ORACLE_DIM}"
        )));
    }
    if max_dim == 0 {
        return Err(Error::Usage("max_dim: must be at least 1".into()));
    }
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let finite_p_max = max_dim.min(3);
    let finite_n_max = max_dim.clamp(2, 3);
    for case in 0..cases {
        let mut rng = stream_rng(stream_seed(seed, &[case as u64]));
        let dist = case_dist(pool, case, &mut rng);
        let d = rng.random_range(1..=max_dim);
        let a = random_symmetric(d, &mut rng);
        let b = random_symmetric(d, &mut rng);

        let p = rng.random_range(1..=finite_p_max);
        let n = rng.random_range(2..=finite_n_max);
        let eigs: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..3.0)).collect();
        let rotation = (case % 2 == 1).then(|| haar_orthogonal(p, rng.random()));

        let mut push = |res: Result<Vec<LemmaReport>>, what: &str| match res {
            Ok(rs) => records.extend(rs),
            Err(e) => failures.push(format!("case {case} {what}: {e}")),
        };
        push(verify_lemma_a1(&a, &b, &dist).map(|r| vec![r]), "A1");
        push(verify_lemma_a2(&a, &dist).map(|r| vec![r]), "A2");
        push(verify_lemma_a3(&a, &b, &dist).map(|r| vec![r]), "A3");
        push(
            assemble_model(&eigs, rotation.as_ref())
                .and_then(|model| verify_finite_n_moments(&model, n, &dist)),
            "finite_n",
        );
    }

    let mut max_abs_err = BTreeMap::new();
    let mut leading = BTreeMap::new();
    for r in &records {
        let target = if r.exact {
            &mut max_abs_err
        } else {
            &mut leading
        };
        let e = target.entry(r.lemma.clone()).or_insert(0.0f64);
        *e = e.max(r.abs_err);
    }
    let exact_ok = records
        .iter()
        .filter(|r| r.exact)
        .all(|r| r.abs_err <= VERIFY_TOL);
    for r in records.iter().filter(|r| r.exact && r.abs_err > VERIFY_TOL) {
        failures.push(format!(
            "{} dims={:?} dist={}: abs_err {:e} > {VERIFY_TOL:e}",
            r.lemma, r.dims, r.dist, r.abs_err
        ));
    }
    Ok(VerificationReport {
        version: VERSION.to_string(),
        max_dim,
        cases,
        seed,
        tolerance: VERIFY_TOL,
        max_abs_err,
        leading_order_max_abs_err: leading,
        passed: exact_ok && failures.is_empty(),
        failures,
        records,
    })
}

/// Writes `verify.json` into `dir`.
pub fn write_verification(report: &VerificationReport, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("verify.json");
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(&path, json)?;
    Ok(path)
}
