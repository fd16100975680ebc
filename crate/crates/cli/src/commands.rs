//! Argument definitions and subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use prae::data::{self, LabeledDataset, SeparatedSpec, StandardizeParams};
use prae::metrics::{subspace_angle, EvalReport};
use prae::nn::Activation;
use prae::prae::{
    equivalence_check, lambda_sweep, score_in_sample, score_out_of_sample,
    train_prae, PraeConfig, SweepRow, Variant, ORACLE_MAX_N,
};
use prae::rng::derive_seed;
use prae::Error;

use crate::experiments::{fig3_sweep, median, selected_subspace};
use crate::model_file::ModelFile;
use crate::presets::{Preset, FIG3_LAMBDAS, ORACLE_LAMBDA, ORACLE_SPEC};
use crate::record::{config_hash, RunRecord};

#[derive(Debug, Parser)]
#[command(name = "prae", version, about = "Probabilistic robust autoencoder for outlier detection")]
pub struct Cli {
    /// Seed for data generation, initialisation, shuffling and gate noise.
    #[arg(long, env = "PRAE_SEED", default_value_t = 0, global = true)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset as CSV with a trailing `label` column.
    Synth(SynthArgs),
    /// Train a model and save it as JSON.
    Train(TrainArgs),
    /// Score rows with a trained model.
    Score(ScoreArgs),
    /// Compute AUC, max-F1 and optionally a subspace angle.
    Eval(EvalArgs),
    /// Train over a grid of lambdas and tabulate F1 and validation MSE.
    Sweep(SweepArgs),
    /// Compare PRAE's selection with exhaustive search on small instances.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(subcommand)]
    pub kind: SynthKind,
}

#[derive(Debug, Subcommand)]
pub enum SynthKind {
    /// Inliers on a random linear subspace plus isotropic Gaussian outliers.
    Linear {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        dim: usize,
        #[arg(long, default_value_t = 2)]
        intrinsic: usize,
        /// Outlier fraction.
        #[arg(long, default_value_t = 0.25)]
        r: f64,
        #[arg(long, default_value_t = 1e-8)]
        noise_var: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the true `dim x intrinsic` basis.
        #[arg(long)]
        basis_out: Option<PathBuf>,
    },
    /// Narrow swiss roll with Gaussian outliers around the origin.
    Swiss {
        #[arg(long, default_value_t = 1000)]
        n_in: usize,
        #[arg(long, default_value_t = 200)]
        n_out: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// The data of a bundled experiment.
    Preset {
        name: String,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        basis_out: Option<PathBuf>,
    },
}

/// Hyperparameters; flags override the preset, which overrides the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// fig3, table1-sigma0.1, table1-sigma1, table1-sigma10, rsr or oracle.
    #[arg(long)]
    pub preset: Option<String>,
    /// Outlier fraction for the rsr preset.
    #[arg(long)]
    pub r: Option<f64>,
    /// l0, l1 or plain.
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Autoencoder step size; defaults to min(N * 1e-6, 1e-2).
    #[arg(long)]
    pub lr: Option<f64>,
    /// Gate step size; defaults to --lr.
    #[arg(long)]
    pub gate_lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Comma-separated hidden widths, or `none`.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub latent: Option<usize>,
    /// linear, tanh, relu or leaky_relu[:slope].
    #[arg(long)]
    pub activation: Option<String>,
    /// Gate noise standard deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Divide each reconstruction error by the sample's squared norm.
    #[arg(long)]
    pub normalize_recon: bool,
    /// Gates with clamp(mu) below this count as closed.
    #[arg(long)]
    pub thresh: Option<f64>,
}

impl ConfigArgs {
    pub fn preset(&self) -> Result<Option<Preset>> {
        match &self.preset {
            Some(name) => Ok(Some(Preset::parse(name, self.r)?)),
            None if self.r.is_some() => bail!("--r needs --preset rsr"),
            None => Ok(None),
        }
    }

    pub fn config(&self, seed: u64) -> Result<PraeConfig> {
        let variant = self.variant.unwrap_or(Variant::L1);
        let mut c = match self.preset()? {
            Some(p) => p.config(variant, seed),
            None => PraeConfig {
                variant,
                seed,
                ..PraeConfig::default()
            },
        };
        if let Some(v) = self.lambda {
            c.lambda = v;
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if self.lr.is_some() {
            c.learning_rate = self.lr;
        }
        if self.gate_lr.is_some() {
            c.gate_learning_rate = self.gate_lr;
        }
        if self.batch_size.is_some() {
            c.batch_size = self.batch_size;
        }
        if let Some(a) = &self.arch {
            c.hidden_widths = parse_arch(a)?;
        }
        if let Some(v) = self.latent {
            c.latent_dim = v;
        }
        if let Some(a) = &self.activation {
            c.hidden_activation = parse_activation(a)?;
        }
        if let Some(v) = self.sigma {
            c.sigma = v;
        }
        if self.normalize_recon {
            c.normalize_recon = true;
        }
        if let Some(v) = self.thresh {
            c.thresh = v;
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training CSV. Generated from the preset when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Column holding 0/1 outlier labels; `label` is picked up automatically.
    #[arg(long)]
    pub label_column: Option<String>,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Standardise columns before training; the parameters are stored in the model.
    #[arg(long)]
    pub standardize: bool,
    #[arg(long)]
    pub model_out: PathBuf,
    /// JSON with the seed, config hash, in-sample metrics and training log.
    #[arg(long)]
    pub record_out: Option<PathBuf>,
    /// Principal subspace (latent_dim columns) of the rows left open.
    #[arg(long)]
    pub basis_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreMode {
    /// 1 - clamp(mu) for the training rows.
    In,
    /// Reconstruction error, for any rows.
    Out,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long, value_enum, default_value_t = ScoreMode::Out)]
    pub mode: ScoreMode,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// CSV with `row_index,score`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Data CSV with a label column.
    #[arg(long, conflicts_with = "labels")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub label_column: Option<String>,
    /// CSV with a single 0/1 column.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, requires = "basis_est")]
    pub basis_true: Option<PathBuf>,
    #[arg(long, requires = "basis_true")]
    pub basis_est: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Data CSV. With `--preset fig3` and no data, every repeat draws fresh data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub label_column: Option<String>,
    /// Comma-separated lambda grid.
    #[arg(long)]
    pub lambdas: Option<String>,
    /// Fraction of the data held out for validation MSE.
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = ORACLE_SPEC.n_in + ORACLE_SPEC.n_out)]
    pub n: usize,
    #[arg(long, default_value_t = ORACLE_SPEC.n_out)]
    pub outliers: usize,
    #[arg(long, default_value_t = ORACLE_SPEC.dim)]
    pub dim: usize,
    #[arg(long, default_value_t = ORACLE_SPEC.intrinsic)]
    pub intrinsic: usize,
    #[arg(long, default_value_t = ORACLE_LAMBDA)]
    pub lambda: f64,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = ORACLE_SPEC.spread)]
    pub spread: f64,
    #[arg(long, default_value_t = ORACLE_SPEC.separation)]
    pub separation: f64,
    /// Fit affine rather than linear subspaces in the oracle.
    #[arg(long)]
    pub center: bool,
    #[arg(long, default_value_t = Variant::L1)]
    pub variant: Variant,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// JSON array of per-repeat reports.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Synth(a) => synth(a, seed),
        Command::Train(a) => train(a, seed),
        Command::Score(a) => score(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a, seed),
        Command::Oracle(a) => oracle(a, seed),
    }
}

pub fn parse_arch(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    if s.is_empty() || s == "none" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .with_context(|| format!("bad layer width {w:?}"))
        })
        .collect()
}

pub fn parse_activation(s: &str) -> Result<Activation> {
    let (name, slope) = match s.split_once(':') {
        Some((n, v)) => (n, Some(v.parse::<f64>().with_context(|| format!("bad slope {v:?}"))?)),
        None => (s, None),
    };
    Ok(match (name.to_ascii_lowercase().replace('-', "_").as_str(), slope) {
        ("linear", None) => Activation::Linear,
        ("tanh", None) => Activation::Tanh,
        ("relu", None) => Activation::Relu,
        ("leaky_relu", None) => Activation::DEFAULT_LEAKY,
        ("leaky_relu", Some(slope)) => Activation::LeakyRelu { slope },
        _ => bail!("unknown activation {s:?}"),
    })
}

fn parse_lambdas(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad lambda {v:?}")))
        .collect()
}

/// Loads a CSV, using `label_column` or else a column named `label` if present.
pub fn load_data(path: &Path, label_column: Option<&str>) -> Result<LabeledDataset<f64>> {
    let loaded = match label_column {
        Some(col) => data::load_csv(path, Some(col)),
        None => match data::load_csv(path, Some("label")) {
            Err(Error::MissingLabelColumn(_)) => data::load_csv(path, None),
            other => other,
        },
    };
    let d = loaded.with_context(|| format!("loading {}", path.display()))?;
    if d.is_empty() {
        bail!("{} has no data rows", path.display());
    }
    Ok(d)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn synth(a: SynthArgs, seed: u64) -> Result<()> {
    let (d, out, basis_out) = match a.kind {
        SynthKind::Linear {
            n,
            dim,
            intrinsic,
            r,
            noise_var,
            out,
            basis_out,
        } => (data::gen_linear::<f64>(n, dim, intrinsic, r, noise_var, seed)?, out, basis_out),
        SynthKind::Swiss {
            n_in,
            n_out,
            sigma2,
            out,
        } => (data::gen_swiss_roll::<f64>(n_in, n_out, sigma2, seed)?, out, None),
        SynthKind::Preset {
            name,
            r,
            out,
            basis_out,
        } => (Preset::parse(&name, r)?.generate(seed)?, out, basis_out),
    };
    data::save_csv(&d, &out)?;
    if let Some(path) = basis_out {
        let basis = d
            .true_basis
            .as_ref()
            .ok_or_else(|| anyhow!("this generator has no linear ground-truth basis"))?;
        data::save_matrix_csv(basis.view(), &path)?;
    }
    println!(
        "wrote {} rows x {} columns ({} outliers) to {}",
        d.len(),
        d.dim(),
        d.outlier_count().unwrap_or(0),
        out.display()
    );
    Ok(())
}

fn train(a: TrainArgs, seed: u64) -> Result<()> {
    let config = a.config.config(seed)?;
    let raw = match (&a.data, a.config.preset()?) {
        (Some(path), _) => load_data(path, a.label_column.as_deref())?,
        (None, Some(p)) => p.generate(seed)?,
        (None, None) => bail!("train needs --data or --preset"),
    };
    let (d, standardize) = if a.standardize {
        let (d, p) = data::standardize(&raw);
        (d, Some(p))
    } else {
        (raw, None)
    };

    let start = Instant::now();
    let model = train_prae(&d, &config)?;
    let wall = start.elapsed().as_secs_f64();

    ModelFile::from_model(&model, standardize).save(&a.model_out)?;
    let open = model.selection(config.thresh).iter().filter(|&&s| s).count();
    match model.log.last() {
        Some(last) => println!(
            "final loss {} open gates {open}/{} after {} epochs",
            last.loss,
            d.len(),
            last.epoch
        ),
        None => println!("no epochs run; open gates {open}/{}", d.len()),
    }

    if let Some(path) = &a.basis_out {
        let basis = selected_subspace(&model, &d, config.latent_dim)?
            .ok_or_else(|| anyhow!("fewer than {} rows left open", config.latent_dim))?;
        data::save_matrix_csv(basis.view(), path)?;
    }
    if let Some(path) = &a.record_out {
        let resolved = config.resolved(d.len());
        let metrics = match &d.labels {
            Some(y) if y.iter().any(|&l| l) && y.iter().any(|&l| !l) => {
                Some(EvalReport::from_scores(&score_in_sample(&model).scores, y)?)
            }
            _ => None,
        };
        RunRecord {
            seed,
            config_hash: config_hash(&resolved)?,
            config: resolved,
            metrics,
            log: model.log.clone(),
            wall_clock_secs: wall,
        }
        .save(path)?;
    }
    Ok(())
}

fn apply_standardize(x: Array2<f64>, p: Option<&StandardizeParams>) -> Result<Array2<f64>> {
    match p {
        Some(p) => Ok(p.apply(x.view())?),
        None => Ok(x),
    }
}

/// `row_index,score` lines.
pub fn scores_csv(scores: &[f64]) -> String {
    let mut s = String::from("row_index,score\n");
    for (i, v) in scores.iter().enumerate() {
        let _ = writeln!(s, "{i},{v}");
    }
    s
}

fn score(a: ScoreArgs) -> Result<()> {
    let file = ModelFile::load(&a.model)?;
    let model = file.to_model()?;
    let d = load_data(&a.data, a.label_column.as_deref())?;
    let scores = match a.mode {
        ScoreMode::In => {
            if d.len() != model.gates.len() {
                bail!(
                    "in-sample scores exist only for the {} training rows, but {} has {} rows; \
                     use --mode out to score new data by reconstruction error",
                    model.gates.len(),
                    a.data.display(),
                    d.len()
                );
            }
            score_in_sample(&model).scores
        }
        ScoreMode::Out => {
            let x = apply_standardize(d.x, file.standardize.as_ref())?;
            score_out_of_sample(&model, x.view())?.scores
        }
    };
    write_text(&a.out, &scores_csv(&scores))?;
    println!("wrote {} scores to {}", scores.len(), a.out.display());
    Ok(())
}

/// Reads the last column of a scores CSV.
pub fn load_scores(path: &Path) -> Result<Vec<f64>> {
    let d = data::load_csv::<f64>(path, None).with_context(|| format!("loading {}", path.display()))?;
    if d.dim() == 0 {
        bail!("{} has no score column", path.display());
    }
    Ok(d.x.column(d.dim() - 1).to_vec())
}

fn load_labels(path: &Path) -> Result<Vec<bool>> {
    let d = load_data(path, None)?;
    if let Some(y) = d.labels {
        return Ok(y);
    }
    if d.dim() != 1 {
        bail!("{} needs a `label` column or exactly one column", path.display());
    }
    d.x.column(0)
        .iter()
        .enumerate()
        .map(|(i, &v)| match v {
            v if v == 1.0 => Ok(true),
            v if v == 0.0 => Ok(false),
            _ => Err(anyhow!("row {i}: label {v} is not 0/1")),
        })
        .collect()
}

fn eval(a: EvalArgs) -> Result<()> {
    let scores = load_scores(&a.scores)?;
    let labels = match (&a.data, &a.labels) {
        (Some(path), None) => load_data(path, Some(a.label_column.as_deref().unwrap_or("label")))?
            .labels
            .ok_or_else(|| anyhow!("{} has no labels", path.display()))?,
        (None, Some(path)) => load_labels(path)?,
        _ => bail!("eval needs --data or --labels"),
    };
    if labels.len() != scores.len() {
        bail!("{} scores but {} labels", scores.len(), labels.len());
    }
    let mut report = EvalReport::from_scores(&scores, &labels)?;
    if let (Some(t), Some(e)) = (&a.basis_true, &a.basis_est) {
        let bt = data::load_csv::<f64>(t, None)?.x;
        let be = data::load_csv::<f64>(e, None)?.x;
        report = report.with_angles(&subspace_angle(bt.view(), be.view())?);
    }
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    if let Some(path) = &a.out {
        write_text(path, &json)?;
    }
    println!("auc {} max_f1 {}", report.auc, report.max_f1);
    if let Some(l) = report.subspace_log_angle {
        println!("log10 max principal angle {l}");
    }
    Ok(())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let mut s = String::from("lambda,repeat,f1,max_f1,val_mse,me_estimate\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.lambda,
            r.repeat,
            opt(r.f1),
            opt(r.max_f1),
            r.val_mse,
            r.me_estimate
        );
    }
    s
}

fn sweep(a: SweepArgs, seed: u64) -> Result<()> {
    let preset = a.config.preset()?;
    let lambdas = match &a.lambdas {
        Some(s) => parse_lambdas(s)?,
        None => FIG3_LAMBDAS.to_vec(),
    };
    if lambdas.is_empty() || a.repeats == 0 {
        bail!("sweep needs at least one lambda and one repeat");
    }
    let config = a.config.config(seed)?;
    let rows = match (&a.data, preset) {
        (None, Some(Preset::Fig3)) => fig3_sweep(&config, &lambdas, a.repeats, seed)?,
        (None, Some(p)) => {
            let d = p.generate(seed)?;
            split_sweep(&d, &lambdas, &a, &config, seed)?
        }
        (Some(path), _) => {
            let d = load_data(path, a.label_column.as_deref())?;
            split_sweep(&d, &lambdas, &a, &config, seed)?
        }
        (None, None) => bail!("sweep needs --data or --preset"),
    };

    let me: Vec<f64> = rows.iter().map(|r| r.me_estimate).collect();
    println!("ME estimate {}", median(&me));
    println!("lambda  median_f1  median_val_mse");
    for &l in &lambdas {
        let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.lambda == l).collect();
        let f1: Vec<f64> = cell.iter().filter_map(|r| r.f1).collect();
        let mse: Vec<f64> = cell.iter().map(|r| r.val_mse).collect();
        let f1 = if f1.is_empty() { f64::NAN } else { median(&f1) };
        println!("{l:<7} {f1:<10.4} {:.6}", median(&mse));
    }
    write_text(&a.out, &sweep_csv(&rows))
}

fn split_sweep(
    d: &LabeledDataset<f64>,
    lambdas: &[f64],
    a: &SweepArgs,
    config: &PraeConfig,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let (train, val) = data::split(d, a.val_fraction, derive_seed(seed, 0))?;
    Ok(lambda_sweep(&train, val.x.view(), lambdas, a.repeats, config)?)
}

fn oracle(a: OracleArgs, seed: u64) -> Result<()> {
    if a.n > ORACLE_MAX_N {
        bail!(Error::TooLarge {
            n: a.n,
            limit: ORACLE_MAX_N
        });
    }
    if a.outliers > a.n {
        bail!("--outliers exceeds --n");
    }
    let spec = SeparatedSpec {
        n_in: a.n - a.outliers,
        n_out: a.outliers,
        dim: a.dim,
        intrinsic: a.intrinsic,
        spread: a.spread,
        separation: a.separation,
    };
    let mut config = Preset::Oracle.config(a.variant, seed);
    config.latent_dim = a.intrinsic;
    if let Some(e) = a.epochs {
        config.epochs = e;
    }

    let mut reports = Vec::with_capacity(a.repeats);
    for rep in 0..a.repeats {
        let s = derive_seed(seed, rep as u64);
        let d = data::gen_separated::<f64>(spec, s)?;
        let cfg = PraeConfig { seed: s, ..config.clone() };
        let report = equivalence_check(d.x.view(), a.lambda, a.intrinsic, a.center, &cfg)?;
        println!(
            "repeat {rep}: match {} prae_loss {} oracle_loss {} gap {}",
            report.matches, report.prae_loss, report.oracle_loss, report.gap
        );
        reports.push(report);
    }
    let hits = reports.iter().filter(|r| r.matches).count();
    println!(
        "match rate {hits}/{} = {}",
        reports.len(),
        hits as f64 / reports.len().max(1) as f64
    );
    if let Some(path) = &a.out {
        let mut json = serde_json::to_string_pretty(&reports)?;
        json.push('\n');
        write_text(path, &json)?;
    }
    Ok(())
}
