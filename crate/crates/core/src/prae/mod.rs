//! The PRAE model: an autoencoder trained jointly with one stochastic gate per
//! training sample, so that samples the network cannot reconstruct cheaply are
//! switched out of the objective.

mod oracle;
mod train;
mod tuning;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{self, GateBank, Regularizer};
use crate::nn::{autoencoder_specs, Activation, DenseNet, LayerSpec};
use crate::Scalar;

pub use oracle::{
    brute_force_rae_linear, equivalence_check, rae_loss, EquivalenceReport, RaeOracleResult,
    ORACLE_MAX_N,
};
pub use train::{batch_gradients, train_plain_ae, train_prae, StepGradients, Trainer};
pub use tuning::{estimate_lambda_me, lambda_sweep, SweepRow};

/// Default outlier threshold on `clamp(mu, 0, 1)`.
pub const DEFAULT_THRESH: f64 = 0.1;
pub const DEFAULT_BATCH_CAP: usize = 256;
pub const LR_PER_SAMPLE: f64 = 1e-6;
pub const LR_CAP: f64 = 1e-2;
/// Guards the per-sample normalisation of all-zero rows.
pub const NORM_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Penalises the expected number of open gates.
    L0,
    /// Penalises the expected sum of gate values.
    L1,
    /// Ordinary autoencoder: gates fixed open, no penalty.
    Plain,
}

impl Variant {
    pub fn regularizer(self) -> Option<Regularizer> {
        match self {
            Variant::L0 => Some(Regularizer::L0),
            Variant::L1 => Some(Regularizer::L1),
            Variant::Plain => None,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::L0 => "l0",
            Variant::L1 => "l1",
            Variant::Plain => "plain",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l0" => Ok(Variant::L0),
            "l1" => Ok(Variant::L1),
            "plain" => Ok(Variant::Plain),
            other => Err(Error::config(format!("unknown variant {other:?}"))),
        }
    }
}

/// Training hyperparameters. `None` fields are resolved from the data size
/// when training starts and stored resolved in the trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PraeConfig {
    pub variant: Variant,
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    /// Step size for the gate locations; defaults to `learning_rate`.
    pub gate_learning_rate: Option<f64>,
    pub sigma: f64,
    pub mu_init: f64,
    pub hidden_widths: Vec<usize>,
    pub latent_dim: usize,
    pub hidden_activation: Activation,
    pub normalize_recon: bool,
    /// Threshold used for the open-gate count in the training log.
    pub thresh: f64,
    pub seed: u64,
}

impl Default for PraeConfig {
    fn default() -> Self {
        PraeConfig {
            variant: Variant::L1,
            lambda: 1.0,
            epochs: 100,
            batch_size: None,
            learning_rate: None,
            gate_learning_rate: None,
            sigma: gates::DEFAULT_SIGMA,
            mu_init: gates::DEFAULT_MU_INIT,
            hidden_widths: vec![10; 5],
            latent_dim: 1,
            hidden_activation: Activation::DEFAULT_LEAKY,
            normalize_recon: false,
            thresh: DEFAULT_THRESH,
            seed: 0,
        }
    }
}

impl PraeConfig {
    /// Linear autoencoder `D -> k -> D` with no hidden layers.
    pub fn linear(latent_dim: usize) -> Self {
        PraeConfig {
            hidden_widths: Vec::new(),
            latent_dim,
            hidden_activation: Activation::Linear,
            ..PraeConfig::default()
        }
    }

    pub fn default_learning_rate(n: usize) -> f64 {
        (n as f64 * LR_PER_SAMPLE).min(LR_CAP)
    }

    pub fn validate(&self, n: usize, dim: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::config(msg));
        if n < 2 {
            return bad(format!("need at least 2 training rows, got {n}"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !self.mu_init.is_finite() {
            return bad("mu_init must be finite".into());
        }
        for (name, lr) in [
            ("learning rate", self.learning_rate),
            ("gate learning rate", self.gate_learning_rate),
        ] {
            if let Some(lr) = lr {
                if !(lr > 0.0 && lr.is_finite()) {
                    return bad(format!("{name} must be positive, got {lr}"));
                }
            }
        }
        if self.batch_size == Some(0) {
            return bad("batch size must be positive".into());
        }
        if self.latent_dim == 0 || self.latent_dim >= dim {
            return bad(format!(
                "latent dimension must lie in [1, {dim}), got {}",
                self.latent_dim
            ));
        }
        if self.hidden_widths.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.thresh) {
            return bad(format!("thresh must lie in [0, 1], got {}", self.thresh));
        }
        Ok(())
    }

    /// Copy with every optional field filled in for `n` training rows.
    pub fn resolved(&self, n: usize) -> Self {
        let lr = self
            .learning_rate
            .unwrap_or_else(|| Self::default_learning_rate(n));
        PraeConfig {
            batch_size: Some(self.batch_size.unwrap_or(n.min(DEFAULT_BATCH_CAP)).min(n)),
            learning_rate: Some(lr),
            gate_learning_rate: Some(self.gate_learning_rate.unwrap_or(lr)),
            ..self.clone()
        }
    }

    pub fn layer_specs(&self, dim: usize) -> Vec<LayerSpec> {
        autoencoder_specs(dim, &self.hidden_widths, self.latent_dim, self.hidden_activation)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub mean_gate: f64,
    pub open_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PraeModel<T> {
    pub net: DenseNet<T>,
    pub gates: GateBank<T>,
    pub config: PraeConfig,
    pub log: Vec<EpochLog>,
}

impl<T: Scalar> PraeModel<T> {
    /// Rows kept in the objective: `clamp(mu, 0, 1) >= thresh`.
    pub fn selection(&self, thresh: f64) -> Vec<bool> {
        classify(&score_in_sample(self), thresh)
            .into_iter()
            .map(|out| !out)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSource {
    InSampleGate,
    OutOfSampleReconError,
}

/// Higher means more anomalous.
#[derive(Clone, Debug, PartialEq)]
pub struct AnomalyScores<T> {
    pub scores: Vec<T>,
    pub source: ScoreSource,
}

/// `1 - clamp(mu, 0, 1)` for each training row.
pub fn score_in_sample<T: Scalar>(model: &PraeModel<T>) -> AnomalyScores<T> {
    AnomalyScores {
        scores: model
            .gates
            .mu
            .iter()
            .map(|&m| T::one() - gates::deterministic_gate(m))
            .collect(),
        source: ScoreSource::InSampleGate,
    }
}

/// Per-row squared error, `||x||^2`-normalised when the model trained that way.
pub fn reconstruction_errors<T: Scalar>(
    net: &DenseNet<T>,
    x: ArrayView2<T>,
    normalize: bool,
) -> Result<Vec<T>> {
    let xhat = net.reconstruct(x)?;
    Ok(x.rows()
        .into_iter()
        .zip(xhat.rows())
        .map(|(a, b)| {
            let err = a.iter().zip(b).map(|(&u, &v)| (u - v) * (u - v)).sum::<T>();
            if normalize {
                err / row_norm(a.iter().copied())
            } else {
                err
            }
        })
        .collect())
}

pub(crate) fn row_norm<T: Scalar>(row: impl Iterator<Item = T>) -> T {
    row.map(|v| v * v).sum::<T>().max(T::of(NORM_FLOOR))
}

pub fn score_out_of_sample<T: Scalar>(
    model: &PraeModel<T>,
    x: ArrayView2<T>,
) -> Result<AnomalyScores<T>> {
    Ok(AnomalyScores {
        scores: reconstruction_errors(&model.net, x, model.config.normalize_recon)?,
        source: ScoreSource::OutOfSampleReconError,
    })
}

/// Flags rows whose gate sits below `thresh`, i.e. `score > 1 - thresh`.
pub fn classify<T: Scalar>(scores: &AnomalyScores<T>, thresh: f64) -> Vec<bool> {
    let cut = 1.0 - thresh;
    scores.scores.iter().map(|s| s.f64() > cut).collect()
}
