//! JSON persistence for trained models.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ndarray::{Array1, Array2};
use prae::data::StandardizeParams;
use prae::gates::GateBank;
use prae::nn::{Activation, DenseNet, Layer};
use prae::prae::{EpochLog, PraeConfig, PraeModel};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerFile {
    pub input_width: usize,
    pub output_width: usize,
    pub activation: Activation,
    /// Row-major `output_width x input_width`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetFile {
    pub latent_dim: usize,
    pub encoder: Vec<LayerFile>,
    pub decoder: Vec<LayerFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatesFile {
    pub sigma: f64,
    pub mu: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub config: PraeConfig,
    pub net: NetFile,
    pub gates: GatesFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardize: Option<StandardizeParams>,
    #[serde(default)]
    pub log: Vec<EpochLog>,
}

fn layer_file(l: &Layer<f64>) -> LayerFile {
    LayerFile {
        input_width: l.input_width(),
        output_width: l.output_width(),
        activation: l.activation,
        weights: l.weights.iter().copied().collect(),
        bias: l.bias.to_vec(),
    }
}

fn layer(f: &LayerFile) -> Result<Layer<f64>> {
    let w = Array2::from_shape_vec((f.output_width, f.input_width), f.weights.clone())
        .context("weight array does not match the declared widths")?;
    Ok(Layer::new(w, Array1::from(f.bias.clone()), f.activation)?)
}

impl ModelFile {
    pub fn from_model(model: &PraeModel<f64>, standardize: Option<StandardizeParams>) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            config: model.config.clone(),
            net: NetFile {
                latent_dim: model.net.latent_dim,
                encoder: model.net.encoder.iter().map(layer_file).collect(),
                decoder: model.net.decoder.iter().map(layer_file).collect(),
            },
            gates: GatesFile {
                sigma: model.gates.sigma,
                mu: model.gates.mu.clone(),
            },
            standardize,
            log: model.log.clone(),
        }
    }

    pub fn to_model(&self) -> Result<PraeModel<f64>> {
        if self.format_version != FORMAT_VERSION {
            bail!(
                "model format version {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            );
        }
        let encoder = self.net.encoder.iter().map(layer).collect::<Result<Vec<_>>>()?;
        let decoder = self.net.decoder.iter().map(layer).collect::<Result<Vec<_>>>()?;
        let net = DenseNet::from_layers(encoder, decoder)?;
        if net.latent_dim != self.net.latent_dim {
            bail!(
                "encoder ends at width {} but latent_dim says {}",
                net.latent_dim,
                self.net.latent_dim
            );
        }
        if !(self.gates.sigma > 0.0) {
            bail!("gate sigma must be positive");
        }
        Ok(PraeModel {
            net,
            gates: GateBank {
                mu: self.gates.mu.clone(),
                sigma: self.gates.sigma,
            },
            config: self.config.clone(),
            log: self.log.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing model {}", path.display()))
    }
}
