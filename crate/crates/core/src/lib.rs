//! Probabilistic robust autoencoder.
//!
//! Each training sample gets a stochastic gate `z_i = clamp(mu_i + eps_i, 0, 1)`
//! whose location `mu_i` is learned together with a dense autoencoder. Samples
//! that are expensive to reconstruct have their gates driven shut, so `mu`
//! doubles as an in-sample anomaly score.
//!
//! ```
//! use prae::{data, prae::{train_prae, score_in_sample, PraeConfig}};
//!
//! let data = data::gen_linear::<f64>(60, 6, 1, 0.2, 0.0, 3).unwrap();
//! let config = PraeConfig { epochs: 5, learning_rate: Some(1e-2), ..PraeConfig::linear(1) };
//! let model = train_prae(&data, &config).unwrap();
//! assert_eq!(score_in_sample(&model).scores.len(), 60);
//! ```

pub mod data;
pub mod error;
pub mod gates;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod prae;
pub mod rng;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type DenseNet64 = nn::DenseNet<f64>;
pub type GateBank64 = gates::GateBank<f64>;
pub type PraeModel64 = prae::PraeModel<f64>;
pub type LabeledDataset64 = data::LabeledDataset<f64>;

pub type DenseNet32 = nn::DenseNet<f32>;
pub type GateBank32 = gates::GateBank<f32>;
pub type PraeModel32 = prae::PraeModel<f32>;
pub type LabeledDataset32 = data::LabeledDataset<f32>;
