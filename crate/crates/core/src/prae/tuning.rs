use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{classify, score_in_sample, train_prae, PraeConfig};
use crate::data::{mean_energy, LabeledDataset};
use crate::error::{Error, Result};
use crate::metrics;
use crate::rng;
use crate::Scalar;

/// Mean energy `(1/N) sum ||x_i||^2`; the gates start rejecting outliers once
/// lambda drops below roughly this value.
pub fn estimate_lambda_me<T: Scalar>(x: ArrayView2<T>) -> Result<f64> {
    if x.nrows() == 0 {
        return Err(Error::config("mean energy of an empty dataset"));
    }
    Ok(mean_energy(x))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub repeat: usize,
    /// F1 of the `clamp(mu) < thresh` outlier call, when labels exist.
    pub f1: Option<f64>,
    /// Best F1 over all thresholds on the in-sample scores.
    pub max_f1: Option<f64>,
    /// Mean squared reconstruction error on the validation rows.
    pub val_mse: f64,
    pub me_estimate: f64,
}

/// Trains one model per `(lambda, repeat)` cell, each on its own seed
/// derived from `config.seed`. Rows come out ordered by lambda index, then repeat.
pub fn lambda_sweep<T: Scalar>(
    train: &LabeledDataset<T>,
    val: ArrayView2<T>,
    lambdas: &[f64],
    repeats: usize,
    config: &PraeConfig,
) -> Result<Vec<SweepRow>> {
    if lambdas.is_empty() || repeats == 0 {
        return Err(Error::config("sweep needs at least one lambda and one repeat"));
    }
    if val.ncols() != train.dim() {
        return Err(Error::shape("validation and training widths differ"));
    }
    let me = estimate_lambda_me(train.x.view())?;
    let mut rows = Vec::with_capacity(lambdas.len() * repeats);
    for (li, &lambda) in lambdas.iter().enumerate() {
        for repeat in 0..repeats {
            let cell = (li * repeats + repeat) as u64;
            let cfg = PraeConfig {
                lambda,
                seed: rng::derive_seed(config.seed, cell),
                ..config.clone()
            };
            let model = train_prae(train, &cfg)?;
            let (f1, max_f1) = match &train.labels {
                Some(labels) => {
                    let scores = score_in_sample(&model);
                    let called = classify(&scores, cfg.thresh);
                    let f1 = metrics::classification_f1(&called, labels)?.f1;
                    let best = if labels.iter().any(|&l| l) {
                        Some(metrics::max_f1(&scores.scores, labels)?.f1)
                    } else {
                        None
                    };
                    (Some(f1), best)
                }
                None => (None, None),
            };
            let xhat = model.net.reconstruct(val)?;
            rows.push(SweepRow {
                lambda,
                repeat,
                f1,
                max_f1,
                val_mse: metrics::mse(val, xhat.view())?,
                me_estimate: me,
            });
        }
    }
    Ok(rows)
}
