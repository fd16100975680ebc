use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

use super::{row_norm, EpochLog, PraeConfig, PraeModel, Variant};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::gates::{self, GateBank, GateSample};
use crate::nn::{init_dense_net, AdamConfig, AdamState, NetGrads, SparseAdamState};
use crate::rng::{self, Rng};
use crate::Scalar;

/// Loss and gradients of one mini-batch under a fixed gate realisation.
#[derive(Clone, Debug)]
pub struct StepGradients<T> {
    /// `sum_k z_k r_k - lambda * Reg(batch)`
    pub loss: T,
    pub net: NetGrads<T>,
    /// One entry per batch row.
    pub mu: Vec<T>,
    /// Reconstruction term `r_k` per batch row.
    pub recon: Vec<T>,
    pub gates: GateSample<T>,
}

/// Evaluates the sampled objective on `rows` with gate noise `noise`
/// (one value per row; ignored by the plain variant, whose gates are all 1).
pub fn batch_gradients<T: Scalar>(
    model: &PraeModel<T>,
    x: ArrayView2<T>,
    rows: &[usize],
    noise: &[T],
) -> Result<StepGradients<T>> {
    let cfg = &model.config;
    let sample = match cfg.variant {
        Variant::Plain => GateSample {
            z: vec![T::one(); rows.len()],
            pass_through: vec![false; rows.len()],
            noise: vec![T::zero(); rows.len()],
        },
        _ => {
            if noise.len() != rows.len() {
                return Err(Error::shape(format!(
                    "{} noise values for {} rows",
                    noise.len(),
                    rows.len()
                )));
            }
            let mu: Vec<T> = rows.iter().map(|&i| model.gates.mu[i]).collect();
            GateSample::from_noise(&mu, noise)
        }
    };

    let batch = x.select(Axis(0), rows);
    let (xhat, cache) = model.net.forward(batch.view())?;
    let two = T::of(2.0);
    let mut output_grad = Array2::zeros(batch.dim());
    let mut recon = Vec::with_capacity(rows.len());
    for (k, ((xr, hr), mut gr)) in batch
        .rows()
        .into_iter()
        .zip(xhat.rows())
        .zip(output_grad.rows_mut())
        .enumerate()
    {
        let norm = if cfg.normalize_recon {
            row_norm(xr.iter().copied())
        } else {
            T::one()
        };
        let mut r = T::zero();
        for ((&a, &b), g) in xr.iter().zip(hr).zip(gr.iter_mut()) {
            let d = b - a;
            r += d * d;
            *g = sample.z[k] * two * d / norm;
        }
        recon.push(r / norm);
    }
    let net = model.net.backward(&cache, output_grad.view())?;

    let data_term = recon
        .iter()
        .zip(&sample.z)
        .map(|(&r, &z)| z * r)
        .sum::<T>();
    let (loss, mu) = match cfg.variant.regularizer() {
        None => (data_term, vec![T::zero(); rows.len()]),
        Some(reg) => {
            let (value, reg_grad) = reg.evaluate(&model.gates, T::of(cfg.lambda), Some(rows));
            let mu = recon
                .iter()
                .zip(&sample.pass_through)
                .zip(&reg_grad)
                .map(|((&r, &pt), &g)| if pt { r - g } else { -g })
                .collect();
            (data_term - value, mu)
        }
    };
    Ok(StepGradients {
        loss,
        net,
        mu,
        recon,
        gates: sample,
    })
}

/// Owns a model under training together with its optimiser state and
/// random streams.
pub struct Trainer<'a, T: Scalar> {
    x: ArrayView2<'a, T>,
    model: PraeModel<T>,
    net_opt: AdamState<T>,
    gate_opt: SparseAdamState<T>,
    shuffle_rng: Rng,
    noise_rng: Rng,
    epoch: usize,
}

impl<'a, T: Scalar> Trainer<'a, T> {
    pub fn new(x: ArrayView2<'a, T>, config: &PraeConfig) -> Result<Self> {
        let (n, dim) = x.dim();
        config.validate(n, dim)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("training data contains non-finite values"));
        }
        let config = config.resolved(n);
        let net = init_dense_net(&config.layer_specs(dim), config.latent_dim, config.seed)?;
        let mu_init = match config.variant {
            Variant::Plain => gates::MU_MAX,
            _ => config.mu_init,
        };
        let gates = GateBank::new(n, config.sigma, mu_init)?;
        let net_opt = AdamState::for_net(
            AdamConfig::new(config.learning_rate.expect("resolved")),
            &net,
        );
        let gate_opt =
            SparseAdamState::new(AdamConfig::new(config.gate_learning_rate.expect("resolved")), n);
        Ok(Trainer {
            x,
            shuffle_rng: rng::stream(config.seed, rng::SHUFFLE),
            noise_rng: rng::stream(config.seed, rng::GATE_NOISE),
            model: PraeModel {
                net,
                gates,
                config,
                log: Vec::new(),
            },
            net_opt,
            gate_opt,
            epoch: 0,
        })
    }

    pub fn model(&self) -> &PraeModel<T> {
        &self.model
    }

    pub fn into_model(self) -> PraeModel<T> {
        self.model
    }

    /// One Monte-Carlo gradient step on `rows`; returns the batch loss.
    pub fn prae_step(&mut self, rows: &[usize]) -> Result<T> {
        let n = self.model.gates.len();
        if let Some(&bad) = rows.iter().find(|&&i| i >= n) {
            return Err(Error::shape(format!("row {bad} out of range for {n} samples")));
        }
        let noise: Vec<T> = match self.model.config.variant {
            Variant::Plain => Vec::new(),
            _ => {
                let sigma = self.model.gates.sigma.f64();
                rows.iter()
                    .map(|_| rng::normal(&mut self.noise_rng, sigma))
                    .collect()
            }
        };
        let step = batch_gradients(&self.model, self.x, rows, &noise)?;
        if !step.loss.is_finite() {
            let k = step
                .recon
                .iter()
                .position(|r| !r.is_finite())
                .unwrap_or(0);
            return Err(Error::NonFinite {
                epoch: self.epoch + 1,
                sample: rows[k],
            });
        }
        self.net_opt.step_net(&mut self.model.net, &step.net)?;
        if self.model.config.variant != Variant::Plain {
            self.gate_opt
                .step_rows(&mut self.model.gates.mu, rows, &step.mu)?;
            self.model.gates.clip_rows(rows);
        }
        Ok(step.loss)
    }

    /// One pass over shuffled mini-batches.
    pub fn run_epoch(&mut self) -> Result<EpochLog> {
        let n = self.model.gates.len();
        let batch = self.model.config.batch_size.expect("resolved");
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.shuffle_rng);
        let mut loss = 0.0;
        for rows in order.chunks(batch) {
            loss += self.prae_step(rows)?.f64();
        }
        self.epoch += 1;
        let open = self.model.gates.deterministic();
        let entry = EpochLog {
            epoch: self.epoch,
            loss,
            mean_gate: open.iter().map(|g| g.f64()).sum::<f64>() / n as f64,
            open_count: open
                .iter()
                .filter(|g| g.f64() >= self.model.config.thresh)
                .count(),
        };
        self.model.log.push(entry);
        Ok(entry)
    }

    /// Runs the remaining configured epochs.
    pub fn run(mut self) -> Result<PraeModel<T>> {
        while self.epoch < self.model.config.epochs {
            self.run_epoch()?;
        }
        Ok(self.model)
    }
}

/// Trains gates and autoencoder jointly on `data.x`.
pub fn train_prae<T: Scalar>(data: &LabeledDataset<T>, config: &PraeConfig) -> Result<PraeModel<T>> {
    Trainer::new(data.x.view(), config)?.run()
}

/// Same trainer with every gate fixed open and no penalty.
pub fn train_plain_ae<T: Scalar>(
    data: &LabeledDataset<T>,
    config: &PraeConfig,
) -> Result<PraeModel<T>> {
    let config = PraeConfig {
        variant: Variant::Plain,
        ..config.clone()
    };
    train_prae(data, &config)
}
