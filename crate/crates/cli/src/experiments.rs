//! Single trials of the bundled experiments, shared by the CLI and the acceptance suite.

use anyhow::{anyhow, Context, Result};
use prae::data::{self, LabeledDataset};
use prae::linalg::principal_subspace;
use prae::metrics::{classification_f1, max_f1, mse, roc_auc, subspace_angle};
use prae::prae::{
    classify, equivalence_check, estimate_lambda_me, score_in_sample, score_out_of_sample,
    train_prae, EquivalenceReport, PraeConfig, PraeModel, SweepRow, Variant,
};
use prae::rng::derive_seed;

use crate::presets::{Preset, FIG3_SPEC, RSR_INTRINSIC};

/// Largest principal angle a recovered subspace may have to count as exact.
pub const RSR_ANGLE_TOL: f64 = 1e-2;

/// Median of a non-empty sample; the mean of the two middle values for even length.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn labels(data: &LabeledDataset<f64>) -> Result<&[bool]> {
    data.labels
        .as_deref()
        .ok_or_else(|| anyhow!("generated data has no labels"))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwissOutcome {
    /// AUC of the in-sample gate scores.
    pub auc: f64,
    /// AUC of reconstruction-error scores on the same rows.
    pub recon_auc: f64,
    pub open_count: usize,
}

pub fn swiss_trial(variant: Variant, sigma2: f64, seed: u64) -> Result<SwissOutcome> {
    let preset = Preset::Table1 { sigma2 };
    let data = preset.generate(seed)?;
    let model = train_prae(&data, &preset.config(variant, seed))?;
    let y = labels(&data)?;
    Ok(SwissOutcome {
        auc: roc_auc(&score_in_sample(&model).scores, y)?,
        recon_auc: roc_auc(&score_out_of_sample(&model, data.x.view())?.scores, y)?,
        open_count: model.log.last().map_or(data.len(), |l| l.open_count),
    })
}

/// One model of the phase-transition experiment, trained on fresh data.
/// `config` is usually `Preset::Fig3.config(..)`; its seed is replaced by `seed`.
pub fn fig3_cell(config: &PraeConfig, lambda: f64, seed: u64) -> Result<SweepRow> {
    let preset = Preset::Fig3;
    let train = preset.generate(seed)?;
    let basis = train
        .true_basis
        .as_ref()
        .ok_or_else(|| anyhow!("linear generator returned no basis"))?;
    let val = data::gen_linear_on_basis::<f64>(FIG3_SPEC, basis.view(), derive_seed(seed, 1))?;
    let config = PraeConfig {
        lambda,
        seed,
        ..config.clone()
    };
    let model = train_prae(&train, &config)?;
    let y = labels(&train)?;
    let scores = score_in_sample(&model);
    let recon = model.net.reconstruct(val.x.view())?;
    Ok(SweepRow {
        lambda,
        repeat: 0,
        f1: Some(classification_f1(&classify(&scores, config.thresh), y)?.f1),
        max_f1: Some(max_f1(&scores.scores, y)?.f1),
        val_mse: mse(val.x.view(), recon.view())?,
        me_estimate: estimate_lambda_me(train.x.view())?,
    })
}

/// Phase-transition table with a fresh training and validation set per repeat.
pub fn fig3_sweep(
    config: &PraeConfig,
    lambdas: &[f64],
    repeats: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(lambdas.len() * repeats);
    for &lambda in lambdas {
        for repeat in 0..repeats {
            let cell_seed = derive_seed(seed, repeat as u64);
            let row = fig3_cell(config, lambda, cell_seed)
                .with_context(|| format!("lambda {lambda}, repeat {repeat}"))?;
            rows.push(SweepRow { repeat, ..row });
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RsrOutcome {
    pub selected: usize,
    /// Selected rows that are actually outliers.
    pub impure: usize,
    /// Largest principal angle between the selected rows' span and the truth.
    pub max_angle: f64,
}

impl RsrOutcome {
    pub fn exact(&self) -> bool {
        self.impure == 0 && self.max_angle < RSR_ANGLE_TOL
    }
}

/// Principal subspace of the rows whose gates stayed open.
pub fn selected_subspace(
    model: &PraeModel<f64>,
    data: &LabeledDataset<f64>,
    k: usize,
) -> Result<Option<ndarray::Array2<f64>>> {
    let idx: Vec<usize> = model
        .selection(model.config.thresh)
        .iter()
        .enumerate()
        .filter_map(|(i, &s)| s.then_some(i))
        .collect();
    if idx.len() < k {
        return Ok(None);
    }
    Ok(Some(principal_subspace(data.select(&idx).x.view(), k)?))
}

pub fn rsr_trial(variant: Variant, r: f64, seed: u64) -> Result<RsrOutcome> {
    let preset = Preset::Rsr { r };
    let data = preset.generate(seed)?;
    let model = train_prae(&data, &preset.config(variant, seed))?;
    let sel = model.selection(model.config.thresh);
    let y = labels(&data)?;
    let truth = data
        .true_basis
        .as_ref()
        .ok_or_else(|| anyhow!("linear generator returned no basis"))?;
    let max_angle = match selected_subspace(&model, &data, RSR_INTRINSIC)? {
        Some(b) => subspace_angle(b.view(), truth.view())?.max_angle,
        None => f64::INFINITY,
    };
    Ok(RsrOutcome {
        selected: sel.iter().filter(|&&s| s).count(),
        impure: sel.iter().zip(y).filter(|(s, l)| **s && **l).count(),
        max_angle,
    })
}

/// Trains the oracle preset at `lambda` and compares against exhaustive search.
pub fn oracle_trial(variant: Variant, lambda: f64, seed: u64) -> Result<EquivalenceReport> {
    let preset = Preset::Oracle;
    let data = preset.generate(seed)?;
    let config = preset.config(variant, seed);
    Ok(equivalence_check(
        data.x.view(),
        lambda,
        config.latent_dim,
        false,
        &config,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&[7.0]), 7.0);
    }

    #[test]
    fn oracle_extremes_match() {
        for lambda in [0.0, 1e3] {
            let rep = oracle_trial(Variant::L1, lambda, 3).unwrap();
            assert!(rep.matches, "lambda {lambda}: {rep:?}");
        }
    }
}
