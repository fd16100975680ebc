//! Datasets: synthetic generators, CSV ingestion, scaling and splitting.

mod csv_io;
mod synth;

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::Scalar;

pub use csv_io::{load_csv, save_csv, save_matrix_csv};
pub use synth::{
    gen_linear, gen_linear_counts, gen_linear_on_basis, gen_separated, gen_swiss_roll, swiss_roll_point, LinearSpec,
    SeparatedSpec,
};

/// Samples as rows, with optional ground truth used only for evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset<T> {
    pub x: Array2<T>,
    /// `true` marks an anomaly.
    pub labels: Option<Vec<bool>>,
    /// Orthonormal `D x d` basis of the inlier subspace, for linear generators.
    pub true_basis: Option<Array2<T>>,
    /// Generator parameters.
    pub meta: BTreeMap<String, String>,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(x: Array2<T>) -> Self {
        LabeledDataset {
            x,
            labels: None,
            true_basis: None,
            meta: BTreeMap::new(),
        }
    }

    pub fn with_labels(mut self, labels: Vec<bool>) -> Result<Self> {
        if labels.len() != self.x.nrows() {
            return Err(Error::Labels(format!(
                "{} labels for {} rows",
                labels.len(),
                self.x.nrows()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn outlier_count(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| l.iter().filter(|&&b| b).count())
    }

    /// Rows `idx`, in that order, with labels carried along.
    pub fn select(&self, idx: &[usize]) -> Self {
        LabeledDataset {
            x: self.x.select(Axis(0), idx),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
            true_basis: self.true_basis.clone(),
            meta: self.meta.clone(),
        }
    }
}

/// Per-column z-scoring parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizeParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-12;

impl StandardizeParams {
    pub fn fit<T: Scalar>(x: ArrayView2<T>) -> Self {
        let n = x.nrows().max(1) as f64;
        let (mean, std) = x
            .columns()
            .into_iter()
            .map(|col| {
                let m = col.iter().map(|v| v.f64()).sum::<f64>() / n;
                let var = col.iter().map(|v| (v.f64() - m).powi(2)).sum::<f64>() / n;
                (m, var.sqrt().max(STD_FLOOR))
            })
            .unzip();
        StandardizeParams { mean, std }
    }

    pub fn apply<T: Scalar>(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::shape(format!(
                "standardizer fitted on {} columns, data has {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        let mean: Array1<T> = self.mean.iter().map(|&m| T::of(m)).collect();
        let std: Array1<T> = self.std.iter().map(|&s| T::of(s)).collect();
        Ok((&x - &mean) / &std)
    }
}

/// Column-wise z-scoring; labels pass through, the subspace basis is dropped.
pub fn standardize<T: Scalar>(data: &LabeledDataset<T>) -> (LabeledDataset<T>, StandardizeParams) {
    let params = StandardizeParams::fit(data.x.view());
    let x = params.apply(data.x.view()).expect("fitted on the same columns");
    let scaled = LabeledDataset {
        x,
        labels: data.labels.clone(),
        true_basis: None,
        meta: data.meta.clone(),
    };
    (scaled, params)
}

/// Deterministic shuffled split into `(train, holdout)`.
pub fn split<T: Scalar>(
    data: &LabeledDataset<T>,
    holdout_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset<T>, LabeledDataset<T>)> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::config(format!(
            "holdout fraction must lie in (0, 1), got {holdout_fraction}"
        )));
    }
    let n = data.len();
    if n < 2 {
        return Err(Error::config("need at least two rows to split"));
    }
    let n_hold = ((n as f64 * holdout_fraction).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, rng::SPLIT));
    let (hold, train) = idx.split_at(n_hold);
    Ok((data.select(train), data.select(hold)))
}

/// Mean squared row norm, `(1/N) sum ||x_i||^2`.
pub fn mean_energy<T: Scalar>(x: ArrayView2<T>) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    x.rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.f64() * v.f64()).sum::<f64>())
        .sum::<f64>()
        / x.nrows() as f64
}
