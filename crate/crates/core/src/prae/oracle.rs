//! Exhaustive minimisation of the deterministic robust-AE objective
//! `L_d(b) = sum_i b_i r_i - lambda ||b||_0` for a linear autoencoder, where the
//! optimal reconstruction of a subset is its rank-`k` PCA fit.

use nalgebra::DMatrix;
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{train::train_prae, PraeConfig};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::nn::Activation;
use crate::Scalar;

pub const ORACLE_MAX_N: usize = 20;
/// Relative tolerance under which two subset losses count as tied.
const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaeOracleResult {
    pub best_b: Vec<bool>,
    pub best_loss: f64,
    /// Every subset with its loss, in bitmask order (bit `i` is sample `i`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub all_subset_losses: Option<Vec<(Vec<bool>, f64)>>,
}

fn check_k(dim: usize, k: usize) -> Result<()> {
    if k == 0 || k >= dim {
        return Err(Error::config(format!("subspace rank must lie in [1, {dim}), got {k}")));
    }
    Ok(())
}

/// Squared distance of the rows `idx` to their best rank-`k` subspace, from
/// the eigenvalues of their Gram matrix.
fn subset_residual(gram: &DMatrix<f64>, idx: &[usize], k: usize, center: bool) -> f64 {
    let m = idx.len();
    if m <= k && !center || m == 0 {
        return 0.0;
    }
    let mut g = DMatrix::from_fn(m, m, |a, b| gram[(idx[a], idx[b])]);
    if center {
        let row_means: Vec<f64> = (0..m).map(|a| g.row(a).sum() / m as f64).collect();
        let total = row_means.iter().sum::<f64>() / m as f64;
        for a in 0..m {
            for b in 0..m {
                g[(a, b)] += total - row_means[a] - row_means[b];
            }
        }
    }
    let mut eig: Vec<f64> = g.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig.iter().skip(k).map(|v| v.max(0.0)).sum()
}

fn gram<T: Scalar>(x: ArrayView2<T>) -> DMatrix<f64> {
    let m = linalg::to_dmatrix(x);
    &m * m.transpose()
}

/// `L_d(b)` for a single selection.
pub fn rae_loss<T: Scalar>(
    x: ArrayView2<T>,
    b: &[bool],
    lambda: f64,
    k: usize,
    center: bool,
) -> Result<f64> {
    check_k(x.ncols(), k)?;
    if b.len() != x.nrows() {
        return Err(Error::shape(format!("{} flags for {} rows", b.len(), x.nrows())));
    }
    let idx: Vec<usize> = (0..b.len()).filter(|&i| b[i]).collect();
    Ok(subset_residual(&gram(x), &idx, k, center) - lambda * idx.len() as f64)
}

/// Enumerates all `2^N` selections. Near-ties (within a relative `1e-9`) go to
/// the smaller selection, then to the lexicographically smallest `b`.
pub fn brute_force_rae_linear<T: Scalar>(
    x: ArrayView2<T>,
    lambda: f64,
    k: usize,
    center: bool,
    keep_table: bool,
) -> Result<RaeOracleResult> {
    let n = x.nrows();
    if n > ORACLE_MAX_N {
        return Err(Error::TooLarge {
            n,
            limit: ORACLE_MAX_N,
        });
    }
    check_k(x.ncols(), k)?;
    if !lambda.is_finite() {
        return Err(Error::config("lambda must be finite"));
    }
    let g = gram(x);
    let mut table = keep_table.then(|| Vec::with_capacity(1 << n));
    let mut best: Option<(f64, usize, Vec<bool>)> = None;
    let mut idx = Vec::with_capacity(n);
    for mask in 0u32..(1u32 << n) {
        idx.clear();
        idx.extend((0..n).filter(|&i| mask >> i & 1 == 1));
        let loss = subset_residual(&g, &idx, k, center) - lambda * idx.len() as f64;
        let b: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let better = match &best {
            None => true,
            Some((bl, bc, bb)) => {
                let tol = TIE_TOL * (1.0 + bl.abs().max(loss.abs()));
                if loss < bl - tol {
                    true
                } else if (loss - bl).abs() <= tol {
                    idx.len() < *bc || (idx.len() == *bc && b < *bb)
                } else {
                    false
                }
            }
        };
        if let Some(t) = table.as_mut() {
            t.push((b.clone(), loss));
        }
        if better {
            best = Some((loss, idx.len(), b));
        }
    }
    let (best_loss, _, best_b) = best.expect("at least the empty subset");
    Ok(RaeOracleResult {
        best_b,
        best_loss,
        all_subset_losses: table,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub lambda: f64,
    /// Rows with `clamp(mu) >= thresh` after training.
    pub prae_selection: Vec<bool>,
    pub oracle_selection: Vec<bool>,
    pub matches: bool,
    pub prae_loss: f64,
    pub oracle_loss: f64,
    /// `prae_loss - oracle_loss`, never meaningfully negative.
    pub gap: f64,
}

/// Trains a linear PRAE on `x` and compares its selection with the oracle's.
pub fn equivalence_check<T: Scalar>(
    x: ArrayView2<T>,
    lambda: f64,
    k: usize,
    center: bool,
    config: &PraeConfig,
) -> Result<EquivalenceReport> {
    if config.hidden_activation != Activation::Linear && !config.hidden_widths.is_empty() {
        return Err(Error::config("equivalence check needs a linear autoencoder"));
    }
    if config.latent_dim != k {
        return Err(Error::config(format!(
            "latent dimension {} differs from subspace rank {k}",
            config.latent_dim
        )));
    }
    let oracle = brute_force_rae_linear(x, lambda, k, center, false)?;
    let cfg = PraeConfig {
        lambda,
        ..config.clone()
    };
    let model = train_prae(&LabeledDataset::new(x.to_owned()), &cfg)?;
    let prae_selection = model.selection(cfg.thresh);
    let prae_loss = rae_loss(x, &prae_selection, lambda, k, center)?;
    Ok(EquivalenceReport {
        lambda,
        matches: prae_selection == oracle.best_b,
        gap: prae_loss - oracle.best_loss,
        prae_selection,
        oracle_selection: oracle.best_b,
        prae_loss,
        oracle_loss: oracle.best_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2, Axis};

    fn line_with_outliers() -> Array2<f64> {
        array![
            [1.0, 2.0, -1.0],
            [-0.5, -1.0, 0.5],
            [2.0, 4.0, -2.0],
            [0.8, 1.6, -0.8],
            [3.0, 0.0, 3.0],
            [-1.5, -3.0, 1.5],
            [0.3, 0.6, -0.3],
            [0.0, -3.0, -3.0],
        ]
    }

    #[test]
    fn residuals_agree_with_svd() {
        let x = line_with_outliers();
        let g = gram(x.view());
        for mask in [0b1011_0110u32, 0b1111_1111, 0b0001_0001, 0b1010_1010] {
            let idx: Vec<usize> = (0..8).filter(|&i| mask >> i & 1 == 1).collect();
            let sub = x.select(Axis(0), &idx);
            for center in [false, true] {
                let want = linalg::pca_residual(sub.view(), 1, center);
                let got = subset_residual(&g, &idx, 1, center);
                assert!((got - want).abs() < 1e-9 * (1.0 + want), "{mask:b} {center}");
            }
        }
    }

    #[test]
    fn extremes_of_lambda() {
        let x = line_with_outliers();
        let zero = brute_force_rae_linear(x.view(), 0.0, 1, false, false).unwrap();
        assert_eq!(zero.best_b, vec![false; 8]);
        assert_eq!(zero.best_loss, 0.0);
        let huge = brute_force_rae_linear(x.view(), 1e6, 1, false, false).unwrap();
        assert_eq!(huge.best_b, vec![true; 8]);
    }

    #[test]
    fn separates_line_from_outliers() {
        let x = line_with_outliers();
        let r = brute_force_rae_linear(x.view(), 1.0, 1, false, true).unwrap();
        let want = vec![true, true, true, true, false, true, true, false];
        assert_eq!(r.best_b, want);
        let table = r.all_subset_losses.unwrap();
        assert_eq!(table.len(), 256);
        let min = table.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
        assert!((r.best_loss - min).abs() < 1e-9);
        assert!((r.best_loss + 6.0).abs() < 1e-9);
    }

    #[test]
    fn guards() {
        let big = Array2::<f64>::zeros((21, 3));
        assert!(matches!(
            brute_force_rae_linear(big.view(), 1.0, 1, false, false),
            Err(Error::TooLarge { n: 21, .. })
        ));
        let x = line_with_outliers();
        assert!(brute_force_rae_linear(x.view(), 1.0, 3, false, false).is_err());
        assert!(rae_loss(x.view(), &[true], 1.0, 1, false).is_err());
    }

    #[test]
    fn equivalence_needs_linear_net() {
        let x = line_with_outliers();
        let cfg = PraeConfig::default();
        assert!(equivalence_check(x.view(), 1.0, 1, false, &cfg).is_err());
        assert!(equivalence_check(x.view(), 1.0, 2, false, &PraeConfig::linear(1)).is_err());
    }
}
