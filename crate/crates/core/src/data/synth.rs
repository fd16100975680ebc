use std::f64::consts::PI;

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng as _;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{self, Rng};
use crate::Scalar;

/// Parameters of the contaminated linear-subspace model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearSpec {
    pub n_in: usize,
    pub n_out: usize,
    pub dim: usize,
    pub intrinsic: usize,
    pub noise_var: f64,
}

/// `E ||g||` for `g ~ N(0, I_d)`.
fn mean_chi(d: usize) -> f64 {
    let d = d as f64;
    2f64.sqrt() * (libm::lgamma((d + 1.0) / 2.0) - libm::lgamma(d / 2.0)).exp()
}

fn random_basis(rng: &mut Rng, dim: usize, intrinsic: usize) -> Result<DMatrix<f64>> {
    let g = DMatrix::from_fn(dim, intrinsic, |_, _| rng::normal::<f64>(rng, 1.0));
    linalg::orthonormalize(&g)
}

fn finish<T: Scalar>(
    mut rows: Vec<(Vec<f64>, bool)>,
    dim: usize,
    rng: &mut Rng,
    basis: Option<&DMatrix<f64>>,
    meta: &[(&str, String)],
) -> LabeledDataset<T> {
    rows.shuffle(rng);
    let n = rows.len();
    let mut x = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for (i, (row, lab)) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            x[[i, j]] = T::of(v);
        }
        labels.push(lab);
    }
    LabeledDataset {
        x,
        labels: Some(labels),
        true_basis: basis.map(linalg::from_dmatrix),
        meta: meta
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect(),
    }
}

/// Inliers on a random `intrinsic`-dimensional subspace of `R^dim`, isotropic
/// Gaussian outliers of matching expected norm, plus additive noise.
///
/// Inliers are `N(0, I_dim)` draws projected orthogonally onto the subspace
/// and rescaled to unit expected norm; outliers are `N(0, I_dim / dim)`.
pub fn gen_linear_counts<T: Scalar>(spec: LinearSpec, seed: u64) -> Result<LabeledDataset<T>> {
    let LinearSpec {
        dim,
        intrinsic,
        noise_var,
        ..
    } = spec;
    if intrinsic == 0 || intrinsic >= dim {
        return Err(Error::config(format!(
            "intrinsic dimension must satisfy 0 < d < D, got d={intrinsic}, D={dim}"
        )));
    }
    if !(noise_var >= 0.0) {
        return Err(Error::config("noise variance must be non-negative"));
    }
    let mut rng = rng::stream(seed, rng::DATA);
    let basis = random_basis(&mut rng, dim, intrinsic)?;
    Ok(sample_linear(spec, &basis, &mut rng, seed))
}

/// Fresh draws from the linear model around a given orthonormal `dim x d`
/// basis, e.g. a validation set sharing a training set's subspace.
pub fn gen_linear_on_basis<T: Scalar>(
    spec: LinearSpec,
    basis: ArrayView2<T>,
    seed: u64,
) -> Result<LabeledDataset<T>> {
    if basis.dim() != (spec.dim, spec.intrinsic) {
        return Err(Error::shape(format!(
            "basis is {:?}, spec asks for {}x{}",
            basis.dim(),
            spec.dim,
            spec.intrinsic
        )));
    }
    if !(spec.noise_var >= 0.0) {
        return Err(Error::config("noise variance must be non-negative"));
    }
    let basis = linalg::orthonormalize(&linalg::to_dmatrix(basis))?;
    let mut rng = rng::stream(seed, rng::DATA);
    Ok(sample_linear(spec, &basis, &mut rng, seed))
}

fn sample_linear<T: Scalar>(
    spec: LinearSpec,
    basis: &DMatrix<f64>,
    rng: &mut Rng,
    seed: u64,
) -> LabeledDataset<T> {
    let LinearSpec {
        n_in,
        n_out,
        dim,
        intrinsic,
        noise_var,
    } = spec;
    let scale = 1.0 / mean_chi(intrinsic);
    let out_std = (1.0 / dim as f64).sqrt();
    let noise_std = noise_var.sqrt();

    let mut rows = Vec::with_capacity(n_in + n_out);
    for _ in 0..n_in {
        let g = nalgebra::DVector::from_fn(dim, |_, _| rng::normal::<f64>(rng, 1.0));
        let p = basis * (basis.transpose() * g) * scale;
        rows.push((p.iter().copied().collect::<Vec<_>>(), false));
    }
    for _ in 0..n_out {
        let row = (0..dim).map(|_| rng::normal::<f64>(rng, out_std)).collect();
        rows.push((row, true));
    }
    if noise_std > 0.0 {
        for (row, _) in &mut rows {
            for v in row.iter_mut() {
                *v += rng::normal::<f64>(rng, noise_std);
            }
        }
    }
    finish(
        rows,
        dim,
        rng,
        Some(basis),
        &[
            ("kind", "linear".into()),
            ("n_in", n_in.to_string()),
            ("n_out", n_out.to_string()),
            ("dim", dim.to_string()),
            ("intrinsic", intrinsic.to_string()),
            ("noise_var", noise_var.to_string()),
            ("seed", seed.to_string()),
        ],
    )
}

/// `gen_linear_counts` with `floor(r * n)` outliers.
pub fn gen_linear<T: Scalar>(
    n: usize,
    dim: usize,
    intrinsic: usize,
    outlier_fraction: f64,
    noise_var: f64,
    seed: u64,
) -> Result<LabeledDataset<T>> {
    if !(0.0..1.0).contains(&outlier_fraction) {
        return Err(Error::config(format!(
            "outlier fraction must lie in [0, 1), got {outlier_fraction}"
        )));
    }
    let n_out = (outlier_fraction * n as f64).floor() as usize;
    gen_linear_counts(
        LinearSpec {
            n_in: n - n_out,
            n_out,
            dim,
            intrinsic,
            noise_var,
        },
        seed,
    )
}

/// `(t, h) -> (t cos t, h, t sin t)`.
pub fn swiss_roll_point(t: f64, h: f64) -> [f64; 3] {
    [t * t.cos(), h, t * t.sin()]
}

/// Narrow swiss roll (`t ~ U[3pi/2, 9pi/2]`, `h ~ U[0, 0.1]`) with
/// `N(0, sigma2 I_3)` outliers.
pub fn gen_swiss_roll<T: Scalar>(
    n_in: usize,
    n_out: usize,
    sigma2: f64,
    seed: u64,
) -> Result<LabeledDataset<T>> {
    if !(sigma2 > 0.0) {
        return Err(Error::config("outlier variance must be positive"));
    }
    let mut rng = rng::stream(seed, rng::DATA);
    let mut rows = Vec::with_capacity(n_in + n_out);
    for _ in 0..n_in {
        let t = rng.random_range(1.5 * PI..=4.5 * PI);
        let h = rng.random_range(0.0..=0.1);
        rows.push((swiss_roll_point(t, h).to_vec(), false));
    }
    let std = sigma2.sqrt();
    for _ in 0..n_out {
        let row = (0..3).map(|_| rng::normal::<f64>(&mut rng, std)).collect();
        rows.push((row, true));
    }
    Ok(finish(
        rows,
        3,
        &mut rng,
        None,
        &[
            ("kind", "swiss_roll".into()),
            ("n_in", n_in.to_string()),
            ("n_out", n_out.to_string()),
            ("sigma2", sigma2.to_string()),
            ("seed", seed.to_string()),
        ],
    ))
}

/// Small instance with a clear gap between inliers and outliers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparatedSpec {
    pub n_in: usize,
    pub n_out: usize,
    pub dim: usize,
    pub intrinsic: usize,
    /// Standard deviation of inlier coordinates inside the subspace.
    pub spread: f64,
    /// Distance of every outlier from the subspace.
    pub separation: f64,
}

/// Inliers exactly on a random subspace through the origin; each outlier is
/// an in-subspace point pushed `separation` away along a random orthogonal
/// direction.
pub fn gen_separated<T: Scalar>(spec: SeparatedSpec, seed: u64) -> Result<LabeledDataset<T>> {
    let SeparatedSpec {
        n_in,
        n_out,
        dim,
        intrinsic,
        spread,
        separation,
    } = spec;
    if intrinsic == 0 || intrinsic >= dim {
        return Err(Error::config(format!(
            "intrinsic dimension must satisfy 0 < d < D, got d={intrinsic}, D={dim}"
        )));
    }
    let mut rng = rng::stream(seed, rng::DATA);
    let basis = random_basis(&mut rng, dim, intrinsic)?;
    let in_subspace = |rng: &mut Rng| {
        let c = nalgebra::DVector::from_fn(intrinsic, |_, _| rng::normal::<f64>(rng, spread));
        &basis * c
    };
    let mut rows = Vec::with_capacity(n_in + n_out);
    for _ in 0..n_in {
        rows.push((in_subspace(&mut rng).iter().copied().collect(), false));
    }
    for _ in 0..n_out {
        let p = in_subspace(&mut rng);
        let g = nalgebra::DVector::from_fn(dim, |_, _| rng::normal::<f64>(&mut rng, 1.0));
        let perp = &g - &basis * (basis.transpose() * &g);
        let row = p + perp.normalize() * separation;
        rows.push((row.iter().copied().collect(), true));
    }
    Ok(finish(
        rows,
        dim,
        &mut rng,
        Some(&basis),
        &[
            ("kind", "separated".into()),
            ("n_in", n_in.to_string()),
            ("n_out", n_out.to_string()),
            ("dim", dim.to_string()),
            ("intrinsic", intrinsic.to_string()),
            ("spread", spread.to_string()),
            ("separation", separation.to_string()),
            ("seed", seed.to_string()),
        ],
    ))
}
