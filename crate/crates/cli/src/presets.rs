//! Bundled synthetic experiments: generator plus the hyperparameters that go with it.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Result};
use prae::data::{self, LabeledDataset, LinearSpec, SeparatedSpec};
use prae::prae::{PraeConfig, Variant};

/// Outlier-contaminated plane in R^100: 150 inliers on a 2-d subspace, 50 outliers.
pub const FIG3_SPEC: LinearSpec = LinearSpec {
    n_in: 150,
    n_out: 50,
    dim: 100,
    intrinsic: 2,
    noise_var: 1e-8,
};

pub const FIG3_LAMBDAS: [f64; 12] = [0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0, 3.0, 5.0, 7.0, 10.0];

pub const SWISS_INLIERS: usize = 1000;
pub const SWISS_OUTLIERS: usize = 200;
pub const SWISS_HIDDEN: [usize; 5] = [512, 256, 128, 64, 32];

pub const RSR_N: usize = 2000;
pub const RSR_DIM: usize = 50;
pub const RSR_INTRINSIC: usize = 5;
pub const RSR_NOISE_VAR: f64 = 1e-8;

pub const ORACLE_SPEC: SeparatedSpec = SeparatedSpec {
    n_in: 6,
    n_out: 2,
    dim: 3,
    intrinsic: 1,
    spread: 2.0,
    separation: 3.0,
};
/// Between the inlier residual scale (0) and the outlier one (separation^2).
pub const ORACLE_LAMBDA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Preset {
    Fig3,
    /// Swiss roll with `N(0, sigma2 I)` outliers.
    Table1 { sigma2: f64 },
    /// Linear subspace recovery at outlier fraction `r`.
    Rsr { r: f64 },
    Oracle,
}

impl Preset {
    pub const NAMES: [&'static str; 6] = [
        "fig3",
        "table1-sigma0.1",
        "table1-sigma1",
        "table1-sigma10",
        "rsr",
        "oracle",
    ];

    /// Hyperparameters for `variant`, seeded with `seed`.
    pub fn config(self, variant: Variant, seed: u64) -> PraeConfig {
        let base = match self {
            Preset::Fig3 => PraeConfig {
                epochs: 1500,
                batch_size: Some(32),
                learning_rate: Some(1e-2),
                gate_learning_rate: Some(1e-2),
                lambda: 0.3,
                ..PraeConfig::linear(FIG3_SPEC.intrinsic)
            },
            Preset::Table1 { .. } => PraeConfig {
                lambda: 0.005,
                epochs: 150,
                batch_size: Some(256),
                learning_rate: Some(1e-3),
                gate_learning_rate: Some(2e-2),
                hidden_widths: SWISS_HIDDEN.to_vec(),
                latent_dim: 2,
                normalize_recon: true,
                ..PraeConfig::default()
            },
            Preset::Rsr { .. } => PraeConfig {
                lambda: 0.2,
                epochs: 200,
                batch_size: Some(64),
                learning_rate: Some(1e-2),
                ..PraeConfig::linear(RSR_INTRINSIC)
            },
            Preset::Oracle => PraeConfig {
                lambda: ORACLE_LAMBDA,
                epochs: 10_000,
                learning_rate: Some(1e-2),
                gate_learning_rate: Some(5e-2),
                ..PraeConfig::linear(ORACLE_SPEC.intrinsic)
            },
        };
        PraeConfig {
            variant,
            seed,
            ..base
        }
    }

    pub fn generate(self, seed: u64) -> Result<LabeledDataset<f64>> {
        Ok(match self {
            Preset::Fig3 => data::gen_linear_counts(FIG3_SPEC, seed)?,
            Preset::Table1 { sigma2 } => {
                data::gen_swiss_roll(SWISS_INLIERS, SWISS_OUTLIERS, sigma2, seed)?
            }
            Preset::Rsr { r } => data::gen_linear(RSR_N, RSR_DIM, RSR_INTRINSIC, r, RSR_NOISE_VAR, seed)?,
            Preset::Oracle => data::gen_separated(ORACLE_SPEC, seed)?,
        })
    }

    /// Parses a preset name; `rsr` takes its outlier fraction from `r`.
    pub fn parse(name: &str, r: Option<f64>) -> Result<Self> {
        let preset = match name {
            "fig3" => Preset::Fig3,
            "table1-sigma0.1" => Preset::Table1 { sigma2: 0.1 },
            "table1-sigma1" => Preset::Table1 { sigma2: 1.0 },
            "table1-sigma10" => Preset::Table1 { sigma2: 10.0 },
            "rsr" => Preset::Rsr { r: r.unwrap_or(0.5) },
            "oracle" => Preset::Oracle,
            other => bail!(
                "unknown preset {other:?}; expected one of {}",
                Self::NAMES.join(", ")
            ),
        };
        if r.is_some() && !matches!(preset, Preset::Rsr { .. }) {
            bail!("--r only applies to the rsr preset");
        }
        Ok(preset)
    }
}

impl FromStr for Preset {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::parse(s, None)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Fig3 => f.write_str("fig3"),
            Preset::Table1 { sigma2 } => write!(f, "table1-sigma{sigma2}"),
            Preset::Rsr { r } => write!(f, "rsr(r={r})"),
            Preset::Oracle => f.write_str("oracle"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_parse() {
        for name in Preset::NAMES {
            let p: Preset = name.parse().unwrap();
            p.config(Variant::L0, 1).validate(10, RSR_DIM).unwrap();
        }
        assert_eq!(Preset::parse("rsr", Some(0.3)).unwrap(), Preset::Rsr { r: 0.3 });
        assert!(Preset::parse("fig3", Some(0.3)).is_err());
        assert!("table1-sigma2".parse::<Preset>().is_err());
    }

    #[test]
    fn generators_have_expected_shapes() {
        let d = Preset::Fig3.generate(0).unwrap();
        assert_eq!((d.len(), d.dim(), d.outlier_count()), (200, 100, Some(50)));
        let d = Preset::Oracle.generate(0).unwrap();
        assert_eq!((d.len(), d.dim()), (8, 3));
        let d = Preset::Rsr { r: 0.3 }.generate(0).unwrap();
        assert_eq!(d.outlier_count(), Some(600));
    }
}
