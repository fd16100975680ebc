//! Per-sample stochastic gates `z = clamp(mu + eps, 0, 1)`, `eps ~ N(0, sigma^2)`,
//! with the closed-form moments needed for their regularisers.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::Scalar;

/// Lower clip applied to every `mu` after an update.
pub const MU_MIN: f64 = -1.0;
/// Upper clip applied to every `mu` after an update.
pub const MU_MAX: f64 = 2.0;
pub const DEFAULT_SIGMA: f64 = 0.5;
pub const DEFAULT_MU_INIT: f64 = 0.5;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `E[z]` for one gate.
pub fn expected_gate<T: Scalar>(mu: T, sigma: T) -> T {
    let (m, s) = (mu.f64(), sigma.f64());
    let tails = s / (2.0 * PI).sqrt()
        * ((-m * m / (2.0 * s * s)).exp() - (-(1.0 - m) * (1.0 - m) / (2.0 * s * s)).exp());
    let e = tails + (m - 1.0) * normal_cdf((1.0 - m) / s) - m * normal_cdf(-m / s) + 1.0;
    T::of(e.clamp(0.0, 1.0))
}

/// `P(z > 0) = Phi(mu / sigma)`.
pub fn open_probability<T: Scalar>(mu: T, sigma: T) -> T {
    T::of(normal_cdf(mu.f64() / sigma.f64()))
}

/// `P(0 < mu + eps < 1)`, which is also `dE[z]/dmu`.
pub fn pass_probability<T: Scalar>(mu: T, sigma: T) -> T {
    let (m, s) = (mu.f64(), sigma.f64());
    T::of((normal_cdf((1.0 - m) / s) - normal_cdf(-m / s)).max(0.0))
}

/// The gate with the noise switched off.
pub fn deterministic_gate<T: Scalar>(mu: T) -> T {
    mu.max(T::zero()).min(T::one())
}

/// Which expected sparsity penalty the gates pay.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    /// `E||z||_0 = sum Phi(mu / sigma)`
    L0,
    /// `E||z||_1 = sum E[z]`
    L1,
}

impl Regularizer {
    /// Value and `d/dmu` of a single gate's penalty (before scaling by lambda).
    pub fn term<T: Scalar>(self, mu: T, sigma: T) -> (T, T) {
        match self {
            Regularizer::L0 => (
                open_probability(mu, sigma),
                T::of(normal_pdf(mu.f64() / sigma.f64()) / sigma.f64()),
            ),
            Regularizer::L1 => (expected_gate(mu, sigma), pass_probability(mu, sigma)),
        }
    }

    /// `lambda * sum_i term(mu_i)` over `rows` (all gates when `None`) and
    /// its gradient, one entry per visited row.
    pub fn evaluate<T: Scalar>(
        self,
        bank: &GateBank<T>,
        lambda: T,
        rows: Option<&[usize]>,
    ) -> (T, Vec<T>) {
        let mut value = T::zero();
        let mut grad = Vec::new();
        let mut visit = |mu: T| {
            let (v, g) = self.term(mu, bank.sigma);
            value += v;
            grad.push(lambda * g);
        };
        match rows {
            Some(rows) => rows.iter().for_each(|&i| visit(bank.mu[i])),
            None => bank.mu.iter().for_each(|&m| visit(m)),
        }
        (lambda * value, grad)
    }
}

/// Expected `lambda * ||z||_0` over the whole bank and its gradient.
pub fn reg_l0<T: Scalar>(bank: &GateBank<T>, lambda: T) -> (T, Vec<T>) {
    Regularizer::L0.evaluate(bank, lambda, None)
}

/// Expected `lambda * ||z||_1` over the whole bank and its gradient.
pub fn reg_l1<T: Scalar>(bank: &GateBank<T>, lambda: T) -> (T, Vec<T>) {
    Regularizer::L1.evaluate(bank, lambda, None)
}

/// One trainable location `mu[i]` per sample and a shared fixed noise scale.
#[derive(Clone, Debug, PartialEq)]
pub struct GateBank<T> {
    pub mu: Vec<T>,
    pub sigma: T,
}

/// A realisation of the gates for some set of samples.
#[derive(Clone, Debug, PartialEq)]
pub struct GateSample<T> {
    pub z: Vec<T>,
    /// True where the clamp was inactive, i.e. `0 < mu + eps < 1`.
    pub pass_through: Vec<bool>,
    pub noise: Vec<T>,
}

impl<T: Scalar> GateSample<T> {
    /// Gates for given `mu` values under fixed noise.
    pub fn from_noise(mu: &[T], noise: &[T]) -> Self {
        let (z, pass_through) = mu
            .iter()
            .zip(noise)
            .map(|(&m, &e)| {
                let u = m + e;
                (deterministic_gate(u), u > T::zero() && u < T::one())
            })
            .unzip();
        GateSample {
            z,
            pass_through,
            noise: noise.to_vec(),
        }
    }
}

impl<T: Scalar> GateBank<T> {
    pub fn new(n: usize, sigma: f64, mu_init: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::config(format!("gate sigma must be positive, got {sigma}")));
        }
        if n == 0 {
            return Err(Error::config("gate bank needs at least one sample"));
        }
        Ok(GateBank {
            mu: vec![T::of(mu_init); n],
            sigma: T::of(sigma),
        })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Draws every gate.
    pub fn sample(&self, rng: &mut Rng) -> GateSample<T> {
        let noise: Vec<T> = (0..self.len())
            .map(|_| rng::normal(rng, self.sigma.f64()))
            .collect();
        GateSample::from_noise(&self.mu, &noise)
    }

    /// Draws the gates of `rows`, in that order.
    pub fn sample_rows(&self, rows: &[usize], rng: &mut Rng) -> GateSample<T> {
        let mu: Vec<T> = rows.iter().map(|&i| self.mu[i]).collect();
        let noise: Vec<T> = rows
            .iter()
            .map(|_| rng::normal(rng, self.sigma.f64()))
            .collect();
        GateSample::from_noise(&mu, &noise)
    }

    pub fn deterministic(&self) -> Vec<T> {
        self.mu.iter().map(|&m| deterministic_gate(m)).collect()
    }

    pub fn clip_rows(&mut self, rows: &[usize]) {
        let (lo, hi) = (T::of(MU_MIN), T::of(MU_MAX));
        for &i in rows {
            self.mu[i] = self.mu[i].max(lo).min(hi);
        }
    }
}
