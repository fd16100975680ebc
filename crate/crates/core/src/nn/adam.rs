use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

use super::{DenseNet, NetGrads};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

struct Coeffs<T> {
    b1: T,
    b2: T,
    one_minus_b1: T,
    one_minus_b2: T,
    lr: T,
    eps: T,
}

impl AdamConfig {
    fn coeffs<T: Scalar>(&self) -> Coeffs<T> {
        Coeffs {
            b1: T::of(self.beta1),
            b2: T::of(self.beta2),
            one_minus_b1: T::of(1.0 - self.beta1),
            one_minus_b2: T::of(1.0 - self.beta2),
            lr: T::of(self.learning_rate),
            eps: T::of(self.epsilon),
        }
    }

    // Bias-correction denominators (1 - beta^t).
    fn corrections<T: Scalar>(&self, t: u64) -> (T, T) {
        let t = t.min(i32::MAX as u64) as i32;
        (
            T::of(1.0 - self.beta1.powi(t)),
            T::of(1.0 - self.beta2.powi(t)),
        )
    }
}

#[inline]
fn update<T: Scalar>(
    c: &Coeffs<T>,
    (bc1, bc2): (T, T),
    p: &mut T,
    m: &mut T,
    v: &mut T,
    g: T,
) {
    *m = c.b1 * *m + c.one_minus_b1 * g;
    *v = c.b2 * *v + c.one_minus_b2 * g * g;
    let m_hat = *m / bc1;
    let v_hat = *v / bc2;
    *p -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
}

/// Bias-corrected Adam over a fixed list of parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig, sizes: impl IntoIterator<Item = usize>) -> Self {
        let m: Vec<Vec<T>> = sizes.into_iter().map(|n| vec![T::zero(); n]).collect();
        AdamState {
            config,
            v: m.clone(),
            m,
            t: 0,
        }
    }

    pub fn for_net(config: AdamConfig, net: &DenseNet<T>) -> Self {
        Self::new(
            config,
            net.layers().flat_map(|l| [l.weights.len(), l.bias.len()]),
        )
    }

    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[k].len() || g.len() != self.m[k].len() {
                return Err(Error::shape(format!("tensor {k} changed size")));
            }
        }
        self.t += 1;
        let c = self.config.coeffs::<T>();
        let bc = self.config.corrections::<T>(self.t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                update(&c, bc, &mut p[i], &mut m[i], &mut v[i], g[i]);
            }
        }
        Ok(())
    }

    pub fn step_net(&mut self, net: &mut DenseNet<T>, grads: &NetGrads<T>) -> Result<()> {
        let mut params = net.param_slices_mut();
        self.step(&mut params, &grads.slices())
    }
}

/// Adam over a vector where each step touches only some entries.
///
/// Every entry keeps its own step count, so an entry that sat out several
/// steps is bias-corrected as if those steps never happened.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseAdamState<T> {
    pub config: AdamConfig,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: Vec<u64>,
}

impl<T: Scalar> SparseAdamState<T> {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        SparseAdamState {
            config,
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: vec![0; len],
        }
    }

    pub fn step_rows(&mut self, params: &mut [T], rows: &[usize], grads: &[T]) -> Result<()> {
        if params.len() != self.m.len() || rows.len() != grads.len() {
            return Err(Error::shape("sparse Adam: length mismatch"));
        }
        let c = self.config.coeffs::<T>();
        for (&i, &g) in rows.iter().zip(grads) {
            if i >= params.len() {
                return Err(Error::shape(format!("row {i} out of range")));
            }
            self.t[i] += 1;
            let bc = self.config.corrections::<T>(self.t[i]);
            update(&c, bc, &mut params[i], &mut self.m[i], &mut self.v[i], g);
        }
        Ok(())
    }
}
