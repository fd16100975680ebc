//! Dense encoder/decoder network with exact reverse-mode gradients.

mod adam;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::Scalar;

pub use adam::{AdamConfig, AdamState, SparseAdamState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Tanh,
    Relu,
    LeakyRelu { slope: f64 },
}

impl Activation {
    pub const DEFAULT_LEAKY: Activation = Activation::LeakyRelu { slope: 0.01 };

    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Linear => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(T::zero()),
            Activation::LeakyRelu { slope } => {
                if x > T::zero() {
                    x
                } else {
                    x * T::of(slope)
                }
            }
        }
    }

    /// Derivative given both the pre-activation and the activation output.
    #[inline]
    pub fn derivative<T: Scalar>(self, pre: T, post: T) -> T {
        match self {
            Activation::Linear => T::one(),
            Activation::Tanh => T::one() - post * post,
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu { slope } => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::of(slope)
                }
            }
        }
    }

    // Variance gain applied on top of the 1/fan_in initialisation scale.
    fn init_gain(self) -> f64 {
        match self {
            Activation::Linear | Activation::Tanh => 1.0,
            Activation::Relu => 2.0,
            Activation::LeakyRelu { slope } => 2.0 / (1.0 + slope * slope),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Linear => f.write_str("linear"),
            Activation::Tanh => f.write_str("tanh"),
            Activation::Relu => f.write_str("relu"),
            Activation::LeakyRelu { slope } => write!(f, "leaky_relu:{slope}"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        match (name.to_ascii_lowercase().as_str(), arg) {
            ("linear", None) => Ok(Activation::Linear),
            ("tanh", None) => Ok(Activation::Tanh),
            ("relu", None) => Ok(Activation::Relu),
            ("leaky_relu" | "leakyrelu", None) => Ok(Activation::DEFAULT_LEAKY),
            ("leaky_relu" | "leakyrelu", Some(a)) => a
                .parse::<f64>()
                .map(|slope| Activation::LeakyRelu { slope })
                .map_err(|_| Error::config(format!("bad leaky_relu slope {a:?}"))),
            _ => Err(Error::config(format!("unknown activation {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_width: usize,
    pub output_width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_width: usize, output_width: usize, activation: Activation) -> Self {
        LayerSpec {
            input_width,
            output_width,
            activation,
        }
    }
}

/// Layer specs for a symmetric autoencoder `D -> hidden... -> latent -> ...hidden -> D`.
///
/// Hidden layers use `hidden_activation`; the bottleneck and the output layer
/// are linear so codes and reconstructions are unbounded.
pub fn autoencoder_specs(
    input_dim: usize,
    hidden: &[usize],
    latent_dim: usize,
    hidden_activation: Activation,
) -> Vec<LayerSpec> {
    let mut widths = vec![input_dim];
    widths.extend_from_slice(hidden);
    widths.push(latent_dim);
    widths.extend(hidden.iter().rev());
    widths.push(input_dim);

    let bottleneck = hidden.len();
    let last = widths.len() - 2;
    widths
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let act = if l == bottleneck || l == last {
                Activation::Linear
            } else {
                hidden_activation
            };
            LayerSpec::new(w[0], w[1], act)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    /// `output_width x input_width`, standard layout.
    pub weights: Array2<T>,
    pub bias: Array1<T>,
    pub activation: Activation,
}

impl<T: Scalar> Layer<T> {
    pub fn new(weights: Array2<T>, bias: Array1<T>, activation: Activation) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(Error::shape(format!(
                "weights have {} rows but bias has {} entries",
                weights.nrows(),
                bias.len()
            )));
        }
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::config("layer widths must be at least 1"));
        }
        let weights = weights.as_standard_layout().into_owned();
        Ok(Layer {
            weights,
            bias,
            activation,
        })
    }

    pub fn input_width(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_width(&self) -> usize {
        self.weights.nrows()
    }

    fn spec(&self) -> LayerSpec {
        LayerSpec::new(self.input_width(), self.output_width(), self.activation)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet<T> {
    pub encoder: Vec<Layer<T>>,
    pub decoder: Vec<Layer<T>>,
    pub latent_dim: usize,
}

/// Intermediate values of one forward pass, in layer order.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    pub input: Array2<T>,
    pub pre: Vec<Array2<T>>,
    pub post: Vec<Array2<T>>,
}

impl<T> ForwardCache<T> {
    pub fn depth(&self) -> usize {
        self.pre.len()
    }

    pub fn batch_size(&self) -> usize {
        self.input.nrows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

/// Gradients for every layer, encoder first, shaped like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NetGrads<T> {
    pub layers: Vec<LayerGrads<T>>,
}

impl<T: Scalar> NetGrads<T> {
    pub fn slices(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|g| {
                [
                    g.weights.as_slice().expect("standard layout"),
                    g.bias.as_slice().expect("contiguous"),
                ]
            })
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.slices()
            .into_iter()
            .flatten()
            .fold(T::zero(), |acc, g| acc.max(g.abs()))
    }
}

fn check_chain(specs: &[LayerSpec]) -> Result<()> {
    for (l, s) in specs.iter().enumerate() {
        if s.input_width == 0 || s.output_width == 0 {
            return Err(Error::config(format!("layer {l} has a zero width")));
        }
    }
    for (l, pair) in specs.windows(2).enumerate() {
        if pair[0].output_width != pair[1].input_width {
            return Err(Error::config(format!(
                "layer {} outputs {} values but layer {} expects {}",
                l,
                pair[0].output_width,
                l + 1,
                pair[1].input_width
            )));
        }
    }
    Ok(())
}

fn split_at_bottleneck(specs: &[LayerSpec], latent_dim: usize) -> Result<usize> {
    if specs.len() < 2 {
        return Err(Error::config("an autoencoder needs at least two layers"));
    }
    check_chain(specs)?;
    let first = specs[0].input_width;
    let last = specs[specs.len() - 1].output_width;
    if first != last {
        return Err(Error::config(format!(
            "network maps R^{first} to R^{last}; input and output widths must agree"
        )));
    }
    specs[..specs.len() - 1]
        .iter()
        .position(|s| s.output_width == latent_dim)
        .map(|p| p + 1)
        .ok_or_else(|| {
            Error::config(format!("no layer outputs the latent width {latent_dim}"))
        })
}

/// Builds a network with fan-in scaled Gaussian weights and zero biases.
pub fn init_dense_net<T: Scalar>(
    specs: &[LayerSpec],
    latent_dim: usize,
    seed: u64,
) -> Result<DenseNet<T>> {
    let split = split_at_bottleneck(specs, latent_dim)?;
    let mut rng = rng::stream(seed, rng::INIT);
    let mut layers = specs.iter().map(|s| {
        let std_dev = (s.activation.init_gain() / s.input_width as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((s.output_width, s.input_width), || {
            rng::normal::<T>(&mut rng, std_dev)
        });
        Layer::new(weights, Array1::zeros(s.output_width), s.activation)
    });
    let encoder = layers.by_ref().take(split).collect::<Result<Vec<_>>>()?;
    let decoder = layers.collect::<Result<Vec<_>>>()?;
    Ok(DenseNet {
        encoder,
        decoder,
        latent_dim,
    })
}

impl<T: Scalar> DenseNet<T> {
    /// Assembles a network from explicit layers, validating the chain.
    pub fn from_layers(encoder: Vec<Layer<T>>, decoder: Vec<Layer<T>>) -> Result<Self> {
        let latent_dim = encoder
            .last()
            .map(Layer::output_width)
            .ok_or_else(|| Error::config("encoder has no layers"))?;
        if decoder.is_empty() {
            return Err(Error::config("decoder has no layers"));
        }
        let specs: Vec<_> = encoder.iter().chain(&decoder).map(Layer::spec).collect();
        split_at_bottleneck(&specs, latent_dim)?;
        Ok(DenseNet {
            encoder,
            decoder,
            latent_dim,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].input_width()
    }

    pub fn layer_count(&self) -> usize {
        self.encoder.len() + self.decoder.len()
    }

    pub fn layers(&self) -> impl Iterator<Item = &Layer<T>> {
        self.encoder.iter().chain(&self.decoder)
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Layer<T>> {
        self.encoder.iter_mut().chain(self.decoder.iter_mut())
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers().map(Layer::spec).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flat mutable views of every parameter tensor, in the order of `NetGrads::slices`.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        self.layers_mut()
            .flat_map(|l| {
                [
                    l.weights.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("contiguous"),
                ]
            })
            .collect()
    }

    fn check_input(&self, batch: &ArrayView2<T>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::shape(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// `psi(rho(x))` for every row, keeping every intermediate for `backward`.
    pub fn forward(&self, batch: ArrayView2<T>) -> Result<(Array2<T>, ForwardCache<T>)> {
        self.check_input(&batch)?;
        let mut pre = Vec::with_capacity(self.layer_count());
        let mut post: Vec<Array2<T>> = Vec::with_capacity(self.layer_count());
        for layer in self.layers() {
            let input = post.last().map(|p| p.view()).unwrap_or(batch.view());
            let (z, a) = layer_forward(layer, input);
            pre.push(z);
            post.push(a);
        }
        let out = post.last().expect("non-empty network").clone();
        Ok((
            out,
            ForwardCache {
                input: batch.to_owned(),
                pre,
                post,
            },
        ))
    }

    /// Reconstruction only, without retaining the cache.
    pub fn reconstruct(&self, batch: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_input(&batch)?;
        let mut cur = batch.to_owned();
        for layer in self.layers() {
            cur = layer_forward(layer, cur.view()).1;
        }
        Ok(cur)
    }

    /// Latent codes `rho(x)`.
    pub fn encode(&self, batch: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_input(&batch)?;
        let mut cur = batch.to_owned();
        for layer in &self.encoder {
            cur = layer_forward(layer, cur.view()).1;
        }
        Ok(cur)
    }

    /// Reverse-mode gradients of the scalar whose gradient w.r.t. the
    /// reconstruction is `output_grad`.
    pub fn backward(&self, cache: &ForwardCache<T>, output_grad: ArrayView2<T>) -> Result<NetGrads<T>> {
        if cache.depth() != self.layer_count() || cache.post.len() != cache.depth() {
            return Err(Error::shape(format!(
                "cache holds {} layers, network has {}",
                cache.depth(),
                self.layer_count()
            )));
        }
        if cache.input.ncols() != self.input_dim() {
            return Err(Error::shape("cache input width does not match network"));
        }
        for (l, (layer, z)) in self.layers().zip(&cache.pre).enumerate() {
            if z.dim() != (cache.batch_size(), layer.output_width()) {
                return Err(Error::shape(format!("stale cache at layer {l}")));
            }
        }
        let out_dim = (cache.batch_size(), self.input_dim());
        if output_grad.dim() != out_dim {
            return Err(Error::shape(format!(
                "output gradient is {:?}, reconstruction is {:?}",
                output_grad.dim(),
                out_dim
            )));
        }

        let layers: Vec<&Layer<T>> = self.layers().collect();
        let mut grads = Vec::with_capacity(layers.len());
        let mut upstream = output_grad.to_owned();
        for l in (0..layers.len()).rev() {
            let layer = layers[l];
            let mut delta = upstream;
            if layer.activation != Activation::Linear {
                let act = layer.activation;
                Zip::from(&mut delta)
                    .and(&cache.pre[l])
                    .and(&cache.post[l])
                    .for_each(|d, &z, &a| *d *= act.derivative(z, a));
            }
            let input = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            // dot may hand back column-major output; gradients are read as flat slices
            let weights = delta.t().dot(input).as_standard_layout().into_owned();
            let bias = delta.sum_axis(Axis(0));
            if l > 0 {
                upstream = delta.dot(&layer.weights);
            } else {
                upstream = Array2::zeros((0, 0));
            }
            grads.push(LayerGrads { weights, bias });
        }
        grads.reverse();
        Ok(NetGrads { layers: grads })
    }
}

fn layer_forward<T: Scalar>(layer: &Layer<T>, input: ArrayView2<T>) -> (Array2<T>, Array2<T>) {
    let mut z = input.dot(&layer.weights.t());
    z += &layer.bias;
    let a = if layer.activation == Activation::Linear {
        z.clone()
    } else {
        let act = layer.activation;
        z.mapv(|v| act.apply(v))
    };
    (z, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn linear(w: Array2<f64>, b: Array1<f64>) -> Layer<f64> {
        Layer::new(w, b, Activation::Linear).unwrap()
    }

    #[test]
    fn init_shapes_and_zero_bias() {
        let specs = [
            LayerSpec::new(3, 2, Activation::Tanh),
            LayerSpec::new(2, 3, Activation::Linear),
        ];
        let net: DenseNet<f64> = init_dense_net(&specs, 2, 7).unwrap();
        assert_eq!(net.encoder.len(), 1);
        assert_eq!(net.decoder.len(), 1);
        assert_eq!(net.encoder[0].weights.dim(), (2, 3));
        assert_eq!(net.decoder[0].weights.dim(), (3, 2));
        assert!(net.layers().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        let again: DenseNet<f64> = init_dense_net(&specs, 2, 7).unwrap();
        assert_eq!(net, again);
        let other: DenseNet<f64> = init_dense_net(&specs, 2, 8).unwrap();
        assert_ne!(net, other);
    }

    #[test]
    fn init_rejects_broken_chain() {
        let specs = [
            LayerSpec::new(3, 2, Activation::Linear),
            LayerSpec::new(5, 3, Activation::Linear),
        ];
        let err = init_dense_net::<f64>(&specs, 2, 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("layer 0") && msg.contains("layer 1"), "{msg}");
    }

    #[test]
    fn init_rejects_missing_latent() {
        let specs = autoencoder_specs(4, &[3], 2, Activation::Tanh);
        assert!(init_dense_net::<f64>(&specs, 5, 0).is_err());
    }

    #[test]
    fn autoencoder_specs_mirror() {
        let specs = autoencoder_specs(5, &[4, 3], 2, Activation::Tanh);
        let widths: Vec<_> = specs.iter().map(|s| (s.input_width, s.output_width)).collect();
        assert_eq!(widths, vec![(5, 4), (4, 3), (3, 2), (2, 3), (3, 4), (4, 5)]);
        let acts: Vec<_> = specs.iter().map(|s| s.activation).collect();
        assert_eq!(acts[2], Activation::Linear);
        assert_eq!(acts[5], Activation::Linear);
        assert_eq!(acts[0], Activation::Tanh);
        assert_eq!(acts[4], Activation::Tanh);
    }

    #[test]
    fn identity_network_is_identity() {
        let enc = linear(Array2::eye(3), Array1::zeros(3));
        let dec = linear(Array2::eye(3), Array1::zeros(3));
        let net = DenseNet::from_layers(vec![enc], vec![dec]).unwrap();
        let x = array![[1.0, -2.0, 3.5], [0.0, 1e-3, -7.0]];
        let (out, cache) = net.forward(x.view()).unwrap();
        assert_eq!(out, x);
        assert_eq!(cache.depth(), 2);
    }

    #[test]
    fn single_layer_arithmetic() {
        let layer = linear(array![[2.0]], array![1.0]);
        let (z, a) = layer_forward(&layer, array![[3.0]].view());
        assert_eq!(z, array![[7.0]]);
        assert_eq!(a, array![[7.0]]);

        let relu = Layer::new(array![[1.0]], array![0.0], Activation::Relu).unwrap();
        assert_eq!(layer_forward(&relu, array![[-2.0]].view()).1, array![[0.0]]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let specs = autoencoder_specs(4, &[], 2, Activation::Linear);
        let net: DenseNet<f64> = init_dense_net(&specs, 2, 1).unwrap();
        assert!(matches!(
            net.forward(Array2::zeros((2, 3)).view()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_output_grad_gives_zero_grads() {
        let specs = autoencoder_specs(4, &[3], 2, Activation::Tanh);
        let net: DenseNet<f64> = init_dense_net(&specs, 2, 3).unwrap();
        let x = Array2::from_shape_fn((5, 4), |(i, j)| (i as f64 - j as f64) * 0.3);
        let (_, cache) = net.forward(x.view()).unwrap();
        let g = net.backward(&cache, Array2::zeros((5, 4)).view()).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        for (gl, l) in g.layers.iter().zip(net.layers()) {
            assert_eq!(gl.weights.dim(), l.weights.dim());
            assert_eq!(gl.bias.dim(), l.bias.dim());
        }
    }

    #[test]
    fn backward_rejects_stale_cache() {
        let net: DenseNet<f64> =
            init_dense_net(&autoencoder_specs(4, &[3], 2, Activation::Tanh), 2, 3).unwrap();
        let other: DenseNet<f64> =
            init_dense_net(&autoencoder_specs(4, &[], 2, Activation::Tanh), 2, 3).unwrap();
        let x = Array2::zeros((2, 4));
        let (_, cache) = other.forward(x.view()).unwrap();
        assert!(net.backward(&cache, x.view()).is_err());
        let (_, cache) = net.forward(x.view()).unwrap();
        assert!(net.backward(&cache, Array2::zeros((3, 4)).view()).is_err());
    }

    #[test]
    fn column_major_input_gives_flat_gradients() {
        let net: DenseNet<f64> =
            init_dense_net(&autoencoder_specs(4, &[3], 2, Activation::Tanh), 2, 3).unwrap();
        let c = Array2::from_shape_fn((5, 4), |(i, j)| (i as f64 - j as f64 * 0.7).sin());
        let f = c.t().as_standard_layout().t().to_owned();
        assert!(!f.is_standard_layout());
        let grads = |x: &Array2<f64>| {
            let (out, cache) = net.forward(x.view()).unwrap();
            let g = net.backward(&cache, out.view()).unwrap();
            g.slices().concat()
        };
        assert_eq!(grads(&f), grads(&c));
    }

    #[test]
    fn activation_round_trips_through_strings() {
        for act in [
            Activation::Linear,
            Activation::Tanh,
            Activation::Relu,
            Activation::LeakyRelu { slope: 0.2 },
        ] {
            assert_eq!(act.to_string().parse::<Activation>().unwrap(), act);
        }
        assert_eq!("leaky_relu".parse::<Activation>().unwrap(), Activation::DEFAULT_LEAKY);
        assert!("sigmoid".parse::<Activation>().is_err());
    }

    #[test]
    fn f32_network_runs() {
        let specs = autoencoder_specs(3, &[4], 1, Activation::DEFAULT_LEAKY);
        let net: DenseNet<f32> = init_dense_net(&specs, 1, 5).unwrap();
        let x = Array2::<f32>::ones((2, 3));
        let (out, cache) = net.forward(x.view()).unwrap();
        let g = net.backward(&cache, out.view()).unwrap();
        assert_eq!(g.layers.len(), 4);
    }
}
