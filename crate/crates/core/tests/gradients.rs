use ndarray::Array2;
use proptest::prelude::*;
use prae::gates::Regularizer;
use prae::nn::{autoencoder_specs, init_dense_net, Activation, DenseNet};
use prae::prae::{batch_gradients, PraeConfig, Trainer, Variant};

const H: f64 = 1e-6;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn nudge(net: &mut DenseNet<f64>, k: usize, d: f64) {
    let mut left = k;
    for s in net.param_slices_mut() {
        if left < s.len() {
            s[left] += d;
            return;
        }
        left -= s.len();
    }
    panic!("parameter {k} out of range");
}

fn grid(rows: usize, cols: usize, phase: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |(i, j)| ((i * cols + j) as f64 * 0.77 + phase).sin())
}

fn check_net(act: Activation, seed: u64) {
    let specs = autoencoder_specs(5, &[4, 3], 2, act);
    let mut net = init_dense_net::<f64>(&specs, 2, seed).unwrap();
    let x = grid(4, 5, seed as f64);
    let g = grid(4, 5, 1.0 + seed as f64);
    let loss = |net: &DenseNet<f64>| (net.forward(x.view()).unwrap().0 * &g).sum();
    let (_, cache) = net.forward(x.view()).unwrap();
    let analytic = net.backward(&cache, g.view()).unwrap().slices().concat();
    assert_eq!(analytic.len(), net.param_count());
    for k in 0..analytic.len() {
        nudge(&mut net, k, H);
        let up = loss(&net);
        nudge(&mut net, k, -2.0 * H);
        let down = loss(&net);
        nudge(&mut net, k, H);
        let fd = (up - down) / (2.0 * H);
        assert!(
            rel_err(analytic[k], fd) < 1e-4,
            "{act:?} param {k}: backward {} vs finite difference {fd}",
            analytic[k]
        );
    }
}

#[test]
fn backward_matches_finite_differences() {
    for (i, act) in [
        Activation::Linear,
        Activation::Tanh,
        Activation::Relu,
        Activation::DEFAULT_LEAKY,
    ]
    .into_iter()
    .enumerate()
    {
        check_net(act, 10 + i as u64);
    }
}

proptest! {
    #[test]
    fn regularizer_gradient_matches_difference(mu in -1.0..2.0f64, sigma in 0.05..2.0f64) {
        for reg in [Regularizer::L0, Regularizer::L1] {
            let (_, g) = reg.term(mu, sigma);
            let fd = (reg.term(mu + H, sigma).0 - reg.term(mu - H, sigma).0) / (2.0 * H);
            prop_assert!((g - fd).abs() < 1e-6, "{reg:?} mu={mu} sigma={sigma}: {g} vs {fd}");
        }
    }

    #[test]
    fn l1_penalty_is_bounded_by_open_probability(mu in -1.0..2.0f64, sigma in 0.05..2.0f64) {
        let (v, g) = Regularizer::L1.term(mu, sigma);
        let (p, _) = Regularizer::L0.term(mu, sigma);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!((0.0..=1.0).contains(&g));
        // E[z] <= P(z > 0) because z <= 1
        prop_assert!(v <= p + 1e-12);
    }
}

fn frozen_noise_check(variant: Variant, normalize: bool) {
    let x = grid(10, 4, 0.3);
    let config = PraeConfig {
        variant,
        lambda: 0.8,
        hidden_widths: vec![3],
        latent_dim: 2,
        hidden_activation: Activation::Tanh,
        normalize_recon: normalize,
        epochs: 0,
        seed: 2,
        ..PraeConfig::default()
    };
    let mut model = Trainer::new(x.view(), &config).unwrap().into_model();
    for (i, mu) in model.gates.mu.iter_mut().enumerate() {
        *mu = -0.3 + 0.17 * i as f64;
    }
    let rows = [7, 1, 4, 0, 9, 2];
    let noise = [0.05, -0.23, 0.31, 0.42, -0.05, 0.27];
    let base = batch_gradients(&model, x.view(), &rows, &noise).unwrap();
    for (k, &i) in rows.iter().enumerate() {
        let v = model.gates.mu[i] + noise[k];
        assert!(v.abs() > 1e-3 && (v - 1.0).abs() > 1e-3, "probe too close to a clamp edge");
        let mu0 = model.gates.mu[i];
        model.gates.mu[i] = mu0 + H;
        let up = batch_gradients(&model, x.view(), &rows, &noise).unwrap().loss;
        model.gates.mu[i] = mu0 - H;
        let down = batch_gradients(&model, x.view(), &rows, &noise).unwrap().loss;
        model.gates.mu[i] = mu0;
        let fd = (up - down) / (2.0 * H);
        assert!(
            rel_err(base.mu[k], fd) < 1e-5,
            "{variant} row {i}: {} vs {fd}",
            base.mu[k]
        );
    }
}

#[test]
fn frozen_noise_mu_gradient() {
    for variant in [Variant::L0, Variant::L1] {
        frozen_noise_check(variant, false);
        frozen_noise_check(variant, true);
    }
}

#[test]
fn frozen_noise_net_gradient() {
    let x = grid(8, 4, 0.9);
    let config = PraeConfig {
        variant: Variant::L1,
        hidden_widths: vec![3],
        latent_dim: 2,
        hidden_activation: Activation::Tanh,
        epochs: 0,
        ..PraeConfig::default()
    };
    let mut model = Trainer::new(x.view(), &config).unwrap().into_model();
    let rows = [0, 2, 3, 5, 7];
    let noise = [0.2, -0.1, 0.3, -0.4, 0.05];
    let base = batch_gradients(&model, x.view(), &rows, &noise).unwrap();
    let analytic = base.net.slices().concat();
    for k in (0..analytic.len()).step_by(3) {
        nudge(&mut model.net, k, H);
        let up = batch_gradients(&model, x.view(), &rows, &noise).unwrap().loss;
        nudge(&mut model.net, k, -2.0 * H);
        let down = batch_gradients(&model, x.view(), &rows, &noise).unwrap().loss;
        nudge(&mut model.net, k, H);
        let fd = (up - down) / (2.0 * H);
        assert!(rel_err(analytic[k], fd) < 1e-4, "param {k}: {} vs {fd}", analytic[k]);
    }
}
