use ndarray::Array2;
use proptest::prelude::*;
use prae::data::{gen_linear, gen_separated, SeparatedSpec};
use prae::gates::{expected_gate, open_probability, GateBank, MU_MAX, MU_MIN};
use prae::prae::{brute_force_rae_linear, score_in_sample, train_prae, PraeConfig, Trainer, Variant};
use prae::rng::stream;
use prae::{LabeledDataset32, PraeModel32};

#[test]
fn gate_moments_agree_with_sampling() {
    let mut rng = stream(123, 0);
    for &(mu, sigma) in &[(-0.5, 0.5), (0.2, 0.3), (0.5, 0.5), (0.9, 1.0), (1.6, 0.5)] {
        let bank = GateBank::<f64>::new(200_000, sigma, mu).unwrap();
        let s = bank.sample(&mut rng);
        let n = s.z.len() as f64;
        let mean = s.z.iter().sum::<f64>() / n;
        let open = s.z.iter().filter(|&&z| z > 0.0).count() as f64 / n;
        assert!((mean - expected_gate(mu, sigma)).abs() < 5e-3, "mu={mu} sigma={sigma}");
        assert!((open - open_probability(mu, sigma)).abs() < 5e-3, "mu={mu} sigma={sigma}");
    }
}

fn separated(seed: u64) -> Array2<f64> {
    gen_separated::<f64>(
        SeparatedSpec {
            n_in: 7,
            n_out: 3,
            dim: 3,
            intrinsic: 1,
            spread: 1.5,
            separation: 2.0,
        },
        seed,
    )
    .unwrap()
    .x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn oracle_keeps_more_rows_as_lambda_grows(seed in 0u64..1000, lo in 0.0..3.0f64, step in 0.0..3.0f64) {
        let x = separated(seed);
        let a = brute_force_rae_linear(x.view(), lo, 1, false, false).unwrap();
        let b = brute_force_rae_linear(x.view(), lo + step, 1, false, false).unwrap();
        let count = |v: &[bool]| v.iter().filter(|&&s| s).count();
        prop_assert!(count(&a.best_b) <= count(&b.best_b));
        // the optimum of a pointwise smaller objective is no larger
        prop_assert!(b.best_loss <= a.best_loss + 1e-9);
    }

    #[test]
    fn training_keeps_mu_in_range(seed in 0u64..50, lambda in 0.0..5.0f64) {
        let data = gen_linear::<f64>(40, 6, 2, 0.25, 1e-4, seed).unwrap();
        let config = PraeConfig {
            lambda,
            epochs: 20,
            learning_rate: Some(5e-2),
            seed,
            ..PraeConfig::linear(2)
        };
        let model = train_prae(&data, &config).unwrap();
        prop_assert!(model.gates.mu.iter().all(|&m| (MU_MIN..=MU_MAX).contains(&m)));
        let scores = score_in_sample(&model).scores;
        prop_assert!(scores.iter().all(|&s| (0.0..=1.0).contains(&s)));
        prop_assert_eq!(model.log.len(), 20);
    }
}

#[test]
fn l0_and_l1_coincide_without_penalty() {
    let data = gen_linear::<f64>(60, 8, 2, 0.2, 1e-6, 4).unwrap();
    let base = PraeConfig {
        lambda: 0.0,
        epochs: 15,
        learning_rate: Some(1e-2),
        seed: 9,
        ..PraeConfig::linear(2)
    };
    let l0 = train_prae(&data, &PraeConfig { variant: Variant::L0, ..base.clone() }).unwrap();
    let l1 = train_prae(&data, &PraeConfig { variant: Variant::L1, ..base }).unwrap();
    assert_eq!(l0.log, l1.log);
    assert_eq!(l0.gates, l1.gates);
    assert_eq!(l0.net, l1.net);
}

#[test]
fn single_precision_trains() {
    let data: LabeledDataset32 = gen_linear::<f32>(80, 10, 2, 0.25, 1e-6, 1).unwrap();
    let config = PraeConfig {
        lambda: 0.2,
        epochs: 200,
        batch_size: Some(16),
        learning_rate: Some(1e-2),
        ..PraeConfig::linear(2)
    };
    let model: PraeModel32 = train_prae(&data, &config).unwrap();
    let labels = data.labels.as_ref().unwrap();
    let auc = prae::metrics::roc_auc(&score_in_sample(&model).scores, labels).unwrap();
    assert!(auc > 0.9, "f32 auc {auc}");
}

#[test]
fn stepping_is_resumable() {
    let data = gen_linear::<f64>(50, 6, 2, 0.2, 1e-6, 2).unwrap();
    let config = PraeConfig {
        epochs: 6,
        learning_rate: Some(1e-2),
        ..PraeConfig::linear(2)
    };
    let whole = train_prae(&data, &config).unwrap();
    let mut t = Trainer::new(data.x.view(), &config).unwrap();
    for _ in 0..6 {
        t.run_epoch().unwrap();
    }
    assert_eq!(t.into_model(), whole);
}
