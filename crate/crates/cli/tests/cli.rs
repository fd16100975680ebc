use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use prae::prae::{PraeConfig, Trainer};
use prae_cli::model_file::ModelFile;

fn prae(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prae"))
        .args(args)
        .current_dir(dir)
        .env_remove("PRAE_SEED")
        .output()
        .expect("spawn prae")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = prae(dir, args);
    assert!(
        out.status.success(),
        "prae {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_linear(dir: &Path) {
    ok(
        dir,
        &[
            "synth", "linear", "--n", "80", "--dim", "8", "--intrinsic", "2", "--r", "0.25",
            "--out", "d.csv", "--seed", "5",
        ],
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(prae(d, &["--help"]).status.code(), Some(0));
    assert_eq!(prae(d, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(prae(d, &["train", "--lambda", "x", "--model-out", "m.json"]).status.code(), Some(2));
    assert_eq!(prae(d, &["train", "--model-out", "m.json"]).status.code(), Some(1));
    assert_eq!(prae(d, &["score", "--model", "missing.json", "--data", "d.csv", "--out", "s.csv"]).status.code(), Some(1));
    let out = prae(d, &["oracle", "--n", "21"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("refusing"));
}

#[test]
fn model_file_round_trips_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_linear(d);
    ok(d, &["train", "--data", "d.csv", "--epochs", "5", "--arch", "6,4", "--latent", "2", "--variant", "l0", "--standardize", "--model-out", "m.json"]);
    let first = fs::read_to_string(d.join("m.json")).unwrap();
    let file = ModelFile::load(&d.join("m.json")).unwrap();
    let model = file.to_model().unwrap();
    ModelFile::from_model(&model, file.standardize.clone())
        .save(&d.join("again.json"))
        .unwrap();
    assert_eq!(first, fs::read_to_string(d.join("again.json")).unwrap());
}

#[test]
fn zero_epochs_saves_the_initialisation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_linear(d);
    ok(d, &["train", "--data", "d.csv", "--epochs", "0", "--latent", "2", "--seed", "8", "--model-out", "m.json"]);
    let saved = ModelFile::load(&d.join("m.json")).unwrap().to_model().unwrap();
    let data = prae::data::load_csv::<f64>(&d.join("d.csv"), Some("label")).unwrap();
    let config = PraeConfig {
        epochs: 0,
        latent_dim: 2,
        seed: 8,
        ..PraeConfig::default()
    };
    let init = Trainer::new(data.x.view(), &config).unwrap().into_model();
    assert_eq!(saved.net, init.net);
    assert_eq!(saved.gates, init.gates);
}

#[test]
fn scoring_modes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_linear(d);
    ok(d, &["train", "--data", "d.csv", "--epochs", "30", "--latent", "2", "--arch", "none", "--activation", "linear", "--lr", "1e-2", "--lambda", "0.3", "--model-out", "m.json"]);
    ok(d, &["score", "--model", "m.json", "--data", "d.csv", "--mode", "in", "--out", "in.csv"]);
    ok(d, &["score", "--model", "m.json", "--data", "d.csv", "--mode", "out", "--out", "out.csv"]);
    let model = ModelFile::load(&d.join("m.json")).unwrap().to_model().unwrap();
    let scores = prae_cli::commands::load_scores(&d.join("in.csv")).unwrap();
    let expect: Vec<f64> = model.gates.mu.iter().map(|m| 1.0 - m.clamp(0.0, 1.0)).collect();
    assert_eq!(scores, expect);
    let out = prae_cli::commands::load_scores(&d.join("out.csv")).unwrap();
    assert_eq!(out.len(), 80);
    assert!(fs::read_to_string(d.join("in.csv")).unwrap().starts_with("row_index,score\n0,"));

    // new data of a different size only has reconstruction scores
    ok(d, &["synth", "linear", "--n", "30", "--dim", "8", "--intrinsic", "2", "--out", "new.csv", "--seed", "6"]);
    let err = prae(d, &["score", "--model", "m.json", "--data", "new.csv", "--mode", "in", "--out", "x.csv"]);
    assert_eq!(err.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&err.stderr).contains("in-sample"));
    ok(d, &["score", "--model", "m.json", "--data", "new.csv", "--mode", "out", "--out", "x.csv"]);
}

#[test]
fn eval_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("s.csv"), "row_index,score\n0,0.9\n1,0.1\n2,0.8\n3,0.2\n").unwrap();
    fs::write(d.join("y.csv"), "label\n1\n0\n1\n0\n").unwrap();
    ok(d, &["eval", "--scores", "s.csv", "--labels", "y.csv", "--out", "e.json"]);
    let report: prae::metrics::EvalReport =
        serde_json::from_str(&fs::read_to_string(d.join("e.json")).unwrap()).unwrap();
    assert_eq!((report.auc, report.max_f1), (1.0, 1.0));

    fs::write(d.join("one.csv"), "label\n1\n1\n1\n1\n").unwrap();
    assert_eq!(prae(d, &["eval", "--scores", "s.csv", "--labels", "one.csv"]).status.code(), Some(1));
}

#[test]
fn arbitrary_numeric_csv_trains() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("height,weight,age,score\n");
    for i in 0..40 {
        let t = i as f64;
        csv.push_str(&format!("{},{},{},{}\n", 150.0 + t, 50.0 + 0.5 * t, 20 + i % 7, (t * 0.3).sin()));
    }
    fs::write(d.join("plain.csv"), csv).unwrap();
    let stdout = ok(d, &["train", "--data", "plain.csv", "--epochs", "10", "--standardize", "--model-out", "m.json", "--record-out", "r.json"]);
    assert!(stdout.contains("final loss"));
    assert!(stdout.contains("open gates"));
    ok(d, &["score", "--model", "m.json", "--data", "plain.csv", "--mode", "out", "--out", "s.csv"]);
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(record["config_hash"].as_str().unwrap().len(), 64);
    assert!(record.get("metrics").is_none());
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |seed: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_prae"))
            .args(["synth", "swiss", "--n-in", "20", "--n-out", "5", "--out", out])
            .current_dir(d)
            .env("PRAE_SEED", seed)
            .output()
            .unwrap();
        assert!(o.status.success());
        fs::read(d.join(out)).unwrap()
    };
    assert_eq!(run("3", "a.csv"), run("3", "b.csv"));
    assert_ne!(run("3", "a.csv"), run("4", "c.csv"));
}

#[test]
fn sweep_and_oracle_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_linear(d);
    let stdout = ok(d, &["sweep", "--data", "d.csv", "--lambdas", "0.5", "--epochs", "5", "--latent", "2", "--out", "t.csv"]);
    assert!(stdout.contains("ME estimate"));
    let table = fs::read_to_string(d.join("t.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "lambda,repeat,f1,max_f1,val_mse,me_estimate");
    assert_eq!(lines.len(), 2);

    let stdout = ok(d, &["oracle", "--repeats", "2", "--lambda", "0", "--epochs", "500", "--out", "o.json"]);
    assert!(stdout.contains("match rate 2/2"));
}
