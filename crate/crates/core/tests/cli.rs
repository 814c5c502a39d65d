//! End-to-end runs of the `rotsmooth` binary.

use std::path::Path;
use std::process::{Command, Output};

use rotsmooth::circuit::{CircuitSpec, GateKind, GateOp};
use rotsmooth::cli::commands::{ATTACK_HEADER, METRICS_HEADER, SWEEP_HEADER};
use rotsmooth::encode::{EncodingKind, EncodingScheme};
use rotsmooth::vqc::{save_model, ClassifierModel};
use serde_json::Value;
use tempfile::TempDir;

fn rotsmooth(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rotsmooth"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("ROTSMOOTH_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn quick_train(dir: &Path) {
    let out = rotsmooth(dir, &["train", "--set", "train.epochs=3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

/// Angle-encoded 3-qubit model whose read-out ignores the data: P(class 1) = p1.
fn constant_model(dir: &Path, p1: f64) -> std::path::PathBuf {
    let spec = CircuitSpec::new(4, 1, vec![GateOp::rotation(GateKind::Ry, 3, 0)]).unwrap();
    let enc = EncodingScheme {
        kind: EncodingKind::Angle,
        num_qubits: 3,
    };
    let model = ClassifierModel::new(spec, vec![2.0 * p1.sqrt().asin()], enc).unwrap();
    let path = dir.join("constant.json");
    save_model(&model, &path).unwrap();
    path
}

fn write_inputs(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("inputs.json");
    std::fs::write(&path, "[[0.1, 0.5, 0.9], [0.3, 0.3, 0.7]]").unwrap();
    path
}

#[test]
fn train_reaches_ninety_percent_and_is_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(code(&rotsmooth(a.path(), &["train"])), 0);
    assert_eq!(code(&rotsmooth(b.path(), &["train"])), 0);

    let (header, rows) = read_csv(&a.path().join("metrics.csv"));
    assert_eq!(header, METRICS_HEADER);
    let last: f64 = rows.last().unwrap()[2].parse().unwrap();
    assert!(last >= 0.90, "final train accuracy {last}");

    let ma = std::fs::read(a.path().join("model.json")).unwrap();
    let mb = std::fs::read(b.path().join("model.json")).unwrap();
    assert_eq!(ma, mb);
    let manifest = read_json(&a.path().join("manifest_train.json"));
    assert_eq!(manifest["master_seed"], 7);
    assert!(manifest["config_sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn missing_csv_reports_the_path() {
    let dir = TempDir::new().unwrap();
    let out = rotsmooth(
        dir.path(),
        &["train", "--set", r#"dataset={"kind":"csv","path":"/no/such/data.csv"}"#],
    );
    assert_ne!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/data.csv"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&rotsmooth(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&rotsmooth(dir.path(), &["train", "--set", "no_such_key=1"])), 1);
    assert_eq!(code(&rotsmooth(dir.path(), &["sweep"])), 1, "sweep without a model");
}

#[test]
fn sweep_writes_every_cell_and_a_stable_chart() {
    let dir = TempDir::new().unwrap();
    quick_train(dir.path());
    let sweep = [
        "sweep",
        "--set",
        "sweep.h_values=[0.1, 0.4]",
        "--set",
        "sweep.shot_sizes=[10, 100, 1000]",
        "--set",
        "sweep.repeats=2",
    ];
    assert_eq!(code(&rotsmooth(dir.path(), &sweep)), 0);
    let (header, rows) = read_csv(&dir.path().join("sweep.csv"));
    assert_eq!(header, SWEEP_HEADER);
    assert_eq!(rows.len(), 2 * 3 * 2);
    for row in &rows {
        for cell in &row[3..] {
            let acc: f64 = cell.parse().unwrap();
            assert!((0.0..=1.0).contains(&acc));
        }
    }
    let first = std::fs::read(dir.path().join("sweep.svg")).unwrap();
    assert_eq!(code(&rotsmooth(dir.path(), &sweep)), 0);
    let second = std::fs::read(dir.path().join("sweep.svg")).unwrap();
    assert_eq!(first, second);
    let svg = String::from_utf8(first).unwrap();
    assert!(svg.starts_with("<svg"));
    // One series per h plus the noiseless baseline.
    assert_eq!(svg.matches(r#"class="legend-entry""#).count(), 3);
}

#[test]
fn certify_constant_model_reports_expected_radius() {
    let dir = TempDir::new().unwrap();
    let model = constant_model(dir.path(), 0.1);
    let inputs = write_inputs(dir.path());
    let m = model.to_str().unwrap();
    let i = inputs.to_str().unwrap();

    // B = 9 and t = 0.4: radius (3 − 1)·0.064.
    let out = rotsmooth(dir.path(), &["certify", "--model", m, "--input", i, "--set", "noise.t=0.4"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let report = read_json(&dir.path().join("reports/report_input_0.json"));
    assert_eq!(report["verdict"], "certified");
    assert!((report["B"].as_f64().unwrap() - 9.0).abs() < 1e-9);
    assert!((report["tau_d"].as_f64().unwrap() - 0.128).abs() < 1e-9);
    let (_, rows) = read_csv(&dir.path().join("certify.csv"));
    assert_eq!(rows.len(), 2);

    // At t = 0.5 the radius would be 0.25, but the smallest noisy probability
    // 0.1 sits below t³ = 0.125, so the certificate is withheld.
    let out = rotsmooth(dir.path(), &["certify", "--model", m, "--input", i, "--set", "noise.t=0.5"]);
    assert_eq!(code(&out), 2);
    let report = read_json(&dir.path().join("reports/report_input_0.json"));
    assert_eq!(report["verdict"], "not_certified");
    assert_eq!(report["t_lower_bound_ok"], false);

    let out = rotsmooth(dir.path(), &["certify", "--model", m, "--input", i, "--set", "noise.t=0"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn certify_tie_is_not_certified() {
    let dir = TempDir::new().unwrap();
    let model = constant_model(dir.path(), 0.5);
    let inputs = write_inputs(dir.path());
    let out = rotsmooth(
        dir.path(),
        &["certify", "--model", model.to_str().unwrap(), "--input", inputs.to_str().unwrap()],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn attack_at_full_radius_flips_some_inputs() {
    let dir = TempDir::new().unwrap();
    quick_train(dir.path());
    let out = rotsmooth(dir.path(), &["attack", "--tau-d", "1.0", "--set", "attack.budget=300"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("attack.csv"));
    assert_eq!(header, ATTACK_HEADER);
    assert_eq!(rows.len(), 50);
    let summary = read_json(&dir.path().join("attack_summary.json"));
    assert!(summary["flip_rate_attack"].as_f64().unwrap() > 0.0);
}

#[test]
fn attack_on_empty_test_split_writes_no_rows() {
    let dir = TempDir::new().unwrap();
    let out = rotsmooth(dir.path(), &["train", "--set", "train.epochs=2", "--set", "test_fraction=0"]);
    assert_eq!(code(&out), 0);
    let out = rotsmooth(dir.path(), &["attack", "--set", "test_fraction=0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("attack.csv"));
    assert_eq!(header, ATTACK_HEADER);
    assert!(rows.is_empty());
}

#[test]
fn seed_environment_variable_overrides_master_seed() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rotsmooth"))
        .args(["train", "--set", "train.epochs=1", "--out"])
        .arg(dir.path())
        .env("ROTSMOOTH_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let manifest = read_json(&dir.path().join("manifest_train.json"));
    assert_eq!(manifest["master_seed"], 99);
    assert_eq!(manifest["config"]["master_seed"], 99);
}

#[test]
fn audit_writes_report() {
    let dir = TempDir::new().unwrap();
    quick_train(dir.path());
    let out = rotsmooth(dir.path(), &["audit", "--pairs", "20"]);
    assert!([0, 2].contains(&code(&out)));
    let report = read_json(&dir.path().join("audit.json"));
    assert_eq!(report["n_pairs"], 20);
    assert_eq!(code(&out) == 0, report["findings"].as_array().unwrap().is_empty());
}

mod schema {
    use super::*;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn trained() -> &'static TempDir {
        static DIR: OnceLock<TempDir> = OnceLock::new();
        DIR.get_or_init(|| {
            let dir = TempDir::new().unwrap();
            quick_train(dir.path());
            dir
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn sweep_csv_keeps_its_header(
            h in prop::collection::vec(0.001f64..1.0, 1..3),
            shots in prop::collection::vec(1u64..500, 1..3),
            repeats in 1usize..3,
        ) {
            let model = trained().path().join("model.json");
            let out = TempDir::new().unwrap();
            let args = [
                "rotsmooth".to_string(),
                "sweep".into(),
                "--model".into(),
                model.to_string_lossy().into_owned(),
                "--out".into(),
                out.path().to_string_lossy().into_owned(),
                "--set".into(),
                format!("sweep.h_values={}", serde_json::to_string(&h).unwrap()),
                "--set".into(),
                format!("sweep.shot_sizes={}", serde_json::to_string(&shots).unwrap()),
                "--set".into(),
                format!("sweep.repeats={repeats}"),
            ];
            prop_assert_eq!(rotsmooth::cli::run(args), 0);
            let (header, rows) = read_csv(&out.path().join("sweep.csv"));
            prop_assert_eq!(header, SWEEP_HEADER);
            prop_assert_eq!(rows.len(), h.len() * shots.len() * repeats);
            for row in rows {
                prop_assert_eq!(row.len(), SWEEP_HEADER.len());
                prop_assert!(row.iter().all(|c| c.parse::<f64>().is_ok()));
            }
        }
    }
}
