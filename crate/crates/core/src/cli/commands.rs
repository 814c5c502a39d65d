//! Subcommand implementations. Each returns the process exit status.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{sha256_hex, ExperimentConfig, SweepConfig};
use super::svg::{emit_svg, Axes, Series};
use crate::certify::{
    attack_search_with, audit_dp_with, certify_input, AttackResult, CertificationReport, Provenance, Verdict,
};
use crate::encode::{Dataset, EncodingScheme, MinMaxScaler};
use crate::error::{Error, Result};
use crate::qla::DensityMatrix;
use crate::rotnoise::{noisy_predict_with_samples, sample_noise_batch, NoiseConfig, NoiseSample, NoisyEffects};
use crate::seed;
use crate::stats::{mean, spread};
use crate::vqc::{
    accuracy, argmax, load_model, save_model, train_with_history, ClassifierModel, EpochRecord, Sampling, TrainConfig,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

// Seed streams under the master seed.
const STREAM_SPLIT: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_SWEEP: u64 = 4;
const STREAM_CERTIFY: u64 = 5;
const STREAM_ATTACK: u64 = 6;
const STREAM_AUDIT: u64 = 7;

pub const SWEEP_HEADER: [&str; 5] = ["h", "shots", "repeat", "acc_noiseless", "acc_noisy"];
pub const METRICS_HEADER: [&str; 4] = ["epoch", "loss", "train_accuracy", "learning_rate"];
pub const ATTACK_HEADER: [&str; 10] = [
    "index",
    "label",
    "verdict",
    "tau_certified",
    "flipped_inside",
    "margin_inside",
    "tau_attack",
    "flipped_attack",
    "margin_attack",
    "evaluations",
];

pub fn split_seed(cfg: &ExperimentConfig) -> u64 {
    seed::derive(cfg.master_seed, STREAM_SPLIT)
}

pub fn init_seed(cfg: &ExperimentConfig) -> u64 {
    seed::derive(cfg.master_seed, STREAM_INIT)
}

pub fn train_seed(cfg: &ExperimentConfig) -> u64 {
    seed::derive_path(cfg.master_seed, &[STREAM_TRAIN, cfg.train.seed])
}

/// Seed shared by certification and attacks so both see the same noise draws.
pub fn certify_seed(cfg: &ExperimentConfig) -> u64 {
    seed::derive(cfg.master_seed, STREAM_CERTIFY)
}

/// Seed of one sweep cell; independent of h so every h sees the same shots.
pub fn sweep_cell_seed(cfg: &ExperimentConfig, shots_index: usize, repeat: usize) -> u64 {
    seed::derive_path(cfg.master_seed, &[STREAM_SWEEP, shots_index as u64, repeat as u64])
}

/// Deterministic (train, test) split of the configured dataset.
pub fn load_split(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    cfg.dataset.load()?.split(cfg.test_fraction, split_seed(cfg))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<String> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(bytes))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn csv_bytes<R: IntoIterator<Item = Vec<String>>>(header: &[&str], rows: R) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv buffer: {e}")))
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    tool_version: &'a str,
    master_seed: u64,
    seeds: BTreeMap<&'a str, u64>,
    config_sha256: String,
    config: &'a ExperimentConfig,
    wall_time_secs: f64,
    outputs: BTreeMap<String, String>,
    summary: Value,
}

fn write_manifest(
    cfg: &ExperimentConfig,
    command: &str,
    seeds: BTreeMap<&str, u64>,
    started: Instant,
    outputs: BTreeMap<String, String>,
    summary: Value,
) -> Result<()> {
    let manifest = Manifest {
        command,
        tool_version: TOOL_VERSION,
        master_seed: cfg.master_seed,
        seeds,
        config_sha256: cfg.sha256()?,
        config: cfg,
        wall_time_secs: started.elapsed().as_secs_f64(),
        outputs,
        summary,
    };
    write_json(&cfg.output_dir.join(format!("manifest_{command}.json")), &manifest)?;
    Ok(())
}

pub fn default_model_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join("model.json")
}

pub struct TrainOutcome {
    pub model: ClassifierModel,
    pub history: Vec<EpochRecord>,
    pub train: Dataset,
    pub test: Dataset,
}

/// The training pipeline behind `train`: split, fit the scaler on the
/// training part, initialise the default ansatz and run gradient descent.
pub fn train_model(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    let (train, test) = load_split(cfg)?;
    if train.is_empty() {
        return Err(Error::InvalidInput("training split is empty".into()));
    }
    let scheme = EncodingScheme::for_dimension(cfg.encoding, train.dim())?;
    let model = ClassifierModel::with_default_ansatz(scheme, cfg.ansatz_depth, init_seed(cfg))?
        .with_scaler(Some(MinMaxScaler::fit(&train)?));
    let tcfg = TrainConfig {
        seed: train_seed(cfg),
        ..cfg.train.clone()
    };
    let (model, history) = train_with_history(&model, &train, &tcfg)?;
    Ok(TrainOutcome {
        model,
        history,
        train,
        test,
    })
}

/// Trains the classifier and writes `model.json`, `metrics.csv` and a manifest.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<i32> {
    let started = Instant::now();
    ensure_dir(&cfg.output_dir)?;
    let TrainOutcome {
        model: trained,
        history,
        train,
        test,
    } = train_model(cfg)?;

    let model_path = default_model_path(cfg);
    let mut outputs = BTreeMap::new();
    save_model(&trained, &model_path)?;
    let model_bytes = fs::read(&model_path).map_err(|e| Error::io(&model_path, e))?;
    outputs.insert("model.json".to_string(), sha256_hex(&model_bytes));

    let rows = history.iter().map(|r| {
        vec![
            r.epoch.to_string(),
            r.loss.to_string(),
            r.train_accuracy.to_string(),
            r.learning_rate.to_string(),
        ]
    });
    let metrics = csv_bytes(&METRICS_HEADER, rows)?;
    outputs.insert(
        "metrics.csv".to_string(),
        write_file(&cfg.output_dir.join("metrics.csv"), &metrics)?,
    );

    let train_acc = history.last().map_or(0.0, |r| r.train_accuracy);
    let test_acc = if test.is_empty() {
        None
    } else {
        Some(accuracy(&trained, &test, Sampling::Exact, 0)?)
    };
    println!(
        "trained {} epochs on {} samples: loss {:.4}, train accuracy {:.4}{}",
        history.len(),
        train.len(),
        history.last().map_or(f64::NAN, |r| r.loss),
        train_acc,
        test_acc.map_or(String::new(), |a| format!(", test accuracy {a:.4}"))
    );
    let seeds = BTreeMap::from([
        ("split", split_seed(cfg)),
        ("init", init_seed(cfg)),
        ("train", train_seed(cfg)),
    ]);
    let summary = json!({
        "train_accuracy": train_acc,
        "test_accuracy": test_acc,
        "final_loss": history.last().map(|r| r.loss),
        "n_train": train.len(),
        "n_test": test.len(),
    });
    write_manifest(cfg, "train", seeds, started, outputs, summary)?;
    Ok(0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub h: f64,
    pub shots: u64,
    pub repeat: usize,
    pub acc_noiseless: f64,
    pub acc_noisy: f64,
}

fn noisy_accuracy(
    model: &ClassifierModel,
    states: &[(DensityMatrix, usize)],
    noise: Option<&NoiseConfig>,
    n_noise: usize,
    shots: u64,
    cell_seed: u64,
) -> Result<f64> {
    let n = model.num_data_qubits();
    let hits: usize = states
        .iter()
        .enumerate()
        .map(|(i, (sigma, label))| {
            let seed = seed::derive(cell_seed, i as u64);
            let samples = match noise {
                Some(cfg) => sample_noise_batch(cfg, n_noise, seed)?,
                None => vec![NoiseSample::zeros(n)?; n_noise],
            };
            let probs = noisy_predict_with_samples(model, sigma, &samples, Sampling::Shots(shots), seed)?;
            Ok(usize::from(argmax(&probs) == *label))
        })
        .sum::<Result<usize>>()?;
    Ok(hits as f64 / states.len() as f64)
}

/// Test accuracy with and without rotation noise for every (h, shots, repeat).
///
/// Noiseless and noisy accuracies in a cell share their shot streams, and
/// cells with the same (shots, repeat) share seeds across h.
pub fn sweep_rows(
    model: &ClassifierModel,
    test: &Dataset,
    cfg: &ExperimentConfig,
    sweep: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if test.is_empty() {
        return Err(Error::InvalidInput("sweep needs a non-empty test split".into()));
    }
    let states: Vec<(DensityMatrix, usize)> = test
        .features
        .iter()
        .zip(&test.labels)
        .map(|(x, &y)| Ok((model.encode_features(x)?, y)))
        .collect::<Result<_>>()?;
    let n = model.num_data_qubits();
    let mut cells = Vec::new();
    for &h in &sweep.h_values {
        for (si, &shots) in sweep.shot_sizes.iter().enumerate() {
            for r in 0..sweep.repeats {
                cells.push((h, si, shots, r));
            }
        }
    }
    let run = || {
        cells
            .par_iter()
            .map(|&(h, si, shots, repeat)| {
                let noise = NoiseConfig::uniform(n, h, cfg.noise.t);
                noise.validate()?;
                let cell = sweep_cell_seed(cfg, si, repeat);
                Ok(SweepRow {
                    h,
                    shots,
                    repeat,
                    acc_noiseless: noisy_accuracy(model, &states, None, sweep.n_noise, shots, cell)?,
                    acc_noisy: noisy_accuracy(model, &states, Some(&noise), sweep.n_noise, shots, cell)?,
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    if sweep.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(sweep.workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)
    } else {
        run()
    }
}

/// Label like "h=2π/2^4" for powers of two, else the plain value.
pub fn h_label(h: f64) -> String {
    let k = (2.0 * PI / h).log2();
    if (k - k.round()).abs() < 1e-9 && k.round() >= 0.0 {
        format!("h=2π/2^{}", k.round() as i64)
    } else {
        format!("h={h:.4e}")
    }
}

/// Per-h chart: mean noisy accuracy against shots with the spread over
/// repeats as error bars, plus the noiseless reference.
pub fn sweep_chart(rows: &[SweepRow], sweep: &SweepConfig) -> Result<String> {
    let cell = |h: f64, shots: u64, pick: fn(&SweepRow) -> f64| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.h == h && r.shots == shots)
            .map(pick)
            .collect()
    };
    let mut series = Vec::new();
    for &h in &sweep.h_values {
        let mut pts = Vec::new();
        let mut errs = Vec::new();
        for &s in &sweep.shot_sizes {
            let v = cell(h, s, |r| r.acc_noisy);
            pts.push((s as f64, mean(&v).unwrap_or(0.0)));
            errs.push(spread(&v).unwrap_or(0.0));
        }
        series.push(Series::new(h_label(h), pts).with_errors(errs));
    }
    let h0 = sweep.h_values[0];
    let pts = sweep
        .shot_sizes
        .iter()
        .map(|&s| (s as f64, mean(&cell(h0, s, |r| r.acc_noiseless)).unwrap_or(0.0)))
        .collect();
    series.push(Series::new("noiseless", pts));
    emit_svg(
        &series,
        &Axes {
            title: "Test accuracy under rotation noise".into(),
            x_label: "shots".into(),
            y_label: "accuracy".into(),
            log_x: true,
        },
    )
}

fn load_model_for(cfg: &ExperimentConfig, model: Option<&Path>) -> Result<(ClassifierModel, PathBuf)> {
    let path = model.map_or_else(|| default_model_path(cfg), Path::to_path_buf);
    Ok((load_model(&path)?, path))
}

pub fn cmd_sweep(cfg: &ExperimentConfig, model: Option<&Path>) -> Result<i32> {
    let started = Instant::now();
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("no sweep block in the configuration".into()))?;
    let (model, _) = load_model_for(cfg, model)?;
    let (_, test) = load_split(cfg)?;
    ensure_dir(&cfg.output_dir)?;
    let rows = sweep_rows(&model, &test, cfg, &sweep)?;
    let csv = csv_bytes(
        &SWEEP_HEADER,
        rows.iter().map(|r| {
            vec![
                r.h.to_string(),
                r.shots.to_string(),
                r.repeat.to_string(),
                r.acc_noiseless.to_string(),
                r.acc_noisy.to_string(),
            ]
        }),
    )?;
    let mut outputs = BTreeMap::new();
    outputs.insert("sweep.csv".into(), write_file(&cfg.output_dir.join("sweep.csv"), &csv)?);
    let svg = sweep_chart(&rows, &sweep)?;
    outputs.insert("sweep.svg".into(), write_file(&cfg.output_dir.join("sweep.svg"), svg.as_bytes())?);

    println!("{:<14} {:>8} {:>10} {:>10} {:>8}", "h", "shots", "noiseless", "noisy", "spread");
    for &h in &sweep.h_values {
        for &s in &sweep.shot_sizes {
            let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.h == h && r.shots == s).collect();
            let clean: Vec<f64> = cell.iter().map(|r| r.acc_noiseless).collect();
            let noisy: Vec<f64> = cell.iter().map(|r| r.acc_noisy).collect();
            println!(
                "{:<14} {:>8} {:>10.4} {:>10.4} {:>8.4}",
                h_label(h),
                s,
                mean(&clean).unwrap_or(0.0),
                mean(&noisy).unwrap_or(0.0),
                spread(&noisy).unwrap_or(0.0)
            );
        }
    }
    let seeds = BTreeMap::from([("split", split_seed(cfg)), ("sweep_base", seed::derive(cfg.master_seed, STREAM_SWEEP))]);
    write_manifest(cfg, "sweep", seeds, started, outputs, json!({ "rows": rows.len() }))?;
    Ok(0)
}

/// Inputs to certify: test-set indices, feature vectors from a JSON file, or
/// the whole test set when neither is given.
pub enum CertifyTargets {
    All,
    Indices(Vec<usize>),
    File(PathBuf),
}

fn read_feature_file(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Dataset {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let malformed = || Error::Dataset {
        path: path.to_path_buf(),
        message: "expected a feature vector or a list of feature vectors".into(),
    };
    match &value {
        Value::Array(items) if items.iter().all(Value::is_number) => {
            Ok(vec![serde_json::from_value(value.clone()).map_err(|_| malformed())?])
        }
        Value::Array(items) if items.iter().all(Value::is_array) => {
            serde_json::from_value(value.clone()).map_err(|_| malformed())
        }
        _ => Err(malformed()),
    }
}

fn provenance(cfg: &ExperimentConfig, model_path: &Path) -> Result<Provenance> {
    let bytes = fs::read(model_path).map_err(|e| Error::io(model_path, e))?;
    Ok(Provenance {
        master_seed: cfg.master_seed,
        certify_seed: certify_seed(cfg),
        config_sha256: cfg.sha256()?,
        model_sha256: sha256_hex(&bytes),
        tool_version: TOOL_VERSION.to_string(),
    })
}

/// Worst exit status over a set of verdicts.
pub fn verdict_exit_code<'a>(verdicts: impl IntoIterator<Item = &'a Verdict>) -> i32 {
    verdicts.into_iter().map(|v| v.exit_code()).max().unwrap_or(0)
}

pub fn cmd_certify(cfg: &ExperimentConfig, model: Option<&Path>, targets: &CertifyTargets) -> Result<i32> {
    let started = Instant::now();
    let (model, model_path) = load_model_for(cfg, model)?;
    let mut inputs: Vec<(String, Vec<f64>, Option<usize>)> = Vec::new();
    match targets {
        CertifyTargets::File(path) => {
            for (j, x) in read_feature_file(path)?.into_iter().enumerate() {
                inputs.push((format!("input_{j}"), x, None));
            }
        }
        CertifyTargets::All | CertifyTargets::Indices(_) => {
            let (_, test) = load_split(cfg)?;
            let indices: Vec<usize> = match targets {
                CertifyTargets::Indices(v) => v.clone(),
                _ => (0..test.len()).collect(),
            };
            for i in indices {
                if i >= test.len() {
                    return Err(Error::InvalidInput(format!(
                        "input index {i} out of range for a test set of {}",
                        test.len()
                    )));
                }
                inputs.push((format!("test_{i}"), test.features[i].clone(), Some(test.labels[i])));
            }
        }
    }
    let dir = cfg.output_dir.join("reports");
    ensure_dir(&dir)?;
    let prov = provenance(cfg, &model_path)?;
    let seed = certify_seed(cfg);
    let reports: Vec<CertificationReport> = inputs
        .iter()
        .map(|(_, x, _)| {
            let sigma = model.encode_features(x)?;
            let mut r = certify_input(&model, &sigma, &cfg.noise, &cfg.certify, seed)?;
            r.provenance = Some(prov.clone());
            Ok(r)
        })
        .collect::<Result<_>>()?;

    let mut outputs = BTreeMap::new();
    let mut rows = Vec::new();
    for ((name, _, label), r) in inputs.iter().zip(&reports) {
        let file = format!("report_{name}.json");
        outputs.insert(format!("reports/{file}"), write_json(&dir.join(&file), r)?);
        let verdict = serde_json::to_value(r.verdict)?;
        let verdict = verdict.as_str().unwrap_or_default().to_string();
        println!(
            "{name}: class {} verdict {verdict} tau_d {:.6} epsilon {}",
            r.predicted_class,
            r.tau_d,
            r.epsilon.map_or("none".to_string(), |e| format!("{e:.6}"))
        );
        for w in &r.warnings {
            println!("  warning: {w}");
        }
        rows.push(vec![
            name.clone(),
            label.map_or(String::new(), |l| l.to_string()),
            r.predicted_class.to_string(),
            verdict,
            r.tau_d.to_string(),
            r.epsilon.map_or(String::new(), |e| e.to_string()),
            r.b.to_string(),
        ]);
    }
    let csv = csv_bytes(&["input", "label", "predicted", "verdict", "tau_d", "epsilon", "B"], rows)?;
    outputs.insert("certify.csv".into(), write_file(&cfg.output_dir.join("certify.csv"), &csv)?);
    let code = verdict_exit_code(reports.iter().map(|r| &r.verdict));
    let summary = json!({
        "n_inputs": reports.len(),
        "n_certified": reports.iter().filter(|r| r.verdict == Verdict::Certified).count(),
        "exit_code": code,
    });
    write_manifest(cfg, "certify", BTreeMap::from([("certify", seed)]), started, outputs, summary)?;
    Ok(code)
}

#[derive(Debug, Clone, Serialize)]
pub struct AttackRow {
    pub index: usize,
    pub label: usize,
    pub verdict: Verdict,
    pub tau_certified: f64,
    pub flipped_inside: Option<bool>,
    pub margin_inside: Option<f64>,
    pub tau_attack: f64,
    pub flipped_attack: Option<bool>,
    pub margin_attack: Option<f64>,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttackSummary {
    pub n_inputs: usize,
    pub n_certified: usize,
    /// Flips at the certified radius over certified inputs.
    pub flip_rate_inside: f64,
    /// Flips at the attack radius over inputs that were attacked.
    pub flip_rate_attack: f64,
    pub flips_inside: usize,
    pub flips_attack: usize,
}

/// Certifies every test input and attacks it at its certified radius and at
/// `tau_d` (or `radius_scale` times the certified radius).
pub fn attack_rows(
    model: &ClassifierModel,
    test: &Dataset,
    cfg: &ExperimentConfig,
    tau_d: Option<f64>,
) -> Result<(Vec<AttackRow>, AttackSummary)> {
    let seed = certify_seed(cfg);
    let oracle = NoisyEffects::new(model, &cfg.noise, cfg.certify.n_noise, seed)?;
    let budget = cfg.attack.budget;
    let attack_base = seed::derive(cfg.master_seed, STREAM_ATTACK);
    let rows: Vec<AttackRow> = (0..test.len())
        .into_par_iter()
        .map(|i| {
            let sigma = model.encode_features(&test.features[i])?;
            let report = certify_input(model, &sigma, &cfg.noise, &cfg.certify, seed)?;
            let certified = report.verdict == Verdict::Certified;
            let tau_cert = if certified { report.tau_d } else { 0.0 };
            let run = |tau: f64, stream: u64| -> Result<Option<AttackResult>> {
                if tau <= 0.0 {
                    return Ok(None);
                }
                attack_search_with(&oracle, &sigma, tau, budget, seed::derive_path(attack_base, &[i as u64, stream]))
                    .map(Some)
            };
            let inside = run(tau_cert, 0)?;
            let tau_attack = tau_d
                .unwrap_or(cfg.attack.radius_scale * tau_cert)
                .clamp(0.0, 1.0);
            let outside = run(tau_attack, 1)?;
            Ok(AttackRow {
                index: i,
                label: test.labels[i],
                verdict: report.verdict,
                tau_certified: tau_cert,
                flipped_inside: inside.as_ref().map(|a| a.flipped),
                margin_inside: inside.as_ref().map(|a| a.worst_margin),
                tau_attack,
                flipped_attack: outside.as_ref().map(|a| a.flipped),
                margin_attack: outside.as_ref().map(|a| a.worst_margin),
                evaluations: inside.as_ref().map_or(0, |a| a.evaluations) + outside.as_ref().map_or(0, |a| a.evaluations),
            })
        })
        .collect::<Result<_>>()?;
    let n_certified = rows.iter().filter(|r| r.verdict == Verdict::Certified).count();
    let flips_inside = rows.iter().filter(|r| r.flipped_inside == Some(true)).count();
    let attacked = rows.iter().filter(|r| r.flipped_attack.is_some()).count();
    let flips_attack = rows.iter().filter(|r| r.flipped_attack == Some(true)).count();
    let rate = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let summary = AttackSummary {
        n_inputs: rows.len(),
        n_certified,
        flip_rate_inside: rate(flips_inside, n_certified),
        flip_rate_attack: rate(flips_attack, attacked),
        flips_inside,
        flips_attack,
    };
    Ok((rows, summary))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

pub fn cmd_attack(cfg: &ExperimentConfig, model: Option<&Path>, tau_d: Option<f64>) -> Result<i32> {
    let started = Instant::now();
    if let Some(t) = tau_d {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidInput(format!("--tau-d {t} outside [0, 1]")));
        }
    }
    let (model, _) = load_model_for(cfg, model)?;
    let (_, test) = load_split(cfg)?;
    ensure_dir(&cfg.output_dir)?;
    let (rows, summary) = attack_rows(&model, &test, cfg, tau_d)?;
    let csv = csv_bytes(
        &ATTACK_HEADER,
        rows.iter().map(|r| {
            vec![
                r.index.to_string(),
                r.label.to_string(),
                serde_json::to_value(r.verdict)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                r.tau_certified.to_string(),
                opt(r.flipped_inside),
                opt(r.margin_inside),
                r.tau_attack.to_string(),
                opt(r.flipped_attack),
                opt(r.margin_attack),
                r.evaluations.to_string(),
            ]
        }),
    )?;
    let mut outputs = BTreeMap::new();
    outputs.insert("attack.csv".into(), write_file(&cfg.output_dir.join("attack.csv"), &csv)?);
    outputs.insert(
        "attack_summary.json".into(),
        write_json(&cfg.output_dir.join("attack_summary.json"), &summary)?,
    );
    println!(
        "attacked {} inputs ({} certified): flip rate inside {:.4}, at attack radius {:.4}",
        summary.n_inputs, summary.n_certified, summary.flip_rate_inside, summary.flip_rate_attack
    );
    let seeds = BTreeMap::from([
        ("certify", certify_seed(cfg)),
        ("attack", seed::derive(cfg.master_seed, STREAM_ATTACK)),
    ]);
    write_manifest(cfg, "attack", seeds, started, outputs, serde_json::to_value(&summary)?)?;
    Ok(0)
}

pub fn audit_seeds(cfg: &ExperimentConfig) -> (u64, u64) {
    let base = seed::derive(cfg.master_seed, STREAM_AUDIT);
    (seed::derive(base, 0), seed::derive(base, 1))
}

/// Exit 0 when the empirical ratio stays within the analytic budget, 2 when
/// any pair exceeds it.
pub fn cmd_audit(cfg: &ExperimentConfig, model: Option<&Path>) -> Result<i32> {
    let started = Instant::now();
    let (model, _) = load_model_for(cfg, model)?;
    ensure_dir(&cfg.output_dir)?;
    let (oracle_seed, pair_seed) = audit_seeds(cfg);
    let oracle = NoisyEffects::new(&model, &cfg.noise, cfg.certify.n_noise, oracle_seed)?;
    let report = audit_dp_with(&oracle, &cfg.noise, cfg.audit.tau_d, cfg.audit.n_pairs, pair_seed)?;
    let mut outputs = BTreeMap::new();
    outputs.insert("audit.json".into(), write_json(&cfg.output_dir.join("audit.json"), &report)?);
    println!(
        "audited {} pairs at tau_d {}: empirical max {:.6}, analytic epsilon {:.6}, {} findings",
        report.n_pairs,
        report.tau_d,
        report.empirical_max,
        report.analytic_epsilon,
        report.findings.len()
    );
    for f in &report.findings {
        println!("  finding: pair {} class {} log ratio {:.6}", f.index, f.class, f.log_ratio);
    }
    let code = if report.passed() { 0 } else { 2 };
    let seeds = BTreeMap::from([("oracle", oracle_seed), ("pairs", pair_seed)]);
    write_manifest(cfg, "audit", seeds, started, outputs, serde_json::to_value(&report)?)?;
    Ok(code)
}
