//! Variational quantum classifier read out from an ancilla qubit.
//!
//! The data register occupies qubits `0..n` and the ancilla is qubit `n`. An
//! input state σ is extended to σ ⊗ |0><0|, evolved by the ansatz, and class
//! k is read from the ancilla projector onto |k>.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    apply_circuit_shifted, class_probabilities, sample_shots, CircuitSpec, GateKind, GateOp,
    Povm,
};
use crate::encode::{Dataset, EncodingScheme, MinMaxScaler};
use crate::error::{Error, Result};
use crate::qla::{ComplexMatrix, DensityMatrix};
use crate::seed;

/// Floor applied to probabilities inside the cross-entropy logarithm.
pub const PROB_FLOOR: f64 = 1e-9;
pub const DEFAULT_LAYERS: usize = 2;
const INIT_SPREAD: f64 = 0.1;
/// Consecutive epochs of rising loss tolerated before the learning rate halves.
const MAX_REGRESSIONS: usize = 3;

/// How class probabilities are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Exact,
    Shots(u64),
}

/// `layers` blocks of RY on every qubit plus a CNOT ring, then a CNOT from each
/// data qubit into the ancilla and a final RY on the ancilla.
pub fn default_ansatz(num_data_qubits: usize, layers: usize) -> Result<CircuitSpec> {
    let n = num_data_qubits + 1;
    let ancilla = num_data_qubits;
    let mut ops = Vec::new();
    let mut slot = 0;
    for _ in 0..layers {
        for q in 0..n {
            ops.push(GateOp::rotation(GateKind::Ry, q, slot));
            slot += 1;
        }
        if n > 1 {
            for q in 0..n {
                let next = (q + 1) % n;
                if n == 2 && q == 1 {
                    break;
                }
                ops.push(GateOp::cnot(q, next));
            }
        }
    }
    for q in 0..num_data_qubits {
        ops.push(GateOp::cnot(q, ancilla));
    }
    ops.push(GateOp::rotation(GateKind::Ry, ancilla, slot));
    slot += 1;
    CircuitSpec::new(n, slot, ops)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct ClassifierModel {
    ansatz: CircuitSpec,
    params: Vec<f64>,
    encoding: EncodingScheme,
    scaler: Option<MinMaxScaler>,
    povm: Povm,
}

/// On-disk form of a model.
#[derive(Serialize, Deserialize)]
struct ModelDoc {
    ansatz: CircuitSpec,
    params: Vec<f64>,
    encoding: EncodingScheme,
    num_classes: usize,
    #[serde(default)]
    scaler: Option<MinMaxScaler>,
}

impl TryFrom<ModelDoc> for ClassifierModel {
    type Error = Error;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        if doc.num_classes != 2 {
            return Err(Error::InvalidInput(format!(
                "only binary models are supported, got {} classes",
                doc.num_classes
            )));
        }
        let mut model = ClassifierModel::new(doc.ansatz, doc.params, doc.encoding)?;
        model.scaler = doc.scaler;
        Ok(model)
    }
}

impl From<ClassifierModel> for ModelDoc {
    fn from(m: ClassifierModel) -> Self {
        Self {
            num_classes: m.povm.num_outcomes(),
            ansatz: m.ansatz,
            params: m.params,
            encoding: m.encoding,
            scaler: m.scaler,
        }
    }
}

impl ClassifierModel {
    pub fn new(ansatz: CircuitSpec, params: Vec<f64>, encoding: EncodingScheme) -> Result<Self> {
        if ansatz.num_qubits() != encoding.num_qubits + 1 {
            return Err(Error::InvalidCircuit(format!(
                "ansatz acts on {} qubits; encoding needs {} data qubits plus an ancilla",
                ansatz.num_qubits(),
                encoding.num_qubits
            )));
        }
        if params.len() != ansatz.num_params() {
            return Err(Error::DimensionMismatch {
                expected: ansatz.num_params(),
                actual: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("non-finite parameter".into()));
        }
        let povm = Povm::computational_basis(ansatz.num_qubits(), encoding.num_qubits)?;
        Ok(Self {
            ansatz,
            params,
            encoding,
            scaler: None,
            povm,
        })
    }

    /// Default ansatz with parameters drawn uniformly from (-0.1, 0.1).
    pub fn with_default_ansatz(encoding: EncodingScheme, layers: usize, init_seed: u64) -> Result<Self> {
        let ansatz = default_ansatz(encoding.num_qubits, layers)?;
        let mut rng = seed::rng(init_seed);
        let params = (0..ansatz.num_params())
            .map(|_| rng.random_range(-INIT_SPREAD..INIT_SPREAD))
            .collect();
        Self::new(ansatz, params, encoding)
    }

    pub fn with_scaler(mut self, scaler: Option<MinMaxScaler>) -> Self {
        self.scaler = scaler;
        self
    }

    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        let mut m = Self::new(self.ansatz.clone(), params, self.encoding)?;
        m.scaler = self.scaler.clone();
        Ok(m)
    }

    pub fn ansatz(&self) -> &CircuitSpec {
        &self.ansatz
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn encoding(&self) -> &EncodingScheme {
        &self.encoding
    }

    pub fn scaler(&self) -> Option<&MinMaxScaler> {
        self.scaler.as_ref()
    }

    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    pub fn num_data_qubits(&self) -> usize {
        self.encoding.num_qubits
    }

    pub fn num_classes(&self) -> usize {
        self.povm.num_outcomes()
    }

    /// Scales (when a scaler is attached) and encodes a raw feature vector.
    pub fn encode_features(&self, x: &[f64]) -> Result<DensityMatrix> {
        let state = match &self.scaler {
            Some(s) => self.encoding.encode(&s.transform(x))?,
            None => self.encoding.encode(x)?,
        };
        Ok(state.to_density())
    }

    fn check_input(&self, sigma: &DensityMatrix) -> Result<()> {
        if sigma.num_qubits() != self.num_data_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.num_data_qubits(),
                actual: sigma.num_qubits(),
            });
        }
        Ok(())
    }

    /// σ ⊗ |0><0| on the ancilla.
    pub fn attach_ancilla(&self, sigma: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_input(sigma)?;
        sigma.tensor(&DensityMatrix::basis(1, 0)?)
    }

    fn probabilities_prepared(
        &self,
        prepared: &DensityMatrix,
        params: &[f64],
        shift: Option<(usize, f64)>,
    ) -> Result<Vec<f64>> {
        let out = apply_circuit_shifted(&self.ansatz, params, prepared, shift)?;
        class_probabilities(&out, &self.povm)
    }

    /// Effects A_k on the data register with y_k(σ) = Tr(A_k σ).
    ///
    /// A_k = V† Π_k V for the isometry V = U (I ⊗ |0>).
    pub fn data_effects(&self) -> Result<Vec<ComplexMatrix>> {
        let u = self.ansatz.unitary(&self.params)?;
        let full = u.rows();
        let data_dim = full / 2;
        // Column j of V is column 2j of U: ancilla is the least significant bit.
        let mut v = ComplexMatrix::zeros(full, data_dim);
        for r in 0..full {
            for j in 0..data_dim {
                v[(r, j)] = u[(r, 2 * j)];
            }
        }
        let vd = v.adjoint();
        self.povm
            .effects()
            .iter()
            .map(|e| {
                let mut a = vd.matmul(e)?.matmul(&v)?;
                a.hermitize();
                Ok(a)
            })
            .collect()
    }
}

/// Exact class probabilities y_k(σ) = Tr(Π_k U(σ ⊗ |0><0|)U†).
pub fn predict_exact(model: &ClassifierModel, sigma: &DensityMatrix) -> Result<Vec<f64>> {
    let prepared = model.attach_ancilla(sigma)?;
    model.probabilities_prepared(&prepared, &model.params, None)
}

/// Shot estimate y_k^(N) = count_k / N together with the raw counts.
pub fn predict_shots(
    model: &ClassifierModel,
    sigma: &DensityMatrix,
    n_shots: u64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<u64>)> {
    let probs = predict_exact(model, sigma)?;
    estimate_from_probs(&probs, n_shots, seed)
}

pub(crate) fn estimate_from_probs(probs: &[f64], n_shots: u64, seed: u64) -> Result<(Vec<f64>, Vec<u64>)> {
    let total: f64 = probs.iter().sum();
    let normalized: Vec<f64> = probs.iter().map(|p| p / total).collect();
    let counts = sample_shots(&normalized, n_shots, seed)?;
    let est = counts.iter().map(|&c| c as f64 / n_shots as f64).collect();
    Ok((est, counts))
}

/// Class probabilities under `sampling`.
pub fn predict(
    model: &ClassifierModel,
    sigma: &DensityMatrix,
    sampling: Sampling,
    seed: u64,
) -> Result<Vec<f64>> {
    match sampling {
        Sampling::Exact => predict_exact(model, sigma),
        Sampling::Shots(n) => predict_shots(model, sigma, n, seed).map(|(est, _)| est),
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(probs: &[f64]) -> usize {
    probs
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}

/// Cross-entropy −ln max(y_label, floor).
pub fn loss(model: &ClassifierModel, sigma: &DensityMatrix, label: usize) -> Result<f64> {
    let probs = predict_exact(model, sigma)?;
    Ok(cross_entropy(&probs, label))
}

fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(PROB_FLOOR).ln()
}

/// ∂y_k/∂θ_j for every class k (outer index) and parameter slot j, by the
/// parameter-shift rule (y(θ+π/2) − y(θ−π/2)) / 2 applied per gate occurrence.
pub fn probability_gradients(model: &ClassifierModel, sigma: &DensityMatrix) -> Result<Vec<Vec<f64>>> {
    let prepared = model.attach_ancilla(sigma)?;
    probability_gradients_prepared(model, &prepared, &model.params)
}

fn probability_gradients_prepared(
    model: &ClassifierModel,
    prepared: &DensityMatrix,
    params: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let k = model.num_classes();
    let mut grads = vec![vec![0.0; model.ansatz.num_params()]; k];
    for (index, op) in model.ansatz.parameterized_ops() {
        let slot = op.param_slot.expect("parameterized op has a slot");
        if !op.kind.is_rotation() {
            return Err(Error::InvalidGate(format!(
                "parameter-shift rule does not apply to {:?}",
                op.kind
            )));
        }
        let plus = model.probabilities_prepared(prepared, params, Some((index, FRAC_PI_2)))?;
        let minus = model.probabilities_prepared(prepared, params, Some((index, -FRAC_PI_2)))?;
        for c in 0..k {
            grads[c][slot] += 0.5 * (plus[c] - minus[c]);
        }
    }
    Ok(grads)
}

/// Gradient of the cross-entropy loss with respect to every parameter slot.
pub fn parameter_shift_grad(
    model: &ClassifierModel,
    sigma: &DensityMatrix,
    label: usize,
) -> Result<Vec<f64>> {
    let prepared = model.attach_ancilla(sigma)?;
    loss_gradient_prepared(model, &prepared, &model.params, label)
}

fn loss_gradient_prepared(
    model: &ClassifierModel,
    prepared: &DensityMatrix,
    params: &[f64],
    label: usize,
) -> Result<Vec<f64>> {
    if label >= model.num_classes() {
        return Err(Error::InvalidInput(format!("label {label} out of range")));
    }
    let probs = model.probabilities_prepared(prepared, params, None)?;
    let y = probs[label];
    let grads = probability_gradients_prepared(model, prepared, params)?;
    if y <= PROB_FLOOR {
        return Ok(vec![0.0; params.len()]);
    }
    Ok(grads[label].iter().map(|g| -g / y).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
}

fn default_loss() -> LossKind {
    LossKind::CrossEntropy
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 40,
            batch_size: 16,
            seed: 7,
            loss: LossKind::CrossEntropy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate {} must be positive and finite",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub learning_rate: f64,
}

fn prepare_dataset(model: &ClassifierModel, data: &Dataset) -> Result<Vec<(DensityMatrix, usize)>> {
    data.features
        .par_iter()
        .zip(&data.labels)
        .map(|(x, &y)| Ok((model.attach_ancilla(&model.encode_features(x)?)?, y)))
        .collect()
}

fn dataset_stats(
    model: &ClassifierModel,
    prepared: &[(DensityMatrix, usize)],
    params: &[f64],
) -> Result<(f64, f64)> {
    let per_sample: Vec<(f64, bool)> = prepared
        .par_iter()
        .map(|(rho, y)| {
            let probs = model.probabilities_prepared(rho, params, None)?;
            Ok((cross_entropy(&probs, *y), argmax(&probs) == *y))
        })
        .collect::<Result<_>>()?;
    let n = per_sample.len() as f64;
    let loss = per_sample.iter().map(|(l, _)| l).sum::<f64>() / n;
    let acc = per_sample.iter().filter(|(_, ok)| *ok).count() as f64 / n;
    Ok((loss, acc))
}

/// Mini-batch gradient descent on the mean cross-entropy.
pub fn train(model: &ClassifierModel, data: &Dataset, cfg: &TrainConfig) -> Result<ClassifierModel> {
    train_with_history(model, data, cfg).map(|(m, _)| m)
}

/// As [`train`], also returning the loss and accuracy after every epoch.
///
/// The learning rate halves after three consecutive epochs of rising loss.
pub fn train_with_history(
    model: &ClassifierModel,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ClassifierModel, Vec<EpochRecord>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    model.encoding.check_dimension(data.dim())?;
    let prepared = prepare_dataset(model, data)?;
    let mut rng = seed::rng(cfg.seed);
    let mut params = model.params.clone();
    let mut lr = cfg.learning_rate;
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let (mut prev_loss, _) = dataset_stats(model, &prepared, &params)?;
    let mut regressions = 0;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let epoch_start = params.clone();
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let grads: Vec<Vec<f64>> = batch
                .par_iter()
                .map(|&i| {
                    let (rho, y) = &prepared[i];
                    loss_gradient_prepared(model, rho, &params, *y)
                })
                .collect::<Result<_>>()?;
            let scale = lr / batch.len() as f64;
            for g in &grads {
                for (p, gi) in params.iter_mut().zip(g) {
                    *p -= scale * gi;
                }
            }
        }
        let (loss, acc) = dataset_stats(model, &prepared, &params)?;
        if !loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                last_finite_params: epoch_start,
            });
        }
        if loss > prev_loss {
            regressions += 1;
            if regressions >= MAX_REGRESSIONS {
                lr *= 0.5;
                regressions = 0;
            }
        } else {
            regressions = 0;
        }
        prev_loss = loss;
        history.push(EpochRecord {
            epoch,
            loss,
            train_accuracy: acc,
            learning_rate: lr,
        });
    }
    Ok((model.with_params(params)?, history))
}

/// Fraction of samples whose argmax prediction equals the label.
pub fn accuracy(model: &ClassifierModel, data: &Dataset, sampling: Sampling, seed: u64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidInput("accuracy of an empty dataset".into()));
    }
    let hits: Vec<bool> = data
        .features
        .par_iter()
        .zip(&data.labels)
        .enumerate()
        .map(|(i, (x, &y))| {
            let sigma = model.encode_features(x)?;
            let probs = predict(model, &sigma, sampling, seed::derive(seed, i as u64))?;
            Ok(argmax(&probs) == y)
        })
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / data.len() as f64)
}

pub fn save_model(model: &ClassifierModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(model)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ClassifierModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Tr(A σ) for a data-space effect.
pub(crate) fn effect_expectation(effect: &ComplexMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let z: Complex64 = effect.trace_product(sigma.matrix())?;
    Ok(z.re)
}

pub(crate) fn probabilities_from_effects(effects: &[ComplexMatrix], sigma: &DensityMatrix) -> Result<Vec<f64>> {
    effects
        .iter()
        .map(|a| Ok(effect_expectation(a, sigma)?.clamp(0.0, 1.0)))
        .collect()
}
