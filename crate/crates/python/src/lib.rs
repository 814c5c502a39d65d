//! Python bindings: models, noise configurations, training and certification.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use rotsmooth::certify::{self as cert, CertifyOptions};
use rotsmooth::encode::{self, Dataset, EncodingKind, EncodingScheme, MinMaxScaler};
use rotsmooth::rotnoise::{self, NoiseConfig};
use rotsmooth::vqc::{self, ClassifierModel, Sampling, TrainConfig};
use rotsmooth::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io { .. } | Error::Dataset { .. } => PyIOError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

/// Parses JSON text into Python objects with the standard `json` module.
fn json_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn sampling(shots: Option<u64>) -> Sampling {
    shots.map_or(Sampling::Exact, Sampling::Shots)
}

/// Trained or hand-built classifier.
#[pyclass(name = "Model", module = "pyrotsmooth", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: ClassifierModel,
}

#[pymethods]
impl PyModel {
    /// Default layered ansatz with random initial parameters.
    #[staticmethod]
    #[pyo3(signature = (num_features, layers=2, seed=7, encoding="angle"))]
    fn new_default(num_features: usize, layers: usize, seed: u64, encoding: &str) -> PyResult<Self> {
        let kind = match encoding {
            "angle" => EncodingKind::Angle,
            "amplitude" => EncodingKind::Amplitude,
            other => return Err(PyValueError::new_err(format!("unknown encoding {other:?}"))),
        };
        let scheme = EncodingScheme::for_dimension(kind, num_features).map_err(to_py)?;
        let inner = ClassifierModel::with_default_ansatz(scheme, layers, seed).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: vqc::load_model(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        vqc::save_model(&self.inner, path).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.inner.params().to_vec()
    }

    #[getter]
    fn num_data_qubits(&self) -> usize {
        self.inner.num_data_qubits()
    }

    /// Class probabilities for one feature vector, exact or from `shots` samples.
    #[pyo3(signature = (features, shots=None, seed=0))]
    fn predict(&self, features: Vec<f64>, shots: Option<u64>, seed: u64) -> PyResult<Vec<f64>> {
        let sigma = self.inner.encode_features(&features).map_err(to_py)?;
        vqc::predict(&self.inner, &sigma, sampling(shots), seed).map_err(to_py)
    }

    #[pyo3(signature = (features, labels, shots=None, seed=0))]
    fn accuracy(&self, features: Vec<Vec<f64>>, labels: Vec<usize>, shots: Option<u64>, seed: u64) -> PyResult<f64> {
        let data = Dataset::new("python", features, labels).map_err(to_py)?;
        vqc::accuracy(&self.inner, &data, sampling(shots), seed).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(data_qubits={}, params={})",
            self.inner.num_data_qubits(),
            self.inner.params().len()
        )
    }
}

/// Random-rotation noise settings.
#[pyclass(name = "Noise", module = "pyrotsmooth", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyNoise {
    inner: NoiseConfig,
}

#[pymethods]
impl PyNoise {
    /// Angles θ = arctan(u) with u uniform in [h1, h2].
    #[staticmethod]
    fn tan_bounded(n: usize, h1: f64, h2: f64, t: f64) -> PyResult<Self> {
        let inner = NoiseConfig::tan_bounded(n, h1, h2, t);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Angles uniform in [0, h].
    #[staticmethod]
    fn uniform(n: usize, h: f64, t: f64) -> PyResult<Self> {
        let inner = NoiseConfig::uniform(n, h, t);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn margin_h(&self) -> f64 {
        self.inner.margin_h()
    }

    fn __repr__(&self) -> String {
        format!("Noise({:?})", self.inner)
    }
}

/// Two separable Gaussian blobs: `(features, labels)`.
#[pyfunction]
fn synth_dataset(n: usize, seed: u64, margin: f64) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let d = encode::synth_dataset(n, seed, margin).map_err(to_py)?;
    Ok((d.features, d.labels))
}

/// Fits a min-max scaler on the data and trains the default ansatz.
#[pyfunction]
#[pyo3(signature = (features, labels, epochs=40, learning_rate=0.5, batch_size=16, seed=7, layers=2))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    seed: u64,
    layers: usize,
) -> PyResult<PyModel> {
    let data = Dataset::new("python", features, labels).map_err(to_py)?;
    let scheme = EncodingScheme::for_dimension(EncodingKind::Angle, data.dim()).map_err(to_py)?;
    let cfg = TrainConfig {
        learning_rate,
        epochs,
        batch_size,
        seed,
        ..TrainConfig::default()
    };
    let inner = py
        .detach(|| -> rotsmooth::Result<ClassifierModel> {
            let model = ClassifierModel::with_default_ansatz(scheme, layers, seed)?
                .with_scaler(Some(MinMaxScaler::fit(&data)?));
            vqc::train(&model, &data, &cfg)
        })
        .map_err(to_py)?;
    Ok(PyModel { inner })
}

/// Monte-Carlo prediction under rotation noise.
#[pyfunction]
#[pyo3(signature = (model, features, noise, n_noise=1024, shots=None, seed=0))]
fn noisy_predict(
    model: &PyModel,
    features: Vec<f64>,
    noise: &PyNoise,
    n_noise: usize,
    shots: Option<u64>,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let sigma = model.inner.encode_features(&features).map_err(to_py)?;
    rotnoise::noisy_predict_mc(&model.inner, &sigma, &noise.inner, n_noise, sampling(shots), seed).map_err(to_py)
}

/// Certification report for one feature vector, as a dict.
#[pyfunction]
#[pyo3(signature = (model, features, noise, n_noise=4096, shots=None, zeta=0.05, beta=0.95, seed=0))]
#[allow(clippy::too_many_arguments)]
fn certify(
    py: Python<'_>,
    model: &PyModel,
    features: Vec<f64>,
    noise: &PyNoise,
    n_noise: usize,
    shots: Option<u64>,
    zeta: f64,
    beta: f64,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let opts = CertifyOptions {
        n_noise,
        n_shots: shots,
        zeta,
        beta,
    };
    let sigma = model.inner.encode_features(&features).map_err(to_py)?;
    let report = py
        .detach(|| cert::certify_input(&model.inner, &sigma, &noise.inner, &opts, seed))
        .map_err(to_py)?;
    let text = serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &text)
}

#[pyfunction]
fn certified_radius(ratio: f64, t: f64, n: usize) -> PyResult<f64> {
    cert::theorem3_radius(ratio, t, n).map_err(to_py)
}

#[pyfunction]
fn privacy_epsilon(tau_d: f64, t: f64, n: usize) -> PyResult<f64> {
    cert::lemma2_epsilon(tau_d, t, n).map_err(to_py)
}

#[pyfunction]
fn sample_complexity(xi: f64, h: f64, n: usize, beta: f64) -> PyResult<u64> {
    cert::prop1_sample_complexity(xi, h, n, beta).map_err(to_py)
}

/// Runs the command-line tool with `args` (without the program name).
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("rotsmooth".to_string()).chain(args).collect();
    py.detach(|| rotsmooth::cli::run(argv))
}

#[pymodule]
fn pyrotsmooth(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyNoise>()?;
    m.add_function(wrap_pyfunction!(synth_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(noisy_predict, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(certified_radius, m)?)?;
    m.add_function(wrap_pyfunction!(privacy_epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(sample_complexity, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
