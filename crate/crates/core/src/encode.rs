//! Classical-to-quantum encodings, datasets and CSV ingestion.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qla::{StateVector, MAX_QUBITS};
use crate::seed;

/// Dimension of the synthetic blobs.
pub const SYNTH_DIM: usize = 3;
const SYNTH_STD: f64 = 0.12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(first) = features.first() {
            let d = first.len();
            for (i, x) in features.iter().enumerate() {
                if x.len() != d {
                    return Err(Error::InvalidInput(format!(
                        "sample {i} has {} features, expected {d}",
                        x.len()
                    )));
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput(format!("sample {i} is not finite")));
                }
                if x.iter().all(|&v| v == 0.0) {
                    return Err(Error::InvalidInput(format!("sample {i} has zero norm")));
                }
            }
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidInput(format!("label {l} outside {{0, 1}}")));
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Dataset {
        Dataset {
            name: name.into(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Deterministic shuffled split into (train, test).
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::InvalidInput(format!(
                "test fraction {test_fraction} outside [0, 1)"
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut seed::rng(seed));
        let n_test = (self.len() as f64 * test_fraction).round() as usize;
        let (test, train) = order.split_at(n_test);
        Ok((
            self.subset(train, format!("{}-train", self.name)),
            self.subset(test, format!("{}-test", self.name)),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingKind {
    Amplitude,
    Angle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingScheme {
    pub kind: EncodingKind,
    pub num_qubits: usize,
}

impl EncodingScheme {
    /// Smallest register that holds `dim` features under `kind`.
    pub fn for_dimension(kind: EncodingKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("zero-dimensional features".into()));
        }
        let num_qubits = match kind {
            EncodingKind::Angle => dim,
            EncodingKind::Amplitude => (usize::BITS - (dim - 1).leading_zeros()).max(1) as usize,
        };
        let scheme = Self { kind, num_qubits };
        scheme.check_dimension(dim)?;
        Ok(scheme)
    }

    pub fn check_dimension(&self, dim: usize) -> Result<()> {
        if self.num_qubits == 0 || self.num_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits {
                qubits: self.num_qubits,
                max: MAX_QUBITS,
            });
        }
        let ok = match self.kind {
            EncodingKind::Angle => self.num_qubits == dim,
            EncodingKind::Amplitude => (1usize << self.num_qubits) >= dim,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "{:?} encoding on {} qubits cannot hold {dim} features",
                self.kind, self.num_qubits
            )))
        }
    }

    pub fn encode(&self, x: &[f64]) -> Result<StateVector> {
        self.check_dimension(x.len())?;
        match self.kind {
            EncodingKind::Amplitude => amplitude_encode(x, self.num_qubits),
            EncodingKind::Angle => angle_encode(x),
        }
    }
}

/// Amplitudes x_i / ‖x‖ in basis order, zero-padded to 2^num_qubits.
pub fn amplitude_encode(x: &[f64], num_qubits: usize) -> Result<StateVector> {
    if num_qubits > MAX_QUBITS {
        return Err(Error::TooManyQubits {
            qubits: num_qubits,
            max: MAX_QUBITS,
        });
    }
    let dim = 1usize << num_qubits;
    if x.len() > dim {
        return Err(Error::InvalidInput(format!(
            "{} features do not fit in {num_qubits} qubits",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite feature".into()));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidInput("cannot amplitude-encode the zero vector".into()));
    }
    let mut amps = vec![0.0; dim];
    for (a, v) in amps.iter_mut().zip(x) {
        *a = v / norm;
    }
    StateVector::from_real(&amps)
}

/// Product state ⊗_i (cos(π x_i / 2)|0> + sin(π x_i / 2)|1>), i.e. RY(π x_i) on |0>.
pub fn angle_encode(x: &[f64]) -> Result<StateVector> {
    if x.is_empty() || x.len() > MAX_QUBITS {
        return Err(Error::InvalidInput(format!(
            "angle encoding needs 1..={MAX_QUBITS} features, got {}",
            x.len()
        )));
    }
    if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidInput(format!("feature {v} outside [0, 1]")));
    }
    let mut amps = vec![1.0];
    for &v in x {
        let (s, c) = (PI * v / 2.0).sin_cos();
        amps = amps.iter().flat_map(|&a| [a * c, a * s]).collect();
    }
    StateVector::from_real(&amps)
}

/// Per-feature min-max scaling into [0, 1], clipping values outside the fitted range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidInput("cannot fit a scaler on no samples".into()));
        }
        let d = data.dim();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for x in &data.features {
            for j in 0..d {
                min[j] = min[j].min(x[j]);
                max[j] = max[j].max(x[j]);
            }
        }
        Ok(Self { min, max })
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                if hi > lo {
                    ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Two linearly separable Gaussian blobs in [0, 1]^3.
///
/// Class centers sit at 0.5 ± (margin/2)·u for a seed-dependent unit direction u.
/// Samples falling outside the unit cube, or closer than margin/4 to the
/// separating plane, are redrawn. The result is min-max normalized, which only
/// stretches distances. Class 0 gets ⌈n/2⌉ samples.
pub fn synth_dataset(n_samples: usize, seed: u64, margin: f64) -> Result<Dataset> {
    if n_samples < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    if !(margin > 0.0 && margin < 0.5) {
        return Err(Error::InvalidInput(format!("margin {margin} outside (0, 0.5)")));
    }
    let mut rng = seed::rng(seed);
    let u = loop {
        let v: Vec<f64> = (0..SYNTH_DIM).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-3 {
            break v.into_iter().map(|a| a / norm).collect::<Vec<_>>();
        }
    };

    let n0 = n_samples.div_ceil(2);
    let mut features = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let label = usize::from(i >= n0);
        let side = if label == 0 { -1.0 } else { 1.0 };
        let x = loop {
            let x: Vec<f64> = u
                .iter()
                .map(|ui| 0.5 + side * 0.5 * margin * ui + SYNTH_STD * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let offset: f64 = x.iter().zip(&u).map(|(xi, ui)| (xi - 0.5) * ui).sum();
            let inside = x.iter().all(|v| (0.0..=1.0).contains(v));
            if inside && side * offset >= margin / 4.0 && x.iter().any(|&v| v != 0.0) {
                break x;
            }
        };
        features.push(x);
        labels.push(label);
    }

    let mut order: Vec<usize> = (0..n_samples).collect();
    order.shuffle(&mut rng);
    let raw = Dataset::new(format!("synthetic-{seed}"), features, labels)?;
    let shuffled = raw.subset(&order, raw.name.clone());
    let scaler = MinMaxScaler::fit(&shuffled)?;
    let features = shuffled
        .features
        .iter()
        .map(|x| {
            let mut y = scaler.transform(x);
            // keep every vector amplitude-encodable
            if y.iter().all(|&v| v == 0.0) {
                y[0] = f64::MIN_POSITIVE;
            }
            y
        })
        .collect();
    Dataset::new(shuffled.name, features, shuffled.labels)
}

fn dataset_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Dataset {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads `d` feature columns followed by an integer label column.
///
/// A first row that does not parse as numbers is taken as a header. Errors
/// name the 1-based row of the file.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| dataset_err(path, format!("row {row}: {e}")))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if row == 1 => continue,
            Err(_) => return Err(dataset_err(path, format!("row {row}: non-numeric field"))),
        };
        let w = *width.get_or_insert(values.len());
        if values.len() != w {
            return Err(dataset_err(
                path,
                format!("row {row}: expected {w} fields, found {}", values.len()),
            ));
        }
        if w < 2 {
            return Err(dataset_err(path, format!("row {row}: need features and a label")));
        }
        let raw_label = record.get(w - 1).unwrap_or_default();
        let label = match raw_label.parse::<i64>() {
            Ok(l @ (0 | 1)) => l as usize,
            _ => {
                return Err(dataset_err(
                    path,
                    format!("row {row}: label {raw_label:?} outside {{0, 1}}"),
                ))
            }
        };
        features.push(values[..w - 1].to_vec());
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(dataset_err(path, "no samples"));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(name, features, labels).map_err(|e| dataset_err(path, e.to_string()))
}

/// Writes a header row `x0,..,x{d-1},label` and one row per sample.
pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    writer.write_record(&header)?;
    for (x, y) in data.features.iter().zip(&data.labels) {
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        row.push(y.to_string());
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
