//! Independent reference implementations used by the integration tests.
//!
//! Everything here works on plain nested vectors with explicit Kronecker
//! products, so it shares no kernels with the crate under test.
#![allow(dead_code)]

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use rotsmooth::circuit::{CircuitSpec, GateKind, GateOp};
use rotsmooth::cli::commands::{train_model, TrainOutcome};
use rotsmooth::cli::config::ExperimentConfig;
use rotsmooth::encode::{EncodingKind, EncodingScheme};
use rotsmooth::qla::{ComplexMatrix, DensityMatrix};
use rotsmooth::rotnoise::NoiseSample;
use rotsmooth::vqc::ClassifierModel;

pub type Dense = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn eye(n: usize) -> Dense {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect())
        .collect()
}

pub fn kron(a: &Dense, b: &Dense) -> Dense {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn mul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let m = b[0].len();
    let mut out = vec![vec![c(0.0, 0.0); m]; n];
    for i in 0..n {
        for k in 0..b.len() {
            let aik = a[i][k];
            for j in 0..m {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn dagger(a: &Dense) -> Dense {
    (0..a[0].len())
        .map(|j| (0..a.len()).map(|i| a[i][j].conj()).collect())
        .collect()
}

pub fn to_dense(m: &ComplexMatrix) -> Dense {
    (0..m.rows()).map(|r| (0..m.cols()).map(|col| m[(r, col)]).collect()).collect()
}

pub fn max_diff(a: &Dense, b: &ComplexMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((v - b[(i, j)]).norm());
        }
    }
    worst
}

/// 2×2 matrix of a single-qubit gate from its textbook definition.
pub fn single_qubit(kind: GateKind, angle: f64) -> Dense {
    let (s, co) = (angle / 2.0).sin_cos();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match kind {
        GateKind::Rx => vec![vec![c(co, 0.0), c(0.0, -s)], vec![c(0.0, -s), c(co, 0.0)]],
        GateKind::Ry => vec![vec![c(co, 0.0), c(-s, 0.0)], vec![c(s, 0.0), c(co, 0.0)]],
        GateKind::Rz => vec![vec![c(co, -s), c(0.0, 0.0)], vec![c(0.0, 0.0), c(co, s)]],
        GateKind::X => vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]],
        GateKind::Y => vec![vec![c(0.0, 0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), c(0.0, 0.0)]],
        GateKind::Z => vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]],
        GateKind::H => vec![vec![c(h, 0.0), c(h, 0.0)], vec![c(h, 0.0), c(-h, 0.0)]],
        GateKind::Cnot => unreachable!("two-qubit gate"),
    }
}

/// Full 2^n operator of one op, qubit 0 being the most significant factor.
pub fn full_gate(op: &GateOp, n: usize, params: &[f64]) -> Dense {
    if op.kind == GateKind::Cnot {
        let control = op.control.expect("cnot has a control");
        let dim = 1 << n;
        let cbit = 1 << (n - 1 - control);
        let tbit = 1 << (n - 1 - op.target);
        let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
        for col in 0..dim {
            let row = if col & cbit != 0 { col ^ tbit } else { col };
            m[row][col] = c(1.0, 0.0);
        }
        return m;
    }
    let angle = op
        .param_slot
        .map(|s| params[s])
        .or(op.fixed_angle)
        .unwrap_or(0.0);
    let g = single_qubit(op.kind, angle);
    let mut out = vec![vec![c(1.0, 0.0)]];
    for q in 0..n {
        out = kron(&out, &if q == op.target { g.clone() } else { eye(2) });
    }
    out
}

/// Product of full gate matrices in circuit order.
pub fn unitary_oracle(spec: &CircuitSpec, params: &[f64]) -> Dense {
    let n = spec.num_qubits();
    spec.ops()
        .iter()
        .fold(eye(1 << n), |u, op| mul(&full_gate(op, n, params), &u))
}

pub fn evolve_oracle(spec: &CircuitSpec, params: &[f64], rho: &DensityMatrix) -> Dense {
    let u = unitary_oracle(spec, params);
    mul(&mul(&u, &to_dense(rho.matrix())), &dagger(&u))
}

/// Random circuit over every gate kind, with some parameter slots shared.
pub fn random_circuit(rng: &mut impl Rng, n: usize, n_ops: usize) -> (CircuitSpec, Vec<f64>) {
    let num_params = rng.random_range(1..=4);
    let kinds = [
        GateKind::Rx,
        GateKind::Ry,
        GateKind::Rz,
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::H,
        GateKind::Cnot,
    ];
    let mut ops = Vec::new();
    for _ in 0..n_ops {
        let kind = kinds[rng.random_range(0..kinds.len())];
        let target = rng.random_range(0..n);
        let op = match kind {
            GateKind::Cnot if n >= 2 => {
                let mut control = rng.random_range(0..n);
                while control == target {
                    control = rng.random_range(0..n);
                }
                GateOp::cnot(control, target)
            }
            GateKind::Cnot => GateOp::fixed(GateKind::H, target),
            GateKind::Rx | GateKind::Ry | GateKind::Rz => {
                if rng.random_bool(0.75) {
                    GateOp::rotation(kind, target, rng.random_range(0..num_params))
                } else {
                    GateOp::fixed_rotation(kind, target, rng.random_range(-4.0..4.0))
                }
            }
            _ => GateOp::fixed(kind, target),
        };
        ops.push(op);
    }
    let params = (0..num_params).map(|_| rng.random_range(-3.5..3.5)).collect();
    (CircuitSpec::new(n, num_params, ops).unwrap(), params)
}

/// Random model on `data_qubits` plus the ancilla, parameterised by rotations only.
pub fn random_model(rng: &mut impl Rng, data_qubits: usize) -> ClassifierModel {
    let n = data_qubits + 1;
    let num_params = rng.random_range(2..=6);
    let mut ops = Vec::new();
    for _ in 0..rng.random_range(4..14) {
        let target = rng.random_range(0..n);
        let op = match rng.random_range(0..5) {
            0 => GateOp::rotation(GateKind::Rx, target, rng.random_range(0..num_params)),
            1 => GateOp::rotation(GateKind::Ry, target, rng.random_range(0..num_params)),
            2 => GateOp::rotation(GateKind::Rz, target, rng.random_range(0..num_params)),
            3 => GateOp::fixed(GateKind::H, target),
            _ => {
                let mut control = rng.random_range(0..n);
                while control == target {
                    control = rng.random_range(0..n);
                }
                GateOp::cnot(control, target)
            }
        };
        ops.push(op);
    }
    // Make sure the read-out qubit is touched by a parameter.
    ops.push(GateOp::rotation(GateKind::Ry, data_qubits, 0));
    let spec = CircuitSpec::new(n, num_params, ops).unwrap();
    let params = (0..num_params).map(|_| rng.random_range(-3.0..3.0)).collect();
    let enc = EncodingScheme {
        kind: EncodingKind::Amplitude,
        num_qubits: data_qubits,
    };
    ClassifierModel::new(spec, params, enc).unwrap()
}

/// Central finite difference of `f` in every coordinate.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[j] += step;
            minus[j] -= step;
            (f(&plus) - f(&minus)) / (2.0 * step)
        })
        .collect()
}

/// X on every qubit in `mask` (bit i of the mask is qubit i).
fn pauli_x_string(n: usize, mask: usize) -> Dense {
    let x = single_qubit(GateKind::X, 0.0);
    (0..n).fold(vec![vec![c(1.0, 0.0)]], |acc, q| {
        kron(&acc, &if mask >> q & 1 == 1 { x.clone() } else { eye(2) })
    })
}

/// g·Σ_S ∏_{i∈S} tan θᵢ · y_k(X_S σ X_S), enumerating every subset S as a bitmask.
pub fn subset_enumeration(
    y_fn: impl Fn(&DensityMatrix) -> Vec<f64>,
    sigma: &DensityMatrix,
    angles: &[f64],
    k: usize,
) -> f64 {
    let n = angles.len();
    let g: f64 = angles.iter().map(|a| a.cos()).product();
    let rho = to_dense(sigma.matrix());
    let mut total = 0.0;
    for mask in 0..(1usize << n) {
        let weight: f64 = (0..n).filter(|q| mask >> q & 1 == 1).map(|q| angles[q].tan()).product();
        let xs = pauli_x_string(n, mask);
        let flipped = mul(&mul(&xs, &rho), &xs);
        let m = ComplexMatrix::from_rows(&flipped).unwrap();
        let state = DensityMatrix::new(m).unwrap();
        total += weight * y_fn(&state)[k];
    }
    g * total
}

pub fn sample(angles: &[f64]) -> NoiseSample {
    NoiseSample::from_angles(angles.to_vec()).unwrap()
}

/// Reference experiment: default configuration trained once per test binary.
pub fn reference() -> &'static (ExperimentConfig, TrainOutcome) {
    static REF: OnceLock<(ExperimentConfig, TrainOutcome)> = OnceLock::new();
    REF.get_or_init(|| {
        let cfg = ExperimentConfig::default();
        let out = train_model(&cfg).expect("reference training");
        (cfg, out)
    })
}
