//! Gate-level circuits acting on density matrices, POVM read-out and shot sampling.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qla::{self, ComplexMatrix, DensityMatrix, ONE, ZERO};
use crate::seed;

/// Unitarity tolerance for gate matrices.
pub const UNITARY_TOL: f64 = 1e-12;
/// Tolerance for POVM positivity and completeness.
pub const POVM_TOL: f64 = 1e-9;
/// Allowed deviation of a probability vector's sum from one.
pub const PROB_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    X,
    Y,
    Z,
    H,
    Cnot,
}

impl GateKind {
    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }

    /// Fixed gates that are their own inverse.
    pub fn is_self_inverse(self) -> bool {
        !self.is_rotation()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    #[serde(default)]
    pub control: Option<usize>,
    #[serde(default)]
    pub param_slot: Option<usize>,
    #[serde(default)]
    pub fixed_angle: Option<f64>,
}

impl GateOp {
    fn bare(kind: GateKind, target: usize) -> Self {
        Self {
            kind,
            target,
            control: None,
            param_slot: None,
            fixed_angle: None,
        }
    }

    /// Trainable rotation reading its angle from `params[slot]`.
    pub fn rotation(kind: GateKind, target: usize, slot: usize) -> Self {
        Self {
            param_slot: Some(slot),
            ..Self::bare(kind, target)
        }
    }

    /// Rotation by a constant angle.
    pub fn fixed_rotation(kind: GateKind, target: usize, angle: f64) -> Self {
        Self {
            fixed_angle: Some(angle),
            ..Self::bare(kind, target)
        }
    }

    pub fn fixed(kind: GateKind, target: usize) -> Self {
        Self::bare(kind, target)
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self {
            control: Some(control),
            ..Self::bare(GateKind::Cnot, target)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.is_rotation() {
            if self.param_slot.is_some() == self.fixed_angle.is_some() {
                return Err(Error::InvalidGate(format!(
                    "{:?} needs exactly one of param_slot and fixed_angle",
                    self.kind
                )));
            }
            if let Some(a) = self.fixed_angle {
                if !a.is_finite() {
                    return Err(Error::InvalidGate("non-finite fixed angle".into()));
                }
            }
        } else if self.param_slot.is_some() || self.fixed_angle.is_some() {
            return Err(Error::InvalidGate(format!(
                "{:?} takes no angle",
                self.kind
            )));
        }
        match (self.kind, self.control) {
            (GateKind::Cnot, None) => Err(Error::InvalidGate("CNOT without control".into())),
            (GateKind::Cnot, Some(c)) if c == self.target => Err(Error::InvalidGate(
                "CNOT control equals target".into(),
            )),
            (GateKind::Cnot, Some(_)) => Ok(()),
            (_, Some(_)) => Err(Error::InvalidGate(format!(
                "{:?} takes no control qubit",
                self.kind
            ))),
            (_, None) => Ok(()),
        }
    }

    /// The gate undoing this one: negated angle for rotations, itself otherwise.
    pub fn inverse(&self) -> Self {
        let mut inv = self.clone();
        if let Some(a) = inv.fixed_angle.as_mut() {
            *a = -*a;
        }
        inv
    }
}

type Mat2 = [[Complex64; 2]; 2];

fn rotation_2x2(kind: GateKind, angle: f64) -> Mat2 {
    let (s, c) = (angle / 2.0).sin_cos();
    let cc = Complex64::new(c, 0.0);
    match kind {
        GateKind::Rx => [
            [cc, Complex64::new(0.0, -s)],
            [Complex64::new(0.0, -s), cc],
        ],
        GateKind::Ry => [
            [cc, Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), cc],
        ],
        GateKind::Rz => [
            [Complex64::new(c, -s), ZERO],
            [ZERO, Complex64::new(c, s)],
        ],
        _ => unreachable!("not a rotation"),
    }
}

fn fixed_2x2(kind: GateKind) -> Mat2 {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match kind {
        GateKind::X => [[ZERO, ONE], [ONE, ZERO]],
        GateKind::Y => [[ZERO, -i], [i, ZERO]],
        GateKind::Z => [[ONE, ZERO], [ZERO, -ONE]],
        GateKind::H => [[h, h], [h, -h]],
        _ => unreachable!("not a fixed single-qubit gate"),
    }
}

/// Matrix of a gate: 2×2 for single-qubit kinds, 4×4 for CNOT with the control
/// as the more significant qubit.
///
/// `angle` must be given exactly when the gate is a rotation bound to a
/// parameter slot.
pub fn gate_matrix(op: &GateOp, angle: Option<f64>) -> Result<ComplexMatrix> {
    op.validate()?;
    let resolved = match (op.param_slot, op.fixed_angle, angle) {
        (Some(_), _, Some(a)) => Some(a),
        (Some(slot), _, None) => {
            return Err(Error::InvalidGate(format!(
                "missing angle for parameter slot {slot}"
            )))
        }
        (None, _, Some(_)) => {
            return Err(Error::InvalidGate(format!(
                "superfluous angle for {:?} without a parameter slot",
                op.kind
            )))
        }
        (None, fixed, None) => fixed,
    };
    if let Some(a) = resolved {
        if !a.is_finite() {
            return Err(Error::InvalidGate("non-finite angle".into()));
        }
    }
    if op.kind == GateKind::Cnot {
        let mut m = ComplexMatrix::zeros(4, 4);
        m[(0, 0)] = ONE;
        m[(1, 1)] = ONE;
        m[(2, 3)] = ONE;
        m[(3, 2)] = ONE;
        return Ok(m);
    }
    let u = match resolved {
        Some(a) => rotation_2x2(op.kind, a),
        None => fixed_2x2(op.kind),
    };
    ComplexMatrix::from_rows(&[u[0].to_vec(), u[1].to_vec()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitSpecDoc", into = "CircuitSpecDoc")]
pub struct CircuitSpec {
    num_qubits: usize,
    num_params: usize,
    ops: Vec<GateOp>,
}

#[derive(Serialize, Deserialize)]
struct CircuitSpecDoc {
    num_qubits: usize,
    num_params: usize,
    ops: Vec<GateOp>,
}

impl TryFrom<CircuitSpecDoc> for CircuitSpec {
    type Error = Error;

    fn try_from(doc: CircuitSpecDoc) -> Result<Self> {
        CircuitSpec::new(doc.num_qubits, doc.num_params, doc.ops)
    }
}

impl From<CircuitSpec> for CircuitSpecDoc {
    fn from(spec: CircuitSpec) -> Self {
        Self {
            num_qubits: spec.num_qubits,
            num_params: spec.num_params,
            ops: spec.ops,
        }
    }
}

impl CircuitSpec {
    pub fn new(num_qubits: usize, num_params: usize, ops: Vec<GateOp>) -> Result<Self> {
        if num_qubits == 0 || num_qubits > qla::MAX_QUBITS {
            return Err(Error::InvalidCircuit(format!(
                "qubit count {num_qubits} outside 1..={}",
                qla::MAX_QUBITS
            )));
        }
        for (i, op) in ops.iter().enumerate() {
            op.validate()
                .map_err(|e| Error::InvalidCircuit(format!("op {i}: {e}")))?;
            for q in std::iter::once(op.target).chain(op.control) {
                if q >= num_qubits {
                    return Err(Error::InvalidCircuit(format!(
                        "op {i}: qubit {q} out of range for {num_qubits} qubits"
                    )));
                }
            }
            if let Some(slot) = op.param_slot {
                if slot >= num_params {
                    return Err(Error::InvalidCircuit(format!(
                        "op {i}: parameter slot {slot} >= {num_params}"
                    )));
                }
            }
        }
        Ok(Self {
            num_qubits,
            num_params,
            ops,
        })
    }

    pub fn empty(num_qubits: usize) -> Result<Self> {
        Self::new(num_qubits, 0, Vec::new())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    /// Circuit undoing this one: reversed order, rotation angles negated.
    ///
    /// Parameterized rotations are turned into fixed rotations by `-params[slot]`,
    /// so the inverse takes no parameters.
    pub fn inverse(&self, params: &[f64]) -> Result<Self> {
        self.check_params(params)?;
        let ops = self
            .ops
            .iter()
            .rev()
            .map(|op| match op.param_slot {
                Some(slot) => GateOp::fixed_rotation(op.kind, op.target, -params[slot]),
                None => op.inverse(),
            })
            .collect();
        Self::new(self.num_qubits, 0, ops)
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params {
            return Err(Error::DimensionMismatch {
                expected: self.num_params,
                actual: params.len(),
            });
        }
        Ok(())
    }

    /// Angle of op `index`, with `shift` added when it targets that op.
    fn angle_of(&self, index: usize, params: &[f64], shift: Option<(usize, f64)>) -> f64 {
        let op = &self.ops[index];
        let base = match op.param_slot {
            Some(slot) => params[slot],
            None => op.fixed_angle.unwrap_or(0.0),
        };
        match shift {
            Some((i, delta)) if i == index => base + delta,
            _ => base,
        }
    }

    /// Conjugates `m` in place by every gate, in order. `m` is any square
    /// operator on the full register.
    pub(crate) fn evolve(
        &self,
        params: &[f64],
        shift: Option<(usize, f64)>,
        m: &mut ComplexMatrix,
    ) {
        let n = self.num_qubits;
        for (i, op) in self.ops.iter().enumerate() {
            match op.kind {
                GateKind::Cnot => apply_cnot(m, n, op.control.expect("validated"), op.target),
                k if k.is_rotation() => {
                    let u = rotation_2x2(k, self.angle_of(i, params, shift));
                    conjugate_1q(m, n, op.target, &u);
                }
                k => conjugate_1q(m, n, op.target, &fixed_2x2(k)),
            }
        }
    }

    /// Full unitary of the circuit.
    pub fn unitary(&self, params: &[f64]) -> Result<ComplexMatrix> {
        self.check_params(params)?;
        let n = self.num_qubits;
        let mut u = ComplexMatrix::identity(1 << n);
        for (i, op) in self.ops.iter().enumerate() {
            match op.kind {
                GateKind::Cnot => {
                    permute_rows_cnot(&mut u, n, op.control.expect("validated"), op.target)
                }
                k if k.is_rotation() => {
                    left_1q(&mut u, n, op.target, &rotation_2x2(k, self.angle_of(i, params, None)))
                }
                k => left_1q(&mut u, n, op.target, &fixed_2x2(k)),
            }
        }
        Ok(u)
    }

    /// Parameterized ops with their index in the op list.
    pub(crate) fn parameterized_ops(&self) -> impl Iterator<Item = (usize, &GateOp)> {
        self.ops
            .iter()
            .enumerate()
            .filter(|(_, op)| op.param_slot.is_some())
    }
}

fn bit_mask(num_qubits: usize, qubit: usize) -> usize {
    1 << (num_qubits - 1 - qubit)
}

/// Rows: m <- U m.
fn left_1q(m: &mut ComplexMatrix, num_qubits: usize, qubit: usize, u: &Mat2) {
    let mask = bit_mask(num_qubits, qubit);
    let dim = m.rows();
    let cols = m.cols();
    let data = m.as_mut_slice();
    for i0 in (0..dim).filter(|i| i & mask == 0) {
        let i1 = i0 | mask;
        for j in 0..cols {
            let a = data[i0 * cols + j];
            let b = data[i1 * cols + j];
            data[i0 * cols + j] = u[0][0] * a + u[0][1] * b;
            data[i1 * cols + j] = u[1][0] * a + u[1][1] * b;
        }
    }
}

/// m <- U m U†.
fn conjugate_1q(m: &mut ComplexMatrix, num_qubits: usize, qubit: usize, u: &Mat2) {
    left_1q(m, num_qubits, qubit, u);
    let mask = bit_mask(num_qubits, qubit);
    let dim = m.cols();
    let rows = m.rows();
    let data = m.as_mut_slice();
    let uc = [
        [u[0][0].conj(), u[0][1].conj()],
        [u[1][0].conj(), u[1][1].conj()],
    ];
    for r in 0..rows {
        let row = &mut data[r * dim..(r + 1) * dim];
        for j0 in (0..dim).filter(|j| j & mask == 0) {
            let j1 = j0 | mask;
            let a = row[j0];
            let b = row[j1];
            row[j0] = a * uc[0][0] + b * uc[0][1];
            row[j1] = a * uc[1][0] + b * uc[1][1];
        }
    }
}

fn permute_rows_cnot(m: &mut ComplexMatrix, num_qubits: usize, control: usize, target: usize) {
    let cm = bit_mask(num_qubits, control);
    let tm = bit_mask(num_qubits, target);
    let cols = m.cols();
    let rows = m.rows();
    let data = m.as_mut_slice();
    for i in (0..rows).filter(|i| i & cm != 0 && i & tm == 0) {
        let k = i | tm;
        for j in 0..cols {
            data.swap(i * cols + j, k * cols + j);
        }
    }
}

fn apply_cnot(m: &mut ComplexMatrix, num_qubits: usize, control: usize, target: usize) {
    permute_rows_cnot(m, num_qubits, control, target);
    let cm = bit_mask(num_qubits, control);
    let tm = bit_mask(num_qubits, target);
    let dim = m.cols();
    let rows = m.rows();
    let data = m.as_mut_slice();
    for r in 0..rows {
        for j in (0..dim).filter(|j| j & cm != 0 && j & tm == 0) {
            data.swap(r * dim + j, r * dim + (j | tm));
        }
    }
}

/// Runs the circuit on a density matrix: ρ ↦ U ρ U†.
pub fn apply_circuit(
    spec: &CircuitSpec,
    params: &[f64],
    input: &DensityMatrix,
) -> Result<DensityMatrix> {
    apply_circuit_shifted(spec, params, input, None)
}

/// As [`apply_circuit`] with op `shift.0` rotated by an extra `shift.1` radians.
pub fn apply_circuit_shifted(
    spec: &CircuitSpec,
    params: &[f64],
    input: &DensityMatrix,
    shift: Option<(usize, f64)>,
) -> Result<DensityMatrix> {
    spec.check_params(params)?;
    if input.num_qubits() != spec.num_qubits {
        return Err(Error::DimensionMismatch {
            expected: spec.num_qubits,
            actual: input.num_qubits(),
        });
    }
    let mut m = input.matrix().clone();
    spec.evolve(params, shift, &mut m);
    m.hermitize();
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// Measurement effects, one per class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    effects: Vec<ComplexMatrix>,
}

impl Povm {
    pub fn new(effects: Vec<ComplexMatrix>) -> Result<Self> {
        let first = effects
            .first()
            .ok_or_else(|| Error::InvalidPovm("no effects".into()))?;
        let dim = first.rows();
        let mut total = ComplexMatrix::zeros(dim, dim);
        for (k, e) in effects.iter().enumerate() {
            if !e.is_square() || e.rows() != dim {
                return Err(Error::InvalidPovm(format!("effect {k} has the wrong shape")));
            }
            let min = qla::hermitian_eigenvalues(e)
                .map_err(|err| Error::InvalidPovm(format!("effect {k}: {err}")))?[0];
            if min < -POVM_TOL {
                return Err(Error::InvalidPovm(format!(
                    "effect {k} has negative eigenvalue {min:.3e}"
                )));
            }
            total = total.add(e)?;
        }
        let gap = total.max_abs_diff(&ComplexMatrix::identity(dim));
        if gap > POVM_TOL {
            return Err(Error::InvalidPovm(format!(
                "effects sum to identity only within {gap:.3e}"
            )));
        }
        Ok(Self { effects })
    }

    /// Projectors I ⊗ |k><k| ⊗ I onto the computational basis of one qubit.
    pub fn computational_basis(num_qubits: usize, qubit: usize) -> Result<Self> {
        if qubit >= num_qubits {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                num_qubits,
            });
        }
        let dim = 1usize << num_qubits;
        let mask = bit_mask(num_qubits, qubit);
        let effects = (0..2)
            .map(|k| {
                let diag: Vec<f64> = (0..dim)
                    .map(|i| if ((i & mask != 0) as usize) == k { 1.0 } else { 0.0 })
                    .collect();
                ComplexMatrix::diagonal(&diag)
            })
            .collect();
        Ok(Self { effects })
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn num_outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn dim(&self) -> usize {
        self.effects[0].rows()
    }
}

/// Outcome probabilities p_k = Tr(Π_k ρ), clamped to [0, 1].
pub fn class_probabilities(state: &DensityMatrix, povm: &Povm) -> Result<Vec<f64>> {
    if state.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            actual: state.dim(),
        });
    }
    povm.effects
        .iter()
        .map(|e| Ok(e.trace_product(state.matrix())?.re.clamp(0.0, 1.0)))
        .collect()
}

pub(crate) fn validate_probabilities(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidProbabilities("empty".into()));
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < -PROB_SUM_TOL) {
        return Err(Error::InvalidProbabilities(format!("entry {p}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidProbabilities(format!("sum {sum}")));
    }
    Ok(())
}

/// Multinomial draw of `n_shots` outcomes, as chained binomials on a ChaCha8 stream.
pub fn sample_shots(probs: &[f64], n_shots: u64, seed: u64) -> Result<Vec<u64>> {
    validate_probabilities(probs)?;
    if n_shots == 0 {
        return Err(Error::InvalidInput("n_shots must be at least 1".into()));
    }
    let mut rng = seed::rng(seed);
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = n_shots;
    let mut mass = 1.0_f64;
    let last = probs.len() - 1;
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k == last {
            counts[k] = remaining;
            break;
        }
        let p = p.max(0.0);
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(remaining, q)
            .map_err(|e| Error::InvalidProbabilities(e.to_string()))?
            .sample(&mut rng);
        counts[k] = draw;
        remaining -= draw;
        mass -= p;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn assert_unitary(u: &ComplexMatrix) {
        let uu = u.adjoint().matmul(u).unwrap();
        assert!(uu.max_abs_diff(&ComplexMatrix::identity(u.rows())) < UNITARY_TOL);
    }

    #[test]
    fn rx_zero_is_identity() {
        let m = gate_matrix(&GateOp::rotation(GateKind::Rx, 0, 0), Some(0.0)).unwrap();
        assert!(m.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn rx_pi_is_minus_i_x() {
        let m = gate_matrix(&GateOp::rotation(GateKind::Rx, 0, 0), Some(PI)).unwrap();
        let x = gate_matrix(&GateOp::fixed(GateKind::X, 0), None).unwrap();
        let expected = x.scale(Complex64::new(0.0, -1.0));
        assert!(m.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn pauli_x_matrix() {
        let x = gate_matrix(&GateOp::fixed(GateKind::X, 0), None).unwrap();
        assert_eq!(
            x,
            ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
        );
    }

    #[test]
    fn every_gate_is_unitary() {
        for kind in [GateKind::Rx, GateKind::Ry, GateKind::Rz] {
            for a in [-2.0, 0.3, 1.7, 5.0] {
                assert_unitary(&gate_matrix(&GateOp::rotation(kind, 0, 0), Some(a)).unwrap());
                assert_unitary(&gate_matrix(&GateOp::fixed_rotation(kind, 0, a), None).unwrap());
            }
        }
        for kind in [GateKind::X, GateKind::Y, GateKind::Z, GateKind::H] {
            assert_unitary(&gate_matrix(&GateOp::fixed(kind, 0), None).unwrap());
        }
        assert_unitary(&gate_matrix(&GateOp::cnot(0, 1), None).unwrap());
    }

    #[test]
    fn gate_matrix_angle_errors() {
        let slot = GateOp::rotation(GateKind::Ry, 0, 0);
        assert!(gate_matrix(&slot, None).is_err());
        let fixed = GateOp::fixed_rotation(GateKind::Ry, 0, 0.2);
        assert!(gate_matrix(&fixed, Some(0.1)).is_err());
        assert!(gate_matrix(&GateOp::fixed(GateKind::H, 0), Some(0.1)).is_err());
    }

    #[test]
    fn gate_op_invariants() {
        let mut both = GateOp::rotation(GateKind::Rx, 0, 0);
        both.fixed_angle = Some(1.0);
        assert!(both.validate().is_err());
        assert!(GateOp::fixed(GateKind::Rx, 0).validate().is_err());
        assert!(GateOp::cnot(1, 1).validate().is_err());
        let mut x_ctrl = GateOp::fixed(GateKind::X, 0);
        x_ctrl.control = Some(1);
        assert!(x_ctrl.validate().is_err());
        let mut x_slot = GateOp::fixed(GateKind::X, 0);
        x_slot.param_slot = Some(0);
        assert!(x_slot.validate().is_err());
    }

    #[test]
    fn circuit_spec_validation() {
        assert!(CircuitSpec::new(2, 1, vec![GateOp::rotation(GateKind::Rx, 0, 1)]).is_err());
        assert!(CircuitSpec::new(2, 1, vec![GateOp::fixed(GateKind::X, 2)]).is_err());
        assert!(CircuitSpec::new(2, 0, vec![GateOp::cnot(0, 3)]).is_err());
        assert!(CircuitSpec::new(0, 0, vec![]).is_err());
    }

    #[test]
    fn empty_circuit_is_identity_channel() {
        let spec = CircuitSpec::empty(1).unwrap();
        let rho = DensityMatrix::basis(1, 0).unwrap();
        assert_eq!(apply_circuit(&spec, &[], &rho).unwrap(), rho);
    }

    #[test]
    fn x_flips_zero_to_one() {
        let spec = CircuitSpec::new(1, 0, vec![GateOp::fixed(GateKind::X, 0)]).unwrap();
        let out = apply_circuit(&spec, &[], &DensityMatrix::basis(1, 0).unwrap()).unwrap();
        assert_eq!(out, DensityMatrix::basis(1, 1).unwrap());
    }

    #[test]
    fn cnot_control_is_first_listed_qubit() {
        // |10> -> |11> with control 0; |01> untouched.
        let spec = CircuitSpec::new(2, 0, vec![GateOp::cnot(0, 1)]).unwrap();
        let out = apply_circuit(&spec, &[], &DensityMatrix::basis(2, 0b10).unwrap()).unwrap();
        assert_eq!(out, DensityMatrix::basis(2, 0b11).unwrap());
        let out = apply_circuit(&spec, &[], &DensityMatrix::basis(2, 0b01).unwrap()).unwrap();
        assert_eq!(out, DensityMatrix::basis(2, 0b01).unwrap());
    }

    #[test]
    fn apply_circuit_checks_shapes() {
        let spec = CircuitSpec::new(1, 1, vec![GateOp::rotation(GateKind::Rx, 0, 0)]).unwrap();
        let rho = DensityMatrix::basis(1, 0).unwrap();
        assert!(apply_circuit(&spec, &[], &rho).is_err());
        assert!(apply_circuit(&spec, &[0.1], &DensityMatrix::basis(2, 0).unwrap()).is_err());
    }

    #[test]
    fn class_probability_examples() {
        let povm = Povm::computational_basis(1, 0).unwrap();
        let p = class_probabilities(&DensityMatrix::basis(1, 0).unwrap(), &povm).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
        let p = class_probabilities(&DensityMatrix::maximally_mixed(1).unwrap(), &povm).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        assert!(class_probabilities(&DensityMatrix::basis(2, 0).unwrap(), &povm).is_err());
    }

    #[test]
    fn povm_validation() {
        assert!(Povm::new(vec![ComplexMatrix::diagonal(&[1.0, 0.0])]).is_err());
        assert!(Povm::new(vec![
            ComplexMatrix::diagonal(&[1.5, 0.0]),
            ComplexMatrix::diagonal(&[-0.5, 1.0]),
        ])
        .is_err());
        assert!(Povm::new(vec![
            ComplexMatrix::diagonal(&[0.3, 0.6]),
            ComplexMatrix::diagonal(&[0.7, 0.4]),
        ])
        .is_ok());
        assert!(Povm::new(vec![]).is_err());
    }

    #[test]
    fn shots_degenerate_and_deterministic() {
        assert_eq!(sample_shots(&[1.0, 0.0], 1234, 9).unwrap(), vec![1234, 0]);
        assert_eq!(sample_shots(&[0.0, 1.0], 17, 9).unwrap(), vec![0, 17]);
        let a = sample_shots(&[0.2, 0.5, 0.3], 1000, 42).unwrap();
        assert_eq!(a, sample_shots(&[0.2, 0.5, 0.3], 1000, 42).unwrap());
        assert_eq!(a.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn shots_balanced_coin_concentrates() {
        let n = 1_000_000;
        let counts = sample_shots(&[0.5, 0.5], n, 2024).unwrap();
        assert!((counts[0] as f64 / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn shots_reject_bad_input() {
        assert!(sample_shots(&[0.5, 0.6], 10, 0).is_err());
        assert!(sample_shots(&[1.1, -0.1], 10, 0).is_err());
        assert!(sample_shots(&[0.5, 0.5], 0, 0).is_err());
        assert!(sample_shots(&[], 1, 0).is_err());
    }

    #[test]
    fn circuit_json_round_trip_and_validation() {
        let spec = CircuitSpec::new(
            2,
            1,
            vec![GateOp::rotation(GateKind::Ry, 0, 0), GateOp::cnot(0, 1)],
        )
        .unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"CNOT\""));
        assert_eq!(serde_json::from_str::<CircuitSpec>(&text).unwrap(), spec);
        let bad = r#"{"num_qubits":1,"num_params":0,"ops":[{"kind":"RX","target":0,"param_slot":0}]}"#;
        assert!(serde_json::from_str::<CircuitSpec>(bad).is_err());
    }
}
