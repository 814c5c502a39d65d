//! Dense complex linear algebra for small quantum registers.
//!
//! Matrices are stored row-major. Qubit 0 is the most significant bit of a
//! basis index, so the state |q0 q1 ... q(n-1)> sits at index
//! `q0 * 2^(n-1) + ... + q(n-1)`.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest register the simulator will build.
pub const MAX_QUBITS: usize = 10;

/// Elementwise Hermiticity slack for density matrices.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Allowed deviation of a density matrix trace from one.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues above `-PSD_SLACK` count as non-negative.
pub const PSD_SLACK: f64 = 1e-9;

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting ragged or non-finite input.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidMatrix("ragged rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    /// Outer product |a><b|.
    pub fn outer(a: &[Complex64], b: &[Complex64]) -> Self {
        let mut m = Self::zeros(a.len(), b.len());
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                m.data[i * b.len() + j] = ai * bj.conj();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: rhs.rows,
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    fn check_same_shape(&self, rhs: &Self) -> Result<()> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                actual: rhs.rows * rhs.cols,
            });
        }
        Ok(())
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check_same_shape(rhs)?;
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Ok(Self { data, ..*self })
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.check_same_shape(rhs)?;
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Ok(Self { data, ..*self })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            data: self.data.iter().map(|z| z * factor).collect(),
            ..*self
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols))
            .map(|i| self.data[i * self.cols + i])
            .sum()
    }

    /// Tr(self * rhs) without forming the product.
    pub fn trace_product(&self, rhs: &Self) -> Result<Complex64> {
        if self.cols != rhs.rows || self.rows != rhs.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: rhs.rows,
            });
        }
        let mut acc = ZERO;
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self.data[i * self.cols + k] * rhs.data[k * rhs.cols + i];
            }
        }
        Ok(acc)
    }

    /// Largest elementwise |a - b|.
    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest elementwise deviation from Hermiticity, `max |m_ij - conj(m_ji)|`.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        dev
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub(crate) fn hermitize(&mut self) {
        let n = self.rows;
        for i in 0..n {
            self.data[i * n + i].im = 0.0;
            for j in (i + 1)..n {
                let avg = (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5;
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Kronecker product `a ⊗ b`, bounded by [`MAX_QUBITS`].
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    tensor_bounded(a, b, MAX_QUBITS)
}

/// Kronecker product with an explicit qubit limit on either output dimension.
pub fn tensor_bounded(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    max_qubits: usize,
) -> Result<ComplexMatrix> {
    let limit = 1usize
        .checked_shl(max_qubits as u32)
        .ok_or(Error::TooManyQubits {
            qubits: max_qubits,
            max: max_qubits,
        })?;
    let too_big = |x: usize, y: usize| x.checked_mul(y).is_none_or(|d| d > limit);
    if too_big(a.rows, b.rows) || too_big(a.cols, b.cols) {
        let dim = a.rows.saturating_mul(b.rows).max(a.cols.saturating_mul(b.cols));
        return Err(Error::TooManyQubits {
            qubits: usize::BITS as usize - dim.leading_zeros() as usize - 1,
            max: max_qubits,
        });
    }
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let x = a.data[ar * a.cols + ac];
            if x == ZERO {
                continue;
            }
            for br in 0..b.rows {
                let dst = (ar * b.rows + br) * cols + ac * b.cols;
                let src = &b.data[br * b.cols..(br + 1) * b.cols];
                for (d, y) in out.data[dst..dst + b.cols].iter_mut().zip(src) {
                    *d = x * y;
                }
            }
        }
    }
    Ok(out)
}

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// Returns eigenvalues in ascending order and a unitary whose columns are the
/// matching eigenvectors.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !m.is_square() {
        return Err(Error::InvalidMatrix(format!(
            "eigen-decomposition of a non-square {}x{} matrix",
            m.rows, m.cols
        )));
    }
    let scale = m.data.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let dev = m.hermitian_deviation();
    if dev > 1e-9 * scale {
        return Err(Error::NotHermitian(dev));
    }

    let n = m.rows;
    let mut a = m.clone();
    a.hermitize();
    let mut v = ComplexMatrix::identity(n);
    let threshold = JACOBI_TOL * a.frobenius_norm().max(1.0);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.data[i * n + j].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                jacobi_rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.data[i * n + i].re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors.data[r * n + new_col] = v.data[r * n + old_col];
        }
    }
    Ok((values, vectors))
}

/// Annihilates a[p][q] with the unitary J = diag(1, e^{-iφ}) · [[c, s], [-s, c]].
fn jacobi_rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let n = a.rows;
    let apq = a.data[p * n + q];
    let r = apq.norm();
    if r < f64::MIN_POSITIVE {
        return;
    }
    let phase = apq.conj() / r;
    let app = a.data[p * n + p].re;
    let aqq = a.data[q * n + q].re;
    let theta = 0.5 * (2.0 * r).atan2(aqq - app);
    let (s, c) = theta.sin_cos();

    // A <- A J
    for k in 0..n {
        let akp = a.data[k * n + p];
        let akq = a.data[k * n + q];
        a.data[k * n + p] = akp * c - akq * phase * s;
        a.data[k * n + q] = akp * s + akq * phase * c;
    }
    // A <- J† A
    let phase_c = phase.conj();
    for k in 0..n {
        let apk = a.data[p * n + k];
        let aqk = a.data[q * n + k];
        a.data[p * n + k] = apk * c - aqk * phase_c * s;
        a.data[q * n + k] = apk * s + aqk * phase_c * c;
    }
    a.data[p * n + q] = ZERO;
    a.data[q * n + p] = ZERO;
    a.data[p * n + p].im = 0.0;
    a.data[q * n + q].im = 0.0;

    for k in 0..n {
        let vkp = v.data[k * n + p];
        let vkq = v.data[k * n + q];
        v.data[k * n + p] = vkp * c - vkq * phase * s;
        v.data[k * n + q] = vkp * s + vkq * phase * c;
    }
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    hermitian_eigen(m).map(|(values, _)| values)
}

fn num_qubits_for_dim(dim: usize) -> Option<usize> {
    (dim.is_power_of_two()).then(|| dim.trailing_zeros() as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let num_qubits = num_qubits_for_dim(amplitudes.len()).ok_or_else(|| {
            Error::InvalidState(format!(
                "{} amplitudes is not a power of two",
                amplitudes.len()
            ))
        })?;
        if num_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits {
                qubits: num_qubits,
                max: MAX_QUBITS,
            });
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!(
                "squared norm {norm} differs from 1"
            )));
        }
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(
            amplitudes
                .iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect(),
        )
    }

    /// Computational basis state |index> on `num_qubits` qubits.
    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(Error::InvalidState(format!(
                "basis index {index} out of range for {num_qubits} qubits"
            )));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Self::new(amps)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            num_qubits: self.num_qubits,
            matrix: ComplexMatrix::outer(&self.amplitudes, &self.amplitudes),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidState("density matrix must be square".into()));
        }
        let num_qubits = num_qubits_for_dim(matrix.rows).ok_or_else(|| {
            Error::InvalidState(format!("dimension {} is not a power of two", matrix.rows))
        })?;
        if num_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits {
                qubits: num_qubits,
                max: MAX_QUBITS,
            });
        }
        let dev = matrix.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {dev:.3e})"
            )));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_eig = hermitian_eigenvalues(&matrix)?[0];
        if min_eig < -PSD_SLACK {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { num_qubits, matrix })
    }

    /// Wraps a matrix produced by a trace-preserving, completely positive map of a
    /// valid state. Callers guarantee the invariants.
    pub(crate) fn from_matrix_unchecked(matrix: ComplexMatrix) -> Self {
        debug_assert!(matrix.is_square() && matrix.rows.is_power_of_two());
        Self {
            num_qubits: matrix.rows.trailing_zeros() as usize,
            matrix,
        }
    }

    pub fn from_state(state: &StateVector) -> Self {
        state.to_density()
    }

    /// |index><index| on `num_qubits` qubits.
    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        StateVector::basis(num_qubits, index).map(|s| s.to_density())
    }

    pub fn maximally_mixed(num_qubits: usize) -> Result<Self> {
        if num_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits {
                qubits: num_qubits,
                max: MAX_QUBITS,
            });
        }
        let dim = 1usize << num_qubits;
        Ok(Self {
            num_qubits,
            matrix: ComplexMatrix::identity(dim).scale(Complex64::new(1.0 / dim as f64, 0.0)),
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.matrix
            .trace_product(&self.matrix)
            .map(|z| z.re)
            .unwrap_or(f64::NAN)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// `self ⊗ other`, qubits of `self` first.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(Self::from_matrix_unchecked(tensor(&self.matrix, &other.matrix)?))
    }

    /// Convex combination `(1 - weight) * self + weight * other`.
    pub fn mix(&self, other: &DensityMatrix, weight: f64) -> Result<DensityMatrix> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidInput(format!(
                "mixing weight {weight} outside [0, 1]"
            )));
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let data = self
            .matrix
            .data
            .iter()
            .zip(&other.matrix.data)
            .map(|(a, b)| a * (1.0 - weight) + b * weight)
            .collect();
        Ok(Self::from_matrix_unchecked(ComplexMatrix {
            data,
            ..self.matrix
        }))
    }

    /// Conjugation `u ρ u†` by a unitary of matching dimension.
    pub fn conjugate(&self, u: &ComplexMatrix) -> Result<DensityMatrix> {
        let mut out = u.matmul(&self.matrix)?.matmul(&u.adjoint())?;
        out.hermitize();
        Ok(Self::from_matrix_unchecked(out))
    }
}

/// Trace distance `½ Σ |λ_i|` over the eigenvalues of `sigma - rho`.
pub fn trace_distance(sigma: &DensityMatrix, rho: &DensityMatrix) -> Result<f64> {
    if sigma.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            actual: rho.dim(),
        });
    }
    let diff = sigma.matrix.sub(&rho.matrix)?;
    let eig = hermitian_eigenvalues(&diff)?;
    let tau = 0.5 * eig.iter().map(|l| l.abs()).sum::<f64>();
    Ok(tau.clamp(0.0, 1.0))
}

/// Reduced state on the qubits in `keep`, in ascending qubit order.
pub fn partial_trace(state: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let n = state.num_qubits;
    if keep.is_empty() {
        return Err(Error::InvalidInput("partial trace keeps no qubits".into()));
    }
    if let Some(&bad) = keep.iter().find(|&&q| q >= n) {
        return Err(Error::QubitOutOfRange {
            index: bad,
            num_qubits: n,
        });
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let traced: Vec<usize> = (0..n).filter(|q| !kept.contains(q)).collect();

    // Scatter the bits of a compact index into the listed qubit positions.
    let scatter = |qubits: &[usize], value: usize| -> usize {
        let m = qubits.len();
        qubits.iter().enumerate().fold(0, |acc, (pos, &q)| {
            let bit = (value >> (m - 1 - pos)) & 1;
            acc | (bit << (n - 1 - q))
        })
    };

    let kdim = 1usize << kept.len();
    let tdim = 1usize << traced.len();
    let full = state.dim();
    let kept_idx: Vec<usize> = (0..kdim).map(|a| scatter(&kept, a)).collect();
    let traced_idx: Vec<usize> = (0..tdim).map(|t| scatter(&traced, t)).collect();

    let mut out = ComplexMatrix::zeros(kdim, kdim);
    for (a, &ia) in kept_idx.iter().enumerate() {
        for (b, &ib) in kept_idx.iter().enumerate() {
            out.data[a * kdim + b] = traced_idx
                .iter()
                .map(|&t| state.matrix.data[(ia | t) * full + (ib | t)])
                .sum();
        }
    }
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// Random states and unitaries for tests, audits and attack searches.
pub mod random {
    use num_complex::Complex64;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::{ComplexMatrix, DensityMatrix, StateVector};
    use crate::error::Result;

    fn gaussian(rng: &mut impl Rng) -> Complex64 {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }

    /// Haar-random pure state.
    pub fn pure_state(num_qubits: usize, rng: &mut impl Rng) -> StateVector {
        let dim = 1usize << num_qubits;
        let mut amps: Vec<Complex64> = (0..dim).map(|_| gaussian(rng)).collect();
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|z| *z /= norm);
        StateVector::new(amps).expect("normalized Gaussian vector is a valid state")
    }

    /// Random mixed state `G G† / Tr(G G†)` from a Ginibre matrix of the given rank.
    pub fn density(num_qubits: usize, rank: usize, rng: &mut impl Rng) -> DensityMatrix {
        let dim = 1usize << num_qubits;
        let rank = rank.clamp(1, dim);
        let g = ComplexMatrix {
            rows: dim,
            cols: rank,
            data: (0..dim * rank).map(|_| gaussian(rng)).collect(),
        };
        let mut m = g.matmul(&g.adjoint()).expect("shapes agree");
        let tr = m.trace().re;
        m = m.scale(Complex64::new(1.0 / tr, 0.0));
        m.hermitize();
        DensityMatrix::from_matrix_unchecked(m)
    }

    /// Haar-random unitary via Gram-Schmidt on a Ginibre matrix.
    pub fn unitary(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
        let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
        while cols.len() < dim {
            let mut v: Vec<Complex64> = (0..dim).map(|_| gaussian(rng)).collect();
            for u in &cols {
                let proj: Complex64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                v.iter_mut().zip(u).for_each(|(x, a)| *x -= proj * a);
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-8 {
                continue;
            }
            v.iter_mut().for_each(|z| *z /= norm);
            cols.push(v);
        }
        let mut m = ComplexMatrix::zeros(dim, dim);
        for (c, col) in cols.iter().enumerate() {
            for (r, z) in col.iter().enumerate() {
                m[(r, c)] = *z;
            }
        }
        m
    }

    /// exp(-i·scale·H) for a random Hermitian H with unit Frobenius norm; close to
    /// the identity when `scale` is small.
    pub fn near_identity_unitary(dim: usize, scale: f64, rng: &mut impl Rng) -> Result<ComplexMatrix> {
        let mut h = ComplexMatrix {
            rows: dim,
            cols: dim,
            data: (0..dim * dim).map(|_| gaussian(rng)).collect(),
        };
        h.hermitize();
        let norm = h.frobenius_norm();
        h = h.scale(Complex64::new(1.0 / norm, 0.0));
        let (values, vectors) = super::hermitian_eigen(&h)?;
        let phases: Vec<Complex64> = values
            .iter()
            .map(|&l| Complex64::from_polar(1.0, -scale * l))
            .collect();
        let mut scaled = vectors.clone();
        for r in 0..dim {
            for (c, p) in phases.iter().enumerate() {
                scaled[(r, c)] *= p;
            }
        }
        scaled.matmul(&vectors.adjoint())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::diagonal(&[1.0, -1.0])
    }

    #[test]
    fn identity_tensor_identity() {
        let i4 = tensor(&ComplexMatrix::identity(2), &ComplexMatrix::identity(2)).unwrap();
        assert_eq!(i4, ComplexMatrix::identity(4));
    }

    #[test]
    fn projector_tensor_projector() {
        let p0 = ComplexMatrix::diagonal(&[1.0, 0.0]);
        let p1 = ComplexMatrix::diagonal(&[0.0, 1.0]);
        assert_eq!(
            tensor(&p0, &p1).unwrap(),
            ComplexMatrix::diagonal(&[0.0, 1.0, 0.0, 0.0])
        );
    }

    #[test]
    fn tensor_matches_index_oracle() {
        let a = pauli_x();
        let b = pauli_z();
        let k = tensor(&a, &b).unwrap();
        for ir in 0..2 {
            for ic in 0..2 {
                for jr in 0..2 {
                    for jc in 0..2 {
                        assert_eq!(k[(ir * 2 + jr, ic * 2 + jc)], a[(ir, ic)] * b[(jr, jc)]);
                    }
                }
            }
        }
    }

    #[test]
    fn tensor_rejects_oversized_products() {
        let big = ComplexMatrix::identity(1 << 6);
        let err = tensor(&big, &big).unwrap_err();
        assert!(matches!(err, Error::TooManyQubits { qubits: 12, max: 10 }));
        assert!(tensor_bounded(&big, &big, 12).is_ok());
    }

    #[test]
    fn eigenvalues_of_diagonal_and_pauli() {
        let ev = hermitian_eigenvalues(&ComplexMatrix::diagonal(&[0.7, 0.3])).unwrap();
        assert!((ev[0] - 0.3).abs() < 1e-15 && (ev[1] - 0.7).abs() < 1e-15);
        let ev = hermitian_eigenvalues(&pauli_x()).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvectors_diagonalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = random::density(3, 8, &mut rng);
        let (vals, vecs) = hermitian_eigen(rho.matrix()).unwrap();
        let d = vecs.adjoint().matmul(rho.matrix()).unwrap().matmul(&vecs).unwrap();
        assert!(d.max_abs_diff(&ComplexMatrix::diagonal(&vals)) < 1e-12);
        let uu = vecs.adjoint().matmul(&vecs).unwrap();
        assert!(uu.max_abs_diff(&ComplexMatrix::identity(8)) < 1e-12);
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let m = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]])
            .unwrap();
        assert!(matches!(hermitian_eigenvalues(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn trace_distance_examples() {
        let zero = DensityMatrix::basis(1, 0).unwrap();
        let one = DensityMatrix::basis(1, 1).unwrap();
        let mixed = DensityMatrix::maximally_mixed(1).unwrap();
        assert_eq!(trace_distance(&zero, &zero).unwrap(), 0.0);
        assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < 1e-15);
        assert!((trace_distance(&zero, &mixed).unwrap() - 0.5).abs() < 1e-15);
        let two = DensityMatrix::basis(2, 0).unwrap();
        assert!(matches!(
            trace_distance(&zero, &two),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn partial_trace_examples() {
        let zz = DensityMatrix::basis(2, 0).unwrap();
        let r = partial_trace(&zz, &[0]).unwrap();
        assert_eq!(r, DensityMatrix::basis(1, 0).unwrap());

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::from_real(&[s, 0.0, 0.0, s]).unwrap().to_density();
        let r = partial_trace(&bell, &[0]).unwrap();
        assert!(r
            .matrix()
            .max_abs_diff(DensityMatrix::maximally_mixed(1).unwrap().matrix())
            < 1e-15);
    }

    #[test]
    fn partial_trace_errors() {
        let zz = DensityMatrix::basis(2, 0).unwrap();
        assert!(matches!(partial_trace(&zz, &[]), Err(Error::InvalidInput(_))));
        assert!(matches!(
            partial_trace(&zz, &[2]),
            Err(Error::QubitOutOfRange { index: 2, num_qubits: 2 })
        ));
    }

    #[test]
    fn partial_trace_of_product_recovers_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random::density(1, 2, &mut rng);
        let b = random::density(2, 4, &mut rng);
        let ab = a.tensor(&b).unwrap();
        let ra = partial_trace(&ab, &[0]).unwrap();
        assert!(ra.matrix().max_abs_diff(a.matrix()) < 1e-10);
        let rb = partial_trace(&ab, &[1, 2]).unwrap();
        assert!(rb.matrix().max_abs_diff(b.matrix()) < 1e-10);
        // Non-contiguous keep set on a 3-qubit product of single-qubit states.
        let c1 = random::density(1, 2, &mut rng);
        let abc = a.tensor(&random::density(1, 2, &mut rng)).unwrap().tensor(&c1).unwrap();
        let rac = partial_trace(&abc, &[2, 0]).unwrap();
        assert!(rac.matrix().max_abs_diff(a.tensor(&c1).unwrap().matrix()) < 1e-10);
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(ComplexMatrix::diagonal(&[0.5, 0.5])).is_ok());
        assert!(DensityMatrix::new(ComplexMatrix::diagonal(&[0.6, 0.5])).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::diagonal(&[1.2, -0.2])).is_err());
        let nonherm = ComplexMatrix::from_rows(&[
            vec![c(0.5, 0.0), c(0.1, 0.1)],
            vec![c(0.1, 0.1), c(0.5, 0.0)],
        ])
        .unwrap();
        assert!(DensityMatrix::new(nonherm).is_err());
        assert!(ComplexMatrix::from_vec(1, 1, vec![c(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn state_vector_validation() {
        assert!(StateVector::from_real(&[0.6, 0.8]).is_ok());
        assert!(StateVector::from_real(&[0.6, 0.6]).is_err());
        assert!(StateVector::from_real(&[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn near_identity_unitary_is_unitary_and_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random::near_identity_unitary(4, 0.01, &mut rng).unwrap();
        let uu = u.adjoint().matmul(&u).unwrap();
        assert!(uu.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-12);
        assert!(u.max_abs_diff(&ComplexMatrix::identity(4)) < 0.02);
    }
}
