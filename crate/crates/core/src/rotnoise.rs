//! Random-rotation input noise: RX(θᵢ) on every data qubit with random angles.
//!
//! Noisy predictions ỹ_k(σ) average the classifier over angle draws. Two
//! evaluation paths are provided: Monte-Carlo over rotated states, and the
//! equivalent averaged effects M_k = E[R† A_k R] that make repeated queries
//! on many states cheap.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{apply_circuit, CircuitSpec, GateKind, GateOp};
use crate::error::{Error, Result};
use crate::qla::{ComplexMatrix, DensityMatrix};
use crate::seed;
use crate::stats::neumaier_sum;
use crate::vqc::{estimate_from_probs, probabilities_from_effects, ClassifierModel, Sampling};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleMode {
    /// θ = arctan(u) with u ~ U(h1, h2).
    TanBounded,
    /// θ ~ U(0, uniform_h).
    UniformAngle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub n: usize,
    pub h1: f64,
    pub h2: f64,
    pub t: f64,
    pub angle_mode: AngleMode,
    pub uniform_h: f64,
}

impl NoiseConfig {
    pub fn tan_bounded(n: usize, h1: f64, h2: f64, t: f64) -> Self {
        Self {
            n,
            h1,
            h2,
            t,
            angle_mode: AngleMode::TanBounded,
            uniform_h: h2.atan(),
        }
    }

    pub fn uniform(n: usize, uniform_h: f64, t: f64) -> Self {
        Self {
            n,
            h1: 0.0,
            h2: uniform_h.tan(),
            t,
            angle_mode: AngleMode::UniformAngle,
            uniform_h,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidNoiseConfig(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if !(self.t.is_finite() && self.t >= 0.0) {
            return bad(format!("t = {} must be finite and non-negative", self.t));
        }
        match self.angle_mode {
            AngleMode::TanBounded => {
                if !(self.h1.is_finite() && self.h2.is_finite()) {
                    return bad("h1 and h2 must be finite".into());
                }
                if !(0.0 <= self.h1 && self.h1 < self.h2) {
                    return bad(format!("need 0 <= h1 < h2, got h1 = {}, h2 = {}", self.h1, self.h2));
                }
            }
            AngleMode::UniformAngle => {
                if !(self.uniform_h > 0.0 && self.uniform_h < FRAC_PI_2) {
                    return bad(format!("uniform_h = {} must lie in (0, π/2)", self.uniform_h));
                }
            }
        }
        Ok(())
    }

    /// The noise magnitude h used by the margin and sample-complexity bounds:
    /// h1 for tan-bounded draws, tan(uniform_h) for uniform angles.
    pub fn margin_h(&self) -> f64 {
        match self.angle_mode {
            AngleMode::TanBounded => self.h1,
            AngleMode::UniformAngle => self.uniform_h.tan(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSample {
    angles: Vec<f64>,
    weight_g: f64,
}

impl NoiseSample {
    /// A sample with the given angles, bypassing the sampler.
    pub fn from_angles(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() || angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidInput("noise angles must be finite and non-empty".into()));
        }
        let weight_g = angles.iter().map(|a| a.cos()).product();
        Ok(Self { angles, weight_g })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::from_angles(vec![0.0; n])
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// ∏ cos θᵢ.
    pub fn weight_g(&self) -> f64 {
        self.weight_g
    }

    pub fn num_qubits(&self) -> usize {
        self.angles.len()
    }

    fn circuit(&self) -> Result<CircuitSpec> {
        let ops = self
            .angles
            .iter()
            .enumerate()
            .map(|(q, &a)| GateOp::fixed_rotation(GateKind::Rx, q, a))
            .collect();
        CircuitSpec::new(self.angles.len(), 0, ops)
    }

    /// ⊗ RX(θᵢ).
    pub fn unitary(&self) -> Result<ComplexMatrix> {
        self.circuit()?.unitary(&[])
    }
}

pub fn sample_noise(cfg: &NoiseConfig, seed: u64) -> Result<NoiseSample> {
    cfg.validate()?;
    let mut rng = seed::rng(seed);
    let angles = (0..cfg.n)
        .map(|_| match cfg.angle_mode {
            AngleMode::TanBounded => {
                // Redraw on the (measure-zero) endpoint so the bound stays strict.
                loop {
                    let u: f64 = rng.random_range(cfg.h1..cfg.h2);
                    if u > cfg.h1 {
                        break u.atan();
                    }
                }
            }
            AngleMode::UniformAngle => rng.random_range(0.0..cfg.uniform_h),
        })
        .collect();
    NoiseSample::from_angles(angles)
}

/// Seed of noise draw `index` under a master seed.
fn draw_seed(seed: u64, index: usize) -> u64 {
    seed::derive_path(seed, &[index as u64, 0])
}

fn shot_seed(seed: u64, index: usize) -> u64 {
    seed::derive_path(seed, &[index as u64, 1])
}

/// `n_noise` draws with per-draw derived seeds.
pub fn sample_noise_batch(cfg: &NoiseConfig, n_noise: usize, seed: u64) -> Result<Vec<NoiseSample>> {
    (0..n_noise).map(|j| sample_noise(cfg, draw_seed(seed, j))).collect()
}

/// RX(θᵢ) on qubit i.
pub fn apply_rotation_noise(state: &DensityMatrix, sample: &NoiseSample) -> Result<DensityMatrix> {
    if state.num_qubits() != sample.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: sample.num_qubits(),
            actual: state.num_qubits(),
        });
    }
    apply_circuit(&sample.circuit()?, &[], state)
}

fn check_noise_dims(model: &ClassifierModel, sigma: &DensityMatrix, n: usize) -> Result<()> {
    if n != model.num_data_qubits() {
        return Err(Error::InvalidNoiseConfig(format!(
            "noise acts on {n} qubits but the model has {} data qubits",
            model.num_data_qubits()
        )));
    }
    if sigma.num_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: sigma.num_qubits(),
        });
    }
    Ok(())
}

/// Monte-Carlo noisy prediction: the mean over `n_noise` angle draws of the
/// exact or shot-based prediction on the rotated state.
pub fn noisy_predict_mc(
    model: &ClassifierModel,
    sigma: &DensityMatrix,
    cfg: &NoiseConfig,
    n_noise: usize,
    sampling: Sampling,
    seed: u64,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if n_noise == 0 {
        return Err(Error::InvalidInput("n_noise must be at least 1".into()));
    }
    let samples = sample_noise_batch(cfg, n_noise, seed)?;
    noisy_predict_with_samples(model, sigma, &samples, sampling, seed)
}

/// As [`noisy_predict_mc`] with explicit noise draws.
pub fn noisy_predict_with_samples(
    model: &ClassifierModel,
    sigma: &DensityMatrix,
    samples: &[NoiseSample],
    sampling: Sampling,
    seed: u64,
) -> Result<Vec<f64>> {
    let Some(first) = samples.first() else {
        return Err(Error::InvalidInput("at least one noise sample is required".into()));
    };
    check_noise_dims(model, sigma, first.num_qubits())?;
    if let Sampling::Shots(0) = sampling {
        return Err(Error::InvalidInput("n_shots must be at least 1".into()));
    }
    let effects = model.data_effects()?;
    let per_draw: Vec<Vec<f64>> = samples
        .par_iter()
        .enumerate()
        .map(|(j, s)| {
            let rotated = apply_rotation_noise(sigma, s)?;
            let probs = probabilities_from_effects(&effects, &rotated)?;
            match sampling {
                Sampling::Exact => Ok(probs),
                Sampling::Shots(n) => estimate_from_probs(&probs, n, shot_seed(seed, j)).map(|(e, _)| e),
            }
        })
        .collect::<Result<_>>()?;
    let k = model.num_classes();
    let m = per_draw.len() as f64;
    Ok((0..k)
        .map(|c| (neumaier_sum(per_draw.iter().map(|p| p[c])) / m).clamp(0.0, 1.0))
        .collect())
}

/// Noise-averaged effects M_k = (1/N) Σⱼ Rⱼ† A_k Rⱼ, so that the exact noisy
/// prediction is ỹ_k(σ) = Tr(M_k σ) for every σ.
#[derive(Debug, Clone)]
pub struct NoisyEffects {
    effects: Vec<ComplexMatrix>,
    num_qubits: usize,
}

impl NoisyEffects {
    /// Uses the same draws as [`noisy_predict_mc`] with the same seed.
    pub fn new(model: &ClassifierModel, cfg: &NoiseConfig, n_noise: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if n_noise == 0 {
            return Err(Error::InvalidInput("n_noise must be at least 1".into()));
        }
        if cfg.n != model.num_data_qubits() {
            return Err(Error::InvalidNoiseConfig(format!(
                "noise acts on {} qubits but the model has {} data qubits",
                cfg.n,
                model.num_data_qubits()
            )));
        }
        let samples = sample_noise_batch(cfg, n_noise, seed)?;
        Self::from_samples(model, &samples)
    }

    pub fn from_samples(model: &ClassifierModel, samples: &[NoiseSample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("at least one noise sample is required".into()));
        }
        let base = model.data_effects()?;
        let dim = base[0].rows();
        let conjugated: Vec<Vec<ComplexMatrix>> = samples
            .par_iter()
            .map(|s| {
                let r = s.unitary()?;
                let rd = r.adjoint();
                base.iter().map(|a| rd.matmul(a)?.matmul(&r)).collect()
            })
            .collect::<Result<_>>()?;
        let m = samples.len() as f64;
        let mut effects = Vec::with_capacity(base.len());
        for k in 0..base.len() {
            let mut data = Vec::with_capacity(dim * dim);
            for idx in 0..dim * dim {
                let re = neumaier_sum(conjugated.iter().map(|c| c[k].as_slice()[idx].re)) / m;
                let im = neumaier_sum(conjugated.iter().map(|c| c[k].as_slice()[idx].im)) / m;
                data.push(num_complex::Complex64::new(re, im));
            }
            let mut e = ComplexMatrix::from_vec(dim, dim, data)?;
            e.hermitize();
            effects.push(e);
        }
        Ok(Self {
            effects,
            num_qubits: samples[0].num_qubits(),
        })
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn predict(&self, sigma: &DensityMatrix) -> Result<Vec<f64>> {
        if sigma.num_qubits() != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                actual: sigma.num_qubits(),
            });
        }
        probabilities_from_effects(&self.effects, sigma)
    }
}

/// X_q σ X_q.
pub fn flip_qubit(sigma: &DensityMatrix, qubit: usize) -> Result<DensityMatrix> {
    let n = sigma.num_qubits();
    if qubit >= n {
        return Err(Error::QubitOutOfRange { index: qubit, num_qubits: n });
    }
    let mask = 1usize << (n - 1 - qubit);
    let dim = sigma.dim();
    let src = sigma.matrix();
    let mut out = ComplexMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            out[(r, c)] = src[(r ^ mask, c ^ mask)];
        }
    }
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

fn check_sample(sigma: &DensityMatrix, sample: &NoiseSample) -> Result<()> {
    if sigma.num_qubits() != sample.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: sample.num_qubits(),
            actual: sigma.num_qubits(),
        });
    }
    Ok(())
}

/// Subset expansion of the noisy prediction:
///
/// g·y_k(σ) + g·Σ_{S≠∅} (∏_{i∈S} tan θᵢ)·y_k(X_S σ X_S), with g = ∏ cos θᵢ.
pub fn eq1_superposition<F>(y_fn: F, sigma: &DensityMatrix, sample: &NoiseSample, k: usize) -> Result<f64>
where
    F: Fn(&DensityMatrix) -> Result<Vec<f64>>,
{
    check_sample(sigma, sample)?;
    // Walk the qubits, branching into "keep" and "flip with weight tan θ".
    fn walk<F>(y_fn: &F, state: &DensityMatrix, tans: &[f64], qubit: usize, weight: f64, k: usize) -> Result<f64>
    where
        F: Fn(&DensityMatrix) -> Result<Vec<f64>>,
    {
        if qubit == tans.len() {
            let y = y_fn(state)?;
            return y
                .get(k)
                .map(|v| weight * v)
                .ok_or_else(|| Error::InvalidInput(format!("class {k} out of range")));
        }
        let keep = walk(y_fn, state, tans, qubit + 1, weight, k)?;
        if tans[qubit] == 0.0 {
            return Ok(keep);
        }
        let flipped = flip_qubit(state, qubit)?;
        let flip = walk(y_fn, &flipped, tans, qubit + 1, weight * tans[qubit], k)?;
        Ok(keep + flip)
    }
    let tans: Vec<f64> = sample.angles.iter().map(|a| a.tan()).collect();
    Ok(sample.weight_g * walk(&y_fn, sigma, &tans, 0, 1.0, k)?)
}

/// Alternative reading with a product of single-flip probabilities per subset:
///
/// g·y_k(σ) + g·Σ_{S≠∅} ∏_{i∈S} tan θᵢ·y_k(Xᵢ σ Xᵢ).
///
/// Kept for comparison only.
pub fn eq1_product_form<F>(y_fn: F, sigma: &DensityMatrix, sample: &NoiseSample, k: usize) -> Result<f64>
where
    F: Fn(&DensityMatrix) -> Result<Vec<f64>>,
{
    check_sample(sigma, sample)?;
    let base = y_fn(sigma)?[k];
    // Σ over non-empty subsets of ∏ aᵢ equals ∏(1 + aᵢ) − 1.
    let mut prod = 1.0;
    for (q, a) in sample.angles.iter().enumerate() {
        let yq = y_fn(&flip_qubit(sigma, q)?)?[k];
        prod *= 1.0 + a.tan() * yq;
    }
    Ok(sample.weight_g * (base + prod - 1.0))
}
