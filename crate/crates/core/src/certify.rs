//! Robustness certification of noisy classifiers.
//!
//! Formulas: the noise-margin test, the sample-complexity bound, the privacy
//! budget ε = ln(1 + τ/tⁿ), the certified radius τ = (√B − 1)tⁿ and the two
//! certification inequalities. On top of those sit the per-input report, an
//! empirical privacy audit and an adversarial search used to probe the radius.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qla::{hermitian_eigen, random, trace_distance, ComplexMatrix, DensityMatrix};
use crate::rotnoise::{noisy_predict_mc, NoiseConfig, NoisyEffects};
use crate::seed;
use crate::vqc::{argmax, predict_exact, ClassifierModel, Sampling};

/// Denominator floor for the class-probability ratio.
pub const RATIO_FLOOR: f64 = 1e-12;
/// Relative shrink applied to the reported radius so that the certification
/// inequality holds strictly rather than with equality.
pub const RADIUS_SHRINK: f64 = 1e-9;
pub const DEFAULT_N_NOISE: usize = 4096;

/// y_c > (1 + h)ⁿ / 2.
pub fn lemma1_margin_ok(y_c: f64, h: f64, n: usize) -> bool {
    y_c > (1.0 + h).powi(n as i32) / 2.0
}

/// N = ⌈ln(2/(1−β)) / (8(ξ − (1+h)ⁿ + 1)²)⌉, at least 1.
pub fn prop1_sample_complexity(xi: f64, h: f64, n: usize, beta: f64) -> Result<u64> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::InvalidInput(format!("margin {xi} must lie in (0, 1]")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidInput(format!("beta {beta} must lie in (0, 1)")));
    }
    if !(h.is_finite() && h >= 0.0) {
        return Err(Error::InvalidInput(format!("h {h} must be finite and non-negative")));
    }
    let gap = xi - (1.0 + h).powi(n as i32) + 1.0;
    if gap <= 0.0 {
        return Err(Error::NoFiniteSampleComplexity(gap));
    }
    let n_req = ((2.0 / (1.0 - beta)).ln() / (8.0 * gap * gap)).ceil();
    Ok((n_req as u64).max(1))
}

fn check_t(t: f64) -> Result<()> {
    if t == 0.0 {
        return Err(Error::TZero);
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidInput(format!("t = {t} must be positive and finite")));
    }
    Ok(())
}

/// ε = ln(1 + τ/tⁿ).
pub fn lemma2_epsilon(tau_d: f64, t: f64, n: usize) -> Result<f64> {
    check_t(t)?;
    if !(0.0..=1.0).contains(&tau_d) {
        return Err(Error::InvalidInput(format!("trace distance {tau_d} outside [0, 1]")));
    }
    Ok((tau_d / t.powi(n as i32)).ln_1p())
}

/// (√B − 1)·tⁿ clamped to [0, 1].
pub fn theorem3_radius(b: f64, t: f64, n: usize) -> Result<f64> {
    check_t(t)?;
    if b.is_nan() || b <= 0.0 {
        return Err(Error::InvalidInput(format!("ratio B = {b} must be positive")));
    }
    Ok(((b.sqrt() - 1.0) * t.powi(n as i32)).clamp(0.0, 1.0))
}

/// Largest and second-largest entries.
fn top_two(y: &[f64]) -> (f64, f64) {
    let c = argmax(y);
    let second = y
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != c)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    (y[c], second)
}

/// max_k y_k > e^{2ε}·(second largest).
pub fn theorem1_certified(y_noisy: &[f64], epsilon: f64) -> bool {
    if y_noisy.len() < 2 {
        return false;
    }
    let (top, second) = top_two(y_noisy);
    top > (2.0 * epsilon).exp() * second
}

/// 1 − 2 exp(−2Nζ²), clamped to [0, 1].
pub fn hoeffding_confidence(n_samples: u64, zeta: f64) -> f64 {
    (1.0 - 2.0 * (-2.0 * n_samples as f64 * zeta * zeta).exp()).clamp(0.0, 1.0)
}

/// Verdict of y_C − ζ > e^{2ε}·max_{k≠C}(y_k + ζ) with its confidence.
pub fn theorem2_certified(y_est: &[f64], epsilon: f64, zeta: f64, n_samples: u64) -> (bool, f64) {
    let confidence = hoeffding_confidence(n_samples, zeta);
    if y_est.len() < 2 {
        return (false, confidence);
    }
    let (top, second) = top_two(y_est);
    (top - zeta > (2.0 * epsilon).exp() * (second + zeta), confidence)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    NotCertified,
    UncertifiableTZero,
}

impl Verdict {
    /// Process exit status for this verdict.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Certified => 0,
            Verdict::NotCertified => 2,
            Verdict::UncertifiableTZero => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub n_noise: usize,
    /// Shots per noise draw; `None` evaluates each draw exactly.
    pub n_shots: Option<u64>,
    pub zeta: f64,
    pub beta: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            n_noise: DEFAULT_N_NOISE,
            n_shots: None,
            zeta: 0.05,
            beta: 0.95,
        }
    }
}

impl CertifyOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_noise == 0 {
            return Err(Error::Config("n_noise must be at least 1".into()));
        }
        if self.n_shots == Some(0) {
            return Err(Error::Config("n_shots must be at least 1".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!("beta {} must lie in (0, 1)", self.beta)));
        }
        if self.n_shots.is_some() && !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::Config(format!("zeta {} must be positive", self.zeta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub certify_seed: u64,
    pub config_sha256: String,
    pub model_sha256: String,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub predicted_class: usize,
    pub y_noiseless: Vec<f64>,
    pub y_noisy: Vec<f64>,
    /// y_C − max_{k≠C} y_k on the noiseless prediction.
    pub xi: f64,
    /// ỹ_C / ỹ_other on the noisy prediction.
    #[serde(rename = "B")]
    pub b: f64,
    /// (ỹ_C − ζ) / (ỹ_other + ζ) under finite sampling.
    pub b_lower: Option<f64>,
    pub epsilon: Option<f64>,
    pub tau_d: f64,
    pub n_required: Option<u64>,
    pub beta: f64,
    pub zeta: f64,
    pub n_samples: Option<u64>,
    pub confidence: f64,
    pub margin_h: f64,
    pub lemma1_margin_ok: bool,
    pub t: f64,
    pub t_lower_bound_ok: bool,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
    pub provenance: Option<Provenance>,
}

fn report_notes(cfg: &NoiseConfig) -> Vec<String> {
    let mut notes = vec![
        "n_required uses the stated sample-complexity formula; its derivation carries an extra factor g = prod cos(theta) that the formula omits".to_string(),
        "the sample-complexity bound is evaluated at the noiseless margin xi, not at the privacy budget epsilon".to_string(),
    ];
    notes.push(match cfg.angle_mode {
        crate::rotnoise::AngleMode::TanBounded => "margin h is the lower tan bound h1".to_string(),
        crate::rotnoise::AngleMode::UniformAngle => "margin h is tan(uniform_h)".to_string(),
    });
    notes
}

/// Full certification of one input state.
pub fn certify_input(
    model: &ClassifierModel,
    sigma: &DensityMatrix,
    cfg: &NoiseConfig,
    opts: &CertifyOptions,
    seed: u64,
) -> Result<CertificationReport> {
    cfg.validate()?;
    opts.validate()?;
    let y = predict_exact(model, sigma)?;
    let sampling = opts.n_shots.map_or(Sampling::Exact, Sampling::Shots);
    let y_noisy = noisy_predict_mc(model, sigma, cfg, opts.n_noise, sampling, seed)?;
    let n = cfg.n;

    let c0 = argmax(&y);
    let (top0, second0) = top_two(&y);
    let xi = top0 - second0;
    let margin_h = cfg.margin_h();
    let mut warnings = Vec::new();
    let n_required = match prop1_sample_complexity(xi, margin_h, n, opts.beta) {
        Ok(v) => Some(v),
        Err(e) => {
            warnings.push(format!("no finite sample complexity: {e}"));
            None
        }
    };

    let c = argmax(&y_noisy);
    let (top, second) = top_two(&y_noisy);
    let b = top / second.max(RATIO_FLOOR);
    let n_samples = opts.n_shots.map(|s| s * opts.n_noise as u64);
    let b_lower = opts
        .n_shots
        .map(|_| ((top - opts.zeta) / (second + opts.zeta)).max(0.0));
    let confidence = n_samples.map_or(1.0, |ns| hoeffding_confidence(ns, opts.zeta));
    if c != c0 {
        warnings.push(format!("noisy prediction {c} differs from noiseless prediction {c0}"));
    }

    let mut report = CertificationReport {
        predicted_class: c,
        y_noiseless: y.clone(),
        y_noisy: y_noisy.clone(),
        xi,
        b,
        b_lower,
        epsilon: None,
        tau_d: 0.0,
        n_required,
        beta: opts.beta,
        zeta: opts.zeta,
        n_samples,
        confidence,
        margin_h,
        lemma1_margin_ok: lemma1_margin_ok(top0, margin_h, n),
        t: cfg.t,
        t_lower_bound_ok: false,
        verdict: Verdict::NotCertified,
        warnings,
        notes: report_notes(cfg),
        provenance: None,
    };

    if cfg.t == 0.0 {
        report.verdict = Verdict::UncertifiableTZero;
        report
            .warnings
            .push("t = 0: the privacy budget diverges and the certified radius is zero".into());
        return Ok(report);
    }

    let floor = cfg.t.powi(n as i32);
    let min_noisy = y_noisy.iter().copied().fold(f64::INFINITY, f64::min);
    report.t_lower_bound_ok = min_noisy >= floor;
    if !report.t_lower_bound_ok {
        report.warnings.push(format!(
            "lower bound violated: min noisy probability {min_noisy:.6} < t^n = {floor:.6}"
        ));
    }

    let b_used = b_lower.unwrap_or(b);
    let tau_d = if b_used > 0.0 {
        theorem3_radius(b_used, cfg.t, n)? * (1.0 - RADIUS_SHRINK)
    } else {
        0.0
    };
    let epsilon = lemma2_epsilon(tau_d, cfg.t, n)?;
    report.tau_d = tau_d;
    report.epsilon = Some(epsilon);

    let holds = match n_samples {
        None => theorem1_certified(&y_noisy, epsilon),
        Some(ns) => theorem2_certified(&y_noisy, epsilon, opts.zeta, ns).0,
    };
    if tau_d > 0.0 && !holds {
        report
            .warnings
            .push("certified radius fails its own inequality; treated as not certified".into());
    }
    report.verdict = if tau_d > 0.0 && holds && report.t_lower_bound_ok {
        Verdict::Certified
    } else {
        Verdict::NotCertified
    };
    Ok(report)
}

fn check_radius(tau_d: f64) -> Result<()> {
    if !(tau_d > 0.0 && tau_d <= 1.0) {
        return Err(Error::InvalidInput(format!("radius {tau_d} must lie in (0, 1]")));
    }
    Ok(())
}

/// Moves `rho` toward `sigma` along the segment joining them until the trace
/// distance is at most `tau_d`.
pub fn project_to_ball(sigma: &DensityMatrix, rho: &DensityMatrix, tau_d: f64) -> Result<DensityMatrix> {
    let d = trace_distance(sigma, rho)?;
    if d <= tau_d {
        return Ok(rho.clone());
    }
    // Trace distance is linear along the segment.
    let s = tau_d / d;
    sigma.mix(rho, s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditPair {
    pub index: usize,
    pub trace_distance: f64,
    pub log_ratio: f64,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub n_pairs: usize,
    pub tau_d: f64,
    pub t: f64,
    pub analytic_epsilon: f64,
    pub empirical_max: f64,
    pub worst_pair: Option<AuditPair>,
    /// Candidate pairs discarded because a state violated the lower bound.
    pub rejected: usize,
    pub findings: Vec<AuditPair>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.findings.is_empty() && self.empirical_max <= self.analytic_epsilon
    }
}

/// Empirical privacy audit with the default number of noise draws.
pub fn audit_dp(
    model: &ClassifierModel,
    cfg: &NoiseConfig,
    tau_d: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<AuditReport> {
    let oracle = NoisyEffects::new(model, cfg, DEFAULT_N_NOISE, seed::derive(seed, 0))?;
    audit_dp_with(&oracle, cfg, tau_d, n_pairs, seed::derive(seed, 1))
}

/// Samples `n_pairs` state pairs (σ, ρ) with trace distance at most `tau_d`
/// and records max_k |ln(ỹ_k(ρ)/ỹ_k(σ))| against ln(1 + τ/tⁿ).
///
/// Only pairs where both states satisfy ỹ_k ≥ tⁿ count toward the audit.
pub fn audit_dp_with(
    oracle: &NoisyEffects,
    cfg: &NoiseConfig,
    tau_d: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<AuditReport> {
    check_radius(tau_d)?;
    cfg.validate()?;
    let analytic_epsilon = lemma2_epsilon(tau_d, cfg.t, cfg.n)?;
    let floor = cfg.t.powi(cfg.n as i32);
    let max_attempts = 64;

    let results: Vec<(Option<AuditPair>, usize)> = (0..n_pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng(seed::derive(seed, i as u64));
            for attempt in 0..max_attempts {
                let (sigma, rho) = audit_pair(cfg.n, tau_d, i, &mut rng)?;
                let ys = oracle.predict(&sigma)?;
                let yr = oracle.predict(&rho)?;
                let ok = |y: &[f64]| y.iter().all(|&v| v >= floor);
                if !(ok(&ys) && ok(&yr)) {
                    continue;
                }
                let (class, log_ratio) = ys
                    .iter()
                    .zip(&yr)
                    .map(|(a, b)| (b / a).ln().abs())
                    .enumerate()
                    .fold((0, 0.0), |best, (k, v)| if v > best.1 { (k, v) } else { best });
                let pair = AuditPair {
                    index: i,
                    trace_distance: trace_distance(&sigma, &rho)?,
                    log_ratio,
                    class,
                };
                return Ok((Some(pair), attempt));
            }
            Ok((None, max_attempts))
        })
        .collect::<Result<_>>()?;

    let rejected = results.iter().map(|(_, r)| r).sum();
    let pairs: Vec<AuditPair> = results.into_iter().filter_map(|(p, _)| p).collect();
    let worst_pair = pairs
        .iter()
        .fold(None::<&AuditPair>, |best, p| match best {
            Some(b) if b.log_ratio >= p.log_ratio => Some(b),
            _ => Some(p),
        })
        .cloned();
    let findings = pairs
        .iter()
        .filter(|p| p.log_ratio > analytic_epsilon)
        .cloned()
        .collect();
    Ok(AuditReport {
        n_pairs: pairs.len(),
        tau_d,
        t: cfg.t,
        analytic_epsilon,
        empirical_max: worst_pair.as_ref().map_or(0.0, |p| p.log_ratio),
        worst_pair,
        rejected,
        findings,
    })
}

/// Random σ and a perturbation ρ within `tau_d`: even pairs mix σ with a
/// random state so the distance is exactly `tau_d`; odd pairs conjugate σ by a
/// near-identity unitary and project onto the ball.
fn audit_pair(
    n: usize,
    tau_d: f64,
    index: usize,
    rng: &mut seed::Rng,
) -> Result<(DensityMatrix, DensityMatrix)> {
    use rand::Rng;
    let dim = 1usize << n;
    let sigma = random::density(n, rng.random_range(1..=dim), rng);
    if index.is_multiple_of(2) {
        loop {
            let chi = random::density(n, rng.random_range(1..=dim), rng);
            let d = trace_distance(&sigma, &chi)?;
            if d >= tau_d && d > 0.0 {
                let rho = sigma.mix(&chi, tau_d / d)?;
                return Ok((sigma, rho));
            }
        }
    } else {
        let u = random::near_identity_unitary(dim, 2.0 * tau_d, rng)?;
        let rho = project_to_ball(&sigma, &sigma.conjugate(&u)?, tau_d)?;
        Ok((sigma, rho))
    }
}

#[derive(Debug, Clone)]
pub struct AttackResult {
    pub original_class: usize,
    pub flipped: bool,
    /// ỹ_C − max_{k≠C} ỹ_k at the worst state found; negative means flipped.
    pub worst_margin: f64,
    pub worst_rho: Option<DensityMatrix>,
    pub worst_distance: f64,
    pub evaluations: usize,
}

/// Adversarial search with the default number of noise draws.
pub fn attack_search(
    model: &ClassifierModel,
    sigma: &DensityMatrix,
    cfg: &NoiseConfig,
    tau_d: f64,
    budget: usize,
    seed: u64,
) -> Result<AttackResult> {
    let oracle = NoisyEffects::new(model, cfg, DEFAULT_N_NOISE, seed::derive(seed, 0))?;
    attack_search_with(&oracle, sigma, tau_d, budget, seed::derive(seed, 1))
}

fn margin_of(y: &[f64], class: usize) -> f64 {
    let other = y
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != class)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    y[class] - other
}

/// Greedy search for a state within trace distance `tau_d` of σ whose noisy
/// argmax differs from that of σ.
///
/// Proposals mix toward random states, conjugate by small random unitaries,
/// perturb the spectrum, and move along the most label-adverse eigenvector of
/// the effect difference. Every proposal is projected back onto the ball.
pub fn attack_search_with(
    oracle: &NoisyEffects,
    sigma: &DensityMatrix,
    tau_d: f64,
    budget: usize,
    seed: u64,
) -> Result<AttackResult> {
    use rand::Rng;
    if budget == 0 {
        return Err(Error::InvalidInput("attack budget must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&tau_d) {
        return Err(Error::InvalidInput(format!("radius {tau_d} outside [0, 1]")));
    }
    let y0 = oracle.predict(sigma)?;
    let class = argmax(&y0);
    let mut best = sigma.clone();
    let mut best_margin = margin_of(&y0, class);
    let mut evaluations = 1;
    let result = |best: &DensityMatrix, margin: f64, evaluations: usize| -> Result<AttackResult> {
        Ok(AttackResult {
            original_class: class,
            flipped: margin < 0.0 || (margin == 0.0 && class != 0),
            worst_margin: margin,
            worst_distance: trace_distance(sigma, best)?,
            worst_rho: Some(best.clone()),
            evaluations,
        })
    };
    if tau_d == 0.0 {
        return result(&best, best_margin, evaluations);
    }

    let n = sigma.num_qubits();
    let dim = sigma.dim();
    let mut rng = seed::rng(seed);

    // Most adverse pure direction: bottom eigenvector of M_C − M_other.
    let other = if class == 0 { 1 } else { 0 };
    let diff = oracle.effects()[class].sub(&oracle.effects()[other])?;
    let (_, vecs) = hermitian_eigen(&diff)?;
    let adverse = column_state(&vecs, 0)?;

    let mut directed = vec![project_to_ball(sigma, &adverse, tau_d)?];
    if let Some(rotated) = rotate_pure_toward(sigma, &vecs, tau_d)? {
        directed.push(rotated);
    }

    let mut step = 0;
    while evaluations < budget {
        let candidate = if step < directed.len() {
            directed[step].clone()
        } else {
            match rng.random_range(0..4) {
                0 => {
                    let chi = random::density(n, rng.random_range(1..=dim), &mut rng);
                    let d = trace_distance(sigma, &chi)?;
                    let s = if d > 0.0 { (tau_d / d).min(1.0) } else { 1.0 };
                    sigma.mix(&chi, s * rng.random_range(0.5..=1.0))?
                }
                1 => {
                    let u = random::near_identity_unitary(dim, tau_d * rng.random_range(0.1..1.0), &mut rng)?;
                    best.conjugate(&u)?
                }
                2 => perturb_spectrum(&best, tau_d, &mut rng)?,
                _ => best.mix(&adverse, rng.random_range(0.0..=1.0))?,
            }
        };
        step += 1;
        let cand = project_to_ball(sigma, &candidate, tau_d)?;
        let margin = margin_of(&oracle.predict(&cand)?, class);
        evaluations += 1;
        if margin < best_margin {
            best_margin = margin;
            best = cand;
        }
        if best_margin < 0.0 {
            break;
        }
    }
    result(&best, best_margin, evaluations)
}

fn column_state(vecs: &ComplexMatrix, col: usize) -> Result<DensityMatrix> {
    let v: Vec<_> = (0..vecs.rows()).map(|r| vecs[(r, col)]).collect();
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let v: Vec<_> = v.iter().map(|z| z / norm).collect();
    DensityMatrix::new(ComplexMatrix::outer(&v, &v))
}

/// For a (near-)pure σ = |ψ><ψ|, the pure state cos(a)|ψ> + sin(a)|φ⊥> at
/// trace distance `tau_d`, with φ⊥ the adverse direction orthogonalised
/// against ψ.
fn rotate_pure_toward(sigma: &DensityMatrix, adverse_vecs: &ComplexMatrix, tau_d: f64) -> Result<Option<DensityMatrix>> {
    if (sigma.purity() - 1.0).abs() > 1e-9 {
        return Ok(None);
    }
    let (vals, vecs) = hermitian_eigen(sigma.matrix())?;
    let top = vals.len() - 1;
    let dim = sigma.dim();
    let psi: Vec<_> = (0..dim).map(|r| vecs[(r, top)]).collect();
    let phi: Vec<_> = (0..dim).map(|r| adverse_vecs[(r, 0)]).collect();
    let overlap: num_complex::Complex64 = psi.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum();
    let perp: Vec<_> = phi.iter().zip(&psi).map(|(b, a)| b - overlap * a).collect();
    let norm = perp.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Ok(None);
    }
    let a = tau_d.min(1.0).asin();
    let v: Vec<_> = psi
        .iter()
        .zip(&perp)
        .map(|(p, q)| p * a.cos() + q / norm * a.sin())
        .collect();
    Ok(Some(DensityMatrix::new(ComplexMatrix::outer(&v, &v))?))
}

fn perturb_spectrum(rho: &DensityMatrix, scale: f64, rng: &mut seed::Rng) -> Result<DensityMatrix> {
    use rand::Rng;
    let (vals, vecs) = hermitian_eigen(rho.matrix())?;
    let mut new: Vec<f64> = vals
        .iter()
        .map(|&v| (v + scale * rng.random_range(-1.0..1.0)).max(0.0))
        .collect();
    let total: f64 = new.iter().sum();
    if total <= 0.0 {
        return Ok(rho.clone());
    }
    new.iter_mut().for_each(|v| *v /= total);
    let m = vecs
        .matmul(&ComplexMatrix::diagonal(&new))?
        .matmul(&vecs.adjoint())?;
    DensityMatrix::new(m)
}
