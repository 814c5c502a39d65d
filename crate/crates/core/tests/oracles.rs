//! Cross-checks against independent reference computations.

mod common;

use common::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rotsmooth::circuit::{apply_circuit, class_probabilities, Povm};
use rotsmooth::encode::synth_dataset;
use rotsmooth::qla::{hermitian_eigenvalues, random, ComplexMatrix, DensityMatrix};
use rotsmooth::rotnoise::{eq1_product_form, eq1_superposition};
use rotsmooth::vqc::predict_exact;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_hermitian(dim: usize, rng: &mut impl Rng) -> Dense {
    let mut m = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for i in 0..dim {
        m[i][i] = Complex64::new(rng.random_range(-2.0..2.0), 0.0);
        for j in i + 1..dim {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            m[i][j] = z;
            m[j][i] = z.conj();
        }
    }
    m
}

/// Characteristic polynomial coefficients, constant term first, via
/// Faddeev-LeVerrier.
fn char_poly(a: &Dense) -> Vec<Complex64> {
    let n = a.len();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
    coeffs[n] = Complex64::new(1.0, 0.0);
    let mut m = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for k in 1..=n {
        let mut next = mul(a, &m);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += coeffs[n - k + 1];
        }
        m = next;
        let am = mul(a, &m);
        let tr: Complex64 = (0..n).map(|i| am[i][i]).sum();
        coeffs[n - k] = -tr / k as f64;
    }
    coeffs
}

/// All roots of a monic polynomial by Durand-Kerner iteration.
fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let eval = |z: Complex64| coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|i| seed.powu(i as u32)).collect();
    for _ in 0..2000 {
        let prev = roots.clone();
        for i in 0..n {
            let denom: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| roots[i] - roots[j])
                .product();
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
        }
        let moved = roots.iter().zip(&prev).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if moved < 1e-15 {
            break;
        }
    }
    roots
}

#[test]
fn eigenvalues_match_characteristic_polynomial_roots() {
    let mut r = rng(11);
    for _ in 0..50 {
        let a = random_hermitian(4, &mut r);
        let mut roots: Vec<f64> = poly_roots(&char_poly(&a)).iter().map(|z| z.re).collect();
        roots.sort_by(f64::total_cmp);
        let mut eig = hermitian_eigenvalues(&ComplexMatrix::from_rows(&a).unwrap()).unwrap();
        eig.sort_by(f64::total_cmp);
        for (x, y) in eig.iter().zip(&roots) {
            assert!((x - y).abs() < 1e-8, "eigenvalue {x} vs root {y}");
        }
    }
}

fn projector_povm(u: &ComplexMatrix, groups: &[&[usize]]) -> Vec<Dense> {
    let u = to_dense(u);
    let ud = dagger(&u);
    groups
        .iter()
        .map(|g| {
            let mut d = vec![vec![Complex64::new(0.0, 0.0); u.len()]; u.len()];
            for &i in g.iter() {
                d[i][i] = Complex64::new(1.0, 0.0);
            }
            mul(&mul(&u, &d), &ud)
        })
        .collect()
}

#[test]
fn class_probabilities_match_trace_products() {
    let mut r = rng(12);
    let groups: [&[usize]; 3] = [&[0, 1], &[2], &[3]];
    for _ in 0..50 {
        let a = projector_povm(&random::unitary(4, &mut r), &groups);
        let b = projector_povm(&random::unitary(4, &mut r), &groups);
        let w: f64 = r.random_range(0.0..1.0);
        let effects: Vec<Dense> = a
            .iter()
            .zip(&b)
            .map(|(ea, eb)| {
                ea.iter()
                    .zip(eb)
                    .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x * w + y * (1.0 - w)).collect())
                    .collect()
            })
            .collect();
        let povm = Povm::new(effects.iter().map(|e| ComplexMatrix::from_rows(e).unwrap()).collect()).unwrap();
        let rank = r.random_range(1..=4);
        let rho = random::density(2, rank, &mut r);
        let dense_rho = to_dense(rho.matrix());
        let got = class_probabilities(&rho, &povm).unwrap();
        for (k, e) in effects.iter().enumerate() {
            let want: f64 = (0..4)
                .flat_map(|i| (0..4).map(move |j| (i, j)))
                .map(|(i, j)| (e[i][j] * dense_rho[j][i]).re)
                .sum();
            assert!((got[k] - want).abs() < 1e-10, "outcome {k}: {} vs {want}", got[k]);
        }
    }
}

#[test]
fn two_qubit_circuits_match_full_unitary() {
    let mut r = rng(13);
    for _ in 0..100 {
        let n_ops = r.random_range(1..12);
        let (spec, params) = random_circuit(&mut r, 2, n_ops);
        let u = spec.unitary(&params).unwrap();
        assert!(max_diff(&unitary_oracle(&spec, &params), &u) < 1e-12);
        let rho = random::density(2, 2, &mut r);
        let out = apply_circuit(&spec, &params, &rho).unwrap();
        assert!(max_diff(&evolve_oracle(&spec, &params, &rho), out.matrix()) < 1e-12);
    }
}

#[test]
fn synthetic_data_is_linearly_separable() {
    for seed in [1, 7, 42, 1234] {
        let data = synth_dataset(200, seed, 0.4).unwrap();
        let dim = data.dim();
        let mut w = vec![0.0; dim + 1];
        let mut converged = false;
        for _ in 0..10_000 {
            let mut mistakes = 0;
            for (x, &y) in data.features.iter().zip(&data.labels) {
                let target = if y == 1 { 1.0 } else { -1.0 };
                let act: f64 = w[dim] + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
                if act * target <= 0.0 {
                    mistakes += 1;
                    for (wi, xi) in w.iter_mut().zip(x) {
                        *wi += target * xi;
                    }
                    w[dim] += target;
                }
            }
            if mistakes == 0 {
                converged = true;
                break;
            }
        }
        assert!(converged, "perceptron did not separate seed {seed}");
    }
}

#[test]
fn three_qubit_expansion_matches_subset_sum() {
    let mut r = rng(14);
    let model = random_model(&mut r, 3);
    let sigma = random::density(3, 3, &mut r);
    let s = sample(&[0.31, -0.12, 0.07]);
    let y_fn = |d: &DensityMatrix| predict_exact(&model, d);
    for k in 0..2 {
        let oracle = subset_enumeration(|d| predict_exact(&model, d).unwrap(), &sigma, s.angles(), k);
        let compact = eq1_superposition(y_fn, &sigma, &s, k).unwrap();
        let product = eq1_product_form(y_fn, &sigma, &s, k).unwrap();
        assert!((compact - oracle).abs() < 1e-12, "{compact} vs {oracle}");
        // The product-of-probabilities reading is a different quantity.
        println!("class {k}: subset sum {oracle:.6}, product reading {product:.6}");
    }
}
