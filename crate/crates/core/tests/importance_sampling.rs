//! Monte Carlo behavior of the importance-sampling estimator on models whose
//! marginal density is known in closed form.

use roundtrip::estimators::{
    batch_estimate, batch_estimate_raw, estimate_is, estimate_is_seeded, estimate_laplace, Method,
    ProposalParams,
};
use roundtrip::nn::{Activation, DenseLayer, Mlp};
use roundtrip::simdata::NormStats;
use roundtrip::{ExecMode, Matrix, Rng, RoundtripModel, Stream};

/// `log(1/√(4π))`: the density of N(0, 2) at 0.
const LOG_INV_SQRT_4PI: f64 = -1.265_512_123_484_645_4;

fn affine(rows: &[Vec<f64>], bias: Vec<f64>) -> Mlp {
    let layer = DenseLayer::new(Matrix::from_rows(rows).unwrap(), bias, Activation::Identity).unwrap();
    Mlp::new(vec![layer]).unwrap()
}

fn identity_model() -> RoundtripModel {
    RoundtripModel::new(affine(&[vec![1.0]], vec![0.0]), affine(&[vec![1.0]], vec![0.0]), 1.0).unwrap()
}

#[test]
fn converges_to_gaussian_convolution() {
    let m = identity_model();
    let est = estimate_is_seeded(&[0.0], &m, 40_000, ProposalParams::default(), 7).unwrap();
    assert!((est.log_density - LOG_INV_SQRT_4PI).abs() < 0.02, "{est:?}");
}

fn variance(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64
}

#[test]
fn variance_halves_when_samples_double() {
    // Across-seed variance with enough seeds that the ratio of two sample
    // variances is itself accurate to a few percent.
    let m = identity_model();
    let p = ProposalParams::default();
    let run = |n: usize, stream: u32| -> Vec<f64> {
        (0..400)
            .map(|s| estimate_is(&[0.0], &m, n, p, &mut Rng::new(s, Stream::Custom(stream))).unwrap().log_density)
            .collect()
    };
    let ratio = variance(&run(1000, 1)) / variance(&run(2000, 2));
    assert!((ratio - 2.0).abs() <= 0.6, "variance ratio {ratio}");
}

#[test]
fn independent_seeds_agree_within_standard_errors() {
    let g = affine(&[vec![1.5, 0.0], vec![0.3, 0.8], vec![-0.2, 0.4]], vec![0.1, 0.0, -0.3]);
    let h = affine(&[vec![0.6, 0.1, 0.0], vec![-0.2, 1.0, 0.5]], vec![0.0, 0.0]);
    let model = RoundtripModel::new(g, h, 0.5).unwrap();
    let x = [0.4, 0.2, -0.1];
    let p = ProposalParams::default();
    let a = estimate_is_seeded(&x, &model, 40_000, p, 1).unwrap();
    let b = estimate_is_seeded(&x, &model, 40_000, p, 2).unwrap();
    let se = (a.log_std_error.powi(2) + b.log_std_error.powi(2)).sqrt();
    assert!((a.log_density - b.log_density).abs() <= 3.0 * se, "{a:?} {b:?}");
    // and both agree with the exact closed form for this affine model
    let exact = estimate_laplace(&x, &model).unwrap();
    assert!((a.log_density - exact).abs() <= 4.0 * a.log_std_error + 1e-3);
}

#[test]
fn single_sample_with_near_gaussian_proposal() {
    let m = identity_model();
    let p = ProposalParams { scale: 1.0, dof: 1e9 };
    let est = estimate_is_seeded(&[0.0], &m, 1, p, 3).unwrap();
    assert_eq!(est.effective_samples, 1.0);
    assert!(est.log_density.is_finite());
}

#[test]
fn raw_estimates_include_normalization_jacobian() {
    let m = identity_model();
    let scaled = identity_model()
        .with_norm_stats(NormStats::new(vec![-5.0], vec![5.0]).unwrap())
        .unwrap();
    let raw = Matrix::from_vec(1, 1, vec![2.5]).unwrap();
    let normalized = Matrix::from_vec(1, 1, vec![0.75]).unwrap();
    let a = batch_estimate_raw(&raw, &scaled, Method::Laplace, ExecMode::Sequential).unwrap()[0];
    let b = batch_estimate(&normalized, &m, Method::Laplace, ExecMode::Sequential).unwrap()[0];
    assert!((a - (b - 10f64.ln())).abs() < 1e-12);
}

#[test]
fn batch_rows_are_independent_of_order_and_mode() {
    let m = identity_model();
    let xs = Rng::new(4, Stream::Custom(300)).gaussian(16, 1);
    let method = Method::importance(500, 9);
    let seq = batch_estimate(&xs, &m, method, ExecMode::Sequential).unwrap();
    let par = batch_estimate(&xs, &m, method, ExecMode::Parallel).unwrap();
    assert_eq!(seq, par);
    let reversed: Vec<usize> = (0..16).rev().collect();
    let rev = batch_estimate(&xs.select_rows(&reversed), &m, method, ExecMode::Parallel).unwrap();
    let back: Vec<f64> = rev.into_iter().rev().collect();
    assert_eq!(seq, back);
}
