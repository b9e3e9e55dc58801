//! Property-based invariants across modules.

use proptest::prelude::*;
use roundtrip::estimators::{laplace_intermediates, Method, batch_estimate};
use roundtrip::linalg::log_sum_exp;
use roundtrip::metrics::{mean_log_likelihood, precision_at_k, spearman};
use roundtrip::model::{Architecture, Networks, RoundtripConfig};
use roundtrip::model::losses::{discriminator_losses, generator_adv_losses, roundtrip_loss};
use roundtrip::{ExecMode, Matrix, RoundtripModel};

fn small_model(m: usize, n: usize, seed: u64, sigma: f64) -> RoundtripModel {
    let mut cfg = RoundtripConfig::new(m, n);
    cfg.architecture = Architecture::small();
    cfg.seed = seed;
    let nets = Networks::init(&cfg).unwrap();
    RoundtripModel::new(nets.g, nets.h, sigma).unwrap()
}

fn column(v: &[f64]) -> Matrix {
    Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_sum_exp_shift(values in prop::collection::vec(-50.0f64..50.0, 1..40), c in -100.0f64..100.0) {
        let shifted: Vec<f64> = values.iter().map(|v| v + c).collect();
        let a = log_sum_exp(&values) + c;
        let b = log_sum_exp(&shifted);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn laplace_system_is_positive_definite(
        seed in 0u64..1000,
        x in prop::collection::vec(-3.0f64..3.0, 3),
        sigma in 0.01f64..2.0,
    ) {
        let model = small_model(2, 3, seed, sigma);
        let li = laplace_intermediates(&x, &model).unwrap();
        prop_assert!(li.log_det_sigma <= 1e-12);
        prop_assert!(li.log_density.is_finite());
        // A = JᵀJ is symmetric
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((li.a[(i, j)] - li.a[(j, i)]).abs() <= 1e-12 * li.a[(i, j)].abs().max(1.0));
            }
        }
    }

    #[test]
    fn losses_are_non_negative(
        a in prop::collection::vec(-3.0f64..3.0, 1..20),
        b in prop::collection::vec(-3.0f64..3.0, 1..20),
        alpha in 0.0f64..20.0,
    ) {
        let (da, db) = (column(&a), column(&b));
        let (lx, lz) = discriminator_losses(&da, &db, &db, &da).unwrap();
        prop_assert!(lx >= 0.0 && lz >= 0.0);
        let (lg, lh) = generator_adv_losses(&da, &db).unwrap();
        prop_assert!(lg >= 0.0 && lh >= 0.0);
        prop_assert!(roundtrip_loss(&da, &da, &db, &db, alpha, alpha).unwrap() == 0.0);
        if a.len() == b.len() {
            prop_assert!(roundtrip_loss(&da, &db, &db, &da, alpha, alpha).unwrap() >= 0.0);
        }
    }

    #[test]
    fn spearman_is_symmetric_and_rank_invariant(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..50)
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        if let Ok(s) = spearman(&a, &b) {
            prop_assert_eq!(s, spearman(&b, &a).unwrap());
            let cubed: Vec<f64> = a.iter().map(|v| v * v * v + 2.0 * v).collect();
            prop_assert_eq!(s, spearman(&cubed, &b).unwrap());
            prop_assert!((-1.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn precision_invariant_under_monotone_scores(
        items in prop::collection::vec((-5.0f64..5.0, any::<bool>()), 1..60),
        k_frac in 0.0f64..1.0,
    ) {
        let scores: Vec<f64> = items.iter().map(|p| p.0).collect();
        let labels: Vec<bool> = items.iter().map(|p| p.1).collect();
        let k = 1 + ((items.len() - 1) as f64 * k_frac) as usize;
        let transformed: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        prop_assert_eq!(
            precision_at_k(&scores, &labels, k).unwrap(),
            precision_at_k(&transformed, &labels, k).unwrap()
        );
    }

    #[test]
    fn mean_log_likelihood_is_permutation_invariant(
        mut v in prop::collection::vec(-100.0f64..10.0, 1..50),
        seed in any::<u64>(),
    ) {
        let before = mean_log_likelihood(&v).unwrap();
        let mut rng = roundtrip::Rng::new(seed, roundtrip::Stream::Custom(600));
        rng.shuffle(&mut v);
        let after = mean_log_likelihood(&v).unwrap();
        prop_assert!((before - after).abs() <= 1e-12 * before.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn batch_estimates_follow_row_permutation(seed in 0u64..100) {
        let model = small_model(2, 2, seed, 0.1);
        let xs = roundtrip::Rng::new(seed, roundtrip::Stream::Custom(601)).gaussian(6, 2);
        let method = Method::importance(200, seed);
        let base = batch_estimate(&xs, &model, method, ExecMode::Parallel).unwrap();
        let perm = [3usize, 0, 5, 1, 4, 2];
        let permuted = batch_estimate(&xs.select_rows(&perm), &model, method, ExecMode::Sequential).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            prop_assert_eq!(permuted[i], base[p]);
        }
    }
}
