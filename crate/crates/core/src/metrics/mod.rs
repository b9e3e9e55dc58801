//! Evaluation metrics, grid rendering and evaluation reports.

mod grid;
mod report;

pub use grid::{format_grid_csv, grid_points, render_grid, GridBounds, GRID_HEADER};
pub use report::EvalReport;

use crate::error::{Error, Result};

/// 1-based ranks with ties assigned their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end share ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: the Pearson correlation of average ranks,
/// exact in the presence of ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "spearman inputs differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Input("spearman needs at least two points".into()));
    }
    for (name, v) in [("first", a), ("second", b)] {
        if let Some(i) = v.iter().position(|x| x.is_nan()) {
            return Err(Error::NonFinite {
                location: format!("{name} spearman input, index {i}"),
                value: v[i],
            });
        }
    }
    pearson(&average_ranks(a), &average_ranks(b))
        .ok_or_else(|| Error::Input("spearman is undefined for a constant input".into()))
}

/// Arithmetic mean; any non-finite entry is an error naming its index.
pub fn mean_log_likelihood(log_densities: &[f64]) -> Result<f64> {
    if log_densities.is_empty() {
        return Err(Error::Input("mean log-likelihood of an empty set".into()));
    }
    if let Some(i) = log_densities.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            location: format!("log-density at index {i}"),
            value: log_densities[i],
        });
    }
    Ok(log_densities.iter().sum::<f64>() / log_densities.len() as f64)
}

/// Outlier scores: the negated log-densities.
pub fn outlier_scores(log_densities: &[f64]) -> Vec<f64> {
    log_densities.iter().map(|v| -v).collect()
}

/// Fraction of true outliers among the `k` highest scores; equal scores keep
/// their input order.
pub fn precision_at_k(scores: &[f64], labels: &[bool], k: usize) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if k == 0 {
        return Err(Error::Input("precision@k needs k ≥ 1".into()));
    }
    if k > scores.len() {
        return Err(Error::Input(format!(
            "k = {k} exceeds the number of points ({})",
            scores.len()
        )));
    }
    if let Some(i) = scores.iter().position(|v| v.is_nan()) {
        return Err(Error::NonFinite {
            location: format!("outlier score at index {i}"),
            value: scores[i],
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let hits = order[..k].iter().filter(|&&i| labels[i]).count();
    Ok(hits as f64 / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Rng, Stream};

    #[test]
    fn spearman_examples() {
        let inc = [1.0, 2.0, 3.0, 4.0, 5.0];
        let dec = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert_eq!(spearman(&inc, &inc).unwrap(), 1.0);
        assert_eq!(spearman(&inc, &dec).unwrap(), -1.0);
        let v = spearman(&inc, &[1.0, 2.0, 3.0, 5.0, 4.0]).unwrap();
        assert!((v - 0.9).abs() < 1e-12);
    }

    #[test]
    fn spearman_errors() {
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(spearman(&[1.0], &[1.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn spearman_rank_invariance() {
        let mut rng = Rng::new(1, Stream::Custom(9));
        let a: Vec<f64> = (0..200).map(|_| rng.normal()).collect();
        let b: Vec<f64> = a.iter().map(|v| v + rng.normal()).collect();
        let s = spearman(&a, &b).unwrap();
        let b_exp: Vec<f64> = b.iter().map(|v| v.exp()).collect();
        assert_eq!(s, spearman(&a, &b_exp).unwrap());
        assert_eq!(s, spearman(&b, &a).unwrap());
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn mean_log_likelihood_examples() {
        assert_eq!(mean_log_likelihood(&[-1.0, -1.0]).unwrap(), -1.0);
        assert_eq!(mean_log_likelihood(&[-3.5]).unwrap(), -3.5);
        match mean_log_likelihood(&[0.0, f64::NEG_INFINITY]) {
            Err(Error::NonFinite { location, .. }) => assert!(location.contains('1')),
            other => panic!("{other:?}"),
        }
        assert!(mean_log_likelihood(&[]).is_err());
    }

    #[test]
    fn gaussian_entropy_oracle() {
        let mut rng = Rng::new(2, Stream::Custom(9));
        let ll: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let z = rng.normal();
                -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln()
            })
            .collect();
        let m = mean_log_likelihood(&ll).unwrap();
        assert!((m + 1.418_938_533_204_672_7).abs() < 0.01, "{m}");
    }

    #[test]
    fn precision_examples() {
        let dens = [0.9f64, 0.8, 0.1, 0.05];
        let ld: Vec<f64> = dens.iter().map(|d| d.ln()).collect();
        let labels = [false, false, true, true];
        assert_eq!(precision_at_k(&outlier_scores(&ld), &labels, 2).unwrap(), 1.0);
        assert_eq!(precision_at_k(&[1.0, 2.0, 3.0], &[false; 3], 2).unwrap(), 0.0);
        assert!(precision_at_k(&[1.0], &[true], 0).is_err());
        assert!(precision_at_k(&[1.0], &[true], 2).is_err());
    }

    #[test]
    fn precision_ties_keep_input_order() {
        let scores = [1.0, 1.0, 1.0, 0.0];
        assert_eq!(precision_at_k(&scores, &[true, false, false, false], 1).unwrap(), 1.0);
        assert_eq!(precision_at_k(&scores, &[false, true, false, false], 1).unwrap(), 0.0);
    }

    #[test]
    fn random_scores_precision_expectation() {
        let n = 1000;
        let mut total = 0.0;
        let reps = 200;
        for seed in 0..reps {
            let mut rng = Rng::new(seed, Stream::Custom(10));
            let scores: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let labels: Vec<bool> = (0..n).map(|i| i < n / 10).collect();
            total += precision_at_k(&scores, &labels, n / 10).unwrap();
        }
        let mean = total / reps as f64;
        assert!((mean - 0.1).abs() < 0.01, "{mean}");
    }
}
