use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;

use super::tasks::sample_indep_mixture;

/// Points with ground-truth outlier labels.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierDataset {
    pub points: Matrix,
    /// `true` marks an outlier.
    pub labels: Vec<bool>,
    pub outlier_fraction: f64,
}

impl OutlierDataset {
    pub fn num_outliers(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

/// Inliers from the independent Gaussian mixture in `d` dimensions; outliers
/// uniform over the inlier bounding box inflated 1.5× about its center.
/// Rows are shuffled together with their labels.
pub fn make_outlier_dataset(
    d: usize,
    count: usize,
    outlier_fraction: f64,
    rng: &mut Rng,
) -> Result<OutlierDataset> {
    if !(outlier_fraction > 0.0 && outlier_fraction < 0.5) {
        return Err(Error::Config(format!(
            "outlier fraction must lie in (0, 0.5), got {outlier_fraction}"
        )));
    }
    if d == 0 || count == 0 {
        return Err(Error::Config("outlier data needs a positive dimension and count".into()));
    }
    let n_out = (count as f64 * outlier_fraction).round() as usize;
    let n_in = count - n_out;
    let inliers = sample_indep_mixture(d, n_in, rng);

    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in inliers.iter_rows() {
        for j in 0..d {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    let boxes: Vec<(f64, f64)> = lo
        .iter()
        .zip(&hi)
        .map(|(&l, &h)| {
            let (mid, half) = ((l + h) / 2.0, 0.75 * (h - l));
            (mid - half, mid + half)
        })
        .collect();
    let outliers = {
        let mut m = Matrix::zeros(n_out, d);
        for i in 0..n_out {
            for (j, &(l, h)) in boxes.iter().enumerate() {
                m[(i, j)] = rng.uniform(l, h);
            }
        }
        m
    };

    let mut order: Vec<usize> = (0..count).collect();
    rng.shuffle(&mut order);
    let mut points = Matrix::zeros(count, d);
    let mut labels = vec![false; count];
    for (dst, &src) in order.iter().enumerate() {
        if src < n_in {
            points.row_mut(dst).copy_from_slice(inliers.row(src));
        } else {
            points.row_mut(dst).copy_from_slice(outliers.row(src - n_in));
            labels[dst] = true;
        }
    }
    Ok(OutlierDataset {
        points,
        labels,
        outlier_fraction,
    })
}
