//! Gaussian kernel density estimation with a diagonal (per-dimension)
//! bandwidth chosen by Scott's or Silverman's rule of thumb.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::linalg::{log_sum_exp, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthRule {
    /// `h_j = N^(−1/(d+4)) · sd_j`
    Scott,
    /// `h_j = (N(d+2)/4)^(−1/(d+4)) · sd_j`
    Silverman,
    /// Explicit per-dimension bandwidths.
    Fixed(Vec<f64>),
}

impl BandwidthRule {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "scott" => Ok(BandwidthRule::Scott),
            "silverman" => Ok(BandwidthRule::Silverman),
            other => Err(Error::Config(format!(
                "unknown bandwidth rule '{other}' (expected scott or silverman)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BandwidthRule::Scott => "scott",
            BandwidthRule::Silverman => "silverman",
            BandwidthRule::Fixed(_) => "fixed",
        }
    }

    /// Multiplier applied to each sample standard deviation; `None` for fixed.
    pub fn factor(&self, n: usize, d: usize) -> Option<f64> {
        let e = -1.0 / (d as f64 + 4.0);
        match self {
            BandwidthRule::Scott => Some((n as f64).powf(e)),
            BandwidthRule::Silverman => Some((n as f64 * (d as f64 + 2.0) / 4.0).powf(e)),
            BandwidthRule::Fixed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeModel {
    train_points: Matrix,
    bandwidths: Vec<f64>,
    rule: BandwidthRule,
    /// `−Σ_j ln h_j − (d/2) ln 2π − ln N`, shared by every query.
    log_norm: f64,
}

/// Unbiased (N − 1) sample standard deviation of every column.
pub fn sample_sd(points: &Matrix) -> Vec<f64> {
    let n = points.rows() as f64;
    (0..points.cols())
        .map(|j| {
            let mean = points.iter_rows().map(|r| r[j]).sum::<f64>() / n;
            let ss: f64 = points.iter_rows().map(|r| (r[j] - mean).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        })
        .collect()
}

pub fn fit_kde(points: &Matrix, rule: BandwidthRule) -> Result<KdeModel> {
    let (n, d) = points.shape();
    if d == 0 {
        return Err(Error::Input("KDE needs at least one dimension".into()));
    }
    if n < 2 && !matches!(rule, BandwidthRule::Fixed(_)) {
        return Err(Error::Input(format!("KDE bandwidth rules need N ≥ 2 points, got {n}")));
    }
    if n == 0 {
        return Err(Error::Input("KDE needs at least one point".into()));
    }
    let bandwidths = match &rule {
        BandwidthRule::Fixed(h) => {
            if h.len() != d {
                return Err(Error::Shape(format!(
                    "{} fixed bandwidths for {d} dimensions",
                    h.len()
                )));
            }
            if h.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
                return Err(Error::Config("bandwidths must be finite and positive".into()));
            }
            h.clone()
        }
        _ => {
            let sd = sample_sd(points);
            if let Some(j) = sd.iter().position(|&s| !(s > 0.0)) {
                return Err(Error::Input(format!(
                    "dimension {j} is constant; KDE bandwidth would be zero"
                )));
            }
            let factor = rule.factor(n, d).expect("rule-based bandwidth");
            sd.iter().map(|s| factor * s).collect()
        }
    };
    let log_norm = -bandwidths.iter().map(|h| h.ln()).sum::<f64>()
        - 0.5 * d as f64 * (2.0 * PI).ln()
        - (n as f64).ln();
    Ok(KdeModel {
        train_points: points.clone(),
        bandwidths,
        rule,
        log_norm,
    })
}

impl KdeModel {
    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn rule(&self) -> &BandwidthRule {
        &self.rule
    }

    pub fn dim(&self) -> usize {
        self.train_points.cols()
    }

    pub fn num_points(&self) -> usize {
        self.train_points.rows()
    }

    pub fn train_points(&self) -> &Matrix {
        &self.train_points
    }

    /// `log[(1/N) Σ_i Π_j N(x_j; t_ij, h_j²)]`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "query has {} coordinates, KDE dimension is {}",
                x.len(),
                self.dim()
            )));
        }
        let exponents: Vec<f64> = self
            .train_points
            .iter_rows()
            .map(|t| {
                -0.5 * t
                    .iter()
                    .zip(x)
                    .zip(&self.bandwidths)
                    .map(|((ti, xi), h)| ((xi - ti) / h).powi(2))
                    .sum::<f64>()
            })
            .collect();
        Ok(log_sum_exp(&exponents) + self.log_norm)
    }

    pub fn log_density_batch(&self, xs: &Matrix, mode: ExecMode) -> Result<Vec<f64>> {
        if xs.cols() != self.dim() {
            return Err(Error::Shape(format!(
                "queries have {} columns, KDE dimension is {}",
                xs.cols(),
                self.dim()
            )));
        }
        exec::try_map_indexed(mode, xs.rows(), |i| self.log_density(xs.row(i)))
    }
}

/// Free-function form of [`KdeModel::log_density`].
pub fn kde_log_density(model: &KdeModel, x: &[f64]) -> Result<f64> {
    model.log_density(x)
}

/// Both rule-based fits with their mean validation log-likelihood; `best`
/// indexes the higher one (Scott on ties).
#[derive(Debug, Clone)]
pub struct KdeSelection {
    pub fits: Vec<(KdeModel, f64)>,
    pub best: usize,
}

impl KdeSelection {
    pub fn best_model(&self) -> &KdeModel {
        &self.fits[self.best].0
    }
}

pub fn select_kde(train: &Matrix, validation: &Matrix, mode: ExecMode) -> Result<KdeSelection> {
    if validation.rows() == 0 {
        return Err(Error::Input("KDE selection needs validation points".into()));
    }
    let mut fits = Vec::with_capacity(2);
    for rule in [BandwidthRule::Scott, BandwidthRule::Silverman] {
        let model = fit_kde(train, rule)?;
        let ll = model.log_density_batch(validation, mode)?;
        let mean = ll.iter().sum::<f64>() / ll.len() as f64;
        fits.push((model, mean));
    }
    let best = if fits[1].1 > fits[0].1 { 1 } else { 0 };
    Ok(KdeSelection { fits, best })
}
