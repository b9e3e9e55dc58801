//! Synthetic distributions with exact (or quadrature-exact) densities.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{log_sum_exp, Matrix};
use crate::rng::Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Component means and common standard deviation of the 1-D mixture used
/// per coordinate by [`SimTask::IndepGaussianMixture`].
pub const MIXTURE_MEANS: [f64; 3] = [-1.0, 0.0, 1.0];
pub const MIXTURE_SD: f64 = 0.5;

/// Radius of the octagon means and minor-axis standard deviation.
pub const OCTAGON_RADIUS: f64 = 3.0;
pub const OCTAGON_MINOR_SD: f64 = 0.16;

pub const INVOLUTE_NOISE_SD: f64 = 0.4;
pub const DEFAULT_QUAD_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimTask {
    /// Every coordinate i.i.d. from `⅓[N(−1, 0.5²) + N(0, 0.5²) + N(1, 0.5²)]`.
    IndepGaussianMixture { dim: usize },
    /// Eight elongated Gaussians on a circle of radius 3.
    OctagonMixture,
    /// Noisy spiral `x = (r sin 2r, r cos 2r) + N(0, 0.4² I)`, `r ~ U(0, 2π)`.
    Involute { quad_points: usize },
}

impl SimTask {
    pub fn from_name(name: &str, dim: usize) -> Result<Self> {
        match name {
            "indep-mixture" | "indep_gmm" => {
                if dim == 0 {
                    return Err(Error::Config("mixture dimension must be at least 1".into()));
                }
                Ok(SimTask::IndepGaussianMixture { dim })
            }
            "octagon" => Ok(SimTask::OctagonMixture),
            "involute" => Ok(SimTask::Involute {
                quad_points: DEFAULT_QUAD_POINTS,
            }),
            other => Err(Error::Config(format!(
                "unknown task '{other}' (expected indep-mixture, octagon or involute)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SimTask::IndepGaussianMixture { .. } => "indep-mixture",
            SimTask::OctagonMixture => "octagon",
            SimTask::Involute { .. } => "involute",
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            SimTask::IndepGaussianMixture { dim } => dim,
            _ => 2,
        }
    }

    pub fn sample(&self, count: usize, rng: &mut Rng) -> Matrix {
        match *self {
            SimTask::IndepGaussianMixture { dim } => sample_indep_mixture(dim, count, rng),
            SimTask::OctagonMixture => sample_octagon(count, rng),
            SimTask::Involute { .. } => sample_involute(count, rng),
        }
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        match *self {
            SimTask::IndepGaussianMixture { .. } => log_density_indep_mixture(x),
            SimTask::OctagonMixture => log_density_octagon(x),
            SimTask::Involute { quad_points } => log_density_involute(x, quad_points),
        }
    }

    /// Per-axis `(lo, hi)` covering roughly ±4 standard deviations of the data.
    pub fn default_bounds(&self) -> [(f64, f64); 2] {
        match self {
            SimTask::IndepGaussianMixture { .. } => [(-3.0, 3.0), (-3.0, 3.0)],
            SimTask::OctagonMixture => [(-4.5, 4.5), (-4.5, 4.5)],
            SimTask::Involute { .. } => [(-6.5, 6.5), (-6.0, 7.5)],
        }
    }
}

#[inline]
fn log_normal_1d(x: f64, mean: f64, sd: f64) -> f64 {
    let u = (x - mean) / sd;
    -0.5 * LN_2PI - sd.ln() - 0.5 * u * u
}

pub fn sample_indep_mixture(dim: usize, count: usize, rng: &mut Rng) -> Matrix {
    let mut out = Matrix::zeros(count, dim);
    for v in out.as_mut_slice() {
        let mean = MIXTURE_MEANS[rng.index(3)];
        *v = mean + MIXTURE_SD * rng.normal();
    }
    out
}

/// Log-density of the 1-D three-component mixture.
pub fn log_density_mixture_1d(x: f64) -> f64 {
    let terms = MIXTURE_MEANS.map(|m| log_normal_1d(x, m, MIXTURE_SD));
    log_sum_exp(&terms) - 3f64.ln()
}

/// Sum of per-coordinate mixture log-densities; the dimension is `x.len()`.
pub fn log_density_indep_mixture(x: &[f64]) -> f64 {
    x.iter().map(|&v| log_density_mixture_1d(v)).sum()
}

/// Mean and covariance `[[a, c], [c, b]]` of octagon component `i ∈ 1..=8`.
pub fn octagon_component(i: usize) -> ([f64; 2], [f64; 3]) {
    let t = PI * i as f64 / 4.0;
    let (s, c) = t.sin_cos();
    let e = OCTAGON_MINOR_SD * OCTAGON_MINOR_SD;
    let mean = [OCTAGON_RADIUS * c, OCTAGON_RADIUS * s];
    let cov = [c * c + e * s * s, (1.0 - e) * s * c, s * s + e * c * c];
    (mean, cov)
}

pub fn sample_octagon(count: usize, rng: &mut Rng) -> Matrix {
    let mut out = Matrix::zeros(count, 2);
    for k in 0..count {
        let i = 1 + rng.index(8);
        let (mean, [a, c, b]) = octagon_component(i);
        // 2×2 Cholesky of the component covariance
        let l11 = a.sqrt();
        let l21 = c / l11;
        let l22 = (b - l21 * l21).sqrt();
        let (g1, g2) = (rng.normal(), rng.normal());
        let row = out.row_mut(k);
        row[0] = mean[0] + l11 * g1;
        row[1] = mean[1] + l21 * g1 + l22 * g2;
    }
    out
}

pub fn log_density_octagon(x: &[f64]) -> f64 {
    let terms: Vec<f64> = (1..=8)
        .map(|i| {
            let (mean, [a, c, b]) = octagon_component(i);
            let det = a * b - c * c;
            let (dx, dy) = (x[0] - mean[0], x[1] - mean[1]);
            let q = (b * dx * dx - 2.0 * c * dx * dy + a * dy * dy) / det;
            -LN_2PI - 0.5 * det.ln() - 0.5 * q
        })
        .collect();
    log_sum_exp(&terms) - 8f64.ln()
}

pub fn sample_involute(count: usize, rng: &mut Rng) -> Matrix {
    let mut out = Matrix::zeros(count, 2);
    for k in 0..count {
        let r = rng.uniform(0.0, 2.0 * PI);
        let row = out.row_mut(k);
        row[0] = r * (2.0 * r).sin() + INVOLUTE_NOISE_SD * rng.normal();
        row[1] = r * (2.0 * r).cos() + INVOLUTE_NOISE_SD * rng.normal();
    }
    out
}

/// `log[(1/2π) ∫₀^{2π} N(x₁; r sin 2r, 0.4²) N(x₂; r cos 2r, 0.4²) dr]` by
/// the trapezoid rule on `quad_points` nodes (at least 100 are used).
pub fn log_density_involute(x: &[f64], quad_points: usize) -> f64 {
    let nodes = quad_points.max(100);
    let h = 2.0 * PI / (nodes - 1) as f64;
    let terms: Vec<f64> = (0..nodes)
        .map(|j| {
            let r = j as f64 * h;
            let w = if j == 0 || j == nodes - 1 { 0.5 * h } else { h };
            w.ln()
                + log_normal_1d(x[0], r * (2.0 * r).sin(), INVOLUTE_NOISE_SD)
                + log_normal_1d(x[1], r * (2.0 * r).cos(), INVOLUTE_NOISE_SD)
        })
        .collect();
    log_sum_exp(&terms) - (2.0 * PI).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    /// Midpoint-rule integral of `exp(log_density)` over a box.
    fn integrate_2d(f: impl Fn(&[f64]) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let p = [lo + (i as f64 + 0.5) * h, lo + (j as f64 + 0.5) * h];
                s += f(&p).exp();
            }
        }
        s * h * h
    }

    #[test]
    fn mixture_value_at_zero() {
        // ⅓(0.107982 + 0.797885 + 0.107982) = 0.337950
        let v = log_density_indep_mixture(&[0.0]);
        assert!((v - (-1.08485)).abs() < 1e-4, "{v}");
        assert!((v - 0.337_950f64.ln()).abs() < 1e-5);
        assert_eq!(log_density_indep_mixture(&[0.0, 0.0]), 2.0 * v);
    }

    #[test]
    fn mixture_is_symmetric_and_additive() {
        for x in [-2.3, -0.4, 0.1, 1.7] {
            assert_eq!(log_density_mixture_1d(x), log_density_mixture_1d(-x));
        }
        let p = [0.3, -1.2, 2.2];
        let sum: f64 = p.iter().map(|&v| log_density_mixture_1d(v)).sum();
        assert_eq!(log_density_indep_mixture(&p), sum);
    }

    #[test]
    fn octagon_covariance_is_rotated_diagonal() {
        let e = OCTAGON_MINOR_SD * OCTAGON_MINOR_SD;
        for i in 1..=8 {
            let (_, [a, c, b]) = octagon_component(i);
            assert!((a * b - c * c - e).abs() < 1e-14);
            assert!((a + b - (1.0 + e)).abs() < 1e-14);
        }
    }

    #[test]
    fn octagon_rotation_invariance() {
        let (s, c) = (PI / 4.0).sin_cos();
        for p in [[0.5, 1.0], [3.0, 0.2], [-2.0, 2.5]] {
            let rotated = [c * p[0] - s * p[1], s * p[0] + c * p[1]];
            let a = log_density_octagon(&p);
            let b = log_density_octagon(&rotated);
            assert!((a - b).abs() < 1e-10, "{a} {b}");
        }
    }

    #[test]
    fn octagon_peak_dominated_by_own_component() {
        let (mean, [a, c, b]) = octagon_component(1);
        let det = a * b - c * c;
        let single = (1.0f64 / 8.0).ln() - LN_2PI - 0.5 * det.ln();
        let full = log_density_octagon(&mean);
        assert!(full >= single && full - single < 0.7);
    }

    #[test]
    fn octagon_integrates_to_one() {
        let total = integrate_2d(log_density_octagon, -6.0, 6.0, 400);
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn involute_quadrature_converges() {
        let a = log_density_involute(&[3.0, 3.0], 10_000);
        let b = log_density_involute(&[3.0, 3.0], 100_000);
        assert!((a - b).abs() < 1e-6, "{a} {b}");
    }

    #[test]
    fn involute_integrates_to_one() {
        let total = integrate_2d(|p| log_density_involute(p, 2000), -9.0, 9.0, 300);
        assert!((total - 1.0).abs() < 1e-2, "{total}");
    }

    #[test]
    fn involute_far_point_negligible() {
        let on = log_density_involute(&[0.0, 0.0], DEFAULT_QUAD_POINTS);
        let far = log_density_involute(&[16.0, 0.0], DEFAULT_QUAD_POINTS);
        assert!((far - on).exp() < 1e-6);
    }

    #[test]
    fn samplers_are_deterministic() {
        for task in [
            SimTask::IndepGaussianMixture { dim: 3 },
            SimTask::OctagonMixture,
            SimTask::Involute { quad_points: 1000 },
        ] {
            let a = task.sample(50, &mut Rng::new(1, Stream::Simulation));
            let b = task.sample(50, &mut Rng::new(1, Stream::Simulation));
            assert_eq!(a, b);
            assert_eq!(a.cols(), task.dim());
        }
    }
}
