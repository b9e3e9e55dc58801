//! Pointwise log-density of a trained model.
//!
//! The model density is the marginal
//! `p(x) = ∫ N(x; G(z), σ²I) N(z; 0, I) dz`. Two evaluators are provided:
//!
//! - importance sampling with a spherical Student's t proposal centered at
//!   `H(x)`, combined in log space;
//! - a Laplace-type closed form obtained by linearizing `G` at `z̃ = H(x)`,
//!   which is exact whenever `G` is affine.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::linalg::{log_sum_exp, squared_distance, squared_norm, Cholesky, Matrix};
use crate::model::RoundtripModel;
use crate::nn::Mlp;
use crate::rng::{Rng, Stream};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Rows of `G` evaluated per forward call while importance sampling.
const IS_CHUNK: usize = 2048;

/// Shape of the importance proposal; the center is always `H(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalParams {
    pub scale: f64,
    pub dof: f64,
}

impl Default for ProposalParams {
    fn default() -> Self {
        Self {
            scale: 1.0,
            dof: 5.0,
        }
    }
}

impl ProposalParams {
    pub fn validate(&self) -> Result<()> {
        if self.scale > 0.0 && self.dof > 0.0 && self.scale.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "proposal scale and dof must be positive, got {self:?}"
            )))
        }
    }
}

/// Spherical multivariate Student's t in location–scale form.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentTProposal {
    center: Vec<f64>,
    scale: f64,
    dof: f64,
    log_norm: f64,
}

impl StudentTProposal {
    pub fn new(center: Vec<f64>, params: ProposalParams) -> Result<Self> {
        params.validate()?;
        let m = center.len() as f64;
        let ProposalParams { scale, dof } = params;
        let log_norm = libm::lgamma((dof + m) / 2.0)
            - libm::lgamma(dof / 2.0)
            - 0.5 * m * (dof * PI).ln()
            - m * scale.ln();
        Ok(Self {
            center,
            scale,
            dof,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `center + scale · g / sqrt(χ²_ν / ν)` with `g ~ N(0, I)`.
    pub fn sample_into(&self, rng: &mut Rng, out: &mut [f64]) {
        let w = (rng.chi_squared(self.dof) / self.dof).sqrt();
        for (o, c) in out.iter_mut().zip(&self.center) {
            *o = c + self.scale * rng.normal() / w;
        }
    }

    pub fn log_density(&self, z: &[f64]) -> f64 {
        let m = self.center.len() as f64;
        let r2 = squared_distance(z, &self.center) / (self.scale * self.scale);
        self.log_norm - 0.5 * (self.dof + m) * (r2 / self.dof).ln_1p()
    }
}

/// `log N(z; 0, I)`
pub fn log_base_density(z: &[f64]) -> f64 {
    -0.5 * z.len() as f64 * LN_2PI - 0.5 * squared_norm(z)
}

/// `log N(x; G(z), σ²I)` given the squared residual `‖x − G(z)‖²`.
#[inline]
fn log_conditional_from_residual(sq_residual: f64, n: usize, sigma: f64) -> f64 {
    let n = n as f64;
    -0.5 * n * LN_2PI - n * sigma.ln() - sq_residual / (2.0 * sigma * sigma)
}

/// `log p(x | z) = log N(x; G(z), σ²I)`
pub fn log_conditional(x: &[f64], z: &[f64], model: &RoundtripModel) -> Result<f64> {
    let gz = model.generator().forward_point(z)?;
    if x.len() != gz.len() {
        return Err(Error::Shape(format!(
            "point has {} coordinates, model data dimension is {}",
            x.len(),
            gz.len()
        )));
    }
    Ok(log_conditional_from_residual(
        squared_distance(x, &gz),
        x.len(),
        model.sigma(),
    ))
}

/// Importance-sampling result for one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsEstimate {
    pub log_density: f64,
    /// Delta-method standard error of `log_density`.
    pub log_std_error: f64,
    /// Effective sample size `(Σw)² / Σw²`.
    pub effective_samples: f64,
}

/// Per-sample pieces shared by every σ: `‖x − G(zᵢ)‖²` and
/// `log p(zᵢ) − log q(zᵢ)`.
struct ProposalDraws {
    sq_residuals: Vec<f64>,
    log_prior_ratio: Vec<f64>,
}

fn draw_proposal(
    x: &[f64],
    generator: &Mlp,
    encoder: &Mlp,
    num_samples: usize,
    proposal: ProposalParams,
    rng: &mut Rng,
) -> Result<ProposalDraws> {
    if num_samples == 0 {
        return Err(Error::Input("importance sampling needs at least one sample".into()));
    }
    if x.len() != encoder.input_dim() {
        return Err(Error::Shape(format!(
            "point has {} coordinates, model data dimension is {}",
            x.len(),
            encoder.input_dim()
        )));
    }
    let center = encoder.forward_point(x)?;
    let q = StudentTProposal::new(center, proposal)?;
    let m = q.dim();

    let mut sq_residuals = Vec::with_capacity(num_samples);
    let mut log_prior_ratio = Vec::with_capacity(num_samples);
    let mut start = 0;
    while start < num_samples {
        let rows = IS_CHUNK.min(num_samples - start);
        let mut z = Matrix::zeros(rows, m);
        for i in 0..rows {
            q.sample_into(rng, z.row_mut(i));
        }
        let gz = generator.forward(&z)?;
        for (zi, gi) in z.iter_rows().zip(gz.iter_rows()) {
            let lq = q.log_density(zi);
            if !lq.is_finite() {
                return Err(Error::Numerical(format!(
                    "proposal density is not finite ({lq})"
                )));
            }
            log_prior_ratio.push(log_base_density(zi) - lq);
            sq_residuals.push(squared_distance(x, gi));
        }
        start += rows;
    }
    Ok(ProposalDraws {
        sq_residuals,
        log_prior_ratio,
    })
}

impl ProposalDraws {
    fn estimate(&self, n: usize, sigma: f64) -> IsEstimate {
        let log_w: Vec<f64> = self
            .sq_residuals
            .iter()
            .zip(&self.log_prior_ratio)
            .map(|(&r, &lr)| log_conditional_from_residual(r, n, sigma) + lr)
            .collect();
        let count = log_w.len() as f64;
        let lse = log_sum_exp(&log_w);
        let log_density = lse - count.ln();

        // statistics of the normalized weights w_i / max w
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut s1, mut s2) = (0.0, 0.0);
        for lw in &log_w {
            let w = (lw - max).exp();
            s1 += w;
            s2 += w * w;
        }
        let mean = s1 / count;
        let var = if count > 1.0 {
            ((s2 / count - mean * mean) * count / (count - 1.0)).max(0.0)
        } else {
            0.0
        };
        IsEstimate {
            log_density,
            log_std_error: (var / count).sqrt() / mean,
            effective_samples: s1 * s1 / s2,
        }
    }
}

/// Importance-sampling estimate of `log p(x)` with `num_samples` draws from
/// a Student's t proposal centered at `H(x)`.
pub fn estimate_is(
    x: &[f64],
    model: &RoundtripModel,
    num_samples: usize,
    proposal: ProposalParams,
    rng: &mut Rng,
) -> Result<IsEstimate> {
    let draws = draw_proposal(
        x,
        model.generator(),
        model.encoder(),
        num_samples,
        proposal,
        rng,
    )?;
    let est = draws.estimate(x.len(), model.sigma());
    if !est.log_density.is_finite() {
        return Err(Error::Numerical(format!(
            "importance-sampling estimate is {}",
            est.log_density
        )));
    }
    Ok(est)
}

/// Importance-sampling estimates of `log p(x)` for several noise scales from
/// one shared set of proposal draws.
pub fn estimate_is_sigmas(
    x: &[f64],
    generator: &Mlp,
    encoder: &Mlp,
    sigmas: &[f64],
    num_samples: usize,
    proposal: ProposalParams,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let draws = draw_proposal(x, generator, encoder, num_samples, proposal, rng)?;
    Ok(sigmas
        .iter()
        .map(|&s| draws.estimate(x.len(), s).log_density)
        .collect())
}

/// Everything the closed-form evaluation computes on the way to `log p(x)`.
#[derive(Debug, Clone)]
pub struct LaplaceIntermediates {
    /// `z̃ = H(x)`
    pub z_tilde: Vec<f64>,
    /// Jacobian of `G` at `z̃`, `n × m`.
    pub jacobian: Matrix,
    /// `A = JᵀJ`
    pub a: Matrix,
    /// `b = Jᵀ(x − G(z̃))`
    pub b: Vec<f64>,
    /// `λ = σ⁻²`
    pub lambda: f64,
    /// `Σ = (I + λA)⁻¹`
    pub sigma_matrix: Matrix,
    /// `μ = Σ(λb − z̃)`
    pub mu: Vec<f64>,
    /// `c₁ = ‖z̃‖² + λ‖x − G(z̃)‖²`
    pub c1: f64,
    /// `c = c₁ − μᵀΣ⁻¹μ`
    pub c: f64,
    /// `log det Σ`
    pub log_det_sigma: f64,
    pub log_density: f64,
}

struct LaplaceCore {
    z_tilde: Vec<f64>,
    jacobian: Matrix,
    a: Matrix,
    b: Vec<f64>,
    lambda: f64,
    chol: Cholesky,
    shift: Vec<f64>,
    c1: f64,
    c: f64,
    log_density: f64,
}

fn laplace_core(x: &[f64], model: &RoundtripModel) -> Result<LaplaceCore> {
    let n = model.data_dim();
    if x.len() != n {
        return Err(Error::Shape(format!(
            "point has {} coordinates, model data dimension is {n}",
            x.len()
        )));
    }
    let z_tilde = model.encoder().forward_point(x)?;
    let (g_at, jacobian) = model.generator().jacobian_with_value(&z_tilde)?;
    let residual: Vec<f64> = x.iter().zip(&g_at).map(|(a, b)| a - b).collect();
    let sigma = model.sigma();
    let lambda = 1.0 / (sigma * sigma);

    let a = jacobian.gram();
    let b = jacobian.tr_mul_vec(&residual);
    let m = z_tilde.len();
    let mut precision = a.clone();
    for v in precision.as_mut_slice().iter_mut() {
        *v *= lambda;
    }
    for i in 0..m {
        precision[(i, i)] += 1.0;
    }
    let chol = Cholesky::factor(&precision).map_err(|e| {
        Error::Numerical(format!("I + λA is not positive definite, model is corrupt: {e}"))
    })?;

    // μᵀΣ⁻¹μ = (λb − z̃)ᵀ Σ (λb − z̃), one triangular solve against I + λA
    let shift: Vec<f64> = b
        .iter()
        .zip(&z_tilde)
        .map(|(bi, zi)| lambda * bi - zi)
        .collect();
    let quad = chol.inv_quad_form(&shift);
    let c1 = squared_norm(&z_tilde) + lambda * squared_norm(&residual);
    let c = c1 - quad;
    let log_det_sigma = -chol.log_det();
    let log_density =
        -0.5 * n as f64 * LN_2PI - n as f64 * sigma.ln() + 0.5 * log_det_sigma - 0.5 * c;
    if !log_density.is_finite() {
        return Err(Error::Numerical(format!(
            "closed-form log density is {log_density}"
        )));
    }
    Ok(LaplaceCore {
        z_tilde,
        jacobian,
        a,
        b,
        lambda,
        chol,
        shift,
        c1,
        c,
        log_density,
    })
}

/// Closed-form `log p(x)` from the linearization of `G` at `H(x)`.
pub fn estimate_laplace(x: &[f64], model: &RoundtripModel) -> Result<f64> {
    Ok(laplace_core(x, model)?.log_density)
}

/// As [`estimate_laplace`], also returning `Σ`, `μ` and the other pieces.
pub fn laplace_intermediates(x: &[f64], model: &RoundtripModel) -> Result<LaplaceIntermediates> {
    let core = laplace_core(x, model)?;
    let m = core.z_tilde.len();
    let mut sigma_matrix = Matrix::zeros(m, m);
    let mut e = vec![0.0; m];
    for j in 0..m {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = core.chol.solve(&e);
        for i in 0..m {
            sigma_matrix[(i, j)] = col[i];
        }
    }
    let mu = core.chol.solve(&core.shift);
    Ok(LaplaceIntermediates {
        log_det_sigma: -core.chol.log_det(),
        z_tilde: core.z_tilde,
        jacobian: core.jacobian,
        a: core.a,
        b: core.b,
        lambda: core.lambda,
        sigma_matrix,
        mu,
        c1: core.c1,
        c: core.c,
        log_density: core.log_density,
    })
}

/// Proposal stream for point `x`, keyed by the base seed and the point's
/// coordinates, so a point's estimate does not depend on its position in a
/// batch or on how the batch is scheduled.
pub fn point_rng(x: &[f64], seed: u64) -> Rng {
    let key = x.iter().fold(0xA076_1D64_78BD_642F_u64, |h, v| {
        (h ^ v.to_bits()).rotate_left(29).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    });
    Rng::new(seed, Stream::Proposal).child(key)
}

/// [`estimate_is`] drawing from [`point_rng`].
pub fn estimate_is_seeded(
    x: &[f64],
    model: &RoundtripModel,
    num_samples: usize,
    proposal: ProposalParams,
    seed: u64,
) -> Result<IsEstimate> {
    estimate_is(x, model, num_samples, proposal, &mut point_rng(x, seed))
}

/// Which evaluator a batch uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    ImportanceSampling {
        num_samples: usize,
        proposal: ProposalParams,
        /// Base seed, see [`point_rng`].
        seed: u64,
    },
    Laplace,
}

impl Method {
    pub fn importance(num_samples: usize, seed: u64) -> Self {
        Method::ImportanceSampling {
            num_samples,
            proposal: ProposalParams::default(),
            seed,
        }
    }
}

/// Log-density of every row of `xs`. Each result depends only on the row,
/// the model and (for importance sampling) the seed.
pub fn batch_estimate(
    xs: &Matrix,
    model: &RoundtripModel,
    method: Method,
    mode: ExecMode,
) -> Result<Vec<f64>> {
    if xs.cols() != model.data_dim() {
        return Err(Error::Shape(format!(
            "points have {} columns, model data dimension is {}",
            xs.cols(),
            model.data_dim()
        )));
    }
    let per_row = |i: usize| -> Result<f64> {
        let x = xs.row(i);
        let out = match method {
            Method::ImportanceSampling {
                num_samples,
                proposal,
                seed,
            } => estimate_is_seeded(x, model, num_samples, proposal, seed).map(|e| e.log_density),
            Method::Laplace => estimate_laplace(x, model),
        };
        out.map_err(|e| Error::Row {
            row: i,
            source: Box::new(e),
        })
    };
    exec::try_map_indexed(mode, xs.rows(), per_row)
}

/// [`batch_estimate`] for points in original data units. When the model
/// carries normalization statistics the points are normalized first and the
/// log-Jacobian of the normalization is added, so the result is a density
/// over the original coordinates.
pub fn batch_estimate_raw(
    xs: &Matrix,
    model: &RoundtripModel,
    method: Method,
    mode: ExecMode,
) -> Result<Vec<f64>> {
    match model.norm_stats() {
        None => batch_estimate(xs, model, method, mode),
        Some(stats) => {
            let normalized = stats.normalize(xs)?;
            let shift = stats.log_jacobian();
            let mut out = batch_estimate(&normalized, model, method, mode)?;
            out.iter_mut().for_each(|v| *v += shift);
            Ok(out)
        }
    }
}
