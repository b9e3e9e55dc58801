//! Least-squares adversarial losses and the cycle penalty.
//!
//! Expectations are batch means. Each loss comes with the gradient with
//! respect to the network outputs it consumes.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

fn check_nonempty(batches: &[&Matrix]) -> Result<()> {
    if batches.iter().any(|b| b.rows() == 0) {
        return Err(Error::Input("loss over an empty batch".into()));
    }
    Ok(())
}

/// `mean((d - target)²)` over all entries.
fn mean_sq_to(d: &Matrix, target: f64) -> f64 {
    d.as_slice().iter().map(|v| (v - target).powi(2)).sum::<f64>() / d.rows() as f64
}

/// Gradient of `mean((d - target)²)` with respect to `d`.
pub(crate) fn mean_sq_grad(d: &Matrix, target: f64) -> Matrix {
    let scale = 2.0 / d.rows() as f64;
    let data = d.as_slice().iter().map(|v| scale * (v - target)).collect();
    Matrix::from_raw(d.rows(), d.cols(), data)
}

/// Discriminator objectives:
///
/// - `loss_dx = mean((D_x(x) − 1)²) + mean(D_x(G(z))²)`
/// - `loss_dz = mean((D_z(z) − 1)²) + mean(D_z(H(x))²)`
pub fn discriminator_losses(
    dx_on_real: &Matrix,
    dx_on_fake: &Matrix,
    dz_on_real: &Matrix,
    dz_on_fake: &Matrix,
) -> Result<(f64, f64)> {
    check_nonempty(&[dx_on_real, dx_on_fake, dz_on_real, dz_on_fake])?;
    let loss_dx = mean_sq_to(dx_on_real, 1.0) + mean_sq_to(dx_on_fake, 0.0);
    let loss_dz = mean_sq_to(dz_on_real, 1.0) + mean_sq_to(dz_on_fake, 0.0);
    Ok((loss_dx, loss_dz))
}

/// Generator objectives: `loss_g = mean((D_x(G(z)) − 1)²)`,
/// `loss_h = mean((D_z(H(x)) − 1)²)`.
pub fn generator_adv_losses(dx_on_fake: &Matrix, dz_on_fake: &Matrix) -> Result<(f64, f64)> {
    check_nonempty(&[dx_on_fake, dz_on_fake])?;
    Ok((mean_sq_to(dx_on_fake, 1.0), mean_sq_to(dz_on_fake, 1.0)))
}

/// `α · mean‖x − G(H(x))‖² + β · mean‖z − H(G(z))‖²`
pub fn roundtrip_loss(
    x_batch: &Matrix,
    x_cycled: &Matrix,
    z_batch: &Matrix,
    z_cycled: &Matrix,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    if x_batch.shape() != x_cycled.shape() || z_batch.shape() != z_cycled.shape() {
        return Err(Error::Shape(format!(
            "cycle shapes differ: x {:?} vs {:?}, z {:?} vs {:?}",
            x_batch.shape(),
            x_cycled.shape(),
            z_batch.shape(),
            z_cycled.shape()
        )));
    }
    check_nonempty(&[x_batch, z_batch])?;
    Ok(alpha * mean_sq_dist(x_batch, x_cycled) + beta * mean_sq_dist(z_batch, z_cycled))
}

/// Batch mean of squared row distances.
fn mean_sq_dist(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / a.rows() as f64
}

/// Gradient of `weight · mean‖target − cycled‖²` with respect to `cycled`.
pub(crate) fn cycle_grad(target: &Matrix, cycled: &Matrix, weight: f64) -> Matrix {
    let scale = 2.0 * weight / target.rows() as f64;
    let data = target
        .as_slice()
        .iter()
        .zip(cycled.as_slice())
        .map(|(t, c)| scale * (c - t))
        .collect();
    Matrix::from_raw(target.rows(), target.cols(), data)
}
