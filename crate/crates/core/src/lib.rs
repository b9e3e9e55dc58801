//! Roundtrip density estimation.
//!
//! A forward network `G` maps a standard Gaussian latent space onto the data
//! space, a backward network `H` maps data back to the latent space, and the
//! two are trained jointly with least-squares adversarial losses plus a cycle
//! penalty. The estimated density of a point `x` is the marginal
//! `∫ N(x; G(z), σ²I) N(z; 0, I) dz`, evaluated either by importance
//! sampling around `H(x)` or in closed form by linearizing `G` at `H(x)`.
//!
//! Crate layout:
//!
//! - [`linalg`], [`nn`], [`adam`], [`rng`]: the numeric engine
//! - [`model`]: losses, training loop, checkpoints
//! - [`estimators`]: pointwise log-density evaluation
//! - [`simdata`]: simulation tasks, outlier data, CSV ingestion
//! - [`kde`]: Gaussian kernel density baseline
//! - [`metrics`]: Spearman, mean log-likelihood, precision@k, grids, reports
//! - [`exec`]: row-parallel execution (rayon behind the `parallel` feature)

pub mod adam;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod kde;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod rng;
pub mod simdata;

pub use error::{Error, Result};
pub use exec::ExecMode;
pub use linalg::Matrix;
pub use model::{RoundtripConfig, RoundtripModel, TrainLog};
pub use rng::{Rng, Stream};
