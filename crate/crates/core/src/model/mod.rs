//! The Roundtrip model: configuration, losses, training and checkpoints.

mod checkpoint;
mod config;
pub mod losses;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, FORMAT_VERSION};
pub use config::{Architecture, NetShape, RoundtripConfig};
pub use train::{train, train_with_validation, EpochRecord, Networks, TrainLog, Trainer};

use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::simdata::NormStats;

/// A trained forward/backward pair plus the noise scale of the forward map.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripModel {
    g_net: Mlp,
    h_net: Mlp,
    sigma: f64,
    norm_stats: Option<NormStats>,
}

impl RoundtripModel {
    pub fn new(g_net: Mlp, h_net: Mlp, sigma: f64) -> Result<Self> {
        if g_net.input_dim() != h_net.output_dim() || g_net.output_dim() != h_net.input_dim() {
            return Err(Error::Shape(format!(
                "G maps {}→{} but H maps {}→{}",
                g_net.input_dim(),
                g_net.output_dim(),
                h_net.input_dim(),
                h_net.output_dim()
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            g_net,
            h_net,
            sigma,
            norm_stats: None,
        })
    }

    pub fn with_norm_stats(mut self, stats: NormStats) -> Result<Self> {
        if stats.dim() != self.data_dim() {
            return Err(Error::Shape(format!(
                "normalization covers {} features, model has {}",
                stats.dim(),
                self.data_dim()
            )));
        }
        self.norm_stats = Some(stats);
        Ok(self)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        self.sigma = sigma;
        Ok(self)
    }

    /// Forward map `G: latent → data`.
    pub fn generator(&self) -> &Mlp {
        &self.g_net
    }

    /// Backward map `H: data → latent`.
    pub fn encoder(&self) -> &Mlp {
        &self.h_net
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Latent dimension `m`.
    pub fn latent_dim(&self) -> usize {
        self.g_net.input_dim()
    }

    /// Data dimension `n`.
    pub fn data_dim(&self) -> usize {
        self.g_net.output_dim()
    }

    pub fn norm_stats(&self) -> Option<&NormStats> {
        self.norm_stats.as_ref()
    }
}
