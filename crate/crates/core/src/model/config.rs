use crate::adam::AdamConfig;
use crate::error::{Error, Result};
use crate::estimators::ProposalParams;
use crate::nn::{Init, DEFAULT_LEAKY_SLOPE};

/// Hidden-layer count and width of one network. The output layer is extra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetShape {
    pub depth: usize,
    pub width: usize,
}

impl NetShape {
    pub const fn new(depth: usize, width: usize) -> Self {
        Self { depth, width }
    }

    /// `[input, width × depth, output]`
    pub fn dims(self, input: usize, output: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.depth + 2);
        dims.push(input);
        dims.extend(std::iter::repeat_n(self.width, self.depth));
        dims.push(output);
        dims
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub g: NetShape,
    pub h: NetShape,
    pub dx: NetShape,
    pub dz: NetShape,
}

impl Architecture {
    /// Full-size networks: G 10×512, H 10×256, D_x 4×256, D_z 2×128.
    pub const fn full() -> Self {
        Self {
            g: NetShape::new(10, 512),
            h: NetShape::new(10, 256),
            dx: NetShape::new(4, 256),
            dz: NetShape::new(2, 128),
        }
    }

    /// Desk-scale networks: G 4×128, H 4×64, D_x 3×64, D_z 2×32.
    pub const fn small() -> Self {
        Self {
            g: NetShape::new(4, 128),
            h: NetShape::new(4, 64),
            dx: NetShape::new(3, 64),
            dz: NetShape::new(2, 32),
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "full" => Some(Self::full()),
            "small" => Some(Self::small()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripConfig {
    /// Latent dimension `m`.
    pub latent_dim: usize,
    /// Data dimension `n`.
    pub data_dim: usize,
    /// Weight of the data-space cycle error.
    pub alpha: f64,
    /// Weight of the latent-space cycle error.
    pub beta: f64,
    pub sigma_grid: Vec<f64>,
    pub pretrain_epochs: usize,
    pub batch_size: usize,
    /// Iterations per epoch; `None` means one pass over the training rows.
    pub iterations_per_epoch: Option<usize>,
    pub adam: AdamConfig,
    pub patience_epochs: usize,
    pub max_epochs: usize,
    /// Importance samples per validation point during training.
    pub val_is_samples: usize,
    /// Cap on validation points scored per epoch; `None` scores all of them.
    pub val_max_points: Option<usize>,
    pub proposal: ProposalParams,
    pub architecture: Architecture,
    pub leaky_slope: f64,
    pub init: Init,
    pub seed: u64,
}

impl RoundtripConfig {
    pub fn new(latent_dim: usize, data_dim: usize) -> Self {
        Self {
            latent_dim,
            data_dim,
            alpha: 10.0,
            beta: 10.0,
            sigma_grid: vec![0.01, 0.05, 0.1, 0.2, 0.4, 0.5],
            pretrain_epochs: 20,
            batch_size: 64,
            iterations_per_epoch: None,
            adam: AdamConfig::default(),
            patience_epochs: 10,
            max_epochs: 500,
            val_is_samples: 2000,
            val_max_points: None,
            proposal: ProposalParams::default(),
            architecture: Architecture::full(),
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            init: Init::HeNormal,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.latent_dim == 0 || self.data_dim == 0 {
            return fail("latent and data dimensions must be at least 1".into());
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return fail(format!(
                "cycle weights must be non-negative (alpha {}, beta {})",
                self.alpha, self.beta
            ));
        }
        if self.sigma_grid.is_empty() {
            return fail("sigma grid is empty".into());
        }
        if let Some(s) = self.sigma_grid.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
            return fail(format!("sigma grid entries must be positive, found {s}"));
        }
        if self.batch_size == 0 {
            return fail("batch size must be positive".into());
        }
        if self.val_is_samples == 0 {
            return fail("validation needs at least one importance sample".into());
        }
        if self.iterations_per_epoch == Some(0) || self.val_max_points == Some(0) {
            return fail("iterations per epoch and validation points must be positive".into());
        }
        let a = &self.architecture;
        if [a.g, a.h, a.dx, a.dz].iter().any(|s| s.depth > 0 && s.width == 0) {
            return fail("hidden layers need a positive width".into());
        }
        self.proposal.validate()?;
        self.adam.validate()?;
        crate::nn::Activation::LeakyRelu(self.leaky_slope).validate()
    }
}
