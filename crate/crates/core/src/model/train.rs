//! Alternating training of the generator pair and the discriminator pair,
//! with noise-scale selection and early stopping on validation likelihood.

use log::{debug, info};

use crate::adam::AdamState;
use crate::error::{Error, Result};
use crate::estimators::estimate_is_sigmas;
use crate::exec::{self, ExecMode};
use crate::linalg::Matrix;
use crate::nn::{Activation, Mlp, MlpGrads};
use crate::rng::{Rng, Stream};

use super::losses::{
    cycle_grad, discriminator_losses, generator_adv_losses, mean_sq_grad, roundtrip_loss,
};
use super::{RoundtripConfig, RoundtripModel};

/// The four networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Networks {
    /// Latent → data.
    pub g: Mlp,
    /// Data → latent.
    pub h: Mlp,
    /// Data-space discriminator.
    pub dx: Mlp,
    /// Latent-space discriminator.
    pub dz: Mlp,
}

impl Networks {
    pub fn init(config: &RoundtripConfig) -> Result<Self> {
        let (m, n) = (config.latent_dim, config.data_dim);
        let arch = &config.architecture;
        let hidden = Activation::LeakyRelu(config.leaky_slope);
        let out = Activation::Identity;
        let base = Rng::new(config.seed, Stream::Init);
        let build = |k: u64, dims: Vec<usize>| {
            Mlp::init(&dims, hidden, out, config.init, &mut base.child(k))
        };
        Ok(Self {
            g: build(0, arch.g.dims(m, n))?,
            h: build(1, arch.h.dims(n, m))?,
            dx: build(2, arch.dx.dims(n, 1))?,
            dz: build(3, arch.dz.dims(m, 1))?,
        })
    }
}

/// Batch losses from one generator update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorLosses {
    pub adv_g: f64,
    pub adv_h: f64,
    pub roundtrip: f64,
}

impl GeneratorLosses {
    pub fn total(&self) -> f64 {
        self.adv_g + self.adv_h + self.roundtrip
    }
}

/// Batch losses from one discriminator update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminatorLosses {
    pub dx: f64,
    pub dz: f64,
}

impl DiscriminatorLosses {
    pub fn total(&self) -> f64 {
        self.dx + self.dz
    }
}

fn adam_for(net: &Mlp, config: &RoundtripConfig) -> AdamState {
    AdamState::new(config.adam, net.param_slices().iter().map(|s| s.len()))
}

fn apply(net: &mut Mlp, state: &mut AdamState, grads: &MlpGrads) -> Result<()> {
    let g = grads.slices();
    state.step(&mut net.param_slices_mut(), &g)
}

/// Networks plus optimizer state; exposes the two alternating updates.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub nets: Networks,
    opt_g: AdamState,
    opt_h: AdamState,
    opt_dx: AdamState,
    opt_dz: AdamState,
    alpha: f64,
    beta: f64,
}

impl Trainer {
    pub fn new(nets: Networks, config: &RoundtripConfig) -> Self {
        Self {
            opt_g: adam_for(&nets.g, config),
            opt_h: adam_for(&nets.h, config),
            opt_dx: adam_for(&nets.dx, config),
            opt_dz: adam_for(&nets.dz, config),
            nets,
            alpha: config.alpha,
            beta: config.beta,
        }
    }

    /// One Adam step on `L(G,H) = L_GAN(G) + L_GAN(H) + L_RT` with the
    /// discriminators held fixed.
    pub fn generator_step(&mut self, x: &Matrix, z: &Matrix) -> Result<GeneratorLosses> {
        let Networks { g, h, dx, dz } = &self.nets;

        // z → G(z) → H(G(z)), and D_x(G(z))
        let g_of_z = g.forward_cached(z)?;
        let h_of_gz = h.forward_cached(g_of_z.output())?;
        let dx_fake = dx.forward_cached(g_of_z.output())?;
        // x → H(x) → G(H(x)), and D_z(H(x))
        let h_of_x = h.forward_cached(x)?;
        let g_of_hx = g.forward_cached(h_of_x.output())?;
        let dz_fake = dz.forward_cached(h_of_x.output())?;

        let (adv_g, adv_h) = generator_adv_losses(dx_fake.output(), dz_fake.output())?;
        let rt = roundtrip_loss(
            x,
            g_of_hx.output(),
            z,
            h_of_gz.output(),
            self.alpha,
            self.beta,
        )?;
        let losses = GeneratorLosses {
            adv_g,
            adv_h,
            roundtrip: rt,
        };
        check_finite("generator loss", losses.total())?;

        // latent-cycle branch: gradients flow into H (second pass) and G
        let (_, d_gz_adv) = dx.backward_cached(&dx_fake, &mean_sq_grad(dx_fake.output(), 1.0))?;
        let (mut grad_h, d_gz_cycle) =
            h.backward_cached(&h_of_gz, &cycle_grad(z, h_of_gz.output(), self.beta))?;
        let mut d_gz = d_gz_adv;
        d_gz.add_scaled(&d_gz_cycle, 1.0);
        let (mut grad_g, _) = g.backward_cached(&g_of_z, &d_gz)?;

        // data-cycle branch: gradients flow into G (second pass) and H
        let (_, d_hx_adv) = dz.backward_cached(&dz_fake, &mean_sq_grad(dz_fake.output(), 1.0))?;
        let (grad_g2, d_hx_cycle) =
            g.backward_cached(&g_of_hx, &cycle_grad(x, g_of_hx.output(), self.alpha))?;
        let mut d_hx = d_hx_adv;
        d_hx.add_scaled(&d_hx_cycle, 1.0);
        let (grad_h2, _) = h.backward_cached(&h_of_x, &d_hx)?;

        grad_g.accumulate(&grad_g2);
        grad_h.accumulate(&grad_h2);
        if !grad_g.all_finite() || !grad_h.all_finite() {
            return Err(Error::Numerical("non-finite generator gradient".into()));
        }
        apply(&mut self.nets.g, &mut self.opt_g, &grad_g)?;
        apply(&mut self.nets.h, &mut self.opt_h, &grad_h)?;
        Ok(losses)
    }

    /// One Adam step on `L(D_x, D_z) = L_GAN(D_x) + L_GAN(D_z)` with the
    /// generators held fixed.
    pub fn discriminator_step(&mut self, x: &Matrix, z: &Matrix) -> Result<DiscriminatorLosses> {
        let Networks { g, h, dx, dz } = &self.nets;
        let fake_x = g.forward(z)?;
        let fake_z = h.forward(x)?;

        let dx_real = dx.forward_cached(x)?;
        let dx_fake = dx.forward_cached(&fake_x)?;
        let dz_real = dz.forward_cached(z)?;
        let dz_fake = dz.forward_cached(&fake_z)?;
        let (loss_dx, loss_dz) = discriminator_losses(
            dx_real.output(),
            dx_fake.output(),
            dz_real.output(),
            dz_fake.output(),
        )?;
        check_finite("discriminator loss", loss_dx + loss_dz)?;

        let (mut grad_dx, _) = dx.backward_cached(&dx_real, &mean_sq_grad(dx_real.output(), 1.0))?;
        let (gdx_fake, _) = dx.backward_cached(&dx_fake, &mean_sq_grad(dx_fake.output(), 0.0))?;
        grad_dx.accumulate(&gdx_fake);
        let (mut grad_dz, _) = dz.backward_cached(&dz_real, &mean_sq_grad(dz_real.output(), 1.0))?;
        let (gdz_fake, _) = dz.backward_cached(&dz_fake, &mean_sq_grad(dz_fake.output(), 0.0))?;
        grad_dz.accumulate(&gdz_fake);
        if !grad_dx.all_finite() || !grad_dz.all_finite() {
            return Err(Error::Numerical("non-finite discriminator gradient".into()));
        }
        apply(&mut self.nets.dx, &mut self.opt_dx, &grad_dx)?;
        apply(&mut self.nets.dz, &mut self.opt_dz, &grad_dz)?;
        Ok(DiscriminatorLosses {
            dx: loss_dx,
            dz: loss_dz,
        })
    }
}

fn check_finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "{what} became {v}; try a smaller learning rate"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of `L(G,H)` over the epoch's iterations.
    pub generator_loss: f64,
    /// Mean of `L(D_x,D_z)` over the epoch's iterations.
    pub discriminator_loss: f64,
    pub val_log_likelihood: f64,
    /// Noise scale the validation likelihood was computed with.
    pub sigma: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub chosen_sigma: Option<f64>,
    /// Last completed epoch (1-based count); 0 when nothing ran.
    pub stopped_epoch: usize,
    /// Epoch whose parameters were returned.
    pub best_epoch: Option<usize>,
    /// First epoch (1-based) eligible as the returned checkpoint: the epoch
    /// at which σ was fixed. Earlier records belong to the σ search.
    pub selection_start: usize,
}

impl TrainLog {
    /// Highest validation log-likelihood among the epochs eligible for
    /// selection (from `selection_start` on).
    pub fn best_val_log_likelihood(&self) -> Option<f64> {
        self.epochs
            .iter()
            .filter(|r| r.epoch >= self.selection_start)
            .map(|r| r.val_log_likelihood)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }

    /// `epoch,generator_loss,discriminator_loss,val_log_likelihood,sigma`
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("epoch,generator_loss,discriminator_loss,val_log_likelihood,sigma\n");
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.generator_loss, r.discriminator_loss, r.val_log_likelihood, r.sigma
            ));
        }
        out
    }
}

/// Mean validation log-likelihood for each σ in `sigmas`, sharing proposal
/// draws across σ. Point `i` uses child stream `i` of the validation seed.
fn validation_scores(
    nets: &Networks,
    val: &Matrix,
    sigmas: &[f64],
    config: &RoundtripConfig,
) -> Result<Vec<f64>> {
    let base = Rng::new(config.seed, Stream::Validation);
    let per_point = exec::try_map_indexed(ExecMode::Parallel, val.rows(), |i| {
        estimate_is_sigmas(
            val.row(i),
            &nets.g,
            &nets.h,
            sigmas,
            config.val_is_samples,
            config.proposal,
            &mut base.child(i as u64),
        )
    })?;
    let count = val.rows() as f64;
    let mut means = vec![0.0; sigmas.len()];
    for row in &per_point {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v / count;
        }
    }
    Ok(means)
}

/// Index of the largest score; ties go to the smallest σ.
fn best_sigma(sigmas: &[f64], scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..sigmas.len() {
        let better = scores[i] > scores[best]
            || (scores[i] == scores[best] && sigmas[i] < sigmas[best]);
        if better {
            best = i;
        }
    }
    best
}

fn check_data(data: &Matrix, config: &RoundtripConfig, what: &str) -> Result<()> {
    if data.cols() != config.data_dim {
        return Err(Error::Shape(format!(
            "{what} has {} columns, configured data dimension is {}",
            data.cols(),
            config.data_dim
        )));
    }
    if !data.all_finite() {
        return Err(Error::Input(format!("{what} contains non-finite values")));
    }
    Ok(())
}

/// Trains on `data`, holding out 10% of the rows for validation.
pub fn train(data: &Matrix, config: &RoundtripConfig) -> Result<(RoundtripModel, TrainLog)> {
    config.validate()?;
    check_data(data, config, "training data")?;
    if data.rows() < 2 {
        return Err(Error::Input("need at least two rows to hold out validation data".into()));
    }
    let mut idx: Vec<usize> = (0..data.rows()).collect();
    Rng::new(config.seed, Stream::Split).shuffle(&mut idx);
    let n_val = ((data.rows() as f64 * 0.1).round() as usize).clamp(1, data.rows() - 1);
    let (val_idx, train_idx) = idx.split_at(n_val);
    train_with_validation(
        &data.select_rows(train_idx),
        &data.select_rows(val_idx),
        config,
    )
}

/// Trains on `train_data`, scoring `val_data` after every epoch.
///
/// During the first `pretrain_epochs` epochs every σ in the grid is scored
/// and the best one is recorded; at the end of that phase σ is fixed to the
/// winner. From that epoch on, the parameters of the epoch with the highest
/// validation likelihood are kept and training stops after `patience_epochs`
/// epochs without improvement. Pretraining epochs are never returned: their
/// scores use varying σ and early, barely trained networks can score well in
/// high dimensions. If the budget ends before σ is fixed, the last epoch is
/// the only candidate.
pub fn train_with_validation(
    train_data: &Matrix,
    val_data: &Matrix,
    config: &RoundtripConfig,
) -> Result<(RoundtripModel, TrainLog)> {
    config.validate()?;
    check_data(train_data, config, "training data")?;
    check_data(val_data, config, "validation data")?;
    if train_data.rows() < config.batch_size {
        return Err(Error::Input(format!(
            "{} training rows is fewer than the batch size {}",
            train_data.rows(),
            config.batch_size
        )));
    }
    if val_data.rows() == 0 {
        return Err(Error::Input("validation set is empty".into()));
    }
    let val = match config.val_max_points {
        Some(cap) if cap < val_data.rows() => {
            let mut idx: Vec<usize> = (0..val_data.rows()).collect();
            Rng::new(config.seed, Stream::Validation).shuffle(&mut idx);
            val_data.select_rows(&idx[..cap])
        }
        _ => val_data.clone(),
    };

    let nets = Networks::init(config)?;
    let mut log = TrainLog::default();
    let grid = &config.sigma_grid;

    if config.max_epochs == 0 {
        let scores = validation_scores(&nets, &val, grid, config)?;
        let sigma = grid[best_sigma(grid, &scores)];
        log.chosen_sigma = Some(sigma);
        let model = RoundtripModel::new(nets.g, nets.h, sigma)?;
        return Ok((model, log));
    }

    let mut trainer = Trainer::new(nets, config);
    let iters = config
        .iterations_per_epoch
        .unwrap_or_else(|| train_data.rows().div_ceil(config.batch_size));
    let mut noise = Rng::new(config.seed, Stream::LatentNoise);
    let mut picker = Rng::new(config.seed, Stream::DataShuffle);
    let mut x = Matrix::zeros(config.batch_size, config.data_dim);

    let mut best: Option<(f64, Mlp, Mlp, f64)> = None;
    let mut since_best = 0usize;
    let mut fixed_sigma: Option<f64> = None;
    let selection_start = config.pretrain_epochs.clamp(1, config.max_epochs);
    log.selection_start = selection_start;

    for epoch in 0..config.max_epochs {
        let (mut gen_sum, mut disc_sum) = (0.0, 0.0);
        for _ in 0..iters {
            // x with replacement from the training rows, z from N(0, I)
            for i in 0..config.batch_size {
                let r = picker.index(train_data.rows());
                x.row_mut(i).copy_from_slice(train_data.row(r));
            }
            let z = noise.gaussian(config.batch_size, config.latent_dim);
            gen_sum += trainer.generator_step(&x, &z)?.total();
            disc_sum += trainer.discriminator_step(&x, &z)?.total();
        }

        let (val_ll, sigma) = match fixed_sigma {
            Some(s) => (validation_scores(&trainer.nets, &val, &[s], config)?[0], s),
            None => {
                let scores = validation_scores(&trainer.nets, &val, grid, config)?;
                let k = best_sigma(grid, &scores);
                (scores[k], grid[k])
            }
        };
        check_finite("validation log-likelihood", val_ll)?;
        let record = EpochRecord {
            epoch: epoch + 1,
            generator_loss: gen_sum / iters as f64,
            discriminator_loss: disc_sum / iters as f64,
            val_log_likelihood: val_ll,
            sigma,
        };
        debug!("{record:?}");
        log.epochs.push(record);
        log.stopped_epoch = epoch + 1;

        if epoch + 1 < selection_start {
            // σ search phase: nothing is kept
        } else if best.as_ref().is_none_or(|b| val_ll > b.0) {
            best = Some((
                val_ll,
                trainer.nets.g.clone(),
                trainer.nets.h.clone(),
                sigma,
            ));
            log.best_epoch = Some(epoch + 1);
            since_best = 0;
        } else {
            since_best += 1;
        }

        if fixed_sigma.is_none() && epoch + 1 >= config.pretrain_epochs {
            fixed_sigma = Some(sigma);
            log.chosen_sigma = Some(sigma);
            info!("epoch {}: noise scale fixed at {sigma}", epoch + 1);
        } else if fixed_sigma.is_some() && since_best >= config.patience_epochs {
            info!(
                "epoch {}: no improvement in {} epochs, stopping",
                epoch + 1,
                config.patience_epochs
            );
            break;
        }
    }
    if log.chosen_sigma.is_none() {
        log.chosen_sigma = log.epochs.last().map(|r| r.sigma);
    }

    let (_, g, h, sigma) = best.expect("at least one epoch ran");
    Ok((RoundtripModel::new(g, h, sigma)?, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Architecture, NetShape};

    fn tiny_config(m: usize, n: usize) -> RoundtripConfig {
        let mut c = RoundtripConfig::new(m, n);
        c.architecture = Architecture {
            g: NetShape::new(1, 8),
            h: NetShape::new(1, 8),
            dx: NetShape::new(1, 8),
            dz: NetShape::new(1, 4),
        };
        c.batch_size = 16;
        c.val_is_samples = 50;
        c.pretrain_epochs = 2;
        c.patience_epochs = 2;
        c.max_epochs = 6;
        c.iterations_per_epoch = Some(5);
        c.adam.learning_rate = 1e-3;
        c.seed = 3;
        c
    }

    fn data(rows: usize, cols: usize, seed: u64) -> Matrix {
        Rng::new(seed, Stream::Simulation).gaussian(rows, cols)
    }

    #[test]
    fn generator_step_leaves_discriminators_alone() {
        let mut cfg = tiny_config(2, 3);
        cfg.alpha = 0.0;
        cfg.beta = 0.0;
        let mut t = Trainer::new(Networks::init(&cfg).unwrap(), &cfg);
        let before = t.nets.clone();
        let x = data(16, 3, 1);
        let z = data(16, 2, 2);
        t.generator_step(&x, &z).unwrap();
        assert_eq!(t.nets.dx, before.dx);
        assert_eq!(t.nets.dz, before.dz);
        assert_ne!(t.nets.g, before.g);
        assert_ne!(t.nets.h, before.h);

        let before = t.nets.clone();
        t.discriminator_step(&x, &z).unwrap();
        assert_eq!(t.nets.g, before.g);
        assert_eq!(t.nets.h, before.h);
        assert_ne!(t.nets.dx, before.dx);
        assert_ne!(t.nets.dz, before.dz);
    }

    #[test]
    fn losses_are_non_negative() {
        let cfg = tiny_config(2, 3);
        let mut t = Trainer::new(Networks::init(&cfg).unwrap(), &cfg);
        for k in 0..10 {
            let x = data(16, 3, 10 + k);
            let z = data(16, 2, 100 + k);
            let g = t.generator_step(&x, &z).unwrap();
            let d = t.discriminator_step(&x, &z).unwrap();
            assert!(g.adv_g >= 0.0 && g.adv_h >= 0.0 && g.roundtrip >= 0.0);
            assert!(d.dx >= 0.0 && d.dz >= 0.0);
        }
    }

    #[test]
    fn zero_budget_returns_initial_networks() {
        let mut cfg = tiny_config(1, 2);
        cfg.max_epochs = 0;
        let (model, log) = train(&data(100, 2, 5), &cfg).unwrap();
        assert!(log.epochs.is_empty());
        assert_eq!(log.stopped_epoch, 0);
        let init = Networks::init(&cfg).unwrap();
        assert_eq!(model.generator(), &init.g);
        assert_eq!(model.encoder(), &init.h);
        assert!(cfg.sigma_grid.contains(&model.sigma()));
    }

    #[test]
    fn too_few_rows_for_a_batch() {
        let cfg = tiny_config(1, 2);
        let err = train_with_validation(&data(10, 2, 1), &data(5, 2, 2), &cfg).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn best_sigma_prefers_smallest_on_ties() {
        assert_eq!(best_sigma(&[0.1, 0.2, 0.05], &[1.0, 1.0, 1.0]), 2);
        assert_eq!(best_sigma(&[0.1, 0.2, 0.05], &[1.0, 2.0, 1.0]), 1);
    }

    #[test]
    fn training_is_deterministic_and_keeps_best_epoch() {
        let cfg = tiny_config(1, 2);
        let d = data(200, 2, 9);
        let (m1, log1) = train(&d, &cfg).unwrap();
        let (m2, log2) = train(&d, &cfg).unwrap();
        assert_eq!(log1, log2);
        assert_eq!(m1, m2);

        let best = log1.best_val_log_likelihood().unwrap();
        let best_rec = log1.epochs[log1.best_epoch.unwrap() - 1];
        assert_eq!(best_rec.val_log_likelihood, best);
        assert_eq!(m1.sigma(), best_rec.sigma);
        assert!(log1
            .epochs
            .iter()
            .all(|r| r.generator_loss.is_finite() && r.discriminator_loss.is_finite()));
        assert!(log1.best_epoch.unwrap() >= log1.selection_start);
        // early stopping only after σ is fixed
        assert!(log1.stopped_epoch >= cfg.pretrain_epochs);
    }
}
