//! Training of initialization priors over a dataset of images.
//!
//! Each training image contributes one full-image gradient step; after every
//! epoch the mean energy on the validation images decides whether the current
//! parameters are the best seen so far and whether patience has run out.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::energy::{energy_levelset, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::gradients::grad_energy_full;
use crate::multiphase::{GrayImage, MultiphaseModel};
use crate::networks::LayerParams;
use crate::numeric::CompensatedSum;
use crate::optimizer::{AdamWConfig, OptimizerState};
use crate::segmentation::{model_with_means, random_levelsets, RunConfig};

/// Images with a deterministic train/validation split.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub images: Vec<GrayImage>,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Fraction of images held out for validation by default.
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.1;

impl Dataset {
    /// Shuffles indices with `seed` and holds out `round(N·fraction)` images
    /// (at least one) for validation.
    pub fn split(images: Vec<GrayImage>, validation_fraction: f64, seed: u64) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if images.len() < 2 {
            return Err(Error::ConfigInvalid("a train/validation split needs at least two images"));
        }
        if !(0.0..1.0).contains(&validation_fraction) {
            return Err(Error::ConfigInvalid("validation fraction must lie in [0, 1)"));
        }
        let n = images.len();
        let n_val = (libm::round(n as f64 * validation_fraction) as usize).clamp(1, n - 1);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut validation = order[..n_val].to_vec();
        let mut train = order[n_val..].to_vec();
        validation.sort_unstable();
        train.sort_unstable();
        Ok(Self { images, train, validation })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    /// Shapes, smoothing, regularization weights, seed and initialization.
    /// Batch size, iteration count and tolerance are not used here.
    pub run: RunConfig,
    pub optimizer: AdamWConfig,
    pub epochs: usize,
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            run: RunConfig { phases: 4, ..RunConfig::default() },
            optimizer: AdamWConfig::default(),
            epochs: 100,
            patience: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainStop {
    Patience,
    MaxEpochs,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean energy of the training images, each taken before its update.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Validation loss of the initial parameters.
    pub initial_val_loss: f64,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stop: TrainStop,
}

#[derive(Clone, Debug)]
pub struct TrainedPrior {
    /// Parameters at the best validation epoch.
    pub levelsets: Vec<LayerParams>,
    pub report: TrainReport,
}

/// Networks, region means and energy of a parameter set on a new image; no
/// parameter is updated.
pub fn evaluate_prior(levelsets: &[LayerParams], image: &GrayImage, cfg: &RunConfig) -> Result<(MultiphaseModel, EnergyBreakdown)> {
    cfg.check_shapes(levelsets)?;
    let model = model_with_means(levelsets.to_vec(), image, cfg.smoothing()?)?;
    let energy = energy_levelset(&model, image, cfg.mu, cfg.nu);
    Ok((model, energy))
}

/// Mean energy over `indices` with fixed parameters.
pub fn validation_loss(levelsets: &[LayerParams], images: &[GrayImage], indices: &[usize], cfg: &RunConfig) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for &i in indices {
        acc.add(evaluate_prior(levelsets, &images[i], cfg)?.1.total);
    }
    Ok(acc.value() / indices.len() as f64)
}

pub fn train_prior(data: &Dataset, cfg: &TrainConfig) -> Result<TrainedPrior> {
    if data.images.is_empty() || data.train.is_empty() || data.validation.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.epochs == 0 || cfg.patience == 0 {
        return Err(Error::ConfigInvalid("epochs and patience must be positive"));
    }
    cfg.optimizer.validate()?;
    let run = &cfg.run;
    let s = run.smoothing()?;
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let mut params = random_levelsets(run.phases, run.neurons, run.init_std, &mut rng);
    let mut optimizer = OptimizerState::new(cfg.optimizer, &params);

    let initial_val_loss = validation_loss(&params, &data.images, &data.validation, run)?;
    let mut best_val_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best = params.clone();
    let mut wait = 0;
    let mut epochs = Vec::new();
    let mut stop = TrainStop::MaxEpochs;
    let mut order = data.train.clone();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut train_loss = CompensatedSum::new();
        for &i in &order {
            let image = &data.images[i];
            let model = model_with_means(params.clone(), image, s)?;
            train_loss.add(energy_levelset(&model, image, run.mu, run.nu).total);
            let grads = grad_energy_full(&model, image, run.mu, run.nu);
            optimizer.step(&mut params, &grads.levelsets)?;
        }
        let val_loss = validation_loss(&params, &data.images, &data.validation, run)?;
        epochs.push(EpochRecord { epoch, train_loss: train_loss.value() / order.len() as f64, val_loss });
        if val_loss < best_val_loss {
            best_val_loss = val_loss;
            best_epoch = epoch;
            best = params.clone();
            wait = 0;
        } else {
            wait += 1;
            if wait >= cfg.patience {
                stop = TrainStop::Patience;
                break;
            }
        }
    }
    Ok(TrainedPrior {
        levelsets: best,
        report: TrainReport { epochs, initial_val_loss, best_epoch, best_val_loss, stop },
    })
}
