//! Mini-batch segmentation of a single image: sample pixels, take an AdamW
//! step on the network parameters, re-estimate the region means, repeat.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::activations::Smoothing;
use crate::energy::{energy_levelset, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::gradients::grad_energy;
use crate::multiphase::{region_means, GrayImage, MultiphaseModel};
use crate::networks::LayerParams;
use crate::optimizer::{AdamWConfig, OptimizerState};

/// Learning rate used by [`RunConfig::default`] for per-image segmentation.
pub const DEFAULT_SEGMENTATION_LR: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    /// Number of level-set networks `m`.
    pub phases: usize,
    /// Neurons per network `n₁`.
    pub neurons: usize,
    pub epsilon: f64,
    pub mu: f64,
    pub nu: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    /// Early stop once `max_k ‖g_k‖₂` drops below this.
    pub tolerance: f64,
    pub seed: u64,
    pub optimizer: AdamWConfig,
    /// Standard deviation of the random parameter initialization.
    pub init_std: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            phases: 1,
            neurons: 64,
            epsilon: 0.5,
            mu: 0.5,
            nu: 0.0,
            batch_size: 256,
            max_iterations: 200,
            tolerance: 1e-6,
            seed: 0,
            optimizer: AdamWConfig { learning_rate: DEFAULT_SEGMENTATION_LR, ..AdamWConfig::default() },
            init_std: 0.01,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::ConfigInvalid("batch size must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::ConfigInvalid("max iterations must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::ConfigInvalid("tolerance must be positive"));
        }
        if self.phases == 0 || self.phases > 16 || self.neurons == 0 {
            return Err(Error::ConfigInvalid("need 1..=16 phases and at least one neuron"));
        }
        if !(self.mu >= 0.0 && self.nu >= 0.0) {
            return Err(Error::ConfigInvalid("mu and nu must be non-negative"));
        }
        if !(self.init_std >= 0.0) {
            return Err(Error::ConfigInvalid("init std must be non-negative"));
        }
        self.optimizer.validate()?;
        self.smoothing().map(|_| ())
    }

    pub fn smoothing(&self) -> Result<Smoothing> {
        Smoothing::new(self.epsilon)
    }

    pub(crate) fn check_shapes(&self, levelsets: &[LayerParams]) -> Result<()> {
        if levelsets.len() != self.phases || levelsets.iter().any(|p| p.neurons() != self.neurons) {
            return Err(Error::ShapeMismatch("initial parameters must be m networks of n1 neurons"));
        }
        levelsets.iter().try_for_each(LayerParams::validate)
    }
}

/// `m` networks with every entry drawn from `N(0, std²)`.
pub fn random_levelsets(m: usize, n1: usize, std: f64, rng: &mut ChaCha8Rng) -> Vec<LayerParams> {
    let normal = Normal::new(0.0, std).expect("std is finite and non-negative");
    (0..m)
        .map(|_| {
            let mut p = LayerParams::zeros(n1);
            p.for_each_mut(|v| *v = normal.sample(rng));
            p
        })
        .collect()
}

/// Model with the given networks and constants set to the region means of `f`.
pub fn model_with_means(levelsets: Vec<LayerParams>, f: &GrayImage, s: Smoothing) -> Result<MultiphaseModel> {
    let patterns = 1 << levelsets.len();
    let mut model = MultiphaseModel::new(levelsets, alloc::vec![f.mean(); patterns], s)?;
    model.constants = region_means(&model, f);
    Ok(model)
}

/// Draws pixel batches without replacement from a reshuffled permutation;
/// a new epoch starts when fewer than `B` pixels remain.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
}

impl BatchSampler {
    pub fn new(pixels: usize) -> Self {
        Self { order: (0..pixels).collect(), cursor: pixels }
    }

    /// Next batch, sorted ascending so reductions follow pixel order.
    pub fn next_batch(&mut self, size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let size = size.min(self.order.len());
        if self.cursor + size > self.order.len() {
            self.order.shuffle(rng);
            self.cursor = 0;
        }
        let mut batch = self.order[self.cursor..self.cursor + size].to_vec();
        self.cursor += size;
        batch.sort_unstable();
        batch
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub energy: EnergyBreakdown,
    /// `max_k ‖g_k‖₂` of the batch gradient used at this iteration.
    pub grad_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    Tolerance,
}

#[derive(Clone, Debug)]
pub struct SegmentationRun {
    pub model: MultiphaseModel,
    /// Full-image energy before the first iteration.
    pub initial: EnergyBreakdown,
    /// One row per executed iteration.
    pub trace: Vec<TraceRow>,
    pub stop: StopReason,
    pub optimizer: OptimizerState,
}

impl SegmentationRun {
    pub fn final_energy(&self) -> EnergyBreakdown {
        self.trace.last().map_or(self.initial, |r| r.energy)
    }
}

/// Runs the alternating mini-batch scheme on `f`. Without `init`, parameters
/// are drawn from `N(0, init_std²)` using `cfg.seed`.
pub fn run_segmentation(f: &GrayImage, cfg: &RunConfig, init: Option<Vec<LayerParams>>) -> Result<SegmentationRun> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let levelsets = match init {
        Some(p) => {
            cfg.check_shapes(&p)?;
            p
        }
        None => random_levelsets(cfg.phases, cfg.neurons, cfg.init_std, &mut rng),
    };
    let mut model = model_with_means(levelsets, f, cfg.smoothing()?)?;
    let initial = energy_levelset(&model, f, cfg.mu, cfg.nu);
    let mut optimizer = OptimizerState::new(cfg.optimizer, &model.levelsets);
    let mut sampler = BatchSampler::new(f.len());
    let mut trace = Vec::with_capacity(cfg.max_iterations);
    let mut stop = StopReason::MaxIterations;

    for iteration in 1..=cfg.max_iterations {
        let batch = sampler.next_batch(cfg.batch_size, &mut rng);
        let grads = grad_energy(&model, f, cfg.mu, cfg.nu, &batch)?;
        optimizer.step(&mut model.levelsets, &grads.levelsets)?;
        model.constants = region_means(&model, f);
        let grad_norm = grads.max_norm();
        trace.push(TraceRow { iteration, energy: energy_levelset(&model, f, cfg.mu, cfg.nu), grad_norm });
        if grad_norm < cfg.tolerance {
            stop = StopReason::Tolerance;
            break;
        }
    }
    Ok(SegmentationRun { model, initial, trace, stop, optimizer })
}
