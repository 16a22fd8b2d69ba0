//! File-producing pipelines behind the CLI commands.

use std::path::Path;

use chanvese_core::baseline::{default_init, evolve, EvolutionConfig};
use chanvese_core::dataset::{dice, foreground_mask};
use chanvese_core::multiphase::{pattern_label, segmentation_mask, LevelSetSamples};
use chanvese_core::segmentation::{run_segmentation, RunConfig, SegmentationRun};
use chanvese_core::trainer::{evaluate_prior, train_prior, Dataset, TrainConfig, TrainedPrior};
use chanvese_core::{GrayImage, LabelMask, LayerParams, MultiphaseModel, Smoothing};
use rayon::prelude::*;
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::error::Result;
use crate::logs::{write_csv, EnergyRow, EpochRow, SummaryRow, ENERGY_HEADER, EPOCH_HEADER, SUMMARY_HEADER};
use crate::pgm::{boundary_overlay, write_image, write_mask};

/// An image to segment, with optional ground truth (label 1 = foreground).
#[derive(Clone, Debug)]
pub struct Input {
    pub name: String,
    pub image: GrayImage,
    pub truth: Option<LabelMask>,
}

/// Dice of the foreground of `labels` against `truth`.
pub fn foreground_dice(labels: &LabelMask, constants: &[f64], truth: &LabelMask) -> Result<f64> {
    Ok(dice(&foreground_mask(labels, constants), truth, 1)?)
}

fn write_overlays(dir: &Path, image: &GrayImage, positive: &[Vec<bool>]) -> Result<()> {
    for (k, inside) in positive.iter().enumerate() {
        write_image(&boundary_overlay(image, inside)?, &dir.join(format!("overlay_{}.pgm", k + 1)))?;
    }
    Ok(())
}

/// Segments one image and writes `mask.pgm`, `overlay_<k>.pgm` for every
/// level-set network, `energy.csv` (one row per iteration) and `model.json`
/// into `dir`.
pub fn segment_one(input: &Input, cfg: &RunConfig, init: Option<&[LayerParams]>, dir: &Path) -> Result<(SegmentationRun, SummaryRow)> {
    let run = run_segmentation(&input.image, cfg, init.map(<[LayerParams]>::to_vec))?;
    let (w, h) = (input.image.width(), input.image.height());
    let labels = segmentation_mask(&run.model, w, h);
    write_mask(&labels, 1 << cfg.phases, &dir.join("mask.pgm"))?;
    let samples = LevelSetSamples::from_model(&run.model, w, h, run.model.sigmoid());
    let positive: Vec<Vec<bool>> = samples.values.iter().map(|v| v.iter().map(|&u| u >= 0.0).collect()).collect();
    write_overlays(dir, &input.image, &positive)?;
    let rows: Vec<EnergyRow> = run.trace.iter().map(EnergyRow::from).collect();
    write_csv(&dir.join("energy.csv"), &rows, &ENERGY_HEADER)?;
    let mut ckpt = Checkpoint::new(run.model.clone());
    ckpt.optimizer = Some(run.optimizer.clone());
    ckpt.save(&dir.join("model.json"))?;
    let dice = input.truth.as_ref().map(|t| foreground_dice(&labels, &run.model.constants, t)).transpose()?;
    let summary = SummaryRow {
        image: input.name.clone(),
        seed: cfg.seed,
        iterations: run.trace.len(),
        initial_energy: run.initial.total,
        final_energy: run.final_energy().total,
        dice,
    };
    Ok((run, summary))
}

/// Segments every input in parallel into `out/<name>/` and writes
/// `out/summary.csv`.
pub fn segment_all(inputs: &[Input], cfg: &RunConfig, init: Option<&[LayerParams]>, out: &Path) -> Result<Vec<SummaryRow>> {
    let rows = inputs
        .par_iter()
        .map(|i| segment_one(i, cfg, init, &out.join(&i.name)).map(|(_, s)| s))
        .collect::<Result<Vec<_>>>()?;
    write_csv(&out.join("summary.csv"), &rows, &SUMMARY_HEADER)?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaselineRow {
    pub image: String,
    pub steps: usize,
    pub dice: Option<f64>,
}

pub const BASELINE_HEADER: [&str; 3] = ["image", "steps", "dice"];

/// Grid evolution from the default circular initialization. Writes
/// `baseline_mask.pgm`, `overlay_<k>.pgm` and `constants.csv` (region means
/// after every step) into `dir`.
pub fn evolve_one(input: &Input, m: usize, cfg: &EvolutionConfig, dir: &Path) -> Result<(LabelMask, BaselineRow)> {
    let (w, h) = (input.image.width(), input.image.height());
    let evo = evolve(&input.image, default_init(w, h, m)?, cfg)?;
    let labels = evo.mask();
    write_mask(&labels, 1 << m, &dir.join("baseline_mask.pgm"))?;
    let positive: Vec<Vec<bool>> = evo.levelsets.iter().map(|l| l.values.iter().map(|&u| u >= 0.0).collect()).collect();
    write_overlays(dir, &input.image, &positive)?;
    let header: Vec<String> =
        std::iter::once("step".to_string()).chain((0..1 << m).map(|i| format!("c{}", pattern_label(i, m)))).collect();
    let mut text = header.join(",");
    text.push('\n');
    for (step, cs) in evo.constants.iter().enumerate() {
        let fields: Vec<String> = std::iter::once(step.to_string()).chain(cs.iter().map(|c| format!("{c:?}"))).collect();
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    crate::atomic::write_atomic(&dir.join("constants.csv"), text.as_bytes())?;
    let last = evo.constants.last().expect("initial constants are always recorded");
    let dice = input.truth.as_ref().map(|t| foreground_dice(&labels, last, t)).transpose()?;
    Ok((labels, BaselineRow { image: input.name.clone(), steps: cfg.steps, dice }))
}

/// Trains a prior and writes `prior.json` and `train.csv` into `out`. The
/// stored constants are the region means averaged over the training images.
pub fn train_and_save(data: &Dataset, cfg: &TrainConfig, out: &Path) -> Result<TrainedPrior> {
    let prior = train_prior(data, cfg)?;
    let rows: Vec<EpochRow> = prior.report.epochs.iter().map(EpochRow::from).collect();
    write_csv(&out.join("train.csv"), &rows, &EPOCH_HEADER)?;
    let mut constants = vec![0.0; 1 << cfg.run.phases];
    for &i in &data.train {
        let (model, _) = evaluate_prior(&prior.levelsets, &data.images[i], &cfg.run)?;
        for (acc, c) in constants.iter_mut().zip(&model.constants) {
            *acc += c / data.train.len() as f64;
        }
    }
    let model = MultiphaseModel::new(prior.levelsets.clone(), constants, Smoothing::new(cfg.run.epsilon)?)?;
    Checkpoint::new(model).save(&out.join("prior.json"))?;
    Ok(prior)
}
