//! Synthetic datasets on disk.
//!
//! Layout of a dataset directory:
//! - `images/img_NNNNN.pgm`: 16-bit intensities,
//! - `masks/img_NNNNN.pgm`: 8-bit ground truth, 255 inside some circle,
//! - `circles.csv`: one row per circle.

use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use chanvese_core::dataset::{generate_sample, Sample};
use chanvese_core::{Error as CoreError, GrayImage, LabelMask};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logs::write_csv;
use crate::pgm::{decode, read_image, write_image, write_mask};

/// Same samples as `chanvese_core::dataset::generate_dataset`, produced in
/// parallel. Every index has its own random stream, so the result does not
/// depend on scheduling.
pub fn generate_dataset_par(
    count: usize,
    width: usize,
    height: usize,
    seed: u64,
    circles_per_image: RangeInclusive<usize>,
) -> Result<Vec<Sample>> {
    if width == 0 || height == 0 {
        return Err(CoreError::InvalidDims { width, height }.into());
    }
    if count == 0 {
        return Err(CoreError::EmptyDataset.into());
    }
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| generate_sample(width, height, seed, i, circles_per_image.clone()))
        .collect::<Result<Vec<_>, _>>()?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleRow {
    pub image: String,
    pub circle: usize,
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    pub foreground: f64,
    pub background: f64,
}

pub fn sample_name(index: usize) -> String {
    format!("img_{index:05}")
}

pub fn write_dataset(dir: &Path, samples: &[Sample]) -> Result<()> {
    samples.par_iter().enumerate().try_for_each(|(i, s)| -> Result<()> {
        let name = sample_name(i);
        write_image(&s.image, &dir.join("images").join(format!("{name}.pgm")))?;
        write_mask(&s.mask.binary(|l| l != 0), 2, &dir.join("masks").join(format!("{name}.pgm")))
    })?;
    let rows: Vec<CircleRow> = samples
        .iter()
        .enumerate()
        .flat_map(|(i, s)| {
            s.circles.iter().enumerate().map(move |(k, c)| CircleRow {
                image: sample_name(i),
                circle: k + 1,
                center_x: c.center[0],
                center_y: c.center[1],
                radius: c.radius,
                foreground: c.foreground,
                background: c.background,
            })
        })
        .collect();
    write_csv(
        &dir.join("circles.csv"),
        &rows,
        &["image", "circle", "center_x", "center_y", "radius", "foreground", "background"],
    )
}

/// `.pgm` files directly inside `dir`, sorted by name.
pub fn list_pgm(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(Error::io(dir))?
        .map(|e| e.map(|e| e.path()).map_err(Error::io(dir)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "pgm"))
        .collect();
    out.sort();
    Ok(out)
}

/// Reads `dir/images/*.pgm`, or `dir/*.pgm` when there is no `images`
/// subdirectory.
pub fn read_dataset_images(dir: &Path) -> Result<Vec<(String, GrayImage)>> {
    let images = dir.join("images");
    let root = if images.is_dir() { images } else { dir.to_path_buf() };
    let files = list_pgm(&root)?;
    if files.is_empty() {
        return Err(CoreError::EmptyDataset.into());
    }
    files.par_iter().map(|p| Ok((stem(p), read_image(p)?))).collect()
}

pub fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

/// Ground-truth mask: label 1 wherever the stored sample is nonzero.
pub fn read_truth(path: &Path) -> Result<LabelMask> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    let raw = decode(&bytes)?;
    Ok(LabelMask::new(raw.width, raw.height, raw.samples.iter().map(|&s| u32::from(s != 0)).collect())?)
}
