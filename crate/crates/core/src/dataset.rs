//! Synthetic circle images with ground-truth masks, and mask comparison.

use alloc::vec::Vec;
use core::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::multiphase::{GrayImage, LabelMask};
use crate::numeric::pixel_center;

/// Minimum absolute difference between a circle and the background.
pub const MIN_CONTRAST: f64 = 0.2;
const BACKGROUND_MAX: f64 = 0.3;
const FOREGROUND_MIN: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircleSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub foreground: f64,
    pub background: f64,
}

impl CircleSpec {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.center[0]) && unit(self.center[1]) && unit(self.foreground) && unit(self.background)) {
            return Err(Error::ConfigInvalid("circle center and intensities must lie in [0, 1]"));
        }
        if !(0.05..=0.4).contains(&self.radius) {
            return Err(Error::ConfigInvalid("circle radius must lie in [0.05, 0.4]"));
        }
        if (self.foreground - self.background).abs() < MIN_CONTRAST {
            return Err(Error::ConfigInvalid("circle contrast below 0.2"));
        }
        Ok(())
    }

    /// Exact squared-distance test at a pixel center.
    #[inline]
    pub fn contains(&self, x: [f64; 2]) -> bool {
        let (dx, dy) = (x[0] - self.center[0], x[1] - self.center[1]);
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

/// One generated image, its label mask (0 background, `i` for circle `i`,
/// later circles on top) and the circles that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub image: GrayImage,
    pub mask: LabelMask,
    pub background: f64,
    pub circles: Vec<CircleSpec>,
}

pub fn rasterize(width: usize, height: usize, background: f64, circles: &[CircleSpec]) -> Result<Sample> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDims { width, height });
    }
    circles.iter().try_for_each(CircleSpec::validate)?;
    let mut pixels = Vec::with_capacity(width * height);
    let mut labels = Vec::with_capacity(width * height);
    for j in 0..height {
        for i in 0..width {
            let x = pixel_center(i, j, width, height);
            let (mut value, mut label) = (background, 0u32);
            for (n, c) in circles.iter().enumerate() {
                if c.contains(x) {
                    value = c.foreground;
                    label = n as u32 + 1;
                }
            }
            pixels.push(value);
            labels.push(label);
        }
    }
    Ok(Sample {
        image: GrayImage::new(width, height, pixels)?,
        mask: LabelMask::new(width, height, labels)?,
        background,
        circles: circles.to_vec(),
    })
}

/// Random circles for image `index`: a dark background in `[0, 0.3]`,
/// bright circles in `[0.5, 1]` (so the contrast is at least
/// [`MIN_CONTRAST`]), centers in `[0.2, 0.8]²` and radii in `[0.1, 0.3]`.
/// Each index draws from its own stream of the seeded generator, so samples
/// can be produced independently and in any order.
pub fn generate_sample(
    width: usize,
    height: usize,
    seed: u64,
    index: u64,
    circles_per_image: RangeInclusive<usize>,
) -> Result<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let count = rng.random_range(circles_per_image);
    let background: f64 = rng.random_range(0.0..=BACKGROUND_MAX);
    let circles: Vec<CircleSpec> = (0..count)
        .map(|_| CircleSpec {
            center: [rng.random_range(0.2..=0.8), rng.random_range(0.2..=0.8)],
            radius: rng.random_range(0.1..=0.3),
            foreground: rng.random_range(FOREGROUND_MIN..=1.0),
            background,
        })
        .collect();
    rasterize(width, height, background, &circles)
}

pub fn generate_dataset(
    count: usize,
    width: usize,
    height: usize,
    seed: u64,
    circles_per_image: RangeInclusive<usize>,
) -> Result<Vec<Sample>> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDims { width, height });
    }
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    (0..count as u64).map(|i| generate_sample(width, height, seed, i, circles_per_image.clone())).collect()
}

/// `2|A∩B| / (|A| + |B|)` for pixels carrying `label`; 1 when both are empty.
pub fn dice(a: &LabelMask, b: &LabelMask, label: u32) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimMismatch(a.width, a.height, b.width, b.height));
    }
    let (mut both, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.labels.iter().zip(&b.labels) {
        let (ia, ib) = (x == label, y == label);
        na += usize::from(ia);
        nb += usize::from(ib);
        both += usize::from(ia && ib);
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (na + nb) as f64)
}

/// Gap between a region constant and the background above which the
/// region counts as foreground.
pub const FOREGROUND_GAP: f64 = 0.1;

/// Binary foreground (label 1) of a segmentation: pixels whose region
/// constant differs from the background by at least [`FOREGROUND_GAP`]. The
/// background is the constant of the most populated region.
pub fn foreground_mask(labels: &LabelMask, constants: &[f64]) -> LabelMask {
    let mut counts = alloc::vec![0usize; constants.len()];
    for &l in &labels.labels {
        counts[l as usize] += 1;
    }
    let largest = (0..constants.len()).max_by_key(|&i| (counts[i], core::cmp::Reverse(i))).unwrap_or(0);
    let bg = constants[largest];
    labels.binary(|l| (constants[l as usize] - bg).abs() >= FOREGROUND_GAP)
}
