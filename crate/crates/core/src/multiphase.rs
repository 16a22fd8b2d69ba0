//! Multiphase level-set functions built from `m` one-layer networks.
//!
//! A sign pattern `ι ∈ {-1, +1}^m` selects the region where every network
//! `𝚗_k` has sign `ι_k`. Patterns are indexed `0..2^m`; bit `m-1-k` of the
//! index is set when `ι_k = -1`, so index order is the lexicographic order
//! with `+1 < -1`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::activations::{Activation, Smoothing};
use crate::error::{Error, Result};
use crate::networks::{eval_one_layer, LayerParams, Point};
use crate::numeric::{pixel_center, CompensatedSum};

/// Element of `{-1, +1}^m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignPattern(Vec<i8>);

impl SignPattern {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.is_empty() || signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::ConfigInvalid("sign patterns hold only +1 and -1"));
        }
        Ok(Self(signs))
    }

    pub fn from_index(index: usize, m: usize) -> Self {
        debug_assert!(index < 1 << m);
        Self((0..m).map(|k| if index >> (m - 1 - k) & 1 == 0 { 1 } else { -1 }).collect())
    }

    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, &s| (acc << 1) | usize::from(s < 0))
    }

    /// All `2^m` patterns in index order.
    pub fn all(m: usize) -> impl Iterator<Item = SignPattern> {
        (0..1usize << m).map(move |i| Self::from_index(i, m))
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parses the compact `"+-+"` form.
    pub fn parse(s: &str) -> Result<Self> {
        let signs = s
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                _ => Err(Error::ConfigInvalid("sign pattern characters must be '+' or '-'")),
            })
            .collect::<Result<Vec<i8>>>()?;
        Self::new(signs)
    }
}

impl fmt::Display for SignPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.0 {
            f.write_str(if s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl PartialOrd for SignPattern {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SignPattern {
    fn cmp(&self, other: &Self) -> Ordering {
        // +1 sorts before -1
        self.0
            .iter()
            .map(|&s| -s)
            .cmp(other.0.iter().map(|&s| -s))
    }
}

/// Pattern label string of index `index` for `m` level-set functions.
pub fn pattern_label(index: usize, m: usize) -> String {
    use alloc::string::ToString;
    SignPattern::from_index(index, m).to_string()
}

/// Grayscale image on `Ω = [0,1]²`, row-major, intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::InvalidDims { width, height });
        }
        if let Some(index) = pixels.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::PixelOutOfRange { index, value: pixels[index] });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Samples `f` at every pixel center.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(Point) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                pixels.push(f(pixel_center(i, j, width, height)));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pixels[j * self.width + i]
    }

    /// Center of the pixel with row-major index `index`.
    pub fn center(&self, index: usize) -> Point {
        pixel_center(index % self.width, index / self.width, self.width, self.height)
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().copied().collect::<CompensatedSum>().value() / self.len() as f64
    }
}

/// Per-pixel integer labels (sign-pattern indices, or ground-truth classes).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMask {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(Error::InvalidDims { width, height });
        }
        Ok(Self { width, height, labels })
    }

    /// Mask with label 1 where `keep` holds and 0 elsewhere.
    pub fn binary(&self, keep: impl Fn(u32) -> bool) -> LabelMask {
        LabelMask {
            width: self.width,
            height: self.height,
            labels: self.labels.iter().map(|&l| u32::from(keep(l))).collect(),
        }
    }

    pub fn count(&self, label: u32) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// `m` level-set networks sharing `n₁`, one constant per sign pattern, and the
/// sigmoid smoothing used by the differentiable surrogate.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiphaseModel {
    pub levelsets: Vec<LayerParams>,
    pub constants: Vec<f64>,
    pub smoothing: Smoothing,
}

impl MultiphaseModel {
    pub fn new(levelsets: Vec<LayerParams>, constants: Vec<f64>, smoothing: Smoothing) -> Result<Self> {
        let model = Self { levelsets, constants, smoothing };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.levelsets.len();
        if m == 0 {
            return Err(Error::ConfigInvalid("at least one level-set function is required"));
        }
        if m > 16 {
            return Err(Error::ConfigInvalid("at most 16 level-set functions are supported"));
        }
        let n1 = self.levelsets[0].neurons();
        for p in &self.levelsets {
            p.validate()?;
            if p.neurons() != n1 {
                return Err(Error::ShapeMismatch("all level-set networks must share n1"));
            }
        }
        if self.constants.len() != 1 << m {
            return Err(Error::ShapeMismatch("exactly 2^m region constants are required"));
        }
        if self.constants.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    #[inline]
    pub fn phases(&self) -> usize {
        self.levelsets.len()
    }

    #[inline]
    pub fn neurons(&self) -> usize {
        self.levelsets[0].neurons()
    }

    pub fn pattern_count(&self) -> usize {
        1 << self.phases()
    }

    pub fn constant(&self, pattern: &SignPattern) -> Result<f64> {
        self.check_pattern(pattern)?;
        Ok(self.constants[pattern.index()])
    }

    pub fn sigmoid(&self) -> Activation {
        Activation::Sigmoid(self.smoothing)
    }

    fn check_pattern(&self, pattern: &SignPattern) -> Result<()> {
        if pattern.len() != self.phases() {
            return Err(Error::PatternLengthMismatch { expected: self.phases(), found: pattern.len() });
        }
        Ok(())
    }

    /// Values `𝚗_k(x)` of every level-set network.
    pub fn levelset_values(&self, x: Point, act: Activation) -> Vec<f64> {
        self.levelsets.iter().map(|p| eval_one_layer(p, x, act)).collect()
    }
}

/// Product of `act(ι_k u_k)` for a pattern index, given the precomputed
/// factors `pos[k] = act(u_k)` and `neg[k] = act(-u_k)`.
#[inline]
pub(crate) fn pattern_product(index: usize, pos: &[f64], neg: &[f64]) -> f64 {
    let m = pos.len();
    let mut prod = 1.0;
    for k in 0..m {
        prod *= if index >> (m - 1 - k) & 1 == 0 { pos[k] } else { neg[k] };
    }
    prod
}

/// `Π_k act(ι_k 𝚗_k(x))`.
pub fn membership(model: &MultiphaseModel, pattern: &SignPattern, x: Point, act: Activation) -> Result<f64> {
    model.check_pattern(pattern)?;
    Ok(model
        .levelsets
        .iter()
        .zip(pattern.signs())
        .map(|(p, &s)| act.apply(f64::from(s) * eval_one_layer(p, x, act)))
        .product())
}

/// `Σ_ι c_ι Π_k act(ι_k 𝚗_k(x))`.
pub fn eval_multiphase(model: &MultiphaseModel, x: Point, act: Activation) -> f64 {
    let u = model.levelset_values(x, act);
    let pos: Vec<f64> = u.iter().map(|&v| act.apply(v)).collect();
    let neg: Vec<f64> = u.iter().map(|&v| act.apply(-v)).collect();
    model
        .constants
        .iter()
        .enumerate()
        .map(|(i, &c)| c * pattern_product(i, &pos, &neg))
        .sum()
}

/// The same function written as a weakly customized two-layer network:
/// `Σ_ι c_ι act(κ + Σ_k act(ι_k 𝚗_k(x)))` with `κ = -m + 1/3`.
pub fn eval_two_layer_form(model: &MultiphaseModel, x: Point, act: Activation) -> f64 {
    let m = model.phases();
    let kappa = crate::networks::indicator_threshold(m);
    let u = model.levelset_values(x, act);
    SignPattern::all(m)
        .zip(&model.constants)
        .map(|(pattern, &c)| {
            let inner: f64 = pattern.signs().iter().zip(&u).map(|(&s, &v)| act.apply(f64::from(s) * v)).sum();
            c * act.apply(kappa + inner)
        })
        .sum()
}

/// Minimum membership mass below which a region keeps its previous constant.
pub const EMPTY_REGION_MASS: f64 = 1e-8;

/// Level-set values of `m` functions sampled at every pixel of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetSamples {
    /// `values[k][pixel]`
    pub values: Vec<Vec<f64>>,
}

impl LevelSetSamples {
    pub fn from_model(model: &MultiphaseModel, width: usize, height: usize, act: Activation) -> Self {
        let values = model
            .levelsets
            .iter()
            .map(|p| {
                let mut v = Vec::with_capacity(width * height);
                for j in 0..height {
                    for i in 0..width {
                        v.push(eval_one_layer(p, pixel_center(i, j, width, height), act));
                    }
                }
                v
            })
            .collect();
        Self { values }
    }

    pub fn phases(&self) -> usize {
        self.values.len()
    }
}

/// Membership-weighted means of `f` over every region, given sampled
/// level-set values. Regions whose mass `Σ M / N` is below
/// [`EMPTY_REGION_MASS`] keep the value from `previous`.
pub fn region_means_from_samples(
    samples: &LevelSetSamples,
    f: &GrayImage,
    previous: &[f64],
    act: Activation,
) -> Vec<f64> {
    let m = samples.phases();
    let patterns = 1usize << m;
    let mut numerators = vec![CompensatedSum::new(); patterns];
    let mut denominators = vec![CompensatedSum::new(); patterns];
    let mut pos = vec![0.0; m];
    let mut neg = vec![0.0; m];
    for (px, &fx) in f.pixels().iter().enumerate() {
        for k in 0..m {
            let u = samples.values[k][px];
            pos[k] = act.apply(u);
            neg[k] = act.apply(-u);
        }
        for idx in 0..patterns {
            let w = pattern_product(idx, &pos, &neg);
            numerators[idx].add(w * fx);
            denominators[idx].add(w);
        }
    }
    let n = f.len() as f64;
    (0..patterns)
        .map(|idx| {
            let mass = denominators[idx].value();
            if mass / n < EMPTY_REGION_MASS {
                previous[idx]
            } else {
                numerators[idx].value() / mass
            }
        })
        .collect()
}

/// Region means of `f` under the model's sigmoid memberships.
pub fn region_means(model: &MultiphaseModel, f: &GrayImage) -> Vec<f64> {
    let act = model.sigmoid();
    let samples = LevelSetSamples::from_model(model, f.width(), f.height(), act);
    region_means_from_samples(&samples, f, &model.constants, act)
}

/// Pattern index with `ι_k = sign(u_k)`, zero counted as positive.
#[inline]
pub fn pattern_of(values: impl Iterator<Item = f64>) -> u32 {
    values.fold(0u32, |acc, v| (acc << 1) | u32::from(v < 0.0))
}

/// Labels each pixel center with the sign pattern of the level-set networks.
pub fn segmentation_mask(model: &MultiphaseModel, width: usize, height: usize) -> LabelMask {
    let samples = LevelSetSamples::from_model(model, width, height, model.sigmoid());
    labels_from_samples(&samples, width, height)
}

pub fn labels_from_samples(samples: &LevelSetSamples, width: usize, height: usize) -> LabelMask {
    let labels = (0..width * height)
        .map(|px| pattern_of(samples.values.iter().map(|v| v[px])))
        .collect();
    LabelMask { width, height, labels }
}
