//! Multiphase Chan-Vese segmentation with level-set functions parametrized by
//! shallow neural networks.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is pure
//! computation over in-memory images; file formats and the command line live
//! in the companion `chanvese` crate.
//!
//! Layout:
//! - [`activations`]: Heaviside step, sigmoid and its derivatives.
//! - [`networks`]: one- and two-layer networks, polygon indicators, line
//!   arrangements.
//! - [`multiphase`]: sign patterns, images, the multiphase function and
//!   region means.
//! - [`energy`] and [`gradients`]: the smoothed functional and its exact
//!   parameter gradient.
//! - [`optimizer`], [`segmentation`], [`trainer`]: AdamW, the mini-batch
//!   segmentation loop and prior training over a dataset.
//! - [`baseline`]: classical pixel-grid level-set evolution.
//! - [`dataset`]: synthetic circle images, label masks and Dice scores.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod activations;
pub mod baseline;
pub mod dataset;
pub mod energy;
mod error;
pub mod gradients;
pub mod multiphase;
pub mod networks;
pub mod numeric;
pub mod optimizer;
pub mod segmentation;
pub mod trainer;

pub use activations::{Activation, Smoothing};
pub use energy::EnergyBreakdown;
pub use error::{Error, Result};
pub use multiphase::{GrayImage, LabelMask, MultiphaseModel, SignPattern};
pub use networks::{AffineFn, LayerParams, Point, TwoLayerParams};
