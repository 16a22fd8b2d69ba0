//! Exact parameter gradient of the smoothed functional.
//!
//! Region constants are held fixed. At the region means this is also the
//! total derivative of the data term, since the means minimize it.

use alloc::vec;
use alloc::vec::Vec;

use crate::activations::{sigmoid, sigmoid_derivative, sigmoid_second_derivative};
use crate::energy::{energy_levelset, PixelForward};
use crate::error::{Error, Result};
use crate::multiphase::{GrayImage, MultiphaseModel};
use crate::networks::{dot, LayerParams, Point};

/// Gradient with respect to `(a, W, b)` of one level-set network.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGradient {
    pub da: Vec<f64>,
    pub dw: Vec<Point>,
    pub db: Vec<f64>,
}

impl ParamGradient {
    pub fn zeros(n1: usize) -> Self {
        Self { da: vec![0.0; n1], dw: vec![[0.0; 2]; n1], db: vec![0.0; n1] }
    }

    pub fn neurons(&self) -> usize {
        self.da.len()
    }

    /// Entries in the canonical parameter order of [`LayerParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * self.da.len());
        out.extend_from_slice(&self.da);
        for w in &self.dw {
            out.extend_from_slice(w);
        }
        out.extend_from_slice(&self.db);
        out
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.to_flat().iter().map(|v| v * v).sum())
    }

    fn scale(&mut self, k: f64) {
        self.da.iter_mut().chain(self.db.iter_mut()).for_each(|v| *v *= k);
        for w in &mut self.dw {
            w[0] *= k;
            w[1] *= k;
        }
    }
}

/// Gradients of all level-set networks for one pixel batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchGradient {
    pub levelsets: Vec<ParamGradient>,
    pub batch_size: usize,
}

impl BatchGradient {
    /// `max_k ‖g_k‖₂`, the early-stopping statistic.
    pub fn max_norm(&self) -> f64 {
        self.levelsets.iter().map(ParamGradient::norm).fold(0.0, f64::max)
    }
}

/// Derivative of the batch-restricted functional
/// `(1/|B|) Σ_{x∈B} [data(x) + mu·length(x) + nu·area(x)]` with respect to
/// every network parameter.
pub fn grad_energy(model: &MultiphaseModel, f: &GrayImage, mu: f64, nu: f64, batch: &[usize]) -> Result<BatchGradient> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let m = model.phases();
    let n1 = model.neurons();
    let s = model.smoothing;
    let patterns = 1usize << m;
    let mut grads = vec![ParamGradient::zeros(n1); m];
    let mut fw = PixelForward::new(m);
    let mut residuals = vec![0.0; patterns];
    let mut dz = vec![0.0; n1];
    let mut ddz = vec![0.0; n1];

    for &px in batch {
        let x = f.center(px);
        let fx = f.pixels()[px];
        fw.compute(model, x);
        for (r, &c) in residuals.iter_mut().zip(&model.constants) {
            *r = (c - fx) * (c - fx);
        }
        for k in 0..m {
            let u = fw.u[k];
            let d1 = sigmoid_derivative(u, s);
            let d2 = sigmoid_second_derivative(u, s);

            // ∂data/∂u_k = σ'(u_k) Σ_ι ι_k r_ι Π_{l≠k} σ(ι_l u_l)
            let mut weighted = 0.0;
            for (idx, &r) in residuals.iter().enumerate() {
                let mut prod = 1.0;
                for l in (0..m).filter(|&l| l != k) {
                    prod *= if idx >> (m - 1 - l) & 1 == 0 { fw.pos[l] } else { fw.neg[l] };
                }
                let sign = if idx >> (m - 1 - k) & 1 == 0 { 1.0 } else { -1.0 };
                weighted += sign * r * prod;
            }
            let d_data = d1 * weighted;

            // area = 1 - Π_l σ(-u_l), so ∂area/∂u_k = σ'(u_k) Π_{l≠k} σ(-u_l)
            let d_area = if nu != 0.0 {
                d1 * (0..m).filter(|&l| l != k).map(|l| fw.neg[l]).product::<f64>()
            } else {
                0.0
            };

            let norm = fw.gradient_norm(k);
            let g = fw.grad[k];
            let alpha = d_data + nu * d_area + mu * d2 * norm;
            let beta = [mu * d1 * g[0] / norm, mu * d1 * g[1] / norm];

            let p = &model.levelsets[k];
            for j in 0..n1 {
                let z = dot(p.w[j], x) + p.b[j];
                dz[j] = sigmoid_derivative(z, s);
                ddz[j] = sigmoid_second_derivative(z, s);
            }
            let gk = &mut grads[k];
            for j in 0..n1 {
                let z = dot(p.w[j], x) + p.b[j];
                let bw = dot(beta, p.w[j]);
                let common = alpha * dz[j] + bw * ddz[j];
                gk.da[j] += alpha * sigmoid(z, s) + bw * dz[j];
                gk.db[j] += p.a[j] * common;
                gk.dw[j][0] += p.a[j] * (common * x[0] + dz[j] * beta[0]);
                gk.dw[j][1] += p.a[j] * (common * x[1] + dz[j] * beta[1]);
            }
        }
    }
    let inv = 1.0 / batch.len() as f64;
    grads.iter_mut().for_each(|g| g.scale(inv));
    Ok(BatchGradient { levelsets: grads, batch_size: batch.len() })
}

/// Full-image gradient.
pub fn grad_energy_full(model: &MultiphaseModel, f: &GrayImage, mu: f64, nu: f64) -> BatchGradient {
    let all: Vec<usize> = (0..f.len()).collect();
    grad_energy(model, f, mu, nu, &all).expect("images are non-empty")
}

fn set_flat(p: &mut LayerParams, index: usize, value: f64) {
    let mut i = 0;
    p.for_each_mut(|v| {
        if i == index {
            *v = value;
        }
        i += 1;
    });
}

/// Central-difference check of [`grad_energy`] on the whole image. Returns
/// the worst relative error `|a - n| / max(|a|, |n|, 1e-12)` over all
/// parameters of all networks.
pub fn finite_difference_check(model: &MultiphaseModel, f: &GrayImage, mu: f64, nu: f64, step: f64) -> f64 {
    assert!(step > 0.0, "finite-difference step must be positive");
    let analytic = grad_energy_full(model, f, mu, nu);
    let mut worst = 0.0f64;
    for k in 0..model.phases() {
        let flat = model.levelsets[k].to_flat();
        let an = analytic.levelsets[k].to_flat();
        for (i, &theta) in flat.iter().enumerate() {
            let mut plus = model.clone();
            set_flat(&mut plus.levelsets[k], i, theta + step);
            let mut minus = model.clone();
            set_flat(&mut minus.levelsets[k], i, theta - step);
            let numeric =
                (energy_levelset(&plus, f, mu, nu).total - energy_levelset(&minus, f, mu, nu).total) / (2.0 * step);
            let denom = an[i].abs().max(numeric.abs()).max(1e-12);
            worst = worst.max((an[i] - numeric).abs() / denom);
        }
    }
    worst
}
