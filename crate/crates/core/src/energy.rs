//! The Chan-Vese functional in region form and in smoothed level-set form.
//!
//! Integrals over `Ω = [0,1]²` are Riemann sums over pixel centers with
//! weight `1/(W·H)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::activations::{sigmoid, sigmoid_derivative, Activation, Smoothing};
use crate::error::{Error, Result};
use crate::multiphase::{pattern_product, GrayImage, LabelMask, LevelSetSamples, MultiphaseModel};
use crate::networks::{one_layer_gradient, Point};
use crate::numeric::CompensatedSum;

/// Floor `η` in the smoothed gradient norm `sqrt(|∇𝚗|² + η²)`.
pub const GRADIENT_NORM_FLOOR: f64 = 1e-12;

/// Terms of the functional and their weighted total
/// `data + mu·length + nu·area`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown {
    pub data: f64,
    pub length: f64,
    pub area: f64,
    pub mu: f64,
    pub nu: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(data: f64, length: f64, area: f64, mu: f64, nu: f64) -> Self {
        Self { data, length, area, mu, nu, total: data + mu * length + nu * area }
    }
}

/// One boolean mask per sign pattern, in pattern-index order.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionMasks {
    pub width: usize,
    pub height: usize,
    pub masks: Vec<Vec<bool>>,
}

impl RegionMasks {
    /// Splits a label mask of pattern indices into `2^m` region masks.
    pub fn from_labels(labels: &LabelMask, m: usize) -> Self {
        let masks = (0..1u32 << m)
            .map(|idx| labels.labels.iter().map(|&l| l == idx).collect())
            .collect();
        Self { width: labels.width, height: labels.height, masks }
    }

    /// Label of every pixel; fails unless each pixel lies in exactly one mask.
    fn labels(&self) -> Result<Vec<usize>> {
        let n = self.width * self.height;
        if self.masks.iter().any(|m| m.len() != n) {
            return Err(Error::ShapeMismatch("region masks must cover the image grid"));
        }
        (0..n)
            .map(|px| {
                let mut owners = self.masks.iter().enumerate().filter(|(_, m)| m[px]).map(|(i, _)| i);
                match (owners.next(), owners.next()) {
                    (Some(i), None) => Ok(i),
                    _ => Err(Error::NonPartition { pixel: px }),
                }
            })
            .collect()
    }
}

/// Region form: squared residuals per region, interface length from
/// 4-neighbor label transitions (edge length `1/max(W,H)`), and the area of
/// the union of positive phases (every pattern except all-minus).
pub fn energy_region_form(
    masks: &RegionMasks,
    constants: &[f64],
    f: &GrayImage,
    mu: f64,
    nu: f64,
) -> Result<EnergyBreakdown> {
    let (w, h) = (f.width(), f.height());
    if masks.width != w || masks.height != h {
        return Err(Error::DimMismatch(masks.width, masks.height, w, h));
    }
    let patterns = masks.masks.len();
    if !patterns.is_power_of_two() || patterns < 2 || constants.len() != patterns {
        return Err(Error::ShapeMismatch("need 2^m masks and as many constants"));
    }
    let labels = masks.labels()?;
    let n = (w * h) as f64;

    let data: CompensatedSum = labels
        .iter()
        .zip(f.pixels())
        .map(|(&l, &v)| (constants[l] - v) * (constants[l] - v))
        .collect();

    let mut transitions = 0usize;
    for j in 0..h {
        for i in 0..w {
            let l = labels[j * w + i];
            if i + 1 < w && labels[j * w + i + 1] != l {
                transitions += 1;
            }
            if j + 1 < h && labels[(j + 1) * w + i] != l {
                transitions += 1;
            }
        }
    }
    let length = transitions as f64 / w.max(h) as f64;

    let all_negative = patterns - 1;
    let area = labels.iter().filter(|&&l| l != all_negative).count() as f64 / n;

    Ok(EnergyBreakdown::new(data.value() / n, length, area, mu, nu))
}

/// Per-pixel forward quantities of the smoothed functional.
pub(crate) struct PixelForward {
    /// `𝚗_k(x)`
    pub u: Vec<f64>,
    /// `∇𝚗_k(x)`
    pub grad: Vec<Point>,
    /// `σ_ε(𝚗_k)`
    pub pos: Vec<f64>,
    /// `σ_ε(-𝚗_k)`
    pub neg: Vec<f64>,
}

impl PixelForward {
    pub fn new(m: usize) -> Self {
        Self { u: vec![0.0; m], grad: vec![[0.0; 2]; m], pos: vec![0.0; m], neg: vec![0.0; m] }
    }

    pub fn compute(&mut self, model: &MultiphaseModel, x: Point) {
        let s = model.smoothing;
        let act = Activation::Sigmoid(s);
        for (k, p) in model.levelsets.iter().enumerate() {
            let u = crate::networks::eval_one_layer(p, x, act);
            self.u[k] = u;
            self.grad[k] = one_layer_gradient(p, x, s);
            self.pos[k] = sigmoid(u, s);
            self.neg[k] = sigmoid(-u, s);
        }
    }

    pub fn gradient_norm(&self, k: usize) -> f64 {
        smoothed_norm(self.grad[k])
    }
}

#[inline]
pub(crate) fn smoothed_norm(g: Point) -> f64 {
    libm::sqrt(g[0] * g[0] + g[1] * g[1] + GRADIENT_NORM_FLOOR * GRADIENT_NORM_FLOOR)
}

/// Integrand `σ_ε'(u)·|∇u|_η` of the length term at one point.
#[inline]
pub fn length_density(u: f64, grad: Point, s: Smoothing) -> f64 {
    sigmoid_derivative(u, s) * smoothed_norm(grad)
}

/// `Σ_{∅≠A⊆{1..m}} (-1)^{|A|+1} Π_{i∈A} pos_i`, the inclusion-exclusion
/// expansion of the union of positive phases.
pub(crate) fn inclusion_exclusion(pos: &[f64]) -> f64 {
    let m = pos.len();
    let mut total = 0.0;
    for subset in 1usize..1 << m {
        let prod: f64 = (0..m).filter(|i| subset >> i & 1 == 1).map(|i| pos[i]).product();
        if subset.count_ones() % 2 == 1 {
            total += prod;
        } else {
            total -= prod;
        }
    }
    total
}

/// Smoothed functional restricted to `pixels`, each pixel weighted `1/|pixels|`.
pub fn energy_on_pixels(
    model: &MultiphaseModel,
    f: &GrayImage,
    mu: f64,
    nu: f64,
    pixels: &[usize],
) -> Result<EnergyBreakdown> {
    if pixels.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let m = model.phases();
    let s = model.smoothing;
    let mut fw = PixelForward::new(m);
    let (mut data, mut length, mut area) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for &px in pixels {
        let fx = f.pixels()[px];
        fw.compute(model, f.center(px));
        for (idx, &c) in model.constants.iter().enumerate() {
            data.add((c - fx) * (c - fx) * pattern_product(idx, &fw.pos, &fw.neg));
        }
        for k in 0..m {
            length.add(length_density(fw.u[k], fw.grad[k], s));
        }
        area.add(inclusion_exclusion(&fw.pos));
    }
    let n = pixels.len() as f64;
    Ok(EnergyBreakdown::new(data.value() / n, length.value() / n, area.value() / n, mu, nu))
}

/// Smoothed level-set functional of the model over the whole image.
pub fn energy_levelset(model: &MultiphaseModel, f: &GrayImage, mu: f64, nu: f64) -> EnergyBreakdown {
    let all: Vec<usize> = (0..f.len()).collect();
    energy_on_pixels(model, f, mu, nu, &all).expect("images are non-empty")
}

/// Inclusion-exclusion area of the positive phases on a `width × height`
/// grid, under the given activation.
pub fn area_term(model: &MultiphaseModel, width: usize, height: usize, act: Activation) -> f64 {
    let samples = LevelSetSamples::from_model(model, width, height, act);
    let mut acc = CompensatedSum::new();
    let mut pos = vec![0.0; model.phases()];
    for px in 0..width * height {
        for (k, v) in samples.values.iter().enumerate() {
            pos[k] = act.apply(v[px]);
        }
        acc.add(inclusion_exclusion(&pos));
    }
    acc.value() / (width * height) as f64
}

/// Fraction of pixels where some level-set network is positive (Heaviside).
pub fn area_union_brute(model: &MultiphaseModel, f: &GrayImage) -> f64 {
    let samples = LevelSetSamples::from_model(model, f.width(), f.height(), Activation::Heaviside);
    let inside = (0..f.len()).filter(|&px| samples.values.iter().any(|v| v[px] > 0.0)).count();
    inside as f64 / f.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiphase::{region_means, segmentation_mask, SignPattern};
    use crate::networks::{AffineFn, LayerParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eps(e: f64) -> Smoothing {
        Smoothing::new(e).unwrap()
    }

    fn random_model(rng: &mut ChaCha8Rng, m: usize, n1: usize, e: f64) -> MultiphaseModel {
        let levelsets = (0..m)
            .map(|_| {
                LayerParams::new(
                    (0..n1).map(|_| rng.random_range(-1.5..1.5)).collect(),
                    (0..n1).map(|_| [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)]).collect(),
                    (0..n1).map(|_| rng.random_range(-2.0..2.0)).collect(),
                )
                .unwrap()
            })
            .collect();
        MultiphaseModel::new(levelsets, (0..1 << m).map(|_| rng.random_range(0.0..1.0)).collect(), eps(e)).unwrap()
    }

    fn disk_image(n: usize) -> GrayImage {
        GrayImage::from_fn(n, n, |x| if (x[0] - 0.45).powi(2) + (x[1] - 0.5).powi(2) < 0.07 { 0.9 } else { 0.2 })
            .unwrap()
    }

    /// m = 1 expansion written out term by term.
    fn expanded_m1(model: &MultiphaseModel, f: &GrayImage, mu: f64, nu: f64) -> f64 {
        let s = model.smoothing;
        let (c1, cm1) = (model.constants[0], model.constants[1]);
        let p = &model.levelsets[0];
        let n = f.len() as f64;
        let mut total = 0.0;
        for px in 0..f.len() {
            let x = f.center(px);
            let l = p.eval(x, Activation::Sigmoid(s));
            let g = crate::networks::eval_one_layer_gradient(p, x, Activation::Sigmoid(s)).unwrap();
            let fx = f.pixels()[px];
            total += (fx - c1).powi(2) * sigmoid(l, s)
                + (fx - cm1).powi(2) * (1.0 - sigmoid(l, s))
                + mu * sigmoid_derivative(l, s) * (g[0] * g[0] + g[1] * g[1]).sqrt()
                + nu * sigmoid(l, s);
        }
        total / n
    }

    /// m = 2 expansion with the union area σ(ℓ₁)+σ(ℓ₂)−σ(ℓ₁)σ(ℓ₂).
    fn expanded_m2(model: &MultiphaseModel, f: &GrayImage, mu: f64, nu: f64) -> f64 {
        let s = model.smoothing;
        let act = Activation::Sigmoid(s);
        let c = &model.constants; // ++, +-, -+, --
        let n = f.len() as f64;
        let mut total = 0.0;
        for px in 0..f.len() {
            let x = f.center(px);
            let fx = f.pixels()[px];
            let l1 = model.levelsets[0].eval(x, act);
            let l2 = model.levelsets[1].eval(x, act);
            let (h1, h2) = (sigmoid(l1, s), sigmoid(l2, s));
            let g1 = crate::networks::eval_one_layer_gradient(&model.levelsets[0], x, act).unwrap();
            let g2 = crate::networks::eval_one_layer_gradient(&model.levelsets[1], x, act).unwrap();
            total += (fx - c[0]).powi(2) * h1 * h2
                + (fx - c[1]).powi(2) * h1 * (1.0 - h2)
                + (fx - c[2]).powi(2) * (1.0 - h1) * h2
                + (fx - c[3]).powi(2) * (1.0 - h1) * (1.0 - h2)
                + mu * (sigmoid_derivative(l1, s) * (g1[0].powi(2) + g1[1].powi(2)).sqrt()
                    + sigmoid_derivative(l2, s) * (g2[0].powi(2) + g2[1].powi(2)).sqrt())
                + nu * (h1 + h2 - h1 * h2);
        }
        total / n
    }

    #[test]
    fn total_is_weighted_sum() {
        let e = EnergyBreakdown::new(0.25, 2.0, 0.5, 0.5, 0.1);
        assert_eq!(e.total, 0.25 + 1.0 + 0.05);
    }

    #[test]
    fn matches_expanded_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let f = disk_image(30);
        for _ in 0..5 {
            let m1 = random_model(&mut rng, 1, 6, 0.5);
            let e = energy_levelset(&m1, &f, 0.5, 0.1);
            assert!((e.total - expanded_m1(&m1, &f, 0.5, 0.1)).abs() < 1e-12);
            let m2 = random_model(&mut rng, 2, 6, 0.5);
            let e = energy_levelset(&m2, &f, 0.5, 0.1);
            assert!((e.total - expanded_m2(&m2, &f, 0.5, 0.1)).abs() < 1e-12);
        }
    }

    #[test]
    fn inclusion_exclusion_equals_union_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let f = disk_image(40);
        for m in 1..=4 {
            for _ in 0..20 {
                let mut model = random_model(&mut rng, m, 5, 0.5);
                // A constant neuron keeps outputs away from exactly zero.
                for p in &mut model.levelsets {
                    p.a.push(0.0123);
                    p.w.push([0.0, 0.0]);
                    p.b.push(1.0);
                }
                assert_eq!(area_term(&model, 40, 40, Activation::Heaviside), area_union_brute(&model, &f));
            }
        }
    }

    #[test]
    fn union_of_disjoint_and_identical_phases() {
        let f = GrayImage::constant(20, 20, 0.0).unwrap();
        // left quarter and right quarter, outputs ±1
        let left = LayerParams::new(vec![2.0, -1.0], vec![[-1.0, 0.0], [0.0, 0.0]], vec![0.25, 1.0]).unwrap();
        let right = LayerParams::new(vec![2.0, -1.0], vec![[1.0, 0.0], [0.0, 0.0]], vec![-0.75, 1.0]).unwrap();
        let disjoint = MultiphaseModel::new(vec![left.clone(), right], vec![0.0; 4], eps(0.5)).unwrap();
        assert_eq!(area_union_brute(&disjoint, &f), 0.5);
        let same = MultiphaseModel::new(vec![left.clone(), left], vec![0.0; 4], eps(0.5)).unwrap();
        assert_eq!(area_union_brute(&same, &f), 0.25);
        assert_eq!(area_term(&same, 20, 20, Activation::Heaviside), 0.25);
    }

    #[test]
    fn region_form_basics() {
        let f = GrayImage::constant(10, 10, 0.4).unwrap();
        let labels = LabelMask::new(10, 10, vec![0; 100]).unwrap();
        let masks = RegionMasks::from_labels(&labels, 1);
        let e = energy_region_form(&masks, &[0.4, 0.0], &f, 1.0, 0.0).unwrap();
        assert_eq!(e.data, 0.0);
        assert_eq!(e.length, 0.0);
        assert_eq!(e.area, 1.0);
    }

    #[test]
    fn region_form_exact_fit_and_interface() {
        // vertical interface at x = 0.5 on a 20x20 grid: 20 transitions of length 1/20
        let f = GrayImage::from_fn(20, 20, |x| if x[0] < 0.5 { 0.8 } else { 0.1 }).unwrap();
        let labels = LabelMask::new(20, 20, (0..400).map(|px| u32::from(px % 20 >= 10)).collect()).unwrap();
        let e = energy_region_form(&RegionMasks::from_labels(&labels, 1), &[0.8, 0.1], &f, 1.0, 0.0).unwrap();
        assert!(e.data < 1e-30);
        assert!((e.length - 1.0).abs() < 1e-15);
        assert_eq!(e.area, 0.5);
    }

    #[test]
    fn region_form_single_region_gives_variance() {
        let f = disk_image(25);
        let mean = f.mean();
        let var = f.pixels().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / f.len() as f64;
        let labels = LabelMask::new(25, 25, vec![1; 625]).unwrap();
        let e = energy_region_form(&RegionMasks::from_labels(&labels, 1), &[0.0, mean], &f, 0.0, 0.0).unwrap();
        assert!((e.data - var).abs() < 1e-15);
        assert_eq!(e.total, e.data);
    }

    #[test]
    fn region_form_rejects_non_partition() {
        let f = GrayImage::constant(4, 4, 0.0).unwrap();
        let mut masks = RegionMasks { width: 4, height: 4, masks: vec![vec![true; 16], vec![false; 16]] };
        masks.masks[1][3] = true;
        assert_eq!(energy_region_form(&masks, &[0.0, 0.0], &f, 0.0, 0.0), Err(Error::NonPartition { pixel: 3 }));
        masks.masks[1][3] = false;
        masks.masks[0][5] = false;
        assert_eq!(energy_region_form(&masks, &[0.0, 0.0], &f, 0.0, 0.0), Err(Error::NonPartition { pixel: 5 }));
    }

    #[test]
    fn smoothed_terms_approach_region_form() {
        // triangle phase and half-plane phase, unit-normal lines
        let v = [[0.2, 0.2], [0.8, 0.2], [0.5, 0.8]];
        let mut tri: Vec<AffineFn> = (0..3).map(|i| AffineFn::through(v[i], v[(i + 1) % 3])).collect();
        tri.push(AffineFn::new([0.0, 0.0], 1.0));
        let tri = LayerParams::from_lines(vec![1.0, 1.0, 1.0, -2.5], &tri).unwrap();
        let half = LayerParams::new(
            vec![1.0, -0.5, 0.0, 0.0],
            vec![[1.0, 0.0], [0.0, 0.0], [0.0, 1.0], [0.0, 1.0]],
            vec![-0.45, 1.0, 0.0, 0.0],
        )
        .unwrap();
        let f = disk_image(200);
        let mut model = MultiphaseModel::new(vec![tri, half], vec![0.5; 4], eps(0.02)).unwrap();
        let labels = segmentation_mask(&model, 200, 200);
        let masks = RegionMasks::from_labels(&labels, 2);
        model.constants = region_means(&model, &f);
        let reference = energy_region_form(&masks, &model.constants, &f, 0.0, 1.0).unwrap();
        let smooth = energy_levelset(&model, &f, 0.0, 1.0);
        assert!((smooth.data - reference.data).abs() <= 0.02 * reference.data.max(1e-3), "{smooth:?} {reference:?}");
        assert!((smooth.area - reference.area).abs() <= 0.02 * reference.area, "{smooth:?} {reference:?}");
    }

    #[test]
    fn means_minimize_data_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let f = disk_image(30);
        let mut model = random_model(&mut rng, 2, 5, 0.5);
        model.constants = region_means(&model, &f);
        let base = energy_levelset(&model, &f, 0.0, 0.0).data;
        for idx in 0..4 {
            for delta in [-0.01, 0.01] {
                let mut m = model.clone();
                m.constants[idx] += delta;
                assert!(energy_levelset(&m, &f, 0.0, 0.0).data >= base);
            }
        }
    }

    #[test]
    fn chord_length_converges() {
        // affine level set ℓ(x) = w·x + b, chord from (0, 0.3) to (1, 0.7)
        let w = [-0.4, 1.0];
        let b = -0.3;
        let chord = (1.0f64 + 0.16).sqrt();
        let n = 400;
        let mut errors = Vec::new();
        for &e in &[0.1, 0.05, 0.01] {
            let s = eps(e);
            let mut acc = CompensatedSum::new();
            for j in 0..n {
                for i in 0..n {
                    let x = crate::numeric::pixel_center(i, j, n, n);
                    acc.add(length_density(w[0] * x[0] + w[1] * x[1] + b, w, s));
                }
            }
            let len = acc.value() / (n * n) as f64;
            errors.push((len - chord).abs() / chord);
        }
        assert!(errors.windows(2).all(|p| p[1] < p[0]), "{errors:?}");
        assert!(errors[2] < 0.02, "{errors:?}");
    }

    #[test]
    fn empty_pixel_set_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let model = random_model(&mut rng, 1, 2, 0.5);
        let f = disk_image(5);
        assert_eq!(energy_on_pixels(&model, &f, 0.0, 0.0, &[]), Err(Error::EmptyBatch));
        let _ = SignPattern::all(1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        fn noisy(rng: &mut ChaCha8Rng) -> GrayImage {
            GrayImage::new(10, 8, (0..80).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn terms_nonnegative_and_total_is_weighted_sum(
                seed in any::<u64>(), m in 1usize..=3, mu in 0.0..2.0f64, nu in 0.0..2.0f64,
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let model = random_model(&mut rng, m, 4, 0.5);
                let e = energy_levelset(&model, &noisy(&mut rng), mu, nu);
                prop_assert!(e.data >= 0.0 && e.length >= 0.0 && e.area >= 0.0);
                prop_assert_eq!(e.total, e.data + mu * e.length + nu * e.area);
            }

            #[test]
            fn region_means_minimize_data_term(seed in any::<u64>(), m in 1usize..=2, shift in -0.2..0.2f64, which in 0usize..4) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut model = random_model(&mut rng, m, 4, 0.5);
                let f = noisy(&mut rng);
                model.constants = region_means(&model, &f);
                let best = energy_levelset(&model, &f, 0.0, 0.0).data;
                model.constants[which % (1 << m)] += shift;
                prop_assert!(energy_levelset(&model, &f, 0.0, 0.0).data >= best - 1e-12);
            }
        }
    }
}
