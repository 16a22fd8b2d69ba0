//! Self-checks run by the `verify` command. Each check reports what it
//! measured against its tolerance.

use chanvese_core::energy::{area_term, area_union_brute};
use chanvese_core::gradients::finite_difference_check;
use chanvese_core::multiphase::membership;
use chanvese_core::networks::{count_arrangement_regions, in_general_position, max_region_count, BoundingBox};
use chanvese_core::{Activation, AffineFn, GrayImage, LayerParams, MultiphaseModel, SignPattern, Smoothing};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: measured {:e}, tolerance {:e}", self.name, self.measured, self.tolerance)
    }
}

fn at_most(name: &'static str, measured: f64, tolerance: f64) -> Check {
    Check { name, measured, tolerance, pass: measured <= tolerance }
}

/// Random model with unsaturated neurons: every hidden line passes through
/// a point of the unit square.
pub fn random_model(rng: &mut ChaCha8Rng, m: usize, n1: usize, epsilon: f64) -> MultiphaseModel {
    let levelsets = (0..m)
        .map(|_| {
            let w: Vec<[f64; 2]> = (0..n1).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
            let b = w.iter().map(|w| -(w[0] * rng.random_range(0.2..0.8) + w[1] * rng.random_range(0.2..0.8))).collect();
            LayerParams::new((0..n1).map(|_| rng.random_range(-1.0..1.0)).collect(), w, b).expect("finite")
        })
        .collect();
    let constants = (0..1 << m).map(|_| rng.random_range(0.0..1.0)).collect();
    MultiphaseModel::new(levelsets, constants, Smoothing::new(epsilon).expect("positive")).expect("consistent")
}

/// `n` lines tangent to a small circle around the middle of the unit
/// square, redrawn until they are in general position. All crossings then
/// fall inside `[-1, 2]²`.
pub fn tangent_lines(rng: &mut ChaCha8Rng, n: usize) -> Vec<AffineFn> {
    loop {
        let lines: Vec<AffineFn> = (0..n)
            .map(|_| {
                let t: f64 = rng.random_range(0.0..0.9 * std::f64::consts::PI);
                let normal = [t.cos(), t.sin()];
                AffineFn::new(normal, 0.1 - normal[0] * 0.5 - normal[1] * 0.5)
            })
            .collect();
        if in_general_position(&lines, 1e-3) {
            return lines;
        }
    }
}

pub const TANGENT_DOMAIN: BoundingBox = BoundingBox { min: [-1.0, -1.0], max: [2.0, 2.0] };

fn gradient_check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = GrayImage::from_fn(10, 10, |x| if x[0] + 0.5 * x[1] > 0.7 { 0.8 } else { 0.2 }).expect("valid");
    let mut worst = 0.0f64;
    for (m, nu) in [(1, 0.0), (2, 0.1)] {
        let model = random_model(&mut rng, m, 8, 0.5);
        worst = worst.max(finite_difference_check(&model, &f, 0.5, nu, 1e-5));
    }
    at_most("gradient vs central differences (max relative error)", worst, 1e-4)
}

fn arrangement_check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut misses = 0usize;
    for n in 3..=6 {
        let lines = tangent_lines(&mut rng, n);
        match count_arrangement_regions(&lines, TANGENT_DOMAIN) {
            Ok(c) if c == max_region_count(n) => {}
            _ => misses += 1,
        }
    }
    at_most("arrangement region count n(n+1)/2+1 (sets off the bound)", misses as f64, 0.0)
}

fn partition_check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for m in 1..=4 {
        let model = random_model(&mut rng, m, 6, 0.5);
        let act = model.sigmoid();
        for _ in 0..50 {
            let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let total: f64 = SignPattern::all(m).map(|p| membership(&model, &p, x, act).expect("matching length")).sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    at_most("partition of unity over sign patterns (max deviation)", worst, 1e-12)
}

fn inclusion_exclusion_check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = GrayImage::constant(30, 30, 0.0).expect("valid");
    let mut worst = 0.0f64;
    for m in 1..=4 {
        let mut model = random_model(&mut rng, m, 5, 0.5);
        for p in &mut model.levelsets {
            // keeps outputs off exactly zero, where the step takes the value 1/2
            p.a.push(0.0123);
            p.w.push([0.0, 0.0]);
            p.b.push(1.0);
        }
        let ie = area_term(&model, 30, 30, Activation::Heaviside);
        worst = worst.max((ie - area_union_brute(&model, &f)).abs());
    }
    at_most("inclusion-exclusion area vs union count (max difference)", worst, 0.0)
}

pub fn run_all(seed: u64) -> Vec<Check> {
    vec![gradient_check(seed), arrangement_check(seed), partition_check(seed), inclusion_exclusion_check(seed)]
}
