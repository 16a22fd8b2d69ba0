//! One- and two-layer level-set networks over the plane.
//!
//! A one-layer network is `x ↦ Σ_j a_j act(w_j·x + b_j)`; a two-layer network
//! feeds the activations of the first layer into a second activated layer.
//! With the Heaviside step, super-level sets of these networks are unions of
//! cells of a line arrangement, which is what the polygon constructions and
//! region counting below exploit.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::activations::{sigmoid_derivative, Activation, Smoothing};
use crate::error::{Error, Result};

/// A point (or vector) in the plane.
pub type Point = [f64; 2];

#[inline]
pub(crate) fn dot(u: Point, v: Point) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

/// Affine function `x ↦ w·x + b`. Its zero set is a line when `w ≠ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineFn {
    pub w: Point,
    pub b: f64,
}

impl AffineFn {
    pub const fn new(w: Point, b: f64) -> Self {
        Self { w, b }
    }

    /// Signed distance to the line through `p` and `q`, positive on the
    /// left of `p → q`. Coincident points give the degenerate zero function.
    pub fn through(p: Point, q: Point) -> Self {
        let w = [-(q[1] - p[1]), q[0] - p[0]];
        let len = libm::sqrt(dot(w, w));
        let w = if len > 0.0 { [w[0] / len, w[1] / len] } else { w };
        Self { w, b: -dot(w, p) }
    }

    #[inline]
    pub fn eval(&self, x: Point) -> f64 {
        dot(self.w, x) + self.b
    }

    pub fn is_degenerate(&self) -> bool {
        self.w[0] == 0.0 && self.w[1] == 0.0
    }

    pub fn flipped(&self) -> Self {
        Self { w: [-self.w[0], -self.w[1]], b: -self.b }
    }

    /// Euclidean distance from `x` to the zero line.
    pub fn distance(&self, x: Point) -> f64 {
        libm::fabs(self.eval(x)) / libm::hypot(self.w[0], self.w[1])
    }
}

/// Parameters `(a, W, b)` of a one-layer network with `n₁` neurons.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub a: Vec<f64>,
    pub w: Vec<Point>,
    pub b: Vec<f64>,
}

impl LayerParams {
    pub fn new(a: Vec<f64>, w: Vec<Point>, b: Vec<f64>) -> Result<Self> {
        let p = Self { a, w, b };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(n1: usize) -> Self {
        Self { a: vec![0.0; n1], w: vec![[0.0; 2]; n1], b: vec![0.0; n1] }
    }

    /// Network whose neurons are the given affine functions.
    pub fn from_lines(a: Vec<f64>, lines: &[AffineFn]) -> Result<Self> {
        Self::new(a, lines.iter().map(|l| l.w).collect(), lines.iter().map(|l| l.b).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.len();
        if n == 0 {
            return Err(Error::ShapeMismatch("a network needs at least one neuron"));
        }
        if self.w.len() != n || self.b.len() != n {
            return Err(Error::ShapeMismatch("a, W and b must have the same length"));
        }
        let finite = self.a.iter().chain(self.b.iter()).all(|v| v.is_finite())
            && self.w.iter().all(|w| w[0].is_finite() && w[1].is_finite());
        if finite {
            Ok(())
        } else {
            Err(Error::NonFinite)
        }
    }

    #[inline]
    pub fn neurons(&self) -> usize {
        self.a.len()
    }

    /// Number of scalar parameters, `4·n₁`.
    pub fn parameter_count(&self) -> usize {
        4 * self.a.len()
    }

    pub fn neuron(&self, j: usize) -> AffineFn {
        AffineFn::new(self.w[j], self.b[j])
    }

    #[inline]
    pub fn eval(&self, x: Point, act: Activation) -> f64 {
        eval_one_layer(self, x, act)
    }

    /// Visits every scalar parameter in the canonical order
    /// `a_1..a_n, (w_1x, w_1y)..(w_nx, w_ny), b_1..b_n`.
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.a.iter_mut().for_each(&mut f);
        for w in self.w.iter_mut() {
            f(&mut w[0]);
            f(&mut w[1]);
        }
        self.b.iter_mut().for_each(&mut f);
    }

    /// Scalar parameters in canonical order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        out.extend_from_slice(&self.a);
        for w in &self.w {
            out.extend_from_slice(w);
        }
        out.extend_from_slice(&self.b);
        out
    }
}

/// `Σ_j a_j act(w_j·x + b_j)`.
pub fn eval_one_layer(p: &LayerParams, x: Point, act: Activation) -> f64 {
    p.a.iter()
        .zip(p.w.iter().zip(p.b.iter()))
        .map(|(&a, (&w, &b))| a * act.apply(dot(w, x) + b))
        .sum()
}

/// Exact spatial gradient `Σ_j a_j σ_ε'(w_j·x + b_j) w_j` of a sigmoid network.
pub fn eval_one_layer_gradient(p: &LayerParams, x: Point, act: Activation) -> Result<Point> {
    let s = act.smoothing().ok_or(Error::HeavisideNotDifferentiable)?;
    Ok(one_layer_gradient(p, x, s))
}

pub(crate) fn one_layer_gradient(p: &LayerParams, x: Point, s: Smoothing) -> Point {
    let mut g = [0.0; 2];
    for ((&a, &w), &b) in p.a.iter().zip(&p.w).zip(&p.b) {
        let k = a * sigmoid_derivative(dot(w, x) + b, s);
        g[0] += k * w[0];
        g[1] += k * w[1];
    }
    g
}

/// Parameters of a two-layer network
/// `x ↦ Σ_i c_i act(Σ_j (a_ij act(w_j·x + b_j) + d_ij))`.
///
/// `a` and `d` are `n₂ × n₁`, stored row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoLayerParams {
    pub a: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub d: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub w: Vec<Point>,
}

impl TwoLayerParams {
    pub fn validate(&self) -> Result<()> {
        let n1 = self.b.len();
        let n2 = self.c.len();
        if self.w.len() != n1 || self.a.len() != n2 || self.d.len() != n2 {
            return Err(Error::ShapeMismatch("two-layer outer dimensions disagree"));
        }
        if self.a.iter().chain(self.d.iter()).any(|row| row.len() != n1) {
            return Err(Error::ShapeMismatch("two-layer rows must have n1 entries"));
        }
        Ok(())
    }

    pub fn eval(&self, x: Point, act: Activation) -> f64 {
        eval_two_layer(self, x, act)
    }
}

pub fn eval_two_layer(p: &TwoLayerParams, x: Point, act: Activation) -> f64 {
    let inner: Vec<f64> = p.w.iter().zip(&p.b).map(|(&w, &b)| act.apply(dot(w, x) + b)).collect();
    p.c.iter()
        .zip(p.a.iter().zip(&p.d))
        .map(|(&c, (row_a, row_d))| {
            let z: f64 = row_a.iter().zip(row_d).zip(&inner).map(|((&a, &d), &h)| a * h + d).sum();
            c * act.apply(z)
        })
        .sum()
}

/// Threshold placed in front of the outer step so that it fires only when all
/// `n` unit-weight inner activations equal one.
pub fn indicator_threshold(n: usize) -> f64 {
    -(n as f64) + 1.0 / 3.0
}

/// Two-layer Heaviside network equal to `c_in` on the open convex region
/// `∩_j {s_j · line_j > 0}` and to `c_out` on the open complement.
///
/// The first output neuron sums the unit inner activations with total offset
/// `κ = -n + 1/3`; the second neuron is its mirror image and encodes the
/// complement. The offset is spread evenly over the `n` per-neuron entries of
/// `d`.
pub fn build_polygon_indicator(
    lines: &[AffineFn],
    inside_signs: &[i8],
    c_in: f64,
    c_out: f64,
) -> Result<TwoLayerParams> {
    if lines.len() < 3 {
        return Err(Error::TooFewLines { required: 3, found: lines.len() });
    }
    if inside_signs.len() != lines.len() {
        return Err(Error::ShapeMismatch("one inside sign per line is required"));
    }
    if let Some(index) = lines.iter().position(AffineFn::is_degenerate) {
        return Err(Error::DegenerateLines { index });
    }
    let n = lines.len();
    let oriented: Vec<AffineFn> = lines
        .iter()
        .zip(inside_signs)
        .map(|(l, &s)| if s < 0 { l.flipped() } else { *l })
        .collect();
    let offset = indicator_threshold(n) / n as f64;
    Ok(TwoLayerParams {
        a: vec![vec![1.0; n], vec![-1.0; n]],
        c: vec![c_in, c_out],
        d: vec![vec![offset; n], vec![-offset; n]],
        b: oriented.iter().map(|l| l.b).collect(),
        w: oriented.iter().map(|l| l.w).collect(),
    })
}

/// Axis-aligned rectangle used as the probing window for region counting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub const UNIT: BoundingBox = BoundingBox { min: [0.0, 0.0], max: [1.0, 1.0] };

    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, x: Point) -> bool {
        x[0] > self.min[0] && x[0] < self.max[0] && x[1] > self.min[1] && x[1] < self.max[1]
    }

    fn diagonal(&self) -> f64 {
        libm::hypot(self.max[0] - self.min[0], self.max[1] - self.min[1])
    }
}

/// Upper bound `n(n+1)/2 + 1` on the number of cells cut out by `n` lines.
pub fn max_region_count(n: usize) -> usize {
    n * (n + 1) / 2 + 1
}

/// Default probe-grid resolution per axis for [`count_arrangement_regions`].
pub const DEFAULT_PROBE_RESOLUTION: usize = 512;

const ON_LINE_TOLERANCE: f64 = 1e-12;

/// Counts the open full-dimensional sign cells of the arrangement that meet
/// `domain`, using [`DEFAULT_PROBE_RESOLUTION`].
pub fn count_arrangement_regions(lines: &[AffineFn], domain: BoundingBox) -> Result<usize> {
    count_arrangement_regions_with_resolution(lines, domain, DEFAULT_PROBE_RESOLUTION)
}

/// Counts distinct sign vectors over a `resolution²` probe grid, refined by
/// probes in the four sectors around every pairwise intersection inside the
/// domain. Probes lying on a line are discarded, so every counted vector is a
/// genuine open cell.
pub fn count_arrangement_regions_with_resolution(
    lines: &[AffineFn],
    domain: BoundingBox,
    resolution: usize,
) -> Result<usize> {
    if lines.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut cells: BTreeSet<Vec<bool>> = BTreeSet::new();
    let mut record = |x: Point| {
        let mut signs = Vec::with_capacity(lines.len());
        for l in lines {
            let v = l.eval(x);
            if libm::fabs(v) < ON_LINE_TOLERANCE {
                return;
            }
            signs.push(v > 0.0);
        }
        cells.insert(signs);
    };

    let span = [domain.max[0] - domain.min[0], domain.max[1] - domain.min[1]];
    for j in 0..resolution {
        for i in 0..resolution {
            record([
                domain.min[0] + span[0] * (i as f64 + 0.5) / resolution as f64,
                domain.min[1] + span[1] * (j as f64 + 0.5) / resolution as f64,
            ]);
        }
    }

    for (p, q, v) in pairwise_intersections(lines) {
        if !domain.contains(v) {
            continue;
        }
        let clearance = lines
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != p && k != q)
            .map(|(_, l)| l.distance(v))
            .filter(|&d| d > ON_LINE_TOLERANCE)
            .fold(1e-3 * domain.diagonal(), f64::min);
        let tp = unit_tangent(&lines[p]);
        let tq = unit_tangent(&lines[q]);
        for (sp, sq) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let dir = [sp * tp[0] + sq * tq[0], sp * tp[1] + sq * tq[1]];
            let len = libm::hypot(dir[0], dir[1]);
            if len == 0.0 {
                continue;
            }
            let r = 0.25 * clearance / len;
            let x = [v[0] + r * dir[0], v[1] + r * dir[1]];
            if domain.contains(x) {
                record(x);
            }
        }
    }
    Ok(cells.len())
}

fn unit_tangent(l: &AffineFn) -> Point {
    let n = libm::hypot(l.w[0], l.w[1]);
    [-l.w[1] / n, l.w[0] / n]
}

fn intersection(p: &AffineFn, q: &AffineFn) -> Option<Point> {
    let det = p.w[0] * q.w[1] - p.w[1] * q.w[0];
    if det == 0.0 {
        return None;
    }
    Some([(-p.b * q.w[1] + q.b * p.w[1]) / det, (-p.w[0] * q.b + q.w[0] * p.b) / det])
}

fn pairwise_intersections(lines: &[AffineFn]) -> Vec<(usize, usize, Point)> {
    let mut out = Vec::new();
    for p in 0..lines.len() {
        for q in p + 1..lines.len() {
            if let Some(v) = intersection(&lines[p], &lines[q]) {
                out.push((p, q, v));
            }
        }
    }
    out
}

/// No two lines parallel and no three concurrent, both checked with the
/// absolute tolerance `tol` on normalized lines.
pub fn in_general_position(lines: &[AffineFn], tol: f64) -> bool {
    if lines.iter().any(AffineFn::is_degenerate) {
        return false;
    }
    let unit: Vec<AffineFn> = lines
        .iter()
        .map(|l| {
            let n = libm::hypot(l.w[0], l.w[1]);
            AffineFn::new([l.w[0] / n, l.w[1] / n], l.b / n)
        })
        .collect();
    for p in 0..unit.len() {
        for q in p + 1..unit.len() {
            let det = unit[p].w[0] * unit[q].w[1] - unit[p].w[1] * unit[q].w[0];
            if libm::fabs(det) < tol {
                return false;
            }
        }
    }
    for (p, q, v) in pairwise_intersections(&unit) {
        for (r, line) in unit.iter().enumerate() {
            if r != p && r != q && line.distance(v) < tol {
                return false;
            }
        }
    }
    true
}

/// A network evaluated with the sigmoid `σ_ε` in place of the step, keeping
/// every parameter unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct Sigmoidized<P> {
    pub params: P,
    pub smoothing: Smoothing,
}

/// Networks that can be evaluated under either activation.
pub trait Network {
    fn eval_with(&self, x: Point, act: Activation) -> f64;
}

impl Network for LayerParams {
    fn eval_with(&self, x: Point, act: Activation) -> f64 {
        eval_one_layer(self, x, act)
    }
}

impl Network for TwoLayerParams {
    fn eval_with(&self, x: Point, act: Activation) -> f64 {
        eval_two_layer(self, x, act)
    }
}

impl<P: Network> Sigmoidized<P> {
    pub fn eval(&self, x: Point) -> f64 {
        self.params.eval_with(x, Activation::Sigmoid(self.smoothing))
    }
}

pub fn sigmoidize<P: Network + Clone>(p: &P, s: Smoothing) -> Sigmoidized<P> {
    Sigmoidized { params: p.clone(), smoothing: s }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::grid_l2_distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const H: Activation = Activation::Heaviside;

    fn sig(e: f64) -> Activation {
        Activation::Sigmoid(Smoothing::new(e).unwrap())
    }

    fn triangle() -> Vec<AffineFn> {
        // counter-clockwise, so each line is positive inside
        let v = [[0.2, 0.2], [0.8, 0.2], [0.5, 0.8]];
        (0..3).map(|i| AffineFn::through(v[i], v[(i + 1) % 3])).collect()
    }

    /// Point strictly inside a convex counter-clockwise polygon (oracle).
    fn inside_convex(poly: &[Point], x: Point) -> bool {
        (0..poly.len()).all(|i| {
            let p = poly[i];
            let q = poly[(i + 1) % poly.len()];
            (q[0] - p[0]) * (x[1] - p[1]) - (q[1] - p[1]) * (x[0] - p[0]) > 0.0
        })
    }

    #[test]
    fn one_layer_trivial_values() {
        let p = LayerParams::new(vec![2.0], vec![[1.0, 0.0]], vec![0.0]).unwrap();
        assert_eq!(eval_one_layer(&p, [0.3, 0.9], H), 2.0);
        let z = LayerParams::zeros(5);
        assert_eq!(eval_one_layer(&z, [0.1, 0.4], sig(0.5)), 0.0);
        assert_eq!(eval_one_layer(&z, [0.1, 0.4], H), 0.0);
    }

    #[test]
    fn triangle_network_attains_thirds() {
        let p = LayerParams::from_lines(vec![1.0 / 3.0; 3], &triangle()).unwrap();
        assert!((eval_one_layer(&p, [0.5, 0.4], H) - 1.0).abs() < 1e-15);
        let mut seen = BTreeSet::new();
        for j in 0..100 {
            for i in 0..100 {
                let x = [(i as f64 + 0.5) / 100.0, (j as f64 + 0.5) / 100.0];
                seen.insert((eval_one_layer(&p, x, H) * 3.0).round() as i64);
            }
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn gradient_rejects_heaviside() {
        let p = LayerParams::zeros(2);
        assert_eq!(eval_one_layer_gradient(&p, [0.0, 0.0], H), Err(Error::HeavisideNotDifferentiable));
        assert_eq!(eval_one_layer_gradient(&p, [0.3, 0.0], sig(0.5)).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn gradient_single_neuron() {
        let p = LayerParams::new(vec![1.0], vec![[1.0, 0.0]], vec![0.0]).unwrap();
        assert_eq!(eval_one_layer_gradient(&p, [0.0, 0.7], sig(0.5)).unwrap(), [0.5, 0.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let act = sig(0.5);
        for _ in 0..20 {
            let n = rng.random_range(1..8);
            let p = LayerParams::new(
                (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
                (0..n).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect(),
                (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let g = eval_one_layer_gradient(&p, x, act).unwrap();
            let h = 1e-6;
            for c in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[c] += h;
                xm[c] -= h;
                let fd = (p.eval(xp, act) - p.eval(xm, act)) / (2.0 * h);
                let denom = g[c].abs().max(fd.abs()).max(1e-12);
                assert!((fd - g[c]).abs() / denom < 1e-5 || (fd - g[c]).abs() < 1e-9, "{fd} {}", g[c]);
            }
        }
    }

    #[test]
    fn two_layer_matches_hand_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let act = sig(0.5);
        let (n1, n2) = (4, 3);
        let p = TwoLayerParams {
            a: (0..n2).map(|_| (0..n1).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
            c: (0..n2).map(|_| rng.random_range(-1.0..1.0)).collect(),
            d: (0..n2).map(|_| (0..n1).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
            b: (0..n1).map(|_| rng.random_range(-1.0..1.0)).collect(),
            w: (0..n1).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect(),
        };
        p.validate().unwrap();
        let x = [0.31, 0.72];
        let mut expected = 0.0;
        for i in 0..n2 {
            let inner = LayerParams::new(p.a[i].clone(), p.w.clone(), p.b.clone()).unwrap();
            let offset: f64 = p.d[i].iter().sum();
            // regroup Σ_j (a_ij h_j + d_ij) as (Σ_j a_ij h_j) + Σ_j d_ij
            let z = eval_one_layer(&inner, x, act) + offset;
            expected += p.c[i] * act.apply(z);
        }
        assert!((eval_two_layer(&p, x, act) - expected).abs() < 1e-14);
        let zero_c = TwoLayerParams { c: vec![0.0; n2], ..p };
        assert_eq!(eval_two_layer(&zero_c, x, act), 0.0);
    }

    #[test]
    fn triangle_indicator_matches_rasterization() {
        let poly = [[0.2, 0.2], [0.8, 0.2], [0.5, 0.8]];
        let t = build_polygon_indicator(&triangle(), &[1, 1, 1], 1.0, 0.0).unwrap();
        assert_eq!(t.eval([0.5, 0.4], H), 1.0);
        assert_eq!(t.eval([0.05, 0.05], H), 0.0);
        let lines = triangle();
        for j in 0..200 {
            for i in 0..200 {
                let x = [(i as f64 + 0.5) / 200.0, (j as f64 + 0.5) / 200.0];
                if lines.iter().any(|l| l.distance(x) <= 1e-9) {
                    continue;
                }
                let want = if inside_convex(&poly, x) { 1.0 } else { 0.0 };
                assert_eq!(t.eval(x, H), want, "{x:?}");
            }
        }
    }

    #[test]
    fn example_constants_give_open_triangle() {
        // a_j = 1/3 and total offset -8/9, plus the complementary neuron
        let lines = triangle();
        let t = TwoLayerParams {
            a: vec![vec![1.0 / 3.0; 3], vec![-1.0 / 3.0; 3]],
            c: vec![1.0, 0.0],
            d: vec![vec![-8.0 / 27.0; 3], vec![8.0 / 27.0; 3]],
            b: lines.iter().map(|l| l.b).collect(),
            w: lines.iter().map(|l| l.w).collect(),
        };
        let nc = LayerParams::from_lines(vec![1.0 / 3.0; 3], &lines).unwrap();
        for j in 0..60 {
            for i in 0..60 {
                let x = [(i as f64 + 0.5) / 60.0, (j as f64 + 0.5) / 60.0];
                let n = nc.eval(x, H);
                let inside = lines.iter().all(|l| l.eval(x) > 0.0);
                assert_eq!(t.eval(x, H), if inside { 1.0 } else { 0.0 });
                // complement identity 1 - σ(κ + n) = σ(-κ - n)
                if n - 8.0 / 9.0 != 0.0 {
                    assert_eq!(1.0 - H.apply(-8.0 / 9.0 + n), H.apply(8.0 / 9.0 - n));
                }
            }
        }
    }

    #[test]
    fn square_indicator_at_centroid() {
        let lines = [
            AffineFn::new([1.0, 0.0], -0.1),
            AffineFn::new([-1.0, 0.0], 0.9),
            AffineFn::new([0.0, 1.0], -0.1),
            AffineFn::new([0.0, -1.0], 0.9),
        ];
        let t = build_polygon_indicator(&lines, &[1, 1, 1, 1], 2.5, -1.0).unwrap();
        assert_eq!(t.eval([0.5, 0.5], H), 2.5);
        assert_eq!(t.eval([0.95, 0.5], H), -1.0);
        // flipping every sign selects a different (empty) cell
        let flipped = build_polygon_indicator(&lines, &[-1, -1, -1, -1], 2.5, -1.0).unwrap();
        assert_eq!(flipped.eval([0.5, 0.5], H), -1.0);
    }

    #[test]
    fn polygon_indicator_errors() {
        let mut lines = triangle();
        assert!(matches!(
            build_polygon_indicator(&lines[..2], &[1, 1], 1.0, 0.0),
            Err(Error::TooFewLines { .. })
        ));
        lines[1] = AffineFn::new([0.0, 0.0], 1.0);
        assert_eq!(build_polygon_indicator(&lines, &[1, 1, 1], 1.0, 0.0), Err(Error::DegenerateLines { index: 1 }));
    }

    #[test]
    fn region_counts() {
        let domain = BoundingBox::new([-2.0, -2.0], [3.0, 3.0]);
        assert_eq!(count_arrangement_regions(&triangle(), domain).unwrap(), 7);
        assert_eq!(count_arrangement_regions(&triangle()[..1], domain).unwrap(), 2);
        let mut four = triangle();
        four.push(AffineFn::new([1.0, 0.3], -0.55));
        assert!(in_general_position(&four, 1e-9));
        assert_eq!(count_arrangement_regions(&four, domain).unwrap(), 11);
        assert_eq!(count_arrangement_regions(&[], domain), Err(Error::EmptyInput));
    }

    #[test]
    fn concurrent_lines_lose_a_region() {
        let lines = [
            AffineFn::new([1.0, 0.0], -0.5),
            AffineFn::new([0.0, 1.0], -0.5),
            AffineFn::new([1.0, 1.0], -1.0),
        ];
        assert!(!in_general_position(&lines, 1e-9));
        assert_eq!(count_arrangement_regions(&lines, BoundingBox::UNIT).unwrap(), 6);
    }

    #[test]
    fn sigmoidized_triangle_converges_in_l2() {
        let t = build_polygon_indicator(&triangle(), &[1, 1, 1], 1.0, 0.0).unwrap();
        let mut last = f64::INFINITY;
        for &e in &[0.5, 0.1, 0.02] {
            let s = sigmoidize(&t, Smoothing::new(e).unwrap());
            let d = grid_l2_distance(|x| s.eval(x), |x| t.eval(x, H), 200);
            assert!(d < last, "eps={e} d={d}");
            last = d;
        }
        let z = sigmoidize(&LayerParams::zeros(3), Smoothing::new(0.3).unwrap());
        assert_eq!(grid_l2_distance(|x| z.eval(x), |_| 0.0, 50), 0.0);
    }

    #[test]
    fn perturbed_sigmoid_network_approaches_heaviside() {
        // parameters within Euclidean distance ε of the original, same ε for smoothing
        let base = LayerParams::from_lines(vec![0.6, -0.3, 0.9], &triangle()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut last = f64::INFINITY;
        for &e in &[0.5, 0.1, 0.02] {
            let mut p = base.clone();
            let scale = 0.9 * e / libm::sqrt(p.parameter_count() as f64);
            p.for_each_mut(|v| *v += scale * rng.random_range(-1.0..1.0));
            let s = sigmoidize(&p, Smoothing::new(e).unwrap());
            let d = grid_l2_distance(|x| s.eval(x), |x| base.eval(x, H), 200);
            let unperturbed = grid_l2_distance(
                |x| base.eval(x, Activation::Sigmoid(Smoothing::new(e).unwrap())),
                |x| base.eval(x, H),
                200,
            );
            assert!(d < last);
            assert!(d <= unperturbed + 2.0 * e, "eps={e} d={d} base={unperturbed}");
            last = d;
        }
    }

    mod props {
        use super::*;
        use crate::activations::heaviside;
        use proptest::prelude::*;

        fn line_through_square() -> impl Strategy<Value = AffineFn> {
            (0.0..core::f64::consts::PI, 0.0..1.0f64, 0.0..1.0f64).prop_map(|(t, px, py)| {
                let n = [libm::cos(t), libm::sin(t)];
                AffineFn::new(n, -(n[0] * px + n[1] * py))
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(40))]

            #[test]
            fn region_count_bound(lines in prop::collection::vec(line_through_square(), 3..=8)) {
                let domain = BoundingBox::new([-50.0, -50.0], [51.0, 51.0]);
                let n = lines.len();
                let count = count_arrangement_regions_with_resolution(&lines, domain, 256).unwrap();
                prop_assert!(count <= max_region_count(n));
                let all_inside = pairwise_intersections(&lines).len() == n * (n - 1) / 2
                    && pairwise_intersections(&lines).iter().all(|&(_, _, v)| domain.contains(v));
                if in_general_position(&lines, 1e-9) && all_inside {
                    prop_assert_eq!(count, max_region_count(n));
                }
            }

            #[test]
            fn complement_identity(x in 0.0..1.0f64, y in 0.0..1.0f64) {
                // Example constants: a_j = 1/3 on the triangle lines, κ = -8/9
                let nc = LayerParams::from_lines(vec![1.0 / 3.0; 3], &triangle()).unwrap();
                let z = -8.0 / 9.0 + nc.eval([x, y], H);
                prop_assume!(z != 0.0);
                prop_assert_eq!(1.0 - heaviside(z), heaviside(-z));
            }

            #[test]
            fn spatial_gradient_matches_differences(
                a in prop::collection::vec(-1.0..1.0f64, 4),
                w in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 4),
                b in prop::collection::vec(-1.0..1.0f64, 4),
                x in 0.0..1.0f64,
                y in 0.0..1.0f64,
            ) {
                let p = LayerParams::new(a, w.into_iter().map(|(u, v)| [u, v]).collect(), b).unwrap();
                let act = sig(0.5);
                let g = eval_one_layer_gradient(&p, [x, y], act).unwrap();
                let h = 1e-6;
                let fd = [
                    (p.eval([x + h, y], act) - p.eval([x - h, y], act)) / (2.0 * h),
                    (p.eval([x, y + h], act) - p.eval([x, y - h], act)) / (2.0 * h),
                ];
                for k in 0..2 {
                    prop_assert!((g[k] - fd[k]).abs() <= 1e-5 * g[k].abs().max(1e-3), "{:?} vs {:?}", g, fd);
                }
            }
        }
    }
}
