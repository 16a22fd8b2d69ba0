//! Small numerical helpers shared across modules.

use crate::networks::Point;

/// Neumaier-compensated running sum. Reduction order is the call order, so
/// results are bit-reproducible.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Center of pixel `(i, j)` on a `width × height` grid over `[0,1]²`.
#[inline]
pub fn pixel_center(i: usize, j: usize, width: usize, height: usize) -> Point {
    [(i as f64 + 0.5) / width as f64, (j as f64 + 0.5) / height as f64]
}

/// Riemann-sum `L²([0,1]²)` distance between two functions sampled at the
/// centers of an `n × n` grid.
pub fn grid_l2_distance<F, G>(f: F, g: G, n: usize) -> f64
where
    F: Fn(Point) -> f64,
    G: Fn(Point) -> f64,
{
    let mut acc = CompensatedSum::new();
    for j in 0..n {
        for i in 0..n {
            let x = pixel_center(i, j, n, n);
            let d = f(x) - g(x);
            acc.add(d * d);
        }
    }
    libm::sqrt(acc.value() / (n * n) as f64)
}
