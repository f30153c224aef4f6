//! Seeded test-field generators.
//!
//! Random fields are drawn as trigonometric series in physical space, so the
//! same seed produces the same continuum function on every grid of a
//! refinement ladder.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::grid::{Field, Grid};

pub type LabRng = ChaCha8Rng;

pub fn rng(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream for trial `index` of a suite seeded by `seed`.
pub fn trial_rng(seed: u64, index: usize) -> LabRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index as u64 + 1);
    r
}

/// Real trigonometric series `mean + sum_k a_k cos(2 pi k x / L) + b_k sin(2 pi k x / L)`.
#[derive(Debug, Clone)]
pub struct RandomSeries {
    pub length: f64,
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl RandomSeries {
    /// Gaussian coefficients on modes `1..=modes`, damped by `1/k^decay`.
    pub fn gaussian<R: Rng>(rng: &mut R, length: f64, modes: usize, decay: f64) -> Self {
        let mut cos = Vec::with_capacity(modes);
        let mut sin = Vec::with_capacity(modes);
        for k in 1..=modes {
            let damp = (k as f64).powf(-decay);
            cos.push(rng.sample::<f64, _>(StandardNormal) * damp);
            sin.push(rng.sample::<f64, _>(StandardNormal) * damp);
        }
        RandomSeries {
            length,
            mean: 0.0,
            cos,
            sin,
        }
    }

    pub fn with_mean(mut self, mean: f64) -> Self {
        self.mean = mean;
        self
    }

    /// Sum of coefficient magnitudes; bounds `|f - mean|` everywhere.
    pub fn amplitude_bound(&self) -> f64 {
        self.cos.iter().chain(&self.sin).map(|c| c.abs()).sum()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let w = 2.0 * PI / self.length;
        let mut acc = self.mean;
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let arg = w * (k + 1) as f64 * x;
            acc += a * arg.cos() + b * arg.sin();
        }
        acc
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        grid.positions().into_iter().map(|x| self.eval(x)).collect()
    }

    pub fn field(&self, grid: Grid) -> Field {
        Field::from_real_fn(grid, |x| self.eval(x))
    }
}

/// Mean-zero real field with modes up to a quarter of the grid size (top octave removed).
pub fn band_limited_real<R: Rng>(rng: &mut R, grid: Grid) -> Field {
    let modes = (grid.n() / 4).max(1);
    RandomSeries::gaussian(rng, grid.length(), modes, 1.0).field(grid)
}

/// Complex field with independent band-limited real and imaginary parts.
pub fn band_limited_complex<R: Rng>(rng: &mut R, grid: Grid) -> Field {
    let re = band_limited_real(rng, grid);
    let im = band_limited_real(rng, grid);
    re.zip_with(&im, |a, b| Complex64::new(a.re, b.re))
        .expect("same grid")
}

/// Independent standard normal samples.
pub fn white_noise<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}
