//! Uniform periodic 1-D grids, discrete norms and Fourier multipliers.
//!
//! The domain is `[-L/2, L/2)` with `n` samples at `x_i = -L/2 + i h`,
//! `h = L / n`. Transforms use the unnormalized forward DFT; the inverse
//! carries the `1/n`. Frequencies are stored in FFT order: index `k < n/2`
//! maps to `2 pi k / L`, index `k >= n/2` to `2 pi (k - n) / L`, so the
//! Nyquist mode sits at index `n/2` with frequency `-pi / h`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    length: f64,
    spacing: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return invalid(format!("grid size must be a power of two >= 2, got {n}"));
        }
        if !(length.is_finite() && length > 0.0) {
            return invalid(format!("domain length must be positive and finite, got {length}"));
        }
        Ok(Grid {
            n,
            length,
            spacing: length / n as f64,
        })
    }

    /// Grid with `n` samples at spacing `h`.
    pub fn with_spacing(n: usize, h: f64) -> Result<Self> {
        Self::new(n, h * n as f64)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn position(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.spacing
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.position(i)).collect()
    }

    /// Angular frequency of DFT index `k` (FFT order).
    pub fn frequency(&self, k: usize) -> f64 {
        let signed = if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        };
        2.0 * PI * signed as f64 / self.length
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.frequency(k)).collect()
    }

    /// Smallest nonzero frequency magnitude, `2 pi / L`.
    pub fn fundamental(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Largest representable frequency magnitude, `pi / h`.
    pub fn nyquist(&self) -> f64 {
        PI / self.spacing
    }

    pub(crate) fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n && self.length.to_bits() == other.length.to_bits()
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(LabError::GridMismatch(format!(
                "(n={}, L={}) vs (n={}, L={})",
                self.n, self.length, other.n, other.length
            )))
        }
    }
}

/// Complex samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    samples: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Grid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.n() {
            return Err(LabError::GridMismatch(format!(
                "{} samples on a grid of {}",
                samples.len(),
                grid.n()
            )));
        }
        Ok(Field { grid, samples })
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); grid.n()],
        }
    }

    pub fn constant(grid: Grid, value: Complex64) -> Self {
        Field {
            grid,
            samples: vec![value; grid.n()],
        }
    }

    /// Sample a complex-valued function of position.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        Field {
            grid,
            samples: grid.positions().into_iter().map(f).collect(),
        }
    }

    /// Sample a real-valued function of position.
    pub fn from_real_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.re).collect()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.norm()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field {
            grid: self.grid,
            samples: self.samples.iter().map(|&z| f(z)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &Field, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Field> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Field {
            grid: self.grid,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|z| z * c)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.samples.iter().map(|z| z.norm_sqr()).sum();
        (self.grid.spacing() * sum).sqrt()
    }

    /// Discrete mean `(1/n) sum f_i`.
    pub fn mean(&self) -> Complex64 {
        self.samples.iter().sum::<Complex64>() / self.grid.n() as f64
    }
}

thread_local! {
    static PLANS: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> = RefCell::new(HashMap::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        cell.borrow_mut()
            .entry((n, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    })
}

/// Unnormalized forward DFT, `X_k = sum_i x_i exp(-2 pi i k i / n)`.
pub fn dft(samples: &[Complex64]) -> Vec<Complex64> {
    let mut buf = samples.to_vec();
    plan(buf.len(), false).process(&mut buf);
    buf
}

/// Inverse of [`dft`], including the `1/n` factor.
pub fn idft(coefficients: &[Complex64]) -> Vec<Complex64> {
    let n = coefficients.len();
    let mut buf = coefficients.to_vec();
    plan(n, true).process(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter_mut().for_each(|z| *z *= inv);
    buf
}

/// `<f, g> = h sum f_i conj(g_i)`.
pub fn inner_product(f: &Field, g: &Field) -> Result<Complex64> {
    f.grid.ensure_same(&g.grid)?;
    let sum: Complex64 = f
        .samples
        .iter()
        .zip(&g.samples)
        .map(|(a, b)| a * b.conj())
        .sum();
    Ok(sum * f.grid.spacing())
}

/// Discrete `L^p` norm; pass `f64::INFINITY` for the sup norm.
pub fn lebesgue_norm(f: &Field, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return invalid(format!("Lebesgue exponent must lie in [1, inf], got {p}"));
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let sum: f64 = f.samples.iter().map(|z| z.norm().powf(p)).sum();
    Ok((f.grid.spacing() * sum).powf(1.0 / p))
}

/// Apply the multiplier whose values at each DFT index (FFT order) are given.
pub fn apply_symbol(f: &Field, symbol: &[f64]) -> Result<Field> {
    if symbol.len() != f.grid.n() {
        return Err(LabError::GridMismatch(format!(
            "symbol of length {} on a grid of {}",
            symbol.len(),
            f.grid.n()
        )));
    }
    let mut hat = dft(&f.samples);
    hat.iter_mut().zip(symbol).for_each(|(z, &m)| *z *= m);
    Ok(Field {
        grid: f.grid,
        samples: idft(&hat),
    })
}

/// `F^{-1}( m(xi_k) F f )` for a real symbol `m`.
pub fn fourier_multiplier(f: &Field, m: impl Fn(f64) -> f64) -> Field {
    let symbol: Vec<f64> = f.grid.frequencies().into_iter().map(m).collect();
    apply_symbol(f, &symbol).expect("symbol sampled on the field's own grid")
}

/// `|xi|^s`, with the zero mode sent to zero.
pub fn homogeneous_symbol(s: f64) -> impl Fn(f64) -> f64 {
    move |xi: f64| if xi == 0.0 { 0.0 } else { xi.abs().powf(s) }
}

/// `(-Delta)^{s/2} f` as a Fourier multiplier.
pub fn fractional_laplacian(f: &Field, s: f64) -> Field {
    fourier_multiplier(f, homogeneous_symbol(s))
}

/// `H^s` norm through `(1 + |xi|^2)^{s/2}`, or the homogeneous `|xi|^s` version.
pub fn sobolev_norm(f: &Field, s: f64, homogeneous: bool) -> f64 {
    let g = if homogeneous {
        fourier_multiplier(f, homogeneous_symbol(s))
    } else {
        fourier_multiplier(f, |xi| (1.0 + xi * xi).powf(0.5 * s))
    };
    g.l2_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Grid::new(12, 1.0).is_err());
        assert!(Grid::new(16, -1.0).is_err());
    }

    #[test]
    fn spacing_and_frequency_symmetry() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        assert!((g.spacing() * 64.0 - g.length()).abs() <= f64::EPSILON * g.length());
        for k in 1..32 {
            assert_eq!(g.frequency(k), -g.frequency(64 - k));
        }
        assert_abs_diff_eq!(g.frequency(32), -32.0, epsilon = 1e-12);
    }

    #[test]
    fn inner_product_examples() {
        let g = Grid::new(4, 4.0).unwrap();
        let one = Field::constant(g, c(1.0, 0.0));
        assert_abs_diff_eq!(inner_product(&one, &one).unwrap().re, 4.0);
        let f = Field::new(g, vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)]).unwrap();
        let ip = inner_product(&f, &f).unwrap();
        assert_abs_diff_eq!(ip.re, 4.0);
        assert_abs_diff_eq!(ip.im, 0.0);
        let g2 = Grid::new(4, 2.0).unwrap();
        let e0 = Field::from_real(g2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let e1 = Field::from_real(g2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(inner_product(&e0, &e1).unwrap(), c(0.0, 0.0));
        assert!(inner_product(&e0, &one).is_err());
    }

    #[test]
    fn lebesgue_examples() {
        let g = Grid::new(4, 4.0).unwrap();
        let f = Field::from_real(g, &[3.0, 4.0, 0.0, 0.0]).unwrap();
        assert_eq!(lebesgue_norm(&f, f64::INFINITY).unwrap(), 4.0);
        let ones = Field::from_real(g, &[1.0; 4]).unwrap();
        assert_abs_diff_eq!(lebesgue_norm(&ones, 2.0).unwrap(), 2.0, epsilon = 1e-15);
        let g2 = Grid::new(4, 2.0).unwrap();
        let f = Field::from_real(g2, &[2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(lebesgue_norm(&f, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(lebesgue_norm(&f, 0.5).is_err());
    }

    #[test]
    fn identity_multiplier() {
        let g = Grid::new(32, 3.0).unwrap();
        let f = Field::from_fn(g, |x| c(x.sin() + 0.3, (2.0 * x).cos()));
        let out = fourier_multiplier(&f, |_| 1.0);
        let err = out.sub(&f).unwrap().max_abs();
        assert!(err <= 1e-12, "{err}");
    }

    #[test]
    fn single_mode_multipliers() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        let f = Field::from_real_fn(g, f64::cos);
        let out = fourier_multiplier(&f, f64::abs);
        assert!(out.sub(&f).unwrap().max_abs() < 1e-12);
        let s2 = Field::from_real_fn(g, |x| (2.0 * x).sin());
        let out = fourier_multiplier(&s2, |xi| xi * xi);
        assert!(out.sub(&s2.scale(4.0)).unwrap().max_abs() < 1e-11);
    }

    #[test]
    fn sobolev_examples() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        let k = Field::constant(g, c(2.5, 0.0));
        assert!(sobolev_norm(&k, 0.7, true) < 1e-13);
        let f = Field::from_real_fn(g, |x| (x * x * 0.1).exp().recip());
        assert_abs_diff_eq!(sobolev_norm(&f, 0.0, false), lebesgue_norm(&f, 2.0).unwrap(), epsilon = 1e-12);
        let cosine = Field::from_real_fn(g, f64::cos);
        assert_abs_diff_eq!(sobolev_norm(&cosine, 1.0, true), PI.sqrt(), epsilon = 1e-12);
    }
}
