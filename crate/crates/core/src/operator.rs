//! Discrete Hamiltonian `H = -(a u')' + V u` in symmetric flux form, the
//! coefficient and potential families it is built from, and the checks of
//! its standing assumptions (ellipticity, Lipschitz metric, the
//! `H^{1/2} -> L^2` multiplier bound, form positivity, weak-`L^q` potential).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::grid::{fourier_multiplier, homogeneous_symbol, inner_product, Field, Grid};
use crate::linalg::{apply_real, min_eigenvalue, Mat};
use crate::random::{band_limited_real, rng, trial_rng, RandomSeries};

/// Built-in metric profiles `a(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CoefficientFamily {
    Constant {
        value: f64,
    },
    /// `mean + amplitude * sin(2 pi periods x / L)`.
    Sinusoidal {
        mean: f64,
        amplitude: f64,
        #[serde(default = "default_periods")]
        periods: u32,
    },
    /// Periodic piecewise-linear interpolant through `knots` values drawn
    /// uniformly from `mean +- amplitude`.
    RandomLipschitz {
        mean: f64,
        amplitude: f64,
        knots: usize,
        seed: u64,
    },
}

fn default_periods() -> u32 {
    1
}

impl CoefficientFamily {
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        let l = grid.length();
        let xs = grid.positions();
        let values = match *self {
            CoefficientFamily::Constant { value } => vec![value; grid.n()],
            CoefficientFamily::Sinusoidal {
                mean,
                amplitude,
                periods,
            } => xs
                .iter()
                .map(|&x| mean + amplitude * (2.0 * PI * periods as f64 * x / l).sin())
                .collect(),
            CoefficientFamily::RandomLipschitz {
                mean,
                amplitude,
                knots,
                seed,
            } => {
                if knots < 2 {
                    return invalid("random Lipschitz metric needs at least 2 knots");
                }
                let mut r = rng(seed);
                let values: Vec<f64> = (0..knots)
                    .map(|_| mean + amplitude * (2.0 * r.random::<f64>() - 1.0))
                    .collect();
                let spacing = l / knots as f64;
                xs.iter()
                    .map(|&x| {
                        let t = (x + 0.5 * l) / spacing;
                        let k = (t.floor() as usize).min(knots - 1);
                        let frac = t - k as f64;
                        values[k] * (1.0 - frac) + values[(k + 1) % knots] * frac
                    })
                    .collect()
            }
        };
        Ok(values)
    }
}

/// Built-in potential profiles. `InversePower` is `strength * min(|x|^{-1/q}, cap)`,
/// the prototypical element of weak `L^q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PotentialFamily {
    Zero,
    Constant { value: f64 },
    SquareWell { depth: f64, width: f64 },
    InversePower { strength: f64, cap: f64 },
    /// `offset + amplitude * s(x)` with `s` a seeded smooth series, `|s| <= 1`.
    Noise {
        offset: f64,
        amplitude: f64,
        modes: usize,
        seed: u64,
    },
}

impl PotentialFamily {
    pub fn sample(&self, grid: &Grid, q: f64) -> Result<Vec<f64>> {
        let xs = grid.positions();
        let values = match *self {
            PotentialFamily::Zero => vec![0.0; grid.n()],
            PotentialFamily::Constant { value } => vec![value; grid.n()],
            PotentialFamily::SquareWell { depth, width } => xs
                .iter()
                .map(|&x| if x.abs() < 0.5 * width { depth } else { 0.0 })
                .collect(),
            PotentialFamily::InversePower { strength, cap } => {
                if !(q > 0.0) || !(cap > 0.0) {
                    return invalid("inverse-power potential needs q > 0 and cap > 0");
                }
                xs.iter()
                    .map(|&x| {
                        let r = x.abs();
                        let v = if r == 0.0 { cap } else { r.powf(-1.0 / q).min(cap) };
                        strength * v
                    })
                    .collect()
            }
            PotentialFamily::Noise {
                offset,
                amplitude,
                modes,
                seed,
            } => {
                let series = RandomSeries::gaussian(&mut rng(seed), grid.length(), modes.max(1), 1.0);
                let bound = series.amplitude_bound().max(f64::MIN_POSITIVE);
                xs.iter()
                    .map(|&x| offset + amplitude * series.eval(x) / bound)
                    .collect()
            }
        };
        Ok(values)
    }
}

/// Sampled metric with its ellipticity bounds and discrete Lipschitz seminorm.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub a: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    pub lip: f64,
}

impl CoefficientField {
    pub fn new(grid: &Grid, a: Vec<f64>) -> Result<Self> {
        if a.len() != grid.n() {
            return Err(LabError::GridMismatch(format!(
                "metric has {} samples on a grid of {}",
                a.len(),
                grid.n()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return invalid("metric samples must be finite");
        }
        let c1 = a.iter().copied().fold(f64::INFINITY, f64::min);
        let c2 = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lip = lipschitz_seminorm(&a, grid.spacing());
        Ok(CoefficientField { a, c1, c2, lip })
    }

    pub fn from_family(grid: &Grid, family: &CoefficientFamily) -> Result<Self> {
        Self::new(grid, family.sample(grid)?)
    }
}

/// `max_i |f_{i+1} - f_i| / h`, periodic.
pub fn lipschitz_seminorm(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    (0..n)
        .map(|i| (values[(i + 1) % n] - values[i]).abs() / h)
        .fold(0.0, f64::max)
}

/// Configuration of the potential `V = V_1 + V_2` with `V_1` in weak `L^q`
/// and `V_2` bounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub q: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "zero_family")]
    pub singular: PotentialFamily,
    #[serde(default = "zero_family")]
    pub bounded: PotentialFamily,
}

fn default_theta() -> f64 {
    0.5
}

fn zero_family() -> PotentialFamily {
    PotentialFamily::Zero
}

impl PotentialSpec {
    pub fn zero(q: f64) -> Self {
        PotentialSpec {
            q,
            theta: 0.5,
            singular: PotentialFamily::Zero,
            bounded: PotentialFamily::Zero,
        }
    }
}

/// Sampled potential and its norms.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub v: Vec<f64>,
    pub singular: Vec<f64>,
    pub bounded: Vec<f64>,
    pub q: f64,
    pub theta: f64,
    /// Weak-`L^q` quasi-norm of the full potential.
    pub lorentz_norm: f64,
    pub singular_lorentz: f64,
    pub bounded_sup: f64,
}

impl PotentialField {
    pub fn new(grid: &Grid, singular: Vec<f64>, bounded: Vec<f64>, q: f64, theta: f64) -> Result<Self> {
        if singular.len() != grid.n() || bounded.len() != grid.n() {
            return Err(LabError::GridMismatch("potential parts must match the grid".into()));
        }
        if !(q > 0.0) {
            return invalid(format!("Lorentz exponent must be positive, got {q}"));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return invalid(format!("form parameter theta must lie in (0,1), got {theta}"));
        }
        let v: Vec<f64> = singular.iter().zip(&bounded).map(|(a, b)| a + b).collect();
        let h = grid.spacing();
        Ok(PotentialField {
            lorentz_norm: lorentz_quasinorm(&v, h, q),
            singular_lorentz: lorentz_quasinorm(&singular, h, q),
            bounded_sup: bounded.iter().fold(0.0, |m, x| m.max(x.abs())),
            v,
            singular,
            bounded,
            q,
            theta,
        })
    }

    /// A single-part potential (everything counted as the weak-`L^q` part).
    pub fn from_values(grid: &Grid, v: Vec<f64>, q: f64, theta: f64) -> Result<Self> {
        let zeros = vec![0.0; v.len()];
        Self::new(grid, v, zeros, q, theta)
    }

    pub fn zero(grid: &Grid, q: f64) -> Self {
        Self::from_values(grid, vec![0.0; grid.n()], q, 0.5).expect("valid zero potential")
    }

    pub fn from_spec(grid: &Grid, spec: &PotentialSpec) -> Result<Self> {
        Self::new(
            grid,
            spec.singular.sample(grid, spec.q)?,
            spec.bounded.sample(grid, spec.q)?,
            spec.q,
            spec.theta,
        )
    }

    pub fn is_zero(&self) -> bool {
        self.v.iter().all(|&x| x == 0.0)
    }
}

/// Discrete weak-`L^q` quasi-norm `sup_t t (h #{|v_i| > t})^{1/q}`.
///
/// The supremum is approached as `t` increases to each distinct magnitude, so
/// it equals `max_k m_k (h (k+1))^{1/q}` over the magnitudes sorted in
/// decreasing order.
pub fn lorentz_quasinorm(values: &[f64], h: f64, q: f64) -> f64 {
    let mut mags: Vec<f64> = values.iter().map(|v| v.abs()).filter(|&m| m > 0.0).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.iter()
        .enumerate()
        .map(|(k, &m)| m * (h * (k + 1) as f64).powf(1.0 / q))
        .fold(0.0, f64::max)
}

/// Assembled Hamiltonian.
#[derive(Debug, Clone)]
pub struct EllipticOperator {
    pub grid: Grid,
    /// Full matrix `K + diag(V)`.
    pub matrix: Mat,
    /// Kinetic part `K` alone.
    pub kinetic: Mat,
    pub coeff: CoefficientField,
    pub pot: PotentialField,
}

/// Flux-form stiffness matrix of `-(a u')'` with bond values `(a_i + a_{i+1})/2`.
pub fn kinetic_matrix(grid: &Grid, a: &[f64]) -> Mat {
    let n = grid.n();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let bonds: Vec<f64> = (0..n).map(|i| 0.5 * (a[i] + a[(i + 1) % n])).collect();
    let mut k = Mat::zeros(n, n);
    for i in 0..n {
        let right = bonds[i] * inv_h2;
        let left = bonds[(i + n - 1) % n] * inv_h2;
        k[(i, i)] += right + left;
        k[(i, (i + 1) % n)] -= right;
        k[(i, (i + n - 1) % n)] -= left;
    }
    k
}

impl EllipticOperator {
    pub fn assemble(coeff: CoefficientField, pot: PotentialField, grid: Grid) -> Result<Self> {
        if coeff.a.len() != grid.n() || pot.v.len() != grid.n() {
            return Err(LabError::GridMismatch(format!(
                "coefficient ({}) / potential ({}) samples vs grid of {}",
                coeff.a.len(),
                pot.v.len(),
                grid.n()
            )));
        }
        let ell = check_ellipticity(&coeff);
        if !ell.pass {
            return Err(LabError::Assumption(format!(
                "metric not uniformly elliptic: min a = {}",
                ell.c1
            )));
        }
        let kinetic = kinetic_matrix(&grid, &coeff.a);
        let mut matrix = kinetic.clone();
        for (i, &v) in pot.v.iter().enumerate() {
            matrix[(i, i)] += v;
        }
        Ok(EllipticOperator {
            grid,
            matrix,
            kinetic,
            coeff,
            pot,
        })
    }

    pub fn from_families(grid: Grid, coeff: &CoefficientFamily, pot: &PotentialSpec) -> Result<Self> {
        let c = CoefficientField::from_family(&grid, coeff)?;
        let p = PotentialField::from_spec(&grid, pot)?;
        Self::assemble(c, p, grid)
    }

    /// `-Delta_h`: the same grid with `a = 1`, `V = 0`.
    pub fn free_laplacian(grid: Grid) -> Self {
        let coeff = CoefficientField::new(&grid, vec![1.0; grid.n()]).expect("valid metric");
        Self::assemble(coeff, PotentialField::zero(&grid, 4.0), grid).expect("valid operator")
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        self.grid.ensure_same(f.grid())?;
        Field::new(self.grid, apply_real(&self.matrix, f.samples()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipticityReport {
    pub c1: f64,
    pub c2: f64,
    pub pass: bool,
}

pub fn check_ellipticity(coeff: &CoefficientField) -> EllipticityReport {
    EllipticityReport {
        c1: coeff.c1,
        c2: coeff.c2,
        pass: coeff.c1 > 0.0 && coeff.lip.is_finite(),
    }
}

/// `||((-Delta)^{1/4} a) f|| / ||(-Delta)^{1/4} f||`, or `None` for a zero denominator.
pub fn a3_ratio(a: &Field, f: &Field) -> Result<Option<f64>> {
    a.grid().ensure_same(f.grid())?;
    let da = fourier_multiplier(a, homogeneous_symbol(0.5));
    let df = fourier_multiplier(f, homogeneous_symbol(0.5));
    let den = df.l2_norm();
    if den <= 1e-14 * f.l2_norm().max(f64::MIN_POSITIVE) || den == 0.0 {
        return Ok(None);
    }
    Ok(Some(da.mul(f)?.l2_norm() / den))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct A3Report {
    pub max_ratio: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

pub fn check_a3(coeff: &CoefficientField, grid: &Grid, trials: usize, seed: u64) -> Result<A3Report> {
    if trials == 0 {
        return invalid("check_a3 needs at least one trial");
    }
    let a = Field::from_real(*grid, &coeff.a)?;
    let mut max_ratio: f64 = 0.0;
    let mut evaluated = 0;
    for t in 0..trials {
        let mut r = trial_rng(seed, t);
        let f = band_limited_real(&mut r, *grid);
        if let Some(ratio) = a3_ratio(&a, &f)? {
            max_ratio = max_ratio.max(ratio);
            evaluated += 1;
        }
    }
    if evaluated == 0 {
        return invalid("every trial field had a vanishing (-Delta)^{1/4} norm");
    }
    Ok(A3Report {
        max_ratio,
        evaluated,
        skipped: trials - evaluated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormReport {
    pub theta: f64,
    pub min_eigenvalue: f64,
    pub pass: bool,
}

/// Smallest eigenvalue of `theta K + diag(V)`.
pub fn check_form_positivity(op: &EllipticOperator, theta: f64) -> Result<FormReport> {
    if !(theta > 0.0 && theta < 1.0) {
        return invalid(format!("theta must lie in (0,1), got {theta}"));
    }
    let mut form = &op.kinetic * theta;
    for (i, &v) in op.pot.v.iter().enumerate() {
        form[(i, i)] += v;
    }
    let min_eigenvalue = min_eigenvalue(&form)?;
    let scale = form.norm();
    Ok(FormReport {
        theta,
        min_eigenvalue,
        pass: min_eigenvalue >= -1e-10 * scale,
    })
}

/// `(||H f|| + ||f||) / ||f||_{H^2}` and `(<H f, f> + ||f||^2) / ||f||_{H^1}^2`.
pub fn sobolev_ratios(op: &EllipticOperator, f: &Field) -> Result<(f64, f64)> {
    let hf = op.apply(f)?;
    let h2 = fourier_multiplier(f, |xi| 1.0 + xi * xi).l2_norm();
    let h1_sq = fourier_multiplier(f, |xi| (1.0 + xi * xi).sqrt()).l2_norm().powi(2);
    let norm = f.l2_norm();
    let form = inner_product(&hf, f)?.re;
    Ok(((hf.l2_norm() + norm) / h2, (form + norm * norm) / h1_sq))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevEquivalenceReport {
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub form_ratio_min: f64,
    pub form_ratio_max: f64,
}

/// Extremes of the graph-norm and form-norm ratios over random band-limited
/// fields (plus a constant offset, so the zero mode is exercised).
pub fn sobolev_equivalence_report(op: &EllipticOperator, trials: usize, seed: u64) -> Result<SobolevEquivalenceReport> {
    if trials == 0 {
        return invalid("sobolev_equivalence_report needs at least one trial");
    }
    let mut rep = SobolevEquivalenceReport {
        ratio_min: f64::INFINITY,
        ratio_max: 0.0,
        form_ratio_min: f64::INFINITY,
        form_ratio_max: 0.0,
    };
    for t in 0..trials {
        let mut r = trial_rng(seed, t);
        let offset: f64 = r.random::<f64>();
        let f = band_limited_real(&mut r, op.grid).map(|z| z + Complex64::new(offset, 0.0));
        let (g, q) = sobolev_ratios(op, &f)?;
        rep.ratio_min = rep.ratio_min.min(g);
        rep.ratio_max = rep.ratio_max.max(g);
        rep.form_ratio_min = rep.form_ratio_min.min(q);
        rep.form_ratio_max = rep.form_ratio_max.max(q);
    }
    Ok(rep)
}
