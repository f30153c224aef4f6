//! Commutators of multiplication operators with the fractional Hamiltonian,
//! their operator norms, and the empirical forms of the commutator bounds.
//!
//! Throughout, `[f, D] = diag(f) D - D diag(f)`. On a uniform grid the
//! h-weighted `L^2` metric is `h I`, so Euclidean singular values are the
//! operator norms; a non-uniform grid would need the weighted version.

use num_complex::Complex64;
use serde::Serialize;

use crate::besov::{besov_norm, chi0, Band, DyadicBank};
use crate::error::{invalid, LabError, Result};
use crate::grid::{fractional_laplacian, inner_product, lebesgue_norm, Field, Grid};
use crate::linalg::{apply_real, largest_singular_value, multiplier_matrix, solve_shifted, Mat};
use crate::operator::{lipschitz_seminorm, CoefficientFamily, EllipticOperator, PotentialSpec};
use crate::par;
use crate::quadrature::{balakrishnan_constant, QuadratureRule};
use crate::random::{trial_rng, RandomSeries};
use crate::spectral::{eigendecompose, square_root};

/// Relative tolerance for power-iteration norms in the suites.
pub const OP_NORM_TOL: f64 = 1e-10;
const OP_NORM_ITER: usize = 20_000;

/// Real samples of a field that must be real.
pub fn real_samples(f: &Field) -> Result<Vec<f64>> {
    let scale = f.max_abs().max(f64::MIN_POSITIVE);
    if f.samples().iter().any(|z| z.im.abs() > 1e-12 * scale) {
        return invalid("multiplier field must be real");
    }
    Ok(f.real_parts())
}

/// `diag(f) D - D diag(f)`.
pub fn commutator_matrix(f: &[f64], d: &Mat) -> Result<Mat> {
    let n = f.len();
    if d.nrows() != n || d.ncols() != n {
        return Err(LabError::GridMismatch(format!(
            "multiplier of length {n} against a {}x{} operator",
            d.nrows(),
            d.ncols()
        )));
    }
    Ok(Mat::from_fn(n, n, |i, k| (f[i] - f[k]) * d[(i, k)]))
}

/// Largest singular value.
pub fn operator_norm(m: &Mat, tol: f64) -> Result<f64> {
    largest_singular_value(m, tol, OP_NORM_ITER)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundParts {
    /// `||f||` in homogeneous `B^1_{inf,1}`.
    pub besov_term: f64,
    /// `||V||_{q,inf} ||f||_inf`.
    pub potential_term: f64,
    pub lipschitz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutatorReport {
    pub grid_n: Vec<usize>,
    pub op_norms: Vec<f64>,
    pub bounds: Vec<BoundParts>,
    /// `op_norm / bound` per grid; `None` when the bound vanishes.
    pub ratios: Vec<Option<f64>>,
    /// `ratio(2n) / ratio(n)` between consecutive grids.
    pub refinement_ratios: Vec<f64>,
}

impl CommutatorReport {
    /// Values on the finest grid.
    pub fn op_norm(&self) -> f64 {
        *self.op_norms.last().unwrap_or(&0.0)
    }

    pub fn ratio(&self) -> Option<f64> {
        self.ratios.last().copied().flatten()
    }

    fn from_rows(rows: Vec<(usize, f64, BoundParts, Option<f64>)>) -> Self {
        let ratios: Vec<Option<f64>> = rows.iter().map(|r| r.3).collect();
        let refinement_ratios = ratios
            .windows(2)
            .filter_map(|w| match (w[0], w[1]) {
                (Some(a), Some(b)) if a > 0.0 => Some(b / a),
                _ => None,
            })
            .collect();
        CommutatorReport {
            grid_n: rows.iter().map(|r| r.0).collect(),
            op_norms: rows.iter().map(|r| r.1).collect(),
            bounds: rows.iter().map(|r| r.2).collect(),
            ratios,
            refinement_ratios,
        }
    }
}

/// Grid sizes sharing one domain length.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    pub length: f64,
    pub sizes: Vec<usize>,
}

impl Ladder {
    pub fn new(length: f64, sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return invalid("refinement ladder needs at least one grid");
        }
        for &n in &sizes {
            Grid::new(n, length)?;
        }
        Ok(Ladder { length, sizes })
    }

    pub fn grids(&self) -> Vec<Grid> {
        self.sizes
            .iter()
            .map(|&n| Grid::new(n, self.length).expect("validated"))
            .collect()
    }
}

/// `D = H^{1/2}` for the operator assembled on `grid`, with the standing
/// checks for the first commutator bound.
pub fn case1_operator(grid: Grid, coeff: &CoefficientFamily, pot: &PotentialSpec) -> Result<(EllipticOperator, Mat)> {
    if !pot.singular.eq(&crate::operator::PotentialFamily::Zero) && !(pot.q > 2.0) {
        return Err(LabError::Assumption(format!(
            "weak-L^q part needs q > 2, got {}",
            pot.q
        )));
    }
    let op = EllipticOperator::from_families(grid, coeff, pot)?;
    let d = square_root(&eigendecompose(&op)?)?;
    Ok((op, d))
}

fn case1_bound(bank: &DyadicBank, f: &Field, op: &EllipticOperator) -> Result<BoundParts> {
    let besov_term = besov_norm(bank, f, 1.0, f64::INFINITY, 1.0, true)?.value;
    Ok(BoundParts {
        besov_term,
        potential_term: op.pot.lorentz_norm * f.max_abs(),
        lipschitz: lipschitz_seminorm(&f.real_parts(), f.grid().spacing()),
    })
}

fn case1_row(f: &Field, op: &EllipticOperator, d: &Mat, bank: &DyadicBank) -> Result<(usize, f64, BoundParts, Option<f64>)> {
    let fr = real_samples(f)?;
    let norm = operator_norm(&commutator_matrix(&fr, d)?, OP_NORM_TOL)?;
    let parts = case1_bound(bank, f, op)?;
    let bound = parts.besov_term + parts.potential_term;
    Ok((f.grid().n(), norm, parts, (bound > 0.0).then(|| norm / bound)))
}

/// `||[f, H^{1/2}]|| / (||f||_{B^1_{inf,1}} + ||V||_{q,inf} ||f||_inf)` along a ladder.
pub fn verify_prop2_case1(
    f: impl Fn(f64) -> f64,
    coeff: &CoefficientFamily,
    pot: &PotentialSpec,
    ladder: &Ladder,
) -> Result<CommutatorReport> {
    let rows = ladder
        .grids()
        .into_iter()
        .map(|g| {
            let (op, d) = case1_operator(g, coeff, pot)?;
            let field = Field::from_real_fn(g, &f);
            case1_row(&field, &op, &d, &DyadicBank::new(g))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CommutatorReport::from_rows(rows))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyReport {
    pub grid_n: Vec<usize>,
    /// Largest ratio over the trials on each grid.
    pub max_ratios: Vec<f64>,
    pub refinement_ratios: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

/// Seeded multiplier of trial `index`: a smooth series with `modes` modes.
pub fn trial_multiplier(seed: u64, index: usize, length: f64, modes: usize) -> RandomSeries {
    RandomSeries::gaussian(&mut trial_rng(seed, index), length, modes, 1.0)
}

/// Randomized first-case suite. Every trial function has `modes` modes, so
/// the same continuum function is sampled on every rung of the ladder.
pub fn prop2_family(
    coeff: &CoefficientFamily,
    pot: &PotentialSpec,
    ladder: &Ladder,
    trials: usize,
    modes: usize,
    seed: u64,
) -> Result<FamilyReport> {
    let mut max_ratios = Vec::new();
    for g in ladder.grids() {
        if modes > g.n() / 4 {
            return invalid(format!("{modes} modes exceed a quarter of the {}-point grid", g.n()));
        }
        let (op, d) = case1_operator(g, coeff, pot)?;
        let bank = DyadicBank::new(g);
        let ratios = par::map_indexed(trials, |t| -> Result<f64> {
            let f = trial_multiplier(seed, t, g.length(), modes).field(g);
            Ok(case1_row(&f, &op, &d, &bank)?.3.unwrap_or(0.0))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        max_ratios.push(ratios.into_iter().fold(0.0, f64::max));
    }
    let refinement_ratios = max_ratios.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(FamilyReport {
        grid_n: ladder.sizes.clone(),
        max_ratios,
        refinement_ratios,
        trials,
        seed,
    })
}

/// Lipschitz commutator with `D` the square root of the `a = 1`, `V = 0` stencil.
pub fn verify_lipschitz_commutator(f: impl Fn(f64) -> f64, ladder: &Ladder) -> Result<CommutatorReport> {
    let rows = ladder
        .grids()
        .into_iter()
        .map(|g| {
            let d = square_root(&eigendecompose(&EllipticOperator::free_laplacian(g))?)?;
            let field = Field::from_real_fn(g, &f);
            let fr = field.real_parts();
            let norm = operator_norm(&commutator_matrix(&fr, &d)?, OP_NORM_TOL)?;
            let lip = lipschitz_seminorm(&fr, g.spacing());
            if lip == 0.0 && norm > 1e-10 {
                return Err(LabError::Assumption(format!(
                    "commutator norm {norm:e} with a constant multiplier"
                )));
            }
            let parts = BoundParts {
                besov_term: 0.0,
                potential_term: 0.0,
                lipschitz: lip,
            };
            Ok((g.n(), norm, parts, (lip > 0.0).then(|| norm / lip)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CommutatorReport::from_rows(rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeibnizReport {
    pub residual: f64,
    pub denominator: f64,
    pub residual_ratio: Option<f64>,
}

/// Residual of the fractional Leibniz rule with Fourier-multiplier powers.
pub fn verify_fractional_leibniz(f: &Field, g: &Field, s: f64) -> Result<LeibnizReport> {
    if !(s > 0.0 && s < 1.0) {
        return invalid(format!("Leibniz order must lie in (0,1), got {s}"));
    }
    let fg = f.mul(g)?;
    let df = fractional_laplacian(f, s);
    let dg = fractional_laplacian(g, s);
    let r = fractional_laplacian(&fg, s).sub(&f.mul(&dg)?)?.sub(&g.mul(&df)?)?;
    let residual = r.l2_norm();
    let denominator = f.max_abs() * dg.l2_norm();
    Ok(LeibnizReport {
        residual,
        denominator,
        residual_ratio: (denominator > 0.0).then(|| residual / denominator),
    })
}

/// Exponents `(r, p1, q1, p2, q2)`; `f64::INFINITY` stands for the sup norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KatoPonceExponents {
    pub r: f64,
    pub p1: f64,
    pub q1: f64,
    pub p2: f64,
    pub q2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KatoPonceReport {
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: Option<f64>,
}

/// `||D^s(fg)||_r / (||D^s f||_{p1} ||g||_{q1} + ||f||_{p2} ||D^s g||_{q2})`.
pub fn verify_kato_ponce(f: &Field, g: &Field, s: f64, e: KatoPonceExponents) -> Result<KatoPonceReport> {
    let inv = |p: f64| 1.0 / p;
    let all = [e.r, e.p1, e.q1, e.p2, e.q2];
    if all.iter().any(|&p| p.is_nan() || p < 1.0) {
        return invalid("Kato-Ponce exponents must lie in [1, inf]");
    }
    let tol = 1e-12;
    if (inv(e.r) - inv(e.p1) - inv(e.q1)).abs() > tol || (inv(e.r) - inv(e.p2) - inv(e.q2)).abs() > tol {
        return invalid("Kato-Ponce exponents violate 1/r = 1/p1 + 1/q1 = 1/p2 + 1/q2");
    }
    let even = s > 0.0 && (s / 2.0).fract() == 0.0;
    if !(s > (1.0 / e.r - 1.0).max(0.0) || even) {
        return invalid(format!("Kato-Ponce order s = {s} below the admissible range"));
    }
    let numerator = lebesgue_norm(&fractional_laplacian(&f.mul(g)?, s), e.r)?;
    let df = fractional_laplacian(f, s);
    let dg = fractional_laplacian(g, s);
    let denominator = lebesgue_norm(&df, e.p1)? * lebesgue_norm(g, e.q1)?
        + lebesgue_norm(f, e.p2)? * lebesgue_norm(&dg, e.q2)?;
    Ok(KatoPonceReport {
        numerator,
        denominator,
        ratio: (denominator > 0.0).then(|| numerator / denominator),
    })
}

/// `<g, [D, f] h>` with `D` given as a matrix.
pub fn commutator_pairing_direct(f: &[f64], d: &Mat, g: &Field, h: &Field) -> Result<Complex64> {
    g.grid().ensure_same(h.grid())?;
    let c = commutator_matrix(f, d)?;
    // [D, f] = -[f, D]
    let ch = Field::new(*h.grid(), apply_real(&c, h.samples()))?.scale(-1.0);
    inner_product(g, &ch)
}

/// `[H, F] u = H (f u) - f (H u)`.
pub fn apply_hamiltonian_commutator(m: &Mat, f: &[f64], u: &[Complex64]) -> Vec<Complex64> {
    let fu: Vec<Complex64> = u.iter().zip(f).map(|(z, &w)| z * w).collect();
    let hfu = apply_real(m, &fu);
    let hu = apply_real(m, u);
    hfu.iter()
        .zip(&hu)
        .zip(f)
        .map(|((a, b), &w)| a - b * w)
        .collect()
}

/// Edge-panel share above which the resolvent pairing integral is rejected.
pub const PAIRING_EDGE_TOL: f64 = 1e-7;

/// `<g, [H^{1/2}, f] h> = C_0(1) int lambda^{1/2} <R g, [H, f] R h> d lambda`
/// with `R = (lambda + H)^{-1}`, using shifted solves only.
pub fn commutator_via_balakrishnan(
    f: &[f64],
    op: &EllipticOperator,
    g: &Field,
    h: &Field,
    rule: &QuadratureRule,
) -> Result<Complex64> {
    op.grid.ensure_same(g.grid())?;
    op.grid.ensure_same(h.grid())?;
    let n = op.grid.n();
    if f.len() != n {
        return Err(LabError::GridMismatch("multiplier length differs from the grid".into()));
    }
    let rhs = Mat::from_fn(n, 4, |i, c| match c {
        0 => g.samples()[i].re,
        1 => g.samples()[i].im,
        2 => h.samples()[i].re,
        _ => h.samples()[i].im,
    });
    let contributions = rule
        .nodes()
        .iter()
        .map(|&(y, w)| -> Result<Complex64> {
            let lam = y.exp();
            let x = solve_shifted(&op.matrix, lam, &rhs)?;
            let rg: Vec<Complex64> = (0..n).map(|i| Complex64::new(x[(i, 0)], x[(i, 1)])).collect();
            let rh: Vec<Complex64> = (0..n).map(|i| Complex64::new(x[(i, 2)], x[(i, 3)])).collect();
            let crh = apply_hamiltonian_commutator(&op.matrix, f, &rh);
            let pairing: Complex64 = rg.iter().zip(&crh).map(|(a, b)| a * b.conj()).sum::<Complex64>() * op.grid.spacing();
            Ok(pairing * (w * lam.powf(1.5)))
        })
        .collect::<Result<Vec<_>>>()?;
    let total: Complex64 = contributions.iter().sum();
    let mass: f64 = contributions.iter().map(|c| c.norm()).sum();
    let m = rule.panel_order();
    let k = contributions.len();
    let lower: Complex64 = contributions[..m].iter().sum();
    let upper: Complex64 = contributions[k - m..].iter().sum();
    let edge = lower.norm().max(upper.norm());
    if mass > 0.0 && edge > PAIRING_EDGE_TOL * mass {
        return Err(LabError::Quadrature(format!(
            "resolvent pairing edge panel carries {:.3e} of the integrand mass",
            edge / mass
        )));
    }
    Ok(total * balakrishnan_constant(1.0))
}

/// `[H, F] u` by the discrete Leibniz rule
/// `-(1/h^2) [ b_i (f_{i+1} - f_i) u_{i+1} - b_{i-1} (f_i - f_{i-1}) u_{i-1} ]`
/// with bond values `b_i = (a_i + a_{i+1}) / 2`.
pub fn leibniz_expansion(grid: &Grid, a: &[f64], f: &[f64], u: &[Complex64]) -> Vec<Complex64> {
    let n = grid.n();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let b = |i: usize| 0.5 * (a[i] + a[(i + 1) % n]);
    (0..n)
        .map(|i| {
            let ip = (i + 1) % n;
            let im = (i + n - 1) % n;
            -(u[ip] * (b(i) * (f[ip] - f[i])) - u[im] * (b(im) * (f[i] - f[im]))) * inv_h2
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyEstimateReport {
    pub j: i32,
    /// `||[D, P_j f] P_{<=j}||`.
    pub lhs6: f64,
    /// `2^j ||P_j f||_inf`.
    pub rhs6: f64,
    /// `||P_{>j} [D, P_j f] P_{>j}||`.
    pub lhs7: f64,
    pub rhs7: f64,
}

impl KeyEstimateReport {
    pub fn ratios(&self) -> (f64, f64) {
        (self.lhs6 / self.rhs6, self.lhs7 / self.rhs7)
    }
}

/// Localized commutator bounds for band `j`; `None` when `P_j f` vanishes.
pub fn verify_dyadic_key_estimate(bank: &DyadicBank, f: &Field, d: &Mat, j: i32) -> Result<Option<KeyEstimateReport>> {
    let pjf = bank.project(f, Band::Annulus(j))?;
    let sup = pjf.max_abs();
    if sup <= 1e-13 * f.max_abs().max(f64::MIN_POSITIVE) {
        return Ok(None);
    }
    let g = bank.grid();
    let scale = 2f64.powi(-j);
    let low: Vec<f64> = g.frequencies().iter().map(|&xi| chi0(scale * xi)).collect();
    let high: Vec<f64> = low.iter().map(|v| 1.0 - v).collect();
    let p_low = multiplier_matrix(g, &low);
    let p_high = multiplier_matrix(g, &high);
    // [D, F] = -[F, D]
    let c = commutator_matrix(&real_samples(&pjf)?, d)? * -1.0;
    let lhs6 = operator_norm(&(&c * &p_low), OP_NORM_TOL)?;
    let lhs7 = operator_norm(&(&p_high * &c * &p_high), OP_NORM_TOL)?;
    let rhs = 2f64.powi(j) * sup;
    Ok(Some(KeyEstimateReport {
        j,
        lhs6,
        rhs6: rhs,
        lhs7,
        rhs7: rhs,
    }))
}

/// `||D_{A,V} - D_{A,0}|| / ||V||_{q,inf}`.
pub fn potential_difference_ratio(grid: Grid, coeff: &CoefficientFamily, pot: &PotentialSpec) -> Result<Option<f64>> {
    let with = EllipticOperator::from_families(grid, coeff, pot)?;
    let without = EllipticOperator::from_families(grid, coeff, &PotentialSpec::zero(pot.q))?;
    let d1 = square_root(&eigendecompose(&with)?)?;
    let d0 = square_root(&eigendecompose(&without)?)?;
    let norm = operator_norm(&(d1 - d0), OP_NORM_TOL)?;
    let v = with.pot.lorentz_norm;
    Ok((v > 0.0).then(|| norm / v))
}

/// `||[f(./R), D]||` for the free operator on `[-R L/2, R L/2)` at fixed spacing.
pub fn dilated_commutator_norms(f: impl Fn(f64) -> f64, length: f64, n: usize, factors: &[usize]) -> Result<Vec<f64>> {
    factors
        .iter()
        .map(|&r| {
            let g = Grid::new(n * r, length * r as f64)?;
            let d = square_root(&eigendecompose(&EllipticOperator::free_laplacian(g))?)?;
            let fr: Vec<f64> = g.positions().iter().map(|&x| f(x / r as f64)).collect();
            operator_norm(&commutator_matrix(&fr, &d)?, OP_NORM_TOL)
        })
        .collect()
}

/// `|x|` on `[-L/2, L/2)`, extended periodically: Lipschitz with unit slope, not C^1.
pub fn triangle_wave(length: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| {
        let t = x.rem_euclid(length);
        t.min(length - t)
    }
}

/// JSON record of one estimate evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub estimate_id: String,
    pub grid_n: usize,
    pub ratio: Option<f64>,
    pub bound_parts: Option<BoundParts>,
    pub seed: Option<u64>,
}

impl CommutatorReport {
    pub fn records(&self, estimate_id: &str, seed: Option<u64>) -> Vec<EstimateRecord> {
        self.grid_n
            .iter()
            .zip(&self.ratios)
            .zip(&self.bounds)
            .map(|((&n, &ratio), &parts)| EstimateRecord {
                estimate_id: estimate_id.to_string(),
                grid_n: n,
                ratio,
                bound_parts: Some(parts),
                seed,
            })
            .collect()
    }
}
