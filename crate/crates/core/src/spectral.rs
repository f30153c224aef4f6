//! Spectral calculus of the assembled Hamiltonian.
//!
//! Fractional powers are available two ways: directly from the
//! eigendecomposition, and through the resolvent integral
//! `H^{s/2} = C_0(s) int_0^inf lambda^{s/2-1} H (lambda + H)^{-1} d lambda`
//! evaluated with shifted linear solves only. The two paths share nothing
//! beyond the matrix, which is what makes their agreement a meaningful check.
//!
//! Eigenvectors are stored Euclidean-orthonormal. On a uniform grid the
//! h-weighted metric is `h I`, so `U = V / sqrt(h)` is the h-orthonormal
//! basis and every operator function `V g(Lambda) V^T` is unchanged.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::grid::{Field, Grid};
use crate::linalg::{
    apply_real, apply_real_transpose, min_eigenvalue, solve_shifted, spectral_function,
    symmetric_eigen, Mat,
};
use crate::operator::EllipticOperator;
use crate::quadrature::{balakrishnan_constant, QuadratureRule};

/// Relative tolerance below which negative eigenvalues are treated as zero.
pub const NONNEGATIVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat,
    pub spacing: f64,
}

/// Eigendecomposition of the assembled operator.
pub fn eigendecompose(op: &EllipticOperator) -> Result<SpectralData> {
    SpectralData::from_matrix(&op.matrix, op.grid.spacing())
}

impl SpectralData {
    pub fn from_matrix(m: &Mat, spacing: f64) -> Result<Self> {
        let (eigenvalues, eigenvectors) = symmetric_eigen(m)?;
        Ok(SpectralData {
            eigenvalues,
            eigenvectors,
            spacing,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Smallest eigenvalue above the clamping tolerance, if any.
    pub fn min_positive_eigenvalue(&self) -> Option<f64> {
        let tol = NONNEGATIVE_TOL * self.max_abs_eigenvalue();
        self.eigenvalues.iter().copied().find(|&l| l > tol)
    }

    /// Eigenvalues with round-off negatives clamped to zero; errors when a
    /// negative eigenvalue exceeds the tolerance.
    pub fn nonnegative_eigenvalues(&self) -> Result<Vec<f64>> {
        let tol = NONNEGATIVE_TOL * self.max_abs_eigenvalue();
        self.eigenvalues
            .iter()
            .map(|&l| {
                if l >= tol {
                    Ok(l)
                } else if l >= -tol {
                    Ok(0.0)
                } else {
                    Err(LabError::Assumption(format!(
                        "operator has eigenvalue {l:e} below zero (non-negativity violated)"
                    )))
                }
            })
            .collect()
    }

    /// `g(H)` as a matrix.
    pub fn function(&self, g: impl Fn(f64) -> f64) -> Mat {
        spectral_function(&self.eigenvalues, &self.eigenvectors, g)
    }

    /// `g(H) f` without forming the matrix.
    pub fn apply(&self, f: &Field, g: impl Fn(f64) -> Complex64) -> Result<Field> {
        if f.grid().n() != self.dim() {
            return Err(LabError::GridMismatch(format!(
                "field of {} samples vs operator of dimension {}",
                f.grid().n(),
                self.dim()
            )));
        }
        let mut c = apply_real_transpose(&self.eigenvectors, f.samples());
        for (ck, &l) in c.iter_mut().zip(&self.eigenvalues) {
            *ck *= g(l);
        }
        Field::new(*f.grid(), apply_real(&self.eigenvectors, &c))
    }

    /// Coefficients `V^T f` of a field in the eigenbasis.
    pub fn coefficients(&self, f: &Field) -> Vec<Complex64> {
        apply_real_transpose(&self.eigenvectors, f.samples())
    }

    /// `|| V diag(lambda) V^T - H ||_F / ||H||_F`.
    pub fn reconstruction_error(&self, h: &Mat) -> f64 {
        let r = self.function(|l| l);
        (r - h).norm() / h.norm().max(f64::MIN_POSITIVE)
    }

    /// `|| U^T (h I) U - I ||_F` with `U = V / sqrt(h)`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.dim();
        let gram = self.eigenvectors.transpose() * &self.eigenvectors;
        (gram - Mat::identity(n, n)).norm()
    }
}

fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s < 2.0 {
        Ok(())
    } else {
        invalid(format!("fractional order s must lie in (0,2), got {s}"))
    }
}

/// `H^{s/2}` by the spectral path, `0^{s/2} = 0`.
pub fn frac_power_spectral(spec: &SpectralData, s: f64) -> Result<Mat> {
    check_order(s)?;
    let vals = spec.nonnegative_eigenvalues()?;
    let m = spectral_function(&vals, &spec.eigenvectors, |l| {
        if l == 0.0 {
            0.0
        } else {
            l.powf(0.5 * s)
        }
    });
    // exact symmetry, so commutators with real multipliers are exactly skew
    Ok((&m + m.transpose()) * 0.5)
}

/// `D = H^{1/2}`.
pub fn square_root(spec: &SpectralData) -> Result<Mat> {
    frac_power_spectral(spec, 1.0)
}

#[derive(Debug, Clone)]
pub struct BalakrishnanResult {
    pub matrix: Mat,
    pub solves: usize,
    /// Set when the rule's window looks too narrow for the matrix's spectrum.
    pub range_warning: Option<String>,
}

/// `H^{s/2}` through the resolvent integral, one shifted solve per node.
pub fn frac_power_balakrishnan(h: &Mat, s: f64, rule: &QuadratureRule) -> Result<BalakrishnanResult> {
    check_order(s)?;
    let n = h.nrows();
    let c0 = balakrishnan_constant(s);
    let mut acc = Mat::zeros(n, n);
    for &(y, w) in rule.nodes() {
        let lam = y.exp();
        // (lambda + H)^{-1} H
        let x = solve_shifted(h, lam, h)?;
        acc += x * (w * (0.5 * s * y).exp());
    }
    acc *= c0;
    // symmetrize away solve round-off
    let matrix = (&acc + acc.transpose()) * 0.5;
    let gersh = (0..n)
        .map(|i| h.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let (_, hi) = rule.lambda_range();
    let range_warning = (hi < 1e3 * gersh).then(|| {
        format!("rule upper end {hi:e} below 1e3 x Gershgorin bound {gersh:e}")
    });
    Ok(BalakrishnanResult {
        matrix,
        solves: rule.count(),
        range_warning,
    })
}

/// `(lambda + H)^{-1} f`.
pub fn resolvent_apply(spec: &SpectralData, lambda: f64, f: &Field) -> Result<Field> {
    if !(lambda > 0.0) {
        return invalid(format!("resolvent parameter must be positive, got {lambda}"));
    }
    spec.apply(f, |l| Complex64::new(1.0 / (lambda + l), 0.0))
}

/// Periodic centered difference `(u_{i+1} - u_{i-1}) / 2h`.
pub fn centered_gradient(f: &Field) -> Field {
    let n = f.grid().n();
    let inv = 0.5 / f.grid().spacing();
    let s = f.samples();
    let out = (0..n).map(|i| (s[(i + 1) % n] - s[(i + n - 1) % n]) * inv).collect();
    Field::new(*f.grid(), out).expect("same length")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YosidaRow {
    pub j: f64,
    pub norm1: f64,
    pub norm2: f64,
}

/// `||j^{1/2} grad (j - Delta_h)^{-1} f||` and `||grad grad (j - Delta_h)^{-1} f||`
/// for each `j`. `spec` must be the decomposition of the free Laplacian.
pub fn yosida_decay_report(spec: &SpectralData, f: &Field, j_list: &[f64]) -> Result<Vec<YosidaRow>> {
    j_list
        .iter()
        .map(|&j| {
            let r = resolvent_apply(spec, j, f)?;
            let g = centered_gradient(&r);
            let gg = centered_gradient(&g);
            Ok(YosidaRow {
                j,
                norm1: j.sqrt() * g.l2_norm(),
                norm2: gg.l2_norm(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoewnerReport {
    pub s: f64,
    /// Smallest eigenvalue of `m2^s - m1^s`.
    pub min_gap_eig: f64,
    /// `||m2^s||`.
    pub scale: f64,
    pub pass: bool,
    /// Smallest eigenvalue of `m1^{-1} - m2^{-1}`, when `m1` is invertible.
    pub inverse_gap_eig: Option<f64>,
    /// `||m1^{-1}||`.
    pub inverse_scale: Option<f64>,
    pub inverse_pass: Option<bool>,
}

fn psd_power(m: &Mat, s: f64) -> Result<Mat> {
    let spec = SpectralData::from_matrix(m, 1.0)?;
    let vals = spec.nonnegative_eigenvalues()?;
    Ok(spectral_function(&vals, &spec.eigenvectors, |l| {
        if l == 0.0 {
            0.0
        } else {
            l.powf(s)
        }
    }))
}

/// Operator monotonicity of `t -> t^s` on the pair `m1 <= m2`.
pub fn loewner_check(m1: &Mat, m2: &Mat, s: f64) -> Result<LoewnerReport> {
    if !(s > 0.0 && s <= 1.0) {
        return invalid(format!("Loewner exponent must lie in (0,1], got {s}"));
    }
    if m1.shape() != m2.shape() || m1.nrows() != m1.ncols() {
        return invalid("Loewner pair must be square matrices of equal size");
    }
    let order_gap = min_eigenvalue(&(m2 - m1))?;
    if order_gap < -1e-10 {
        return Err(LabError::InvalidInput(format!(
            "pair is not ordered: min eig(m2 - m1) = {order_gap:e}"
        )));
    }
    let p1 = psd_power(m1, s)?;
    let p2 = psd_power(m2, s)?;
    let min_gap_eig = min_eigenvalue(&(&p2 - &p1))?;
    let scale = crate::linalg::symmetric_spectral_norm(&p2)?;
    let pass = min_gap_eig >= -1e-9 * scale.max(f64::MIN_POSITIVE);

    let spec1 = SpectralData::from_matrix(m1, 1.0)?;
    let lo1 = spec1.eigenvalues[0];
    let hi1 = spec1.max_abs_eigenvalue();
    let (inverse_gap_eig, inverse_scale, inverse_pass) = if lo1 > 1e-12 * hi1.max(f64::MIN_POSITIVE) {
        let inv1 = spec1.function(|l| 1.0 / l);
        let spec2 = SpectralData::from_matrix(m2, 1.0)?;
        let inv2 = spec2.function(|l| 1.0 / l);
        let gap = min_eigenvalue(&(&inv1 - &inv2))?;
        let inv_scale = 1.0 / lo1;
        (Some(gap), Some(inv_scale), Some(gap >= -1e-9 * inv_scale))
    } else {
        (None, None, None)
    };
    Ok(LoewnerReport {
        s,
        min_gap_eig,
        scale,
        pass,
        inverse_gap_eig,
        inverse_scale,
        inverse_pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedResolventReport {
    pub sigma: f64,
    /// `( int ||lambda^{sigma-3/4} H^{1/4} (lambda+H)^{-sigma} f||^2 d lambda )^{1/2}`.
    pub lhs: f64,
    /// `c(sigma) ||f||`.
    pub rhs: f64,
    /// `c(sigma)^2 = int lambda^{2 sigma - 3/2} (1+lambda)^{-2 sigma} d lambda`.
    pub constant_sq: f64,
    pub pass: bool,
}

/// Relative size above which an edge panel signals a truncated integral.
pub const EDGE_PANEL_TOL: f64 = 1e-8;

/// Square-function bound for the weighted resolvent family, with the matrix
/// powers taken spectrally and only the `lambda` integral done by quadrature.
pub fn weighted_resolvent_bound(
    spec: &SpectralData,
    f: &Field,
    sigma: f64,
    rule: &QuadratureRule,
) -> Result<WeightedResolventReport> {
    if !(sigma > 0.25 && sigma <= 1.0) {
        return invalid(format!("sigma must lie in (1/4, 1], got {sigma}"));
    }
    let vals = spec.nonnegative_eigenvalues()?;
    let coeffs = spec.coefficients(f);
    let weights: Vec<f64> = coeffs.iter().map(|c| spec.spacing * c.norm_sqr()).collect();
    let integrand = |lam: f64| -> f64 {
        vals.iter()
            .zip(&weights)
            .filter(|(&mu, _)| mu > 0.0)
            .map(|(&mu, &w)| w * lam.powf(2.0 * sigma - 1.5) * mu.sqrt() * (lam + mu).powf(-2.0 * sigma))
            .sum()
    };
    let scalar = |lam: f64| lam.powf(2.0 * sigma - 1.5) * (1.0 + lam).powf(-2.0 * sigma);

    let lhs_sq = rule.integrate_lambda(integrand);
    let constant_sq = rule.integrate_lambda(scalar);
    for (name, total, edges) in [
        ("square function", lhs_sq, rule.edge_panels_lambda(integrand)),
        ("bound constant", constant_sq, rule.edge_panels_lambda(scalar)),
    ] {
        let worst = edges.0.abs().max(edges.1.abs());
        if total > 0.0 && worst > EDGE_PANEL_TOL * total {
            return Err(LabError::Quadrature(format!(
                "{name}: edge panel carries {:.3e} of the integral",
                worst / total
            )));
        }
    }
    let lhs = lhs_sq.max(0.0).sqrt();
    let rhs = constant_sq.sqrt() * f.l2_norm();
    Ok(WeightedResolventReport {
        sigma,
        lhs,
        rhs,
        constant_sq,
        pass: lhs <= rhs * (1.0 + 1e-6),
    })
}

/// Window `[lo, hi]` spanning the positive spectrum together with `lambda = 1`.
pub fn spectral_window(spec: &SpectralData) -> (f64, f64) {
    let hi = spec.max_abs_eigenvalue().max(1.0);
    let lo = spec.min_positive_eigenvalue().unwrap_or(1.0).min(1.0);
    (lo, hi)
}

/// Grid-free helper used by the Yosida example: the free Laplacian's spectrum.
pub fn free_laplacian_spectrum(grid: Grid) -> Result<SpectralData> {
    eigendecompose(&EllipticOperator::free_laplacian(grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{CoefficientField, PotentialField};
    use nalgebra::DVector;

    fn four_point(v: f64) -> EllipticOperator {
        let g = Grid::new(4, 4.0).unwrap();
        let c = CoefficientField::new(&g, vec![1.0; 4]).unwrap();
        let p = PotentialField::from_values(&g, vec![v; 4], 4.0, 0.5).unwrap();
        EllipticOperator::assemble(c, p, g).unwrap()
    }

    #[test]
    fn four_point_spectrum() {
        let spec = eigendecompose(&four_point(0.0)).unwrap();
        let expected = [0.0, 2.0, 2.0, 4.0];
        for (a, b) in spec.eigenvalues.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        let shifted = eigendecompose(&four_point(5.0)).unwrap();
        for (a, b) in shifted.eigenvalues.iter().zip(expected) {
            assert!((a - b - 5.0).abs() < 1e-13);
        }
    }

    #[test]
    fn square_root_of_four_point() {
        let op = four_point(0.0);
        let spec = eigendecompose(&op).unwrap();
        let d = square_root(&spec).unwrap();
        let dspec = SpectralData::from_matrix(&d, 1.0).unwrap();
        let expected = [0.0, 2f64.sqrt(), 2f64.sqrt(), 2.0];
        for (a, b) in dspec.eigenvalues.iter().zip(expected) {
            assert!((a - b).abs() < 1e-13);
        }
        let err = (&d * &d - &op.matrix).norm() / op.matrix.norm();
        assert!(err <= 1e-10);
        let id = SpectralData::from_matrix(&Mat::identity(5, 5), 1.0).unwrap();
        let p = frac_power_spectral(&id, 0.7).unwrap();
        assert!((p - Mat::identity(5, 5)).norm() < 1e-14);
        assert!(frac_power_spectral(&id, 2.0).is_err());
    }

    #[test]
    fn two_paths_agree_on_four_point() {
        let op = four_point(0.0);
        let spec = eigendecompose(&op).unwrap();
        let direct = square_root(&spec).unwrap();
        let rule = QuadratureRule::for_fractional_power(2.0, 4.0, 1.0, 400).unwrap();
        let quad = frac_power_balakrishnan(&op.matrix, 1.0, &rule).unwrap();
        let err = crate::linalg::symmetric_spectral_norm(&(&quad.matrix - &direct)).unwrap()
            / crate::linalg::symmetric_spectral_norm(&direct).unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn negative_spectrum_is_rejected() {
        let m = Mat::from_diagonal(&DVector::from_vec(vec![-1.0, 2.0]));
        let spec = SpectralData::from_matrix(&m, 1.0).unwrap();
        assert!(matches!(frac_power_spectral(&spec, 1.0), Err(LabError::Assumption(_))));
    }

    #[test]
    fn resolvent_examples() {
        let g = Grid::new(8, 8.0).unwrap();
        let id = SpectralData::from_matrix(&Mat::identity(8, 8), 1.0).unwrap();
        let f = Field::from_real_fn(g, |x| x.sin() + 0.2);
        let r = resolvent_apply(&id, 1.0, &f).unwrap();
        assert!(r.sub(&f.scale(0.5)).unwrap().max_abs() < 1e-14);
        assert!(resolvent_apply(&id, 0.0, &f).is_err());

        let spec = eigendecompose(&four_point(0.0)).unwrap();
        let g4 = Grid::new(4, 4.0).unwrap();
        let f = Field::from_real(g4, &[1.0, -2.0, 0.5, 3.0]).unwrap();
        let big = 1e8;
        let r = resolvent_apply(&spec, big, &f).unwrap().scale(big);
        assert!(r.sub(&f).unwrap().max_abs() < 1e-6);
        // eigenvector of eigenvalue 2: (1, 0, -1, 0)
        let e = Field::from_real(g4, &[1.0, 0.0, -1.0, 0.0]).unwrap();
        let r = resolvent_apply(&spec, 2.0, &e).unwrap();
        assert!(r.sub(&e.scale(0.25)).unwrap().max_abs() < 1e-14);
        // contraction bound
        let r = resolvent_apply(&spec, 0.3, &f).unwrap();
        assert!(r.l2_norm() <= f.l2_norm() / 0.3 + 1e-12);
    }

    #[test]
    fn yosida_examples() {
        let g = Grid::new(64, 6.4).unwrap();
        let spec = free_laplacian_spectrum(g).unwrap();
        let one = Field::constant(g, Complex64::new(1.0, 0.0));
        for row in yosida_decay_report(&spec, &one, &[1.0, 10.0, 1e6]).unwrap() {
            assert!(row.norm1 < 1e-12 && row.norm2 < 1e-12);
        }
        let f = Field::from_real_fn(g, |x| (3.0 * x).sin() + (x * 7.0).cos() * 0.5 + 0.3);
        let norm = f.l2_norm();
        let rows = yosida_decay_report(&spec, &f, &[1e12]).unwrap();
        assert!(rows[0].norm1 <= 1e-4 * norm && rows[0].norm2 <= 1e-9 * norm);
        let rho = spec.max_abs_eigenvalue();
        let j = 10.0 * rho;
        let rows = yosida_decay_report(&spec, &f, &[j, 2.0 * j]).unwrap();
        let ratio = rows[1].norm2 / rows[0].norm2;
        assert!((ratio - 0.5).abs() <= 0.05, "{ratio}");
        assert!(rows[1].norm1 <= rows[0].norm1);
    }

    #[test]
    fn loewner_examples() {
        let m1 = Mat::identity(2, 2);
        let m2 = Mat::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let rep = loewner_check(&m1, &m2, 0.5).unwrap();
        assert!((rep.min_gap_eig - 1.0).abs() < 1e-13 && rep.pass);
        assert_eq!(rep.inverse_pass, Some(true));
        let same = loewner_check(&m2, &m2, 0.25).unwrap();
        assert!(same.min_gap_eig.abs() < 1e-13 && same.pass);
        assert!(loewner_check(&m2, &m1, 0.5).is_err());
    }

    #[test]
    fn weighted_resolvent_identity_case() {
        let g = Grid::new(8, 8.0).unwrap();
        let id = SpectralData::from_matrix(&Mat::identity(8, 8), 1.0).unwrap();
        let f = Field::from_real_fn(g, |x| (0.3 * x).cos());
        let f = f.scale(1.0 / f.l2_norm());
        for sigma in [0.3, 0.5, 1.0] {
            let rule = QuadratureRule::balanced(1.0, 1.0, 2.0 * sigma - 0.5, 0.5, 4000).unwrap();
            let rep = weighted_resolvent_bound(&id, &f, sigma, &rule).unwrap();
            assert!((rep.lhs - rep.rhs).abs() < 1e-9, "{rep:?}");
            assert!(rep.pass);
        }
    }
}
