//! Dense linear algebra used throughout the lab.
//!
//! The symmetric eigensolver is a Householder reduction to tridiagonal form
//! followed by implicit-shift QL sweeps (the EISPACK `tred2`/`tql2` pair).
//! Shifted solves `(lambda + H) X = B` have a fast path for periodic
//! tridiagonal matrices, which is what the flux-form assembly produces.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, LabError, Result};
use crate::grid::{idft, Grid};

pub type Mat = DMatrix<f64>;

const MAX_QL_SWEEPS: usize = 60;

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending, eigenvectors
/// as orthonormal columns.
pub fn symmetric_eigen(m: &Mat) -> Result<(Vec<f64>, Mat)> {
    let n = m.nrows();
    if n != m.ncols() {
        return invalid(format!("eigensolver needs a square matrix, got {}x{}", n, m.ncols()));
    }
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    // row-major working copy
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = m[(i, j)];
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);

    // tql2 rotates columns of V; keep V^T so those become contiguous rows.
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            w[j * n + i] = v[i * n + j];
        }
    }
    tql2(n, &mut w, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = Mat::from_fn(n, n, |i, c| w[order[c] * n + i]);
    Ok((values, vectors))
}

fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let ix = |r: usize, c: usize| r * n + c;
    for j in 0..n {
        d[j] = v[ix(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[ix(i - 1, j)];
                v[ix(i, j)] = 0.0;
                v[ix(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[ix(j, i)] = f;
                g = e[j] + v[ix(j, j)] * f;
                for k in j + 1..i {
                    g += v[ix(k, j)] * d[k];
                    e[k] += v[ix(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[ix(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[ix(i - 1, j)];
                v[ix(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    // accumulate transformations
    for i in 0..n - 1 {
        v[ix(n - 1, i)] = v[ix(i, i)];
        v[ix(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[ix(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[ix(k, i + 1)] * v[ix(k, j)];
                }
                for k in 0..=i {
                    v[ix(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[ix(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[ix(n - 1, j)];
        v[ix(n - 1, j)] = 0.0;
    }
    v[ix(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal (d, e). `w` holds eigenvector rows.
fn tql2(n: usize, w: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_QL_SWEEPS {
                    return Err(LabError::EigenNoConvergence {
                        index: l,
                        iterations: sweeps - 1,
                        residual: e[l].abs(),
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = w.split_at_mut((i + 1) * n);
                    let row_i = &mut lo[i * n..];
                    let row_i1 = &mut hi[..n];
                    for (a, b) in row_i.iter_mut().zip(row_i1.iter_mut()) {
                        let t = *b;
                        *b = s * *a + c * t;
                        *a = c * *a - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// `V diag(g(lambda)) V^T` for an orthonormal eigenbasis `V`.
pub fn spectral_function(values: &[f64], vectors: &Mat, g: impl Fn(f64) -> f64) -> Mat {
    let n = values.len();
    let weights: Vec<f64> = values.iter().map(|&l| g(l)).collect();
    let mut scaled = vectors.clone();
    for (c, &wt) in weights.iter().enumerate().take(n) {
        scaled.column_mut(c).scale_mut(wt);
    }
    scaled * vectors.transpose()
}

/// Real matrix applied to a complex vector.
pub fn apply_real(m: &Mat, u: &[Complex64]) -> Vec<Complex64> {
    let re = DVector::from_iterator(u.len(), u.iter().map(|z| z.re));
    let im = DVector::from_iterator(u.len(), u.iter().map(|z| z.im));
    let mr = m * re;
    let mi = m * im;
    mr.iter().zip(mi.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect()
}

/// Transposed real matrix applied to a complex vector.
pub fn apply_real_transpose(m: &Mat, u: &[Complex64]) -> Vec<Complex64> {
    let re = DVector::from_iterator(u.len(), u.iter().map(|z| z.re));
    let im = DVector::from_iterator(u.len(), u.iter().map(|z| z.im));
    let mr = m.tr_mul(&re);
    let mi = m.tr_mul(&im);
    mr.iter().zip(mi.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect()
}

/// Largest eigenvalue magnitude of a symmetric matrix (its spectral norm).
pub fn symmetric_spectral_norm(m: &Mat) -> Result<f64> {
    let (vals, _) = symmetric_eigen(m)?;
    Ok(vals.iter().fold(0.0_f64, |a, v| a.max(v.abs())))
}

pub fn min_eigenvalue(m: &Mat) -> Result<f64> {
    let (vals, _) = symmetric_eigen(m)?;
    Ok(vals.first().copied().unwrap_or(0.0))
}

/// Largest singular value by power iteration on `M^T M`.
///
/// Start vector is fixed, so the result is deterministic. Converged when the
/// Rayleigh quotient changes by less than `tol` relative between sweeps.
pub fn largest_singular_value(m: &Mat, tol: f64, max_iter: usize) -> Result<f64> {
    if tol.is_nan() || tol <= 0.0 {
        return invalid(format!("power iteration tolerance must be positive, got {tol}"));
    }
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return Ok(0.0);
    }
    // deterministic, generic start: no exact orthogonality to any structured eigvector
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.754_877_666).sin());
    x /= x.norm();
    let mut estimate = 0.0;
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        let y = m * &x;
        let z = m.tr_mul(&y);
        let rq = x.dot(&z);
        let norm = z.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let sigma = rq.max(0.0).sqrt();
        change = (sigma - estimate).abs() / sigma.max(f64::MIN_POSITIVE);
        estimate = sigma;
        x = z / norm;
        if change <= tol {
            return Ok(estimate);
        }
    }
    Err(LabError::PowerIteration {
        iterations: max_iter,
        change,
    })
}

/// Real circulant matrix of an even Fourier symbol sampled in FFT order.
pub fn multiplier_matrix(grid: &Grid, symbol: &[f64]) -> Mat {
    let n = grid.n();
    debug_assert_eq!(symbol.len(), n);
    let hat: Vec<Complex64> = symbol.iter().map(|&s| Complex64::new(s, 0.0)).collect();
    let kernel = idft(&hat);
    Mat::from_fn(n, n, |i, k| kernel[(i + n - k) % n].re)
}

/// Periodic tridiagonal structure: diagonal and the bond couplings
/// `off[i] = m[i][i+1 mod n]`. `None` when any other entry is nonzero.
pub fn periodic_tridiagonal(m: &Mat) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = m.nrows();
    if n < 3 || m.ncols() != n {
        return None;
    }
    for i in 0..n {
        for j in 0..n {
            let dist = (i + n - j) % n;
            if dist != 0 && dist != 1 && dist != n - 1 && m[(i, j)] != 0.0 {
                return None;
            }
        }
    }
    let diag = (0..n).map(|i| m[(i, i)]).collect();
    let off: Vec<f64> = (0..n).map(|i| m[(i, (i + 1) % n)]).collect();
    for i in 0..n {
        if m[((i + 1) % n, i)] != off[i] {
            return None;
        }
    }
    Some((diag, off))
}

/// Factorization of a symmetric periodic tridiagonal system via
/// Sherman-Morrison on top of a Thomas sweep.
pub struct CyclicSolver {
    n: usize,
    sub: Vec<f64>,
    cp: Vec<f64>,
    denom: Vec<f64>,
    gamma: f64,
    corner: f64,
    z: Vec<f64>,
    z_factor: f64,
}

impl CyclicSolver {
    pub fn new(diag: &[f64], off: &[f64]) -> Result<Self> {
        let n = diag.len();
        if n < 3 || off.len() != n {
            return invalid("cyclic solver needs n >= 3 and matching bond couplings");
        }
        // corner couples rows 0 and n-1 through bond n-1
        let corner = off[n - 1];
        let gamma = -diag[0];
        if gamma == 0.0 {
            return Err(LabError::SingularSolve(0.0));
        }
        let mut bb = diag.to_vec();
        bb[0] = diag[0] - gamma;
        bb[n - 1] = diag[n - 1] - corner * corner / gamma;
        let mut sub = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for i in 1..n {
            sub[i] = off[i - 1];
        }
        for i in 0..n - 1 {
            sup[i] = off[i];
        }
        let mut cp = vec![0.0; n];
        let mut denom = vec![0.0; n];
        denom[0] = bb[0];
        for i in 0..n {
            if i > 0 {
                denom[i] = bb[i] - sub[i] * cp[i - 1];
            }
            if denom[i] == 0.0 || !denom[i].is_finite() {
                return Err(LabError::SingularSolve(0.0));
            }
            cp[i] = sup[i] / denom[i];
        }
        let mut solver = CyclicSolver {
            n,
            sub,
            cp,
            denom,
            gamma,
            corner,
            z: Vec::new(),
            z_factor: 0.0,
        };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = corner;
        let z = solver.thomas(&u);
        let z_factor = 1.0 + z[0] + corner * z[n - 1] / gamma;
        if z_factor == 0.0 {
            return Err(LabError::SingularSolve(0.0));
        }
        solver.z = z;
        solver.z_factor = z_factor;
        Ok(solver)
    }

    fn thomas(&self, r: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut dp = vec![0.0; n];
        dp[0] = r[0] / self.denom[0];
        for i in 1..n {
            dp[i] = (r[i] - self.sub[i] * dp[i - 1]) / self.denom[i];
        }
        let mut x = dp;
        for i in (0..n - 1).rev() {
            x[i] -= self.cp[i] * x[i + 1];
        }
        x
    }

    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = self.thomas(r);
        let fact = (x[0] + self.corner * x[n - 1] / self.gamma) / self.z_factor;
        for (xi, zi) in x.iter_mut().zip(&self.z) {
            *xi -= fact * zi;
        }
        x
    }
}

/// Solve `(lambda I + m) X = rhs`.
pub fn solve_shifted(m: &Mat, lambda: f64, rhs: &Mat) -> Result<Mat> {
    let n = m.nrows();
    if let Some((mut diag, off)) = periodic_tridiagonal(m) {
        diag.iter_mut().for_each(|d| *d += lambda);
        let solver = CyclicSolver::new(&diag, &off)?;
        let mut out = Mat::zeros(n, rhs.ncols());
        for c in 0..rhs.ncols() {
            let col: Vec<f64> = rhs.column(c).iter().copied().collect();
            let x = solver.solve(&col);
            out.column_mut(c).copy_from_slice(&x);
        }
        return Ok(out);
    }
    let shifted = m + Mat::identity(n, n) * lambda;
    shifted
        .lu()
        .solve(rhs)
        .ok_or(LabError::SingularSolve(lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(n: usize, seed: u64) -> Mat {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = Mat::from_fn(n, n, |_, _| next());
        (&a + a.transpose()) * 0.5
    }

    #[test]
    fn eigen_reconstructs_random_symmetric() {
        for &n in &[1usize, 2, 3, 7, 20, 50] {
            let a = random_symmetric(n, n as u64 + 3);
            let (vals, vecs) = symmetric_eigen(&a).unwrap();
            let recon = spectral_function(&vals, &vecs, |l| l);
            assert!((&recon - &a).norm() <= 1e-12 * a.norm().max(1.0), "n={n}");
            let gram = vecs.transpose() * &vecs;
            assert!((gram - Mat::identity(n, n)).norm() < 1e-12);
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eigen_handles_diagonal_and_repeated() {
        let a = Mat::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0, 1.0]));
        let (vals, _) = symmetric_eigen(&a).unwrap();
        assert_eq!(vals, vec![1.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn singular_value_examples() {
        let id = Mat::identity(3, 3);
        assert!((largest_singular_value(&id, 1e-12, 100).unwrap() - 1.0).abs() < 1e-12);
        let d = Mat::from_diagonal(&DVector::from_vec(vec![3.0, -4.0]));
        assert!((largest_singular_value(&d, 1e-13, 1000).unwrap() - 4.0).abs() < 1e-9);
        assert!(largest_singular_value(&d, 0.0, 10).is_err());
    }

    #[test]
    fn cyclic_solver_matches_dense() {
        let n = 9;
        let diag: Vec<f64> = (0..n).map(|i| 4.0 + 0.1 * i as f64).collect();
        let off: Vec<f64> = (0..n).map(|i| -1.0 - 0.05 * i as f64).collect();
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = diag[i];
            m[(i, (i + 1) % n)] = off[i];
            m[((i + 1) % n, i)] = off[i];
        }
        assert!(periodic_tridiagonal(&m).is_some());
        let rhs = Mat::from_fn(n, 2, |i, c| (i + c) as f64 - 3.0);
        let fast = solve_shifted(&m, 0.7, &rhs).unwrap();
        let dense = (&m + Mat::identity(n, n) * 0.7).lu().solve(&rhs).unwrap();
        assert!((fast - dense).norm() < 1e-12);
    }
}
