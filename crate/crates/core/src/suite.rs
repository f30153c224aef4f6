//! Seeded measurement suites shared by `verify` and the test harnesses.
//!
//! Each function returns raw measurements; callers decide what passes.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::besov::{japanese_weight, log_grid, second_difference_integrand};
use crate::commutator::{case1_operator, commutator_pairing_direct, commutator_via_balakrishnan, prop2_family, FamilyReport, Ladder};
use crate::error::Result;
use crate::evolve::{
    certificate_constant, evolve, gaussian, picard_oracle, rescaling_scan, strang_to, threshold_certificate, BlowupOde,
    Certificate, InequalityReport, Propagator, RescalingScan, SimulationConfig, Status,
};
use crate::grid::{Field, Grid};
use crate::linalg::{symmetric_spectral_norm, Mat};
use crate::operator::{CoefficientFamily, EllipticOperator, PotentialFamily, PotentialSpec};
use crate::par;
use crate::quadrature::{scalar_fractional_power, QuadratureRule};
use crate::random::{band_limited_complex, band_limited_real, trial_rng};
use crate::spectral::{
    eigendecompose, frac_power_balakrishnan, frac_power_spectral, loewner_check, square_root, spectral_window,
    weighted_resolvent_bound, LoewnerReport, SpectralData, WeightedResolventReport,
};

/// Rough Lipschitz metric plus a weak-`L^4` singular part and smooth bounded noise.
pub fn rough_family(seed: u64) -> (CoefficientFamily, PotentialSpec) {
    let mut r = trial_rng(seed, 0);
    let coeff = CoefficientFamily::RandomLipschitz {
        mean: 1.0,
        amplitude: r.random_range(0.2..0.5),
        knots: r.random_range(5..12),
        seed: r.random(),
    };
    let pot = PotentialSpec {
        q: 4.0,
        theta: 0.5,
        singular: PotentialFamily::InversePower {
            strength: r.random_range(0.2..1.0),
            cap: 4.0,
        },
        bounded: PotentialFamily::Noise {
            offset: 0.5,
            amplitude: r.random_range(0.1..0.4),
            modes: 4,
            seed: r.random(),
        },
    };
    (coeff, pot)
}

pub fn rough_operator(seed: u64, n: usize, length: f64) -> Result<EllipticOperator> {
    let (c, p) = rough_family(seed);
    EllipticOperator::from_families(Grid::new(n, length)?, &c, &p)
}

/// Sine metric `1 + 0.5 sin(2 pi x / L)` without potential.
pub fn sine_metric() -> CoefficientFamily {
    CoefficientFamily::Sinusoidal {
        mean: 1.0,
        amplitude: 0.5,
        periods: 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossPath {
    pub rel_error: f64,
    pub rel_error_doubled: f64,
}

fn rel_spectral_error(a: &Mat, b: &Mat) -> Result<f64> {
    Ok(symmetric_spectral_norm(&(a - b))? / symmetric_spectral_norm(b)?)
}

/// Spectral against resolvent-integral `H^{s/2}` at `nodes` and `2 nodes`.
pub fn fracpow_cross_path(op: &EllipticOperator, s: f64, nodes: usize) -> Result<CrossPath> {
    let spec = eigendecompose(op)?;
    let direct = frac_power_spectral(&spec, s)?;
    let (lo, hi) = spectral_window(&spec);
    let err = |count: usize| -> Result<f64> {
        let rule = QuadratureRule::for_fractional_power(lo, hi, s, count)?;
        rel_spectral_error(&frac_power_balakrishnan(&op.matrix, s, &rule)?.matrix, &direct)
    };
    Ok(CrossPath {
        rel_error: err(nodes)?,
        rel_error_doubled: err(2 * nodes)?,
    })
}

pub fn cross_path_suite(count: usize, n: usize, length: f64, nodes: usize, seed: u64) -> Result<Vec<CrossPath>> {
    par::map_indexed(count, |k| fracpow_cross_path(&rough_operator(seed + k as u64, n, length)?, 1.0, nodes))
        .into_iter()
        .collect()
}

/// `||D^2 - H||_F / ||H||_F`.
pub fn square_identity_error(op: &EllipticOperator) -> Result<f64> {
    let d = square_root(&eigendecompose(op)?)?;
    Ok((&d * &d - &op.matrix).norm() / op.matrix.norm())
}

/// Relative errors of `x^{1/2}` through the scalar resolvent integral.
pub fn scalar_balakrishnan_errors(xs: &[f64], nodes: usize) -> Result<Vec<f64>> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(0.0, f64::max);
    let rule = QuadratureRule::for_fractional_power(lo, hi, 1.0, nodes)?;
    Ok(xs
        .iter()
        .map(|&x| (scalar_fractional_power(x, 1.0, &rule) - x.sqrt()).abs() / x.sqrt())
        .collect())
}

/// Nodes used for the weighted resolvent integrals.
pub const RESOLVENT_NODES: usize = 4000;

pub fn resolvent_rule(lo: f64, hi: f64, sigma: f64) -> Result<QuadratureRule> {
    QuadratureRule::balanced(lo, hi, 2.0 * sigma - 0.5, 0.5, RESOLVENT_NODES)
}

/// Seeded cases of the weighted resolvent square-function bound.
pub fn weighted_resolvent_suite(cases: usize, sigmas: &[f64], seed: u64) -> Result<Vec<WeightedResolventReport>> {
    let per_case = par::map_indexed(cases, |k| -> Result<Vec<WeightedResolventReport>> {
        let op = rough_operator(seed + k as u64, 32, 8.0)?;
        let spec = eigendecompose(&op)?;
        let f = band_limited_complex(&mut trial_rng(seed, k), op.grid);
        let (lo, hi) = spectral_window(&spec);
        sigmas
            .iter()
            .map(|&sigma| weighted_resolvent_bound(&spec, &f, sigma, &resolvent_rule(lo, hi, sigma)?))
            .collect()
    });
    Ok(per_case.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
}

fn random_matrix<R: Rng>(r: &mut R, n: usize, m: usize) -> Mat {
    DMatrix::from_fn(n, m, |_, _| r.random_range(-1.0..1.0))
}

/// Pair `A1 <= A2` with `A1 = X X^T + eps I` and `A2 = A1 + Y Y^T`; the two
/// do not commute for generic `X`, `Y`.
pub fn loewner_pair(seed: u64, index: usize) -> (Mat, Mat) {
    let mut r = trial_rng(seed, index);
    let n = r.random_range(3..9);
    let x = random_matrix(&mut r, n, n);
    let rank = r.random_range(1..=n);
    let y = random_matrix(&mut r, n, rank);
    let a1 = &x * x.transpose() + Mat::identity(n, n) * 0.05;
    let a2 = &a1 + &y * y.transpose();
    (a1, a2)
}

pub fn loewner_suite(pairs: usize, exponents: &[f64], seed: u64) -> Result<Vec<LoewnerReport>> {
    let out = par::map_indexed(pairs, |k| -> Result<Vec<LoewnerReport>> {
        let (a1, a2) = loewner_pair(seed, k);
        exponents.iter().map(|&s| loewner_check(&a1, &a2, s)).collect()
    });
    Ok(out.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairingCheck {
    pub difference: f64,
    pub scale: f64,
}

/// Nodes for the commutator pairing integral.
pub const PAIRING_NODES: usize = 800;

/// Direct `<g, [D, f] h>` against the resolvent integral on seeded triples.
pub fn commutator_identity_suite(triples: usize, n: usize, seed: u64) -> Result<Vec<PairingCheck>> {
    let (coeff, pot) = rough_family(seed);
    let (op, d) = case1_operator(Grid::new(n, 16.0)?, &coeff, &pot)?;
    let spec = eigendecompose(&op)?;
    let (lo, hi) = spectral_window(&spec);
    let rule = QuadratureRule::balanced(lo, hi, 0.5, 0.5, PAIRING_NODES)?;
    let dnorm = hi.sqrt();
    par::map_indexed(triples, |k| -> Result<PairingCheck> {
        let mut r = trial_rng(seed, k);
        let f = band_limited_real(&mut r, op.grid).real_parts();
        let g = band_limited_complex(&mut r, op.grid);
        let h = band_limited_complex(&mut r, op.grid);
        let direct = commutator_pairing_direct(&f, &d, &g, &h)?;
        let quad = commutator_via_balakrishnan(&f, &op, &g, &h, &rule)?;
        let fmax = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(PairingCheck {
            difference: (direct - quad).norm(),
            scale: dnorm * fmax * g.l2_norm() * h.l2_norm(),
        })
    })
    .into_iter()
    .collect()
}

/// First-case commutator family on the rough operator of `seed`.
pub fn commutator_stability(ladder: &Ladder, trials: usize, seed: u64) -> Result<FamilyReport> {
    let (coeff, pot) = rough_family(seed);
    prop2_family(&coeff, &pot, ladder, trials, ladder.sizes[0] / 4, seed)
}

/// Commutator norm of a constant multiplier with `V = 0`.
pub fn constant_commutator_norm(n: usize, length: f64) -> Result<f64> {
    let ladder = Ladder::new(length, vec![n])?;
    let rep = crate::commutator::verify_prop2_case1(|_| 1.3, &sine_metric(), &PotentialSpec::zero(4.0), &ladder)?;
    Ok(rep.op_norm())
}

/// `min_t (integrand(t) - t/8)` over `t` in `[1, L/4]` for `<x>`.
pub fn second_difference_margin(n: usize, length: f64, points: usize) -> f64 {
    let g = Grid::new(n, length).expect("valid grid");
    let w = japanese_weight(g, 1.0);
    log_grid(1.0, 0.25 * length, points)
        .into_iter()
        .map(|t| second_difference_integrand(&w, t) - t / 8.0)
        .fold(f64::INFINITY, f64::min)
}

/// Seeded ODE parameters above the equilibrium.
pub fn ode_case(seed: u64, index: usize) -> BlowupOde {
    let mut r = trial_rng(seed, index);
    let a: f64 = r.random_range(0.5..2.0);
    let b: f64 = r.random_range(0.5..2.0);
    let q: f64 = r.random_range(1.5..3.0);
    let eq = (a / b).powf(1.0 / (q - 1.0));
    BlowupOde::new(a, b, q, eq * r.random_range(1.2..3.0)).expect("positive parameters")
}

/// Largest `|closed form - RK4|` on `[0, 0.9 t_bound]`.
pub fn ode_max_error(ode: &BlowupOde, steps: usize) -> Result<f64> {
    let t_end = 0.9 * ode.t_bound().unwrap_or(5.0 / ode.a);
    ode.rk4(t_end, steps)
        .into_iter()
        .map(|(t, f)| Ok((ode.closed_form(t)? - f).abs()))
        .try_fold(0.0f64, |m, e: Result<f64>| Ok(m.max(e?)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupRun {
    pub factor: f64,
    pub amplitude: f64,
    pub certificate: Certificate,
    pub status: Status,
    pub steps: usize,
    pub inequality: InequalityReport,
}

/// Operator, weight and commutator constant shared by every amplitude of a
/// threshold sweep over Gaussian data of fixed width.
#[derive(Debug, Clone)]
pub struct ThresholdSetup {
    pub op: EllipticOperator,
    pub weight: Field,
    pub shape: Field,
    pub p: f64,
    pub weight_a: f64,
    pub c_emp: f64,
    /// Amplitude at which the certificate's two sides meet.
    pub threshold_amplitude: f64,
}

impl ThresholdSetup {
    /// The commutator constant comes from a `trials`-member first-case family
    /// on the same grid.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: Grid,
        coeff: &CoefficientFamily,
        pot: &PotentialSpec,
        p: f64,
        weight_a: f64,
        width: f64,
        trials: usize,
        seed: u64,
    ) -> Result<Self> {
        let op = EllipticOperator::from_families(grid, coeff, pot)?;
        let n = grid.n();
        let fam = prop2_family(coeff, pot, &Ladder::new(grid.length(), vec![n])?, trials, n / 4, seed)?;
        let d = square_root(&eigendecompose(&op)?)?;
        let weight = japanese_weight(grid, weight_a);
        let c_emp = certificate_constant(&d, &weight, fam.max_ratios[0])?;
        let shape = gaussian(grid, 1.0, width);
        let unit = threshold_certificate(&shape, &weight, p, c_emp)?;
        Ok(ThresholdSetup {
            op,
            weight,
            shape,
            p,
            weight_a,
            c_emp,
            threshold_amplitude: (unit.rhs / unit.lhs).sqrt(),
        })
    }

    /// Certificate and simulation at `factor` times the threshold amplitude.
    /// Without `t_max` the run lasts twice the certificate's bound.
    pub fn run(&self, factor: f64, dt: f64, t_max: Option<f64>, blowup_threshold: f64) -> Result<BlowupRun> {
        let amplitude = factor * self.threshold_amplitude;
        let u0 = self.shape.scale(amplitude);
        let mut certificate = threshold_certificate(&u0, &self.weight, self.p, self.c_emp)?;
        let horizon = t_max.unwrap_or_else(|| certificate.t_bound.map_or(10.0, |t| 2.0 * t));
        let cfg = SimulationConfig {
            p: self.p,
            dt,
            t_max: horizon,
            blowup_threshold,
            weight_a: self.weight_a,
            ..Default::default()
        };
        let trace = evolve(&self.op, &u0, cfg)?;
        certificate.t_obs = trace.t_obs();
        Ok(BlowupRun {
            factor,
            amplitude,
            certificate,
            status: trace.status,
            steps: trace.steps,
            inequality: trace.inequality_check(1e-6),
        })
    }
}

/// Sine metric, `V = 0`, Gaussian data of unit width at `factor` times the
/// threshold amplitude.
pub fn blowup_run(n: usize, length: f64, p: f64, weight_a: f64, factor: f64, trials: usize, seed: u64) -> Result<BlowupRun> {
    let setup = ThresholdSetup::new(
        Grid::new(n, length)?,
        &sine_metric(),
        &PotentialSpec::zero(4.0),
        p,
        weight_a,
        1.0,
        trials,
        seed,
    )?;
    setup.run(factor, 1e-3, None, crate::evolve::DEFAULT_BLOWUP_THRESHOLD)
}

/// Rescaling scan with the sine metric of period `L0 = 16` and weight `<x>^a`.
pub fn standard_rescaling(p: f64, weight_a: f64, r_list: &[usize]) -> Result<RescalingScan> {
    let base = Grid::new(32, 16.0)?;
    let l0 = base.length();
    rescaling_scan(
        move |x| 1.0 + 0.5 * (2.0 * PI * x / l0).sin(),
        move |x| (1.0 + x * x).powf(0.5 * weight_a),
        base,
        r_list,
        p,
    )
}

/// `||Strang(T/m) - Picard||` for each `m`.
pub fn order_ladder(n: usize, t_end: f64, amplitude: f64, steps: &[usize]) -> Result<Vec<f64>> {
    let op = EllipticOperator::from_families(Grid::new(n, 2.0 * PI)?, &sine_metric(), &PotentialSpec::zero(4.0))?;
    let prop = Propagator::from_operator(&op)?;
    let u0 = gaussian(op.grid, amplitude, 0.8);
    let reference = picard_oracle(&u0, t_end, 60, 12, &prop, 2.0)?;
    steps
        .iter()
        .map(|&m| Ok(strang_to(&u0, t_end, m, &prop, 2.0)?.sub(&reference.u)?.l2_norm()))
        .collect()
}

/// Lemma-style resolvent identity residual `||[R, F] + R [H, F] R||_F / ||R||^2 ||[H,F]||`.
pub fn resolvent_identity_residual(op: &EllipticOperator, f: &Field, lambda: f64) -> Result<f64> {
    let n = op.grid.n();
    let fr = f.real_parts();
    let spec: SpectralData = eigendecompose(op)?;
    let r = spec.function(|l| 1.0 / (lambda + l));
    let fm = Mat::from_fn(n, n, |i, k| if i == k { fr[i] } else { 0.0 });
    let hf = &op.matrix * &fm - &fm * &op.matrix;
    let lhs = &r * &fm - &fm * &r;
    let rhs = &r * &hf * &r;
    let scale = r.norm() * r.norm() * hf.norm();
    Ok((lhs + rhs).norm() / scale.max(f64::MIN_POSITIVE))
}
