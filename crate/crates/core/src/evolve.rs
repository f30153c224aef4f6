//! Time integration of `u_t = i D u + |u|^{p-1} u` and the blow-up analysis.
//!
//! The integrator is Strang splitting: the nonlinear flow is solved exactly
//! pointwise (the phase is frozen and `r' = r^p`), the linear flow is the
//! unitary `e^{i t D}` taken in the eigenbasis. A collocation solution of the
//! Duhamel formula in the interaction picture serves as the reference.
//!
//! The weighted analysis writes `u = v w` with `w = <x>^a` and tracks
//! `F = ||v||^2 = ||u / w||^2`, which obeys
//! `F' >= 2 (B F^{(p+1)/2} - A F)` with `B = ||1/w||_2^{-(p-1)}` and `A` the
//! norm of `w^{-1} [D, w]`.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::besov::{besov_norm_in, DyadicBank, Region};
use crate::commutator::{commutator_matrix, operator_norm, OP_NORM_TOL};
use crate::error::{invalid, LabError, Result};
use crate::grid::{Field, Grid};
use crate::linalg::{apply_real, apply_real_transpose, Mat};
use crate::operator::{CoefficientField, EllipticOperator, PotentialField};
use crate::par;
use crate::quadrature::gauss_legendre;
use crate::spectral::{eigendecompose, square_root, SpectralData};

/// Default `||u||_inf` level at which a run is declared blown up.
pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e8;
/// Fraction of the pointwise blow-up time a nonlinear substep may use.
pub const ADAPTIVE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub p: f64,
    pub dt: f64,
    pub t_max: f64,
    pub blowup_threshold: f64,
    pub weight_a: f64,
    /// Record diagnostics every `cadence` steps.
    pub cadence: usize,
    pub max_steps: usize,
    /// `false` drops the linear flow (pure pointwise ODE, a diagnostic mode).
    pub linear: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            p: 2.0,
            dt: 1e-3,
            t_max: 1.0,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            weight_a: 0.75,
            cadence: 1,
            max_steps: 1_000_000,
            linear: true,
        }
    }
}

impl SimulationConfig {
    /// All violated preconditions, empty when the configuration is usable.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.p > 1.0) {
            out.push(format!("sim.p: p > 1 required, got {}", self.p));
        }
        if !(self.dt > 0.0) {
            out.push(format!("sim.dt: dt > 0 required, got {}", self.dt));
        }
        if !(self.t_max > 0.0) {
            out.push(format!("sim.t_max: t_max > 0 required, got {}", self.t_max));
        }
        if !(self.blowup_threshold > 0.0) {
            out.push(format!(
                "sim.blowup_threshold: positive threshold required, got {}",
                self.blowup_threshold
            ));
        }
        if !(self.weight_a > 0.5 && self.weight_a < 1.0) {
            out.push(format!("sim.weight_a: weight exponent must lie in (1/2, 1), got {}", self.weight_a));
        }
        if self.cadence == 0 {
            out.push("sim.cadence: cadence must be at least 1".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(LabError::InvalidInput(p.join("; ")))
        }
    }
}

/// `e^{i t D}` in the eigenbasis of `H`, with `D = H^{1/2}`.
#[derive(Debug, Clone)]
pub struct Propagator {
    vectors: Mat,
    frequencies: Vec<f64>,
    grid: Grid,
}

impl Propagator {
    pub fn new(spec: &SpectralData, grid: Grid) -> Result<Self> {
        let vals = spec.nonnegative_eigenvalues()?;
        Ok(Propagator {
            vectors: spec.eigenvectors.clone(),
            frequencies: vals.iter().map(|l| l.sqrt()).collect(),
            grid,
        })
    }

    pub fn from_operator(op: &EllipticOperator) -> Result<Self> {
        Self::new(&eigendecompose(op)?, op.grid)
    }

    /// `D = 0`: every linear substep is the identity.
    pub fn trivial(grid: Grid) -> Self {
        Propagator {
            vectors: Mat::identity(grid.n(), grid.n()),
            frequencies: vec![0.0; grid.n()],
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn to_modes(&self, u: &[Complex64]) -> Vec<Complex64> {
        apply_real_transpose(&self.vectors, u)
    }

    pub fn from_modes(&self, c: &[Complex64]) -> Vec<Complex64> {
        apply_real(&self.vectors, c)
    }

    /// Multiply modal coefficients by `e^{i t sqrt(lambda_k)}`.
    pub fn rotate_modes(&self, c: &mut [Complex64], t: f64) {
        for (ck, &w) in c.iter_mut().zip(&self.frequencies) {
            *ck *= Complex64::from_polar(1.0, t * w);
        }
    }

    pub fn apply(&self, u: &Field, t: f64) -> Field {
        let mut c = self.to_modes(u.samples());
        self.rotate_modes(&mut c, t);
        Field::new(self.grid, self.from_modes(&c)).expect("propagator grid")
    }
}

/// Exact flow of `u_t = |u|^{p-1} u` for time `tau`, or the earliest
/// pointwise blow-up time when it falls inside the substep.
pub fn nonlinear_substep(u: &[Complex64], tau: f64, p: f64) -> std::result::Result<Vec<Complex64>, f64> {
    let mut first: Option<f64> = None;
    let out: Vec<Complex64> = u
        .iter()
        .map(|&z| {
            let r = z.norm();
            if r == 0.0 {
                return z;
            }
            let base = 1.0 - (p - 1.0) * tau * r.powf(p - 1.0);
            if base <= 0.0 {
                let t_star = r.powf(1.0 - p) / (p - 1.0);
                first = Some(first.map_or(t_star, |f: f64| f.min(t_star)));
                return z;
            }
            z * base.powf(-1.0 / (p - 1.0))
        })
        .collect();
    match first {
        Some(t) => Err(t),
        None => Ok(out),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Advanced(Field),
    /// Blow-up inside the step, `within` time units after its start.
    BlowupSignal { within: f64 },
}

/// One Strang step: half nonlinear, full linear, half nonlinear.
pub fn step_strang(u: &Field, dt: f64, prop: &Propagator, p: f64) -> Result<Step> {
    if !(dt > 0.0) {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    prop.grid().ensure_same(u.grid())?;
    let half = 0.5 * dt;
    let a = match nonlinear_substep(u.samples(), half, p) {
        Ok(v) => v,
        Err(t) => return Ok(Step::BlowupSignal { within: t }),
    };
    let mut c = prop.to_modes(&a);
    prop.rotate_modes(&mut c, dt);
    let b = prop.from_modes(&c);
    match nonlinear_substep(&b, half, p) {
        Ok(v) => Ok(Step::Advanced(Field::new(*u.grid(), v)?)),
        Err(t) => Ok(Step::BlowupSignal { within: half + t }),
    }
}

/// `m` Strang steps of equal length up to `t_end`.
pub fn strang_to(u0: &Field, t_end: f64, steps: usize, prop: &Propagator, p: f64) -> Result<Field> {
    if steps == 0 {
        return invalid("at least one step required");
    }
    let dt = t_end / steps as f64;
    let mut u = u0.clone();
    for k in 0..steps {
        match step_strang(&u, dt, prop, p)? {
            Step::Advanced(v) => u = v,
            Step::BlowupSignal { within } => {
                return Err(LabError::PastBlowup {
                    t: k as f64 * dt + within,
                    bound: t_end,
                })
            }
        }
    }
    Ok(u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardResult {
    pub u: Field,
    /// Max-norm distance between successive collocation iterates.
    pub distances: Vec<f64>,
}

fn lagrange(nodes: &[f64], m: usize, t: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != m)
        .map(|(_, &tk)| (t - tk) / (nodes[m] - tk))
        .product()
}

fn power_nonlinearity(u: &[Complex64], p: f64) -> Vec<Complex64> {
    u.iter().map(|z| z * z.norm().powf(p - 1.0)).collect()
}

/// Fixed-point iteration of the Duhamel formula in the interaction picture
/// `z(t) = e^{-i t D} u(t)`, with Gauss collocation on `nodes` points in
/// `[0, T]`. Stops when successive iterates agree to round-off.
pub fn picard_oracle(u0: &Field, t_end: f64, k_max: usize, nodes: usize, prop: &Propagator, p: f64) -> Result<PicardResult> {
    if !(t_end > 0.0) || nodes < 2 || k_max == 0 {
        return invalid("Picard oracle needs T > 0, at least 2 nodes and 1 iteration");
    }
    prop.grid().ensure_same(u0.grid())?;
    let gl = gauss_legendre(nodes);
    let ts: Vec<f64> = gl.iter().map(|&(x, _)| 0.5 * t_end * (x + 1.0)).collect();
    let ws: Vec<f64> = gl.iter().map(|&(_, w)| 0.5 * t_end * w).collect();
    // s[k][m] = int_0^{t_k} l_m(s) ds, exact by a Gauss rule of the same order
    let s: Vec<Vec<f64>> = ts
        .iter()
        .map(|&tk| {
            (0..nodes)
                .map(|m| {
                    gl.iter()
                        .map(|&(x, w)| 0.5 * tk * w * lagrange(&ts, m, 0.5 * tk * (x + 1.0)))
                        .sum()
                })
                .collect()
        })
        .collect();
    let z0 = prop.to_modes(u0.samples());
    let n = z0.len();
    let mut z: Vec<Vec<Complex64>> = vec![z0.clone(); nodes];
    // g(t, z) = e^{-itD} N(e^{itD} z)
    let rhs = |t: f64, zt: &[Complex64]| -> Vec<Complex64> {
        let mut c = zt.to_vec();
        prop.rotate_modes(&mut c, t);
        let u = prop.from_modes(&c);
        let mut g = prop.to_modes(&power_nonlinearity(&u, p));
        prop.rotate_modes(&mut g, -t);
        g
    };
    let scale = z0.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut distances = Vec::new();
    let mut growth = 0;
    let mut g: Vec<Vec<Complex64>> = Vec::new();
    for _ in 0..k_max {
        g = par::map_indexed(nodes, |m| rhs(ts[m], &z[m]));
        let next: Vec<Vec<Complex64>> = (0..nodes)
            .map(|k| {
                let mut out = z0.clone();
                for (m, gm) in g.iter().enumerate() {
                    let c = s[k][m];
                    for i in 0..n {
                        out[i] += gm[i] * c;
                    }
                }
                out
            })
            .collect();
        let dist = next
            .iter()
            .zip(&z)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max);
        if let Some(&prev) = distances.last() {
            if dist > prev {
                growth += 1;
            } else {
                growth = 0;
            }
        }
        distances.push(dist);
        z = next;
        if growth >= 3 {
            return Err(LabError::NoContraction { distances });
        }
        if dist <= 1e-15 * scale {
            g = par::map_indexed(nodes, |m| rhs(ts[m], &z[m]));
            break;
        }
    }
    if g.is_empty() {
        g = par::map_indexed(nodes, |m| rhs(ts[m], &z[m]));
    }
    let mut zt = z0;
    for (gm, &w) in g.iter().zip(&ws) {
        for i in 0..n {
            zt[i] += gm[i] * w;
        }
    }
    prop.rotate_modes(&mut zt, t_end);
    Ok(PicardResult {
        u: Field::new(*u0.grid(), prop.from_modes(&zt))?,
        distances,
    })
}

/// Weight `w = <x>^a` on the grid together with the constants of the
/// weighted-mass inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightModel {
    pub a: f64,
    #[serde(skip)]
    pub w: Vec<f64>,
    /// `||w^{-1} [D, w]||`.
    pub a_emp: f64,
    /// `||1/w||_2`.
    pub inv_w_l2: f64,
    pub inv_w_sup: f64,
}

impl WeightModel {
    pub fn new(grid: &Grid, d: &Mat, a: f64) -> Result<Self> {
        let w: Vec<f64> = grid.positions().iter().map(|x| (1.0 + x * x).powf(0.5 * a)).collect();
        Self::from_samples(grid, d, a, w)
    }

    pub fn from_samples(grid: &Grid, d: &Mat, a: f64, w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|&v| !(v > 0.0)) {
            return invalid("weight must be positive at every grid point");
        }
        let mut c = commutator_matrix(&w, d)?;
        for (i, &wi) in w.iter().enumerate() {
            let s = 1.0 / wi;
            c.row_mut(i).iter_mut().for_each(|v| *v *= s);
        }
        let a_emp = operator_norm(&c, OP_NORM_TOL)?;
        let h = grid.spacing();
        let inv_w_l2 = (h * w.iter().map(|v| 1.0 / (v * v)).sum::<f64>()).sqrt();
        let inv_w_sup = w.iter().map(|v| 1.0 / v).fold(0.0, f64::max);
        Ok(WeightModel {
            a,
            w,
            a_emp,
            inv_w_l2,
            inv_w_sup,
        })
    }

    /// `B = ||1/w||_2^{-(p-1)}`.
    pub fn b(&self, p: f64) -> f64 {
        self.inv_w_l2.powf(1.0 - p)
    }

    /// `||u / w||^2`.
    pub fn weighted_mass(&self, u: &Field) -> f64 {
        let h = u.grid().spacing();
        h * u
            .samples()
            .iter()
            .zip(&self.w)
            .map(|(z, w)| z.norm_sqr() / (w * w))
            .sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Running,
    BlownUp { t_obs: f64 },
    Completed,
}

impl Status {
    pub fn label(&self) -> String {
        match self {
            Status::Running => "running".into(),
            Status::BlownUp { t_obs } => format!("blown_up({t_obs})"),
            Status::Completed => "completed".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub mass: f64,
    pub lp1: f64,
    pub weighted_mass: f64,
    pub df_dt_measured: f64,
    /// `2 (B F^{(p+1)/2} - A F)`, the lower bound for `dF/dt`.
    pub rhs_lower: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionTrace {
    pub p: f64,
    pub rows: Vec<TraceRow>,
    pub status: Status,
    pub steps: usize,
    pub a_emp: f64,
    pub b: f64,
    #[serde(skip)]
    pub final_field: Option<Field>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityReport {
    pub checked: usize,
    pub satisfied: usize,
    pub fraction: f64,
}

impl EvolutionTrace {
    /// Three-point derivative of `F` on the (possibly non-uniform) record times.
    fn fill_derivatives(&mut self) {
        let k = self.rows.len();
        if k < 2 {
            return;
        }
        let t: Vec<f64> = self.rows.iter().map(|r| r.t).collect();
        let f: Vec<f64> = self.rows.iter().map(|r| r.weighted_mass).collect();
        for i in 0..k {
            self.rows[i].df_dt_measured = if i == 0 {
                (f[1] - f[0]) / (t[1] - t[0])
            } else if i == k - 1 {
                (f[k - 1] - f[k - 2]) / (t[k - 1] - t[k - 2])
            } else {
                let (h0, h1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
                (-h1 / (h0 * (h0 + h1))) * f[i - 1] + ((h1 - h0) / (h0 * h1)) * f[i] + (h0 / (h1 * (h0 + h1))) * f[i + 1]
            };
        }
    }

    /// Interior records where `dF/dt >= rhs_lower - slack`, with slack
    /// `rel * (|2 B F^q| + |2 A F|)` plus half the gap between the one-sided
    /// differences (the discretization error of the measured derivative).
    pub fn inequality_check(&self, rel: f64) -> InequalityReport {
        let k = self.rows.len();
        let mut checked = 0;
        let mut satisfied = 0;
        let q = 0.5 * (self.p + 1.0);
        for i in 1..k.saturating_sub(1) {
            let (a, r, c) = (&self.rows[i - 1], &self.rows[i], &self.rows[i + 1]);
            let back = (r.weighted_mass - a.weighted_mass) / (r.t - a.t);
            let fwd = (c.weighted_mass - r.weighted_mass) / (c.t - r.t);
            let f = r.weighted_mass;
            let scale = 2.0 * (self.b * f.powf(q)).abs() + 2.0 * (self.a_emp * f).abs();
            let slack = rel * scale + 0.5 * (fwd - back).abs();
            checked += 1;
            if r.df_dt_measured >= r.rhs_lower - slack {
                satisfied += 1;
            }
        }
        InequalityReport {
            checked,
            satisfied,
            fraction: if checked == 0 { 1.0 } else { satisfied as f64 / checked as f64 },
        }
    }

    pub fn t_obs(&self) -> Option<f64> {
        match self.status {
            Status::BlownUp { t_obs } => Some(t_obs),
            _ => None,
        }
    }

    /// Columns `t, mass, lp1, weighted_mass, dF_dt_measured, rhs_lower, linf`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| LabError::InvalidInput(format!("csv output failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "mass", "lp1", "weighted_mass", "dF_dt_measured", "rhs_lower", "linf"])
            .map_err(io)?;
        for r in &self.rows {
            w.write_record(
                [r.t, r.mass, r.lp1, r.weighted_mass, r.df_dt_measured, r.rhs_lower, r.linf]
                    .iter()
                    .map(|v| format!("{v:.15e}")),
            )
            .map_err(io)?;
        }
        w.flush().map_err(|e| LabError::InvalidInput(format!("csv output failed: {e}")))?;
        Ok(())
    }
}

/// Everything a run needs that does not depend on the initial data.
#[derive(Debug, Clone)]
pub struct Evolver {
    pub config: SimulationConfig,
    pub propagator: Propagator,
    pub weight: WeightModel,
}

impl Evolver {
    pub fn new(op: &EllipticOperator, config: SimulationConfig) -> Result<Self> {
        config.validate()?;
        let spec = eigendecompose(op)?;
        let d = square_root(&spec)?;
        let weight = WeightModel::new(&op.grid, &d, config.weight_a)?;
        let propagator = if config.linear {
            Propagator::new(&spec, op.grid)?
        } else {
            Propagator::trivial(op.grid)
        };
        Ok(Evolver {
            config,
            propagator,
            weight,
        })
    }

    fn row(&self, t: f64, u: &Field) -> TraceRow {
        let h = u.grid().spacing();
        let p = self.config.p;
        let f = self.weight.weighted_mass(u);
        let b = self.weight.b(p);
        TraceRow {
            t,
            mass: u.l2_norm().powi(2),
            lp1: h * u.samples().iter().map(|z| z.norm().powf(p + 1.0)).sum::<f64>(),
            weighted_mass: f,
            df_dt_measured: 0.0,
            rhs_lower: 2.0 * (b * f.powf(0.5 * (p + 1.0)) - self.weight.a_emp * f),
            linf: u.max_abs(),
        }
    }

    pub fn run(&self, u0: &Field) -> Result<EvolutionTrace> {
        self.propagator.grid().ensure_same(u0.grid())?;
        let cfg = &self.config;
        let p = cfg.p;
        let mut u = u0.clone();
        let mut t = 0.0;
        let mut rows = vec![self.row(0.0, &u)];
        let mut steps = 0;
        let mut status = Status::Running;
        while status == Status::Running {
            if t >= cfg.t_max * (1.0 - 1e-14) {
                status = Status::Completed;
                break;
            }
            let linf = u.max_abs();
            let limit = if linf > 0.0 {
                ADAPTIVE_FRACTION / ((p - 1.0) * linf.powf(p - 1.0))
            } else {
                f64::INFINITY
            };
            let dt = cfg.dt.min(limit).min(cfg.t_max - t);
            match step_strang(&u, dt, &self.propagator, p)? {
                Step::BlowupSignal { .. } => {
                    status = Status::BlownUp { t_obs: t };
                    break;
                }
                Step::Advanced(v) => {
                    u = v;
                    t += dt;
                    steps += 1;
                }
            }
            let blown = u.max_abs() > cfg.blowup_threshold || !u.max_abs().is_finite();
            if blown {
                status = Status::BlownUp { t_obs: t - dt };
            }
            if blown || steps % cfg.cadence == 0 {
                rows.push(self.row(t, &u));
            }
            if status == Status::Running && steps >= cfg.max_steps {
                return Err(LabError::InvalidInput(format!(
                    "step budget of {} exhausted at t = {t}",
                    cfg.max_steps
                )));
            }
        }
        if status == Status::Completed && rows.last().is_some_and(|r| r.t != t) {
            rows.push(self.row(t, &u));
        }
        let mut trace = EvolutionTrace {
            p,
            rows,
            status,
            steps,
            a_emp: self.weight.a_emp,
            b: self.weight.b(p),
            final_field: Some(u),
        };
        trace.fill_derivatives();
        Ok(trace)
    }
}

/// Build the evolver for `op` and run it from `u0`.
pub fn evolve(op: &EllipticOperator, u0: &Field, config: SimulationConfig) -> Result<EvolutionTrace> {
    Evolver::new(op, config)?.run(u0)
}

/// `f' + A f = B f^q`, `f(0) = f0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupOde {
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub f0: f64,
}

impl BlowupOde {
    pub fn new(a: f64, b: f64, q: f64, f0: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && q > 1.0 && f0 > 0.0) {
            return invalid(format!("ODE needs A, B, f0 > 0 and q > 1; got A={a}, B={b}, q={q}, f0={f0}"));
        }
        Ok(BlowupOde { a, b, q, f0 })
    }

    /// `(A/B)^{1/(q-1)}`.
    pub fn equilibrium(&self) -> f64 {
        (self.a / self.b).powf(1.0 / (self.q - 1.0))
    }

    /// `-(1/(A(q-1))) ln(1 - A B^{-1} f0^{1-q})` above the equilibrium.
    pub fn t_bound(&self) -> Option<f64> {
        (self.f0 > self.equilibrium()).then(|| {
            let x = self.a / self.b * self.f0.powf(1.0 - self.q);
            -(-x).ln_1p() / (self.a * (self.q - 1.0))
        })
    }

    pub fn closed_form(&self, t: f64) -> Result<f64> {
        if let Some(tb) = self.t_bound() {
            if t >= tb {
                return Err(LabError::PastBlowup { t, bound: tb });
            }
        }
        let (a, b, q) = (self.a, self.b, self.q);
        let ratio = b / a;
        // e^{-At} (f0^{1-q} + r (e^{-A(q-1)t} - 1))^{-1/(q-1)}, rearranged so
        // the equilibrium f0^{1-q} = r is reproduced without cancellation
        let gap = self.f0.powf(1.0 - q) - ratio;
        let inner = (a * (q - 1.0) * t).exp() * gap + ratio;
        Ok(inner.powf(-1.0 / (q - 1.0)))
    }

    /// Classical fourth-order Runge-Kutta values at `steps + 1` equispaced times.
    pub fn rk4(&self, t_end: f64, steps: usize) -> Vec<(f64, f64)> {
        let rhs = |f: f64| self.b * f.powf(self.q) - self.a * f;
        let h = t_end / steps as f64;
        let mut f = self.f0;
        let mut out = Vec::with_capacity(steps + 1);
        out.push((0.0, f));
        for k in 0..steps {
            let k1 = rhs(f);
            let k2 = rhs(f + 0.5 * h * k1);
            let k3 = rhs(f + 0.5 * h * k2);
            let k4 = rhs(f + h * k3);
            f += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            out.push(((k + 1) as f64 * h, f));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    /// `||u0 / w||^2`.
    pub lhs: f64,
    /// `(C ||1/w||_inf ||w||_B)^{2/(p-1)} ||1/w||_2^2`.
    pub rhs: f64,
    #[serde(rename = "C_emp")]
    pub c_emp: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub t_bound: Option<f64>,
    pub predicted: bool,
    #[serde(rename = "T_obs")]
    pub t_obs: Option<f64>,
}

impl Certificate {
    pub fn from_norms(lhs: f64, c: f64, inv_w_sup: f64, w_besov: f64, inv_w_l2: f64, p: f64) -> Result<Self> {
        if !(p > 1.0) {
            return invalid(format!("p > 1 required, got {p}"));
        }
        let a = c * inv_w_sup * w_besov;
        let b = inv_w_l2.powf(1.0 - p);
        let rhs = a.powf(2.0 / (p - 1.0)) * inv_w_l2 * inv_w_l2;
        let predicted = lhs >= rhs && lhs > 0.0;
        let t_bound = if lhs > 0.0 && a > 0.0 {
            BlowupOde::new(a, b, 0.5 * (p + 1.0), lhs)?.t_bound()
        } else {
            None
        };
        Ok(Certificate {
            lhs,
            rhs,
            c_emp: c,
            a,
            b,
            t_bound,
            predicted,
            t_obs: None,
        })
    }
}

/// Inhomogeneous seam-windowed `B^1_{inf,1}` norm of a weight.
pub fn weight_besov_norm(w: &Field) -> Result<f64> {
    let bank = DyadicBank::new(*w.grid());
    Ok(besov_norm_in(&bank, w, 1.0, f64::INFINITY, 1.0, false, Region::seam_window(w.grid()))?.value)
}

/// Blow-up certificate for `u0` with weight `w` and commutator constant `c_emp`.
pub fn threshold_certificate(u0: &Field, w: &Field, p: f64, c_emp: f64) -> Result<Certificate> {
    u0.grid().ensure_same(w.grid())?;
    let wr = crate::commutator::real_samples(w)?;
    if wr.iter().any(|&v| v == 0.0) {
        return invalid("weight has a zero sample");
    }
    let h = w.grid().spacing();
    let lhs = h * u0.samples().iter().zip(&wr).map(|(z, v)| z.norm_sqr() / (v * v)).sum::<f64>();
    let inv_sup = wr.iter().map(|v| 1.0 / v.abs()).fold(0.0, f64::max);
    let inv_l2 = (h * wr.iter().map(|v| 1.0 / (v * v)).sum::<f64>()).sqrt();
    Certificate::from_norms(lhs, c_emp, inv_sup, weight_besov_norm(w)?, inv_l2, p)
}

/// Commutator constant for the certificate: the larger of the supplied
/// family maximum and the weight's own ratio against its certificate norm,
/// so that `A >= ||w^{-1} [D, w]||`.
pub fn certificate_constant(d: &Mat, w: &Field, family_max: f64) -> Result<f64> {
    let wr = crate::commutator::real_samples(w)?;
    let own = operator_norm(&commutator_matrix(&wr, d)?, OP_NORM_TOL)? / weight_besov_norm(w)?;
    Ok(family_max.max(own))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RescalingRow {
    #[serde(rename = "R")]
    pub r: f64,
    pub a_emp: f64,
    pub b: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescalingScan {
    pub p: f64,
    pub rows: Vec<RescalingRow>,
    pub slope: f64,
    pub expected_slope: f64,
}

/// Dilate the weight by `R` on a domain enlarged by `R` at fixed spacing and
/// fit `log(A_emp / B)` against `log R`.
pub fn rescaling_scan(
    metric: impl Fn(f64) -> f64 + Sync,
    weight: impl Fn(f64) -> f64 + Sync,
    base: Grid,
    r_list: &[usize],
    p: f64,
) -> Result<RescalingScan> {
    if r_list.len() < 3 {
        return invalid("rescaling scan needs at least three values of R");
    }
    if !(p > 1.0 && p <= 3.0) {
        return invalid(format!("rescaling scan needs 1 < p <= 3, got {p}"));
    }
    let h = base.spacing();
    let inv_l2 = (h * base.positions().iter().map(|&x| weight(x).powi(-2)).sum::<f64>()).sqrt();
    let rows = par::map_slice(r_list, |&r| -> Result<RescalingRow> {
        let g = Grid::new(base.n() * r, base.length() * r as f64)?;
        let a: Vec<f64> = g.positions().iter().map(|&x| metric(x)).collect();
        let op = EllipticOperator::assemble(CoefficientField::new(&g, a)?, PotentialField::zero(&g, 4.0), g)?;
        let d = square_root(&eigendecompose(&op)?)?;
        let w: Vec<f64> = g.positions().iter().map(|&x| weight(x / r as f64)).collect();
        let model = WeightModel::from_samples(&g, &d, f64::NAN, w)?;
        let rf = r as f64;
        let b = rf.powf(-(p - 1.0) / 2.0) * inv_l2.powf(1.0 - p);
        Ok(RescalingRow {
            r: rf,
            a_emp: model.a_emp,
            b,
            ratio: model.a_emp / b,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.r.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio.ln()).collect();
    let slope = crate::besov::fit_slope(&xs, &ys).ok_or_else(|| LabError::InvalidInput("degenerate R list".into()))?;
    Ok(RescalingScan {
        p,
        rows,
        slope,
        expected_slope: -1.0 + 0.5 * (p - 1.0),
    })
}

/// Gaussian `amplitude * exp(-x^2 / (2 width^2))`.
pub fn gaussian(grid: Grid, amplitude: f64, width: f64) -> Field {
    Field::from_real_fn(grid, |x| amplitude * (-0.5 * x * x / (width * width)).exp())
}
