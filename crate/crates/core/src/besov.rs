//! Littlewood-Paley bank and Besov norms on the periodic grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, LabError, Result};
use crate::grid::{dft, idft, Field, Grid};
use crate::par;

/// Smooth cutoff: 1 on `r <= 1`, `cos^2(pi (r - 1) / 2)` on `(1, 2)`, 0 beyond.
pub fn chi0(r: f64) -> f64 {
    let r = r.abs();
    if r <= 1.0 {
        1.0
    } else if r < 2.0 {
        let c = (0.5 * PI * (r - 1.0)).cos();
        c * c
    } else {
        0.0
    }
}

/// `phi_j(xi) = chi0(2^-j xi) - chi0(2^{1-j} xi)`, supported in `2^{j-1} <= |xi| <= 2^{j+1}`.
pub fn phi(j: i32, xi: f64) -> f64 {
    let s = 2f64.powi(-j);
    chi0(s * xi) - chi0(2.0 * s * xi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Lowpass,
    Annulus(i32),
}

#[derive(Debug, Clone)]
pub struct DyadicBank {
    grid: Grid,
    j_min: i32,
    j_max: i32,
    lowpass: Vec<f64>,
    /// `multipliers[j - j_min]`, sampled in FFT order.
    multipliers: Vec<Vec<f64>>,
}

impl DyadicBank {
    /// Bands from `floor(log2(2 pi / L))` up to `ceil(log2(pi / h))`, so the
    /// annuli alone cover every nonzero representable frequency.
    pub fn new(grid: Grid) -> Self {
        let j_min = grid.fundamental().log2().floor() as i32;
        let j_max = grid.nyquist().log2().ceil() as i32;
        let xi = grid.frequencies();
        let lowpass = xi.iter().map(|&x| chi0(x)).collect();
        let multipliers = (j_min..=j_max)
            .map(|j| xi.iter().map(|&x| phi(j, x)).collect())
            .collect();
        DyadicBank {
            grid,
            j_min,
            j_max,
            lowpass,
            multipliers,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn bands(&self) -> impl Iterator<Item = i32> {
        self.j_min..=self.j_max
    }

    /// Sampled multiplier of a band.
    pub fn symbol(&self, band: Band) -> Result<&[f64]> {
        match band {
            Band::Lowpass => Ok(&self.lowpass),
            Band::Annulus(j) if (self.j_min..=self.j_max).contains(&j) => {
                Ok(&self.multipliers[(j - self.j_min) as usize])
            }
            Band::Annulus(j) => invalid(format!(
                "band {j} outside the representable range [{}, {}]",
                self.j_min, self.j_max
            )),
        }
    }

    pub fn project(&self, f: &Field, band: Band) -> Result<Field> {
        self.grid.ensure_same(f.grid())?;
        let symbol = self.symbol(band)?;
        Ok(self.project_hat(&dft(f.samples()), symbol))
    }

    fn project_hat(&self, fhat: &[Complex64], symbol: &[f64]) -> Field {
        let g: Vec<Complex64> = fhat.iter().zip(symbol).map(|(c, m)| c * m).collect();
        Field::new(self.grid, idft(&g)).expect("bank grid")
    }

    /// `(j, P_j f)` for every annular band.
    pub fn decompose(&self, f: &Field) -> Result<Vec<(i32, Field)>> {
        self.grid.ensure_same(f.grid())?;
        let fhat = dft(f.samples());
        Ok(self
            .bands()
            .zip(&self.multipliers)
            .map(|(j, m)| (j, self.project_hat(&fhat, m)))
            .collect())
    }
}

/// Where the `L^p` norm of each band is measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Full,
    /// `|x| <= half_width`, keeping away from the periodic seam at `+-L/2`.
    Window(f64),
}

impl Region {
    /// Window over the central half of the domain.
    pub fn seam_window(grid: &Grid) -> Self {
        Region::Window(0.25 * grid.length())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BesovReport {
    /// `(j, 2^{sj} ||P_j f||_p)`.
    pub terms: Vec<(i32, f64)>,
    /// `||Q f||_p` for the inhomogeneous norm.
    pub lowpass: Option<f64>,
    /// Norms of the leading bands, low frequencies first.
    pub partial_sums: Vec<f64>,
    pub value: f64,
}

impl BesovReport {
    /// Share of the value carried by the top `bands` terms; 0 when the value vanishes.
    pub fn tail_ratio(&self, bands: usize) -> f64 {
        let k = self.partial_sums.len();
        if k == 0 || self.value == 0.0 {
            return 0.0;
        }
        let before = if bands >= k { 0.0 } else { self.partial_sums[k - 1 - bands] };
        (self.value - before).abs() / self.value
    }
}

fn region_norm(f: &Field, p: f64, region: Region) -> f64 {
    let g = f.grid();
    let keep = |i: usize| match region {
        Region::Full => true,
        Region::Window(w) => g.position(i).abs() <= w,
    };
    let vals = f
        .samples()
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .map(|(_, z)| z.norm());
    if p.is_infinite() {
        vals.fold(0.0, f64::max)
    } else {
        (g.spacing() * vals.map(|v| v.powf(p)).sum::<f64>()).powf(1.0 / p)
    }
}

fn accumulate(values: impl Iterator<Item = f64>, q: f64) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .map(|v| {
            if q.is_infinite() {
                acc = f64::max(acc, v);
                acc
            } else {
                acc += v.powf(q);
                acc.powf(1.0 / q)
            }
        })
        .collect()
}

/// `B^s_{p,q}` (or the homogeneous version) measured over `region`.
pub fn besov_norm_in(
    bank: &DyadicBank,
    f: &Field,
    s: f64,
    p: f64,
    q: f64,
    homogeneous: bool,
    region: Region,
) -> Result<BesovReport> {
    if p.is_nan() || p < 1.0 || q.is_nan() || q < 1.0 {
        return invalid(format!("Besov exponents must lie in [1, inf], got p = {p}, q = {q}"));
    }
    let bands = bank.decompose(f)?;
    let terms: Vec<(i32, f64)> = bands
        .iter()
        .filter(|(j, _)| homogeneous || *j >= 1)
        .map(|(j, pj)| (*j, 2f64.powf(s * *j as f64) * region_norm(pj, p, region)))
        .collect();
    let lowpass = if homogeneous {
        None
    } else {
        Some(region_norm(&bank.project(f, Band::Lowpass)?, p, region))
    };
    let partial_sums = accumulate(lowpass.into_iter().chain(terms.iter().map(|t| t.1)), q);
    let value = partial_sums.last().copied().unwrap_or(0.0);
    Ok(BesovReport {
        terms,
        lowpass,
        partial_sums,
        value,
    })
}

/// `B^s_{p,q}` over the whole periodic domain.
pub fn besov_norm(bank: &DyadicBank, f: &Field, s: f64, p: f64, q: f64, homogeneous: bool) -> Result<BesovReport> {
    besov_norm_in(bank, f, s, p, q, homogeneous, Region::Full)
}

/// `sup_{|y| < t} || f(. + y) - 2 f + f(. - y) ||_inf` with `y` a multiple of `h`.
pub fn second_difference_integrand(f: &Field, t: f64) -> f64 {
    let n = f.grid().n();
    let h = f.grid().spacing();
    let s = f.samples();
    // largest k with k h < t
    let kmax = (((t / h) - 1e-12).ceil() as usize).saturating_sub(1).min(n / 2);
    let mut best: f64 = 0.0;
    for k in 1..=kmax {
        for i in 0..n {
            let d = s[(i + k) % n] - s[i] * 2.0 + s[(i + n - k) % n];
            best = best.max(d.norm());
        }
    }
    best
}

/// Trapezoid rule for `int sup_{|y|<t} ||Delta_y^2 f||_inf dt / t^2` over `t_grid`.
pub fn second_difference_norm(f: &Field, t_grid: &[f64]) -> Result<f64> {
    if t_grid.is_empty() {
        return invalid("second-difference norm needs a non-empty t grid");
    }
    let h = f.grid().spacing();
    let half = 0.5 * f.grid().length();
    if t_grid.iter().any(|&t| !(t > h && t < half)) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid(format!("t grid must be increasing within ({h}, {half})"));
    }
    let vals: Vec<f64> = par::map_slice(t_grid, |&t| second_difference_integrand(f, t) / (t * t));
    Ok(t_grid
        .windows(2)
        .zip(vals.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum())
}

/// `count` log-spaced points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Periodized weight `(1 + x^2)^{a/2}` on `[-L/2, L/2)`.
pub fn japanese_weight(grid: Grid, a: f64) -> Field {
    Field::from_real_fn(grid, |x| (1.0 + x * x).powf(0.5 * a))
}

/// Bernstein ratio `||grad P_j f||_inf / (2^j ||P_j f||_inf)` with the spectral derivative.
pub fn bernstein_ratio(bank: &DyadicBank, f: &Field, j: i32) -> Result<Option<f64>> {
    let pj = bank.project(f, Band::Annulus(j))?;
    let norm = pj.max_abs();
    if norm < 1e-13 * f.max_abs().max(f64::MIN_POSITIVE) {
        return Ok(None);
    }
    let xi = bank.grid().frequencies();
    let hat: Vec<Complex64> = dft(pj.samples())
        .iter()
        .zip(&xi)
        .map(|(c, &k)| c * Complex64::new(0.0, k))
        .collect();
    let grad = Field::new(*bank.grid(), idft(&hat))?;
    Ok(Some(grad.max_abs() / (2f64.powi(j) * norm)))
}

/// Largest multiplier product `max |phi_j phi_k|` over bands with `|j - k| >= 2`.
pub fn max_band_overlap(bank: &DyadicBank) -> f64 {
    let mut worst: f64 = 0.0;
    for j in bank.bands() {
        for k in bank.bands().filter(|&k| k >= j + 2) {
            let a = bank.symbol(Band::Annulus(j)).expect("in range");
            let b = bank.symbol(Band::Annulus(k)).expect("in range");
            worst = a.iter().zip(b).fold(worst, |m, (x, y)| m.max((x * y).abs()));
        }
    }
    worst
}

/// Tail length used for convergence verdicts.
pub const TAIL_BANDS: usize = 4;
/// Largest tail share still counted as convergent.
pub const TAIL_TOL: f64 = 0.05;
/// Smallest per-band growth counted as a divergent trend.
pub const MIN_INCREMENT: f64 = 0.05;
/// Increments decaying slower than this (log2 per doubling) are not geometric.
pub const FLAT_RATE: f64 = -0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Convergent,
    DivergentTrend,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Convergent => "convergent",
            Verdict::DivergentTrend => "divergent-trend",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightEntry {
    pub a: f64,
    pub length: f64,
    pub n: usize,
    /// Seam-windowed homogeneous `B^1_{inf,1}` report.
    pub windowed: BesovReport,
    /// Same norm over the whole periodic domain, seam included.
    pub full_value: f64,
    pub tail_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightTrend {
    pub a: f64,
    pub values: Vec<f64>,
    /// `(S(L_{k+1}) - S(L_k)) / (new bands)`.
    pub increments: Vec<f64>,
    /// Least-squares slope of `log2(increment)` per doubling of `L`.
    pub increment_rate: Option<f64>,
    pub max_tail_ratio: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightScan {
    pub entries: Vec<WeightEntry>,
    pub trends: Vec<WeightTrend>,
}

fn slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    slope(xs, ys)
}

/// Homogeneous `B^1_{inf,1}` scan of periodized weights at fixed spacing `h`.
pub fn weight_scan(a_list: &[f64], l_list: &[f64], h: f64) -> Result<WeightScan> {
    if let Some(a) = a_list.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return invalid(format!("weight exponent must lie in [0, 1], got {a}"));
    }
    if l_list.is_empty() || l_list.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("domain lengths must be non-empty and increasing");
    }
    let grids = l_list
        .iter()
        .map(|&l| {
            let n = (l / h).round() as usize;
            let g = Grid::new(n, l)?;
            if ((g.spacing() - h) / h).abs() > 1e-9 {
                return Err(LabError::InvalidInput(format!("L = {l} is not a power-of-two multiple of h = {h}")));
            }
            Ok(g)
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(f64, Grid)> = a_list
        .iter()
        .flat_map(|&a| grids.iter().map(move |&g| (a, g)))
        .collect();
    let entries = par::map_slice(&jobs, |&(a, g)| -> Result<WeightEntry> {
        let bank = DyadicBank::new(g);
        let w = japanese_weight(g, a);
        let windowed = besov_norm_in(&bank, &w, 1.0, f64::INFINITY, 1.0, true, Region::seam_window(&g))?;
        let full_value = besov_norm(&bank, &w, 1.0, f64::INFINITY, 1.0, true)?.value;
        let tail_ratio = windowed.tail_ratio(TAIL_BANDS);
        Ok(WeightEntry {
            a,
            length: g.length(),
            n: g.n(),
            windowed,
            full_value,
            tail_ratio,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let trends = a_list
        .iter()
        .enumerate()
        .map(|(ia, &a)| {
            let rows = &entries[ia * grids.len()..(ia + 1) * grids.len()];
            trend(a, rows)
        })
        .collect();
    Ok(WeightScan { entries, trends })
}

fn trend(a: f64, rows: &[WeightEntry]) -> WeightTrend {
    let values: Vec<f64> = rows.iter().map(|r| r.windowed.value).collect();
    let increments: Vec<f64> = rows
        .windows(2)
        .map(|w| {
            let new_bands = (w[1].windowed.terms.len() as f64 - w[0].windowed.terms.len() as f64).max(1.0);
            (w[1].windowed.value - w[0].windowed.value) / new_bands
        })
        .collect();
    let doublings: Vec<f64> = rows[1..]
        .iter()
        .map(|r| (r.length / rows[0].length).log2())
        .collect();
    let increment_rate = if increments.iter().all(|&d| d > 0.0) {
        let logs: Vec<f64> = increments.iter().map(|d| d.log2()).collect();
        slope(&doublings, &logs)
    } else {
        None
    };
    let max_tail_ratio = rows.iter().map(|r| r.tail_ratio).fold(0.0, f64::max);
    let growing = !increments.is_empty()
        && increments.iter().all(|&d| d >= MIN_INCREMENT)
        && increment_rate.is_some_and(|r| r >= FLAT_RATE);
    let verdict = if growing {
        Verdict::DivergentTrend
    } else if max_tail_ratio <= TAIL_TOL {
        Verdict::Convergent
    } else {
        Verdict::Inconclusive
    };
    WeightTrend {
        a,
        values,
        increments,
        increment_rate,
        max_tail_ratio,
        verdict,
    }
}

impl WeightScan {
    /// Rows `a, L, j, b_j, partial_sum, verdict`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| LabError::InvalidInput(format!("csv output failed: {e}"));
        w.write_record(["a", "L", "j", "b_j", "partial_sum", "verdict"]).map_err(io)?;
        for e in &self.entries {
            let verdict = self
                .trends
                .iter()
                .find(|t| t.a == e.a)
                .map_or("inconclusive", |t| t.verdict.as_str());
            for ((j, b), s) in e.windowed.terms.iter().zip(&e.windowed.partial_sums) {
                w.write_record([
                    format!("{}", e.a),
                    format!("{}", e.length),
                    j.to_string(),
                    format!("{b:.12e}"),
                    format!("{s:.12e}"),
                    verdict.to_string(),
                ])
                .map_err(io)?;
            }
        }
        w.flush().map_err(|e| LabError::InvalidInput(format!("csv output failed: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{band_limited_real, rng};

    #[test]
    fn partition_of_unity() {
        let g = Grid::new(256, 40.0).unwrap();
        let bank = DyadicBank::new(g);
        let xi = g.frequencies();
        for (k, &x) in xi.iter().enumerate() {
            let inhom: f64 = bank.lowpass[k]
                + (1..=bank.j_max()).map(|j| bank.symbol(Band::Annulus(j)).unwrap()[k]).sum::<f64>();
            assert!((inhom - 1.0).abs() < 1e-15);
            let hom: f64 = bank.bands().map(|j| bank.symbol(Band::Annulus(j)).unwrap()[k]).sum();
            let expected = if x == 0.0 { 0.0 } else { 1.0 };
            assert!((hom - expected).abs() < 1e-15, "{x} {hom}");
        }
        for j in bank.bands() {
            for &x in &xi {
                let v = phi(j, x);
                let lo = 2f64.powi(j - 1);
                assert!(v >= 0.0);
                if x.abs() < lo || x.abs() > 4.0 * lo {
                    assert_eq!(v, 0.0);
                }
            }
        }
        assert!(bank.project(&Field::zeros(g), Band::Annulus(bank.j_max() + 1)).is_err());
    }

    #[test]
    fn constants_and_single_modes() {
        let g = Grid::new(256, 2.0 * PI).unwrap();
        let bank = DyadicBank::new(g);
        let c = Field::constant(g, Complex64::new(3.0, 0.0));
        for j in bank.bands() {
            assert!(bank.project(&c, Band::Annulus(j)).unwrap().max_abs() < 1e-14);
        }
        assert!(bank.project(&c, Band::Lowpass).unwrap().sub(&c).unwrap().max_abs() < 1e-14);
        assert_eq!(besov_norm(&bank, &c, 1.0, f64::INFINITY, 1.0, true).unwrap().value, 0.0);

        // phi_j equals one only at |xi| = 2^j
        let m = 8.0;
        let f = Field::from_real_fn(g, |x| (m * x).cos());
        let j = 3;
        assert!((phi(j, m) - 1.0).abs() < 1e-15);
        let pj = bank.project(&f, Band::Annulus(j)).unwrap();
        assert!(pj.sub(&f).unwrap().max_abs() < 1e-12);
        for k in bank.bands().filter(|&k| k != j) {
            assert!(bank.project(&f, Band::Annulus(k)).unwrap().max_abs() < 1e-12);
        }
        let rep = besov_norm(&bank, &f, 1.0, f64::INFINITY, 1.0, true).unwrap();
        assert!((rep.value - 8.0).abs() < 1e-10);
    }

    #[test]
    fn telescoping_for_random_fields() {
        let g = Grid::new(128, 20.0).unwrap();
        let bank = DyadicBank::new(g);
        let mut r = rng(5);
        for _ in 0..100 {
            let f = band_limited_real(&mut r, g);
            let mut sum = bank.project(&f, Band::Lowpass).unwrap();
            for j in 1..=bank.j_max() {
                sum = sum.add(&bank.project(&f, Band::Annulus(j)).unwrap()).unwrap();
            }
            assert!(sum.sub(&f).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn report_structure() {
        let g = Grid::new(128, 20.0).unwrap();
        let bank = DyadicBank::new(g);
        let f = band_limited_real(&mut rng(9), g);
        let rep = besov_norm(&bank, &f, 1.0, f64::INFINITY, 1.0, false).unwrap();
        let total = rep.lowpass.unwrap() + rep.terms.iter().map(|t| t.1).sum::<f64>();
        assert!((rep.value - total).abs() < 1e-12 * total);
        assert!(rep.terms.iter().all(|t| t.1 >= 0.0 && t.0 >= 1));
        assert!(rep.partial_sums.windows(2).all(|w| w[1] >= w[0]));
        let l2 = besov_norm(&bank, &f, 0.0, 2.0, 2.0, false).unwrap();
        // almost-orthogonal bands: B^0_{2,2} is comparable to L^2
        let ratio = l2.value / f.l2_norm();
        assert!(ratio > 0.5 && ratio < 2.0, "{ratio}");
    }

    #[test]
    fn bernstein_and_disjointness() {
        let g = Grid::new(256, 30.0).unwrap();
        let bank = DyadicBank::new(g);
        assert_eq!(max_band_overlap(&bank), 0.0);
        let mut r = rng(13);
        for _ in 0..20 {
            let f = band_limited_real(&mut r, g);
            for j in bank.bands() {
                if let Some(ratio) = bernstein_ratio(&bank, &f, j).unwrap() {
                    assert!(ratio <= 4.0, "{j} {ratio}");
                }
            }
        }
    }

    #[test]
    fn second_difference_examples() {
        let g = Grid::new(256, 64.0).unwrap();
        let lin = Field::from_real_fn(g, |x| 3.0 * x + 1.0);
        let h = g.spacing();
        // inside the domain, away from the seam, the second difference of a line vanishes
        let s = lin.samples();
        for i in 10..g.n() - 10 {
            for k in 1..5 {
                assert!((s[i + k] - s[i] * 2.0 + s[i - k]).norm() < 1e-12);
            }
        }
        let w = japanese_weight(g, 1.0);
        for t in log_grid(1.0, 16.0, 12) {
            assert!(second_difference_integrand(&w, t) >= t / 8.0);
        }
        assert!(second_difference_norm(&w, &[]).is_err());
        assert!(second_difference_norm(&w, &[0.5 * h, 1.0]).is_err());
        let n1 = second_difference_norm(&w, &log_grid(2.0 * h, 4.0, 40)).unwrap();
        let n2 = second_difference_norm(&w, &log_grid(2.0 * h, 16.0, 60)).unwrap();
        assert!(n2 - n1 >= 0.125 * 4f64.ln() * 0.9, "{n1} {n2}");
    }

    #[test]
    fn weight_band_profile() {
        let scan = weight_scan(&[0.7, 1.0], &[64.0, 128.0, 256.0, 512.0], 1.0 / 32.0).unwrap();
        let t07 = &scan.trends[0];
        let t10 = &scan.trends[1];
        assert_eq!(t07.verdict, Verdict::Convergent);
        assert_eq!(t10.verdict, Verdict::DivergentTrend);
        // new low bands shrink like 2^{-(1-a)} per doubling for a < 1
        assert!((t07.increment_rate.unwrap() + 0.3).abs() < 0.1, "{t07:?}");
        assert!(t10.increments.iter().all(|&d| d >= MIN_INCREMENT));
        // high bands decay at least like 2^{-j/2} above the knee
        let e = &scan.entries[3];
        let terms = &e.windowed.terms;
        let knee = terms.iter().position(|t| t.0 == 1).unwrap();
        let floor = 1e-6 * e.windowed.value;
        for w in terms[knee..].windows(2).filter(|w| w[1].1 > floor) {
            assert!(w[1].1.log2() - w[0].1.log2() <= -0.5, "{w:?}");
        }
    }

    #[test]
    fn zero_weight_is_convergent() {
        let scan = weight_scan(&[0.0], &[16.0, 32.0], 0.25).unwrap();
        assert!(scan.entries.iter().all(|e| e.windowed.value == 0.0));
        assert_eq!(scan.trends[0].verdict, Verdict::Convergent);
        assert!(weight_scan(&[1.5], &[16.0], 0.25).is_err());
        let mut buf = Vec::new();
        scan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("a,L,j,b_j,partial_sum,verdict\n"));
    }
}
