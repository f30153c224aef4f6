//! Composite Gauss-Legendre rules in the logarithmic variable `y = ln(lambda)`.
//!
//! Resolvent integrals over `(0, inf)` become integrals over the real line
//! whose integrands are analytic in the strip `|Im y| < pi` and decay
//! exponentially at both ends. A rule covers a central window around the
//! spectrum plus margins sized from the two decay rates; the margin and the
//! panel width are balanced so the truncation error and the per-panel
//! Gauss-Legendre error shrink together as the node count grows.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Default Gauss-Legendre points per panel.
pub const DEFAULT_PANEL_ORDER: usize = 4;

/// Minimum margin, in `y`, on each side of the spectral window (a factor 1e3 in lambda).
pub const MIN_MARGIN: f64 = 6.907_755_278_982_137;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// `(y_k, weight_k)` with weights for `dy`.
    nodes: Vec<(f64, f64)>,
    y_min: f64,
    y_max: f64,
    panel_order: usize,
}

/// Gauss-Legendre points and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let m = order;
    let mut out = vec![(0.0, 0.0); m];
    for i in 0..m.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[m - 1 - i] = (x, w);
    }
    out
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

impl QuadratureRule {
    /// Composite rule on `[y_min, y_max]` with at least `count` nodes
    /// (rounded up to whole panels).
    pub fn log_window(y_min: f64, y_max: f64, count: usize, panel_order: usize) -> Result<Self> {
        if !(y_min < y_max) || !y_min.is_finite() || !y_max.is_finite() {
            return invalid(format!("quadrature window [{y_min}, {y_max}] is empty or not finite"));
        }
        if count < 16 {
            return invalid(format!("quadrature needs at least 16 nodes, got {count}"));
        }
        if panel_order == 0 {
            return invalid("panel order must be positive");
        }
        let panels = count.div_ceil(panel_order);
        let width = (y_max - y_min) / panels as f64;
        let base = gauss_legendre(panel_order);
        let mut nodes = Vec::with_capacity(panels * panel_order);
        for p in 0..panels {
            let mid = y_min + (p as f64 + 0.5) * width;
            for &(x, w) in &base {
                nodes.push((mid + 0.5 * width * x, 0.5 * width * w));
            }
        }
        Ok(QuadratureRule {
            nodes,
            y_min,
            y_max,
            panel_order,
        })
    }

    /// Rule for an integrand whose `y`-profile is flat across `[ln lo, ln hi]`
    /// and decays like `exp(lower_rate * y)` below, `exp(-upper_rate * y)` above.
    pub fn balanced(lo: f64, hi: f64, lower_rate: f64, upper_rate: f64, count: usize) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return invalid(format!("spectral window [{lo}, {hi}] must be positive and ordered"));
        }
        if !(lower_rate > 0.0 && upper_rate > 0.0) {
            return invalid("decay rates must be positive");
        }
        if count < 16 {
            return invalid(format!("quadrature needs at least 16 nodes, got {count}"));
        }
        let order = DEFAULT_PANEL_ORDER;
        let panels = count.div_ceil(order) as f64;
        let core = (hi / lo).ln();
        // log-accuracy tau: truncation ~ exp(-tau), panel error ~ rho^{-2 order}
        let mismatch = |tau: f64| {
            let width = (core + tau / lower_rate + tau / upper_rate) / panels;
            let d = 2.0 * PI / width;
            let rho = d + (d * d + 1.0).sqrt();
            tau - 2.0 * order as f64 * rho.ln()
        };
        let (mut a, mut b) = (1e-3, 200.0);
        if mismatch(b) < 0.0 {
            a = b;
        } else {
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mismatch(mid) < 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
        }
        let tau = a;
        let lower = (tau / lower_rate).max(MIN_MARGIN);
        let upper = (tau / upper_rate).max(MIN_MARGIN);
        Self::log_window(lo.ln() - lower, hi.ln() + upper, count, order)
    }

    /// Rule for `lambda^{s/2-1} H (lambda + H)^{-1}` over a spectrum in `[lo, hi]`.
    pub fn for_fractional_power(lo: f64, hi: f64, s: f64, count: usize) -> Result<Self> {
        if !(s > 0.0 && s < 2.0) {
            return invalid(format!("fractional order must lie in (0,2), got {s}"));
        }
        Self::balanced(lo, hi, 0.5 * s, 1.0 - 0.5 * s, count)
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    pub fn count(&self) -> usize {
        self.nodes.len()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.y_min, self.y_max)
    }

    pub fn panel_order(&self) -> usize {
        self.panel_order
    }

    /// `lambda` range covered by the rule.
    pub fn lambda_range(&self) -> (f64, f64) {
        (self.y_min.exp(), self.y_max.exp())
    }

    /// `int g(y) dy`.
    pub fn integrate_y(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().map(|&(y, w)| w * g(y)).sum()
    }

    /// `int_0^inf g(lambda) d lambda` through `lambda = e^y`.
    pub fn integrate_lambda(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .map(|&(y, w)| {
                let lam = y.exp();
                w * lam * g(lam)
            })
            .sum()
    }

    /// Contributions of the first and last panels to `int g(lambda) d lambda`.
    pub fn edge_panels_lambda(&self, g: impl Fn(f64) -> f64) -> (f64, f64) {
        let m = self.panel_order;
        let part = |slice: &[(f64, f64)]| -> f64 {
            slice
                .iter()
                .map(|&(y, w)| {
                    let lam = y.exp();
                    w * lam * g(lam)
                })
                .sum()
        };
        let n = self.nodes.len();
        (part(&self.nodes[..m]), part(&self.nodes[n - m..]))
    }
}

/// `C_0(s) = sin(s pi / 2) / pi`, the normalizing constant of the resolvent
/// representation of fractional powers.
pub fn balakrishnan_constant(s: f64) -> f64 {
    (0.5 * s * PI).sin() / PI
}

/// Scalar `x^{s/2}` through the resolvent integral.
pub fn scalar_fractional_power(x: f64, s: f64, rule: &QuadratureRule) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let c0 = balakrishnan_constant(s);
    c0 * rule.integrate_y(|y| {
        let t = y.exp();
        (0.5 * s * y).exp() * x / (t + x)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for order in 1..12 {
            let rule = gauss_legendre(order);
            let wsum: f64 = rule.iter().map(|p| p.1).sum();
            assert!((wsum - 2.0).abs() < 1e-13, "order {order}");
            // exact for degree 2m-1
            let deg = 2 * order - 1;
            let integral: f64 = rule.iter().map(|&(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((integral - exact).abs() < 1e-13, "order {order}");
        }
    }

    #[test]
    fn constant_at_one() {
        assert!((balakrishnan_constant(1.0) - 0.318_309_886_2).abs() < 1e-10);
    }

    #[test]
    fn scalar_square_root() {
        let mut prev = f64::INFINITY;
        for count in [200, 400, 800, 1600] {
            let rule = QuadratureRule::for_fractional_power(4.0, 4.0, 1.0, count).unwrap();
            let err = (scalar_fractional_power(4.0, 1.0, &rule) - 2.0).abs();
            assert!(err < prev / 8.0, "{count}: {err:e}");
            prev = err;
        }
        assert!(prev < 1e-11);
    }

    #[test]
    fn rule_validation() {
        assert!(QuadratureRule::log_window(1.0, 0.0, 100, 4).is_err());
        assert!(QuadratureRule::log_window(0.0, 1.0, 8, 4).is_err());
        let r = QuadratureRule::balanced(0.1, 10.0, 0.5, 0.5, 400).unwrap();
        let (lo, hi) = r.lambda_range();
        assert!(lo <= 1e-4 && hi >= 1e4);
        assert!(r.nodes().iter().all(|n| n.1 > 0.0));
    }
}
