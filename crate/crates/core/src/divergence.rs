//! α-divergences and the extended KL divergence between unnormalized 1-d
//! measures, computed by composite Gauss–Legendre quadrature.
//!
//! Densities are passed as log-density closures; `-inf` means zero mass.

use crate::error::{Error, Result};
use crate::qpath::QPath;

/// Tail mass allowed outside the grid, relative to the mass inside.
pub const MASS_CAPTURE_TOL: f64 = 1e-8;

/// Integration nodes and positive weights on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(x) and P_n'(x) by the three-term recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if 2 * i + 1 == n {
            x = 0.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

impl QuadratureGrid {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::precondition(
                "points and weights must be non-empty and equal length",
            ));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) || points.iter().any(|p| !p.is_finite()) {
            return Err(Error::precondition(
                "quadrature points must be finite and strictly increasing",
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::precondition("quadrature weights must be positive"));
        }
        Ok(QuadratureGrid { points, weights })
    }

    /// `order`-point Gauss–Legendre rule on each panel between consecutive
    /// `edges`.
    pub fn from_panels(edges: &[f64], order: usize) -> Result<Self> {
        if edges.len() < 2 || order == 0 {
            return Err(Error::precondition(
                "need at least one panel and a positive order",
            ));
        }
        let (x, w) = gauss_legendre(order);
        let mut points = Vec::with_capacity((edges.len() - 1) * order);
        let mut weights = Vec::with_capacity(points.capacity());
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (xi, wi) in x.iter().zip(&w) {
                points.push(mid + half * xi);
                weights.push(half * wi);
            }
        }
        Self::new(points, weights)
    }

    /// Equal panels on `[lo, hi]`.
    pub fn composite(lo: f64, hi: f64, panels: usize, order: usize) -> Result<Self> {
        if !(lo < hi) || panels == 0 {
            return Err(Error::precondition("need lo < hi and at least one panel"));
        }
        let edges: Vec<f64> = (0..=panels)
            .map(|i| lo + (hi - lo) * i as f64 / panels as f64)
            .collect();
        Self::from_panels(&edges, order)
    }

    /// 4096 nodes (256 panels of 16) on `[-40, 40]`.
    pub fn standard() -> Self {
        Self::composite(-40.0, 40.0, 256, 16).expect("valid grid")
    }

    /// Symmetric grid on `[-half_width, half_width]` whose panels grow
    /// geometrically away from zero, for heavy tails.
    pub fn log_spaced(half_width: f64, panels_per_side: usize, order: usize) -> Result<Self> {
        if !(half_width > 1e-2) || panels_per_side < 2 {
            return Err(Error::precondition(
                "need half_width > 0.01 and at least two panels per side",
            ));
        }
        let (l0, l1) = (1e-2f64.ln(), half_width.ln());
        let mut right: Vec<f64> = (0..panels_per_side)
            .map(|i| (l0 + (l1 - l0) * i as f64 / (panels_per_side - 1) as f64).exp())
            .collect();
        *right.last_mut().expect("non-empty") = half_width;
        let mut edges: Vec<f64> = right.iter().rev().map(|x| -x).collect();
        edges.push(0.0);
        edges.extend(right);
        Self::from_panels(&edges, order)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.points[0], self.points[self.points.len() - 1])
    }

    /// `∫ g` where `g` is evaluated pointwise.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * g(*x))
            .sum()
    }

    /// `∫ exp(log_f)`.
    pub fn mass(&self, log_f: impl Fn(f64) -> f64) -> f64 {
        self.integrate(|x| log_f(x).exp())
    }

    /// Estimated mass beyond the grid on both sides, assuming the log
    /// density keeps decaying at its slope at the outermost nodes.
    pub fn tail_mass_estimate(&self, log_f: impl Fn(f64) -> f64) -> f64 {
        let n = self.points.len();
        if n < 2 {
            return f64::INFINITY;
        }
        let one_side = |edge: f64, inner: f64| {
            let (le, li) = (log_f(edge), log_f(inner));
            if le == f64::NEG_INFINITY {
                return 0.0;
            }
            // decay rate of log f moving outward
            let rate = (li - le) / (edge - inner).abs();
            if !(rate > 0.0) {
                return f64::INFINITY;
            }
            le.exp() / rate
        };
        one_side(self.points[0], self.points[1]) + one_side(self.points[n - 1], self.points[n - 2])
    }

    /// Errors when the estimated tail mass exceeds `MASS_CAPTURE_TOL` of the
    /// captured mass.
    pub fn check_covers(&self, log_f: impl Fn(f64) -> f64) -> Result<f64> {
        let total = self.mass(&log_f);
        let tail = self.tail_mass_estimate(&log_f);
        if !(tail <= MASS_CAPTURE_TOL * total) && !(tail == 0.0 && total == 0.0) {
            return Err(Error::MassCapture { tail, total });
        }
        Ok(total)
    }
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self::standard()
    }
}

/// Errors unless the grid integrates `exp(log_f)` to within `tol` of
/// `known_mass`; returns the quadrature mass.
pub fn check_mass_capture(
    log_f: impl Fn(f64) -> f64,
    known_mass: f64,
    grid: &QuadratureGrid,
    tol: f64,
) -> Result<f64> {
    let total = grid.mass(log_f);
    if !((total - known_mass).abs() <= tol) {
        return Err(Error::MassCapture {
            tail: (known_mass - total).abs(),
            total,
        });
    }
    Ok(total)
}

fn check_log_value(v: f64) -> Result<f64> {
    if v.is_nan() || v == f64::INFINITY {
        return Err(Error::domain(format!(
            "log-density must be finite or -inf, got {v}"
        )));
    }
    Ok(v)
}

/// `D_α[q̃ : p̃]` with `q̃ = exp(f)` and `p̃ = exp(g)`:
///
/// ```text
/// 4/(1-α²) ∫ [(1-α)/2 q̃ + (1+α)/2 p̃ - q̃^((1-α)/2) p̃^((1+α)/2)]
/// ```
///
/// The integrand is non-negative pointwise. As α → 1 this tends to
/// `KL[p̃ : q̃]` and as α → -1 to `KL[q̃ : p̃]`; both limits are refused.
pub fn alpha_divergence(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    alpha: f64,
    grid: &QuadratureGrid,
) -> Result<f64> {
    if !alpha.is_finite() {
        return Err(Error::domain("alpha must be finite"));
    }
    if alpha == 1.0 || alpha == -1.0 {
        return Err(Error::KlRoute(alpha));
    }
    grid.check_covers(&f)?;
    grid.check_covers(&g)?;
    let a = 0.5 * (1.0 - alpha);
    let b = 0.5 * (1.0 + alpha);
    let pre = 4.0 / (1.0 - alpha * alpha);
    let mut total = 0.0;
    for (x, w) in grid.points.iter().zip(&grid.weights) {
        let (lf, lg) = (check_log_value(f(*x))?, check_log_value(g(*x))?);
        if lf == lg {
            continue;
        }
        let mixed = if (a > 0.0 && lf == f64::NEG_INFINITY) || (b > 0.0 && lg == f64::NEG_INFINITY)
        {
            0.0
        } else {
            (a * lf + b * lg).exp()
        };
        total += w * pre * (a * lf.exp() + b * lg.exp() - mixed);
    }
    Ok(total)
}

/// Extended KL divergence `∫ q̃ log(q̃/p̃) - ∫ q̃ + ∫ p̃` with `q̃ = exp(f)`,
/// `p̃ = exp(g)`. Returns `+inf` when `p̃` vanishes where `q̃` does not.
pub fn kl_unnormalized(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    grid: &QuadratureGrid,
) -> Result<f64> {
    grid.check_covers(&f)?;
    grid.check_covers(&g)?;
    let mut total = 0.0;
    for (x, w) in grid.points.iter().zip(&grid.weights) {
        let (lf, lg) = (check_log_value(f(*x))?, check_log_value(g(*x))?);
        if lf == lg {
            continue;
        }
        if lf == f64::NEG_INFINITY {
            total += w * lg.exp();
            continue;
        }
        if lg == f64::NEG_INFINITY {
            return Ok(f64::INFINITY);
        }
        let qf = lf.exp();
        total += w * (qf * (lf - lg) - qf + lg.exp());
    }
    Ok(total)
}

/// `D_α[π̃_i : r̃]`, routing the limits α = 1 to `KL[r̃ : π̃_i]` and α = -1
/// to `KL[π̃_i : r̃]`.
fn divergence_to(
    pi: impl Fn(f64) -> f64,
    r: impl Fn(f64) -> f64,
    alpha: f64,
    grid: &QuadratureGrid,
) -> Result<f64> {
    if alpha == 1.0 {
        kl_unnormalized(r, pi, grid)
    } else if alpha == -1.0 {
        kl_unnormalized(pi, r, grid)
    } else {
        alpha_divergence(pi, r, alpha, grid)
    }
}

/// `(1-β) D_α[π̃_0 : r̃] + β D_α[π̃_T : r̃]` for a 1-d path. The q-path
/// density at `(q, β)` minimizes this over `r̃` when `α = 2q - 1`.
pub fn variational_objective(
    r_log: impl Fn(f64) -> f64,
    path: &QPath,
    beta: f64,
    alpha: f64,
    grid: &QuadratureGrid,
) -> Result<f64> {
    if path.dim() != 1 {
        return Err(Error::precondition("variational objective is 1-d only"));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::domain(format!(
            "beta must lie in [0, 1], got {beta}"
        )));
    }
    let base = |x: f64| path.base().log_density(&[x]);
    let target = |x: f64| path.target().log_density(&[x]);
    let mut total = 0.0;
    if beta < 1.0 {
        total += (1.0 - beta) * divergence_to(base, &r_log, alpha, grid)?;
    }
    if beta > 0.0 {
        total += beta * divergence_to(target, &r_log, alpha, grid)?;
    }
    Ok(total)
}
