//! Deformed (Tsallis) logarithm and exponential, power means, and the
//! sum/product identities of the q-exponential.
//!
//! ```text
//! ln_q(u)  = (u^(1-q) - 1) / (1 - q)          ln_1(u)  = log u
//! exp_q(u) = [1 + (1-q) u]_+^(1/(1-q))         exp_1(u) = exp u
//! M_q(w, u) = (sum_i w_i u_i^(1-q))^(1/(1-q))   M_1(w, u) = exp(sum_i w_i log u_i)
//! ```
//!
//! Everything here is a pure function of its arguments.

use crate::error::{Error, Result};

/// Orders with `|q - 1|` below this use the logarithmic branch.
pub const Q_LOG_BRANCH_EPS: f64 = 1e-9;

/// Tolerance on `sum(weights) == 1` for power means.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Order parameter `q` of a deformed logarithm / power mean.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QOrder(f64);

impl QOrder {
    pub fn new(q: f64) -> Result<Self> {
        if !q.is_finite() {
            return Err(Error::domain(format!("q must be finite, got {q}")));
        }
        Ok(QOrder(q))
    }

    /// The order `q = (1 + alpha) / 2` associated with an alpha-divergence.
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        Self::new((1.0 + alpha) / 2.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `alpha = 2q - 1`.
    pub fn alpha(self) -> f64 {
        2.0 * self.0 - 1.0
    }

    /// True when `q` is close enough to 1 to use `log`/`exp`.
    pub fn is_log(self) -> bool {
        (self.0 - 1.0).abs() < Q_LOG_BRANCH_EPS
    }

    /// `1 - q`, or exactly zero on the logarithmic branch.
    pub fn one_minus_q(self) -> f64 {
        if self.is_log() {
            0.0
        } else {
            1.0 - self.0
        }
    }
}

impl TryFrom<f64> for QOrder {
    type Error = Error;

    fn try_from(q: f64) -> Result<Self> {
        QOrder::new(q)
    }
}

impl std::fmt::Display for QOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Deformed logarithm `ln_q(u)` for `u > 0`.
pub fn ln_q(u: f64, q: QOrder) -> Result<f64> {
    if u.is_nan() || u <= 0.0 {
        return Err(Error::domain(format!("ln_q needs u > 0, got {u}")));
    }
    Ok(ln_q_of_log(u.ln(), q))
}

/// `ln_q(exp(log_u))`, evaluated without leaving the log domain.
///
/// `log_u = -inf` maps to `-1/(1-q)` for `q < 1` and to `-inf` otherwise.
pub(crate) fn ln_q_of_log(log_u: f64, q: QOrder) -> f64 {
    if q.is_log() {
        return log_u;
    }
    let a = q.one_minus_q();
    (a * log_u).exp_m1() / a
}

/// Deformed exponential `exp_q(u)`.
///
/// The clamp `[.]_+` is part of the definition: for `q < 1` and
/// `1 + (1-q) u <= 0` the result is exactly 0. For `q > 1` the same
/// condition puts `u` past the pole, where the value is `+inf`.
pub fn exp_q(u: f64, q: QOrder) -> Result<f64> {
    Ok(log_exp_q(u, q)?.exp())
}

/// `log(exp_q(u))`, possibly `-inf` (clamped) or `+inf` (past the pole).
pub fn log_exp_q(u: f64, q: QOrder) -> Result<f64> {
    if u.is_nan() {
        return Err(Error::domain("exp_q of NaN"));
    }
    if q.is_log() {
        return Ok(u);
    }
    let a = q.one_minus_q();
    let au = a * u;
    if au <= -1.0 {
        return Ok(if a > 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        });
    }
    Ok(au.ln_1p() / a)
}

fn check_weights(weights: &[f64], n_values: usize) -> Result<()> {
    if weights.is_empty() || weights.len() != n_values {
        return Err(Error::precondition(format!(
            "power mean needs equal, non-empty lists (got {} weights, {} values)",
            weights.len(),
            n_values
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::precondition(
            "power mean weights must be finite and non-negative",
        ));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::precondition(format!(
            "power mean weights must sum to 1 (got {total})"
        )));
    }
    Ok(())
}

/// Weighted power mean of positive values.
pub fn power_mean(weights: &[f64], values: &[f64], q: QOrder) -> Result<f64> {
    check_weights(weights, values.len())?;
    if let Some(v) = values.iter().find(|v| v.is_nan() || **v <= 0.0) {
        return Err(Error::domain(format!(
            "power mean values must be positive, got {v}"
        )));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    Ok(log_power_mean(weights, &logs, q)?.exp())
}

/// Logarithm of the weighted power mean, taking the values as logs.
///
/// A `-inf` entry is a zero value. For `q < 1` it drops out of the sum; for
/// `q > 1` any zero value with positive weight makes the mean zero. Entries
/// with zero weight are ignored entirely.
pub fn log_power_mean(weights: &[f64], log_values: &[f64], q: QOrder) -> Result<f64> {
    check_weights(weights, log_values.len())?;
    if log_values.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::domain("log values must be finite or -inf"));
    }
    let active = || {
        weights
            .iter()
            .zip(log_values)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, l)| (*w, *l))
    };

    // Mean of identical values is that value, bit for bit.
    let first = active().next().map(|(_, l)| l).expect("weights sum to 1");
    if active().all(|(_, l)| l == first) {
        return Ok(first);
    }

    if q.is_log() {
        return Ok(active().map(|(w, l)| w * l).sum());
    }

    let a = q.one_minus_q();
    if a < 0.0 && active().any(|(_, l)| l == f64::NEG_INFINITY) {
        return Ok(f64::NEG_INFINITY);
    }
    let terms: Vec<f64> = active().map(|(w, l)| w.ln() + a * l).collect();
    let shift = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = terms.iter().map(|t| (t - shift).exp()).sum();
    Ok((shift + sum.ln()) / a)
}

/// Relative errors of the sum and product identities of `exp_q`:
///
/// ```text
/// exp_q(sum x_n)      = prod exp_q(x_n / (1 + (1-q) sum_{i<n} x_i))
/// prod exp_q(x_n)     = exp_q(sum x_n prod_{i<n} (1 + (1-q) x_i))
/// ```
pub fn q_identity_errors(xs: &[f64], q: QOrder) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(Error::precondition("identity check needs at least one x"));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("identity inputs must be finite"));
    }
    let a = q.one_minus_q();

    let total: f64 = xs.iter().sum();
    let sum_lhs = exp_q(total, q)?;
    let mut sum_rhs = 1.0;
    let mut partial = 0.0;
    for (n, &x) in xs.iter().enumerate() {
        let denom = 1.0 + a * partial;
        if denom.abs() <= 1e-14 {
            return Err(Error::Degenerate(format!(
                "1 + (1-q) * sum_(i<{n}) x_i vanishes"
            )));
        }
        sum_rhs *= exp_q(x / denom, q)?;
        partial += x;
    }

    let prod_lhs: f64 = xs
        .iter()
        .map(|&x| exp_q(x, q))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .product();
    let mut arg = 0.0;
    let mut running = 1.0;
    for &x in xs {
        arg += x * running;
        running *= 1.0 + a * x;
    }
    let prod_rhs = exp_q(arg, q)?;

    Ok((rel_err(sum_lhs, sum_rhs), rel_err(prod_lhs, prod_rhs)))
}

/// True iff both q-exponential identities hold to relative `tol` on `xs`.
pub fn verify_q_identities(xs: &[f64], q: QOrder, tol: f64) -> Result<bool> {
    let (s, p) = q_identity_errors(xs, q)?;
    Ok(s <= tol && p <= tol)
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: f64) -> QOrder {
        QOrder::new(v).unwrap()
    }

    #[test]
    fn ln_q_examples() {
        for qq in [-1.0, 0.0, 0.5, 1.0, 2.0, 7.0] {
            assert_eq!(ln_q(1.0, q(qq)).unwrap(), 0.0);
        }
        assert!((ln_q(4.0, q(0.5)).unwrap() - 2.0).abs() < 1e-15);
        assert!((ln_q(2.0, q(2.0)).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ln_q(3.0, q(1.0)).unwrap(), 3f64.ln());
    }

    #[test]
    fn ln_q_rejects_bad_input() {
        assert!(matches!(ln_q(0.0, q(0.5)), Err(Error::Domain(_))));
        assert!(matches!(ln_q(-1.0, q(1.0)), Err(Error::Domain(_))));
        assert!(matches!(ln_q(f64::NAN, q(2.0)), Err(Error::Domain(_))));
        assert!(QOrder::new(f64::NAN).is_err());
        assert!(QOrder::new(f64::INFINITY).is_err());
    }

    #[test]
    fn exp_q_examples() {
        for qq in [-1.0, 0.0, 0.5, 1.0, 2.0] {
            assert_eq!(exp_q(0.0, q(qq)).unwrap(), 1.0);
        }
        assert!((exp_q(2.0, q(0.5)).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(exp_q(-2.0, q(0.0)).unwrap(), 0.0);
        // exactly on the clamp boundary
        assert_eq!(exp_q(-1.0, q(0.0)).unwrap(), 0.0);
        // past the pole for q > 1
        assert_eq!(exp_q(2.0, q(2.0)).unwrap(), f64::INFINITY);
        assert!(exp_q(f64::NAN, q(0.3)).is_err());
    }

    #[test]
    fn log_branch_threshold() {
        assert!(q(1.0 + 5e-10).is_log());
        assert!(!q(1.0 + 2e-9).is_log());
        assert_eq!(q(1.0 + 5e-10).one_minus_q(), 0.0);
    }

    #[test]
    fn power_mean_examples() {
        for qq in [-2.0, 0.0, 0.5, 1.0, 3.0] {
            assert_eq!(power_mean(&[0.5, 0.5], &[1.0, 1.0], q(qq)).unwrap(), 1.0);
        }
        let arith = power_mean(&[0.25, 0.75], &[2.0, 4.0], q(0.0)).unwrap();
        assert!((arith - 3.5).abs() < 1e-14);
        let geo = power_mean(&[0.5, 0.5], &[1.0, 4.0], q(1.0)).unwrap();
        assert!((geo - 2.0).abs() < 1e-15);
    }

    #[test]
    fn power_mean_errors() {
        assert!(matches!(
            power_mean(&[0.5, 0.5], &[0.0, 1.0], q(0.5)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            power_mean(&[0.5, 0.6], &[1.0, 1.0], q(0.5)),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            power_mean(&[1.0], &[1.0, 2.0], q(0.5)),
            Err(Error::Precondition(_))
        ));
        assert!(power_mean(&[], &[], q(0.5)).is_err());
    }

    #[test]
    fn log_power_mean_examples() {
        let ninf = f64::NEG_INFINITY;
        for qq in [0.0, 0.5, 1.0, 2.0] {
            assert_eq!(
                log_power_mean(&[1.0, 0.0], &[-3.7, 12.0], q(qq)).unwrap(),
                -3.7
            );
            assert_eq!(
                log_power_mean(&[1.0, 0.0], &[-3.7, ninf], q(qq)).unwrap(),
                -3.7
            );
        }
        let geo = log_power_mean(&[0.5, 0.5], &[0.0, 4f64.ln()], q(1.0)).unwrap();
        assert!((geo - 2f64.ln()).abs() < 1e-15);
        let lim = log_power_mean(&[0.3, 0.7], &[ninf, 0.0], q(0.5)).unwrap();
        assert!((lim - 2.0 * 0.7f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_power_mean_zero_values() {
        let ninf = f64::NEG_INFINITY;
        assert_eq!(
            log_power_mean(&[0.5, 0.5], &[ninf, ninf], q(0.5)).unwrap(),
            ninf
        );
        assert_eq!(
            log_power_mean(&[0.5, 0.5], &[ninf, 0.0], q(2.0)).unwrap(),
            ninf
        );
        assert_eq!(
            log_power_mean(&[0.5, 0.5], &[ninf, 0.0], q(1.0)).unwrap(),
            ninf
        );
        assert!(log_power_mean(&[0.5, 0.5], &[f64::NAN, 0.0], q(0.5)).is_err());
    }

    #[test]
    fn log_power_mean_survives_huge_magnitudes() {
        // direct exponentiation would overflow / underflow here
        let v = log_power_mean(&[0.5, 0.5], &[-2000.0, -2001.0], q(0.0)).unwrap();
        let expected = -2000.0 + (0.5 + 0.5 * (-1f64).exp()).ln();
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn identity_examples() {
        assert!(verify_q_identities(&[0.37], q(0.5), 0.0).unwrap());
        assert!(verify_q_identities(&[0.1, 0.2, -0.05], q(0.5), 1e-10).unwrap());
        assert!(verify_q_identities(&[0.3, 0.4], q(1.0), 1e-15).unwrap());
    }

    #[test]
    fn identity_degenerate_denominator() {
        // 1 + (1 - 2) * 1 = 0 before the second term
        let r = q_identity_errors(&[1.0, 0.2], q(2.0));
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }
}
