//! Power-mean ("q-") paths between two densities.
//!
//! For weights `(1 - beta, beta)` the intermediate unnormalized density is
//!
//! ```text
//! p_beta(z) = [(1 - beta) p0(z)^(1-q) + beta p1(z)^(1-q)]^(1/(1-q))
//!           = p0(z) exp_q(beta * ln_q(p1(z) / p0(z)))
//! ```
//!
//! with the geometric path `p0^(1-beta) p1^beta` at `q = 1` and the
//! arithmetic mixture at `q = 0`. Intermediate densities are only ever
//! evaluated unnormalized.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::ais::{effective_sample_size, log_mean_exp};
use crate::deformed::{ln_q_of_log, log_exp_q, log_power_mean, QOrder};
use crate::density::{
    make_gaussian, make_student_t, q_from_nu, Covariance, DensityHandle, GaussianSpec, StudentTSpec,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct QPath {
    base: DensityHandle,
    target: DensityHandle,
    q: QOrder,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::domain(format!(
            "beta must lie in [0, 1], got {beta}"
        )));
    }
    Ok(())
}

/// Combine endpoint log-densities into the path log-density.
pub(crate) fn combine(beta: f64, l0: f64, l1: f64, q: QOrder) -> Result<f64> {
    if l0.is_nan() || l1.is_nan() {
        return Err(Error::domain("endpoint log-density is NaN"));
    }
    if beta == 0.0 {
        return Ok(l0);
    }
    if beta == 1.0 {
        return Ok(l1);
    }
    if l0 == l1 {
        return Ok(l0);
    }
    if q.is_log() {
        if l0 == f64::NEG_INFINITY || l1 == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        return Ok((1.0 - beta) * l0 + beta * l1);
    }
    log_power_mean(&[1.0 - beta, beta], &[l0, l1], q)
}

impl QPath {
    pub fn new(base: DensityHandle, target: DensityHandle, q: QOrder) -> Result<Self> {
        if base.dim() != target.dim() {
            return Err(Error::precondition(format!(
                "endpoint dimensions differ ({} vs {})",
                base.dim(),
                target.dim()
            )));
        }
        Ok(QPath { base, target, q })
    }

    pub fn base(&self) -> &DensityHandle {
        &self.base
    }

    pub fn target(&self) -> &DensityHandle {
        &self.target
    }

    pub fn q(&self) -> QOrder {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// The same family of intermediates traversed from target to base:
    /// `reversed().log_density_at(1 - beta, z) == log_density_at(beta, z)`.
    pub fn reversed(&self) -> QPath {
        QPath {
            base: self.target.clone(),
            target: self.base.clone(),
            q: self.q,
        }
    }

    fn check_point(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::precondition(format!(
                "point has dimension {}, path has {}",
                z.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `log p_beta(z)` (unnormalized).
    pub fn log_density_at(&self, beta: f64, z: &[f64]) -> Result<f64> {
        check_beta(beta)?;
        self.check_point(z)?;
        if beta == 0.0 {
            return Ok(self.base.log_density(z));
        }
        if beta == 1.0 {
            return Ok(self.target.log_density(z));
        }
        combine(
            beta,
            self.base.log_density(z),
            self.target.log_density(z),
            self.q,
        )
    }

    /// Gradient of `log p_beta` at `z`.
    pub fn grad_log_density_at(&self, beta: f64, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self.log_density_and_grad(beta, z)?.1)
    }

    /// Log-density and its gradient, sharing the endpoint evaluations.
    ///
    /// The gradient is `r0 grad l0 + r1 grad l1` with responsibilities
    /// `r_i ∝ w_i p_i^(1-q)`, evaluated as a two-term softmax.
    pub fn log_density_and_grad(&self, beta: f64, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_beta(beta)?;
        self.check_point(z)?;
        let (r0, r1, value) = if beta == 0.0 {
            (1.0, 0.0, self.base.log_density(z))
        } else if beta == 1.0 {
            (0.0, 1.0, self.target.log_density(z))
        } else {
            let l0 = self.base.log_density(z);
            let l1 = self.target.log_density(z);
            let value = combine(beta, l0, l1, self.q)?;
            if value == f64::NEG_INFINITY {
                return Err(Error::ZeroDensity);
            }
            let (r0, r1) = if self.q.is_log() {
                (1.0 - beta, beta)
            } else {
                let a = self.q.one_minus_q();
                let t0 = (1.0 - beta).ln() + a * l0;
                let t1 = beta.ln() + a * l1;
                let m = t0.max(t1);
                let (e0, e1) = ((t0 - m).exp(), (t1 - m).exp());
                (e0 / (e0 + e1), e1 / (e0 + e1))
            };
            (r0, r1, value)
        };
        if value == f64::NEG_INFINITY {
            return Err(Error::ZeroDensity);
        }
        let mut grad = vec![0.0; self.dim()];
        for (r, handle) in [(r0, &self.base), (r1, &self.target)] {
            if r > 0.0 {
                for (g, d) in grad.iter_mut().zip(handle.grad_log_density(z)) {
                    *g += r * d;
                }
            }
        }
        Ok((value, grad))
    }

    /// `phi_q(z) = ln_q(p1(z) / p0(z))`, the sufficient statistic of the
    /// path's q-exponential family.
    pub fn sufficient_statistic(&self, z: &[f64]) -> Result<f64> {
        self.check_point(z)?;
        let l0 = self.base.log_density(z);
        let l1 = self.target.log_density(z);
        if l0.is_nan() || l1.is_nan() {
            return Err(Error::domain("endpoint log-density is NaN"));
        }
        if l0 == f64::NEG_INFINITY {
            return Err(Error::domain("base density vanishes at z"));
        }
        Ok(ln_q_of_log(l1 - l0, self.q))
    }

    /// `log[p0(z) exp_q(beta * phi_q(z))]`: the q-exponential-family form of
    /// the path density, computed independently of [`Self::log_density_at`].
    pub fn q_exp_form_check(&self, beta: f64, z: &[f64]) -> Result<f64> {
        check_beta(beta)?;
        let phi = self.sufficient_statistic(z)?;
        let l0 = self.base.log_density(z);
        if beta == 0.0 {
            return Ok(l0);
        }
        Ok(l0 + log_exp_q(beta * phi, self.q)?)
    }

    /// Monte Carlo estimate of `Z_beta = ∫ p_beta`, as
    /// `Z0 * E_{pi0}[exp_q(beta * phi_q(z))]`.
    ///
    /// `std_error` is the delta-method standard error of `log_z`.
    pub fn estimate_partition(
        &self,
        beta: f64,
        n: usize,
        rng: &mut dyn RngCore,
    ) -> Result<PartitionEstimate> {
        check_beta(beta)?;
        if n == 0 {
            return Err(Error::precondition("need at least one sample"));
        }
        let log_z0 = self.base.log_normalizer().ok_or_else(|| {
            Error::Capability(format!("{} has no known normalizer", self.base.describe()))
        })?;
        if !self.base.can_sample() {
            return Err(Error::Capability(format!(
                "{} has no exact sampler",
                self.base.describe()
            )));
        }
        let mut summands = Vec::with_capacity(n);
        for _ in 0..n {
            let z = self.base.sample(rng)?;
            let s = if beta == 0.0 {
                0.0
            } else {
                log_exp_q(beta * self.sufficient_statistic(&z)?, self.q)?
            };
            summands.push(s);
        }
        let lme = log_mean_exp(&summands)?;
        let std_error = if n < 2 || lme == f64::NEG_INFINITY {
            0.0
        } else {
            // relative standard error of the mean weight
            let ratios: Vec<f64> = summands.iter().map(|s| (s - lme).exp()).collect();
            let var = ratios.iter().map(|r| (r - 1.0).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Ok(PartitionEstimate {
            log_z: log_z0 + lme,
            std_error,
            ess: effective_sample_size(&summands).unwrap_or(0.0),
            n_samples: n,
        })
    }
}

/// Monotone sequence `0 = beta_0 < ... < beta_T = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    betas: Vec<f64>,
}

impl Schedule {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.len() < 2 {
            return Err(Error::precondition("schedule needs at least two betas"));
        }
        if betas[0] != 0.0 || *betas.last().unwrap() != 1.0 {
            return Err(Error::precondition("schedule must start at 0 and end at 1"));
        }
        if betas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::precondition("schedule must be strictly increasing"));
        }
        Ok(Schedule { betas })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Number of annealing steps `T` (one less than the number of betas).
    pub fn steps(&self) -> usize {
        self.betas.len() - 1
    }

    /// `beta -> 1 - beta`, traversed backwards.
    pub fn reflected(&self) -> Schedule {
        let betas = self.betas.iter().rev().map(|b| 1.0 - b).collect::<Vec<_>>();
        Schedule { betas }
    }
}

/// `(0, 1/T, ..., 1)`.
pub fn linear_schedule(steps: usize) -> Result<Schedule> {
    if steps == 0 {
        return Err(Error::precondition("linear schedule needs T >= 1"));
    }
    let t = steps as f64;
    Schedule::new((0..=steps).map(|i| i as f64 / t).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionEstimate {
    pub log_z: f64,
    pub std_error: f64,
    /// Effective sample size of the importance weights.
    pub ess: f64,
    pub n_samples: usize,
}

/// Map `(theta, psi_q)` of `p0 exp_q(theta phi - psi_q)` to the
/// multiplicative form `p0 exp_q(beta phi) / Z`, returning `(beta, log Z)`.
pub fn reparameterize_theta_to_beta(theta: f64, psi_q: f64, q: QOrder) -> Result<(f64, f64)> {
    if !(theta.is_finite() && psi_q.is_finite()) {
        return Err(Error::domain("theta and psi_q must be finite"));
    }
    if q.is_log() {
        return Ok((theta, psi_q));
    }
    let a = q.one_minus_q();
    let denom = 1.0 - a * psi_q;
    if denom <= 0.0 {
        return Err(Error::Degenerate(format!(
            "1 + (1-q)(-psi_q) = {denom} is not positive"
        )));
    }
    Ok((theta / denom, -denom.ln() / a))
}

/// Inverse of [`reparameterize_theta_to_beta`].
pub fn reparameterize_beta_to_theta(beta: f64, log_z: f64, q: QOrder) -> Result<(f64, f64)> {
    if !(beta.is_finite() && log_z.is_finite()) {
        return Err(Error::domain("beta and log_z must be finite"));
    }
    if q.is_log() {
        return Ok((beta, log_z));
    }
    let a = q.one_minus_q();
    let denom = (-a * log_z).exp();
    Ok((beta * denom, -(denom - 1.0) / a))
}

/// Two endpoints drawn from one parametric family.
#[derive(Debug, Clone)]
pub enum FamilyEndpoints {
    /// Gaussians joined by the geometric (`q = 1`) path.
    GaussianGeometric(GaussianSpec, GaussianSpec),
    /// Student-t densities with a shared `nu`, joined by the path of order
    /// `q = (nu + d + 2) / (nu + d)`.
    StudentTQ(StudentTSpec, StudentTSpec),
}

/// Coefficients of `c + b^T z + z^T A z`.
#[derive(Debug, Clone)]
struct Quadratic {
    c: f64,
    b: DVector<f64>,
    a: DMatrix<f64>,
}

impl Quadratic {
    fn lerp(&self, other: &Quadratic, beta: f64) -> Quadratic {
        Quadratic {
            c: (1.0 - beta) * self.c + beta * other.c,
            b: &self.b * (1.0 - beta) + &other.b * beta,
            a: &self.a * (1.0 - beta) + &other.a * beta,
        }
    }
}

fn dense(cov: &Covariance) -> DMatrix<f64> {
    match cov {
        Covariance::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
        Covariance::Full(rows) => DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j]),
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    // symmetrize to absorb rounding from the inversions
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| 0.5 * (m[(i, j)] + m[(j, i)]))
                .collect()
        })
        .collect()
}

fn invert(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::precondition("interpolated parameter matrix is singular"))
}

/// Natural parameters of a normalized Gaussian: `log N(z) = c + b^T z + z^T A z`.
fn gaussian_natural(spec: &GaussianSpec) -> Result<Quadratic> {
    let handle = make_gaussian(spec.clone())?;
    let prec = invert(&dense(&spec.covariance))?;
    let mu = DVector::from_column_slice(&spec.mean);
    let log_at_mean = handle.log_density(&spec.mean);
    Ok(Quadratic {
        c: log_at_mean - 0.5 * mu.dot(&(&prec * &mu)),
        b: &prec * &mu,
        a: prec * -0.5,
    })
}

/// Natural parameters of a normalized Student-t in its q-exponential form
/// `t(z) = exp_q(c + b^T z + z^T A z)`.
fn student_natural(spec: &StudentTSpec, q: QOrder) -> Result<Quadratic> {
    let handle = make_student_t(spec.clone())?;
    let nu = spec.dof;
    let a = q.one_minus_q();
    let prec = invert(&dense(&spec.scale))?;
    let mu = DVector::from_column_slice(&spec.mean);
    // C^(1-q) where C is the density at the mode
    let ca = (a * handle.log_density(&spec.mean)).exp();
    let k = ca / (a * nu);
    Ok(Quadratic {
        c: (ca * (1.0 + mu.dot(&(&prec * &mu)) / nu) - 1.0) / a,
        b: &prec * &mu * (-2.0 * k),
        a: prec * k,
    })
}

/// Checks that the path between two same-family endpoints stays in the
/// family: builds the member with natural parameter
/// `(1 - beta) theta_0 + beta theta_1` and returns the largest deviation
/// `|log p_beta(z) - log(c * member(z))|` over `grid`, with `c` fitted at the
/// grid midpoint.
pub fn interpolated_member_check(
    endpoints: &FamilyEndpoints,
    q: QOrder,
    beta: f64,
    grid: &[Vec<f64>],
) -> Result<f64> {
    check_beta(beta)?;
    if grid.is_empty() {
        return Err(Error::precondition("grid must be non-empty"));
    }
    let (path, member) = match endpoints {
        FamilyEndpoints::GaussianGeometric(s0, s1) => {
            if !q.is_log() {
                return Err(Error::precondition(format!(
                    "Gaussian endpoints stay in family only on the q = 1 path, got q = {q}"
                )));
            }
            let path = QPath::new(make_gaussian(s0.clone())?, make_gaussian(s1.clone())?, q)?;
            let member = if beta == 0.0 {
                make_gaussian(s0.clone())?
            } else if beta == 1.0 {
                make_gaussian(s1.clone())?
            } else {
                let nat = gaussian_natural(s0)?.lerp(&gaussian_natural(s1)?, beta);
                let prec = &nat.a * -2.0;
                let cov = invert(&prec)?;
                let mean = &cov * &nat.b;
                make_gaussian(GaussianSpec {
                    mean: mean.iter().copied().collect(),
                    covariance: Covariance::Full(to_rows(&cov)),
                })?
            };
            (path, member)
        }
        FamilyEndpoints::StudentTQ(s0, s1) => {
            if s0.dof != s1.dof {
                return Err(Error::precondition(format!(
                    "Student-t endpoints need equal dof ({} vs {})",
                    s0.dof, s1.dof
                )));
            }
            let dim = s0.mean.len();
            let order = q_from_nu(s0.dof, dim)?;
            if (q.value() - order).abs() > 1e-12 {
                return Err(Error::precondition(format!(
                    "Student-t with nu = {} in {dim}-d has order q = {order}, got {q}",
                    s0.dof
                )));
            }
            let path = QPath::new(make_student_t(s0.clone())?, make_student_t(s1.clone())?, q)?;
            let member = if beta == 0.0 {
                make_student_t(s0.clone())?
            } else if beta == 1.0 {
                make_student_t(s1.clone())?
            } else {
                let nat = student_natural(s0, q)?.lerp(&student_natural(s1, q)?, beta);
                let a = q.one_minus_q();
                let m = &nat.a * a;
                let m_inv = invert(&m)?;
                let mean = &m_inv * &nat.b * (-0.5 * a);
                let k = 1.0 + a * nat.c - mean.dot(&(&m * &mean));
                if k <= 0.0 {
                    return Err(Error::precondition("interpolated member is not a density"));
                }
                let scale = m_inv * (k / s0.dof);
                make_student_t(StudentTSpec {
                    mean: mean.iter().copied().collect(),
                    scale: Covariance::Full(to_rows(&scale)),
                    dof: s0.dof,
                })?
            };
            (path, member)
        }
    };

    let deviation =
        |z: &[f64]| -> Result<f64> { Ok(path.log_density_at(beta, z)? - member.log_density(z)) };
    let offset = deviation(&grid[grid.len() / 2])?;
    let mut worst: f64 = 0.0;
    for z in grid {
        worst = worst.max((deviation(z)? - offset).abs());
    }
    Ok(worst)
}
