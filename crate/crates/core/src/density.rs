//! Density handles: Gaussian, Student-t and user-supplied densities.
//!
//! A [`DensityHandle`] is a cheap, cloneable, immutable reference to
//! something that can evaluate a log-density, and optionally its gradient,
//! an exact sampler and a known log-normalizer.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Relative step used by the central finite-difference gradient fallback.
pub const FD_STEP: f64 = 1e-5;

/// Capabilities a density may provide.
pub trait Density: Send + Sync {
    fn dim(&self) -> usize;

    /// Log of the (possibly unnormalized) density; finite or `-inf`.
    fn log_density(&self, z: &[f64]) -> f64;

    fn grad_log_density(&self, _z: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// One exact draw from the normalized density, if supported.
    fn sample(&self, _rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        None
    }

    /// `log Z` of `exp(log_density)`; `Some(0.0)` for a normalized density.
    fn log_normalizer(&self) -> Option<f64> {
        None
    }

    fn describe(&self) -> String {
        "custom".to_string()
    }
}

/// Shared, immutable handle on a [`Density`].
#[derive(Clone)]
pub struct DensityHandle(Arc<dyn Density>);

impl fmt::Debug for DensityHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityHandle")
            .field("kind", &self.0.describe())
            .field("dim", &self.0.dim())
            .finish()
    }
}

impl DensityHandle {
    pub fn new(density: impl Density + 'static) -> Self {
        DensityHandle(Arc::new(density))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn log_density(&self, z: &[f64]) -> f64 {
        self.0.log_density(z)
    }

    pub fn has_gradient(&self) -> bool {
        let probe = vec![0.0; self.dim()];
        self.0.grad_log_density(&probe).is_some()
    }

    /// Analytic gradient when available, otherwise central differences.
    pub fn grad_log_density(&self, z: &[f64]) -> Vec<f64> {
        self.0
            .grad_log_density(z)
            .unwrap_or_else(|| finite_difference_grad(|x| self.0.log_density(x), z))
    }

    pub fn can_sample(&self) -> bool {
        let mut probe = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        self.0.sample(&mut probe).is_some()
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.0
            .sample(rng)
            .ok_or_else(|| Error::Capability(format!("{} has no exact sampler", self.0.describe())))
    }

    pub fn log_normalizer(&self) -> Option<f64> {
        self.0.log_normalizer()
    }

    pub fn describe(&self) -> String {
        self.0.describe()
    }

    /// The same density multiplied by `exp(log_c)`.
    pub fn scaled(&self, log_c: f64) -> DensityHandle {
        DensityHandle::new(Scaled {
            inner: self.clone(),
            log_c,
        })
    }
}

/// Central finite differences with step `h_i = FD_STEP * (1 + |z_i|)`.
pub fn finite_difference_grad(f: impl Fn(&[f64]) -> f64, z: &[f64]) -> Vec<f64> {
    let mut x = z.to_vec();
    (0..z.len())
        .map(|i| {
            let h = FD_STEP * (1.0 + z[i].abs());
            x[i] = z[i] + h;
            let up = f(&x);
            x[i] = z[i] - h;
            let down = f(&x);
            x[i] = z[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

struct Scaled {
    inner: DensityHandle,
    log_c: f64,
}

impl Density for Scaled {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn log_density(&self, z: &[f64]) -> f64 {
        self.inner.log_density(z) + self.log_c
    }
    fn grad_log_density(&self, z: &[f64]) -> Option<Vec<f64>> {
        self.inner.0.grad_log_density(z)
    }
    fn sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        self.inner.0.sample(rng)
    }
    fn log_normalizer(&self) -> Option<f64> {
        self.inner.log_normalizer().map(|l| l + self.log_c)
    }
    fn describe(&self) -> String {
        format!("{} * exp({})", self.inner.describe(), self.log_c)
    }
}

/// Covariance-like matrix: diagonal or full.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl Covariance {
    pub fn dim(&self) -> usize {
        match self {
            Covariance::Diagonal(d) => d.len(),
            Covariance::Full(m) => m.len(),
        }
    }

    fn to_matrix(&self) -> Result<DMatrix<f64>> {
        match self {
            Covariance::Diagonal(d) => Ok(DMatrix::from_diagonal(&DVector::from_column_slice(d))),
            Covariance::Full(rows) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::precondition("matrix must be square"));
                }
                Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        }
    }
}

/// Precomputed factorization of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
struct SpdFactor {
    chol_lower: DMatrix<f64>,
    inverse: DMatrix<f64>,
    log_det: f64,
}

impl SpdFactor {
    fn new(m: &Covariance, what: &str) -> Result<Self> {
        let m = m.to_matrix()?;
        if m.nrows() == 0 {
            return Err(Error::precondition(format!("{what} must be non-empty")));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::precondition(format!(
                "{what} has non-finite entries"
            )));
        }
        let scale = m.amax().max(1.0);
        if (&m - m.transpose()).amax() > 1e-12 * scale {
            return Err(Error::precondition(format!("{what} is not symmetric")));
        }
        let chol = m
            .clone()
            .cholesky()
            .ok_or_else(|| Error::precondition(format!("{what} is not positive definite")))?;
        let lower = chol.l();
        let log_det = 2.0 * lower.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let inverse = chol.inverse();
        Ok(SpdFactor {
            chol_lower: lower,
            inverse,
            log_det,
        })
    }

    /// `(z - mean)^T M^{-1} (z - mean)` and `M^{-1} (z - mean)`.
    fn mahalanobis(&self, z: &[f64], mean: &[f64]) -> (f64, DVector<f64>) {
        let diff = DVector::from_iterator(z.len(), z.iter().zip(mean).map(|(a, b)| a - b));
        let solved = &self.inverse * &diff;
        (diff.dot(&solved), solved)
    }

    fn colour(&self, white: DVector<f64>) -> DVector<f64> {
        &self.chol_lower * white
    }
}

fn check_mean(mean: &[f64], dim: usize) -> Result<()> {
    if mean.len() != dim {
        return Err(Error::precondition(format!(
            "mean has length {} but matrix is {dim}x{dim}",
            mean.len()
        )));
    }
    if mean.iter().any(|m| !m.is_finite()) {
        return Err(Error::precondition("mean must be finite"));
    }
    Ok(())
}

/// Gaussian parameters. `covariance` holds the variance (not the std).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub covariance: Covariance,
}

impl GaussianSpec {
    pub fn univariate(mean: f64, variance: f64) -> Self {
        GaussianSpec {
            mean: vec![mean],
            covariance: Covariance::Diagonal(vec![variance]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Gaussian {
    spec: GaussianSpec,
    factor: SpdFactor,
    log_norm_const: f64,
}

impl Gaussian {
    pub fn new(spec: GaussianSpec) -> Result<Self> {
        let factor = SpdFactor::new(&spec.covariance, "covariance")?;
        check_mean(&spec.mean, spec.covariance.dim())?;
        let d = spec.mean.len() as f64;
        let log_norm_const = -0.5 * (d * (2.0 * PI).ln() + factor.log_det);
        Ok(Gaussian {
            spec,
            factor,
            log_norm_const,
        })
    }

    pub fn spec(&self) -> &GaussianSpec {
        &self.spec
    }
}

impl Density for Gaussian {
    fn dim(&self) -> usize {
        self.spec.mean.len()
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        let (m, _) = self.factor.mahalanobis(z, &self.spec.mean);
        self.log_norm_const - 0.5 * m
    }

    fn grad_log_density(&self, z: &[f64]) -> Option<Vec<f64>> {
        let (_, solved) = self.factor.mahalanobis(z, &self.spec.mean);
        Some(solved.iter().map(|v| -v).collect())
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let d = self.dim();
        let white = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let x = self.factor.colour(white);
        Some(x.iter().zip(&self.spec.mean).map(|(a, b)| a + b).collect())
    }

    fn log_normalizer(&self) -> Option<f64> {
        Some(0.0)
    }

    fn describe(&self) -> String {
        format!("gaussian(mean={:?})", self.spec.mean)
    }
}

/// Student-t parameters. `scale` is the matrix inside the quadratic form
/// `1 + (z - mean)^T scale^{-1} (z - mean) / dof`, not the covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentTSpec {
    pub mean: Vec<f64>,
    pub scale: Covariance,
    pub dof: f64,
}

impl StudentTSpec {
    pub fn univariate(mean: f64, scale: f64, dof: f64) -> Self {
        StudentTSpec {
            mean: vec![mean],
            scale: Covariance::Diagonal(vec![scale]),
            dof,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudentT {
    spec: StudentTSpec,
    factor: SpdFactor,
    log_norm_const: f64,
}

impl StudentT {
    pub fn new(spec: StudentTSpec) -> Result<Self> {
        if !(spec.dof.is_finite() && spec.dof > 0.0) {
            return Err(Error::precondition(format!(
                "degrees of freedom must be positive, got {}",
                spec.dof
            )));
        }
        let factor = SpdFactor::new(&spec.scale, "scale matrix")?;
        check_mean(&spec.mean, spec.scale.dim())?;
        let d = spec.mean.len() as f64;
        let nu = spec.dof;
        let log_norm_const = ln_gamma((nu + d) / 2.0)
            - ln_gamma(nu / 2.0)
            - 0.5 * d * (nu * PI).ln()
            - 0.5 * factor.log_det;
        Ok(StudentT {
            spec,
            factor,
            log_norm_const,
        })
    }

    pub fn spec(&self) -> &StudentTSpec {
        &self.spec
    }
}

impl Density for StudentT {
    fn dim(&self) -> usize {
        self.spec.mean.len()
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        let (m, _) = self.factor.mahalanobis(z, &self.spec.mean);
        let nu = self.spec.dof;
        let d = self.dim() as f64;
        self.log_norm_const - 0.5 * (nu + d) * (m / nu).ln_1p()
    }

    fn grad_log_density(&self, z: &[f64]) -> Option<Vec<f64>> {
        let (m, solved) = self.factor.mahalanobis(z, &self.spec.mean);
        let nu = self.spec.dof;
        let d = self.dim() as f64;
        let c = -(nu + d) / (nu + m);
        Some(solved.iter().map(|v| c * v).collect())
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let d = self.dim();
        let white = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let chi2: f64 = ChiSquared::new(self.spec.dof).ok()?.sample(rng);
        let x = self.factor.colour(white) * (self.spec.dof / chi2).sqrt();
        Some(x.iter().zip(&self.spec.mean).map(|(a, b)| a + b).collect())
    }

    fn log_normalizer(&self) -> Option<f64> {
        Some(0.0)
    }

    fn describe(&self) -> String {
        format!(
            "student_t(mean={:?}, dof={})",
            self.spec.mean, self.spec.dof
        )
    }
}

type LogDensityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type SamplerFn = dyn Fn(&mut dyn RngCore) -> Vec<f64> + Send + Sync;

/// A density built from user closures.
pub struct CustomDensity {
    dim: usize,
    log_density: Box<LogDensityFn>,
    grad: Option<Box<GradFn>>,
    sampler: Option<Box<SamplerFn>>,
    log_normalizer: Option<f64>,
    name: String,
}

impl CustomDensity {
    pub fn new(dim: usize, log_density: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        CustomDensity {
            dim,
            log_density: Box::new(log_density),
            grad: None,
            sampler: None,
            log_normalizer: None,
            name: "custom".into(),
        }
    }

    pub fn with_gradient(
        mut self,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Box::new(grad));
        self
    }

    pub fn with_sampler(
        mut self,
        sampler: impl Fn(&mut dyn RngCore) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.sampler = Some(Box::new(sampler));
        self
    }

    pub fn with_log_normalizer(mut self, log_z: f64) -> Self {
        self.log_normalizer = Some(log_z);
        self
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl Density for CustomDensity {
    fn dim(&self) -> usize {
        self.dim
    }
    fn log_density(&self, z: &[f64]) -> f64 {
        (self.log_density)(z)
    }
    fn grad_log_density(&self, z: &[f64]) -> Option<Vec<f64>> {
        self.grad.as_ref().map(|g| g(z))
    }
    fn sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        self.sampler.as_ref().map(|s| s(rng))
    }
    fn log_normalizer(&self) -> Option<f64> {
        self.log_normalizer
    }
    fn describe(&self) -> String {
        self.name.clone()
    }
}

pub fn make_gaussian(spec: GaussianSpec) -> Result<DensityHandle> {
    Ok(DensityHandle::new(Gaussian::new(spec)?))
}

pub fn make_student_t(spec: StudentTSpec) -> Result<DensityHandle> {
    Ok(DensityHandle::new(StudentT::new(spec)?))
}

/// q-exponential order of a `d`-dimensional Student-t with `nu` degrees of
/// freedom: `q = (nu + d + 2) / (nu + d)`.
pub fn q_from_nu(nu: f64, dim: usize) -> Result<f64> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::domain(format!("nu must be positive, got {nu}")));
    }
    check_dim(dim)?;
    let d = dim as f64;
    Ok((nu + d + 2.0) / (nu + d))
}

/// Inverse of [`q_from_nu`]: `nu = (d - d q + 2) / (q - 1)`, defined for
/// `1 < q < (d + 2) / d`.
pub fn nu_from_q(q: f64, dim: usize) -> Result<f64> {
    check_dim(dim)?;
    let d = dim as f64;
    let upper = (d + 2.0) / d;
    if !(q.is_finite() && q > 1.0 && q < upper) {
        return Err(Error::domain(format!(
            "q = {q} gives no positive nu in dimension {dim}; need 1 < q < {upper}"
        )));
    }
    Ok((d - d * q + 2.0) / (q - 1.0))
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::domain("dimension must be positive"));
    }
    Ok(())
}
