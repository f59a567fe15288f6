//! Hamiltonian Monte Carlo transitions targeting q-path intermediates.
//!
//! Identity mass matrix scaled by a scalar; momentum is resampled in full at
//! every transition; divergent trajectories are rejections.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::density::DensityHandle;
use crate::error::{Error, Result};
use crate::qpath::QPath;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmcConfig {
    pub step_size: f64,
    pub n_leapfrog: usize,
    /// HMC transitions applied after each weight update. Zero freezes the
    /// chain at its initial draw.
    pub transitions_per_temperature: usize,
    pub mass: f64,
    /// Each transition draws its step size uniformly from
    /// `step_size * [1 - jitter, 1 + jitter]`. Zero disables jitter.
    pub step_jitter: f64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        HmcConfig {
            step_size: 1.3,
            n_leapfrog: 10,
            transitions_per_temperature: 2,
            mass: 1.0,
            step_jitter: 0.5,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::config("hmc.step_size", "must be positive"));
        }
        if self.n_leapfrog == 0 {
            return Err(Error::config("hmc.n_leapfrog", "must be at least 1"));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::config("hmc.mass", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.step_jitter) {
            return Err(Error::config("hmc.step_jitter", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Seed plus stream id. Distinct pairs give independent ChaCha streams; the
/// same pair replays the same sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// A child stream, keyed by `index`, sharing this stream's seed.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream_id: mix64(self.stream_id ^ mix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15))),
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Something HMC can target: an unnormalized log-density with gradient.
pub trait Target {
    fn dim(&self) -> usize;
    fn log_density(&self, z: &[f64]) -> Result<f64>;
    fn log_density_and_grad(&self, z: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// The intermediate density of `path` at a fixed `beta`.
#[derive(Debug, Clone, Copy)]
pub struct PathTarget<'a> {
    pub path: &'a QPath,
    pub beta: f64,
}

impl Target for PathTarget<'_> {
    fn dim(&self) -> usize {
        self.path.dim()
    }
    fn log_density(&self, z: &[f64]) -> Result<f64> {
        self.path.log_density_at(self.beta, z)
    }
    fn log_density_and_grad(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.path.log_density_and_grad(self.beta, z)
    }
}

impl Target for DensityHandle {
    fn dim(&self) -> usize {
        DensityHandle::dim(self)
    }
    fn log_density(&self, z: &[f64]) -> Result<f64> {
        Ok(DensityHandle::log_density(self, z))
    }
    fn log_density_and_grad(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        let lp = DensityHandle::log_density(self, z);
        if lp == f64::NEG_INFINITY {
            return Err(Error::ZeroDensity);
        }
        Ok((lp, self.grad_log_density(z)))
    }
}

/// A trajectory hit a non-finite gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Diverged;

/// Leapfrog integration of `n_steps` steps under potential `-log p`.
///
/// `grad` returns `None` where the gradient is undefined (zero density),
/// which aborts the trajectory.
pub fn leapfrog(
    mut grad: impl FnMut(&[f64]) -> Option<Vec<f64>>,
    z: &[f64],
    momentum: &[f64],
    step_size: f64,
    n_steps: usize,
    mass: f64,
) -> std::result::Result<(Vec<f64>, Vec<f64>), Diverged> {
    let g0 = grad(z).ok_or(Diverged)?;
    leapfrog_from(&mut grad, z, momentum, g0, step_size, n_steps, mass)
}

fn leapfrog_from(
    grad: &mut impl FnMut(&[f64]) -> Option<Vec<f64>>,
    z: &[f64],
    momentum: &[f64],
    g0: Vec<f64>,
    step_size: f64,
    n_steps: usize,
    mass: f64,
) -> std::result::Result<(Vec<f64>, Vec<f64>), Diverged> {
    let mut z = z.to_vec();
    let mut p = momentum.to_vec();
    let mut g = g0;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Diverged);
    }
    for _ in 0..n_steps {
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi += 0.5 * step_size * gi;
        }
        for (zi, pi) in z.iter_mut().zip(&p) {
            *zi += step_size * pi / mass;
        }
        g = grad(&z).ok_or(Diverged)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Diverged);
        }
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi += 0.5 * step_size * gi;
        }
    }
    Ok((z, p))
}

fn kinetic(p: &[f64], mass: f64) -> f64 {
    p.iter().map(|v| v * v).sum::<f64>() / (2.0 * mass)
}

/// One Metropolis-corrected HMC transition targeting `target`.
///
/// Returns the next state and whether the proposal was accepted.
pub fn hmc_step<T: Target + ?Sized, R: Rng + ?Sized>(
    target: &T,
    z: &[f64],
    cfg: &HmcConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, bool)> {
    let (lp0, g0) = match target.log_density_and_grad(z) {
        Ok(v) if v.0.is_finite() => v,
        Ok(_) | Err(Error::ZeroDensity) => {
            return Err(Error::precondition("HMC started where the density is zero"))
        }
        Err(e) => return Err(e),
    };
    let sd = cfg.mass.sqrt();
    let p0: Vec<f64> = (0..z.len())
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let u: f64 = rng.random();
    let step = if cfg.step_jitter > 0.0 {
        cfg.step_size * (1.0 + cfg.step_jitter * (2.0 * rng.random::<f64>() - 1.0))
    } else {
        cfg.step_size
    };

    let mut grad =
        |x: &[f64]| -> Option<Vec<f64>> { target.log_density_and_grad(x).ok().map(|(_, g)| g) };
    let (z1, p1) = match leapfrog_from(&mut grad, z, &p0, g0, step, cfg.n_leapfrog, cfg.mass) {
        Ok(v) => v,
        Err(Diverged) => return Ok((z.to_vec(), false)),
    };
    let lp1 = match target.log_density(&z1) {
        Ok(v) if v.is_finite() => v,
        _ => return Ok((z.to_vec(), false)),
    };
    let h0 = -lp0 + kinetic(&p0, cfg.mass);
    let h1 = -lp1 + kinetic(&p1, cfg.mass);
    if !h1.is_finite() {
        return Ok((z.to_vec(), false));
    }
    if u.ln() < h0 - h1 {
        Ok((z1, true))
    } else {
        Ok((z.to_vec(), false))
    }
}

/// One HMC transition leaving the path intermediate at `beta` invariant.
pub fn hmc_transition<R: Rng + ?Sized>(
    path: &QPath,
    beta: f64,
    z: &[f64],
    cfg: &HmcConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, bool)> {
    hmc_step(&PathTarget { path, beta }, z, cfg, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deformed::QOrder;
    use crate::density::{make_gaussian, GaussianSpec};

    fn std_normal() -> DensityHandle {
        make_gaussian(GaussianSpec::univariate(0.0, 1.0)).unwrap()
    }

    #[test]
    fn leapfrog_static_point() {
        let (z, p) = leapfrog(
            |_| Some(vec![0.0, 0.0]),
            &[1.5, -2.0],
            &[0.0, 0.0],
            0.3,
            7,
            1.0,
        )
        .unwrap();
        assert_eq!(z, vec![1.5, -2.0]);
        assert_eq!(p, vec![0.0, 0.0]);
    }

    #[test]
    fn leapfrog_energy_drift() {
        let grad = |z: &[f64]| Some(vec![-z[0]]);
        let h = |z: f64, p: f64| 0.5 * z * z + 0.5 * p * p;
        for (z0, p0, expected) in [
            (0.0, 1.0, 8.877852714477275e-4),
            (1.0, 0.0, -8.855658082692064e-4),
        ] {
            let (z, p) = leapfrog(grad, &[z0], &[p0], 0.1, 10, 1.0).unwrap();
            let drift = h(z[0], p[0]) - h(z0, p0);
            assert!(drift.abs() <= 1e-3);
            assert!((drift - expected).abs() < 1e-12, "{drift}");
        }
    }

    #[test]
    fn leapfrog_reversible() {
        let mut rng = RngStream::new(3, 0).rng();
        let grad = |z: &[f64]| Some(vec![-z[0] * (1.0 + 0.1 * z[0] * z[0]), -2.0 * z[1]]);
        for _ in 0..50 {
            let z: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (z1, p1) = leapfrog(grad, &z, &p, 0.05, 20, 1.3).unwrap();
            let neg: Vec<f64> = p1.iter().map(|v| -v).collect();
            let (z2, p2) = leapfrog(grad, &z1, &neg, 0.05, 20, 1.3).unwrap();
            for i in 0..2 {
                assert!((z2[i] - z[i]).abs() <= 1e-10);
                assert!((p2[i] + p[i]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn leapfrog_divergence() {
        let r = leapfrog(
            |z| if z[0] > 1.0 { None } else { Some(vec![1.0]) },
            &[0.0],
            &[1.0],
            0.5,
            10,
            1.0,
        );
        assert_eq!(r, Err(Diverged));
    }

    #[test]
    fn tiny_step_is_accepted_in_place() {
        let target = std_normal();
        let cfg = HmcConfig {
            step_size: 1e-12,
            ..HmcConfig::default()
        };
        let mut rng = RngStream::new(1, 1).rng();
        let mut accepted = 0;
        for _ in 0..100 {
            let (z, acc) = hmc_step(&target, &[0.4], &cfg, &mut rng).unwrap();
            assert!((z[0] - 0.4).abs() < 1e-9);
            accepted += acc as usize;
        }
        assert_eq!(accepted, 100);
    }

    #[test]
    fn invariance_smoke() {
        let target = std_normal();
        let cfg = HmcConfig::default();
        let mut rng = RngStream::new(2024, 7).rng();
        let mut z = vec![0.0];
        let n = 10_000;
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            z = hmc_step(&target, &z, &cfg, &mut rng).unwrap().0;
            xs.push(z[0]);
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // trajectories of length 2 are nearly antithetic on N(0,1); the iid
        // standard error is conservative here
        assert!(mean.abs() <= 5.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() <= 0.1, "var {var}");
    }

    #[test]
    fn rejects_zero_density_start() {
        let path = QPath::new(std_normal(), std_normal(), QOrder::new(0.5).unwrap()).unwrap();
        let zero =
            crate::density::DensityHandle::new(crate::density::CustomDensity::new(1, |_| {
                f64::NEG_INFINITY
            }));
        let path0 = QPath::new(zero.clone(), zero, QOrder::new(0.5).unwrap()).unwrap();
        let mut rng = RngStream::new(0, 0).rng();
        assert!(hmc_transition(&path, 0.5, &[0.0], &HmcConfig::default(), &mut rng).is_ok());
        assert!(matches!(
            hmc_transition(&path0, 0.5, &[0.0], &HmcConfig::default(), &mut rng),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn determinism() {
        let path = QPath::new(
            make_gaussian(GaussianSpec::univariate(-4.0, 3.0)).unwrap(),
            make_gaussian(GaussianSpec::univariate(4.0, 1.0)).unwrap(),
            QOrder::new(0.9).unwrap(),
        )
        .unwrap();
        let run = || {
            let mut rng = RngStream::new(99, 4).rng();
            let mut z = vec![-1.0];
            for _ in 0..50 {
                z = hmc_transition(&path, 0.4, &z, &HmcConfig::default(), &mut rng)
                    .unwrap()
                    .0;
            }
            z
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn acceptance_invariant_to_constant_rescaling() {
        let base = make_gaussian(GaussianSpec::univariate(-4.0, 3.0)).unwrap();
        let target = make_gaussian(GaussianSpec::univariate(4.0, 1.0)).unwrap();
        let c = 3.7;
        let p1 = QPath::new(base.clone(), target.clone(), QOrder::new(0.5).unwrap()).unwrap();
        let p2 = QPath::new(base.scaled(c), target.scaled(c), QOrder::new(0.5).unwrap()).unwrap();
        let mut r1 = RngStream::new(5, 5).rng();
        let mut r2 = RngStream::new(5, 5).rng();
        let (mut z1, mut z2) = (vec![0.0], vec![0.0]);
        for _ in 0..200 {
            let (a, acc1) = hmc_transition(&p1, 0.5, &z1, &HmcConfig::default(), &mut r1).unwrap();
            let (b, acc2) = hmc_transition(&p2, 0.5, &z2, &HmcConfig::default(), &mut r2).unwrap();
            assert_eq!(acc1, acc2);
            z1 = a;
            z2 = b;
        }
        assert!((z1[0] - z2[0]).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        assert!(HmcConfig::default().validate().is_ok());
        assert!(HmcConfig {
            step_size: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(HmcConfig {
            n_leapfrog: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(HmcConfig {
            mass: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(HmcConfig {
            step_jitter: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(HmcConfig {
            transitions_per_temperature: 0,
            ..Default::default()
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn streams_differ() {
        let a: u64 = RngStream::new(1, 0).rng().random();
        let b: u64 = RngStream::new(1, 1).rng().random();
        let c: u64 = RngStream::new(1, 0).rng().random();
        assert_ne!(a, b);
        assert_eq!(a, c);
        assert_ne!(
            RngStream::new(1, 0).substream(0),
            RngStream::new(1, 0).substream(1)
        );
    }
}
