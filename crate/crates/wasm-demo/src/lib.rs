//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The exported functions are thin wrappers; the `*_impl` functions hold the
//! logic and are tested natively.

use qpath_core::density::{make_gaussian, GaussianSpec};
use qpath_core::{linear_schedule, run_ais, run_bdmc, HmcConfig, QOrder, QPath, Result, RngStream};
use wasm_bindgen::prelude::*;

const MAX_CHAINS: usize = 20_000;
const MAX_STEPS: usize = 1_000;

/// Univariate Gaussian endpoints given as (mean, variance) pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoints {
    pub base_mean: f64,
    pub base_var: f64,
    pub target_mean: f64,
    pub target_var: f64,
}

impl Endpoints {
    fn path(&self, q: f64) -> Result<QPath> {
        QPath::new(
            make_gaussian(GaussianSpec::univariate(self.base_mean, self.base_var))?,
            make_gaussian(GaussianSpec::univariate(self.target_mean, self.target_var))?,
            QOrder::new(q)?,
        )
    }
}

fn check_sizes(n_chains: usize, steps: usize) -> Result<()> {
    if n_chains == 0 || n_chains > MAX_CHAINS || steps > MAX_STEPS {
        return Err(qpath_core::Error::Precondition(format!(
            "demo limits: 1..={MAX_CHAINS} chains, T <= {MAX_STEPS}"
        )));
    }
    Ok(())
}

/// Log-densities on a `n_betas x n_points` grid, row-major by beta, with
/// betas equally spaced from 0 to 1.
pub fn ridge_grid_impl(
    ends: Endpoints,
    q: f64,
    n_betas: usize,
    z_min: f64,
    z_max: f64,
    n_points: usize,
) -> Result<Vec<f64>> {
    if n_betas < 2 || n_points < 2 || z_min.partial_cmp(&z_max) != Some(std::cmp::Ordering::Less) {
        return Err(qpath_core::Error::Precondition(
            "need n_betas, n_points >= 2 and z_max > z_min".into(),
        ));
    }
    let path = ends.path(q)?;
    let mut out = Vec::with_capacity(n_betas * n_points);
    for i in 0..n_betas {
        let beta = i as f64 / (n_betas - 1) as f64;
        for j in 0..n_points {
            let z = z_min + (z_max - z_min) * j as f64 / (n_points - 1) as f64;
            out.push(path.log_density_at(beta, &[z])?);
        }
    }
    Ok(out)
}

/// `[log_ratio, ess, acceptance_rate, n_invalid]` for one AIS run.
pub fn ais_estimate_impl(
    ends: Endpoints,
    q: f64,
    steps: usize,
    n_chains: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_sizes(n_chains, steps)?;
    let path = ends.path(q)?;
    let res = run_ais(
        &path,
        &linear_schedule(steps)?,
        &HmcConfig::default(),
        n_chains,
        RngStream::new(seed, 0),
    )?;
    Ok(vec![
        res.log_ratio_estimate,
        res.ess,
        res.acceptance_rate,
        res.n_invalid as f64,
    ])
}

/// `[T, lower, upper]` triples, one per entry of `steps`.
pub fn bdmc_curve_impl(
    ends: Endpoints,
    q: f64,
    steps: &[u32],
    n_chains: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let path = ends.path(q)?;
    let mut out = Vec::with_capacity(3 * steps.len());
    for (i, &t) in steps.iter().enumerate() {
        check_sizes(n_chains, t as usize)?;
        let res = run_bdmc(
            &path,
            &linear_schedule(t as usize)?,
            &HmcConfig::default(),
            n_chains,
            RngStream::new(seed, i as u64),
        )?;
        out.extend([t as f64, res.lower, res.upper]);
    }
    Ok(out)
}

fn js(e: qpath_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn ridge_grid(
    base_mean: f64,
    base_var: f64,
    target_mean: f64,
    target_var: f64,
    q: f64,
    n_betas: usize,
    z_min: f64,
    z_max: f64,
    n_points: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    let ends = Endpoints {
        base_mean,
        base_var,
        target_mean,
        target_var,
    };
    ridge_grid_impl(ends, q, n_betas, z_min, z_max, n_points).map_err(js)
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn ais_estimate(
    base_mean: f64,
    base_var: f64,
    target_mean: f64,
    target_var: f64,
    q: f64,
    steps: usize,
    n_chains: usize,
    seed: u64,
) -> std::result::Result<Vec<f64>, JsError> {
    let ends = Endpoints {
        base_mean,
        base_var,
        target_mean,
        target_var,
    };
    ais_estimate_impl(ends, q, steps, n_chains, seed).map_err(js)
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn bdmc_curve(
    base_mean: f64,
    base_var: f64,
    target_mean: f64,
    target_var: f64,
    q: f64,
    steps: &[u32],
    n_chains: usize,
    seed: u64,
) -> std::result::Result<Vec<f64>, JsError> {
    let ends = Endpoints {
        base_mean,
        base_var,
        target_mean,
        target_var,
    };
    bdmc_curve_impl(ends, q, steps, n_chains, seed).map_err(js)
}
