//! Annealed importance sampling along a q-path, bidirectional (BDMC)
//! bounds, importance-weight diagnostics, and an exact enumeration of AIS
//! on small discrete state spaces.

use rayon::prelude::*;

use crate::deformed::QOrder;
use crate::error::{Error, Result};
use crate::qpath::{combine, QPath, Schedule};
use crate::sampler::{hmc_transition, HmcConfig, RngStream};

/// `log((1/n) sum exp(x_i))`, exact on constant input.
pub fn log_mean_exp(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::precondition("log_mean_exp of an empty list"));
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("log_mean_exp of NaN"));
    }
    if xs.iter().all(|x| *x == xs[0]) {
        return Ok(xs[0]);
    }
    Ok(log_sum_exp(xs)? - (xs.len() as f64).ln())
}

/// `log(sum exp(x_i))` with max-shift; constant input returns `x + log n`.
pub fn log_sum_exp(xs: &[f64]) -> Result<f64> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("log_sum_exp of NaN"));
    }
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Ok(m);
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    Ok(m + s.ln())
}

/// `(sum w)^2 / sum w^2` for weights given as logs.
pub fn effective_sample_size(log_weights: &[f64]) -> Result<f64> {
    if log_weights.is_empty() {
        return Err(Error::precondition("ESS of an empty list"));
    }
    if log_weights.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("ESS of NaN weights"));
    }
    let m = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Err(Error::domain("ESS undefined when every weight is zero"));
    }
    let (s1, s2) = log_weights.iter().fold((0.0, 0.0), |(s1, s2), l| {
        let w = (l - m).exp();
        (s1 + w, s2 + w * w)
    });
    Ok(s1 * s1 / s2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AisResult {
    /// Final log-weights of the valid chains, in chain order.
    pub log_weights: Vec<f64>,
    /// `log_mean_exp(log_weights)`, an estimate of `log Z_T / Z_0`.
    pub log_ratio_estimate: f64,
    pub ess: f64,
    pub n_invalid: usize,
    /// Chains x steps matrix of log-increments, when requested.
    pub per_step_log_increments: Option<Vec<Vec<f64>>>,
    pub acceptance_rate: f64,
    pub seed: RngStream,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AisOptions {
    pub record_increments: bool,
}

struct ChainOutcome {
    log_weight: f64,
    increments: Vec<f64>,
    accepted: usize,
    proposed: usize,
    invalid: bool,
}

fn run_chain(
    path: &QPath,
    betas: &[f64],
    cfg: &HmcConfig,
    stream: RngStream,
    record: bool,
) -> ChainOutcome {
    let mut out = ChainOutcome {
        log_weight: 0.0,
        increments: Vec::new(),
        accepted: 0,
        proposed: 0,
        invalid: false,
    };
    let mut rng = stream.rng();
    let mut z = match path.base().sample(&mut rng) {
        Ok(z) => z,
        Err(_) => {
            out.invalid = true;
            return out;
        }
    };
    let steps = betas.len() - 1;
    let mut prev = path.base().log_density(&z);
    for t in 1..=steps {
        let current = match path.log_density_at(betas[t], &z) {
            Ok(v) => v,
            Err(_) => {
                out.invalid = true;
                return out;
            }
        };
        let inc = current - prev;
        if inc.is_nan() {
            out.invalid = true;
            return out;
        }
        out.log_weight += inc;
        if record {
            out.increments.push(inc);
        }
        if out.log_weight == f64::NEG_INFINITY {
            // weight is zero for good; the rest of the chain cannot matter
            if record {
                out.increments.resize(steps, f64::NEG_INFINITY);
            }
            return out;
        }
        prev = current;
        if t == steps || cfg.transitions_per_temperature == 0 {
            continue;
        }
        for _ in 0..cfg.transitions_per_temperature {
            match hmc_transition(path, betas[t], &z, cfg, &mut rng) {
                Ok((next, accepted)) => {
                    z = next;
                    out.accepted += accepted as usize;
                    out.proposed += 1;
                }
                Err(_) => {
                    out.invalid = true;
                    return out;
                }
            }
        }
        prev = match path.log_density_at(betas[t], &z) {
            Ok(v) => v,
            Err(_) => {
                out.invalid = true;
                return out;
            }
        };
    }
    out
}

/// Forward AIS with `n_chains` independent chains; chain `c` draws from
/// `stream.substream(c)`.
pub fn run_ais(
    path: &QPath,
    schedule: &Schedule,
    cfg: &HmcConfig,
    n_chains: usize,
    stream: RngStream,
) -> Result<AisResult> {
    run_ais_with(path, schedule, cfg, n_chains, stream, AisOptions::default())
}

pub fn run_ais_with(
    path: &QPath,
    schedule: &Schedule,
    cfg: &HmcConfig,
    n_chains: usize,
    stream: RngStream,
    opts: AisOptions,
) -> Result<AisResult> {
    if n_chains == 0 {
        return Err(Error::precondition("need at least one chain"));
    }
    cfg.validate()?;
    if !path.base().can_sample() {
        return Err(Error::Capability(format!(
            "AIS base {} has no exact sampler",
            path.base().describe()
        )));
    }
    let betas = schedule.betas();
    let outcomes: Vec<ChainOutcome> = (0..n_chains)
        .into_par_iter()
        .map(|c| {
            run_chain(
                path,
                betas,
                cfg,
                stream.substream(c as u64),
                opts.record_increments,
            )
        })
        .collect();

    let n_invalid = outcomes.iter().filter(|o| o.invalid).count();
    if n_invalid * 100 > n_chains {
        return Err(Error::InvalidChainBudget {
            invalid: n_invalid,
            total: n_chains,
        });
    }
    let valid: Vec<&ChainOutcome> = outcomes.iter().filter(|o| !o.invalid).collect();
    let log_weights: Vec<f64> = valid.iter().map(|o| o.log_weight).collect();
    let log_ratio_estimate = log_mean_exp(&log_weights)?;
    let ess = effective_sample_size(&log_weights).unwrap_or(0.0);
    let (acc, prop) = valid.iter().fold((0usize, 0usize), |(a, p), o| {
        (a + o.accepted, p + o.proposed)
    });
    let per_step_log_increments = opts
        .record_increments
        .then(|| valid.iter().map(|o| o.increments.clone()).collect());
    Ok(AisResult {
        log_weights,
        log_ratio_estimate,
        ess,
        n_invalid,
        per_step_log_increments,
        acceptance_rate: if prop == 0 {
            0.0
        } else {
            acc as f64 / prop as f64
        },
        seed: stream,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BdmcResult {
    /// Forward AIS estimate of `log Z_T / Z_0`; a lower bound in expectation.
    pub lower: f64,
    /// Negated reverse AIS estimate of `log Z_0 / Z_T`; an upper bound in
    /// expectation.
    pub upper: f64,
    pub gap: f64,
    pub forward: AisResult,
    pub reverse: AisResult,
}

/// Bidirectional Monte Carlo: forward AIS from the base and reverse AIS
/// from exact target samples along the reflected schedule.
pub fn run_bdmc(
    path: &QPath,
    schedule: &Schedule,
    cfg: &HmcConfig,
    n_chains: usize,
    stream: RngStream,
) -> Result<BdmcResult> {
    if !path.target().can_sample() {
        return Err(Error::Capability(format!(
            "BDMC target {} has no exact sampler",
            path.target().describe()
        )));
    }
    let forward = run_ais(path, schedule, cfg, n_chains, stream.substream(u64::MAX))?;
    let reverse = run_ais(
        &path.reversed(),
        &schedule.reflected(),
        cfg,
        n_chains,
        stream.substream(u64::MAX - 1),
    )?;
    let lower = forward.log_ratio_estimate;
    let upper = -reverse.log_ratio_estimate;
    Ok(BdmcResult {
        lower,
        upper,
        gap: upper - lower,
        forward,
        reverse,
    })
}

/// Unnormalized q-path probabilities of a discrete state space at `beta`.
pub fn discrete_path_weights(
    base: &[f64],
    target: &[f64],
    q: QOrder,
    beta: f64,
) -> Result<Vec<f64>> {
    base.iter()
        .zip(target)
        .map(|(b, t)| Ok(combine(beta, b.ln(), t.ln(), q)?.exp()))
        .collect()
}

/// Metropolis kernel with a uniform proposal over all states, targeting
/// the (unnormalized) probabilities `probs`.
pub fn metropolis_kernel(probs: &[f64]) -> Vec<Vec<f64>> {
    let n = probs.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut stay = 1.0;
        for j in 0..n {
            if i != j {
                let ratio = if probs[i] > 0.0 {
                    (probs[j] / probs[i]).min(1.0)
                } else {
                    1.0
                };
                k[i][j] = ratio / n as f64;
                stay -= k[i][j];
            }
        }
        k[i][i] = stay;
    }
    k
}

pub const MAX_ENUM_STATES: usize = 8;
pub const MAX_ENUM_STEPS: usize = 6;

/// Exact expectation of the AIS weight on a finite state space, summing
/// `w(path) Pr(path)` over every state sequence `(z_0, ..., z_T)`.
///
/// `kernels[t - 1]` is the transition applied after the weight update at
/// `beta_t` and must leave the normalized path distribution at `beta_t`
/// invariant. The result equals `sum(target) / sum(base)` when AIS is
/// unbiased.
pub fn enumerate_discrete_ais(
    base: &[f64],
    target: &[f64],
    q: QOrder,
    schedule: &Schedule,
    kernels: &[Vec<Vec<f64>>],
) -> Result<f64> {
    let n = base.len();
    let steps = schedule.steps();
    if n == 0 || n > MAX_ENUM_STATES || target.len() != n {
        return Err(Error::precondition(format!(
            "need 1..={MAX_ENUM_STATES} states with matching base/target lengths"
        )));
    }
    if steps > MAX_ENUM_STEPS {
        return Err(Error::precondition(format!(
            "at most {MAX_ENUM_STEPS} annealing steps"
        )));
    }
    if base
        .iter()
        .chain(target)
        .any(|v| !(v.is_finite() && *v > 0.0))
    {
        return Err(Error::precondition(
            "discrete masses must be positive and finite",
        ));
    }
    if kernels.len() != steps {
        return Err(Error::precondition(format!(
            "need one kernel per step ({steps}), got {}",
            kernels.len()
        )));
    }

    let weights: Vec<Vec<f64>> = schedule
        .betas()
        .iter()
        .map(|&b| discrete_path_weights(base, target, q, b))
        .collect::<Result<_>>()?;

    for (idx, k) in kernels.iter().enumerate() {
        let t = idx + 1;
        if k.len() != n || k.iter().any(|row| row.len() != n) {
            return Err(Error::precondition(format!("kernel {t} is not {n}x{n}")));
        }
        let total: f64 = weights[t].iter().sum();
        let pi: Vec<f64> = weights[t].iter().map(|w| w / total).collect();
        let mut err: f64 = 0.0;
        for row in k {
            if row.iter().any(|p| *p < 0.0) {
                return Err(Error::precondition(format!(
                    "kernel {t} has negative entries"
                )));
            }
            err = err.max((row.iter().sum::<f64>() - 1.0).abs());
        }
        for j in 0..n {
            let flow: f64 = (0..n).map(|i| pi[i] * k[i][j]).sum();
            err = err.max((flow - pi[j]).abs());
        }
        if err > 1e-12 {
            return Err(Error::KernelNotInvariant { t, err });
        }
    }

    let z0: f64 = base.iter().sum();
    let mut states = vec![0usize; steps + 1];
    let mut expectation = 0.0;
    loop {
        let mut prob = base[states[0]] / z0;
        let mut w = 1.0;
        for t in 1..=steps {
            let prev = states[t - 1];
            w *= weights[t][prev] / weights[t - 1][prev];
            prob *= kernels[t - 1][prev][states[t]];
        }
        expectation += w * prob;

        // odometer increment over (z_0, ..., z_T)
        let mut pos = 0;
        loop {
            states[pos] += 1;
            if states[pos] < n {
                break;
            }
            states[pos] = 0;
            pos += 1;
            if pos > steps {
                return Ok(expectation);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{make_gaussian, GaussianSpec};
    use crate::qpath::linear_schedule;

    fn q(v: f64) -> QOrder {
        QOrder::new(v).unwrap()
    }

    #[test]
    fn log_mean_exp_examples() {
        assert_eq!(log_mean_exp(&[-2.5, -2.5, -2.5]).unwrap(), -2.5);
        assert!((log_mean_exp(&[0.0, 3f64.ln()]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let ninf = f64::NEG_INFINITY;
        assert_eq!(log_mean_exp(&[ninf, ninf]).unwrap(), ninf);
        assert!(log_mean_exp(&[]).is_err());
        assert!(log_mean_exp(&[f64::NAN]).is_err());
    }

    #[test]
    fn ess_examples() {
        assert_eq!(effective_sample_size(&[0.3; 7]).unwrap(), 7.0);
        let ninf = f64::NEG_INFINITY;
        assert_eq!(effective_sample_size(&[ninf, 1.0, ninf]).unwrap(), 1.0);
        assert!((effective_sample_size(&[0.0, 3f64.ln()]).unwrap() - 1.6).abs() < 1e-14);
        assert!(effective_sample_size(&[ninf, ninf]).is_err());
    }

    #[test]
    fn enumeration_examples() {
        let s = linear_schedule(2).unwrap();
        let base = [1.0, 1.0, 1.0];
        let target = [1.0, 2.0, 3.0];
        for order in [1.0, 0.5] {
            let kernels: Vec<_> = s.betas()[1..]
                .iter()
                .map(|&b| {
                    metropolis_kernel(&discrete_path_weights(&base, &target, q(order), b).unwrap())
                })
                .collect();
            let e = enumerate_discrete_ais(&base, &target, q(order), &s, &kernels).unwrap();
            assert!((e - 2.0).abs() < 1e-12, "{order} {e}");
        }

        let same = [0.2, 1.5, 0.7];
        let kernels: Vec<_> = (0..2).map(|_| metropolis_kernel(&same)).collect();
        let e = enumerate_discrete_ais(&same, &same, q(0.3), &s, &kernels).unwrap();
        assert!((e - 1.0).abs() <= 4.0 * f64::EPSILON, "{e}");
    }

    #[test]
    fn enumeration_rejects_non_invariant_kernel() {
        let s = linear_schedule(2).unwrap();
        let base = [1.0, 1.0, 1.0];
        let target = [1.0, 2.0, 3.0];
        let good = metropolis_kernel(&discrete_path_weights(&base, &target, q(1.0), 0.5).unwrap());
        let bad = metropolis_kernel(&[1.0, 1.0, 1.0]);
        let r = enumerate_discrete_ais(&base, &target, q(1.0), &s, &[good, bad]);
        assert!(matches!(r, Err(Error::KernelNotInvariant { t: 2, .. })));
    }

    #[test]
    fn identical_endpoints_give_zero_weights() {
        let g = make_gaussian(GaussianSpec::univariate(0.5, 2.0)).unwrap();
        for order in [0.0, 0.5, 1.0, 2.0] {
            let path = QPath::new(g.clone(), g.clone(), q(order)).unwrap();
            let r = run_ais(
                &path,
                &linear_schedule(10).unwrap(),
                &HmcConfig::default(),
                50,
                RngStream::new(1, 2),
            )
            .unwrap();
            assert!(r.log_weights.iter().all(|w| *w == 0.0));
            assert_eq!(r.log_ratio_estimate, 0.0);
            assert_eq!(r.ess, 50.0);
            let b = run_bdmc(
                &path,
                &linear_schedule(10).unwrap(),
                &HmcConfig::default(),
                20,
                RngStream::new(1, 2),
            )
            .unwrap();
            assert_eq!(b.lower, 0.0);
            assert_eq!(b.upper, 0.0);
        }
    }

    #[test]
    fn reproducible_and_recorded() {
        let path = QPath::new(
            make_gaussian(GaussianSpec::univariate(-4.0, 3.0)).unwrap(),
            make_gaussian(GaussianSpec::univariate(4.0, 1.0)).unwrap(),
            q(0.9),
        )
        .unwrap();
        let s = linear_schedule(8).unwrap();
        let opts = AisOptions {
            record_increments: true,
        };
        let a = run_ais_with(
            &path,
            &s,
            &HmcConfig::default(),
            64,
            RngStream::new(7, 0),
            opts,
        )
        .unwrap();
        let b = run_ais_with(
            &path,
            &s,
            &HmcConfig::default(),
            64,
            RngStream::new(7, 0),
            opts,
        )
        .unwrap();
        assert_eq!(a, b);
        let inc = a.per_step_log_increments.as_ref().unwrap();
        assert_eq!(inc.len(), 64);
        for (row, w) in inc.iter().zip(&a.log_weights) {
            assert_eq!(row.len(), 8);
            assert!((row.iter().sum::<f64>() - w).abs() < 1e-12);
        }
        let c = run_ais(&path, &s, &HmcConfig::default(), 64, RngStream::new(8, 0)).unwrap();
        assert_ne!(a.log_weights, c.log_weights);
    }

    #[test]
    fn non_samplable_base_is_rejected() {
        let custom =
            crate::density::DensityHandle::new(crate::density::CustomDensity::new(1, |z| {
                -z[0] * z[0]
            }));
        let path = QPath::new(
            custom,
            make_gaussian(GaussianSpec::univariate(0.0, 1.0)).unwrap(),
            q(1.0),
        )
        .unwrap();
        let r = run_ais(
            &path,
            &linear_schedule(3).unwrap(),
            &HmcConfig::default(),
            4,
            RngStream::new(0, 0),
        );
        assert!(matches!(r, Err(Error::Capability(_))));
    }

    #[test]
    fn nan_chains_exceed_budget() {
        let nan_target =
            crate::density::DensityHandle::new(crate::density::CustomDensity::new(1, |_| f64::NAN));
        let path = QPath::new(
            make_gaussian(GaussianSpec::univariate(0.0, 1.0)).unwrap(),
            nan_target,
            q(0.5),
        )
        .unwrap();
        let r = run_ais(
            &path,
            &linear_schedule(3).unwrap(),
            &HmcConfig::default(),
            10,
            RngStream::new(0, 0),
        );
        assert!(matches!(
            r,
            Err(Error::InvalidChainBudget {
                invalid: 10,
                total: 10
            })
        ));
    }
}
