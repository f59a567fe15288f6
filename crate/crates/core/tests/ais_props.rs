use proptest::prelude::*;
use qpath_core::ais::{
    effective_sample_size, enumerate_discrete_ais, log_mean_exp, metropolis_kernel, run_ais_with,
    AisOptions,
};
use qpath_core::density::{make_gaussian, GaussianSpec};
use qpath_core::{linear_schedule, run_ais, HmcConfig, QOrder, QPath, RngStream, Schedule};

fn gauss(m: f64, v: f64) -> qpath_core::DensityHandle {
    make_gaussian(GaussianSpec::univariate(m, v)).unwrap()
}

fn frozen() -> HmcConfig {
    HmcConfig {
        transitions_per_temperature: 0,
        ..HmcConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ess_lies_in_range(ws in prop::collection::vec(-50.0f64..50.0, 1..200)) {
        let ess = effective_sample_size(&ws).unwrap();
        prop_assert!(ess > 0.0 && ess <= ws.len() as f64 * (1.0 + 1e-12));
    }

    #[test]
    fn log_mean_exp_is_shift_equivariant(ws in prop::collection::vec(-50.0f64..50.0, 1..50), c in -100.0f64..100.0) {
        let shifted: Vec<f64> = ws.iter().map(|w| w + c).collect();
        let a = log_mean_exp(&ws).unwrap();
        let b = log_mean_exp(&shifted).unwrap();
        prop_assert!((b - a - c).abs() <= 1e-12 * (a.abs() + c.abs() + 1.0));
    }

    #[test]
    fn metropolis_kernel_satisfies_detailed_balance(probs in prop::collection::vec(0.01f64..1.0, 5)) {
        let total: f64 = probs.iter().sum();
        let p: Vec<f64> = probs.iter().map(|x| x / total).collect();
        let k = metropolis_kernel(&p);
        for i in 0..5 {
            let row: f64 = k[i].iter().sum();
            prop_assert!((row - 1.0).abs() <= 1e-12);
            for j in 0..5 {
                prop_assert!((p[i] * k[i][j] - p[j] * k[j][i]).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn enumerated_weight_is_unbiased(
        base in prop::collection::vec(0.05f64..2.0, 4),
        target in prop::collection::vec(0.05f64..2.0, 4),
        q in -1.0f64..2.0,
        steps in 1usize..4,
    ) {
        let schedule = linear_schedule(steps).unwrap();
        let kernels: Vec<_> = schedule.betas()[1..]
            .iter()
            .map(|&b| {
                let w = qpath_core::ais::discrete_path_weights(&base, &target, QOrder::new(q).unwrap(), b).unwrap();
                let s: f64 = w.iter().sum();
                metropolis_kernel(&w.iter().map(|x| x / s).collect::<Vec<_>>())
            })
            .collect();
        let got = enumerate_discrete_ais(&base, &target, QOrder::new(q).unwrap(), &schedule, &kernels).unwrap();
        let want = target.iter().sum::<f64>() / base.iter().sum::<f64>();
        prop_assert!((got - want).abs() <= 1e-12 * want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scaling_both_endpoints_leaves_weights(q in -0.5f64..2.0, log_c in -5.0f64..5.0, seed in 0u64..1000) {
        let path = QPath::new(gauss(-1.0, 2.0), gauss(1.0, 1.0), QOrder::new(q).unwrap()).unwrap();
        let scaled = QPath::new(path.base().scaled(log_c), path.target().scaled(log_c), path.q()).unwrap();
        let sched = linear_schedule(5).unwrap();
        let cfg = HmcConfig::default();
        let a = run_ais(&path, &sched, &cfg, 8, RngStream::new(seed, 0)).unwrap();
        let b = run_ais(&scaled, &sched, &cfg, 8, RngStream::new(seed, 0)).unwrap();
        for (x, y) in a.log_weights.iter().zip(&b.log_weights) {
            prop_assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn frozen_chains_telescope(q in -0.5f64..2.0, t1 in 1usize..20, t2 in 1usize..20, seed in 0u64..1000) {
        let path = QPath::new(gauss(-1.0, 2.0), gauss(1.0, 1.0), QOrder::new(q).unwrap()).unwrap();
        let opts = AisOptions { record_increments: true };
        let a = run_ais_with(&path, &linear_schedule(t1).unwrap(), &frozen(), 16, RngStream::new(seed, 0), opts).unwrap();
        let b = run_ais_with(&path, &linear_schedule(t2).unwrap(), &frozen(), 16, RngStream::new(seed, 0), opts).unwrap();
        for (x, y) in a.log_weights.iter().zip(&b.log_weights) {
            prop_assert!((x - y).abs() <= 1e-12 * (x.abs() + 1.0));
        }
        for (w, incs) in a.log_weights.iter().zip(a.per_step_log_increments.as_ref().unwrap()) {
            prop_assert_eq!(incs.len(), t1);
            prop_assert!((incs.iter().sum::<f64>() - w).abs() <= 1e-12 * (w.abs() + 1.0));
        }
    }
}

#[test]
fn geometric_target_scaling_shifts_weights() {
    let log_c = 1.7;
    let path = QPath::new(gauss(-1.0, 2.0), gauss(1.0, 1.0), QOrder::new(1.0).unwrap()).unwrap();
    let scaled = QPath::new(path.base().clone(), path.target().scaled(log_c), path.q()).unwrap();
    let sched = linear_schedule(10).unwrap();
    let cfg = HmcConfig::default();
    let a = run_ais(&path, &sched, &cfg, 32, RngStream::new(5, 0)).unwrap();
    let b = run_ais(&scaled, &sched, &cfg, 32, RngStream::new(5, 0)).unwrap();
    for (x, y) in a.log_weights.iter().zip(&b.log_weights) {
        assert!((y - x - log_c).abs() <= 1e-9);
    }
}

#[test]
fn single_step_is_importance_sampling() {
    let path = QPath::new(gauss(0.0, 1.0), gauss(0.5, 1.0), QOrder::new(1.0).unwrap()).unwrap();
    let res = run_ais(
        &path,
        &linear_schedule(1).unwrap(),
        &HmcConfig::default(),
        100_000,
        RngStream::new(11, 0),
    )
    .unwrap();
    // Weight variance is e^{0.25} - 1, so the standard error is about 1.7e-3.
    assert!(
        res.log_ratio_estimate.abs() < 8.5e-3,
        "{}",
        res.log_ratio_estimate
    );
    assert_eq!(res.acceptance_rate, 0.0);
}

#[test]
fn runs_are_reproducible() {
    let path = QPath::new(gauss(-4.0, 3.0), gauss(4.0, 1.0), QOrder::new(0.9).unwrap()).unwrap();
    let sched = linear_schedule(20).unwrap();
    let cfg = HmcConfig::default();
    let a = run_ais(&path, &sched, &cfg, 64, RngStream::new(99, 3)).unwrap();
    let b = run_ais(&path, &sched, &cfg, 64, RngStream::new(99, 3)).unwrap();
    assert_eq!(a, b);
    let c = run_ais(&path, &sched, &cfg, 64, RngStream::new(100, 3)).unwrap();
    assert_ne!(a.log_weights, c.log_weights);
}

#[test]
fn explicit_schedule_matches_linear() {
    let path = QPath::new(gauss(-1.0, 2.0), gauss(1.0, 1.0), QOrder::new(0.5).unwrap()).unwrap();
    let explicit = Schedule::new(vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
    let cfg = HmcConfig::default();
    let a = run_ais(&path, &explicit, &cfg, 16, RngStream::new(1, 0)).unwrap();
    let b = run_ais(
        &path,
        &linear_schedule(4).unwrap(),
        &cfg,
        16,
        RngStream::new(1, 0),
    )
    .unwrap();
    assert_eq!(a.log_weights, b.log_weights);
}
