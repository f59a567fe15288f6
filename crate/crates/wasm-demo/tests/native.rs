use qpath_wasm::{ais_estimate_impl, bdmc_curve_impl, ridge_grid_impl, Endpoints};

const PAIR: Endpoints = Endpoints {
    base_mean: -4.0,
    base_var: 3.0,
    target_mean: 4.0,
    target_var: 1.0,
};

#[test]
fn ridge_grid_shape_and_endpoints() {
    let g = ridge_grid_impl(PAIR, 0.5, 4, -10.0, 10.0, 21).unwrap();
    assert_eq!(g.len(), 4 * 21);
    // First row is the base: N(-4, 3) at z = -10.
    let want = -0.5 * (2.0 * std::f64::consts::PI * 3.0).ln() - 36.0 / 6.0;
    assert!((g[0] - want).abs() < 1e-12);
    // Last row peaks at the target mean z = 4 (index 14).
    let last = &g[3 * 21..];
    let argmax = (0..21)
        .max_by(|&a, &b| last[a].total_cmp(&last[b]))
        .unwrap();
    assert_eq!(argmax, 14);
}

#[test]
fn ais_estimate_is_close_to_zero() {
    let r = ais_estimate_impl(PAIR, 1.0, 50, 500, 3).unwrap();
    assert_eq!(r.len(), 4);
    assert!(r[0].abs() < 0.15, "{r:?}");
    assert!(r[1] > 0.0 && r[1] <= 500.0);
    assert_eq!(r[3], 0.0);
    assert_eq!(r, ais_estimate_impl(PAIR, 1.0, 50, 500, 3).unwrap());
}

#[test]
fn bdmc_curve_layout() {
    let r = bdmc_curve_impl(PAIR, 0.5, &[2, 100], 300, 1).unwrap();
    assert_eq!(r.len(), 6);
    assert_eq!((r[0], r[3]), (2.0, 100.0));
    let gap = |i: usize| r[3 * i + 2] - r[3 * i + 1];
    assert!(gap(1) < gap(0));
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(ridge_grid_impl(PAIR, 0.5, 1, -1.0, 1.0, 10).is_err());
    assert!(ais_estimate_impl(PAIR, 1.0, 10, 0, 0).is_err());
    assert!(ais_estimate_impl(PAIR, 1.0, 10, 1_000_000, 0).is_err());
    let bad = Endpoints {
        base_var: -1.0,
        ..PAIR
    };
    assert!(ais_estimate_impl(bad, 1.0, 10, 10, 0).is_err());
}
