use proptest::prelude::*;
use qpath_core::harness::{
    read_grid_csv, read_rows_csv, run_experiment, write_grid_csv, write_rows_csv, ExperimentConfig,
    ExperimentOutput, GridRow, Mode, ResultRow, CSV_HEADER,
};

fn row_strategy() -> impl Strategy<Value = ResultRow> {
    (
        prop::sample::select(vec![Mode::Ais, Mode::Bdmc, Mode::PartitionMc]),
        -1.0f64..3.0,
        0usize..500,
        0u64..100,
        -1e3f64..1e3,
        prop::option::of(-1e3f64..1e3),
        0.0f64..1e6,
        0.0f64..1e4,
        0usize..10,
        0u64..100_000,
    )
        .prop_map(
            |(mode, q, steps, seed, lo, up, z, ess, n_invalid, wall_ms)| ResultRow {
                mode,
                q,
                steps,
                seed,
                log_lower: lo,
                log_upper: up,
                z_estimate: z,
                ess,
                n_invalid,
                wall_ms,
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn result_csv_round_trips(rows in prop::collection::vec(row_strategy(), 0..20)) {
        let mut buf = Vec::new();
        write_rows_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        prop_assert!(text.starts_with(CSV_HEADER));
        prop_assert_eq!(read_rows_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn grid_csv_round_trips(vals in prop::collection::vec((-1.0f64..3.0, 0.0f64..1.0, -10.0f64..10.0, -1e3f64..1e3), 0..20)) {
        let rows: Vec<GridRow> = vals
            .into_iter()
            .map(|(q, beta, z, log_density)| GridRow { q, beta, z, log_density })
            .collect();
        let mut buf = Vec::new();
        write_grid_csv(&rows, &mut buf).unwrap();
        prop_assert_eq!(read_grid_csv(buf.as_slice()).unwrap(), rows);
    }
}

const SMALL: &str = r#"
mode = "bdmc"
q_values = [0.5, 1.0]
n_chains = 50
n_seeds = 2
base_seed = 7

[base]
kind = "gaussian"
mean = -4.0
variance = 3.0

[target]
kind = "gaussian"
mean = 4.0
variance = 1.0

[schedule]
type = "linear"
T = [3, 6]
"#;

#[test]
fn experiment_output_is_deterministic() {
    let cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a, b);
    let ExperimentOutput::Runs(rows) = a else {
        panic!("expected runs");
    };
    assert_eq!(rows.len(), 8);
    assert!(rows
        .iter()
        .all(|r| r.mode == Mode::Bdmc && r.log_upper.is_some() && r.wall_ms == 0));
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    write_rows_csv(&rows, &mut csv_a).unwrap();
    let ExperimentOutput::Runs(rows_b) = b else {
        unreachable!()
    };
    write_rows_csv(&rows_b, &mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn config_changes_change_output() {
    let cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
    let other =
        ExperimentConfig::from_toml_str(&SMALL.replace("base_seed = 7", "base_seed = 8")).unwrap();
    assert_ne!(
        run_experiment(&cfg).unwrap(),
        run_experiment(&other).unwrap()
    );
}

#[test]
fn density_grid_has_expected_shape() {
    let text = SMALL.replace("mode = \"bdmc\"", "mode = \"density-grid\"")
        + "\n[grid]\nn_betas = 3\nn_points = 5\n";
    let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
    let ExperimentOutput::Grid(rows) = run_experiment(&cfg).unwrap() else {
        panic!("expected grid");
    };
    assert_eq!(rows.len(), 2 * 3 * 5);
    assert!(rows.iter().all(|r| r.log_density.is_finite()));
}
