use proptest::prelude::*;
use qpath_core::density::{make_gaussian, make_student_t, GaussianSpec, StudentTSpec};
use qpath_core::{linear_schedule, QOrder, QPath, Schedule};

fn path(q: f64) -> QPath {
    QPath::new(
        make_gaussian(GaussianSpec::univariate(-4.0, 3.0)).unwrap(),
        make_gaussian(GaussianSpec::univariate(4.0, 1.0)).unwrap(),
        QOrder::new(q).unwrap(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn endpoints_are_exact(q in -1.0f64..3.0, z in -10.0f64..10.0) {
        let p = path(q);
        prop_assert_eq!(p.log_density_at(0.0, &[z]).unwrap(), p.base().log_density(&[z]));
        prop_assert_eq!(p.log_density_at(1.0, &[z]).unwrap(), p.target().log_density(&[z]));
    }

    #[test]
    fn q_one_is_geometric(beta in 0.0f64..1.0, z in -10.0f64..10.0) {
        let p = path(1.0);
        let lb = p.base().log_density(&[z]);
        let lt = p.target().log_density(&[z]);
        let want = (1.0 - beta) * lb + beta * lt;
        prop_assert!((p.log_density_at(beta, &[z]).unwrap() - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn q_zero_is_mixture(beta in 0.0f64..1.0, z in -6.0f64..6.0) {
        let p = path(0.0);
        let b = p.base().log_density(&[z]).exp();
        let t = p.target().log_density(&[z]).exp();
        let want = ((1.0 - beta) * b + beta * t).ln();
        prop_assert!((p.log_density_at(beta, &[z]).unwrap() - want).abs() <= 1e-12);
    }

    #[test]
    fn density_moves_monotonically_in_beta(
        q in -1.0f64..3.0,
        b1 in 0.0f64..1.0,
        b2 in 0.0f64..1.0,
        z in -8.0f64..8.0,
    ) {
        prop_assume!(b1 < b2);
        let p = path(q);
        let (l1, l2) = (p.log_density_at(b1, &[z]).unwrap(), p.log_density_at(b2, &[z]).unwrap());
        let towards_target = p.target().log_density(&[z]) >= p.base().log_density(&[z]);
        if towards_target {
            prop_assert!(l2 >= l1 - 1e-12);
        } else {
            prop_assert!(l2 <= l1 + 1e-12);
        }
    }

    #[test]
    fn scaling_both_endpoints_scales_path(q in -1.0f64..3.0, beta in 0.0f64..1.0, z in -8.0f64..8.0, log_c in -5.0f64..5.0) {
        let p = path(q);
        let scaled = QPath::new(p.base().scaled(log_c), p.target().scaled(log_c), p.q()).unwrap();
        let a = p.log_density_at(beta, &[z]).unwrap();
        let b = scaled.log_density_at(beta, &[z]).unwrap();
        prop_assert!((b - a - log_c).abs() <= 1e-12 * (a.abs() + 1.0));
    }

    #[test]
    fn reversed_path_mirrors_beta(q in -1.0f64..3.0, beta in 0.0f64..1.0, z in -8.0f64..8.0) {
        let p = path(q);
        let a = p.log_density_at(beta, &[z]).unwrap();
        let b = p.reversed().log_density_at(1.0 - beta, &[z]).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (a.abs() + 1.0));
    }

    #[test]
    fn gradient_matches_finite_difference(q in -1.0f64..3.0, beta in 0.05f64..0.95, z in -6.0f64..6.0) {
        let p = path(q);
        let g = p.grad_log_density_at(beta, &[z]).unwrap()[0];
        let h = 1e-5;
        let fd = (p.log_density_at(beta, &[z + h]).unwrap() - p.log_density_at(beta, &[z - h]).unwrap()) / (2.0 * h);
        prop_assert!((g - fd).abs() <= 1e-6 * (g.abs() + 1.0), "{g} vs {fd}");
    }

    #[test]
    fn linear_schedule_reflects_to_itself(steps in 1usize..200) {
        let s = linear_schedule(steps).unwrap();
        let r = s.reflected();
        prop_assert_eq!(r.steps(), steps);
        for (a, b) in s.betas().iter().zip(r.betas()) {
            prop_assert!((a - b).abs() <= 1e-15);
        }
        for (a, b) in s.betas().iter().zip(r.reflected().betas()) {
            prop_assert!((a - b).abs() <= 1e-15);
        }
    }
}

#[test]
fn schedule_rejects_bad_sequences() {
    assert!(Schedule::new(vec![0.0]).is_err());
    assert!(Schedule::new(vec![0.1, 1.0]).is_err());
    assert!(Schedule::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
    assert!(linear_schedule(0).is_err());
}

#[test]
fn student_t_path_endpoints() {
    let p = QPath::new(
        make_gaussian(GaussianSpec::univariate(0.0, 1.0)).unwrap(),
        make_student_t(StudentTSpec::univariate(1.0, 2.0, 3.0)).unwrap(),
        QOrder::new(0.5).unwrap(),
    )
    .unwrap();
    assert_eq!(
        p.log_density_at(1.0, &[0.3]).unwrap(),
        p.target().log_density(&[0.3])
    );
}
