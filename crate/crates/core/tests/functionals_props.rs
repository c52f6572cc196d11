//! Distance and norm functionals.

use proptest::prelude::*;
use spde_lab::functionals::{dpalpha_estimate, dpalpha_from_integrals, k_alpha, lp_norm, space_time_distance, PathSamples};
use spde_lab::{Field, GridSpec};

const M: usize = 8;

fn samples<'a>(times: &'a [f64], fields: &'a [Field<f64>]) -> PathSamples<'a, f64> {
    PathSamples {
        spec: GridSpec::new(M).unwrap(),
        times,
        fields,
    }
}

fn path_strategy() -> impl Strategy<Value = Vec<Field<f64>>> {
    proptest::collection::vec(proptest::collection::vec(0.0f64..5.0, M).prop_map(Field::from_vec), 4)
}

#[test]
fn constant_gap_has_closed_form() {
    let times = [0.0, 0.1, 0.25, 0.4];
    let (c, p, alpha) = (0.7, 4.0, 0.5);
    let a: Vec<_> = times.iter().map(|_| Field::constant(GridSpec::new(M).unwrap(), 1.0)).collect();
    let b: Vec<_> = times.iter().map(|_| Field::constant(GridSpec::new(M).unwrap(), 1.0 + c)).collect();
    let integral = space_time_distance(samples(&times, &a), samples(&times, &b), p).unwrap();
    let tau: f64 = 0.4;
    assert!((integral - tau * c.powf(p)).abs() < 1e-14);
    let d = dpalpha_estimate(&[(samples(&times, &a), samples(&times, &b))], p, alpha).unwrap();
    assert!((d - (tau * c.powf(p)).powf(alpha / (2.0 * p))).abs() < 1e-14);
}

#[test]
fn norm_and_constant_examples() {
    // Half the circle at height 2: (½·4)^{1/2}.
    let spec = GridSpec::new(4).unwrap();
    assert!((lp_norm(&[2.0, 0.0, 2.0, 0.0], 2.0, spec).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    assert!((k_alpha(0.5, 1.0).unwrap() - 3.0f64).abs() < 1e-15);
    assert!((k_alpha(0.9, 1.0).unwrap() - 11.0f64).abs() < 1e-12);
}

#[test]
fn mismatched_schedules_are_rejected() {
    let fields = vec![Field::constant(GridSpec::new(M).unwrap(), 1.0); 2];
    assert!(space_time_distance(samples(&[0.0, 1.0], &fields), samples(&[0.0, 2.0], &fields), 2.0).is_err());
    assert!(dpalpha_from_integrals(&[1.0], 0.5, 0.5).is_err());
    assert!(dpalpha_from_integrals::<f64>(&[], 2.0, 0.5).is_err());
}

proptest! {
    #[test]
    fn distance_is_a_pseudometric(a in path_strategy(), b in path_strategy(), c in path_strategy(), p in 1.0f64..6.0) {
        let times = [0.0, 0.2, 0.3, 0.7];
        let d = |x: &[Field<f64>], y: &[Field<f64>]| {
            space_time_distance(samples(&times, x), samples(&times, y), p).unwrap().powf(1.0 / p)
        };
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-12 * (1.0 + d(&a, &b)));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
    }

    /// Scaling one field of every pair by `c` scales the estimate by `|c|^{α/2}`;
    /// the exponent is measured from the estimator itself.
    #[test]
    fn dpalpha_scales_with_exponent_half_alpha(
        a in path_strategy(),
        b in path_strategy(),
        c in 0.1f64..10.0,
        p in 1.0f64..6.0,
        alpha in 0.05f64..1.95,
    ) {
        let times = [0.0, 0.2, 0.3, 0.7];
        let zero: Vec<Field<f64>> = a.iter().map(|f| Field::constant(GridSpec::new(M).unwrap(), 0.0 * f[0])).collect();
        let scaled = |xs: &[Field<f64>]| -> Vec<Field<f64>> {
            xs.iter().map(|f| Field::from_vec(f.iter().map(|v| c * v).collect())).collect()
        };
        let (ca, cb) = (scaled(&a), scaled(&b));
        let base = dpalpha_estimate(
            &[(samples(&times, &a), samples(&times, &zero)), (samples(&times, &b), samples(&times, &zero))],
            p,
            alpha,
        )
        .unwrap();
        let big = dpalpha_estimate(
            &[(samples(&times, &ca), samples(&times, &zero)), (samples(&times, &cb), samples(&times, &zero))],
            p,
            alpha,
        )
        .unwrap();
        prop_assume!(base > 1e-6 && (c - 1.0).abs() > 1e-3);
        let exponent = (big / base).ln() / c.ln();
        prop_assert!((exponent - alpha / 2.0).abs() < 1e-9, "measured exponent {}", exponent);
    }

    #[test]
    fn dpalpha_is_monotone_in_the_integrals(xs in proptest::collection::vec(0.0f64..10.0, 1..20), bump in 0.0f64..5.0, p in 1.0f64..6.0, alpha in 0.05f64..1.95) {
        let larger: Vec<f64> = xs.iter().map(|x| x + bump).collect();
        let a = dpalpha_from_integrals(&xs, p, alpha).unwrap();
        let b = dpalpha_from_integrals(&larger, p, alpha).unwrap();
        prop_assert!(a >= 0.0 && a <= b + 1e-12);
    }

    #[test]
    fn lp_norms_are_nondecreasing_in_p(values in proptest::collection::vec(0.0f64..5.0, M), p in 1.0f64..8.0, q in 1.0f64..8.0) {
        // The circle has unit measure, so ‖f‖_p is nondecreasing in p.
        let spec = GridSpec::new(M).unwrap();
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        prop_assert!(lp_norm(&values, lo, spec).unwrap() <= lp_norm(&values, hi, spec).unwrap() * (1.0 + 1e-12) + 1e-300);
    }
}
