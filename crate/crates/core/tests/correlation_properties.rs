use proptest::prelude::*;
use skyfade_core::correlation::{
    balance_resample, dedm_eval, empirical_angular_correlation, eval_correlation, eval_full_correlation, eval_r_elev,
    eval_r_tilt, fit_piecewise_kernel, AngleBins, CorrelationMode, CorrelationModel, DedmParams, PiecewiseExpKernel,
};
use skyfade_core::geometry::{Enu, LinkGeometry};

fn geometry(east: f64, north: f64, theta: f64, delta: f64) -> LinkGeometry {
    LinkGeometry {
        position: Enu::new(east, north, 30.0),
        theta_deg: theta,
        theta_gs_deg: theta - delta,
        delta_deg: delta,
        d2d_m: east.hypot(north),
        d3d_m: 1.0,
    }
}

fn model(tilt: PiecewiseExpKernel, elev: PiecewiseExpKernel) -> CorrelationModel {
    CorrelationModel::uniform(
        0.0,
        25.0,
        DedmParams::new(0.55, 0.04, 0.004).unwrap(),
        AngleBins::default(),
        tilt,
        elev,
        2.5e-5,
    )
    .unwrap()
}

prop_compose! {
    fn arb_geometry()(e in -300.0..300.0f64, n in -300.0..300.0f64,
                      theta in 0.5..89.5f64, delta in -25.0..25.0f64) -> LinkGeometry {
        geometry(e, n, theta, delta)
    }
}

prop_compose! {
    fn arb_kernel()(qp in 1.0..500.0f64, qn in 1.0..500.0f64) -> PiecewiseExpKernel {
        PiecewiseExpKernel::new(qp, qn).unwrap()
    }
}

proptest! {
    #[test]
    fn dedm_is_one_at_zero_and_non_increasing(a in 0.0..=1.0f64, p1 in 1e-5..1.0f64, p2 in 1e-5..1.0f64,
                                             d in 0.0..2000.0f64, step in 0.0..100.0f64) {
        let p = DedmParams::new(a, p1, p2).unwrap();
        prop_assert_eq!(dedm_eval(&p, 0.0), 1.0);
        prop_assert!(dedm_eval(&p, d + step) <= dedm_eval(&p, d));
    }

    #[test]
    fn full_correlation_is_symmetric(gi in arb_geometry(), gj in arb_geometry(),
                                     kt in arb_kernel(), ke in arb_kernel()) {
        let m = model(kt, ke);
        for mode in CorrelationMode::ALL {
            let a = eval_correlation(&m, &gi, &gj, mode).unwrap();
            let b = eval_correlation(&m, &gj, &gi, mode).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a > 0.0 && a <= 1.0);
        }
        prop_assert_eq!(eval_full_correlation(&m, &gi, &gi).unwrap(), 1.0);
    }

    #[test]
    fn flat_kernels_reduce_to_distance_model(gi in arb_geometry(), gj in arb_geometry()) {
        let m = model(PiecewiseExpKernel::flat(), PiecewiseExpKernel::flat());
        let r = eval_full_correlation(&m, &gi, &gj).unwrap();
        let d = dedm_eval(&m.dedm, gi.horizontal_distance_to(&gj));
        prop_assert!((r - d).abs() <= 1e-12);
    }

    #[test]
    fn angular_factors_non_increasing_per_direction(kt in arb_kernel(), ke in arb_kernel(),
                                                    delta in -20.0..20.0f64, theta in 1.0..89.0f64,
                                                    s in 0.0..30.0f64, ds in 0.0..10.0f64) {
        let m = model(kt, ke);
        for dir in [-1.0, 1.0] {
            let near = eval_r_tilt(&m, delta, delta + dir * s, theta).unwrap();
            let far = eval_r_tilt(&m, delta, delta + dir * (s + ds), theta).unwrap();
            prop_assert!(far <= near);
        }
        let hi = (89.9 - theta).max(0.0);
        let s_e = s.min(hi);
        let near = eval_r_elev(&m, theta, theta + s_e, delta).unwrap();
        let far = eval_r_elev(&m, theta, theta + (s_e + ds).min(hi), delta).unwrap();
        prop_assert!(far <= near);
    }

    #[test]
    fn estimator_is_scale_invariant(mut a in prop::collection::vec(-20.0..20.0f64, 2..60),
                                    mut b in prop::collection::vec(-20.0..20.0f64, 2..60),
                                    mu in -3.0..3.0f64, c in 0.01..100.0f64) {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (x, y) = balance_resample(&a, &b).unwrap();
        let scale = |v: &[f64]| -> Vec<f64> { v.iter().map(|w| mu + c * (w - mu)).collect() };
        if let Ok(r) = empirical_angular_correlation(&x, &y, mu) {
            let rs = empirical_angular_correlation(&scale(&x), &scale(&y), mu).unwrap();
            prop_assert!((r - rs).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn kernel_fit_recovers_exact_exponentials(qp in 0.5..5000.0f64, qn in 0.5..5000.0f64,
                                              seps in prop::collection::vec(0.1..40.0f64, 1..8)) {
        let mut s = Vec::new();
        let mut r = Vec::new();
        let mut inc = Vec::new();
        for &x in &seps {
            s.push(x);
            r.push((-x / qp).exp());
            inc.push(true);
            s.push(x);
            r.push((-x / qn).exp());
            inc.push(false);
        }
        // only fit where no point is clamped at the floor
        prop_assume!(r.iter().all(|&v| v > 1e-3));
        let k = fit_piecewise_kernel(&s, &r, &inc, 1e-3).unwrap();
        prop_assert!(((k.q_pos - qp) / qp).abs() < 1e-9);
        prop_assert!(((k.q_neg - qn) / qn).abs() < 1e-9);
    }
}
