use std::f64::consts::TAU;

use diffinc_core::curve::{
    make_burgers, make_composite, make_gamma_k, make_sampled_loop, make_trig_poly,
    reparametrize_arclength, CurveSpec, Domain, PlanarLoop, TrigPolyCurve,
};
use diffinc_core::mat2::Mat2;
use diffinc_core::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fourth-order central difference of `f` at `t`.
fn d1_fd(f: &dyn Fn(f64) -> Mat2, t: f64, h: f64) -> Mat2 {
    (f(t - 2.0 * h) * (1.0 / 12.0) - f(t - h) * (8.0 / 12.0) + f(t + h) * (8.0 / 12.0)
        - f(t + 2.0 * h) * (1.0 / 12.0))
        * (1.0 / h)
}

fn d2_fd(f: &dyn Fn(f64) -> Mat2, t: f64, h: f64) -> Mat2 {
    (f(t - 2.0 * h) * (-1.0 / 12.0) + f(t - h) * (16.0 / 12.0) - f(t) * (30.0 / 12.0)
        + f(t + h) * (16.0 / 12.0)
        - f(t + 2.0 * h) * (1.0 / 12.0))
        * (1.0 / (h * h))
}

fn analytic_families() -> Vec<CurveSpec> {
    let tangent = [
        (1, Complex64::new(0.5, 0.0)),
        (3, Complex64::new(0.05, 0.02)),
        (-2, Complex64::new(-0.03, 0.04)),
    ];
    vec![
        make_gamma_k(1).unwrap(),
        make_gamma_k(2).unwrap(),
        make_gamma_k(3).unwrap(),
        make_gamma_k(4).unwrap(),
        make_burgers(0.0, 1.0).unwrap(),
        make_burgers(1.0, 1.0).unwrap(),
        make_burgers(2.5, 0.8).unwrap(),
        make_composite(PlanarLoop::unit_circle(), PlanarLoop::wound_circle(2), 3).unwrap(),
        make_trig_poly(TrigPolyCurve::nowhere_elliptic(&tangent, 1).unwrap()),
    ]
}

fn interior_point(c: &CurveSpec, u: f64, pad: f64) -> f64 {
    match c.domain() {
        Domain::ClosedLoop => u * TAU,
        Domain::Arc { a, b } => a + pad + u * (b - a - 2.0 * pad),
    }
}

#[test]
fn analytic_jets_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-3;
    for c in analytic_families() {
        let value = |t: f64| c.jet(t).value;
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let t = interior_point(&c, rng.gen::<f64>(), 2.5 * h);
            // |v| is only C^{2,q} at 0 for the Burgers family; keep away from the kink.
            if c.tag() == "burgers_q" && t.abs() < 0.05 {
                continue;
            }
            let j = c.jet(t);
            let e1 = j.d1.max_abs_diff(&d1_fd(&value, t, h));
            let e2 = j.d2.max_abs_diff(&d2_fd(&value, t, h));
            worst = worst.max(e1).max(e2);
        }
        assert!(worst < 1e-6, "{}: {worst:e}", c.tag());
    }
}

#[test]
fn gamma_k_is_unit_speed_and_rank_one() {
    for k in 1..=6 {
        let c = make_gamma_k(k).unwrap();
        for t in c.grid(2000) {
            let j = c.jet(t);
            assert!(j.d1.det().abs() <= 1e-12);
            assert!((j.d1.norm() - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn arclength_preserves_the_image() {
    for c in [
        make_burgers(0.0, 1.0).unwrap(),
        make_burgers(1.0, 1.5).unwrap(),
    ] {
        let r = reparametrize_arclength(&c, 1024).unwrap();
        let mut worst = 0.0f64;
        for s in r.grid(4001) {
            let t = r.native_parameter(s);
            worst = worst.max(r.jet(s).value.max_abs_diff(&c.jet(t).value));
        }
        assert!(worst <= 1e-8, "{}: {worst:e}", c.tag());
        // Image inclusion in the other direction.
        for t in c.grid(501) {
            let s = r.parameter_of_native(t);
            assert!(r.jet(s).value.max_abs_diff(&c.jet(t).value) <= 1e-8);
        }
    }
}

#[test]
fn long_loops_are_scaled_to_two_pi() {
    let tangent = [(1, Complex64::new(1.5, 0.0)), (2, Complex64::new(0.3, 0.0))];
    let c = make_trig_poly(TrigPolyCurve::nowhere_elliptic(&tangent, 1).unwrap());
    let r = reparametrize_arclength(&c, 2048).unwrap();
    assert!(r.homothety() < 1.0);
    assert!((r.length() - TAU).abs() < 1e-9);
    assert!(r.unit_speed_deviation(777) < 1e-8);
    // The recorded homothety maps the original image onto the rescaled one.
    for s in r.grid(300) {
        let t = r.native_parameter(s);
        assert!(
            r.jet(s)
                .value
                .max_abs_diff(&(c.jet(t).value * r.homothety()))
                < 1e-8
        );
    }
}

#[test]
fn sampled_loop_interpolates_gamma() {
    let g = make_gamma_k(2).unwrap();
    let samples: Vec<Mat2> = g.grid(256).into_iter().map(|t| g.jet(t).value).collect();
    let s = make_sampled_loop(samples).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let t = rng.gen_range(0.0..TAU);
        let (a, b) = (g.jet(t), s.jet(t));
        assert!(a.value.max_abs_diff(&b.value) < 1e-10);
        assert!(a.d1.max_abs_diff(&b.d1) < 1e-8);
        assert!(a.d2.max_abs_diff(&b.d2) < 1e-6);
    }
}

proptest! {
    #[test]
    fn burgers_quartic_identity(v in -1.0..1.0f64, w in -1.0..1.0f64) {
        let c = make_burgers(0.0, 1.0).unwrap();
        let d = (c.jet(v).value - c.jet(w).value).det();
        prop_assert!((d - (v - w).powi(4) / 12.0).abs() <= 1e-14);
    }

    #[test]
    fn loops_are_periodic(t in -20.0..20.0f64, k in 1u32..5) {
        let c = make_gamma_k(k).unwrap();
        let (a, b) = (c.jet(t), c.jet(t + TAU));
        prop_assert!(a.value.max_abs_diff(&b.value) < 1e-12);
        prop_assert!(a.d2.max_abs_diff(&b.d2) < 1e-12);
    }
}
