use std::f64::consts::{PI, TAU};

use diffinc_core::certify::{
    certify, classify_ellipticity, estimate_k0, openness_radius, scan_rank_one,
    scan_rank_one_native, EllipticityClass,
};
use diffinc_core::curve::{
    make_burgers, make_composite, make_gamma_k, make_trig_poly, reparametrize_arclength,
    PlanarLoop, TrigPolyCurve,
};
use diffinc_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn chord4(s: f64, t: f64) -> f64 {
    (2.0 * (0.5 * (t - s)).sin()).powi(4)
}

#[test]
fn gamma_one_brute_force() {
    // det(γ₁(t) - γ₁(s)) = sin⁴((t-s)/2), so the ratio is 1/16 everywhere.
    let g = make_gamma_k(1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut min = f64::INFINITY;
    let mut worst = 0.0f64;
    for _ in 0..1_000_000 {
        let s = rng.gen_range(0.0..TAU);
        let t = rng.gen_range(0.0..TAU);
        let c4 = chord4(s, t);
        if c4 < 1e-6 {
            continue;
        }
        let d = (g.jet(t).value - g.jet(s).value).det();
        worst = worst.max((d - (0.5 * (t - s)).sin().powi(4)).abs());
        min = min.min(d / c4);
    }
    assert!(worst < 1e-13, "{worst:e}");
    assert!((min - 0.0625).abs() < 1e-9, "{min}");
    for n in [64, 128, 300, 512] {
        assert!((scan_rank_one(&g, n).unwrap().c_hat - 0.0625).abs() < 1e-9);
    }
}

#[test]
fn gamma_two_antipodal_ratio() {
    let g = make_gamma_k(2).unwrap();
    for s in [0.0, 0.7, 2.0] {
        let r = (g.jet(s + PI).value - g.jet(s).value).det() / 16.0;
        assert!((r - 1.0 / 18.0).abs() < 1e-14);
    }
}

#[test]
fn resolution_monotonicity_and_convergence() {
    for k in 2..=4 {
        let g = make_gamma_k(k).unwrap();
        let vals: Vec<f64> = [64, 128, 256, 512]
            .iter()
            .map(|&n| scan_rank_one(&g, n).unwrap().c_hat)
            .collect();
        for w in vals.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "k={k} {vals:?}");
        }
        assert!((vals[3] - vals[2]).abs() < 1e-3 * vals[3], "k={k} {vals:?}");
    }
}

#[test]
fn degenerate_curvature_drives_constant_to_zero() {
    let q1 = reparametrize_arclength(&make_burgers(1.0, 1.0).unwrap(), 2048).unwrap();
    let q0 = reparametrize_arclength(&make_burgers(0.0, 1.0).unwrap(), 2048).unwrap();
    // Even grids straddle w = 0, where det γ'' vanishes for q = 1.
    let c1: Vec<f64> = [64, 128, 256, 512]
        .iter()
        .map(|&n| scan_rank_one(&q1, n).unwrap().c_hat)
        .collect();
    let c0: Vec<f64> = [64, 128, 256, 512]
        .iter()
        .map(|&n| scan_rank_one(&q0, n).unwrap().c_hat)
        .collect();
    assert!(
        c1.windows(2).all(|w| w[1] < 0.6 * w[0]) && c1[3] < 1e-2,
        "{c1:?}"
    );
    assert!(
        c0[3] > 1e-3 && (c0[3] - c0[2]).abs() < 1e-2 * c0[3],
        "{c0:?}"
    );
}

#[test]
fn certificate_consistency() {
    let tangent = [
        (1, Complex64::new(0.5, 0.0)),
        (2, Complex64::new(0.04, -0.02)),
    ];
    let tp = reparametrize_arclength(
        &make_trig_poly(TrigPolyCurve::nowhere_elliptic(&tangent, 1).unwrap()),
        2048,
    )
    .unwrap();
    for c in [make_gamma_k(1).unwrap(), make_gamma_k(3).unwrap(), tp] {
        let cert = certify(&c, 256).unwrap();
        let e = &cert.ellipticity;
        assert_eq!(
            e.class == EllipticityClass::NowhereElliptic,
            e.max_abs_det_d1 <= e.tol_elliptic
        );
        if e.class == EllipticityClass::NowhereElliptic && cert.scan.c_hat > 0.0 {
            assert!(e.min_abs_det_d2.abs() > 0.0);
        }
        assert!(cert.scan.c_hat <= cert.scan.near_diagonal_limit_min * (1.0 + 1e-9));
    }
    let q0 = reparametrize_arclength(&make_burgers(0.0, 1.0).unwrap(), 1024).unwrap();
    assert_eq!(
        classify_ellipticity(&q0, 256).unwrap().class,
        EllipticityClass::NowhereElliptic
    );
}

#[test]
fn returned_k0_certifies_the_composite() {
    let bases = [
        (PlanarLoop::unit_circle(), PlanarLoop::unit_circle()),
        (PlanarLoop::unit_circle(), PlanarLoop::wound_circle(2)),
    ];
    for (c, a) in bases {
        let est = estimate_k0(&c, &a, 128).unwrap();
        let comp = make_composite(c, a, est.k0).unwrap();
        assert!(
            scan_rank_one_native(&comp, 256).unwrap().c_hat > 0.0,
            "k0={}",
            est.k0
        );
    }
}

#[test]
fn openness_radius_is_positive_for_certified_seeds() {
    for k in 1..=3 {
        let g = make_gamma_k(k).unwrap();
        let cert = certify(&g, 256).unwrap();
        let o = openness_radius(&g, &cert).unwrap();
        assert!(o.delta > 0.0 && o.kappa_bar == cert.scan.c_hat);
    }
}

#[test]
fn scan_is_invariant_under_parameter_shift() {
    // Shifting a loop's parameter by a grid multiple permutes the grid.
    let tangent = [
        (1, Complex64::new(0.5, 0.0)),
        (3, Complex64::new(0.03, 0.05)),
    ];
    let base = TrigPolyCurve::nowhere_elliptic(&tangent, 1).unwrap();
    let n = 128;
    let shift = 5.0 * TAU / n as f64;
    let rotate = |v: &[(i32, Complex64)]| {
        v.iter()
            .map(|&(m, z)| (m, z * Complex64::from_polar(1.0, m as f64 * shift)))
            .collect::<Vec<_>>()
    };
    let shifted = TrigPolyCurve {
        conformal: rotate(&base.conformal),
        anticonformal: rotate(&base.anticonformal),
    };
    let a = scan_rank_one_native(&make_trig_poly(base), n).unwrap();
    let b = scan_rank_one_native(&make_trig_poly(shifted), n).unwrap();
    assert!((a.c_hat - b.c_hat).abs() < 1e-12);
}

#[test]
fn degeneracy_is_found_between_samples() {
    // det γ'' vanishes only at w = 0, which even grids never sample.
    let q1 = reparametrize_arclength(&make_burgers(1.0, 1.0).unwrap(), 2048).unwrap();
    for n in [64, 256, 512] {
        let cert = certify(&q1, n).unwrap();
        assert!(cert.degenerate && !cert.is_certified(), "n={n}");
        assert!(
            q1.native_parameter(cert.ellipticity.min_abs_det_d2_at)
                .abs()
                < 1e-6
        );
    }
    let q0 = reparametrize_arclength(&make_burgers(0.0, 1.0).unwrap(), 2048).unwrap();
    assert!(certify(&q0, 512).unwrap().is_certified());
}
