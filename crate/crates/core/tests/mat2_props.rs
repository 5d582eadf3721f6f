use approx::assert_abs_diff_eq;
use diffinc_core::mat2::{compose, conformal_split, embed_a, embed_c, Mat2};
use diffinc_core::Complex64;
use proptest::prelude::*;

fn entry() -> impl Strategy<Value = f64> {
    -1e3..1e3f64
}

fn mat() -> impl Strategy<Value = Mat2> {
    (entry(), entry(), entry(), entry()).prop_map(|(a, b, c, d)| Mat2::new(a, b, c, d))
}

fn complex() -> impl Strategy<Value = Complex64> {
    (entry(), entry()).prop_map(|(re, im)| Complex64::new(re, im))
}

proptest! {
    #[test]
    fn cofactor_is_an_involution(m in mat()) {
        prop_assert_eq!(m.cof().cof(), m);
        prop_assert_eq!(m.cof().det(), m.det());
    }

    #[test]
    fn determinant_formula(m in mat()) {
        prop_assert_eq!(m.det(), m.a11 * m.a22 - m.a12 * m.a21);
    }

    #[test]
    fn split_then_embed_reproduces(m in mat()) {
        let s = conformal_split(m);
        let back = embed_c(s.z_c) + embed_a(s.z_a);
        prop_assert!(back.max_abs_diff(&m) <= 1e-12 * (1.0 + m.norm()));
        prop_assert_eq!(compose(s.z_c, s.z_a), s.to_mat());
        let frob = 2.0 * (s.z_c.norm_sqr() + s.z_a.norm_sqr());
        prop_assert!((m.norm_sq() - frob).abs() <= 1e-12 * (1.0 + m.norm_sq()));
    }

    #[test]
    fn determinant_of_parts(z in complex(), w in complex()) {
        let d = (embed_c(z) + embed_a(w)).det();
        let expect = z.norm_sqr() - w.norm_sqr();
        prop_assert!((d - expect).abs() <= 1e-12 * (1.0 + z.norm_sqr() + w.norm_sqr()));
    }

    #[test]
    fn outer_products_are_rank_one(a in (entry(), entry()), b in (entry(), entry())) {
        let m = Mat2::outer([a.0, a.1], [b.0, b.1]);
        prop_assert!(m.det().abs() <= 1e-12 * (1.0 + m.norm_sq()));
    }
}

#[test]
fn embeddings_are_real_linear() {
    let (z, w) = (Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5));
    let lhs = embed_c(z * 2.0 + w);
    let rhs = embed_c(z) * 2.0 + embed_c(w);
    assert_abs_diff_eq!(lhs.max_abs_diff(&rhs), 0.0, epsilon = 1e-15);
    // The conformal part commutes with rotations, the anticonformal one anticommutes.
    let r = embed_c(Complex64::new(0.0, 1.0));
    let a = embed_a(w);
    assert_abs_diff_eq!((matmul(r, a) + matmul(a, r)).norm(), 0.0, epsilon = 1e-15);
    let c = embed_c(z);
    assert_abs_diff_eq!(
        matmul(r, c).max_abs_diff(&matmul(c, r)),
        0.0,
        epsilon = 1e-15
    );
}

fn matmul(x: Mat2, y: Mat2) -> Mat2 {
    Mat2::new(
        x.a11 * y.a11 + x.a12 * y.a21,
        x.a11 * y.a12 + x.a12 * y.a22,
        x.a21 * y.a11 + x.a22 * y.a21,
        x.a21 * y.a12 + x.a22 * y.a22,
    )
}
