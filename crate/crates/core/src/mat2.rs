//! 2×2 matrix algebra and the conformal/anticonformal decomposition.

use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// A real 2×2 matrix stored row-major.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2::new(0.0, 0.0, 0.0, 0.0);
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    #[inline]
    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2 { a11, a12, a21, a22 }
    }

    /// Builds the matrix from rows.
    #[inline]
    pub const fn from_rows(r1: [f64; 2], r2: [f64; 2]) -> Self {
        Mat2::new(r1[0], r1[1], r2[0], r2[1])
    }

    /// Outer product `a ⊗ b`, entry `(j, k)` equal to `a_j b_k`.
    #[inline]
    pub fn outer(a: [f64; 2], b: [f64; 2]) -> Self {
        Mat2::new(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    /// Cofactor matrix `[[a22, -a21], [-a12, a11]]`.
    #[inline]
    pub fn cof(&self) -> Mat2 {
        Mat2::new(self.a22, -self.a21, -self.a12, self.a11)
    }

    /// Frobenius inner product `A : B`.
    #[inline]
    pub fn dot(&self, other: &Mat2) -> f64 {
        self.a11 * other.a11 + self.a12 * other.a12 + self.a21 * other.a21 + self.a22 * other.a22
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// Frobenius norm.
    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Row `j` (0-based).
    #[inline]
    pub fn row(&self, j: usize) -> [f64; 2] {
        match j {
            0 => [self.a11, self.a12],
            1 => [self.a21, self.a22],
            _ => panic!("Mat2 has two rows"),
        }
    }

    /// Column `k` (0-based).
    #[inline]
    pub fn col(&self, k: usize) -> [f64; 2] {
        match k {
            0 => [self.a11, self.a21],
            1 => [self.a12, self.a22],
            _ => panic!("Mat2 has two columns"),
        }
    }

    #[inline]
    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a21 * v[0] + self.a22 * v[1],
        ]
    }

    #[inline]
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let d = *self - *other;
        d.a11
            .abs()
            .max(d.a12.abs())
            .max(d.a21.abs())
            .max(d.a22.abs())
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    #[inline]
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 + o.a11,
            self.a12 + o.a12,
            self.a21 + o.a21,
            self.a22 + o.a22,
        )
    }
}

impl AddAssign for Mat2 {
    #[inline]
    fn add_assign(&mut self, o: Mat2) {
        *self = *self + o;
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    #[inline]
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 - o.a11,
            self.a12 - o.a12,
            self.a21 - o.a21,
            self.a22 - o.a22,
        )
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    #[inline]
    fn neg(self) -> Mat2 {
        Mat2::new(-self.a11, -self.a12, -self.a21, -self.a22)
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    #[inline]
    fn mul(self, s: f64) -> Mat2 {
        Mat2::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }
}

impl Mul<Mat2> for f64 {
    type Output = Mat2;
    #[inline]
    fn mul(self, m: Mat2) -> Mat2 {
        m * self
    }
}

/// Free-function form of [`Mat2::cof`].
#[inline]
pub fn cof(m: Mat2) -> Mat2 {
    m.cof()
}

/// Which real-linear embedding of ℂ into 2×2 matrices to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EmbedKind {
    /// `[z]_c = [[Re z, -Im z], [Im z, Re z]]`
    Conformal,
    /// `[z]_a = [[Re z, Im z], [Im z, -Re z]]`
    Anticonformal,
}

#[inline]
pub fn embed(z: Complex64, kind: EmbedKind) -> Mat2 {
    match kind {
        EmbedKind::Conformal => Mat2::new(z.re, -z.im, z.im, z.re),
        EmbedKind::Anticonformal => Mat2::new(z.re, z.im, z.im, -z.re),
    }
}

#[inline]
pub fn embed_c(z: Complex64) -> Mat2 {
    embed(z, EmbedKind::Conformal)
}

#[inline]
pub fn embed_a(z: Complex64) -> Mat2 {
    embed(z, EmbedKind::Anticonformal)
}

/// `M = [z_c]_c + [z_a]_a`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConformalSplit {
    pub z_c: Complex64,
    pub z_a: Complex64,
}

impl ConformalSplit {
    /// Recombines the parts into a matrix.
    #[inline]
    pub fn to_mat(&self) -> Mat2 {
        embed_c(self.z_c) + embed_a(self.z_a)
    }
}

#[inline]
pub fn conformal_split(m: Mat2) -> ConformalSplit {
    ConformalSplit {
        z_c: Complex64::new(0.5 * (m.a11 + m.a22), 0.5 * (m.a21 - m.a12)),
        z_a: Complex64::new(0.5 * (m.a11 - m.a22), 0.5 * (m.a21 + m.a12)),
    }
}

/// `[z]_c + [w]_a` without going through two embeddings.
#[inline]
pub fn compose(z_c: Complex64, z_a: Complex64) -> Mat2 {
    Mat2::new(
        z_c.re + z_a.re,
        z_a.im - z_c.im,
        z_c.im + z_a.im,
        z_c.re - z_a.re,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cofactor_examples() {
        let m = Mat2::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(cof(m), Mat2::new(4.0, -3.0, -2.0, 1.0));
        assert_eq!(cof(Mat2::IDENTITY), Mat2::IDENTITY);
        assert_eq!(cof(cof(m)), m);
        assert_eq!(m.det(), -2.0);
        assert_eq!(cof(m).det(), m.det());
    }

    #[test]
    fn split_examples() {
        let s = conformal_split(Mat2::IDENTITY);
        assert_eq!((s.z_c, s.z_a), (c(1.0, 0.0), c(0.0, 0.0)));
        let s = conformal_split(Mat2::new(1.0, 0.0, 0.0, -1.0));
        assert_eq!((s.z_c, s.z_a), (c(0.0, 0.0), c(1.0, 0.0)));
        let s = conformal_split(Mat2::new(0.75, 0.0, 0.0, 0.25));
        assert_eq!((s.z_c, s.z_a), (c(0.5, 0.0), c(0.25, 0.0)));
    }

    #[test]
    fn embed_examples() {
        let i = c(0.0, 1.0);
        assert_eq!(
            embed(i, EmbedKind::Conformal),
            Mat2::new(0.0, -1.0, 1.0, 0.0)
        );
        assert_eq!(
            embed(i, EmbedKind::Anticonformal),
            Mat2::new(0.0, 1.0, 1.0, 0.0)
        );
        let e = Complex64::from_polar(1.0, core::f64::consts::FRAC_PI_2);
        assert!((embed_c(e).det() - 1.0).abs() < 1e-15);
        assert_eq!(
            compose(c(1.0, 2.0), c(3.0, -4.0)),
            embed_c(c(1.0, 2.0)) + embed_a(c(3.0, -4.0))
        );
    }

    #[test]
    fn outer_and_rows() {
        let m = Mat2::outer([1.0, 2.0], [3.0, 5.0]);
        assert_eq!(m, Mat2::new(3.0, 5.0, 6.0, 10.0));
        assert_eq!(m.det(), 0.0);
        assert_eq!(m.row(1), [6.0, 10.0]);
        assert_eq!(m.col(1), [5.0, 10.0]);
        assert_eq!(m.mul_vec([1.0, -1.0]), [-2.0, -4.0]);
    }
}
