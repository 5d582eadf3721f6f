//! Small numerical helpers shared by the modules: quadrature, interpolation,
//! bumps, angle bookkeeping and least squares.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// `f64::rem_euclid` for builds without `std`.
#[cfg(not(feature = "std"))]
pub(crate) trait RemEuclid {
    fn rem_euclid(self, m: f64) -> f64;
}

#[cfg(not(feature = "std"))]
impl RemEuclid for f64 {
    #[inline]
    fn rem_euclid(self, m: f64) -> f64 {
        let r = self % m;
        if r < 0.0 {
            r + m.abs()
        } else {
            r
        }
    }
}

pub(crate) const TAU: f64 = 2.0 * PI;

/// Five-point Gauss-Legendre rule on `[0, 1]`: (node, weight).
pub(crate) const GL5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_004, 0.118_463_442_528_094_54),
    (0.230_765_344_947_158_45, 0.239_314_335_249_683_23),
    (0.5, 0.284_444_444_444_444_44),
    (0.769_234_655_052_841_6, 0.239_314_335_249_683_23),
    (0.953_089_922_969_332, 0.118_463_442_528_094_54),
];

/// Integrates `f` over `[a, b]` with one five-point Gauss-Legendre panel.
#[inline]
pub(crate) fn gl5<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    let h = b - a;
    GL5.iter().map(|&(x, w)| w * f(a + x * h)).sum::<f64>() * h
}

/// Wraps an angle into `(-π, π]`.
#[inline]
/// Golden-section minimization of `f` on `[a, b]`; returns `(x, f(x))`.
pub(crate) fn golden_min<F: FnMut(f64) -> f64>(
    mut a: f64,
    mut b: f64,
    iters: usize,
    mut f: F,
) -> (f64, f64) {
    const R: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - R * (b - a);
    let mut x2 = a + R * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - R * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + R * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

pub(crate) fn wrap_pi(x: f64) -> f64 {
    let mut y = x % TAU;
    if y > PI {
        y -= TAU;
    } else if y <= -PI {
        y += TAU;
    }
    y
}

/// Shifts `angle` by a multiple of 2π so that it lies within π of `reference`.
#[inline]
pub(crate) fn unwrap_near(angle: f64, reference: f64) -> f64 {
    reference + wrap_pi(angle - reference)
}

/// Unnormalized standard bump `exp(-1/(1-x²))` on `(-1, 1)`.
#[inline]
pub(crate) fn bump_raw(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

/// Derivative of [`bump_raw`].
#[inline]
pub(crate) fn bump_raw_deriv(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - x * x;
        -2.0 * x / (d * d) * (-1.0 / d).exp()
    }
}

/// `∫_{-1}^{1} exp(-1/(1-x²)) dx`.
pub(crate) const BUMP_INTEGRAL_1D: f64 = 0.443_993_816_168_079_4;
/// `∫_{B_1} exp(-1/(1-|x|²)) dx` in the plane.
pub(crate) const BUMP_INTEGRAL_2D: f64 = 0.466_512_393_178_330_07;

/// Unit-mass bump supported in `(0, 1)`.
#[inline]
pub(crate) fn rho_unit_interval(x: f64) -> f64 {
    2.0 * bump_raw(2.0 * x - 1.0) / BUMP_INTEGRAL_1D
}

/// Unit-mass bump of total width `width` centred at 0.
#[inline]
pub(crate) fn centred_bump(x: f64, width: f64) -> f64 {
    let half = 0.5 * width;
    bump_raw(x / half) / (BUMP_INTEGRAL_1D * half)
}

/// Quintic smoothstep `6x⁵ - 15x⁴ + 10x³` clamped to `[0, 1]`.
#[inline]
pub(crate) fn smoothstep5(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
    }
}

/// Quintic Hermite interpolation on a cell of width `h` with local coordinate
/// `t ∈ [0, 1]`. Returns value and derivative with respect to the global variable.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn hermite5(
    t: f64,
    h: f64,
    p0: f64,
    d0: f64,
    s0: f64,
    p1: f64,
    d1: f64,
    s1: f64,
) -> (f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
    let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 0.5 * t3 - t4 + 0.5 * t5;
    let g0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
    let g1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
    let g2 = t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4;
    let g3 = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
    let g4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
    let g5 = 1.5 * t2 - 4.0 * t3 + 2.5 * t4;
    let hh = h * h;
    let v = p0 * h0 + h * d0 * h1 + hh * s0 * h2 + p1 * h3 + h * d1 * h4 + hh * s1 * h5;
    let dv = (p0 * g0 + p1 * g3) / h + d0 * g1 + d1 * g4 + h * (s0 * g2 + s1 * g5);
    (v, dv)
}

/// Second derivatives of the natural cubic spline through equally spaced `y`.
pub(crate) fn natural_spline_moments(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut m = alloc::vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm for the interior system with diagonal 4, off-diagonals 1.
    let k = n - 2;
    let mut c = alloc::vec![0.0; k];
    let mut d = alloc::vec![0.0; k];
    for i in 0..k {
        let rhs = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]) / (h * h);
        if i == 0 {
            c[i] = 1.0 / 4.0;
            d[i] = rhs / 4.0;
        } else {
            let denom = 4.0 - c[i - 1];
            c[i] = 1.0 / denom;
            d[i] = (rhs - d[i - 1]) / denom;
        }
    }
    let mut x = alloc::vec![0.0; k];
    for i in (0..k).rev() {
        x[i] = if i + 1 < k {
            d[i] - c[i] * x[i + 1]
        } else {
            d[i]
        };
    }
    m[1..(k + 1)].copy_from_slice(&x);
    m
}

/// Evaluates a natural cubic spline and its first two derivatives on cell `i`
/// at local offset `u = x - x_i ∈ [0, h]`.
#[inline]
pub(crate) fn spline_eval(y: &[f64], m: &[f64], h: f64, i: usize, u: f64) -> (f64, f64, f64) {
    let (y0, y1, m0, m1) = (y[i], y[i + 1], m[i], m[i + 1]);
    let v = h - u;
    let val = m0 * v * v * v / (6.0 * h)
        + m1 * u * u * u / (6.0 * h)
        + (y0 / h - m0 * h / 6.0) * v
        + (y1 / h - m1 * h / 6.0) * u;
    let d1 = -m0 * v * v / (2.0 * h) + m1 * u * u / (2.0 * h) - (y0 / h - m0 * h / 6.0)
        + (y1 / h - m1 * h / 6.0);
    let d2 = m0 * v / h + m1 * u / h;
    (val, d1, d2)
}

/// Ordinary least squares fit `y = slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (0 when the fit is exact or has no residual degrees of freedom).
    pub slope_stderr: f64,
    /// Root mean square residual of the fit.
    pub residual_rms: f64,
    pub points: usize,
}

impl LineFit {
    /// Two-sided 95% confidence interval for the slope (Student t).
    pub fn slope_interval(&self) -> (f64, f64) {
        let dof = self.points.saturating_sub(2);
        let q = student_t_975(dof);
        (
            self.slope - q * self.slope_stderr,
            self.slope + q * self.slope_stderr,
        )
    }
}

fn student_t_975(dof: usize) -> f64 {
    const TABLE: [f64; 10] = [
        f64::INFINITY,
        12.706,
        4.303,
        3.182,
        2.776,
        2.571,
        2.447,
        2.365,
        2.306,
        2.262,
    ];
    if dof < TABLE.len() {
        TABLE[dof]
    } else {
        1.96 + 2.5 / dof as f64
    }
}

pub(crate) fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let slope_stderr = if n > 2 {
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
        residual_rms: (ssr / nf).sqrt(),
        points: n,
    })
}

/// Solves `A x = b` for a 2×2 system given column-wise; `None` if singular.
#[inline]
pub(crate) fn solve2(col1: [f64; 2], col2: [f64; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = col1[0] * col2[1] - col2[0] * col1[1];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        (b[0] * col2[1] - col2[0] * b[1]) / det,
        (col1[0] * b[1] - b[0] * col1[1]) / det,
    ])
}

/// Spectral norm of the inverse of the 2×2 matrix with the given columns.
pub(crate) fn inverse_spectral_norm(col1: [f64; 2], col2: [f64; 2]) -> f64 {
    let (a, b, c, d) = (col1[0], col2[0], col1[1], col2[1]);
    let det = (a * d - b * c).abs();
    let fro2 = a * a + b * b + c * c + d * d;
    // Largest singular value of A^{-1} is 1/σ_min(A).
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    let smin2 = 0.5 * (fro2 - disc);
    if smin2 <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / smin2.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_degree_nine() {
        let v = gl5(0.0, 2.0, |x| x.powi(9) - 3.0 * x.powi(4));
        let exact = 2f64.powi(10) / 10.0 - 3.0 * 2f64.powi(5) / 5.0;
        assert!((v - exact).abs() < 1e-11);
        let w: f64 = GL5.iter().map(|p| p.1).sum();
        assert!((w - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bump_constants_match_quadrature() {
        let n = 4000;
        let one_d: f64 = (0..n)
            .map(|i| {
                gl5(
                    -1.0 + 2.0 * i as f64 / n as f64,
                    -1.0 + 2.0 * (i + 1) as f64 / n as f64,
                    bump_raw,
                )
            })
            .sum();
        assert!((one_d - BUMP_INTEGRAL_1D).abs() < 1e-12);
        let two_d: f64 = (0..n)
            .map(|i| {
                gl5(i as f64 / n as f64, (i + 1) as f64 / n as f64, |r| {
                    TAU * r * bump_raw(r)
                })
            })
            .sum();
        assert!((two_d - BUMP_INTEGRAL_2D).abs() < 1e-12);
        let unit: f64 = (0..n)
            .map(|i| {
                gl5(
                    i as f64 / n as f64,
                    (i + 1) as f64 / n as f64,
                    rho_unit_interval,
                )
            })
            .sum();
        assert!((unit - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quintic_hermite_reproduces_quintics() {
        let p =
            |x: f64| 1.0 - 2.0 * x + 0.5 * x * x + x.powi(3) - 0.7 * x.powi(4) + 0.3 * x.powi(5);
        let dp = |x: f64| -2.0 + x + 3.0 * x * x - 2.8 * x.powi(3) + 1.5 * x.powi(4);
        let d2p = |x: f64| 1.0 + 6.0 * x - 8.4 * x * x + 6.0 * x.powi(3);
        let (a, h) = (0.3, 0.4);
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let x = a + t * h;
            let (v, dv) = hermite5(t, h, p(a), dp(a), d2p(a), p(a + h), dp(a + h), d2p(a + h));
            assert!((v - p(x)).abs() < 1e-13);
            assert!((dv - dp(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn spline_reproduces_linear_data_and_fits_lines() {
        let y: Vec<f64> = (0..8).map(|i| 2.0 * i as f64 + 1.0).collect();
        let m = natural_spline_moments(&y, 0.5);
        assert!(m.iter().all(|v| v.abs() < 1e-12));
        let (v, d1, _) = spline_eval(&y, &m, 0.5, 3, 0.25);
        assert!((v - 8.0).abs() < 1e-12 && (d1 - 4.0).abs() < 1e-12);
        let fit = fit_line(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14 && fit.residual_rms < 1e-14);
    }

    #[test]
    fn angle_helpers() {
        assert!((wrap_pi(3.0 * PI) - PI).abs() < 1e-15);
        assert!((unwrap_near(0.1, 4.0 * PI) - (4.0 * PI + 0.1)).abs() < 1e-12);
        let x = solve2([2.0, 0.0], [1.0, 1.0], [3.0, 1.0]).unwrap();
        assert_eq!(x, [1.0, 1.0]);
        assert!((inverse_spectral_norm([2.0, 0.0], [0.0, 0.5]) - 2.0).abs() < 1e-14);
    }
}
