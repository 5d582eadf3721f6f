//! Rank-one factorization `cof γ' = λ̂ ⊗ Ψ̂` of a unit-speed nowhere-elliptic
//! curve, phase unwrapping, winding integers and preimages of `Ψ`.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

#[cfg(not(feature = "std"))]
use crate::numerics::RemEuclid;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::curve::{CurveSpec, Domain};
use crate::error::{invalid, Error, Result};
use crate::mat2::{conformal_split, Mat2};
use crate::numerics::{unwrap_near, TAU};

/// Accepted deviation of `|γ'_c|`, `|γ'_a|` from `1/2`.
pub const HALF_MODULUS_TOL: f64 = 1e-6;
const MAX_GRID: usize = 1 << 22;

/// Evaluators of the two unit factors; implemented by [`Factorization`] and by
/// wrappers used to probe [`verify_factorization`].
pub trait RankOneFactors {
    fn lambda_hat(&self, t: f64) -> [f64; 2];
    fn psi_hat(&self, t: f64) -> [f64; 2];
}

/// Unwrapped phases and their parameter derivatives at one parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Phases {
    pub phi_c: f64,
    pub phi_a: f64,
    pub dphi_c: f64,
    pub dphi_a: f64,
}

impl Phases {
    #[inline]
    pub fn phi_lambda(&self) -> f64 {
        0.5 * (self.phi_c + self.phi_a) + FRAC_PI_2
    }
    #[inline]
    pub fn phi_psi(&self) -> f64 {
        0.5 * (self.phi_a - self.phi_c) + FRAC_PI_2
    }
    #[inline]
    pub fn dphi_lambda(&self) -> f64 {
        0.5 * (self.dphi_c + self.dphi_a)
    }
    #[inline]
    pub fn dphi_psi(&self) -> f64 {
        0.5 * (self.dphi_a - self.dphi_c)
    }
}

/// A parameter `t` with `Ψ̂(t) = sign · ξ`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Preimage {
    pub t: f64,
    pub sign: i8,
}

/// The factorization with its phase tables.
#[derive(Clone, Debug)]
pub struct Factorization {
    curve: CurveSpec,
    grid: Vec<f64>,
    phi_c: Vec<f64>,
    phi_a: Vec<f64>,
    deg_c: Option<i64>,
    deg_a: Option<i64>,
    min_phase_speed: f64,
}

fn unit(phase: f64) -> [f64; 2] {
    [phase.cos(), phase.sin()]
}

fn half_parts(d1: Mat2, d2: Mat2) -> (Complex64, Complex64, Complex64, Complex64) {
    let s1 = conformal_split(d1);
    let s2 = conformal_split(d2);
    (s1.z_c, s1.z_a, s2.z_c, s2.z_a)
}

/// Computes the factorization on a grid of at least `n` points, refined until
/// consecutive phase steps stay below `π/4`.
pub fn factorize(c: &CurveSpec, n: usize) -> Result<Factorization> {
    if n < 8 {
        return Err(Error::GridTooCoarse { n, min: 8 });
    }
    let domain = c.domain();
    let mut m = n;
    loop {
        let grid: Vec<f64> = match domain {
            Domain::ClosedLoop => (0..=m)
                .map(|i| {
                    if i == m {
                        TAU
                    } else {
                        TAU * i as f64 / m as f64
                    }
                })
                .collect(),
            Domain::Arc { .. } => domain.grid(m),
        };
        let h = grid[1] - grid[0];
        let mut phi_c = Vec::with_capacity(grid.len());
        let mut phi_a = Vec::with_capacity(grid.len());
        let mut speed = Vec::with_capacity(grid.len());
        let mut deviation = 0.0f64;
        for &t in &grid {
            let j = c.jet(t);
            let (zc, za, wc, wa) = half_parts(j.d1, j.d2);
            deviation = deviation
                .max((zc.norm() - 0.5).abs())
                .max((za.norm() - 0.5).abs());
            phi_c.push(zc.arg());
            phi_a.push(za.arg());
            let dc = (wc / zc).im;
            let da = (wa / za).im;
            speed.push(dc.abs().max(da.abs()));
        }
        if deviation > HALF_MODULUS_TOL {
            return Err(Error::NotNowhereElliptic { deviation });
        }
        let mut fine = true;
        for i in 1..grid.len() {
            let sc = (phi_c[i] - phi_c[i - 1] + PI).rem_euclid(TAU) - PI;
            let sa = (phi_a[i] - phi_a[i - 1] + PI).rem_euclid(TAU) - PI;
            if sc.abs() >= FRAC_PI_4
                || sa.abs() >= FRAC_PI_4
                || speed[i].max(speed[i - 1]) * h >= FRAC_PI_4
            {
                fine = false;
                break;
            }
            phi_c[i] = unwrap_near(phi_c[i], phi_c[i - 1]);
            phi_a[i] = unwrap_near(phi_a[i], phi_a[i - 1]);
        }
        if !fine {
            if 2 * m > MAX_GRID {
                return Err(invalid(
                    "phase unwrapping did not resolve below the grid cap",
                ));
            }
            m *= 2;
            continue;
        }
        // Lift normalization: the phase of λ̂ at the start lies in [0, 2π).
        if 0.5 * (phi_c[0] + phi_a[0]) + FRAC_PI_2 < 0.0 {
            phi_c.iter_mut().for_each(|p| *p += TAU);
            phi_a.iter_mut().for_each(|p| *p += TAU);
        }
        let (deg_c, deg_a) = if domain.is_closed() {
            let last = grid.len() - 1;
            let dc = ((phi_c[last] - phi_c[0]) / TAU).round() as i64;
            let da = ((phi_a[last] - phi_a[0]) / TAU).round() as i64;
            (Some(dc), Some(da))
        } else {
            (None, None)
        };
        let mut f = Factorization {
            curve: c.clone(),
            grid,
            phi_c,
            phi_a,
            deg_c,
            deg_a,
            min_phase_speed: 0.0,
        };
        f.min_phase_speed = f
            .grid
            .iter()
            .map(|&t| {
                let p = f.phases(t);
                p.dphi_lambda().abs().min(p.dphi_psi().abs())
            })
            .fold(f64::INFINITY, f64::min);
        return Ok(f);
    }
}

impl Factorization {
    pub fn curve(&self) -> &CurveSpec {
        &self.curve
    }

    pub fn domain(&self) -> Domain {
        self.curve.domain()
    }

    /// Parameter grid of the phase tables (loops include `2π`).
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn phi_c_table(&self) -> &[f64] {
        &self.phi_c
    }

    pub fn phi_a_table(&self) -> &[f64] {
        &self.phi_a
    }

    /// `deg γ'_c` (loops only).
    pub fn deg_c(&self) -> Option<i64> {
        self.deg_c
    }

    /// `deg γ'_a` (loops only).
    pub fn deg_a(&self) -> Option<i64> {
        self.deg_a
    }

    /// `deg γ'_a - deg γ'_c`.
    pub fn k_int(&self) -> Option<i64> {
        Some(self.deg_a? - self.deg_c?)
    }

    /// `deg γ'_a + deg γ'_c`.
    pub fn l_int(&self) -> Option<i64> {
        Some(self.deg_a? + self.deg_c?)
    }

    /// Half-integer winding `k_int / 2`.
    pub fn deg_psi(&self) -> Option<f64> {
        self.k_int().map(|k| k as f64 / 2.0)
    }

    /// Whether `Ψ` is a genuine `S¹`-valued map (`k_int` even, or an arc).
    pub fn orientable(&self) -> bool {
        self.k_int().map_or(true, |k| k % 2 == 0)
    }

    /// `min(|φ'_λ|, |φ'_Ψ|)` over the table grid.
    pub fn min_phase_speed(&self) -> f64 {
        self.min_phase_speed
    }

    /// Linear interpolation of the tables, extended by monodromy on loops.
    fn table_estimate(&self, t: f64) -> (f64, f64) {
        let (t0, shift_c, shift_a) = match self.domain() {
            Domain::ClosedLoop => {
                let t0 = t.rem_euclid(TAU);
                let turns = ((t - t0) / TAU).round();
                (
                    t0,
                    turns * TAU * self.deg_c.unwrap_or(0) as f64,
                    turns * TAU * self.deg_a.unwrap_or(0) as f64,
                )
            }
            Domain::Arc { a, b } => (t.clamp(a, b), 0.0, 0.0),
        };
        let n = self.grid.len() - 1;
        let h = self.grid[1] - self.grid[0];
        let i = (((t0 - self.grid[0]) / h).floor().max(0.0) as usize).min(n - 1);
        let u = ((t0 - self.grid[i]) / (self.grid[i + 1] - self.grid[i])).clamp(0.0, 1.0);
        let lerp = |v: &[f64]| v[i] + u * (v[i + 1] - v[i]);
        (lerp(&self.phi_c) + shift_c, lerp(&self.phi_a) + shift_a)
    }

    /// Lifted phases at any parameter (loops: any real `t`; arcs: clamped).
    pub fn phases(&self, t: f64) -> Phases {
        let (ec, ea) = self.table_estimate(t);
        let j = self.curve.jet(t);
        let (zc, za, wc, wa) = half_parts(j.d1, j.d2);
        Phases {
            phi_c: unwrap_near(zc.arg(), ec),
            phi_a: unwrap_near(za.arg(), ea),
            dphi_c: (wc / zc).im,
            dphi_a: (wa / za).im,
        }
    }

    pub fn phi_lambda(&self, t: f64) -> f64 {
        self.phases(t).phi_lambda()
    }

    pub fn phi_psi(&self, t: f64) -> f64 {
        self.phases(t).phi_psi()
    }

    /// `λ̂'(t) = φ'_λ · iλ̂`.
    pub fn lambda_hat_deriv(&self, t: f64) -> [f64; 2] {
        let p = self.phases(t);
        let [x, y] = unit(p.phi_lambda());
        let s = p.dphi_lambda();
        [-s * y, s * x]
    }

    /// `Ψ̂'(t) = φ'_Ψ · iΨ̂`.
    pub fn psi_hat_deriv(&self, t: f64) -> [f64; 2] {
        let p = self.phases(t);
        let [x, y] = unit(p.phi_psi());
        let s = p.dphi_psi();
        [-s * y, s * x]
    }

    fn psi_table(&self) -> Vec<f64> {
        self.phi_c
            .iter()
            .zip(&self.phi_a)
            .map(|(c, a)| 0.5 * (a - c) + FRAC_PI_2)
            .collect()
    }

    /// Solves `φ_Ψ(t) = target` inside the table range.
    fn solve_phase(&self, table: &[f64], increasing: bool, target: f64) -> f64 {
        let n = table.len() - 1;
        let above = |v: f64| if increasing { v >= target } else { v <= target };
        // First node at or past the target.
        let (mut lo_i, mut hi_i) = (0usize, n);
        while hi_i - lo_i > 1 {
            let mid = (lo_i + hi_i) / 2;
            if above(table[mid]) {
                hi_i = mid;
            } else {
                lo_i = mid;
            }
        }
        if above(table[lo_i]) {
            return self.grid[lo_i];
        }
        let (mut lo, mut hi) = (self.grid[lo_i], self.grid[hi_i]);
        let sgn = if increasing { 1.0 } else { -1.0 };
        let mut t = 0.5 * (lo + hi);
        for _ in 0..100 {
            let p = self.phases(t);
            let g = sgn * (p.phi_psi() - target);
            if g.abs() < 1e-15 {
                break;
            }
            if g > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let d = sgn * p.dphi_psi();
            let next = t - g / d;
            t = if d > 0.0 && next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 {
                break;
            }
        }
        t
    }

    /// All parameters in the domain (one period for loops, sorted) where `Ψ̂ = ±ξ`.
    pub fn psi_preimages(&self, xi: [f64; 2]) -> Result<Vec<Preimage>> {
        let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        if !(r > 0.0) || !r.is_finite() {
            return Err(invalid("xi must be a nonzero direction"));
        }
        let table = self.psi_table();
        let n = table.len() - 1;
        let increasing = table[n] > table[0];
        if table.windows(2).any(|w| {
            if increasing {
                w[1] <= w[0]
            } else {
                w[1] >= w[0]
            }
        }) {
            return Err(Error::NonMonotonePhase);
        }
        let arg = xi[1].atan2(xi[0]);
        let (lo, hi) = if increasing {
            (table[0], table[n])
        } else {
            (table[n], table[0])
        };
        let closed = self.domain().is_closed();
        let mut j = ((lo - arg) / PI).ceil() as i64;
        let mut out = Vec::new();
        loop {
            let target = arg + j as f64 * PI;
            // Loops: half-open in the direction of travel so t = 2π duplicates nothing.
            let inside = if closed {
                if increasing {
                    target >= lo && target < hi
                } else {
                    target > lo && target <= hi
                }
            } else {
                target <= hi
            };
            if target > hi {
                break;
            }
            if inside {
                let mut t = self.solve_phase(&table, increasing, target);
                if closed {
                    t = t.rem_euclid(TAU);
                    if t >= TAU {
                        t = 0.0;
                    }
                }
                out.push(Preimage {
                    t,
                    sign: if j.rem_euclid(2) == 0 { 1 } else { -1 },
                });
            }
            j += 1;
        }
        out.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(out)
    }

    /// The `branch`-th preimage of `{±ξ}` in parameter order.
    pub fn psi_inverse(&self, xi: [f64; 2], branch: usize) -> Result<f64> {
        let pre = self.psi_preimages(xi)?;
        pre.get(branch).map(|p| p.t).ok_or(Error::BranchOutOfRange {
            branch,
            count: pre.len(),
        })
    }

    /// The first preimage with `Ψ̂(t) = +ξ` (unique on loops with `|k_int| = 2`).
    pub fn psi_inverse_oriented(&self, xi: [f64; 2]) -> Result<f64> {
        let pre = self.psi_preimages(xi)?;
        pre.iter()
            .find(|p| p.sign > 0)
            .map(|p| p.t)
            .ok_or(Error::BranchOutOfRange {
                branch: 0,
                count: 0,
            })
    }
}

impl RankOneFactors for Factorization {
    fn lambda_hat(&self, t: f64) -> [f64; 2] {
        unit(self.phi_lambda(t))
    }

    fn psi_hat(&self, t: f64) -> [f64; 2] {
        unit(self.phi_psi(t))
    }
}

/// Residuals of the factorization on a fine grid.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FactorizationResidual {
    /// `max ‖cof γ' - λ̂ ⊗ Ψ̂‖`.
    pub max_outer_residual: f64,
    pub max_lambda_norm_dev: f64,
    pub max_psi_norm_dev: f64,
    pub grid_n: usize,
}

/// Checks `cof γ' = λ̂ ⊗ Ψ̂` and unit length of the factors on an `n`-point grid.
pub fn verify_factorization<F: RankOneFactors + ?Sized>(
    f: &F,
    c: &CurveSpec,
    n: usize,
) -> FactorizationResidual {
    let mut out = FactorizationResidual {
        max_outer_residual: 0.0,
        max_lambda_norm_dev: 0.0,
        max_psi_norm_dev: 0.0,
        grid_n: n,
    };
    for t in c.grid(n) {
        let l = f.lambda_hat(t);
        let p = f.psi_hat(t);
        let r = (c.jet(t).d1.cof() - Mat2::outer(l, p)).norm();
        out.max_outer_residual = out.max_outer_residual.max(r);
        out.max_lambda_norm_dev = out.max_lambda_norm_dev.max((l[0].hypot(l[1]) - 1.0).abs());
        out.max_psi_norm_dev = out.max_psi_norm_dev.max((p[0].hypot(p[1]) - 1.0).abs());
    }
    out
}
