//! Curves `γ: I → ℝ^{2×2}`: built-in families, sampled curves and
//! arc-length reparametrization.

use alloc::boxed::Box;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use crate::numerics::RemEuclid;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::mat2::{compose, Mat2};
use crate::numerics::{gl5, natural_spline_moments, spline_eval, TAU};

/// Parameter domain of a curve.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Domain {
    /// `ℝ / 2πℤ`, represented by `[0, 2π)`.
    ClosedLoop,
    /// A compact interval `[a, b]`.
    Arc { a: f64, b: f64 },
}

impl Domain {
    #[inline]
    pub fn is_closed(&self) -> bool {
        matches!(self, Domain::ClosedLoop)
    }

    #[inline]
    pub fn start(&self) -> f64 {
        match *self {
            Domain::ClosedLoop => 0.0,
            Domain::Arc { a, .. } => a,
        }
    }

    #[inline]
    pub fn end(&self) -> f64 {
        match *self {
            Domain::ClosedLoop => TAU,
            Domain::Arc { b, .. } => b,
        }
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.end() - self.start()
    }

    /// Uniform parameter grid: `n` points on `[0, 2π)` for loops, `n` points
    /// including both endpoints for arcs.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        match *self {
            Domain::ClosedLoop => (0..n).map(|i| TAU * i as f64 / n as f64).collect(),
            Domain::Arc { a, b } => {
                let m = n.max(2) - 1;
                (0..=m)
                    .map(|i| {
                        if i == m {
                            b
                        } else {
                            a + (b - a) * i as f64 / m as f64
                        }
                    })
                    .collect()
            }
        }
    }

    /// Maps `t` into the canonical window (loops) or checks membership (arcs).
    pub fn canonical(&self, t: f64) -> Result<f64> {
        match *self {
            Domain::ClosedLoop => Ok(t.rem_euclid(TAU)),
            Domain::Arc { a, b } => {
                let slack = 1e-12 * (1.0 + a.abs().max(b.abs()));
                if t < a - slack || t > b + slack || t.is_nan() {
                    Err(Error::OutsideDomain { t, a, b })
                } else {
                    Ok(t.clamp(a, b))
                }
            }
        }
    }
}

/// Value and first two derivatives of a curve at parameter `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurveJet {
    pub t: f64,
    pub value: Mat2,
    pub d1: Mat2,
    pub d2: Mat2,
}

/// Planar closed curve `t ↦ Σ c_n e^{int}` in ℂ.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlanarLoop {
    pub modes: Vec<(i32, Complex64)>,
}

impl PlanarLoop {
    /// The unit circle `e^{it}`.
    pub fn unit_circle() -> Self {
        PlanarLoop {
            modes: alloc::vec![(1, Complex64::new(1.0, 0.0))],
        }
    }

    /// Unit-speed circle of radius `1/|m|` run `|m|` times: `e^{imt}/m`.
    pub fn wound_circle(m: i32) -> Self {
        PlanarLoop {
            modes: alloc::vec![(m, Complex64::new(1.0 / m as f64, 0.0))],
        }
    }

    /// Value and first two derivatives at `t`.
    pub fn jet(&self, t: f64) -> [Complex64; 3] {
        trig_jet(&self.modes, t)
    }
}

fn trig_jet(modes: &[(i32, Complex64)], t: f64) -> [Complex64; 3] {
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for &(n, c) in modes {
        let nf = n as f64;
        let e = c * Complex64::from_polar(1.0, nf * t);
        out[0] += e;
        out[1] += e * Complex64::new(0.0, nf);
        out[2] += e * (-nf * nf);
    }
    out
}

/// Matrix curve `[Σ c_n e^{int}]_c + [Σ a_n e^{int}]_a`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrigPolyCurve {
    pub conformal: Vec<(i32, Complex64)>,
    pub anticonformal: Vec<(i32, Complex64)>,
}

impl TrigPolyCurve {
    /// Nowhere-elliptic curve from a tangent polynomial `p`: `γ_c' = p` and
    /// `γ_a' = p·e^{i·twist·t}`, so `|γ_c'| = |γ_a'|` and `det γ' ≡ 0`.
    ///
    /// `p` must have no mode `0` or `-twist` (both parts have to integrate to
    /// closed curves).
    pub fn nowhere_elliptic(tangent: &[(i32, Complex64)], twist: i32) -> Result<Self> {
        if tangent.iter().any(|&(n, _)| n == 0 || n == -twist) {
            return Err(invalid(
                "tangent polynomial has a mode that does not integrate to a closed curve",
            ));
        }
        let integrate = |shift: i32| {
            tangent
                .iter()
                .map(|&(n, c)| {
                    let m = n + shift;
                    (m, c / Complex64::new(0.0, m as f64))
                })
                .collect::<Vec<_>>()
        };
        Ok(TrigPolyCurve {
            conformal: integrate(0),
            anticonformal: integrate(twist),
        })
    }

    pub fn jet(&self, t: f64) -> (Mat2, Mat2, Mat2) {
        let c = trig_jet(&self.conformal, t);
        let a = trig_jet(&self.anticonformal, t);
        (
            compose(c[0], a[0]),
            compose(c[1], a[1]),
            compose(c[2], a[2]),
        )
    }
}

/// Curve interpolated from uniformly spaced samples of its values.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampledCurve {
    samples: Vec<Mat2>,
    closed: bool,
    a: f64,
    b: f64,
    /// Closed loops: complex Fourier coefficients per entry for modes `0..=n/2`.
    fourier: Vec<[Complex64; 4]>,
    /// Arcs: sample values and natural spline moments per entry.
    values: [Vec<f64>; 4],
    moments: [Vec<f64>; 4],
}

fn entries(m: &Mat2) -> [f64; 4] {
    [m.a11, m.a12, m.a21, m.a22]
}

impl SampledCurve {
    pub fn samples(&self) -> &[Mat2] {
        &self.samples
    }

    fn closed_from(samples: Vec<Mat2>) -> Self {
        let n = samples.len();
        let mut fourier = Vec::with_capacity(n / 2 + 1);
        for k in 0..=n / 2 {
            let mut acc = [Complex64::new(0.0, 0.0); 4];
            for (j, m) in samples.iter().enumerate() {
                let e = Complex64::from_polar(1.0, -TAU * ((k * j) % n) as f64 / n as f64);
                for (slot, v) in acc.iter_mut().zip(entries(m)) {
                    *slot += e * v;
                }
            }
            let weight = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
            fourier.push(acc.map(|c| c * (weight / n as f64)));
        }
        SampledCurve {
            samples,
            closed: true,
            a: 0.0,
            b: TAU,
            fourier,
            values: Default::default(),
            moments: Default::default(),
        }
    }

    fn arc_from(samples: Vec<Mat2>, a: f64, b: f64) -> Self {
        let h = (b - a) / (samples.len() - 1) as f64;
        let values: [Vec<f64>; 4] =
            core::array::from_fn(|e| samples.iter().map(|m| entries(m)[e]).collect());
        let moments = core::array::from_fn(|e| natural_spline_moments(&values[e], h));
        SampledCurve {
            samples,
            closed: false,
            a,
            b,
            fourier: Vec::new(),
            values,
            moments,
        }
    }

    fn jet(&self, t: f64) -> (Mat2, Mat2, Mat2) {
        let mut v = [[0.0; 4]; 3];
        if self.closed {
            let n = self.samples.len();
            for (k, coeffs) in self.fourier.iter().enumerate() {
                let kf = k as f64;
                let e = Complex64::from_polar(1.0, kf * t);
                for (idx, c) in coeffs.iter().enumerate() {
                    let z = c * e;
                    if 2 * k == n {
                        // Nyquist mode interpolates as a cosine.
                        let (s, co) = (kf * t).sin_cos();
                        v[0][idx] += c.re * co;
                        v[1][idx] -= c.re * kf * s;
                        v[2][idx] -= c.re * kf * kf * co;
                    } else {
                        v[0][idx] += z.re;
                        v[1][idx] -= kf * z.im;
                        v[2][idx] -= kf * kf * z.re;
                    }
                }
            }
        } else {
            let m = self.samples.len() - 1;
            let h = (self.b - self.a) / m as f64;
            let i = (((t - self.a) / h).floor().max(0.0) as usize).min(m - 1);
            let u = t - (self.a + i as f64 * h);
            for (e, (vals, moms)) in self.values.iter().zip(&self.moments).enumerate() {
                let (f, d1, d2) = spline_eval(vals, moms, h, i, u);
                v[0][e] = f;
                v[1][e] = d1;
                v[2][e] = d2;
            }
        }
        let mk = |x: [f64; 4]| Mat2::new(x[0], x[1], x[2], x[3]);
        (mk(v[0]), mk(v[1]), mk(v[2]))
    }
}

/// Arc-length reparametrization of a base curve, optionally followed by a homothety.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Reparametrization {
    base: Box<CurveSpec>,
    /// Homothety factor applied to the base curve.
    scale: f64,
    /// Length of the base curve in its own units.
    length: f64,
    /// Start of the new parameter window.
    s0: f64,
    knots_t: Vec<f64>,
    knots_s: Vec<f64>,
}

impl Reparametrization {
    pub fn base(&self) -> &CurveSpec {
        &self.base
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn base_length(&self) -> f64 {
        self.length
    }

    fn speed(&self, t: f64) -> f64 {
        self.base.jet(t).d1.norm()
    }

    /// Arc length of the base curve from its start to native parameter `t`.
    fn arclength_of(&self, t: f64) -> f64 {
        let h = self.knots_t[1] - self.knots_t[0];
        let n = self.knots_t.len() - 1;
        let i = (((t - self.knots_t[0]) / h).floor().max(0.0) as usize).min(n - 1);
        self.knots_s[i] + gl5(self.knots_t[i], t, |x| self.speed(x))
    }

    /// Native parameter whose base arc length equals `sigma`.
    fn native_of(&self, sigma: f64) -> f64 {
        let n = self.knots_t.len() - 1;
        let sigma = sigma.clamp(0.0, self.length);
        let i = match self
            .knots_s
            .binary_search_by(|s| s.partial_cmp(&sigma).unwrap_or(core::cmp::Ordering::Less))
        {
            Ok(i) => return self.knots_t[i],
            Err(i) => i.clamp(1, n) - 1,
        };
        let (mut lo, mut hi) = (self.knots_t[i], self.knots_t[i + 1]);
        let (s_lo, s_hi) = (self.knots_s[i], self.knots_s[i + 1]);
        let mut t = lo + (hi - lo) * (sigma - s_lo) / (s_hi - s_lo);
        for _ in 0..60 {
            let g = self.knots_s[i] + gl5(self.knots_t[i], t, |x| self.speed(x)) - sigma;
            if g.abs() <= 1e-15 * (1.0 + self.length) {
                break;
            }
            if g > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let next = t - g / self.speed(t);
            t = if next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-16 * (1.0 + t.abs()) {
                break;
            }
        }
        t
    }

    fn jet(&self, s: f64) -> (Mat2, Mat2, Mat2) {
        let sigma = (s - self.s0) / self.scale;
        let t = self.native_of(sigma);
        let j = self.base.jet(t);
        let sp2 = j.d1.norm_sq();
        let sp = sp2.sqrt();
        let acc = j.d1.dot(&j.d2);
        let d2 = (j.d2 * (1.0 / sp2) - j.d1 * (acc / (sp2 * sp2))) * (1.0 / self.scale);
        (j.value * self.scale, j.d1 * (1.0 / sp), d2)
    }
}

/// Family-specific description of a curve.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Family {
    /// `½[e^{it}]_c + (2(k+1))^{-1}[e^{i(k+1)t}]_a`.
    GammaK { k: u32 },
    /// Burgers-type arc in the native parameter `w ∈ [-v_max, v_max]`.
    Burgers { q: f64, v_max: f64 },
    /// `[γ(t)]_c + k^{-1}[γ̃(kt)]_a`.
    Composite {
        base_c: PlanarLoop,
        base_a: PlanarLoop,
        k: u32,
    },
    /// General trigonometric polynomial curve.
    TrigPoly(TrigPolyCurve),
    /// Affine segment `origin + t·direction`.
    Line { origin: Mat2, direction: Mat2 },
    /// Interpolated samples.
    Sampled(SampledCurve),
    /// Arc-length reparametrization of another curve.
    Arclength(Reparametrization),
}

/// A C² curve of 2×2 matrices with its parameter domain.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurveSpec {
    family: Family,
    domain: Domain,
    unit_speed: bool,
}

const UNIT_SPEED_TOL: f64 = 1e-8;

impl CurveSpec {
    fn new_measured(family: Family, domain: Domain) -> Self {
        let mut c = CurveSpec {
            family,
            domain,
            unit_speed: false,
        };
        c.unit_speed = c.unit_speed_deviation(2048) <= UNIT_SPEED_TOL;
        c
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Short provenance label.
    pub fn tag(&self) -> &'static str {
        match self.family {
            Family::GammaK { .. } => "gamma_k",
            Family::Burgers { .. } => "burgers_q",
            Family::Composite { .. } => "composite",
            Family::TrigPoly(_) => "trig_poly",
            Family::Line { .. } => "line",
            Family::Sampled(_) => "sampled",
            Family::Arclength(_) => "arclength",
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn is_closed(&self) -> bool {
        self.domain.is_closed()
    }

    pub fn is_unit_speed(&self) -> bool {
        self.unit_speed
    }

    /// Homothety factor applied by an arc-length reparametrization (1 otherwise).
    pub fn homothety(&self) -> f64 {
        match &self.family {
            Family::Arclength(r) => r.scale,
            _ => 1.0,
        }
    }

    /// Parameter grid of size `n`, see [`Domain::grid`].
    pub fn grid(&self, n: usize) -> Vec<f64> {
        self.domain.grid(n)
    }

    /// Evaluates the 2-jet, wrapping loops and rejecting parameters off an arc.
    pub fn eval_jet(&self, t: f64) -> Result<CurveJet> {
        let t = self.domain.canonical(t)?;
        Ok(self.jet_at(t))
    }

    /// Evaluates the 2-jet; loops are periodic and arc parameters are clamped.
    pub fn jet(&self, t: f64) -> CurveJet {
        let t = match self.domain {
            Domain::ClosedLoop => t,
            Domain::Arc { a, b } => t.clamp(a, b),
        };
        self.jet_at(t)
    }

    fn jet_at(&self, t: f64) -> CurveJet {
        let (value, d1, d2) = match &self.family {
            Family::GammaK { k } => {
                let m = (*k + 1) as f64;
                let e1 = Complex64::from_polar(1.0, t);
                let em = Complex64::from_polar(1.0, m * t);
                let i = Complex64::new(0.0, 1.0);
                (
                    compose(e1 * 0.5, em / (2.0 * m)),
                    compose(i * e1 * 0.5, i * em * 0.5),
                    compose(-e1 * 0.5, -em * (0.5 * m)),
                )
            }
            Family::Burgers { q, .. } => burgers_jet(*q, t),
            Family::Composite { base_c, base_a, k } => {
                let kf = *k as f64;
                let c = base_c.jet(t);
                let a = base_a.jet(kf * t);
                (
                    compose(c[0], a[0] / kf),
                    compose(c[1], a[1]),
                    compose(c[2], a[2] * kf),
                )
            }
            Family::TrigPoly(p) => p.jet(t),
            Family::Line { origin, direction } => {
                (*origin + *direction * t, *direction, Mat2::ZERO)
            }
            Family::Sampled(s) => s.jet(t),
            Family::Arclength(r) => {
                let s = match self.domain {
                    Domain::ClosedLoop => t.rem_euclid(TAU),
                    Domain::Arc { .. } => t,
                };
                r.jet(s)
            }
        };
        CurveJet { t, value, d1, d2 }
    }

    /// `max | |γ'(t)| - 1 |` over an `n`-point grid.
    pub fn unit_speed_deviation(&self, n: usize) -> f64 {
        self.grid(n)
            .into_iter()
            .map(|t| (self.jet(t).d1.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Total length: `2π`-normalized for reparametrized loops, base length times homothety otherwise.
    pub fn length(&self) -> f64 {
        match &self.family {
            Family::Arclength(r) => r.length * r.scale,
            _ => {
                let (a, b) = (self.domain.start(), self.domain.end());
                let n = 512;
                let h = (b - a) / n as f64;
                (0..n)
                    .map(|i| {
                        gl5(a + i as f64 * h, a + (i + 1) as f64 * h, |t| {
                            self.jet(t).d1.norm()
                        })
                    })
                    .sum()
            }
        }
    }

    /// Native parameter of the underlying family at parameter `s` (identity unless reparametrized).
    pub fn native_parameter(&self, s: f64) -> f64 {
        match &self.family {
            Family::Arclength(r) => {
                let s = if self.is_closed() {
                    s.rem_euclid(TAU)
                } else {
                    s
                };
                r.native_of((s - r.s0) / r.scale)
            }
            _ => s,
        }
    }

    /// Inverse of [`CurveSpec::native_parameter`].
    pub fn parameter_of_native(&self, t: f64) -> f64 {
        match &self.family {
            Family::Arclength(r) => r.s0 + r.scale * r.arclength_of(t),
            _ => t,
        }
    }
}

fn burgers_jet(q: f64, w: f64) -> (Mat2, Mat2, Mat2) {
    let aw = w.abs();
    let p = aw.powf(q);
    let value = Mat2::new(
        -w * w * p / (2.0 + q),
        w,
        -w * p * aw * aw / (3.0 + q),
        0.5 * w * w,
    );
    let d1 = Mat2::new(-w * p, 1.0, -p * aw * aw, w);
    let d2 = Mat2::new(-(1.0 + q) * p, 0.0, -(q + 2.0) * w * p, 1.0);
    (value, d1, d2)
}

/// The family `γ_k`, `k ≥ 1`.
pub fn make_gamma_k(k: u32) -> Result<CurveSpec> {
    if k == 0 {
        return Err(invalid("gamma_k needs k >= 1"));
    }
    Ok(CurveSpec {
        family: Family::GammaK { k },
        domain: Domain::ClosedLoop,
        unit_speed: true,
    })
}

/// Burgers-type arc on `[-v_max, v_max]` in its native (non unit speed) parameter.
pub fn make_burgers(q: f64, v_max: f64) -> Result<CurveSpec> {
    if !(q >= 0.0 && q.is_finite()) {
        return Err(invalid("burgers needs q >= 0"));
    }
    if !(v_max > 0.0 && v_max.is_finite()) {
        return Err(invalid("burgers needs v_max > 0"));
    }
    Ok(CurveSpec {
        family: Family::Burgers { q, v_max },
        domain: Domain::Arc {
            a: -v_max,
            b: v_max,
        },
        unit_speed: false,
    })
}

/// Composite loop `α_k(t) = [γ(t)]_c + k^{-1}[γ̃(kt)]_a` (speed 2, not unit speed).
pub fn make_composite(base_c: PlanarLoop, base_a: PlanarLoop, k: u32) -> Result<CurveSpec> {
    if k == 0 {
        return Err(invalid("composite needs k >= 1"));
    }
    if base_c.modes.is_empty() || base_a.modes.is_empty() {
        return Err(invalid("composite bases must be non-empty closed curves"));
    }
    let n = 1024;
    for i in 0..n {
        let t = TAU * i as f64 / n as f64;
        if (base_c.jet(t)[1].norm() - 1.0).abs() > UNIT_SPEED_TOL
            || (base_a.jet(t)[1].norm() - 1.0).abs() > UNIT_SPEED_TOL
        {
            return Err(invalid("composite bases must be unit speed"));
        }
        if base_a.jet(t)[2].norm() == 0.0 {
            return Err(invalid("composite base_a must have nonvanishing curvature"));
        }
    }
    Ok(CurveSpec {
        family: Family::Composite { base_c, base_a, k },
        domain: Domain::ClosedLoop,
        unit_speed: false,
    })
}

/// Closed trigonometric polynomial curve; the unit-speed flag is measured.
pub fn make_trig_poly(curve: TrigPolyCurve) -> CurveSpec {
    CurveSpec::new_measured(Family::TrigPoly(curve), Domain::ClosedLoop)
}

/// Straight segment `origin + t·direction`, `t ∈ [a, b]`.
pub fn make_line(origin: Mat2, direction: Mat2, a: f64, b: f64) -> Result<CurveSpec> {
    if !(b > a) {
        return Err(invalid("line needs a < b"));
    }
    let unit_speed = (direction.norm() - 1.0).abs() <= 1e-12;
    Ok(CurveSpec {
        family: Family::Line { origin, direction },
        domain: Domain::Arc { a, b },
        unit_speed,
    })
}

/// Closed curve interpolated trigonometrically from `samples` at `t_j = 2πj/n`.
pub fn make_sampled_loop(samples: Vec<Mat2>) -> Result<CurveSpec> {
    if samples.len() < 8 {
        return Err(invalid("sampled loop needs at least 8 samples"));
    }
    Ok(CurveSpec::new_measured(
        Family::Sampled(SampledCurve::closed_from(samples)),
        Domain::ClosedLoop,
    ))
}

/// Arc interpolated by natural cubic splines from samples on a uniform grid of `[a, b]`.
pub fn make_sampled_arc(samples: Vec<Mat2>, a: f64, b: f64) -> Result<CurveSpec> {
    if samples.len() < 4 {
        return Err(invalid("sampled arc needs at least 4 samples"));
    }
    if !(b > a) {
        return Err(invalid("sampled arc needs a < b"));
    }
    Ok(CurveSpec::new_measured(
        Family::Sampled(SampledCurve::arc_from(samples, a, b)),
        Domain::Arc { a, b },
    ))
}

/// Reparametrizes by arc length.
///
/// Loops are scaled to length exactly `2π`; arcs keep their start parameter
/// and are scaled down only when longer than `2π`. The homothety factor is
/// available through [`CurveSpec::homothety`].
pub fn reparametrize_arclength(c: &CurveSpec, n_samples: usize) -> Result<CurveSpec> {
    let n = n_samples.max(16);
    let (a, b) = (c.domain.start(), c.domain.end());
    let h = (b - a) / n as f64;
    let knots_t: Vec<f64> = (0..=n)
        .map(|i| if i == n { b } else { a + i as f64 * h })
        .collect();
    let mut min_speed = f64::INFINITY;
    let mut min_at = a;
    for &t in &knots_t {
        let s = c.jet(t).d1.norm();
        if s < min_speed {
            min_speed = s;
            min_at = t;
        }
    }
    if !(min_speed > 1e-12) {
        return Err(Error::NotImmersion { t: min_at });
    }
    let mut knots_s = Vec::with_capacity(n + 1);
    knots_s.push(0.0);
    for i in 0..n {
        let seg = gl5(knots_t[i], knots_t[i + 1], |t| c.jet(t).d1.norm());
        knots_s.push(knots_s[i] + seg);
    }
    let length = knots_s[n];
    let (scale, domain) = match c.domain {
        Domain::ClosedLoop => (TAU / length, Domain::ClosedLoop),
        Domain::Arc { a, .. } => {
            let scale = if length > TAU { TAU / length } else { 1.0 };
            (
                scale,
                Domain::Arc {
                    a,
                    b: a + scale * length,
                },
            )
        }
    };
    let r = Reparametrization {
        base: Box::new(c.clone()),
        scale,
        length,
        s0: domain.start(),
        knots_t,
        knots_s,
    };
    Ok(CurveSpec {
        family: Family::Arclength(r),
        domain,
        unit_speed: true,
    })
}

/// Chord `|e^{it} - e^{is}| = 2|sin((t-s)/2)|`.
#[inline]
pub fn chord(s: f64, t: f64) -> f64 {
    2.0 * (0.5 * (t - s)).sin().abs()
}

/// Period-aware parameter distance (short way round on loops).
#[inline]
pub fn param_distance(domain: Domain, s: f64, t: f64) -> f64 {
    let d = (t - s).abs();
    match domain {
        Domain::ClosedLoop => {
            let d = d % TAU;
            d.min(TAU - d)
        }
        Domain::Arc { .. } => d,
    }
}
