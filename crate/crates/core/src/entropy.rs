//! Entropies `Φ` on the angular domain with `∂_θΦ = α¹∂_θΓ₁ + α²∂_θΓ₂`, where
//! `Γ_j` are the rows of `cof γ`.
//!
//! Tables store `Φ`, `∂_θΦ` and `∂²_θΦ` on uniform nodes and interpolate with
//! quintic Hermite polynomials.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use core::fmt;

#[cfg(not(feature = "std"))]
use crate::numerics::RemEuclid;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::curve::{CurveSpec, Domain};
use crate::error::{invalid, Error, Result};
use crate::factorize::{Factorization, RankOneFactors};
use crate::numerics::{
    centred_bump, hermite5, inverse_spectral_norm, rho_unit_interval, solve2, wrap_pi, GL5, TAU,
};

/// Coefficient pair `θ ↦ (α¹(θ), α²(θ))`.
pub trait Coefficients {
    fn alpha(&self, theta: f64) -> [f64; 2];
}

impl<F: Fn(f64) -> [f64; 2]> Coefficients for F {
    fn alpha(&self, theta: f64) -> [f64; 2] {
        self(theta)
    }
}

/// Shared, thread-safe coefficient function.
pub type SharedCoefficients = Arc<dyn Coefficients + Send + Sync>;

/// Rows of `cof γ(θ)`: `[Γ₁, Γ₂]`.
pub fn gamma_rows(curve: &CurveSpec, theta: f64) -> [[f64; 2]; 2] {
    let c = curve.jet(theta).value.cof();
    [c.row(0), c.row(1)]
}

/// Rows of `cof γ'(θ)`: `[∂_θΓ₁, ∂_θΓ₂]`.
pub fn gamma_row_derivs(curve: &CurveSpec, theta: f64) -> [[f64; 2]; 2] {
    let c = curve.jet(theta).d1.cof();
    [c.row(0), c.row(1)]
}

fn combine(a: [f64; 2], rows: [[f64; 2]; 2]) -> [f64; 2] {
    [
        a[0] * rows[0][0] + a[1] * rows[1][0],
        a[0] * rows[0][1] + a[1] * rows[1][1],
    ]
}

/// Derivative step for coefficient functions.
fn fd_step(h: f64) -> f64 {
    (h * 1e-2).min(1e-5)
}

/// A tabulated entropy.
#[derive(Clone)]
pub struct Entropy {
    curve: CurveSpec,
    coeffs: SharedCoefficients,
    nodes: Vec<f64>,
    phi: Vec<[f64; 2]>,
    dphi: Vec<[f64; 2]>,
    d2phi: Vec<[f64; 2]>,
    tag: String,
}

impl fmt::Debug for Entropy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Entropy")
            .field("tag", &self.tag)
            .field("domain", &self.curve.domain())
            .field("nodes", &self.nodes.len())
            .finish()
    }
}

fn node_grid(domain: Domain, n: usize) -> Vec<f64> {
    let (a, b) = (domain.start(), domain.end());
    (0..=n)
        .map(|i| {
            if i == n {
                b
            } else {
                a + (b - a) * i as f64 / n as f64
            }
        })
        .collect()
}

/// Parameter span that needs node spacing at most `spacing`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FineSpan {
    pub start: f64,
    pub end: f64,
    pub spacing: f64,
}

/// Piecewise uniform nodes: `base_cells` cells over the domain, refined inside
/// the given spans (loop spans may wrap).
pub fn refined_nodes(domain: Domain, base_cells: usize, fine: &[FineSpan]) -> Vec<f64> {
    let (a, b) = (domain.start(), domain.end());
    let coarse = (b - a) / base_cells.max(1) as f64;
    let mut spans: Vec<(f64, f64, f64)> = Vec::new();
    for s in fine {
        if !(s.end > s.start && s.spacing > 0.0) {
            continue;
        }
        if domain.is_closed() {
            let len = (s.end - s.start).min(TAU);
            let st = s.start.rem_euclid(TAU);
            if st + len <= TAU {
                spans.push((st, st + len, s.spacing));
            } else {
                spans.push((st, TAU, s.spacing));
                spans.push((0.0, st + len - TAU, s.spacing));
            }
        } else {
            let (p, q) = (s.start.max(a), s.end.min(b));
            if q > p {
                spans.push((p, q, s.spacing));
            }
        }
    }
    let mut breaks: Vec<f64> = alloc::vec![a, b];
    for &(p, q, _) in &spans {
        breaks.push(p);
        breaks.push(q);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let mut nodes = alloc::vec![a];
    for w in breaks.windows(2) {
        let (p, q) = (w[0], w[1]);
        let mid = 0.5 * (p + q);
        let spacing = spans
            .iter()
            .filter(|s| s.0 <= mid && mid <= s.1)
            .map(|s| s.2)
            .fold(coarse, f64::min);
        let m = ((q - p) / spacing).ceil().max(1.0) as usize;
        for k in 1..=m {
            nodes.push(if k == m {
                q
            } else {
                p + (q - p) * k as f64 / m as f64
            });
        }
    }
    let last = nodes.len() - 1;
    nodes[last] = b;
    nodes
}

impl Entropy {
    /// Builds derivative tables; `values` are either given (lifts) or integrated.
    fn build(
        curve: &CurveSpec,
        coeffs: SharedCoefficients,
        nodes: Vec<f64>,
        values: Option<Vec<[f64; 2]>>,
        tag: String,
    ) -> Result<(Self, [f64; 2], f64)> {
        let n = nodes.len().saturating_sub(1);
        if n < 16 {
            return Err(Error::GridTooCoarse { n, min: 16 });
        }
        let h = nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let s = fd_step(h);
        let mut dphi = Vec::with_capacity(n + 1);
        let mut d2phi = Vec::with_capacity(n + 1);
        for &t in &nodes {
            let j = curve.jet(t);
            let c1 = j.d1.cof();
            let c2 = j.d2.cof();
            let r1 = [c1.row(0), c1.row(1)];
            let r2 = [c2.row(0), c2.row(1)];
            let a = coeffs.alpha(t);
            let (ap, am) = (coeffs.alpha(t + s), coeffs.alpha(t - s));
            let da = [(ap[0] - am[0]) / (2.0 * s), (ap[1] - am[1]) / (2.0 * s)];
            let d = combine(a, r1);
            let e1 = combine(da, r1);
            let e2 = combine(a, r2);
            dphi.push(d);
            d2phi.push([e1[0] + e2[0], e1[1] + e2[1]]);
        }
        let (phi, defect, mass) = match values {
            Some(v) => (v, [0.0, 0.0], 0.0),
            None => {
                let mut phi = Vec::with_capacity(n + 1);
                phi.push([0.0, 0.0]);
                let mut mass = 0.0;
                for i in 0..n {
                    let (a, b) = (nodes[i], nodes[i + 1]);
                    let mut acc = [0.0; 2];
                    for &(x, w) in GL5.iter() {
                        let t = a + x * (b - a);
                        let v = combine(coeffs.alpha(t), gamma_row_derivs(curve, t));
                        acc[0] += w * v[0];
                        acc[1] += w * v[1];
                        mass += w * v[0].hypot(v[1]) * (b - a);
                    }
                    let prev = phi[i];
                    phi.push([prev[0] + acc[0] * (b - a), prev[1] + acc[1] * (b - a)]);
                }
                let defect = phi[n];
                (phi, defect, mass)
            }
        };
        Ok((
            Entropy {
                curve: curve.clone(),
                coeffs,
                nodes,
                phi,
                dphi,
                d2phi,
                tag,
            },
            defect,
            mass,
        ))
    }

    fn shift(&mut self, by: [f64; 2]) {
        for p in &mut self.phi {
            p[0] += by[0];
            p[1] += by[1];
        }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn curve(&self) -> &CurveSpec {
        &self.curve
    }

    pub fn domain(&self) -> Domain {
        self.curve.domain()
    }

    /// Table nodes (loops include both `0` and `2π`).
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node_values(&self) -> &[[f64; 2]] {
        &self.phi
    }

    /// Number of table cells.
    pub fn resolution(&self) -> usize {
        self.nodes.len() - 1
    }

    fn locate(&self, theta: f64) -> (usize, f64, f64) {
        let (a, b) = (self.nodes[0], self.nodes[self.nodes.len() - 1]);
        let t = match self.domain() {
            Domain::ClosedLoop => theta.rem_euclid(TAU),
            Domain::Arc { .. } => theta.clamp(a, b),
        };
        let n = self.nodes.len() - 1;
        let i = self.nodes.partition_point(|&x| x <= t).clamp(1, n) - 1;
        let h = self.nodes[i + 1] - self.nodes[i];
        (i, ((t - self.nodes[i]) / h).clamp(0.0, 1.0), h)
    }

    fn interp(&self, theta: f64) -> ([f64; 2], [f64; 2]) {
        let (i, u, h) = self.locate(theta);
        let mut v = [0.0; 2];
        let mut d = [0.0; 2];
        for c in 0..2 {
            let (x, y) = hermite5(
                u,
                h,
                self.phi[i][c],
                self.dphi[i][c],
                self.d2phi[i][c],
                self.phi[i + 1][c],
                self.dphi[i + 1][c],
                self.d2phi[i + 1][c],
            );
            v[c] = x;
            d[c] = y;
        }
        (v, d)
    }

    /// `Φ(e^{iθ})`.
    pub fn value(&self, theta: f64) -> [f64; 2] {
        self.interp(theta).0
    }

    /// `∂_θΦ` of the interpolant.
    pub fn derivative(&self, theta: f64) -> [f64; 2] {
        self.interp(theta).1
    }

    /// Coefficients `(α¹, α²)` at `θ`.
    pub fn alpha(&self, theta: f64) -> [f64; 2] {
        self.coeffs.alpha(theta)
    }

    /// Shared handle to the coefficient function.
    pub fn coefficients(&self) -> SharedCoefficients {
        self.coeffs.clone()
    }

    /// `|∂_θΦ - Σ α^j ∂_θΓ_j|` at `θ`.
    pub fn definitional_defect(&self, theta: f64) -> f64 {
        let d = self.derivative(theta);
        let e = combine(self.alpha(theta), gamma_row_derivs(&self.curve, theta));
        (d[0] - e[0]).hypot(d[1] - e[1])
    }

    /// Max of [`Entropy::definitional_defect`] over `per_cell` interior points of
    /// every table cell (a grid `per_cell` times finer than the table).
    pub fn definitional_residual(&self, per_cell: usize) -> f64 {
        let k = per_cell.max(1);
        let mut worst = 0.0f64;
        for w in self.nodes.windows(2) {
            for j in 0..k {
                let t = w[0] + (w[1] - w[0]) * (j as f64 + 0.5) / k as f64;
                worst = worst.max(self.definitional_defect(t));
            }
        }
        worst
    }

    /// `|Φ(2π) - Φ(0)|` for loops, 0 on arcs.
    pub fn periodicity_defect(&self) -> f64 {
        if !self.domain().is_closed() {
            return 0.0;
        }
        let (a, b) = (self.phi[0], self.phi[self.phi.len() - 1]);
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    /// `max |Φ|` over the nodes.
    pub fn sup_norm(&self) -> f64 {
        self.phi
            .iter()
            .map(|p| p[0].hypot(p[1]))
            .fold(0.0, f64::max)
    }

    /// Rows `(θ, Φ₁, Φ₂, α¹, α²)` at the table nodes.
    pub fn table_rows(&self) -> Vec<[f64; 5]> {
        self.nodes
            .iter()
            .zip(&self.phi)
            .map(|(&t, p)| {
                let a = self.alpha(t);
                [t, p[0], p[1], a[0], a[1]]
            })
            .collect()
    }
}

/// Relative tolerance on the loop integral accepted by [`integrate_entropy`].
pub const LOOP_TOL: f64 = 1e-9;

/// Integrates `∂_θΦ = Σ α^j ∂_θΓ_j` from `base_theta`, where `Φ(base_theta) = base_value`.
pub fn integrate_entropy<C>(
    curve: &CurveSpec,
    coeffs: C,
    base_theta: f64,
    base_value: [f64; 2],
    n: usize,
) -> Result<Entropy>
where
    C: Coefficients + Send + Sync + 'static,
{
    integrate_shared(
        curve,
        Arc::new(coeffs),
        base_theta,
        base_value,
        node_grid(curve.domain(), n),
        String::from("integrated"),
    )
}

/// [`integrate_entropy`] on caller-supplied sorted nodes spanning the domain.
pub fn integrate_entropy_on<C>(
    curve: &CurveSpec,
    coeffs: C,
    base_theta: f64,
    base_value: [f64; 2],
    nodes: Vec<f64>,
) -> Result<Entropy>
where
    C: Coefficients + Send + Sync + 'static,
{
    check_nodes(curve.domain(), &nodes)?;
    integrate_shared(
        curve,
        Arc::new(coeffs),
        base_theta,
        base_value,
        nodes,
        String::from("integrated"),
    )
}

fn check_nodes(domain: Domain, nodes: &[f64]) -> Result<()> {
    let ok = nodes.len() >= 2
        && (nodes[0] - domain.start()).abs() < 1e-12
        && (nodes[nodes.len() - 1] - domain.end()).abs() < 1e-12
        && nodes.windows(2).all(|w| w[1] > w[0]);
    if ok {
        Ok(())
    } else {
        Err(Error::DomainMismatch(String::from(
            "nodes must increase strictly from the domain start to its end",
        )))
    }
}

fn integrate_shared(
    curve: &CurveSpec,
    coeffs: SharedCoefficients,
    base_theta: f64,
    base_value: [f64; 2],
    nodes: Vec<f64>,
    tag: String,
) -> Result<Entropy> {
    let base_theta = curve.domain().canonical(base_theta)?;
    let (mut e, defect, mass) = Entropy::build(curve, coeffs, nodes, None, tag)?;
    if curve.is_closed() {
        let magnitude = defect[0].hypot(defect[1]);
        if magnitude > LOOP_TOL * mass.max(1.0) {
            return Err(Error::LoopIntegralNonzero { magnitude });
        }
        let last = e.phi.len() - 1;
        e.phi[last] = e.phi[0];
    }
    let at = e.value(base_theta);
    e.shift([base_value[0] - at[0], base_value[1] - at[1]]);
    Ok(e)
}

/// `∫ Σ α^j ∂_θΓ_j dθ` over the domain, one five-point panel per node cell.
pub fn loop_integral<C: Coefficients + ?Sized>(
    curve: &CurveSpec,
    coeffs: &C,
    nodes: &[f64],
) -> [f64; 2] {
    let mut acc = [0.0; 2];
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        for &(x, wt) in GL5.iter() {
            let t = a + x * (b - a);
            let v = combine(coeffs.alpha(t), gamma_row_derivs(curve, t));
            acc[0] += wt * (b - a) * v[0];
            acc[1] += wt * (b - a) * v[1];
        }
    }
    acc
}

/// Cells per bump width used to resolve correction bumps.
pub const CELLS_PER_BUMP: f64 = 256.0;

/// Options for [`zero_average_correct`].
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionOptions {
    /// Bump centres `(θ₁, θ₂)`; chosen automatically when `None`.
    pub centres: Option<(f64, f64)>,
    /// Total support width of each bump.
    pub bump_width: f64,
    /// Arc `(θ_start, θ_end)` the bumps must avoid.
    pub protected: Option<(f64, f64)>,
    /// Coarse quadrature cells over the loop.
    pub base_cells: usize,
    /// Extra spans where the input coefficients need finer cells.
    pub fine: Vec<FineSpan>,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        CorrectionOptions {
            centres: None,
            bump_width: 0.2,
            protected: None,
            base_cells: 2048,
            fine: Vec::new(),
        }
    }
}

/// `α̃ = α + (b₁ψ_{θ₁}, b₂ψ_{θ₂})` with unit-mass bumps `ψ` chosen so that the
/// loop integral of `Σ α̃^j ∂_θΓ_j` vanishes.
#[derive(Clone, Debug)]
pub struct ZeroAverageCorrection<C> {
    base: C,
    pub centres: (f64, f64),
    pub bump_width: f64,
    pub weights: [f64; 2],
    /// Loop integral `v` before correction.
    pub original_integral: [f64; 2],
    /// `C` with `sup|α̃ - α| ≤ C|v|`.
    pub constant: f64,
    /// `|det(∂_θΓ₁(θ₁), ∂_θΓ₂(θ₂))|` with the bump-averaged columns.
    pub pair_det: f64,
    nodes: Vec<f64>,
}

impl<C: Coefficients> ZeroAverageCorrection<C> {
    pub fn base(&self) -> &C {
        &self.base
    }

    /// Nodes of the quadrature on which the loop integral was cancelled.
    pub fn quadrature_nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `sup |α̃ - α|` (attained at the bump centres).
    pub fn sup_deviation(&self) -> f64 {
        let peak = centred_bump(0.0, self.bump_width);
        self.weights[0].abs().max(self.weights[1].abs()) * peak
    }
}

impl<C: Coefficients> Coefficients for ZeroAverageCorrection<C> {
    fn alpha(&self, theta: f64) -> [f64; 2] {
        let a = self.base.alpha(theta);
        let b1 = centred_bump(wrap_pi(theta - self.centres.0), self.bump_width);
        let b2 = centred_bump(wrap_pi(theta - self.centres.1), self.bump_width);
        [a[0] + self.weights[0] * b1, a[1] + self.weights[1] * b2]
    }
}

/// Distance on the circle from `t` to the arc `[s, e]` (`s < e`).
fn distance_to_arc(t: f64, arc: (f64, f64)) -> f64 {
    let (s, e) = arc;
    let u = s + (t - s).rem_euclid(TAU);
    if u <= e {
        0.0
    } else {
        (u - e).min(s + TAU - u)
    }
}

/// Modifies `α` near two points so that the loop integral vanishes.
pub fn zero_average_correct<C: Coefficients>(
    curve: &CurveSpec,
    coeffs: C,
    opts: CorrectionOptions,
) -> Result<ZeroAverageCorrection<C>> {
    if !curve.is_closed() {
        return Err(Error::ArcDomain);
    }
    let w = opts.bump_width;
    if !(w > 0.0 && w < PI) {
        return Err(invalid("bump width must lie in (0, π)"));
    }
    let centres = match opts.centres {
        Some(c) => c,
        None => {
            let m = 128;
            let cand: Vec<(f64, [[f64; 2]; 2])> = (0..m)
                .map(|i| TAU * i as f64 / m as f64)
                .filter(|&t| {
                    opts.protected
                        .map_or(true, |arc| distance_to_arc(t, arc) > 0.5 * w * 1.01)
                })
                .map(|t| (t, gamma_row_derivs(curve, t)))
                .collect();
            let mut best = (0.0, (0.0, 0.0));
            for (t1, r1) in &cand {
                for (t2, r2) in &cand {
                    let d = (r1[0][0] * r2[1][1] - r1[0][1] * r2[1][0]).abs();
                    if d > best.0 {
                        best = (d, (*t1, *t2));
                    }
                }
            }
            if best.0 < 1e-8 {
                return Err(Error::NoWellConditionedPair);
            }
            best.1
        }
    };
    // Columns A_j = ∫ ψ_{θ_j} ∂_θΓ_j with the same quadrature as the loop integral.
    let mut fine = opts.fine.clone();
    for c in [centres.0, centres.1] {
        fine.push(FineSpan {
            start: c - 0.5 * w,
            end: c + 0.5 * w,
            spacing: w / CELLS_PER_BUMP,
        });
    }
    let nodes = refined_nodes(curve.domain(), opts.base_cells, &fine);
    let bump1 = |t: f64| [centred_bump(wrap_pi(t - centres.0), w), 0.0];
    let bump2 = |t: f64| [0.0, centred_bump(wrap_pi(t - centres.1), w)];
    let col1 = loop_integral(curve, &bump1, &nodes);
    let col2 = loop_integral(curve, &bump2, &nodes);
    let v = loop_integral(curve, &coeffs, &nodes);
    let weights = solve2(col1, col2, [-v[0], -v[1]]).ok_or(Error::NoWellConditionedPair)?;
    let pair_det = (col1[0] * col2[1] - col2[0] * col1[1]).abs();
    if pair_det < 1e-10 {
        return Err(Error::NoWellConditionedPair);
    }
    let constant = inverse_spectral_norm(col1, col2) * centred_bump(0.0, w);
    Ok(ZeroAverageCorrection {
        base: coeffs,
        centres,
        bump_width: w,
        weights,
        original_integral: v,
        constant,
        pair_det,
        nodes,
    })
}

/// Generalized indicator entropy with its construction data.
#[derive(Clone, Debug)]
pub struct GeneralizedEntropy {
    pub entropy: Entropy,
    pub xi: [f64; 2],
    pub arc: (f64, f64),
    pub delta: f64,
    pub t0: f64,
    /// Signs with `Ψ̂(θ_a) = τξ`, `Ψ̂(θ_b) = σξ`.
    pub tau: i8,
    pub sigma: i8,
    /// Loop integral before the zero-average correction (loops only).
    pub loop_integral_before: Option<[f64; 2]>,
    pub correction_constant: Option<f64>,
}

#[derive(Clone)]
struct IndicatorCoefficients {
    theta_a: f64,
    theta_b: f64,
    delta: f64,
    closed: bool,
    dir: [f64; 2],
    ca: f64,
    cb: f64,
}

impl Coefficients for IndicatorCoefficients {
    fn alpha(&self, theta: f64) -> [f64; 2] {
        let u = if self.closed {
            self.theta_a + (theta - self.theta_a).rem_euclid(TAU)
        } else {
            theta
        };
        let ra = rho_unit_interval((u - self.theta_a) / self.delta) / self.delta;
        let rb = rho_unit_interval((self.theta_b - u) / self.delta) / self.delta;
        let s = self.ca * ra - self.cb * rb;
        [self.dir[0] * s, self.dir[1] * s]
    }
}

pub(crate) fn sign_match(psi: [f64; 2], xi: [f64; 2]) -> (i8, f64) {
    let plus = (psi[0] - xi[0]).hypot(psi[1] - xi[1]);
    let minus = (psi[0] + xi[0]).hypot(psi[1] + xi[1]);
    if plus <= minus {
        (1, plus)
    } else {
        (-1, minus)
    }
}

/// Smooth approximation of `ξ·1_{(θ_a, θ_b)}` in the entropy class.
///
/// `Ψ̂(θ_a), Ψ̂(θ_b) ∈ {±ξ}` is required to `1e-8`; on loops `θ_a < θ_b < θ_a + 2π`.
pub fn generalized_entropy(
    f: &Factorization,
    xi: [f64; 2],
    arc: (f64, f64),
    delta: f64,
) -> Result<GeneralizedEntropy> {
    let curve = f.curve();
    let closed = curve.is_closed();
    let r = xi[0].hypot(xi[1]);
    if !(r > 0.0) {
        return Err(invalid("xi must be a nonzero direction"));
    }
    let xi = [xi[0] / r, xi[1] / r];
    let (theta_a, mut theta_b) = arc;
    if closed {
        while theta_b <= theta_a {
            theta_b += TAU;
        }
        if theta_b >= theta_a + TAU {
            return Err(invalid("arc must satisfy θ_a < θ_b < θ_a + 2π"));
        }
    } else {
        curve.domain().canonical(theta_a)?;
        curve.domain().canonical(theta_b)?;
        if theta_b <= theta_a {
            return Err(invalid("arc must satisfy θ_a < θ_b"));
        }
    }
    if !(delta > 0.0 && delta < 0.25 * (theta_b - theta_a)) {
        return Err(invalid("delta must lie in (0, (θ_b - θ_a)/4)"));
    }
    let (tau, da) = sign_match(f.psi_hat(theta_a), xi);
    let (sigma, db) = sign_match(f.psi_hat(theta_b), xi);
    let deviation = da.max(db);
    if deviation > 1e-8 {
        return Err(Error::EndpointMismatch { deviation });
    }
    let (la, lb) = (f.lambda_hat(theta_a), f.lambda_hat(theta_b));
    let mut best = (0.0, 0.0);
    for i in 0..180 {
        let t0 = PI * i as f64 / 180.0;
        let e = [t0.cos(), t0.sin()];
        let score = (e[0] * la[0] + e[1] * la[1]).abs() * (e[0] * lb[0] + e[1] * lb[1]).abs();
        if score > best.0 {
            best = (score, t0);
        }
    }
    if best.0 < 1e-12 {
        return Err(Error::NoTransversalDirection);
    }
    let t0 = best.1;
    let dir = [t0.cos(), t0.sin()];
    let ca = tau as f64 / (dir[0] * la[0] + dir[1] * la[1]);
    let cb = sigma as f64 / (dir[0] * lb[0] + dir[1] * lb[1]);
    let coeffs = IndicatorCoefficients {
        theta_a,
        theta_b,
        delta,
        closed,
        dir,
        ca,
        cb,
    };
    let len = curve.domain().length();
    let fine = alloc::vec![
        FineSpan {
            start: theta_a,
            end: theta_a + delta,
            spacing: delta / (2.0 * CELLS_PER_BUMP)
        },
        FineSpan {
            start: theta_b - delta,
            end: theta_b,
            spacing: delta / (2.0 * CELLS_PER_BUMP)
        },
    ];
    let base_cells = ((len / PI) * 1024.0).ceil() as usize;
    let tag = format!(
        "generalized(xi=({:.6},{:.6}),arc=({:.6},{:.6}),delta={})",
        xi[0], xi[1], theta_a, theta_b, delta
    );
    let (entropy, before, constant) = if closed {
        let gap = TAU - (theta_b - theta_a) - 2.0 * delta;
        let width = (gap / 3.0).min(0.5);
        if !(width > 1e-3) {
            return Err(Error::NoWellConditionedPair);
        }
        let opts = CorrectionOptions {
            centres: None,
            bump_width: width,
            protected: Some((theta_a - delta, theta_b + delta)),
            base_cells,
            fine,
        };
        let corr = zero_average_correct(curve, coeffs, opts)?;
        let (v, c) = (corr.original_integral, corr.constant);
        let nodes = corr.quadrature_nodes().to_vec();
        let e = integrate_shared(curve, Arc::new(corr), theta_a, [0.0, 0.0], nodes, tag)?;
        (e, Some(v), Some(c))
    } else {
        let nodes = refined_nodes(curve.domain(), base_cells, &fine);
        let e = integrate_shared(
            curve,
            Arc::new(coeffs),
            curve.domain().start(),
            [0.0, 0.0],
            nodes,
            tag,
        )?;
        (e, None, None)
    };
    Ok(GeneralizedEntropy {
        entropy,
        xi,
        arc: (theta_a, theta_b),
        delta,
        t0,
        tau,
        sigma,
        loop_integral_before: before,
        correction_constant: constant,
    })
}

/// Entropy of the eikonal equation: `∂_θΦ̃(e^{iθ})·e^{iθ} = 0`.
pub trait EikonalProfile {
    fn value(&self, angle: f64) -> [f64; 2];
    fn derivative(&self, angle: f64) -> [f64; 2];
    /// `μ` with `∂_θΦ̃ = μ·ie^{iθ}`.
    fn mu(&self, angle: f64) -> f64 {
        let d = self.derivative(angle);
        -d[0] * angle.sin() + d[1] * angle.cos()
    }
}

/// Eikonal entropy with `μ(θ) = Σ a_n cos nθ + Σ b_n sin nθ`, `n ≠ 1`, plus a constant.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FourierEikonal {
    pub constant: [f64; 2],
    pub cos_modes: Vec<(u32, f64)>,
    pub sin_modes: Vec<(u32, f64)>,
}

impl FourierEikonal {
    pub fn new(
        constant: [f64; 2],
        cos_modes: Vec<(u32, f64)>,
        sin_modes: Vec<(u32, f64)>,
    ) -> Result<Self> {
        if cos_modes.iter().chain(&sin_modes).any(|&(n, _)| n == 1) {
            return Err(invalid("mode n = 1 has no periodic primitive"));
        }
        Ok(FourierEikonal {
            constant,
            cos_modes,
            sin_modes,
        })
    }

    /// `μ = cos(nθ)`.
    pub fn cosine(n: u32) -> Result<Self> {
        Self::new([0.0, 0.0], alloc::vec![(n, 1.0)], Vec::new())
    }

    /// `μ = sin(nθ)`.
    pub fn sine(n: u32) -> Result<Self> {
        Self::new([0.0, 0.0], Vec::new(), alloc::vec![(n, 1.0)])
    }

    /// Whether `Φ̃(-z) = Φ̃(z)` (all modes odd).
    pub fn is_even(&self) -> bool {
        self.cos_modes
            .iter()
            .chain(&self.sin_modes)
            .all(|&(n, c)| n % 2 == 1 || c == 0.0)
    }
}

impl EikonalProfile for FourierEikonal {
    fn value(&self, th: f64) -> [f64; 2] {
        let mut v = self.constant;
        let ex = |k: f64, scale_re: f64, scale_im: f64| -> [f64; 2] {
            // (scale_re + i scale_im) e^{ikθ}
            let (s, c) = (k * th).sin_cos();
            [scale_re * c - scale_im * s, scale_re * s + scale_im * c]
        };
        for &(n, a) in &self.cos_modes {
            let nf = n as f64;
            let p = ex(nf + 1.0, a / (2.0 * (nf + 1.0)), 0.0);
            let q = ex(-(nf - 1.0), -a / (2.0 * (nf - 1.0)), 0.0);
            v[0] += p[0] + q[0];
            v[1] += p[1] + q[1];
        }
        for &(n, b) in &self.sin_modes {
            let nf = n as f64;
            let p = ex(nf + 1.0, 0.0, -b / (2.0 * (nf + 1.0)));
            let q = ex(-(nf - 1.0), 0.0, -b / (2.0 * (nf - 1.0)));
            v[0] += p[0] + q[0];
            v[1] += p[1] + q[1];
        }
        v
    }

    fn derivative(&self, th: f64) -> [f64; 2] {
        let m = self.mu(th);
        [-m * th.sin(), m * th.cos()]
    }

    fn mu(&self, th: f64) -> f64 {
        let c: f64 = self
            .cos_modes
            .iter()
            .map(|&(n, a)| a * (n as f64 * th).cos())
            .sum();
        let s: f64 = self
            .sin_modes
            .iter()
            .map(|&(n, b)| b * (n as f64 * th).sin())
            .sum();
        c + s
    }
}

/// Lifts an eikonal entropy through `iΨ`: `Φ(e^{iθ}) = Φ̃(e^{i(π/2 + φ_Ψ(θ))})`.
pub fn lift_eikonal_entropy<P>(f: &Factorization, profile: P, n: usize) -> Result<Entropy>
where
    P: EikonalProfile + Send + Sync + 'static,
{
    let mut tangency = 0.0f64;
    let mut parity = 0.0f64;
    for i in 0..256 {
        let a = TAU * i as f64 / 256.0;
        let d = profile.derivative(a);
        tangency = tangency.max((d[0] * a.cos() + d[1] * a.sin()).abs());
        let (p, q) = (profile.value(a), profile.value(a + PI));
        parity = parity.max((p[0] - q[0]).hypot(p[1] - q[1]));
    }
    if tangency > 1e-8 {
        return Err(Error::TangencyViolation {
            deviation: tangency,
        });
    }
    if !f.orientable() && parity > 1e-8 {
        return Err(Error::ParityViolation { deviation: parity });
    }
    let curve = f.curve().clone();
    let fa = Arc::new(f.clone());
    let profile = Arc::new(profile);
    let (fc, pc) = (fa.clone(), profile.clone());
    let coeffs = move |t: f64| {
        let p = fc.phases(t);
        let s = -p.dphi_psi() * pc.mu(FRAC_PI_2 + p.phi_psi());
        let l = p.phi_lambda();
        [s * l.cos(), s * l.sin()]
    };
    let nodes = node_grid(curve.domain(), n.max(16));
    let values: Vec<[f64; 2]> = nodes
        .iter()
        .map(|&t| profile.value(FRAC_PI_2 + fa.phi_psi(t)))
        .collect();
    let (e, _, _) = Entropy::build(
        &curve,
        Arc::new(coeffs),
        node_grid(curve.domain(), n),
        Some(values),
        String::from("eikonal_lift"),
    )?;
    Ok(e)
}

/// The pair with `∂_θΦ = λ₁²λ₂Ψ`, `∂_θΦ̄ = λ₂²λ₁Ψ` near `m0`.
#[derive(Clone, Debug)]
pub struct SpecialPair {
    pub phi: Entropy,
    pub phi_bar: Entropy,
    /// `-|∂_θλ̂(m0)|²`.
    pub witness: f64,
    /// Interval around `m0` where the prescriptions hold exactly.
    pub protected: (f64, f64),
    factors: Arc<Factorization>,
}

impl SpecialPair {
    /// Max over the protected interval of `|∂_θΦ - β^j ∂_θΓ_j|` for both members,
    /// with `β_Φ = (λ₁λ₂, λ₁²)` and `β_Φ̄ = (λ₂², λ₁λ₂)`.
    pub fn coefficient_defect(&self, n: usize) -> f64 {
        let (s, e) = self.protected;
        let curve = self.phi.curve();
        let mut worst = 0.0f64;
        for i in 0..=n {
            let t = s + (e - s) * i as f64 / n as f64;
            let l = self.factors.lambda_hat(t);
            let rows = gamma_row_derivs(curve, t);
            let d = self.phi.derivative(t);
            let db = self.phi_bar.derivative(t);
            let checks = [
                (d, l[0] * l[1], rows[0]),
                (d, l[0] * l[0], rows[1]),
                (db, l[1] * l[1], rows[0]),
                (db, l[0] * l[1], rows[1]),
            ];
            for (phi_d, beta, row) in checks {
                worst = worst.max((phi_d[0] - beta * row[0]).hypot(phi_d[1] - beta * row[1]));
            }
        }
        worst
    }
}

/// Builds the special pair around `m0` with protected half-width `radius`.
pub fn special_pair(f: &Factorization, m0: f64, radius: f64, n: usize) -> Result<SpecialPair> {
    if !(f.min_phase_speed() > 0.0) {
        return Err(Error::NonMonotonePhase);
    }
    let curve = f.curve();
    let fa = Arc::new(f.clone());
    let protected = (m0 - radius, m0 + radius);
    let witness = {
        let p = f.phases(m0);
        -p.dphi_lambda() * p.dphi_lambda()
    };
    let build = |which: usize, tag: &str| -> Result<Entropy> {
        let fc = fa.clone();
        let base = move |t: f64| {
            let l = fc.lambda_hat(t);
            let p = l[0] * l[1];
            if which == 0 {
                [p, 0.0]
            } else {
                [0.0, p]
            }
        };
        if curve.is_closed() {
            let width = (0.5 * (TAU - 2.0 * radius)).min(0.4);
            let opts = CorrectionOptions {
                centres: None,
                bump_width: width,
                protected: Some(protected),
                base_cells: n,
                fine: Vec::new(),
            };
            let corr = zero_average_correct(curve, base, opts)?;
            let nodes = corr.quadrature_nodes().to_vec();
            integrate_shared(
                curve,
                Arc::new(corr),
                m0,
                [0.0, 0.0],
                nodes,
                String::from(tag),
            )
        } else {
            integrate_shared(
                curve,
                Arc::new(base),
                m0,
                [0.0, 0.0],
                node_grid(curve.domain(), n),
                String::from(tag),
            )
        }
    };
    let phi = build(0, "special_phi")?;
    let phi_bar = build(1, "special_phi_bar")?;
    Ok(SpecialPair {
        phi,
        phi_bar,
        witness,
        protected,
        factors: fa,
    })
}

/// The rows `Γ₁`, `Γ₂` themselves as entropies (`α = (1,0)` and `(0,1)`).
pub fn gamma_entropies(curve: &CurveSpec, n: usize) -> Result<[Entropy; 2]> {
    let start = curve.domain().start();
    let rows = gamma_rows(curve, start);
    let mut g1 = integrate_shared(
        curve,
        Arc::new(|_: f64| [1.0, 0.0]),
        start,
        rows[0],
        node_grid(curve.domain(), n),
        String::from("gamma_1"),
    )?;
    let mut g2 = integrate_shared(
        curve,
        Arc::new(|_: f64| [0.0, 1.0]),
        start,
        rows[1],
        node_grid(curve.domain(), n),
        String::from("gamma_2"),
    )?;
    g1.tag = String::from("gamma_1");
    g2.tag = String::from("gamma_2");
    Ok([g1, g2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::make_gamma_k;
    use crate::factorize::factorize;

    #[test]
    fn zero_coefficients_give_constant() {
        let g = make_gamma_k(2).unwrap();
        let e = integrate_entropy(&g, |_: f64| [0.0, 0.0], 0.3, [1.5, -2.0], 64).unwrap();
        for t in [0.0, 1.0, 4.0] {
            assert_eq!(e.value(t), [1.5, -2.0]);
        }
    }

    #[test]
    fn gamma_rows_are_entropies() {
        let g = make_gamma_k(2).unwrap();
        let [g1, g2] = gamma_entropies(&g, 1024).unwrap();
        for t in g.grid(97) {
            let r = gamma_rows(&g, t);
            let (a, b) = (g1.value(t), g2.value(t));
            assert!((a[0] - r[0][0]).abs() < 1e-8 && (a[1] - r[0][1]).abs() < 1e-8);
            assert!((b[0] - r[1][0]).abs() < 1e-8 && (b[1] - r[1][1]).abs() < 1e-8);
        }
        assert!(g1.definitional_residual(4) < 1e-8);
        assert!(g1.periodicity_defect() < 1e-10);
    }

    #[test]
    fn nonzero_loop_integral_is_rejected_then_corrected() {
        let g = make_gamma_k(2).unwrap();
        let a = |t: f64| [t.cos(), 0.0];
        assert!(matches!(
            integrate_entropy(&g, a, 0.0, [0.0, 0.0], 1024),
            Err(Error::LoopIntegralNonzero { .. })
        ));
        let corr = zero_average_correct(&g, a, CorrectionOptions::default()).unwrap();
        let v = loop_integral(&g, &corr, corr.quadrature_nodes());
        assert!(v[0].hypot(v[1]) < 1e-12);
        let dev = corr.sup_deviation();
        let mag = corr.original_integral[0].hypot(corr.original_integral[1]);
        assert!(dev <= corr.constant * mag * (1.0 + 1e-12));
        let nodes = corr.quadrature_nodes().to_vec();
        let e = integrate_entropy_on(&g, corr, 0.0, [0.0, 0.0], nodes).unwrap();
        let r = e.definitional_residual(4);
        assert!(r < 1e-6, "{r:e}");
    }

    #[test]
    fn lifted_eikonal_entropy() {
        let f = factorize(&make_gamma_k(2).unwrap(), 64).unwrap();
        let e = lift_eikonal_entropy(&f, FourierEikonal::cosine(2).unwrap(), 2048).unwrap();
        assert!(e.definitional_residual(4) < 1e-8);
        assert!(e.periodicity_defect() < 1e-10);
        let f1 = factorize(&make_gamma_k(1).unwrap(), 64).unwrap();
        assert!(matches!(
            lift_eikonal_entropy(&f1, FourierEikonal::cosine(2).unwrap(), 512),
            Err(Error::ParityViolation { .. })
        ));
        assert!(lift_eikonal_entropy(&f1, FourierEikonal::cosine(3).unwrap(), 512).is_ok());
    }

    #[test]
    fn special_pair_witness() {
        let f = factorize(&make_gamma_k(2).unwrap(), 64).unwrap();
        let sp = special_pair(&f, 0.0, 0.4, 4096).unwrap();
        assert!((sp.witness + 4.0).abs() < 1e-10);
        assert!(sp.coefficient_defect(200) < 1e-8);
        assert!(sp.phi.definitional_residual(4) < 1e-6);
    }

    #[test]
    fn generalized_entropy_limits() {
        let f = factorize(&make_gamma_k(2).unwrap(), 64).unwrap();
        let xi = [1.0, 0.0];
        let pre = f.psi_preimages(xi).unwrap();
        let g = generalized_entropy(&f, xi, (pre[0].t, pre[1].t), 1e-3).unwrap();
        let mid = 0.5 * (pre[0].t + pre[1].t);
        let v = g.entropy.value(mid);
        assert!((v[0] - 1.0).abs() < 1e-2 && v[1].abs() < 1e-2, "{v:?}");
        let out = g
            .entropy
            .value(pre[1].t + 0.5 * (TAU - (pre[1].t - pre[0].t)));
        assert!(out[0].hypot(out[1]) < 1e-2, "{out:?}");
    }
}
