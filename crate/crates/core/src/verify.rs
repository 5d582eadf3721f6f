//! Estimators on gridded fields: weak divergence residuals, kinetic residuals,
//! Besov seminorms, mollification commutators, singularities and component
//! membership.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use crate::numerics::RemEuclid;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certify::Certificate;
use crate::curve::{CurveSpec, Domain};
use crate::entropy::{
    gamma_rows, lift_eikonal_entropy, sign_match, special_pair, Entropy, FourierEikonal,
};
use crate::error::{invalid, Error, Result};
use crate::factorize::{Factorization, RankOneFactors};
use crate::field::{mollify_map, DirectionField, Grid, MollifierSpec};
use crate::numerics::{fit_line, wrap_pi, TAU};

pub use crate::numerics::LineFit;

/// A map `J → ℝ²` evaluated along the field, `x ↦ Φ(m(x))`.
pub trait Flux {
    fn flux(&self, theta: f64) -> [f64; 2];
    fn label(&self) -> String;
}

impl Flux for Entropy {
    fn flux(&self, theta: f64) -> [f64; 2] {
        self.value(theta)
    }

    fn label(&self) -> String {
        String::from(self.tag())
    }
}

impl<T: Flux + ?Sized> Flux for &T {
    fn flux(&self, theta: f64) -> [f64; 2] {
        (**self).flux(theta)
    }

    fn label(&self) -> String {
        (**self).label()
    }
}

impl<T: Flux + ?Sized> Flux for Box<T> {
    fn flux(&self, theta: f64) -> [f64; 2] {
        (**self).flux(theta)
    }

    fn label(&self) -> String {
        (**self).label()
    }
}

/// Row `Γ_j` of `cof γ`, exact from the curve.
#[derive(Clone, Debug)]
pub struct GammaRow {
    pub curve: CurveSpec,
    /// 0 or 1.
    pub row: usize,
}

impl Flux for GammaRow {
    fn flux(&self, theta: f64) -> [f64; 2] {
        gamma_rows(&self.curve, theta)[self.row]
    }

    fn label(&self) -> String {
        alloc::format!("gamma_row_{}", self.row + 1)
    }
}

/// `ξ · 1_{θ ∈ A}` for a parameter arc `A = (a, b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndicatorFlux {
    pub xi: [f64; 2],
    pub arc: (f64, f64),
    pub domain: Domain,
}

impl IndicatorFlux {
    pub fn contains(&self, theta: f64) -> bool {
        let (a, b) = self.arc;
        match self.domain {
            Domain::ClosedLoop => (theta - a).rem_euclid(TAU) < (b - a).rem_euclid(TAU),
            Domain::Arc { .. } => theta > a && theta < b,
        }
    }
}

impl Flux for IndicatorFlux {
    fn flux(&self, theta: f64) -> [f64; 2] {
        if self.contains(theta) {
            self.xi
        } else {
            [0.0, 0.0]
        }
    }

    fn label(&self) -> String {
        alloc::format!(
            "indicator(xi=({:.6},{:.6}),arc=({:.6},{:.6}))",
            self.xi[0],
            self.xi[1],
            self.arc.0,
            self.arc.1
        )
    }
}

/// Closure-backed flux.
pub struct FnFlux<F> {
    pub label: String,
    pub f: F,
}

impl<F> core::fmt::Debug for FnFlux<F> {
    fn fmt(&self, fmt: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        fmt.debug_struct("FnFlux")
            .field("label", &self.label)
            .finish()
    }
}

impl<F: Fn(f64) -> [f64; 2]> Flux for FnFlux<F> {
    fn flux(&self, theta: f64) -> [f64; 2] {
        (self.f)(theta)
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// Tensor bump `φ(x) = b((x-c₁)/r) b((y-c₂)/r)` with `b(t) = (1-t²)³` (C²).
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestBump {
    pub centre: [f64; 2],
    pub radius: f64,
}

#[inline]
fn profile(t: f64) -> (f64, f64) {
    if t.abs() >= 1.0 {
        (0.0, 0.0)
    } else {
        let s = 1.0 - t * t;
        (s * s * s, -6.0 * t * s * s)
    }
}

impl TestBump {
    #[inline]
    pub fn value(&self, x: [f64; 2]) -> f64 {
        let r = self.radius;
        profile((x[0] - self.centre[0]) / r).0 * profile((x[1] - self.centre[1]) / r).0
    }

    #[inline]
    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let r = self.radius;
        let (bx, dx) = profile((x[0] - self.centre[0]) / r);
        let (by, dy) = profile((x[1] - self.centre[1]) / r);
        [dx * by / r, bx * dy / r]
    }

    /// Inclusive range of cells whose centres may lie in the support.
    fn cell_range(&self, g: &Grid) -> (usize, usize, usize, usize) {
        let (hx, hy) = (g.hx(), g.hy());
        let lo = |c: f64, o: f64, h: f64, n: usize| {
            (((c - self.radius - o) / h - 0.5).floor().max(0.0) as usize).min(n - 1)
        };
        let hi = |c: f64, o: f64, h: f64, n: usize| {
            (((c + self.radius - o) / h - 0.5).ceil().max(0.0) as usize).min(n - 1)
        };
        (
            lo(self.centre[0], g.bounds[0], hx, g.nx),
            hi(self.centre[0], g.bounds[0], hx, g.nx),
            lo(self.centre[1], g.bounds[2], hy, g.ny),
            hi(self.centre[1], g.bounds[2], hy, g.ny),
        )
    }

    fn inside(&self, rect: [f64; 4]) -> bool {
        self.centre[0] - self.radius >= rect[0]
            && self.centre[0] + self.radius <= rect[1]
            && self.centre[1] - self.radius >= rect[2]
            && self.centre[1] + self.radius <= rect[3]
    }
}

/// Family of compactly supported test functions.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestBank {
    pub bumps: Vec<TestBump>,
}

/// Relative centre offsets and radii of the standard bank.
const BANK_OFFSETS: [f64; 3] = [-0.2, 0.0, 0.2];
const BANK_RADII: [f64; 3] = [0.1, 0.18, 0.28];

impl TestBank {
    /// Three scales times a 3×3 lattice of centres inside `rect = [x0, x1, y0, y1]`.
    pub fn standard(rect: [f64; 4]) -> Self {
        let (lx, ly) = (rect[1] - rect[0], rect[3] - rect[2]);
        let mid = [0.5 * (rect[0] + rect[1]), 0.5 * (rect[2] + rect[3])];
        let mut bumps = Vec::with_capacity(27);
        for &r in &BANK_RADII {
            for &oy in &BANK_OFFSETS {
                for &ox in &BANK_OFFSETS {
                    bumps.push(TestBump {
                        centre: [mid[0] + ox * lx, mid[1] + oy * ly],
                        radius: r * lx.min(ly),
                    });
                }
            }
        }
        TestBank { bumps }
    }

    /// Standard bank on the whole grid rectangle.
    pub fn for_grid(g: &Grid) -> Self {
        TestBank::standard(g.bounds)
    }

    /// Standard bank on the inner subdomain `U`.
    pub fn inner(g: &Grid) -> Self {
        let m = g.inner_margin;
        let b = g.bounds;
        TestBank::standard([b[0] + m, b[1] - m, b[2] + m, b[3] - m])
    }
}

/// Weak residuals `R(φ) = Σ Φ(m)·∇φ h²` over a bank.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResidualReport {
    pub label: String,
    pub residuals: Vec<f64>,
    /// `‖∇φ‖_{L¹}` per test function.
    pub normalizations: Vec<f64>,
    pub max_normalized: f64,
    pub grid_n: (usize, usize),
    pub masked_cells: usize,
    pub masked_measure: f64,
}

fn check_bank(g: &Grid, bank: &TestBank) -> Result<()> {
    if bank
        .bumps
        .iter()
        .all(|b| b.inside(g.bounds) && b.radius > 0.0)
    {
        Ok(())
    } else {
        Err(Error::SupportOutsideDomain)
    }
}

/// Weak form of `∇·Φ(m) = 0` against every test function of the bank.
pub fn weak_divergence_residual<F: Flux + ?Sized>(
    field: &DirectionField,
    flux: &F,
    bank: &TestBank,
) -> Result<ResidualReport> {
    let g = &field.grid;
    check_bank(g, bank)?;
    let values: Vec<[f64; 2]> = field
        .theta
        .iter()
        .zip(&field.mask)
        .map(|(&t, &m)| if m { [0.0, 0.0] } else { flux.flux(t) })
        .collect();
    let area = g.cell_area();
    let mut residuals = Vec::with_capacity(bank.bumps.len());
    let mut norms = Vec::with_capacity(bank.bumps.len());
    for b in &bank.bumps {
        let (i0, i1, j0, j1) = b.cell_range(g);
        let (mut r, mut nrm) = (0.0, 0.0);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let dphi = b.gradient(g.centre(i, j));
                nrm += dphi[0].hypot(dphi[1]) * area;
                let k = g.index(i, j);
                if !field.mask[k] {
                    r += (values[k][0] * dphi[0] + values[k][1] * dphi[1]) * area;
                }
            }
        }
        residuals.push(r);
        norms.push(nrm);
    }
    let max_normalized = residuals
        .iter()
        .zip(&norms)
        .map(|(r, n)| if *n > 0.0 { r.abs() / n } else { 0.0 })
        .fold(0.0, f64::max);
    Ok(ResidualReport {
        label: flux.label(),
        residuals,
        normalizations: norms,
        max_normalized,
        grid_n: (g.nx, g.ny),
        masked_cells: field.masked_count(),
        masked_measure: field.masked_measure(),
    })
}

/// One report per flux and the overall maximum.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SuiteReport {
    pub reports: Vec<ResidualReport>,
    pub max_normalized: f64,
}

pub fn entropy_production_suite<F: Flux>(
    field: &DirectionField,
    fluxes: &[F],
    bank: &TestBank,
) -> Result<SuiteReport> {
    let reports = fluxes
        .iter()
        .map(|f| weak_divergence_residual(field, f, bank))
        .collect::<Result<Vec<_>>>()?;
    let max_normalized = reports.iter().map(|r| r.max_normalized).fold(0.0, f64::max);
    Ok(SuiteReport {
        reports,
        max_normalized,
    })
}

/// Lifted eikonal profiles `cos nθ`, `sin nθ` admissible for the curve's parity.
pub fn default_eikonal_profiles(f: &Factorization, count: usize) -> Vec<FourierEikonal> {
    let odd_only = !f.orientable();
    let mut out = Vec::with_capacity(count);
    let mut n = 2u32;
    while out.len() < count {
        if n != 1 && (!odd_only || n % 2 == 1) {
            for p in [FourierEikonal::cosine(n), FourierEikonal::sine(n)] {
                if let (Ok(p), true) = (p, out.len() < count) {
                    out.push(p);
                }
            }
        }
        n += 1;
    }
    out
}

/// `{Γ₁, Γ₂}`, the special pair at `θ = 0` and `lifted` eikonal entropies.
pub fn standard_suite(
    f: &Factorization,
    lifted: usize,
    table_n: usize,
) -> Result<Vec<Box<dyn Flux>>> {
    let curve = f.curve().clone();
    let mut out: Vec<Box<dyn Flux>> = alloc::vec![
        Box::new(GammaRow {
            curve: curve.clone(),
            row: 0
        }),
        Box::new(GammaRow { curve, row: 1 }),
    ];
    let sp = special_pair(f, f.domain().start(), 0.4, table_n)?;
    out.push(Box::new(sp.phi));
    out.push(Box::new(sp.phi_bar));
    for p in default_eikonal_profiles(f, lifted) {
        out.push(Box::new(lift_eikonal_entropy(f, p, table_n)?));
    }
    Ok(out)
}

/// Tolerance on `Ψ̂(endpoint) ∈ {±ξ}`.
pub const ENDPOINT_TOL: f64 = 1e-8;

/// Arcs between ordered pairs of distinct preimages of `{±ξ}`.
pub fn branch_pair_arcs(f: &Factorization, xi: [f64; 2]) -> Result<Vec<(f64, f64)>> {
    let pre = f.psi_preimages(xi)?;
    let mut out = Vec::new();
    for (i, a) in pre.iter().enumerate() {
        for (j, b) in pre.iter().enumerate() {
            if i == j || (!f.domain().is_closed() && b.t <= a.t) {
                continue;
            }
            out.push((a.t, b.t));
        }
    }
    Ok(out)
}

/// Weak residual of `ξ · 1_{m ∈ A}` with arc endpoints in `Ψ̂⁻¹({±ξ})`.
pub fn kinetic_residual(
    field: &DirectionField,
    f: &Factorization,
    xi: [f64; 2],
    arc: (f64, f64),
    bank: &TestBank,
) -> Result<ResidualReport> {
    let r = xi[0].hypot(xi[1]);
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid("xi must be a nonzero direction"));
    }
    let xi = [xi[0] / r, xi[1] / r];
    let domain = f.domain();
    if field.domain != domain {
        return Err(Error::DomainMismatch(String::from(
            "field and factorization parameter domains differ",
        )));
    }
    if !domain.is_closed() && !(arc.1 > arc.0) {
        return Err(invalid("arc must satisfy a < b"));
    }
    let a = domain.canonical(arc.0)?;
    let b = domain.canonical(arc.1)?;
    let deviation = sign_match(f.psi_hat(a), xi)
        .1
        .max(sign_match(f.psi_hat(b), xi).1);
    if deviation > ENDPOINT_TOL {
        return Err(Error::EndpointMismatch { deviation });
    }
    weak_divergence_residual(
        field,
        &IndicatorFlux {
            xi,
            arc: (a, b),
            domain,
        },
        bank,
    )
}

/// Norm of one shift `D^h m` over `U`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShiftNorm {
    /// Shift in cells.
    pub cells: [i64; 2],
    pub length: f64,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BesovReport {
    pub p: f64,
    pub s: f64,
    pub shifts: Vec<ShiftNorm>,
    /// `max |h|^{-s} ‖D^h m‖_{L^p(U)}`.
    pub seminorm: f64,
    /// Fit of `log ‖D^h m‖` against `log |h|` over the three smallest fitted shift sizes.
    pub fit: Option<LineFit>,
    pub masked_cells: usize,
}

const SHIFT_DIRECTIONS: [[i64; 2]; 4] = [[1, 0], [0, 1], [1, 1], [1, -1]];

/// Smallest shift (in cells per axis) entering the slope fit. Shorter shifts
/// lose the pairs that straddle a masked block, which biases the slope upward.
pub const MIN_FIT_SHIFT_CELLS: i64 = 4;

/// Dyadic-shift Besov estimator on the inner subdomain `U` of the grid.
pub fn besov_seminorm(field: &DirectionField, p: f64, s: f64) -> Result<BesovReport> {
    if !(p >= 1.0 && p.is_finite()) || !(s >= 0.0) {
        return Err(invalid("besov needs p >= 1 and s >= 0"));
    }
    let g = &field.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let max_len = g.inner_margin.min(1.0);
    if max_len < 2.0 * hx.hypot(hy) {
        return Err(Error::MarginTooSmall {
            radius: 2.0 * hx.hypot(hy),
            margin: g.inner_margin,
        });
    }
    let cells = g.inner_cells();
    let ms: Vec<[f64; 2]> = (0..g.len()).map(|k| field.m(k)).collect();
    let area = g.cell_area();
    let mut shifts = Vec::new();
    let mut k = 2i64;
    loop {
        let mut any = false;
        for d in SHIFT_DIRECTIONS {
            let c = [d[0] * k, d[1] * k];
            let length = (c[0] as f64 * hx).hypot(c[1] as f64 * hy);
            if length > max_len {
                continue;
            }
            any = true;
            let mut acc = 0.0;
            for &x in &cells {
                let (i, j) = g.cell_of(x);
                let (ii, jj) = (i as i64 + c[0], j as i64 + c[1]);
                if ii < 0 || jj < 0 || ii >= g.nx as i64 || jj >= g.ny as i64 {
                    continue;
                }
                let y = g.index(ii as usize, jj as usize);
                if field.mask[x] || field.mask[y] {
                    continue;
                }
                let dm = (ms[y][0] - ms[x][0]).hypot(ms[y][1] - ms[x][1]);
                acc += dm.powf(p) * area;
            }
            shifts.push(ShiftNorm {
                cells: c,
                length,
                norm: acc.powf(1.0 / p),
            });
        }
        if !any {
            break;
        }
        k *= 2;
    }
    let seminorm = shifts
        .iter()
        .map(|sh| sh.norm / sh.length.powf(s))
        .fold(0.0, f64::max);
    let fit = {
        let size = |sh: &ShiftNorm| sh.cells[0].abs().max(sh.cells[1].abs());
        let pts: Vec<&ShiftNorm> = shifts
            .iter()
            .filter(|sh| {
                (MIN_FIT_SHIFT_CELLS..=4 * MIN_FIT_SHIFT_CELLS).contains(&size(sh)) && sh.norm > 0.0
            })
            .collect();
        let xs: Vec<f64> = pts.iter().map(|sh| sh.length.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|sh| sh.norm.ln()).collect();
        fit_line(&xs, &ys)
    };
    Ok(BesovReport {
        p,
        s,
        shifts,
        seminorm,
        fit,
        masked_cells: field.masked_count(),
    })
}

/// Exponents of the commutator experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CommutatorParams {
    pub s: f64,
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl CommutatorParams {
    /// `s·min(p, 2α+β) - β`.
    pub fn predicted_slope(&self) -> f64 {
        self.s * self.p.min(2.0 * self.alpha + self.beta) - self.beta
    }
}

/// Per-rung measurements of the commutator experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CommutatorRung {
    pub epsilon: f64,
    /// `‖(1-|m_ε|²)^α |Dm_ε|^β‖_{L¹(U)}`.
    pub r2_bound: f64,
    /// `‖Dm_ε (Γ̂_j(m)_ε - Γ̂_j(m_ε))‖_{L^{p/3}(U)}` for `j = 1, 2`.
    pub commutator: [f64; 2],
    /// `max_φ |⟨im·f_j, φ⟩| / ‖φ‖_{L¹}` for `j = 1, 2`.
    pub proxy: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CommutatorReport {
    pub params: CommutatorParams,
    pub predicted_slope: f64,
    /// Rungs by decreasing `ε`.
    pub rungs: Vec<CommutatorRung>,
    /// Fits over the three smallest rungs.
    pub r2_fit: Option<LineFit>,
    pub commutator_fit: [Option<LineFit>; 2],
    /// Proxies at the smallest `ε`.
    pub finest_proxy: [f64; 2],
    pub masked_cells: usize,
}

/// Minimum ladder length.
pub const MIN_RUNGS: usize = 5;

/// Flat radial extension `Γ̂_j(v) = η(|v|) Γ_j(v/|v|)`.
pub fn flat_extension(curve: &CurveSpec, v: [f64; 2]) -> [[f64; 2]; 2] {
    let r = v[0].hypot(v[1]);
    let eta = MollifierSpec::eta(r);
    if eta == 0.0 {
        return [[0.0; 2]; 2];
    }
    let mut t = v[1].atan2(v[0]);
    if let Domain::Arc { a, b } = curve.domain() {
        let t2 = t.rem_euclid(TAU);
        t = if (a..=b).contains(&t2) {
            t2
        } else {
            t.clamp(a, b)
        };
    } else {
        t = t.rem_euclid(TAU);
    }
    let rows = gamma_rows(curve, t);
    [
        [eta * rows[0][0], eta * rows[0][1]],
        [eta * rows[1][0], eta * rows[1][1]],
    ]
}

/// Mollification ladder for the commutator `Dm_ε(Γ̂_j(m)_ε - Γ̂_j(m_ε))` and the
/// `R²` bound `(1-|m_ε|²)^α |Dm_ε|^β`.
pub fn commutator_experiment(
    field: &DirectionField,
    curve: &CurveSpec,
    ladder: &[f64],
    params: CommutatorParams,
) -> Result<CommutatorReport> {
    if ladder.len() < MIN_RUNGS {
        return Err(invalid("commutator ladder needs at least five rungs"));
    }
    if field.domain != curve.domain() {
        return Err(Error::DomainMismatch(String::from(
            "field and curve parameter domains differ",
        )));
    }
    if !(params.p >= 3.0) {
        return Err(invalid("commutator norm needs p >= 3"));
    }
    let mut eps: Vec<f64> = ladder.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    if eps.len() < MIN_RUNGS {
        return Err(invalid(
            "commutator ladder needs at least five distinct rungs",
        ));
    }
    let g = &field.grid;
    let area = g.cell_area();
    let bank = TestBank::inner(g);
    let q = params.p / 3.0;
    let mut rungs = Vec::with_capacity(eps.len());
    for &e in &eps {
        let spec = MollifierSpec::new(e)?;
        let m = mollify_map(field, spec, |t| {
            let (s, c) = t.sin_cos();
            [c, s]
        })?;
        let g1 = mollify_map(field, spec, |t| gamma_rows(curve, t)[0])?;
        let g2 = mollify_map(field, spec, |t| gamma_rows(curve, t)[1])?;
        let mut r2 = 0.0;
        let mut comm = [0.0; 2];
        // im·f_j per cell of U.
        let mut imf: Vec<[f64; 2]> = Vec::with_capacity(m.cells.len());
        for (c, &cell) in m.cells.iter().enumerate() {
            if field.mask[cell] {
                imf.push([0.0; 2]);
                continue;
            }
            let v = m.values[c];
            let d = m.gradients[c];
            let q2 = v[0] * v[0] + v[1] * v[1];
            let dnorm =
                (d[0][0] * d[0][0] + d[0][1] * d[0][1] + d[1][0] * d[1][0] + d[1][1] * d[1][1])
                    .sqrt();
            r2 += (1.0 - q2).abs().powf(params.alpha) * dnorm.powf(params.beta) * area;
            let ext = flat_extension(curve, v);
            let im = {
                let u = field.m(cell);
                [-u[1], u[0]]
            };
            let mut row = [0.0; 2];
            for (j, gm) in [g1.values[c], g2.values[c]].iter().enumerate() {
                let w = [gm[0] - ext[j][0], gm[1] - ext[j][1]];
                let fj = [
                    d[0][0] * w[0] + d[0][1] * w[1],
                    d[1][0] * w[0] + d[1][1] * w[1],
                ];
                comm[j] += fj[0].hypot(fj[1]).powf(q) * area;
                row[j] = im[0] * fj[0] + im[1] * fj[1];
            }
            imf.push(row);
        }
        let mut proxy = [0.0f64; 2];
        for b in &bank.bumps {
            let (mut acc, mut mass) = ([0.0; 2], 0.0);
            for (c, &cell) in m.cells.iter().enumerate() {
                let (i, j) = g.cell_of(cell);
                let phi = b.value(g.centre(i, j));
                if phi == 0.0 {
                    continue;
                }
                mass += phi * area;
                acc[0] += imf[c][0] * phi * area;
                acc[1] += imf[c][1] * phi * area;
            }
            if mass > 0.0 {
                proxy[0] = proxy[0].max(acc[0].abs() / mass);
                proxy[1] = proxy[1].max(acc[1].abs() / mass);
            }
        }
        rungs.push(CommutatorRung {
            epsilon: e,
            r2_bound: r2,
            commutator: [comm[0].powf(1.0 / q), comm[1].powf(1.0 / q)],
            proxy,
        });
    }
    let tail = &rungs[rungs.len() - 3..];
    let fit = |val: &dyn Fn(&CommutatorRung) -> f64| {
        let pts: Vec<(f64, f64)> = tail
            .iter()
            .filter(|r| val(r) > 0.0)
            .map(|r| (r.epsilon.ln(), val(r).ln()))
            .collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        fit_line(&xs, &ys)
    };
    let r2_fit = fit(&|r| r.r2_bound);
    let commutator_fit = [fit(&|r| r.commutator[0]), fit(&|r| r.commutator[1])];
    let finest_proxy = rungs[rungs.len() - 1].proxy;
    Ok(CommutatorReport {
        params,
        predicted_slope: params.predicted_slope(),
        rungs,
        r2_fit,
        commutator_fit,
        finest_proxy,
        masked_cells: field.masked_count(),
    })
}

/// Plaquette (of four cell centres) with nonzero winding of `Ψ(m)`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SingularPlaquette {
    pub i: usize,
    pub j: usize,
    pub centre: [f64; 2],
    /// Turns of the direction `Ψ̂(m)` around the plaquette (half-integers allowed).
    pub index: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LipschitzProfile {
    /// `max |m(x₁) - m(x₂)| · d / |x₁ - x₂|` with `d` the distance of the pair to `∂Ω ∪ S`.
    pub constant: f64,
    pub pairs: usize,
    pub exclusion_radius: f64,
}

/// Cluster of singular plaquettes within [`SITE_REACH`] of each other. Unoriented defects can split
/// their index over neighbouring plaquettes when the core is under-resolved.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SingularSite {
    pub members: Vec<usize>,
    pub centre: [f64; 2],
    pub index: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SingularityReport {
    pub plaquettes: Vec<SingularPlaquette>,
    /// Indices into `plaquettes`, grouped by proximity.
    pub sites: Vec<SingularSite>,
    pub total_index: f64,
    pub lipschitz: LipschitzProfile,
}

/// Plaquette distance (per axis) joining singular plaquettes into one site.
pub const SITE_REACH: usize = 2;

fn cluster(plaquettes: &[SingularPlaquette]) -> Vec<SingularSite> {
    let mut site_of = alloc::vec![usize::MAX; plaquettes.len()];
    let mut sites: Vec<SingularSite> = Vec::new();
    for start in 0..plaquettes.len() {
        if site_of[start] != usize::MAX {
            continue;
        }
        let id = sites.len();
        site_of[start] = id;
        let mut stack = alloc::vec![start];
        let mut members = Vec::new();
        while let Some(a) = stack.pop() {
            members.push(a);
            for b in 0..plaquettes.len() {
                let (pa, pb) = (&plaquettes[a], &plaquettes[b]);
                if site_of[b] == usize::MAX
                    && pa.i.abs_diff(pb.i) <= SITE_REACH
                    && pa.j.abs_diff(pb.j) <= SITE_REACH
                {
                    site_of[b] = id;
                    stack.push(b);
                }
            }
        }
        members.sort_unstable();
        let index = members.iter().map(|&m| plaquettes[m].index).sum();
        let w = members.len() as f64;
        let centre = [
            members
                .iter()
                .map(|&m| plaquettes[m].centre[0])
                .sum::<f64>()
                / w,
            members
                .iter()
                .map(|&m| plaquettes[m].centre[1])
                .sum::<f64>()
                / w,
        ];
        sites.push(SingularSite {
            members,
            centre,
            index,
        });
    }
    sites
}

/// Pairs sampled for the Lipschitz profile.
pub const LIPSCHITZ_SAMPLES: usize = 4096;
/// Maximal cell offset between the two points of a sampled pair.
pub const LIPSCHITZ_REACH: i64 = 8;

fn direction_phases(field: &DirectionField, f: &Factorization) -> Vec<f64> {
    field.theta.iter().map(|&t| f.phi_psi(t)).collect()
}

fn phase_step(f: &Factorization, d: f64) -> f64 {
    if f.orientable() {
        wrap_pi(d)
    } else {
        0.5 * wrap_pi(2.0 * d)
    }
}

/// Turns of `Ψ̂(m)` along the boundary of the cell-centre rectangle `[i0, i1] × [j0, j1]`.
pub fn loop_index(
    field: &DirectionField,
    f: &Factorization,
    i0: usize,
    j0: usize,
    i1: usize,
    j1: usize,
) -> Result<f64> {
    let g = &field.grid;
    if !(i0 < i1 && j0 < j1 && i1 < g.nx && j1 < g.ny) {
        return Err(invalid(
            "loop corners must satisfy i0 < i1 < nx and j0 < j1 < ny",
        ));
    }
    let mut path = Vec::new();
    path.extend((i0..i1).map(|i| (i, j0)));
    path.extend((j0..j1).map(|j| (i1, j)));
    path.extend((i0 + 1..=i1).rev().map(|i| (i, j1)));
    path.extend((j0 + 1..=j1).rev().map(|j| (i0, j)));
    let ph: Vec<f64> = path
        .iter()
        .map(|&(i, j)| f.phi_psi(field.theta[g.index(i, j)]))
        .collect();
    let total: f64 = (0..ph.len())
        .map(|k| phase_step(f, ph[(k + 1) % ph.len()] - ph[k]))
        .sum();
    Ok((2.0 * total / TAU).round() / 2.0)
}

/// Per-plaquette winding of `Ψ(m)` and a sampled Lipschitz profile away from it.
pub fn detect_singularities(
    field: &DirectionField,
    f: &Factorization,
    seed: u64,
) -> Result<SingularityReport> {
    if field.domain != f.domain() {
        return Err(Error::DomainMismatch(String::from(
            "field and factorization parameter domains differ",
        )));
    }
    let g = &field.grid;
    let ph = direction_phases(field, f);
    let mut plaquettes = Vec::new();
    for j in 0..g.ny - 1 {
        for i in 0..g.nx - 1 {
            let ring = [
                g.index(i, j),
                g.index(i + 1, j),
                g.index(i + 1, j + 1),
                g.index(i, j + 1),
            ];
            let total: f64 = (0..4)
                .map(|k| phase_step(f, ph[ring[(k + 1) % 4]] - ph[ring[k]]))
                .sum();
            let index = (2.0 * total / TAU).round() / 2.0;
            if index != 0.0 {
                let c = g.centre(i, j);
                plaquettes.push(SingularPlaquette {
                    i,
                    j,
                    centre: [c[0] + 0.5 * g.hx(), c[1] + 0.5 * g.hy()],
                    index,
                });
            }
        }
    }
    let total_index = plaquettes.iter().map(|p| p.index).sum();
    let sites = cluster(&plaquettes);
    let h = g.hx().max(g.hy());
    let exclusion = 4.0 * h;
    let mut singular: Vec<[f64; 2]> = plaquettes.iter().map(|p| p.centre).collect();
    for k in 0..g.len() {
        if field.mask[k] {
            let (i, j) = g.cell_of(k);
            singular.push(g.centre(i, j));
        }
    }
    let dist_s = |x: [f64; 2]| {
        singular
            .iter()
            .map(|s| (x[0] - s[0]).hypot(x[1] - s[1]))
            .fold(f64::INFINITY, f64::min)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut constant, mut pairs) = (0.0f64, 0usize);
    for _ in 0..LIPSCHITZ_SAMPLES {
        let a = rng.gen_range(0..g.len());
        let off = [
            rng.gen_range(-LIPSCHITZ_REACH..=LIPSCHITZ_REACH),
            rng.gen_range(-LIPSCHITZ_REACH..=LIPSCHITZ_REACH),
        ];
        let (i, j) = g.cell_of(a);
        let (ii, jj) = (i as i64 + off[0], j as i64 + off[1]);
        if off == [0, 0] || ii < 0 || jj < 0 || ii >= g.nx as i64 || jj >= g.ny as i64 {
            continue;
        }
        let b = g.index(ii as usize, jj as usize);
        if field.mask[a] || field.mask[b] {
            continue;
        }
        let (xa, xb) = (g.centre(i, j), g.centre(ii as usize, jj as usize));
        let ds = dist_s(xa).min(dist_s(xb));
        if ds <= exclusion {
            continue;
        }
        let d = ds.min(g.boundary_distance(xa)).min(g.boundary_distance(xb));
        let (ma, mb) = (field.m(a), field.m(b));
        let dm = (ma[0] - mb[0]).hypot(ma[1] - mb[1]);
        let dx = (xa[0] - xb[0]).hypot(xa[1] - xb[1]);
        constant = constant.max(dm * d / dx);
        pairs += 1;
    }
    Ok(SingularityReport {
        plaquettes,
        sites,
        total_index,
        lipschitz: LipschitzProfile {
            constant,
            pairs,
            exclusion_radius: exclusion,
        },
    })
}

/// Outcome of the constant-or-single-component test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Membership {
    /// Constant field; `elliptic` tells whether its value is elliptic.
    Constant { elliptic: bool },
    /// All values in the nowhere-elliptic component with this index.
    SingleComponent(usize),
    /// Nonconstant with elliptic values or spread over several components.
    Violation,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MembershipReport {
    /// Nowhere-elliptic parameter intervals and cell counts.
    pub components: Vec<((f64, f64), usize)>,
    pub elliptic_cells: usize,
    pub verdict: Membership,
}

fn in_interval(domain: Domain, t: f64, iv: (f64, f64)) -> bool {
    match domain {
        Domain::ClosedLoop => (t - iv.0).rem_euclid(TAU) <= iv.1 - iv.0,
        Domain::Arc { .. } => t >= iv.0 && t <= iv.1,
    }
}

/// Complement of the elliptic intervals in the parameter domain.
pub fn nowhere_elliptic_components(domain: Domain, elliptic: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut e: Vec<(f64, f64)> = elliptic.to_vec();
    e.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (s, t) = (domain.start(), domain.end());
    if e.is_empty() {
        return alloc::vec![(s, t)];
    }
    let mut out = Vec::new();
    match domain {
        Domain::ClosedLoop => {
            if e[0].1 - e[0].0 >= TAU {
                return out;
            }
            for w in 0..e.len() {
                let end = e[w].1;
                let next = if w + 1 < e.len() {
                    e[w + 1].0
                } else {
                    e[0].0 + TAU
                };
                if next > end {
                    out.push((end, next));
                }
            }
        }
        Domain::Arc { .. } => {
            let mut cur = s;
            for iv in &e {
                if iv.0 > cur {
                    out.push((cur, iv.0));
                }
                cur = cur.max(iv.1);
            }
            if t > cur {
                out.push((cur, t));
            }
        }
    }
    out
}

/// Histogram of field values over nowhere-elliptic components and elliptic intervals.
pub fn component_membership(field: &DirectionField, cert: &Certificate) -> MembershipReport {
    let domain = field.domain;
    let elliptic = &cert.ellipticity.elliptic_components;
    let comps = nowhere_elliptic_components(domain, elliptic);
    let mut counts = alloc::vec![0usize; comps.len()];
    let mut elliptic_cells = 0;
    let mut first: Option<f64> = None;
    let mut constant = true;
    for (k, &t) in field.theta.iter().enumerate() {
        if field.mask[k] {
            continue;
        }
        match first {
            None => first = Some(t),
            Some(t0) => {
                let d = if domain.is_closed() {
                    wrap_pi(t - t0)
                } else {
                    t - t0
                };
                if d.abs() > 1e-12 {
                    constant = false;
                }
            }
        }
        if elliptic.iter().any(|&iv| in_interval(domain, t, iv)) {
            elliptic_cells += 1;
        } else if let Some(c) = comps.iter().position(|&iv| in_interval(domain, t, iv)) {
            counts[c] += 1;
        }
    }
    let verdict = if constant {
        Membership::Constant {
            elliptic: elliptic_cells > 0,
        }
    } else {
        let hit: Vec<usize> = (0..comps.len()).filter(|&c| counts[c] > 0).collect();
        if elliptic_cells == 0 && hit.len() == 1 {
            Membership::SingleComponent(hit[0])
        } else {
            Membership::Violation
        }
    };
    MembershipReport {
        components: comps.into_iter().zip(counts).collect(),
        elliptic_cells,
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::certify;
    use crate::curve::make_gamma_k;
    use crate::factorize::factorize;
    use crate::field::{synth_constant, synth_half_vortex, synth_vortex};

    fn gamma2() -> (CurveSpec, Factorization) {
        let c = make_gamma_k(2).unwrap();
        let f = factorize(&c, 256).unwrap();
        (c, f)
    }

    #[test]
    fn zero_flux_and_constant_field() {
        let (c, _) = gamma2();
        let g = Grid::square(1.0, 32, 0.25).unwrap();
        let field = synth_constant(&g, &c, 0.7).unwrap();
        let bank = TestBank::for_grid(&g);
        let zero = FnFlux {
            label: String::from("zero"),
            f: |_: f64| [0.0, 0.0],
        };
        let r = weak_divergence_residual(&field, &zero, &bank).unwrap();
        assert_eq!(r.max_normalized, 0.0);
        assert_eq!(r.residuals.len(), 27);
        // Only the midpoint quadrature error of the bank remains, third order in h.
        let r = weak_divergence_residual(
            &field,
            &GammaRow {
                curve: c.clone(),
                row: 0,
            },
            &bank,
        )
        .unwrap();
        let g2 = Grid::square(1.0, 256, 0.25).unwrap();
        let field2 = synth_constant(&g2, &c, 0.7).unwrap();
        let r2 = weak_divergence_residual(
            &field2,
            &GammaRow {
                curve: c.clone(),
                row: 0,
            },
            &bank,
        )
        .unwrap();
        assert!(
            r.max_normalized < 1e-3 && r2.max_normalized < r.max_normalized / 40.0,
            "{} {}",
            r.max_normalized,
            r2.max_normalized
        );
        let bad = TestBank {
            bumps: alloc::vec![TestBump {
                centre: [0.9, 0.0],
                radius: 0.2
            }],
        };
        assert!(matches!(
            weak_divergence_residual(&field, &zero, &bad),
            Err(Error::SupportOutsideDomain)
        ));
    }

    #[test]
    fn vortex_residual_decays() {
        let (c, f) = gamma2();
        let mut last = f64::INFINITY;
        for n in [32, 64, 128] {
            let g = Grid::square(1.0, n, 0.25).unwrap();
            let v = synth_vortex(&g, &f, [0.0, 0.0], 1).unwrap();
            let r = weak_divergence_residual(
                &v,
                &GammaRow {
                    curve: c.clone(),
                    row: 0,
                },
                &TestBank::for_grid(&g),
            )
            .unwrap();
            assert!(r.max_normalized < 0.75 * last, "n={n} {}", r.max_normalized);
            last = r.max_normalized;
        }
    }

    #[test]
    fn random_field_residual_is_large() {
        let (c, _) = gamma2();
        let g = Grid::square(1.0, 64, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(0.0..TAU)).collect();
        let field = DirectionField::from_parts(
            g,
            Domain::ClosedLoop,
            theta,
            alloc::vec![false; g.len()],
            crate::field::FieldMeta::tagged("random"),
        )
        .unwrap();
        // Smooth-in-x random profile so the field does not average out.
        let mut smooth = field.clone();
        for k in 0..g.len() {
            let (i, _) = g.cell_of(k);
            smooth.theta[k] = (i as f64 * 0.1).sin() * 2.0;
        }
        let r = weak_divergence_residual(
            &smooth,
            &GammaRow { curve: c, row: 0 },
            &TestBank::for_grid(&g),
        )
        .unwrap();
        assert!(r.max_normalized > 0.05, "{}", r.max_normalized);
    }

    #[test]
    fn singularity_indices() {
        let (_, f) = gamma2();
        let g = Grid::square(1.0, 32, 0.25).unwrap();
        let v = synth_vortex(&g, &f, [0.0, 0.0], 1).unwrap();
        let s = detect_singularities(&v, &f, 1).unwrap();
        assert_eq!(s.plaquettes.len(), 1);
        assert_eq!(s.plaquettes[0].index, 1.0);
        assert!(s.plaquettes[0].centre[0].abs() < 1e-12);
        assert!(s.lipschitz.pairs > 1000);
        assert_eq!(loop_index(&v, &f, 2, 3, 29, 27).unwrap(), 1.0);
        let vm = synth_vortex(&g, &f, [0.0, 0.0], -1).unwrap();
        assert_eq!(detect_singularities(&vm, &f, 1).unwrap().total_index, 1.0);
        let f1 = factorize(&make_gamma_k(1).unwrap(), 256).unwrap();
        let h = synth_half_vortex(&g, &f1, [0.0, 0.0]).unwrap();
        let s = detect_singularities(&h, &f1, 1).unwrap();
        assert_eq!(s.sites.len(), 1);
        assert_eq!(s.sites[0].index, 1.0);
        assert!(s
            .plaquettes
            .iter()
            .all(|p| p.index.fract() != 0.0 || p.index == 1.0));
    }

    #[test]
    fn membership_of_constant_and_two_component_fields() {
        let c = make_gamma_k(2).unwrap();
        let cert = certify(&c, 256).unwrap();
        let g = Grid::square(1.0, 16, 0.1).unwrap();
        let field = synth_constant(&g, &c, 1.0).unwrap();
        assert_eq!(
            component_membership(&field, &cert).verdict,
            Membership::Constant { elliptic: false }
        );
        let mut cert2 = cert.clone();
        cert2.ellipticity.elliptic_components = alloc::vec![(1.0, 2.0), (4.0, 4.5)];
        let mut two = field.clone();
        for k in 0..g.len() {
            two.theta[k] = if k % 2 == 0 { 3.0 } else { 5.0 };
        }
        let r = component_membership(&two, &cert2);
        assert_eq!(r.verdict, Membership::Violation);
        assert_eq!(r.components.len(), 2);
        assert_eq!(
            component_membership(&field, &cert2).verdict,
            Membership::Constant { elliptic: true }
        );
        for k in 0..g.len() {
            two.theta[k] = if k % 2 == 0 { 2.5 } else { 3.5 };
        }
        assert_eq!(
            component_membership(&two, &cert2).verdict,
            Membership::SingleComponent(0)
        );
    }

    #[test]
    fn besov_of_constant_is_zero() {
        let (c, _) = gamma2();
        let g = Grid::square(1.0, 64, 0.25).unwrap();
        let r = besov_seminorm(&synth_constant(&g, &c, 0.2).unwrap(), 4.0, 1.0 / 3.0).unwrap();
        assert_eq!(r.seminorm, 0.0);
        assert!(r.shifts.len() >= 8);
    }

    #[test]
    fn commutator_of_constant_is_zero() {
        let (c, _) = gamma2();
        let g = Grid::square(1.0, 64, 0.25).unwrap();
        let field = synth_constant(&g, &c, 0.2).unwrap();
        let params = CommutatorParams {
            s: 1.0 / 3.0,
            p: 4.0,
            alpha: 2.0,
            beta: 1.0,
        };
        assert!((params.predicted_slope() - 1.0 / 3.0).abs() < 1e-15);
        let r = commutator_experiment(&field, &c, &[0.2, 0.15, 0.1, 0.08, 0.07], params).unwrap();
        for rung in &r.rungs {
            assert_eq!(rung.r2_bound, 0.0);
            assert_eq!(rung.commutator, [0.0, 0.0]);
            assert_eq!(rung.proxy, [0.0, 0.0]);
        }
        assert!(commutator_experiment(&field, &c, &[0.2, 0.1], params).is_err());
    }
}
