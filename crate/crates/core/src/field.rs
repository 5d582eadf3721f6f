//! Gridded direction fields `m = e^{iθ}`: exact solutions (constants, vortices,
//! simple waves), potentials with `Du = γ(θ)`, and mollification.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use crate::numerics::RemEuclid;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::curve::{CurveSpec, Domain};
use crate::error::{invalid, Error, Result};
use crate::factorize::{Factorization, RankOneFactors};
use crate::numerics::{bump_raw, bump_raw_deriv, smoothstep5, BUMP_INTEGRAL_2D, TAU};

/// Smallest admissible cell count per axis.
pub const MIN_CELLS: usize = 16;

/// Cell-centred grid on a rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    /// `[x0, x1, y0, y1]`.
    pub bounds: [f64; 4],
    pub nx: usize,
    pub ny: usize,
    /// Width of the boundary strip excluded from the inner subdomain `U`.
    pub inner_margin: f64,
}

impl Grid {
    pub fn new(bounds: [f64; 4], nx: usize, ny: usize, inner_margin: f64) -> Result<Self> {
        let [x0, x1, y0, y1] = bounds;
        if !(x1 > x0 && y1 > y0) || bounds.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid bounds must satisfy x0 < x1 and y0 < y1"));
        }
        if nx.min(ny) < MIN_CELLS {
            return Err(Error::GridTooCoarse {
                n: nx.min(ny),
                min: MIN_CELLS,
            });
        }
        let half = 0.5 * (x1 - x0).min(y1 - y0);
        if !(inner_margin >= 0.0 && inner_margin < half) {
            return Err(invalid(
                "inner margin must lie in [0, half the shorter side)",
            ));
        }
        Ok(Grid {
            bounds,
            nx,
            ny,
            inner_margin,
        })
    }

    /// `[-half, half]²` with `n × n` cells.
    pub fn square(half: f64, n: usize, inner_margin: f64) -> Result<Self> {
        Grid::new([-half, half, -half, half], n, n, inner_margin)
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        (self.bounds[1] - self.bounds[0]) / self.nx as f64
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        (self.bounds[3] - self.bounds[2]) / self.ny as f64
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index of cell `(i, j)` (column `i`, row `j`).
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn cell_of(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn centre(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.bounds[0] + (i as f64 + 0.5) * self.hx(),
            self.bounds[2] + (j as f64 + 0.5) * self.hy(),
        ]
    }

    /// Distance from `p` to the boundary of the rectangle (negative outside).
    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        let [x0, x1, y0, y1] = self.bounds;
        (p[0] - x0).min(x1 - p[0]).min(p[1] - y0).min(y1 - p[1])
    }

    /// Cells whose centres keep distance `≥ margin` from the boundary.
    pub fn cells_within(&self, margin: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| {
                let (i, j) = self.cell_of(k);
                self.boundary_distance(self.centre(i, j)) >= margin
            })
            .collect()
    }

    /// Cells of the inner subdomain `U`.
    pub fn inner_cells(&self) -> Vec<usize> {
        self.cells_within(self.inner_margin)
    }

    /// Same grid shifted by `d`.
    pub fn translated(&self, d: [f64; 2]) -> Grid {
        let b = self.bounds;
        Grid {
            bounds: [b[0] + d[0], b[1] + d[0], b[2] + d[1], b[3] + d[1]],
            ..*self
        }
    }
}

/// Synthesis tag and parameters.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FieldMeta {
    pub tag: String,
    pub x0: Option<[f64; 2]>,
    pub tau: Option<i8>,
    pub zeta: Option<[f64; 2]>,
}

impl FieldMeta {
    pub fn tagged(tag: &str) -> Self {
        FieldMeta {
            tag: String::from(tag),
            x0: None,
            tau: None,
            zeta: None,
        }
    }
}

/// Curve parameters `θ` per cell, so that `m = e^{iθ}`; masked cells hold a
/// placeholder and are skipped by every estimator.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DirectionField {
    pub grid: Grid,
    pub domain: Domain,
    pub theta: Vec<f64>,
    pub mask: Vec<bool>,
    pub meta: FieldMeta,
}

/// Arc-domain values may sit this far outside `[a, b]`.
pub const ARC_SLACK: f64 = 1e-10;

impl DirectionField {
    /// Validated constructor, used by readers of field dumps.
    pub fn from_parts(
        grid: Grid,
        domain: Domain,
        theta: Vec<f64>,
        mask: Vec<bool>,
        meta: FieldMeta,
    ) -> Result<Self> {
        if theta.len() != grid.len() || mask.len() != grid.len() {
            return Err(invalid("theta and mask must have nx*ny entries"));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(invalid("theta values must be finite"));
        }
        if let Domain::Arc { a, b } = domain {
            let outside = theta
                .iter()
                .zip(&mask)
                .find(|(&t, &m)| !m && (t < a - ARC_SLACK || t > b + ARC_SLACK));
            if let Some((&t, _)) = outside {
                return Err(Error::OutsideDomain { t, a, b });
            }
        }
        Ok(DirectionField {
            grid,
            domain,
            theta,
            mask,
            meta,
        })
    }

    /// `m = (cos θ, sin θ)` at cell index `k`.
    #[inline]
    pub fn m(&self, k: usize) -> [f64; 2] {
        let (s, c) = self.theta[k].sin_cos();
        [c, s]
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn masked_measure(&self) -> f64 {
        self.masked_count() as f64 * self.grid.cell_area()
    }

    /// Adds `amplitude · noise[k]` to every θ (detector checks).
    pub fn perturbed(&self, amplitude: f64, noise: &[f64]) -> DirectionField {
        let mut out = self.clone();
        for (t, n) in out.theta.iter_mut().zip(noise) {
            *t += amplitude * n;
        }
        out.meta.tag = alloc::format!("{}+noise({amplitude:e})", self.meta.tag);
        out
    }
}

/// Constant field `θ ≡ θ₀`.
pub fn synth_constant(grid: &Grid, curve: &CurveSpec, theta0: f64) -> Result<DirectionField> {
    let t = curve.domain().canonical(theta0)?;
    let meta = FieldMeta::tagged("constant");
    Ok(DirectionField {
        grid: *grid,
        domain: curve.domain(),
        theta: alloc::vec![t; grid.len()],
        mask: alloc::vec![false; grid.len()],
        meta,
    })
}

fn require_inside(grid: &Grid, x0: [f64; 2]) -> Result<()> {
    if grid.boundary_distance(x0) > 0.0 {
        Ok(())
    } else {
        Err(invalid("x0 must lie strictly inside the grid rectangle"))
    }
}

/// Cells whose closed square contains `x0` are masked.
fn singular_mask(grid: &Grid, x0: [f64; 2]) -> Vec<bool> {
    let (hx, hy) = (grid.hx(), grid.hy());
    (0..grid.len())
        .map(|k| {
            let (i, j) = grid.cell_of(k);
            let c = grid.centre(i, j);
            (c[0] - x0[0]).abs() <= 0.5 * hx * (1.0 + 1e-12)
                && (c[1] - x0[1]).abs() <= 0.5 * hy * (1.0 + 1e-12)
        })
        .collect()
}

fn radial_synth<F: FnMut([f64; 2]) -> Result<f64>>(
    grid: &Grid,
    x0: [f64; 2],
    mut invert: F,
) -> Result<Vec<f64>> {
    let mut theta = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let (i, j) = grid.cell_of(k);
        let c = grid.centre(i, j);
        let d = [c[0] - x0[0], c[1] - x0[1]];
        let r = d[0].hypot(d[1]);
        // Placeholder direction at the singular point itself.
        let v = if r > 0.0 {
            [d[0] / r, d[1] / r]
        } else {
            [1.0, 0.0]
        };
        theta.push(invert(v)?);
    }
    Ok(theta)
}

/// Oriented vortex `Ψ̂(m(x)) = τ (x - x₀)/|x - x₀|`, for `|k_int| = 2`.
pub fn synth_vortex(
    grid: &Grid,
    f: &Factorization,
    x0: [f64; 2],
    tau: i8,
) -> Result<DirectionField> {
    if !f.domain().is_closed() {
        return Err(Error::ArcDomain);
    }
    if f.k_int().map(|k| k.abs()) != Some(2) {
        return Err(Error::WindingMismatch {
            required: 2,
            actual: f.k_int(),
        });
    }
    if tau != 1 && tau != -1 {
        return Err(invalid("tau must be +1 or -1"));
    }
    require_inside(grid, x0)?;
    let s = tau as f64;
    let theta = radial_synth(grid, x0, |v| f.psi_inverse_oriented([s * v[0], s * v[1]]))?;
    let meta = FieldMeta {
        tag: String::from("vortex"),
        x0: Some(x0),
        tau: Some(tau),
        zeta: None,
    };
    Ok(DirectionField {
        grid: *grid,
        domain: f.domain(),
        theta,
        mask: singular_mask(grid, x0),
        meta,
    })
}

/// Unoriented vortex `Ψ(m(x)) = {±(x - x₀)/|x - x₀|}`, for `|k_int| = 1`.
pub fn synth_half_vortex(grid: &Grid, f: &Factorization, x0: [f64; 2]) -> Result<DirectionField> {
    if !f.domain().is_closed() {
        return Err(Error::ArcDomain);
    }
    if f.k_int().map(|k| k.abs()) != Some(1) {
        return Err(Error::WindingMismatch {
            required: 1,
            actual: f.k_int(),
        });
    }
    require_inside(grid, x0)?;
    let theta = radial_synth(grid, x0, |v| f.psi_inverse(v, 0))?;
    let meta = FieldMeta {
        tag: String::from("half_vortex"),
        x0: Some(x0),
        tau: None,
        zeta: None,
    };
    Ok(DirectionField {
        grid: *grid,
        domain: f.domain(),
        theta,
        mask: singular_mask(grid, x0),
        meta,
    })
}

/// Samples of the line family used to count roots per cell.
pub const WAVE_SAMPLES: usize = 512;

/// Simple wave: `θ(x) = profile(t)` where `t` solves
/// `x · iΨ̂(profile(t)) = offset(t)` on `t_range`.
pub fn synth_simple_wave<P, G>(
    grid: &Grid,
    f: &Factorization,
    t_range: (f64, f64),
    profile: P,
    offset: G,
) -> Result<DirectionField>
where
    P: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let (t0, t1) = t_range;
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(invalid("t_range must satisfy t0 < t1"));
    }
    let domain = f.domain();
    let normal = |t: f64| {
        let p = f.psi_hat(profile(t));
        [-p[1], p[0]]
    };
    let ts: Vec<f64> = (0..=WAVE_SAMPLES)
        .map(|k| t0 + (t1 - t0) * k as f64 / WAVE_SAMPLES as f64)
        .collect();
    let mut prev = f64::NAN;
    for &t in &ts {
        let th = profile(t);
        if !th.is_finite() {
            return Err(invalid("profile must be finite"));
        }
        if !domain.is_closed() {
            domain.canonical(th)?;
        }
        if prev.is_finite() && th < prev {
            return Err(invalid("profile must be nondecreasing"));
        }
        prev = th;
    }
    let normals: Vec<[f64; 2]> = ts.iter().map(|&t| normal(t)).collect();
    let offsets: Vec<f64> = ts.iter().map(|&t| offset(t)).collect();
    let mut theta = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let (i, j) = grid.cell_of(k);
        let x = grid.centre(i, j);
        let fx = |n: [f64; 2], g: f64| x[0] * n[0] + x[1] * n[1] - g;
        let vals: Vec<f64> = normals
            .iter()
            .zip(&offsets)
            .map(|(&n, &g)| fx(n, g))
            .collect();
        let mut bracket = None;
        let mut roots = 0usize;
        for s in 0..WAVE_SAMPLES {
            let (a, b) = (vals[s], vals[s + 1]);
            let hit = if a == 0.0 {
                true
            } else {
                a * b < 0.0 || (b == 0.0 && s + 1 == WAVE_SAMPLES)
            };
            if hit {
                roots += 1;
                if bracket.is_none() {
                    bracket = Some(s);
                }
            }
        }
        let s = match (roots, bracket) {
            (1, Some(s)) => s,
            (0, _) => return Err(Error::Uncovered { i, j }),
            _ => return Err(Error::CharacteristicsCross { i, j }),
        };
        let g = |t: f64| fx(normal(t), offset(t));
        let t = illinois(g, ts[s], ts[s + 1], vals[s], vals[s + 1]);
        let mut th = profile(t);
        if domain.is_closed() {
            th = th.rem_euclid(TAU);
        } else {
            th = domain.canonical(th.clamp(domain.start(), domain.end()))?;
        }
        theta.push(th);
    }
    let meta = FieldMeta::tagged("simple_wave");
    Ok(DirectionField {
        grid: *grid,
        domain,
        theta,
        mask: alloc::vec![false; grid.len()],
        meta,
    })
}

/// Centred fan: every characteristic passes through `centre` (outside `Ω`),
/// `θ` ranging over `theta_range`.
pub fn synth_fan(
    grid: &Grid,
    f: &Factorization,
    centre: [f64; 2],
    theta_range: (f64, f64),
) -> Result<DirectionField> {
    if grid.boundary_distance(centre) >= 0.0 {
        return Err(invalid(
            "fan centre must lie outside the closed grid rectangle",
        ));
    }
    let mut field = synth_simple_wave(
        grid,
        f,
        theta_range,
        |t| t,
        |t| {
            let p = f.psi_hat(t);
            centre[0] * -p[1] + centre[1] * p[0]
        },
    )?;
    field.meta = FieldMeta {
        tag: String::from("fan"),
        x0: Some(centre),
        tau: None,
        zeta: None,
    };
    Ok(field)
}

/// Bracketed root of `g` on `[a, b]` (regula falsi, Illinois variant) to `|b - a| ≤ 1e-13`.
fn illinois<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        let fc = g(c);
        if fc == 0.0 {
            return c;
        }
        if fc * fb < 0.0 {
            a = b;
            fa = fb;
            b = c;
            fb = fc;
            side = 0;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (a + b)
}

/// Potential `u` with `Du ≈ γ(θ)`, and the per-plaquette loop defect.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PotentialField {
    pub grid: Grid,
    /// Per cell; `None` for masked or unreachable cells.
    pub u: Vec<Option<[f64; 2]>>,
    /// Per plaquette of four neighbouring cell centres, `(nx-1) × (ny-1)` row-major;
    /// `None` when a corner cell is masked.
    pub curl_residual: Vec<Option<f64>>,
    pub root: usize,
}

impl PotentialField {
    /// Centre of plaquette `(i, j)`.
    pub fn plaquette_centre(&self, i: usize, j: usize) -> [f64; 2] {
        let c = self.grid.centre(i, j);
        [c[0] + 0.5 * self.grid.hx(), c[1] + 0.5 * self.grid.hy()]
    }

    /// Largest defect over plaquettes whose centre is farther than `radius` from `x0`.
    pub fn max_curl_outside(&self, x0: Option<[f64; 2]>, radius: f64) -> f64 {
        let w = self.grid.nx - 1;
        self.curl_residual
            .iter()
            .enumerate()
            .filter_map(|(k, r)| {
                let r = (*r)?;
                let p = self.plaquette_centre(k % w, k / w);
                match x0 {
                    Some(x) if (p[0] - x[0]).hypot(p[1] - x[1]) <= radius => None,
                    _ => Some(r),
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn max_curl(&self) -> f64 {
        self.max_curl_outside(None, 0.0)
    }
}

/// Integrates `Du = γ(θ)` along a breadth-first spanning tree of unmasked cells.
pub fn reconstruct_potential(field: &DirectionField, curve: &CurveSpec) -> Result<PotentialField> {
    if field.domain != curve.domain() {
        return Err(Error::DomainMismatch(String::from(
            "field and curve parameter domains differ",
        )));
    }
    let g = &field.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let du: Vec<[[f64; 2]; 2]> = field
        .theta
        .iter()
        .map(|&t| {
            let v = curve.jet(t).value;
            [[v.a11, v.a12], [v.a21, v.a22]]
        })
        .collect();
    // Trapezoid increment from cell p to its neighbour q along axis `k` (step ±h).
    let inc = |p: usize, q: usize, k: usize, h: f64| -> [f64; 2] {
        let (a, b) = (du[p], du[q]);
        [0.5 * (a[0][k] + b[0][k]) * h, 0.5 * (a[1][k] + b[1][k]) * h]
    };
    let mut u: Vec<Option<[f64; 2]>> = alloc::vec![None; g.len()];
    let root = (0..g.len())
        .find(|&k| !field.mask[k])
        .ok_or_else(|| invalid("every cell is masked"))?;
    u[root] = Some([0.0, 0.0]);
    let mut queue = VecDeque::from([root]);
    while let Some(p) = queue.pop_front() {
        let (i, j) = g.cell_of(p);
        let base = u[p].unwrap_or([0.0, 0.0]);
        let mut nbrs: [(Option<usize>, usize, f64); 4] = [(None, 0, 0.0); 4];
        if i + 1 < g.nx {
            nbrs[0] = (Some(g.index(i + 1, j)), 0, hx);
        }
        if i > 0 {
            nbrs[1] = (Some(g.index(i - 1, j)), 0, -hx);
        }
        if j + 1 < g.ny {
            nbrs[2] = (Some(g.index(i, j + 1)), 1, hy);
        }
        if j > 0 {
            nbrs[3] = (Some(g.index(i, j - 1)), 1, -hy);
        }
        for (q, k, h) in nbrs {
            let Some(q) = q else { continue };
            if field.mask[q] || u[q].is_some() {
                continue;
            }
            let d = inc(p, q, k, h);
            u[q] = Some([base[0] + d[0], base[1] + d[1]]);
            queue.push_back(q);
        }
    }
    let mut curl = Vec::with_capacity((g.nx - 1) * (g.ny - 1));
    for j in 0..g.ny - 1 {
        for i in 0..g.nx - 1 {
            let (a, b, c, d) = (
                g.index(i, j),
                g.index(i + 1, j),
                g.index(i + 1, j + 1),
                g.index(i, j + 1),
            );
            if [a, b, c, d].iter().any(|&k| field.mask[k]) {
                curl.push(None);
                continue;
            }
            let (bottom, top) = (inc(a, b, 0, hx), inc(d, c, 0, hx));
            let (right, left) = (inc(b, c, 1, hy), inc(a, d, 1, hy));
            let r = [
                (bottom[0] - top[0]) + (right[0] - left[0]),
                (bottom[1] - top[1]) + (right[1] - left[1]),
            ];
            curl.push(Some(r[0].hypot(r[1])));
        }
    }
    Ok(PotentialField {
        grid: *g,
        u,
        curl_residual: curl,
        root,
    })
}

/// Mollifier `ρ_ε(x) = ε⁻² ρ(x/ε)` with `ρ ∝ exp(-1/(1-|x|²))` on the unit disc,
/// and the flat radial cutoff `η`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MollifierSpec {
    pub epsilon: f64,
}

/// `η ≡ 1` on `[ETA_FLAT.0, ETA_FLAT.1]`.
pub const ETA_FLAT: (f64, f64) = (0.5, 2.0);
/// `supp η = [ETA_SUPPORT.0, ETA_SUPPORT.1]`.
pub const ETA_SUPPORT: (f64, f64) = (0.25, 4.0);

impl MollifierSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(MollifierSpec { epsilon })
        } else {
            Err(invalid("epsilon must be positive"))
        }
    }

    /// Unit-mass kernel profile on the unit disc, as a function of `|x|`.
    #[inline]
    pub fn kernel(r: f64) -> f64 {
        bump_raw(r) / BUMP_INTEGRAL_2D
    }

    #[inline]
    pub fn kernel_deriv(r: f64) -> f64 {
        bump_raw_deriv(r) / BUMP_INTEGRAL_2D
    }

    /// Piecewise quintic radial cutoff.
    pub fn eta(r: f64) -> f64 {
        let (a, b) = ETA_SUPPORT;
        let (c, d) = ETA_FLAT;
        if r <= c {
            smoothstep5((r - a) / (c - a))
        } else if r <= d {
            1.0
        } else {
            smoothstep5((b - r) / (b - d))
        }
    }

    pub fn eta_deriv(r: f64) -> f64 {
        let (a, b) = ETA_SUPPORT;
        let (c, d) = ETA_FLAT;
        let ds = |x: f64| {
            if (0.0..=1.0).contains(&x) {
                30.0 * x * x * (x - 1.0) * (x - 1.0)
            } else {
                0.0
            }
        };
        if r <= a || r >= b || (c..=d).contains(&r) {
            0.0
        } else if r < c {
            ds((r - a) / (c - a)) / (c - a)
        } else {
            -ds((b - r) / (b - d)) / (b - d)
        }
    }
}

/// Mollified vector field on the inner cells with its gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Mollified {
    pub epsilon: f64,
    /// Cell indices of `U`.
    pub cells: Vec<usize>,
    pub values: Vec<[f64; 2]>,
    /// `gradients[c][i][k] = ∂_k v_i`.
    pub gradients: Vec<[[f64; 2]; 2]>,
}

/// [`Mollified`] unit field with `1 - |m_ε|²` statistics over `U`.
#[derive(Clone, Debug, PartialEq)]
pub struct MollifiedField {
    pub field: Mollified,
    /// `‖1 - |m_ε|²‖_{L¹(U)}`.
    pub defect_l1: f64,
    /// `max_U |1 - |m_ε|²|`.
    pub defect_max: f64,
    /// `max_U |m_ε|`.
    pub max_modulus: f64,
}

/// Convolves `g(θ)` with `ρ_ε` at every cell of `U` (masked cells skipped,
/// weights renormalized over the rest).
pub fn mollify_map<G: Fn(f64) -> [f64; 2]>(
    field: &DirectionField,
    spec: MollifierSpec,
    g: G,
) -> Result<Mollified> {
    let grid = &field.grid;
    let eps = spec.epsilon;
    if eps > grid.inner_margin {
        return Err(Error::MarginTooSmall {
            radius: eps,
            margin: grid.inner_margin,
        });
    }
    let (hx, hy) = (grid.hx(), grid.hy());
    if eps < 2.0 * hx.max(hy) {
        return Err(invalid("epsilon must span at least two cells"));
    }
    let rx = (eps / hx).ceil() as i64;
    let ry = (eps / hy).ceil() as i64;
    let mut stencil: Vec<(i64, i64, f64, [f64; 2])> = Vec::new();
    for b in -ry..=ry {
        for a in -rx..=rx {
            let z = [a as f64 * hx / eps, b as f64 * hy / eps];
            let r = z[0].hypot(z[1]);
            if r >= 1.0 {
                continue;
            }
            let w = MollifierSpec::kernel(r);
            // ∇_x ρ_ε(x - y) with y = x - (a hx, b hy), in units of 1/ε.
            let dr = MollifierSpec::kernel_deriv(r);
            let grad = if r > 0.0 {
                [dr * z[0] / r / eps, dr * z[1] / r / eps]
            } else {
                [0.0, 0.0]
            };
            stencil.push((a, b, w, grad));
        }
    }
    let vals: Vec<[f64; 2]> = field.theta.iter().map(|&t| g(t)).collect();
    let cells = grid.inner_cells();
    let mut values = Vec::with_capacity(cells.len());
    let mut gradients = Vec::with_capacity(cells.len());
    for &c in &cells {
        let (i, j) = grid.cell_of(c);
        let reference = vals[c];
        let (mut s, mut acc, mut dacc) = (0.0, [0.0; 2], [[0.0; 2]; 2]);
        for &(a, b, w, gr) in &stencil {
            // Cell at offset -(a, b): the kernel argument is x - y = (a hx, b hy).
            let (ii, jj) = (i as i64 - a, j as i64 - b);
            if ii < 0 || jj < 0 || ii >= grid.nx as i64 || jj >= grid.ny as i64 {
                continue;
            }
            let k = grid.index(ii as usize, jj as usize);
            if field.mask[k] {
                continue;
            }
            s += w;
            let d = [vals[k][0] - reference[0], vals[k][1] - reference[1]];
            for r in 0..2 {
                acc[r] += w * d[r];
                dacc[r][0] += gr[0] * d[r];
                dacc[r][1] += gr[1] * d[r];
            }
        }
        if !(s > 0.0) {
            return Err(invalid("mollifier stencil covers only masked cells"));
        }
        values.push([reference[0] + acc[0] / s, reference[1] + acc[1] / s]);
        gradients.push([
            [dacc[0][0] / s, dacc[0][1] / s],
            [dacc[1][0] / s, dacc[1][1] / s],
        ]);
    }
    Ok(Mollified {
        epsilon: eps,
        cells,
        values,
        gradients,
    })
}

/// `m_ε = m ∗ ρ_ε` on `U`.
pub fn mollify(field: &DirectionField, spec: MollifierSpec) -> Result<MollifiedField> {
    let m = mollify_map(field, spec, |t| {
        let (s, c) = t.sin_cos();
        [c, s]
    })?;
    let area = field.grid.cell_area();
    let (mut l1, mut sup, mut modulus) = (0.0, 0.0f64, 0.0f64);
    for v in &m.values {
        let q = v[0] * v[0] + v[1] * v[1];
        let d = (1.0 - q).abs();
        l1 += d * area;
        sup = sup.max(d);
        modulus = modulus.max(q.sqrt());
    }
    Ok(MollifiedField {
        field: m,
        defect_l1: l1,
        defect_max: sup,
        max_modulus: modulus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{make_burgers, make_gamma_k, reparametrize_arclength};
    use crate::factorize::factorize;
    use crate::numerics::wrap_pi;
    use core::f64::consts::{FRAC_PI_2, PI};

    fn grid(n: usize) -> Grid {
        Grid::square(1.0, n, 0.25).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(
            Grid::square(1.0, 8, 0.1),
            Err(Error::GridTooCoarse { .. })
        ));
        assert!(Grid::new([0.0, -1.0, 0.0, 1.0], 32, 32, 0.1).is_err());
        assert!(Grid::square(1.0, 32, 1.0).is_err());
        let g = grid(32);
        assert_eq!(g.cell_of(g.index(3, 7)), (3, 7));
        assert!((g.centre(0, 0)[0] + 1.0 - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn vortex_matches_closed_form() {
        let f = factorize(&make_gamma_k(2).unwrap(), 256).unwrap();
        let g = grid(64);
        let v = synth_vortex(&g, &f, [0.0, 0.0], 1).unwrap();
        for k in 0..g.len() {
            if v.mask[k] {
                continue;
            }
            let (i, j) = g.cell_of(k);
            let x = g.centre(i, j);
            let expect = x[1].atan2(x[0]) - FRAC_PI_2;
            assert!(wrap_pi(v.theta[k] - expect).abs() < 1e-9);
        }
        // x0 sits on a cell corner: four masked cells.
        assert_eq!(v.masked_count(), 4);
        let f1 = factorize(&make_gamma_k(1).unwrap(), 256).unwrap();
        assert!(matches!(
            synth_vortex(&g, &f1, [0.0, 0.0], 1),
            Err(Error::WindingMismatch { required: 2, .. })
        ));
        let f3 = factorize(&make_gamma_k(3).unwrap(), 256).unwrap();
        assert!(matches!(
            synth_vortex(&g, &f3, [0.0, 0.0], 1),
            Err(Error::WindingMismatch {
                actual: Some(3),
                ..
            })
        ));
        assert!(matches!(
            synth_half_vortex(&g, &f3, [0.0, 0.0]),
            Err(Error::WindingMismatch { .. })
        ));
        assert!(synth_vortex(&g, &f, [2.0, 0.0], 1).is_err());
    }

    #[test]
    fn half_vortex_hits_both_signs() {
        let f = factorize(&make_gamma_k(1).unwrap(), 256).unwrap();
        let g = grid(33);
        let v = synth_half_vortex(&g, &f, [0.1, -0.05]).unwrap();
        assert_eq!(v.masked_count(), 1);
        for k in 0..g.len() {
            let (i, j) = g.cell_of(k);
            let x = g.centre(i, j);
            let d = [x[0] - 0.1, x[1] + 0.05];
            let r = d[0].hypot(d[1]);
            let p = f.psi_hat(v.theta[k]);
            assert!(((p[0] * d[0] + p[1] * d[1]) / r).abs() > 1.0 - 1e-9);
        }
    }

    #[test]
    fn fan_is_constant_along_lines() {
        let f = factorize(&make_gamma_k(3).unwrap(), 256).unwrap();
        let g = grid(32);
        let centre = [0.0, -4.0];
        // Choose θ so that Ψ̂ sweeps directions around the vertical.
        let t_mid = f.psi_inverse([0.0, 1.0], 0).unwrap();
        let w = 0.5 / f.phases(t_mid).dphi_psi().abs();
        let field = synth_fan(&g, &f, centre, (t_mid - w, t_mid + w)).unwrap();
        for k in 0..g.len() {
            let (i, j) = g.cell_of(k);
            let x = g.centre(i, j);
            let p = f.psi_hat(field.theta[k]);
            let d = [x[0] - centre[0], x[1] - centre[1]];
            assert!((d[0] * p[1] - d[1] * p[0]).abs() < 1e-10);
        }
        assert!(matches!(
            synth_fan(&g, &f, [0.0, -1.2], (t_mid - w, t_mid + w)),
            Err(Error::Uncovered { .. })
        ));
        // Centre inside the domain: the lines cross there.
        assert!(synth_fan(&g, &f, [0.0, 0.0], (t_mid - w, t_mid + w)).is_err());
    }

    #[test]
    fn crossing_lines_are_reported() {
        let f = factorize(&make_gamma_k(2).unwrap(), 256).unwrap();
        let g = grid(16);
        // Tangent lines of a small circle: points outside it lie on two of them.
        let r = synth_simple_wave(&g, &f, (0.0, PI), |t| t, |_| 0.3);
        assert!(
            matches!(r, Err(Error::CharacteristicsCross { .. })),
            "{r:?}"
        );
    }

    #[test]
    fn burgers_wave_follows_characteristics() {
        // x = (t, y): Burgers characteristics y = y0 + t v0(y0) with increasing v0.
        let c = reparametrize_arclength(&make_burgers(0.0, 1.0).unwrap(), 4096).unwrap();
        let f = factorize(&c, 2048).unwrap();
        let g = Grid::new([0.0, 0.5, -0.5, 0.5], 32, 32, 0.05).unwrap();
        let v0 = |y0: f64| 0.4 * y0.tanh();
        let dir = |s: f64| f.psi_hat(c.parameter_of_native(s));
        let d0 = dir(0.0);
        // The characteristic direction at native value v is parallel to (1, v).
        let s = dir(0.5);
        assert!((s[1] * d0[0] - s[0] * d0[1]).abs() > 0.0);
        let wave = synth_simple_wave(
            &g,
            &f,
            (-0.7, 0.7),
            |y0| c.parameter_of_native(v0(y0)),
            |y0| {
                let p = f.psi_hat(c.parameter_of_native(v0(y0)));
                // Line through (0, y0): offset = (0, y0) · iΨ̂.
                y0 * p[0]
            },
        )
        .unwrap();
        for k in 0..g.len() {
            let (i, j) = g.cell_of(k);
            let x = g.centre(i, j);
            let v = c.native_parameter(wave.theta[k]);
            // Recover y0 from y = y0 + t v0(y0) by bisection and compare.
            let (mut lo, mut hi) = (-0.7, 0.7);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid + x[0] * v0(mid) < x[1] {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert!((v - v0(0.5 * (lo + hi))).abs() < 1e-8, "{v}");
        }
    }

    #[test]
    fn potential_of_constant_field_is_affine() {
        let c = make_gamma_k(2).unwrap();
        let g = grid(20);
        let field = synth_constant(&g, &c, 1.3).unwrap();
        let pot = reconstruct_potential(&field, &c).unwrap();
        assert_eq!(pot.max_curl(), 0.0);
        let a = c.jet(1.3).value;
        let p0 = g.centre(0, 0);
        for k in 0..g.len() {
            let (i, j) = g.cell_of(k);
            let x = g.centre(i, j);
            let u = pot.u[k].unwrap();
            let e = [
                a.a11 * (x[0] - p0[0]) + a.a12 * (x[1] - p0[1]),
                a.a21 * (x[0] - p0[0]) + a.a22 * (x[1] - p0[1]),
            ];
            assert!((u[0] - e[0]).abs() < 1e-12 && (u[1] - e[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn vortex_potential_defect_scales_with_h() {
        let c = make_gamma_k(2).unwrap();
        let f = factorize(&c, 256).unwrap();
        for n in [32, 64, 128] {
            let g = grid(n);
            let v = synth_vortex(&g, &f, [0.0, 0.0], 1).unwrap();
            let pot = reconstruct_potential(&v, &c).unwrap();
            let h = g.hx();
            assert!(pot.max_curl() <= 5.0 * h, "n={n} {}", pot.max_curl());
            assert!(pot.u.iter().zip(&v.mask).all(|(u, &m)| u.is_some() != m));
        }
    }

    #[test]
    fn noisy_field_defect_grows_linearly() {
        let c = make_gamma_k(2).unwrap();
        let g = grid(24);
        let field = synth_constant(&g, &c, 0.4).unwrap();
        let noise: Vec<f64> = (0..g.len())
            .map(|k| ((k * 7919) % 101) as f64 / 50.0 - 1.0)
            .collect();
        let d1 = reconstruct_potential(&field.perturbed(1e-4, &noise), &c)
            .unwrap()
            .max_curl();
        let d2 = reconstruct_potential(&field.perturbed(2e-4, &noise), &c)
            .unwrap()
            .max_curl();
        assert!(d1 > 0.0);
        assert!((d2 / d1 - 2.0).abs() < 1e-3, "{}", d2 / d1);
    }

    #[test]
    fn kernel_has_unit_mass_and_eta_is_flat() {
        // Radial quadrature of 2π ∫ r ρ(r) dr.
        let n = 400;
        let mass: f64 = (0..n)
            .map(|k| {
                let (a, b) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
                crate::numerics::gl5(a, b, |r| TAU * r * MollifierSpec::kernel(r))
            })
            .sum();
        assert!((mass - 1.0).abs() < 1e-10, "{mass}");
        for r in [0.5, 0.7, 1.0, 1.5, 2.0] {
            assert_eq!(MollifierSpec::eta(r), 1.0);
            assert_eq!(MollifierSpec::eta_deriv(r), 0.0);
        }
        assert_eq!(MollifierSpec::eta(0.25), 0.0);
        assert_eq!(MollifierSpec::eta(4.0), 0.0);
        let h = 1e-6;
        for r in [0.3, 0.45, 2.5, 3.7] {
            let fd = (MollifierSpec::eta(r + h) - MollifierSpec::eta(r - h)) / (2.0 * h);
            assert!((fd - MollifierSpec::eta_deriv(r)).abs() < 1e-6);
        }
    }

    #[test]
    fn mollifying_constant_is_exact() {
        let c = make_gamma_k(2).unwrap();
        let g = grid(48);
        let field = synth_constant(&g, &c, 2.0).unwrap();
        let m = mollify(&field, MollifierSpec::new(0.2).unwrap()).unwrap();
        let (s, co) = 2.0f64.sin_cos();
        assert!(m.field.values.iter().all(|v| v[0] == co && v[1] == s));
        assert!(m
            .field
            .gradients
            .iter()
            .all(|d| d.iter().flatten().all(|&x| x == 0.0)));
        assert!(matches!(
            mollify(&field, MollifierSpec::new(0.3).unwrap()),
            Err(Error::MarginTooSmall { .. })
        ));
    }

    #[test]
    fn vortex_mollification_defect_decays() {
        let c = make_gamma_k(2).unwrap();
        let f = factorize(&c, 256).unwrap();
        let g = grid(128);
        let field = synth_vortex(&g, &f, [0.0, 0.0], 1).unwrap();
        let mut last = f64::INFINITY;
        for eps in [0.2, 0.1, 0.05] {
            let m = mollify(&field, MollifierSpec::new(eps).unwrap()).unwrap();
            assert!(m.max_modulus <= 1.0 + 1e-12);
            assert!(m.defect_l1 < last);
            last = m.defect_l1;
        }
    }
}
