//! Curve certification: ellipticity class, quartic nondegeneracy, rank-one
//! connection scan, the composite-curve threshold `k₀` and the openness radius.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::curve::{chord, make_composite, param_distance, CurveSpec, Domain, PlanarLoop};
use crate::error::{invalid, Error, Result};
use crate::numerics::{golden_min, TAU};

/// Smallest accepted scan grid.
pub const MIN_GRID: usize = 64;
/// `|det γ''|` below this flags a degenerate (non quartic) curve.
pub const TOL_DEGENERATE: f64 = 1e-6;
/// Tolerance on `| |γ'| - 1 |` accepted as unit speed by the scan.
pub const UNIT_SPEED_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EllipticityClass {
    Elliptic,
    PartiallyElliptic,
    NowhereElliptic,
}

/// Sampled sign structure of `det γ'` and `det γ''`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ellipticity {
    pub class: EllipticityClass,
    pub max_abs_det_d1: f64,
    /// `1e-9 · (1 + ‖γ'‖²_∞)`.
    pub tol_elliptic: f64,
    /// `det γ''` at the sample where `|det γ''|` is smallest (sign kept).
    pub min_abs_det_d2: f64,
    /// Parameter of that sample.
    pub min_abs_det_d2_at: f64,
    /// Maximal parameter intervals on which `det γ'` stays sign-definite above
    /// tolerance. Loop intervals may end beyond `2π` when they wrap.
    pub elliptic_components: Vec<(f64, f64)>,
    pub grid_n: usize,
}

/// Result of the global scan of `det(γ(t) - γ(s)) / |e^{it} - e^{is}|⁴`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RankOneScan {
    /// Minimum of the oriented ratio; `≤ 0` signals a rank-one connection.
    pub c_hat: f64,
    pub argmin_pair: (f64, f64),
    pub argmin_index: (usize, usize),
    /// `min_t -det(γ''(t))/12` in the chosen orientation.
    pub near_diagonal_limit_min: f64,
    /// Whether the curve was reflected so that the ratio is positive.
    pub reflection_applied: bool,
    /// Pair `(s, t)` with `det(γ(t) - γ(s)) ≤ 0` when one was found.
    pub witness: Option<(f64, f64)>,
    pub grid_n: usize,
    /// Width of the diagonal band replaced by the Taylor limit.
    pub h_switch: f64,
}

/// Combined certificate.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Certificate {
    pub ellipticity: Ellipticity,
    pub scan: RankOneScan,
    /// Nowhere elliptic with `min |det γ''| < TOL_DEGENERATE`.
    pub degenerate: bool,
    pub tol_degenerate: f64,
}

impl Certificate {
    /// No rank-one connection found and, for nowhere-elliptic curves, `det γ''` bounded away from 0.
    pub fn is_certified(&self) -> bool {
        self.scan.c_hat > 0.0 && !self.degenerate
    }
}

fn require_unit_speed(c: &CurveSpec) -> Result<()> {
    if c.is_unit_speed() {
        Ok(())
    } else {
        Err(Error::NotUnitSpeed {
            deviation: c.unit_speed_deviation(256),
        })
    }
}

fn require_grid(n: usize) -> Result<()> {
    if n < MIN_GRID {
        Err(Error::GridTooCoarse { n, min: MIN_GRID })
    } else {
        Ok(())
    }
}

/// Classifies `Π` as elliptic, partially elliptic or nowhere elliptic on an `n`-point grid.
pub fn classify_ellipticity(c: &CurveSpec, n: usize) -> Result<Ellipticity> {
    require_unit_speed(c)?;
    require_grid(n)?;
    let ts = c.grid(n);
    let jets: Vec<_> = ts.iter().map(|&t| c.jet(t)).collect();
    let det1: Vec<f64> = jets.iter().map(|j| j.d1.det()).collect();
    let sup_d1 = jets.iter().map(|j| j.d1.norm()).fold(0.0, f64::max);
    let tol = 1e-9 * (1.0 + sup_d1 * sup_d1);
    let max_abs_det_d1 = det1.iter().fold(0.0f64, |m, d| m.max(d.abs()));

    let mut min_i = 0;
    let mut min_abs = f64::INFINITY;
    for (i, j) in jets.iter().enumerate() {
        let d = j.d2.det().abs();
        if d < min_abs {
            min_abs = d;
            min_i = i;
        }
    }

    // Zeros of det γ'' usually fall between samples; refine inside the neighbouring cells.
    let (lo, hi) = match c.domain() {
        Domain::ClosedLoop => (ts[min_i] - TAU / n as f64, ts[min_i] + TAU / n as f64),
        Domain::Arc { .. } => (ts[min_i.saturating_sub(1)], ts[(min_i + 1).min(n - 1)]),
    };
    let (t_ref, d_ref) = golden_min(lo, hi, 80, |t| c.jet(t).d2.det().abs());
    let (min_abs_det_d2, min_abs_det_d2_at) = if d_ref < min_abs {
        (
            c.jet(t_ref).d2.det(),
            if t_ref < 0.0 { t_ref + TAU } else { t_ref },
        )
    } else {
        (jets[min_i].d2.det(), ts[min_i])
    };

    let sign = |d: f64| {
        if d > tol {
            1i8
        } else if d < -tol {
            -1
        } else {
            0
        }
    };
    let signs: Vec<i8> = det1.iter().map(|&d| sign(d)).collect();
    let class = if max_abs_det_d1 <= tol {
        EllipticityClass::NowhereElliptic
    } else if signs.iter().all(|&s| s == signs[0] && s != 0) {
        EllipticityClass::Elliptic
    } else {
        EllipticityClass::PartiallyElliptic
    };

    // Runs of constant nonzero sign.
    let mut runs: Vec<(usize, usize, i8)> = Vec::new();
    let mut i = 0;
    while i < n {
        if signs[i] == 0 {
            i += 1;
            continue;
        }
        let s = signs[i];
        let start = i;
        while i + 1 < n && signs[i + 1] == s {
            i += 1;
        }
        runs.push((start, i, s));
        i += 1;
    }
    let mut components: Vec<(f64, f64)> = Vec::new();
    if c.is_closed() && runs.len() == 1 && runs[0].0 == 0 && runs[0].1 == n - 1 {
        components.push((0.0, TAU));
    } else {
        let wrap = c.is_closed()
            && runs.len() > 1
            && runs[0].0 == 0
            && runs[runs.len() - 1].1 == n - 1
            && runs[0].2 == runs[runs.len() - 1].2;
        let mut slice = &runs[..];
        if wrap {
            let last = runs[runs.len() - 1];
            components.push((ts[last.0], ts[runs[0].1] + TAU));
            slice = &runs[1..runs.len() - 1];
        }
        components.extend(slice.iter().map(|&(a, b, _)| (ts[a], ts[b])));
        components.sort_by(|x, y| x.0.total_cmp(&y.0));
    }

    Ok(Ellipticity {
        class,
        max_abs_det_d1,
        tol_elliptic: tol,
        min_abs_det_d2,
        min_abs_det_d2_at,
        elliptic_components: components,
        grid_n: n,
    })
}

/// Global scan for rank-one connections on a unit-speed curve.
pub fn scan_rank_one(c: &CurveSpec, n: usize) -> Result<RankOneScan> {
    require_unit_speed(c)?;
    scan_rank_one_native(c, n)
}

/// Same scan in the curve's own parameter, without the unit-speed requirement.
///
/// This is the quantity controlled for nowhere-elliptic parametrizations that
/// are not arc length (perturbations of a certified seed, trigonometric test curves).
pub fn scan_rank_one_native(c: &CurveSpec, n: usize) -> Result<RankOneScan> {
    require_grid(n)?;
    if let Domain::Arc { a, b } = c.domain() {
        if b - a >= TAU {
            return Err(invalid(
                "arc domains longer than 2π make the chord normalization degenerate",
            ));
        }
    }
    let domain = c.domain();
    let ts = c.grid(n);
    let jets: Vec<_> = ts.iter().map(|&t| c.jet(t)).collect();
    let circle: Vec<(f64, f64)> = ts.iter().map(|&t| (t.cos(), t.sin())).collect();
    let taylor: Vec<f64> = jets.iter().map(|j| -j.d2.det() / 12.0).collect();
    let h_switch = 8.0 / n as f64;

    let mut lo = (f64::INFINITY, (0usize, 0usize));
    let mut hi = (f64::NEG_INFINITY, (0usize, 0usize));
    for i in 0..n {
        for j in (i + 1)..n {
            let r = if param_distance(domain, ts[i], ts[j]) < h_switch {
                // Band value: conservative over both endpoints.
                taylor[i].min(taylor[j])
            } else {
                let dx = circle[j].0 - circle[i].0;
                let dy = circle[j].1 - circle[i].1;
                let c2 = dx * dx + dy * dy;
                (jets[j].value - jets[i].value).det() / (c2 * c2)
            };
            if r < lo.0 {
                lo = (r, (i, j));
            }
            if r > hi.0 {
                hi = (r, (i, j));
            }
        }
    }
    let reflection_applied = hi.0 < 0.0;
    let (c_hat, idx, near) = if reflection_applied {
        (
            -hi.0,
            hi.1,
            -taylor.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    } else {
        (
            lo.0,
            lo.1,
            taylor.iter().cloned().fold(f64::INFINITY, f64::min),
        )
    };
    let pair = (ts[idx.0], ts[idx.1]);
    Ok(RankOneScan {
        c_hat,
        argmin_pair: pair,
        argmin_index: idx,
        near_diagonal_limit_min: near,
        reflection_applied,
        witness: if c_hat <= 0.0 { Some(pair) } else { None },
        grid_n: n,
        h_switch,
    })
}

/// Runs [`classify_ellipticity`] and [`scan_rank_one`] and assembles a certificate.
pub fn certify(c: &CurveSpec, n: usize) -> Result<Certificate> {
    let ellipticity = classify_ellipticity(c, n)?;
    let scan = scan_rank_one(c, n)?;
    let degenerate = ellipticity.class == EllipticityClass::NowhereElliptic
        && ellipticity.min_abs_det_d2.abs() < TOL_DEGENERATE;
    Ok(Certificate {
        ellipticity,
        scan,
        degenerate,
        tol_degenerate: TOL_DEGENERATE,
    })
}

/// Outcome of [`estimate_k0`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct K0Estimate {
    pub k0: u32,
    /// `sup|γ''| / inf|γ̃''|`; the curvature condition needs `k` strictly above it.
    pub curvature_bound: f64,
    /// Chord radius below which the composite ratio was found positive.
    pub delta1: f64,
    /// `min |γ(s) - γ(t)|` over chords at least `delta1`.
    pub beta0: f64,
    /// `sup |γ̃ - mean(γ̃)|`.
    pub sup_base_a: f64,
}

/// Smallest `k` meeting the two sufficient conditions for `α_k` to have no
/// rank-one connections, with extrema from dense sampling (`n` points).
///
/// The far-pair bound uses `|γ̃(ks) - γ̃(kt)| ≤ 2 sup|γ̃ - mean(γ̃)|`, which is
/// translation invariant and no weaker than the uncentred form.
pub fn estimate_k0(base_c: &PlanarLoop, base_a: &PlanarLoop, n: usize) -> Result<K0Estimate> {
    require_grid(n)?;
    let ts: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
    let jc: Vec<_> = ts.iter().map(|&t| base_c.jet(t)).collect();
    let ja: Vec<_> = ts.iter().map(|&t| base_a.jet(t)).collect();
    let sup_c2 = jc.iter().map(|j| j[2].norm_sqr()).fold(0.0, f64::max);
    let inf_a2 = ja
        .iter()
        .map(|j| j[2].norm_sqr())
        .fold(f64::INFINITY, f64::min);
    if !(inf_a2 > 1e-14) {
        return Err(invalid("base_a has a vanishing curvature sample"));
    }
    let mean = ja.iter().map(|j| j[0]).sum::<num_complex::Complex64>() / n as f64;
    let sup_a = ja.iter().map(|j| (j[0] - mean).norm()).fold(0.0, f64::max);
    let curvature_bound = (sup_c2 / inf_a2).sqrt();
    let mut k = (curvature_bound.floor() as u32).saturating_add(1).max(1);
    while (k as f64).powi(2) * inf_a2 <= sup_c2 {
        k += 1;
    }
    const K_MAX: u32 = 4096;
    while k <= K_MAX {
        let alpha = make_composite(base_c.clone(), base_a.clone(), k)?;
        let m = n.max(32 * k as usize);
        let grid: Vec<f64> = (0..m).map(|i| TAU * i as f64 / m as f64).collect();
        let vals: Vec<_> = grid.iter().map(|&t| alpha.jet(t).value).collect();
        let mut delta1 = 2.0f64;
        for i in 0..m {
            for j in (i + 1)..m {
                if (vals[j] - vals[i]).det() <= 0.0 {
                    delta1 = delta1.min(chord(grid[i], grid[j]));
                }
            }
        }
        let pts: Vec<_> = grid.iter().map(|&t| base_c.jet(t)[0]).collect();
        let mut beta0 = f64::INFINITY;
        for i in 0..m {
            for j in (i + 1)..m {
                if chord(grid[i], grid[j]) >= delta1 - 1e-12 {
                    beta0 = beta0.min((pts[j] - pts[i]).norm());
                }
            }
        }
        if beta0 * beta0 > 4.0 * sup_a * sup_a / (k as f64 * k as f64) {
            return Ok(K0Estimate {
                k0: k,
                curvature_bound,
                delta1,
                beta0,
                sup_base_a: sup_a,
            });
        }
        k += 1;
    }
    Err(invalid(
        "no k below 4096 satisfies the composite conditions",
    ))
}

/// Radius of a C² ball around a certified seed inside which the quartic
/// constant stays at least a quarter of the seed's.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OpennessEstimate {
    pub kappa_bar: f64,
    pub c_expansion: f64,
    pub delta: f64,
    /// `‖γ̄''‖_∞` (Frobenius, sampled).
    pub sup_d2: f64,
}

/// Openness radius for a certified nowhere-elliptic seed.
///
/// For two curves with `det γ' ≡ 0` the Taylor expansion of the increment gives
/// `det(γ(t+h)-γ(t)) = h⁴ Q[γ''](t,h)` with
/// `Q[g] = det(∫(1-s)g) - ∫∫ s(1-s) cof g(t+τsh) : g(t+sh)`.
/// Bilinearity gives `|Q[g] - Q[ḡ]| ≤ (1/8 + 1/6)(‖g‖ + ‖ḡ‖)‖g - ḡ‖`, and
/// `h⁴ ≤ K|e^{ih} - 1|⁴` with `K = (π/2)⁴` for `|h| ≤ π`. Hence
/// `C = 7K/24` and, with `‖γ''‖ ≤ ‖γ̄''‖ + δ` and `δ ≤ 1`,
/// `δ = min(1, (3/4)κ̄ / (C(2‖γ̄''‖ + 1)))`.
pub fn openness_radius(seed: &CurveSpec, cert: &Certificate) -> Result<OpennessEstimate> {
    let kappa = cert.scan.c_hat;
    if cert.ellipticity.class != EllipticityClass::NowhereElliptic || !cert.is_certified() {
        return Err(Error::NotCertified { c_hat: kappa });
    }
    let n = 4 * cert.scan.grid_n.max(MIN_GRID);
    let sup_d2 = seed
        .grid(n)
        .into_iter()
        .map(|t| seed.jet(t).d2.norm())
        .fold(0.0, f64::max);
    let k_chord = match seed.domain() {
        Domain::ClosedLoop => (PI / 2.0).powi(4),
        Domain::Arc { a, b } => {
            let l = b - a;
            if l <= PI {
                (PI / 2.0).powi(4)
            } else {
                (l / (2.0 * (0.5 * l).sin())).powi(4)
            }
        }
    };
    let c_expansion = 7.0 / 24.0 * k_chord;
    let delta = (0.75 * kappa / (c_expansion * (2.0 * sup_d2 + 1.0))).min(1.0);
    Ok(OpennessEstimate {
        kappa_bar: kappa,
        c_expansion,
        delta,
        sup_d2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{make_gamma_k, make_line, make_trig_poly, TrigPolyCurve};
    use crate::mat2::Mat2;
    use num_complex::Complex64;

    #[test]
    fn gamma_one_is_sharp() {
        let g = make_gamma_k(1).unwrap();
        let cert = certify(&g, 128).unwrap();
        assert_eq!(cert.ellipticity.class, EllipticityClass::NowhereElliptic);
        assert!((cert.scan.c_hat - 0.0625).abs() < 1e-9);
        assert!(!cert.scan.reflection_applied);
        assert!(cert.is_certified());
    }

    #[test]
    fn coarse_grids_and_non_unit_speed_are_rejected() {
        let g = make_gamma_k(1).unwrap();
        assert_eq!(
            scan_rank_one(&g, 32),
            Err(Error::GridTooCoarse { n: 32, min: 64 })
        );
        let b = crate::curve::make_burgers(0.0, 1.0).unwrap();
        assert!(matches!(
            scan_rank_one(&b, 128),
            Err(Error::NotUnitSpeed { .. })
        ));
        assert!(matches!(
            classify_ellipticity(&b, 128),
            Err(Error::NotUnitSpeed { .. })
        ));
    }

    #[test]
    fn segment_has_rank_one_connection() {
        let seg = make_line(Mat2::ZERO, Mat2::new(1.0, 0.0, 0.0, 0.0), 0.0, 1.0).unwrap();
        let cert = certify(&seg, 64).unwrap();
        assert!(cert.scan.c_hat <= 0.0);
        assert!(cert.scan.witness.is_some());
        assert!(!cert.is_certified());
    }

    #[test]
    fn conformal_circle_is_elliptic() {
        let c = make_trig_poly(TrigPolyCurve {
            conformal: alloc::vec![(1, Complex64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0))],
            anticonformal: alloc::vec![],
        });
        assert!(c.is_unit_speed());
        let e = classify_ellipticity(&c, 128).unwrap();
        assert_eq!(e.class, EllipticityClass::Elliptic);
        assert_eq!(e.elliptic_components, alloc::vec![(0.0, TAU)]);
    }

    #[test]
    fn negative_orientation_is_reflected() {
        // Swapping the roles of the two parts flips the sign of every determinant.
        let half = Complex64::new(0.5, 0.0);
        let c = make_trig_poly(TrigPolyCurve {
            conformal: alloc::vec![(2, Complex64::new(0.25, 0.0))],
            anticonformal: alloc::vec![(1, half)],
        });
        let s = scan_rank_one(&c, 128).unwrap();
        assert!(s.reflection_applied);
        assert!((s.c_hat - 0.0625).abs() < 1e-9);
    }

    #[test]
    fn k0_for_circles() {
        let circle = PlanarLoop::unit_circle();
        let e = estimate_k0(&circle, &circle, 128).unwrap();
        assert_eq!(e.k0, 2);
        let e2 = estimate_k0(&circle, &PlanarLoop::wound_circle(2), 128).unwrap();
        assert!((e2.curvature_bound - 0.5 * e.curvature_bound).abs() < 1e-12);
        assert!(e2.k0 <= e.k0);
    }

    #[test]
    fn openness_requires_certified_seed() {
        let seg = make_line(Mat2::ZERO, Mat2::new(1.0, 0.0, 0.0, 0.0), 0.0, 1.0).unwrap();
        let cert = certify(&seg, 64).unwrap();
        assert!(openness_radius(&seg, &cert).is_err());
        let g = make_gamma_k(1).unwrap();
        let cert = certify(&g, 128).unwrap();
        let o = openness_radius(&g, &cert).unwrap();
        assert!(o.delta > 0.0 && o.delta <= 1.0);
    }
}
