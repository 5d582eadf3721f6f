//! JSON curve descriptions.
//!
//! ```json
//! { "family": "gamma_k", "params": { "k": 2 } }
//! { "family": "burgers", "params": { "q": 1.0, "vmax": 1.0 } }
//! { "family": "trig_poly", "params": { "tangent": [[1, 0.5, 0.0]], "twist": 1 } }
//! { "family": "line", "params": { "origin": [0,0,0,0], "direction": [1,0,0,0] },
//!   "domain": { "kind": "arc", "a": 0.0, "b": 1.0 } }
//! { "family": "sampled", "domain": { "kind": "closed_loop" }, "samples": [[a11, a12, a21, a22], ...] }
//! ```
//!
//! Matrices are row-major `[a11, a12, a21, a22]`; Fourier modes are
//! `[n, re, im]`.

use std::path::Path;

use diffinc_core::curve::{
    make_burgers, make_composite, make_gamma_k, make_line, make_sampled_arc, make_sampled_loop,
    make_trig_poly, reparametrize_arclength, CurveSpec, PlanarLoop, TrigPolyCurve,
};
use diffinc_core::mat2::Mat2;
use diffinc_core::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Samples used when a curve has to be reparametrized by arc length.
pub const DEFAULT_ARCLENGTH_SAMPLES: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    GammaK,
    Burgers,
    Composite,
    TrigPoly,
    Line,
    Sampled,
}

/// Fourier mode `[n, re, im]`.
pub type Mode = (i32, f64, f64);

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vmax: Option<f64>,
    /// Modes of the planar loop feeding the conformal part of a composite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_c: Option<Vec<Mode>>,
    /// Modes of the planar loop feeding the anticonformal part of a composite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_a: Option<Vec<Mode>>,
    /// Tangent polynomial of a nowhere-elliptic trigonometric curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tangent: Option<Vec<Mode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twist: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<[f64; 4]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    ClosedLoop,
    Arc { a: f64, b: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveFile {
    pub family: FamilyName,
    #[serde(default)]
    pub params: CurveParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<[f64; 4]>>,
    /// Resolution of the arc-length table for curves that are not unit speed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arclength_samples: Option<usize>,
}

/// A curve ready for the kernel: unit speed, with its native form kept.
#[derive(Clone, Debug)]
pub struct BuiltCurve {
    pub native: CurveSpec,
    pub unit_speed: CurveSpec,
    pub reparametrized: bool,
    /// Scale applied so that a reparametrized loop has length `2π` (1 otherwise).
    pub homothety: f64,
}

fn mat(v: [f64; 4]) -> Mat2 {
    Mat2::new(v[0], v[1], v[2], v[3])
}

fn modes(v: &[Mode]) -> Vec<(i32, Complex64)> {
    v.iter()
        .map(|&(n, re, im)| (n, Complex64::new(re, im)))
        .collect()
}

fn need<T: Copy>(v: Option<T>, name: &str, family: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("family {family} needs params.{name}")))
}

impl CurveFile {
    pub fn gamma_k(k: u32) -> Self {
        CurveFile {
            family: FamilyName::GammaK,
            params: CurveParams {
                k: Some(k),
                ..Default::default()
            },
            domain: None,
            samples: None,
            arclength_samples: None,
        }
    }

    pub fn burgers(q: f64, vmax: f64) -> Self {
        CurveFile {
            family: FamilyName::Burgers,
            params: CurveParams {
                q: Some(q),
                vmax: Some(vmax),
                ..Default::default()
            },
            domain: None,
            samples: None,
            arclength_samples: None,
        }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| CliError::Json {
            path: path.into(),
            source,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("curve files always serialize");
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    /// Canonical one-line JSON. Field order is fixed by the struct layout.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("curve files always serialize")
    }

    /// Lower-case hex SHA-256 of [`CurveFile::canonical_json`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Kernel curve in its native parametrization.
    pub fn native(&self) -> Result<CurveSpec, CliError> {
        let p = &self.params;
        let c = match self.family {
            FamilyName::GammaK => make_gamma_k(need(p.k, "k", "gamma_k")?)?,
            FamilyName::Burgers => make_burgers(need(p.q, "q", "burgers")?, p.vmax.unwrap_or(1.0))?,
            FamilyName::Composite => {
                let base_c = p
                    .base_c
                    .as_deref()
                    .map(|m| PlanarLoop { modes: modes(m) })
                    .unwrap_or_else(PlanarLoop::unit_circle);
                let base_a = p
                    .base_a
                    .as_deref()
                    .map(|m| PlanarLoop { modes: modes(m) })
                    .unwrap_or_else(PlanarLoop::unit_circle);
                make_composite(base_c, base_a, need(p.k, "k", "composite")?)?
            }
            FamilyName::TrigPoly => {
                let tangent = p.tangent.as_deref().ok_or_else(|| {
                    CliError::Config("family trig_poly needs params.tangent".into())
                })?;
                make_trig_poly(TrigPolyCurve::nowhere_elliptic(
                    &modes(tangent),
                    p.twist.unwrap_or(1),
                )?)
            }
            FamilyName::Line => {
                let (a, b) = match self.domain {
                    Some(DomainSpec::Arc { a, b }) => (a, b),
                    _ => return Err(CliError::Config("family line needs an arc domain".into())),
                };
                make_line(
                    mat(need(p.origin, "origin", "line")?),
                    mat(need(p.direction, "direction", "line")?),
                    a,
                    b,
                )?
            }
            FamilyName::Sampled => {
                let samples: Vec<Mat2> = self
                    .samples
                    .as_deref()
                    .ok_or_else(|| CliError::Config("family sampled needs samples".into()))?
                    .iter()
                    .map(|&s| mat(s))
                    .collect();
                match self.domain {
                    Some(DomainSpec::Arc { a, b }) => make_sampled_arc(samples, a, b)?,
                    _ => make_sampled_loop(samples)?,
                }
            }
        };
        Ok(c)
    }

    /// Native curve plus a unit-speed version (reparametrized when needed).
    pub fn build(&self) -> Result<BuiltCurve, CliError> {
        let native = self.native()?;
        if native.is_unit_speed() {
            return Ok(BuiltCurve {
                unit_speed: native.clone(),
                native,
                reparametrized: false,
                homothety: 1.0,
            });
        }
        let r = reparametrize_arclength(
            &native,
            self.arclength_samples.unwrap_or(DEFAULT_ARCLENGTH_SAMPLES),
        )?;
        Ok(BuiltCurve {
            homothety: r.homothety(),
            unit_speed: r,
            native,
            reparametrized: true,
        })
    }
}
