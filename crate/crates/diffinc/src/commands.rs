//! Command implementations. Each returns an [`Outcome`]; only I/O, parsing
//! and kernel rejections surface as errors.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use diffinc_core::certify::{certify, openness_radius, scan_rank_one_native, EllipticityClass};
use diffinc_core::curve::{make_trig_poly, CurveSpec, TrigPolyCurve};
use diffinc_core::entropy::{gamma_entropies, lift_eikonal_entropy, special_pair, Entropy};
use diffinc_core::factorize::{factorize, verify_factorization, Factorization};
use diffinc_core::field::{
    synth_constant, synth_fan, synth_half_vortex, synth_vortex, DirectionField, Grid,
};
use diffinc_core::verify::{
    besov_seminorm, commutator_experiment, default_eikonal_profiles, detect_singularities,
    entropy_production_suite, standard_suite, CommutatorParams, Flux, GammaRow, TestBank,
};
use diffinc_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::cli::{
    CertifyArgs, Cli, Command, FactorizeArgs, FieldArgs, FieldKind, ScanOpenArgs, SuiteKind,
    SynthArgs, VerifyArgs,
};
use crate::curvefile::{BuiltCurve, CurveFile, FamilyName};
use crate::dump::FieldDump;
use crate::report::{write_table, GridInfo, Report};
use crate::{CliError, ExitStatus};

/// Besov exponents reported by `verify`.
pub const BESOV_P: f64 = 4.0;
pub const BESOV_S: f64 = 1.0 / 3.0;
/// Exponents of the commutator experiment run by `verify --eps-ladder`.
pub const COMMUTATOR: CommutatorParams = CommutatorParams {
    s: 1.0 / 3.0,
    p: 4.0,
    alpha: 2.0,
    beta: 1.0,
};

#[derive(Debug)]
pub struct Outcome {
    pub status: ExitStatus,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Certify(a) => run_certify(a),
        Command::Factorize(a) => run_factorize(a),
        Command::Synth(a) => run_synth(a),
        Command::Verify(a) => run_verify(a),
        Command::ScanOpen(a) => run_scan_open(a),
    }
}

fn out_dir(p: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(p).map_err(|e| CliError::io(p, e))
}

fn curve_body(b: &BuiltCurve) -> serde_json::Value {
    json!({ "family_tag": b.native.tag(), "reparametrized": b.reparametrized, "homothety": b.homothety })
}

fn run_certify(a: &CertifyArgs) -> Result<Outcome, CliError> {
    out_dir(&a.out)?;
    let file = a.curve.resolve()?;
    let built = file.build()?;
    let mut cert = certify(&built.unit_speed, a.grid)?;
    if let Some(tol) = a.tol {
        cert.tol_degenerate = tol;
        cert.degenerate = cert.ellipticity.class == EllipticityClass::NowhereElliptic
            && cert.ellipticity.min_abs_det_d2.abs() < tol;
    }
    let certified = cert.is_certified();
    let openness = if certified && cert.ellipticity.class == EllipticityClass::NowhereElliptic {
        Some(openness_radius(&built.unit_speed, &cert)?)
    } else {
        None
    };
    let native_witness = cert.scan.witness.map(|(s, t)| {
        (
            built.unit_speed.native_parameter(s),
            built.unit_speed.native_parameter(t),
        )
    });
    let status = if certified {
        ExitStatus::Ok
    } else {
        ExitStatus::CertificationFailed
    };

    let grid = GridInfo {
        parameter_n: Some(a.grid),
        ..Default::default()
    };
    let mut report = Report::new(
        "certify",
        &file,
        grid,
        &[
            ("degenerate", cert.tol_degenerate),
            ("elliptic", cert.ellipticity.tol_elliptic),
        ],
        None,
    );
    report.set_status(status);
    report.set_body(&json!({
        "curve": curve_body(&built),
        "certified": certified,
        "certificate": cert,
        "native_witness": native_witness,
        "openness": openness,
    }));
    let files = report.write(&a.out, "certify")?;
    let summary = match (certified, cert.scan.witness) {
        (true, _) => format!(
            "certified: c_hat = {:.12}, class {:?}",
            cert.scan.c_hat, cert.ellipticity.class
        ),
        (false, Some((s, t))) => {
            format!("not certified: rank-one connection between t = {s:.6} and t = {t:.6}")
        }
        (false, None) => format!(
            "not certified: c_hat = {:.3e}, min |det γ''| = {:.3e} (degenerate = {})",
            cert.scan.c_hat,
            cert.ellipticity.min_abs_det_d2.abs(),
            cert.degenerate
        ),
    };
    Ok(Outcome {
        status,
        files,
        summary,
    })
}

#[derive(Serialize)]
struct EntropySummary {
    tag: String,
    file: String,
    nodes: usize,
    sup_norm: f64,
    definitional_residual: f64,
    periodicity_defect: f64,
}

fn file_tag(tag: &str) -> String {
    tag.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

fn entropy_family(
    f: &Factorization,
    suite: SuiteKind,
    lifted: usize,
    table_n: usize,
) -> Result<Vec<Entropy>, CliError> {
    let mut out: Vec<Entropy> = gamma_entropies(f.curve(), table_n)?.into();
    if suite == SuiteKind::Standard {
        let sp = special_pair(f, f.domain().start(), 0.4, table_n)?;
        out.push(sp.phi);
        out.push(sp.phi_bar);
        for p in default_eikonal_profiles(f, lifted) {
            out.push(lift_eikonal_entropy(f, p, table_n)?);
        }
    }
    Ok(out)
}

fn run_factorize(a: &FactorizeArgs) -> Result<Outcome, CliError> {
    out_dir(&a.out)?;
    let file = a.curve.resolve()?;
    let built = file.build()?;
    let f = factorize(&built.unit_speed, a.grid)?;
    let residual = verify_factorization(&f, &built.unit_speed, 4 * a.grid);
    let entropies = entropy_family(&f, a.suite, a.lifted, a.table_n)?;

    let mut files = Vec::new();
    let mut tables = Vec::new();
    for (i, e) in entropies.iter().enumerate() {
        let name = format!("entropy_{i:02}_{}.csv", file_tag(e.tag()));
        let path = a.out.join(&name);
        write_table(
            &path,
            &["theta", "phi1", "phi2", "alpha1", "alpha2"],
            e.table_rows(),
        )?;
        files.push(path);
        tables.push(EntropySummary {
            tag: e.tag().into(),
            file: name,
            nodes: e.nodes().len(),
            sup_norm: e.sup_norm(),
            definitional_residual: e.definitional_residual(4),
            periodicity_defect: if f.domain().is_closed() {
                e.periodicity_defect()
            } else {
                0.0
            },
        });
    }
    let worst = residual
        .max_outer_residual
        .max(residual.max_lambda_norm_dev)
        .max(residual.max_psi_norm_dev);
    let status = if worst <= a.tol {
        ExitStatus::Ok
    } else {
        ExitStatus::CertificationFailed
    };

    let grid = GridInfo {
        parameter_n: Some(a.grid),
        ..Default::default()
    };
    let mut report = Report::new(
        "factorize",
        &file,
        grid,
        &[("factorization_residual", a.tol)],
        None,
    );
    report.set_status(status);
    report.set_body(&json!({
        "curve": curve_body(&built),
        "deg_c": f.deg_c(),
        "deg_a": f.deg_a(),
        "deg_psi": f.deg_psi(),
        "k_int": f.k_int(),
        "l_int": f.l_int(),
        "orientable": f.orientable(),
        "min_phase_speed": f.min_phase_speed(),
        "residual": residual,
        "entropies": tables,
    }));
    files.extend(report.write(&a.out, "factorize")?);
    let summary = format!(
        "deg_c = {:?}, deg_a = {:?}, deg Ψ = {:?}, residual {:.2e}, {} entropy tables",
        f.deg_c(),
        f.deg_a(),
        f.deg_psi(),
        worst,
        entropies.len()
    );
    Ok(Outcome {
        status,
        files,
        summary,
    })
}

fn synthesize(
    curve: &CurveSpec,
    f: &Factorization,
    args: &FieldArgs,
    n: usize,
) -> Result<DirectionField, CliError> {
    let g = Grid::square(args.half_width, n, args.inner_margin)?;
    let field = match args.kind {
        FieldKind::Constant => synth_constant(&g, curve, args.theta0)?,
        FieldKind::Vortex => synth_vortex(&g, f, args.x0, args.tau)?,
        FieldKind::HalfVortex => synth_half_vortex(&g, f, args.x0)?,
        FieldKind::Fan => {
            let c = args.fan_centre;
            let r = c[0].hypot(c[1]);
            if r == 0.0 {
                return Err(CliError::Config(
                    "fan centre must differ from the origin".into(),
                ));
            }
            let xi = [-c[0] / r, -c[1] / r];
            let mid = if f.orientable() {
                f.psi_inverse_oriented(xi)?
            } else {
                f.psi_inverse(xi, 0)?
            };
            let w = args.fan_width / f.phases(mid).dphi_psi().abs();
            synth_fan(&g, f, c, (mid - w, mid + w))?
        }
    };
    Ok(field)
}

fn run_synth(a: &SynthArgs) -> Result<Outcome, CliError> {
    out_dir(&a.out)?;
    let file = a.curve.resolve()?;
    let built = file.build()?;
    let f = factorize(&built.unit_speed, 512)?;
    let hash = file.hash();
    let mut files = Vec::new();
    let mut fields = Vec::new();
    for &n in &a.grid {
        let field = synthesize(&built.unit_speed, &f, &a.field, n)?;
        let stem = if a.grid.len() == 1 {
            a.name.clone()
        } else {
            format!("{}_{n}", a.name)
        };
        let dump = FieldDump {
            field,
            curve_hash: hash.clone(),
        };
        for ext in ["csv", "bin"] {
            let p = a.out.join(format!("{stem}.{ext}"));
            dump.write(&p)?;
            files.push(p);
        }
        fields.push(json!({ "n": n, "stem": stem, "meta": dump.field.meta, "masked_cells": dump.field.masked_count() }));
    }
    let g = Grid::square(a.field.half_width, a.grid[0], a.field.inner_margin)?;
    let grid = GridInfo {
        parameter_n: Some(512),
        spatial_n: a.grid.clone(),
        bounds: Some(g.bounds),
        inner_margin: Some(g.inner_margin),
    };
    let mut report = Report::new("synth", &file, grid, &[], None);
    report.set_body(&json!({ "curve": curve_body(&built), "kind": format!("{:?}", a.field.kind), "fields": fields }));
    files.extend(report.write(&a.out, "synth")?);
    Ok(Outcome {
        status: ExitStatus::Ok,
        files,
        summary: format!("wrote {} field dumps", 2 * a.grid.len()),
    })
}

fn flux_suite(
    f: &Factorization,
    suite: SuiteKind,
    lifted: usize,
    table_n: usize,
) -> Result<Vec<Box<dyn Flux>>, CliError> {
    Ok(match suite {
        SuiteKind::Gamma => {
            let c = f.curve().clone();
            vec![
                Box::new(GammaRow {
                    curve: c.clone(),
                    row: 0,
                }),
                Box::new(GammaRow { curve: c, row: 1 }),
            ]
        }
        SuiteKind::Standard => standard_suite(f, lifted, table_n)?,
    })
}

#[derive(Serialize)]
struct LadderRow {
    n: usize,
    h: f64,
    max_normalized: f64,
    ratio_to_previous: Option<f64>,
    worst_flux: String,
    besov_seminorm: f64,
    besov_slope: Option<f64>,
    singular_index: f64,
    singular_sites: usize,
    masked_cells: usize,
}

fn run_verify(a: &VerifyArgs) -> Result<Outcome, CliError> {
    out_dir(&a.out)?;
    let file = a.curve.resolve()?;
    let built = file.build()?;
    let f = factorize(&built.unit_speed, 512)?;
    let fields: Vec<DirectionField> = match &a.field {
        Some(p) => {
            let d = FieldDump::read(p)?;
            if d.curve_hash != file.hash() {
                return Err(CliError::Config(format!(
                    "{} was built from curve {}, not {}",
                    p.display(),
                    d.curve_hash,
                    file.hash()
                )));
            }
            vec![d.field]
        }
        None => a
            .grid
            .iter()
            .map(|&n| synthesize(&built.unit_speed, &f, &a.synth, n))
            .collect::<Result<_, _>>()?,
    };
    let suite = flux_suite(&f, a.suite, a.lifted, a.table_n)?;

    let mut rows: Vec<LadderRow> = Vec::new();
    let mut suites = Vec::new();
    for field in &fields {
        let g = &field.grid;
        let r = entropy_production_suite(field, &suite, &TestBank::for_grid(g))?;
        let besov = besov_seminorm(field, BESOV_P, BESOV_S)?;
        let sing = detect_singularities(field, &f, a.seed)?;
        let worst = r
            .reports
            .iter()
            .max_by(|x, y| x.max_normalized.total_cmp(&y.max_normalized))
            .map(|x| x.label.clone())
            .unwrap_or_default();
        rows.push(LadderRow {
            n: g.nx,
            h: g.hx(),
            max_normalized: r.max_normalized,
            ratio_to_previous: rows.last().map(|p| r.max_normalized / p.max_normalized),
            worst_flux: worst,
            besov_seminorm: besov.seminorm,
            besov_slope: besov.fit.map(|l| l.slope),
            singular_index: sing.total_index,
            singular_sites: sing.sites.len(),
            masked_cells: field.masked_count(),
        });
        suites.push(json!({ "n": g.nx, "suite": r, "besov": besov, "singularities": sing }));
    }

    let mut files = Vec::new();
    let ladder_path = a.out.join("ladder.csv");
    write_table(
        &ladder_path,
        &[
            "n",
            "h",
            "max_normalized",
            "ratio_to_previous",
            "worst_flux",
            "besov_seminorm",
            "besov_slope",
            "singular_index",
            "singular_sites",
            "masked_cells",
        ],
        &rows,
    )?;
    files.push(ladder_path);

    let commutator = match &a.eps_ladder {
        Some(eps) => {
            let finest = fields
                .iter()
                .max_by_key(|f| f.grid.nx)
                .expect("at least one field");
            let rep = commutator_experiment(finest, &built.unit_speed, eps, COMMUTATOR)?;
            let path = a.out.join("commutator.csv");
            write_table(
                &path,
                &[
                    "epsilon",
                    "r2_bound",
                    "commutator1",
                    "commutator2",
                    "proxy1",
                    "proxy2",
                ],
                rep.rungs.iter().map(|r| {
                    (
                        r.epsilon,
                        r.r2_bound,
                        r.commutator[0],
                        r.commutator[1],
                        r.proxy[0],
                        r.proxy[1],
                    )
                }),
            )?;
            files.push(path);
            Some(rep)
        }
        None => None,
    };

    let finest = rows.iter().max_by_key(|r| r.n).expect("at least one field");
    let status = if finest.max_normalized <= a.tol {
        ExitStatus::Ok
    } else {
        ExitStatus::ThresholdExceeded
    };
    let g0 = &fields[0].grid;
    let grid = GridInfo {
        parameter_n: Some(512),
        spatial_n: fields.iter().map(|f| f.grid.nx).collect(),
        bounds: Some(g0.bounds),
        inner_margin: Some(g0.inner_margin),
    };
    let mut report = Report::new("verify", &file, grid, &[("residual", a.tol)], Some(a.seed));
    report.set_status(status);
    report.set_body(&json!({
        "curve": curve_body(&built),
        "source": if a.field.is_some() { "dump".to_string() } else { format!("{:?}", a.synth.kind) },
        "suite": format!("{:?}", a.suite),
        "fluxes": suite.iter().map(|f| f.label()).collect::<Vec<_>>(),
        "ladder": rows,
        "details": suites,
        "commutator": commutator,
    }));
    files.extend(report.write(&a.out, "verify")?);
    let summary = format!(
        "finest residual {:.3e} at n = {} (tol {:.1e})",
        finest.max_normalized, finest.n, a.tol
    );
    Ok(Outcome {
        status,
        files,
        summary,
    })
}

/// Seed of the openness scan as a trigonometric curve with `det γ' ≡ 0`.
fn trig_seed(file: &CurveFile) -> Result<(Vec<(i32, Complex64)>, i32), CliError> {
    let p = &file.params;
    match file.family {
        FamilyName::GammaK => {
            let k =
                p.k.ok_or_else(|| CliError::Config("family gamma_k needs params.k".into()))?;
            Ok((vec![(1, Complex64::new(0.0, 0.5))], k as i32))
        }
        FamilyName::TrigPoly => {
            let t = p
                .tangent
                .as_deref()
                .ok_or_else(|| CliError::Config("family trig_poly needs params.tangent".into()))?;
            Ok((
                t.iter()
                    .map(|&(n, re, im)| (n, Complex64::new(re, im)))
                    .collect(),
                p.twist.unwrap_or(1),
            ))
        }
        _ => Err(CliError::Config(
            "scan-open needs a gamma_k or trig_poly seed".into(),
        )),
    }
}

#[derive(Serialize)]
struct OpenSample {
    index: usize,
    sup_d2_perturbation: f64,
    c_hat: f64,
    ratio: f64,
    max_abs_det_d1: f64,
    passed: bool,
}

fn run_scan_open(a: &ScanOpenArgs) -> Result<Outcome, CliError> {
    out_dir(&a.out)?;
    let file = a.curve.resolve()?;
    let (tangent, twist) = trig_seed(&file)?;
    let seed = make_trig_poly(TrigPolyCurve::nowhere_elliptic(&tangent, twist)?);
    if !seed.is_unit_speed() {
        return Err(CliError::Config("scan-open needs a unit-speed seed".into()));
    }
    let cert = certify(&seed, a.grid)?;
    let o = openness_radius(&seed, &cert)?;
    let modes: Vec<i32> = a
        .modes
        .iter()
        .copied()
        .filter(|&m| m != 0 && m != -twist)
        .collect();
    if modes.is_empty() {
        return Err(CliError::Config("no admissible perturbation modes".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let probe = seed.grid(4 * a.grid);
    let mut samples = Vec::with_capacity(a.samples);
    for index in 0..a.samples {
        let extra: Vec<(i32, Complex64)> = modes
            .iter()
            .map(|&m| {
                (
                    m,
                    Complex64::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(0.0..TAU)),
                )
            })
            .collect();
        let dir = make_trig_poly(TrigPolyCurve::nowhere_elliptic(&extra, twist)?);
        let sup = probe
            .iter()
            .map(|&t| dir.jet(t).d2.norm())
            .fold(0.0, f64::max);
        let scale = o.delta * rng.gen_range(0.05..0.999) / sup;
        let mut pert = tangent.clone();
        pert.extend(extra.iter().map(|&(m, z)| (m, z * scale)));
        let c = make_trig_poly(TrigPolyCurve::nowhere_elliptic(&pert, twist)?);
        let s = scan_rank_one_native(&c, a.grid)?;
        let det1 = probe
            .iter()
            .map(|&t| c.jet(t).d1.det().abs())
            .fold(0.0, f64::max);
        let passed = s.c_hat >= 0.25 * o.kappa_bar && det1 < 1e-12;
        samples.push(OpenSample {
            index,
            sup_d2_perturbation: sup * scale,
            c_hat: s.c_hat,
            ratio: s.c_hat / o.kappa_bar,
            max_abs_det_d1: det1,
            passed,
        });
    }
    let failures = samples.iter().filter(|s| !s.passed).count();
    let min_ratio = samples
        .iter()
        .map(|s| s.ratio)
        .fold(f64::INFINITY, f64::min);
    let status = if failures == 0 {
        ExitStatus::Ok
    } else {
        ExitStatus::CertificationFailed
    };

    let mut files = Vec::new();
    let path = a.out.join("scan_open.csv");
    write_table(
        &path,
        &[
            "index",
            "sup_d2_perturbation",
            "c_hat",
            "ratio",
            "max_abs_det_d1",
            "passed",
        ],
        &samples,
    )?;
    files.push(path);
    let grid = GridInfo {
        parameter_n: Some(a.grid),
        ..Default::default()
    };
    let mut report = Report::new(
        "scan-open",
        &file,
        grid,
        &[("ratio_floor", 0.25), ("det_d1", 1e-12)],
        Some(a.seed),
    );
    report.set_status(status);
    report.set_body(&json!({
        "seed_certificate": cert,
        "openness": o,
        "modes": modes,
        "samples": a.samples,
        "failures": failures,
        "min_ratio": min_ratio,
    }));
    files.extend(report.write(&a.out, "scan_open")?);
    let summary = format!(
        "δ = {:.4e}, κ̄ = {:.6}, {failures}/{} perturbations failed, min c_hat/κ̄ = {min_ratio:.3}",
        o.delta, o.kappa_bar, a.samples
    );
    Ok(Outcome {
        status,
        files,
        summary,
    })
}
