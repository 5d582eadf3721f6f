//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::curvefile::CurveFile;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "diffinc",
    version,
    about = "Certify matrix curves, build entropies and verify direction fields"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ellipticity class, rank-one scan and openness radius of a curve.
    Certify(CertifyArgs),
    /// Rank-one factorization of the tangent and entropy tables.
    Factorize(FactorizeArgs),
    /// Synthesize an exact solution field and dump it.
    Synth(SynthArgs),
    /// Weak residuals, Besov norms and singularities of fields.
    Verify(VerifyArgs),
    /// Monte Carlo check of the openness radius around a certified seed.
    ScanOpen(ScanOpenArgs),
}

/// Curve selection: a JSON file, `--k` for the winding family or `--q` for the Burgers family.
#[derive(Clone, Debug, Args)]
pub struct CurveArgs {
    #[arg(long, value_name = "FILE", conflicts_with_all = ["k", "q"])]
    pub curve: Option<PathBuf>,
    #[arg(long, conflicts_with = "q")]
    pub k: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<f64>,
    #[arg(long, requires = "q")]
    pub vmax: Option<f64>,
}

impl CurveArgs {
    pub fn resolve(&self) -> Result<CurveFile, CliError> {
        match (&self.curve, self.k, self.q) {
            (Some(p), _, _) => CurveFile::read(p),
            (None, Some(k), _) => Ok(CurveFile::gamma_k(k)),
            (None, None, Some(q)) => Ok(CurveFile::burgers(q, self.vmax.unwrap_or(1.0))),
            (None, None, None) => Err(CliError::Config(
                "select a curve with --curve, --k or --q".into(),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FieldKind {
    Constant,
    Vortex,
    HalfVortex,
    Fan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SuiteKind {
    /// The two rows of the curve entropy.
    Gamma,
    /// Gamma rows, the special pair and lifted eikonal entropies.
    Standard,
}

/// Parameters of a synthesized field.
#[derive(Clone, Debug, Args)]
pub struct FieldArgs {
    #[arg(long, value_enum, default_value = "vortex")]
    pub kind: FieldKind,
    /// Half width of the square domain.
    #[arg(long, default_value_t = 1.0)]
    pub half_width: f64,
    #[arg(long, default_value_t = 0.25)]
    pub inner_margin: f64,
    /// Vortex centre `x,y`.
    #[arg(long, value_parser = parse_point, default_value = "0,0", allow_hyphen_values = true)]
    pub x0: [f64; 2],
    /// Vortex orientation, `1` or `-1`.
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    pub tau: i8,
    /// Curve parameter of a constant field.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta0: f64,
    /// Fan centre `x,y`, outside the domain.
    #[arg(long, value_parser = parse_point, default_value = "0,-4", allow_hyphen_values = true)]
    pub fan_centre: [f64; 2],
    /// Angular half width of the fan.
    #[arg(long, default_value_t = 0.6)]
    pub fan_width: f64,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    /// Parameter samples of the scan.
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    /// Degeneracy tolerance on `min |det γ''|`.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FactorizeArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    #[arg(long, value_enum, default_value = "gamma")]
    pub suite: SuiteKind,
    /// Lifted entropies in the standard suite.
    #[arg(long, default_value_t = 10)]
    pub lifted: usize,
    /// Nodes of each entropy table.
    #[arg(long, default_value_t = 4096)]
    pub table_n: usize,
    /// Bound on the factorization residual.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    #[command(flatten)]
    pub field: FieldArgs,
    /// Cells per axis; a comma-separated list writes one dump per size.
    #[arg(long, value_delimiter = ',', default_value = "128")]
    pub grid: Vec<usize>,
    /// File stem of the dumps.
    #[arg(long, default_value = "field")]
    pub name: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    /// Field dump (`.csv` or binary); otherwise fields are synthesized per grid size.
    #[arg(long, value_name = "FILE")]
    pub field: Option<PathBuf>,
    #[command(flatten)]
    pub synth: FieldArgs,
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    pub grid: Vec<usize>,
    #[arg(long, value_enum, default_value = "gamma")]
    pub suite: SuiteKind,
    #[arg(long, default_value_t = 10)]
    pub lifted: usize,
    #[arg(long, default_value_t = 4096)]
    pub table_n: usize,
    /// Mollification radii for the commutator experiment, e.g. `0.2,0.14,0.1,0.07,0.05`.
    #[arg(long, value_delimiter = ',')]
    pub eps_ladder: Option<Vec<f64>>,
    /// Bound on the normalized residual at the finest grid.
    #[arg(long, default_value_t = 1e-2)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScanOpenArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Tangent modes of the perturbations.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "2,3,-2,-3",
        allow_hyphen_values = true
    )]
    pub modes: Vec<i32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Parses `x,y`.
pub fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad coordinate {p:?}"))
        })
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected x,y, got {s:?}"))
}
