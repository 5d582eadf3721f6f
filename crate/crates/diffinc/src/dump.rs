//! Direction-field dumps in CSV and binary form.
//!
//! CSV: `#`-prefixed `key=value` header lines, then a table with columns
//! `i,j,x,y,theta,masked`, row-major (`i` fastest).
//!
//! Binary, little endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `DIFFINC\0` |
//! | 4 | format version (u32) |
//! | 4, 4 | `nx`, `ny` (u32) |
//! | 32 | bounds `x0, x1, y0, y1` (f64) |
//! | 8 | inner margin (f64) |
//! | 4 | domain kind (u32, 0 loop, 1 arc) |
//! | 16 | arc endpoints `a, b` (f64, zero for loops) |
//! | 32 | curve hash (raw SHA-256) |
//! | 8·nx·ny | `θ` per cell (f64) |
//! | ⌈nx·ny/8⌉ | mask bitmap, least significant bit first |

use std::fmt::Write as _;
use std::path::Path;

use diffinc_core::curve::Domain;
use diffinc_core::field::{DirectionField, FieldMeta, Grid};

use crate::CliError;

pub const MAGIC: &[u8; 8] = b"DIFFINC\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 32 + 8 + 4 + 16 + 32;

/// A field together with the hash of the curve it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub field: DirectionField,
    pub curve_hash: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DumpFormat {
    Csv,
    Binary,
}

impl DumpFormat {
    /// `.csv` is CSV, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => DumpFormat::Csv,
            _ => DumpFormat::Binary,
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Format(msg.into())
}

fn domain_text(d: Domain) -> String {
    match d {
        Domain::ClosedLoop => "closed_loop".into(),
        Domain::Arc { a, b } => format!("arc,{a:?},{b:?}"),
    }
}

fn parse_domain(s: &str) -> Result<Domain, CliError> {
    if s == "closed_loop" {
        return Ok(Domain::ClosedLoop);
    }
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        ["arc", a, b] => Ok(Domain::Arc {
            a: parse_f64(a)?,
            b: parse_f64(b)?,
        }),
        _ => Err(bad(format!("unknown domain {s:?}"))),
    }
}

fn parse_f64(s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| bad(format!("not a number: {s:?}")))
}

fn parse_usize(s: &str) -> Result<usize, CliError> {
    s.trim()
        .parse()
        .map_err(|_| bad(format!("not a count: {s:?}")))
}

fn hash_bytes(hex: &str) -> Result<[u8; 32], CliError> {
    let mut out = [0u8; 32];
    if hex.len() != 64 {
        return Err(bad("curve hash must be 64 hex digits"));
    }
    for (i, b) in out.iter_mut().enumerate() {
        *b = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
            .map_err(|_| bad("curve hash is not hex"))?;
    }
    Ok(out)
}

impl FieldDump {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let bytes = match DumpFormat::from_path(path) {
            DumpFormat::Csv => self.to_csv()?.into_bytes(),
            DumpFormat::Binary => self.to_binary()?,
        };
        std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        match DumpFormat::from_path(path) {
            DumpFormat::Csv => Self::from_csv(
                std::str::from_utf8(&bytes).map_err(|_| bad("CSV dump is not UTF-8"))?,
            ),
            DumpFormat::Binary => Self::from_binary(&bytes),
        }
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let f = &self.field;
        let g = &f.grid;
        let [x0, x1, y0, y1] = g.bounds;
        let mut out = String::new();
        let _ = writeln!(out, "# diffinc field v{FORMAT_VERSION}");
        let _ = writeln!(out, "# nx={}", g.nx);
        let _ = writeln!(out, "# ny={}", g.ny);
        let _ = writeln!(out, "# bounds={x0:?},{x1:?},{y0:?},{y1:?}");
        let _ = writeln!(out, "# inner_margin={:?}", g.inner_margin);
        let _ = writeln!(out, "# domain={}", domain_text(f.domain));
        let _ = writeln!(out, "# curve_hash={}", self.curve_hash);
        let _ = writeln!(out, "# tag={}", f.meta.tag);
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |source| CliError::Csv {
            path: "<csv>".into(),
            source,
        };
        w.write_record(["i", "j", "x", "y", "theta", "masked"])
            .map_err(csv_err)?;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.index(i, j);
                let [x, y] = g.centre(i, j);
                w.serialize((i, j, x, y, f.theta[k], u8::from(f.mask[k])))
                    .map_err(csv_err)?;
            }
        }
        let body = w.into_inner().map_err(|e| bad(e.to_string()))?;
        out.push_str(&String::from_utf8(body).expect("csv output is UTF-8"));
        Ok(out)
    }

    pub fn from_csv(text: &str) -> Result<Self, CliError> {
        let mut header = std::collections::BTreeMap::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            if let Some((k, v)) = line.trim_start_matches('#').trim().split_once('=') {
                header.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |k: &str| {
            header
                .get(k)
                .map(String::as_str)
                .ok_or_else(|| bad(format!("CSV dump header lacks {k}")))
        };
        let (nx, ny) = (parse_usize(get("nx")?)?, parse_usize(get("ny")?)?);
        let b: Vec<f64> = get("bounds")?
            .split(',')
            .map(parse_f64)
            .collect::<Result<_, _>>()?;
        let bounds: [f64; 4] = b.try_into().map_err(|_| bad("bounds needs four values"))?;
        let grid = Grid::new(bounds, nx, ny, parse_f64(get("inner_margin")?)?)?;
        let domain = parse_domain(get("domain")?)?;
        let curve_hash = get("curve_hash")?.to_string();
        let tag = header.get("tag").cloned().unwrap_or_else(|| "dump".into());

        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut theta = vec![f64::NAN; grid.len()];
        let mut mask = vec![true; grid.len()];
        let mut seen = vec![false; grid.len()];
        for rec in r.deserialize::<(usize, usize, f64, f64, f64, u8)>() {
            let (i, j, _, _, t, m) = rec.map_err(|source| CliError::Csv {
                path: "<csv>".into(),
                source,
            })?;
            if i >= nx || j >= ny {
                return Err(bad(format!("cell ({i}, {j}) outside the {nx}x{ny} grid")));
            }
            let k = grid.index(i, j);
            theta[k] = t;
            mask[k] = m != 0;
            seen[k] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(bad("CSV dump does not cover every cell"));
        }
        let field = DirectionField::from_parts(grid, domain, theta, mask, FieldMeta::tagged(&tag))?;
        Ok(FieldDump { field, curve_hash })
    }

    pub fn to_binary(&self) -> Result<Vec<u8>, CliError> {
        let f = &self.field;
        let g = &f.grid;
        let n = g.len();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * n + n.div_ceil(8));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for d in [g.nx, g.ny] {
            out.extend_from_slice(
                &u32::try_from(d)
                    .map_err(|_| bad("grid too large"))?
                    .to_le_bytes(),
            );
        }
        for v in g.bounds.iter().chain([&g.inner_margin]) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let (kind, a, b) = match f.domain {
            Domain::ClosedLoop => (0u32, 0.0, 0.0),
            Domain::Arc { a, b } => (1, a, b),
        };
        out.extend_from_slice(&kind.to_le_bytes());
        out.extend_from_slice(&f64::to_le_bytes(a));
        out.extend_from_slice(&f64::to_le_bytes(b));
        out.extend_from_slice(&hash_bytes(&self.curve_hash)?);
        for t in &f.theta {
            out.extend_from_slice(&t.to_le_bytes());
        }
        let mut bits = vec![0u8; n.div_ceil(8)];
        for (k, &m) in f.mask.iter().enumerate() {
            if m {
                bits[k / 8] |= 1 << (k % 8);
            }
        }
        out.extend_from_slice(&bits);
        Ok(out)
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self, CliError> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(bad("not a diffinc field dump"));
        }
        let version = cur.u32()?;
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported dump version {version}")));
        }
        let (nx, ny) = (cur.u32()? as usize, cur.u32()? as usize);
        let bounds = [cur.f64()?, cur.f64()?, cur.f64()?, cur.f64()?];
        let margin = cur.f64()?;
        let domain = match (cur.u32()?, cur.f64()?, cur.f64()?) {
            (0, _, _) => Domain::ClosedLoop,
            (1, a, b) => Domain::Arc { a, b },
            (k, _, _) => return Err(bad(format!("unknown domain kind {k}"))),
        };
        let curve_hash: String = cur.take(32)?.iter().map(|b| format!("{b:02x}")).collect();
        let grid = Grid::new(bounds, nx, ny, margin)?;
        let n = grid.len();
        let theta = (0..n).map(|_| cur.f64()).collect::<Result<Vec<_>, _>>()?;
        let bits = cur.take(n.div_ceil(8))?;
        let mask = (0..n).map(|k| bits[k / 8] >> (k % 8) & 1 == 1).collect();
        if cur.pos != bytes.len() {
            return Err(bad("trailing bytes after field dump"));
        }
        let field =
            DirectionField::from_parts(grid, domain, theta, mask, FieldMeta::tagged("dump"))?;
        Ok(FieldDump { field, curve_hash })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        let s = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| bad("field dump is truncated"))?;
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}
