//! Binary map and coefficient files.
//!
//! Both formats are an ASCII magic line, `key=value` header lines, an empty
//! line, then a little-endian `f64` payload:
//!
//! ```text
//! SHTMAP1            SHTALM1
//! scheme=healpix     lmax=31
//! nside=4            mmax=31
//! npix=192
//!                    <Re a_00><Im a_00><Re a_10>...  (m-major)
//! <pixel 0><pixel 1>...  (ring order)
//! ```
//!
//! Gauss-Legendre maps carry `scheme=gauss-legendre`, `nrings` and `nphi`
//! instead of `nside`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Result, ShtError};
use crate::grid::{build_gauss_legendre_grid, build_healpix_grid, GridScheme, PixelGrid};
use crate::transforms::{AlmSet, SkyMap};

pub const MAP_MAGIC: &[u8] = b"SHTMAP1\n";
pub const ALM_MAGIC: &[u8] = b"SHTALM1\n";

/// Header lines longer than this are rejected.
const MAX_HEADER_LINE: usize = 256;
const MAX_HEADER_LINES: usize = 16;

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ShtError::Format(msg.into()))
}

/// Splits `bytes` into the header fields and the payload.
fn split_header<'a>(bytes: &'a [u8], magic: &[u8]) -> Result<(BTreeMap<String, String>, &'a [u8])> {
    let Some(mut rest) = bytes.strip_prefix(magic) else {
        return format_err("bad magic");
    };
    let mut fields = BTreeMap::new();
    for _ in 0..=MAX_HEADER_LINES {
        let Some(end) = rest.iter().take(MAX_HEADER_LINE + 1).position(|&b| b == b'\n') else {
            return format_err("unterminated or overlong header line");
        };
        let line = std::str::from_utf8(&rest[..end]).map_err(|_| ShtError::Format("header is not UTF-8".into()))?;
        rest = &rest[end + 1..];
        if line.is_empty() {
            return Ok((fields, rest));
        }
        let Some((k, v)) = line.split_once('=') else {
            return format_err(format!("header line without '=': {line:?}"));
        };
        if fields.insert(k.to_string(), v.to_string()).is_some() {
            return format_err(format!("duplicate header key {k:?}"));
        }
    }
    format_err("too many header lines")
}

fn field(fields: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    match fields.get(key) {
        Some(v) => v
            .parse()
            .map_err(|_| ShtError::Format(format!("{key}={v:?} is not a non-negative integer"))),
        None => format_err(format!("missing header key {key:?}")),
    }
}

fn read_f64s(payload: &[u8], count: usize) -> Result<Vec<f64>> {
    match count.checked_mul(8) {
        Some(n) if n == payload.len() => {}
        _ => return format_err(format!("payload has {} bytes, expected {count} values", payload.len())),
    }
    Ok(payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// Parses a map file.
pub fn decode_map(bytes: &[u8]) -> Result<SkyMap> {
    let (fields, payload) = split_header(bytes, MAP_MAGIC)?;
    let npix = field(&fields, "npix")?;
    if npix == 0 {
        return format_err("map has no pixels");
    }
    // Cheap consistency checks before any grid is built.
    if npix.checked_mul(8) != Some(payload.len()) {
        return format_err(format!("payload has {} bytes for npix={npix}", payload.len()));
    }
    let grid = match fields.get("scheme").map(String::as_str) {
        Some("healpix") => {
            let nside = field(&fields, "nside")?;
            if nside.checked_mul(nside).and_then(|v| v.checked_mul(12)) != Some(npix) {
                return format_err(format!("npix={npix} does not match nside={nside}"));
            }
            build_healpix_grid(nside)?
        }
        Some("gauss-legendre") => {
            let (nr, np) = (field(&fields, "nrings")?, field(&fields, "nphi")?);
            if nr.checked_mul(np) != Some(npix) {
                return format_err(format!("npix={npix} does not match nrings={nr}, nphi={np}"));
            }
            build_gauss_legendre_grid(nr, np)?
        }
        other => return format_err(format!("unknown scheme {other:?}")),
    };
    SkyMap::new(Arc::new(grid), read_f64s(payload, npix)?)
}

/// Serializes a map.
pub fn encode_map(map: &SkyMap) -> Vec<u8> {
    let grid: &PixelGrid = &map.grid;
    let mut out = MAP_MAGIC.to_vec();
    match grid.scheme {
        GridScheme::HealpixRing => {
            out.extend_from_slice(b"scheme=healpix\n");
            out.extend_from_slice(format!("nside={}\n", grid.nside.unwrap_or(0)).as_bytes());
        }
        GridScheme::GaussLegendre => {
            out.extend_from_slice(b"scheme=gauss-legendre\n");
            let nphi = grid.rings.first().map_or(0, |r| r.n_phi);
            out.extend_from_slice(format!("nrings={}\nnphi={nphi}\n", grid.n_rings()).as_bytes());
        }
    }
    out.extend_from_slice(format!("npix={}\n\n", grid.n_pix).as_bytes());
    for p in &map.pixels {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

/// Parses a coefficient file.
pub fn decode_alm(bytes: &[u8]) -> Result<AlmSet> {
    let (fields, payload) = split_header(bytes, ALM_MAGIC)?;
    let lmax = field(&fields, "lmax")?;
    let mmax = field(&fields, "mmax")?;
    if mmax > lmax {
        return format_err(format!("mmax={mmax} exceeds lmax={lmax}"));
    }
    // The count needs lmax < payload size before it can be formed safely.
    if lmax >= payload.len() {
        return format_err(format!("payload of {} bytes is too short for lmax={lmax}", payload.len()));
    }
    let count = AlmSet::count(lmax, mmax);
    let raw = read_f64s(payload, count.saturating_mul(2))?;
    let values = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    AlmSet::from_values(lmax, mmax, values)
}

/// Serializes coefficients.
pub fn encode_alm(alm: &AlmSet) -> Vec<u8> {
    let mut out = ALM_MAGIC.to_vec();
    out.extend_from_slice(format!("lmax={}\nmmax={}\n\n", alm.lmax(), alm.mmax()).as_bytes());
    for v in alm.values() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

pub fn read_map(path: &Path) -> Result<SkyMap> {
    decode_map(&read_file(path)?)
}

pub fn write_map(path: &Path, map: &SkyMap) -> Result<()> {
    write_file(path, &encode_map(map))
}

pub fn read_alm(path: &Path) -> Result<AlmSet> {
    decode_alm(&read_file(path)?)
}

pub fn write_alm(path: &Path, alm: &AlmSet) -> Result<()> {
    write_file(path, &encode_alm(alm))
}
