//! Measure documents (TOML) and the binary grid sidecar.
//!
//! Sidecar layout: the 4-byte magic `HGRD`, then little-endian `u32`
//! version, dimension and cells per axis, then the samples as
//! little-endian `f64` in row-major order.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{HgError, Result};

use super::{Body, Measure};

const MAGIC: &[u8; 4] = b"HGRD";
const VERSION: u32 = 1;

pub fn write_grid_sidecar(path: &Path, dim: usize, cells_per_axis: usize, samples: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + 8 * samples.len());
    buf.extend_from_slice(MAGIC);
    for v in [VERSION, dim as u32, cells_per_axis as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for s in samples {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Returns `(dimension, cells_per_axis, samples)`.
pub fn read_grid_sidecar(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let buf = fs::read(path)?;
    if buf.len() < 16 || &buf[..4] != MAGIC {
        return Err(HgError::Parse(format!("{}: not a grid sidecar", path.display())));
    }
    let word = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().expect("4 bytes"));
    if word(4) != VERSION {
        return Err(HgError::Parse(format!("{}: unsupported sidecar version {}", path.display(), word(4))));
    }
    let dim = word(8) as usize;
    let cells = word(12) as usize;
    let count = cells
        .checked_pow(dim as u32)
        .ok_or_else(|| HgError::Parse("sidecar grid too large".into()))?;
    if buf.len() != 16 + 8 * count {
        return Err(HgError::Parse(format!(
            "{}: expected {count} samples, found {} bytes of data",
            path.display(),
            buf.len() - 16
        )));
    }
    let samples = buf[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((dim, cells, samples))
}

/// Parses a measure document; grid sidecars resolve relative to `base`.
pub fn parse_measure(text: &str, base: &Path) -> Result<Measure> {
    let raw: Measure = toml::from_str(text).map_err(|e| HgError::Parse(e.to_string()))?;
    let dim = raw.dimension;
    let body = resolve_sidecars(dim, raw.body, base)?;
    Measure::new(dim, body)
}

pub fn read_measure(path: &Path) -> Result<Measure> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    parse_measure(&text, &base)
}

fn resolve_sidecars(dim: usize, body: Body, base: &Path) -> Result<Body> {
    Ok(match body {
        Body::Grid(mut g) => {
            if let Some(name) = &g.sidecar {
                let (d, cells, samples) = read_grid_sidecar(&base.join(name))?;
                if d != dim || cells != g.cells_per_axis {
                    return Err(HgError::Parse(format!(
                        "sidecar {name} holds a {d}-dimensional grid with {cells} cells per axis"
                    )));
                }
                g.samples = samples;
            }
            Body::Grid(g)
        }
        Body::Restricted(mut r) => {
            let inner = resolve_sidecars(dim, r.inner.body, base)?;
            r.inner = Box::new(Measure { dimension: dim, body: inner });
            Body::Restricted(r)
        }
        Body::Sum { mut components } => {
            for c in &mut components {
                let b = std::mem::replace(&mut c.measure.body, Body::DiracComb { atoms: Vec::new() });
                c.measure.body = resolve_sidecars(dim, b, base)?;
            }
            Body::Sum { components }
        }
        other => other,
    })
}

/// Serializes a measure. Grids naming a sidecar have their samples written
/// there (relative to `base`) and omitted from the document.
pub fn measure_to_toml(mu: &Measure, base: &Path) -> Result<String> {
    let body = strip_sidecars(mu.dimension, &mu.body, base)?;
    let doc = Measure { dimension: mu.dimension, body };
    toml::to_string(&doc).map_err(|e| HgError::Parse(e.to_string()))
}

pub fn write_measure(path: &Path, mu: &Measure) -> Result<()> {
    let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    fs::write(path, measure_to_toml(mu, &base)?)?;
    Ok(())
}

fn strip_sidecars(dim: usize, body: &Body, base: &Path) -> Result<Body> {
    Ok(match body {
        Body::Grid(g) if g.sidecar.is_some() => {
            let name = g.sidecar.as_ref().expect("checked");
            write_grid_sidecar(&base.join(name), dim, g.cells_per_axis, &g.samples)?;
            let mut g = g.clone();
            g.samples = Vec::new();
            Body::Grid(g)
        }
        Body::Restricted(r) => {
            let mut r = r.clone();
            r.inner = Box::new(Measure {
                dimension: dim,
                body: strip_sidecars(dim, &r.inner.body, base)?,
            });
            Body::Restricted(r)
        }
        Body::Sum { components } => {
            let mut components = components.clone();
            for c in &mut components {
                c.measure.body = strip_sidecars(dim, &c.measure.body, base)?;
            }
            Body::Sum { components }
        }
        other => other.clone(),
    })
}
