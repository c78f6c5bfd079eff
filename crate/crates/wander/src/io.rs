//! Output files: JSON, CSV, PNG and the binary `β` grid.
//!
//! Writers take fully built values so that the bytes on disk depend only on
//! the data, never on thread scheduling.

use crate::config::SCHEMA_VERSION;
use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use wander_core::cert::Certificate;
use wander_core::geometry::ComplexGrid;
use wander_core::{c64, C64};

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Serialize `rows` to CSV bytes with a header taken from the row type.
pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| crate::error::AppError::Compute(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub schema_version: u32,
    pub suite: String,
    pub all_accepted: bool,
    pub certificates: Vec<Certificate>,
}

impl CertificateFile {
    pub fn new(suite: &str, certificates: Vec<Certificate>) -> Self {
        let all_accepted = certificates.iter().all(|c| c.accepted());
        Self { schema_version: SCHEMA_VERSION, suite: suite.into(), all_accepted, certificates }
    }
}

/// Fixed palette for the three orbit classes.
pub const PALETTE: [[u8; 3]; 3] = [[230, 85, 13], [49, 130, 189], [189, 189, 189]];

/// Write an indexed image through the fixed palette, row 0 at the top.
pub fn write_png(path: &Path, width: usize, height: usize, indices: &[u8]) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    let mut data = Vec::with_capacity(width * height * 3);
    for &i in indices {
        data.extend_from_slice(&PALETTE[i as usize]);
    }
    writer.write_image_data(&data)?;
    Ok(())
}

const GRID_MAGIC: &[u8; 8] = b"WBETA01\n";

/// Little-endian grid: magic, `nx`, `ny` as `u64`, origin and spacing as
/// `f64`, then `(re, im)` pairs row by row.
pub fn write_grid(path: &Path, g: &ComplexGrid) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(GRID_MAGIC)?;
    w.write_all(&(g.nx as u64).to_le_bytes())?;
    w.write_all(&(g.ny as u64).to_le_bytes())?;
    for x in [g.origin.re, g.origin.im, g.spacing] {
        w.write_all(&x.to_le_bytes())?;
    }
    for v in &g.samples {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid(path: &Path) -> Result<ComplexGrid> {
    let bytes = fs::read(path)?;
    let bad = || crate::error::AppError::Compute(format!("{} is not a grid file", path.display()));
    if bytes.len() < 48 || &bytes[..8] != GRID_MAGIC {
        return Err(bad());
    }
    let u = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let f = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let (nx, ny) = (u(8) as usize, u(16) as usize);
    if bytes.len() != 48 + 16 * nx * ny {
        return Err(bad());
    }
    let mut g = ComplexGrid::zeros(c64(f(24), f(32)), f(40), nx, ny)?;
    for (k, s) in g.samples.iter_mut().enumerate() {
        *s = C64::new(f(48 + 16 * k), f(56 + 16 * k));
    }
    Ok(g)
}
