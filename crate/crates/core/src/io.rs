//! On-disk formats: `HXC1` binary cubes and plain numeric CSV grids.
//!
//! `HXC1` layout (all integers little-endian):
//!
//! | offset | size | field                           |
//! |--------|------|---------------------------------|
//! | 0      | 4    | magic `b"HXC1"`                 |
//! | 4      | 4    | height (u32)                    |
//! | 8      | 4    | width (u32)                     |
//! | 12     | 4    | bands (u32)                     |
//! | 16     | 1    | dtype (0 = f32, 1 = f64)        |
//! | 17     | ...  | samples, band-major, LE         |

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::cube::{Cube, Image, Matrix};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"HXC1";
pub const HEADER_LEN: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 0,
    F64 = 1,
}

impl Dtype {
    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::F64),
            other => Err(Error::UnknownDtype(other)),
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

pub fn encode_cube(cube: &Cube, dtype: Dtype) -> Vec<u8> {
    let (h, w, b) = cube.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + cube.data().len() * dtype.size());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(b as u32).to_le_bytes());
    out.push(dtype as u8);
    match dtype {
        Dtype::F32 => {
            for &v in cube.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Dtype::F64 => {
            for &v in cube.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_cube(bytes: &[u8]) -> Result<Cube> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&bytes[..4]);
    if magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let read_u32 = |at: usize| {
        let mut b = [0u8; 4];
        b.copy_from_slice(&bytes[at..at + 4]);
        u32::from_le_bytes(b) as usize
    };
    let (height, width, bands) = (read_u32(4), read_u32(8), read_u32(12));
    let dtype = Dtype::from_code(bytes[16])?;
    if height == 0 || width == 0 || bands == 0 {
        return Err(Error::ZeroDimension {
            height,
            width,
            bands,
        });
    }
    let count = height * width * bands;
    let payload = &bytes[HEADER_LEN..];
    let expected = count * dtype.size();
    if payload.len() != expected {
        return Err(Error::Truncated {
            expected: HEADER_LEN + expected,
            found: bytes.len(),
        });
    }
    let data: Vec<f64> = match dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect(),
    };
    Cube::new(height, width, bands, data)
}

pub fn read_cube(path: impl AsRef<Path>) -> Result<Cube> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cube(&bytes)
}

pub fn write_cube(cube: &Cube, path: impl AsRef<Path>, dtype: Dtype) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_cube(cube, dtype)).map_err(|e| Error::io(path, e))
}

/// Parses a comma-separated numeric grid. Blank lines are ignored.
pub fn parse_csv_grid(text: &str) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut data = Vec::new();
    let mut rows = 0;
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::CsvParse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::RaggedRows {
                    line,
                    expected: w,
                    found: record.len(),
                })
            }
            _ => {}
        }
        for field in record.iter() {
            data.push(field.parse::<f64>().map_err(|e| Error::CsvParse {
                line,
                message: format!("{e}: {field:?}"),
            })?);
        }
        rows += 1;
    }
    let cols = width.ok_or(Error::CsvParse {
        line: 0,
        message: "empty file".into(),
    })?;
    Ok(Matrix { rows, cols, data })
}

pub fn format_csv_grid(rows: usize, cols: usize, data: &[f64]) -> String {
    let mut s = String::new();
    for r in 0..rows {
        let line: Vec<String> = data[r * cols..(r + 1) * cols]
            .iter()
            .map(|v| format!("{v:e}"))
            .collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn read_csv_grid(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv_grid(&text)
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes one band as CSV, one line per image row. Debugging aid.
pub fn write_band_csv(cube: &Cube, band: usize, path: impl AsRef<Path>) -> Result<()> {
    if band >= cube.bands() {
        return Err(Error::DimensionMismatch(format!(
            "band {band} out of range for {} bands",
            cube.bands()
        )));
    }
    write_text(
        path,
        &format_csv_grid(cube.height(), cube.width(), cube.band(band)),
    )
}

pub fn read_band_csv(path: impl AsRef<Path>) -> Result<Image> {
    let m = read_csv_grid(path)?;
    Image::new(m.rows, m.cols, m.data)
}
