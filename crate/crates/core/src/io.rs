//! Field checkpoint format.
//!
//! One line of JSON header terminated by `\n`, then `n^dim` little-endian
//! `complex64` values (an `f32` real part followed by an `f32` imaginary
//! part) in the grid's storage order.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Space, SpectralField};
use crate::grid::{Grid, GridError};

pub const FORMAT_TAG: &str = "resonance-lab-field/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub format: String,
    pub dim: usize,
    pub n: usize,
    pub box_length: f64,
    pub space: Space,
    pub dtype: String,
}

#[derive(Debug, Error)]
pub enum FieldIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("unsupported format {0:?}")]
    Format(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("payload holds {got} bytes, expected {expected}")]
    Payload { expected: usize, got: usize },
}

pub fn write_field<W: Write>(mut out: W, field: &SpectralField) -> Result<(), FieldIoError> {
    let grid = field.grid();
    let header = FieldHeader {
        format: FORMAT_TAG.to_string(),
        dim: grid.dim(),
        n: grid.n_per_axis(),
        box_length: grid.box_length(),
        space: field.space(),
        dtype: "complex64".to_string(),
    };
    let line = serde_json::to_string(&header).map_err(|e| FieldIoError::Header(e.to_string()))?;
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(8 * field.values().len());
    for v in field.values() {
        buf.extend_from_slice(&(v.re as f32).to_le_bytes());
        buf.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_field<R: Read>(input: R) -> Result<SpectralField, FieldIoError> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: FieldHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| FieldIoError::Header(e.to_string()))?;
    if header.format != FORMAT_TAG || header.dtype != "complex64" {
        return Err(FieldIoError::Format(format!("{} / {}", header.format, header.dtype)));
    }
    let grid = Grid::new(header.dim, header.n, header.box_length)?;
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    let expected = 8 * grid.len();
    if payload.len() != expected {
        return Err(FieldIoError::Payload {
            expected,
            got: payload.len(),
        });
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    Ok(SpectralField::from_values(&grid, values, header.space).expect("length checked"))
}

pub fn save_field(path: &Path, field: &SpectralField) -> Result<(), FieldIoError> {
    let file = std::fs::File::create(path)?;
    write_field(io::BufWriter::new(file), field)
}

pub fn load_field(path: &Path) -> Result<SpectralField, FieldIoError> {
    read_field(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_single_precision() {
        let g = Grid::new(2, 8, 3.0).unwrap();
        let f = SpectralField::from_physical_fn(&g, |x| Complex64::new(x[0], x[1] * x[0]));
        let mut bytes = Vec::new();
        write_field(&mut bytes, &f).unwrap();
        let back = read_field(bytes.as_slice()).unwrap();
        assert_eq!(back.space(), Space::Physical);
        assert_eq!(**back.grid(), *g);
        assert!(back.max_abs_diff(&f) < 1e-6);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let f = SpectralField::zeros(&g, Space::Frequency);
        let mut bytes = Vec::new();
        write_field(&mut bytes, &f).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(
            read_field(bytes.as_slice()),
            Err(FieldIoError::Payload { .. })
        ));
    }

    #[test]
    fn bad_header_is_rejected() {
        let bytes = b"{\"format\":\"other\",\"dim\":1,\"n\":8,\"box_length\":1.0,\"space\":\"physical\",\"dtype\":\"complex64\"}\n";
        assert!(matches!(read_field(&bytes[..]), Err(FieldIoError::Format(_))));
        assert!(matches!(read_field(&b"not json\n"[..]), Err(FieldIoError::Header(_))));
    }
}
