//! Snapshot files and CSV output.
//!
//! A snapshot holds one field: a 64-byte ASCII header
//! `"<nx> <ny> <L> <t> <name>"`, space padded and ending in `\n`, followed by
//! `nx * ny` little-endian `f64` values in row-major order (x fastest).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

pub const HEADER_LEN: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub nx: usize,
    pub ny: usize,
    pub half_width: f64,
    pub t: f64,
    pub name: String,
}

fn encode_header(h: &SnapshotHeader) -> Result<[u8; HEADER_LEN]> {
    if h.name.is_empty() || h.name.contains(char::is_whitespace) {
        return Err(Error::InvalidParam {
            name: "field name",
            reason: format!("{:?} must be a single non-empty token", h.name),
        });
    }
    let text = format!("{} {} {:e} {:e} {}", h.nx, h.ny, h.half_width, h.t, h.name);
    if text.len() > HEADER_LEN - 1 {
        return Err(Error::InvalidParam {
            name: "field name",
            reason: format!("header {text:?} longer than {} bytes", HEADER_LEN - 1),
        });
    }
    let mut buf = [b' '; HEADER_LEN];
    buf[..text.len()].copy_from_slice(text.as_bytes());
    buf[HEADER_LEN - 1] = b'\n';
    Ok(buf)
}

fn decode_header(buf: &[u8]) -> Result<SnapshotHeader> {
    let bad = |why: &str| Error::Config(format!("malformed snapshot header: {why}"));
    let text = std::str::from_utf8(buf).map_err(|_| bad("not ASCII"))?;
    let parts: Vec<&str> = text.split_whitespace().collect();
    if parts.len() != 5 {
        return Err(bad("expected 5 tokens"));
    }
    Ok(SnapshotHeader {
        nx: parts[0].parse().map_err(|_| bad("nx"))?,
        ny: parts[1].parse().map_err(|_| bad("ny"))?,
        half_width: parts[2].parse().map_err(|_| bad("L"))?,
        t: parts[3].parse().map_err(|_| bad("t"))?,
        name: parts[4].to_string(),
    })
}

pub fn write_snapshot(path: &Path, grid: &Grid, t: f64, name: &str, field: &Field) -> Result<()> {
    let header = encode_header(&SnapshotHeader {
        nx: grid.nx,
        ny: grid.ny,
        half_width: grid.half_width,
        t,
        name: name.to_string(),
    })?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&header)?;
    for v in &field.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, Field)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::Config(format!("{} is too short for a snapshot", path.display())));
    }
    let header = decode_header(&bytes[..HEADER_LEN])?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != header.nx * header.ny * 8 {
        return Err(Error::Config(format!(
            "{}: expected {} values, found {} bytes",
            path.display(),
            header.nx * header.ny,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let field = Field {
        nx: header.nx,
        ny: header.ny,
        data,
    };
    Ok((header, field))
}

/// Line-oriented CSV file with a fixed header row.
pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &str) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{header}")?;
        Ok(Self { out })
    }

    pub fn row(&mut self, line: &str) -> Result<()> {
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
