//! Esri ASCII grid subset: `ncols`, `nrows`, `xllcorner`/`xllcenter`,
//! `yllcorner`/`yllcenter`, `cellsize` and an optional `NODATA_value`, followed
//! by `nrows` lines of `ncols` depth values (metres, positive down).
//!
//! Row `i`, column `j` of the file becomes heightfield node `(i, j)`.

use std::fs;
use std::path::Path;

use super::{Heightfield, SemanticLabel, WorldError};

#[derive(Debug, Clone, PartialEq)]
pub struct AsciiGrid {
    pub ncols: usize,
    pub nrows: usize,
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
    pub nodata: Option<f64>,
    /// Row-major values, `nrows * ncols`.
    pub values: Vec<f64>,
}

impl AsciiGrid {
    pub fn into_heightfield(self, cell_size: f64, origin: [f64; 2]) -> Result<Heightfield, WorldError> {
        Heightfield::new(origin, cell_size, self.nrows, self.ncols, self.values, SemanticLabel::SEAFLOOR)
    }
}

pub fn parse_ascii_grid(text: &str) -> Result<AsciiGrid, WorldError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();

    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut cellsize = None;
    let mut nodata = None;

    while let Some((_, line)) = lines.peek() {
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default();
        if !key.starts_with(|c: char| c.is_ascii_alphabetic()) {
            break;
        }
        let value = parts
            .next()
            .ok_or_else(|| WorldError::MalformedHeader(format!("missing value for {key}")))?;
        let num: f64 = value
            .parse()
            .map_err(|_| WorldError::MalformedHeader(format!("non-numeric value for {key}: {value}")))?;
        match key.to_ascii_lowercase().as_str() {
            "ncols" => ncols = Some(num as usize),
            "nrows" => nrows = Some(num as usize),
            "xllcorner" | "xllcenter" => xll = Some(num),
            "yllcorner" | "yllcenter" => yll = Some(num),
            "cellsize" => cellsize = Some(num),
            "nodata_value" => nodata = Some(num),
            other => return Err(WorldError::MalformedHeader(format!("unknown header key {other}"))),
        }
        lines.next();
    }

    let missing = |k: &str| WorldError::MalformedHeader(format!("missing {k}"));
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let grid_header = (xll.unwrap_or(0.0), yll.unwrap_or(0.0), cellsize.ok_or_else(|| missing("cellsize"))?);

    let mut values = Vec::with_capacity(ncols * nrows);
    let mut row = 0;
    for (_, line) in lines {
        if row >= nrows {
            return Err(WorldError::MalformedRow { row, expected: 0, found: line.split_whitespace().count() });
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != ncols {
            return Err(WorldError::MalformedRow { row, expected: ncols, found: tokens.len() });
        }
        for (col, tok) in tokens.iter().enumerate() {
            let v: f64 = tok
                .parse()
                .map_err(|_| WorldError::NonNumeric { row, col, token: tok.to_string() })?;
            if v.is_nan() || nodata == Some(v) || v.is_infinite() {
                return Err(WorldError::MalformedCell { row, col });
            }
            values.push(v);
        }
        row += 1;
    }
    if row != nrows {
        return Err(WorldError::MalformedRow { row, expected: ncols, found: 0 });
    }

    Ok(AsciiGrid {
        ncols,
        nrows,
        xll: grid_header.0,
        yll: grid_header.1,
        cellsize: grid_header.2,
        nodata,
        values,
    })
}

pub fn read_ascii_grid(path: &Path) -> Result<AsciiGrid, WorldError> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => WorldError::FileNotFound(path.display().to_string()),
        _ => WorldError::Io(e),
    })?;
    parse_ascii_grid(&text)
}

/// Loads a bathymetry grid as a heightfield with the given spacing and origin.
pub fn load_bathymetry(path: &Path, cell_size: f64, origin: [f64; 2]) -> Result<Heightfield, WorldError> {
    read_ascii_grid(path)?.into_heightfield(cell_size, origin)
}

pub fn write_ascii_grid(hf: &Heightfield) -> String {
    let mut out = String::new();
    out.push_str(&format!("ncols {}\n", hf.ny()));
    out.push_str(&format!("nrows {}\n", hf.nx()));
    out.push_str(&format!("xllcorner {}\n", hf.origin()[0]));
    out.push_str(&format!("yllcorner {}\n", hf.origin()[1]));
    out.push_str(&format!("cellsize {}\n", hf.cell_size()));
    for i in 0..hf.nx() {
        let row: Vec<String> = (0..hf.ny()).map(|j| format!("{}", hf.depth(i, j))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
