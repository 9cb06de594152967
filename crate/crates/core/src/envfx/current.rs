//! Current velocity fields, world frame, m/s.
//!
//! Grid file layout: one line of JSON header terminated by `\n`, followed by
//! `nx * ny * nz` little-endian f32 triplets. Node (i, j, k) sits at
//! `origin + cell_size * (i, j, k)` and is stored at index `(i * ny + j) * nz + k`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::geom::Vec3;

pub const GRID_FORMAT: &str = "mariner-current-grid";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurrentField {
    Constant { velocity: [f64; 3] },
    /// `surface_velocity * exp(-z / decay_depth)` below the surface.
    AnalyticShear { surface_velocity: [f64; 3], decay_depth: f64 },
    Grid(CurrentGrid),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurrentGrid {
    pub origin: [f64; 3],
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub values: Vec<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridHeader {
    format: String,
    version: u32,
    origin: [f64; 3],
    cell_size: f64,
    nx: usize,
    ny: usize,
    nz: usize,
}

impl CurrentGrid {
    pub fn from_fn(origin: [f64; 3], cell_size: f64, dims: [usize; 3], f: impl Fn(Vec3) -> Vec3) -> Self {
        let [nx, ny, nz] = dims;
        let mut values = Vec::with_capacity(nx * ny * nz);
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    let p = Vec3::from(origin) + Vec3::new(i as f64, j as f64, k as f64) * cell_size;
                    values.push(f(p).into());
                }
            }
        }
        Self { origin, cell_size, nx, ny, nz, values }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.cell_size > 0.0) {
            return Err(EnvError::InvalidGrid(format!("cell_size must be positive, got {}", self.cell_size)));
        }
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(EnvError::InvalidGrid("dimensions must be at least 1".into()));
        }
        if self.values.len() != self.nx * self.ny * self.nz {
            return Err(EnvError::InvalidGrid(format!(
                "expected {} vectors, found {}",
                self.nx * self.ny * self.nz,
                self.values.len()
            )));
        }
        if self.values.iter().flatten().any(|v| !v.is_finite()) || self.origin.iter().any(|v| !v.is_finite()) {
            return Err(EnvError::NonFinite);
        }
        Ok(())
    }

    fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::from(self.values[(i * self.ny + j) * self.nz + k])
    }

    /// Trilinear interpolation, clamped to the grid edge outside.
    pub fn sample(&self, p: &Vec3) -> Vec3 {
        let axis = |x: f64, o: f64, n: usize| -> (usize, usize, f64) {
            if n == 1 {
                return (0, 0, 0.0);
            }
            let g = ((x - o) / self.cell_size).clamp(0.0, (n - 1) as f64);
            let i = (g.floor() as usize).min(n - 2);
            (i, i + 1, g - i as f64)
        };
        let (i0, i1, fx) = axis(p.x, self.origin[0], self.nx);
        let (j0, j1, fy) = axis(p.y, self.origin[1], self.ny);
        let (k0, k1, fz) = axis(p.z, self.origin[2], self.nz);
        let lerp = |a: Vec3, b: Vec3, t: f64| if t == 0.0 { a } else { a + (b - a) * t };
        let c00 = lerp(self.node(i0, j0, k0), self.node(i1, j0, k0), fx);
        let c10 = lerp(self.node(i0, j1, k0), self.node(i1, j1, k0), fx);
        let c01 = lerp(self.node(i0, j0, k1), self.node(i1, j0, k1), fx);
        let c11 = lerp(self.node(i0, j1, k1), self.node(i1, j1, k1), fx);
        lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz)
    }
}

impl CurrentField {
    pub fn sample(&self, position: &Vec3, _t: f64) -> Vec3 {
        match self {
            CurrentField::Constant { velocity } => Vec3::from(*velocity),
            CurrentField::AnalyticShear { surface_velocity, decay_depth } => {
                Vec3::from(*surface_velocity) * (-position.z.max(0.0) / decay_depth).exp()
            }
            CurrentField::Grid(g) => g.sample(position),
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        match self {
            CurrentField::Constant { velocity } if velocity.iter().all(|v| v.is_finite()) => Ok(()),
            CurrentField::Constant { .. } => Err(EnvError::NonFinite),
            CurrentField::AnalyticShear { surface_velocity, decay_depth } => {
                if !surface_velocity.iter().all(|v| v.is_finite()) {
                    return Err(EnvError::NonFinite);
                }
                if !(*decay_depth > 0.0) {
                    return Err(EnvError::InvalidGrid("decay_depth must be positive".into()));
                }
                Ok(())
            }
            CurrentField::Grid(g) => g.validate(),
        }
    }
}

pub fn write_current_grid(path: &Path, grid: &CurrentGrid) -> Result<(), EnvError> {
    grid.validate()?;
    let header = GridHeader {
        format: GRID_FORMAT.into(),
        version: 1,
        origin: grid.origin,
        cell_size: grid.cell_size,
        nx: grid.nx,
        ny: grid.ny,
        nz: grid.nz,
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    for v in grid.values.iter().flatten() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

pub fn read_current_grid(path: &Path) -> Result<CurrentGrid, EnvError> {
    let bytes = std::fs::read(path)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| EnvError::InvalidGrid("missing header line".into()))?;
    let header: GridHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| EnvError::InvalidGrid(format!("header: {e}")))?;
    if header.format != GRID_FORMAT || header.version != 1 {
        return Err(EnvError::InvalidGrid(format!("unsupported format {} v{}", header.format, header.version)));
    }
    let body = &bytes[nl + 1..];
    let n = header.nx * header.ny * header.nz;
    if body.len() != n * 12 {
        return Err(EnvError::InvalidGrid(format!("expected {} data bytes, found {}", n * 12, body.len())));
    }
    let floats: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let grid = CurrentGrid {
        origin: header.origin,
        cell_size: header.cell_size,
        nx: header.nx,
        ny: header.ny,
        nz: header.nz,
        values: floats.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
    };
    grid.validate()?;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> CurrentGrid {
        CurrentGrid::from_fn([0.0, 0.0, 0.0], 2.0, [5, 4, 3], |p| Vec3::new(0.1 * p.x, 0.0, 0.0))
    }

    #[test]
    fn constant_everywhere() {
        let f = CurrentField::Constant { velocity: [0.3, 0.0, 0.0] };
        for (p, t) in [(Vec3::zeros(), 0.0), (Vec3::new(-50.0, 3.0, 200.0), 1e4)] {
            assert_eq!(f.sample(&p, t), Vec3::new(0.3, 0.0, 0.0));
        }
    }

    #[test]
    fn grid_nodes_exact() {
        let g = CurrentGrid::from_fn([1.0, -2.0, 0.5], 0.5, [3, 3, 3], |p| Vec3::new(p.x * p.y, p.z.sin(), 7.0));
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let p = Vec3::new(1.0 + 0.5 * i as f64, -2.0 + 0.5 * j as f64, 0.5 + 0.5 * k as f64);
                    assert_eq!(g.sample(&p), g.node(i, j, k));
                }
            }
        }
    }

    #[test]
    fn affine_mid_cell() {
        let g = linear();
        let p = Vec3::new(3.0, 1.0, 1.0);
        assert!((g.sample(&p).x - 0.3).abs() < 1e-12);
    }

    #[test]
    fn clamps_outside() {
        let g = linear();
        assert!((g.sample(&Vec3::new(-10.0, 1.0, 1.0)).x).abs() < 1e-15);
        assert!((g.sample(&Vec3::new(100.0, 1.0, 1.0)).x - 0.8).abs() < 1e-12);
    }

    #[test]
    fn shear_decays() {
        let f = CurrentField::AnalyticShear { surface_velocity: [0.0, 0.4, 0.0], decay_depth: 10.0 };
        assert_eq!(f.sample(&Vec3::zeros(), 0.0).y, 0.4);
        assert!((f.sample(&Vec3::new(0.0, 0.0, 10.0), 0.0).y - 0.4 / std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.grid");
        let g = linear();
        write_current_grid(&path, &g).unwrap();
        let back = read_current_grid(&path).unwrap();
        assert_eq!((back.nx, back.ny, back.nz), (5, 4, 3));
        for (a, b) in g.values.iter().zip(&back.values) {
            assert!((a[0] - b[0]).abs() < 1e-6);
        }
        std::fs::write(&path, b"{}\n").unwrap();
        assert!(read_current_grid(&path).is_err());
    }
}
