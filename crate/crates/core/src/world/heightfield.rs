use serde::{Deserialize, Serialize};

use super::{SemanticLabel, WorldError};
use crate::geom::Vec3;

/// Regular bathymetry grid. Node `(i, j)` sits at
/// `(origin[0] + i * cell_size, origin[1] + j * cell_size)`; `i` runs north,
/// `j` runs east. Depths are positive down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HeightfieldData", into = "HeightfieldData")]
pub struct Heightfield {
    origin: [f64; 2],
    cell_size: f64,
    nx: usize,
    ny: usize,
    depth: Vec<f64>,
    label: SemanticLabel,
    min_depth: f64,
    max_depth: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeightfieldData {
    origin: [f64; 2],
    cell_size: f64,
    nx: usize,
    ny: usize,
    depth: Vec<f64>,
    label: SemanticLabel,
}

impl TryFrom<HeightfieldData> for Heightfield {
    type Error = WorldError;

    fn try_from(d: HeightfieldData) -> Result<Self, Self::Error> {
        Heightfield::new(d.origin, d.cell_size, d.nx, d.ny, d.depth, d.label)
    }
}

impl From<Heightfield> for HeightfieldData {
    fn from(h: Heightfield) -> Self {
        Self { origin: h.origin, cell_size: h.cell_size, nx: h.nx, ny: h.ny, depth: h.depth, label: h.label }
    }
}

/// One grid cell viewed as a bilinear patch.
#[derive(Debug, Clone, Copy)]
pub struct BilinearPatch {
    pub x0: f64,
    pub y0: f64,
    pub size: f64,
    pub h00: f64,
    pub h10: f64,
    pub h01: f64,
    pub h11: f64,
}

impl BilinearPatch {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let u = (x - self.x0) / self.size;
        let v = (y - self.y0) / self.size;
        self.eval_local(u, v)
    }

    pub fn eval_local(&self, u: f64, v: f64) -> f64 {
        self.h00 * (1.0 - u) * (1.0 - v)
            + self.h10 * u * (1.0 - v)
            + self.h01 * (1.0 - u) * v
            + self.h11 * u * v
    }

    /// World-frame gradient `(dh/dx, dh/dy)`.
    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let u = (x - self.x0) / self.size;
        let v = (y - self.y0) / self.size;
        let dx = ((self.h10 - self.h00) * (1.0 - v) + (self.h11 - self.h01) * v) / self.size;
        let dy = ((self.h01 - self.h00) * (1.0 - u) + (self.h11 - self.h10) * u) / self.size;
        (dx, dy)
    }

    /// Unit normal pointing up into the water column (towards -z).
    pub fn normal(&self, x: f64, y: f64) -> Vec3 {
        let (hx, hy) = self.gradient(x, y);
        Vec3::new(hx, hy, -1.0).normalize()
    }
}

impl Heightfield {
    pub fn new(
        origin: [f64; 2],
        cell_size: f64,
        nx: usize,
        ny: usize,
        depth: Vec<f64>,
        label: SemanticLabel,
    ) -> Result<Self, WorldError> {
        if nx < 2 || ny < 2 {
            return Err(WorldError::InvalidHeightfield(format!("grid must be at least 2x2, got {nx}x{ny}")));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(WorldError::InvalidHeightfield(format!("cell_size must be positive, got {cell_size}")));
        }
        if depth.len() != nx * ny {
            return Err(WorldError::InvalidHeightfield(format!(
                "expected {} depth values, got {}",
                nx * ny,
                depth.len()
            )));
        }
        if let Some(k) = depth.iter().position(|d| !d.is_finite()) {
            return Err(WorldError::MalformedCell { row: k / ny, col: k % ny });
        }
        if !origin.iter().all(|o| o.is_finite()) {
            return Err(WorldError::InvalidHeightfield("origin must be finite".into()));
        }
        let min_depth = depth.iter().copied().fold(f64::INFINITY, f64::min);
        let max_depth = depth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { origin, cell_size, nx, ny, depth, label, min_depth, max_depth })
    }

    pub fn flat(origin: [f64; 2], cell_size: f64, nx: usize, ny: usize, depth: f64) -> Result<Self, WorldError> {
        Self::new(origin, cell_size, nx, ny, vec![depth; nx * ny], SemanticLabel::SEAFLOOR)
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn label(&self) -> SemanticLabel {
        self.label
    }

    pub fn set_label(&mut self, label: SemanticLabel) {
        self.label = label;
    }

    pub fn depths(&self) -> &[f64] {
        &self.depth
    }

    pub fn depth(&self, i: usize, j: usize) -> f64 {
        self.depth[i * self.ny + j]
    }

    pub fn node_xy(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin[0] + i as f64 * self.cell_size,
            self.origin[1] + j as f64 * self.cell_size,
        )
    }

    pub fn x_max(&self) -> f64 {
        self.origin[0] + (self.nx - 1) as f64 * self.cell_size
    }

    pub fn y_max(&self) -> f64 {
        self.origin[1] + (self.ny - 1) as f64 * self.cell_size
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.origin[0] && x <= self.x_max() && y >= self.origin[1] && y <= self.y_max()
    }

    pub fn min_depth(&self) -> f64 {
        self.min_depth
    }

    pub fn max_depth(&self) -> f64 {
        self.max_depth
    }

    pub fn patch(&self, i: usize, j: usize) -> BilinearPatch {
        let (x0, y0) = self.node_xy(i, j);
        BilinearPatch {
            x0,
            y0,
            size: self.cell_size,
            h00: self.depth(i, j),
            h10: self.depth(i + 1, j),
            h01: self.depth(i, j + 1),
            h11: self.depth(i + 1, j + 1),
        }
    }

    /// Cell containing `(x, y)`, clamped so points on the far edges map to
    /// the last cell.
    pub fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let fi = ((x - self.origin[0]) / self.cell_size).floor();
        let fj = ((y - self.origin[1]) / self.cell_size).floor();
        let i = (fi.max(0.0) as usize).min(self.nx - 2);
        let j = (fj.max(0.0) as usize).min(self.ny - 2);
        (i, j)
    }

    /// Bilinear depth at `(x, y)`; exact at grid nodes.
    pub fn height_at(&self, x: f64, y: f64) -> Result<f64, WorldError> {
        if !self.contains(x, y) {
            return Err(WorldError::OutOfBounds { x, y });
        }
        let (i, j) = self.cell_of(x, y);
        let patch = self.patch(i, j);
        let u = (x - patch.x0) / self.cell_size;
        let v = (y - patch.y0) / self.cell_size;
        // Snap so node queries reproduce stored values exactly.
        let u = if u.abs() < 1e-12 { 0.0 } else if (u - 1.0).abs() < 1e-12 { 1.0 } else { u };
        let v = if v.abs() < 1e-12 { 0.0 } else if (v - 1.0).abs() < 1e-12 { 1.0 } else { v };
        Ok(patch.eval_local(u, v))
    }

    pub fn normal_at(&self, x: f64, y: f64) -> Result<Vec3, WorldError> {
        if !self.contains(x, y) {
            return Err(WorldError::OutOfBounds { x, y });
        }
        let (i, j) = self.cell_of(x, y);
        Ok(self.patch(i, j).normal(x, y))
    }

    /// Bytes held by the depth grid.
    pub fn resident_bytes(&self) -> usize {
        self.depth.len() * std::mem::size_of::<f64>() + std::mem::size_of::<Self>()
    }
}
