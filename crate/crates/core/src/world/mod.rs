//! Simulated environment: bathymetry plus semantically tagged props.

mod archive;
mod asc;
mod gen;
mod heightfield;
pub mod presets;
mod stl;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{transform_point, Aabb, Triangle, Vec3};

pub use archive::{read_archive, write_archive, ARCHIVE_FORMAT};
pub use asc::{load_bathymetry, parse_ascii_grid, read_ascii_grid, write_ascii_grid, AsciiGrid};
pub use gen::{generate_world, GenSpec, PropClass, PropShape, TerrainKind, TerrainSpec};
pub use heightfield::{BilinearPatch, Heightfield};
pub use stl::{parse_stl, read_stl, write_stl, StlSolid};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("malformed row {row}: expected {expected} values, found {found}")]
    MalformedRow { row: usize, expected: usize, found: usize },
    #[error("non-numeric cell at row {row}, col {col}: {token:?}")]
    NonNumeric { row: usize, col: usize, token: String },
    #[error("malformed cell (NaN or no-data) at row {row}, col {col}")]
    MalformedCell { row: usize, col: usize },
    #[error("invalid heightfield: {0}")]
    InvalidHeightfield(String),
    #[error("query ({x}, {y}) outside the heightfield footprint")]
    OutOfBounds { x: f64, y: f64 },
    #[error("prop mesh must contain at least one triangle")]
    EmptyMesh,
    #[error("prop mesh has non-finite vertices")]
    NonFiniteMesh,
    #[error("invalid generation spec: {0}")]
    InvalidGenSpec(String),
    #[error("stl parse error at line {line}: {message}")]
    Stl { line: usize, message: String },
    #[error("archive error: {0}")]
    Archive(String),
}

/// Ground-truth tag carried by every surface. Class 0 means unlabeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct SemanticLabel {
    pub class_id: u16,
    pub instance_id: u32,
}

impl SemanticLabel {
    pub const UNLABELED: SemanticLabel = SemanticLabel { class_id: 0, instance_id: 0 };
    pub const SEAFLOOR: SemanticLabel = SemanticLabel { class_id: 1, instance_id: 0 };

    pub fn new(class_id: u16, instance_id: u32) -> Self {
        Self { class_id, instance_id }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PropId(pub u64);

/// Rigid static mesh placed in the world.
#[derive(Debug, Clone, PartialEq)]
pub struct Prop {
    id: PropId,
    mesh: Vec<Triangle>,
    pose: [f64; 6],
    label: SemanticLabel,
    generation: u64,
    world_mesh: Vec<Triangle>,
    bounds: Aabb,
}

impl Prop {
    fn new(id: PropId, mesh: Vec<Triangle>, pose: [f64; 6], label: SemanticLabel, generation: u64) -> Result<Self, WorldError> {
        if mesh.is_empty() {
            return Err(WorldError::EmptyMesh);
        }
        if mesh.iter().flatten().any(|v| !v.iter().all(|c| c.is_finite())) || !pose.iter().all(|c| c.is_finite()) {
            return Err(WorldError::NonFiniteMesh);
        }
        let world_mesh: Vec<Triangle> = mesh
            .iter()
            .map(|t| [transform_point(&pose, &t[0]), transform_point(&pose, &t[1]), transform_point(&pose, &t[2])])
            .collect();
        let bounds = world_mesh.iter().fold(Aabb::empty(), |b, t| b.union(&Aabb::of_triangle(t)));
        Ok(Self { id, mesh, pose, label, generation, world_mesh, bounds })
    }

    pub fn id(&self) -> PropId {
        self.id
    }

    /// Triangles in the prop's local frame.
    pub fn mesh(&self) -> &[Triangle] {
        &self.mesh
    }

    pub fn pose(&self) -> [f64; 6] {
        self.pose
    }

    pub fn label(&self) -> SemanticLabel {
        self.label
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Triangles transformed into the world frame.
    pub fn world_triangles(&self) -> &[Triangle] {
        &self.world_mesh
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }
}

/// Heightfield plus props, versioned by a revision counter that increases on
/// every mutation.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    heightfield: Heightfield,
    props: Vec<Prop>,
    revision: u64,
    next_id: u64,
}

impl World {
    pub fn new(heightfield: Heightfield) -> Self {
        Self { heightfield, props: Vec::new(), revision: 0, next_id: 1 }
    }

    pub fn heightfield(&self) -> &Heightfield {
        &self.heightfield
    }

    pub fn props(&self) -> &[Prop] {
        &self.props
    }

    pub fn prop(&self, id: PropId) -> Option<&Prop> {
        self.props.iter().find(|p| p.id == id)
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Adds a prop and returns its fresh id. Bumps the revision.
    pub fn spawn_prop(&mut self, mesh: Vec<Triangle>, pose: [f64; 6], label: SemanticLabel) -> Result<PropId, WorldError> {
        let id = PropId(self.next_id);
        let prop = Prop::new(id, mesh, pose, label, self.revision + 1)?;
        self.next_id += 1;
        self.revision += 1;
        self.props.push(prop);
        Ok(id)
    }

    /// Removes a prop; returns whether it existed. Bumps the revision on success.
    pub fn remove_prop(&mut self, id: PropId) -> bool {
        match self.props.iter().position(|p| p.id == id) {
            Some(k) => {
                self.props.remove(k);
                self.revision += 1;
                true
            }
            None => false,
        }
    }

    /// Restores a prop with a known id and generation (archive loading).
    pub(crate) fn restore_prop(
        &mut self,
        id: PropId,
        mesh: Vec<Triangle>,
        pose: [f64; 6],
        label: SemanticLabel,
        generation: u64,
    ) -> Result<(), WorldError> {
        if self.props.iter().any(|p| p.id == id) {
            return Err(WorldError::Archive(format!("duplicate prop id {}", id.0)));
        }
        self.props.push(Prop::new(id, mesh, pose, label, generation)?);
        self.next_id = self.next_id.max(id.0 + 1);
        Ok(())
    }

    pub(crate) fn set_revision(&mut self, revision: u64) {
        self.revision = revision;
    }

    pub(crate) fn next_id(&self) -> u64 {
        self.next_id
    }

    pub(crate) fn set_next_id(&mut self, next: u64) {
        self.next_id = next;
    }

    /// Bounding box of the seabed surface and every prop.
    pub fn bounds(&self) -> Aabb {
        let hf = &self.heightfield;
        let mut b = Aabb::new(
            Vec3::new(hf.origin()[0], hf.origin()[1], hf.min_depth()),
            Vec3::new(hf.x_max(), hf.y_max(), hf.max_depth()),
        );
        for p in &self.props {
            b = b.union(p.bounds());
        }
        b
    }

    /// Bytes a direct ray caster reads: the depth grid and prop triangles.
    pub fn resident_bytes(&self) -> usize {
        self.heightfield.resident_bytes()
            + self
                .props
                .iter()
                .map(|p| p.world_mesh.len() * std::mem::size_of::<Triangle>() + std::mem::size_of::<Prop>())
                .sum::<usize>()
    }
}

/// Axis-aligned box mesh centered on the local origin (12 triangles, outward winding).
pub fn box_mesh(size: [f64; 3]) -> Vec<Triangle> {
    let [hx, hy, hz] = [size[0] / 2.0, size[1] / 2.0, size[2] / 2.0];
    let v = |x: f64, y: f64, z: f64| Vec3::new(x * hx, y * hy, z * hz);
    let c = [
        v(-1.0, -1.0, -1.0),
        v(1.0, -1.0, -1.0),
        v(1.0, 1.0, -1.0),
        v(-1.0, 1.0, -1.0),
        v(-1.0, -1.0, 1.0),
        v(1.0, -1.0, 1.0),
        v(1.0, 1.0, 1.0),
        v(-1.0, 1.0, 1.0),
    ];
    let quads = [
        [0, 3, 2, 1], // z-
        [4, 5, 6, 7], // z+
        [0, 1, 5, 4], // y-
        [2, 3, 7, 6], // y+
        [1, 2, 6, 5], // x+
        [0, 4, 7, 3], // x-
    ];
    quads
        .iter()
        .flat_map(|q| [[c[q[0]], c[q[1]], c[q[2]]], [c[q[0]], c[q[2]], c[q[3]]]])
        .collect()
}

/// Closed prism approximating a vertical cylinder, centered on the local origin.
pub fn cylinder_mesh(radius: f64, height: f64, segments: usize) -> Vec<Triangle> {
    let n = segments.max(3);
    let hz = height / 2.0;
    let ring: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            (radius * a.cos(), radius * a.sin())
        })
        .collect();
    let mut tris = Vec::with_capacity(4 * n);
    let top = Vec3::new(0.0, 0.0, -hz);
    let bottom = Vec3::new(0.0, 0.0, hz);
    for k in 0..n {
        let (x0, y0) = ring[k];
        let (x1, y1) = ring[(k + 1) % n];
        let a_top = Vec3::new(x0, y0, -hz);
        let b_top = Vec3::new(x1, y1, -hz);
        let a_bot = Vec3::new(x0, y0, hz);
        let b_bot = Vec3::new(x1, y1, hz);
        tris.push([top, b_top, a_top]);
        tris.push([bottom, a_bot, b_bot]);
        tris.push([a_top, b_top, b_bot]);
        tris.push([a_top, b_bot, a_bot]);
    }
    tris
}
