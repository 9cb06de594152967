//! Ray query backends.
//!
//! Two interchangeable implementations sit behind [`RayBackend`]:
//!
//! * [`DirectBackend`] casts every ray against the live world (grid DDA with
//!   per-cell bilinear patch roots for the seabed, Möller-Trumbore for props).
//! * [`OctreeBackend`] answers from a cached surface-occupancy octree built
//!   for one world revision. It trades memory and a costly build for cheap
//!   queries, and refuses to answer once the world has changed.
//!
//! Backends are looked up by name through [`registry`], which is how scenario
//! files and the CLI select them.

mod bench;
mod direct;
mod octree;

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;
use crate::world::{SemanticLabel, World};

pub use bench::{bench_backends, sonar_batch, BenchReport, BenchRow, CACHING_RUN, QUERY_RUN, RAYCAST_RUN};
pub use direct::direct_cast;
pub use octree::{build_octree, octree_cast, Octree};

pub const DEFAULT_LEAF_SIZE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum AccelError {
    #[error("invalid ray: {0}")]
    InvalidRay(String),
    #[error("octree built from world revision {built} but world is at revision {current}; rebuild required")]
    StaleOctree { built: u64, current: u64 },
    #[error("invalid leaf size {0}")]
    InvalidLeafSize(f64),
    #[error("leaf size {leaf} is coarser than the world extent {extent}")]
    LeafTooLarge { leaf: f64, extent: f64 },
    #[error("world has no surfaces")]
    EmptyWorld,
    #[error("ray batch is empty")]
    EmptyRayBatch,
    #[error("benchmark needs at least one tick")]
    NoTicks,
    #[error("unknown backend {0:?}")]
    UnknownBackend(String),
    #[error("octree cache: {0}")]
    Cache(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Vec3,
    direction: Vec3,
    max_range: f64,
}

impl Ray {
    /// Ray with an already-normalized direction (|d| = 1 within 1e-9).
    pub fn new(origin: Vec3, direction: Vec3, max_range: f64) -> Result<Self, AccelError> {
        if !origin.iter().all(|c| c.is_finite()) {
            return Err(AccelError::InvalidRay("non-finite origin".into()));
        }
        let n = direction.norm();
        if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
            return Err(AccelError::InvalidRay(format!("direction norm {n} is not unit")));
        }
        if !(max_range > 0.0) {
            return Err(AccelError::InvalidRay(format!("max_range {max_range} must be positive")));
        }
        Ok(Self { origin, direction, max_range })
    }

    /// Ray towards `direction`, normalizing it first.
    pub fn towards(origin: Vec3, direction: Vec3, max_range: f64) -> Result<Self, AccelError> {
        let n = direction.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(AccelError::InvalidRay("zero direction".into()));
        }
        Self::new(origin, direction / n, max_range)
    }

    pub fn origin(&self) -> &Vec3 {
        &self.origin
    }

    pub fn direction(&self) -> &Vec3 {
        &self.direction
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// First surface along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub range: f64,
    pub point: Vec3,
    /// Unit normal facing back towards the ray origin.
    pub normal: Vec3,
    pub label: SemanticLabel,
}

/// Contention-safe query counters shared by concurrent casts.
#[derive(Debug, Default)]
pub struct QueryStats {
    rays_cast: AtomicU64,
    wall_nanos: AtomicU64,
    bytes_resident: AtomicU64,
}

impl QueryStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_ray(&self) {
        self.rays_cast.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_time(&self, d: Duration) {
        self.wall_nanos.fetch_add(d.as_nanos() as u64, Ordering::Relaxed);
    }

    pub fn note_resident(&self, bytes: usize) {
        self.bytes_resident.fetch_max(bytes as u64, Ordering::Relaxed);
    }

    pub fn rays_cast(&self) -> u64 {
        self.rays_cast.load(Ordering::Relaxed)
    }

    pub fn wall_time(&self) -> f64 {
        self.wall_nanos.load(Ordering::Relaxed) as f64 * 1e-9
    }

    pub fn bytes_resident(&self) -> u64 {
        self.bytes_resident.load(Ordering::Relaxed)
    }
}

/// Common ray-query contract for all backends.
pub trait RayBackend: Send + Sync {
    fn name(&self) -> &'static str;

    /// First hit along `ray`, or `None` on a miss within `max_range`.
    fn cast(&self, world: &World, ray: &Ray, stats: &QueryStats) -> Result<Option<Hit>, AccelError>;

    /// Bytes of world representation this backend reads per query.
    fn resident_bytes(&self, world: &World) -> usize;
}

pub struct DirectBackend;

impl RayBackend for DirectBackend {
    fn name(&self) -> &'static str {
        "raycast"
    }

    fn cast(&self, world: &World, ray: &Ray, stats: &QueryStats) -> Result<Option<Hit>, AccelError> {
        Ok(direct_cast(world, ray, stats))
    }

    fn resident_bytes(&self, world: &World) -> usize {
        world.resident_bytes()
    }
}

pub struct OctreeBackend {
    tree: Octree,
}

impl OctreeBackend {
    pub fn new(tree: Octree) -> Self {
        Self { tree }
    }

    pub fn tree(&self) -> &Octree {
        &self.tree
    }

    pub fn rebuild(&mut self, world: &World) -> Result<(), AccelError> {
        self.tree = build_octree(world, self.tree.leaf_size())?;
        Ok(())
    }
}

impl RayBackend for OctreeBackend {
    fn name(&self) -> &'static str {
        "octree"
    }

    fn cast(&self, world: &World, ray: &Ray, stats: &QueryStats) -> Result<Option<Hit>, AccelError> {
        octree_cast(&self.tree, world.revision(), ray, stats)
    }

    fn resident_bytes(&self, _world: &World) -> usize {
        self.tree.memory_bytes()
    }
}

/// Backend selector as written in scenario files and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Octree,
    #[default]
    Raycast,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Octree => "octree",
            BackendKind::Raycast => "raycast",
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = AccelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        registry()
            .iter()
            .find(|e| e.name == s)
            .map(|e| e.kind)
            .ok_or_else(|| AccelError::UnknownBackend(s.to_string()))
    }
}

/// Options a backend constructor may use.
#[derive(Debug, Clone, Copy)]
pub struct BackendOptions {
    pub leaf_size: f64,
}

impl Default for BackendOptions {
    fn default() -> Self {
        Self { leaf_size: DEFAULT_LEAF_SIZE }
    }
}

pub struct BackendEntry {
    pub name: &'static str,
    pub kind: BackendKind,
    pub description: &'static str,
    pub build: fn(&World, &BackendOptions) -> Result<Box<dyn RayBackend>, AccelError>,
}

fn build_direct(_: &World, _: &BackendOptions) -> Result<Box<dyn RayBackend>, AccelError> {
    Ok(Box::new(DirectBackend))
}

fn build_cached(world: &World, opts: &BackendOptions) -> Result<Box<dyn RayBackend>, AccelError> {
    Ok(Box::new(OctreeBackend::new(build_octree(world, opts.leaf_size)?)))
}

static REGISTRY: [BackendEntry; 2] = [
    BackendEntry {
        name: "octree",
        kind: BackendKind::Octree,
        description: "cached surface-occupancy octree; must be rebuilt when the world changes",
        build: build_cached,
    },
    BackendEntry {
        name: "raycast",
        kind: BackendKind::Raycast,
        description: "direct ray casting against the live world",
        build: build_direct,
    },
];

pub fn registry() -> &'static [BackendEntry] {
    &REGISTRY
}

/// Instantiates the backend registered under `kind`.
pub fn make_backend(kind: BackendKind, world: &World, opts: &BackendOptions) -> Result<Box<dyn RayBackend>, AccelError> {
    let entry = registry().iter().find(|e| e.kind == kind).expect("every kind is registered");
    (entry.build)(world, opts)
}
