//! Three-run timing comparison of the ray backends.
//!
//! * caching run: build the octree, write it to the cache file, then answer
//!   every tick's batch from the in-memory tree
//! * query run: read the cached tree back from disk, then answer every batch
//! * raycast run: cast every batch directly against the world
//!
//! All runs see the same ray batch each tick.

use std::fmt::Write as _;
use std::hint::black_box;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{build_octree, direct_cast, octree_cast, AccelError, Octree, QueryStats, Ray};
use crate::geom::Vec3;
use crate::world::World;

pub const CACHING_RUN: &str = "caching run";
pub const QUERY_RUN: &str = "query run";
pub const RAYCAST_RUN: &str = "raycast run";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub run: String,
    pub mean_time_per_tick: f64,
    pub total_time: f64,
    pub peak_memory_bytes: u64,
    pub hits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub ticks: usize,
    pub rays_per_tick: usize,
    pub leaf_size: f64,
    pub octree_leaves: usize,
    /// Wall time of one extra, separately timed octree build.
    pub build_time: f64,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, run: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.run == run)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned text table with one row per run.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:>24} {:>16} {:>16}",
            "Run", "Mean Time per Tick (s)", "Total Time (s)", "Memory (bytes)"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<14} {:>24.6} {:>16.6} {:>16}",
                r.run, r.mean_time_per_tick, r.total_time, r.peak_memory_bytes
            );
        }
        let _ = writeln!(
            out,
            "ticks {}, rays/tick {}, leaf {} m, octree leaves {}, build {:.6} s",
            self.ticks, self.rays_per_tick, self.leaf_size, self.octree_leaves, self.build_time
        );
        out
    }
}

fn query_ticks(tree: &Octree, world: &World, rays: &[Ray], ticks: usize, stats: &QueryStats) -> Result<u64, AccelError> {
    let mut hits = 0;
    for _ in 0..ticks {
        for ray in rays {
            if black_box(octree_cast(tree, world.revision(), ray, stats)?).is_some() {
                hits += 1;
            }
        }
    }
    Ok(hits)
}

/// Deterministic forward-looking imaging-sonar batch: `n` rays in an
/// azimuth x elevation grid (120 x 20 degrees, pitched 40 degrees down) from
/// 1 m below the surface over the middle of the world.
pub fn sonar_batch(world: &World, n: usize, max_range: f64) -> Result<Vec<Ray>, AccelError> {
    let b = world.bounds();
    let origin = Vec3::new(0.5 * (b.min.x + b.max.x), 0.5 * (b.min.y + b.max.y), 1.0);
    let n_el = ((n as f64 / 6.0).sqrt().round() as usize).max(1);
    let n_az = n.div_ceil(n_el);
    let centre = |k: usize, count: usize, aperture: f64| aperture * ((k as f64 + 0.5) / count as f64 - 0.5);
    let mut rays = Vec::with_capacity(n);
    for k in 0..n {
        let az = centre(k % n_az, n_az, 120f64.to_radians());
        let el = -40f64.to_radians() + centre(k / n_az, n_el, 20f64.to_radians());
        let dir = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), -el.sin());
        rays.push(Ray::new(origin, dir, max_range)?);
    }
    Ok(rays)
}

/// Times the three runs. `cache_dir` receives the persisted octree.
pub fn bench_backends(
    world: &World,
    rays: &[Ray],
    ticks: usize,
    leaf_size: f64,
    cache_dir: &Path,
) -> Result<BenchReport, AccelError> {
    if rays.is_empty() {
        return Err(AccelError::EmptyRayBatch);
    }
    if ticks == 0 {
        return Err(AccelError::NoTicks);
    }
    std::fs::create_dir_all(cache_dir)?;
    let cache = cache_dir.join("octree.cache");
    let row = |run: &str, total: f64, mem: usize, hits: u64| BenchRow {
        run: run.to_string(),
        mean_time_per_tick: total / ticks as f64,
        total_time: total,
        peak_memory_bytes: mem as u64,
        hits,
    };

    let stats = QueryStats::new();
    let start = Instant::now();
    let tree = build_octree(world, leaf_size)?;
    tree.persist(&cache)?;
    let hits = query_ticks(&tree, world, rays, ticks, &stats)?;
    let caching = row(CACHING_RUN, start.elapsed().as_secs_f64(), tree.memory_bytes(), hits);
    let octree_leaves = tree.leaf_count();
    drop(tree);

    let stats = QueryStats::new();
    let start = Instant::now();
    let tree = Octree::load(&cache)?;
    let hits = query_ticks(&tree, world, rays, ticks, &stats)?;
    let query = row(QUERY_RUN, start.elapsed().as_secs_f64(), tree.memory_bytes(), hits);
    drop(tree);

    let stats = QueryStats::new();
    let start = Instant::now();
    let mut hits = 0;
    for _ in 0..ticks {
        for ray in rays {
            if black_box(direct_cast(world, ray, &stats)).is_some() {
                hits += 1;
            }
        }
    }
    let raycast = row(RAYCAST_RUN, start.elapsed().as_secs_f64(), world.resident_bytes(), hits);

    let start = Instant::now();
    black_box(build_octree(world, leaf_size)?);
    let build_time = start.elapsed().as_secs_f64();

    Ok(BenchReport {
        ticks,
        rays_per_tick: rays.len(),
        leaf_size,
        octree_leaves,
        build_time,
        rows: vec![caching, query, raycast],
    })
}
