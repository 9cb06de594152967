//! Sparse surface-occupancy octree.
//!
//! Leaves live on a regular lattice of `leaf_size` cubes anchored at the
//! world's minimum corner, with the vertical lattice offset by half a leaf so
//! that a level seabed falls in the middle of one layer. A leaf is occupied when
//! any seabed patch or prop triangle passes through it; it stores the averaged
//! surface plane and the label of the contributor with the largest area.
//!
//! A cast walks occupied leaves front to back and stops at the first one whose
//! plane the ray crosses inside the leaf. Leaves the ray only clips are passed
//! over; if none accepts, the first occupied leaf entry is the answer.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::{AccelError, Hit, QueryStats, Ray};
use crate::geom::{face_forward, inverse_direction, triangle_area, triangle_box_overlap, triangle_normal, Aabb, Vec3};
use crate::world::{Heightfield, SemanticLabel, World};

const EMPTY: u32 = u32::MAX;
const LEAF_BIT: u32 = 1 << 31;
const MAGIC: &[u8; 8] = b"MOCTREE2";
const SURFEL_BYTES: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    children: [u32; 8],
}

/// Planar piece of surface inside a leaf.
#[derive(Debug, Clone, Copy)]
struct Surfel {
    normal: [f32; 3],
    /// Plane offset from the leaf centre along `normal`.
    offset: f32,
    label: SemanticLabel,
}

impl PartialEq for Surfel {
    fn eq(&self, other: &Self) -> bool {
        self.normal == other.normal && self.offset.to_bits() == other.offset.to_bits() && self.label == other.label
    }
}

/// Surfels `first..first + count`, largest first.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Leaf {
    first: u32,
    count: u32,
}

const MAX_SURFELS: usize = 4;
/// Contributions closer than about 20 degrees share a surfel.
const SURFEL_COS: f64 = 0.94;

#[derive(Debug, Clone, PartialEq)]
pub struct Octree {
    origin: Vec3,
    leaf_size: f64,
    levels: u32,
    dims: [u32; 3],
    nodes: Vec<Node>,
    leaves: Vec<Leaf>,
    surfels: Vec<Surfel>,
    built_from_revision: u64,
}

struct Cluster {
    normal: Vec3,
    plane: f64,
    weight: f64,
    label: SemanticLabel,
}

#[derive(Default)]
struct Accum {
    clusters: Vec<Cluster>,
}

impl Accum {
    fn add(&mut self, normal: Vec3, point: Vec3, label: SemanticLabel, weight: f64) {
        let found = self.clusters.iter_mut().find(|c| {
            let len = c.normal.norm();
            c.label == label && len > 0.0 && c.normal.dot(&normal) / len > SURFEL_COS
        });
        match found {
            Some(c) => {
                c.normal += normal * weight;
                c.plane += normal.dot(&point) * weight;
                c.weight += weight;
            }
            None => self.clusters.push(Cluster { normal: normal * weight, plane: normal.dot(&point) * weight, weight, label }),
        }
    }

    fn merge(&mut self, other: Accum) {
        for c in other.clusters {
            let len = c.normal.norm();
            if len <= 0.0 {
                continue;
            }
            let n = c.normal / len;
            let found = self.clusters.iter_mut().find(|d| {
                let l = d.normal.norm();
                d.label == c.label && l > 0.0 && d.normal.dot(&n) / l > SURFEL_COS
            });
            match found {
                Some(d) => {
                    d.normal += c.normal;
                    d.plane += c.plane;
                    d.weight += c.weight;
                }
                None => self.clusters.push(c),
            }
        }
    }

    fn finish(mut self, center: &Vec3) -> Vec<Surfel> {
        self.clusters.retain(|c| c.normal.norm() > 1e-12);
        self.clusters.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.label.cmp(&b.label)));
        self.clusters.truncate(MAX_SURFELS);
        self.clusters
            .iter()
            .map(|c| {
                let len = c.normal.norm();
                let n = c.normal / len;
                let offset = (c.plane - c.normal.dot(center)) / len;
                Surfel { normal: [n.x as f32, n.y as f32, n.z as f32], offset: offset as f32, label: c.label }
            })
            .collect()
    }
}

struct Lattice {
    origin: Vec3,
    leaf: f64,
    dims: [u32; 3],
}

impl Lattice {
    fn index(&self, axis: usize, c: f64) -> i64 {
        let k = ((c - self.origin[axis]) / self.leaf).floor() as i64;
        k.clamp(0, self.dims[axis] as i64 - 1)
    }

    fn key(&self, ix: i64, iy: i64, iz: i64) -> u64 {
        ((ix as u64) << 42) | ((iy as u64) << 21) | iz as u64
    }

    fn cell_center(&self, ix: i64, iy: i64, iz: i64) -> Vec3 {
        self.origin + Vec3::new(ix as f64 + 0.5, iy as f64 + 0.5, iz as f64 + 0.5) * self.leaf
    }
}

/// Min and max of the piecewise-bilinear seabed over an axis-aligned rectangle.
fn column_range(hf: &Heightfield, xa: f64, xb: f64, ya: f64, yb: f64) -> (f64, f64) {
    let s = hf.cell_size();
    let [ox, oy] = hf.origin();
    let samples = |a: f64, b: f64, o: f64| {
        let mut v = vec![a];
        let first = ((a - o) / s).floor() as i64 + 1;
        let mut k = first;
        loop {
            let g = o + k as f64 * s;
            if g >= b {
                break;
            }
            v.push(g);
            k += 1;
        }
        v.push(b);
        v
    };
    let xs = samples(xa, xb, ox);
    let ys = samples(ya, yb, oy);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in &xs {
        for &y in &ys {
            let h = hf.height_at(x, y).expect("column sample inside footprint");
            lo = lo.min(h);
            hi = hi.max(h);
        }
    }
    (lo, hi)
}

pub fn build_octree(world: &World, leaf_size: f64) -> Result<Octree, AccelError> {
    if !(leaf_size > 0.0 && leaf_size.is_finite()) {
        return Err(AccelError::InvalidLeafSize(leaf_size));
    }
    let bounds = world.bounds();
    if bounds.is_empty() {
        return Err(AccelError::EmptyWorld);
    }
    let ext = bounds.extent();
    let extent = ext.x.max(ext.y).max(ext.z);
    if leaf_size > extent {
        return Err(AccelError::LeafTooLarge { leaf: leaf_size, extent });
    }

    let origin = Vec3::new(bounds.min.x, bounds.min.y, bounds.min.z - 0.5 * leaf_size);
    let dim = |len: f64| ((len / leaf_size).ceil() as u32).max(1);
    let dims = [dim(ext.x), dim(ext.y), ((bounds.max.z - origin.z) / leaf_size).floor() as u32 + 1];
    if dims.iter().any(|&d| d >= 1 << 21) {
        return Err(AccelError::InvalidLeafSize(leaf_size));
    }
    let lat = Lattice { origin, leaf: leaf_size, dims };

    let hf = world.heightfield();
    let (hx0, hy0) = (hf.origin()[0], hf.origin()[1]);
    let (hx1, hy1) = (hf.x_max(), hf.y_max());
    let ix_range = lat.index(0, hx0)..=lat.index(0, hx1);
    let iy_lo = lat.index(1, hy0);
    let iy_hi = lat.index(1, hy1);

    let seabed: Vec<(u64, Accum)> = ix_range
        .into_par_iter()
        .flat_map_iter(|ix| {
            let lat = &lat;
            (iy_lo..=iy_hi).flat_map(move |iy| {
                let xa = (origin.x + ix as f64 * leaf_size).max(hx0);
                let xb = (origin.x + (ix + 1) as f64 * leaf_size).min(hx1);
                let ya = (origin.y + iy as f64 * leaf_size).max(hy0);
                let yb = (origin.y + (iy + 1) as f64 * leaf_size).min(hy1);
                let (lo, hi) = column_range(hf, xa, xb, ya, yb);
                let (cx, cy) = (0.5 * (xa + xb), 0.5 * (ya + yb));
                let normal = hf.normal_at(cx, cy).expect("column centre inside footprint");
                let point = Vec3::new(cx, cy, hf.height_at(cx, cy).expect("column centre inside footprint"));
                let weight = (xb - xa) * (yb - ya);
                let label = hf.label();
                (lat.index(2, lo)..=lat.index(2, hi)).map(move |iz| {
                    let mut a = Accum::default();
                    a.add(normal, point, label, weight);
                    (lat.key(ix, iy, iz), a)
                })
            })
        })
        .collect();

    let tris: Vec<_> = world
        .props()
        .iter()
        .flat_map(|p| p.world_triangles().iter().map(move |t| (t, p.label())))
        .collect();
    let half = Vec3::repeat(0.5 * leaf_size);
    let cap = leaf_size * leaf_size;
    let surfaces: Vec<(u64, Accum)> = tris
        .par_iter()
        .flat_map_iter(|&(tri, label)| {
            let b = Aabb::of_triangle(tri);
            let normal = triangle_normal(tri);
            let weight = triangle_area(tri).min(cap);
            let lo = [lat.index(0, b.min.x), lat.index(1, b.min.y), lat.index(2, b.min.z)];
            let hi = [lat.index(0, b.max.x), lat.index(1, b.max.y), lat.index(2, b.max.z)];
            let mut out = Vec::new();
            for ix in lo[0]..=hi[0] {
                for iy in lo[1]..=hi[1] {
                    for iz in lo[2]..=hi[2] {
                        if triangle_box_overlap(&lat.cell_center(ix, iy, iz), &half, tri) {
                            let mut a = Accum::default();
                            a.add(normal, tri[0], label, weight);
                            out.push((lat.key(ix, iy, iz), a));
                        }
                    }
                }
            }
            out
        })
        .collect();

    let mut cells: HashMap<u64, Accum> = HashMap::with_capacity(seabed.len());
    for (k, a) in seabed.into_iter().chain(surfaces) {
        cells.entry(k).or_default().merge(a);
    }
    let mut keys: Vec<u64> = cells.keys().copied().collect();
    keys.sort_unstable();

    let max_dim = *dims.iter().max().unwrap();
    let levels = 32 - (max_dim - 1).leading_zeros();
    let mut tree = Octree {
        origin,
        leaf_size,
        levels,
        dims,
        nodes: vec![Node { children: [EMPTY; 8] }],
        leaves: Vec::with_capacity(keys.len()),
        surfels: Vec::with_capacity(keys.len()),
        built_from_revision: world.revision(),
    };
    for key in keys {
        let ix = (key >> 42) as u32;
        let iy = ((key >> 21) & ((1 << 21) - 1)) as u32;
        let iz = (key & ((1 << 21) - 1)) as u32;
        let surfels = cells.remove(&key).expect("key from map").finish(&lat.cell_center(ix as i64, iy as i64, iz as i64));
        if surfels.is_empty() {
            continue;
        }
        let leaf = Leaf { first: tree.surfels.len() as u32, count: surfels.len() as u32 };
        tree.surfels.extend(surfels);
        tree.insert([ix, iy, iz], leaf);
    }
    Ok(tree)
}

impl Octree {
    fn insert(&mut self, c: [u32; 3], leaf: Leaf) {
        if self.levels == 0 {
            // Single-leaf lattice: the root slot 0 holds it.
            self.nodes[0].children[0] = LEAF_BIT | self.leaves.len() as u32;
            self.leaves.push(leaf);
            return;
        }
        let mut node = 0usize;
        for level in (0..self.levels).rev() {
            let oct = (((c[0] >> level) & 1) | (((c[1] >> level) & 1) << 1) | (((c[2] >> level) & 1) << 2)) as usize;
            if level == 0 {
                self.nodes[node].children[oct] = LEAF_BIT | self.leaves.len() as u32;
                self.leaves.push(leaf);
                return;
            }
            let child = self.nodes[node].children[oct];
            node = if child == EMPTY {
                let idx = self.nodes.len() as u32;
                self.nodes.push(Node { children: [EMPTY; 8] });
                self.nodes[node].children[oct] = idx;
                idx as usize
            } else {
                child as usize
            };
        }
    }

    pub fn leaf_size(&self) -> f64 {
        self.leaf_size
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn built_from_revision(&self) -> u64 {
        self.built_from_revision
    }

    pub fn root_bounds(&self) -> Aabb {
        let side = self.leaf_size * (1u64 << self.levels) as f64;
        Aabb::new(self.origin, self.origin + Vec3::repeat(side))
    }

    pub fn memory_bytes(&self) -> usize {
        std::mem::size_of::<Self>()
            + self.nodes.capacity() * std::mem::size_of::<Node>()
            + self.leaves.capacity() * std::mem::size_of::<Leaf>()
            + self.surfels.capacity() * std::mem::size_of::<Surfel>()
    }

    /// Centres of all occupied leaves, in insertion order.
    pub fn leaf_centers(&self) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(self.leaves.len());
        self.collect_centers(0, self.levels, [0, 0, 0], &mut out);
        out
    }

    fn collect_centers(&self, node: usize, level: u32, c: [u32; 3], out: &mut Vec<Vec3>) {
        if level == 0 {
            if self.nodes[0].children[0] != EMPTY {
                out.push(self.origin + Vec3::repeat(0.5 * self.leaf_size));
            }
            return;
        }
        let half = 1u32 << (level - 1);
        for (k, &child) in self.nodes[node].children.iter().enumerate() {
            if child == EMPTY {
                continue;
            }
            let cc = child_corner(c, k, half);
            if child & LEAF_BIT != 0 {
                let p = Vec3::new(cc[0] as f64 + 0.5, cc[1] as f64 + 0.5, cc[2] as f64 + 0.5);
                out.push(self.origin + p * self.leaf_size);
            } else {
                self.collect_centers(child as usize, level - 1, cc, out);
            }
        }
    }

    fn cell_box(&self, c: [u32; 3], size: u32) -> Aabb {
        let min = self.origin + Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64) * self.leaf_size;
        Aabb::new(min, min + Vec3::repeat(size as f64 * self.leaf_size))
    }

    /// Visit occupied leaves front to back until `accept` returns a range.
    fn traverse(
        &self,
        node: usize,
        level: u32,
        c: [u32; 3],
        o: &Vec3,
        inv: &Vec3,
        t_max: f64,
        accept: &mut dyn FnMut(f64, f64, [u32; 3], u32) -> Option<(f64, usize)>,
    ) -> Option<(f64, usize)> {
        let half = 1u32 << (level - 1);
        let mut order: [(f64, f64, u32, [u32; 3]); 8] = [(0.0, 0.0, EMPTY, [0; 3]); 8];
        let mut n = 0;
        for (k, &child) in self.nodes[node].children.iter().enumerate() {
            if child == EMPTY {
                continue;
            }
            let cc = child_corner(c, k, half);
            if let Some((t0, t1)) = self.cell_box(cc, half).ray_interval(o, inv, 0.0, t_max) {
                order[n] = (t0, t1, child, cc);
                n += 1;
            }
        }
        let order = &mut order[..n];
        order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        for &(t0, t1, child, cc) in order.iter() {
            if child & LEAF_BIT != 0 {
                let idx = child & !LEAF_BIT;
                if let Some(hit) = accept(t0, t1, cc, idx) {
                    return Some(hit);
                }
            } else if let Some(hit) = self.traverse(child as usize, level - 1, cc, o, inv, t_max, accept) {
                return Some(hit);
            }
        }
        None
    }

    /// Nearest crossing of one of the leaf's surfel planes that lies inside
    /// the leaf, give or take a quarter leaf. Returns range and surfel index.
    fn plane_crossing(&self, ray: &Ray, t0: f64, t1: f64, cc: [u32; 3], idx: u32) -> Option<(f64, usize)> {
        let leaf = self.leaves[idx as usize];
        let center = self.cell_box(cc, 1).center();
        let rel = ray.origin() - center;
        let slack = 0.25 * self.leaf_size;
        let mut best: Option<(f64, usize)> = None;
        for k in leaf.first as usize..(leaf.first + leaf.count) as usize {
            let sf = &self.surfels[k];
            let n = Vec3::new(sf.normal[0] as f64, sf.normal[1] as f64, sf.normal[2] as f64);
            let denom = n.dot(ray.direction());
            if denom.abs() < 1e-9 {
                continue;
            }
            let t = (sf.offset as f64 - n.dot(&rel)) / denom;
            if t >= t0 - slack && t <= t1 + slack {
                let t = t.clamp(t0, t1.min(ray.max_range()));
                if best.map_or(true, |(b, _)| t < b) {
                    best = Some((t, k));
                }
            }
        }
        best
    }

    /// Range and surfel index of the first surface along the ray.
    fn first_surface(&self, ray: &Ray) -> Option<(f64, usize)> {
        let o = ray.origin();
        let inv = inverse_direction(ray.direction());
        if self.levels == 0 {
            let child = self.nodes[0].children[0];
            if child == EMPTY {
                return None;
            }
            let idx = child & !LEAF_BIT;
            let (t0, t1) = self.cell_box([0; 3], 1).ray_interval(o, &inv, 0.0, ray.max_range())?;
            return self.plane_crossing(ray, t0, t1, [0; 3], idx).or(Some((t0, self.leaves[idx as usize].first as usize)));
        }
        self.root_bounds().ray_interval(o, &inv, 0.0, ray.max_range())?;
        let mut first: Option<(f64, usize)> = None;
        let mut accept = |t0: f64, t1: f64, cc: [u32; 3], idx: u32| {
            first.get_or_insert((t0, self.leaves[idx as usize].first as usize));
            self.plane_crossing(ray, t0, t1, cc, idx)
        };
        let hit = self.traverse(0, self.levels, [0; 3], o, &inv, ray.max_range(), &mut accept);
        hit.or(first)
    }

    /// Writes the tree to `path` in a compact little-endian binary form.
    pub fn persist(&self, path: &Path) -> Result<(), AccelError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        for v in [self.origin.x, self.origin.y, self.origin.z, self.leaf_size] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.levels.to_le_bytes())?;
        for d in self.dims {
            w.write_all(&d.to_le_bytes())?;
        }
        w.write_all(&self.built_from_revision.to_le_bytes())?;
        w.write_all(&(self.nodes.len() as u64).to_le_bytes())?;
        w.write_all(&(self.leaves.len() as u64).to_le_bytes())?;
        for node in &self.nodes {
            for c in node.children {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        w.write_all(&(self.surfels.len() as u64).to_le_bytes())?;
        for leaf in &self.leaves {
            w.write_all(&leaf.first.to_le_bytes())?;
            w.write_all(&leaf.count.to_le_bytes())?;
        }
        for sf in &self.surfels {
            for c in sf.normal.iter().chain([&sf.offset]) {
                w.write_all(&c.to_le_bytes())?;
            }
            w.write_all(&sf.label.class_id.to_le_bytes())?;
            w.write_all(&sf.label.instance_id.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Octree, AccelError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(AccelError::Cache("not an octree cache file".into()));
        }
        let mut f64s = [0.0; 4];
        for v in &mut f64s {
            *v = f64::from_le_bytes(read_n(&mut r)?);
        }
        let levels = u32::from_le_bytes(read_n(&mut r)?);
        let mut dims = [0u32; 3];
        for d in &mut dims {
            *d = u32::from_le_bytes(read_n(&mut r)?);
        }
        let built_from_revision = u64::from_le_bytes(read_n(&mut r)?);
        let n_nodes = u64::from_le_bytes(read_n(&mut r)?) as usize;
        let n_leaves = u64::from_le_bytes(read_n(&mut r)?) as usize;
        if levels > 21 || n_nodes == 0 {
            return Err(AccelError::Cache("corrupt header".into()));
        }
        let mut node_bytes = vec![0u8; n_nodes * 32];
        r.read_exact(&mut node_bytes)?;
        let nodes = node_bytes
            .chunks_exact(32)
            .map(|c| {
                let mut children = [0u32; 8];
                for (k, ch) in children.iter_mut().enumerate() {
                    *ch = u32::from_le_bytes(c[4 * k..4 * k + 4].try_into().unwrap());
                }
                Node { children }
            })
            .collect();
        let n_surfels = u64::from_le_bytes(read_n(&mut r)?) as usize;
        let mut leaf_bytes = vec![0u8; n_leaves * 8];
        r.read_exact(&mut leaf_bytes)?;
        let leaves: Vec<Leaf> = leaf_bytes
            .chunks_exact(8)
            .map(|c| Leaf {
                first: u32::from_le_bytes(c[0..4].try_into().unwrap()),
                count: u32::from_le_bytes(c[4..8].try_into().unwrap()),
            })
            .collect();
        if leaves.iter().any(|l| l.first as usize + l.count as usize > n_surfels) {
            return Err(AccelError::Cache("corrupt leaf table".into()));
        }
        let mut surfel_bytes = vec![0u8; n_surfels * SURFEL_BYTES];
        r.read_exact(&mut surfel_bytes)?;
        let surfels = surfel_bytes
            .chunks_exact(SURFEL_BYTES)
            .map(|c| {
                let f = |k: usize| f32::from_le_bytes(c[4 * k..4 * k + 4].try_into().unwrap());
                Surfel {
                    normal: [f(0), f(1), f(2)],
                    offset: f(3),
                    label: SemanticLabel::new(
                        u16::from_le_bytes(c[16..18].try_into().unwrap()),
                        u32::from_le_bytes(c[18..22].try_into().unwrap()),
                    ),
                }
            })
            .collect();
        Ok(Octree {
            origin: Vec3::new(f64s[0], f64s[1], f64s[2]),
            leaf_size: f64s[3],
            levels,
            dims,
            nodes,
            leaves,
            surfels,
            built_from_revision,
        })
    }
}

fn read_n<const N: usize>(r: &mut impl Read) -> Result<[u8; N], AccelError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn child_corner(c: [u32; 3], k: usize, half: u32) -> [u32; 3] {
    [
        c[0] + (k as u32 & 1) * half,
        c[1] + ((k as u32 >> 1) & 1) * half,
        c[2] + ((k as u32 >> 2) & 1) * half,
    ]
}

/// First occupied leaf along `ray`. Fails if the world has changed since the
/// tree was built.
pub fn octree_cast(tree: &Octree, world_revision: u64, ray: &Ray, stats: &QueryStats) -> Result<Option<Hit>, AccelError> {
    if tree.built_from_revision != world_revision {
        return Err(AccelError::StaleOctree { built: tree.built_from_revision, current: world_revision });
    }
    let start = Instant::now();
    stats.record_ray();
    let hit = tree.first_surface(ray).map(|(t, k)| {
        let sf = &tree.surfels[k];
        let n = Vec3::new(sf.normal[0] as f64, sf.normal[1] as f64, sf.normal[2] as f64);
        Hit { range: t, point: ray.at(t), normal: face_forward(n, ray.direction()), label: sf.label }
    });
    stats.record_time(start.elapsed());
    stats.note_resident(tree.memory_bytes());
    Ok(hit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_world() -> World {
        World::new(Heightfield::flat([-10.0, -10.0], 1.0, 21, 21, 10.0).unwrap())
    }

    #[test]
    fn flat_plane_leaf_counts() {
        let w = flat_world();
        let t1 = build_octree(&w, 1.0).unwrap();
        assert_eq!(t1.leaf_count(), 400);
        let centers = t1.leaf_centers();
        assert!(centers.iter().all(|c| (c.z - 10.0).abs() < 1e-12));
        let t2 = build_octree(&w, 0.5).unwrap();
        assert_eq!(t2.leaf_count(), 4 * t1.leaf_count());
    }

    #[test]
    fn straight_down_within_a_leaf() {
        let w = flat_world();
        let t = build_octree(&w, 0.25).unwrap();
        let r = Ray::new(Vec3::new(0.1, 0.2, 0.0), Vec3::z(), 100.0).unwrap();
        let hit = octree_cast(&t, w.revision(), &r, &QueryStats::new()).unwrap().unwrap();
        assert!(hit.range >= 9.75 && hit.range <= 10.25, "{}", hit.range);
        let parallel = Ray::new(Vec3::new(-9.0, 0.0, 5.0), Vec3::x(), 50.0).unwrap();
        assert!(octree_cast(&t, w.revision(), &parallel, &QueryStats::new()).unwrap().is_none());
    }

    #[test]
    fn staleness_is_an_error() {
        let mut w = flat_world();
        let t = build_octree(&w, 1.0).unwrap();
        w.spawn_prop(crate::world::box_mesh([1.0; 3]), [0.0, 0.0, 5.0, 0.0, 0.0, 0.0], SemanticLabel::new(3, 1))
            .unwrap();
        let r = Ray::new(Vec3::zeros(), Vec3::z(), 100.0).unwrap();
        assert!(matches!(octree_cast(&t, w.revision(), &r, &QueryStats::new()), Err(AccelError::StaleOctree { .. })));
    }

    #[test]
    fn rejects_bad_leaf_sizes() {
        let w = flat_world();
        assert!(matches!(build_octree(&w, 0.0), Err(AccelError::InvalidLeafSize(_))));
        assert!(matches!(build_octree(&w, 50.0), Err(AccelError::LeafTooLarge { .. })));
    }

    #[test]
    fn persist_round_trip() {
        let mut w = flat_world();
        w.spawn_prop(crate::world::box_mesh([2.0; 3]), [1.0, 2.0, 8.0, 0.0, 0.0, 0.4], SemanticLabel::new(3, 1))
            .unwrap();
        let t = build_octree(&w, 0.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tree.bin");
        t.persist(&path).unwrap();
        let back = Octree::load(&path).unwrap();
        assert_eq!(back, t);
    }
}
