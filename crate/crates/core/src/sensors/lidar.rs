//! Spinning multi-laser scanner.

use rayon::prelude::*;

use super::sonar::fan_angles;
use super::{intensity, CastContext, PointCloud, SensorError, SensorPose};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarGeometry {
    pub n_lasers: usize,
    pub fov_vertical: f64,
    pub fov_horizontal: f64,
    pub points_per_rotation: usize,
    pub max_range: f64,
}

impl LidarGeometry {
    /// Azimuths; a full circle is sampled without repeating the seam.
    pub fn azimuths(&self) -> Vec<f64> {
        let n = self.points_per_rotation;
        if self.fov_horizontal >= std::f64::consts::TAU - 1e-9 {
            (0..n).map(|i| -std::f64::consts::PI + std::f64::consts::TAU * i as f64 / n as f64).collect()
        } else {
            fan_angles(n, 0.0, self.fov_horizontal)
        }
    }

    /// Elevations, positive up.
    pub fn elevations(&self) -> Vec<f64> {
        fan_angles(self.n_lasers, 0.0, self.fov_vertical)
    }
}

/// Sensor-frame direction for elevation `e` (up) and azimuth `a`.
pub fn lidar_direction(e: f64, a: f64) -> Vec3 {
    Vec3::new(e.cos() * a.cos(), e.cos() * a.sin(), -e.sin())
}

/// Point cloud in the sensor frame. Misses are omitted.
pub fn lidar_scan(ctx: &CastContext, pose: &SensorPose, geom: &LidarGeometry, semantic: bool) -> Result<PointCloud, SensorError> {
    let az = geom.azimuths();
    let el = geom.elevations();
    let dirs: Vec<Vec3> = el.iter().flat_map(|e| az.iter().map(move |a| lidar_direction(*e, *a))).collect();
    let hits = dirs
        .par_iter()
        .map(|d| {
            let w = pose.world_dir(d);
            ctx.cast(pose.origin, w, geom.max_range).map(|h| h.map(|h| (pose.to_local(&h.point), intensity(&h, &w), h.label)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut cloud = PointCloud { points: Vec::new(), intensities: Vec::new(), labels: semantic.then(Vec::new) };
    for (p, i, l) in hits.into_iter().flatten() {
        cloud.points.push(p.into());
        cloud.intensities.push(i);
        if let Some(ls) = cloud.labels.as_mut() {
            ls.push(l);
        }
    }
    Ok(cloud)
}
