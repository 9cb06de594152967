//! Ranging sensors on top of the ray backends, plus navigation sensors.
//!
//! Every sensor looks along its own +x axis. Mount poses are relative to the
//! vehicle body frame; a downward echo sounder is mounted with pitch -pi/2.

mod lidar;
mod nav;
mod sonar;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accel::{AccelError, BackendKind, Hit, QueryStats, Ray, RayBackend, DEFAULT_LEAF_SIZE};
use crate::dynamics::RigidBodyState;
use crate::geom::{rotation_zyx, Vec3};
use crate::nalgebra::Matrix3;
use crate::rng::SimRng;
use crate::world::{SemanticLabel, World};

pub use lidar::lidar_scan;
pub use nav::{nav_suite, NavReading};
pub use sonar::{echo_sounder, multibeam_scan, sidescan_line, waterfall_pgm};

#[derive(Debug, Error)]
pub enum SensorError {
    #[error(transparent)]
    Accel(#[from] AccelError),
    #[error("invalid sensor spec: {0}")]
    InvalidSpec(String),
}

fn default_rate() -> u32 {
    1
}

fn default_leaf() -> f64 {
    DEFAULT_LEAF_SIZE
}

fn default_rays_per_bin() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub name: String,
    pub sensor: SensorKind,
    /// Mount pose in the body frame `[x, y, z, roll, pitch, yaw]`.
    #[serde(default)]
    pub mount_pose: [f64; 6],
    /// Emit on every N-th tick.
    #[serde(default = "default_rate")]
    pub rate_ticks: u32,
    #[serde(default)]
    pub backend: BackendKind,
    #[serde(default)]
    pub semantic: bool,
    /// Octree leaf size when `backend` is octree.
    #[serde(default = "default_leaf")]
    pub leaf_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SensorKind {
    Echo {
        max_range: f64,
        /// Multiplicative Rayleigh speckle on intensity.
        #[serde(default)]
        speckle: bool,
    },
    Multibeam {
        n_beams: usize,
        swath_aperture: f64,
        max_range: f64,
        #[serde(default)]
        speckle: bool,
    },
    Sidescan {
        n_bins: usize,
        /// Depression angle of the fan centre below horizontal.
        tilt: f64,
        vertical_aperture: f64,
        max_range: f64,
        #[serde(default = "default_rays_per_bin")]
        rays_per_bin: usize,
        #[serde(default)]
        speckle: bool,
    },
    Lidar {
        n_lasers: usize,
        fov_vertical: f64,
        fov_horizontal: f64,
        points_per_rotation: usize,
        max_range: f64,
    },
    Imu {
        #[serde(default)]
        accel_noise: f64,
        #[serde(default)]
        gyro_noise: f64,
    },
    Dvl {
        #[serde(default)]
        noise: f64,
    },
    Depth {
        #[serde(default)]
        noise: f64,
    },
}

impl SensorKind {
    pub fn name(&self) -> &'static str {
        match self {
            SensorKind::Echo { .. } => "echo",
            SensorKind::Multibeam { .. } => "multibeam",
            SensorKind::Sidescan { .. } => "sidescan",
            SensorKind::Lidar { .. } => "lidar",
            SensorKind::Imu { .. } => "imu",
            SensorKind::Dvl { .. } => "dvl",
            SensorKind::Depth { .. } => "depth",
        }
    }

    pub fn is_ranging(&self) -> bool {
        matches!(self, SensorKind::Echo { .. } | SensorKind::Multibeam { .. } | SensorKind::Sidescan { .. } | SensorKind::Lidar { .. })
    }
}

impl SensorSpec {
    /// Problems as (field, message) pairs.
    pub fn check(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut bad = |f: &str, m: &str| out.push((f.to_string(), m.to_string()));
        if self.rate_ticks < 1 {
            bad("rate_ticks", "must be at least 1");
        }
        if !(self.leaf_size > 0.0) {
            bad("leaf_size", "must be positive");
        }
        if self.mount_pose.iter().any(|v| !v.is_finite()) {
            bad("mount_pose", "must be finite");
        }
        let range_ok = |r: f64| r > 0.0 && r.is_finite();
        match &self.sensor {
            SensorKind::Echo { max_range, .. } => {
                if !range_ok(*max_range) {
                    bad("sensor.max_range", "must be positive");
                }
            }
            SensorKind::Multibeam { n_beams, swath_aperture, max_range, .. } => {
                if *n_beams < 1 {
                    bad("sensor.n_beams", "must be at least 1");
                }
                if !(*swath_aperture >= 0.0) {
                    bad("sensor.swath_aperture", "must be non-negative");
                }
                if !range_ok(*max_range) {
                    bad("sensor.max_range", "must be positive");
                }
            }
            SensorKind::Sidescan { n_bins, vertical_aperture, max_range, rays_per_bin, tilt, .. } => {
                if *n_bins < 1 {
                    bad("sensor.n_bins", "must be at least 1");
                }
                if *rays_per_bin < 1 {
                    bad("sensor.rays_per_bin", "must be at least 1");
                }
                if !(*vertical_aperture >= 0.0) || !tilt.is_finite() {
                    bad("sensor.vertical_aperture", "must be non-negative");
                }
                if !range_ok(*max_range) {
                    bad("sensor.max_range", "must be positive");
                }
            }
            SensorKind::Lidar { n_lasers, points_per_rotation, max_range, fov_vertical, fov_horizontal } => {
                if *n_lasers < 1 || *points_per_rotation < 1 {
                    bad("sensor.n_lasers", "laser and point counts must be at least 1");
                }
                if !(*fov_vertical >= 0.0) || !(*fov_horizontal >= 0.0) {
                    bad("sensor.fov_vertical", "fields of view must be non-negative");
                }
                if !range_ok(*max_range) {
                    bad("sensor.max_range", "must be positive");
                }
            }
            SensorKind::Imu { accel_noise, gyro_noise } => {
                if !(*accel_noise >= 0.0) || !(*gyro_noise >= 0.0) {
                    bad("sensor.accel_noise", "noise must be non-negative");
                }
            }
            SensorKind::Dvl { noise } | SensorKind::Depth { noise } => {
                if !(*noise >= 0.0) {
                    bad("sensor.noise", "must be non-negative");
                }
            }
        }
        out
    }

    /// Whether the sensor emits after 0-based `tick` completes.
    pub fn emits(&self, tick: u64) -> bool {
        (tick + 1) % self.rate_ticks.max(1) as u64 == 0
    }
}

/// World pose of a sensor: origin and sensor-to-world rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorPose {
    pub origin: Vec3,
    pub rotation: Matrix3<f64>,
}

impl SensorPose {
    pub fn from_pose(pose: &[f64; 6]) -> Self {
        Self { origin: Vec3::new(pose[0], pose[1], pose[2]), rotation: rotation_zyx(pose[3], pose[4], pose[5]) }
    }

    /// Compose a vehicle pose with a body-frame mount pose.
    pub fn mounted(vehicle: &[f64; 6], mount: &[f64; 6]) -> Self {
        let v = Self::from_pose(vehicle);
        let m = Self::from_pose(mount);
        Self { origin: v.origin + v.rotation * m.origin, rotation: v.rotation * m.rotation }
    }

    pub fn world_dir(&self, local: &Vec3) -> Vec3 {
        (self.rotation * local).normalize()
    }

    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.origin)
    }
}

/// What the sensors cast against.
pub struct CastContext<'a> {
    pub world: &'a World,
    pub backend: &'a dyn RayBackend,
    pub stats: &'a QueryStats,
}

impl CastContext<'_> {
    pub fn cast(&self, origin: Vec3, dir: Vec3, max_range: f64) -> Result<Option<Hit>, SensorError> {
        let ray = Ray::new(origin, dir, max_range)?;
        Ok(self.backend.cast(self.world, &ray, self.stats)?)
    }
}

/// Lambertian return with inverse-square falloff beyond 1 m.
pub fn intensity(hit: &Hit, dir: &Vec3) -> f64 {
    let cos_inc = hit.normal.dot(dir).abs();
    (cos_inc / hit.range.max(1.0).powi(2)).clamp(0.0, 1.0)
}

/// Range serialised as `null` when infinite (a miss).
pub mod range_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }

    pub mod vec {
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&x.is_finite().then_some(*x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Ok(Vec::<Option<f64>>::deserialize(d)?.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoReturn {
    #[serde(with = "range_serde")]
    pub range: f64,
    pub intensity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<SemanticLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultibeamScan {
    pub beam_angles: Vec<f64>,
    #[serde(with = "range_serde::vec")]
    pub ranges: Vec<f64>,
    pub intensities: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<Option<SemanticLabel>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidescanLine {
    pub bin_size: f64,
    pub port: Vec<f64>,
    pub starboard: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub port_labels: Option<Vec<Option<SemanticLabel>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starboard_labels: Option<Vec<Option<SemanticLabel>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    /// Sensor-frame points.
    pub points: Vec<[f64; 3]>,
    pub intensities: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<SemanticLabel>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SensorReading {
    Echo(EchoReturn),
    Multibeam(MultibeamScan),
    Sidescan(SidescanLine),
    PointCloud(PointCloud),
    Imu { specific_force: [f64; 3], angular_rate: [f64; 3] },
    Dvl { velocity: [f64; 3] },
    Depth { depth: f64 },
}

/// Vehicle state a sensor sees: current state, previous body velocity and
/// the tick length, for accelerometer differencing.
#[derive(Debug, Clone, Copy)]
pub struct VehicleView<'a> {
    pub state: &'a RigidBodyState,
    pub previous_nu: Option<&'a [f64; 6]>,
    pub dt: f64,
    pub gravity: f64,
}

/// Evaluate one sensor. `cast` is required for ranging sensors.
pub fn evaluate(
    spec: &SensorSpec,
    vehicle: &VehicleView,
    cast: Option<&CastContext>,
    rng: &mut SimRng,
) -> Result<SensorReading, SensorError> {
    let pose = SensorPose::mounted(&vehicle.state.eta, &spec.mount_pose);
    let need = || cast.ok_or_else(|| SensorError::InvalidSpec(format!("{} needs a ray backend", spec.sensor.name())));
    let rng_opt = |speckle: bool, rng: &mut SimRng| -> Option<SimRng> { speckle.then(|| SimRng::seed_from_u64(rng.next_u64())) };
    Ok(match &spec.sensor {
        SensorKind::Echo { max_range, speckle } => {
            let mut r = rng_opt(*speckle, rng);
            SensorReading::Echo(echo_sounder(need()?, &pose, *max_range, spec.semantic, r.as_mut())?)
        }
        SensorKind::Multibeam { n_beams, swath_aperture, max_range, speckle } => {
            let mut r = rng_opt(*speckle, rng);
            SensorReading::Multibeam(multibeam_scan(need()?, &pose, *n_beams, *swath_aperture, *max_range, spec.semantic, r.as_mut())?)
        }
        SensorKind::Sidescan { n_bins, tilt, vertical_aperture, max_range, rays_per_bin, speckle } => {
            let mut r = rng_opt(*speckle, rng);
            let geom = sonar::SidescanGeometry {
                n_bins: *n_bins,
                tilt: *tilt,
                vertical_aperture: *vertical_aperture,
                max_range: *max_range,
                rays_per_bin: *rays_per_bin,
            };
            SensorReading::Sidescan(sidescan_line(need()?, &pose, &geom, spec.semantic, r.as_mut())?)
        }
        SensorKind::Lidar { n_lasers, fov_vertical, fov_horizontal, points_per_rotation, max_range } => {
            let geom = lidar::LidarGeometry {
                n_lasers: *n_lasers,
                fov_vertical: *fov_vertical,
                fov_horizontal: *fov_horizontal,
                points_per_rotation: *points_per_rotation,
                max_range: *max_range,
            };
            SensorReading::PointCloud(lidar_scan(need()?, &pose, &geom, spec.semantic)?)
        }
        SensorKind::Imu { .. } | SensorKind::Dvl { .. } | SensorKind::Depth { .. } => {
            let nav = nav_suite(vehicle, &spec.sensor, rng);
            match spec.sensor {
                SensorKind::Imu { .. } => SensorReading::Imu { specific_force: nav.specific_force, angular_rate: nav.angular_rate },
                SensorKind::Dvl { .. } => SensorReading::Dvl { velocity: nav.velocity },
                _ => SensorReading::Depth { depth: nav.depth },
            }
        }
    })
}
