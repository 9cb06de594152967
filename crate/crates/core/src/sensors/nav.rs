//! Inertial, Doppler velocity and pressure depth sensors.

use super::{SensorKind, VehicleView};
use crate::geom::{rotation_zyx, Vec3};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavReading {
    /// Body-frame specific force, m/s^2. Reads (0, 0, -g) at rest.
    pub specific_force: [f64; 3],
    pub angular_rate: [f64; 3],
    /// Body-frame velocity relative to the ground.
    pub velocity: [f64; 3],
    pub depth: f64,
}

/// Noise-free truth, then the noise of the requested sensor kind.
pub fn nav_suite(view: &VehicleView, kind: &SensorKind, rng: &mut SimRng) -> NavReading {
    let s = view.state;
    let v = Vec3::new(s.nu[0], s.nu[1], s.nu[2]);
    let w = Vec3::new(s.nu[3], s.nu[4], s.nu[5]);
    let vdot = match view.previous_nu {
        Some(p) if view.dt > 0.0 => (v - Vec3::new(p[0], p[1], p[2])) / view.dt,
        _ => Vec3::zeros(),
    };
    let r = rotation_zyx(s.eta[3], s.eta[4], s.eta[5]);
    let f = vdot + w.cross(&v) - r.transpose() * Vec3::new(0.0, 0.0, view.gravity);
    let mut out = NavReading { specific_force: f.into(), angular_rate: w.into(), velocity: v.into(), depth: s.eta[2] };
    let mut jitter = |xs: &mut [f64], sd: f64| {
        if sd > 0.0 {
            for x in xs {
                *x += rng.gaussian(0.0, sd);
            }
        }
    };
    match kind {
        SensorKind::Imu { accel_noise, gyro_noise } => {
            jitter(&mut out.specific_force, *accel_noise);
            jitter(&mut out.angular_rate, *gyro_noise);
        }
        SensorKind::Dvl { noise } => jitter(&mut out.velocity, *noise),
        SensorKind::Depth { noise } => jitter(std::slice::from_mut(&mut out.depth), *noise),
        _ => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::RigidBodyState;

    #[test]
    fn accelerometer_at_rest_reads_minus_g() {
        let s = RigidBodyState::at_rest([0.0, 0.0, 5.0, 0.0, 0.0, 1.0], 4);
        let view = VehicleView { state: &s, previous_nu: Some(&[0.0; 6]), dt: 0.1, gravity: 9.81 };
        let r = nav_suite(&view, &SensorKind::Imu { accel_noise: 0.0, gyro_noise: 0.0 }, &mut SimRng::seed_from_u64(1));
        assert!((Vec3::from(r.specific_force) - Vec3::new(0.0, 0.0, -9.81)).norm() < 1e-12);
        assert_eq!(r.depth, 5.0);
    }

    #[test]
    fn pitched_accelerometer_sees_gravity_forward() {
        let s = RigidBodyState::at_rest([0.0, 0.0, 5.0, 0.0, 0.3, 0.0], 4);
        let view = VehicleView { state: &s, previous_nu: None, dt: 0.1, gravity: 9.81 };
        let r = nav_suite(&view, &SensorKind::Dvl { noise: 0.0 }, &mut SimRng::seed_from_u64(1));
        assert!((r.specific_force[0] - 9.81 * 0.3f64.sin()).abs() < 1e-12);
    }
}
