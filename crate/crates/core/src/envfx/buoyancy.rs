//! Slice buoyancy against a flat or wavy surface.
//!
//! The hull is a cylinder of length L and equivalent radius sqrt(V / (pi L)),
//! cut into K equal slices along body x and centred on r_cb. Each slice is
//! treated as horizontal when computing its submerged cross-section. The
//! wrench is returned in body axes about the body origin, the same reference
//! point as the restoring term.

use std::f64::consts::PI;

use nalgebra::Vector6;

use super::WaveField;
use crate::dynamics::VehicleParams;
use crate::geom::{rotation_zyx, Vec3};

pub fn equivalent_radius(params: &VehicleParams) -> f64 {
    (params.hydrostatic.displaced_volume / (PI * params.physical.length)).sqrt()
}

/// Submerged fraction of a circle of radius `r` whose centre lies `d` below
/// the waterline (negative `d` means above).
pub fn submerged_fraction(d: f64, r: f64) -> f64 {
    if d >= r {
        return 1.0;
    }
    if d <= -r {
        return 0.0;
    }
    let seg = r * r * (d / r).acos() - d * (r * r - d * d).sqrt();
    (PI * r * r - seg) / (PI * r * r)
}

pub fn buoyancy_force(
    waves: Option<&WaveField>,
    params: &VehicleParams,
    eta: &[f64; 6],
    t: f64,
    slices: usize,
) -> Vector6<f64> {
    let slices = slices.max(1);
    let rho_g = params.environmental.water_density * params.environmental.gravity;
    let r = equivalent_radius(params);
    let len = params.physical.length;
    let slice_volume = params.hydrostatic.displaced_volume / slices as f64;
    let rot = rotation_zyx(eta[3], eta[4], eta[5]);
    let pos = Vec3::new(eta[0], eta[1], eta[2]);
    let r_cb = Vec3::from(params.hydrostatic.r_cb);
    let down_body = rot.transpose() * Vec3::z();

    let mut out = Vector6::zeros();
    for k in 0..slices {
        let xk = (k as f64 + 0.5) * len / slices as f64 - 0.5 * len;
        let local = r_cb + Vec3::new(xk, 0.0, 0.0);
        let p = pos + rot * local;
        let surface_z = waves.map_or(0.0, |w| -w.height(p.x, p.y, t));
        let frac = submerged_fraction(p.z - surface_z, r);
        if frac == 0.0 {
            continue;
        }
        let f = -down_body * (rho_g * slice_volume * frac);
        let m = local.cross(&f);
        out += Vector6::new(f.x, f.y, f.z, m.x, m.y, m.z);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::default_remus100_params;

    #[test]
    fn fraction_limits() {
        assert_eq!(submerged_fraction(1.0, 0.5), 1.0);
        assert_eq!(submerged_fraction(-1.0, 0.5), 0.0);
        assert!((submerged_fraction(0.0, 0.5) - 0.5).abs() < 1e-15);
        // Symmetry: f(d) + f(-d) = 1.
        for d in [0.1, 0.25, 0.4] {
            assert!((submerged_fraction(d, 0.5) + submerged_fraction(-d, 0.5) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn above_surface_is_zero() {
        let p = default_remus100_params();
        let f = buoyancy_force(None, &p, &[0.0, 0.0, -2.0, 0.0, 0.0, 0.0], 0.0, 10);
        assert_eq!(f, Vector6::zeros());
    }
}
