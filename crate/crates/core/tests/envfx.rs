mod support;

use mariner_core::envfx::buoyancy_force;
use mariner_core::geom::{rotation_zyx, Vec3};

#[test]
fn half_submerged_cylinder() {
    for err in support::partial_buoyancy_errors() {
        assert!(err < 0.02, "relative error {err}");
    }
    let p = support::remus();
    let cb = Vec3::from(p.hydrostatic.r_cb);
    let level = buoyancy_force(None, &p, &[0.0, 0.0, -cb.z, 0.0, 0.0, 0.0], 0.0, 100);
    let half = 0.5 * p.environmental.water_density * p.environmental.gravity * p.hydrostatic.displaced_volume;
    assert!((-level[2] - half).abs() / half < 1e-12);
}

#[test]
fn deep_buoyancy_matches_restoring_term() {
    assert!(support::deep_buoyancy_gap() <= 1e-9);
    // Direct form: B straight up in the world, moment about CB's lever arm.
    let p = support::remus();
    let b = p.buoyancy();
    let cb = Vec3::from(p.hydrostatic.r_cb);
    for att in [[0.0, 0.0, 0.0], [0.2, -0.3, 1.0], [-0.5, 0.6, -2.0]] {
        let eta = [3.0, -4.0, 20.0, att[0], att[1], att[2]];
        let f = buoyancy_force(None, &p, &eta, 0.0, 100);
        let up = rotation_zyx(att[0], att[1], att[2]).transpose() * Vec3::new(0.0, 0.0, -b);
        let m = cb.cross(&up);
        let expect = [up.x, up.y, up.z, m.x, m.y, m.z];
        for i in 0..6 {
            assert!((f[i] - expect[i]).abs() <= 1e-9, "component {i}: {} vs {}", f[i], expect[i]);
        }
    }
}

#[test]
fn dispersion_period() {
    for err in support::dispersion_errors() {
        assert!(err < 0.01, "relative period error {err}");
    }
}
