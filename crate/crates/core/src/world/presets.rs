//! Bundled worlds.

use super::{box_mesh, cylinder_mesh, Heightfield, SemanticLabel, World};

pub const CLASS_DAM_WALL: u16 = 10;
pub const CLASS_TOWER: u16 = 11;
pub const CLASS_DEBRIS: u16 = 12;

/// Desk-scale reservoir: an 80 x 40 m V-shaped valley sloping down towards a
/// dam wall, with an intake tower and scattered debris blocks.
pub fn dam() -> World {
    let cell = 0.5;
    let (nx, ny) = (161, 81);
    let mut depth = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let x = i as f64 * cell;
            let y = j as f64 * cell;
            let across = 1.0 - ((y - 20.0) / 20.0).abs();
            let along = x / 80.0;
            let ripple = 0.3 * (((i * 7 + j * 3) % 11) as f64 / 10.0 - 0.5);
            depth.push(4.0 + 10.0 * across + 6.0 * along * across + ripple);
        }
    }
    let hf = Heightfield::new([0.0, 0.0], cell, nx, ny, depth, SemanticLabel::SEAFLOOR).expect("valid preset grid");
    let mut world = World::new(hf);

    let wall = box_mesh([3.0, 40.0, 22.0]);
    world
        .spawn_prop(wall, [74.0, 20.0, 9.0, 0.0, 0.0, 0.0], SemanticLabel::new(CLASS_DAM_WALL, 1))
        .expect("wall");
    world
        .spawn_prop(cylinder_mesh(1.5, 18.0, 24), [66.0, 14.0, 9.0, 0.0, 0.0, 0.0], SemanticLabel::new(CLASS_TOWER, 1))
        .expect("tower");
    let debris = [(20.0, 18.0, 0.3), (31.0, 24.0, 1.1), (45.0, 21.0, 0.7), (52.0, 16.5, 2.0), (58.0, 25.0, 2.6)];
    for (k, (x, y, yaw)) in debris.into_iter().enumerate() {
        let ground = world.heightfield().height_at(x, y).expect("inside");
        world
            .spawn_prop(box_mesh([1.2, 0.8, 0.8]), [x, y, ground - 0.4, 0.0, 0.0, yaw], SemanticLabel::new(CLASS_DEBRIS, k as u32 + 1))
            .expect("debris");
    }
    world
}
