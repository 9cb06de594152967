//! Small geometry kit shared by the world, the ray backends and the dynamics.

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Triangle = [Vec3; 3];

/// Axis-aligned box, closed on both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb::new(self.min.inf(&other.min), self.max.sup(&other.max))
    }

    pub fn of_triangle(tri: &Triangle) -> Aabb {
        let mut b = Aabb::empty();
        for v in tri {
            b.grow(v);
        }
        b
    }

    pub fn center(&self) -> Vec3 {
        0.5 * (self.min + self.max)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    /// Slab test. Returns the parametric interval `[t_enter, t_exit]` clipped
    /// to `[t_min, t_max]`, or `None` when the ray misses.
    pub fn ray_interval(
        &self,
        origin: &Vec3,
        inv_dir: &Vec3,
        t_min: f64,
        t_max: f64,
    ) -> Option<(f64, f64)> {
        let mut t0 = t_min;
        let mut t1 = t_max;
        for i in 0..3 {
            let inv = inv_dir[i];
            if inv.is_infinite() {
                // Parallel to this slab.
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let mut a = (self.min[i] - origin[i]) * inv;
            let mut b = (self.max[i] - origin[i]) * inv;
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}

/// Component-wise reciprocal with signed infinities for zero components.
pub fn inverse_direction(dir: &Vec3) -> Vec3 {
    dir.map(|d| if d == 0.0 { f64::INFINITY } else { 1.0 / d })
}

/// Möller-Trumbore ray/triangle intersection. Returns `t` for hits with
/// `t_min < t <= t_max`, both faces accepted.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, tri: &Triangle, t_min: f64, t_max: f64) -> Option<f64> {
    const EPS: f64 = 1e-14;
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < EPS {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv_det;
    (t > t_min && t <= t_max).then_some(t)
}

pub fn triangle_normal(tri: &Triangle) -> Vec3 {
    let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
    let len = n.norm();
    if len > 0.0 {
        n / len
    } else {
        Vec3::z()
    }
}

pub fn triangle_area(tri: &Triangle) -> f64 {
    0.5 * (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).norm()
}

/// Flip `n` so it faces against `dir`.
pub fn face_forward(n: Vec3, dir: &Vec3) -> Vec3 {
    if n.dot(dir) > 0.0 {
        -n
    } else {
        n
    }
}

/// Separating-axis triangle/box overlap test (Akenine-Möller).
pub fn triangle_box_overlap(center: &Vec3, half: &Vec3, tri: &Triangle) -> bool {
    let v0 = tri[0] - center;
    let v1 = tri[1] - center;
    let v2 = tri[2] - center;
    let e = [v1 - v0, v2 - v1, v0 - v2];

    // Nine edge cross-product axes.
    let axes = [Vec3::x(), Vec3::y(), Vec3::z()];
    for edge in &e {
        for axis in &axes {
            let a = axis.cross(edge);
            if a.norm_squared() < 1e-30 {
                continue;
            }
            let p0 = v0.dot(&a);
            let p1 = v1.dot(&a);
            let p2 = v2.dot(&a);
            let r = half.x * a.x.abs() + half.y * a.y.abs() + half.z * a.z.abs();
            let lo = p0.min(p1).min(p2);
            let hi = p0.max(p1).max(p2);
            if lo > r || hi < -r {
                return false;
            }
        }
    }

    // Box face normals.
    for i in 0..3 {
        let lo = v0[i].min(v1[i]).min(v2[i]);
        let hi = v0[i].max(v1[i]).max(v2[i]);
        if lo > half[i] || hi < -half[i] {
            return false;
        }
    }

    // Triangle plane.
    let n = e[0].cross(&e[1]);
    let d = n.dot(&v0);
    let r = half.x * n.x.abs() + half.y * n.y.abs() + half.z * n.z.abs();
    d.abs() <= r
}

/// Body-to-world rotation for ZYX Euler angles (roll, pitch, yaw).
pub fn rotation_zyx(phi: f64, theta: f64, psi: f64) -> Matrix3<f64> {
    let (sphi, cphi) = phi.sin_cos();
    let (sth, cth) = theta.sin_cos();
    let (spsi, cpsi) = psi.sin_cos();
    Matrix3::new(
        cpsi * cth,
        -spsi * cphi + cpsi * sth * sphi,
        spsi * sphi + cpsi * cphi * sth,
        spsi * cth,
        cpsi * cphi + sphi * sth * spsi,
        -cpsi * sphi + sth * spsi * cphi,
        -sth,
        cth * sphi,
        cth * cphi,
    )
}

/// Skew-symmetric cross-product matrix: `skew(a) * b == a x b`.
pub fn skew(a: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// Pose `[x, y, z, roll, pitch, yaw]` applied to a local point.
pub fn transform_point(pose: &[f64; 6], p: &Vec3) -> Vec3 {
    rotation_zyx(pose[3], pose[4], pose[5]) * p + Vec3::new(pose[0], pose[1], pose[2])
}
