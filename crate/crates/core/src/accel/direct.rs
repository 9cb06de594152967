//! Exact ray casting against the live world.

use std::time::Instant;

use super::{Hit, QueryStats, Ray};
use crate::geom::{face_forward, inverse_direction, ray_triangle, triangle_normal, Vec3};
use crate::world::{BilinearPatch, Heightfield, World};

const ROOT_TOL: f64 = 1e-9;

/// First intersection of `ray` with the heightfield or any prop.
pub fn direct_cast(world: &World, ray: &Ray, stats: &QueryStats) -> Option<Hit> {
    let start = Instant::now();
    stats.record_ray();
    let hit = cast_inner(world, ray);
    stats.record_time(start.elapsed());
    hit
}

fn cast_inner(world: &World, ray: &Ray) -> Option<Hit> {
    let o = ray.origin();
    let d = ray.direction();
    let hf = world.heightfield();
    let mut best = heightfield_hit(hf, o, d, ray.max_range()).map(|(t, n)| Hit {
        range: t,
        point: ray.at(t),
        normal: face_forward(n, d),
        label: hf.label(),
    });

    let inv = inverse_direction(d);
    for prop in world.props() {
        let limit = best.as_ref().map_or(ray.max_range(), |h| h.range);
        if prop.bounds().ray_interval(o, &inv, 0.0, limit).is_none() {
            continue;
        }
        let mut t_best = limit;
        let mut found = None;
        for tri in prop.world_triangles() {
            if let Some(t) = ray_triangle(o, d, tri, 0.0, t_best) {
                if found.is_none() || t < t_best {
                    t_best = t;
                    found = Some(tri);
                }
            }
        }
        if let Some(tri) = found {
            best = Some(Hit {
                range: t_best,
                point: ray.at(t_best),
                normal: face_forward(triangle_normal(tri), d),
                label: prop.label(),
            });
        }
    }
    best
}

/// Ray parameter and upward surface normal of the first seabed crossing.
fn heightfield_hit(hf: &Heightfield, o: &Vec3, d: &Vec3, max_range: f64) -> Option<(f64, Vec3)> {
    let [x0, y0] = hf.origin();
    let (x1, y1) = (hf.x_max(), hf.y_max());

    if d.x == 0.0 && d.y == 0.0 {
        if !hf.contains(o.x, o.y) {
            return None;
        }
        let h = hf.height_at(o.x, o.y).ok()?;
        let t = (h - o.z) / d.z;
        if !(0.0..=max_range).contains(&t) {
            return None;
        }
        let (i, j) = hf.cell_of(o.x, o.y);
        return Some((t, hf.patch(i, j).normal(o.x, o.y)));
    }

    // Clip to the footprint in the horizontal plane.
    let (mut t_enter, mut t_exit) = (0.0f64, max_range);
    for (oc, dc, lo, hi) in [(o.x, d.x, x0, x1), (o.y, d.y, y0, y1)] {
        if dc == 0.0 {
            if oc < lo || oc > hi {
                return None;
            }
            continue;
        }
        let mut a = (lo - oc) / dc;
        let mut b = (hi - oc) / dc;
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        t_enter = t_enter.max(a);
        t_exit = t_exit.min(b);
    }
    if t_enter > t_exit {
        return None;
    }

    // Whole-field depth prefilter.
    let za = o.z + d.z * t_enter;
    let zb = o.z + d.z * t_exit;
    if za.max(zb) < hf.min_depth() || za.min(zb) > hf.max_depth() {
        return None;
    }

    let s = hf.cell_size();
    let p = o + d * t_enter;
    let (mut i, mut j) = hf.cell_of(p.x, p.y);
    let (nci, ncj) = (hf.nx() as isize - 1, hf.ny() as isize - 1);

    let axis = |oc: f64, dc: f64, base: f64, idx: usize| -> (isize, f64, f64) {
        if dc > 0.0 {
            (1, (base + (idx + 1) as f64 * s - oc) / dc, s / dc)
        } else if dc < 0.0 {
            (-1, (base + idx as f64 * s - oc) / dc, -s / dc)
        } else {
            (0, f64::INFINITY, f64::INFINITY)
        }
    };
    let (step_i, mut next_x, dt_x) = axis(o.x, d.x, x0, i);
    let (step_j, mut next_y, dt_y) = axis(o.y, d.y, y0, j);

    let mut t = t_enter;
    loop {
        let seg_end = next_x.min(next_y).min(t_exit);
        let patch = hf.patch(i, j);
        if let Some(tc) = patch_crossing(&patch, o, d, t, seg_end.max(t)) {
            let hit = o + d * tc;
            return Some((tc, patch.normal(hit.x, hit.y)));
        }
        if seg_end >= t_exit {
            return None;
        }
        if next_x <= next_y {
            let ni = i as isize + step_i;
            if ni < 0 || ni >= nci {
                return None;
            }
            i = ni as usize;
            t = next_x;
            next_x += dt_x;
        } else {
            let nj = j as isize + step_j;
            if nj < 0 || nj >= ncj {
                return None;
            }
            j = nj as usize;
            t = next_y;
            next_y += dt_y;
        }
    }
}

/// Smallest `t` in `[ta, tb]` where the ray meets the bilinear patch.
///
/// Along the segment, `z(t) - h(x(t), y(t))` is a quadratic in `tau = t - ta`.
fn patch_crossing(p: &BilinearPatch, o: &Vec3, d: &Vec3, ta: f64, tb: f64) -> Option<f64> {
    let za = o.z + d.z * ta;
    let zb = o.z + d.z * tb;
    let lo = p.h00.min(p.h10).min(p.h01).min(p.h11);
    let hi = p.h00.max(p.h10).max(p.h01).max(p.h11);
    if za.max(zb) < lo - ROOT_TOL || za.min(zb) > hi + ROOT_TOL {
        return None;
    }

    let s = p.size;
    let u0 = (o.x + d.x * ta - p.x0) / s;
    let v0 = (o.y + d.y * ta - p.y0) / s;
    let du = d.x / s;
    let dv = d.y / s;
    let b = p.h10 - p.h00;
    let c = p.h01 - p.h00;
    let e = p.h00 - p.h10 - p.h01 + p.h11;

    let qa = -e * du * dv;
    let qb = d.z - b * du - c * dv - e * (u0 * dv + v0 * du);
    let qc = za - (p.h00 + b * u0 + c * v0 + e * u0 * v0);
    let f = |tau: f64| (qa * tau + qb) * tau + qc;
    let len = tb - ta;

    let mut best: Option<f64> = None;
    let mut consider = |tau: f64| {
        if tau >= -ROOT_TOL && tau <= len + ROOT_TOL && best.is_none_or(|b| tau < b) {
            best = Some(tau.clamp(0.0, len));
        }
    };
    let scale = qb.abs().max(qc.abs()).max(1e-300);
    if qa.abs() <= 1e-14 * scale {
        if qb != 0.0 {
            consider(-qc / qb);
        } else if qc == 0.0 {
            consider(0.0);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (qb + qb.signum() * sq);
            if q != 0.0 {
                consider(q / qa);
                consider(qc / q);
            } else {
                consider(0.0);
            }
        }
    }

    let tau = match best {
        Some(t) => t,
        None if f(0.0) * f(len) < 0.0 => bisect(&f, 0.0, len),
        None => return None,
    };
    // Newton polish against the quadratic.
    let mut tau = tau;
    for _ in 0..3 {
        let df = 2.0 * qa * tau + qb;
        if df == 0.0 {
            break;
        }
        let step = f(tau) / df;
        let next = tau - step;
        if !(0.0..=len).contains(&next) {
            break;
        }
        tau = next;
        if step.abs() < 1e-15 {
            break;
        }
    }
    let t = ta + tau;
    (t >= 0.0).then_some(t)
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa0 = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (f(m) < 0.0) == (fa0 < 0.0) {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-12 {
            break;
        }
    }
    0.5 * (a + b)
}
