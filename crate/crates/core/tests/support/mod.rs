//! Independent reference computations shared by integration tests and the
//! acceptance harness.
#![allow(dead_code)]

use mariner_core::dynamics::{
    actuator_forces, damping_matrix, kinematics, restoring_forces, system_matrix, AutopilotState, ControlCommand,
    RigidBodyState, Torpedo, VehicleParams,
};
use mariner_core::geom::{ray_triangle, Vec3};
use mariner_core::nalgebra::{Matrix6, Vector6};
use mariner_core::world::{SemanticLabel, World};

/// Brute-force first hit: every prop triangle, then a marched and bisected
/// heightfield root. Returns range and label.
pub fn exhaustive_cast(world: &World, origin: Vec3, dir: Vec3, max_range: f64) -> Option<(f64, SemanticLabel)> {
    let dir = dir.normalize();
    let mut best: Option<(f64, SemanticLabel)> = None;
    for prop in world.props() {
        for tri in prop.world_triangles() {
            if let Some(t) = ray_triangle(&origin, &dir, tri, 0.0, max_range) {
                if best.map_or(true, |(b, _)| t < b) {
                    best = Some((t, prop.label()));
                }
            }
        }
    }
    let hf = world.heightfield();
    let [x0, y0] = hf.origin();
    let (x1, y1) = (hf.x_max(), hf.y_max());
    let mut exit = max_range;
    for (o, d, lo, hi) in [(origin.x, dir.x, x0, x1), (origin.y, dir.y, y0, y1)] {
        if d > 0.0 {
            exit = exit.min((hi - o) / d);
        } else if d < 0.0 {
            exit = exit.min((lo - o) / d);
        }
    }
    // Clamping only absorbs rounding at the footprint edge.
    let gap = |t: f64| -> Option<f64> {
        let p = origin + dir * t;
        hf.height_at(p.x.clamp(x0, x1), p.y.clamp(y0, y1)).ok().map(|h| p.z - h)
    };
    let limit = best.map_or(max_range, |(b, _)| b).min(exit);
    let step = 0.01 * hf.cell_size();
    let mut t0 = 0.0;
    let mut g0 = gap(0.0);
    while t0 < limit {
        let t1 = (t0 + step).min(limit);
        let g1 = gap(t1);
        if let (Some(a), Some(b)) = (g0, g1) {
            if a < 0.0 && b >= 0.0 {
                let (mut lo, mut hi) = (t0, t1);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if gap(mid).map_or(false, |g| g >= 0.0) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some((hi, hf.label()));
            }
        }
        t0 = t1;
        g0 = g1;
    }
    best
}

/// Plant integrated with a classic RK4 at `plant_dt`, controller sampled
/// and held every `ctrl_dt`. States are recorded after every control period.
pub fn fine_step_run(
    params: &VehicleParams,
    initial: &RigidBodyState,
    command: &ControlCommand,
    ctrl_dt: f64,
    plant_dt: f64,
    duration: f64,
) -> Vec<RigidBodyState> {
    let torpedo = Torpedo::new(params.clone()).unwrap();
    let (_, m_inv) = system_matrix(params).unwrap();
    let nf = params.fin_count();
    let deriv = |x: &[f64], targets: &[f64], n_target: f64| -> Vec<f64> {
        let eta: [f64; 6] = std::array::from_fn(|i| x[i]);
        let nu: [f64; 6] = std::array::from_fn(|i| x[6 + i]);
        let c: Matrix6<f64> = torpedo.coriolis_matrix(&nu);
        let d = damping_matrix(params, &nu);
        let nu_v = Vector6::from(nu);
        let g = Vector6::from(restoring_forces(params, &eta));
        let a = Vector6::from(actuator_forces(params, &nu, &x[12..12 + nf], x[12 + nf]));
        let nu_dot = m_inv * (a + g - c * nu_v - d * nu_v);
        let eta_dot = kinematics(&eta) * nu_v;
        let mut out = vec![0.0; x.len()];
        out[..6].copy_from_slice(eta_dot.as_slice());
        out[6..12].copy_from_slice(nu_dot.as_slice());
        for (k, fin) in params.control_surfaces.fins.iter().enumerate() {
            out[12 + k] = (targets[k] - x[12 + k]) / fin.time_constant;
        }
        out[12 + nf] = (n_target - x[12 + nf]) / params.control_surfaces.propeller_time_constant;
        out
    };
    let mut x: Vec<f64> = initial.eta.iter().chain(&initial.nu).chain(&initial.fin_angles).copied().collect();
    x.push(initial.prop_speed);
    let substeps = (ctrl_dt / plant_dt).round() as usize;
    let h = ctrl_dt / substeps as f64;
    let periods = (duration / ctrl_dt).round() as usize;
    let mut ap = AutopilotState::default();
    let mut out = Vec::with_capacity(periods);
    let to_state = |x: &[f64]| RigidBodyState {
        eta: std::array::from_fn(|i| x[i]),
        nu: std::array::from_fn(|i| x[6 + i]),
        fin_angles: x[12..12 + nf].to_vec(),
        prop_speed: x[12 + nf],
    };
    for _ in 0..periods {
        let act = ap.resolve(params, &to_state(&x), command, ctrl_dt).unwrap();
        let cs = &params.control_surfaces;
        let targets: Vec<f64> =
            cs.fins.iter().zip(&act.fin_commands).map(|(f, d)| d.clamp(-f.max_deflection, f.max_deflection)).collect();
        let n_t = act.prop_speed.clamp(-cs.max_prop_speed, cs.max_prop_speed);
        for _ in 0..substeps {
            let k1 = deriv(&x, &targets, n_t);
            let x2: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
            let k2 = deriv(&x2, &targets, n_t);
            let x3: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
            let k3 = deriv(&x3, &targets, n_t);
            let x4: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
            let k4 = deriv(&x4, &targets, n_t);
            for i in 0..x.len() {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        out.push(to_state(&x));
    }
    out
}

/// Production path: the registry model stepped at `dt`.
pub fn production_run(params: &VehicleParams, initial: &RigidBodyState, command: &ControlCommand, dt: f64, duration: f64) -> Vec<RigidBodyState> {
    use mariner_core::dynamics::{make_model, ModelKind, StepEnv};
    let model = make_model(ModelKind::FossenTorpedo, params.clone()).unwrap();
    let mut ap = AutopilotState::default();
    let mut s = initial.clone();
    let n = (duration / dt).round() as usize;
    (0..n)
        .map(|k| {
            let env = StepEnv { current: Vec3::zeros(), waves: None, t: k as f64 * dt };
            s = model.advance(&s, command, &mut ap, &env, dt).unwrap();
            s.clone()
        })
        .collect()
}

pub fn rms(a: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = a.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    (s / n.max(1) as f64).sqrt()
}

/// Commanded-fin sign changes per second along a trajectory.
pub fn switching_rate(fins: impl Iterator<Item = f64>, duration: f64) -> f64 {
    let mut prev = 0.0f64;
    let mut changes = 0usize;
    for f in fins {
        if f.abs() > 1e-9 {
            if prev != 0.0 && f.signum() != prev {
                changes += 1;
            }
            prev = f.signum();
        }
    }
    changes as f64 / duration
}

use mariner_core::accel::{direct_cast, QueryStats, Ray};
use mariner_core::rng::SimRng;
use mariner_core::world::{generate_world, GenSpec, PropClass, PropShape, TerrainKind, TerrainSpec};

/// 40 x 40 m rolling seabed around 20 m with cubes and piles.
pub fn generated_world(seed: u64, density: f64) -> World {
    let spec = GenSpec {
        terrain: TerrainSpec {
            kind: TerrainKind::Rolling,
            size: [40.0, 40.0],
            cell_size: 1.0,
            base_depth: 20.0,
            relief: 4.0,
            feature_scale: 15.0,
            origin: [0.0, 0.0],
        },
        prop_classes: vec![
            PropClass { name: "rock".into(), class_id: 2, shape: PropShape::Cube { size: 1.5 } },
            PropClass { name: "pile".into(), class_id: 3, shape: PropShape::Cylinder { radius: 0.5, height: 3.0, segments: 12 } },
        ],
        density,
    };
    generate_world(&spec, seed).unwrap()
}

/// Origins in the water column above the footprint, directions uniform
/// over the lower hemisphere.
pub fn random_rays(world: &World, n: usize, max_range: f64, seed: u64) -> Vec<Ray> {
    let mut rng = SimRng::seed_from_u64(seed);
    let hf = world.heightfield();
    let [x0, y0] = hf.origin();
    (0..n)
        .map(|_| {
            let o = Vec3::new(rng.range(x0 + 2.0, hf.x_max() - 2.0), rng.range(y0 + 2.0, hf.y_max() - 2.0), rng.range(2.0, 12.0));
            let z = rng.range(0.05, 1.0);
            let a = rng.range(-std::f64::consts::PI, std::f64::consts::PI);
            let s = (1.0 - z * z).sqrt();
            Ray::new(o, Vec3::new(s * a.cos(), s * a.sin(), z), max_range).unwrap()
        })
        .collect()
}

/// A backend disagreement is tolerated when it sits on a silhouette: a
/// lateral shift of `2 * leaf` changes what the exact cast sees (hit versus
/// miss, another surface, or a range jump beyond `2 * leaf`), or the exact
/// hit is within `2 * leaf` of the range limit.
pub fn in_silhouette_band(world: &World, ray: &Ray, leaf: f64) -> bool {
    let stats = QueryStats::new();
    let d = *ray.direction();
    let base = direct_cast(world, ray, &stats);
    if let Some(h) = &base {
        if ray.max_range() - h.range <= 2.0 * leaf {
            return true;
        }
    }
    let helper = if d.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = d.cross(&helper).normalize();
    let v = d.cross(&u);
    let diag = std::f64::consts::FRAC_1_SQRT_2;
    let offsets = [u, -u, v, -v, (u + v) * diag, (u - v) * diag, (v - u) * diag, -(u + v) * diag];
    offsets.iter().any(|off| {
        let shifted = Ray::new(ray.origin() + off * 2.0 * leaf, d, ray.max_range()).unwrap();
        match (direct_cast(world, &shifted, &stats), &base) {
            (Some(a), Some(b)) => a.label != b.label || (a.range - b.range).abs() > 2.0 * leaf,
            (None, None) => false,
            _ => true,
        }
    })
}

// Measurements shared by the integration tests (which assert on them) and
// the acceptance harness (which prints them against pinned tolerances).

use mariner_core::accel::{make_backend, BackendKind, BackendOptions, RayBackend};
use mariner_core::dynamics::{Actuation, AgentConfig, DynamicsManager, ModelKind};
use mariner_core::envfx::{buoyancy_force, equivalent_radius, CurrentField, WaveComponent, WaveField};
use mariner_core::geom::rotation_zyx;
use mariner_core::sensors::{evaluate, CastContext, SensorKind, SensorPose, SensorReading, SensorSpec, VehicleView};

pub const DOWN: [f64; 6] = [0.0, 0.0, 0.0, 0.0, -std::f64::consts::FRAC_PI_2, 0.0];

pub fn remus() -> VehicleParams {
    mariner_core::dynamics::default_remus100_params()
}

/// REMUS with CG moved onto CB: no restoring moments, W = B.
pub fn neutral() -> VehicleParams {
    let mut p = remus();
    p.hydrostatic.r_cg = p.hydrostatic.r_cb;
    p
}

pub fn cruising_at(p: &VehicleParams, depth: f64, speed: f64) -> RigidBodyState {
    let mut s = RigidBodyState::at_rest([0.0, 0.0, depth, 0.0, 0.0, 0.0], p.fin_count());
    s.nu[0] = speed;
    s.prop_speed = mariner_core::dynamics::speed_to_prop_speed(p, speed);
    s
}

/// Largest `|v' C(v) v| / |v|^2` and smallest `v' D(v) v` over `n` random
/// velocities and centre-of-gravity offsets.
pub fn skew_and_dissipation(n: usize, seed: u64) -> (f64, f64) {
    let mut rng = SimRng::seed_from_u64(seed);
    let (mut skew, mut diss) = (0.0f64, f64::INFINITY);
    for _ in 0..n {
        let mut p = remus();
        p.hydrostatic.r_cg = [rng.range(-0.05, 0.05), rng.range(-0.01, 0.01), rng.range(0.0, 0.05)];
        let nu: [f64; 6] = std::array::from_fn(|_| rng.range(-3.0, 3.0));
        let v = Vector6::from(nu);
        let c = mariner_core::dynamics::coriolis_matrix(&p, &nu).unwrap();
        skew = skew.max(v.dot(&(c * v)).abs() / v.norm_squared());
        diss = diss.min(v.dot(&(damping_matrix(&p, &nu) * v)));
    }
    (skew, diss)
}

/// Largest relative step-to-step kinetic energy increase of an unforced,
/// neutrally ballasted vehicle over `ticks` steps at 30 Hz.
pub fn passive_energy_growth(ticks: usize) -> f64 {
    let torpedo = Torpedo::new(neutral()).unwrap();
    let mut s = RigidBodyState::at_rest([0.0, 0.0, 10.0, 0.0, 0.0, 0.0], 4);
    s.nu = [1.2, -0.3, 0.2, 0.4, -0.2, 0.3];
    let cmd = Actuation { fin_commands: vec![0.0; 4], prop_speed: 0.0 };
    let mut ke = torpedo.kinetic_energy(&s.nu);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..ticks {
        s = torpedo.step(&s, &cmd, Vec3::zeros(), None, 0.0, 1.0 / 30.0).unwrap();
        let next = torpedo.kinetic_energy(&s.nu);
        worst = worst.max((next - ke) / ke);
        ke = next;
    }
    worst
}

/// Least-squares slope of log error against log dt for RK4 on a forced
/// trajectory, with the `(dt, error)` points.
pub fn rk4_order() -> (f64, Vec<(f64, f64)>) {
    let torpedo = Torpedo::new(remus()).unwrap();
    let mut s0 = RigidBodyState::at_rest([0.0, 0.0, 10.0, 0.0, 0.0, 0.0], 4);
    s0.nu = [1.0, 0.1, 0.05, 0.02, 0.03, 0.05];
    let cmd = Actuation { fin_commands: vec![0.1, 0.1, -0.05, -0.05], prop_speed: 12.0 };
    let horizon = 4.0;
    let run = |dt: f64| {
        let mut s = s0.clone();
        for _ in 0..(horizon / dt).round() as usize {
            s = torpedo.step(&s, &cmd, Vec3::zeros(), None, 0.0, dt).unwrap();
        }
        s
    };
    let reference = run(1.0 / 3840.0);
    let pts: Vec<(f64, f64)> = [30.0, 60.0, 120.0, 240.0]
        .iter()
        .map(|hz| {
            let s = run(1.0 / hz);
            let err = s.eta.iter().chain(&s.nu).zip(reference.eta.iter().chain(&reference.nu)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            (1.0 / hz, err)
        })
        .collect();
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|(dt, _)| dt.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, e)| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    (slope, pts)
}

#[derive(Debug, Clone, Copy)]
pub struct StepResponse {
    /// Final value minus setpoint (m or degrees).
    pub final_error: f64,
    /// Peak excursion past the setpoint as a fraction of the step.
    pub overshoot: f64,
    /// RMS of production minus fine-step reference (m or degrees).
    pub rms_vs_reference: f64,
    /// Sign changes per second of the commanded fin.
    pub switching_rate: f64,
}

const CTRL_DT: f64 = 1.0 / 30.0;
const FINE_DT: f64 = 1e-4;

/// Depth step 0 -> 10 m at 1.5 m/s, 120 s.
pub fn depth_step() -> StepResponse {
    let p = remus();
    let s0 = cruising_at(&p, 0.0, 1.5);
    let cmd = ControlCommand::Setpoint { depth: 10.0, heading: 0.0, speed: 1.5 };
    let prod = production_run(&p, &s0, &cmd, CTRL_DT, 120.0);
    let fine = fine_step_run(&p, &s0, &cmd, CTRL_DT, FINE_DT, 120.0);
    let peak = prod.iter().map(|s| s.eta[2]).fold(f64::MIN, f64::max);
    StepResponse {
        final_error: prod.last().unwrap().eta[2] - 10.0,
        overshoot: ((peak - 10.0) / 10.0).max(0.0),
        rms_vs_reference: rms(prod.iter().zip(&fine).map(|(a, b)| a.eta[2] - b.eta[2])),
        switching_rate: switching_rate(prod.iter().map(|s| s.fin_angles[2]), 120.0),
    }
}

/// Heading step 0 -> 90 degrees at 10 m, 60 s; errors in degrees.
pub fn heading_step() -> StepResponse {
    let target = std::f64::consts::FRAC_PI_2;
    let p = remus();
    let s0 = cruising_at(&p, 10.0, 1.5);
    let cmd = ControlCommand::Setpoint { depth: 10.0, heading: target, speed: 1.5 };
    let prod = production_run(&p, &s0, &cmd, CTRL_DT, 60.0);
    let fine = fine_step_run(&p, &s0, &cmd, CTRL_DT, FINE_DT, 60.0);
    let peak = prod.iter().map(|s| s.eta[5]).fold(f64::MIN, f64::max);
    StepResponse {
        final_error: (prod.last().unwrap().eta[5] - target).to_degrees(),
        overshoot: ((peak - target) / target).max(0.0),
        rms_vs_reference: rms(prod.iter().zip(&fine).map(|(a, b)| (a.eta[5] - b.eta[5]).to_degrees())),
        switching_rate: switching_rate(prod.iter().map(|s| s.fin_angles[0]), 60.0),
    }
}

/// Relative error of the ground velocity of an unpowered vehicle after
/// 600 s in a uniform 0.5 m/s current.
pub fn zero_thrust_drift_error() -> f64 {
    let p = neutral();
    let current = Vec3::new(0.5, 0.0, 0.0);
    let mut s = RigidBodyState::at_rest([0.0, 0.0, 10.0, 0.0, 0.0, 0.0], 4);
    let cmd = Actuation { fin_commands: vec![0.0; 4], prop_speed: 0.0 };
    for _ in 0..6000 {
        s = mariner_core::dynamics::step(&p, &s, &cmd, current.into(), 0.1).unwrap();
    }
    let ground = kinematics(&s.eta).fixed_view::<3, 3>(0, 0) * Vec3::new(s.nu[0], s.nu[1], s.nu[2]);
    (ground - current).norm() / current.norm()
}

/// Cross-track gap between a vehicle in an eastward shear current and one
/// in still water, against the time integral of the current it sampled.
/// Both start at rest relative to their water, so the decoupled sway
/// equation keeps the relative sway at zero and the gap is that integral.
pub fn shear_cross_track() -> (f64, f64) {
    let agent = |p: VehicleParams, s: RigidBodyState| AgentConfig {
        name: "a".into(),
        model: ModelKind::FossenTorpedo,
        params: p,
        initial_state: s,
        initial_command: None,
    };
    let p = remus();
    let s = cruising_at(&p, 5.0, 1.5);
    let shear = CurrentField::AnalyticShear { surface_velocity: [0.0, 0.3, 0.0], decay_depth: 20.0 };
    let mut s_drift = s.clone();
    s_drift.nu[1] = shear.sample(&Vec3::new(0.0, 0.0, 5.0), 0.0).y;
    let cmd = ControlCommand::Setpoint { depth: 5.0, heading: 0.0, speed: 1.5 };
    let dt = 0.1;
    let mut drift = DynamicsManager::new(dt, vec![agent(p.clone(), s_drift)]).unwrap().with_current(Some(shear));
    let mut still = DynamicsManager::new(dt, vec![agent(p, s)]).unwrap();
    let mut integral = 0.0;
    for _ in 0..1200 {
        let out = drift.tick(&[("a".into(), cmd.clone())], dt, None).unwrap();
        still.tick(&[("a".into(), cmd.clone())], dt, None).unwrap();
        integral += out.agents[0].current[1] * dt;
    }
    (drift.state("a").unwrap().eta[1] - still.state("a").unwrap().eta[1], integral)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Equivalence {
    pub rays: usize,
    pub dual_hits: usize,
    /// Dual hits whose ranges differ by more than `2 * leaf`.
    pub range_disagreements: usize,
    pub hit_miss_disagreements: usize,
    /// Dual hits with agreeing ranges but different labels.
    pub label_disagreements: usize,
    /// Hit/miss disagreements off the silhouette band.
    pub hit_miss_outside_band: usize,
    /// Disagreements of any kind off the silhouette band.
    pub outside_band: usize,
}

/// Octree against raycast over `rays`.
pub fn backend_equivalence(world: &World, rays: &[Ray], leaf: f64) -> Equivalence {
    let tree = make_backend(BackendKind::Octree, world, &BackendOptions { leaf_size: leaf }).unwrap();
    let direct = make_backend(BackendKind::Raycast, world, &BackendOptions::default()).unwrap();
    let stats = QueryStats::new();
    let mut e = Equivalence { rays: rays.len(), ..Default::default() };
    for ray in rays {
        let (disagree, hit_miss) = match (direct.cast(world, ray, &stats).unwrap(), tree.cast(world, ray, &stats).unwrap()) {
            (Some(a), Some(b)) => {
                e.dual_hits += 1;
                if (a.range - b.range).abs() > 2.0 * leaf {
                    e.range_disagreements += 1;
                    (true, false)
                } else if a.label != b.label {
                    e.label_disagreements += 1;
                    (true, false)
                } else {
                    (false, false)
                }
            }
            (None, None) => (false, false),
            _ => {
                e.hit_miss_disagreements += 1;
                (true, true)
            }
        };
        if disagree && !in_silhouette_band(world, ray, leaf) {
            e.outside_band += 1;
            e.hit_miss_outside_band += usize::from(hit_miss);
        }
    }
    e
}

/// A prop spawned mid-run: the raycast return changes at once with no
/// rebuild, the octree refuses to answer until rebuilt, then agrees.
pub fn spawned_prop_liveness() -> Result<(), String> {
    use mariner_core::accel::{AccelError, DirectBackend, OctreeBackend};
    let mut world = generated_world(1, 0.0);
    let mut tree = OctreeBackend::new(mariner_core::accel::build_octree(&world, 0.25).map_err(|e| e.to_string())?);
    let stats = QueryStats::new();
    let ray = Ray::new(Vec3::new(20.0, 20.0, 2.0), Vec3::z(), 100.0).unwrap();
    let cast = |w: &World, b: &dyn RayBackend| b.cast(w, &ray, &stats);
    let before = cast(&world, &DirectBackend).map_err(|e| e.to_string())?.ok_or("no seabed return")?;
    if before.label != SemanticLabel::SEAFLOOR {
        return Err(format!("before spawn saw {:?}", before.label));
    }
    if cast(&world, &tree).map_err(|e| e.to_string())?.map(|h| h.label) != Some(SemanticLabel::SEAFLOOR) {
        return Err("octree disagreed before spawn".into());
    }
    let label = SemanticLabel::new(9, 1);
    world.spawn_prop(mariner_core::world::box_mesh([2.0; 3]), [20.0, 20.0, 8.0, 0.0, 0.0, 0.0], label).map_err(|e| e.to_string())?;
    let after = cast(&world, &DirectBackend).map_err(|e| e.to_string())?.ok_or("no return after spawn")?;
    if after.label != label || (after.range - 5.0).abs() > 1e-9 {
        return Err(format!("raycast after spawn: {after:?}"));
    }
    match cast(&world, &tree) {
        Err(AccelError::StaleOctree { .. }) => {}
        other => return Err(format!("stale octree answered {other:?}")),
    }
    tree.rebuild(&world).map_err(|e| e.to_string())?;
    let rebuilt = cast(&world, &tree).map_err(|e| e.to_string())?.ok_or("no return after rebuild")?;
    if rebuilt.label != label || (rebuilt.range - 5.0).abs() > 0.5 {
        return Err(format!("rebuilt octree: {rebuilt:?}"));
    }
    Ok(())
}

pub fn sensor_spec(sensor: SensorKind, semantic: bool) -> SensorSpec {
    SensorSpec { name: "s".into(), sensor, mount_pose: DOWN, rate_ticks: 1, backend: BackendKind::Raycast, semantic, leaf_size: 0.1 }
}

pub fn view(state: &RigidBodyState) -> VehicleView<'_> {
    VehicleView { state, previous_nu: None, dt: 0.1, gravity: 9.81 }
}

/// Random poses inside the footprint, 3-8 m deep, near level.
pub fn poses(world: &World, n: usize, seed: u64) -> Vec<RigidBodyState> {
    let mut rng = SimRng::seed_from_u64(seed);
    let hf = world.heightfield();
    (0..n)
        .map(|_| {
            let eta = [
                rng.range(8.0, hf.x_max() - 8.0),
                rng.range(8.0, hf.y_max() - 8.0),
                rng.range(3.0, 8.0),
                rng.range(-0.1, 0.1),
                rng.range(-0.1, 0.1),
                rng.range(-3.0, 3.0),
            ];
            RigidBodyState::at_rest(eta, 4)
        })
        .collect()
}

/// RMS of multibeam ranges against the exhaustive oracle over 20 poses.
pub fn multibeam_rms(world: &World, backend: &dyn RayBackend) -> f64 {
    let stats = QueryStats::new();
    let ctx = CastContext { world, backend, stats: &stats };
    let s = sensor_spec(SensorKind::Multibeam { n_beams: 64, swath_aperture: 2.0, max_range: 60.0, speckle: false }, false);
    let mut sq = Vec::new();
    for state in poses(world, 20, 4) {
        let SensorReading::Multibeam(scan) = evaluate(&s, &view(&state), Some(&ctx), &mut SimRng::seed_from_u64(0)).unwrap() else {
            panic!("wrong reading")
        };
        let pose = SensorPose::mounted(&state.eta, &s.mount_pose);
        for (b, r) in scan.beam_angles.iter().zip(&scan.ranges) {
            let dir = pose.world_dir(&Vec3::new(b.cos(), b.sin(), 0.0));
            let truth = exhaustive_cast(world, pose.origin, dir, 60.0).map(|(t, _)| t);
            if let (Some(t), true) = (truth, r.is_finite()) {
                sq.push((r - t).powi(2));
            }
        }
    }
    assert!(sq.len() > 1000);
    (sq.iter().sum::<f64>() / sq.len() as f64).sqrt()
}

/// Semantic multibeam labels against the exhaustive oracle: 20 poses of 50
/// beams. Returns (checked, mismatches, prop returns).
pub fn semantic_label_check() -> (usize, usize, usize) {
    let world = generated_world(8, 6.0);
    let stats = QueryStats::new();
    let ctx = CastContext { world: &world, backend: &mariner_core::accel::DirectBackend, stats: &stats };
    let s = sensor_spec(SensorKind::Multibeam { n_beams: 50, swath_aperture: 2.4, max_range: 60.0, speckle: false }, true);
    let (mut checked, mut wrong, mut props) = (0, 0, 0);
    for state in poses(&world, 20, 9) {
        let SensorReading::Multibeam(scan) = evaluate(&s, &view(&state), Some(&ctx), &mut SimRng::seed_from_u64(0)).unwrap() else {
            panic!("wrong reading")
        };
        let pose = SensorPose::mounted(&state.eta, &s.mount_pose);
        for (b, l) in scan.beam_angles.iter().zip(scan.labels.unwrap()) {
            let dir = pose.world_dir(&Vec3::new(b.cos(), b.sin(), 0.0));
            let want = exhaustive_cast(&world, pose.origin, dir, 60.0).map(|(_, l)| l);
            checked += 1;
            wrong += usize::from(l != want);
            props += usize::from(want.is_some_and(|w| w != SemanticLabel::SEAFLOOR));
        }
    }
    (checked, wrong, props)
}

/// `(rate, ticks, emitted, floor(ticks / rate))` for a table of cadences.
pub fn cadence_table() -> Vec<(u32, u64, usize, usize)> {
    [(1, 509), (3, 100), (5, 509), (10, 509), (7, 7), (8, 7)]
        .into_iter()
        .map(|(rate, ticks)| {
            let s = SensorSpec { rate_ticks: rate, ..sensor_spec(SensorKind::Depth { noise: 0.0 }, false) };
            (rate, ticks, (0..ticks).filter(|t| s.emits(*t)).count(), (ticks / rate as u64) as usize)
        })
        .collect()
}

/// Relative error of the zero-crossing period against `sqrt(2 pi L / g)`
/// for wavelengths 5, 20 and 80 m.
pub fn dispersion_errors() -> Vec<f64> {
    use std::f64::consts::PI;
    [5.0, 20.0, 80.0]
        .into_iter()
        .map(|wavelength| {
            let field = WaveField {
                components: vec![WaveComponent { amplitude: 0.3, wavelength, direction: [1.0, 0.5], phase: 0.4, steepness: 0.5 }],
                gravity: 9.81,
            };
            field.validate().unwrap();
            let expect = (2.0 * PI * wavelength / 9.81).sqrt();
            let dt = expect / 2000.0;
            let (mut prev, mut crossings) = (field.height(1.0, 2.0, 0.0), Vec::new());
            for i in 1..=20_000 {
                let t = i as f64 * dt;
                let h = field.height(1.0, 2.0, t);
                if prev < 0.0 && h >= 0.0 {
                    crossings.push(t - dt * h / (h - prev));
                }
                prev = h;
            }
            let period = (crossings.last().unwrap() - crossings[0]) / (crossings.len() - 1) as f64;
            (period - expect).abs() / expect
        })
        .collect()
}

/// Volume of the part of a tilted cylinder below `z = 0`, by midpoint
/// quadrature over the solid (not over slices).
pub fn submerged_cylinder_volume(len: f64, r: f64, centre: Vec3, pitch: f64) -> f64 {
    use std::f64::consts::PI;
    let rot = rotation_zyx(0.0, pitch, 0.0);
    let (nx, nr, nphi) = (400, 60, 120);
    let mut vol = 0.0;
    for i in 0..nx {
        let x = (i as f64 + 0.5) / nx as f64 * len - 0.5 * len;
        for j in 0..nr {
            let rho = (j as f64 + 0.5) / nr as f64 * r;
            for k in 0..nphi {
                let phi = (k as f64 + 0.5) / nphi as f64 * 2.0 * PI;
                let p = centre + rot * Vec3::new(x, rho * phi.cos(), rho * phi.sin());
                if p.z > 0.0 {
                    vol += (len / nx as f64) * (r / nr as f64) * rho * (2.0 * PI / nphi as f64);
                }
            }
        }
    }
    vol
}

/// Relative buoyancy error at K = 100 slices for a vehicle cutting the
/// surface at several heaves and pitches.
pub fn partial_buoyancy_errors() -> Vec<f64> {
    let p = remus();
    let r = equivalent_radius(&p);
    let rho_g = p.environmental.water_density * p.environmental.gravity;
    let cb = Vec3::from(p.hydrostatic.r_cb);
    [(0.0, 0.0), (0.3 * r, 0.0), (-0.4 * r, 0.0), (0.0, 0.02), (0.2 * r, -0.03)]
        .into_iter()
        .map(|(depth, pitch)| {
            let eta = [0.0, 0.0, depth - cb.z, 0.0, pitch, 0.0];
            let centre = Vec3::new(0.0, 0.0, eta[2]) + rotation_zyx(0.0, pitch, 0.0) * cb;
            let expect = rho_g * submerged_cylinder_volume(p.physical.length, r, centre, pitch);
            let f = buoyancy_force(None, &p, &eta, 0.0, 100);
            (Vec3::new(f[0], f[1], f[2]).norm() - expect).abs() / expect
        })
        .collect()
}

/// Largest component gap between fully submerged buoyancy and the
/// buoyancy share of the restoring term, over several attitudes.
pub fn deep_buoyancy_gap() -> f64 {
    let p = remus();
    let mut dry = p.clone();
    dry.hydrostatic.displaced_volume = 0.0;
    let mut worst = 0.0f64;
    for att in [[0.0, 0.0, 0.0], [0.2, -0.3, 1.0], [-0.5, 0.6, -2.0]] {
        let eta = [3.0, -4.0, 20.0, att[0], att[1], att[2]];
        let f = buoyancy_force(None, &p, &eta, 0.0, 100);
        let (full, weight_only) = (restoring_forces(&p, &eta), restoring_forces(&dry, &eta));
        for i in 0..6 {
            worst = worst.max((f[i] - (full[i] - weight_only[i])).abs());
        }
    }
    worst
}
