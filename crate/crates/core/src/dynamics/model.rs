//! Fossen torpedo model terms and the RK4 step.
//!
//! M = M_RB + M_A, C(nu_r) = C_RB(nu_r) + C_A(nu_r) with the added-mass Munk
//! entries removed as in Fossen's REMUS 100 model, D = D_lin(U_r) + D_quad(nu_r),
//! restoring from weight at r_cg and buoyancy at r_cb (or slice buoyancy
//! against the wave surface when waves are active).

use nalgebra::{DVector, Matrix3, Matrix6, Vector3, Vector6};

use super::params::rigid_body_matrix;
use super::{system_matrix, Actuation, DynamicsError, HydroForces, RigidBodyState, VehicleParams};
use crate::envfx::{buoyancy_force, WaveField};
use crate::geom::{rotation_zyx, skew, wrap_angle, Vec3};

/// Euler-angle guard on |pitch|.
pub const MAX_PITCH: f64 = 85.0 * std::f64::consts::PI / 180.0;

/// Fossen's `m2c`: Coriolis-centripetal matrix from a 6x6 inertia matrix.
fn m2c(m: &Matrix6<f64>, nu: &Vector6<f64>) -> Matrix6<f64> {
    let m = (m + m.transpose()) * 0.5;
    let nu1 = nu.fixed_rows::<3>(0).into_owned();
    let nu2 = nu.fixed_rows::<3>(3).into_owned();
    let m11 = m.fixed_view::<3, 3>(0, 0);
    let m12 = m.fixed_view::<3, 3>(0, 3);
    let m21 = m.fixed_view::<3, 3>(3, 0);
    let m22 = m.fixed_view::<3, 3>(3, 3);
    let a = -skew(&(m11 * nu1 + m12 * nu2));
    let b = -skew(&(m21 * nu1 + m22 * nu2));
    let mut c = Matrix6::zeros();
    c.fixed_view_mut::<3, 3>(0, 3).copy_from(&a);
    c.fixed_view_mut::<3, 3>(3, 0).copy_from(&a);
    c.fixed_view_mut::<3, 3>(3, 3).copy_from(&b);
    c
}

fn v6(a: &[f64; 6]) -> Vector6<f64> {
    Vector6::from_column_slice(a)
}

fn arr(v: &Vector6<f64>) -> [f64; 6] {
    [v[0], v[1], v[2], v[3], v[4], v[5]]
}

/// J(eta): body velocity to NED pose rate.
pub fn kinematics(eta: &[f64; 6]) -> Matrix6<f64> {
    let (phi, theta) = (eta[3], eta[4]);
    let r = rotation_zyx(phi, theta, eta[5]);
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let t = Matrix3::new(1.0, sp * st / ct, cp * st / ct, 0.0, cp, -sp, 0.0, sp / ct, cp / ct);
    let mut j = Matrix6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    j.fixed_view_mut::<3, 3>(3, 3).copy_from(&t);
    j
}

/// D_lin(U_r) + D_quad(nu_r).
pub fn damping_matrix(params: &VehicleParams, nu_r: &[f64; 6]) -> Matrix6<f64> {
    let h = &params.hydrodynamic;
    let speed = Vec3::new(nu_r[0], nu_r[1], nu_r[2]).norm();
    let fade = (-h.linear_damping_fade * speed).exp();
    Matrix6::from_fn(|i, j| {
        if i != j {
            return 0.0;
        }
        let lin = if i < 2 { h.linear_damping[i] * fade } else { h.linear_damping[i] };
        lin + h.quadratic_drag[i] * nu_r[i].abs()
    })
}

/// Weight at r_cg plus buoyancy at r_cb, as a force on the body.
pub fn restoring_forces(params: &VehicleParams, eta: &[f64; 6]) -> [f64; 6] {
    let rt = rotation_zyx(eta[3], eta[4], eta[5]).transpose();
    let down = rt * Vec3::z();
    let fw = down * params.weight();
    let fb = -down * params.buoyancy();
    let mw = Vec3::from(params.hydrostatic.r_cg).cross(&fw);
    let mb = Vec3::from(params.hydrostatic.r_cb).cross(&fb);
    let f = fw + fb;
    let m = mw + mb;
    [f.x, f.y, f.z, m.x, m.y, m.z]
}

/// Propeller thrust plus fin lift, body axes about the origin.
pub fn actuator_forces(params: &VehicleParams, nu_r: &[f64; 6], fin_angles: &[f64], prop_speed: f64) -> [f64; 6] {
    let rho = params.environmental.water_density;
    let cs = &params.control_surfaces;
    let mut f = Vec3::new(cs.thrust_coefficient * rho * cs.propeller_diameter.powi(4) * prop_speed * prop_speed.abs(), 0.0, 0.0);
    let mut m = Vec3::zeros();
    let v = Vec3::new(nu_r[0], nu_r[1], nu_r[2]);
    let w = Vec3::new(nu_r[3], nu_r[4], nu_r[5]);
    for (fin, &delta) in cs.fins.iter().zip(fin_angles) {
        let r = Vec3::from(fin.position);
        let n = Vec3::from(fin.lift_axis);
        let vf = v + w.cross(&r);
        let vn = vf.dot(&n);
        let u2 = vf.x * vf.x + vn * vn;
        if u2 == 0.0 {
            continue;
        }
        // Local flow angle relative to the fin's chord line.
        let beta = vn.atan2(vf.x.abs());
        let lift = 0.5 * rho * u2 * fin.area * fin.lift_coefficient * (delta - beta);
        let fi = n * lift;
        f += fi;
        m += r.cross(&fi);
    }
    [f.x, f.y, f.z, m.x, m.y, m.z]
}

/// Hydrodynamic and hydrostatic terms for relative velocity `nu_r`.
pub fn hydro_forces(params: &VehicleParams, eta: &[f64; 6], nu_r: &[f64; 6]) -> Result<HydroForces, DynamicsError> {
    Ok(Torpedo::new(params.clone())?.forces(eta, nu_r, &[], 0.0, None))
}

/// C(nu_r) for the given parameters.
pub fn coriolis_matrix(params: &VehicleParams, nu_r: &[f64; 6]) -> Result<Matrix6<f64>, DynamicsError> {
    Ok(Torpedo::new(params.clone())?.coriolis_matrix(nu_r))
}

/// One RK4 step with direct actuator targets and a world-frame current.
pub fn step(
    params: &VehicleParams,
    state: &RigidBodyState,
    command: &Actuation,
    current: [f64; 3],
    dt: f64,
) -> Result<RigidBodyState, DynamicsError> {
    Torpedo::new(params.clone())?.step(state, command, Vec3::from(current), None, 0.0, dt)
}

/// Parameters with their precomputed inertia matrices.
#[derive(Debug, Clone)]
pub struct Torpedo {
    params: VehicleParams,
    m: Matrix6<f64>,
    m_inv: Matrix6<f64>,
    m_rb: Matrix6<f64>,
    m_a: Matrix6<f64>,
}

/// Waves acting on the hull during a step.
#[derive(Clone, Copy)]
struct Surface<'a> {
    waves: &'a WaveField,
    t: f64,
}

impl Torpedo {
    pub fn new(params: VehicleParams) -> Result<Self, DynamicsError> {
        let (m, m_inv) = system_matrix(&params)?;
        let m_rb = rigid_body_matrix(&params.physical, &params.hydrostatic.r_cg);
        let m_a = Matrix6::from_diagonal(&Vector6::from_column_slice(&params.physical.added_mass));
        Ok(Self { params, m, m_inv, m_rb, m_a })
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    pub fn mass_matrix(&self) -> &Matrix6<f64> {
        &self.m
    }

    pub fn coriolis_matrix(&self, nu_r: &[f64; 6]) -> Matrix6<f64> {
        let nu = v6(nu_r);
        let mut ca = m2c(&self.m_a, &nu);
        for (i, j) in [(4, 0), (0, 4), (4, 2), (2, 4), (5, 0), (0, 5), (5, 1), (1, 5)] {
            ca[(i, j)] = 0.0;
        }
        m2c(&self.m_rb, &nu) + ca
    }

    pub fn kinetic_energy(&self, nu: &[f64; 6]) -> f64 {
        let v = v6(nu);
        0.5 * v.dot(&(self.m * v))
    }

    fn forces(&self, eta: &[f64; 6], nu_r: &[f64; 6], fins: &[f64], prop: f64, surface: Option<Surface>) -> HydroForces {
        let nu = v6(nu_r);
        let coriolis = -(self.coriolis_matrix(nu_r) * nu);
        let damping = -(damping_matrix(&self.params, nu_r) * nu);
        let restoring = match surface {
            None => restoring_forces(&self.params, eta),
            Some(s) => {
                let rt = rotation_zyx(eta[3], eta[4], eta[5]).transpose();
                let fw = rt * Vec3::z() * self.params.weight();
                let mw = Vec3::from(self.params.hydrostatic.r_cg).cross(&fw);
                let b = buoyancy_force(Some(s.waves), &self.params, eta, s.t, self.params.hydrostatic.buoyancy_slices);
                [fw.x + b[0], fw.y + b[1], fw.z + b[2], mw.x + b[3], mw.y + b[4], mw.z + b[5]]
            }
        };
        HydroForces {
            coriolis: arr(&coriolis),
            damping: arr(&damping),
            restoring,
            actuation: actuator_forces(&self.params, nu_r, fins, prop),
        }
    }

    /// Generalised force breakdown at a state, with current and optional waves.
    pub fn force_breakdown(
        &self,
        state: &RigidBodyState,
        current: Vec3,
        waves: Option<&WaveField>,
        t: f64,
    ) -> HydroForces {
        let nu_r = relative_velocity(&state.eta, &state.nu, &current);
        self.forces(&state.eta, &nu_r, &state.fin_angles, state.prop_speed, waves.map(|w| Surface { waves: w, t }))
    }

    fn derivative(
        &self,
        x: &DVector<f64>,
        cmd: &Actuation,
        current: &Vec3,
        surface: Option<Surface>,
        bad: &mut Option<HydroForces>,
    ) -> DVector<f64> {
        let nf = self.params.fin_count();
        let eta: [f64; 6] = std::array::from_fn(|i| x[i]);
        let nu: [f64; 6] = std::array::from_fn(|i| x[6 + i]);
        let fins = x.rows(12, nf);
        let prop = x[12 + nf];
        let rt = rotation_zyx(eta[3], eta[4], eta[5]).transpose();
        let nu_c = rt * current;
        let nu_r = relative_velocity_with(&nu, &nu_c);
        let f = self.forces(&eta, &nu_r, fins.as_slice(), prop, surface);
        if bad.is_none() && !f.is_finite() {
            *bad = Some(f);
        }
        let tau = v6(&f.total());
        let mut nu_dot = self.m_inv * tau;
        let omega = Vector3::new(nu[3], nu[4], nu[5]);
        let drift = nu_c.cross(&omega);
        for i in 0..3 {
            nu_dot[i] += drift[i];
        }
        let eta_dot = kinematics(&eta) * v6(&nu);

        let cs = &self.params.control_surfaces;
        let mut out = DVector::zeros(x.len());
        out.rows_mut(0, 6).copy_from(&eta_dot);
        out.rows_mut(6, 6).copy_from(&nu_dot);
        for (k, fin) in cs.fins.iter().enumerate() {
            let target = cmd.fin_commands.get(k).copied().unwrap_or(0.0).clamp(-fin.max_deflection, fin.max_deflection);
            out[12 + k] = (target - fins[k]) / fin.time_constant;
        }
        let n_target = cmd.prop_speed.clamp(-cs.max_prop_speed, cs.max_prop_speed);
        out[12 + nf] = (n_target - prop) / cs.propeller_time_constant;
        out
    }

    /// RK4 step. `current` is world frame; `waves` switches hydrostatics to
    /// slice buoyancy against the surface at time `t`.
    pub fn step(
        &self,
        state: &RigidBodyState,
        cmd: &Actuation,
        current: Vec3,
        waves: Option<&WaveField>,
        t: f64,
        dt: f64,
    ) -> Result<RigidBodyState, DynamicsError> {
        if !(dt > 0.0) {
            return Err(DynamicsError::BadTimeStep(dt));
        }
        let nf = self.params.fin_count();
        if cmd.fin_commands.len() != nf {
            return Err(DynamicsError::FinCount { expected: nf, got: cmd.fin_commands.len() });
        }
        let mut x = DVector::zeros(13 + nf);
        x.rows_mut(0, 6).copy_from_slice(&state.eta);
        x.rows_mut(6, 6).copy_from_slice(&state.nu);
        for k in 0..nf {
            x[12 + k] = state.fin_angles.get(k).copied().unwrap_or(0.0);
        }
        x[12 + nf] = state.prop_speed;

        let at = |s: f64| waves.map(|w| Surface { waves: w, t: t + s });
        let mut bad = None;
        let k1 = self.derivative(&x, cmd, &current, at(0.0), &mut bad);
        let k2 = self.derivative(&(&x + &k1 * (dt / 2.0)), cmd, &current, at(dt / 2.0), &mut bad);
        let k3 = self.derivative(&(&x + &k2 * (dt / 2.0)), cmd, &current, at(dt / 2.0), &mut bad);
        let k4 = self.derivative(&(&x + &k3 * dt), cmd, &current, at(dt), &mut bad);
        let next = &x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);

        let mut out = RigidBodyState {
            eta: std::array::from_fn(|i| next[i]),
            nu: std::array::from_fn(|i| next[6 + i]),
            fin_angles: (0..nf).map(|k| next[12 + k]).collect(),
            prop_speed: next[12 + nf],
        };
        if let Some(f) = bad {
            return Err(DynamicsError::NonFinite(Box::new(f)));
        }
        if !out.is_finite() {
            return Err(DynamicsError::NonFinite(Box::new(self.force_breakdown(state, current, waves, t))));
        }
        for a in &mut out.eta[3..] {
            *a = wrap_angle(*a);
        }
        let cs = &self.params.control_surfaces;
        for (d, fin) in out.fin_angles.iter_mut().zip(&cs.fins) {
            *d = d.clamp(-fin.max_deflection, fin.max_deflection);
        }
        out.prop_speed = out.prop_speed.clamp(-cs.max_prop_speed, cs.max_prop_speed);
        if out.eta[4].abs() > MAX_PITCH {
            return Err(DynamicsError::PitchGuard(out.eta[4]));
        }
        Ok(out)
    }
}

fn relative_velocity_with(nu: &[f64; 6], nu_c: &Vec3) -> [f64; 6] {
    [nu[0] - nu_c.x, nu[1] - nu_c.y, nu[2] - nu_c.z, nu[3], nu[4], nu[5]]
}

/// nu minus the body-frame current.
pub(crate) fn relative_velocity(eta: &[f64; 6], nu: &[f64; 6], current: &Vec3) -> [f64; 6] {
    let nu_c = rotation_zyx(eta[3], eta[4], eta[5]).transpose() * current;
    relative_velocity_with(nu, &nu_c)
}
