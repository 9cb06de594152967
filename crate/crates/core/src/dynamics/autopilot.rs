//! Depth (successive-loop PID) and heading (sliding mode) autopilots.

use serde::{Deserialize, Serialize};

use super::{Actuation, ControlCommand, DynamicsError, FinRole, RigidBodyState, VehicleParams};
use crate::geom::wrap_angle;

fn max_deflection(params: &VehicleParams, role: FinRole) -> f64 {
    params
        .control_surfaces
        .fins
        .iter()
        .filter(|f| f.role == role)
        .map(|f| f.max_deflection)
        .fold(f64::INFINITY, f64::min)
}

/// Outer loop: depth error to pitch command. Inner loop: pitch error to
/// stern-plane deflection. Positive stern command pitches the nose down.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DepthAutopilot {
    pub z_integral: f64,
    pub theta_integral: f64,
}

impl DepthAutopilot {
    pub fn update(&mut self, params: &VehicleParams, state: &RigidBodyState, depth: f64, dt: f64) -> f64 {
        let g = &params.autopilot.depth;
        let d_max = max_deflection(params, FinRole::Stern);
        let z_err = state.eta[2] - depth;
        let raw = g.kp_z * z_err + g.ki_z * self.z_integral;
        let theta_cmd = raw.clamp(-g.max_pitch, g.max_pitch);

        let theta_err = state.eta[4] - theta_cmd;
        let q = state.nu[4];
        let raw_delta = g.kp_theta * theta_err + g.ki_theta * self.theta_integral + g.kd_theta * q;
        let delta = raw_delta.clamp(-d_max, d_max);

        // Integrate only while the loop output is unsaturated.
        if raw.abs() < g.max_pitch {
            self.z_integral += z_err * dt;
        }
        if raw_delta.abs() < d_max {
            self.theta_integral += theta_err * dt;
        }
        if g.ki_z > 0.0 {
            let lim = g.max_pitch / g.ki_z;
            self.z_integral = self.z_integral.clamp(-lim, lim);
        }
        if g.ki_theta > 0.0 && d_max.is_finite() {
            let lim = d_max / g.ki_theta;
            self.theta_integral = self.theta_integral.clamp(-lim, lim);
        }
        delta
    }
}

/// Sliding-mode heading control on a first-order Nomoto model
/// `T r' + r = K delta`, sliding variable `s = r + lambda * (psi - psi_d)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HeadingAutopilot;

impl HeadingAutopilot {
    pub fn sliding_variable(params: &VehicleParams, state: &RigidBodyState, heading: f64) -> f64 {
        let err = wrap_angle(state.eta[5] - heading);
        state.nu[5] + params.autopilot.heading.lambda * err
    }

    pub fn update(&mut self, params: &VehicleParams, state: &RigidBodyState, heading: f64, _dt: f64) -> f64 {
        let g = &params.autopilot.heading;
        let r = state.nu[5];
        let s = Self::sliding_variable(params, state, heading);
        let (k, t) = (g.nomoto_gain, g.nomoto_time_constant);
        let switching = g.k_s * (s / g.phi_b).clamp(-1.0, 1.0);
        let delta = ((1.0 - t * g.lambda) * r - t * (g.k_d * s + switching)) / k;
        let d_max = max_deflection(params, FinRole::Rudder);
        delta.clamp(-d_max, d_max)
    }
}

/// Propeller speed whose steady thrust balances surge drag at `speed`.
pub fn speed_to_prop_speed(params: &VehicleParams, speed: f64) -> f64 {
    let h = &params.hydrodynamic;
    let cs = &params.control_surfaces;
    let u = speed.abs();
    let drag = h.linear_damping[0] * (-h.linear_damping_fade * u).exp() * u + h.quadratic_drag[0] * u * u;
    let k = cs.thrust_coefficient * params.environmental.water_density * cs.propeller_diameter.powi(4);
    if k <= 0.0 {
        return 0.0;
    }
    ((drag / k).sqrt() * speed.signum()).clamp(-cs.max_prop_speed, cs.max_prop_speed)
}

/// Per-agent controller memory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AutopilotState {
    pub depth: DepthAutopilot,
    pub heading: HeadingAutopilot,
}

impl AutopilotState {
    /// Turn a command into fin and propeller targets.
    pub fn resolve(
        &mut self,
        params: &VehicleParams,
        state: &RigidBodyState,
        command: &ControlCommand,
        dt: f64,
    ) -> Result<Actuation, DynamicsError> {
        match command {
            ControlCommand::Direct { fin_commands, prop_speed } => {
                if fin_commands.len() != params.fin_count() {
                    return Err(DynamicsError::FinCount { expected: params.fin_count(), got: fin_commands.len() });
                }
                Ok(Actuation { fin_commands: fin_commands.clone(), prop_speed: *prop_speed })
            }
            ControlCommand::Setpoint { depth, heading, speed } => {
                let stern = self.depth.update(params, state, *depth, dt);
                let rudder = self.heading.update(params, state, *heading, dt);
                let fin_commands = params
                    .control_surfaces
                    .fins
                    .iter()
                    .map(|f| match f.role {
                        FinRole::Rudder => rudder,
                        FinRole::Stern => stern,
                    })
                    .collect();
                Ok(Actuation { fin_commands, prop_speed: speed_to_prop_speed(params, *speed) })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::default_remus100_params;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn depth_zero_error_zero_command() {
        let p = default_remus100_params();
        let s = RigidBodyState::at_rest([0.0, 0.0, 10.0, 0.0, 0.0, 0.0], 4);
        assert_eq!(DepthAutopilot::default().update(&p, &s, 10.0, 0.1), 0.0);
    }

    #[test]
    fn depth_above_setpoint_dives() {
        let p = default_remus100_params();
        let s = RigidBodyState::at_rest([0.0, 0.0, 5.0, 0.0, 0.0, 0.0], 4);
        assert!(DepthAutopilot::default().update(&p, &s, 10.0, 0.1) > 0.0);
    }

    #[test]
    fn heading_on_surface_zero() {
        let p = default_remus100_params();
        let s = RigidBodyState::at_rest([0.0, 0.0, 0.0, 0.0, 0.0, 0.7], 4);
        assert_eq!(HeadingAutopilot.update(&p, &s, 0.7, 0.1), 0.0);
    }

    #[test]
    fn heading_turns_towards_setpoint() {
        let p = default_remus100_params();
        let s = RigidBodyState::at_rest([0.0; 6], 4);
        let delta = HeadingAutopilot.update(&p, &s, FRAC_PI_2, 0.1);
        assert!(delta > 0.0);
        let tau = crate::dynamics::actuator_forces(&p, &[1.5, 0.0, 0.0, 0.0, 0.0, 0.0], &[delta, delta, 0.0, 0.0], 0.0);
        assert!(tau[5] > 0.0);
    }

    #[test]
    fn speed_inversion_balances_drag() {
        let p = default_remus100_params();
        let n = speed_to_prop_speed(&p, 1.5);
        let thrust = crate::dynamics::actuator_forces(&p, &[1.5, 0.0, 0.0, 0.0, 0.0, 0.0], &[0.0; 4], n)[0];
        let drag = crate::dynamics::damping_matrix(&p, &[1.5, 0.0, 0.0, 0.0, 0.0, 0.0])[(0, 0)] * 1.5;
        assert!((thrust - drag).abs() < 1e-9 * drag);
        assert_eq!(speed_to_prop_speed(&p, 0.0), 0.0);
    }
}
