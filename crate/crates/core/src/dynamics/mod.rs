//! Torpedo AUV dynamics: Fossen 6-DOF model, autopilots and the per-tick
//! manager.
//!
//! State is `eta = [x, y, z, roll, pitch, yaw]` in NED and
//! `nu = [u, v, w, p, q, r]` in body axes (forward, starboard, down).

mod autopilot;
mod manager;
mod model;
mod params;
mod vehicle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use autopilot::{speed_to_prop_speed, AutopilotState, DepthAutopilot, HeadingAutopilot};
pub use manager::{AgentConfig, AgentStatus, ContactEvent, DynamicsManager, TickOutput};
pub use model::{
    actuator_forces, coriolis_matrix, damping_matrix, hydro_forces, kinematics, restoring_forces, step, Torpedo,
    MAX_PITCH,
};
pub use params::{
    default_remus100_params, lamb_k_factors, system_matrix, AutopilotGains, ControlSurfaces, DepthGains, Environmental,
    Fin, FinRole, HeadingGains, Hydrodynamic, Hydrostatic, Physical, VehicleParams, PARAMETER_CATEGORIES,
};
pub use vehicle::{make_model, model_registry, KinematicModel, ModelEntry, ModelKind, StepEnv, VehicleModel};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("mass matrix is not symmetric positive definite (min eigenvalue {0})")]
    NotPositiveDefinite(f64),
    #[error("non-finite state after step; force breakdown: {0}")]
    NonFinite(Box<HydroForces>),
    #[error("pitch {0:.3} rad exceeds the Euler-angle guard")]
    PitchGuard(f64),
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
    #[error("tick dt {got} does not match scenario dt {expected}")]
    DtMismatch { expected: f64, got: f64 },
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("duplicate agent {0:?}")]
    DuplicateAgent(String),
    #[error("command has {got} fin commands, vehicle has {expected} fins")]
    FinCount { expected: usize, got: usize },
    #[error("unknown vehicle model {0:?}")]
    UnknownModel(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Pose, body velocity and actuator states of one vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidBodyState {
    pub eta: [f64; 6],
    pub nu: [f64; 6],
    #[serde(default)]
    pub fin_angles: Vec<f64>,
    #[serde(default)]
    pub prop_speed: f64,
}

impl RigidBodyState {
    pub fn at_rest(eta: [f64; 6], fins: usize) -> Self {
        Self { eta, nu: [0.0; 6], fin_angles: vec![0.0; fins], prop_speed: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.eta.iter().chain(&self.nu).chain(&self.fin_angles).all(|v| v.is_finite()) && self.prop_speed.is_finite()
    }

    pub fn depth(&self) -> f64 {
        self.eta[2]
    }

    pub fn heading(&self) -> f64 {
        self.eta[5]
    }
}

/// Direct fin/propeller targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actuation {
    pub fin_commands: Vec<f64>,
    pub prop_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlCommand {
    /// Fin deflection commands (rad) in fin order and propeller speed (rev/s).
    Direct { fin_commands: Vec<f64>, prop_speed: f64 },
    /// Depth (m), heading (rad) and speed (m/s) resolved by the autopilots.
    Setpoint { depth: f64, heading: f64, speed: f64 },
}

impl ControlCommand {
    pub fn idle(fins: usize) -> Self {
        ControlCommand::Direct { fin_commands: vec![0.0; fins], prop_speed: 0.0 }
    }
}

/// Generalised forces on the body, body axes, about the body origin.
///
/// Every field is the force the term exerts: `coriolis = -C(nu_r) nu_r`,
/// `damping = -D(nu_r) nu_r`, `restoring = -g(eta)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HydroForces {
    pub coriolis: [f64; 6],
    pub damping: [f64; 6],
    pub restoring: [f64; 6],
    pub actuation: [f64; 6],
}

impl HydroForces {
    pub fn is_finite(&self) -> bool {
        self.coriolis.iter().chain(&self.damping).chain(&self.restoring).chain(&self.actuation).all(|v| v.is_finite())
    }

    pub fn total(&self) -> [f64; 6] {
        std::array::from_fn(|i| self.coriolis[i] + self.damping[i] + self.restoring[i] + self.actuation[i])
    }
}

impl std::fmt::Display for HydroForces {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "coriolis {:?}, damping {:?}, restoring {:?}, actuation {:?}",
            self.coriolis, self.damping, self.restoring, self.actuation
        )
    }
}
