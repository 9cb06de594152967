//! Vehicle model registry.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::autopilot::speed_to_prop_speed;
use super::model::Torpedo;
use super::{AutopilotState, ControlCommand, DynamicsError, FinRole, HydroForces, RigidBodyState, VehicleParams};
use crate::envfx::WaveField;
use crate::geom::{wrap_angle, Vec3};

/// Environment seen by one agent during one tick.
#[derive(Debug, Clone, Copy)]
pub struct StepEnv<'a> {
    /// World-frame current velocity, m/s.
    pub current: Vec3,
    pub waves: Option<&'a WaveField>,
    /// Simulation time at the start of the step, s.
    pub t: f64,
}

impl StepEnv<'_> {
    pub fn still() -> Self {
        StepEnv { current: Vec3::zeros(), waves: None, t: 0.0 }
    }
}

pub trait VehicleModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn params(&self) -> &VehicleParams;
    fn advance(
        &self,
        state: &RigidBodyState,
        command: &ControlCommand,
        autopilot: &mut AutopilotState,
        env: &StepEnv,
        dt: f64,
    ) -> Result<RigidBodyState, DynamicsError>;
    fn force_breakdown(&self, _state: &RigidBodyState, _env: &StepEnv) -> HydroForces {
        HydroForces::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    FossenTorpedo,
    Kinematic,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::FossenTorpedo => "fossen_torpedo",
            ModelKind::Kinematic => "kinematic",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        model_registry()
            .iter()
            .find(|e| e.name == s)
            .map(|e| e.kind)
            .ok_or_else(|| DynamicsError::UnknownModel(s.to_string()))
    }
}

pub struct ModelEntry {
    pub name: &'static str,
    pub kind: ModelKind,
    pub description: &'static str,
    pub build: fn(VehicleParams) -> Result<Box<dyn VehicleModel>, DynamicsError>,
}

static REGISTRY: [ModelEntry; 2] = [
    ModelEntry {
        name: "fossen_torpedo",
        kind: ModelKind::FossenTorpedo,
        description: "6-DOF Fossen torpedo model with fin/propeller lags and autopilots",
        build: |p| Ok(Box::new(FossenModel(Torpedo::new(p)?))),
    },
    ModelEntry {
        name: "kinematic",
        kind: ModelKind::Kinematic,
        description: "rate-limited kinematic vehicle, no hydrodynamics",
        build: |p| Ok(Box::new(KinematicModel::new(p))),
    },
];

pub fn model_registry() -> &'static [ModelEntry] {
    &REGISTRY
}

pub fn make_model(kind: ModelKind, params: VehicleParams) -> Result<Box<dyn VehicleModel>, DynamicsError> {
    let problems = params.check();
    if let Some((path, msg)) = problems.first() {
        return Err(DynamicsError::InvalidParams(format!("{path}: {msg}")));
    }
    let entry = REGISTRY.iter().find(|e| e.kind == kind).expect("every kind is registered");
    (entry.build)(params)
}

#[derive(Debug)]
struct FossenModel(Torpedo);

impl VehicleModel for FossenModel {
    fn name(&self) -> &'static str {
        "fossen_torpedo"
    }

    fn params(&self) -> &VehicleParams {
        self.0.params()
    }

    fn advance(
        &self,
        state: &RigidBodyState,
        command: &ControlCommand,
        autopilot: &mut AutopilotState,
        env: &StepEnv,
        dt: f64,
    ) -> Result<RigidBodyState, DynamicsError> {
        let act = autopilot.resolve(self.0.params(), state, command, dt)?;
        self.0.step(state, &act, env.current, env.waves, env.t, dt)
    }

    fn force_breakdown(&self, state: &RigidBodyState, env: &StepEnv) -> HydroForces {
        self.0.force_breakdown(state, env.current, env.waves, env.t)
    }
}

/// Surge follows the commanded speed with a 1 s lag, yaw rate and climb
/// rate are proportional and clipped, and the current is added to the
/// ground track. Useful for sensor work where hydrodynamics are noise.
#[derive(Debug)]
pub struct KinematicModel {
    params: VehicleParams,
}

const SURGE_LAG: f64 = 1.0;

impl KinematicModel {
    pub fn new(params: VehicleParams) -> Self {
        Self { params }
    }

    fn mean_of(&self, fins: &[f64], role: FinRole) -> f64 {
        let (sum, n) = self
            .params
            .control_surfaces
            .fins
            .iter()
            .zip(fins)
            .filter(|(f, _)| f.role == role)
            .fold((0.0, 0usize), |(s, n), (f, d)| (s + d.clamp(-f.max_deflection, f.max_deflection), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Steady speed reached at propeller speed `n`.
    fn speed_for_prop(&self, n: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 20.0);
        let target = n.abs();
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if speed_to_prop_speed(&self.params, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi) * n.signum()
    }
}

impl VehicleModel for KinematicModel {
    fn name(&self) -> &'static str {
        "kinematic"
    }

    fn params(&self) -> &VehicleParams {
        &self.params
    }

    fn advance(
        &self,
        state: &RigidBodyState,
        command: &ControlCommand,
        _autopilot: &mut AutopilotState,
        env: &StepEnv,
        dt: f64,
    ) -> Result<RigidBodyState, DynamicsError> {
        if !(dt > 0.0) {
            return Err(DynamicsError::BadTimeStep(dt));
        }
        let hg = &self.params.autopilot.heading;
        let dg = &self.params.autopilot.depth;
        let rudder_max = self.params.control_surfaces.fins.iter().map(|f| f.max_deflection).fold(0.0, f64::max);
        let r_max = hg.nomoto_gain * rudder_max;
        let u = state.nu[0];
        let (u_target, r, climb, fins, prop) = match command {
            ControlCommand::Setpoint { depth, heading, speed } => {
                let r = (hg.lambda * wrap_angle(heading - state.eta[5])).clamp(-r_max, r_max);
                let w_max = u.abs() * dg.max_pitch.sin();
                let climb = (dg.kp_z * (depth - state.eta[2])).clamp(-w_max, w_max);
                (*speed, r, climb, vec![0.0; self.params.fin_count()], speed_to_prop_speed(&self.params, *speed))
            }
            ControlCommand::Direct { fin_commands, prop_speed } => {
                if fin_commands.len() != self.params.fin_count() {
                    return Err(DynamicsError::FinCount { expected: self.params.fin_count(), got: fin_commands.len() });
                }
                let r = hg.nomoto_gain * self.mean_of(fin_commands, FinRole::Rudder);
                let climb = u * self.mean_of(fin_commands, FinRole::Stern).sin();
                let fins = fin_commands
                    .iter()
                    .zip(&self.params.control_surfaces.fins)
                    .map(|(d, f)| d.clamp(-f.max_deflection, f.max_deflection))
                    .collect();
                let cs = &self.params.control_surfaces;
                let n = prop_speed.clamp(-cs.max_prop_speed, cs.max_prop_speed);
                (self.speed_for_prop(n), r, climb, fins, n)
            }
        };
        let u_next = u_target + (u - u_target) * (-dt / SURGE_LAG).exp();
        let psi = state.eta[5];
        let psi_mid = psi + 0.5 * r * dt;
        let u_mid = 0.5 * (u + u_next);
        let mut eta = state.eta;
        eta[0] += (u_mid * psi_mid.cos() + env.current.x) * dt;
        eta[1] += (u_mid * psi_mid.sin() + env.current.y) * dt;
        eta[2] += (climb + env.current.z) * dt;
        eta[3] = 0.0;
        eta[4] = 0.0;
        eta[5] = wrap_angle(psi + r * dt);
        let out = RigidBodyState { eta, nu: [u_next, 0.0, climb, 0.0, 0.0, r], fin_angles: fins, prop_speed: prop };
        if !out.is_finite() {
            return Err(DynamicsError::NonFinite(Box::default()));
        }
        Ok(out)
    }
}
