//! Per-tick orchestration of all agents.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{make_model, AutopilotState, ControlCommand, DynamicsError, ModelKind, RigidBodyState, StepEnv, VehicleModel, VehicleParams};
use crate::envfx::{CurrentField, WaveField};
use crate::geom::{transform_point, Vec3};
use crate::world::Heightfield;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub name: String,
    pub model: ModelKind,
    pub params: VehicleParams,
    pub initial_state: RigidBodyState,
    /// Held until the first command arrives; idle propeller and centred fins otherwise.
    pub initial_command: Option<ControlCommand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStatus {
    pub name: String,
    pub state: RigidBodyState,
    /// Current sampled for this tick, world frame.
    pub current: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub agent: String,
    pub tick: u64,
    pub time: f64,
    /// Keel point in world coordinates.
    pub keel: [f64; 3],
    pub seabed_depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub tick: u64,
    /// Time at the end of the tick.
    pub time: f64,
    pub agents: Vec<AgentStatus>,
    pub contacts: Vec<ContactEvent>,
}

#[derive(Debug)]
struct Agent {
    name: String,
    model: Box<dyn VehicleModel>,
    state: RigidBodyState,
    autopilot: AutopilotState,
    command: ControlCommand,
}

#[derive(Debug)]
pub struct DynamicsManager {
    dt: f64,
    agents: Vec<Agent>,
    current: Option<CurrentField>,
    waves: Option<WaveField>,
    wave_coupling: bool,
    tick: u64,
}

impl DynamicsManager {
    pub fn new(dt: f64, configs: Vec<AgentConfig>) -> Result<Self, DynamicsError> {
        if !(dt > 0.0) {
            return Err(DynamicsError::BadTimeStep(dt));
        }
        let mut agents: Vec<Agent> = Vec::with_capacity(configs.len());
        for c in configs {
            if agents.iter().any(|a| a.name == c.name) {
                return Err(DynamicsError::DuplicateAgent(c.name));
            }
            let fins = c.params.fin_count();
            let mut state = c.initial_state;
            state.fin_angles.resize(fins, 0.0);
            let command = c.initial_command.unwrap_or_else(|| ControlCommand::idle(fins));
            let model = make_model(c.model, c.params)?;
            agents.push(Agent { name: c.name, model, state, autopilot: AutopilotState::default(), command });
        }
        Ok(Self { dt, agents, current: None, waves: None, wave_coupling: false, tick: 0 })
    }

    /// World-level current field; takes precedence over per-agent currents.
    pub fn with_current(mut self, current: Option<CurrentField>) -> Self {
        self.current = current;
        self
    }

    /// Wave surface for buoyancy; `coupling` adds orbital velocity to the current.
    pub fn with_waves(mut self, waves: Option<WaveField>, coupling: bool) -> Self {
        self.waves = waves;
        self.wave_coupling = coupling;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn ticks_done(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn agent_names(&self) -> impl Iterator<Item = &str> {
        self.agents.iter().map(|a| a.name.as_str())
    }

    pub fn state(&self, name: &str) -> Option<&RigidBodyState> {
        self.agents.iter().find(|a| a.name == name).map(|a| &a.state)
    }

    pub fn params(&self, name: &str) -> Option<&VehicleParams> {
        self.agents.iter().find(|a| a.name == name).map(|a| a.model.params())
    }

    pub fn has_agent(&self, name: &str) -> bool {
        self.agents.iter().any(|a| a.name == name)
    }

    /// Current at a position for an agent with the given parameters.
    pub fn sample_current(&self, params: &VehicleParams, position: &Vec3, t: f64) -> Vec3 {
        let mut v = match (&self.current, params.environmental.current) {
            (Some(field), _) => field.sample(position, t),
            (None, Some(c)) => Vec3::from(c),
            (None, None) => Vec3::zeros(),
        };
        if self.wave_coupling {
            if let Some(w) = &self.waves {
                v += w.sample(position.x, position.y, position.z, t).orbital_velocity;
            }
        }
        v
    }

    /// Apply commands, then advance every agent by one tick.
    pub fn tick(
        &mut self,
        commands: &[(String, ControlCommand)],
        dt: f64,
        terrain: Option<&Heightfield>,
    ) -> Result<TickOutput, DynamicsError> {
        if (dt - self.dt).abs() > 1e-12 * self.dt {
            return Err(DynamicsError::DtMismatch { expected: self.dt, got: dt });
        }
        for (name, _) in commands {
            if !self.has_agent(name) {
                return Err(DynamicsError::UnknownAgent(name.clone()));
            }
        }
        for (name, cmd) in commands {
            let agent = self.agents.iter_mut().find(|a| &a.name == name).expect("checked above");
            agent.command = cmd.clone();
        }

        let t = self.time();
        let currents: Vec<Vec3> = self
            .agents
            .iter()
            .map(|a| {
                let p = Vec3::new(a.state.eta[0], a.state.eta[1], a.state.eta[2]);
                self.sample_current(a.model.params(), &p, t)
            })
            .collect();
        let waves = self.waves.as_ref();
        let results: Vec<Result<RigidBodyState, DynamicsError>> = self
            .agents
            .par_iter_mut()
            .zip(currents.par_iter())
            .map(|(a, c)| {
                let env = StepEnv { current: *c, waves, t };
                let next = a.model.advance(&a.state, &a.command, &mut a.autopilot, &env, dt)?;
                a.state = next.clone();
                Ok(next)
            })
            .collect();

        self.tick += 1;
        let time = self.time();
        let mut agents = Vec::with_capacity(results.len());
        let mut contacts = Vec::new();
        for ((res, a), c) in results.into_iter().zip(&self.agents).zip(&currents) {
            let state = res?;
            if let Some(hf) = terrain {
                let keel_local = Vec3::new(0.0, 0.0, 0.5 * a.model.params().physical.diameter);
                let keel = transform_point(&state.eta, &keel_local);
                if let Ok(depth) = hf.height_at(keel.x, keel.y) {
                    if keel.z >= depth {
                        contacts.push(ContactEvent {
                            agent: a.name.clone(),
                            tick: self.tick,
                            time,
                            keel: keel.into(),
                            seabed_depth: depth,
                        });
                    }
                }
            }
            agents.push(AgentStatus { name: a.name.clone(), state, current: (*c).into() });
        }
        Ok(TickOutput { tick: self.tick, time, agents, contacts })
    }
}
