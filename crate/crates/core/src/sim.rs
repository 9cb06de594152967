//! Fixed-step simulation loop: dynamics, then sensors, once per tick.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accel::{make_backend, AccelError, BackendKind, BackendOptions, QueryStats, RayBackend};
use crate::dynamics::{AgentStatus, ContactEvent, ControlCommand, DynamicsError, DynamicsManager};
use crate::geom::Triangle;
use crate::rng::SimRng;
use crate::scenario::{validate, AgentSpec, ScenarioConfig, ScenarioError, Violation};
use crate::sensors::{evaluate, CastContext, SensorError, SensorReading, SensorSpec, VehicleView};
use crate::world::{PropId, SemanticLabel, World, WorldError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("sensor {agent}/{sensor}: {source}")]
    Sensor { agent: String, sensor: String, source: SensorError },
    #[error(transparent)]
    Accel(#[from] AccelError),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorOutput {
    pub agent: String,
    pub sensor: String,
    pub reading: SensorReading,
}

/// Everything one tick produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Ticks completed, counting this one.
    pub tick: u64,
    /// Simulated time at the end of the tick, s.
    pub time: f64,
    pub agents: Vec<AgentStatus>,
    pub contacts: Vec<ContactEvent>,
    /// In (agent, sensor) declaration order.
    pub readings: Vec<SensorOutput>,
}

struct SensorSlot {
    agent: usize,
    agent_name: String,
    spec: SensorSpec,
    backend: Option<usize>,
    rng: SimRng,
    stats: QueryStats,
}

struct BackendSlot {
    kind: BackendKind,
    leaf_size: f64,
    backend: Box<dyn RayBackend>,
}

pub struct Simulation {
    world: World,
    dynamics: DynamicsManager,
    backends: Vec<BackendSlot>,
    sensors: Vec<SensorSlot>,
    previous_nu: Vec<[f64; 6]>,
    gravity: Vec<f64>,
    dt: f64,
}

impl Simulation {
    /// Validates `config` and builds world, agents and backends. Relative
    /// paths in `config` resolve against `base`.
    pub fn from_scenario(config: &ScenarioConfig, base: &Path) -> Result<Self, SimError> {
        let violations = validate(config);
        if !violations.is_empty() {
            return Err(SimError::Invalid(violations));
        }
        let world = config.world.build(base)?;
        let current = config.current.as_ref().map(|c| c.build(base)).transpose()?;
        let dynamics = DynamicsManager::new(config.dt(), config.agent_configs())?
            .with_current(current)
            .with_waves(config.waves.as_ref().map(|w| w.field()), config.waves.as_ref().is_some_and(|w| w.orbital_coupling));
        Self::assemble(world, dynamics, &config.agents, config.rng_seed)
    }

    /// Builds a run around an existing world and dynamics manager.
    pub fn assemble(world: World, dynamics: DynamicsManager, agents: &[AgentSpec], seed: u64) -> Result<Self, SimError> {
        let mut backends: Vec<BackendSlot> = Vec::new();
        let mut sensors = Vec::new();
        for (ai, a) in agents.iter().enumerate() {
            for spec in &a.sensors {
                let backend = if spec.sensor.is_ranging() {
                    let leaf = match spec.backend {
                        BackendKind::Octree => spec.leaf_size,
                        BackendKind::Raycast => 0.0,
                    };
                    let idx = match backends.iter().position(|b| b.kind == spec.backend && b.leaf_size == leaf) {
                        Some(i) => i,
                        None => {
                            let backend = make_backend(spec.backend, &world, &BackendOptions { leaf_size: spec.leaf_size })?;
                            backends.push(BackendSlot { kind: spec.backend, leaf_size: leaf, backend });
                            backends.len() - 1
                        }
                    };
                    Some(idx)
                } else {
                    None
                };
                let stream = sensors.len() as u64;
                sensors.push(SensorSlot {
                    agent: ai,
                    agent_name: a.name.clone(),
                    spec: spec.clone(),
                    backend,
                    rng: SimRng::stream(seed, stream),
                    stats: QueryStats::new(),
                });
            }
        }
        let states: Vec<[f64; 6]> = agents.iter().map(|a| dynamics.state(&a.name).map(|s| s.nu).unwrap_or_default()).collect();
        let gravity = agents.iter().map(|a| a.params.environmental.gravity).collect();
        let dt = dynamics.dt();
        Ok(Self { world, dynamics, backends, sensors, previous_nu: states, gravity, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn dynamics(&self) -> &DynamicsManager {
        &self.dynamics
    }

    pub fn ticks_done(&self) -> u64 {
        self.dynamics.ticks_done()
    }

    /// Adds a prop to the live world. Octree-backed sensors fail with a
    /// staleness error until [`Simulation::rebuild_caches`] runs.
    pub fn spawn_prop(&mut self, mesh: Vec<Triangle>, pose: [f64; 6], label: SemanticLabel) -> Result<PropId, SimError> {
        Ok(self.world.spawn_prop(mesh, pose, label)?)
    }

    pub fn remove_prop(&mut self, id: PropId) -> bool {
        self.world.remove_prop(id)
    }

    pub fn rebuild_caches(&mut self) -> Result<(), SimError> {
        for slot in &mut self.backends {
            if slot.kind == BackendKind::Octree {
                slot.backend = make_backend(slot.kind, &self.world, &BackendOptions { leaf_size: slot.leaf_size })?;
            }
        }
        Ok(())
    }

    /// `(agent, sensor, rays cast, query wall time)` per sensor.
    pub fn sensor_stats(&self) -> Vec<(String, String, u64, f64)> {
        self.sensors
            .iter()
            .map(|s| (s.agent_name.clone(), s.spec.name.clone(), s.stats.rays_cast(), s.stats.wall_time()))
            .collect()
    }

    /// Advances one tick: commands, dynamics, then every sensor whose cadence
    /// falls on this tick.
    pub fn step(&mut self, commands: &[(String, ControlCommand)]) -> Result<Frame, SimError> {
        let out = self.dynamics.tick(commands, self.dt, Some(self.world.heightfield()))?;
        let tick = out.tick;
        let world = &self.world;
        let backends = &self.backends;
        let agents = &out.agents;
        let previous = &self.previous_nu;
        let gravity = &self.gravity;
        let dt = self.dt;
        let readings: Vec<Result<Option<SensorOutput>, SimError>> = self
            .sensors
            .par_iter_mut()
            .map(|slot| {
                if !slot.spec.emits(tick - 1) {
                    return Ok(None);
                }
                let view = VehicleView {
                    state: &agents[slot.agent].state,
                    previous_nu: Some(&previous[slot.agent]),
                    dt,
                    gravity: gravity[slot.agent],
                };
                let ctx = slot.backend.map(|i| CastContext { world, backend: backends[i].backend.as_ref(), stats: &slot.stats });
                let reading = evaluate(&slot.spec, &view, ctx.as_ref(), &mut slot.rng).map_err(|source| SimError::Sensor {
                    agent: slot.agent_name.clone(),
                    sensor: slot.spec.name.clone(),
                    source,
                })?;
                Ok(Some(SensorOutput { agent: slot.agent_name.clone(), sensor: slot.spec.name.clone(), reading }))
            })
            .collect();
        let readings = readings.into_iter().filter_map(Result::transpose).collect::<Result<Vec<_>, _>>()?;
        for (prev, a) in self.previous_nu.iter_mut().zip(&out.agents) {
            *prev = a.state.nu;
        }
        Ok(Frame { tick, time: out.time, agents: out.agents, contacts: out.contacts, readings })
    }
}
