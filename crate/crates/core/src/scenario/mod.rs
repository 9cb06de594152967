//! Scenario files: one JSON document describing the world, agents, sensors,
//! environmental fields and bridge settings of a run.
//!
//! Parsing is strict (unknown fields are errors) and fills defaults; unset
//! vehicle parameters take the REMUS 100 values. [`validate`] reports every
//! cross-field problem as data rather than failing on the first.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{AgentConfig, ControlCommand, ModelKind, RigidBodyState, VehicleParams};
use crate::envfx::{read_current_grid, CurrentField, EnvError, WaveComponent, WaveField};
use crate::sensors::SensorSpec;
use crate::world::{generate_world, load_bathymetry, presets, read_archive, GenSpec, Heightfield, World, WorldError};

pub const DEFAULT_BRIDGE_PORT: u16 = 28510;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("scenario serialisation failed: {0}")]
    Serialise(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("unknown world preset {0:?}")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub ticks_per_sec: f64,
    pub duration_ticks: u64,
    pub world: WorldSpec,
    pub agents: Vec<AgentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<CurrentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waves: Option<WaveSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bridge: Option<BridgeSpec>,
    #[serde(default)]
    pub rng_seed: u64,
}

/// Where the world comes from. Relative paths resolve against the scenario
/// file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorldSpec {
    Flat {
        size: [f64; 2],
        cell_size: f64,
        depth: f64,
        #[serde(default)]
        origin: [f64; 2],
    },
    Generate {
        spec: GenSpec,
        #[serde(default)]
        seed: u64,
    },
    Bathymetry {
        path: PathBuf,
        cell_size: f64,
        #[serde(default)]
        origin: [f64; 2],
    },
    Archive {
        path: PathBuf,
    },
    Preset {
        name: String,
    },
}

pub const PRESETS: [&str; 1] = ["dam"];

impl WorldSpec {
    pub fn build(&self, base: &Path) -> Result<World, ScenarioError> {
        Ok(match self {
            WorldSpec::Flat { size, cell_size, depth, origin } => {
                let nodes = |len: f64| (len / cell_size).round() as usize + 1;
                World::new(Heightfield::flat(*origin, *cell_size, nodes(size[0]), nodes(size[1]), *depth)?)
            }
            WorldSpec::Generate { spec, seed } => generate_world(spec, *seed)?,
            WorldSpec::Bathymetry { path, cell_size, origin } => World::new(load_bathymetry(&base.join(path), *cell_size, *origin)?),
            WorldSpec::Archive { path } => {
                let full = base.join(path);
                let bytes = std::fs::read(&full).map_err(|source| ScenarioError::Io { path: full, source })?;
                read_archive(&bytes)?
            }
            WorldSpec::Preset { name } => match name.as_str() {
                "dam" => presets::dam(),
                other => return Err(ScenarioError::UnknownPreset(other.to_string())),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurrentSpec {
    Constant { velocity: [f64; 3] },
    AnalyticShear { surface_velocity: [f64; 3], decay_depth: f64 },
    /// Binary grid file as written by `write_current_grid`.
    GridFile { path: PathBuf },
}

impl CurrentSpec {
    pub fn build(&self, base: &Path) -> Result<CurrentField, ScenarioError> {
        let field = match self {
            CurrentSpec::Constant { velocity } => CurrentField::Constant { velocity: *velocity },
            CurrentSpec::AnalyticShear { surface_velocity, decay_depth } => {
                CurrentField::AnalyticShear { surface_velocity: *surface_velocity, decay_depth: *decay_depth }
            }
            CurrentSpec::GridFile { path } => CurrentField::Grid(read_current_grid(&base.join(path))?),
        };
        field.validate()?;
        Ok(field)
    }
}

fn default_gravity() -> f64 {
    9.81
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSpec {
    pub components: Vec<WaveComponent>,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    /// Add wave orbital velocity to the current seen by each vehicle.
    #[serde(default)]
    pub orbital_coupling: bool,
}

impl WaveSpec {
    pub fn field(&self) -> WaveField {
        WaveField { components: self.components.clone(), gravity: self.gravity }
    }
}

fn default_port() -> u16 {
    DEFAULT_BRIDGE_PORT
}

fn default_bind() -> String {
    "127.0.0.1".into()
}

fn default_topics() -> Vec<String> {
    vec!["*".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeSpec {
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_bind")]
    pub bind: String,
    /// Globs of topics the run publishes.
    #[serde(default = "default_topics")]
    pub topics: Vec<String>,
}

impl Default for BridgeSpec {
    fn default() -> Self {
        Self { port: default_port(), bind: default_bind(), topics: default_topics() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub name: String,
    pub model: ModelKind,
    #[serde(default)]
    pub params: VehicleParams,
    #[serde(default)]
    pub initial_pose: [f64; 6],
    #[serde(default)]
    pub initial_velocity: [f64; 6],
    #[serde(default)]
    pub sensors: Vec<SensorSpec>,
    /// Uniform current felt by this agent only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_agent_current: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_command: Option<ControlCommand>,
}

impl AgentSpec {
    pub fn agent_config(&self) -> AgentConfig {
        let mut params = self.params.clone();
        if let Some(c) = self.per_agent_current {
            params.environmental.current = Some(c);
        }
        let mut state = RigidBodyState::at_rest(self.initial_pose, params.fin_count());
        state.nu = self.initial_velocity;
        AgentConfig {
            name: self.name.clone(),
            model: self.model,
            params,
            initial_state: state,
            initial_command: self.initial_command.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    serde_json::from_str(text).map_err(|e| ScenarioError::Parse { line: e.line(), column: e.column(), message: e.to_string() })
}

pub fn serialize_scenario(config: &ScenarioConfig) -> Result<String, ScenarioError> {
    serde_json::to_string_pretty(config).map_err(|e| ScenarioError::Serialise(e.to_string()))
}

impl ScenarioConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.ticks_per_sec
    }

    pub fn agent_configs(&self) -> Vec<AgentConfig> {
        self.agents.iter().map(AgentSpec::agent_config).collect()
    }
}

/// Every rule violation in `config`; empty when the scenario is runnable.
pub fn validate(config: &ScenarioConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut bad = |path: String, message: &str| out.push(Violation { path, message: message.to_string() });

    if config.name.trim().is_empty() {
        bad("name".into(), "must not be empty");
    }
    if !(config.ticks_per_sec > 0.0 && config.ticks_per_sec.is_finite()) {
        bad("ticks_per_sec".into(), "must be positive");
    }
    if config.duration_ticks < 1 {
        bad("duration_ticks".into(), "must be at least 1");
    }
    check_world(&config.world, &mut bad);

    let mut names = HashSet::new();
    for (i, a) in config.agents.iter().enumerate() {
        let at = |f: &str| format!("agents[{i}].{f}");
        if a.name.trim().is_empty() {
            bad(at("name"), "must not be empty");
        } else if !names.insert(a.name.as_str()) {
            bad(at("name"), &format!("duplicate agent name {:?}", a.name));
        }
        if a.name.contains(['/', '*', '?']) {
            bad(at("name"), "must not contain '/', '*' or '?'");
        }
        for (path, msg) in a.params.check() {
            bad(at(&format!("params.{path}")), &msg);
        }
        if a.initial_pose.iter().chain(&a.initial_velocity).any(|v| !v.is_finite()) {
            bad(at("initial_pose"), "pose and velocity must be finite");
        }
        if config.current.is_some() && (a.per_agent_current.is_some() || a.params.environmental.current.is_some()) {
            bad(at("per_agent_current"), "a per-agent current cannot be combined with a world current field");
        }
        if a.per_agent_current.is_some() && a.params.environmental.current.is_some() {
            bad(at("per_agent_current"), "also set in params.environmental.current; give it once");
        }
        if let Some(c) = a.per_agent_current {
            if c.iter().any(|v| !v.is_finite()) {
                bad(at("per_agent_current"), "must be finite");
            }
        }
        if let Some(ControlCommand::Direct { fin_commands, .. }) = &a.initial_command {
            if fin_commands.len() != a.params.fin_count() {
                bad(at("initial_command.fin_commands"), "length must equal the number of fins");
            }
        }
        let mut sensor_names = HashSet::new();
        for (j, s) in a.sensors.iter().enumerate() {
            let sat = |f: &str| format!("agents[{i}].sensors[{j}].{f}");
            if s.name.trim().is_empty() || s.name.contains(['/', '*', '?']) {
                bad(sat("name"), "must be non-empty without '/', '*' or '?'");
            } else if !sensor_names.insert(s.name.as_str()) {
                bad(sat("name"), &format!("duplicate sensor name {:?} on this agent", s.name));
            }
            for (path, msg) in s.check() {
                bad(sat(&path), &msg);
            }
        }
    }

    if let Some(c) = &config.current {
        match c {
            CurrentSpec::Constant { velocity } if velocity.iter().any(|v| !v.is_finite()) => {
                bad("current.velocity".into(), "must be finite");
            }
            CurrentSpec::AnalyticShear { decay_depth, .. } if !(*decay_depth > 0.0) => {
                bad("current.decay_depth".into(), "must be positive");
            }
            _ => {}
        }
    }
    if let Some(w) = &config.waves {
        if let Err(e) = w.field().validate() {
            bad("waves".into(), &e.to_string());
        }
    }
    if let Some(b) = &config.bridge {
        if b.topics.iter().any(|t| t.is_empty()) {
            bad("bridge.topics".into(), "topic globs must not be empty");
        }
    }
    out
}

fn check_world(world: &WorldSpec, bad: &mut impl FnMut(String, &str)) {
    match world {
        WorldSpec::Flat { size, cell_size, depth, .. } => {
            if !(*cell_size > 0.0) {
                bad("world.cell_size".into(), "must be positive");
            } else if size.iter().any(|s| !(*s >= *cell_size)) {
                bad("world.size".into(), "must span at least one cell");
            }
            if !depth.is_finite() {
                bad("world.depth".into(), "must be finite");
            }
        }
        WorldSpec::Generate { spec, .. } => {
            if let Err(e) = spec.validate() {
                bad("world.spec".into(), &e.to_string());
            }
        }
        WorldSpec::Bathymetry { cell_size, .. } => {
            if !(*cell_size > 0.0) {
                bad("world.cell_size".into(), "must be positive");
            }
        }
        WorldSpec::Archive { .. } => {}
        WorldSpec::Preset { name } => {
            if !PRESETS.contains(&name.as_str()) {
                bad("world.name".into(), &format!("unknown preset; known: {}", PRESETS.join(", ")));
            }
        }
    }
}
