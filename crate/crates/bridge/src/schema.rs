//! Message families and the static schema registry.
//!
//! A schema tag is `holo.<Family>.v<N>`. Only the versions listed in
//! [`registry`] decode; anything else is an error.

use mariner_core::dynamics::{ControlCommand, RigidBodyState};
use mariner_core::sensors::{EchoReturn, MultibeamScan, PointCloud, SensorReading, SidescanLine};
use mariner_core::world::SemanticLabel;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::BridgeError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateMsg {
    /// Pose `[x, y, z, roll, pitch, yaw]`, NED, m and rad.
    pub pose: [f64; 6],
    /// Body twist `[u, v, w, p, q, r]`.
    pub twist: [f64; 6],
    pub fin_angles: Vec<f64>,
    pub prop_speed: f64,
    /// Water current at the vehicle, world frame.
    pub current: [f64; 3],
}

impl StateMsg {
    pub fn new(state: &RigidBodyState, current: [f64; 3]) -> Self {
        Self { pose: state.eta, twist: state.nu, fin_angles: state.fin_angles.clone(), prop_speed: state.prop_speed, current }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImuMsg {
    pub specific_force: [f64; 3],
    pub angular_rate: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DvlMsg {
    pub velocity: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthMsg {
    pub depth: f64,
}

/// A command addressed to one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandMsg {
    pub agent: String,
    pub command: ControlCommand,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    State(StateMsg),
    SonarEcho(EchoReturn),
    MultibeamScan(MultibeamScan),
    SidescanLine(SidescanLine),
    PointCloud(PointCloud),
    Imu(ImuMsg),
    Dvl(DvlMsg),
    Depth(DepthMsg),
    Command(CommandMsg),
}

impl From<SensorReading> for Payload {
    fn from(r: SensorReading) -> Self {
        match r {
            SensorReading::Echo(e) => Payload::SonarEcho(e),
            SensorReading::Multibeam(m) => Payload::MultibeamScan(m),
            SensorReading::Sidescan(s) => Payload::SidescanLine(s),
            SensorReading::PointCloud(p) => Payload::PointCloud(p),
            SensorReading::Imu { specific_force, angular_rate } => Payload::Imu(ImuMsg { specific_force, angular_rate }),
            SensorReading::Dvl { velocity } => Payload::Dvl(DvlMsg { velocity }),
            SensorReading::Depth { depth } => Payload::Depth(DepthMsg { depth }),
        }
    }
}

impl Payload {
    pub fn schema(&self) -> &'static str {
        match self {
            Payload::State(_) => "holo.State.v1",
            Payload::SonarEcho(_) => "holo.SonarEcho.v1",
            Payload::MultibeamScan(_) => "holo.MultibeamScan.v1",
            Payload::SidescanLine(_) => "holo.SidescanLine.v1",
            Payload::PointCloud(_) => "holo.PointCloud.v1",
            Payload::Imu(_) => "holo.Imu.v1",
            Payload::Dvl(_) => "holo.Dvl.v1",
            Payload::Depth(_) => "holo.Depth.v1",
            Payload::Command(_) => "holo.Command.v1",
        }
    }

    pub fn to_value(&self) -> Result<Value, BridgeError> {
        let v = match self {
            Payload::State(m) => serde_json::to_value(m),
            Payload::SonarEcho(m) => serde_json::to_value(m),
            Payload::MultibeamScan(m) => serde_json::to_value(m),
            Payload::SidescanLine(m) => serde_json::to_value(m),
            Payload::PointCloud(m) => serde_json::to_value(m),
            Payload::Imu(m) => serde_json::to_value(m),
            Payload::Dvl(m) => serde_json::to_value(m),
            Payload::Depth(m) => serde_json::to_value(m),
            Payload::Command(m) => serde_json::to_value(m),
        };
        v.map_err(|e| BridgeError::Malformed(e.to_string()))
    }

    /// Decodes a payload body under the registered `schema`.
    pub fn from_value(schema: &str, body: Value) -> Result<Self, BridgeError> {
        let entry = lookup(schema)?;
        (entry.decode)(body).map_err(|e| BridgeError::Malformed(format!("{schema} payload: {e}")))
    }
}

pub struct SchemaEntry {
    pub tag: &'static str,
    pub family: &'static str,
    pub version: u32,
    pub description: &'static str,
    pub fields: &'static [(&'static str, &'static str)],
    decode: fn(Value) -> Result<Payload, serde_json::Error>,
    example: fn() -> Payload,
}

impl SchemaEntry {
    pub fn example(&self) -> Payload {
        (self.example)()
    }
}

fn label(class_id: u16, instance_id: u32) -> SemanticLabel {
    SemanticLabel::new(class_id, instance_id)
}

static REGISTRY: [SchemaEntry; 9] = [
    SchemaEntry {
        tag: "holo.State.v1",
        family: "State",
        version: 1,
        description: "vehicle pose and body twist",
        fields: &[
            ("pose", "[x, y, z, roll, pitch, yaw] NED, m and rad"),
            ("twist", "[u, v, w, p, q, r] body frame, m/s and rad/s"),
            ("fin_angles", "fin deflections, rad"),
            ("prop_speed", "propeller speed, rev/s"),
            ("current", "water current at the vehicle, world frame, m/s"),
        ],
        decode: |v| serde_json::from_value(v).map(Payload::State),
        example: || {
            Payload::State(StateMsg {
                pose: [1.0, -2.0, 10.5, 0.0, 0.01, 1.5707963267948966],
                twist: [1.5, 0.0, 0.02, 0.0, 0.0, 0.001],
                fin_angles: vec![0.05, -0.05, 0.0, 0.0],
                prop_speed: 25.0,
                current: [0.5, 0.0, 0.0],
            })
        },
    },
    SchemaEntry {
        tag: "holo.SonarEcho.v1",
        family: "SonarEcho",
        version: 1,
        description: "single-beam echo sounder return",
        fields: &[
            ("range", "slant range, m; null when nothing is hit"),
            ("intensity", "normalised return strength in [0, 1]"),
            ("label", "optional {class_id, instance_id} of the surface hit"),
        ],
        decode: |v| serde_json::from_value(v).map(Payload::SonarEcho),
        example: || Payload::SonarEcho(EchoReturn { range: 9.75, intensity: 0.0105, label: Some(label(0, 0)) }),
    },
    SchemaEntry {
        tag: "holo.MultibeamScan.v1",
        family: "MultibeamScan",
        version: 1,
        description: "across-track fan of ranges",
        fields: &[
            ("beam_angles", "beam angles from the sensor's down axis, rad"),
            ("ranges", "per-beam range, m; null for a miss"),
            ("intensities", "per-beam return strength in [0, 1]"),
            ("labels", "optional per-beam label or null"),
        ],
        decode: |v| serde_json::from_value(v).map(Payload::MultibeamScan),
        example: || {
            Payload::MultibeamScan(MultibeamScan {
                beam_angles: vec![-0.5, 0.0, 0.5],
                ranges: vec![11.4, 10.0, f64::INFINITY],
                intensities: vec![0.007, 0.01, 0.0],
                labels: Some(vec![Some(label(0, 0)), Some(label(2, 7)), None]),
            })
        },
    },
    SchemaEntry {
        tag: "holo.SidescanLine.v1",
        family: "SidescanLine",
        version: 1,
        description: "one sidescan ping, slant-range binned per side",
        fields: &[
            ("bin_size", "slant-range width of one bin, m"),
            ("port", "port intensities, near to far"),
            ("starboard", "starboard intensities, near to far"),
            ("port_labels", "optional majority label per bin"),
            ("starboard_labels", "optional majority label per bin"),
        ],
        decode: |v| serde_json::from_value(v).map(Payload::SidescanLine),
        example: || {
            Payload::SidescanLine(SidescanLine {
                bin_size: 0.5,
                port: vec![0.0, 0.25, 1.0, 0.5],
                starboard: vec![0.0, 0.0, 0.75, 0.125],
                port_labels: None,
                starboard_labels: None,
            })
        },
    },
    SchemaEntry {
        tag: "holo.PointCloud.v1",
        family: "PointCloud",
        version: 1,
        description: "LiDAR returns in the sensor frame",
        fields: &[
            ("points", "list of [x, y, z], sensor frame, m"),
            ("intensities", "per-point return strength in [0, 1]"),
            ("labels", "optional per-point label"),
        ],
        decode: |v| serde_json::from_value(v).map(Payload::PointCloud),
        example: || {
            Payload::PointCloud(PointCloud {
                points: vec![[3.0, 0.0, 1.0], [2.5, 0.5, 1.25]],
                intensities: vec![0.1, 0.125],
                labels: Some(vec![label(3, 1), label(3, 1)]),
            })
        },
    },
    SchemaEntry {
        tag: "holo.Imu.v1",
        family: "Imu",
        version: 1,
        description: "body-frame specific force and angular rate",
        fields: &[("specific_force", "m/s^2, body frame"), ("angular_rate", "rad/s, body frame")],
        decode: |v| serde_json::from_value(v).map(Payload::Imu),
        example: || Payload::Imu(ImuMsg { specific_force: [0.0, 0.0, -9.81], angular_rate: [0.0, 0.0, 0.01] }),
    },
    SchemaEntry {
        tag: "holo.Dvl.v1",
        family: "Dvl",
        version: 1,
        description: "body-frame velocity over ground",
        fields: &[("velocity", "[u, v, w], m/s")],
        decode: |v| serde_json::from_value(v).map(Payload::Dvl),
        example: || Payload::Dvl(DvlMsg { velocity: [1.5, -0.02, 0.0] }),
    },
    SchemaEntry {
        tag: "holo.Depth.v1",
        family: "Depth",
        version: 1,
        description: "pressure depth",
        fields: &[("depth", "m below the mean surface")],
        decode: |v| serde_json::from_value(v).map(Payload::Depth),
        example: || Payload::Depth(DepthMsg { depth: 12.5 }),
    },
    SchemaEntry {
        tag: "holo.Command.v1",
        family: "Command",
        version: 1,
        description: "actuator or autopilot setpoint command for one agent",
        fields: &[
            ("agent", "agent name"),
            (
                "command",
                "{mode: \"setpoint\", depth, heading, speed} or {mode: \"direct\", fin_commands, prop_speed}",
            ),
        ],
        decode: |v| serde_json::from_value(v).map(Payload::Command),
        example: || {
            Payload::Command(CommandMsg {
                agent: "auv0".into(),
                command: ControlCommand::Setpoint { depth: 10.0, heading: 0.0, speed: 1.5 },
            })
        },
    },
];

pub fn registry() -> &'static [SchemaEntry] {
    &REGISTRY
}

pub fn lookup(tag: &str) -> Result<&'static SchemaEntry, BridgeError> {
    if let Some(e) = REGISTRY.iter().find(|e| e.tag == tag) {
        return Ok(e);
    }
    let family = tag.strip_prefix("holo.").and_then(|r| r.rsplit_once(".v")).map(|(f, _)| f);
    match family {
        Some(f) if REGISTRY.iter().any(|e| e.family == f) => Err(BridgeError::UnsupportedVersion(tag.to_string())),
        _ => Err(BridgeError::UnknownSchema(tag.to_string())),
    }
}

/// Human- and machine-readable description of every registered schema.
pub fn schema_docs() -> Value {
    let families: Vec<Value> = REGISTRY
        .iter()
        .map(|e| {
            let fields: serde_json::Map<String, Value> = e.fields.iter().map(|(k, d)| (k.to_string(), json!(d))).collect();
            json!({
                "schema": e.tag,
                "family": e.family,
                "version": e.version,
                "description": e.description,
                "fields": fields,
                "example": e.example().to_value().unwrap_or(Value::Null),
            })
        })
        .collect();
    json!({
        "framing": "u32 little-endian body length, then a UTF-8 JSON object with keys in sorted order",
        "frames": {
            "SUBSCRIBE": {"type": "SUBSCRIBE", "topics": "list of topic globs; '*' matches any run of characters, '?' one"},
            "PUBLISH": {"type": "PUBLISH", "envelope": {"topic": "text", "schema": "holo.<Family>.v<N>", "tick": "unsigned", "stamp": "simulated seconds", "payload": "schema body"}},
            "COMMAND": {"type": "COMMAND", "agent": "text", "command": "Command body"},
            "ERROR": {"type": "ERROR", "message": "text; the server disconnects after sending"}
        },
        "schemas": families,
    })
}
