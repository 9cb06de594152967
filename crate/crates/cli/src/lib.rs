//! Command implementations behind the `mariner` binary.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use mariner_bridge::{tick_envelopes, BridgeServer, Diagnostics, ServerConfig};
use mariner_core::accel::{bench_backends, sonar_batch, BenchReport, DEFAULT_LEAF_SIZE};
use mariner_core::dynamics::{ContactEvent, RigidBodyState};
use mariner_core::scenario::{parse_scenario, validate, ScenarioConfig};
use mariner_core::sensors::{waterfall_pgm, SensorReading, SidescanLine};
use mariner_core::sim::{Frame, SimError, Simulation};
use mariner_core::world::{generate_world, presets, read_archive, read_ascii_grid, write_archive, GenSpec, World};

/// Failure classified by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad input: exit code 2.
    Config(anyhow::Error),
    /// Fault while running: exit code 3.
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Runtime(e) => e,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.error())
    }
}

fn config(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

pub type Outcome<T> = Result<T, Failure>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub ticks_executed: u64,
    pub duration_ticks: u64,
    pub ticks_per_sec: f64,
    /// Wall-clock seconds for the tick loop.
    pub wall_time: f64,
    /// Messages emitted per sensor topic `agent/sensor`.
    pub sensor_messages: BTreeMap<String, u64>,
    pub final_states: BTreeMap<String, RigidBodyState>,
    pub contacts: Vec<ContactEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bridge: Option<Diagnostics>,
    /// Set when the run stopped early on a fault.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the scenario's bridge port.
    pub port: Option<u16>,
    pub no_bridge: bool,
    /// Wait for this many subscribed bridge clients before the first tick.
    pub wait_clients: usize,
    /// Pace ticks to wall-clock time.
    pub realtime: bool,
    pub pgm: bool,
    pub xyz: bool,
}

pub fn load_scenario(path: &Path) -> Outcome<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(config)?;
    let cfg = parse_scenario(&text).with_context(|| format!("parsing {}", path.display())).map_err(config)?;
    let violations = validate(&cfg);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(config(anyhow!("{} is invalid:\n  {}", path.display(), list.join("\n  "))));
    }
    Ok(cfg)
}

struct Recorder {
    out: PathBuf,
    state: csv::Writer<BufWriter<File>>,
    sensors: BufWriter<File>,
    counts: BTreeMap<String, u64>,
    sidescan: BTreeMap<String, Vec<SidescanLine>>,
    pgm: bool,
    xyz: bool,
}

#[derive(Serialize)]
struct SensorLine<'a> {
    tick: u64,
    time: f64,
    agent: &'a str,
    sensor: &'a str,
    reading: &'a SensorReading,
}

impl Recorder {
    fn new(out: &Path, opts: &RunOptions) -> anyhow::Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let mut state = csv::Writer::from_writer(BufWriter::new(File::create(out.join("state.csv"))?));
        state.write_record([
            "tick", "time", "agent", "x", "y", "z", "roll", "pitch", "yaw", "u", "v", "w", "p", "q", "r", "prop_speed", "fin_angles",
        ])?;
        let sensors = BufWriter::new(File::create(out.join("sensors.jsonl"))?);
        Ok(Self { out: out.to_path_buf(), state, sensors, counts: BTreeMap::new(), sidescan: BTreeMap::new(), pgm: opts.pgm, xyz: opts.xyz })
    }

    fn record(&mut self, frame: &Frame) -> anyhow::Result<()> {
        for a in &frame.agents {
            let s = &a.state;
            let mut row = vec![frame.tick.to_string(), frame.time.to_string(), a.name.clone()];
            row.extend(s.eta.iter().chain(&s.nu).map(|v| v.to_string()));
            row.push(s.prop_speed.to_string());
            row.push(s.fin_angles.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"));
            self.state.write_record(&row)?;
        }
        for r in &frame.readings {
            let topic = mariner_bridge::sensor_topic(&r.agent, &r.sensor);
            *self.counts.entry(topic.clone()).or_default() += 1;
            let line = SensorLine { tick: frame.tick, time: frame.time, agent: &r.agent, sensor: &r.sensor, reading: &r.reading };
            serde_json::to_writer(&mut self.sensors, &line)?;
            self.sensors.write_all(b"\n")?;
            match &r.reading {
                SensorReading::Sidescan(line) if self.pgm => self.sidescan.entry(file_stem(&topic)).or_default().push(line.clone()),
                SensorReading::PointCloud(cloud) if self.xyz => {
                    let dir = self.out.join("clouds");
                    fs::create_dir_all(&dir)?;
                    let mut f = BufWriter::new(File::create(dir.join(format!("{}_{:06}.xyz", file_stem(&topic), frame.tick)))?);
                    for (p, i) in cloud.points.iter().zip(&cloud.intensities) {
                        writeln!(f, "{} {} {} {}", p[0], p[1], p[2], i)?;
                    }
                    f.flush()?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn finish(mut self) -> anyhow::Result<BTreeMap<String, u64>> {
        self.state.flush()?;
        self.sensors.flush()?;
        for (stem, lines) in &self.sidescan {
            fs::write(self.out.join(format!("waterfall_{stem}.pgm")), waterfall_pgm(lines))?;
        }
        Ok(self.counts)
    }
}

fn file_stem(topic: &str) -> String {
    topic.replace('/', "_")
}

/// Runs a scenario file, writing all artifacts under `out`.
pub fn cmd_run(scenario: &Path, out: &Path, opts: &RunOptions) -> Outcome<RunReport> {
    let cfg = load_scenario(scenario)?;
    let base = scenario.parent().unwrap_or(Path::new("."));
    run_config(&cfg, base, out, opts)
}

pub fn run_config(cfg: &ScenarioConfig, base: &Path, out: &Path, opts: &RunOptions) -> Outcome<RunReport> {
    let mut sim = Simulation::from_scenario(cfg, base).map_err(|e| match e {
        SimError::Invalid(_) | SimError::Scenario(_) => config(e),
        other => runtime(other),
    })?;
    let mut bridge = match (&cfg.bridge, opts.no_bridge) {
        (Some(spec), false) => {
            let mut sc = ServerConfig::new(spec.bind.clone(), opts.port.unwrap_or(spec.port));
            sc.topics = spec.topics.clone();
            let server = BridgeServer::serve(&sc, cfg.agents.iter().map(|a| a.name.clone())).map_err(runtime)?;
            info!("bridge listening on {}", server.local_addr());
            if opts.wait_clients > 0 {
                info!("waiting for {} client(s)", opts.wait_clients);
                while !server.wait_for_subscribers(opts.wait_clients, Duration::from_secs(1)) {}
            }
            Some(server)
        }
        _ => None,
    };
    let mut rec = Recorder::new(out, opts).map_err(runtime)?;

    let start = Instant::now();
    let mut contacts = Vec::new();
    let mut fault = None;
    for _ in 0..cfg.duration_ticks {
        let commands: Vec<_> = match bridge.as_mut() {
            Some(b) => b.poll_commands().into_iter().map(|c| (c.agent, c.command)).collect(),
            None => Vec::new(),
        };
        let frame = match sim.step(&commands) {
            Ok(f) => f,
            Err(e) => {
                fault = Some(format!("tick {}: {e}", sim.ticks_done() + 1));
                break;
            }
        };
        if let Err(e) = rec.record(&frame) {
            fault = Some(format!("tick {}: recording failed: {e:#}", frame.tick));
            break;
        }
        if let Some(b) = bridge.as_mut() {
            for env in tick_envelopes(&frame) {
                if let Err(e) = b.publish(env) {
                    warn!("publish failed: {e}");
                }
            }
        }
        if let Some(c) = frame.contacts.first() {
            fault = Some(format!("tick {}: {} touched the seabed at depth {:.2} m", c.tick, c.agent, c.seabed_depth));
            contacts.extend(frame.contacts);
            break;
        }
        if opts.realtime {
            let due = Duration::from_secs_f64(frame.time);
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                std::thread::sleep(wait);
            }
        }
    }
    let wall_time = start.elapsed().as_secs_f64();
    let counts = rec.finish().map_err(runtime)?;
    let diagnostics = bridge.as_ref().map(|b| {
        b.flush(Duration::from_secs(2));
        b.diagnostics()
    });
    drop(bridge);

    let final_states = sim.dynamics().agent_names().filter_map(|n| sim.dynamics().state(n).map(|s| (n.to_string(), s.clone()))).collect();
    let report = RunReport {
        scenario: cfg.name.clone(),
        ticks_executed: sim.ticks_done(),
        duration_ticks: cfg.duration_ticks,
        ticks_per_sec: cfg.ticks_per_sec,
        wall_time,
        sensor_messages: counts,
        final_states,
        contacts,
        bridge: diagnostics,
        fault: fault.clone(),
    };
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&report).map_err(runtime)?).map_err(runtime)?;
    match fault {
        Some(f) => Err(runtime(anyhow!("run stopped early at {f}; partial logs are in {}", out.display()))),
        None => Ok(report),
    }
}

/// World for `bench`: `dam`, a world archive (`.zip`) or an ASCII grid (`.asc`).
pub fn load_world_source(source: &str) -> Outcome<World> {
    if source == "dam" {
        return Ok(presets::dam());
    }
    let path = Path::new(source);
    match path.extension().and_then(|e| e.to_str()) {
        Some("asc") => {
            let grid = read_ascii_grid(path).map_err(config)?;
            let (cell, origin) = (grid.cellsize, [grid.xll, grid.yll]);
            Ok(World::new(grid.into_heightfield(cell, origin).map_err(config)?))
        }
        _ => {
            let bytes = fs::read(path).with_context(|| format!("reading {source}")).map_err(config)?;
            read_archive(&bytes).with_context(|| format!("loading world archive {source}")).map_err(config)
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub ticks: usize,
    pub rays_per_tick: usize,
    pub leaf_size: f64,
    pub max_range: f64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self { ticks: 509, rays_per_tick: 2048, leaf_size: DEFAULT_LEAF_SIZE, max_range: 60.0 }
    }
}

/// Times the three backend runs; writes `bench.json` and the octree cache under `out`.
pub fn cmd_bench(world: &World, opts: &BenchOptions, out: &Path) -> Outcome<BenchReport> {
    if opts.ticks == 0 || opts.rays_per_tick == 0 || !(opts.leaf_size > 0.0) || !(opts.max_range > 0.0) {
        return Err(config(anyhow!("ticks, rays per tick, leaf size and max range must all be positive")));
    }
    let rays = sonar_batch(world, opts.rays_per_tick, opts.max_range).map_err(config)?;
    let report = bench_backends(world, &rays, opts.ticks, opts.leaf_size, &out.join("cache")).map_err(runtime)?;
    fs::write(out.join("bench.json"), report.to_json()).map_err(runtime)?;
    Ok(report)
}

pub fn cmd_gen(spec_path: &Path, seed: u64, out: &Path) -> Outcome<World> {
    let text = fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display())).map_err(config)?;
    let spec: GenSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", spec_path.display())).map_err(config)?;
    let world = generate_world(&spec, seed).map_err(config)?;
    write_world(&world, out)?;
    Ok(world)
}

/// Imports an ASCII grid. `cell_size` overrides the file's `cellsize`.
pub fn cmd_import_bathy(asc: &Path, cell_size: Option<f64>, out: &Path) -> Outcome<World> {
    let grid = read_ascii_grid(asc).map_err(config)?;
    let cell = cell_size.unwrap_or(grid.cellsize);
    let origin = [grid.xll, grid.yll];
    let world = World::new(grid.into_heightfield(cell, origin).map_err(config)?);
    write_world(&world, out)?;
    Ok(world)
}

fn write_world(world: &World, out: &Path) -> Outcome<()> {
    let bytes = write_archive(world).map_err(runtime)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(runtime)?;
    }
    fs::write(out, bytes).with_context(|| format!("writing {}", out.display())).map_err(runtime)
}

/// Message schema documentation; optionally writes the golden frame corpus.
pub fn cmd_schema(golden: Option<&Path>) -> Outcome<String> {
    if let Some(dir) = golden {
        let names = mariner_bridge::golden::write_golden(dir).map_err(runtime)?;
        info!("wrote {} golden frames to {}", names.len(), dir.display());
    }
    serde_json::to_string_pretty(&mariner_bridge::schema_docs()).map_err(runtime)
}
