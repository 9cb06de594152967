use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mariner::{cmd_bench, cmd_gen, cmd_import_bathy, cmd_run, cmd_schema, load_world_source, BenchOptions, Failure, RunOptions};
use mariner_core::accel::DEFAULT_LEAF_SIZE;

/// Headless marine robotics simulator.
///
/// Exit codes: 0 success, 2 configuration error, 3 runtime fault.
/// Set MARINER_LOG (e.g. `info`, `debug`) for log output.
#[derive(Parser)]
#[command(name = "mariner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and record state, sensor logs and a report.
    Run {
        scenario: PathBuf,
        /// Output directory; every artifact is written here.
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        /// Bridge port, overriding the scenario.
        #[arg(long)]
        port: Option<u16>,
        /// Do not start the bridge even if the scenario configures one.
        #[arg(long)]
        no_bridge: bool,
        /// Wait for this many subscribed bridge clients before the first tick.
        #[arg(long, default_value_t = 0)]
        wait_clients: usize,
        /// Pace ticks to wall-clock time.
        #[arg(long)]
        realtime: bool,
        /// Write sidescan waterfalls as PGM images.
        #[arg(long)]
        pgm: bool,
        /// Write LiDAR clouds as XYZ text files.
        #[arg(long)]
        xyz: bool,
    },
    /// Time the caching, query and raycast sonar backends.
    Bench {
        /// `dam` (bundled), a world archive, or an ASCII grid.
        #[arg(long, default_value = "dam")]
        world: String,
        #[arg(long, default_value_t = 509)]
        ticks: usize,
        #[arg(long, default_value_t = 2048)]
        rays_per_tick: usize,
        #[arg(long, default_value_t = DEFAULT_LEAF_SIZE)]
        leaf_size: f64,
        #[arg(long, default_value_t = 60.0)]
        max_range: f64,
        #[arg(short, long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Generate a world archive from a generation spec.
    Gen {
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Convert an ASCII bathymetry grid to a world archive.
    ImportBathy {
        asc: PathBuf,
        /// Node spacing in metres; defaults to the file's cellsize.
        #[arg(long)]
        cell_size: Option<f64>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Print the bridge message schemas.
    Schema {
        /// Also write the golden frame corpus into this directory.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { scenario, out, port, no_bridge, wait_clients, realtime, pgm, xyz } => {
            let opts = RunOptions { port, no_bridge, wait_clients, realtime, pgm, xyz };
            let report = cmd_run(&scenario, &out, &opts)?;
            println!(
                "{}: {} ticks in {:.3} s, {} sensor messages -> {}",
                report.scenario,
                report.ticks_executed,
                report.wall_time,
                report.sensor_messages.values().sum::<u64>(),
                out.display()
            );
        }
        Command::Bench { world, ticks, rays_per_tick, leaf_size, max_range, out } => {
            let w = load_world_source(&world)?;
            let report = cmd_bench(&w, &BenchOptions { ticks, rays_per_tick, leaf_size, max_range }, &out)?;
            print!("{}", report.table());
        }
        Command::Gen { spec, seed, out } => {
            let w = cmd_gen(&spec, seed, &out)?;
            println!("{} props -> {}", w.props().len(), out.display());
        }
        Command::ImportBathy { asc, cell_size, out } => {
            let w = cmd_import_bathy(&asc, cell_size, &out)?;
            println!("{} x {} grid -> {}", w.heightfield().nx(), w.heightfield().ny(), out.display());
        }
        Command::Schema { golden } => println!("{}", cmd_schema(golden.as_deref())?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MARINER_LOG", "warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
