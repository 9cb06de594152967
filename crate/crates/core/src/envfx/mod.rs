//! Ocean currents, Gerstner waves and hull buoyancy.

mod buoyancy;
mod current;
mod waves;

use thiserror::Error;

pub use buoyancy::{buoyancy_force, equivalent_radius, submerged_fraction};
pub use current::{read_current_grid, write_current_grid, CurrentField, CurrentGrid, GRID_FORMAT};
pub use waves::{WaveComponent, WaveField, WaveSample};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid current grid: {0}")]
    InvalidGrid(String),
    #[error("invalid wave component {index}: {message}")]
    InvalidWave { index: usize, message: String },
    #[error("non-finite current vector")]
    NonFinite,
}
