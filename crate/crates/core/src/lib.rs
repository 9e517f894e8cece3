//! Segmented swimmer in a bounded nonstationary Stokes fluid.

pub mod analysis;
pub mod config;
pub mod coupling;
pub mod fluid;
pub mod forces;
pub mod geometry;
pub mod sweep;

use thiserror::Error;

/// Top-level error for the drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Coupling(#[from] coupling::CouplingError),
    #[error(transparent)]
    Fluid(#[from] fluid::FluidError),
    #[error("{0}")]
    Analysis(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
