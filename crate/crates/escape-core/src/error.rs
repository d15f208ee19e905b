//! Error type shared by the numerics modules. Variants carry the module the
//! failure originated in so the CLI can map them to exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("quadrature: {0}")]
    Quadrature(String),
    #[error("linear algebra: {0}")]
    Linear(String),
    #[error("simulation: {0}")]
    Simulation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
