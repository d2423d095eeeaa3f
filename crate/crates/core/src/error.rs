use thiserror::Error;

/// Errors raised by the network, partition, simulation and numerics layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("falling factorial {y}^({p}) overflows 128-bit integers")]
    Overflow { y: u64, p: u32 },

    #[error("undefined small state ({x1}, {x2}): the time-changed chain needs both coordinates >= 3")]
    UndefinedSmallState { x1: u64, x2: u64 },

    #[error("axial coordinate (r={r}, d={d}) is outside the lattice image (need |d| <= r and equal parity)")]
    AxialDomain { r: u64, d: i64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("time {t} lies past the trajectory horizon {horizon}")]
    PastHorizon { t: f64, horizon: f64 },

    #[error("step size {h:e} fell below the floor at t = {t} without exceeding the magnitude cap")]
    Stiffness { t: f64, h: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
