//! Noise-induced stabilization in a two-species reaction network.
//!
//! The network has two species and five reactions,
//!
//! ```text
//! 3 S1 + 2 S2 -> 5 S1 +   S2
//! 2 S1 + 3 S2 ->   S1 + 5 S2
//! 4 S1        -> 0
//!        4 S2 -> 0
//! 0           -> S1 + S2
//! ```
//!
//! with mass-action kinetics. The deterministic dynamics blow up in finite
//! time from large diagonal states, while the stochastic chain is positive
//! recurrent. This crate provides the chain and two auxiliary chains used to
//! study it in the cone around the diagonal, a piecewise energy function with
//! an exhaustive drift certifier, exact stochastic simulation, a blow-up aware
//! ODE integrator, and the Ornstein-Uhlenbeck scaling-limit toolkit.

pub mod error;
pub mod limits;
pub mod lyapunov;
pub mod network;
pub mod numeric;
pub mod ode;
pub mod partition;
pub mod quad;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use lyapunov::{
    check_cond_const, drift, energy, verify_drift, verify_drift_region, verify_interface_ordering, DriftReport,
    EnergyParams, ScanRegion,
};
pub use network::{apply_generator, falling_factorial, jump_targets, propensities, ChainKind, LatticeState, ReactionSystem};
pub use partition::{classify, from_axial, in_delta, to_axial, Aperture, AxialCoord, ConeZone, PartitionParams, Region, Strip};
pub use simulate::{ssa_run, RngStream, StopReason, StoppingCondition, Trajectory};
