//! Exact event-driven simulation of the three chains.

mod coupling;
mod excursion;
mod rng;
mod ssa;
mod timechange;
mod trajectory;

pub use coupling::{coupled_run, coupled_yz_run, coupling_experiment, diagonal_start, CoupledRun, CouplingReport};
pub use excursion::{excursion_scan, interarrival_times, Excursion, ExcursionScanner};
pub use rng::{par_replicas, RngStream};
pub use ssa::{run, ssa_run, Simulator, Step, StoppingCondition, Stops};
pub use timechange::{speed, time_change_map, TimeChangeMap};
pub use trajectory::{Event, StopReason, Trajectory, TrajectoryMeta};
