//! Joint simulation of the Y and Z chains from shared randomness.
//!
//! For reactions 1 and 2 both chains jump together at rate
//! `min(rate_Y, rate_Z)`; the excess of the faster chain fires on its own.
//! Reactions 3 to 5 exist only for Z and fire on their own. Each marginal is
//! an exact copy of its chain.

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use super::rng::{par_replicas, RngStream};
use super::ssa::pick;
use super::trajectory::{Event, StopReason, Trajectory};
use crate::error::{Error, Result};
use crate::limits::gronwall_constant;
use crate::network::{ChainKind, LatticeState, ReactionSystem, REACTIONS};
use crate::numeric::NeumaierSum;
use crate::partition::{classify, ConeZone, PartitionParams, Region};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledRun {
    pub y: Trajectory,
    pub z: Trajectory,
    /// Largest `|Z - Y|_1` over jump times up to the stop.
    pub sup_distance: u64,
    pub stop: StopReason,
    pub final_time: f64,
}

fn l1_distance(a: LatticeState, b: LatticeState) -> u64 {
    a.x1.abs_diff(b.x1) + a.x2.abs_diff(b.x2)
}

/// Leaves the cone, or the smaller of the two norms drops below `n/2`.
fn tcn_reached(y: LatticeState, z: LatticeState, n: u64, params: &PartitionParams) -> bool {
    !classify(y, params).is_cone() || !classify(z, params).is_cone() || 2 * y.norm1().min(z.norm1()) < n
}

fn validate_start(x0: LatticeState, n: u64, params: &PartitionParams) -> Result<()> {
    if x0.x1 < 3 || x0.x2 < 3 {
        return Err(Error::UndefinedSmallState { x1: x0.x1, x2: x0.x2 });
    }
    if x0.norm1() != n {
        return Err(Error::Domain(format!("start {x0} must have norm {n}")));
    }
    if classify(x0, params) != Region::Cone(ConeZone::Center) {
        return Err(Error::Domain(format!("start {x0} is not in the interior cone")));
    }
    Ok(())
}

/// Runs the coupled pair from `(x0, x0)` up to `horizon` or the exit time
/// described by [`tcn_reached`], whichever comes first. With `record` off
/// the trajectories stay empty and only the distance is tracked.
pub fn coupled_run<R: Rng>(
    x0: LatticeState,
    horizon: f64,
    n: u64,
    params: &PartitionParams,
    mut rng: R,
    record: bool,
) -> Result<CoupledRun> {
    validate_start(x0, n, params)?;
    let ysys = ReactionSystem::new(ChainKind::Y);
    let zsys = ReactionSystem::new(ChainKind::Z);
    let (mut y, mut z) = (x0, x0);
    let mut ytraj = Trajectory::new(ChainKind::Y, x0);
    let mut ztraj = Trajectory::new(ChainKind::Z, x0);
    let mut clock = NeumaierSum::new();
    let mut sup = 0;
    let stop = loop {
        let ry = ysys.propensities(y)?;
        let rz = zsys.propensities(z)?;
        // channels: common 1, common 2, excess 1, excess 2, Z-only 3..5
        let w = [
            ry[0].min(rz[0]),
            ry[1].min(rz[1]),
            (ry[0] - rz[0]).abs(),
            (ry[1] - rz[1]).abs(),
            rz[2],
            rz[3],
            rz[4],
        ];
        let total: f64 = w.iter().sum();
        let e: f64 = rng.sample(Exp1);
        let dt = e / total;
        if clock.value() + dt > horizon {
            let now = clock.value();
            if horizon > now {
                clock.add(horizon - now);
            }
            break StopReason::TimeBudget;
        }
        let channel = pick(&w, total, rng.random::<f64>());
        clock.add(dt);
        let t = clock.value();
        let (move_y, move_z, reaction) = match channel {
            0 | 1 => (true, true, channel),
            2 | 3 => {
                let k = channel - 2;
                (ry[k] > rz[k], ry[k] < rz[k], k)
            }
            _ => (false, true, channel - 2),
        };
        let jump = REACTIONS[reaction].jump;
        if move_y {
            y = y.shifted(jump).expect("positive rate always leads to a lattice state");
            if record {
                ytraj.events.push(Event { t, state: y, reaction });
            }
        }
        if move_z {
            z = z.shifted(jump).expect("positive rate always leads to a lattice state");
            if record {
                ztraj.events.push(Event { t, state: z, reaction });
            }
        }
        sup = sup.max(l1_distance(y, z));
        if tcn_reached(y, z, n, params) {
            break StopReason::Condition(format!("tcn({n})"));
        }
    };
    let final_time = clock.value();
    for traj in [&mut ytraj, &mut ztraj] {
        traj.stop = stop.clone();
        traj.final_time = final_time;
    }
    Ok(CoupledRun { y: ytraj, z: ztraj, sup_distance: sup, stop, final_time })
}

pub fn coupled_yz_run(x0: LatticeState, horizon: f64, n: u64, stream: RngStream) -> Result<CoupledRun> {
    coupled_run(x0, horizon, n, &PartitionParams::default(), stream.rng(), true)
}

/// Diagonal start with norm `n`.
pub fn diagonal_start(n: u64) -> LatticeState {
    LatticeState::new(n - n / 2, n / 2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingReport {
    pub n: u64,
    pub horizon: f64,
    pub replicas: u64,
    pub mean_sup_distance: f64,
    pub std_err: f64,
    pub max_sup_distance: u64,
    /// Replicas stopped by leaving the cone region before the horizon.
    pub early_exits: u64,
    pub gronwall_constant: f64,
    pub sup_distances: Vec<u64>,
}

/// Mean coupling distance over `replicas` streams of `seed`, started on the
/// diagonal at norm `n`.
pub fn coupling_experiment(n: u64, horizon: f64, replicas: u64, seed: u64, params: &PartitionParams) -> Result<CouplingReport> {
    let x0 = diagonal_start(n);
    let runs = par_replicas(seed, replicas, |s| coupled_run(x0, horizon, n, params, s.rng(), false));
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let sups: Vec<u64> = runs.iter().map(|r| r.sup_distance).collect();
    let values: Vec<f64> = sups.iter().map(|&s| s as f64).collect();
    Ok(CouplingReport {
        n,
        horizon,
        replicas,
        mean_sup_distance: stats::mean(&values),
        std_err: stats::std_err(&values),
        max_sup_distance: sups.iter().copied().max().unwrap_or(0),
        early_exits: runs.iter().filter(|r| r.stop != StopReason::TimeBudget).count() as u64,
        gronwall_constant: gronwall_constant(params.p(), horizon),
        sup_distances: sups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_stays_zero_before_any_solo_event() {
        let x0 = diagonal_start(1000);
        let run = coupled_yz_run(x0, 1e-9, 1000, RngStream::new(1, 0)).unwrap();
        assert_eq!(run.sup_distance, 0);
        assert_eq!(run.stop, StopReason::TimeBudget);
    }

    #[test]
    fn marginals_are_valid_trajectories() {
        let run = coupled_yz_run(diagonal_start(400), 0.3, 400, RngStream::new(2, 0)).unwrap();
        run.y.check_consistency().unwrap();
        run.z.check_consistency().unwrap();
        let d = l1_distance(run.y.final_state(), run.z.final_state());
        assert!(d <= run.sup_distance);
        // the pair shares every reaction-1/2 event it can
        assert!(run.y.events.len() > 0);
    }

    #[test]
    fn bad_starts_are_rejected() {
        assert!(coupled_yz_run(LatticeState::new(2, 2), 1.0, 4, RngStream::new(1, 0)).is_err());
        assert!(coupled_yz_run(LatticeState::new(500, 500), 1.0, 999, RngStream::new(1, 0)).is_err());
        assert!(coupled_yz_run(LatticeState::new(900, 100), 1.0, 1000, RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn tcn_rule() {
        let p = PartitionParams::default();
        let a = LatticeState::new(300, 300);
        assert!(!tcn_reached(a, a, 1000, &p));
        assert!(tcn_reached(a, LatticeState::new(240, 240), 1000, &p));
        assert!(tcn_reached(a, LatticeState::new(600, 5), 1000, &p));
    }
}
