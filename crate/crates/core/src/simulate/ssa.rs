use std::fmt;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use super::trajectory::{Event, StopReason, Trajectory};
use crate::error::{Error, Result};
use crate::network::{ChainKind, LatticeState, ReactionSystem};
use crate::numeric::NeumaierSum;
use crate::partition::{classify, PartitionParams, SqrtBand};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoppingCondition {
    /// `|x1 - x2| >= eta sqrt(x1 + x2)`.
    ExitInteriorCone { eta: f64 },
    /// The state is no longer in the cone.
    ExitCone,
    /// `|x|_1 >= m`.
    NormAbove { m: u64 },
    /// `|x|_1 <= m`.
    NormBelow { m: u64 },
    /// Time budget.
    Time { t: f64 },
    /// Event budget.
    Events { k: u64 },
    /// Leaves the cone or `|x|_1 < n/2`.
    Tcn { n: u64 },
}

impl fmt::Display for StoppingCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoppingCondition::ExitInteriorCone { eta } => write!(f, "exit_interior_cone({eta})"),
            StoppingCondition::ExitCone => f.write_str("exit_cone"),
            StoppingCondition::NormAbove { m } => write!(f, "norm_above({m})"),
            StoppingCondition::NormBelow { m } => write!(f, "norm_below({m})"),
            StoppingCondition::Time { t } => write!(f, "time({t})"),
            StoppingCondition::Events { k } => write!(f, "events({k})"),
            StoppingCondition::Tcn { n } => write!(f, "tcn({n})"),
        }
    }
}

impl StoppingCondition {
    /// Whether a state-based condition holds at `x`; budgets never do.
    pub fn holds(&self, x: LatticeState, params: &PartitionParams) -> bool {
        match *self {
            StoppingCondition::ExitInteriorCone { eta } => {
                let a = crate::partition::to_axial(x);
                SqrtBand::new(eta).reached(a.r, a.d)
            }
            StoppingCondition::ExitCone => !classify(x, params).is_cone(),
            StoppingCondition::NormAbove { m } => x.norm1() >= m,
            StoppingCondition::NormBelow { m } => x.norm1() <= m,
            StoppingCondition::Tcn { n } => !classify(x, params).is_cone() || 2 * x.norm1() < n,
            StoppingCondition::Time { .. } | StoppingCondition::Events { .. } => false,
        }
    }
}

/// A set of stopping conditions bound to the partition parameters they
/// refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct Stops {
    pub conditions: Vec<StoppingCondition>,
    pub params: PartitionParams,
    time: Option<f64>,
    events: Option<u64>,
}

impl Stops {
    pub fn new(conditions: &[StoppingCondition], params: PartitionParams) -> Result<Self> {
        let mut time: Option<f64> = None;
        let mut events: Option<u64> = None;
        for c in conditions {
            match *c {
                StoppingCondition::Time { t } => {
                    if !(t >= 0.0) {
                        return Err(Error::InvalidParams(format!("time budget must be >= 0, got {t}")));
                    }
                    time = Some(time.map_or(t, |old| old.min(t)));
                }
                StoppingCondition::Events { k } => events = Some(events.map_or(k, |old| old.min(k))),
                StoppingCondition::ExitInteriorCone { eta } if !(eta > 0.0) => {
                    return Err(Error::InvalidParams(format!("cone band must be positive, got {eta}")));
                }
                _ => {}
            }
        }
        Ok(Self { conditions: conditions.to_vec(), params, time, events })
    }

    pub fn time_budget(&self) -> Option<f64> {
        self.time
    }

    pub fn event_budget(&self) -> Option<u64> {
        self.events
    }

    /// First state-based condition satisfied at `x`.
    pub fn triggered(&self, x: LatticeState) -> Option<&StoppingCondition> {
        self.conditions.iter().find(|c| c.holds(x, &self.params))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Jump(Event),
    /// The next event would fall after the horizon; the clock sits at it.
    Horizon,
    /// Every rate is zero.
    Absorbed,
}

/// Exact direct-method simulator advancing one event at a time.
#[derive(Debug, Clone)]
pub struct Simulator<R> {
    system: ReactionSystem,
    state: LatticeState,
    clock: NeumaierSum,
    events: u64,
    last_holding: f64,
    rng: R,
}

impl<R: Rng> Simulator<R> {
    pub fn new(system: ReactionSystem, x0: LatticeState, rng: R) -> Result<Self> {
        system.propensities(x0)?;
        Ok(Self { system, state: x0, clock: NeumaierSum::new(), events: 0, last_holding: 0.0, rng })
    }

    pub fn state(&self) -> LatticeState {
        self.state
    }

    pub fn time(&self) -> f64 {
        self.clock.value()
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Holding time that preceded the most recent jump.
    pub fn last_holding_time(&self) -> f64 {
        self.last_holding
    }

    pub fn system(&self) -> &ReactionSystem {
        &self.system
    }

    /// Draws the next event. With a horizon, an event that would land past
    /// it is discarded and the clock is set to the horizon instead (exact by
    /// memorylessness).
    pub fn step(&mut self, horizon: Option<f64>) -> Result<Step> {
        let rates = self.system.propensities(self.state)?;
        let total = rates.total();
        if total <= 0.0 {
            if let Some(h) = horizon {
                self.advance_to(h);
                return Ok(Step::Horizon);
            }
            return Ok(Step::Absorbed);
        }
        let e: f64 = self.rng.sample(Exp1);
        let dt = e / total;
        if let Some(h) = horizon {
            if self.clock.value() + dt > h {
                self.advance_to(h);
                return Ok(Step::Horizon);
            }
        }
        let reaction = pick(&rates, total, self.rng.random::<f64>());
        let jump = self.system.reactions()[reaction].jump;
        self.state = self.state.shifted(jump).expect("positive rate always leads to a lattice state");
        self.clock.add(dt);
        self.last_holding = dt;
        self.events += 1;
        Ok(Step::Jump(Event { t: self.clock.value(), state: self.state, reaction }))
    }

    fn advance_to(&mut self, h: f64) {
        let now = self.clock.value();
        if h > now {
            self.clock.add(h - now);
        }
    }
}

/// Index `k` with `sum_{j<k} w_j <= u W < sum_{j<=k} w_j`, skipping zero weights.
pub(crate) fn pick(weights: &[f64], total: f64, u: f64) -> usize {
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = k;
            if target < acc {
                return k;
            }
        }
    }
    last
}

/// Simulates one trajectory until the first satisfied stop.
pub fn run<R: Rng>(system: ReactionSystem, x0: LatticeState, stops: &Stops, rng: R) -> Result<Trajectory> {
    let mut sim = Simulator::new(system, x0, rng)?;
    let mut traj = Trajectory::new(system.chain, x0);
    let finish = |traj: &mut Trajectory, stop: StopReason, t: f64| {
        traj.stop = stop;
        traj.final_time = t;
    };
    if let Some(c) = stops.triggered(x0) {
        finish(&mut traj, StopReason::Condition(c.to_string()), 0.0);
        return Ok(traj);
    }
    if stops.event_budget() == Some(0) {
        finish(&mut traj, StopReason::EventBudget, 0.0);
        return Ok(traj);
    }
    loop {
        match sim.step(stops.time_budget())? {
            Step::Horizon => {
                finish(&mut traj, StopReason::TimeBudget, sim.time());
                return Ok(traj);
            }
            Step::Absorbed => {
                finish(&mut traj, StopReason::Absorbed, sim.time());
                return Ok(traj);
            }
            Step::Jump(event) => {
                traj.events.push(event);
                if let Some(c) = stops.triggered(event.state) {
                    finish(&mut traj, StopReason::Condition(c.to_string()), event.t);
                    return Ok(traj);
                }
                if stops.event_budget().is_some_and(|k| sim.events() >= k) {
                    finish(&mut traj, StopReason::EventBudget, event.t);
                    return Ok(traj);
                }
            }
        }
    }
}

/// [`run`] with unit rate constants and default partition parameters.
pub fn ssa_run(chain: ChainKind, x0: LatticeState, stops: &[StoppingCondition], stream: RngStream) -> Result<Trajectory> {
    let stops = Stops::new(stops, PartitionParams::default())?;
    run(ReactionSystem::new(chain), x0, &stops, stream.rng())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(x1: u64, x2: u64) -> LatticeState {
        LatticeState::new(x1, x2)
    }

    #[test]
    fn origin_jumps_to_one_one() {
        for seed in 0..20 {
            let t = ssa_run(ChainKind::X, st(0, 0), &[StoppingCondition::Time { t: 10.0 }], RngStream::new(seed, 0)).unwrap();
            let first = t.first_jump().unwrap();
            assert_eq!(first.state, st(1, 1));
            assert_eq!(first.reaction, 4);
        }
    }

    #[test]
    fn z_small_state_is_an_error() {
        let err = ssa_run(ChainKind::Z, st(2, 2), &[StoppingCondition::Time { t: 1.0 }], RngStream::new(1, 0)).unwrap_err();
        assert!(err.to_string().contains("undefined small state"));
    }

    #[test]
    fn deterministic_replay() {
        let stops = [StoppingCondition::Time { t: 5.0 }, StoppingCondition::Events { k: 5000 }];
        let a = ssa_run(ChainKind::X, st(5, 5), &stops, RngStream::new(3, 9)).unwrap();
        let b = ssa_run(ChainKind::X, st(5, 5), &stops, RngStream::new(3, 9)).unwrap();
        assert_eq!(a, b);
        assert!(a.check_consistency().is_ok());
    }

    #[test]
    fn event_budget_and_conditions() {
        let t = ssa_run(ChainKind::X, st(5, 5), &[StoppingCondition::Events { k: 7 }], RngStream::new(1, 0)).unwrap();
        assert_eq!(t.events.len(), 7);
        assert_eq!(t.stop, StopReason::EventBudget);
        assert_eq!(t.final_time, t.events[6].t);

        let t = ssa_run(ChainKind::X, st(5, 5), &[StoppingCondition::NormBelow { m: 20 }], RngStream::new(1, 0)).unwrap();
        assert_eq!(t.stop, StopReason::Condition("norm_below(20)".into()));
        assert_eq!(t.events.len(), 0);
    }

    #[test]
    fn y_leaves_the_interior_cone() {
        let stops = [StoppingCondition::ExitInteriorCone { eta: 2.0 }, StoppingCondition::Events { k: 1_000_000 }];
        let t = ssa_run(ChainKind::Y, st(200, 200), &stops, RngStream::new(5, 0)).unwrap();
        assert_eq!(t.stop, StopReason::Condition("exit_interior_cone(2)".into()));
        let a = crate::partition::to_axial(t.final_state());
        assert!((a.d as f64).powi(2) >= 4.0 * a.r as f64);
    }

    #[test]
    fn y_absorbs_without_time_budget() {
        let t = ssa_run(ChainKind::Y, st(2, 1), &[StoppingCondition::Events { k: 10 }], RngStream::new(5, 0)).unwrap();
        assert_eq!(t.stop, StopReason::Absorbed);
        let t = ssa_run(ChainKind::Y, st(2, 1), &[StoppingCondition::Time { t: 3.0 }], RngStream::new(5, 0)).unwrap();
        assert_eq!(t.stop, StopReason::TimeBudget);
        assert_eq!(t.final_time, 3.0);
    }

    #[test]
    fn pick_skips_zero_weights() {
        let w = [0.0, 2.0, 0.0, 1.0, 0.0];
        assert_eq!(pick(&w, 3.0, 0.0), 1);
        assert_eq!(pick(&w, 3.0, 0.66), 1);
        assert_eq!(pick(&w, 3.0, 0.67), 3);
        assert_eq!(pick(&w, 3.0, 0.999_999_999), 3);
    }
}
