use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::network::{ChainKind, LatticeState};

/// One jump of a chain: the time it happened, the state it led to, and the
/// index of the reaction that fired.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub state: LatticeState,
    pub reaction: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "snake_case")]
pub enum StopReason {
    TimeBudget,
    EventBudget,
    /// A stopping condition was met; carries its name.
    Condition(String),
    /// No reaction can fire and no time budget was given.
    Absorbed,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::TimeBudget => f.write_str("time budget"),
            StopReason::EventBudget => f.write_str("event budget"),
            StopReason::Condition(name) => write!(f, "condition {name}"),
            StopReason::Absorbed => f.write_str("absorbed"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub chain: ChainKind,
    pub initial: LatticeState,
    pub events: Vec<Event>,
    pub stop: StopReason,
    pub final_time: f64,
}

impl Trajectory {
    pub fn new(chain: ChainKind, initial: LatticeState) -> Self {
        Self { chain, initial, events: Vec::new(), stop: StopReason::Absorbed, final_time: 0.0 }
    }

    pub fn final_state(&self) -> LatticeState {
        self.events.last().map_or(self.initial, |e| e.state)
    }

    pub fn first_jump(&self) -> Option<&Event> {
        self.events.first()
    }

    /// State at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> LatticeState {
        let idx = self.events.partition_point(|e| e.t <= t);
        if idx == 0 {
            self.initial
        } else {
            self.events[idx - 1].state
        }
    }

    /// `(start, state)` pairs for every holding interval, initial one included.
    pub fn segments(&self) -> impl Iterator<Item = (f64, LatticeState)> + '_ {
        std::iter::once((0.0, self.initial)).chain(self.events.iter().map(|e| (e.t, e.state)))
    }

    /// Writes `t,x1,x2,reaction` rows; the initial state is a row with
    /// reaction `-1`. Lines in `preamble` are written first as `# ` comments.
    pub fn write_csv<W: Write>(&self, mut w: W, preamble: &[String]) -> std::io::Result<()> {
        for line in preamble {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "t,x1,x2,reaction")?;
        writeln!(w, "0,{},{},-1", self.initial.x1, self.initial.x2)?;
        for e in &self.events {
            writeln!(w, "{},{},{},{}", e.t, e.state.x1, e.state.x2, e.reaction)?;
        }
        Ok(())
    }

    /// Checks the structural invariants: nondecreasing times bounded by the
    /// final time, and consecutive states differing by the fired jump.
    pub fn check_consistency(&self) -> Result<(), String> {
        let reactions = self.chain.reactions();
        let mut prev_t = 0.0;
        let mut prev = self.initial;
        for (i, e) in self.events.iter().enumerate() {
            if e.t < prev_t {
                return Err(format!("event {i}: time {} before {}", e.t, prev_t));
            }
            let reaction = reactions.get(e.reaction).ok_or(format!("event {i}: bad reaction {}", e.reaction))?;
            if prev.shifted(reaction.jump) != Some(e.state) {
                return Err(format!("event {i}: {} -> {} is not reaction {}", prev, e.state, e.reaction));
            }
            prev_t = e.t;
            prev = e.state;
        }
        if self.final_time < prev_t {
            return Err(format!("final time {} before last event {}", self.final_time, prev_t));
        }
        Ok(())
    }
}

/// Sidecar metadata written next to a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub chain: ChainKind,
    pub seed: u64,
    pub stream: u64,
    pub initial: LatticeState,
    pub stop: StopReason,
    pub final_time: f64,
    pub events: usize,
}

impl TrajectoryMeta {
    pub fn of(traj: &Trajectory, seed: u64, stream: u64) -> Self {
        Self {
            chain: traj.chain,
            seed,
            stream,
            initial: traj.initial,
            stop: traj.stop.clone(),
            final_time: traj.final_time,
            events: traj.events.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        let mut t = Trajectory::new(ChainKind::X, LatticeState::new(0, 0));
        t.events.push(Event { t: 0.5, state: LatticeState::new(1, 1), reaction: 4 });
        t.events.push(Event { t: 1.25, state: LatticeState::new(2, 2), reaction: 4 });
        t.final_time = 2.0;
        t.stop = StopReason::TimeBudget;
        t
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf, &["config_sha256=abc".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# config_sha256=abc\nt,x1,x2,reaction\n0,0,0,-1\n0.5,1,1,4\n1.25,2,2,4\n");
    }

    #[test]
    fn state_lookup_and_consistency() {
        let t = sample();
        assert_eq!(t.state_at(0.1), LatticeState::new(0, 0));
        assert_eq!(t.state_at(0.5), LatticeState::new(1, 1));
        assert_eq!(t.state_at(9.0), LatticeState::new(2, 2));
        assert!(t.check_consistency().is_ok());
        let mut bad = t.clone();
        bad.events[1].reaction = 0;
        assert!(bad.check_consistency().is_err());
    }

    #[test]
    fn stop_reason_json() {
        let s = serde_json::to_string(&StopReason::Condition("norm_below(20)".into())).unwrap();
        assert_eq!(s, r#"{"kind":"condition","name":"norm_below(20)"}"#);
        let s = serde_json::to_string(&StopReason::TimeBudget).unwrap();
        assert_eq!(s, r#"{"kind":"time_budget"}"#);
    }
}
