//! Random time change linking the Z chain to the original chain.
//!
//! With `w(z) = z1^(2) z2^(2)`, the clock `Theta(s) = int_0^s du / w(Z(u))`
//! maps Z time to X time, and `X(t) = Z(lambda_t)` with `lambda = Theta^{-1}`.

use serde::Serialize;

use super::trajectory::{Event, Trajectory};
use crate::error::{Error, Result};
use crate::network::{falling_factorial_f64, ChainKind, LatticeState};
use crate::numeric::NeumaierSum;

/// Speed factor `z1^(2) z2^(2)` between the two time scales.
pub fn speed(z: LatticeState) -> f64 {
    falling_factorial_f64(z.x1, 2) * falling_factorial_f64(z.x2, 2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeChangeMap {
    /// Z-time breakpoints, starting with 0 and ending with the horizon.
    breaks: Vec<f64>,
    /// Clock value at each breakpoint.
    clock: Vec<f64>,
    /// Speed on `[breaks[k], breaks[k+1])`.
    speeds: Vec<f64>,
}

impl TimeChangeMap {
    pub fn new(traj: &Trajectory) -> Result<Self> {
        let mut breaks = vec![0.0];
        let mut clock = vec![0.0];
        let mut speeds = Vec::with_capacity(traj.events.len() + 1);
        let mut acc = NeumaierSum::new();
        let mut segments = traj.segments().peekable();
        while let Some((start, state)) = segments.next() {
            if state.x1 < 3 || state.x2 < 3 {
                return Err(Error::UndefinedSmallState { x1: state.x1, x2: state.x2 });
            }
            let end = segments.peek().map_or(traj.final_time, |s| s.0);
            let w = speed(state);
            acc.add((end - start) / w);
            speeds.push(w);
            breaks.push(end);
            clock.push(acc.value());
        }
        Ok(Self { breaks, clock, speeds })
    }

    pub fn horizon(&self) -> f64 {
        *self.breaks.last().expect("at least one breakpoint")
    }

    pub fn clock_horizon(&self) -> f64 {
        *self.clock.last().expect("at least one breakpoint")
    }

    /// `Theta(s)` for Z time `s`.
    pub fn clock(&self, s: f64) -> Result<f64> {
        if !(0.0..=self.horizon()).contains(&s) {
            return Err(Error::PastHorizon { t: s, horizon: self.horizon() });
        }
        let k = self.breaks.partition_point(|&b| b <= s).saturating_sub(1).min(self.speeds.len() - 1);
        Ok(self.clock[k] + (s - self.breaks[k]) / self.speeds[k])
    }

    /// `lambda_t = Theta^{-1}(t)` for X time `t`.
    pub fn lambda(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.clock_horizon()).contains(&t) {
            return Err(Error::PastHorizon { t, horizon: self.clock_horizon() });
        }
        let k = self.clock.partition_point(|&c| c <= t).saturating_sub(1).min(self.speeds.len() - 1);
        Ok((self.breaks[k] + (t - self.clock[k]) * self.speeds[k]).min(self.horizon()))
    }

    /// The same path on the X time scale.
    pub fn to_x_trajectory(&self, traj: &Trajectory) -> Trajectory {
        let events = traj
            .events
            .iter()
            .zip(&self.clock[1..])
            .map(|(e, &t)| Event { t, state: e.state, reaction: e.reaction })
            .collect();
        Trajectory {
            chain: ChainKind::X,
            initial: traj.initial,
            events,
            stop: traj.stop.clone(),
            final_time: self.clock_horizon(),
        }
    }
}

pub fn time_change_map(traj: &Trajectory) -> Result<TimeChangeMap> {
    TimeChangeMap::new(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::trajectory::StopReason;

    fn constant(z: LatticeState, horizon: f64) -> Trajectory {
        Trajectory { chain: ChainKind::Z, initial: z, events: vec![], stop: StopReason::TimeBudget, final_time: horizon }
    }

    #[test]
    fn constant_path_has_linear_clock() {
        let z = LatticeState::new(10, 7);
        let w = 90.0 * 42.0;
        let m = time_change_map(&constant(z, 2.0)).unwrap();
        let t = 1.0 / w;
        assert!((m.lambda(t).unwrap() - t * w).abs() < 1e-12);
        assert!((m.clock(1.5).unwrap() - 1.5 / w).abs() < 1e-15);
    }

    #[test]
    fn speed_near_half_scale() {
        let n = 1000u64;
        let z = LatticeState::new(n / 2, n / 2);
        let m = time_change_map(&constant(z, 1.0)).unwrap();
        let slope = m.lambda(m.clock_horizon() / 2.0).unwrap() / (m.clock_horizon() / 2.0);
        let bound = 16.0 / ((n - 2) as f64).powi(4);
        assert!((slope - ((n / 2) as f64).powi(4)).abs() / slope < 0.01);
        assert!(1.0 / slope <= bound);
    }

    #[test]
    fn past_horizon_is_an_error() {
        let m = time_change_map(&constant(LatticeState::new(5, 5), 1.0)).unwrap();
        assert!(matches!(m.clock(1.5), Err(Error::PastHorizon { .. })));
        assert!(matches!(m.lambda(1.0), Err(Error::PastHorizon { .. })));
    }

    #[test]
    fn small_states_are_rejected() {
        assert!(time_change_map(&constant(LatticeState::new(2, 5), 1.0)).is_err());
    }
}
