use serde::Serialize;

use super::trajectory::Trajectory;
use crate::error::{Error, Result};

/// A stretch of time the norm spent above `lo` after crossing above `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Excursion {
    pub start: f64,
    pub end: f64,
    pub peak: u64,
    pub duration: f64,
    /// Still open when the trajectory ended.
    pub truncated: bool,
}

/// Incremental hysteresis scanner: an excursion opens when the norm exceeds
/// `hi` and closes when it next drops below `lo`.
#[derive(Debug, Clone)]
pub struct ExcursionScanner {
    lo: f64,
    hi: f64,
    open: Option<(f64, u64)>,
}

impl ExcursionScanner {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidParams(format!("excursion thresholds need lo < hi, got {lo} and {hi}")));
        }
        Ok(Self { lo, hi, open: None })
    }

    pub fn is_open(&self) -> bool {
        self.open.is_some()
    }

    /// Feeds the norm reached at time `t`; returns an excursion when one closes.
    pub fn observe(&mut self, t: f64, norm: u64) -> Option<Excursion> {
        let x = norm as f64;
        match &mut self.open {
            None => {
                if x > self.hi {
                    self.open = Some((t, norm));
                }
                None
            }
            Some((start, peak)) => {
                *peak = (*peak).max(norm);
                if x < self.lo {
                    let (start, peak) = (*start, *peak);
                    self.open = None;
                    Some(Excursion { start, end: t, peak, duration: t - start, truncated: false })
                } else {
                    None
                }
            }
        }
    }

    /// Closes a pending excursion at `t_end`, flagged as truncated.
    pub fn finish(self, t_end: f64) -> Option<Excursion> {
        self.open.map(|(start, peak)| Excursion { start, end: t_end, peak, duration: t_end - start, truncated: true })
    }
}

pub fn excursion_scan(traj: &Trajectory, lo: f64, hi: f64) -> Result<Vec<Excursion>> {
    let mut scanner = ExcursionScanner::new(lo, hi)?;
    let mut out: Vec<Excursion> = traj.segments().filter_map(|(t, x)| scanner.observe(t, x.norm1())).collect();
    out.extend(scanner.finish(traj.final_time));
    Ok(out)
}

/// Gaps between successive excursion starts.
pub fn interarrival_times(excursions: &[Excursion]) -> Vec<f64> {
    excursions.windows(2).map(|w| w[1].start - w[0].start).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{ChainKind, LatticeState};
    use crate::simulate::trajectory::{Event, StopReason};

    fn path(norms: &[u64]) -> Trajectory {
        let mut t = Trajectory::new(ChainKind::X, LatticeState::new(norms[0], 0));
        for (i, &n) in norms.iter().enumerate().skip(1) {
            t.events.push(Event { t: i as f64, state: LatticeState::new(n, 0), reaction: 4 });
        }
        t.final_time = norms.len() as f64;
        t.stop = StopReason::TimeBudget;
        t
    }

    #[test]
    fn quiet_path_has_no_excursions() {
        assert!(excursion_scan(&path(&[0, 10, 150, 199, 40]), 50.0, 200.0).unwrap().is_empty());
    }

    #[test]
    fn ramp_gives_one_excursion() {
        let norms: Vec<u64> = (0..=40).chain((0..40).rev()).map(|k| k * 10).collect();
        let ex = excursion_scan(&path(&norms), 50.0, 200.0).unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].peak, 400);
        assert_eq!(ex[0].start, 21.0);
        assert_eq!(ex[0].end, 76.0);
        assert!(!ex[0].truncated);
    }

    #[test]
    fn hysteresis_and_truncation() {
        // dips to 100 do not close; the second excursion is open at the end
        let ex = excursion_scan(&path(&[0, 250, 100, 260, 20, 300, 260]), 50.0, 200.0).unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].peak, 260);
        assert_eq!((ex[0].start, ex[0].end), (1.0, 4.0));
        assert!(ex[1].truncated);
        assert_eq!(ex[1].end, 7.0);
        assert_eq!(interarrival_times(&ex), vec![4.0]);
    }

    #[test]
    fn thresholds_must_be_ordered() {
        assert!(ExcursionScanner::new(200.0, 50.0).is_err());
    }
}
