//! The five-reaction network on two species, its mass-action propensities and
//! the exact action of the infinitesimal generator.
//!
//! Reactions are always listed in the same order:
//!
//! | index | reaction              | jump      |
//! |-------|-----------------------|-----------|
//! | 0     | 3S1 + 2S2 -> 5S1 + S2 | (+2, -1)  |
//! | 1     | 2S1 + 3S2 -> S1 + 5S2 | (-1, +2)  |
//! | 2     | 4S1 -> 0              | (-4, 0)   |
//! | 3     | 4S2 -> 0              | (0, -4)   |
//! | 4     | 0 -> S1 + S2          | (+1, +1)  |
//!
//! Three chains share these jumps. `X` is the original network. `Y` keeps
//! only reactions 0 and 1 with linear rates `x1 - 2` and `x2 - 2` (clamped at
//! zero). `Z` is `X` with every rate divided by `x1^(2) x2^(2)`, which is only
//! defined once both coordinates exceed 2.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the nonnegative integer lattice: molecule counts of S1 and S2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct LatticeState {
    pub x1: u64,
    pub x2: u64,
}

impl LatticeState {
    pub const fn new(x1: u64, x2: u64) -> Self {
        Self { x1, x2 }
    }

    /// `x1 + x2`.
    pub const fn norm1(self) -> u64 {
        self.x1 + self.x2
    }

    /// Species swap `(x1, x2) -> (x2, x1)`.
    pub const fn swap(self) -> Self {
        Self { x1: self.x2, x2: self.x1 }
    }

    /// `self + jump`, or `None` if a coordinate would become negative.
    pub fn shifted(self, jump: [i64; 2]) -> Option<Self> {
        let x1 = self.x1.checked_add_signed(jump[0])?;
        let x2 = self.x2.checked_add_signed(jump[1])?;
        Some(Self { x1, x2 })
    }

    pub fn as_f64(self) -> (f64, f64) {
        (self.x1 as f64, self.x2 as f64)
    }
}

impl fmt::Display for LatticeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x1, self.x2)
    }
}

impl From<(u64, u64)> for LatticeState {
    fn from((x1, x2): (u64, u64)) -> Self {
        Self { x1, x2 }
    }
}

/// One reaction channel: its state increment and a human-readable label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reaction {
    pub jump: [i64; 2],
    pub label: &'static str,
}

pub const REACTIONS: [Reaction; 5] = [
    Reaction { jump: [2, -1], label: "3S1+2S2->5S1+S2" },
    Reaction { jump: [-1, 2], label: "2S1+3S2->S1+5S2" },
    Reaction { jump: [-4, 0], label: "4S1->0" },
    Reaction { jump: [0, -4], label: "4S2->0" },
    Reaction { jump: [1, 1], label: "0->S1+S2" },
];

/// Which of the three related chains is being evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChainKind {
    X,
    Y,
    Z,
}

impl ChainKind {
    pub const fn reaction_count(self) -> usize {
        match self {
            ChainKind::Y => 2,
            ChainKind::X | ChainKind::Z => 5,
        }
    }

    pub fn reactions(self) -> &'static [Reaction] {
        &REACTIONS[..self.reaction_count()]
    }
}

impl fmt::Display for ChainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ChainKind::X => "X",
            ChainKind::Y => "Y",
            ChainKind::Z => "Z",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ChainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X" | "x" => Ok(ChainKind::X),
            "Y" | "y" => Ok(ChainKind::Y),
            "Z" | "z" => Ok(ChainKind::Z),
            other => Err(Error::InvalidParams(format!("unknown chain '{other}' (expected X, Y or Z)"))),
        }
    }
}

/// Exact falling factorial `y (y-1) ... (y-p+1)`, zero when `y < p`.
pub fn falling_factorial(y: u64, p: u32) -> Result<u128> {
    if y < u64::from(p) {
        return Ok(0);
    }
    let mut acc: u128 = 1;
    for k in 0..u64::from(p) {
        acc = acc
            .checked_mul(u128::from(y - k))
            .ok_or(Error::Overflow { y, p })?;
    }
    Ok(acc)
}

/// Floating-point falling factorial, same convention as [`falling_factorial`].
#[inline]
pub fn falling_factorial_f64(y: u64, p: u32) -> f64 {
    if y < u64::from(p) {
        return 0.0;
    }
    let y = y as f64;
    let mut acc = 1.0;
    for k in 0..p {
        acc *= y - f64::from(k);
    }
    acc
}

/// Propensity vector of a chain at one state; its length is the chain's
/// reaction count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    values: [f64; 5],
    len: usize,
}

impl Rates {
    pub fn total(&self) -> f64 {
        self.iter().sum()
    }
}

impl Deref for Rates {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values[..self.len]
    }
}

/// A chain together with per-reaction rate constants (all 1 by default).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionSystem {
    pub chain: ChainKind,
    pub rate_constants: [f64; 5],
}

impl ReactionSystem {
    pub const fn new(chain: ChainKind) -> Self {
        Self { chain, rate_constants: [1.0; 5] }
    }

    pub fn with_rate_constants(mut self, constants: [f64; 5]) -> Result<Self> {
        if let Some(k) = constants.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
            return Err(Error::InvalidParams(format!(
                "rate constants must be finite and positive, got {k}"
            )));
        }
        self.rate_constants = constants;
        Ok(self)
    }

    pub fn reactions(&self) -> &'static [Reaction] {
        self.chain.reactions()
    }

    pub fn propensities(&self, x: LatticeState) -> Result<Rates> {
        let mut values = [0.0; 5];
        let len = self.chain.reaction_count();
        match self.chain {
            ChainKind::X => {
                let (a2, a3, a4) = (
                    falling_factorial_f64(x.x1, 2),
                    falling_factorial_f64(x.x1, 3),
                    falling_factorial_f64(x.x1, 4),
                );
                let (b2, b3, b4) = (
                    falling_factorial_f64(x.x2, 2),
                    falling_factorial_f64(x.x2, 3),
                    falling_factorial_f64(x.x2, 4),
                );
                values[0] = a3 * b2;
                values[1] = a2 * b3;
                values[2] = a4;
                values[3] = b4;
                values[4] = 1.0;
            }
            ChainKind::Y => {
                // Off the axes only, so the chain never leaves the quadrant.
                if x.x2 > 0 {
                    values[0] = x.x1.saturating_sub(2) as f64;
                }
                if x.x1 > 0 {
                    values[1] = x.x2.saturating_sub(2) as f64;
                }
            }
            ChainKind::Z => {
                if x.x1 <= 2 || x.x2 <= 2 {
                    return Err(Error::UndefinedSmallState { x1: x.x1, x2: x.x2 });
                }
                let (z1, z2) = x.as_f64();
                let d1 = z1 * (z1 - 1.0);
                let d2 = z2 * (z2 - 1.0);
                values[0] = z1 - 2.0;
                values[1] = z2 - 2.0;
                // z^(4) / z^(2) = (z-2)(z-3)
                values[2] = (z1 - 2.0) * (z1 - 3.0) / d2;
                values[3] = (z2 - 2.0) * (z2 - 3.0) / d1;
                values[4] = 1.0 / (d1 * d2);
            }
        }
        for (v, k) in values[..len].iter_mut().zip(self.rate_constants) {
            *v *= k;
        }
        Ok(Rates { values, len })
    }

    /// Row of the Q-matrix: `(target, rate)` for every strictly positive rate,
    /// in reaction order.
    pub fn jump_targets(&self, x: LatticeState) -> Result<Vec<(LatticeState, f64)>> {
        let rates = self.propensities(x)?;
        Ok(rates
            .iter()
            .zip(self.reactions())
            .filter(|(rate, _)| **rate > 0.0)
            .map(|(rate, reaction)| {
                let target = x
                    .shifted(reaction.jump)
                    .expect("positive rate always leads to a lattice state");
                (target, *rate)
            })
            .collect())
    }

    /// `sum_k rate_k(x) (V(x + jump_k) - V(x))`, summed in reaction order.
    pub fn apply_generator<F>(&self, v: F, x: LatticeState) -> Result<f64>
    where
        F: Fn(LatticeState) -> f64,
    {
        let rates = self.propensities(x)?;
        let here = v(x);
        let mut acc = 0.0;
        for (rate, reaction) in rates.iter().zip(self.reactions()) {
            if *rate > 0.0 {
                let target = x
                    .shifted(reaction.jump)
                    .expect("positive rate always leads to a lattice state");
                acc += rate * (v(target) - here);
            }
        }
        Ok(acc)
    }
}

pub fn propensities(chain: ChainKind, x: LatticeState) -> Result<Rates> {
    ReactionSystem::new(chain).propensities(x)
}

pub fn jump_targets(chain: ChainKind, x: LatticeState) -> Result<Vec<(LatticeState, f64)>> {
    ReactionSystem::new(chain).jump_targets(x)
}

pub fn apply_generator<F>(chain: ChainKind, v: F, x: LatticeState) -> Result<f64>
where
    F: Fn(LatticeState) -> f64,
{
    ReactionSystem::new(chain).apply_generator(v, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(x1: u64, x2: u64) -> LatticeState {
        LatticeState::new(x1, x2)
    }

    #[test]
    fn falling_factorial_examples() {
        assert_eq!(falling_factorial(5, 3).unwrap(), 60);
        assert_eq!(falling_factorial(2, 4).unwrap(), 0);
        assert_eq!(falling_factorial(4, 4).unwrap(), 24);
        assert_eq!(falling_factorial(7, 0).unwrap(), 1);
    }

    #[test]
    fn falling_factorial_is_exact_at_the_top_of_its_range() {
        let y: u64 = 1 << 16;
        let expected: u128 = (0..5).map(|k| u128::from(y - k)).product();
        assert_eq!(falling_factorial(y, 5).unwrap(), expected);
    }

    #[test]
    fn falling_factorial_reports_overflow() {
        assert_eq!(
            falling_factorial(u64::MAX, 5),
            Err(Error::Overflow { y: u64::MAX, p: 5 })
        );
    }

    #[test]
    fn x_propensities() {
        assert_eq!(&*propensities(ChainKind::X, st(3, 2)).unwrap(), &[12.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(&*propensities(ChainKind::X, st(0, 0)).unwrap(), &[0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn y_propensities_clamp_at_zero() {
        assert_eq!(&*propensities(ChainKind::Y, st(1, 5)).unwrap(), &[0.0, 3.0]);
    }

    #[test]
    fn z_propensities_are_x_rates_rescaled() {
        let x = st(7, 9);
        let px = propensities(ChainKind::X, x).unwrap();
        let pz = propensities(ChainKind::Z, x).unwrap();
        let scale = falling_factorial_f64(7, 2) * falling_factorial_f64(9, 2);
        for (a, b) in px.iter().zip(pz.iter()) {
            assert!((a / scale - b).abs() <= 1e-15 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn z_rejects_small_states() {
        assert_eq!(
            propensities(ChainKind::Z, st(2, 9)).unwrap_err(),
            Error::UndefinedSmallState { x1: 2, x2: 9 }
        );
        assert!(propensities(ChainKind::Z, st(3, 3)).is_ok());
    }

    #[test]
    fn jump_target_examples() {
        assert_eq!(jump_targets(ChainKind::X, st(0, 0)).unwrap(), vec![(st(1, 1), 1.0)]);
        assert_eq!(
            jump_targets(ChainKind::X, st(4, 0)).unwrap(),
            vec![(st(0, 0), 24.0), (st(5, 1), 1.0)]
        );
        assert_eq!(
            jump_targets(ChainKind::Y, st(3, 3)).unwrap(),
            vec![(st(5, 2), 1.0), (st(2, 5), 1.0)]
        );
    }

    #[test]
    fn generator_examples() {
        let norm = |x: LatticeState| x.norm1() as f64;
        assert_eq!(apply_generator(ChainKind::X, |_| 3.5, st(6, 9)).unwrap(), 0.0);
        assert_eq!(apply_generator(ChainKind::X, norm, st(0, 0)).unwrap(), 2.0);
        // at (4,4): q1 = 24*12, q2 = 12*24, q3 = q4 = 24, q5 = 1
        let (q1, q2, q3, q4, q5) = (288.0, 288.0, 24.0, 24.0, 1.0);
        let expected = q1 + q2 - 4.0 * q3 - 4.0 * q4 + 2.0 * q5;
        assert_eq!(apply_generator(ChainKind::X, norm, st(4, 4)).unwrap(), expected);
    }

    #[test]
    fn rate_constants_scale_each_channel() {
        let sys = ReactionSystem::new(ChainKind::X)
            .with_rate_constants([2.0, 1.0, 1.0, 1.0, 0.5])
            .unwrap();
        assert_eq!(&*sys.propensities(st(3, 2)).unwrap(), &[24.0, 0.0, 0.0, 0.0, 0.5]);
        assert!(ReactionSystem::new(ChainKind::X)
            .with_rate_constants([1.0, 0.0, 1.0, 1.0, 1.0])
            .is_err());
    }

    #[test]
    fn swap_and_shift() {
        assert_eq!(st(3, 8).swap(), st(8, 3));
        assert_eq!(st(3, 8).shifted([-4, 0]), None);
        assert_eq!(st(3, 8).shifted([2, -1]), Some(st(5, 7)));
    }
}
