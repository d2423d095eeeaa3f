//! Piecewise energy function, exact generator drift, and exhaustive lattice
//! scans certifying the drift and interface-ordering inequalities.
//!
//! The energy is
//!
//! ```text
//! V_C(x) = (x1 + x2)^3 / max(|x1 - x2|, beta sqrt(x1 + x2))^2   in the cone
//! V_R(x) = c_S (x1 + 6 x2)                                      on the right side
//! V_L(x) = c_S (6 x1 + x2)                                      on the left side
//! ```
//!
//! with `c_S = (1+p)^3 / ((1-p)^2 (1+6p))`, the unique constant making `V_C`
//! and `V_R` agree on the ray `x2 = p x1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::limits;
use crate::network::{ChainKind, LatticeState, ReactionSystem};
use crate::partition::{classify, in_delta, ConeZone, PartitionParams, Region, Strip};

/// Relative slack used when comparing energies that coincide analytically.
pub const ORDERING_RTOL: f64 = 1e-12;

pub fn c_s(p: f64) -> f64 {
    (1.0 + p).powi(3) / ((1.0 - p).powi(2) * (1.0 + 6.0 * p))
}

/// Cone energy in axial form, `r^3 / max(|d|, beta sqrt(r))^2`.
pub fn energy_axial(r: f64, d: f64, beta: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let denom = d.abs().max(beta * r.sqrt());
    r * r * r / (denom * denom)
}

/// `V_C` in Cartesian form.
pub fn energy_cone(x1: f64, x2: f64, beta: f64) -> f64 {
    energy_axial(x1 + x2, x1 - x2, beta)
}

/// The energy function with its constant `c_S` precomputed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyParams {
    pub partition: PartitionParams,
    pub c_s: f64,
}

impl EnergyParams {
    pub fn new(partition: PartitionParams) -> Self {
        Self { partition, c_s: c_s(partition.p()) }
    }

    pub fn cone(&self, x1: f64, x2: f64) -> f64 {
        energy_cone(x1, x2, self.partition.beta)
    }

    pub fn side_right(&self, x1: f64, x2: f64) -> f64 {
        self.c_s * (x1 + 6.0 * x2)
    }

    pub fn side_left(&self, x1: f64, x2: f64) -> f64 {
        self.c_s * (6.0 * x1 + x2)
    }

    /// Energy at a real point; the region is decided by real comparisons.
    pub fn at_real(&self, x1: f64, x2: f64) -> f64 {
        let p = self.partition.p();
        if x1 == 0.0 && x2 == 0.0 {
            0.0
        } else if x2 <= p * x1 {
            self.side_right(x1, x2)
        } else if x1 <= p * x2 {
            self.side_left(x1, x2)
        } else {
            self.cone(x1, x2)
        }
    }

    /// Energy at a lattice point; the region is decided exactly.
    pub fn at(&self, x: LatticeState) -> f64 {
        let (x1, x2) = x.as_f64();
        match classify(x, &self.partition) {
            _ if x.norm1() == 0 => 0.0,
            Region::SideRight => self.side_right(x1, x2),
            Region::SideLeft => self.side_left(x1, x2),
            Region::Cone(_) => self.cone(x1, x2),
        }
    }

    /// Generator of the original chain applied to the energy, at `x`.
    pub fn drift(&self, x: LatticeState) -> f64 {
        ReactionSystem::new(ChainKind::X)
            .apply_generator(|y| self.at(y), x)
            .expect("the X chain is defined everywhere")
    }
}

pub fn energy(x: (f64, f64), params: &PartitionParams) -> f64 {
    EnergyParams::new(*params).at_real(x.0, x.1)
}

pub fn drift(x: LatticeState, params: &PartitionParams) -> f64 {
    EnergyParams::new(*params).drift(x)
}

/// Named scan regions for [`verify_drift`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanRegion {
    All,
    /// Everything except the interior cone: both sides and both outer cone zones.
    OutsideInteriorCone,
    InteriorCone,
    /// Right side, right outer cone, and the right interface strip.
    RightHalf,
    Sides,
}

impl ScanRegion {
    pub fn contains(&self, x: LatticeState, params: &PartitionParams) -> bool {
        let region = classify(x, params);
        match self {
            ScanRegion::All => true,
            ScanRegion::OutsideInteriorCone => region != Region::Cone(ConeZone::Center),
            ScanRegion::InteriorCone => region == Region::Cone(ConeZone::Center),
            ScanRegion::RightHalf => {
                matches!(region, Region::SideRight | Region::Cone(ConeZone::ConeRight))
                    || in_delta(x, params) == Strip::Right
            }
            ScanRegion::Sides => matches!(region, Region::SideRight | Region::SideLeft),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ScanRegion::All => "all",
            ScanRegion::OutsideInteriorCone => "outside_interior_cone",
            ScanRegion::InteriorCone => "interior_cone",
            ScanRegion::RightHalf => "right_half",
            ScanRegion::Sides => "sides",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftViolation {
    pub x1: u64,
    pub x2: u64,
    pub drift: f64,
}

impl DriftViolation {
    pub fn state(&self) -> LatticeState {
        LatticeState::new(self.x1, self.x2)
    }
}

/// Result of an exhaustive drift scan over `r_lo <= x1 + x2 <= r_hi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub region: String,
    pub window: [u64; 2],
    pub gamma: f64,
    pub params: PartitionParams,
    pub points_scanned: u64,
    /// Least radius `r*` with no violation at `|x|_1 >= r*` inside the
    /// window; `None` when the window is empty or violations reach `r_hi`.
    pub certified_min_radius: Option<u64>,
    pub violation_count: u64,
    /// Sorted by radius, then lexicographically.
    pub violations: Vec<DriftViolation>,
}

impl DriftReport {
    pub fn max_violation_radius(&self) -> Option<u64> {
        self.violations.last().map(|v| v.x1 + v.x2)
    }

    /// Keeps only the `n` violations with the largest radii.
    pub fn truncate_violations(&mut self, n: usize) {
        let len = self.violations.len();
        if len > n {
            self.violations.drain(..len - n);
        }
    }
}

fn certified_radius(r_lo: u64, r_hi: u64, last_bad: Option<u64>) -> Option<u64> {
    if r_lo > r_hi {
        return None;
    }
    match last_bad {
        None => Some(r_lo),
        Some(r) if r >= r_hi => None,
        Some(r) => Some(r + 1),
    }
}

fn states_at_radius(r: u64) -> impl Iterator<Item = LatticeState> {
    (0..=r).map(move |x1| LatticeState::new(x1, r - x1))
}

/// Scans every lattice state with `r_lo <= |x|_1 <= r_hi` accepted by
/// `filter` and records where `drift(x) > -gamma`.
pub fn verify_drift<F>(filter: F, label: &str, r_lo: u64, r_hi: u64, gamma: f64, params: &PartitionParams) -> DriftReport
where
    F: Fn(LatticeState) -> bool + Sync,
{
    let energy = EnergyParams::new(*params);
    let per_radius: Vec<(u64, Vec<DriftViolation>)> = if r_lo <= r_hi {
        (r_lo..=r_hi)
            .into_par_iter()
            .map(|r| {
                let mut scanned = 0;
                let mut bad = Vec::new();
                for x in states_at_radius(r).filter(|x| filter(*x)) {
                    scanned += 1;
                    let value = energy.drift(x);
                    if value > -gamma {
                        bad.push(DriftViolation { x1: x.x1, x2: x.x2, drift: value });
                    }
                }
                (scanned, bad)
            })
            .collect()
    } else {
        Vec::new()
    };

    let points_scanned = per_radius.iter().map(|(n, _)| n).sum();
    let violations: Vec<DriftViolation> = per_radius.into_iter().flat_map(|(_, v)| v).collect();
    let last_bad = violations.last().map(|v| v.x1 + v.x2);
    DriftReport {
        region: label.to_string(),
        window: [r_lo, r_hi],
        gamma,
        params: *params,
        points_scanned,
        certified_min_radius: certified_radius(r_lo, r_hi, last_bad),
        violation_count: violations.len() as u64,
        violations,
    }
}

pub fn verify_drift_region(region: ScanRegion, r_lo: u64, r_hi: u64, gamma: f64, params: &PartitionParams) -> DriftReport {
    verify_drift(|x| region.contains(x, params), region.label(), r_lo, r_hi, gamma, params)
}

/// Runs the same scan for several values of `beta`.
pub fn beta_sweep(
    betas: &[f64],
    region: ScanRegion,
    r_lo: u64,
    r_hi: u64,
    gamma: f64,
    params: &PartitionParams,
) -> Vec<DriftReport> {
    betas
        .iter()
        .map(|&b| verify_drift_region(region, r_lo, r_hi, gamma, &params.with_beta(b)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingViolation {
    pub x1: u64,
    pub x2: u64,
    pub strip: Strip,
    pub region: Region,
    pub cone_energy: f64,
    pub side_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub window: [u64; 2],
    pub params: PartitionParams,
    pub points_scanned: u64,
    pub certified_min_radius: Option<u64>,
    pub violation_count: u64,
    pub violations: Vec<OrderingViolation>,
}

/// Checks, on both interface strips, that the cone energy lies below the
/// side energy on the cone side of the interface and above it on the
/// side itself.
pub fn verify_interface_ordering(r_lo: u64, r_hi: u64, params: &PartitionParams) -> OrderingReport {
    let energy = EnergyParams::new(*params);
    let per_radius: Vec<(u64, Vec<OrderingViolation>)> = if r_lo <= r_hi {
        (r_lo..=r_hi)
            .into_par_iter()
            .map(|r| {
                let mut scanned = 0;
                let mut bad = Vec::new();
                for x in states_at_radius(r) {
                    let strip = in_delta(x, params);
                    if strip == Strip::None {
                        continue;
                    }
                    let region = classify(x, params);
                    let (x1, x2) = x.as_f64();
                    let cone_energy = energy.cone(x1, x2);
                    let side_energy = match strip {
                        Strip::Right => energy.side_right(x1, x2),
                        _ => energy.side_left(x1, x2),
                    };
                    let own_side = match strip {
                        Strip::Right => Region::SideRight,
                        _ => Region::SideLeft,
                    };
                    let slack = ORDERING_RTOL * cone_energy.abs().max(side_energy.abs());
                    let ok = if region.is_cone() {
                        cone_energy <= side_energy + slack
                    } else if region == own_side {
                        cone_energy + slack >= side_energy
                    } else {
                        // opposite side: only reachable next to the origin
                        continue;
                    };
                    scanned += 1;
                    if !ok {
                        bad.push(OrderingViolation { x1: x.x1, x2: x.x2, strip, region, cone_energy, side_energy });
                    }
                }
                (scanned, bad)
            })
            .collect()
    } else {
        Vec::new()
    };
    let points_scanned = per_radius.iter().map(|(n, _)| n).sum();
    let violations: Vec<OrderingViolation> = per_radius.into_iter().flat_map(|(_, v)| v).collect();
    let last_bad = violations.last().map(|v| v.x1 + v.x2);
    OrderingReport {
        window: [r_lo, r_hi],
        params: *params,
        points_scanned,
        certified_min_radius: certified_radius(r_lo, r_hi, last_bad),
        violation_count: violations.len() as u64,
        violations,
    }
}

/// Relative gap `|V_C - V_R| / V_C` at the real point `(x1, p x1)`.
pub fn interface_gap(x1: f64, params: &PartitionParams) -> f64 {
    let e = EnergyParams::new(*params);
    let x2 = params.p() * x1;
    let vc = e.cone(x1, x2);
    (vc - e.side_right(x1, x2)).abs() / vc
}

/// Evaluation of the two inequalities tying `eps0`, `T`, `eta0`, `eta1` and
/// `beta` together, with their slacks (positive slack means the inequality
/// holds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CondConstReport {
    pub eps0: f64,
    pub horizon: f64,
    pub c_tau: f64,
    pub k0: f64,
    /// `1/eta0^2 - (eps0 + (2 + C_tau eta1)/eta1^2)`
    pub first_slack: f64,
    /// `eps0/4 - eta1 e^{2T} K0 / (beta^2 sqrt(e^{5T} - 1))`
    pub second_slack: f64,
    pub first_holds: bool,
    pub second_holds: bool,
}

impl CondConstReport {
    pub fn holds(&self) -> bool {
        self.first_holds && self.second_holds
    }
}

pub fn check_cond_const(eps0: f64, horizon: f64, params: &PartitionParams) -> CondConstReport {
    let c_tau = limits::c_tau();
    let k0 = limits::k0();
    let (eta0, eta1, beta) = (params.eta0, params.eta1, params.beta);
    let first_slack = 1.0 / (eta0 * eta0) - (eps0 + (2.0 + c_tau * eta1) / (eta1 * eta1));
    // e^{2T} / sqrt(e^{5T} - 1) written to stay finite for large T
    let ratio = if horizon > 0.0 {
        (2.0 * horizon - 0.5 * (5.0 * horizon + (-(-5.0 * horizon).exp()).ln_1p())).exp()
    } else {
        f64::INFINITY
    };
    let second_lhs = eta1 * k0 * ratio / (beta * beta);
    let second_slack = eps0 / 4.0 - second_lhs;
    CondConstReport {
        eps0,
        horizon,
        c_tau,
        k0,
        first_slack,
        second_slack,
        first_holds: first_slack > 0.0,
        second_holds: second_slack > 0.0,
    }
}
