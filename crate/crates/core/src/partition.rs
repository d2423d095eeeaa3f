//! Region classification of the lattice: the cone around the diagonal, the two
//! sides, the interface strips, and the interior (diffusive) cone.
//!
//! All boundary tests are done in exact integer arithmetic. The aperture `p`
//! is held as a rational and `eta^2` is converted to a rational when it has a
//! short exact representation, so lattice points lying exactly on a boundary
//! are classified the same way on every platform.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::network::LatticeState;

/// Half-width of the interface strip around the ray `x2 = p x1`.
pub const DELTA_HALF_WIDTH: i64 = 5;

fn rational_from_f64(v: f64) -> Option<Ratio<i64>> {
    let r = Ratio::<i64>::approximate_float(v)?;
    // only accept the rational when it reproduces the float exactly
    let back = *r.numer() as f64 / *r.denom() as f64;
    (back == v && r.denom().abs() <= 1 << 30 && r.numer().abs() <= 1 << 40).then_some(r)
}

/// Threshold `|d| <=> eta sqrt(r)`, compared as `d^2 <=> eta^2 r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqrtBand {
    eta: f64,
    eta_sq: Option<Ratio<i64>>,
}

impl SqrtBand {
    pub fn new(eta: f64) -> Self {
        Self { eta, eta_sq: rational_from_f64(eta * eta) }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Sign of `d^2 - eta^2 r`.
    pub fn compare(&self, r: u64, d: i64) -> std::cmp::Ordering {
        let d_sq = i128::from(d) * i128::from(d);
        match self.eta_sq {
            Some(q) => {
                let lhs = d_sq * i128::from(*q.denom());
                let rhs = i128::from(*q.numer()) * i128::from(r);
                lhs.cmp(&rhs)
            }
            None => (d_sq as f64)
                .partial_cmp(&(self.eta * self.eta * r as f64))
                .unwrap_or(std::cmp::Ordering::Equal),
        }
    }

    /// `|d| <= eta sqrt(r)`.
    pub fn contains(&self, r: u64, d: i64) -> bool {
        self.compare(r, d).is_le()
    }

    /// `|d| >= eta sqrt(r)`.
    pub fn reached(&self, r: u64, d: i64) -> bool {
        self.compare(r, d).is_ge()
    }
}

/// Cone aperture `p`, stored as an exact rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Aperture(Ratio<i64>);

impl Aperture {
    pub fn from_ratio(num: i64, den: i64) -> Result<Self> {
        if den <= 0 || num <= 0 || num >= den {
            return Err(Error::InvalidParams(format!("aperture p = {num}/{den} must lie in (0, 1)")));
        }
        Ok(Self(Ratio::new(num, den)))
    }

    pub fn from_f64(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParams(format!("aperture p = {p} must lie in (0, 1)")));
        }
        let r = Ratio::<i64>::approximate_float(p)
            .ok_or_else(|| Error::InvalidParams(format!("aperture p = {p} has no rational form")))?;
        Self::from_ratio(*r.numer(), *r.denom())
    }

    /// Parses `"1/30"` or a decimal such as `"0.05"`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let parse = |t: &str| {
                t.trim()
                    .parse::<i64>()
                    .map_err(|e| Error::InvalidParams(format!("aperture '{s}': {e}")))
            };
            return Self::from_ratio(parse(n)?, parse(d)?);
        }
        let v: f64 = s
            .parse()
            .map_err(|e| Error::InvalidParams(format!("aperture '{s}': {e}")))?;
        Self::from_f64(v)
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn value(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// `b <= p a` in exact arithmetic.
    fn le_scaled(&self, b: u64, a: u64) -> bool {
        i128::from(b) * i128::from(self.denom()) <= i128::from(self.numer()) * i128::from(a)
    }

    /// `|b - p a|` scaled by the denominator: `|b den - num a|`.
    fn scaled_gap(&self, b: u64, a: u64) -> i128 {
        (i128::from(b) * i128::from(self.denom()) - i128::from(self.numer()) * i128::from(a)).abs()
    }
}

impl fmt::Display for Aperture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

/// Geometry parameters: aperture `p`, interior-cone width `eta0`, exit-cone
/// width `eta1` and the energy regularization `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionParams {
    pub p: Aperture,
    pub eta0: f64,
    pub eta1: f64,
    pub beta: f64,
}

impl Default for PartitionParams {
    fn default() -> Self {
        Self {
            p: Aperture(Ratio::new(1, 30)),
            eta0: 4.0,
            eta1: 60.0,
            beta: 1.0,
        }
    }
}

impl PartitionParams {
    /// Builds parameters, checking only that each value lies in its domain.
    /// Use [`PartitionParams::violations`] for the constraints the stability
    /// argument needs.
    pub fn new(p: Aperture, eta0: f64, eta1: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("eta0", eta0), ("eta1", eta1), ("beta", beta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} = {v} must be finite and positive")));
            }
        }
        Ok(Self { p, eta0, eta1, beta })
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn p(&self) -> f64 {
        self.p.value()
    }

    /// `q = (1 - p) / (1 + p)`.
    pub fn cone_exit_q(&self) -> f64 {
        cone_exit_q(self.p())
    }

    pub fn interior_band(&self) -> SqrtBand {
        SqrtBand::new(self.eta0)
    }

    pub fn exit_band(&self) -> SqrtBand {
        SqrtBand::new(self.eta1)
    }

    /// Names of the violated structural constraints (`p < 1/29`,
    /// `eta0 > 3`, `eta1 > eta0`); empty when all hold.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if 29 * self.p.numer() >= self.p.denom() {
            out.push(format!("p < 1/29 (got p = {})", self.p));
        }
        if self.eta0 <= 3.0 {
            out.push(format!("eta0 > 3 (got eta0 = {})", self.eta0));
        }
        if self.eta1 <= self.eta0 {
            out.push(format!("eta1 > eta0 (got eta1 = {}, eta0 = {})", self.eta1, self.eta0));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("violated constraint(s): {}", v.join("; "))))
        }
    }
}

impl Serialize for PartitionParams {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct View {
            p: f64,
            p_exact: String,
            eta0: f64,
            eta1: f64,
            beta: f64,
        }
        View {
            p: self.p(),
            p_exact: self.p.to_string(),
            eta0: self.eta0,
            eta1: self.eta1,
            beta: self.beta,
        }
        .serialize(s)
    }
}

/// `(1 - p) / (1 + p)`: the cone is `|d| < q r`.
pub fn cone_exit_q(p: f64) -> f64 {
    (1.0 - p) / (1.0 + p)
}

/// Axial coordinates `(r, d) = (x1 + x2, x1 - x2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AxialCoord {
    pub r: u64,
    pub d: i64,
}

pub fn to_axial(x: LatticeState) -> AxialCoord {
    AxialCoord {
        r: x.x1 + x.x2,
        d: x.x1 as i64 - x.x2 as i64,
    }
}

pub fn from_axial(a: AxialCoord) -> Result<LatticeState> {
    let AxialCoord { r, d } = a;
    if d.unsigned_abs() > r || (r as i128 - d as i128) % 2 != 0 {
        return Err(Error::AxialDomain { r, d });
    }
    let x1 = ((r as i128 + d as i128) / 2) as u64;
    let x2 = ((r as i128 - d as i128) / 2) as u64;
    Ok(LatticeState::new(x1, x2))
}

/// Subdivision of the cone by the interior width `eta0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeZone {
    Center,
    ConeRight,
    ConeLeft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Cone(ConeZone),
    SideRight,
    SideLeft,
}

impl Region {
    pub fn is_cone(&self) -> bool {
        matches!(self, Region::Cone(_))
    }

    /// Mirror image under the species swap.
    pub fn mirrored(&self) -> Self {
        match self {
            Region::SideRight => Region::SideLeft,
            Region::SideLeft => Region::SideRight,
            Region::Cone(ConeZone::ConeRight) => Region::Cone(ConeZone::ConeLeft),
            Region::Cone(ConeZone::ConeLeft) => Region::Cone(ConeZone::ConeRight),
            Region::Cone(ConeZone::Center) => Region::Cone(ConeZone::Center),
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Region::Cone(ConeZone::Center) => "cone/center",
            Region::Cone(ConeZone::ConeRight) => "cone/right",
            Region::Cone(ConeZone::ConeLeft) => "cone/left",
            Region::SideRight => "side_right",
            Region::SideLeft => "side_left",
        };
        f.write_str(s)
    }
}

/// `x2 <= p x1`.
pub fn in_side_right(x: LatticeState, p: Aperture) -> bool {
    p.le_scaled(x.x2, x.x1)
}

/// `x1 <= p x2`.
pub fn in_side_left(x: LatticeState, p: Aperture) -> bool {
    p.le_scaled(x.x1, x.x2)
}

/// Region of `x`. States satisfying both side conditions (only near the
/// origin) are assigned to the right side.
pub fn classify(x: LatticeState, params: &PartitionParams) -> Region {
    if in_side_right(x, params.p) {
        return Region::SideRight;
    }
    if in_side_left(x, params.p) {
        return Region::SideLeft;
    }
    let a = to_axial(x);
    if params.interior_band().contains(a.r, a.d) {
        Region::Cone(ConeZone::Center)
    } else if a.d > 0 {
        Region::Cone(ConeZone::ConeRight)
    } else {
        Region::Cone(ConeZone::ConeLeft)
    }
}

/// Which interface strip `x` lies in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strip {
    None,
    Right,
    Left,
}

/// Right strip `|x2 - p x1| <= 5`, left strip `|x1 - p x2| <= 5`.
pub fn in_delta(x: LatticeState, params: &PartitionParams) -> Strip {
    let width = i128::from(DELTA_HALF_WIDTH) * i128::from(params.p.denom());
    if params.p.scaled_gap(x.x2, x.x1) <= width {
        Strip::Right
    } else if params.p.scaled_gap(x.x1, x.x2) <= width {
        Strip::Left
    } else {
        Strip::None
    }
}
