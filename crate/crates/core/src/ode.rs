//! Deterministic mass-action dynamics of the network.
//!
//! ```text
//! x1' = 2 x1^3 x2^2 - x1^2 x2^3 - 4 x1^4 + 1
//! x2' = 2 x1^2 x2^3 - x1^3 x2^2 - 4 x2^4 + 1
//! ```
//!
//! Solutions can blow up in finite time with `|x| ~ (t* - t)^{-1/4}`, far
//! below the resolution of a double-precision clock long before any sensible
//! magnitude cap. The integrator therefore advances in a regularized time
//! `s` with `dt/ds = (1 + |x|^2)^{-2}` and carries `t` as a third component.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct FlowState {
    pub x1: f64,
    pub x2: f64,
}

impl FlowState {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn swap(self) -> Self {
        Self { x1: self.x2, x2: self.x1 }
    }

    pub fn norm_inf(self) -> f64 {
        self.x1.abs().max(self.x2.abs())
    }
}

// Both components go through the same expression so that the diagonal stays
// exactly invariant under rounding; it is transversally unstable.
fn component(a: f64, b: f64) -> f64 {
    let (a2, b2) = (a * a, b * b);
    let ab = a2 * b2;
    2.0 * ab * a - ab * b - 4.0 * a2 * a2 + 1.0
}

pub fn vector_field(x: FlowState) -> [f64; 2] {
    [component(x.x1, x.x2), component(x.x2, x.x1)]
}

/// Jacobian of [`vector_field`].
pub fn jacobian(x: FlowState) -> [[f64; 2]; 2] {
    let (a, b) = (x.x1, x.x2);
    [
        [6.0 * a * a * b * b - 2.0 * a * b.powi(3) - 16.0 * a.powi(3), 4.0 * a.powi(3) * b - 3.0 * a * a * b * b],
        [4.0 * a * b.powi(3) - 3.0 * a * a * b * b, 6.0 * a * a * b * b - 2.0 * a.powi(3) * b - 16.0 * b.powi(3)],
    ]
}

/// The field restricted to the diagonal: `f^5 - 4 f^4 + 1`.
pub fn diagonal_rhs(f: f64) -> f64 {
    f.powi(4) * (f - 4.0) + 1.0
}

fn diagonal_rhs_derivative(f: f64) -> f64 {
    5.0 * f.powi(4) - 16.0 * f.powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equilibrium {
    pub value: f64,
    /// Stable for the diagonal reduction.
    pub stable: bool,
    /// Jacobian eigenvalues along and across the diagonal.
    pub eigen_diagonal: f64,
    pub eigen_transverse: f64,
}

fn bisect<F: Fn(f64) -> f64>(g: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut glo = g(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Nonnegative roots of the diagonal reduction, sorted.
///
/// For `f >= 4`, `f^4 (f - 4) + 1 >= 1`, so every root lies in `[0, 4)`.
pub fn equilibria() -> Vec<Equilibrium> {
    let grid = 4000;
    let mut roots = Vec::new();
    for k in 0..grid {
        let (lo, hi) = (4.0 * k as f64 / grid as f64, 4.0 * (k + 1) as f64 / grid as f64);
        if diagonal_rhs(lo) > 0.0 && diagonal_rhs(hi) <= 0.0 || diagonal_rhs(lo) < 0.0 && diagonal_rhs(hi) >= 0.0 {
            roots.push(bisect(diagonal_rhs, lo, hi, 1e-14));
        }
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    roots
        .into_iter()
        .map(|f| {
            let j = jacobian(FlowState::new(f, f));
            Equilibrium {
                value: f,
                stable: diagonal_rhs_derivative(f) < 0.0,
                eigen_diagonal: j[0][0] + j[0][1],
                eigen_transverse: j[0][0] - j[0][1],
            }
        })
        .collect()
}

/// Largest root of the diagonal reduction; diagonal starts above it blow up.
pub fn unstable_root() -> f64 {
    equilibria().iter().filter(|e| !e.stable).map(|e| e.value).fold(f64::NAN, f64::max)
}

/// Blow-up time `int_{f0}^inf df / (f^5 - 4 f^4 + 1)` of the diagonal
/// solution started at `f0`, with an absolute error bound.
///
/// With `u = 1/f` the integral becomes `int_0^{1/f0} u^3 / (1 - 4u + u^5) du`.
pub fn blow_up_time(f0: f64) -> Result<(f64, f64)> {
    let root = unstable_root();
    if !(f0 > root) {
        return Err(Error::Domain(format!("diagonal start {f0} does not exceed the unstable root {root}")));
    }
    if f0.is_infinite() {
        return Ok((0.0, 0.0));
    }
    let tol = 1e-12;
    let value = quad::integrate(|u| u.powi(3) / (1.0 - 4.0 * u + u.powi(5)), 0.0, 1.0 / f0, tol, 1e-12)?;
    Ok((value, 10.0 * tol.max(1e-12 * value)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConvergedToEquilibrium,
    BlowUp,
    HorizonReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowUpResult {
    pub verdict: Verdict,
    /// Time at which integration stopped.
    pub time: f64,
    pub state: FlowState,
    /// Estimated blow-up time and its error bound, for a blow-up verdict.
    pub blow_up_time: Option<f64>,
    pub error_bound: Option<f64>,
    /// Physical length of the last accepted step.
    pub last_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub magnitude_cap: f64,
    /// Field norm under which the solution counts as at rest.
    pub equilibrium_tol: f64,
    /// Spacing of the recorded dense output; `None` records accepted steps.
    pub output_dt: Option<f64>,
    /// Largest step in regularized time; keeps the scheme well inside its
    /// stability region near the stable equilibrium.
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-14, magnitude_cap: 1e12, equilibrium_tol: 1e-9, output_dt: None, max_step: 0.5, max_steps: 1_000_000 }
    }
}

impl OdeOptions {
    pub fn with_rtol(self, rtol: f64) -> Self {
        Self { rtol, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 1e-12 && self.rtol < 1e-3) {
            return Err(Error::InvalidParams(format!("rtol must lie in (1e-12, 1e-3), got {}", self.rtol)));
        }
        if !(self.magnitude_cap >= 1e6) {
            return Err(Error::InvalidParams(format!("magnitude cap must be >= 1e6, got {}", self.magnitude_cap)));
        }
        if !(self.atol > 0.0) || !(self.equilibrium_tol > 0.0) || !(self.max_step > 0.0) {
            return Err(Error::InvalidParams("tolerances must be positive".into()));
        }
        if self.output_dt.is_some_and(|dt| !(dt > 0.0)) {
            return Err(Error::InvalidParams("output spacing must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowPoint {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeSolution {
    pub path: Vec<FlowPoint>,
    pub result: BlowUpResult,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl OdeSolution {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W, preamble: &[String]) -> std::io::Result<()> {
        for line in preamble {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "t,x1,x2")?;
        for p in &self.path {
            writeln!(w, "{},{},{}", p.t, p.x1, p.x2)?;
        }
        Ok(())
    }
}

type Y = [f64; 3];

/// Right-hand side in regularized time: `(f(x) phi, phi)`.
fn rhs(y: &Y) -> Y {
    let x = FlowState::new(y[0], y[1]);
    let f = vector_field(x);
    let n2 = 1.0 + (y[0] * y[0] + y[1] * y[1]);
    let phi = 1.0 / (n2 * n2);
    [f[0] * phi, f[1] * phi, phi]
}

fn axpy(y: &Y, h: f64, terms: &[(f64, &Y)]) -> Y {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..3 {
            out[i] += h * c * k[i];
        }
    }
    out
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Continuous extension of one accepted step.
struct Dense {
    r: [Y; 5],
}

impl Dense {
    fn eval(&self, theta: f64) -> Y {
        let t1 = 1.0 - theta;
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            let r = &self.r;
            *o = r[0][i] + theta * (r[1][i] + t1 * (r[2][i] + theta * (r[3][i] + t1 * r[4][i])));
        }
        out
    }

    /// `theta` in `[0, 1]` where the time component equals `t`.
    fn theta_at_time(&self, t: f64, t0: f64, t1: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        if t <= t0 {
            return 0.0;
        }
        if t >= t1 {
            return 1.0;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid)[2] < t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

struct StepOut {
    y1: Y,
    k7: Y,
    err: f64,
    dense: Dense,
}

fn dopri_step(y: &Y, k1: &Y, h: f64, rtol: f64, atol: f64) -> StepOut {
    let k2 = rhs(&axpy(y, h, &[(A21, k1)]));
    let k3 = rhs(&axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = rhs(&axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = rhs(&axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = rhs(&axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y1 = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = rhs(&y1);
    let mut sq = 0.0;
    for i in 0..3 {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = atol + rtol * y[i].abs().max(y1[i].abs());
        sq += (e / sc) * (e / sc);
    }
    let err = (sq / 3.0).sqrt();
    let mut r = [[0.0; 3]; 5];
    for i in 0..3 {
        let diff = y1[i] - y[i];
        let bspl = h * k1[i] - diff;
        r[0][i] = y[i];
        r[1][i] = diff;
        r[2][i] = bspl;
        r[3][i] = diff - h * k7[i] - bspl;
        r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    StepOut { y1, k7, err, dense: Dense { r } }
}

/// Integrates from `x0` up to time `horizon`, stopping early at rest or at
/// blow-up.
pub fn integrate(x0: FlowState, horizon: f64, opts: &OdeOptions) -> Result<OdeSolution> {
    opts.validate()?;
    if !(x0.x1 >= 0.0 && x0.x2 >= 0.0 && x0.x1.is_finite() && x0.x2.is_finite()) {
        return Err(Error::Domain(format!("start ({}, {}) must be a finite point of the closed quadrant", x0.x1, x0.x2)));
    }
    if !(horizon >= 0.0) {
        return Err(Error::InvalidParams(format!("horizon must be >= 0, got {horizon}")));
    }
    let floor = 1e-14;
    let mut y: Y = [x0.x1, x0.x2, 0.0];
    let mut k1 = rhs(&y);
    let mut h = opts.max_step.min(1e-3);
    let mut path = vec![FlowPoint { t: 0.0, x1: x0.x1, x2: x0.x2 }];
    let mut out_index = 1u64;
    let (mut accepted, mut rejected) = (0, 0);
    let at_rest = |y: &Y| {
        let f = vector_field(FlowState::new(y[0], y[1]));
        f[0].hypot(f[1]) <= opts.equilibrium_tol
    };
    let finish = |verdict, y: &Y, last_step: f64, path: Vec<FlowPoint>, accepted, rejected| {
        let state = FlowState::new(y[0], y[1]);
        let (blow_up_time, error_bound) = if verdict == Verdict::BlowUp {
            // time left beyond the cap, from the diagonal reduction
            let m = state.x1.min(state.x2).max(1.0);
            let tail = 1.0 / (4.0 * m.powi(4));
            (Some(y[2]), Some(opts.rtol * y[2] + tail))
        } else {
            (None, None)
        };
        OdeSolution {
            path,
            result: BlowUpResult { verdict, time: y[2], state, blow_up_time, error_bound, last_step },
            accepted_steps: accepted,
            rejected_steps: rejected,
        }
    };

    if horizon == 0.0 {
        return Ok(finish(Verdict::HorizonReached, &y, 0.0, path, 0, 0));
    }
    if at_rest(&y) {
        return Ok(finish(Verdict::ConvergedToEquilibrium, &y, 0.0, path, 0, 0));
    }
    loop {
        if accepted + rejected >= opts.max_steps {
            return Err(Error::Domain(format!("step budget {} exhausted at t = {}", opts.max_steps, y[2])));
        }
        let out = dopri_step(&y, &k1, h, opts.rtol, opts.atol);
        let negative = out.y1[0] < 0.0 || out.y1[1] < 0.0;
        if out.err > 1.0 || negative || !out.err.is_finite() {
            rejected += 1;
            let fac = if negative || !out.err.is_finite() { 0.2 } else { (0.9 * out.err.powf(-0.2)).max(0.2) };
            h *= fac;
            if h < floor {
                return Err(Error::Stiffness { t: y[2], h });
            }
            continue;
        }
        accepted += 1;
        let (t0, t1) = (y[2], out.y1[2]);
        // dense output on the requested grid, clipped at the horizon
        if let Some(dt) = opts.output_dt {
            loop {
                let tg = out_index as f64 * dt;
                if tg > t1.min(horizon) {
                    break;
                }
                let v = out.dense.eval(out.dense.theta_at_time(tg, t0, t1));
                path.push(FlowPoint { t: tg, x1: v[0].max(0.0), x2: v[1].max(0.0) });
                out_index += 1;
            }
        }
        if t1 >= horizon {
            let th = out.dense.theta_at_time(horizon, t0, t1);
            let mut v = out.dense.eval(th);
            v[0] = v[0].max(0.0);
            v[1] = v[1].max(0.0);
            v[2] = horizon;
            if opts.output_dt.is_none() {
                path.push(FlowPoint { t: horizon, x1: v[0], x2: v[1] });
            }
            return Ok(finish(Verdict::HorizonReached, &v, horizon - t0, path, accepted, rejected));
        }
        y = out.y1;
        k1 = out.k7;
        let last_step = t1 - t0;
        if opts.output_dt.is_none() {
            path.push(FlowPoint { t: y[2], x1: y[0], x2: y[1] });
        }
        if y[0].abs().max(y[1].abs()) > opts.magnitude_cap && last_step < floor * y[2].max(1e-300) {
            return Ok(finish(Verdict::BlowUp, &y, last_step, path, accepted, rejected));
        }
        if at_rest(&y) {
            return Ok(finish(Verdict::ConvergedToEquilibrium, &y, last_step, path, accepted, rejected));
        }
        let fac = (0.9 * out.err.max(1e-10).powf(-0.2)).clamp(0.2, 10.0);
        h = (h * fac).min(opts.max_step);
    }
}

/// Samples the field on an `n x n` grid over `[0, x_max]^2` as
/// `(x1, x2, v1, v2)` rows.
pub fn flow_field(x_max: f64, n: usize) -> Vec<[f64; 4]> {
    let step = if n > 1 { x_max / (n - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let x = FlowState::new(i as f64 * step, j as f64 * step);
            let v = vector_field(x);
            out.push([x.x1, x.x2, v[0], v[1]]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_examples() {
        assert_eq!(vector_field(FlowState::new(0.0, 0.0)), [1.0, 1.0]);
        assert_eq!(vector_field(FlowState::new(1.0, 1.0)), [-2.0, -2.0]);
        let x = FlowState::new(1.3, 0.4);
        let (a, b) = (vector_field(x), vector_field(x.swap()));
        assert_eq!([a[1], a[0]], b);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let x = FlowState::new(1.1, 0.7);
        let j = jacobian(x);
        let h = 1e-6;
        for col in 0..2 {
            let (mut p, mut m) = (x, x);
            if col == 0 {
                p.x1 += h;
                m.x1 -= h;
            } else {
                p.x2 += h;
                m.x2 -= h;
            }
            let (fp, fm) = (vector_field(p), vector_field(m));
            for row in 0..2 {
                assert!(((fp[row] - fm[row]) / (2.0 * h) - j[row][col]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn diagonal_examples() {
        assert_eq!(diagonal_rhs(0.0), 1.0);
        assert_eq!(diagonal_rhs(4.0), 1.0);
        assert_eq!(diagonal_rhs(1.0), -2.0);
        let x = vector_field(FlowState::new(2.5, 2.5));
        assert!((x[0] - diagonal_rhs(2.5)).abs() < 1e-12);
    }

    #[test]
    fn equilibria_examples() {
        let eq = equilibria();
        assert_eq!(eq.len(), 2);
        assert!(diagonal_rhs(0.74) > 0.0 && diagonal_rhs(0.75) < 0.0);
        assert!((eq[0].value - 0.745).abs() < 1e-3);
        assert!(eq[0].stable);
        assert!((eq[1].value - 3.9961).abs() < 1e-4);
        assert!(!eq[1].stable);
        assert!(eq[0].eigen_diagonal < 0.0 && eq[0].eigen_transverse < 0.0);
        assert!(eq[1].eigen_diagonal > 0.0);
    }

    #[test]
    fn blow_up_time_examples() {
        let (t5, err) = blow_up_time(5.0).unwrap();
        assert!(t5 > 0.0 && t5 < 0.01);
        assert!(err <= 1e-8);
        assert!(blow_up_time(6.0).unwrap().0 < t5);
        assert!(blow_up_time(1e6).unwrap().0 < 1e-20);
        assert!(blow_up_time(3.9).is_err());
    }

    #[test]
    fn options_are_validated() {
        let x0 = FlowState::new(1.0, 1.0);
        assert!(integrate(x0, 1.0, &OdeOptions::default().with_rtol(1e-2)).is_err());
        let opts = OdeOptions { magnitude_cap: 10.0, ..OdeOptions::default() };
        assert!(integrate(x0, 1.0, &opts).is_err());
        assert!(integrate(FlowState::new(-1.0, 0.0), 1.0, &OdeOptions::default()).is_err());
    }

    #[test]
    fn converges_from_half() {
        let sol = integrate(FlowState::new(0.5, 0.5), 50.0, &OdeOptions::default()).unwrap();
        assert_eq!(sol.result.verdict, Verdict::ConvergedToEquilibrium);
        let f = equilibria()[0].value;
        assert!((sol.result.state.x1 - f).abs() < 1e-8);
    }

    #[test]
    fn blows_up_from_five() {
        let sol = integrate(FlowState::new(5.0, 5.0), 1.0, &OdeOptions::default()).unwrap();
        assert_eq!(sol.result.verdict, Verdict::BlowUp);
        let (oracle, _) = blow_up_time(5.0).unwrap();
        let t = sol.result.blow_up_time.unwrap();
        assert!((t - oracle).abs() / oracle < 1e-6, "{t} vs {oracle}");
    }

    #[test]
    fn off_diagonal_start_does_not_blow_up() {
        let sol = integrate(FlowState::new(5.0, 4.5), 50.0, &OdeOptions::default()).unwrap();
        assert_eq!(sol.result.verdict, Verdict::ConvergedToEquilibrium);
        let peak = sol.path.iter().map(|p| p.x1.max(p.x2)).fold(0.0, f64::max);
        assert!(peak > 20.0, "peak {peak}");
    }

    #[test]
    fn dense_output_grid() {
        let opts = OdeOptions { output_dt: Some(0.1), ..OdeOptions::default() };
        let sol = integrate(FlowState::new(0.2, 1.0), 1.0, &opts).unwrap();
        assert_eq!(sol.result.verdict, Verdict::HorizonReached);
        assert_eq!(sol.path.len(), 11);
        for (k, p) in sol.path.iter().enumerate() {
            assert!((p.t - 0.1 * k as f64).abs() < 1e-12);
        }
    }
}
