//! Scaling-limit and hitting-time machinery: the divergent Ornstein-Uhlenbeck
//! process `dL = (5/2) L dt + 3 dB`, its exit time from `[-eta1, eta1]`, the
//! constants bounding that exit time, Monte Carlo experiments on the Y chain
//! in the cone, and a monotone coupling of embedded jump chains.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{ChainKind, ReactionSystem};
use crate::partition::{from_axial, to_axial, AxialCoord, SqrtBand};
use crate::quad;
use crate::simulate::{par_replicas, RngStream, Simulator, Step};
use crate::stats;

pub const OU_DRIFT: f64 = 2.5;
pub const OU_DIFFUSION: f64 = 3.0;

pub fn ou_mean(d0: f64, t: f64) -> f64 {
    d0 * (OU_DRIFT * t).exp()
}

/// `(9/5)(e^{5t} - 1)`
pub fn ou_variance(t: f64) -> f64 {
    OU_DIFFUSION * OU_DIFFUSION / (2.0 * OU_DRIFT) * (2.0 * OU_DRIFT * t).exp_m1()
}

/// Exact sample of `L(t)` given `L(0) = d0`.
pub fn ou_transition_sample<R: Rng + ?Sized>(d0: f64, t: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    ou_mean(d0, t) + ou_variance(t).sqrt() * z
}

/// `2 sqrt(5) / (3 sqrt(2 pi))`
pub fn k0() -> f64 {
    2.0 * 5f64.sqrt() / (3.0 * (2.0 * std::f64::consts::PI).sqrt())
}

/// Upper bound on `P(tau_L > s)` from the origin, clipped to `[0, 1]`.
pub fn hitting_tail_bound(s: f64, eta1: f64) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    (eta1 * k0() / (5.0 * s).exp_m1().sqrt()).min(1.0)
}

/// `int_2^inf K0 / sqrt(u^{5/2} - 1) du`.
///
/// The substitution `u = w^{-4}` turns it into the proper integral
/// `4 K0 int_0^{2^{-1/4}} dw / sqrt(1 - w^10)`.
pub fn c_tau() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        let upper = 2f64.powf(-0.25);
        let integral = quad::integrate(|w| 1.0 / (1.0 - w.powi(10)).sqrt(), 0.0, upper, 1e-13, 1e-13)
            .expect("smooth integrand on a compact interval");
        4.0 * k0() * integral
    })
}

/// Bound `2 + C_tau eta1` on `E exp(2 tau_L)`.
pub fn exp_moment_bound(eta1: f64) -> f64 {
    2.0 + c_tau() * eta1
}

/// `2 (8/p^2 + 1) t e^{6t}`, the Gronwall bound on the Y/Z coupling distance.
pub fn gronwall_constant(p: f64, t: f64) -> f64 {
    2.0 * (8.0 / (p * p) + 1.0) * t * (6.0 * t).exp()
}

/// Exit time of `L` from `(-eta1, eta1)`, simulated on a grid of step `dt`
/// with exact transitions. Crossings between grid points are detected with
/// the Brownian-bridge probability and dated at the middle of the step.
/// Returns `None` when the path is still inside at `max_time`.
pub fn ou_hitting_time<R: Rng + ?Sized>(d0: f64, eta1: f64, dt: f64, max_time: f64, rng: &mut R) -> Option<f64> {
    if d0.abs() >= eta1 {
        return Some(0.0);
    }
    let scale = OU_DIFFUSION * OU_DIFFUSION * dt;
    let mut x = d0;
    let mut t = 0.0;
    let mut steps = 0u64;
    while t < max_time {
        let y = ou_transition_sample(x, dt, rng);
        steps += 1;
        let next = steps as f64 * dt;
        if y.abs() >= eta1 {
            return Some(next);
        }
        let up = (-2.0 * (eta1 - x) * (eta1 - y) / scale).exp();
        let down = (-2.0 * (eta1 + x) * (eta1 + y) / scale).exp();
        let cross = 1.0 - (1.0 - up) * (1.0 - down);
        if rng.random::<f64>() < cross {
            return Some(t + 0.5 * dt);
        }
        x = y;
        t = next;
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingReport {
    pub d0: f64,
    pub eta1: f64,
    pub dt: f64,
    pub max_time: f64,
    pub replicas: u64,
    /// Hitting times in stream order; `None` means censored at `max_time`.
    pub samples: Vec<Option<f64>>,
    pub censored: u64,
    /// Jackknife estimate of `E exp(2 tau_L)` over the uncensored samples.
    pub exp_moment: f64,
    pub exp_moment_se: f64,
    pub exp_moment_bound: f64,
    /// More than 0.1% of paths were censored, so tail estimates are biased.
    pub bias_warning: bool,
}

impl HittingReport {
    /// Censored paths count as not yet hit.
    pub fn survival(&self, s: f64) -> (f64, f64) {
        let xs: Vec<f64> = self.samples.iter().map(|x| x.unwrap_or(f64::INFINITY)).collect();
        stats::survival(&xs, s)
    }

    /// Hitting times with censored paths set to `max_time`.
    pub fn censored_times(&self) -> Vec<f64> {
        self.samples.iter().map(|x| x.unwrap_or(self.max_time)).collect()
    }
}

pub fn ou_hitting_mc(d0: f64, eta1: f64, replicas: u64, dt: f64, max_time: f64, seed: u64) -> Result<HittingReport> {
    if !(d0.abs() < eta1) {
        return Err(Error::InvalidParams(format!("start {d0} must lie strictly inside (-{eta1}, {eta1})")));
    }
    if !(dt > 0.0 && dt <= 1e-3) {
        return Err(Error::InvalidParams(format!("grid step must lie in (0, 1e-3], got {dt}")));
    }
    let samples = par_replicas(seed, replicas, |s| ou_hitting_time(d0, eta1, dt, max_time, &mut s.rng()));
    let hits: Vec<f64> = samples.iter().flatten().copied().collect();
    let censored = replicas - hits.len() as u64;
    let weights: Vec<f64> = hits.iter().map(|t| (2.0 * t).exp()).collect();
    let (exp_moment, exp_moment_se) = stats::jackknife_mean(&weights, |m| m);
    Ok(HittingReport {
        d0,
        eta1,
        dt,
        max_time,
        replicas,
        samples,
        censored,
        exp_moment,
        exp_moment_se,
        exp_moment_bound: exp_moment_bound(eta1),
        bias_warning: censored as f64 > 1e-3 * replicas as f64,
    })
}

/// Settings of a Y-chain scaling experiment started at axial `(n, d_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ScalingConfig {
    pub n: u64,
    pub d_n: i64,
    pub horizon: f64,
    pub replicas: u64,
    /// Barrier for the exit time `|D| >= eta1 sqrt(R)`.
    pub eta1: f64,
    pub checkpoints: Vec<f64>,
}

impl ScalingConfig {
    pub fn new(n: u64, d_n: i64, horizon: f64, replicas: u64, eta1: f64) -> Self {
        let checkpoints = [0.25, 0.5, 0.75, 1.0].into_iter().filter(|&c| c <= horizon).collect();
        Self { n, d_n, horizon, replicas, eta1, checkpoints }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointStats {
    pub t: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub ou_mean: f64,
    pub ou_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub config: ScalingConfig,
    /// Mean over replicas of `sup_{t <= T} |R(t)/N - e^t|`.
    pub mean_sup_deviation: f64,
    pub sup_deviation_se: f64,
    /// Statistics of `L_N(t) = D(t)/sqrt(R(t))`.
    pub checkpoints: Vec<CheckpointStats>,
    pub second_moment: f64,
    pub second_moment_se: f64,
    pub second_moment_target: f64,
    /// Fraction of replicas whose exit time exceeded the horizon.
    pub exit_censored_fraction: f64,
    /// KS distance between exit times of the chain and of the OU limit,
    /// both censored at the horizon.
    pub exit_time_ks_distance: f64,
}

struct ScalingSample {
    sup_dev: f64,
    l_values: Vec<f64>,
    r_final: f64,
    exit: Option<f64>,
}

fn scaling_replica(cfg: &ScalingConfig, stream: RngStream) -> Result<ScalingSample> {
    let x0 = from_axial(AxialCoord { r: cfg.n, d: cfg.d_n })?;
    let mut sim = Simulator::new(ReactionSystem::new(ChainKind::Y), x0, stream.rng())?;
    let n = cfg.n as f64;
    let band = SqrtBand::new(cfg.eta1);
    let mut l_values = Vec::with_capacity(cfg.checkpoints.len());
    let mut next_cp = 0;
    let mut sup_dev: f64 = 0.0;
    let mut exit = if band.reached(cfg.n, cfg.d_n) { Some(0.0) } else { None };
    let mut t_prev: f64 = 0.0;
    let mut axial = to_axial(x0);
    loop {
        let step = sim.step(Some(cfg.horizon))?;
        let t_next = sim.time();
        // R is constant on [t_prev, t_next); e^t is monotone
        let r = axial.r as f64 / n;
        sup_dev = sup_dev.max((r - t_prev.exp()).abs()).max((r - t_next.exp()).abs());
        while next_cp < cfg.checkpoints.len() && cfg.checkpoints[next_cp] < t_next {
            l_values.push(axial.d as f64 / (axial.r as f64).sqrt());
            next_cp += 1;
        }
        match step {
            Step::Jump(e) => {
                axial = to_axial(e.state);
                if exit.is_none() && band.reached(axial.r, axial.d) {
                    exit = Some(e.t);
                }
                t_prev = t_next;
            }
            Step::Horizon | Step::Absorbed => {
                while next_cp < cfg.checkpoints.len() {
                    l_values.push(axial.d as f64 / (axial.r as f64).sqrt());
                    next_cp += 1;
                }
                return Ok(ScalingSample { sup_dev, l_values, r_final: axial.r as f64 / n, exit });
            }
        }
    }
}

pub fn scaling_experiment(cfg: &ScalingConfig, seed: u64) -> Result<ScalingReport> {
    from_axial(AxialCoord { r: cfg.n, d: cfg.d_n })?;
    if cfg.replicas < 2 {
        return Err(Error::InvalidParams("scaling experiment needs at least 2 replicas".into()));
    }
    let samples = par_replicas(seed, cfg.replicas, |s| scaling_replica(cfg, s));
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;

    let sups: Vec<f64> = samples.iter().map(|s| s.sup_dev).collect();
    let d0 = cfg.d_n as f64 / (cfg.n as f64).sqrt();
    let checkpoints = cfg
        .checkpoints
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let xs: Vec<f64> = samples.iter().map(|s| s.l_values[k]).collect();
            CheckpointStats {
                t,
                mean: stats::mean(&xs),
                mean_se: stats::std_err(&xs),
                variance: stats::variance(&xs),
                variance_se: stats::variance_std_err(&xs),
                ou_mean: ou_mean(d0, t),
                ou_variance: ou_variance(t),
            }
        })
        .collect();
    let squares: Vec<f64> = samples.iter().map(|s| s.r_final * s.r_final).collect();
    let exits: Vec<f64> = samples.iter().map(|s| s.exit.unwrap_or(cfg.horizon).min(cfg.horizon)).collect();
    let censored = samples.iter().filter(|s| s.exit.is_none_or(|t| t >= cfg.horizon)).count();

    // the OU comparison uses its own stream family
    let ou_seed = RngStream::new(seed, 0).fork(1).seed;
    let ou_exits = if d0.abs() < cfg.eta1 {
        ou_hitting_mc(d0, cfg.eta1, cfg.replicas, 1e-3, cfg.horizon, ou_seed)?.censored_times()
    } else {
        vec![0.0; cfg.replicas as usize]
    };

    Ok(ScalingReport {
        config: cfg.clone(),
        mean_sup_deviation: stats::mean(&sups),
        sup_deviation_se: stats::std_err(&sups),
        checkpoints,
        second_moment: stats::mean(&squares),
        second_moment_se: stats::std_err(&squares),
        second_moment_target: (2.0 * cfg.horizon).exp(),
        exit_censored_fraction: censored as f64 / cfg.replicas as f64,
        exit_time_ks_distance: stats::ks_statistic(&exits, &ou_exits),
    })
}

/// Paired embedded chains started at `d_i` and at `d_i mod 2`, driven by a
/// common uniform sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneRun {
    pub a: Vec<u64>,
    pub b: Vec<u64>,
    /// First index with `A_i >= eta1 sqrt(N + i)`, if reached.
    pub hit_a: Option<usize>,
    pub hit_b: Option<usize>,
    /// Continuous hitting times from a shared sequence of holding times
    /// with rates `N + i`.
    pub tau_a: Option<f64>,
    pub tau_b: Option<f64>,
}

impl MonotoneRun {
    /// Indices where `A_i < B_i` or `A_i - B_i` is odd.
    pub fn order_violations(&self) -> Vec<usize> {
        self.a
            .iter()
            .zip(&self.b)
            .enumerate()
            .filter(|(_, (a, b))| a < b || (*a - *b) % 2 == 1)
            .map(|(i, _)| i)
            .collect()
    }
}

/// `x + zeta_i(x)` where `zeta_i(x) = +1` at 0 and otherwise
/// `2 1{u <= (N + i + alpha x) / (2(N + i))} - 1`.
pub fn monotone_step(x: u64, u: f64, n: u64, i: u64, alpha: f64) -> u64 {
    if x == 0 {
        return 1;
    }
    let m = (n + i) as f64;
    if u <= (m + alpha * x as f64) / (2.0 * m) {
        x + 1
    } else {
        x - 1
    }
}

pub fn monotone_chain_run<R: Rng + ?Sized>(
    n: u64,
    d_i: u64,
    alpha: f64,
    eta1: f64,
    max_steps: usize,
    rng: &mut R,
) -> Result<MonotoneRun> {
    if n == 0 || !(alpha > 0.0) || !(eta1 > 0.0) {
        return Err(Error::InvalidParams("monotone chain needs N >= 1, alpha > 0, eta1 > 0".into()));
    }
    let reached = |x: u64, i: usize| (x as f64) * (x as f64) >= eta1 * eta1 * (n + i as u64) as f64;
    let mut a = vec![d_i];
    let mut b = vec![d_i % 2];
    let (mut hit_a, mut hit_b) = (None, None);
    let (mut tau_a, mut tau_b) = (None, None);
    let mut clock = 0.0;
    for i in 0..=max_steps {
        let (x, y) = (a[i], b[i]);
        if hit_a.is_none() && reached(x, i) {
            hit_a = Some(i);
            tau_a = Some(clock);
        }
        if hit_b.is_none() && reached(y, i) {
            hit_b = Some(i);
            tau_b = Some(clock);
        }
        if (hit_a.is_some() && hit_b.is_some()) || i == max_steps {
            break;
        }
        let u: f64 = rng.random();
        let e: f64 = rng.sample(rand_distr::Exp1);
        clock += e / (n + i as u64) as f64;
        a.push(monotone_step(x, u, n, i as u64, alpha));
        b.push(monotone_step(y, u, n, i as u64, alpha));
    }
    Ok(MonotoneRun { a, b, hit_a, hit_b, tau_a, tau_b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k0_examples() {
        assert!((k0() - 0.59471).abs() < 1e-5);
        assert!((k0() * k0() - 0.35368).abs() < 1e-5);
    }

    #[test]
    fn c_tau_matches_direct_quadrature() {
        // the original integral with u = 2/v mapping [2, inf) onto (0, 1]
        let direct = quad::integrate(
            |v: f64| {
                let u = 2.0 / v;
                k0() / (u.powf(2.5) - 1.0).sqrt() * 2.0 / (v * v)
            },
            0.0,
            1.0,
            1e-12,
            1e-12,
        )
        .unwrap();
        assert!((c_tau() - direct).abs() < 1e-8);
        assert!(c_tau() > 2.0 && c_tau() < 4.0);
    }

    #[test]
    fn tail_bound_examples() {
        assert_eq!(hitting_tail_bound(1.0, 60.0), 1.0);
        let v = hitting_tail_bound(3.0, 60.0);
        assert!((v - 60.0 * k0() / (15f64.exp() - 1.0).sqrt()).abs() < 1e-15);
        assert!((v - 0.0197).abs() < 1e-4);
        assert!(hitting_tail_bound(5.0, 60.0) < v);
        assert!(hitting_tail_bound(3.0, 70.0) > v);
    }

    #[test]
    fn ou_variance_example() {
        assert!((ou_variance(0.5) - 1.8 * (2.5f64.exp() - 1.0)).abs() < 1e-12);
        assert!((ou_variance(0.5) - 20.13).abs() < 0.01);
        assert!((ou_mean(1.0, 0.5) - 3.4903).abs() < 1e-4);
    }

    #[test]
    fn ou_degenerate_limit() {
        let mut rng = RngStream::new(1, 0).rng();
        let x = ou_transition_sample(2.0, 1e-14, &mut rng);
        assert!((x - 2.0).abs() < 1e-5);
    }

    #[test]
    fn start_at_barrier_hits_immediately() {
        let mut rng = RngStream::new(2, 0).rng();
        let t = ou_hitting_time(5.0 * (1.0 - 1e-9), 5.0, 1e-3, 10.0, &mut rng).unwrap();
        assert!(t <= 1e-3);
    }

    #[test]
    fn gronwall_example() {
        let c = gronwall_constant(1.0 / 30.0, 1.0);
        assert!((c - 2.0 * 7201.0 * 6f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn monotone_step_rule() {
        assert_eq!(monotone_step(0, 0.99, 10, 0, 1.0), 1);
        assert_eq!(monotone_step(4, 0.5, 10, 0, 1.0), 5);
        assert_eq!(monotone_step(4, 0.71, 10, 0, 1.0), 3);
        assert_eq!(monotone_step(4, 0.69, 10, 0, 1.0), 5);
    }

    #[test]
    fn monotone_run_dominates() {
        for seed in 0..50 {
            let mut rng = RngStream::new(seed, 0).rng();
            let run = monotone_chain_run(100, 6, 1.0, 3.0, 200_000, &mut rng).unwrap();
            assert!(run.order_violations().is_empty());
            if let (Some(a), Some(b)) = (run.hit_a, run.hit_b) {
                assert!(a <= b);
                assert!(run.tau_a.unwrap() <= run.tau_b.unwrap());
            }
        }
    }

    #[test]
    fn odd_start_pairs_with_one() {
        let mut rng = RngStream::new(3, 0).rng();
        let run = monotone_chain_run(50, 7, 1.0, 2.0, 10_000, &mut rng).unwrap();
        assert_eq!(run.b[0], 1);
        assert!(run.order_violations().is_empty());
    }
}
