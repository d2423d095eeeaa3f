//! Statistical checks of the samplers against closed forms and against each
//! other. All seeds are fixed.

use noisecrn::limits::{self, ScalingConfig};
use noisecrn::ode::{self, diagonal_rhs, FlowState, OdeOptions, Verdict};
use noisecrn::quad;
use noisecrn::simulate::{coupled_yz_run, diagonal_start, par_replicas, ssa_run, RngStream, Simulator, Step, StopReason, StoppingCondition};
use noisecrn::stats;
use noisecrn::{propensities, ChainKind, LatticeState, ReactionSystem};
use num_bigint::BigInt;

fn st(x1: u64, x2: u64) -> LatticeState {
    LatticeState::new(x1, x2)
}

fn d(x: LatticeState) -> f64 {
    x.x1 as f64 - x.x2 as f64
}

#[test]
fn coupled_y_marginal_matches_direct_simulation() {
    let n = 1_000;
    let x0 = diagonal_start(n);
    let horizon = 0.5;
    let coupled: Vec<f64> = par_replicas(11, 2_000, |s| {
        let run = coupled_yz_run(x0, horizon, n, s).unwrap();
        assert_eq!(run.stop, StopReason::TimeBudget);
        d(run.y.final_state())
    });
    let direct: Vec<f64> = par_replicas(12, 2_000, |s| {
        d(ssa_run(ChainKind::Y, x0, &[StoppingCondition::Time { t: horizon }], s).unwrap().final_state())
    });
    let ks = stats::ks_two_sample(&coupled, &direct);
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn holding_times_are_exponential_with_total_rate() {
    for (chain, x) in [(ChainKind::X, st(5, 5)), (ChainKind::X, st(0, 0)), (ChainKind::Z, st(10, 8)), (ChainKind::Y, st(40, 30))] {
        let total = propensities(chain, x).unwrap().total();
        let times: Vec<f64> = par_replicas(21, 10_000, |s| {
            let traj = ssa_run(chain, x, &[StoppingCondition::Events { k: 1 }], s).unwrap();
            traj.first_jump().unwrap().t
        });
        let (m, se) = (stats::mean(&times), stats::std_err(&times));
        assert!((m - 1.0 / total).abs() <= 3.0 * se, "{chain:?} at {x}: {m} vs {}", 1.0 / total);
    }
}

#[test]
fn y_event_count_tracks_growth() {
    let n = 10_000u64;
    let horizon = 1.0;
    let counts: Vec<f64> = par_replicas(31, 20, |s| {
        ssa_run(ChainKind::Y, diagonal_start(n), &[StoppingCondition::Time { t: horizon }], s).unwrap().events.len() as f64
    });
    let target = n as f64 * (horizon.exp() - 1.0);
    let m = stats::mean(&counts);
    assert!((m - target).abs() <= 0.1 * target, "{m} vs {target}");
}

/// `x` as `mantissa * 2^exponent`.
fn dyadic(x: f64) -> (u64, i32) {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1 << 52) - 1);
    if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1 << 52), exp - 1075)
    }
}

#[test]
fn compensated_clock_matches_exact_sum() {
    let mut sim = Simulator::new(ReactionSystem::new(ChainKind::X), st(5, 5), RngStream::new(41, 0).rng()).unwrap();
    let mut parts = Vec::with_capacity(1_000_000);
    for _ in 0..1_000_000 {
        match sim.step(None).unwrap() {
            Step::Jump(_) => parts.push(dyadic(sim.last_holding_time())),
            _ => unreachable!("the X chain never stops"),
        }
    }
    let e_min = parts.iter().map(|p| p.1).min().unwrap();
    let exact: BigInt = parts.iter().map(|&(m, e)| BigInt::from(m) << (e - e_min) as usize).sum();
    let scale = 2f64.powi(e_min);
    let exact = exact.to_string().parse::<f64>().unwrap() * scale;
    let rel = (sim.time() - exact).abs() / exact;
    assert!(rel <= 1e-9, "clock {} vs exact {exact}", sim.time());
    let naive: f64 = parts.iter().map(|&(m, e)| m as f64 * 2f64.powi(e)).sum();
    assert!((sim.time() - exact).abs() <= (naive - exact).abs());
}

#[test]
fn ou_transitions_compose() {
    let (t, s, d0) = (0.3, 0.2, 1.5);
    let mut rng = RngStream::new(51, 0).rng();
    let two: Vec<f64> = (0..10_000)
        .map(|_| {
            let mid = limits::ou_transition_sample(d0, t, &mut rng);
            limits::ou_transition_sample(mid, s, &mut rng)
        })
        .collect();
    let one: Vec<f64> = (0..10_000).map(|_| limits::ou_transition_sample(d0, t + s, &mut rng)).collect();
    let ks = stats::ks_two_sample(&two, &one);
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn ou_transition_moments() {
    let mut rng = RngStream::new(52, 0).rng();
    let xs: Vec<f64> = (0..100_000).map(|_| limits::ou_transition_sample(1.0, 0.5, &mut rng)).collect();
    let mean = 1.25f64.exp();
    let var = 1.8 * (2.5f64.exp() - 1.0);
    assert!((stats::mean(&xs) - mean).abs() <= 3.0 * stats::std_err(&xs));
    assert!((stats::variance(&xs) - var).abs() <= 0.05 * var, "{}", stats::variance(&xs));
}

#[test]
fn scaling_deviation_shrinks_with_n() {
    let small = limits::scaling_experiment(&ScalingConfig::new(1_000, 0, 1.0, 200, 60.0), 61).unwrap();
    let large = limits::scaling_experiment(&ScalingConfig::new(10_000, 0, 1.0, 200, 60.0), 61).unwrap();
    assert!(large.mean_sup_deviation < small.mean_sup_deviation, "{} vs {}", large.mean_sup_deviation, small.mean_sup_deviation);
    for rep in [&small, &large] {
        assert_eq!(rep.config.replicas, 200);
        assert!(rep.mean_sup_deviation.is_finite() && rep.second_moment.is_finite());
        assert!(rep.checkpoints.iter().all(|c| c.mean.is_finite() && c.variance.is_finite()));
    }
    let rel = (large.second_moment - large.second_moment_target).abs() / large.second_moment_target;
    assert!(rel <= 0.05, "{rel}");
}

#[test]
fn y_leaves_interior_cone() {
    let stops = [StoppingCondition::ExitInteriorCone { eta: 60.0 }, StoppingCondition::Events { k: 10_000_000 }];
    // Large enough that the band 60 sqrt(r) sits well inside the quadrant.
    let stopped = par_replicas(71, 100, |s| {
        let traj = ssa_run(ChainKind::Y, st(50_000, 50_000), &stops, s).unwrap();
        matches!(traj.stop, StopReason::Condition(_))
    });
    assert!(stopped.iter().all(|&b| b));
}

#[test]
fn diagonal_matches_scalar_flow() {
    let opts = OdeOptions::default();
    for (f0, horizon) in [(0.5, 0.05), (2.0, 0.02), (4.2, 0.004), (0.9, 0.3)] {
        let sol = ode::integrate(FlowState::new(f0, f0), horizon, &opts).unwrap();
        assert_eq!(sol.result.verdict, Verdict::HorizonReached);
        let f1 = sol.result.state.x1;
        assert_eq!(f1, sol.result.state.x2);
        // Time to travel from f0 to f1 along the scalar flow.
        let t = quad::integrate(|f| 1.0 / diagonal_rhs(f), f0, f1, 1e-15, 1e-12).unwrap();
        assert!((t - horizon).abs() <= 2.0 * opts.rtol * horizon.max(1.0), "f0 = {f0}: {t} vs {horizon}");
    }
}

#[test]
fn blow_up_estimate_converges() {
    let (exact, _) = ode::blow_up_time(5.0).unwrap();
    let err = |rtol: f64| {
        let sol = ode::integrate(FlowState::new(5.0, 5.0), 1.0, &OdeOptions::default().with_rtol(rtol)).unwrap();
        assert_eq!(sol.result.verdict, Verdict::BlowUp);
        (sol.result.blow_up_time.unwrap() - exact).abs()
    };
    let errs: Vec<f64> = [1e-8, 1e-9, 1e-10, 1e-11].into_iter().map(err).collect();
    for w in errs.windows(2) {
        assert!(w[0] >= 2.0 * w[1], "{errs:?}");
    }
}
