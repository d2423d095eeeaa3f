use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use noisecrn::limits::{self, ScalingConfig};
use noisecrn::lyapunov::{verify_drift_region, verify_interface_ordering};
use noisecrn::ode::{self, FlowState, OdeOptions};
use noisecrn::simulate::{self, coupling_experiment, ExcursionScanner, Simulator, Step, Stops, TrajectoryMeta};
use noisecrn::{stats, PartitionParams, ReactionSystem, RngStream};
use serde::Serialize;

use crate::config::{lattice, Config};

pub enum Failure {
    /// Bad flags or configuration.
    Usage(String),
    /// The experiment ran and failed, or the library refused the input.
    Experiment(String),
}

impl From<noisecrn::Error> for Failure {
    fn from(e: noisecrn::Error) -> Self {
        Failure::Experiment(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Experiment(format!("i/o error: {e}"))
    }
}

/// Resolved configuration plus where outputs go.
pub struct Context {
    pub config: Config,
    pub params: PartitionParams,
    pub sha: String,
    pub out: PathBuf,
    pub written: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config_sha256: &'a str,
    config: &'a Config,
    report: &'a T,
}

impl Context {
    pub fn new(config: Config, out: PathBuf) -> Result<Self, Failure> {
        let params = config.partition().map_err(Failure::Usage)?;
        let sha = config.sha256();
        std::fs::create_dir_all(&out).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", out.display())))?;
        Ok(Self { config, params, sha, out, written: Vec::new() })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.out.join(name);
        let file = File::create(&path)?;
        self.written.push(path);
        Ok(BufWriter::new(file))
    }

    fn preamble(&self) -> Vec<String> {
        vec![format!("config_sha256={}", self.sha)]
    }

    fn write_json<T: Serialize>(&mut self, name: &str, report: &T) -> Result<(), Failure> {
        let mut w = self.create(name)?;
        let envelope = Envelope { config_sha256: &self.sha, config: &self.config, report };
        serde_json::to_writer_pretty(&mut w, &envelope).map_err(|e| Failure::Experiment(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// CSV with the provenance comment line, then `header`, then `rows`.
    fn write_csv<I>(&mut self, name: &str, header: &str, rows: I) -> Result<(), Failure>
    where
        I: IntoIterator<Item = String>,
    {
        let lines = self.preamble();
        let mut w = self.create(name)?;
        for line in lines {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "{header}")?;
        for row in rows {
            writeln!(w, "{row}")?;
        }
        w.flush()?;
        Ok(())
    }

    fn system(&self, chain: noisecrn::ChainKind) -> Result<ReactionSystem, Failure> {
        let mut constants = [1.0; 5];
        constants[..chain.reaction_count()].copy_from_slice(&self.config.rate_constants[..chain.reaction_count()]);
        Ok(ReactionSystem::new(chain).with_rate_constants(constants)?)
    }
}

pub fn simulate(ctx: &mut Context) -> Result<(), Failure> {
    let cfg = ctx.config.simulate.clone();
    let system = ctx.system(cfg.chain)?;
    let stops = Stops::new(&cfg.stops, ctx.params)?;
    if stops.time_budget().is_none() && stops.event_budget().is_none() {
        return Err(Failure::Usage("simulate needs a time or events budget among its stops".into()));
    }
    let stream = RngStream::new(ctx.config.seed, 0);
    let traj = simulate::run(system, lattice(cfg.x0), &stops, stream.rng())?;
    let preamble = ctx.preamble();
    let mut w = ctx.create("trajectory.csv")?;
    traj.write_csv(&mut w, &preamble)?;
    w.flush()?;
    ctx.write_json("trajectory.json", &TrajectoryMeta::of(&traj, stream.seed, stream.index))
}

#[derive(Serialize)]
struct VerifyOutput {
    drift: noisecrn::DriftReport,
    ordering: Option<noisecrn::lyapunov::OrderingReport>,
}

pub fn verify(ctx: &mut Context) -> Result<(), Failure> {
    let cfg = ctx.config.verify.clone();
    if cfg.r_lo > cfg.r_hi || !(cfg.gamma > 0.0) {
        return Err(Failure::Usage(format!("need r_lo <= r_hi and gamma > 0, got [{}, {}] and {}", cfg.r_lo, cfg.r_hi, cfg.gamma)));
    }
    let mut drift = verify_drift_region(cfg.region, cfg.r_lo, cfg.r_hi, cfg.gamma, &ctx.params);
    drift.truncate_violations(cfg.max_listed);
    let ordering = cfg.ordering.then(|| {
        let mut r = verify_interface_ordering(cfg.r_lo, cfg.r_hi, &ctx.params);
        r.violations.truncate(cfg.max_listed);
        r
    });
    let mut problems = Vec::new();
    if drift.certified_min_radius.is_none() {
        problems.push(format!("drift violations persist at the top of the window (r = {})", cfg.r_hi));
    }
    if let Some(o) = &ordering {
        if o.certified_min_radius.is_none() {
            problems.push(format!("interface ordering fails at the top of the window (r = {})", cfg.r_hi));
        }
    }
    ctx.write_json("verify.json", &VerifyOutput { drift, ordering })?;
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::Experiment(format!("certification failed: {}", problems.join("; "))))
    }
}

pub fn ode(ctx: &mut Context) -> Result<(), Failure> {
    let cfg = ctx.config.ode.clone();
    let opts = OdeOptions {
        rtol: cfg.rtol,
        atol: cfg.atol,
        magnitude_cap: cfg.magnitude_cap,
        output_dt: cfg.output_dt,
        ..OdeOptions::default()
    };
    let sol = ode::integrate(FlowState::new(cfg.x0[0], cfg.x0[1]), cfg.horizon, &opts)?;
    let preamble = ctx.preamble();
    let mut w = ctx.create("ode_path.csv")?;
    sol.write_csv(&mut w, &preamble)?;
    w.flush()?;
    #[derive(Serialize)]
    struct OdeOutput<'a> {
        result: &'a ode::BlowUpResult,
        accepted_steps: u64,
        rejected_steps: u64,
    }
    ctx.write_json(
        "ode.json",
        &OdeOutput { result: &sol.result, accepted_steps: sol.accepted_steps as u64, rejected_steps: sol.rejected_steps as u64 },
    )
}

pub fn scaling(ctx: &mut Context) -> Result<(), Failure> {
    let b = ctx.config.scaling.clone();
    let mut cfg = ScalingConfig::new(b.n, b.d_n, b.horizon, b.replicas, ctx.params.eta1);
    if let Some(c) = b.checkpoints {
        cfg.checkpoints = c;
    }
    let report = limits::scaling_experiment(&cfg, ctx.config.seed)?;
    let rows: Vec<String> = report
        .checkpoints
        .iter()
        .map(|c| format!("{},{},{},{},{},{},{}", c.t, c.mean, c.mean_se, c.variance, c.variance_se, c.ou_mean, c.ou_variance))
        .collect();
    ctx.write_csv("scaling_checkpoints.csv", "t,mean,mean_se,variance,variance_se,ou_mean,ou_variance", rows)?;
    ctx.write_json("scaling.json", &report)
}

pub fn couple(ctx: &mut Context) -> Result<(), Failure> {
    let cfg = ctx.config.couple.clone();
    let report = coupling_experiment(cfg.n, cfg.horizon, cfg.replicas, ctx.config.seed, &ctx.params)?;
    let rows: Vec<String> = report.sup_distances.iter().enumerate().map(|(i, d)| format!("{i},{d}")).collect();
    ctx.write_csv("coupling_distances.csv", "replica,sup_distance", rows)?;
    ctx.write_json("coupling.json", &report)
}

pub fn ou(ctx: &mut Context) -> Result<(), Failure> {
    let cfg = ctx.config.ou.clone();
    let eta1 = cfg.eta1.unwrap_or(ctx.params.eta1);
    let report = limits::ou_hitting_mc(cfg.d0, eta1, cfg.replicas, cfg.dt, cfg.max_time, ctx.config.seed)?;
    if report.bias_warning {
        eprintln!("warning: {} of {} paths censored at t = {}; tail estimates are biased", report.censored, report.replicas, cfg.max_time);
    }
    let rows: Vec<String> = report
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| match s {
            Some(t) => format!("{i},{t},false"),
            None => format!("{i},{},true", cfg.max_time),
        })
        .collect();
    ctx.write_csv("ou_hitting_times.csv", "replica,tau,censored", rows)?;
    #[derive(Serialize)]
    struct OuOutput<'a> {
        d0: f64,
        eta1: f64,
        dt: f64,
        max_time: f64,
        replicas: u64,
        censored: u64,
        exp_moment: f64,
        exp_moment_se: f64,
        exp_moment_bound: f64,
        c_tau: f64,
        k0: f64,
        bias_warning: bool,
        tail: &'a [TailPoint],
    }
    #[derive(Serialize)]
    struct TailPoint {
        s: f64,
        survival: f64,
        se: f64,
        bound: f64,
    }
    let tail: Vec<TailPoint> = (1..=40)
        .map(|k| {
            let s = 0.1 * k as f64;
            let (survival, se) = report.survival(s);
            TailPoint { s, survival, se, bound: limits::hitting_tail_bound(s, eta1) }
        })
        .collect();
    let out = OuOutput {
        d0: report.d0,
        eta1,
        dt: report.dt,
        max_time: report.max_time,
        replicas: report.replicas,
        censored: report.censored,
        exp_moment: report.exp_moment,
        exp_moment_se: report.exp_moment_se,
        exp_moment_bound: report.exp_moment_bound,
        c_tau: limits::c_tau(),
        k0: limits::k0(),
        bias_warning: report.bias_warning,
        tail: &tail,
    };
    ctx.write_json("ou.json", &out)
}

pub fn excursions(ctx: &mut Context) -> Result<(), Failure> {
    let cfg = ctx.config.excursions.clone();
    let stream = RngStream::new(ctx.config.seed, 0);
    let mut sim = Simulator::new(ctx.system(noisecrn::ChainKind::X)?, lattice(cfg.x0), stream.rng())?;
    let mut scanner = ExcursionScanner::new(cfg.lo, cfg.hi)?;
    let mut found = Vec::new();
    for _ in 0..cfg.events {
        match sim.step(None)? {
            Step::Jump(e) => found.extend(scanner.observe(e.t, e.state.norm1())),
            Step::Horizon | Step::Absorbed => break,
        }
    }
    found.extend(scanner.finish(sim.time()));
    let closed: Vec<_> = found.iter().filter(|e| !e.truncated).cloned().collect();
    let gaps = simulate::interarrival_times(&closed);
    let test = (gaps.len() >= 2).then(|| stats::lilliefors_exponential(&gaps, cfg.sims, &mut stream.fork(1).rng()));
    let rows: Vec<String> =
        found.iter().map(|e| format!("{},{},{},{},{}", e.start, e.end, e.peak, e.duration, e.truncated)).collect();
    ctx.write_csv("excursions.csv", "start,end,peak,duration,truncated", rows)?;
    #[derive(Serialize)]
    struct ExcursionOutput {
        events: u64,
        final_time: f64,
        excursions: usize,
        mean_interarrival: Option<f64>,
        exponential_ks_statistic: Option<f64>,
        exponential_p_value: Option<f64>,
    }
    let out = ExcursionOutput {
        events: sim.events(),
        final_time: sim.time(),
        excursions: found.len(),
        mean_interarrival: (!gaps.is_empty()).then(|| stats::mean(&gaps)),
        exponential_ks_statistic: test.map(|t| t.statistic),
        exponential_p_value: test.map(|t| t.p_value),
    };
    ctx.write_json("excursions.json", &out)
}

pub fn written(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join("\n")
}

pub fn default_out() -> &'static Path {
    Path::new(".")
}
