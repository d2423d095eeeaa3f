//! Experiment configuration: one JSON file, one experiment per invocation.
//!
//! Every block is optional and falls back to the defaults below. The
//! resolved configuration (defaults filled in, `--seed` applied) is what gets
//! hashed and embedded in the outputs.

use std::path::Path;

use noisecrn::lyapunov::ScanRegion;
use noisecrn::{Aperture, ChainKind, LatticeState, PartitionParams, StoppingCondition};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// The aperture, either as a number or as an exact fraction string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ApertureSpec {
    Number(f64),
    Text(String),
}

impl ApertureSpec {
    pub fn resolve(&self) -> Result<Aperture, String> {
        match self {
            ApertureSpec::Number(v) => Aperture::from_f64(*v),
            ApertureSpec::Text(s) => Aperture::parse(s),
        }
        .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub p: ApertureSpec,
    pub eta0: f64,
    pub eta1: f64,
    pub beta: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self { p: ApertureSpec::Text("1/30".into()), eta0: 4.0, eta1: 60.0, beta: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub chain: ChainKind,
    pub x0: [u64; 2],
    pub stops: Vec<StoppingCondition>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { chain: ChainKind::X, x0: [5, 5], stops: vec![StoppingCondition::Time { t: 200.0 }] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub region: ScanRegion,
    pub r_lo: u64,
    pub r_hi: u64,
    pub gamma: f64,
    pub ordering: bool,
    /// Cap on the violations listed in the report; counts are always exact.
    pub max_listed: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { region: ScanRegion::OutsideInteriorCone, r_lo: 50, r_hi: 4000, gamma: 1.0, ordering: true, max_listed: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeConfig {
    pub x0: [f64; 2],
    pub horizon: f64,
    pub rtol: f64,
    pub atol: f64,
    pub magnitude_cap: f64,
    pub output_dt: Option<f64>,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self { x0: [5.0, 5.0], horizon: 1.0, rtol: 1e-8, atol: 1e-14, magnitude_cap: 1e12, output_dt: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingBlock {
    pub n: u64,
    pub d_n: i64,
    pub horizon: f64,
    pub replicas: u64,
    pub checkpoints: Option<Vec<f64>>,
}

impl Default for ScalingBlock {
    fn default() -> Self {
        Self { n: 10_000, d_n: 0, horizon: 1.0, replicas: 500, checkpoints: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoupleConfig {
    pub n: u64,
    pub horizon: f64,
    pub replicas: u64,
}

impl Default for CoupleConfig {
    fn default() -> Self {
        Self { n: 1_000, horizon: 1.0, replicas: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuConfig {
    pub d0: f64,
    /// Barrier; the partition's `eta1` when absent.
    pub eta1: Option<f64>,
    pub replicas: u64,
    pub dt: f64,
    pub max_time: f64,
}

impl Default for OuConfig {
    fn default() -> Self {
        Self { d0: 0.0, eta1: Some(5.0), replicas: 10_000, dt: 1e-3, max_time: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcursionsConfig {
    pub x0: [u64; 2],
    pub events: u64,
    pub lo: f64,
    pub hi: f64,
    /// Monte Carlo draws for the exponentiality p-value.
    pub sims: usize,
}

impl Default for ExcursionsConfig {
    fn default() -> Self {
        Self { x0: [5, 5], events: 10_000_000, lo: 50.0, hi: 200.0, sims: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub params: ParamsConfig,
    pub rate_constants: [f64; 5],
    pub seed: u64,
    pub simulate: SimulateConfig,
    pub verify: VerifyConfig,
    pub ode: OdeConfig,
    pub scaling: ScalingBlock,
    pub couple: CoupleConfig,
    pub ou: OuConfig,
    pub excursions: ExcursionsConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            params: ParamsConfig::default(),
            rate_constants: [1.0; 5],
            seed: 1,
            simulate: SimulateConfig::default(),
            verify: VerifyConfig::default(),
            ode: OdeConfig::default(),
            scaling: ScalingBlock::default(),
            couple: CoupleConfig::default(),
            ou: OuConfig::default(),
            excursions: ExcursionsConfig::default(),
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }

    /// Partition parameters after the domain and structural checks. The
    /// aperture bound `p < 1/29` is left to the experiments themselves.
    pub fn partition(&self) -> Result<PartitionParams, String> {
        let ParamsConfig { p, eta0, eta1, beta } = &self.params;
        let params = PartitionParams::new(p.resolve()?, *eta0, *eta1, *beta).map_err(|e| e.to_string())?;
        let broken: Vec<String> = params.violations().into_iter().filter(|v| !v.starts_with("p <")).collect();
        if !broken.is_empty() {
            return Err(format!("violated constraint(s): {}", broken.join("; ")));
        }
        if !self.rate_constants.iter().all(|k| k.is_finite() && *k > 0.0) {
            return Err(format!("rate_constants must be finite and positive, got {:?}", self.rate_constants));
        }
        Ok(params)
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn lattice(x: [u64; 2]) -> LatticeState {
    LatticeState::new(x[0], x[1])
}
