//! One seeded Monte-Carlo trial.

use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cache::{hfit_transfer_plan, random_cache_placement, sample_requests, CacheState, RequestProfile};
use crate::channel::{generate_channel, sample_geometry, NetworkChannel};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::optim::{HybridOutcome, Optimizer, Residuals};
use crate::scenario::{PrecoderMode, Scenario, Strategy};
use crate::trace::SolveTrace;

/// Independent random streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StreamId {
    Geometry = 0,
    Cache = 1,
    Requests = 2,
    Init = 3,
}

fn trial_rng(seed: u64, trial: u64, stream: StreamId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream as u64);
    rng
}

/// Random draws shared by every variant of a trial.
#[derive(Debug, Clone)]
pub struct Instance {
    pub channel: NetworkChannel<f64>,
    pub cache: CacheState,
    pub requests: RequestProfile,
}

pub fn draw_instance(config: &SystemConfig, seed: u64, trial: u64) -> Result<Instance> {
    let geometry = sample_geometry(config, &mut trial_rng(seed, trial, StreamId::Geometry));
    let channel = generate_channel(config, &geometry)?;
    let cache = random_cache_placement(config, &mut trial_rng(seed, trial, StreamId::Cache))?;
    let requests = sample_requests(config, &mut trial_rng(seed, trial, StreamId::Requests));
    Ok(Instance { channel, cache, requests })
}

pub fn build_scenario(
    config: &SystemConfig,
    instance: &Instance,
    strategy: Strategy,
    mode: PrecoderMode,
) -> Result<Scenario<f64>> {
    let plan = match strategy {
        Strategy::Hfit => Some(hfit_transfer_plan(
            &instance.channel,
            &instance.cache,
            &instance.requests,
            config.cooperation,
            config.transfer_rule,
        )?),
        Strategy::Sfit => None,
    };
    Scenario::new(config, instance.channel.clone(), &instance.cache, &instance.requests, plan.as_ref(), strategy, mode)
}

/// A named (strategy, mode, overrides) combination, written
/// `mode-strategy[:key=value,...]`, e.g. `hybrid-hfit:cooperation=0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub label: String,
    pub strategy: Strategy,
    pub mode: PrecoderMode,
    pub overrides: Vec<String>,
}

impl Variant {
    pub fn apply(&self, config: &SystemConfig) -> Result<SystemConfig> {
        let mut c = config.clone();
        for o in &self.overrides {
            c.apply_override(o)?;
        }
        c.validate()?;
        Ok(c)
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (head, tail) = text.split_once(':').unwrap_or((text, ""));
        let (mode, strategy) = match head.trim() {
            "hybrid-hfit" => (PrecoderMode::Hybrid, Strategy::Hfit),
            "hybrid-sfit" => (PrecoderMode::Hybrid, Strategy::Sfit),
            "digital-hfit" => (PrecoderMode::FullyDigital, Strategy::Hfit),
            "digital-sfit" => (PrecoderMode::FullyDigital, Strategy::Sfit),
            other => return Err(Error::Config(format!("unknown variant `{other}`"))),
        };
        let overrides = tail.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
        Ok(Self { label: text.trim().to_string(), strategy, mode, overrides })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub strategy: Strategy,
    pub precoder_mode: PrecoderMode,
    pub seed: u64,
    pub trial: u64,
    /// Certified R_min in bits/symbol; zero when the optimizer failed.
    pub min_rate: f64,
    pub wall_time: f64,
    /// Error message if the optimizer failed.
    pub failure: Option<String>,
    #[serde(skip)]
    pub outcome: Option<HybridOutcome>,
}

impl TrialResult {
    pub fn trace(&self) -> Option<&SolveTrace> {
        self.outcome.as_ref().map(|o| &o.outer)
    }

    pub fn residuals(&self) -> Option<Residuals> {
        self.outcome.as_ref().map(|o| o.result.residuals)
    }

    pub fn infeasible(&self) -> bool {
        self.failure.is_some()
    }

    /// Checks the reported solution against every constraint and the
    /// monotonicity contract.
    pub fn invariant_violations(&self, config: &SystemConfig) -> Vec<String> {
        let mut out = Vec::new();
        let Some(o) = &self.outcome else { return out };
        let r = o.result.residuals;
        let p = config.power_linear();
        if r.power > 1e-6 * p {
            out.push(format!("power residual {:.3e}", r.power));
        }
        let fh_tol = match self.strategy {
            Strategy::Hfit => 1e-6 * config.fronthaul,
            Strategy::Sfit => 1e-6,
        };
        if r.fronthaul > fh_tol {
            out.push(format!("fronthaul residual {:.3e}", r.fronthaul));
        }
        if r.rate > 1e-9 {
            out.push(format!("rate residual {:.3e}", r.rate));
        }
        if o.result.precoder.modulus_error() > 1e-12 {
            out.push("analog entries off the unit circle".into());
        }
        if !o.all_monotone(1e-7) {
            out.push("non-monotone trace".into());
        }
        if self.min_rate < 0.0 || self.min_rate > config.file_size + 1e-9 {
            out.push(format!("min rate {} outside [0, S]", self.min_rate));
        }
        out
    }
}

pub fn run_trial(config: &SystemConfig, strategy: Strategy, mode: PrecoderMode, seed: u64, trial: u64) -> Result<TrialResult> {
    let instance = draw_instance(config, seed, trial)?;
    run_on_instance(config, &instance, strategy, mode, seed, trial)
}

/// Runs one variant on pre-drawn randomness; optimizer errors are recorded,
/// not propagated.
pub fn run_on_instance(
    config: &SystemConfig,
    instance: &Instance,
    strategy: Strategy,
    mode: PrecoderMode,
    seed: u64,
    trial: u64,
) -> Result<TrialResult> {
    let scenario = build_scenario(config, instance, strategy, mode)?;
    let optimizer = Optimizer::new(config);
    let clock = Instant::now();
    let outcome = optimizer.optimize(&scenario, &mut trial_rng(seed, trial, StreamId::Init));
    let wall_time = clock.elapsed().as_secs_f64();
    Ok(match outcome {
        Ok(o) => TrialResult {
            strategy,
            precoder_mode: mode,
            seed,
            trial,
            min_rate: o.min_rate(),
            wall_time,
            failure: None,
            outcome: Some(o),
        },
        Err(e @ (Error::Infeasible { .. } | Error::Conditioning(_) | Error::Solver { .. })) => TrialResult {
            strategy,
            precoder_mode: mode,
            seed,
            trial,
            min_rate: 0.0,
            wall_time,
            failure: Some(e.to_string()),
            outcome: None,
        },
        Err(e) => return Err(e),
    })
}
