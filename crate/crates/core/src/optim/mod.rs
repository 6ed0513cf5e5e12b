//! Alternating hybrid-precoder optimization shared by HFIT and SFIT.
//!
//! Every accepted iterate is certified: per-eRRH blocks are scaled onto the
//! power budget, SFIT fronthaul rates are checked with the exact formula,
//! and R is re-allocated from exact achievable rates. The reported minimum
//! rate is therefore never a surrogate value.

pub(crate) mod analog;
pub(crate) mod digital;
mod driver;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub use analog::{build_analog_linearization, power_linearization, AnalogLinearization, DeltaLayout};
pub use driver::HybridOutcome;

use crate::config::SystemConfig;
use crate::conic::{ClarabelBackend, ConicBackend};
use crate::error::Result;
use crate::linalg::{clamp_psd, hermitize, identity, min_eigenvalue};
use crate::rates::{allocate, fronthaul_load_hfit, RateAllocation};
use crate::scalar::{CMat, RMat};
use crate::scenario::{AnalogPrecoder, HybridPrecoder, PrecoderMode, Scenario, Strategy};
use crate::trace::{SolveTrace, Stage, TraceRecord};
use crate::wmmse::{nats_to_bits, transmit_power, Link, Mode};
use num_complex::Complex64;

/// Ω floor relative to the power budget.
pub const OMEGA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSettings {
    /// ε on R_min, bits/symbol.
    pub tolerance: f64,
    pub inner_iters: usize,
    pub outer_iters: usize,
    pub backtrack_cap: usize,
    pub initial_radius: f64,
    pub shrink: f64,
    pub solver_tolerance: f64,
}

impl From<&SystemConfig> for OptimizerSettings {
    fn from(c: &SystemConfig) -> Self {
        Self {
            tolerance: c.tolerance,
            inner_iters: c.inner_iters,
            outer_iters: c.outer_iters,
            backtrack_cap: c.backtrack_cap,
            initial_radius: c.initial_radius,
            shrink: c.shrink,
            solver_tolerance: c.solver_tolerance,
        }
    }
}

/// Result of one digital or analog stage.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub precoder: HybridPrecoder<f64>,
    pub allocation: RateAllocation,
    pub trace: SolveTrace,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Residuals {
    pub power: f64,
    pub fronthaul: f64,
    pub rate: f64,
}

/// A certified iterate.
#[derive(Debug, Clone)]
pub struct Certified {
    pub precoder: HybridPrecoder<f64>,
    pub allocation: RateAllocation,
    /// Per-stream achievable rate caps, bits/symbol.
    pub caps: Vec<f64>,
    pub residuals: Residuals,
    pub flags: Vec<String>,
}

pub(crate) fn mode_of(scenario: &Scenario<f64>) -> Mode {
    match scenario.strategy {
        Strategy::Hfit => Mode::Hfit,
        Strategy::Sfit => Mode::Sfit,
    }
}

pub(crate) fn fronthaul_rate(scenario: &Scenario<f64>, precoder: &HybridPrecoder<f64>, i: usize) -> Result<f64> {
    crate::sfit::fronthaul_rate_sfit(scenario, precoder, i)
}

pub struct Optimizer {
    backend: Box<dyn ConicBackend>,
    pub settings: OptimizerSettings,
}

impl Optimizer {
    pub fn new(config: &SystemConfig) -> Self {
        Self::with_backend(config, Box::new(ClarabelBackend::default()))
    }

    pub fn with_backend(config: &SystemConfig, backend: Box<dyn ConicBackend>) -> Self {
        Self { backend, settings: OptimizerSettings::from(config) }
    }

    pub fn backend(&self) -> &dyn ConicBackend {
        self.backend.as_ref()
    }

    /// Random feasible starting point: uniform phases, Gaussian digital
    /// blocks scaled to 90% of the power budget and, for SFIT, Ω = ω₀I with
    /// BBU blocks shrunk until the fronthaul rate fits.
    pub fn initial_precoder<R: Rng + ?Sized>(&self, scenario: &Scenario<f64>, rng: &mut R) -> Result<HybridPrecoder<f64>> {
        let (nt, nrf, d, kr) = (scenario.tx_antennas, scenario.rf_chains, scenario.stream_dim, scenario.errhs());
        let analog = match scenario.mode {
            PrecoderMode::Hybrid => AnalogPrecoder::Phases(
                (0..kr)
                    .map(|_| RMat::from_fn(nt, nrf, |_, _| std::f64::consts::TAU * rng.gen::<f64>()))
                    .collect(),
            ),
            PrecoderMode::FullyDigital => AnalogPrecoder::Identity { antennas: nt, errhs: kr },
        };
        let mut pre = HybridPrecoder::zeros(scenario, analog);
        let gauss = |rng: &mut R| {
            CMat::from_fn(nrf, d, |_, _| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
        };
        let sfit = scenario.strategy == Strategy::Sfit;
        for s in 0..scenario.streams.len() {
            for i in 0..kr {
                if sfit && !scenario.cached[s][i] {
                    let block = gauss(rng);
                    if scenario.fronthaul > 0.0 {
                        pre.digital_bbu.as_mut().expect("SFIT")[s][i] = block;
                    }
                } else if scenario.active(s, i) {
                    pre.digital_err[s][i] = gauss(rng);
                }
            }
        }
        let p = scenario.power;
        let floor = OMEGA_FLOOR * p;
        for i in 0..kr {
            let f = pre.analog.matrix(i);
            let uses_fronthaul = digital::omega_is_decision(scenario, i);
            let signal_budget = if uses_fronthaul { 0.45 * p } else { 0.9 * p };
            let signal = transmit_power(scenario, &pre, i, Mode::Hfit)?;
            if signal > 0.0 {
                scale_errh(&mut pre, i, (signal_budget / signal).sqrt());
            }
            if sfit {
                let omega0 = if uses_fronthaul { (0.45 * p / f.norm_squared()).max(floor) } else { 0.0 };
                pre.quant_cov.as_mut().expect("SFIT")[i] = identity::<f64>(nrf) * Complex64::new(omega0, 0.0);
            }
        }
        Ok(pre)
    }

    /// Scales an iterate into exact feasibility and allocates rates from
    /// exact achievable rates.
    pub fn certify(&self, scenario: &Scenario<f64>, mut precoder: HybridPrecoder<f64>) -> Result<Certified> {
        let mut flags = Vec::new();
        let p = scenario.power;
        let kr = scenario.errhs();
        let mode = mode_of(scenario);
        if let Some(q) = precoder.quant_cov.as_mut() {
            let floor = OMEGA_FLOOR * p;
            for (i, om) in q.iter_mut().enumerate() {
                let h = hermitize(om);
                if !digital::omega_is_decision(scenario, i) {
                    om.fill(Complex64::new(0.0, 0.0));
                } else if min_eigenvalue(&h) < floor * (1.0 - 1e-9) {
                    flags.push("quantization covariance floored".to_string());
                    *om = clamp_psd(&h, floor);
                } else {
                    *om = h;
                }
            }
        }
        for i in 0..kr {
            let pi = transmit_power(scenario, &precoder, i, mode)?;
            if pi > p {
                scale_errh(&mut precoder, i, (p / pi).sqrt());
                if let Some(q) = precoder.quant_cov.as_mut() {
                    q[i] *= Complex64::new(p / pi, 0.0);
                }
            }
        }
        if scenario.strategy == Strategy::Sfit {
            let limit = std::f64::consts::LN_2 * scenario.fronthaul;
            for i in 0..kr {
                if fronthaul_rate(scenario, &precoder, i)? > limit {
                    let orig: Vec<CMat<f64>> =
                        precoder.digital_bbu.as_ref().expect("SFIT").iter().map(|row| row[i].clone()).collect();
                    let set = |pre: &mut HybridPrecoder<f64>, beta: f64| {
                        for (s, block) in orig.iter().enumerate() {
                            pre.digital_bbu.as_mut().expect("SFIT")[s][i] = block * Complex64::new(beta, 0.0);
                        }
                    };
                    let (mut lo, mut hi) = (0.0, 1.0);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        set(&mut precoder, mid);
                        if fronthaul_rate(scenario, &precoder, i)? <= limit {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    set(&mut precoder, lo);
                    flags.push("BBU precoder scaled onto the exact fronthaul rate".to_string());
                }
            }
        }
        let link = Link::from_precoder(scenario, &precoder, mode)?;
        let mut caps = Vec::with_capacity(scenario.streams.len());
        for st in &scenario.streams {
            let s = caps.len();
            let mut cap = f64::INFINITY;
            for &k in &st.requesters {
                cap = cap.min(nats_to_bits(link.rate(k, s)?.max(0.0)));
            }
            caps.push(cap);
        }
        let (allocation, fallback) = allocate(scenario, &caps, self.backend(), self.settings.solver_tolerance)?;
        if fallback {
            flags.push("rate allocation fell back to greedy repair".to_string());
        }
        let residuals = residuals(scenario, &precoder, &allocation, &caps)?;
        Ok(Certified { precoder, allocation, caps, residuals, flags })
    }

    pub(crate) fn record(&self, stage: Stage, iteration: usize, c: &Certified, status: &str, seconds: f64) -> TraceRecord {
        TraceRecord {
            iteration,
            stage,
            min_rate_bits: c.allocation.min_rate,
            status: status.to_string(),
            power_residual: c.residuals.power,
            fronthaul_residual: c.residuals.fronthaul,
            rate_residual: c.residuals.rate,
            seconds,
        }
    }
}

/// Multiplies every digital block of eRRH `i` by `factor`.
pub(crate) fn scale_errh(precoder: &mut HybridPrecoder<f64>, i: usize, factor: f64) {
    let z = Complex64::new(factor, 0.0);
    for row in precoder.digital_err.iter_mut() {
        row[i] *= z;
    }
    if let Some(u) = precoder.digital_bbu.as_mut() {
        for row in u.iter_mut() {
            row[i] *= z;
        }
    }
}

/// Constraint violations of a precoder and allocation, evaluated exactly.
pub fn residuals(
    scenario: &Scenario<f64>,
    precoder: &HybridPrecoder<f64>,
    allocation: &RateAllocation,
    caps: &[f64],
) -> Result<Residuals> {
    let mode = mode_of(scenario);
    let mut out = Residuals::default();
    for i in 0..scenario.errhs() {
        out.power = out.power.max(transmit_power(scenario, precoder, i, mode)? - scenario.power);
        let fh = match scenario.strategy {
            Strategy::Hfit => fronthaul_load_hfit(scenario, allocation, i) - scenario.fronthaul,
            Strategy::Sfit => fronthaul_rate(scenario, precoder, i)? - std::f64::consts::LN_2 * scenario.fronthaul,
        };
        out.fronthaul = out.fronthaul.max(fh);
    }
    for (s, &r) in allocation.per_subfile.iter().enumerate() {
        out.rate = out.rate.max(r - caps[s].min(scenario.rate_cap));
    }
    Ok(out)
}
