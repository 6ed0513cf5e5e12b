//! Soft fronthaul transfer: the BBU precodes uncached subfiles and sends
//! quantized baseband signals, modeled by per-eRRH noise covariances Ω_i.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::linalg::{hermitian_inverse, hermitian_logdet, hermitize, is_zero, psd_factor, trace_re};
use crate::optim::{Certified, HybridOutcome, Optimizer, StageOutcome};
use crate::scalar::{CMat, Real};
use crate::scenario::{HybridPrecoder, Scenario, Strategy};

fn parts<T: Real>(precoder: &HybridPrecoder<T>) -> Result<(&Vec<Vec<CMat<T>>>, &Vec<CMat<T>>)> {
    match (&precoder.digital_bbu, &precoder.quant_cov) {
        (Some(u), Some(q)) => Ok((u, q)),
        _ => Err(crate::Error::InvalidState("SFIT quantities need BBU precoders and Ω".into())),
    }
}

/// Σ_i = Σ_uncached U Uᴴ + Ω_i, the point where the fronthaul bound is tight.
pub fn sigma_update<T: Real>(scenario: &Scenario<T>, precoder: &HybridPrecoder<T>, i: usize) -> Result<CMat<T>> {
    let (u, q) = parts(precoder)?;
    let mut sig = q[i].clone();
    for s in scenario.uncached(i) {
        sig += &u[s][i] * u[s][i].adjoint();
    }
    Ok(hermitize(&sig))
}

/// g_i = log det(Σ_uncached U Uᴴ + Ω_i) − log det Ω_i, in nats.
///
/// Zero when no uncached block carries signal, whatever Ω_i (including Ω_i = 0).
pub fn fronthaul_rate_sfit<T: Real>(scenario: &Scenario<T>, precoder: &HybridPrecoder<T>, i: usize) -> Result<T> {
    let (u, q) = parts(precoder)?;
    if scenario.uncached(i).all(|s| is_zero(&u[s][i])) {
        return Ok(T::zero());
    }
    Ok(hermitian_logdet(&sigma_update(scenario, precoder, i)?)? - hermitian_logdet(&q[i])?)
}

/// g̃_i = log det Σ − N_eRF − log det Ω + tr(Σ⁻¹(Σ_uncached U Uᴴ + Ω)).
pub fn surrogate_fronthaul<T: Real>(
    scenario: &Scenario<T>,
    precoder: &HybridPrecoder<T>,
    sigma: &CMat<T>,
    i: usize,
) -> Result<T> {
    let (_, q) = parts(precoder)?;
    let n = T::from_usize(sigma.nrows()).expect("dimension");
    let inner = sigma_update(scenario, precoder, i)?;
    Ok(hermitian_logdet(sigma)? - n - hermitian_logdet(&q[i])? + trace_re(&(hermitian_inverse(sigma)? * inner)))
}

/// Majorization anchors Σ_i and factors Ω̃_i (Ω_i = Ω̃_i Ω̃_iᴴ).
#[derive(Debug, Clone)]
pub struct SfitState<T: Real> {
    pub sigma: Vec<CMat<T>>,
    pub quant_factor: Vec<CMat<T>>,
}

impl<T: Real> SfitState<T> {
    pub fn anchored(scenario: &Scenario<T>, precoder: &HybridPrecoder<T>) -> Result<Self> {
        let (_, q) = parts(precoder)?;
        let sigma = (0..scenario.errhs()).map(|i| sigma_update(scenario, precoder, i)).collect::<Result<_>>()?;
        let quant_factor = q.iter().map(psd_factor).collect::<Result<_>>()?;
        Ok(Self { sigma, quant_factor })
    }
}

fn require_sfit(scenario: &Scenario<f64>) -> Result<()> {
    if scenario.strategy == Strategy::Sfit {
        Ok(())
    } else {
        Err(invalid("scenario was built for HFIT"))
    }
}

/// Digital stage over (G, U, Ω, R) with the analog stage fixed.
pub fn solve_digital_sfit(
    optimizer: &Optimizer,
    scenario: &Scenario<f64>,
    precoder: HybridPrecoder<f64>,
) -> Result<StageOutcome> {
    require_sfit(scenario)?;
    let start = optimizer.certify(scenario, precoder)?;
    let (c, trace) = optimizer.digital_stage(scenario, start)?;
    Ok(StageOutcome { precoder: c.precoder, allocation: c.allocation, trace })
}

/// Phase-increment stage with (G, U, Ω) fixed.
pub fn solve_analog_sfit(
    optimizer: &Optimizer,
    scenario: &Scenario<f64>,
    precoder: HybridPrecoder<f64>,
) -> Result<StageOutcome> {
    require_sfit(scenario)?;
    let start: Certified = optimizer.certify(scenario, precoder)?;
    let (c, trace) = optimizer.analog_stage(scenario, start)?;
    Ok(StageOutcome { precoder: c.precoder, allocation: c.allocation, trace })
}

pub fn optimize_hybrid_sfit<R: Rng + ?Sized>(
    optimizer: &Optimizer,
    scenario: &Scenario<f64>,
    rng: &mut R,
) -> Result<HybridOutcome> {
    require_sfit(scenario)?;
    optimizer.optimize(scenario, rng)
}
