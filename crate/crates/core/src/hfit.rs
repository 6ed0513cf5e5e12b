//! Hard fronthaul transfer: uncached subfiles are sent as bits to the
//! selected eRRHs, which precode them locally.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::optim::{HybridOutcome, Optimizer, StageOutcome};
use crate::scenario::{HybridPrecoder, Scenario, Strategy};

pub use crate::optim::{build_analog_linearization, power_linearization, AnalogLinearization, DeltaLayout};
pub use crate::rates::fronthaul_load_hfit;

fn require_hfit(scenario: &Scenario<f64>) -> Result<()> {
    if scenario.strategy == Strategy::Hfit {
        Ok(())
    } else {
        Err(invalid("scenario was built for SFIT"))
    }
}

/// Digital stage over (G, R) with the analog stage fixed.
pub fn solve_digital_hfit(
    optimizer: &Optimizer,
    scenario: &Scenario<f64>,
    precoder: HybridPrecoder<f64>,
) -> Result<StageOutcome> {
    require_hfit(scenario)?;
    let start = optimizer.certify(scenario, precoder)?;
    let (c, trace) = optimizer.digital_stage(scenario, start)?;
    Ok(StageOutcome { precoder: c.precoder, allocation: c.allocation, trace })
}

/// Phase-increment stage with the digital blocks fixed.
pub fn solve_analog_hfit(
    optimizer: &Optimizer,
    scenario: &Scenario<f64>,
    precoder: HybridPrecoder<f64>,
) -> Result<StageOutcome> {
    require_hfit(scenario)?;
    let start = optimizer.certify(scenario, precoder)?;
    let (c, trace) = optimizer.analog_stage(scenario, start)?;
    Ok(StageOutcome { precoder: c.precoder, allocation: c.allocation, trace })
}

pub fn optimize_hybrid_hfit<R: Rng + ?Sized>(
    optimizer: &Optimizer,
    scenario: &Scenario<f64>,
    rng: &mut R,
) -> Result<HybridOutcome> {
    require_hfit(scenario)?;
    optimizer.optimize(scenario, rng)
}
