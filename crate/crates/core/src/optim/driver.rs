use std::time::Instant;

use rand::Rng;

use super::{Certified, Optimizer};
use crate::error::Result;
use crate::scenario::{HybridPrecoder, PrecoderMode, Scenario};
use crate::trace::{SolveTrace, Stage};

/// Final point of the alternating driver with all traces.
#[derive(Debug, Clone)]
pub struct HybridOutcome {
    pub result: Certified,
    /// One record per outer round.
    pub outer: SolveTrace,
    /// Digital and analog stage traces in execution order.
    pub inner: Vec<SolveTrace>,
}

impl HybridOutcome {
    pub fn min_rate(&self) -> f64 {
        self.result.allocation.min_rate
    }

    pub fn all_monotone(&self, slack: f64) -> bool {
        self.outer.is_monotone(slack) && self.inner.iter().all(|t| t.is_monotone(slack))
    }
}

impl Optimizer {
    pub fn optimize<R: Rng + ?Sized>(&self, scenario: &Scenario<f64>, rng: &mut R) -> Result<HybridOutcome> {
        let init = self.initial_precoder(scenario, rng)?;
        self.optimize_from(scenario, init)
    }

    /// Alternates digital and analog stages from `init` until the certified
    /// R_min moves by at most the tolerance over a round.
    pub fn optimize_from(&self, scenario: &Scenario<f64>, init: HybridPrecoder<f64>) -> Result<HybridOutcome> {
        let mut current = self.certify(scenario, init)?;
        let mut outer = SolveTrace::default();
        let mut inner = Vec::new();
        outer.push(self.record(Stage::Init, 0, &current, "start", 0.0));
        for f in &current.flags {
            outer.flag(f.clone());
        }
        for round in 1..=self.settings.outer_iters {
            let clock = Instant::now();
            let before = current.allocation.min_rate;
            let (next, trace) = self.digital_stage(scenario, current)?;
            current = next;
            inner.push(trace);
            if scenario.mode == PrecoderMode::Hybrid {
                let (next, trace) = self.analog_stage(scenario, current)?;
                current = next;
                inner.push(trace);
            }
            outer.push(self.record(Stage::Outer, round, &current, "round", clock.elapsed().as_secs_f64()));
            if (current.allocation.min_rate - before).abs() <= self.settings.tolerance {
                outer.converged = true;
                break;
            }
        }
        Ok(HybridOutcome { result: current, outer, inner })
    }
}
