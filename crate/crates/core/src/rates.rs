//! Delivery-rate allocation over requested subfiles.

use crate::conic::{ConicBackend, ConicProblem, LinExpr};
use crate::error::Result;
use crate::scenario::{Scenario, Strategy};

/// Per-stream delivery rates R_{f,l} and R_min, in bits/symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct RateAllocation {
    pub per_subfile: Vec<f64>,
    pub min_rate: f64,
}

impl RateAllocation {
    pub fn zero(streams: usize) -> Self {
        Self { per_subfile: vec![0.0; streams], min_rate: 0.0 }
    }

    /// R_min = min over requested files of Σ_l R_{f,l}.
    pub fn from_rates(scenario: &Scenario<f64>, per_subfile: Vec<f64>) -> Self {
        let min_rate = scenario
            .file_streams
            .iter()
            .map(|ids| ids.iter().map(|&s| per_subfile[s]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let min_rate = if min_rate.is_finite() { min_rate } else { 0.0 };
        Self { per_subfile, min_rate }
    }
}

/// Σ_s d_{s,i} R_s in bits/symbol.
pub fn fronthaul_load_hfit(scenario: &Scenario<f64>, rates: &RateAllocation, i: usize) -> f64 {
    (0..scenario.streams.len()).filter(|&s| scenario.transfer[s][i]).map(|s| rates.per_subfile[s]).sum()
}

/// Clamps rates into `[0, min(cap, S̄)]` and scales transferred rates down
/// until every HFIT fronthaul load fits.
pub fn make_feasible(scenario: &Scenario<f64>, caps_bits: &[f64], mut rates: Vec<f64>) -> RateAllocation {
    for (r, &cap) in rates.iter_mut().zip(caps_bits) {
        *r = r.clamp(0.0, cap.min(scenario.rate_cap).max(0.0));
    }
    if scenario.strategy == Strategy::Hfit {
        for i in 0..scenario.errhs() {
            let ids: Vec<usize> = (0..rates.len()).filter(|&s| scenario.transfer[s][i]).collect();
            let load: f64 = ids.iter().map(|&s| rates[s]).sum();
            if load > scenario.fronthaul {
                let scale = if load > 0.0 { scenario.fronthaul / load } else { 0.0 };
                for s in ids {
                    rates[s] *= scale;
                }
            }
        }
    }
    RateAllocation::from_rates(scenario, rates)
}

/// Max-min allocation given achievable per-stream caps (bits/symbol).
///
/// Solves the linear program exactly up to solver tolerance and then repairs
/// the result into exact feasibility. Falls back to the greedy repair alone if
/// the solver fails; the second value reports that.
pub fn allocate(
    scenario: &Scenario<f64>,
    caps_bits: &[f64],
    backend: &dyn ConicBackend,
    tolerance: f64,
) -> Result<(RateAllocation, bool)> {
    let n = scenario.streams.len();
    let upper: Vec<f64> = caps_bits.iter().map(|&c| c.min(scenario.rate_cap).max(0.0)).collect();
    let mut p = ConicProblem::new();
    let r = p.variable("R", n, 1);
    let rmin = p.scalar("R_min");
    p.maximize(LinExpr::var(rmin));
    for s in 0..n {
        p.nonneg(format!("R[{s}]>=0"), LinExpr::var(r.at(s, 0)));
        p.le(format!("R[{s}]<=cap"), &LinExpr::var(r.at(s, 0)), &LinExpr::constant(upper[s]));
    }
    for (f, ids) in scenario.file_streams.iter().enumerate() {
        let mut sum = LinExpr::default();
        for &s in ids {
            sum.push(r.at(s, 0), 1.0);
        }
        p.le(format!("R_min<=file[{f}]"), &LinExpr::var(rmin), &sum);
    }
    if scenario.strategy == Strategy::Hfit {
        for i in 0..scenario.errhs() {
            let mut load = LinExpr::default();
            for s in (0..n).filter(|&s| scenario.transfer[s][i]) {
                load.push(r.at(s, 0), 1.0);
            }
            if !load.terms.is_empty() {
                p.le(format!("fronthaul[{i}]"), &load, &LinExpr::constant(scenario.fronthaul));
            }
        }
    }
    let sol = backend.solve(&p, tolerance)?;
    if sol.status.usable() {
        let rates = (0..n).map(|s| sol.value(r.at(s, 0))).collect();
        Ok((make_feasible(scenario, &upper, rates), false))
    } else {
        Ok((make_feasible(scenario, &upper, upper.clone()), true))
    }
}
