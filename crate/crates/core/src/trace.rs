//! Per-iteration optimizer records for convergence checks.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Init,
    Digital,
    Analog,
    Outer,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub stage: Stage,
    /// Certified R_min in bits/symbol.
    pub min_rate_bits: f64,
    pub status: String,
    /// max_i (p_i − P)⁺
    pub power_residual: f64,
    /// HFIT: max_i (load_i − C)⁺ in bits; SFIT: max_i (g_i − ln2·C)⁺ in nats.
    pub fronthaul_residual: f64,
    /// max_s (R_s − min(S̄, achievable))⁺ in bits.
    pub rate_residual: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
    /// Stopped on the tolerance rather than the iteration cap.
    pub converged: bool,
    /// Warnings raised along the way (jitter, floors, rejected steps, ...).
    pub flags: Vec<String>,
}

impl SolveTrace {
    pub fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    pub fn flag(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        if !self.flags.contains(&msg) {
            self.flags.push(msg);
        }
    }

    pub fn min_rate_history(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.min_rate_bits).collect()
    }

    pub fn last_min_rate(&self) -> Option<f64> {
        self.records.last().map(|r| r.min_rate_bits)
    }

    /// Non-decreasing up to `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.records.windows(2).all(|w| w[1].min_rate_bits >= w[0].min_rate_bits - slack)
    }

    /// Change over the final recorded step.
    pub fn final_delta(&self) -> f64 {
        match self.records.as_slice() {
            [.., a, b] => b.min_rate_bits - a.min_rate_bits,
            _ => 0.0,
        }
    }

    pub fn total_seconds(&self) -> f64 {
        self.records.iter().map(|r| r.seconds).sum()
    }

    /// CSV with columns `iteration,stage,min_rate_bits,status,power_residual,fronthaul_residual,rate_residual,seconds`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}
