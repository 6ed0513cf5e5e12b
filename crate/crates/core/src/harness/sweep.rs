//! Parameter sweeps with common random numbers.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trial::{draw_instance, run_on_instance, Variant};
use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Swept configuration parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// C, bits/symbol
    Fronthaul,
    /// S, bits/symbol
    FileSize,
    /// P, dB
    Power,
    /// ξ
    CacheFraction,
    /// N_F
    Cooperation,
}

impl Axis {
    pub fn key(self) -> &'static str {
        match self {
            Self::Fronthaul => "fronthaul",
            Self::FileSize => "file_size",
            Self::Power => "power_db",
            Self::CacheFraction => "cache_fraction",
            Self::Cooperation => "cooperation",
        }
    }

    /// Axis label with units.
    pub fn label(self) -> &'static str {
        match self {
            Self::Fronthaul => "fronthaul capacity C (bits/symbol)",
            Self::FileSize => "normalized file size S (bits/symbol)",
            Self::Power => "transmit power P (dB)",
            Self::CacheFraction => "fractional cache capacity",
            Self::Cooperation => "cooperating eRRHs N_F",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "C" | "fronthaul" => Self::Fronthaul,
            "S" | "file_size" => Self::FileSize,
            "P" | "power" | "power_db" => Self::Power,
            "xi" | "ξ" | "cache_fraction" => Self::CacheFraction,
            "N_F" | "NF" | "cooperation" => Self::Cooperation,
            other => return Err(Error::Config(format!("unknown sweep axis `{other}`"))),
        })
    }
}

/// One trial of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSample {
    pub axis_value: f64,
    pub variant: String,
    pub trial: u64,
    pub min_rate: f64,
    pub wall_time: f64,
    pub failed: bool,
    pub invariant_violations: Vec<String>,
}

/// One CSV row: statistics of a variant at a grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub variant: String,
    pub mean_min_rate_bits: f64,
    pub stderr: f64,
    pub n_trials: usize,
    pub mean_wall_time_s: f64,
    pub infeasible_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: Axis,
    pub rows: Vec<SweepRow>,
    /// Per-trial results in (grid, variant, trial) order; empty when the
    /// table was read back from CSV.
    pub samples: Vec<SweepSample>,
}

impl SweepTable {
    /// Distinct variant labels in first-appearance order.
    pub fn variants(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.variant) {
                out.push(r.variant.clone());
            }
        }
        out
    }

    pub fn row(&self, axis_value: f64, variant: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.axis_value == axis_value && r.variant == variant)
    }

    /// Per-trial min rates of `variant` across the grid, indexed `[trial][grid]`.
    pub fn per_trial(&self, variant: &str) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for s in self.samples.iter().filter(|s| s.variant == variant) {
            let t = s.trial as usize;
            if out.len() <= t {
                out.resize(t + 1, Vec::new());
            }
            out[t].push(s.min_rate);
        }
        out
    }

    pub fn invariant_violations(&self) -> Vec<String> {
        self.samples
            .iter()
            .flat_map(|s| {
                s.invariant_violations
                    .iter()
                    .map(move |v| format!("{}={} {} trial {}: {v}", self.axis, s.axis_value, s.variant, s.trial))
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path, axis: Axis) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let rows = r.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>()?;
        Ok(Self { axis, rows, samples: Vec::new() })
    }
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Configuration of `variant` at grid point `value`.
pub fn point_config(config: &SystemConfig, axis: Axis, value: f64, variant: &Variant) -> Result<SystemConfig> {
    let mut c = variant.apply(config)?;
    c.set(axis.key(), &value.to_string())?;
    c.validate()?;
    Ok(c)
}

/// Runs `config.realizations` trials of every variant at every grid point.
/// Trial `t` draws its channel, cache and requests from the same seeded
/// streams at every grid point and for every variant. Failed trials count as
/// rate zero and are tallied in `infeasible_count`.
pub fn sweep(config: &SystemConfig, axis: Axis, grid: &[f64], variants: &[Variant]) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("sweep grid is empty".into()));
    }
    if variants.is_empty() {
        return Err(Error::InvalidArgument("no variants to sweep".into()));
    }
    let mut jobs = Vec::new();
    for &value in grid {
        for v in variants {
            let cfg = point_config(config, axis, value, v)?;
            for t in 0..config.realizations as u64 {
                jobs.push((value, v, cfg.clone(), t));
            }
        }
    }
    let samples = jobs
        .par_iter()
        .map(|(value, v, cfg, t)| -> Result<SweepSample> {
            let instance = draw_instance(cfg, cfg.seed, *t)?;
            let r = run_on_instance(cfg, &instance, v.strategy, v.mode, cfg.seed, *t)?;
            log::debug!("{axis}={value} {} trial {t}: {:.4} bits in {:.2}s", v.label, r.min_rate, r.wall_time);
            Ok(SweepSample {
                axis_value: *value,
                variant: v.label.clone(),
                trial: *t,
                min_rate: r.min_rate,
                wall_time: r.wall_time,
                failed: r.infeasible(),
                invariant_violations: r.invariant_violations(cfg),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = config.realizations;
    let rows = samples
        .chunks(n.max(1))
        .filter(|c| !c.is_empty())
        .map(|chunk| {
            let rates: Vec<f64> = chunk.iter().map(|s| s.min_rate).collect();
            let (mean, stderr) = mean_and_stderr(&rates);
            SweepRow {
                axis_value: chunk[0].axis_value,
                variant: chunk[0].variant.clone(),
                mean_min_rate_bits: mean,
                stderr,
                n_trials: chunk.len(),
                mean_wall_time_s: chunk.iter().map(|s| s.wall_time).sum::<f64>() / chunk.len() as f64,
                infeasible_count: chunk.iter().filter(|s| s.failed).count(),
            }
        })
        .collect();
    Ok(SweepTable { axis, rows, samples })
}
