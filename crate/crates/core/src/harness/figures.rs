//! Canned experiment sets: convergence traces and the rate-versus-C, S and
//! P sweeps.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::plots::{emit_plots, render_curves, Curve};
use super::sweep::{sweep, Axis};
use super::trial::{run_trial, Variant};
use crate::config::SystemConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum FigureKind {
    /// Outer R_min trajectories of single trials.
    Convergence { variants: Vec<&'static str>, trials: u64 },
    Sweep { axis: Axis, grid: Vec<f64>, variants: Vec<&'static str> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub name: &'static str,
    /// `key=value` settings applied on top of the base config.
    pub overrides: Vec<&'static str>,
    pub kind: FigureKind,
}

impl Figure {
    pub fn config(&self, base: &SystemConfig) -> Result<SystemConfig> {
        let mut c = base.clone();
        for o in &self.overrides {
            c.apply_override(o)?;
        }
        c.validate()?;
        Ok(c)
    }
}

fn grid(lo: f64, step: f64, hi: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| lo + step * k as f64).collect()
}

/// Every canned set, in presentation order.
pub fn canned() -> Vec<Figure> {
    let fronthaul_variants = vec![
        "hybrid-hfit",
        "hybrid-hfit:cooperation=1",
        "hybrid-hfit:cooperation=0",
        "hybrid-sfit",
        "hybrid-hfit:cache_fraction=1",
        "hybrid-sfit:cache_fraction=1",
    ];
    let c_grid = grid(0.0, 2.5, 20.0);
    vec![
        Figure {
            name: "convergence",
            overrides: vec!["errh_rf_chains=1", "user_rf_chains=1", "subfiles=1", "file_size=10", "power_db=20", "fronthaul=2.5"],
            kind: FigureKind::Convergence { variants: vec!["hybrid-hfit", "hybrid-sfit"], trials: 4 },
        },
        Figure {
            name: "rate-vs-fronthaul-2rf",
            overrides: vec!["errh_rf_chains=2", "user_rf_chains=2", "file_size=10", "power_db=20", "users=3"],
            kind: FigureKind::Sweep { axis: Axis::Fronthaul, grid: c_grid.clone(), variants: fronthaul_variants.clone() },
        },
        Figure {
            name: "rate-vs-fronthaul-4rf",
            overrides: vec!["errh_rf_chains=4", "user_rf_chains=4", "file_size=20", "power_db=20", "users=3"],
            kind: FigureKind::Sweep { axis: Axis::Fronthaul, grid: c_grid.clone(), variants: fronthaul_variants.clone() },
        },
        Figure {
            name: "rate-vs-fronthaul-8users",
            overrides: vec!["errh_rf_chains=4", "user_rf_chains=4", "file_size=10", "power_db=20", "users=8", "files=10"],
            kind: FigureKind::Sweep { axis: Axis::Fronthaul, grid: c_grid, variants: fronthaul_variants },
        },
        Figure {
            name: "rate-vs-file-size",
            overrides: vec!["power_db=20", "fronthaul=5"],
            kind: FigureKind::Sweep {
                axis: Axis::FileSize,
                grid: grid(2.0, 2.0, 20.0),
                variants: vec![
                    "hybrid-hfit",
                    "hybrid-sfit",
                    "digital-hfit",
                    "digital-sfit",
                    "hybrid-hfit:cache_fraction=0.25",
                    "hybrid-sfit:cache_fraction=0.25",
                ],
            },
        },
        Figure {
            name: "rate-vs-power",
            overrides: vec![],
            kind: FigureKind::Sweep {
                axis: Axis::Power,
                grid: grid(0.0, 5.0, 30.0),
                variants: vec!["hybrid-hfit", "hybrid-sfit", "digital-hfit", "digital-sfit"],
            },
        },
    ]
}

pub fn find(name: &str) -> Option<Figure> {
    canned().into_iter().find(|f| f.name == name)
}

#[derive(Debug, Clone, Serialize)]
struct TracePoint {
    variant: String,
    trial: u64,
    iteration: usize,
    min_rate_bits: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FigureOutput {
    pub files: Vec<PathBuf>,
    pub invariant_violations: Vec<String>,
}

/// Runs `figure` on top of `base` and writes its CSV and SVG under `dir`.
pub fn run_figure(base: &SystemConfig, figure: &Figure, dir: &Path) -> Result<FigureOutput> {
    let config = figure.config(base)?;
    std::fs::create_dir_all(dir)?;
    match &figure.kind {
        FigureKind::Sweep { axis, grid, variants } => {
            let variants = variants.iter().map(|v| v.parse()).collect::<Result<Vec<Variant>>>()?;
            let table = sweep(&config, *axis, grid, &variants)?;
            let files = emit_plots(&table, dir, figure.name)?;
            Ok(FigureOutput { files: vec![files.csv, files.svg], invariant_violations: table.invariant_violations() })
        }
        FigureKind::Convergence { variants, trials } => {
            let variants = variants.iter().map(|v| v.parse()).collect::<Result<Vec<Variant>>>()?;
            let jobs: Vec<(&Variant, u64)> = variants.iter().flat_map(|v| (0..*trials).map(move |t| (v, t))).collect();
            let results = jobs
                .par_iter()
                .map(|(v, t)| {
                    let cfg = v.apply(&config)?;
                    let r = run_trial(&cfg, v.strategy, v.mode, cfg.seed, *t)?;
                    let violations = r.invariant_violations(&cfg);
                    Ok((v.label.clone(), *t, r, violations))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut out = FigureOutput::default();
            let csv_path = dir.join(format!("{}.csv", figure.name));
            let mut w = csv::Writer::from_path(&csv_path)?;
            let mut curves = Vec::new();
            for (label, t, r, violations) in &results {
                out.invariant_violations
                    .extend(violations.iter().map(|v| format!("{label} trial {t}: {v}")));
                let Some(trace) = r.trace() else { continue };
                let history = trace.min_rate_history();
                for (iteration, &min_rate_bits) in history.iter().enumerate() {
                    w.serialize(TracePoint { variant: label.clone(), trial: *t, iteration, min_rate_bits })?;
                }
                curves.push(Curve {
                    label: format!("{label} #{t}"),
                    points: history.iter().enumerate().map(|(k, &v)| (k as f64, v)).collect(),
                });
            }
            w.flush()?;
            let svg_path = dir.join(format!("{}.svg", figure.name));
            render_curves(&svg_path, figure.name, "outer iteration", "minimum user rate R_min (bits/symbol)", &curves)?;
            out.files = vec![csv_path, svg_path];
            Ok(out)
        }
    }
}
