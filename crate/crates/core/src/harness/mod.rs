//! Monte-Carlo experiments: trials, sweeps, CSV tables and plots.

pub mod figures;
pub mod plots;
pub mod sweep;
pub mod trial;

pub use figures::{canned, run_figure, Figure, FigureKind, FigureOutput};
pub use plots::{emit_plots, render_curves, Curve, PlotFiles};
pub use sweep::{point_config, sweep, Axis, SweepRow, SweepSample, SweepTable};
pub use trial::{build_scenario, draw_instance, run_on_instance, run_trial, Instance, TrialResult, Variant};
