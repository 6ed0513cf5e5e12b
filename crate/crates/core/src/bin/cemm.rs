use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cemm_precoder::harness::{self, emit_plots, run_trial, Axis, Variant};
use cemm_precoder::SystemConfig;

/// Hybrid precoder optimization and Monte-Carlo experiments for
/// cache-enabled mmWave radio access networks.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set fronthaul=2.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<SystemConfig> {
        let mut cfg = match &self.config {
            Some(p) => SystemConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => SystemConfig::default(),
        };
        for o in &self.overrides {
            cfg.apply_override(o).with_context(|| format!("applying `{o}`"))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded trial and dump its trace.
    Trial {
        /// `hybrid-hfit`, `hybrid-sfit`, `digital-hfit` or `digital-sfit`,
        /// optionally followed by `:key=value,...`.
        #[arg(long, default_value = "hybrid-hfit")]
        variant: String,
        /// Trial index within the seed's stream.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Write the outer trace as CSV here instead of stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Average R_min over `realizations` trials along one config axis.
    Sweep {
        /// C, S, P, xi or N_F.
        #[arg(long)]
        axis: String,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        /// Comma-separated variants.
        #[arg(long, value_delimiter = ',', default_value = "hybrid-hfit,hybrid-sfit")]
        variants: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Base name of the CSV and SVG files.
        #[arg(long, default_value = "sweep")]
        name: String,
    },
    /// Run the canned experiment sets.
    Figures {
        /// Run only these sets (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[arg(long, default_value = "figures")]
        out: PathBuf,
        /// List the sets and exit.
        #[arg(long)]
        list: bool,
    },
}

fn report(violations: &[String]) -> ExitCode {
    if violations.is_empty() {
        return ExitCode::SUCCESS;
    }
    for v in violations {
        eprintln!("invariant violated: {v}");
    }
    ExitCode::from(2)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = cli.config.load()?;
    match cli.command {
        Command::Trial { variant, trial, trace } => {
            let v: Variant = variant.parse()?;
            let cfg = v.apply(&cfg)?;
            let r = run_trial(&cfg, v.strategy, v.mode, cfg.seed, trial)?;
            println!("variant      {}", v.label);
            println!("seed/trial   {}/{}", r.seed, r.trial);
            println!("min rate     {:.6} bits/symbol", r.min_rate);
            println!("wall time    {:.3} s", r.wall_time);
            if let Some(f) = &r.failure {
                println!("failure      {f}");
            }
            if let Some(o) = &r.outcome {
                let res = o.result.residuals;
                println!(
                    "residuals    power {:.3e}  fronthaul {:.3e}  rate {:.3e}",
                    res.power, res.fronthaul, res.rate
                );
                println!("converged    {}", o.outer.converged);
                for f in o.inner.iter().flat_map(|t| &t.flags).chain(&o.outer.flags) {
                    println!("flag         {f}");
                }
                match trace {
                    Some(p) => {
                        let file = std::fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                        o.outer.write_csv(file)?;
                    }
                    None => o.outer.write_csv(std::io::stdout().lock())?,
                }
            }
            Ok(report(&r.invariant_violations(&cfg)))
        }
        Command::Sweep { axis, grid, variants, out, name } => {
            let axis: Axis = axis.parse()?;
            let variants = variants.iter().map(|v| v.parse()).collect::<Result<Vec<Variant>, _>>()?;
            if variants.is_empty() {
                bail!("no variants given");
            }
            let table = harness::sweep(&cfg, axis, &grid, &variants)?;
            let files = emit_plots(&table, &out, &name)?;
            for r in &table.rows {
                println!(
                    "{}={:<8} {:<32} {:.4} ± {:.4} bits  ({} trials, {} failed, {:.2} s/trial)",
                    axis, r.axis_value, r.variant, r.mean_min_rate_bits, r.stderr, r.n_trials, r.infeasible_count,
                    r.mean_wall_time_s
                );
            }
            println!("wrote {} and {}", files.csv.display(), files.svg.display());
            Ok(report(&table.invariant_violations()))
        }
        Command::Figures { only, out, list } => {
            let all = harness::canned();
            if list {
                for f in &all {
                    println!("{}", f.name);
                }
                return Ok(ExitCode::SUCCESS);
            }
            for name in &only {
                if !all.iter().any(|f| &f.name == name) {
                    bail!("unknown figure set `{name}`");
                }
            }
            let mut violations = Vec::new();
            for f in all.iter().filter(|f| only.is_empty() || only.iter().any(|n| n == f.name)) {
                log::info!("running {}", f.name);
                let o = harness::run_figure(&cfg, f, &out)?;
                for p in &o.files {
                    println!("wrote {}", p.display());
                }
                violations.extend(o.invariant_violations.into_iter().map(|v| format!("{}: {v}", f.name)));
            }
            Ok(report(&violations))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
