use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use elevate_cli::commands::{self, Ctx};
use elevate_cli::config::{RunConfig, VariantSet};
use elevate_core::exposure::House;

#[derive(Parser)]
#[command(name = "elevate", version, about = "Flood-risk house elevation analysis")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, short, default_value = "config/run.toml")]
    config: PathBuf,
    /// Overrides every stage seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Daily discharge to annual maximum water levels.
    Ingest,
    /// Bayesian GEV fit of the annual maxima.
    FitHazard,
    /// Fit the three discount-rate models and rank them.
    FitDiscount,
    /// Optimal elevation and strategy comparison for one house.
    Analyze {
        #[arg(long)]
        value: Option<f64>,
        #[arg(long)]
        size: Option<f64>,
        /// Floor elevation relative to BFE (ft).
        #[arg(long, allow_hyphen_values = true)]
        floor: Option<f64>,
    },
    /// Satisficing robustness, trade-offs and Pareto fronts.
    Robustness,
    /// Optimal elevation over a pool of houses.
    Sweep,
    /// Sobol indices for expected damages.
    Sensitivity {
        #[arg(long, value_enum)]
        variant: Vec<VariantArg>,
        /// Only run the Ishigami self-test.
        #[arg(long)]
        ishigami: bool,
    },
    /// Plot-ready CSV tables.
    ExportPlots,
    /// Every stage in order.
    All,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum VariantArg {
    MostLikely,
    AllScenarios,
    DeepChoice,
    Exposure,
    FixedRate,
}

impl From<VariantArg> for VariantSet {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::MostLikely => VariantSet::MostLikely,
            VariantArg::AllScenarios => VariantSet::AllScenarios,
            VariantArg::DeepChoice => VariantSet::DeepChoice,
            VariantArg::Exposure => VariantSet::Exposure,
            VariantArg::FixedRate => VariantSet::FixedRate,
        }
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn analyze(ctx: &mut Ctx, house: Option<House>) -> Result<()> {
    let a = commands::cmd_analyze(ctx, house)?;
    let r = &a.report;
    println!("BFE {:.2} ft, {} SOWs", r.bfe, r.n_sows);
    for s in &r.strategies {
        println!(
            "{:<20} h={:>5.1}  upfront={:>9.0}  E[damages]={:>9.0}  E[total]/V={:.3}  reliability={:.3}  robustness={:.3}",
            format!("{:?}", s.kind),
            s.h,
            s.upfront_usd,
            s.expected_damages_usd,
            s.expected_total_ratio,
            s.reliability,
            s.joint_robustness
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    let mut ctx = Ctx::new(cfg)?;
    match cli.cmd {
        Cmd::Ingest => {
            ctx.cfg.check_inputs()?;
            print_json(&commands::cmd_ingest(&mut ctx)?)?;
        }
        Cmd::FitHazard => print_json(&commands::cmd_fit_hazard(&mut ctx)?)?,
        Cmd::FitDiscount => print_json(&commands::cmd_fit_discount(&mut ctx)?)?,
        Cmd::Analyze { value, size, floor } => {
            let house = if value.is_some() || size.is_some() || floor.is_some() {
                let d = &ctx.cfg.analysis.house;
                Some(House::new(
                    value.unwrap_or(d.value),
                    size.unwrap_or(d.size),
                    floor.unwrap_or(d.floor_rel_bfe),
                )?)
            } else {
                None
            };
            analyze(&mut ctx, house)?;
        }
        Cmd::Robustness => {
            let rob = commands::cmd_robustness(&mut ctx)?;
            let best = rob.iter().max_by(|a, b| a.joint.total_cmp(&b.joint).then(b.h.total_cmp(&a.h)));
            if let Some(b) = best {
                println!("most robust height {:.1} ft (joint {:.3})", b.h, b.joint);
            }
        }
        Cmd::Sweep => print_json(&commands::cmd_sweep(&mut ctx)?.summary)?,
        Cmd::Sensitivity { variant, ishigami } => {
            if ishigami {
                print_json(&commands::cmd_ishigami(&mut ctx)?)?;
            } else {
                let sets = (!variant.is_empty()).then(|| variant.into_iter().map(Into::into).collect());
                for (label, idx) in commands::cmd_sensitivity(&mut ctx, sets)? {
                    println!("{label}");
                    for (name, e) in idx.factors.iter().zip(&idx.first) {
                        println!("  {name:<14} S1 {}", e.display());
                    }
                }
            }
        }
        Cmd::ExportPlots => {
            for f in commands::cmd_export_plots(&mut ctx)? {
                println!("{f}");
            }
        }
        Cmd::All => {
            ctx.cfg.check_inputs()?;
            commands::cmd_ingest(&mut ctx)?;
            commands::cmd_fit_hazard(&mut ctx)?;
            commands::cmd_fit_discount(&mut ctx)?;
            analyze(&mut ctx, None)?;
            commands::cmd_robustness(&mut ctx)?;
            commands::cmd_sweep(&mut ctx)?;
            commands::cmd_sensitivity(&mut ctx, None)?;
            commands::cmd_ishigami(&mut ctx)?;
            commands::cmd_export_plots(&mut ctx)?;
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
