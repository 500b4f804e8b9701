//! Command-line shell around the simulation library: run a study grid,
//! emit plot data from a results table, inspect presets, validate configs.
//!
//! Exit codes: 0 success, 1 configuration error, 2 partial scenario
//! failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use borrowsim_core::config::parse_config_str;
use borrowsim_core::plotdata::{emit_plotdata, View};
use borrowsim_core::presets::builtin_presets;
use borrowsim_core::results::parse_table;
use borrowsim_core::runner::{self, RunOptions};
use borrowsim_core::Error;

#[derive(Parser)]
#[command(name = "borrowsim", version, about = "Bayesian treatment-effect borrowing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the scenario grid of a study configuration.
    Run {
        /// Study configuration file (TOML).
        config: PathBuf,
        /// Worker threads (also BORROWSIM_JOBS; defaults to all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory (overrides the config's `study.output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip scenarios already present in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Derive plot-ready tables from a results file.
    Plot {
        /// A results.csv produced by `run`.
        results: PathBuf,
        /// forest_by_success | metric_vs_tie | metric_vs_drift | metric_vs_ess
        #[arg(long)]
        view: String,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect the case-study presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Parse and expand a configuration without running it.
    Validate {
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// List available preset names.
    List,
    /// Show one preset's derived quantities.
    Show { name: String },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch() -> Result<ExitCode, Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, jobs, out, resume } => {
            let config_text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", config.display())))?;
            let cfg = parse_config_str(&config_text)?;
            let out_dir = out
                .or_else(|| cfg.study.output.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            let opts = RunOptions { jobs, out_dir: out_dir.clone(), resume };
            let manifest = runner::run(&config, &opts)?;
            let done = manifest.n_scenarios - manifest.n_failed_scenarios;
            println!(
                "{done}/{} scenarios ok ({} failed) in {:.1}s -> {}",
                manifest.n_scenarios,
                manifest.n_failed_scenarios,
                manifest.total_wall_ms as f64 / 1000.0,
                out_dir.join(runner::RESULTS_FILE).display()
            );
            if manifest.any_failed() {
                for s in manifest.scenarios.iter().filter(|s| s.error.is_some()) {
                    eprintln!("  {}: {}", s.id, s.error.as_deref().unwrap_or(""));
                }
                Ok(ExitCode::from(2))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::Plot { results, view, out } => {
            let view = View::parse(&view)?;
            let text = std::fs::read_to_string(&results)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", results.display())))?;
            let records = parse_table(&text)?;
            let table = emit_plotdata(&records, view)?;
            match out {
                Some(path) => std::fs::write(path, table)?,
                None => print!("{table}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets { action } => {
            let presets = builtin_presets();
            match action {
                PresetAction::List => {
                    for p in &presets {
                        println!("{:<16} {:<18} n/arm grid {:?}", p.name, p.endpoint.label(), p.sample_size_grid);
                    }
                }
                PresetAction::Show { name } => {
                    let p = borrowsim_core::presets::find_preset(&presets, &name)?;
                    println!("name:            {}", p.name);
                    println!("endpoint:        {}", p.endpoint.label());
                    println!("effect estimate: {:.6}", p.source.estimate);
                    println!("std error:       {:.6}", p.source.std_err);
                    println!(
                        "source n:        {} control / {} treatment",
                        p.source.n_control, p.source.n_treatment
                    );
                    println!("direction:       {:?}", p.decision.direction);
                    println!("theta0 / rho:    {} / {}", p.decision.theta0, p.decision.rho);
                    println!("sample sizes:    {:?}", p.sample_size_grid);
                    println!("vague prior sd:  {}", p.vague_prior_sd);
                    if let Some(dt) = p.followup_dt {
                        println!("followup dt:     {dt}");
                    }
                    let aux = &p.source.aux;
                    if let Some(v) = aux.control_rate {
                        println!("control rate:    {v}");
                    }
                    if let Some(v) = aux.control_event_rate {
                        println!("control events:  {v}");
                    }
                    if let Some(v) = aux.treatment_event_rate {
                        println!("treat. events:   {v:.6}");
                    }
                    if let Some(v) = aux.dispersion {
                        println!("dispersion k:    {v}");
                    }
                    if let Some(v) = aux.sampling_sd {
                        println!("sampling sd:     {v:.6}");
                    }
                    if let Some(c) = p.source_counts {
                        println!(
                            "source counts:   {}/{} control, {}/{} treatment",
                            c.y_control, c.n_control, c.y_treatment, c.n_treatment
                        );
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let config_text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", config.display())))?;
            let cfg = parse_config_str(&config_text)?;
            let config_dir = config.parent().unwrap_or(std::path::Path::new("."));
            let presets = runner::load_presets(&cfg, config_dir)?;
            let scenarios = borrowsim_core::config::expand_grid(&cfg, &presets)?;
            let knob_cells = cfg.knobs.std_ratio.len() * cfg.knobs.denominator_factor.len();
            let per_size = scenarios.len() / cfg.study.sample_sizes.len();
            println!(
                "ok: {} scenarios ({} sizes x {} drift/knob/method cells; {} knob cells)",
                scenarios.len(),
                cfg.study.sample_sizes.len(),
                per_size,
                knob_cells,
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
