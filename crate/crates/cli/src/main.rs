use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use spinmu::experiment::{
    kendall_tau, read_column, run_average_vs_instant_study, run_mu_study, run_sensitivity_study, ExperimentConfig,
};
use spinmu::lft::square_matrix_from_json;
use spinmu::ssv::{mu_bounds, BlockStructure, MuOptions};
use spinmu::{Error, ExecMode, Result};

#[derive(Parser)]
#[command(name = "spinmu", version, about = "Spin-network bias control: synthesis, sensitivity and mu analysis")]
struct Cli {
    /// Run every fan-out sequentially.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a controller ensemble and write it as JSON.
    Synth {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to <output_dir>/ensemble.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one study over an ensemble.
    Study {
        kind: StudyKind,
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the ensemble named in the config.
        #[arg(long)]
        ensemble: Option<PathBuf>,
        /// Defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bound mu for a matrix and block structure.
    Mu {
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        options: Option<PathBuf>,
    },
    /// Kendall tau-b between two CSV columns.
    Tau {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyKind {
    Sensitivity,
    Average,
    Mu,
}

fn read_json(path: &Path) -> Result<Value> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn run(cli: Cli) -> Result<Value> {
    let mode = if cli.sequential { ExecMode::Sequential } else { ExecMode::available() };
    match cli.command {
        Command::Synth { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let ens = cfg.synthesize(mode)?;
            let path = out.unwrap_or_else(|| cfg.output_dir.join("ensemble.json"));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, ens.to_json()? + "\n")?;
            Ok(json!({
                "ensemble": path,
                "controllers": ens.len(),
                "best_p_tf": ens.controllers[0].p_tf,
                "worst_p_tf": ens.controllers[ens.len() - 1].p_tf,
            }))
        }
        Command::Study { kind, config, ensemble, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let ens = cfg.load_ensemble(ensemble.as_deref())?;
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            Ok(match kind {
                StudyKind::Sensitivity => {
                    let s = run_sensitivity_study(&cfg, &ens, &out, mode)?;
                    json!({ "out": out, "crossover": s.crossover, "separation": s.crossover.separation() })
                }
                StudyKind::Average => {
                    let s = run_average_vs_instant_study(&cfg, &ens, &out)?;
                    json!({ "out": out, "tau": s.tau })
                }
                StudyKind::Mu => {
                    let s = run_mu_study(&cfg, &ens, &out, mode)?;
                    json!({ "out": out, "taus": s.taus, "window": s.window, "behaviour": s.behaviour })
                }
            })
        }
        Command::Mu { g, structure, options } => {
            let m = square_matrix_from_json(&read_json(&g)?)?;
            let sv = read_json(&structure)?;
            let structure: BlockStructure = if sv.is_array() {
                BlockStructure::new(serde_json::from_value(sv)?)
            } else {
                serde_json::from_value(sv)?
            };
            let opts: MuOptions = match options {
                Some(p) => serde_json::from_value(read_json(&p)?)?,
                None => MuOptions::default(),
            };
            Ok(mu_bounds(&m, &structure, &opts)?.to_json())
        }
        Command::Tau { csv, x, y } => {
            let text = std::fs::read_to_string(&csv)?;
            let (xs, ys) = (read_column(&text, &x)?, read_column(&text, &y)?);
            Ok(json!({ "x": x, "y": y, "n": xs.len(), "tau": kendall_tau(&xs, &ys)? }))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("SPINMU_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                spinmu::par::init_thread_pool(n);
            }
            _ => {
                eprintln!("error: SPINMU_THREADS must be a positive integer, got '{v}'");
                return ExitCode::from(2);
            }
        }
    }
    match run(cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Error::exit_code(&e) as u8)
        }
    }
}
