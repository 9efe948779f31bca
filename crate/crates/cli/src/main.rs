use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rising_stars::pipeline::{parse_stages, report, run_pipeline, PipelineConfig, Stage};
use rising_stars::synth::generate_corpus;

/// Predict academic rising stars from a publication corpus.
#[derive(Parser)]
#[command(name = "rising-stars", version)]
struct Cli {
    /// Pipeline config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override every stage seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override `paths.workdir`.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    /// Log progress (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus from the `[synth]` table.
    Synth {
        /// Output corpus; defaults to `paths.corpus`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the planted truth as CSV.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run pipeline stages.
    Run {
        /// Comma-separated stages, or `all`.
        #[arg(long, default_value = "all")]
        stages: String,
    },
    /// Summarise a finished workdir.
    Report {
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => PipelineConfig::parse("", Path::new("."), std::env::vars())?,
    };
    if let Some(seed) = cli.seed {
        config.override_seed(seed);
    }
    if let Some(dir) = &cli.workdir {
        config.paths.workdir = dir.clone();
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth { out, truth } => {
            let config = load_config(cli)?;
            let mut synth = config.synth.clone().unwrap_or_default();
            if let Some(seed) = cli.seed {
                synth.seed = seed;
            }
            let output = generate_corpus(&synth)?;
            let path = out.clone().unwrap_or_else(|| config.paths.corpus.clone());
            output.write(&path, truth.as_deref())?;
            println!(
                "wrote {} papers by {} authors to {} (sha256 {})",
                output.papers.len(),
                output.truth.len(),
                path.display(),
                output.hash
            );
        }
        Command::Run { stages } => {
            let config = load_config(cli)?;
            let stages = parse_stages(stages)?;
            let entries = run_pipeline(&config, &stages)?;
            for e in &entries {
                println!("{:<10} {} ms, {} files", e.stage, e.duration_ms, e.outputs.len());
            }
            if stages.contains(&Stage::Evaluate) {
                let summary = report(&config.paths.workdir)?;
                print!("{}", rising_stars::eval::format_reports(&summary.evaluation));
            }
        }
        Command::Report { json } => {
            let workdir = match (&cli.workdir, &cli.config) {
                (Some(dir), _) => dir.clone(),
                (None, Some(_)) => load_config(cli)?.paths.workdir,
                (None, None) => bail!("report needs --workdir or --config"),
            };
            let summary = report(&workdir)?;
            if *json {
                print!("{}", summary.to_json()?);
            } else {
                print!("{}", summary.to_text());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Library errors already embed their source in the message.
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.contains(&cause) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&cause);
                }
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
