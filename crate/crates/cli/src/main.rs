use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use topicdrift::config::PipelineConfig;
use topicdrift::pipeline::{Pipeline, PipelineError, Stage};

/// Topic modeling of a dated drama corpus: topic trends, year-to-year
/// divergence, a semantic map and overlays with an external series.
#[derive(Debug, Parser)]
#[command(name = "topicdrift", version)]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, short, global = true, default_value = "topicdrift.toml")]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to `output-dir` from the config, then `out`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Overrides `corpus.api-base`.
    #[arg(long, global = true, env = "TOPICDRIFT_API_BASE")]
    api_base: Option<String>,
    /// More log output (-v debug, -vv trace).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only warnings and errors.
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load or download the corpus and keep the configured years.
    Ingest,
    /// Normalize tokens and build the document-term matrix.
    Preprocess,
    /// Fit the configured topic model(s).
    Fit,
    /// Yearly prevalence and hot/cold classification.
    Trends,
    /// Jensen-Shannon divergence between consecutive years.
    Divergence,
    /// Two-dimensional semantic map of the documents.
    Map,
    /// Align topic prevalence with the external series.
    Align,
    /// Topic table and charts.
    Report,
    /// Every stage in order.
    All,
    /// Validate the configuration and print it with defaults filled in.
    Validate,
}

fn stage(cmd: &Command) -> Option<Stage> {
    Some(match cmd {
        Command::Ingest => Stage::Ingest,
        Command::Preprocess => Stage::Preprocess,
        Command::Fit => Stage::Fit,
        Command::Trends => Stage::Trends,
        Command::Divergence => Stage::Divergence,
        Command::Map => Stage::Map,
        Command::Align => Stage::Align,
        Command::Report => Stage::Report,
        Command::All | Command::Validate => return None,
    })
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let (mut config, base_dir) = PipelineConfig::from_path(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(api) = &cli.api_base {
        config.corpus.api_base = api.clone();
    }
    if config.seed.is_none() {
        log::warn!("no seed configured, using {}", config.seed());
    }
    let out_dir = match (&cli.out_dir, &config.output_dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => base_dir.join(d),
        (None, None) => PathBuf::from("out"),
    };
    let pipeline = Pipeline::new(config, base_dir, &out_dir)?;
    let started = Instant::now();
    match stage(&cli.command) {
        Some(s) => pipeline.run(s).with_context(|| format!("stage `{s}` failed"))?,
        None if matches!(cli.command, Command::Validate) => {
            print!("{}", pipeline.config().resolved().to_toml());
            return Ok(());
        }
        None => {
            for s in Stage::ALL {
                pipeline.run(s).with_context(|| format!("stage `{s}` failed"))?;
            }
        }
    }
    log::info!("done in {:.1}s, outputs in {}", started.elapsed().as_secs_f64(), out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e.chain().any(|c| {
                c.downcast_ref::<topicdrift::config::ConfigError>().is_some()
                    || matches!(c.downcast_ref::<PipelineError>(), Some(PipelineError::Config(_)))
            });
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}
