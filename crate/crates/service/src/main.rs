use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ikiwisi_core::fixture::FixtureConfig;
use ikiwisi_service::eval::{evaluate, parse_frames, render_text, EvalRequest};
use ikiwisi_service::{commands, http, load_data_dir, Catalog};

#[derive(Parser)]
#[command(
    name = "ikiwisi",
    version,
    about = "Human-in-the-loop evaluation of multi-object recognition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "IKIWISI_DATA_DIR")]
        data_dir: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Event log directory; defaults to `<data-dir>/logs`.
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
    /// Print confusion counts, F1 and heatmap patterns for one selection.
    Eval {
        #[arg(long, env = "IKIWISI_DATA_DIR")]
        data_dir: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long)]
        segment: String,
        #[arg(long)]
        dataset: Option<String>,
        /// Comma separated; prefix a name with '*' to add it as a spy.
        #[arg(long, value_delimiter = ',', required = true)]
        objects: Vec<String>,
        /// Frame list such as `0-15` or `0,2,4-6`.
        #[arg(long)]
        frames: Option<String>,
        /// Overrides the seed of random and synthetic-noisy models.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Normalize ratings and run the statistics on a ratings CSV.
    Analyze {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Model ids left out of the model-level regression.
        #[arg(long = "random-model", default_value = "random")]
        random_models: Vec<String>,
    },
    /// Run simulated raters and write their ratings as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the analysis report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Dataset source; without it the seeded reference fixture is used.
        #[arg(long, env = "IKIWISI_DATA_DIR")]
        data_dir: Option<PathBuf>,
    },
    /// Write a seeded synthetic data directory.
    GenFixture {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 90)]
        objects: usize,
        #[arg(long, default_value_t = 31)]
        segments: usize,
    },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Serve {
            data_dir,
            port,
            host,
            log_dir,
        } => {
            let data = load_data_dir(&data_dir)?;
            let log_dir = log_dir.unwrap_or_else(|| data_dir.join("logs"));
            let catalog = Arc::new(Catalog::open(data, &log_dir)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(http::serve(
                catalog,
                SocketAddr::new(host, port),
                |addr| tracing::info!(%addr, log_dir = %log_dir.display(), "listening"),
                async {
                    let _ = tokio::signal::ctrl_c().await;
                },
            ))
            .context("server failed")?;
        }
        Command::Eval {
            data_dir,
            model,
            segment,
            dataset,
            objects,
            frames,
            seed,
            format,
        } => {
            let data = load_data_dir(&data_dir)?;
            let req = EvalRequest {
                model_id: model,
                segment_id: segment,
                dataset_id: dataset,
                objects,
                frames: frames.as_deref().map(parse_frames).transpose()?,
                seed,
            };
            let report = evaluate(&data, &req)?;
            match format {
                Format::Text => print!("{}", render_text(&report)),
                Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
            }
        }
        Command::Analyze {
            file,
            out,
            random_models,
        } => {
            let text = commands::run_analyze(&file, out.as_deref(), &random_models)?;
            if out.is_none() {
                println!("{text}");
            }
        }
        Command::Simulate {
            config,
            out,
            report,
            data_dir,
        } => {
            let output = commands::run_simulate(&config, data_dir.as_deref(), &out, report.as_deref())?;
            eprintln!("wrote {} ratings to {}", output.records.len(), out.display());
        }
        Command::GenFixture {
            seed,
            out,
            objects,
            segments,
        } => {
            let config = FixtureConfig {
                objects,
                segments,
                ..FixtureConfig::reference(seed)
            };
            commands::run_gen_fixture(&config, &out)?;
            eprintln!("wrote fixture data directory to {}", out.display());
        }
    }
    Ok(())
}
