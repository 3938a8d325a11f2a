use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use poetslate_cli::commands;
use poetslate_cli::config::{BackendKind, ServiceConfig};
use poetslate_core::{ChainSpecs, ReplayBackend, StubBackend};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "poetslate", version, about = "Magnetic-poetry slate: reading order, prompt chains, usage stats")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the slate service.
    Serve {
        /// Flat TOML config; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `bind` from the config.
        #[arg(long)]
        bind: Option<std::net::SocketAddr>,
        /// Overrides `backend` from the config.
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
    },
    /// Print the reading-ordered text of a layout file.
    Order {
        layout: PathBuf,
        /// Word list for rendering text.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Print word ids instead of text.
        #[arg(long)]
        ids: bool,
    },
    /// Turn a simulation spec into a layout file.
    Simulate {
        spec: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Re-run every logged chain and diff the responses.
    Replay {
        log: PathBuf,
        /// Answer from a recorded transcript instead of the stub backend.
        #[arg(long)]
        fixture: Option<PathBuf>,
        /// Exit nonzero if any record differs.
        #[arg(long)]
        check: bool,
    },
    /// Usage statistics over a session log.
    Stats {
        log: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum BackendArg {
    Stub,
    Replay,
    Live,
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Serve { config, bind, backend } => {
            let mut cfg = match &config {
                Some(path) => ServiceConfig::load(path)?,
                None => ServiceConfig::default(),
            };
            if let Some(bind) = bind {
                cfg.bind = bind;
            }
            if let Some(b) = backend {
                cfg.backend = match b {
                    BackendArg::Stub => BackendKind::Stub,
                    BackendArg::Replay => BackendKind::Replay,
                    BackendArg::Live => BackendKind::Live,
                };
            }
            tokio::runtime::Runtime::new()?.block_on(poetslate_cli::serve(cfg))?;
        }
        Command::Order { layout, vocab, ids } => {
            let vocabulary = commands::load_vocabulary(vocab.as_deref())?;
            println!("{}", commands::order(&read(&layout)?, &vocabulary, ids)?);
        }
        Command::Simulate { spec, output } => {
            let json = commands::simulate(&read(&spec)?)?;
            match output {
                Some(path) => fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
                None => println!("{json}"),
            }
        }
        Command::Replay { log, fixture, check } => {
            let contents = commands::read_records(&log)?;
            let specs = ChainSpecs::standard();
            let report = match fixture {
                Some(path) => {
                    let backend = ReplayBackend::new(commands::load_transcript(Some(&path))?);
                    commands::replay(&contents.records, &backend, &specs)
                }
                None => commands::replay(&contents.records, &StubBackend, &specs),
            };
            println!("{report}");
            if check && !report.all_match() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Stats { log, vocab, json } => {
            let vocabulary = commands::load_vocabulary(vocab.as_deref())?;
            let contents = commands::read_records(&log)?;
            println!("{}", commands::stats(&contents.records, &vocabulary, json)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
