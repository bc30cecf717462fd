use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use quillmate_core::clock::{Clock, SystemClock};
use quillmate_core::engine::{Engine, EngineConfig};
use quillmate_core::gateway::replay::ReplayProvider;
use quillmate_server::batch::{run_batch, EXIT_ENGINE};
use quillmate_server::provider::ProviderArgs;

#[derive(Parser)]
#[command(name = "quillmate", version, about = "Style-aware writing assistant service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory for the event log and snapshots; in-memory when omitted.
        #[arg(long)]
        store: Option<PathBuf>,
        #[command(flatten)]
        provider: ProviderArgs,
    },
    /// Learn a style from a sample and rewrite a document under it.
    Batch {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        provider: ProviderArgs,
    },
    /// Check a directory of recorded provider responses.
    ReplayFixtures {
        #[arg(long)]
        fixtures: PathBuf,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Serve { addr, store, provider } => serve(addr, store, provider),
        Command::Batch {
            input,
            sample,
            output,
            provider,
        } => {
            let gateway = match provider.build() {
                Ok(g) => g,
                Err(e) => {
                    eprintln!("error[{}]: {e}", e.kind());
                    return ExitCode::from(EXIT_ENGINE as u8);
                }
            };
            match run_batch(gateway, &input, &sample, &output) {
                Ok(out) => {
                    println!("wrote {} and {}", out.output_path.display(), out.style_path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error[{}]: {e}", e.kind());
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::ReplayFixtures { fixtures } => match ReplayProvider::load(&fixtures) {
            Ok((replay, issues)) => {
                for issue in &issues {
                    eprintln!("{}: {}", issue.path.display(), issue.problem);
                }
                println!("{} fixtures loaded, {} rejected", replay.len(), issues.len());
                if issues.is_empty() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::FAILURE
                }
            }
            Err(e) => {
                eprintln!("error[{}]: {e}", e.kind());
                ExitCode::FAILURE
            }
        },
    }
}

fn serve(addr: SocketAddr, store: Option<PathBuf>, provider: ProviderArgs) -> ExitCode {
    let engine = provider.build().and_then(|gateway| {
        let clock: Arc<dyn Clock> = Arc::new(SystemClock);
        match &store {
            Some(dir) => Engine::open(dir, gateway, clock, EngineConfig::default()),
            None => Ok(Engine::new(gateway, clock, EngineConfig::default())),
        }
    });
    let engine = match engine {
        Ok(e) => Arc::new(e),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            return ExitCode::FAILURE;
        }
    };
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    let result = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!(%addr, provider = engine.gateway().provider_name(), "listening");
        axum::serve(listener, quillmate_server::router(engine.clone()))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    });
    if let Err(e) = engine.checkpoint() {
        tracing::warn!("final snapshot failed: {e}");
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
