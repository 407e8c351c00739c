use std::path::PathBuf;
use std::process::ExitCode;

use cbir_service::ServiceConfig;
use clap::Parser;

/// Content-based image retrieval HTTP service.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    #[arg(long, env = "HOST", default_value = "127.0.0.1")]
    host: String,
    #[arg(long, env = "PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "STORE_PATH", default_value = "cbir-store")]
    store: PathBuf,
    #[arg(long, env = "CONFIG_FILE")]
    config: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let args = Args::parse();
    let config = ServiceConfig {
        host: args.host,
        port: args.port,
        store_path: args.store,
        config_file: args.config,
    };
    match cbir_service::run(config).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
