use clap::Parser;
use tracing_subscriber::EnvFilter;
use tutorkit_service::cli::{execute, Cli};

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    execute(Cli::parse(), &mut std::io::stdout().lock())
}
