use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use jointshape_explorer::{router, AppState};

/// Serve a fitted model over HTTP.
#[derive(Debug, Parser)]
#[command(name = "jointshape-explorer", version)]
struct Args {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    let model = match jointshape::load_model(&args.model) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            return ExitCode::from(1);
        }
    };
    let addr = SocketAddr::new(args.host, args.port);
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error[Io]: cannot bind {addr}: {e}");
            return ExitCode::from(1);
        }
    };
    eprintln!("serving {} on http://{addr}", args.model.display());
    if let Err(e) = axum::serve(listener, router(AppState::new(model))).await {
        eprintln!("error[Io]: {e}");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
