use std::process::ExitCode;

use clap::Parser;
use pulseplay_cli::commands::{cmd_analyze, cmd_estimate, cmd_simulate, cmd_validate};
use pulseplay_cli::serve::{self, SessionConfig};
use pulseplay_cli::{Cli, Command};
use pulseplay_core::Result;
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = EnvFilter::try_new(&cli.log_level).unwrap_or_else(|e| {
        eprintln!("bad log filter {:?}: {e}; using info", cli.log_level);
        EnvFilter::new("info")
    });
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Estimate(args) => println!("{}", cmd_estimate(&args)?),
        Command::Simulate(args) => {
            cmd_simulate(&args)?;
            println!("wrote {} and {}", args.trace_out.display(), args.truth_out.display());
        }
        Command::Validate(args) => print!("{}", cmd_validate(&args)?.to_key_value()),
        Command::Analyze(args) => {
            if args.mapping.is_none() {
                tracing::warn!("no --mapping given; subscale scores use a non-canonical placeholder mapping");
            }
            print!("{}", cmd_analyze(&args)?.to_text());
        }
        Command::Serve(args) => {
            let mut config = SessionConfig::load(&args.config)?;
            if let Some(listen) = args.listen {
                config.listen = listen;
            }
            if args.tcp_listen.is_some() {
                config.tcp_listen = args.tcp_listen;
            }
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve_until_signal(config))?;
        }
    }
    Ok(())
}

async fn serve_until_signal(config: SessionConfig) -> Result<()> {
    let handle = serve::start(config).await?;
    wait_for_signal().await;
    tracing::info!("shutting down");
    let state = handle.shutdown().await?;
    let snapshot = serde_json::to_string(&state.render_operator()).unwrap_or_default();
    tracing::info!(state = %snapshot, "final state");
    Ok(())
}

#[cfg(unix)]
async fn wait_for_signal() {
    use tokio::signal::unix::{signal, SignalKind};
    let mut term = match signal(SignalKind::terminate()) {
        Ok(s) => s,
        Err(e) => {
            tracing::warn!(error = %e, "cannot watch SIGTERM");
            let _ = tokio::signal::ctrl_c().await;
            return;
        }
    };
    tokio::select! {
        _ = tokio::signal::ctrl_c() => {}
        _ = term.recv() => {}
    }
}

#[cfg(not(unix))]
async fn wait_for_signal() {
    let _ = tokio::signal::ctrl_c().await;
}
