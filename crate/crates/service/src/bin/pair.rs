use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pair_service::config::ServiceConfig;
use pair_service::protocol::MessageType;
use pair_service::scenario::{read_trace, write_trace, Scenario};
use pair_service::server::Server;
use pair_service::service::Service;

#[derive(Parser)]
#[command(name = "pair", version, about = "Perspective-aware XR reasoning service")]
struct Cli {
    /// TOML config file (`[reasoner]`, `[monitor]`); PAIR_THETA overrides θ.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve NDJSON sessions over TCP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: String,
        /// Directory of Chronicle files, schema sidecars and consent.json.
        #[arg(long)]
        pool: PathBuf,
    },
    /// Replay a scenario; exit 1 if it diverges from the expected trace.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        expect: Option<PathBuf>,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Replay a scenario and print its reasoning traces.
    Trace { scenario: PathBuf },
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<ServiceConfig> {
    let cfg = match path {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    Ok(cfg.from_env()?)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let config = load_config(cli.config.as_ref())?;
    match cli.command {
        Command::Serve { addr, pool } => {
            let service = Service::with_rules(config);
            service
                .load_pool_dir(&pool)
                .with_context(|| format!("loading pool {}", pool.display()))?;
            let server = Server::bind(&addr, service)?;
            log::info!("listening on {}", server.local_addr()?);
            server.serve()?;
            Ok(0)
        }
        Command::Run { scenario, expect, emit } => {
            let s = Scenario::load(&scenario)?;
            let expected = expect.as_deref().map(read_trace).transpose()?;
            let outcome = s.check(&config, expected.as_deref())?;
            if let Some(path) = emit {
                write_trace(&path, &outcome.trace)?;
            }
            match &outcome.verdict {
                Some(Err(d)) => eprintln!("{d}"),
                Some(Ok(())) => println!("{}: trace matches ({:?})", scenario.display(), outcome.elapsed),
                None => println!(
                    "{}: {} envelopes ({:?}), nothing to compare",
                    scenario.display(),
                    outcome.trace.len(),
                    outcome.elapsed
                ),
            }
            Ok(outcome.exit_code() as u8)
        }
        Command::Trace { scenario } => {
            let trace = Scenario::load(&scenario)?.run(&config)?;
            let mut out = std::io::stdout().lock();
            for env in trace.iter().filter(|e| e.kind == MessageType::ReasoningTrace) {
                if writeln!(out, "{}", serde_json::to_string_pretty(&env.payload)?).is_err() {
                    break; // reader went away
                }
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
