use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sif_cli::config::parse_scheme;
use sif_cli::{ArchiveConfig, AttackArgs, CliResult, Scenario};
use sif_core::Scheme;

/// Membership queries over a secret-shared set archive.
#[derive(Parser)]
#[command(name = "sif", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split an element list into one state file per repository.
    Init {
        #[arg(long)]
        config: PathBuf,
        /// One IPv4 address or integer per line.
        #[arg(long)]
        elements: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Ask whether VALUE is in the archive; prints true or false.
    Query {
        #[arg(long)]
        config: PathBuf,
        value: String,
        /// Comma-separated repository ids, initiator first. Defaults to 1..=k.
        #[arg(long, value_delimiter = ',')]
        chain: Vec<usize>,
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<Scheme>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Append VALUE to every repository.
    Insert {
        #[arg(long)]
        config: PathBuf,
        value: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one repository daemon until killed.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        repo_id: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run an attack scenario against a demo or configured archive.
    AttackDemo {
        /// sif-collusion | csif-probe | hbc-report
        #[arg(long)]
        scenario: Scenario,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for the CSV output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// csif-probe on a configured archive: candidate elements, one per line.
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// hbc-report: use all-zero nonces.
        #[arg(long)]
        negative_control: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> CliResult {
    let stdout = io::stdout();
    let out = &mut stdout.lock();
    match cli.command {
        Command::Init { config, elements, seed } => sif_cli::cmd_init(&ArchiveConfig::load(&config)?, &elements, seed, out),
        Command::Query {
            config,
            value,
            chain,
            scheme,
            seed,
        } => {
            let chain = (!chain.is_empty()).then_some(chain);
            sif_cli::cmd_query(&ArchiveConfig::load(&config)?, &value, chain, scheme, seed, out)
        },
        Command::Insert { config, value, seed } => sif_cli::cmd_insert(&ArchiveConfig::load(&config)?, &value, seed, out),
        Command::Serve { config, repo_id, seed } => {
            sif_cli::cmd_serve(&ArchiveConfig::load(&config)?, repo_id, seed, out)
        }
        Command::AttackDemo {
            scenario,
            config,
            out: out_dir,
            candidates,
            negative_control,
            seed,
        } => {
            let args = AttackArgs {
                config: config.as_deref().map(ArchiveConfig::load).transpose()?,
                seed,
                out_dir,
                candidates,
                negative_control,
            };
            sif_cli::cmd_attack_demo(scenario, &args, out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sif: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
