use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spectral_leader::cli::{parse_spec, recover, run, RecoverArgs};
use spectral_leader::data::TriplePolicy;
use spectral_leader::Error;

/// Log filter variable, e.g. `SPECTRAL_LEADER_LOG=debug`.
const LOG_ENV: &str = "SPECTRAL_LEADER_LOG";

#[derive(Parser)]
#[command(version, about = "Online spectral learning for single-topic models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run {
        spec: PathBuf,
        /// Override a config value: `section.key=value` or
        /// `algorithm.<kind>.key=value`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory; overrides `run.output`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Offline spectral recovery over a whole corpus.
    Recover {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vocab_size: usize,
        #[arg(long)]
        topics: usize,
        #[arg(long, default_value = "first3")]
        policy: TriplePolicy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "recovered")]
        output: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            spec,
            mut overrides,
            output,
        } => {
            let text = std::fs::read_to_string(&spec).map_err(|e| Error::Io { path: spec.clone(), source: e })?;
            if let Some(out) = output {
                overrides.push(format!("run.output={}", out.display()));
            }
            let spec = parse_spec(&text, &overrides)?;
            let cells = run(&spec)?;
            log::info!("wrote {} cells to {}", cells.len(), spec.output.display());
        }
        Command::Recover {
            corpus,
            vocab_size,
            topics,
            policy,
            seed,
            output,
        } => {
            let params = recover(&RecoverArgs {
                corpus,
                vocab_size,
                topics,
                policy,
                seed,
                output: output.clone(),
            })?;
            log::info!("recovered {} topics into {}", params.k(), output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
