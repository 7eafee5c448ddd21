use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use parley_runtime::commands;
use parley_runtime::repl::{self, ReplOptions};

#[derive(Parser)]
#[command(name = "parley", version, about = "Open-domain dialogue engine")]
struct Cli {
    /// Content pack directory.
    #[arg(long, global = true, default_value = "packs/default")]
    pack: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the HTTP turn service.
    Serve {
        /// Overrides `service.bind` and `service.port`, e.g. 0.0.0.0:9000.
        #[arg(long)]
        addr: Option<String>,
        /// Overrides `service.state_dir`.
        #[arg(long)]
        state_dir: Option<PathBuf>,
    },
    /// Chat on the terminal.
    Repl {
        #[arg(long, default_value = "repl")]
        conversation: String,
        /// Print the turn trace after every reply.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        state_dir: Option<PathBuf>,
    },
    /// Run scripts and check their expectations.
    Replay {
        #[arg(required = true)]
        scripts: Vec<PathBuf>,
    },
    /// Load a pack and report problems.
    ValidatePack,
    /// Train the dialogue-act classifier.
    TrainDa {
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        /// Defaults to da/model.txt in the pack.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the mention tagger.
    TrainEl {
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Defaults to el/tagger.txt in the pack.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score entity linking on an annotated corpus.
    EvalEl {
        /// Defaults to el/desk.tsv in the pack.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
}

fn state_dir(pack: &Path, given: Option<PathBuf>) -> Result<PathBuf, parley_core::Error> {
    match given {
        Some(d) => Ok(d),
        None => Ok(parley_core::EngineConfig::load(pack)?.state_dir()),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let pack = cli.pack;
    match cli.cmd {
        Cmd::Serve { addr, state_dir: dir } => {
            let dir = state_dir(&pack, dir)?;
            let engine = Arc::new(commands::build_engine(&pack, Some(&dir))?);
            let svc = &engine.config().service;
            let addr = addr.unwrap_or_else(|| format!("{}:{}", svc.bind, svc.port));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                parley_runtime::news::spawn_poller(engine.clone());
                parley_runtime::server::serve(engine, &addr).await
            })?;
        }
        Cmd::Repl {
            conversation,
            trace,
            state_dir: dir,
        } => {
            let dir = state_dir(&pack, dir)?;
            let engine = commands::build_engine(&pack, Some(&dir))?;
            let opts = ReplOptions {
                conversation_id: conversation,
                trace,
            };
            let stdin = std::io::stdin();
            repl::run(&engine, &opts, stdin.lock(), &mut std::io::stdout())?;
        }
        Cmd::Replay { scripts } => {
            let engine = commands::build_engine(&pack, None)?;
            let mut failed = false;
            let mut out = std::io::stdout();
            for s in &scripts {
                let report = commands::run_replay(&engine, s)?;
                writeln!(out, "== {}", s.display())?;
                write!(out, "{}", report.render())?;
                failed |= !report.passed();
            }
            return Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS });
        }
        Cmd::ValidatePack => print!("{}", commands::validate_pack(&pack)?),
        Cmd::TrainDa { epochs, out } => {
            let out = out.unwrap_or_else(|| pack.join("da/model.txt"));
            print!("{}", commands::train_da(&pack, epochs, &out)?.text);
        }
        Cmd::TrainEl { epochs, seed, out } => {
            let out = out.unwrap_or_else(|| pack.join("el/tagger.txt"));
            print!("{}", commands::train_el(&pack, epochs, seed, &out)?.text);
        }
        Cmd::EvalEl { corpus } => {
            let corpus = corpus.unwrap_or_else(|| pack.join("el/desk.tsv"));
            print!("{}", commands::eval_el(&pack, &corpus)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
