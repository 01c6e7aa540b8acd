mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("protocol fault: {0}")]
    Fault(String),
    #[error("i/o: {0}")]
    Io(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Violation,
    Inconclusive,
}

impl Status {
    fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Violation => 1,
            Status::Inconclusive => 2,
        }
    }
}

const USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "boundreg", version, about = "Explore protocols over bounded-size registers")]
struct Cli {
    /// Flat key=value file; its settings override flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the effective settings as key=value before running.
    #[arg(long, global = true)]
    save_config: Option<PathBuf>,
    /// Write traces here as JSON Lines instead of stdout.
    #[arg(long, global = true)]
    jsonl: Option<PathBuf>,
    /// Write the protocol graph here in DOT format.
    #[arg(long, global = true)]
    dot: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Two-process approximate agreement with 1-bit registers.
    Epsagree(EpsArgs),
    /// Run the universal two-process solver on a task.
    Universal(UniversalArgs),
    /// Decide solvability of a two-process task.
    Taskcheck(TaskArgs),
    /// Iterated full-information protocols and the 1-bit simulation.
    Iterate(IterateArgs),
    /// Constant-size iterated snapshot simulation and fast agreement.
    Fastsim(FastArgs),
    /// Message passing over the augmented ring.
    Ring(RingArgs),
    /// Search for an agreement violation in a candidate protocol.
    Falsify(FalsifyArgs),
}

#[derive(Args, Debug)]
struct EpsArgs {
    #[arg(long)]
    k: Option<u32>,
    /// Two bits, e.g. 0,1.
    #[arg(long)]
    inputs: Option<String>,
    #[arg(long, conflicts_with_all = ["exhaustive", "random"])]
    schedule: Option<PathBuf>,
    #[arg(long, conflicts_with = "random")]
    exhaustive: bool,
    #[arg(long)]
    random: Option<u64>,
    /// Crash budget for --exhaustive.
    #[arg(long)]
    crashes: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args, Debug)]
struct UniversalArgs {
    #[arg(long)]
    task: Option<PathBuf>,
    #[arg(long, conflicts_with = "random")]
    exhaustive: bool,
    /// SEED [N]: N random runs.
    #[arg(long, num_args = 1..=2, value_names = ["SEED", "N"])]
    random: Option<Vec<u64>>,
    #[arg(long)]
    crashes: Option<usize>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args, Debug)]
struct TaskArgs {
    #[arg(long)]
    task: Option<PathBuf>,
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args, Debug)]
struct IterateArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rounds: Option<u32>,
    /// is or ic.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long = "simulate-1bit")]
    simulate_1bit: bool,
    #[arg(long)]
    inputs: Option<String>,
    #[arg(long)]
    crashes: Option<usize>,
}

#[derive(Args, Debug)]
struct FastArgs {
    #[arg(long)]
    delta: Option<u32>,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    count_executions: bool,
    /// Target epsilon as P/Q.
    #[arg(long)]
    check_agreement: Option<String>,
    #[arg(long)]
    crashes: Option<usize>,
}

#[derive(Args, Debug)]
struct RingArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    /// Comma-separated nodes crashed at the start.
    #[arg(long)]
    crash: Option<String>,
    /// src:dst:hexmsg, repeatable.
    #[arg(long)]
    send: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args, Debug)]
struct FalsifyArgs {
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    /// P/Q.
    #[arg(long)]
    eps: Option<String>,
    /// Configurations the witness search may visit.
    #[arg(long)]
    budget: Option<u64>,
    /// Override the inputs, e.g. 0,1,0.
    #[arg(long)]
    inputs: Option<String>,
    #[arg(long)]
    max_steps: Option<usize>,
}

fn to_config(cli: &Cli) -> RunConfig {
    let mut c = RunConfig { jsonl: cli.jsonl.clone(), dot: cli.dot.clone(), ..Default::default() };
    match &cli.command {
        None => {}
        Some(Cmd::Epsagree(a)) => {
            c.command = "epsagree".into();
            c.k = a.k;
            c.inputs = a.inputs.clone();
            c.schedule = a.schedule.clone();
            c.exhaustive = a.exhaustive;
            c.random = a.random;
            c.crashes = a.crashes;
            c.max_steps = a.max_steps;
        }
        Some(Cmd::Universal(a)) => {
            c.command = "universal".into();
            c.task = a.task.clone();
            c.exhaustive = a.exhaustive;
            if let Some(r) = &a.random {
                c.random = r.first().copied();
                c.runs = r.get(1).copied();
            }
            c.crashes = a.crashes;
            c.budget = a.budget;
            c.max_steps = a.max_steps;
        }
        Some(Cmd::Taskcheck(a)) => {
            c.command = "taskcheck".into();
            c.task = a.task.clone();
            c.budget = a.budget;
        }
        Some(Cmd::Iterate(a)) => {
            c.command = "iterate".into();
            c.n = a.n;
            c.rounds = a.rounds;
            c.mode = a.mode.clone();
            c.simulate_1bit = a.simulate_1bit;
            c.inputs = a.inputs.clone();
            c.crashes = a.crashes;
        }
        Some(Cmd::Fastsim(a)) => {
            c.command = "fastsim".into();
            c.delta = a.delta;
            c.rounds = a.rounds;
            c.count_executions = a.count_executions;
            c.check_agreement = a.check_agreement.clone();
            c.crashes = a.crashes;
        }
        Some(Cmd::Ring(a)) => {
            c.command = "ring".into();
            c.n = a.n;
            c.t = a.t;
            c.crash = a.crash.clone();
            c.send = (!a.send.is_empty()).then(|| a.send.join(","));
            c.seed = a.seed;
            c.max_steps = a.max_steps;
        }
        Some(Cmd::Falsify(a)) => {
            c.command = "falsify".into();
            c.protocol = a.protocol.clone();
            c.n = a.n;
            c.t = a.t;
            c.eps = a.eps.clone();
            c.budget = a.budget;
            c.inputs = a.inputs.clone();
            c.max_steps = a.max_steps;
        }
    }
    c
}

fn dispatch(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status, CliError> {
    match cfg.command.as_str() {
        "epsagree" => commands::epsagree(cfg, out),
        "universal" => commands::universal(cfg, out),
        "taskcheck" => commands::taskcheck(cfg, out),
        "iterate" => commands::iterate(cfg, out),
        "fastsim" => commands::fastsim(cfg, out),
        "ring" => commands::ring(cfg, out),
        "falsify" => commands::falsify_cmd(cfg, out),
        "" => Err(CliError::Usage("no subcommand given (on the command line or as command= in --config)".into())),
        other => Err(CliError::Usage(format!("unknown command {other:?}"))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => USAGE,
            };
            return ExitCode::from(code);
        }
    };
    let mut cfg = to_config(&cli);
    if let Some(path) = &cli.config {
        let applied = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
            .and_then(|text| cfg.apply_overrides(&text));
        if let Err(e) = applied {
            eprintln!("{e}");
            return ExitCode::from(USAGE);
        }
    }
    if let Some(path) = &cli.save_config {
        if let Err(e) = std::fs::write(path, cfg.to_kv()) {
            eprintln!("{}: {e}", path.display());
            return ExitCode::from(USAGE);
        }
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = dispatch(&cfg, &mut out);
    let _ = out.flush();
    match result {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(match e {
                CliError::Usage(_) => USAGE,
                CliError::Fault(_) => 1,
                CliError::Io(_) => 1,
            })
        }
    }
}
