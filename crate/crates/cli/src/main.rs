use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use hrteam::assets;
use hrteam::bt;
use hrteam::service::{self, ServeConfig, Session, DEFAULT_QUEUE_CAP};
use hrteam::sim::{replay, HumanScript, Outcome, Sim, SimConfig, SimError};
use hrteam::world::{RobotClass, Scenario, WorldError};

/// Deterministic human-robot team search simulator.
#[derive(Parser)]
#[command(name = "hrteam", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario headless with a scripted human and write the artifacts.
    Run(RunArgs),
    /// Serve a live run to console clients over TCP or WebSocket.
    Serve(ServeArgs),
    /// Re-execute a recorded run and compare it byte for byte.
    Replay(ReplayArgs),
    /// Check a scenario (and optionally a human script) without running it.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct World {
    /// Scenario TOML; the shipped apartment when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, env = "HRTEAM_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    tick_limit: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    world: World,
    /// Human input script; the shipped one when omitted.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long, env = "HRTEAM_OUT", default_value = "out")]
    out: PathBuf,
    /// Print only the summary, not the chat.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    world: World,
    #[arg(long, default_value = "127.0.0.1:7878")]
    addr: String,
    /// Milliseconds per tick.
    #[arg(long, default_value_t = 100)]
    tick_ms: u64,
    /// Optional scripted human; by default the human types in the console.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Where to write artifacts when the run ends.
    #[arg(long, env = "HRTEAM_OUT")]
    out: Option<PathBuf>,
    /// Wait for a `resume` or `step` command before ticking.
    #[arg(long)]
    paused: bool,
    #[arg(long, default_value_t = DEFAULT_QUEUE_CAP)]
    queue_cap: usize,
}

#[derive(Args)]
struct ReplayArgs {
    /// Directory written by `run`.
    #[arg(long, env = "HRTEAM_OUT", default_value = "out")]
    dir: PathBuf,
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Seed to replay with; defaults to the one in report.json.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    script: Option<PathBuf>,
    /// Also print the behavior tree each robot class runs.
    #[arg(long)]
    trees: bool,
}

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Code {
    Found = 0,
    Config = 2,
    Exhausted = 3,
    Timeout = 4,
    Invalid = 5,
    Io = 6,
    Mismatch = 7,
}

struct Failure {
    code: Code,
    msg: String,
}

impl Failure {
    fn new(code: Code, msg: impl fmt::Display) -> Self {
        Failure {
            code,
            msg: msg.to_string(),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = match &e {
            SimError::World(_) => Code::Invalid,
            SimError::Io(_) => Code::Io,
            _ => Code::Config,
        };
        Failure::new(code, e)
    }
}

impl From<service::ServiceError> for Failure {
    fn from(e: service::ServiceError) -> Self {
        match e {
            service::ServiceError::Sim(e) => e.into(),
            e => Failure::new(Code::Io, e),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new(Code::Io, format!("{}: {e}", path.display())))
}

fn load_scenario(path: Option<&Path>) -> Result<Scenario, Failure> {
    let src = match path {
        Some(p) => read(p)?,
        None => assets::SCENARIO.to_string(),
    };
    let s = Scenario::from_toml(&src).map_err(|e| Failure::new(Code::Invalid, e))?;
    s.validate().map_err(|e| Failure::new(Code::Invalid, e))?;
    Ok(s)
}

fn load_script(path: Option<&Path>, default: &str) -> Result<HumanScript, Failure> {
    let src = match path {
        Some(p) => read(p)?,
        None => default.to_string(),
    };
    HumanScript::parse(&src).map_err(|e| Failure::new(Code::Config, e))
}

fn sim_config(w: &World, human: HumanScript) -> Result<SimConfig, Failure> {
    Ok(SimConfig {
        scenario: load_scenario(w.scenario.as_deref())?,
        seed: w.seed,
        tick_limit: w.tick_limit,
        human,
    })
}

fn outcome_code(o: Option<Outcome>) -> Code {
    match o {
        Some(Outcome::Found) => Code::Found,
        Some(Outcome::Exhausted) => Code::Exhausted,
        Some(Outcome::Timeout) | None => Code::Timeout,
    }
}

fn run(a: RunArgs) -> Result<Code, Failure> {
    let human = load_script(a.script.as_deref(), assets::HUMAN_SCRIPT)?;
    let cfg = sim_config(&a.world, human)?;
    let report = Sim::new(cfg)?.run()?;
    report
        .write_dir(&a.out)
        .map_err(|e| Failure::new(Code::Io, format!("{}: {e}", a.out.display())))?;
    if !a.quiet {
        for line in report.chat() {
            println!("{line}");
        }
    }
    let outcome = report.outcome.map_or("none".to_string(), |o| o.to_string());
    println!(
        "outcome {outcome} ticks {} seed {} leader {}",
        report.ticks, report.seed, report.leader
    );
    println!("transcript {}", a.out.join("transcript.jsonl").display());
    println!("digests {}", a.out.join("digests.txt").display());
    Ok(outcome_code(report.outcome))
}

fn serve(a: ServeArgs) -> Result<Code, Failure> {
    let human = load_script(a.script.as_deref(), "")?;
    let session = Session::new(sim_config(&a.world, human)?)?;
    let cfg = ServeConfig {
        addr: a.addr,
        tick: Duration::from_millis(a.tick_ms.max(1)),
        queue_cap: a.queue_cap,
        out: a.out,
        paused: a.paused,
    };
    let server = service::start(session, cfg)?;
    eprintln!(
        "serving on {} (NDJSON over TCP, or WebSocket)",
        server.local_addr()
    );
    let report = server.wait()?;
    Ok(outcome_code(report.outcome))
}

fn replay_cmd(a: ReplayArgs) -> Result<Code, Failure> {
    let transcript = read(&a.dir.join("transcript.jsonl"))?;
    let digests = read(&a.dir.join("digests.txt"))?;
    let seed = match a.seed {
        Some(s) => s,
        None => {
            let report = read(&a.dir.join("report.json"))?;
            let v: serde_json::Value = serde_json::from_str(&report)
                .map_err(|e| Failure::new(Code::Io, format!("report.json: {e}")))?;
            v["seed"]
                .as_u64()
                .ok_or_else(|| Failure::new(Code::Io, "report.json has no seed"))?
        }
    };
    let scenario = load_scenario(a.scenario.as_deref())?;
    let (report, mismatch) = replay(scenario, Some(seed), &transcript, Some(&digests))?;
    match mismatch {
        None => {
            println!(
                "replay pass: {} envelopes, {} digests, seed {seed}",
                transcript.lines().count(),
                report.digests.len()
            );
            Ok(Code::Found)
        }
        Some(m) => {
            println!("replay FAIL: {m}");
            Ok(Code::Mismatch)
        }
    }
}

fn validate(a: ValidateArgs) -> Result<Code, Failure> {
    let src = match &a.scenario {
        Some(p) => read(p)?,
        None => assets::SCENARIO.to_string(),
    };
    let scenario = match Scenario::from_toml(&src) {
        Ok(s) => s,
        Err(e) => {
            println!("{e}");
            return Ok(Code::Invalid);
        }
    };
    let mut problems = scenario.violations();
    for class in [RobotClass::Ugv, RobotClass::Drone] {
        let tree = bt::build_template(class.capabilities());
        problems.extend(
            bt::validate(&tree)
                .into_iter()
                .map(|v| format!("{class} tree: {v}")),
        );
        if a.trees {
            println!("# {class}\n{tree}");
        }
    }
    if let Some(p) = &a.script {
        if let Err(e) = HumanScript::parse(&read(p)?) {
            problems.push(e.to_string());
        }
    }
    if problems.is_empty() {
        println!("ok: {}", scenario.name);
        return Ok(Code::Found);
    }
    for p in &problems {
        println!("{p}");
    }
    if let Err(WorldError::Invalid(_)) = scenario.validate() {
        return Ok(Code::Invalid);
    }
    Ok(Code::Config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Run(a) => run(a),
        Cmd::Serve(a) => serve(a),
        Cmd::Replay(a) => replay_cmd(a),
        Cmd::Validate(a) => validate(a),
    };
    match r {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code as u8)
        }
    }
}
