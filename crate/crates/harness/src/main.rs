use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use teleassist::codec::encode;
use teleassist::files::{load_scenario, load_script};
use teleassist::operator::{OperatorLink, OperatorScript, ScriptedOperator};
use teleassist::runner::Direction;
use teleassist::server::NetworkOperator;
use teleassist::timeline::{read_log, Outcome};
use teleassist::verify::{verify, Expectation};
use teleassist::{RunOptions, Runner};

#[derive(Parser)]
#[command(name = "teleassist", version, about = "Teleoperation driving simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario with a scripted or network operator.
    Run(RunArgs),
    /// Check a timeline log against an expectation file.
    Verify {
        #[arg(long, env = "TELEASSIST_LOG")]
        log: PathBuf,
        #[arg(long)]
        expect: PathBuf,
    },
    /// Run a scenario and write the wire transcript.
    Record {
        #[command(flatten)]
        run: RunArgs,
        /// Transcript output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Keep only every n-th state update.
        #[arg(long, default_value_t = 1)]
        state_every: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Built-in scenario name (A, B) or a scenario JSON file.
    #[arg(long, env = "TELEASSIST_SCENARIO", default_value = "A")]
    scenario: String,
    #[arg(long, env = "TELEASSIST_OPERATOR_SCRIPT")]
    operator_script: Option<PathBuf>,
    /// Serve a network operator on this address instead of a script.
    #[arg(long, env = "TELEASSIST_LISTEN", conflicts_with = "operator_script")]
    listen: Option<String>,
    #[arg(long, env = "TELEASSIST_SEED", default_value_t = 0)]
    seed: u64,
    /// Simulation step in seconds.
    #[arg(long, env = "TELEASSIST_TICK")]
    tick: Option<f64>,
    /// Timeline log (line-delimited JSON).
    #[arg(long, env = "TELEASSIST_LOG")]
    log: Option<PathBuf>,
    /// Directory for SVG snapshots.
    #[arg(long, env = "TELEASSIST_SVG_DUMP")]
    svg_dump: Option<PathBuf>,
    /// Simulated seconds before giving up.
    #[arg(long, env = "TELEASSIST_TIME_LIMIT")]
    time_limit: Option<f64>,
}

fn run(args: &RunArgs, transcript: bool) -> Result<teleassist::RunReport, String> {
    let mut scenario = load_scenario(&args.scenario).map_err(|e| e.to_string())?;
    if let Some(t) = args.tick {
        scenario.params.tick = t;
    }
    if let Some(t) = args.time_limit {
        scenario.params.time_limit = t;
    }
    scenario.validate().map_err(|e| e.to_string())?;
    let script = match &args.operator_script {
        Some(p) => load_script(p).map_err(|e| e.to_string())?,
        None => OperatorScript::default(),
    };
    let mut scripted;
    let mut network;
    let (operator, name): (&mut dyn OperatorLink, &str) = match &args.listen {
        Some(addr) => {
            network = NetworkOperator::listen(addr.as_str()).map_err(|e| format!("listen {addr}: {e}"))?;
            eprintln!("operator endpoint on {}", network.local_addr());
            (&mut network, "network")
        }
        None => {
            scripted = ScriptedOperator::new(script.clone());
            (&mut scripted, "scripted")
        }
    };
    let sink: Option<Box<dyn Write>> = match &args.log {
        Some(p) => Some(Box::new(BufWriter::new(
            File::create(p).map_err(|e| format!("{}: {e}", p.display()))?,
        ))),
        None => None,
    };
    let options = RunOptions {
        seed: args.seed,
        operator_name: name.into(),
        network: script.network,
        transcript,
        svg_dir: args.svg_dump.clone(),
    };
    let runner = Runner::new(scenario, operator, options, sink).map_err(|e| e.to_string())?;
    runner.run().map_err(|e| e.to_string())
}

fn exit_for(outcome: Outcome) -> ExitCode {
    match outcome {
        Outcome::Goal => ExitCode::SUCCESS,
        Outcome::TimeLimit => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Cmd::Run(args) => match run(&args, false) {
            Ok(report) => {
                eprintln!("{:?}", report.outcome);
                exit_for(report.outcome)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Cmd::Record {
            run: args,
            out,
            state_every,
        } => {
            let report = match run(&args, true) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            let mut w: Box<dyn Write> = match &out {
                Some(p) => match File::create(p) {
                    Ok(f) => Box::new(BufWriter::new(f)),
                    Err(e) => {
                        eprintln!("error: {}: {e}", p.display());
                        return ExitCode::FAILURE;
                    }
                },
                None => Box::new(BufWriter::new(io::stdout())),
            };
            let mut updates = 0usize;
            for entry in &report.transcript {
                if entry.frame.payload.kind() == "state_update" {
                    updates += 1;
                    if (updates - 1) % state_every.max(1) != 0 {
                        continue;
                    }
                }
                let dir = match entry.direction {
                    Direction::ToOperator => "vehicle",
                    Direction::ToVehicle => "operator",
                };
                if writeln!(w, "{{\"from\":\"{dir}\",\"frame\":{}}}", encode(&entry.frame)).is_err() {
                    return ExitCode::FAILURE;
                }
            }
            if w.flush().is_err() {
                return ExitCode::FAILURE;
            }
            exit_for(report.outcome)
        }
        Cmd::Verify { log, expect } => {
            let records = match File::open(&log).and_then(|f| read_log(BufReader::new(f))) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {}: {e}", log.display());
                    return ExitCode::FAILURE;
                }
            };
            let exp: Expectation = match std::fs::read_to_string(&expect)
                .map_err(|e| e.to_string())
                .and_then(|s| serde_json::from_str(&s).map_err(|e| e.to_string()))
            {
                Ok(e) => e,
                Err(e) => {
                    eprintln!("error: {}: {e}", expect.display());
                    return ExitCode::FAILURE;
                }
            };
            let report = verify(&records, &exp);
            print!("{}", report.render());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
