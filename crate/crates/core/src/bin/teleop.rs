use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use teleop_core::log::RunLog;
use teleop_core::service::expert::{BoxExpert, BoxExpertParams, HoldPilot};
use teleop_core::service::plot::export_plot_data;
use teleop_core::service::serve::{serve, ServeOptions};
use teleop_core::service::wire::schema;
use teleop_core::service::{first_divergence, record_trace, replay, run_trace, Trace};
use teleop_core::sim::{evaluate_scenario, Scenario};
use teleop_core::{Config, Mode, Result, TeleopError};

#[derive(Parser)]
#[command(name = "teleop", version, about = "Whole-body bilateral teleoperation of a wheeled humanoid")]
struct Cli {
    /// Config file; built-in defaults when absent.
    #[arg(long, global = true, env = "TELEOP_CONFIG")]
    config: Option<PathBuf>,
    /// Directory searched for scenarios given by name.
    #[arg(long, global = true, default_value = "fixtures")]
    fixtures: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PilotKind {
    /// Closed-loop box pusher.
    Box,
    /// Constant modes and arm pose.
    Hold,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a pilot trace, write the log, print metrics.
    Run {
        #[arg(long)]
        scenario: String,
        /// Overrides the scenario's own trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-simulate a log from its recorded inputs and compare.
    Replay {
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit nonzero when the replay diverges.
        #[arg(long)]
        check: bool,
    },
    /// Serve one live console session over TCP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Judge a log against its scenario.
    Eval { log: PathBuf },
    /// Write per-panel CSVs from a log.
    ExportPlotData {
        log: PathBuf,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
    /// Record a closed-loop pilot's inputs as a trace.
    RecordExpert {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_enum)]
        pilot: PilotKind,
        /// Hold pilot modes as three letters (sagittal, yaw, arms), e.g. DPD.
        #[arg(long, default_value = "DPD")]
        modes: String,
        /// Hold pilot hand target in the shoulder frame, m.
        #[arg(long, num_args = 3, default_values_t = [0.2, 0.0, -0.1], allow_hyphen_values = true)]
        reach: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Print the wire schema document.
    Schema,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    path.map_or_else(|| Ok(Config::default()), Config::load)
}

fn resolve_scenario(name: &str, fixtures: &Path) -> Result<Scenario> {
    let direct = Path::new(name);
    let path = if direct.is_file() {
        direct.to_path_buf()
    } else {
        fixtures.join(format!("{name}.toml"))
    };
    if !path.is_file() {
        return Err(TeleopError::Scenario(format!("unknown scenario `{name}` (looked for {})", path.display())));
    }
    Scenario::load(&path)
}

fn parse_modes(s: &str) -> Result<[Mode; 3]> {
    let m: Vec<Mode> = s
        .chars()
        .map(|c| match c.to_ascii_uppercase() {
            'P' => Ok(Mode::P),
            'D' => Ok(Mode::D),
            other => Err(TeleopError::Domain(format!("mode letter `{other}` is not P or D"))),
        })
        .collect::<Result<_>>()?;
    m.try_into()
        .map_err(|_| TeleopError::Domain("modes need exactly three letters".into()))
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| TeleopError::Domain(e.to_string()))?;
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    match writeln!(std::io::stdout(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = || load_config(cli.config.as_deref());
    match cli.command {
        Command::Run { scenario, trace, out } => {
            let cfg = cfg()?;
            let scenario = resolve_scenario(&scenario, &cli.fixtures)?;
            let trace_path = trace
                .or_else(|| scenario.trace.clone())
                .ok_or_else(|| TeleopError::Scenario("no trace: pass --trace".into()))?;
            let trace = Trace::load(&trace_path)?;
            let log = run_trace(&scenario, &trace, &cfg)?;
            let out = out.unwrap_or_else(|| PathBuf::from(format!("{}.log", scenario.name)));
            log.save(&out)?;
            eprintln!("log written to {}", out.display());
            print_json(&evaluate_scenario(&log)?)?;
        }
        Command::Replay { log, out, check } => {
            let original = RunLog::load(&log)?;
            let again = replay(&original)?;
            if let Some(out) = out {
                again.save(&out)?;
            }
            match first_divergence(&original, &again) {
                None => println!("identical: {} rows", again.len()),
                Some((row, col)) => {
                    println!("diverged at row {row}, column {col}");
                    if check {
                        return Ok(ExitCode::FAILURE);
                    }
                }
            }
        }
        Command::Serve { addr, out } => {
            let opts = ServeOptions::new(cfg()?, cli.fixtures.clone());
            let listener = TcpListener::bind(&addr)?;
            eprintln!("listening on {}", listener.local_addr()?);
            let report = serve(&listener, &opts)?;
            eprintln!(
                "session ended after {} ticks, {} malformed frames, period p99 {:.3} ms",
                report.log.len(),
                report.malformed,
                report.period_percentile(99.0) * 1e3
            );
            if let Some(out) = out {
                report.log.save(&out)?;
            }
        }
        Command::Eval { log } => print_json(&evaluate_scenario(&RunLog::load(&log)?)?)?,
        Command::ExportPlotData { log, out } => {
            for p in export_plot_data(&RunLog::load(&log)?, &out)? {
                println!("{}", p.display());
            }
        }
        Command::RecordExpert {
            scenario,
            pilot,
            modes,
            reach,
            out,
            log,
        } => {
            let cfg = cfg()?;
            let scenario = resolve_scenario(&scenario, &cli.fixtures)?;
            let (trace, run) = match pilot {
                PilotKind::Box => {
                    let mut p = BoxExpert::new(&cfg, BoxExpertParams::default());
                    let first = p.first_input();
                    record_trace(&scenario, &mut p, &cfg, &first)?
                }
                PilotKind::Hold => {
                    let reach: [f64; 3] = reach
                        .try_into()
                        .map_err(|_| TeleopError::Domain("--reach takes three numbers".into()))?;
                    let mut p = HoldPilot::new(parse_modes(&modes)?, reach, &cfg);
                    let first = p.input;
                    record_trace(&scenario, &mut p, &cfg, &first)?
                }
            };
            trace.save(&out)?;
            if let Some(log) = log {
                run.save(&log)?;
            }
            print_json(&evaluate_scenario(&run)?)?;
        }
        Command::Schema => print_json(&schema())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
