use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use log::{info, warn};

use geosync::calendar::parse_ics_bytes;
use geosync::server::{net, replay_text, Server, ServerState};
use geosync::sim::{run_scenario, Scenario};
use geosync::wire::{status_value, to_canonical};
use geosync::{ActivityId, Timestamp};

#[derive(Parser)]
#[command(name = "geosync", version, about = "Location-based activity synchronisation server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the line protocol over TCP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7070")]
        listen: String,
        #[arg(long)]
        log: PathBuf,
    },
    /// Create activities from the enrolled events of a calendar file.
    Ingest {
        file: PathBuf,
        #[arg(long)]
        system_address: String,
        #[arg(long)]
        log: PathBuf,
        /// Creation time; defaults to the wall clock.
        #[arg(long)]
        now: Option<u64>,
    },
    /// Print one activity's status as a canonical JSON line.
    Status {
        activity: String,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        now: Option<u64>,
    },
    /// Replay a log and print the status of every activity.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        now: Option<u64>,
    },
    /// Run a scenario, or compare its transcript with a golden file.
    Simulate {
        scenario: PathBuf,
        /// Golden transcript to compare against (requires --check).
        golden: Option<PathBuf>,
        #[arg(long, requires = "golden")]
        check: bool,
        #[arg(long, conflicts_with = "check")]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn clock(now: Option<u64>) -> Timestamp {
    now.map(Timestamp).unwrap_or_else(net::wall_clock)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Serve { listen, log } => {
            let server = Server::open(&log).with_context(|| format!("opening {}", log.display()))?;
            let listener = TcpListener::bind(&listen).with_context(|| format!("binding {listen}"))?;
            info!("listening on {}", listener.local_addr()?);
            net::run(listener, server, net::wall_clock)?;
        }
        Command::Ingest {
            file,
            system_address,
            log,
            now,
        } => {
            let bytes = std::fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
            let import = parse_ics_bytes(&bytes, &system_address)?;
            for w in &import.warnings {
                warn!("{w}");
            }
            let mut server = Server::open(&log).with_context(|| format!("opening {}", log.display()))?;
            let now = clock(now);
            for draft in &import.drafts {
                let spec = draft
                    .to_spec()
                    .with_context(|| format!("event {}", draft.uid))?;
                let (id, _) = server
                    .create_activity(spec, now, Some(draft.uid.clone()))
                    .with_context(|| format!("event {}", draft.uid))?;
                println!("{id}\t{}", draft.uid);
            }
            info!(
                "created {} activities, skipped {} events",
                import.drafts.len(),
                import.skipped
            );
        }
        Command::Status { activity, log, now } => {
            let state = load(&log)?;
            let view = state
                .status(&ActivityId::new(activity), clock(now))
                .map_err(|r| anyhow::anyhow!("{}: {}", r.code.as_str(), r.detail))?;
            println!("{}", to_canonical(&status_value(&view)));
        }
        Command::Replay { log, now } => {
            let state = load(&log)?;
            let now = clock(now);
            for a in state.activities() {
                let view = state.status(a.id(), now).expect("listed activity exists");
                println!("{}", to_canonical(&status_value(&view)));
            }
        }
        Command::Simulate {
            scenario,
            golden,
            check,
            out,
        } => return simulate(&scenario, golden.as_deref(), check, out.as_deref()),
    }
    Ok(ExitCode::SUCCESS)
}

fn load(log: &Path) -> anyhow::Result<ServerState> {
    let text = std::fs::read_to_string(log).with_context(|| format!("reading {}", log.display()))?;
    Ok(replay_text(&text)?)
}

fn simulate(
    scenario: &Path,
    golden: Option<&Path>,
    check: bool,
    out: Option<&Path>,
) -> anyhow::Result<ExitCode> {
    if golden.is_some() && !check {
        bail!("a golden transcript is only accepted with --check");
    }
    let transcript = run_scenario(&Scenario::load(scenario)?)?.to_jsonl();
    if let Some(golden) = golden {
        let expected = std::fs::read_to_string(golden)
            .with_context(|| format!("reading {}", golden.display()))?;
        return Ok(match first_divergence(&expected, &transcript) {
            None => {
                println!("ok: {} lines match", transcript.lines().count());
                ExitCode::SUCCESS
            }
            Some((line, want, got)) => {
                println!("mismatch at line {line}");
                println!("expected: {}", want.unwrap_or("<end of file>"));
                println!("actual:   {}", got.unwrap_or("<end of file>"));
                ExitCode::FAILURE
            }
        });
    }
    match out {
        Some(path) => std::fs::write(path, &transcript)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{transcript}"),
    }
    Ok(ExitCode::SUCCESS)
}

/// One-based line number of the first difference, with both sides.
fn first_divergence<'a>(
    expected: &'a str,
    actual: &'a str,
) -> Option<(usize, Option<&'a str>, Option<&'a str>)> {
    let mut want = expected.lines();
    let mut got = actual.lines();
    let mut n = 0;
    loop {
        n += 1;
        match (want.next(), got.next()) {
            (None, None) => return None,
            (w, g) if w == g => continue,
            (w, g) => return Some((n, w, g)),
        }
    }
}
