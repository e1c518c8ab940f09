use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing::info;

use tactile_rig::analysis::{analyze_archive, render_table};
use tactile_rig::config::{load_demo_config, parse_demo_config_with_warnings, validate_config};
use tactile_rig::gateway::{console_event, data_root, run_script_text, serve, ServeOptions};
use tactile_rig::persistence::{read_manifest, ArchivePaths};
use tactile_rig::rig::FingerModel;
use tactile_rig::runner::{replay_manifest, RunnerError, SessionRunner};
use tactile_rig::session::{OperatorEvent, Session, SessionEvent};

#[derive(Parser)]
#[command(
    version,
    about = "Two-point tactile discrimination sessions on a simulated delta rig"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a session: interactively on this terminal, from a script, or over WebSocket.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Random seed; drawn from the OS when omitted and always logged.
        #[arg(long)]
        seed: Option<u64>,
        /// Answer the debug-mode question with yes.
        #[arg(long)]
        debug: bool,
        /// Serve the session to a console at this address, e.g. 127.0.0.1:8765.
        #[arg(long, conflicts_with = "script")]
        serve: Option<String>,
        /// Pace live FT frames at rig speed (with --serve).
        #[arg(long, requires = "serve")]
        realtime: bool,
        /// Play commands from a file, one JSON command per line.
        #[arg(long)]
        script: Option<PathBuf>,
    },
    /// Continue an interrupted session from its directory.
    Resume {
        dir: PathBuf,
        #[arg(long)]
        serve: Option<String>,
    },
    /// Re-run a session from its manifest and compare the files produced.
    Replay {
        manifest: PathBuf,
        /// Where to write the replayed session (default: a temporary directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Proportion correct per distance and a psychometric fit.
    Analyze {
        dir: PathBuf,
        #[arg(long, conflicts_with = "table")]
        json: bool,
        #[arg(long)]
        table: bool,
    },
    /// Check a config file and list every problem found.
    ValidateConfig { config: PathBuf },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(io::stderr)
        .init();
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

type BoxError = Box<dyn std::error::Error>;

fn run(command: Command) -> Result<ExitCode, BoxError> {
    match command {
        Command::Run {
            config,
            seed,
            debug,
            serve: addr,
            realtime,
            script,
        } => {
            let cfg = load_demo_config(&config)?;
            let seed = seed.unwrap_or_else(rand::random);
            info!(seed, config = %config.display(), "starting session");
            let root = data_root(&cfg);
            let mut runner = SessionRunner::new(Session::start(cfg, FingerModel::default(), seed)?, root);
            if debug {
                runner.submit(OperatorEvent::Confirm(true))?;
            }
            if let Some(path) = script {
                let out = run_script_text(runner, &fs::read_to_string(&path)?)?;
                println!("{} trials, {}", out.trials, out.runner.session().prompt());
                if let Some(p) = out.paths {
                    println!("archive: {}", p.dir.display());
                }
                Ok(ExitCode::SUCCESS)
            } else if let Some(addr) = addr {
                serve_until_done(runner, &addr, realtime)
            } else {
                interactive(runner)
            }
        }
        Command::Resume { dir, serve: addr } => {
            let runner = SessionRunner::resume(&dir)?;
            info!(seed = runner.session().seed(), dir = %dir.display(), "resuming session");
            match addr {
                Some(addr) => serve_until_done(runner, &addr, false),
                None => interactive(runner),
            }
        }
        Command::Replay { manifest, out } => {
            let m = read_manifest(&manifest)?;
            let root =
                out.unwrap_or_else(|| std::env::temp_dir().join(format!("tactile-rig-replay-{}", std::process::id())));
            let runner = replay_manifest(&m, &root)?;
            let Some(replayed) = runner.paths() else {
                println!("session ended before intake; nothing to compare");
                return Ok(ExitCode::SUCCESS);
            };
            let original_dir = manifest.parent().unwrap_or(Path::new("."));
            let mut same = true;
            for (name, a, b) in compared_files(replayed, original_dir) {
                let equal = fs::read(&a).ok() == fs::read(&b).ok();
                same &= equal;
                println!("{:<10} {name}", if equal { "identical" } else { "DIFFERS" });
            }
            println!("replayed into {}", replayed.dir.display());
            Ok(if same { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Analyze { dir, json, table: _ } => {
            let summary = analyze_archive(&dir)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                print!("{}", render_table(&summary));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateConfig { config } => {
            let text = fs::read_to_string(&config)?;
            let (cfg, warnings) = parse_demo_config_with_warnings(&text)?;
            for w in &warnings {
                println!("warning: {w}");
            }
            let report = validate_config(&cfg);
            for f in &report.findings {
                println!("invalid: {f}");
            }
            if report.is_runnable() {
                let n = cfg.distances().len() as u32;
                let trials = cfg.experiment.number_training_trials + cfg.experiment.number_presentations * n;
                println!("ok: {n} distances, {trials} trials per session");
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
    }
}

fn compared_files(replayed: &ArchivePaths, original_dir: &Path) -> Vec<(String, PathBuf, PathBuf)> {
    [
        &replayed.data_xml,
        &replayed.participant_csv,
        &replayed.trial_csv,
        &replayed.tmp_csv,
    ]
    .into_iter()
    .filter_map(|p| {
        let name = p.file_name()?.to_string_lossy().into_owned();
        Some((name.clone(), p.clone(), original_dir.join(name)))
    })
    .collect()
}

fn serve_until_done(runner: SessionRunner, addr: &str, realtime: bool) -> Result<ExitCode, BoxError> {
    let handle = serve(runner, addr, ServeOptions { realtime })?;
    println!("listening on ws://{}", handle.local_addr());
    handle.wait_finished(None);
    // Let connections drain the final frames.
    std::thread::sleep(std::time::Duration::from_millis(300));
    let runner = handle.shutdown();
    report_end(&runner);
    Ok(ExitCode::SUCCESS)
}

fn interactive(mut runner: SessionRunner) -> Result<ExitCode, BoxError> {
    let stdin = io::stdin();
    let mut out = io::stdout();
    writeln!(out, "{}", runner.session().prompt())?;
    let mut lines = stdin.lock().lines();
    while !runner.session().is_finished() {
        out.flush()?;
        let event = match lines.next() {
            Some(line) => match console_event(runner.session().phase(), &line?) {
                Some(e) => e,
                None => {
                    writeln!(out, "{}", runner.session().prompt())?;
                    continue;
                }
            },
            None => OperatorEvent::Escape,
        };
        match runner.submit(event) {
            Ok(events) => {
                for e in events {
                    match e {
                        SessionEvent::Phase { prompt, .. } => writeln!(out, "{prompt}")?,
                        SessionEvent::Message { text } => writeln!(out, "{text}")?,
                        _ => {}
                    }
                }
            }
            Err(RunnerError::Session(e)) => writeln!(out, "{e}")?,
            Err(e) => return Err(e.into()),
        }
    }
    report_end(&runner);
    Ok(ExitCode::SUCCESS)
}

fn report_end(runner: &SessionRunner) {
    let session = runner.session();
    println!("{} trials recorded", session.records().len());
    if let Some(p) = runner.paths() {
        println!("archive: {}", p.dir.display());
    }
}
