//! Network and headless front ends for a [`SessionRunner`].
//!
//! [`serve`] exposes a session over WebSocket. One engine thread owns the
//! runner and applies commands one at a time, in arrival order, from a
//! bounded queue; each connection thread forwards parsed commands to that
//! queue and writes the events fanned out to it. The first connection to
//! send a command holds the operator role until it disconnects; other
//! connections only watch.
//!
//! [`run_scripted`] plays a file of commands against a session with no
//! network involved.

use std::collections::HashMap;
use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, SyncSender, TrySendError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use thiserror::Error;
use tracing::{debug, info, warn};
use tungstenite::{Message, WebSocket};

use crate::config::{load_demo_config, ConfigError, DemoConfig};
use crate::persistence::{ArchivePaths, SessionArchive};
use crate::rig::FingerModel;
use crate::runner::{RunnerError, SessionRunner};
use crate::session::{Choice, IntakeField, OperatorEvent, Session, SessionError, SessionEvent, SessionPhase};
use crate::wire::{wire_body, AckPayload, ErrorCode, ErrorPayload, WireBody, WireCommand, WireEvent, WireSnapshot};

/// Environment variable that overrides the config's data path.
pub const DATA_ENV: &str = "TACTILE_RIG_DATA";
/// Depth of the command queue; commands beyond it are refused.
pub const QUEUE_DEPTH: usize = 16;
/// Minimum virtual time between two `ft_live` frames.
pub const FT_LIVE_PERIOD: f64 = 0.1;
const POLL: Duration = Duration::from_millis(5);

/// Where session directories go: `$TACTILE_RIG_DATA` if set, otherwise the
/// config's data path.
pub fn data_root(config: &DemoConfig) -> PathBuf {
    match std::env::var_os(DATA_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(&config.experiment.data_path),
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ServeOptions {
    /// Hold `ft_live` frames back so they leave at the rig's own pace.
    pub realtime: bool,
}

type ConnId = u64;

enum EngineMsg {
    Join(ConnId, Sender<WireBody>),
    Leave(ConnId),
    Command(ConnId, WireCommand),
    Shutdown,
}

/// A running server. Dropping it without [`ServerHandle::shutdown`] leaves
/// the threads running until the process exits.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    finished: Arc<AtomicBool>,
    queue: SyncSender<EngineMsg>,
    accept: JoinHandle<()>,
    engine: JoinHandle<SessionRunner>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Whether the session has reached a terminal phase.
    pub fn is_finished(&self) -> bool {
        self.finished.load(Ordering::SeqCst)
    }

    /// Blocks until the session ends or `timeout` passes.
    pub fn wait_finished(&self, timeout: Option<Duration>) -> bool {
        let start = Instant::now();
        while !self.is_finished() {
            if timeout.is_some_and(|t| start.elapsed() >= t) {
                return false;
            }
            thread::sleep(Duration::from_millis(20));
        }
        true
    }

    /// Stops accepting, closes connections and hands the runner back.
    pub fn shutdown(self) -> SessionRunner {
        self.stop.store(true, Ordering::SeqCst);
        // Blocking send: the engine is draining the queue.
        let _ = self.queue.send(EngineMsg::Shutdown);
        let _ = self.accept.join();
        self.engine.join().expect("engine thread panicked")
    }
}

/// Serves `runner` on `addr` (`"127.0.0.1:0"` picks a free port).
pub fn serve(runner: SessionRunner, addr: impl ToSocketAddrs, options: ServeOptions) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let finished = Arc::new(AtomicBool::new(runner.session().is_finished()));
    let (queue, rx) = mpsc::sync_channel(QUEUE_DEPTH);

    let engine = {
        let finished = finished.clone();
        thread::Builder::new()
            .name("session-engine".into())
            .spawn(move || Engine::new(runner, options, finished).run(rx))?
    };
    let accept = {
        let stop = stop.clone();
        let queue = queue.clone();
        thread::Builder::new()
            .name("gateway-accept".into())
            .spawn(move || accept_loop(listener, queue, stop))?
    };
    info!(%local, "serving session");
    Ok(ServerHandle {
        addr: local,
        stop,
        finished,
        queue,
        accept,
        engine,
    })
}

fn accept_loop(listener: TcpListener, queue: SyncSender<EngineMsg>, stop: Arc<AtomicBool>) {
    let mut next_id: ConnId = 1;
    let mut conns = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let id = next_id;
                next_id += 1;
                debug!(id, %peer, "connection");
                let queue = queue.clone();
                let stop = stop.clone();
                conns.push(thread::spawn(move || {
                    if let Err(e) = connection(stream, id, queue.clone(), stop) {
                        debug!(id, error = %e, "connection closed");
                    }
                    let _ = queue.send(EngineMsg::Leave(id));
                }));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => warn!(error = %e, "accept failed"),
        }
    }
    for c in conns {
        let _ = c.join();
    }
}

#[allow(clippy::result_large_err)] // tungstenite's own Result
fn connection(
    stream: TcpStream,
    id: ConnId,
    queue: SyncSender<EngineMsg>,
    stop: Arc<AtomicBool>,
) -> tungstenite::Result<()> {
    stream.set_nonblocking(false)?;
    let mut ws = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::Io(io::ErrorKind::WouldBlock.into()),
    })?;
    ws.get_ref().set_read_timeout(Some(POLL))?;
    let (out_tx, out_rx) = mpsc::channel();
    // The engine answers Join with the snapshot, so it is always first.
    if queue.send(EngineMsg::Join(id, out_tx.clone())).is_err() {
        return Ok(());
    }
    let mut seq = 0u64;
    loop {
        if stop.load(Ordering::SeqCst) {
            flush_outgoing(&mut ws, &out_rx, &mut seq)?;
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
        flush_outgoing(&mut ws, &out_rx, &mut seq)?;
        match ws.read() {
            Ok(Message::Text(text)) => {
                for line in text.lines().filter(|l| !l.trim().is_empty()) {
                    match WireCommand::parse(line) {
                        Ok(cmd) => match queue.try_send(EngineMsg::Command(id, cmd)) {
                            Ok(()) => {}
                            Err(TrySendError::Full(EngineMsg::Command(_, cmd))) => {
                                let _ =
                                    out_tx.send(error(ErrorCode::Busy, "command queue is full", Some(cmd.request_id)));
                            }
                            Err(_) => return Ok(()),
                        },
                        Err(e) => {
                            let _ = out_tx.send(error(ErrorCode::Malformed, &e.to_string(), request_id_of(line)));
                        }
                    }
                }
            }
            Ok(Message::Binary(_)) => {
                let _ = out_tx.send(error(ErrorCode::Malformed, "binary frames are not accepted", None));
            }
            Ok(Message::Close(_)) => {
                let _ = ws.flush();
                return Ok(());
            }
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e),
        }
    }
}

#[allow(clippy::result_large_err)] // tungstenite's own Result
fn flush_outgoing(ws: &mut WebSocket<TcpStream>, rx: &Receiver<WireBody>, seq: &mut u64) -> tungstenite::Result<()> {
    let mut wrote = false;
    while let Ok(body) = rx.try_recv() {
        *seq += 1;
        let frame = WireEvent { seq: *seq, body }.to_line() + "\n";
        ws.write(Message::Text(frame))?;
        wrote = true;
    }
    if wrote {
        ws.flush()?;
    }
    Ok(())
}

// Best effort, so a malformed command can still be matched to its request.
fn request_id_of(line: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(line).ok()?;
    v.get("request_id")?.as_str().map(str::to_owned)
}

fn error(code: ErrorCode, message: &str, request_id: Option<String>) -> WireBody {
    WireBody::Error(ErrorPayload {
        code,
        message: message.to_owned(),
        request_id,
    })
}

struct Engine {
    runner: SessionRunner,
    options: ServeOptions,
    finished: Arc<AtomicBool>,
    subscribers: Vec<(ConnId, Sender<WireBody>)>,
    operator: Option<ConnId>,
    answered: HashMap<String, WireBody>,
    last_ft: Option<f64>,
    // Wall clock and virtual time at the first paced frame.
    pace: Option<(Instant, f64)>,
}

impl Engine {
    fn new(runner: SessionRunner, options: ServeOptions, finished: Arc<AtomicBool>) -> Self {
        Self {
            runner,
            options,
            finished,
            subscribers: Vec::new(),
            operator: None,
            answered: HashMap::new(),
            last_ft: None,
            pace: None,
        }
    }

    fn run(mut self, rx: Receiver<EngineMsg>) -> SessionRunner {
        while let Ok(msg) = rx.recv() {
            match msg {
                EngineMsg::Join(id, tx) => {
                    let _ = tx.send(WireBody::Snapshot(WireSnapshot::of(self.runner.session())));
                    self.subscribers.push((id, tx));
                }
                EngineMsg::Leave(id) => {
                    self.subscribers.retain(|(c, _)| *c != id);
                    if self.operator == Some(id) {
                        self.operator = None;
                    }
                }
                EngineMsg::Command(id, cmd) => self.command(id, cmd),
                EngineMsg::Shutdown => break,
            }
        }
        self.runner
    }

    fn send_to(&self, id: ConnId, body: WireBody) {
        if let Some((_, tx)) = self.subscribers.iter().find(|(c, _)| *c == id) {
            let _ = tx.send(body);
        }
    }

    fn broadcast(&self, body: &WireBody) {
        for (_, tx) in &self.subscribers {
            let _ = tx.send(body.clone());
        }
    }

    fn command(&mut self, id: ConnId, cmd: WireCommand) {
        match self.operator {
            Some(op) if op != id => {
                let body = error(
                    ErrorCode::NotOperator,
                    "another console is operating this session",
                    Some(cmd.request_id),
                );
                self.send_to(id, body);
                return;
            }
            _ => self.operator = Some(id),
        }
        if let Some(previous) = self.answered.get(&cmd.request_id) {
            let body = match previous {
                WireBody::Ack(a) => WireBody::Ack(AckPayload {
                    duplicate: true,
                    ..a.clone()
                }),
                other => other.clone(),
            };
            self.send_to(id, body);
            return;
        }
        let reply = match self.runner.submit(cmd.event()) {
            Ok(events) => {
                for e in &events {
                    self.publish(e);
                }
                WireBody::Ack(AckPayload {
                    request_id: cmd.request_id.clone(),
                    duplicate: false,
                })
            }
            Err(e) => error(ErrorCode::Rejected, &e.to_string(), Some(cmd.request_id.clone())),
        };
        self.finished
            .store(self.runner.session().is_finished(), Ordering::SeqCst);
        self.answered.insert(cmd.request_id, reply.clone());
        self.send_to(id, reply);
    }

    fn publish(&mut self, event: &SessionEvent) {
        if let SessionEvent::Ft { sample, .. } = event {
            if self
                .last_ft
                .is_some_and(|t| sample.timestamp - t < FT_LIVE_PERIOD - 1e-9)
            {
                return;
            }
            self.last_ft = Some(sample.timestamp);
            if self.options.realtime {
                let (wall, sim) = *self.pace.get_or_insert((Instant::now(), sample.timestamp));
                let due = wall + Duration::from_secs_f64((sample.timestamp - sim).max(0.0));
                if let Some(wait) = due.checked_duration_since(Instant::now()) {
                    thread::sleep(wait);
                }
            }
        }
        self.broadcast(&wire_body(event, self.runner.session()));
    }
}

/// Maps a line typed at the terminal console to an operator event. `y`/`n`
/// answer yes/no questions, `1`/`2` (or `first`/`second`, `female`/`male`)
/// work the option selectors, `esc` escapes, and a line starting with `{` is
/// read as a [`WireCommand`].
pub fn console_event(phase: &SessionPhase, line: &str) -> Option<OperatorEvent> {
    let text = line.trim_end_matches(['\r', '\n']);
    if text.trim_start().starts_with('{') {
        return WireCommand::parse(text).ok().map(|c| c.event());
    }
    let key = text.trim().to_ascii_lowercase();
    if key == "esc" || key == "escape" {
        return Some(OperatorEvent::Escape);
    }
    match phase {
        SessionPhase::AwaitDebugChoice | SessionPhase::AwaitInitConfirm | SessionPhase::AwaitStepperMove { .. } => {
            match key.as_str() {
                "y" | "yes" => Some(OperatorEvent::Confirm(true)),
                "n" | "no" => Some(OperatorEvent::Confirm(false)),
                _ => None,
            }
        }
        SessionPhase::Intake {
            field: IntakeField::Gender,
        } => match key.as_str() {
            "1" | "f" | "female" => Some(OperatorEvent::Select(Choice::Female)),
            "2" | "m" | "male" => Some(OperatorEvent::Select(Choice::Male)),
            _ => Some(OperatorEvent::Text(text.to_owned())),
        },
        SessionPhase::Intake { .. } => Some(OperatorEvent::Text(text.to_owned())),
        SessionPhase::AwaitResponse => match key.as_str() {
            "1" | "first" => Some(OperatorEvent::Select(Choice::First)),
            "2" | "second" => Some(OperatorEvent::Select(Choice::Second)),
            _ => Some(OperatorEvent::Text(text.to_owned())),
        },
        _ => None,
    }
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read script {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("script line {line}: malformed command: {message}")]
    Malformed { line: usize, message: String },
    #[error("script line {line}: {message} (phase {phase})")]
    Mismatch {
        line: usize,
        phase: String,
        message: String,
    },
    #[error("script ended while the session awaits: {phase}")]
    Incomplete { phase: String },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Runner(#[from] RunnerError),
}

#[derive(Debug)]
pub struct ScriptOutcome {
    pub phase: SessionPhase,
    pub trials: usize,
    /// Absent when the session ended before intake completed.
    pub archive: Option<SessionArchive>,
    pub paths: Option<ArchivePaths>,
    pub runner: SessionRunner,
}

fn phase_name(phase: &SessionPhase) -> String {
    serde_json::to_value(phase)
        .ok()
        .and_then(|v| v.get("phase").and_then(|p| p.as_str()).map(str::to_owned))
        .unwrap_or_else(|| format!("{phase:?}"))
}

/// Plays `script` (one [`WireCommand`] JSON object per line; blank lines and
/// lines starting with `#` are skipped) against a fresh session.
pub fn run_script_text(runner: SessionRunner, script: &str) -> Result<ScriptOutcome, ScriptError> {
    let mut runner = runner;
    for (i, raw) in script.lines().enumerate() {
        let line = i + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let cmd = WireCommand::parse(text).map_err(|e| ScriptError::Malformed {
            line,
            message: e.to_string(),
        })?;
        let phase = phase_name(runner.session().phase());
        match runner.submit(cmd.event()) {
            Ok(_) => {}
            Err(RunnerError::Session(e)) => {
                return Err(ScriptError::Mismatch {
                    line,
                    phase,
                    message: e.to_string(),
                })
            }
            Err(e) => return Err(e.into()),
        }
    }
    if !runner.session().is_finished() {
        return Err(ScriptError::Incomplete {
            phase: runner.session().prompt(),
        });
    }
    Ok(ScriptOutcome {
        phase: runner.session().phase().clone(),
        trials: runner.session().records().len(),
        archive: runner.archive().cloned(),
        paths: runner.paths().cloned(),
        runner,
    })
}

/// Headless run of `script_path` against the config at `config_path`,
/// writing under `data_root`.
pub fn run_scripted(
    config_path: &Path,
    script_path: &Path,
    seed: u64,
    data_root: &Path,
) -> Result<ScriptOutcome, ScriptError> {
    let config = load_demo_config(config_path)?;
    let script = std::fs::read_to_string(script_path).map_err(|source| ScriptError::Io {
        path: script_path.to_path_buf(),
        source,
    })?;
    let session = Session::start(config, FingerModel::default(), seed)?;
    run_script_text(SessionRunner::new(session, data_root), &script)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autopilot::{demo_participant, drive, AlwaysFirst, Autopilot};
    use crate::wire::script_from_events;

    fn young_script(escape_after: Option<usize>) -> String {
        let mut session = Session::start(DemoConfig::young(), FingerModel::default(), 5).unwrap();
        let mut pilot = Autopilot::new(demo_participant(), false, AlwaysFirst);
        pilot.escape_after = escape_after;
        let log = drive(&mut session, &mut pilot).unwrap();
        script_from_events(&log)
    }

    #[test]
    fn scripted_full_run() {
        let dir = tempfile::tempdir().unwrap();
        let session = Session::start(DemoConfig::young(), FingerModel::default(), 5).unwrap();
        let out = run_script_text(SessionRunner::new(session, dir.path()), &young_script(None)).unwrap();
        assert_eq!(out.phase, SessionPhase::SessionComplete);
        assert_eq!(out.trials, 71);
        assert!(out.paths.unwrap().data_xml.exists());
    }

    #[test]
    fn scripted_escape_after_three() {
        let dir = tempfile::tempdir().unwrap();
        let session = Session::start(DemoConfig::young(), FingerModel::default(), 5).unwrap();
        let out = run_script_text(SessionRunner::new(session, dir.path()), &young_script(Some(3))).unwrap();
        assert!(matches!(out.phase, SessionPhase::Cancelled { .. }));
        assert_eq!(out.archive.unwrap().trials.len(), 3);
    }

    #[test]
    fn script_mismatch_reports_line_and_phase() {
        let dir = tempfile::tempdir().unwrap();
        let session = Session::start(DemoConfig::young(), FingerModel::default(), 5).unwrap();
        let script = format!(
            "# header\n{}\n{}\n",
            WireCommand::new("a", OperatorEvent::Confirm(false)).to_line(),
            WireCommand::new("b", OperatorEvent::Confirm(true)).to_line()
        );
        let err = run_script_text(SessionRunner::new(session, dir.path()), &script).unwrap_err();
        match err {
            ScriptError::Mismatch { line, phase, .. } => {
                assert_eq!(line, 3);
                assert_eq!(phase, "intake");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn console_keys() {
        use crate::session::IntakeField;
        let gender = SessionPhase::Intake {
            field: IntakeField::Gender,
        };
        assert_eq!(
            console_event(&SessionPhase::AwaitDebugChoice, "Y"),
            Some(OperatorEvent::Confirm(true))
        );
        assert_eq!(console_event(&SessionPhase::AwaitInitConfirm, "maybe"), None);
        assert_eq!(console_event(&gender, "2"), Some(OperatorEvent::Select(Choice::Male)));
        // Anything else is passed on as typing, which the session refuses.
        assert_eq!(
            console_event(&gender, "Woman"),
            Some(OperatorEvent::Text("Woman".into()))
        );
        assert_eq!(
            console_event(&SessionPhase::AwaitResponse, "first"),
            Some(OperatorEvent::Select(Choice::First))
        );
        assert_eq!(
            console_event(&SessionPhase::AwaitResponse, "esc"),
            Some(OperatorEvent::Escape)
        );
        assert_eq!(
            console_event(
                &SessionPhase::Intake {
                    field: IntakeField::Name
                },
                "Ada\n"
            ),
            Some(OperatorEvent::Text("Ada".into()))
        );
    }
}
