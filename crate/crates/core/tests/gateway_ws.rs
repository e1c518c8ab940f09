use std::net::{SocketAddr, TcpStream};
use std::time::{Duration, Instant};

use tactile_rig::config::DemoConfig;
use tactile_rig::gateway::{serve, ServeOptions, ServerHandle, FT_LIVE_PERIOD};
use tactile_rig::rig::FingerModel;
use tactile_rig::runner::SessionRunner;
use tactile_rig::session::{CancelReason, Choice, IntakeField, OperatorEvent, Session, SessionPhase, DEBUG_PROMPT};
use tactile_rig::wire::{EndReason, ErrorCode, WireBody, WireCommand, WireEvent};
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

struct Client {
    ws: WebSocket<MaybeTlsStream<TcpStream>>,
    seen: Vec<WireEvent>,
    // Scan positions in `seen` for `until` and `reply_to`.
    event_pos: usize,
    reply_pos: usize,
    next_id: u32,
}

impl Client {
    fn connect(addr: SocketAddr) -> Self {
        let (ws, _) = tungstenite::connect(format!("ws://{addr}")).unwrap();
        if let MaybeTlsStream::Plain(s) = ws.get_ref() {
            s.set_read_timeout(Some(Duration::from_millis(20))).unwrap();
        }
        Self {
            ws,
            seen: Vec::new(),
            event_pos: 0,
            reply_pos: 0,
            next_id: 0,
        }
    }

    fn send_raw(&mut self, text: &str) {
        self.ws.send(Message::Text(text.to_owned())).unwrap();
    }

    fn send(&mut self, event: OperatorEvent) -> String {
        self.next_id += 1;
        let id = format!("c{}", self.next_id);
        self.send_raw(&WireCommand::new(id.clone(), event).to_line());
        id
    }

    fn pump(&mut self) {
        match self.ws.read() {
            Ok(Message::Text(text)) => {
                for line in text.lines().filter(|l| !l.is_empty()) {
                    self.seen.push(WireEvent::parse(line).unwrap());
                }
            }
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
            Err(e) => panic!("read failed: {e}"),
        }
    }

    fn scan(&mut self, what: &str, reply: bool, pred: impl Fn(&WireEvent) -> bool) -> WireEvent {
        let deadline = Instant::now() + Duration::from_secs(10);
        loop {
            let pos = if reply { self.reply_pos } else { self.event_pos };
            if let Some(i) = self.seen[pos..].iter().position(&pred) {
                let found = pos + i;
                if reply {
                    self.reply_pos = found + 1;
                } else {
                    self.event_pos = found + 1;
                }
                return self.seen[found].clone();
            }
            assert!(Instant::now() < deadline, "timed out waiting for {what}");
            self.pump();
        }
    }

    /// Next frame, after the last one returned here, satisfying `pred`.
    fn until(&mut self, what: &str, pred: impl Fn(&WireEvent) -> bool) -> WireEvent {
        self.scan(what, false, pred)
    }

    fn reply_to(&mut self, id: &str) -> WireBody {
        let id = id.to_owned();
        self.scan(&format!("reply to {id}"), true, move |e| match &e.body {
            WireBody::Ack(a) => a.request_id == id,
            WireBody::Error(err) => err.request_id.as_deref() == Some(&id),
            _ => false,
        })
        .body
    }

    fn command(&mut self, event: OperatorEvent) -> WireBody {
        let id = self.send(event);
        self.reply_to(&id)
    }
}

fn young_server() -> ServerHandle {
    let root = tempfile::tempdir().unwrap().keep();
    let session = Session::start(DemoConfig::young(), FingerModel::default(), 9).unwrap();
    serve(
        SessionRunner::new(session, root),
        "127.0.0.1:0",
        ServeOptions::default(),
    )
    .unwrap()
}

fn intake(c: &mut Client) {
    for text in ["p01", "Ada", "Lovelace", "36"] {
        assert!(matches!(c.command(OperatorEvent::Text(text.into())), WireBody::Ack(_)));
    }
    assert!(matches!(
        c.command(OperatorEvent::Select(Choice::Female)),
        WireBody::Ack(_)
    ));
    assert!(matches!(
        c.command(OperatorEvent::Text(String::new())),
        WireBody::Ack(_)
    ));
}

#[test]
fn first_frame_is_snapshot_with_debug_prompt() {
    let server = young_server();
    let mut c = Client::connect(server.local_addr());
    let first = c.until("first frame", |_| true);
    assert_eq!(first.seq, 1);
    match first.body {
        WireBody::Snapshot(s) => {
            assert_eq!(s.session.prompt, DEBUG_PROMPT);
            assert_eq!(s.session.phase, SessionPhase::AwaitDebugChoice);
            assert!(s.ended.is_none());
        }
        other => panic!("expected snapshot, got {}", other.kind()),
    }
    server.shutdown();
}

#[test]
fn declining_init_ends_cancelled() {
    let server = young_server();
    let mut c = Client::connect(server.local_addr());
    assert!(matches!(c.command(OperatorEvent::Confirm(false)), WireBody::Ack(_)));
    intake(&mut c);
    assert!(matches!(c.command(OperatorEvent::Confirm(false)), WireBody::Ack(_)));
    let end = c.until("session_end", |e| matches!(e.body, WireBody::SessionEnd(_)));
    match end.body {
        WireBody::SessionEnd(s) => {
            assert_eq!(s.reason, EndReason::Cancelled);
            assert_eq!(s.cancel, Some(CancelReason::Declined));
            assert_eq!(s.trials, 0);
        }
        _ => unreachable!(),
    }
    // Sequence numbers count up by one with no gaps.
    for (i, e) in c.seen.iter().enumerate() {
        assert_eq!(e.seq, i as u64 + 1);
    }
    assert!(server.wait_finished(Some(Duration::from_secs(1))));
    let runner = server.shutdown();
    assert!(matches!(runner.session().phase(), SessionPhase::Cancelled { .. }));
}

#[test]
fn duplicate_request_is_acknowledged_once() {
    let server = young_server();
    let mut c = Client::connect(server.local_addr());
    c.command(OperatorEvent::Confirm(false));
    let line = WireCommand::new("same", OperatorEvent::Text("p01".into())).to_line();
    c.send_raw(&line);
    let first = c.reply_to("same");
    c.send_raw(&line);
    let second = c.reply_to("same");
    match (first, second) {
        (WireBody::Ack(a), WireBody::Ack(b)) => {
            assert!(!a.duplicate);
            assert!(b.duplicate);
        }
        other => panic!("{other:?}"),
    }
    let runner = server.shutdown();
    // One transition only: the session moved from id to name, not further.
    assert_eq!(
        runner.session().phase(),
        &SessionPhase::Intake {
            field: IntakeField::Name
        }
    );
}

#[test]
fn malformed_frames_keep_the_connection() {
    let server = young_server();
    let mut c = Client::connect(server.local_addr());
    c.send_raw("this is not json");
    let e = c.until("error", |e| matches!(e.body, WireBody::Error(_)));
    assert!(matches!(e.body, WireBody::Error(ref p) if p.code == ErrorCode::Malformed && p.request_id.is_none()));
    c.send_raw(r#"{"kind":"jump","request_id":"j1"}"#);
    match c.reply_to("j1") {
        WireBody::Error(p) => assert_eq!(p.code, ErrorCode::Malformed),
        other => panic!("{other:?}"),
    }
    // A refused transition is an error too, and nothing changes.
    match c.command(OperatorEvent::Select(Choice::First)) {
        WireBody::Error(p) => assert_eq!(p.code, ErrorCode::Rejected),
        other => panic!("{other:?}"),
    }
    assert!(matches!(c.command(OperatorEvent::Confirm(true)), WireBody::Ack(_)));
    let runner = server.shutdown();
    assert!(runner.session().debug_mode());
}

#[test]
fn second_operator_is_rejected_and_late_joiner_gets_state() {
    let server = young_server();
    let mut op = Client::connect(server.local_addr());
    op.command(OperatorEvent::Confirm(false));
    op.command(OperatorEvent::Text("p01".into()));

    let mut watcher = Client::connect(server.local_addr());
    let snap = watcher.until("snapshot", |e| matches!(e.body, WireBody::Snapshot(_)));
    assert_eq!(snap.seq, 1);
    match snap.body {
        WireBody::Snapshot(s) => {
            assert_eq!(
                s.session.phase,
                SessionPhase::Intake {
                    field: IntakeField::Name
                }
            );
            assert!(!s.session.debug_mode);
        }
        _ => unreachable!(),
    }
    match watcher.command(OperatorEvent::Text("Mallory".into())) {
        WireBody::Error(p) => assert_eq!(p.code, ErrorCode::NotOperator),
        other => panic!("{other:?}"),
    }
    // The watcher still sees the operator's transitions.
    op.command(OperatorEvent::Text("Ada".into()));
    watcher.until("prompt for surname", |e| {
        matches!(&e.body, WireBody::Prompt(p) if p.phase == Some(SessionPhase::Intake { field: IntakeField::Surname }))
    });
    let runner = server.shutdown();
    assert_eq!(
        runner.session().phase(),
        &SessionPhase::Intake {
            field: IntakeField::Surname
        }
    );
}

#[test]
fn full_session_over_the_wire() {
    let server = young_server();
    let mut c = Client::connect(server.local_addr());
    c.command(OperatorEvent::Confirm(false));
    intake(&mut c);
    // Skip the break-points already answered.
    c.event_pos = c.reply_pos;
    c.command(OperatorEvent::Confirm(true));
    let mut results = 0;
    loop {
        let e = c.until("break-point", |e| match &e.body {
            WireBody::Prompt(p) => p.awaiting,
            WireBody::SessionEnd(_) => true,
            _ => false,
        });
        match e.body {
            WireBody::SessionEnd(end) => {
                assert_eq!(end.reason, EndReason::Completed);
                assert_eq!(end.trials, 71);
                break;
            }
            WireBody::Prompt(p) => match p.phase {
                Some(SessionPhase::AwaitStepperMove { .. }) => {
                    assert!(matches!(c.command(OperatorEvent::Confirm(true)), WireBody::Ack(_)));
                }
                Some(SessionPhase::AwaitResponse) => {
                    assert!(matches!(
                        c.command(OperatorEvent::Select(Choice::Second)),
                        WireBody::Ack(_)
                    ));
                    results += 1;
                }
                other => panic!("unexpected break-point {other:?}"),
            },
            _ => unreachable!(),
        }
    }
    assert_eq!(results, 71);
    let trial_results = c
        .seen
        .iter()
        .filter(|e| matches!(e.body, WireBody::TrialResult(_)))
        .count();
    assert_eq!(trial_results, 71);

    // Live FT frames never come closer than the throttle period.
    let times: Vec<f64> = c
        .seen
        .iter()
        .filter_map(|e| match &e.body {
            WireBody::FtLive(f) => Some(f.sample.timestamp),
            _ => None,
        })
        .collect();
    assert!(!times.is_empty());
    for w in times.windows(2) {
        assert!(w[1] - w[0] >= FT_LIVE_PERIOD - 1e-9, "{w:?}");
    }
    let runner = server.shutdown();
    let paths = runner.paths().unwrap();
    assert!(paths.data_xml.exists() && paths.trial_csv.exists() && paths.participant_csv.exists());
}
