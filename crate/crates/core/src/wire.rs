//! JSON frames exchanged with operator consoles.
//!
//! Every frame is one JSON object on one line. Server frames carry a `seq`
//! that increases by one per frame on each connection; client frames carry a
//! `request_id` that the server echoes in its `ack` or `error`.

use serde::{Deserialize, Serialize};

use crate::rig::FtSample;
use crate::scheduler::{Presentation, TrialLabel};
use crate::session::{
    CancelReason, Choice, OperatorEvent, PresentationSlot, Response, Session, SessionEvent, SessionPhase,
    SessionSnapshot, TrialRecord,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub body: WireBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum WireBody {
    Snapshot(WireSnapshot),
    Prompt(PromptPayload),
    FtLive(FtLivePayload),
    TrialResult(TrialResult),
    SessionEnd(SessionEnd),
    Error(ErrorPayload),
    Ack(AckPayload),
}

impl WireBody {
    pub fn kind(&self) -> &'static str {
        match self {
            WireBody::Snapshot(_) => "snapshot",
            WireBody::Prompt(_) => "prompt",
            WireBody::FtLive(_) => "ft_live",
            WireBody::TrialResult(_) => "trial_result",
            WireBody::SessionEnd(_) => "session_end",
            WireBody::Error(_) => "error",
            WireBody::Ack(_) => "ack",
        }
    }
}

/// Everything a console needs to draw its screen after joining late.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireSnapshot {
    #[serde(flatten)]
    pub session: SessionSnapshot,
    pub results: Vec<TrialResult>,
    pub ended: Option<SessionEnd>,
}

impl WireSnapshot {
    pub fn of(session: &Session) -> Self {
        Self {
            session: session.snapshot(),
            results: session.records().iter().map(TrialResult::from).collect(),
            ended: session.is_finished().then(|| SessionEnd::of(session)),
        }
    }
}

/// A phase change (`phase` set, `awaiting` tells whether the operator is
/// expected to act) or an informational console line (`phase` null).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptPayload {
    pub text: String,
    pub phase: Option<SessionPhase>,
    pub awaiting: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtLivePayload {
    pub slot: PresentationSlot,
    pub sample: FtSample,
}

/// A finished trial without its FT traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_no: u32,
    pub label: TrialLabel,
    pub distance: f64,
    pub presentation: Presentation,
    pub response: Response,
    pub correct: bool,
    pub touched_first: bool,
    pub touched_second: bool,
}

impl From<&TrialRecord> for TrialResult {
    fn from(r: &TrialRecord) -> Self {
        Self {
            trial_no: r.trial_no,
            label: r.label,
            distance: r.distance,
            presentation: r.presentation,
            response: r.response,
            correct: r.correct,
            touched_first: r.ft_first.touched,
            touched_second: r.ft_second.touched,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Completed,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEnd {
    pub reason: EndReason,
    pub cancel: Option<CancelReason>,
    pub prompt: String,
    pub trials: u32,
}

impl SessionEnd {
    pub fn of(session: &Session) -> Self {
        let cancel = match session.phase() {
            SessionPhase::Cancelled { reason } => Some(reason.clone()),
            _ => None,
        };
        Self {
            reason: if cancel.is_some() {
                EndReason::Cancelled
            } else {
                EndReason::Completed
            },
            cancel,
            prompt: session.prompt(),
            trials: session.records().len() as u32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Frame was not a valid command.
    Malformed,
    /// The session refused the command in its current phase.
    Rejected,
    /// Another connection holds the operator role.
    NotOperator,
    /// The command queue is full; retry later.
    Busy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: ErrorCode,
    pub message: String,
    pub request_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AckPayload {
    pub request_id: String,
    /// True when this ack repeats an earlier one for the same request.
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireCommand {
    pub request_id: String,
    #[serde(flatten)]
    pub op: WireOp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case", deny_unknown_fields)]
pub enum WireOp {
    Confirm(bool),
    Text(String),
    Select(Choice),
    Escape,
}

impl WireCommand {
    pub fn new(request_id: impl Into<String>, event: OperatorEvent) -> Self {
        Self {
            request_id: request_id.into(),
            op: match event {
                OperatorEvent::Confirm(b) => WireOp::Confirm(b),
                OperatorEvent::Text(s) => WireOp::Text(s),
                OperatorEvent::Select(c) => WireOp::Select(c),
                OperatorEvent::Escape => WireOp::Escape,
            },
        }
    }

    pub fn event(&self) -> OperatorEvent {
        match &self.op {
            WireOp::Confirm(b) => OperatorEvent::Confirm(*b),
            WireOp::Text(s) => OperatorEvent::Text(s.clone()),
            WireOp::Select(c) => OperatorEvent::Select(*c),
            WireOp::Escape => OperatorEvent::Escape,
        }
    }

    pub fn parse(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("commands always serialize")
    }
}

impl WireEvent {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events always serialize")
    }

    pub fn parse(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// Wire form of a session event. `TrialCompleted` and `Ended` need the
/// session for the end-of-session summary.
pub fn wire_body(event: &SessionEvent, session: &Session) -> WireBody {
    match event {
        SessionEvent::Phase { phase, prompt } => WireBody::Prompt(PromptPayload {
            text: prompt.clone(),
            phase: Some(phase.clone()),
            awaiting: phase.is_break_point(),
        }),
        SessionEvent::Message { text } => WireBody::Prompt(PromptPayload {
            text: text.clone(),
            phase: None,
            awaiting: false,
        }),
        SessionEvent::Ft { slot, sample } => WireBody::FtLive(FtLivePayload {
            slot: *slot,
            sample: *sample,
        }),
        SessionEvent::TrialCompleted { record } => WireBody::TrialResult(record.into()),
        SessionEvent::Ended { .. } => WireBody::SessionEnd(SessionEnd::of(session)),
    }
}

/// Renders an event log as a script, one command per line.
pub fn script_from_events(events: &[OperatorEvent]) -> String {
    events
        .iter()
        .enumerate()
        .map(|(i, e)| WireCommand::new(format!("s{}", i + 1), e.clone()).to_line() + "\n")
        .collect()
}
