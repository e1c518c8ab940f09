//! The demo session as an explicit state machine.
//!
//! A [`Session`] is advanced only by operator events. Each accepted event
//! runs every automatic step that follows it (moving home, both
//! presentations, scoring) and stops at the next break-point, returning the
//! [`SessionEvent`]s produced on the way. Rejected events leave the session
//! untouched.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{validate_config, DemoConfig, Pose3, TouchParams, NO_STEPPER_POSES};
use crate::rig::{stepper_steps, FingerModel, FtRecording, FtSample, PokeParams, PokeResult, RigError, RigState};
use crate::scheduler::{DistanceQuota, Presentation, Scheduler, SchedulerError, TrialLabel, TrialPlan};

pub const DEBUG_PROMPT: &str = "Debug mode: YES (Continue Y/N)";
pub const INIT_PROMPT: &str = "[DEMO]: moving to init pose (Continue Y/N)";
pub const MIN_AGE: u32 = 18;
pub const MAX_AGE: u32 = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    /// Spelling used in data files.
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "FEMALE",
            Gender::Male => "MALE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "FEMALE" => Some(Gender::Female),
            "MALE" => Some(Gender::Male),
            _ => None,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Female => "Female",
            Gender::Male => "Male",
        })
    }
}

/// Which presentation the participant reports as the two-pin one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Response {
    First,
    Second,
}

impl Response {
    pub fn as_str(self) -> &'static str {
        match self {
            Response::First => "First",
            Response::Second => "Second",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "First" => Some(Response::First),
            "Second" => Some(Response::Second),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub id: String,
    pub name: String,
    pub surname: String,
    pub age: u32,
    pub gender: Gender,
    pub notes: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntakeField {
    Id,
    Name,
    Surname,
    Age,
    Gender,
    Notes,
}

impl IntakeField {
    pub fn prompt(self) -> &'static str {
        match self {
            IntakeField::Id => "Enter unique ID: ",
            IntakeField::Name => "Enter participant name: ",
            IntakeField::Surname => "Enter participant surname: ",
            IntakeField::Age => "Enter participant age: ",
            IntakeField::Gender => "Gender: Female",
            IntakeField::Notes => "Enter participant notes: ",
        }
    }

    fn next(self) -> Option<Self> {
        match self {
            IntakeField::Id => Some(IntakeField::Name),
            IntakeField::Name => Some(IntakeField::Surname),
            IntakeField::Surname => Some(IntakeField::Age),
            IntakeField::Age => Some(IntakeField::Gender),
            IntakeField::Gender => Some(IntakeField::Notes),
            IntakeField::Notes => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PresentationSlot {
    First,
    Second,
}

/// The stimulus delivered in one presentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stimulus {
    SinglePin,
    TwoPins,
}

impl Stimulus {
    pub fn in_slot(presentation: Presentation, slot: PresentationSlot) -> Self {
        match (presentation, slot) {
            (Presentation::TwoPinsFirst, PresentationSlot::First)
            | (Presentation::SinglePinFirst, PresentationSlot::Second) => Stimulus::TwoPins,
            _ => Stimulus::SinglePin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum CancelReason {
    Escape,
    Declined,
    NoStepperPoses,
    Fault(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum SessionPhase {
    AwaitDebugChoice,
    Intake { field: IntakeField },
    AwaitInitConfirm,
    MovingToInit,
    AwaitStepperMove { distance: f64, steps: f64 },
    Presenting { slot: PresentationSlot, stimulus: Stimulus },
    AwaitResponse,
    TrialComplete { correct: bool },
    SessionComplete,
    Cancelled { reason: CancelReason },
}

impl SessionPhase {
    pub fn is_terminal(&self) -> bool {
        matches!(self, SessionPhase::SessionComplete | SessionPhase::Cancelled { .. })
    }

    /// Whether the phase waits for the operator.
    pub fn is_break_point(&self) -> bool {
        matches!(
            self,
            SessionPhase::AwaitDebugChoice
                | SessionPhase::Intake { .. }
                | SessionPhase::AwaitInitConfirm
                | SessionPhase::AwaitStepperMove { .. }
                | SessionPhase::AwaitResponse
        )
    }

    /// Operator-facing console text for this phase.
    pub fn prompt(&self) -> String {
        match self {
            SessionPhase::AwaitDebugChoice => DEBUG_PROMPT.to_string(),
            SessionPhase::Intake { field } => field.prompt().to_string(),
            SessionPhase::AwaitInitConfirm => INIT_PROMPT.to_string(),
            SessionPhase::MovingToInit => "[DEMO]: moving to init pose".to_string(),
            SessionPhase::AwaitStepperMove { distance, .. } => stepper_prompt(*distance),
            SessionPhase::Presenting { slot, stimulus } => format!(
                "[DEMO]: {} presentation: {}",
                match slot {
                    PresentationSlot::First => "first",
                    PresentationSlot::Second => "second",
                },
                match stimulus {
                    Stimulus::SinglePin => "single pin",
                    Stimulus::TwoPins => "two pins",
                }
            ),
            SessionPhase::AwaitResponse => "[Demo] Response: First".to_string(),
            SessionPhase::TrialComplete { correct: true } => "[DEMO]: response correct".to_string(),
            SessionPhase::TrialComplete { correct: false } => "[DEMO]: response wrong".to_string(),
            SessionPhase::SessionComplete => "[DEMO]: experiment completed".to_string(),
            SessionPhase::Cancelled { reason } => match reason {
                CancelReason::NoStepperPoses => NO_STEPPER_POSES.to_string(),
                CancelReason::Fault(msg) => format!("[DEMO]: demo aborted: {msg}"),
                CancelReason::Escape | CancelReason::Declined => "[DEMO]: demo cancelled".to_string(),
            },
        }
    }
}

/// An option picked by cycling, never typed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    First,
    Second,
    Female,
    Male,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum OperatorEvent {
    Confirm(bool),
    Text(String),
    Select(Choice),
    Escape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub participant_id: String,
    /// 1-based position within the whole session.
    pub trial_no: u32,
    pub label: TrialLabel,
    pub presentation: Presentation,
    pub ft_first: FtRecording,
    pub ft_second: FtRecording,
    /// Pin separation, meters.
    pub distance: f64,
    pub response: Response,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionEvent {
    /// Entered a phase.
    Phase {
        phase: SessionPhase,
        prompt: String,
    },
    /// Informational console line.
    Message {
        text: String,
    },
    /// A live FT reading from the given presentation.
    Ft {
        slot: PresentationSlot,
        sample: FtSample,
    },
    TrialCompleted {
        record: TrialRecord,
    },
    Ended {
        completed: bool,
        prompt: String,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("{event} is not accepted while {phase}")]
    PhaseMismatch { phase: String, event: String },
    #[error("Typing is not allowed: choose with the option selector")]
    TypingNotAllowed,
    #[error("invalid {field}: {reason}")]
    InvalidInput { field: &'static str, reason: String },
    #[error("session has ended")]
    Ended,
    #[error("config cannot start a session: {0}")]
    Config(String),
    #[error("cannot resume: {0}")]
    Resume(String),
}

#[derive(Debug, Default, Clone)]
struct IntakeDraft {
    id: String,
    name: String,
    surname: String,
    age: u32,
    gender: Option<Gender>,
}

#[derive(Debug, Clone)]
struct ActiveTrial {
    plan: TrialPlan,
    trial_no: u32,
    ft_first: Option<FtRecording>,
    ft_second: Option<FtRecording>,
}

/// Read-only view of a session for displays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub phase: SessionPhase,
    pub prompt: String,
    pub debug_mode: bool,
    pub participant_id: Option<String>,
    pub trial: Option<TrialPlan>,
    pub group_size: Option<u32>,
    pub trials_done: u32,
    pub total_trials: Option<u32>,
    pub quotas: Vec<DistanceQuota>,
    pub effector_pose: Pose3,
    pub stepper_separation: f64,
    pub sim_time: f64,
    pub threshold_fz: f64,
}

#[derive(Debug, Clone)]
pub struct Session {
    config: DemoConfig,
    finger: FingerModel,
    seed: u64,
    rig: RigState,
    rig_rng: ChaCha8Rng,
    scheduler: Option<Scheduler>,
    phase: SessionPhase,
    debug_mode: bool,
    intake: IntakeDraft,
    participant: Option<Participant>,
    active: Option<ActiveTrial>,
    records: Vec<TrialRecord>,
}

impl Session {
    /// Opens a session at the debug-mode question. A config without stepper
    /// distances is accepted here; it is cancelled once the rig reaches home.
    pub fn start(config: DemoConfig, finger: FingerModel, seed: u64) -> Result<Self, SessionError> {
        let report = validate_config(&config);
        if !report.is_startable() {
            let first = report.findings.iter().find(|f| f.path != "smposes").expect("finding");
            return Err(SessionError::Config(first.to_string()));
        }
        if !finger.is_valid() {
            return Err(SessionError::Config("invalid finger model".into()));
        }
        let mut rig_rng = ChaCha8Rng::seed_from_u64(seed);
        rig_rng.set_stream(1);
        Ok(Self {
            config,
            finger,
            seed,
            rig: RigState::ready(),
            rig_rng,
            scheduler: None,
            phase: SessionPhase::AwaitDebugChoice,
            debug_mode: false,
            intake: IntakeDraft::default(),
            participant: None,
            active: None,
            records: Vec::new(),
        })
    }

    /// Reopens an interrupted session after intake, with the trials already
    /// recorded. The scheduler is replayed from the seed and must agree with
    /// the recorded trials. Resumes at the init-pose break-point.
    pub fn resume(
        config: DemoConfig,
        finger: FingerModel,
        seed: u64,
        debug_mode: bool,
        participant: Participant,
        records: Vec<TrialRecord>,
    ) -> Result<Self, SessionError> {
        let mut session = Self::start(config, finger, seed)?;
        let (_, served) = Scheduler::resume(
            &session.config.experiment,
            &session.config.distances(),
            seed,
            records.len() as u32,
        )
        .map_err(|e| SessionError::Resume(e.to_string()))?;
        for (plan, record) in served.iter().zip(&records) {
            if plan.distance != record.distance
                || plan.presentation != record.presentation
                || plan.label != record.label
            {
                return Err(SessionError::Resume(format!(
                    "trial {} does not match seed {seed}",
                    record.trial_no
                )));
            }
        }
        // Noise continues on a stream distinct from the original run.
        session.rig_rng.set_stream(2 + records.len() as u64);
        session.debug_mode = debug_mode;
        session.participant = Some(participant);
        session.records = records;
        session.phase = SessionPhase::AwaitInitConfirm;
        Ok(session)
    }

    pub fn config(&self) -> &DemoConfig {
        &self.config
    }

    pub fn finger(&self) -> &FingerModel {
        &self.finger
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn phase(&self) -> &SessionPhase {
        &self.phase
    }

    pub fn prompt(&self) -> String {
        self.phase.prompt()
    }

    pub fn debug_mode(&self) -> bool {
        self.debug_mode
    }

    pub fn rig(&self) -> &RigState {
        &self.rig
    }

    pub fn participant(&self) -> Option<&Participant> {
        self.participant.as_ref()
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn scheduler(&self) -> Option<&Scheduler> {
        self.scheduler.as_ref()
    }

    pub fn current_plan(&self) -> Option<&TrialPlan> {
        self.active.as_ref().map(|a| &a.plan)
    }

    pub fn is_finished(&self) -> bool {
        self.phase.is_terminal()
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        let plan = self.current_plan().copied();
        SessionSnapshot {
            phase: self.phase.clone(),
            prompt: self.prompt(),
            debug_mode: self.debug_mode,
            participant_id: self.participant.as_ref().map(|p| p.id.clone()),
            trial: plan,
            group_size: plan.zip(self.scheduler.as_ref()).map(|(p, s)| s.group_size(p.label)),
            trials_done: self.records.len() as u32,
            total_trials: self.scheduler.as_ref().map(Scheduler::total_trials),
            quotas: self
                .scheduler
                .as_ref()
                .map(Scheduler::remaining_quota)
                .unwrap_or_default(),
            effector_pose: self.rig.effector_pose,
            stepper_separation: self.rig.stepper_separation,
            sim_time: self.rig.sim_time(),
            threshold_fz: self.config.touch.threshold.v3,
        }
    }

    /// Applies one operator event. On error the session is unchanged.
    pub fn submit(&mut self, event: OperatorEvent) -> Result<Vec<SessionEvent>, SessionError> {
        if self.phase.is_terminal() {
            return Err(SessionError::Ended);
        }
        let mut out = Vec::new();
        if event == OperatorEvent::Escape {
            self.cancel(CancelReason::Escape, &mut out);
            return Ok(out);
        }
        match (self.phase.clone(), event) {
            (SessionPhase::AwaitDebugChoice, OperatorEvent::Confirm(debug)) => {
                self.debug_mode = debug;
                self.enter(SessionPhase::Intake { field: IntakeField::Id }, &mut out);
            }
            (
                SessionPhase::Intake {
                    field: IntakeField::Gender,
                },
                OperatorEvent::Text(_),
            ) => {
                return Err(SessionError::TypingNotAllowed);
            }
            (
                SessionPhase::Intake {
                    field: IntakeField::Gender,
                },
                OperatorEvent::Select(choice),
            ) => {
                self.intake.gender = Some(match choice {
                    Choice::Female => Gender::Female,
                    Choice::Male => Gender::Male,
                    other => return Err(self.mismatch(&OperatorEvent::Select(other))),
                });
                self.enter(
                    SessionPhase::Intake {
                        field: IntakeField::Notes,
                    },
                    &mut out,
                );
            }
            (SessionPhase::Intake { field }, OperatorEvent::Text(text)) => {
                self.take_intake(field, text)?;
                match field.next() {
                    Some(next) => self.enter(SessionPhase::Intake { field: next }, &mut out),
                    None => self.enter(SessionPhase::AwaitInitConfirm, &mut out),
                }
            }
            (SessionPhase::AwaitInitConfirm, OperatorEvent::Confirm(false)) => {
                self.cancel(CancelReason::Declined, &mut out);
            }
            (SessionPhase::AwaitInitConfirm, OperatorEvent::Confirm(true)) => {
                self.move_home_and_schedule(&mut out);
            }
            // The break-point waits until the operator confirms.
            (SessionPhase::AwaitStepperMove { .. }, OperatorEvent::Confirm(false)) => {}
            (SessionPhase::AwaitStepperMove { distance, .. }, OperatorEvent::Confirm(true)) => {
                match self.rig.set_stepper(distance) {
                    Ok(rig) => self.rig = rig,
                    Err(e) => {
                        self.cancel(CancelReason::Fault(e.to_string()), &mut out);
                        return Ok(out);
                    }
                }
                self.present_both(&mut out);
            }
            (SessionPhase::AwaitResponse, OperatorEvent::Text(_)) => {
                return Err(SessionError::TypingNotAllowed);
            }
            (SessionPhase::AwaitResponse, OperatorEvent::Select(choice)) => {
                let response = match choice {
                    Choice::First => Response::First,
                    Choice::Second => Response::Second,
                    other => return Err(self.mismatch(&OperatorEvent::Select(other))),
                };
                self.complete_trial(response, &mut out);
            }
            (_, event) => return Err(self.mismatch(&event)),
        }
        Ok(out)
    }

    fn mismatch(&self, event: &OperatorEvent) -> SessionError {
        SessionError::PhaseMismatch {
            phase: format!("{:?}", self.phase),
            event: format!("{event:?}"),
        }
    }

    fn take_intake(&mut self, field: IntakeField, text: String) -> Result<(), SessionError> {
        let trimmed = text.trim();
        match field {
            IntakeField::Id => {
                if trimmed.is_empty() {
                    return Err(invalid("id", "must not be empty"));
                }
                if trimmed.contains(['/', '\\']) || trimmed == "." || trimmed == ".." {
                    return Err(invalid("id", "must be usable as a directory name"));
                }
                self.intake.id = trimmed.to_string();
            }
            IntakeField::Name | IntakeField::Surname => {
                if trimmed.is_empty() {
                    return Err(invalid(
                        if field == IntakeField::Name { "name" } else { "surname" },
                        "must not be empty",
                    ));
                }
                if field == IntakeField::Surname && trimmed.contains(['/', '\\']) {
                    return Err(invalid("surname", "must be usable in a file name"));
                }
                if field == IntakeField::Name {
                    self.intake.name = trimmed.to_string();
                } else {
                    self.intake.surname = trimmed.to_string();
                }
            }
            IntakeField::Age => {
                let age: u32 = trimmed
                    .parse()
                    .map_err(|_| invalid("age", format!("`{trimmed}` is not a whole number")))?;
                if !(MIN_AGE..=MAX_AGE).contains(&age) {
                    return Err(invalid("age", format!("{age} outside {MIN_AGE}..={MAX_AGE}")));
                }
                self.intake.age = age;
            }
            IntakeField::Notes => {
                let draft = std::mem::take(&mut self.intake);
                self.participant = Some(Participant {
                    id: draft.id,
                    name: draft.name,
                    surname: draft.surname,
                    age: draft.age,
                    gender: draft.gender.expect("gender chosen before notes"),
                    notes: (!trimmed.is_empty()).then(|| trimmed.to_string()),
                });
            }
            IntakeField::Gender => unreachable!("gender is selected, not typed"),
        }
        Ok(())
    }

    fn enter(&mut self, phase: SessionPhase, out: &mut Vec<SessionEvent>) {
        self.phase = phase;
        out.push(SessionEvent::Phase {
            prompt: self.phase.prompt(),
            phase: self.phase.clone(),
        });
    }

    fn message(out: &mut Vec<SessionEvent>, text: impl Into<String>) {
        out.push(SessionEvent::Message { text: text.into() });
    }

    fn cancel(&mut self, reason: CancelReason, out: &mut Vec<SessionEvent>) {
        self.enter(SessionPhase::Cancelled { reason }, out);
        out.push(SessionEvent::Ended {
            completed: false,
            prompt: self.prompt(),
        });
    }

    fn move_home_and_schedule(&mut self, out: &mut Vec<SessionEvent>) {
        self.enter(SessionPhase::MovingToInit, out);
        let touch = &self.config.touch;
        match self.rig.move_global(touch.init, touch.movement_duration) {
            Ok(rig) => self.rig = rig,
            Err(e) => return self.cancel(CancelReason::Fault(e.to_string()), out),
        }
        let built = Scheduler::resume(
            &self.config.experiment,
            &self.config.distances(),
            self.seed,
            self.records.len() as u32,
        );
        match built {
            Ok((scheduler, _)) => self.scheduler = Some(scheduler),
            Err(SchedulerError::NoStepperPoses) => {
                return self.cancel(CancelReason::NoStepperPoses, out);
            }
            Err(e) => return self.cancel(CancelReason::Fault(e.to_string()), out),
        }
        self.begin_next_trial(out);
    }

    fn begin_next_trial(&mut self, out: &mut Vec<SessionEvent>) {
        let scheduler = self.scheduler.as_mut().expect("scheduler built");
        let Some(plan) = scheduler.next_trial() else {
            self.active = None;
            self.enter(SessionPhase::SessionComplete, out);
            out.push(SessionEvent::Ended {
                completed: true,
                prompt: self.prompt(),
            });
            return;
        };
        let group = scheduler.group_size(plan.label);
        Self::message(out, trial_announcement(&plan, group));
        for line in quota_lines(
            &scheduler.remaining_quota(),
            self.config.experiment.number_presentations,
        ) {
            Self::message(out, line);
        }
        self.active = Some(ActiveTrial {
            plan,
            trial_no: self.records.len() as u32 + 1,
            ft_first: None,
            ft_second: None,
        });

        // Debug mode always stops for the manual stepper move; otherwise the
        // stepper is driven directly but a change of separation still stops.
        if self.debug_mode || plan.distance != self.rig.stepper_separation {
            let steps = stepper_steps(plan.distance).unwrap_or(0.0);
            self.enter(
                SessionPhase::AwaitStepperMove {
                    distance: plan.distance,
                    steps,
                },
                out,
            );
        } else {
            self.present_both(out);
        }
    }

    fn present_both(&mut self, out: &mut Vec<SessionEvent>) {
        let plan = self.active.as_ref().expect("active trial").plan;
        let params = PokeParams::from_touch(&self.config.touch, self.config.experiment.number_ftdata_recordings);
        for slot in [PresentationSlot::First, PresentationSlot::Second] {
            let stimulus = Stimulus::in_slot(plan.presentation, slot);
            self.enter(SessionPhase::Presenting { slot, stimulus }, out);
            let result = run_presentation(
                &self.rig,
                &self.config.touch,
                &params,
                stimulus,
                plan.distance,
                &self.finger,
                &mut self.rig_rng,
            );
            let (rig, poke) = match result {
                Ok(ok) => ok,
                Err(e) => return self.cancel(CancelReason::Fault(e.to_string()), out),
            };
            self.rig = rig;
            for sample in &poke.descent {
                out.push(SessionEvent::Ft { slot, sample: *sample });
            }
            for sample in &poke.recording.samples {
                out.push(SessionEvent::Ft { slot, sample: *sample });
                Self::message(out, sample.console_line());
            }
            let active = self.active.as_mut().expect("active trial");
            match slot {
                PresentationSlot::First => active.ft_first = Some(poke.recording),
                PresentationSlot::Second => active.ft_second = Some(poke.recording),
            }
        }
        self.enter(SessionPhase::AwaitResponse, out);
    }

    fn complete_trial(&mut self, response: Response, out: &mut Vec<SessionEvent>) {
        let active = self.active.take().expect("active trial");
        let participant_id = self.participant.as_ref().map(|p| p.id.clone()).unwrap_or_default();
        let correct = evaluate_response(active.plan.presentation, response);
        let record = TrialRecord {
            participant_id,
            trial_no: active.trial_no,
            label: active.plan.label,
            presentation: active.plan.presentation,
            ft_first: active.ft_first.expect("first recording"),
            ft_second: active.ft_second.expect("second recording"),
            distance: active.plan.distance,
            response,
            correct,
        };
        self.records.push(record.clone());
        self.enter(SessionPhase::TrialComplete { correct }, out);
        out.push(SessionEvent::TrialCompleted { record });
        self.begin_next_trial(out);
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> SessionError {
    SessionError::InvalidInput {
        field,
        reason: reason.into(),
    }
}

/// Lateral move that brings the chosen pin carrier over the finger. The
/// two-pin move is shifted by half the separation so the pair straddles the
/// finger's centre.
pub fn lateral_motion(touch: &TouchParams, stimulus: Stimulus, distance: f64) -> Pose3 {
    match stimulus {
        Stimulus::SinglePin => touch.motion_single_pin,
        Stimulus::TwoPins => touch.motion_two_pins + Pose3::new(0.0, -0.5 * distance, 0.0),
    }
}

/// One presentation: lateral move from home, poke, return home.
pub fn run_presentation<R: rand::Rng + ?Sized>(
    rig: &RigState,
    touch: &TouchParams,
    params: &PokeParams,
    stimulus: Stimulus,
    distance: f64,
    finger: &FingerModel,
    rng: &mut R,
) -> Result<(RigState, PokeResult), RigError> {
    let aligned = rig.move_relative(lateral_motion(touch, stimulus, distance), touch.movement_duration)?;
    let (poked, result) = aligned.execute_poke(touch.poking, params, finger, rng)?;
    let home = poked.move_global(touch.init, touch.movement_duration)?;
    Ok((home, result))
}

/// True when the response names the presentation that carried two pins.
pub fn evaluate_response(presentation: Presentation, response: Response) -> bool {
    matches!(
        (presentation, response),
        (Presentation::TwoPinsFirst, Response::First) | (Presentation::SinglePinFirst, Response::Second)
    )
}

/// Stepper break-point text. `distance` is in meters and must be
/// non-negative.
pub fn stepper_prompt(distance: f64) -> String {
    let steps = stepper_steps(distance).unwrap_or(f64::NAN);
    format!(
        "[DEMO]: move stepper motor to {:.1} [mm] {:.2} [step]",
        distance * 1000.0,
        steps
    )
}

pub fn trial_announcement(plan: &TrialPlan, total_in_group: u32) -> String {
    format!(
        "[DEMO] {} {}/{} presentation: {}",
        plan.label,
        plan.index,
        total_in_group,
        plan.presentation.describe()
    )
}

fn quota_lines(quotas: &[DistanceQuota], per_distance: u32) -> Vec<String> {
    quotas
        .iter()
        .map(|q| {
            format!(
                "[DEMO] distance {:.1} [mm]: presented {}/{} ({})",
                q.distance * 1000.0,
                q.presented,
                per_distance,
                if q.available() { "available" } else { "exhausted" }
            )
        })
        .collect()
}
