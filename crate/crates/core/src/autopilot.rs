//! Scripted operators and simulated participants.
//!
//! An [`Autopilot`] answers every break-point the way an operator would,
//! taking participant responses from an [`Observer`]. It is what the headless
//! runs, the examples and the tests use in place of a person at the console.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::runner::{RunnerError, SessionRunner};
use crate::scheduler::{Presentation, TrialPlan};
use crate::session::{
    Choice, Gender, IntakeField, OperatorEvent, Participant, Response, Session, SessionError, SessionEvent,
    SessionPhase,
};

/// A simulated participant answering which presentation had two pins.
pub trait Observer {
    fn respond(&mut self, plan: &TrialPlan) -> Response;
}

/// Always reports the first presentation.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysFirst;

impl Observer for AlwaysFirst {
    fn respond(&mut self, _: &TrialPlan) -> Response {
        Response::First
    }
}

/// Guesses with a fair coin, independent of the stimulus.
#[derive(Debug, Clone)]
pub struct CoinFlip(ChaCha8Rng);

impl CoinFlip {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl Observer for CoinFlip {
    fn respond(&mut self, _: &TrialPlan) -> Response {
        if self.0.random_bool(0.5) {
            Response::First
        } else {
            Response::Second
        }
    }
}

/// Answers correctly with probability
/// `0.5 + 0.5 / (1 + exp(-slope * (distance - threshold)))`, i.e. 75 %
/// correct at `threshold`.
#[derive(Debug, Clone)]
pub struct LogisticObserver {
    pub threshold: f64,
    pub slope: f64,
    rng: ChaCha8Rng,
}

impl LogisticObserver {
    pub fn new(threshold: f64, slope: f64, seed: u64) -> Self {
        Self {
            threshold,
            slope,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn p_correct(&self, distance: f64) -> f64 {
        0.5 + 0.5 / (1.0 + (-self.slope * (distance - self.threshold)).exp())
    }
}

impl Observer for LogisticObserver {
    fn respond(&mut self, plan: &TrialPlan) -> Response {
        let correct = self.rng.random_bool(self.p_correct(plan.distance));
        let right = match plan.presentation {
            Presentation::TwoPinsFirst => Response::First,
            Presentation::SinglePinFirst => Response::Second,
        };
        match (correct, right) {
            (true, r) => r,
            (false, Response::First) => Response::Second,
            (false, Response::Second) => Response::First,
        }
    }
}

impl<O: Observer + ?Sized> Observer for Box<O> {
    fn respond(&mut self, plan: &TrialPlan) -> Response {
        (**self).respond(plan)
    }
}

/// Participant used by the demos and tests: id "dfs", surname "foo".
pub fn demo_participant() -> Participant {
    Participant {
        id: "dfs".into(),
        name: "Ada".into(),
        surname: "foo".into(),
        age: 34,
        gender: Gender::Female,
        notes: None,
    }
}

/// Operator that answers every break-point.
#[derive(Debug, Clone)]
pub struct Autopilot<O> {
    pub participant: Participant,
    pub debug_mode: bool,
    pub observer: O,
    /// Press escape once this many trials are complete.
    pub escape_after: Option<usize>,
}

impl<O: Observer> Autopilot<O> {
    pub fn new(participant: Participant, debug_mode: bool, observer: O) -> Self {
        Self {
            participant,
            debug_mode,
            observer,
            escape_after: None,
        }
    }

    pub fn escaping_after(mut self, trials: usize) -> Self {
        self.escape_after = Some(trials);
        self
    }

    /// The event this operator submits next, or `None` once the session has
    /// ended.
    pub fn next_event(&mut self, session: &Session) -> Option<OperatorEvent> {
        if let Some(n) = self.escape_after {
            if session.records().len() >= n && !session.is_finished() {
                return Some(OperatorEvent::Escape);
            }
        }
        let p = &self.participant;
        Some(match session.phase() {
            SessionPhase::AwaitDebugChoice => OperatorEvent::Confirm(self.debug_mode),
            SessionPhase::Intake { field } => match field {
                IntakeField::Id => OperatorEvent::Text(p.id.clone()),
                IntakeField::Name => OperatorEvent::Text(p.name.clone()),
                IntakeField::Surname => OperatorEvent::Text(p.surname.clone()),
                IntakeField::Age => OperatorEvent::Text(p.age.to_string()),
                IntakeField::Gender => OperatorEvent::Select(match p.gender {
                    Gender::Female => Choice::Female,
                    Gender::Male => Choice::Male,
                }),
                IntakeField::Notes => OperatorEvent::Text(p.notes.clone().unwrap_or_default()),
            },
            SessionPhase::AwaitInitConfirm | SessionPhase::AwaitStepperMove { .. } => OperatorEvent::Confirm(true),
            SessionPhase::AwaitResponse => {
                let plan = session.current_plan().expect("trial in progress");
                OperatorEvent::Select(match self.observer.respond(plan) {
                    Response::First => Choice::First,
                    Response::Second => Choice::Second,
                })
            }
            SessionPhase::SessionComplete | SessionPhase::Cancelled { .. } => return None,
            SessionPhase::MovingToInit | SessionPhase::Presenting { .. } | SessionPhase::TrialComplete { .. } => {
                unreachable!("automatic phases are never left pending")
            }
        })
    }
}

/// Something an [`Autopilot`] can drive.
pub trait Driven {
    type Error;
    fn session(&self) -> &Session;
    fn submit(&mut self, event: OperatorEvent) -> Result<Vec<SessionEvent>, Self::Error>;
}

impl Driven for Session {
    type Error = SessionError;

    fn session(&self) -> &Session {
        self
    }

    fn submit(&mut self, event: OperatorEvent) -> Result<Vec<SessionEvent>, SessionError> {
        Session::submit(self, event)
    }
}

impl Driven for SessionRunner {
    type Error = RunnerError;

    fn session(&self) -> &Session {
        SessionRunner::session(self)
    }

    fn submit(&mut self, event: OperatorEvent) -> Result<Vec<SessionEvent>, RunnerError> {
        SessionRunner::submit(self, event)
    }
}

/// Runs the session to its end and returns the events submitted.
pub fn drive<D: Driven, O: Observer>(target: &mut D, pilot: &mut Autopilot<O>) -> Result<Vec<OperatorEvent>, D::Error> {
    let mut log = Vec::new();
    while let Some(event) = pilot.next_event(target.session()) {
        target.submit(event.clone())?;
        log.push(event);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DemoConfig;
    use crate::rig::FingerModel;
    use crate::scheduler::TrialLabel;
    use crate::session::evaluate_response;

    #[test]
    fn young_session_runs_to_completion() {
        let mut session = Session::start(DemoConfig::young(), FingerModel::default(), 3).unwrap();
        let mut pilot = Autopilot::new(demo_participant(), true, AlwaysFirst);
        let log = drive(&mut session, &mut pilot).unwrap();
        assert_eq!(session.phase(), &SessionPhase::SessionComplete);
        assert_eq!(session.records().len(), 71);
        // Debug mode: one stepper confirmation and one response per trial.
        assert_eq!(log.len(), 1 + 6 + 1 + 2 * 71);
        for r in session.records() {
            assert_eq!(r.correct, evaluate_response(r.presentation, Response::First));
        }
        assert_eq!(session.records()[0].label, TrialLabel::Training);
    }

    #[test]
    fn escape_after_trials() {
        let mut session = Session::start(DemoConfig::young(), FingerModel::default(), 3).unwrap();
        let mut pilot = Autopilot::new(demo_participant(), false, AlwaysFirst).escaping_after(3);
        let log = drive(&mut session, &mut pilot).unwrap();
        assert_eq!(log.last(), Some(&OperatorEvent::Escape));
        assert_eq!(session.records().len(), 3);
        assert!(session.is_finished());
    }

    #[test]
    fn logistic_observer_is_75_percent_at_threshold() {
        let o = LogisticObserver::new(0.0011, 3000.0, 1);
        assert!((o.p_correct(0.0011) - 0.75).abs() < 1e-15);
        assert!(o.p_correct(0.002) > 0.9);
        assert!(o.p_correct(0.0001) < 0.55);
    }
}
