//! Walk the session state machine with a scripted operator and print the
//! console it would show. Nothing is written to disk.

use tactile_rig::autopilot::{demo_participant, Autopilot, LogisticObserver};
use tactile_rig::config::DemoConfig;
use tactile_rig::rig::FingerModel;
use tactile_rig::session::{Session, SessionEvent};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = DemoConfig::young();
    cfg.experiment.number_presentations = 1;
    let mut session = Session::start(cfg, FingerModel::default(), 1)?;
    let mut pilot = Autopilot::new(demo_participant(), true, LogisticObserver::new(0.0011, 4000.0, 1));
    println!("{}", session.prompt());
    while let Some(event) = pilot.next_event(&session) {
        println!("> {event:?}");
        for e in session.submit(event)? {
            match e {
                SessionEvent::Phase { prompt, .. } => println!("{prompt}"),
                SessionEvent::Message { text } => println!("{text}"),
                SessionEvent::TrialCompleted { record } => {
                    println!(
                        "[DEMO] Response: {:?} ({})",
                        record.response,
                        if record.correct { "correct" } else { "wrong" }
                    )
                }
                SessionEvent::Ft { .. } | SessionEvent::Ended { .. } => {}
            }
        }
    }
    Ok(())
}
