//! Stop a session partway, pick it up again from its directory and finish.

use tactile_rig::autopilot::{demo_participant, drive, Autopilot, CoinFlip};
use tactile_rig::config::DemoConfig;
use tactile_rig::rig::FingerModel;
use tactile_rig::runner::SessionRunner;
use tactile_rig::session::{OperatorEvent, Session};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = tempfile::tempdir()?;
    let session = Session::start(DemoConfig::young(), FingerModel::default(), 21)?;
    let mut runner = SessionRunner::new(session, root.path());
    let mut pilot = Autopilot::new(demo_participant(), false, CoinFlip::new(21));
    for _ in 0..40 {
        match pilot.next_event(runner.session()) {
            Some(e) => {
                runner.submit(e)?;
            }
            None => break,
        }
    }
    let dir = runner.paths().unwrap().dir.clone();
    println!(
        "interrupted after {} trials at {:?}",
        runner.session().records().len(),
        runner.session().phase()
    );
    drop(runner);

    let mut resumed = SessionRunner::resume(&dir)?;
    println!(
        "resumed with {} trials: {}",
        resumed.session().records().len(),
        resumed.session().prompt()
    );
    drive(&mut resumed, &mut pilot)?;
    println!("finished with {} trials", resumed.session().records().len());
    // Escape is harmless once the session is over.
    let _ = resumed.submit(OperatorEvent::Escape);
    Ok(())
}
