//! Simulate an observer with a known threshold, then fit it back from the
//! recorded session.
//!
//!     cargo run --example analyze_session -- 1.1

use tactile_rig::analysis::{analyze_archive, render_table};
use tactile_rig::autopilot::{demo_participant, drive, Autopilot, LogisticObserver};
use tactile_rig::config::DemoConfig;
use tactile_rig::rig::FingerModel;
use tactile_rig::runner::SessionRunner;
use tactile_rig::session::Session;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let threshold_mm: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1.1);
    let mut cfg = DemoConfig::young();
    cfg.experiment.number_presentations = 40;
    let root = tempfile::tempdir()?;
    let session = Session::start(cfg, FingerModel::default(), 11)?;
    let mut runner = SessionRunner::new(session, root.path());
    let observer = LogisticObserver::new(threshold_mm / 1000.0, 3000.0, 11);
    drive(&mut runner, &mut Autopilot::new(demo_participant(), false, observer))?;

    let summary = analyze_archive(&runner.paths().unwrap().dir)?;
    print!("{}", render_table(&summary));
    if let Some(fit) = &summary.fit {
        println!(
            "true threshold {threshold_mm:.3} mm, fitted {:.3} mm",
            fit.threshold * 1000.0
        );
    }
    Ok(())
}
