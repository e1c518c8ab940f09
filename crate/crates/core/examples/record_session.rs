//! Run a full session and write its archive: data.xml, the participant and
//! trial CSVs, tmp.csv and the manifest.
//!
//!     cargo run --example record_session -- [data-dir]

use tactile_rig::autopilot::{demo_participant, drive, Autopilot, CoinFlip};
use tactile_rig::config::DemoConfig;
use tactile_rig::rig::FingerModel;
use tactile_rig::runner::SessionRunner;
use tactile_rig::session::Session;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args().nth(1).unwrap_or_else(|| "target/example-data".into());
    let session = Session::start(DemoConfig::young(), FingerModel::default(), 3)?;
    let mut runner = SessionRunner::new(session, &root);
    drive(
        &mut runner,
        &mut Autopilot::new(demo_participant(), false, CoinFlip::new(3)),
    )?;
    let paths = runner.paths().expect("intake completed");
    println!(
        "{} trials written to {}",
        runner.session().records().len(),
        paths.dir.display()
    );
    for p in [
        &paths.data_xml,
        &paths.participant_csv,
        &paths.trial_csv,
        &paths.tmp_csv,
        &paths.manifest,
    ] {
        println!("  {} ({} bytes)", p.display(), std::fs::metadata(p)?.len());
    }
    print!("{}", std::fs::read_to_string(&paths.data_xml)?);
    Ok(())
}
