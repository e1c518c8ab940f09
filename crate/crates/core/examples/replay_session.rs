//! Record a session, replay its manifest into a second directory and check
//! that every file comes out identical.

use std::fs;

use tactile_rig::autopilot::{demo_participant, drive, Autopilot, CoinFlip};
use tactile_rig::config::DemoConfig;
use tactile_rig::persistence::{read_manifest, MANIFEST};
use tactile_rig::rig::FingerModel;
use tactile_rig::runner::{replay_manifest, SessionRunner};
use tactile_rig::session::Session;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let first = tempfile::tempdir()?;
    let second = tempfile::tempdir()?;
    let session = Session::start(DemoConfig::young(), FingerModel::default(), 99)?;
    let mut runner = SessionRunner::new(session, first.path());
    drive(
        &mut runner,
        &mut Autopilot::new(demo_participant(), true, CoinFlip::new(5)).escaping_after(12),
    )?;
    let original = runner.paths().unwrap().clone();

    let manifest = read_manifest(&original.dir.join(MANIFEST))?;
    println!("{} commands, seed {}", manifest.commands.len(), manifest.seed);
    let replayed = replay_manifest(&manifest, second.path())?;
    let copy = replayed.paths().unwrap();
    for (a, b) in [
        (&original.data_xml, &copy.data_xml),
        (&original.participant_csv, &copy.participant_csv),
        (&original.trial_csv, &copy.trial_csv),
        (&original.manifest, &copy.manifest),
    ] {
        let same = fs::read(a)? == fs::read(b)?;
        println!(
            "{:<24} {}",
            a.file_name().unwrap().to_string_lossy(),
            if same { "identical" } else { "DIFFERS" }
        );
    }
    Ok(())
}
