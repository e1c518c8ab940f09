#![allow(dead_code)]

use std::path::{Path, PathBuf};

use tactile_rig::autopilot::{demo_participant, drive, Autopilot, Observer};
use tactile_rig::config::DemoConfig;
use tactile_rig::rig::FingerModel;
use tactile_rig::runner::SessionRunner;
use tactile_rig::session::{Participant, Session};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// One training trial and one real trial at 1 mm.
pub fn golden_config() -> DemoConfig {
    let mut cfg = DemoConfig::young();
    cfg.smposes.retain(|s| s.c1 == 0.001);
    cfg.experiment.number_presentations = 1;
    cfg
}

pub const GOLDEN_SEED: u64 = 20240601;

/// Runs a whole session under `root` with an autopilot operator.
pub fn run_session<O: Observer>(
    config: DemoConfig,
    seed: u64,
    root: &Path,
    participant: Participant,
    debug: bool,
    observer: O,
    escape_after: Option<usize>,
) -> SessionRunner {
    let session = Session::start(config, FingerModel::default(), seed).unwrap();
    let mut runner = SessionRunner::new(session, root);
    let mut pilot = Autopilot::new(participant, debug, observer);
    pilot.escape_after = escape_after;
    drive(&mut runner, &mut pilot).unwrap();
    runner
}

pub fn default_participant() -> Participant {
    demo_participant()
}
