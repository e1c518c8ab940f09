//! One single-pin and one two-pin presentation on the simulated rig, with
//! and without a finger on the rest.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tactile_rig::config::DemoConfig;
use tactile_rig::rig::{FingerModel, PokeParams, RigState};
use tactile_rig::session::{run_presentation, Stimulus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = DemoConfig::young();
    let params = PokeParams::from_touch(&cfg.touch, cfg.experiment.number_ftdata_recordings);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut rig = RigState::ready().move_global(cfg.touch.init, cfg.touch.movement_duration)?;
    rig = rig.set_stepper(0.001)?;

    for (label, finger) in [("finger", FingerModel::default()), ("no finger", FingerModel::absent())] {
        for stimulus in [Stimulus::SinglePin, Stimulus::TwoPins] {
            let (home, poke) = run_presentation(&rig, &cfg.touch, &params, stimulus, 0.001, &finger, &mut rng)?;
            println!(
                "{label}, {stimulus:?}: stopped on contact {} after {} polls at z = {:.4} m",
                poke.stopped_on_contact,
                poke.descent.len(),
                poke.stop_pose.v3
            );
            for s in &poke.recording.samples {
                println!("  {}", s.console_line());
            }
            rig = home;
        }
    }
    println!("virtual time {:.2} s", rig.sim_time());
    Ok(())
}
