//! Print the balanced trial sequence for a seed.
//!
//!     cargo run --example schedule_trials -- 42

use tactile_rig::config::DemoConfig;
use tactile_rig::scheduler::Scheduler;
use tactile_rig::session::trial_announcement;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(42);
    let cfg = DemoConfig::young();
    let mut scheduler = Scheduler::new(&cfg.experiment, &cfg.distances(), seed).expect("bundled config has distances");
    println!("seed {seed}: {} trials", scheduler.total_trials());
    while let Some(plan) = scheduler.next_trial() {
        println!(
            "{:<55} {:.1} mm",
            trial_announcement(&plan, scheduler.group_size(plan.label)),
            plan.distance * 1000.0
        );
    }
    for q in scheduler.remaining_quota() {
        println!("{:.1} mm presented {}", q.distance * 1000.0, q.presented);
    }
}
