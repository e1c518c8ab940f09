//! Load a demo config, report problems, and print what a session would run.
//!
//!     cargo run --example parse_config -- [path/to/config.xml]

use tactile_rig::config::{load_demo_config, serialize_demo_config, validate_config, DemoConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => load_demo_config(path)?,
        None => DemoConfig::young(),
    };
    let report = validate_config(&cfg);
    for f in &report.findings {
        println!("invalid: {f}");
    }
    println!("data name      {}", cfg.data_name);
    println!(
        "distances (mm) {:?}",
        cfg.distances().iter().map(|d| d * 1000.0).collect::<Vec<_>>()
    );
    println!("thresholds     {:?}", cfg.touch.threshold.channels());
    println!(
        "timing (s)     wait {} move {} poke {}",
        cfg.touch.event_time_wait, cfg.touch.movement_duration, cfg.touch.poking_duration
    );
    println!("init pose      {:?}", cfg.touch.init.components());
    if report.is_runnable() {
        println!("\n{}", serialize_demo_config(&cfg)?);
    }
    Ok(())
}
