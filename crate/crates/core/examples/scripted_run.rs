//! Drive a session from a command script, the same format `tactile-rig run
//! --script` reads: one JSON command per line, `#` starts a comment.

use tactile_rig::config::DemoConfig;
use tactile_rig::gateway::run_script_text;
use tactile_rig::rig::FingerModel;
use tactile_rig::runner::SessionRunner;
use tactile_rig::session::Session;

const SCRIPT: &str = r#"
# debug mode on
{"request_id":"1","kind":"confirm","payload":true}
{"request_id":"2","kind":"text","payload":"p07"}
{"request_id":"3","kind":"text","payload":"Grace"}
{"request_id":"4","kind":"text","payload":"Hopper"}
{"request_id":"5","kind":"text","payload":"41"}
{"request_id":"6","kind":"select","payload":"Female"}
{"request_id":"7","kind":"text","payload":""}
# move to init, then the first stepper move
{"request_id":"8","kind":"confirm","payload":true}
{"request_id":"9","kind":"confirm","payload":true}
{"request_id":"10","kind":"select","payload":"First"}
{"request_id":"11","kind":"confirm","payload":true}
{"request_id":"12","kind":"select","payload":"Second"}
{"request_id":"13","kind":"escape"}
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = tempfile::tempdir()?;
    let session = Session::start(DemoConfig::young(), FingerModel::default(), 5)?;
    let out = run_script_text(SessionRunner::new(session, root.path()), SCRIPT)?;
    println!("{} trials, ended in {:?}", out.trials, out.phase);
    for r in out.runner.session().records() {
        println!(
            "  #{} {:.1} mm {:?} -> {:?}",
            r.trial_no,
            r.distance * 1000.0,
            r.presentation,
            r.response
        );
    }
    Ok(())
}
