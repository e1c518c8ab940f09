//! Serve a session over WebSocket and act as the operator console from a
//! client thread, printing every frame received.
//!
//!     cargo run --example serve_console

use std::time::Duration;

use tactile_rig::config::DemoConfig;
use tactile_rig::gateway::{serve, ServeOptions};
use tactile_rig::rig::FingerModel;
use tactile_rig::runner::SessionRunner;
use tactile_rig::session::{Choice, OperatorEvent, Session};
use tactile_rig::wire::{WireBody, WireCommand, WireEvent};
use tungstenite::Message;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = tempfile::tempdir()?;
    let session = Session::start(DemoConfig::young(), FingerModel::default(), 8)?;
    let server = serve(
        SessionRunner::new(session, root.path()),
        "127.0.0.1:0",
        ServeOptions::default(),
    )?;
    println!("listening on ws://{}", server.local_addr());

    let (mut ws, _) = tungstenite::connect(format!("ws://{}", server.local_addr()))?;
    let commands = [
        OperatorEvent::Confirm(false),
        OperatorEvent::Text("p02".into()),
        OperatorEvent::Text("Alan".into()),
        OperatorEvent::Text("Turing".into()),
        OperatorEvent::Text("41".into()),
        OperatorEvent::Select(Choice::Male),
        OperatorEvent::Text(String::new()),
        OperatorEvent::Confirm(true),
        OperatorEvent::Confirm(true),
        OperatorEvent::Select(Choice::Second),
        OperatorEvent::Escape,
    ];
    for (i, event) in commands.into_iter().enumerate() {
        let id = format!("r{}", i + 1);
        ws.send(Message::Text(WireCommand::new(id.clone(), event).to_line()))?;
        // Print frames until the reply for this command arrives.
        'reply: loop {
            let Message::Text(text) = ws.read()? else { continue };
            for line in text.lines() {
                let frame = WireEvent::parse(line)?;
                println!("{line}");
                match &frame.body {
                    WireBody::Ack(a) if a.request_id == id => break 'reply,
                    WireBody::Error(e) if e.request_id.as_deref() == Some(id.as_str()) => break 'reply,
                    _ => {}
                }
            }
        }
    }
    server.wait_finished(Some(Duration::from_secs(2)));
    let runner = server.shutdown();
    println!("server stopped: {}", runner.session().prompt());
    Ok(())
}
