pub mod analysis;
pub mod autopilot;
pub mod config;
pub mod gateway;
pub mod persistence;
pub mod rig;
pub mod runner;
pub mod scheduler;
pub mod session;
pub mod wire;
