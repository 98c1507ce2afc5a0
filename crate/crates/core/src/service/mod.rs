//! Session runtime: pilot sources, the control loop, replay, the wire
//! protocol and the live bridge.

pub mod expert;
pub mod pilot;
pub mod plot;
pub mod serve;
pub mod session;
pub mod wire;

pub use pilot::{LiveEvent, LivePilot, LogPilot, PilotEvent, PilotSource, ScriptedPilot, SessionView, Trace};
pub use session::{first_divergence, record_trace, replay, run_session, run_trace, Session};
