//! Whole-body bilateral teleoperation of a wheeled humanoid: retargeting
//! mappings, tracking controllers, haptic feedback and a deterministic
//! desk-scale simulation.

pub mod config;
pub mod control;
pub mod error;
pub mod haptics;
pub mod log;
pub mod models;
pub mod retarget;
pub mod service;
pub mod sim;
pub mod state;

pub use config::Config;
pub use error::{Result, TeleopError};
pub use state::{ArmState, JointVec, Mode, PilotInput, RobotState, Side};
