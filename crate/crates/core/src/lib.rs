//! Motion authoring and playback for a 16-joint companion robot.
//!
//! Sequences of per-structure motion blocks are validated, planned into eased
//! trajectories, executed on a tick-driven engine and relayed to a controller
//! over a line-oriented serial protocol. A small knowledge base of interaction
//! patterns and design cards ships alongside.

pub mod executor;
pub mod kinematics;
pub mod knowledge;
pub mod presets;
pub mod protocol;
pub mod sequence;
pub mod simulator;
pub mod trajectory;
