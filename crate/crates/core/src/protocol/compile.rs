//! Sequence to time-tagged MOVE commands.

use thiserror::Error;

use super::Command;
use crate::kinematics::AxisFamily;
use crate::sequence::{validate_sequence, Sequence, ValidationReport};
use crate::trajectory::effective_motion_ms;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot compile an invalid sequence: {0}")]
pub struct CompileError(pub ValidationReport);

/// A command due at `at_ms` on the sequence timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimedCommand {
    pub at_ms: u64,
    pub command: Command,
}

/// Wire quantization: nearest tenth of a degree.
pub fn to_decideg(angle: f64) -> i32 {
    (angle * 10.0).round() as i32
}

/// Two MOVEs per block (F axis, then R axis) tagged at motion onset. Sorted by
/// tag, then joint index, which orders ties by structure and puts F before R.
pub fn compile_sequence_to_commands(seq: &Sequence) -> Result<Vec<TimedCommand>, CompileError> {
    let report = validate_sequence(seq);
    if !report.is_ok() {
        return Err(CompileError(report));
    }
    let mut out = Vec::with_capacity(seq.block_count() * 2);
    for block in seq.blocks() {
        let motion_ms = effective_motion_ms(block).expect("validated block");
        let at_ms = block.start_ms + block.delay_ms;
        for family in [AxisFamily::Lift, AxisFamily::Rotate] {
            let joint = block.structure.joint(family);
            let command = Command::move_joint(
                joint.index(),
                to_decideg(block.target(family)),
                motion_ms as u32,
            )
            .expect("in-range angles quantize in range");
            out.push(TimedCommand { at_ms, command });
        }
    }
    out.sort_by_key(|c| match c.command {
        Command::Move { joint, .. } => (c.at_ms, joint),
        _ => (c.at_ms, u8::MAX),
    });
    Ok(out)
}
