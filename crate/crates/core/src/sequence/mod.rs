//! Timeline data model: motion blocks grouped into per-structure tracks.
//!
//! A [`Sequence`] can hold anything a document can express, including
//! out-of-range angles and overlapping blocks. [`validate_sequence`] decides
//! whether it is playable.

mod document;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::kinematics::{AxisFamily, Joint, StructureId};
use crate::trajectory::SpeedLevel;

pub use document::{
    export_sequence, import_sequence, parse_sequence, ExportError, ImportError, ParseError,
    DOCUMENT_VERSION,
};

/// One parameterized motion unit on a structure's track.
///
/// `f_deg` targets the structure's lift-family axis, `r_deg` its
/// rotate-family axis. Motion starts `delay_ms` after `start_ms`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionBlock {
    pub structure: StructureId,
    pub f_deg: f64,
    pub r_deg: f64,
    pub speed: u8,
    pub delay_ms: u64,
    pub start_ms: u64,
    pub duration_ms: u64,
}

impl MotionBlock {
    pub fn end_ms(&self) -> u64 {
        self.start_ms + self.duration_ms
    }

    /// Half-open interval intersection of the two timeline windows.
    pub fn overlaps(&self, other: &MotionBlock) -> bool {
        self.start_ms < other.end_ms() && other.start_ms < self.end_ms()
    }

    pub fn speed_level(&self) -> Option<SpeedLevel> {
        SpeedLevel::new(self.speed).ok()
    }

    pub fn target(&self, family: AxisFamily) -> f64 {
        match family {
            AxisFamily::Lift => self.f_deg,
            AxisFamily::Rotate => self.r_deg,
        }
    }

    /// Field-level violations of this block, reported as if it sat at
    /// `index` on its own track.
    fn field_violations(&self, index: usize, out: &mut Vec<Violation>) {
        let track = self.structure;
        for family in [AxisFamily::Lift, AxisFamily::Rotate] {
            let joint = track.joint(family);
            let value = self.target(family);
            if !joint.contains(value) {
                let spec = joint.spec();
                out.push(Violation::AngleOutOfRange {
                    track,
                    block: index,
                    joint,
                    value,
                    min: spec.min_deg,
                    max: spec.max_deg,
                });
            }
        }
        if self.speed_level().is_none() {
            out.push(Violation::SpeedOutOfRange {
                track,
                block: index,
                speed: self.speed,
            });
        }
        if self.duration_ms == 0 {
            out.push(Violation::ZeroDuration {
                track,
                block: index,
            });
        } else if self.delay_ms >= self.duration_ms {
            out.push(Violation::DelayNotBelowDuration {
                track,
                block: index,
                delay_ms: self.delay_ms,
                duration_ms: self.duration_ms,
            });
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        self.field_violations(0, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub structure: StructureId,
    pub blocks: Vec<MotionBlock>,
}

impl Track {
    pub fn new(structure: StructureId) -> Self {
        Track {
            structure,
            blocks: Vec::new(),
        }
    }

    pub fn with_blocks(structure: StructureId, blocks: Vec<MotionBlock>) -> Self {
        Track { structure, blocks }
    }
}

/// A named set of tracks. Tracks are kept in structure order; blocks keep the
/// order they were given in.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    name: String,
    tracks: Vec<Track>,
}

impl Sequence {
    pub fn new(name: impl Into<String>) -> Self {
        Sequence {
            name: name.into(),
            tracks: Vec::new(),
        }
    }

    pub fn from_tracks(name: impl Into<String>, mut tracks: Vec<Track>) -> Self {
        tracks.sort_by_key(|t| t.structure);
        Sequence {
            name: name.into(),
            tracks,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn track(&self, structure: StructureId) -> Option<&Track> {
        self.tracks.iter().find(|t| t.structure == structure)
    }

    pub fn structures(&self) -> impl Iterator<Item = StructureId> + '_ {
        self.tracks
            .iter()
            .filter(|t| !t.blocks.is_empty())
            .map(|t| t.structure)
    }

    pub fn blocks(&self) -> impl Iterator<Item = &MotionBlock> {
        self.tracks.iter().flat_map(|t| t.blocks.iter())
    }

    pub fn block_count(&self) -> usize {
        self.tracks.iter().map(|t| t.blocks.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.block_count() == 0
    }

    pub fn total_duration_ms(&self) -> u64 {
        self.blocks().map(MotionBlock::end_ms).max().unwrap_or(0)
    }

    /// Copy of this sequence with the given structure's track removed.
    pub fn without_structure(&self, structure: StructureId) -> Sequence {
        Sequence {
            name: self.name.clone(),
            tracks: self
                .tracks
                .iter()
                .filter(|t| t.structure != structure)
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateTrack {
        track: StructureId,
    },
    StructureMismatch {
        track: StructureId,
        block: usize,
        found: StructureId,
    },
    AngleOutOfRange {
        track: StructureId,
        block: usize,
        #[serde(serialize_with = "serialize_joint")]
        joint: Joint,
        value: f64,
        min: f64,
        max: f64,
    },
    SpeedOutOfRange {
        track: StructureId,
        block: usize,
        speed: u8,
    },
    ZeroDuration {
        track: StructureId,
        block: usize,
    },
    DelayNotBelowDuration {
        track: StructureId,
        block: usize,
        delay_ms: u64,
        duration_ms: u64,
    },
    Unsorted {
        track: StructureId,
        block: usize,
    },
    Overlap {
        track: StructureId,
        first: usize,
        second: usize,
    },
}

fn serialize_joint<S: serde::Serializer>(joint: &Joint, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(joint)
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateTrack { track } => write!(f, "{track}: more than one track"),
            Violation::StructureMismatch {
                track,
                block,
                found,
            } => {
                write!(f, "{track}[{block}]: block belongs to {found}")
            }
            Violation::AngleOutOfRange {
                track,
                block,
                joint,
                value,
                min,
                max,
            } => write!(
                f,
                "{track}[{block}]: {joint} = {value} outside [{min}, {max}]"
            ),
            Violation::SpeedOutOfRange {
                track,
                block,
                speed,
            } => {
                write!(f, "{track}[{block}]: speed {speed} outside 1..=5")
            }
            Violation::ZeroDuration { track, block } => {
                write!(f, "{track}[{block}]: duration must be positive")
            }
            Violation::DelayNotBelowDuration {
                track,
                block,
                delay_ms,
                duration_ms,
            } => write!(
                f,
                "{track}[{block}]: delay {delay_ms} ms not below duration {duration_ms} ms"
            ),
            Violation::Unsorted { track, block } => {
                write!(f, "{track}[{block}]: starts before the previous block")
            }
            Violation::Overlap {
                track,
                first,
                second,
            } => {
                write!(f, "{track}: blocks {first} and {second} overlap")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        writeln!(f, "{} violation(s)", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

pub fn validate_sequence(seq: &Sequence) -> ValidationReport {
    let mut violations = Vec::new();
    for (i, track) in seq.tracks.iter().enumerate() {
        if i > 0 && seq.tracks[i - 1].structure == track.structure {
            violations.push(Violation::DuplicateTrack {
                track: track.structure,
            });
        }
        for (b, block) in track.blocks.iter().enumerate() {
            if block.structure != track.structure {
                violations.push(Violation::StructureMismatch {
                    track: track.structure,
                    block: b,
                    found: block.structure,
                });
            }
            let mut fields = Vec::new();
            block.field_violations(b, &mut fields);
            // report under the track's structure even when the block disagrees
            for mut v in fields {
                set_track(&mut v, track.structure);
                violations.push(v);
            }
            if b > 0 && block.start_ms < track.blocks[b - 1].start_ms {
                violations.push(Violation::Unsorted {
                    track: track.structure,
                    block: b,
                });
            }
        }
        for a in 0..track.blocks.len() {
            for b in a + 1..track.blocks.len() {
                if track.blocks[a].overlaps(&track.blocks[b]) {
                    violations.push(Violation::Overlap {
                        track: track.structure,
                        first: a,
                        second: b,
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

fn set_track(v: &mut Violation, structure: StructureId) {
    match v {
        Violation::DuplicateTrack { track }
        | Violation::StructureMismatch { track, .. }
        | Violation::AngleOutOfRange { track, .. }
        | Violation::SpeedOutOfRange { track, .. }
        | Violation::ZeroDuration { track, .. }
        | Violation::DelayNotBelowDuration { track, .. }
        | Violation::Unsorted { track, .. }
        | Violation::Overlap { track, .. } => *track = structure,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InsertError {
    #[error("block is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidBlock(Vec<Violation>),
    #[error("block overlaps {structure} block {index} at [{}, {})", .conflict.start_ms, .conflict.end_ms())]
    Overlap {
        structure: StructureId,
        index: usize,
        conflict: MotionBlock,
    },
}

/// Places `block` on its structure's track, keeping blocks sorted by start.
/// Never auto-shifts: any overlap on the same track rejects the insert.
pub fn insert_block(seq: &Sequence, block: MotionBlock) -> Result<Sequence, InsertError> {
    let problems = block.violations();
    if !problems.is_empty() {
        return Err(InsertError::InvalidBlock(problems));
    }
    let mut out = seq.clone();
    let pos = match out
        .tracks
        .iter()
        .position(|t| t.structure == block.structure)
    {
        Some(pos) => pos,
        None => {
            let pos = out
                .tracks
                .iter()
                .position(|t| t.structure > block.structure)
                .unwrap_or(out.tracks.len());
            out.tracks.insert(pos, Track::new(block.structure));
            pos
        }
    };
    let track = &mut out.tracks[pos];
    if let Some((index, conflict)) = track
        .blocks
        .iter()
        .enumerate()
        .find(|(_, b)| b.overlaps(&block))
    {
        return Err(InsertError::Overlap {
            structure: block.structure,
            index,
            conflict: *conflict,
        });
    }
    let at = track
        .blocks
        .iter()
        .position(|b| b.start_ms > block.start_ms)
        .unwrap_or(track.blocks.len());
    track.blocks.insert(at, block);
    Ok(out)
}
