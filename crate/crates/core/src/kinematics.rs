//! Articulated structure set, per-axis angle ranges and the joint pose.
//!
//! The robot has eight structures with two axes each. Every axis belongs to
//! one of two families: the lift family (`pitch`, `lift`, `wag`) driven by a
//! motion block's F parameter, and the rotate family (`rotate`, `flex`,
//! `curl`) driven by its R parameter. Joint indices follow structure order,
//! lift-family axis first.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of articulated structures.
pub const STRUCTURE_COUNT: usize = 8;
/// Number of actuated joints (two per structure).
pub const JOINT_COUNT: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KinematicsError {
    #[error("axis `{axis}` does not belong to structure `{structure}`")]
    InvalidAxis {
        structure: StructureId,
        axis: AxisId,
    },
    #[error("joint index {0} out of range 0..16")]
    JointIndex(usize),
    #[error("unknown structure `{0}`")]
    UnknownStructure(String),
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureId {
    EarLeft,
    EarRight,
    Head,
    LimbFrontLeft,
    LimbFrontRight,
    LimbRearLeft,
    LimbRearRight,
    Tail,
}

impl StructureId {
    pub const ALL: [StructureId; STRUCTURE_COUNT] = [
        StructureId::EarLeft,
        StructureId::EarRight,
        StructureId::Head,
        StructureId::LimbFrontLeft,
        StructureId::LimbFrontRight,
        StructureId::LimbRearLeft,
        StructureId::LimbRearRight,
        StructureId::Tail,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            StructureId::EarLeft => "ear_left",
            StructureId::EarRight => "ear_right",
            StructureId::Head => "head",
            StructureId::LimbFrontLeft => "limb_front_left",
            StructureId::LimbFrontRight => "limb_front_right",
            StructureId::LimbRearLeft => "limb_rear_left",
            StructureId::LimbRearRight => "limb_rear_right",
            StructureId::Tail => "tail",
        }
    }

    /// The two axes of this structure, lift family first.
    pub fn axes(self) -> [AxisId; 2] {
        match self {
            StructureId::EarLeft | StructureId::EarRight | StructureId::Head => {
                [AxisId::Pitch, AxisId::Rotate]
            }
            StructureId::LimbFrontLeft
            | StructureId::LimbFrontRight
            | StructureId::LimbRearLeft
            | StructureId::LimbRearRight => [AxisId::Lift, AxisId::Flex],
            StructureId::Tail => [AxisId::Wag, AxisId::Curl],
        }
    }

    pub fn axis(self, family: AxisFamily) -> AxisId {
        self.axes()[family as usize]
    }

    pub fn joint(self, family: AxisFamily) -> Joint {
        Joint {
            structure: self,
            axis: self.axis(family),
        }
    }
}

impl fmt::Display for StructureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StructureId {
    type Err = KinematicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StructureId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| KinematicsError::UnknownStructure(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisId {
    Pitch,
    Rotate,
    Lift,
    Flex,
    Wag,
    Curl,
}

impl AxisId {
    pub const ALL: [AxisId; 6] = [
        AxisId::Pitch,
        AxisId::Rotate,
        AxisId::Lift,
        AxisId::Flex,
        AxisId::Wag,
        AxisId::Curl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AxisId::Pitch => "pitch",
            AxisId::Rotate => "rotate",
            AxisId::Lift => "lift",
            AxisId::Flex => "flex",
            AxisId::Wag => "wag",
            AxisId::Curl => "curl",
        }
    }

    pub fn family(self) -> AxisFamily {
        match self {
            AxisId::Pitch | AxisId::Lift | AxisId::Wag => AxisFamily::Lift,
            AxisId::Rotate | AxisId::Flex | AxisId::Curl => AxisFamily::Rotate,
        }
    }
}

impl fmt::Display for AxisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AxisId {
    type Err = KinematicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AxisId::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| KinematicsError::UnknownAxis(s.to_string()))
    }
}

/// Which motion-block parameter drives an axis: F for the lift family, R for
/// the rotate family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AxisFamily {
    Lift = 0,
    Rotate = 1,
}

/// One actuated joint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Joint {
    pub structure: StructureId,
    pub axis: AxisId,
}

impl Joint {
    pub fn new(structure: StructureId, axis: AxisId) -> Result<Self, KinematicsError> {
        if structure.axes().contains(&axis) {
            Ok(Joint { structure, axis })
        } else {
            Err(KinematicsError::InvalidAxis { structure, axis })
        }
    }

    /// All 16 joints in wire order.
    pub fn all() -> impl Iterator<Item = Joint> {
        StructureId::ALL.into_iter().flat_map(|s| {
            s.axes()
                .into_iter()
                .map(move |axis| Joint { structure: s, axis })
        })
    }

    pub fn from_index(index: usize) -> Result<Self, KinematicsError> {
        if index >= JOINT_COUNT {
            return Err(KinematicsError::JointIndex(index));
        }
        let structure = StructureId::ALL[index / 2];
        Ok(Joint {
            structure,
            axis: structure.axes()[index % 2],
        })
    }

    pub fn index(self) -> usize {
        self.structure.index() * 2 + self.axis.family() as usize
    }

    pub fn spec(self) -> JointSpec {
        let (min_deg, max_deg) = range_of(self.structure, self.axis);
        JointSpec {
            structure: self.structure,
            axis: self.axis,
            min_deg,
            max_deg,
        }
    }

    pub fn clamp(self, angle: f64) -> f64 {
        let spec = self.spec();
        angle.clamp(spec.min_deg, spec.max_deg)
    }

    pub fn contains(self, angle: f64) -> bool {
        let spec = self.spec();
        angle >= spec.min_deg && angle <= spec.max_deg
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.structure, self.axis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointSpec {
    pub structure: StructureId,
    pub axis: AxisId,
    pub min_deg: f64,
    pub max_deg: f64,
}

// Ears and head share one table row; left/right limbs are symmetric.
fn range_of(structure: StructureId, axis: AxisId) -> (f64, f64) {
    match (structure, axis) {
        (_, AxisId::Pitch) | (_, AxisId::Rotate) => (-40.0, 40.0),
        (_, AxisId::Lift) => (-90.0, 90.0),
        (_, AxisId::Flex) => (0.0, 90.0),
        (_, AxisId::Wag) => (-90.0, 90.0),
        (_, AxisId::Curl) => (0.0, 90.0),
    }
}

/// The full 16-entry joint table in wire order.
pub fn joint_table() -> Vec<JointSpec> {
    Joint::all().map(Joint::spec).collect()
}

pub fn joint_range(structure: StructureId, axis: AxisId) -> Result<(f64, f64), KinematicsError> {
    let spec = Joint::new(structure, axis)?.spec();
    Ok((spec.min_deg, spec.max_deg))
}

pub fn clamp_angle(
    structure: StructureId,
    axis: AxisId,
    angle: f64,
) -> Result<f64, KinematicsError> {
    Ok(Joint::new(structure, axis)?.clamp(angle))
}

/// Angles of all 16 joints, indexed in wire order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointState([f64; JOINT_COUNT]);

impl JointState {
    pub fn from_angles(angles: [f64; JOINT_COUNT]) -> Self {
        JointState(angles)
    }

    pub fn angles(&self) -> &[f64; JOINT_COUNT] {
        &self.0
    }

    pub fn get(&self, joint: Joint) -> f64 {
        self.0[joint.index()]
    }

    pub fn set(&mut self, joint: Joint, angle: f64) {
        self.0[joint.index()] = angle;
    }

    /// (F, R) pair of one structure.
    pub fn pair(&self, structure: StructureId) -> (f64, f64) {
        let i = structure.index() * 2;
        (self.0[i], self.0[i + 1])
    }

    pub fn set_pair(&mut self, structure: StructureId, (f, r): (f64, f64)) {
        let i = structure.index() * 2;
        self.0[i] = f;
        self.0[i + 1] = r;
    }

    /// Joints whose angle is outside their range (or not finite).
    pub fn violations(&self) -> Vec<Joint> {
        Joint::all().filter(|j| !j.contains(self.get(*j))).collect()
    }

    pub fn is_valid(&self) -> bool {
        self.violations().is_empty()
    }

    /// Largest absolute per-joint difference.
    pub fn max_abs_diff(&self, other: &JointState) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// All joints at 0°, the mechanical neutral.
pub fn neutral_pose() -> JointState {
    JointState::default()
}
