//! Time-sampled joint trajectories for motion blocks.
//!
//! Every block eases its F and R axes on one shared time base with a cubic
//! Bézier whose inner control points sit on the endpoints, giving zero
//! velocity at both ends of the motion.

use thiserror::Error;

use crate::kinematics::StructureId;
use crate::sequence::MotionBlock;

/// Default sampling period (50 Hz).
pub const DEFAULT_TICK_MS: u64 = 20;

/// Motion time at speed level 1; level `s` takes `BASE_MOTION_MS / s`.
pub const BASE_MOTION_MS: u64 = 2400;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("easing parameter {0} outside [0, 1]")]
    EaseDomain(f64),
    #[error("speed level {0} outside 1..=5")]
    SpeedLevel(u8),
    #[error("tick period must be positive")]
    ZeroTick,
    #[error("motion block is not playable: {0}")]
    InvalidBlock(&'static str),
}

/// One-dimensional cubic Bézier over the unit interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicBezier {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl CubicBezier {
    pub fn eval(&self, u: f64) -> f64 {
        let v = 1.0 - u;
        v * v * v * self.p0
            + 3.0 * v * v * u * self.p1
            + 3.0 * v * u * u * self.p2
            + u * u * u * self.p3
    }
}

/// Ease-in-ease-out progress curve.
pub const EASE_CURVE: CubicBezier = CubicBezier {
    p0: 0.0,
    p1: 0.0,
    p2: 1.0,
    p3: 1.0,
};

/// Progress weight for normalized time `u`.
pub fn ease(u: f64) -> Result<f64, TrajectoryError> {
    if !(0.0..=1.0).contains(&u) {
        return Err(TrajectoryError::EaseDomain(u));
    }
    Ok(ease_unchecked(u))
}

#[inline]
pub(crate) fn ease_unchecked(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        EASE_CURVE.eval(u)
    }
}

/// Discrete speed level S.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpeedLevel(u8);

impl SpeedLevel {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 5;

    pub fn new(level: u8) -> Result<Self, TrajectoryError> {
        if (Self::MIN..=Self::MAX).contains(&level) {
            Ok(SpeedLevel(level))
        } else {
            Err(TrajectoryError::SpeedLevel(level))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

pub fn motion_duration(speed: SpeedLevel) -> u64 {
    BASE_MOTION_MS / speed.0 as u64
}

/// Motion time of a block once compressed into its post-delay window.
pub fn effective_motion_ms(block: &MotionBlock) -> Result<u64, TrajectoryError> {
    let speed = SpeedLevel::new(block.speed)?;
    if block.delay_ms >= block.duration_ms {
        return Err(TrajectoryError::InvalidBlock(
            "delay must be shorter than duration",
        ));
    }
    Ok(motion_duration(speed).min(block.duration_ms - block.delay_ms))
}

/// Continuous two-axis eased motion; holds `from` before `start_ms` and `to`
/// after `start_ms + motion_ms`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionProfile {
    pub start_ms: u64,
    pub motion_ms: u64,
    pub from: (f64, f64),
    pub to: (f64, f64),
}

impl MotionProfile {
    pub fn end_ms(&self) -> u64 {
        self.start_ms + self.motion_ms
    }

    pub fn progress(&self, t_ms: u64) -> f64 {
        if t_ms <= self.start_ms {
            0.0
        } else if t_ms >= self.end_ms() {
            1.0
        } else {
            (t_ms - self.start_ms) as f64 / self.motion_ms as f64
        }
    }

    pub fn eval(&self, t_ms: u64) -> (f64, f64) {
        let u = self.progress(t_ms);
        if u >= 1.0 {
            return self.to;
        }
        let w = ease_unchecked(u);
        (
            self.from.0 + (self.to.0 - self.from.0) * w,
            self.from.1 + (self.to.1 - self.from.1) * w,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t_ms: u64,
    pub f_deg: f64,
    pub r_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub structure: StructureId,
    pub tick_ms: u64,
    pub profile: MotionProfile,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        &self.samples[self.samples.len() - 1]
    }
}

/// Samples one block starting from `start_pose`.
///
/// Samples run from motion onset (`start_ms + delay_ms`) to block end every
/// `tick_ms`, with the block end always included.
pub fn plan_block(
    start_pose: (f64, f64),
    block: &MotionBlock,
    tick_ms: u64,
) -> Result<Trajectory, TrajectoryError> {
    if tick_ms == 0 {
        return Err(TrajectoryError::ZeroTick);
    }
    let motion_ms = effective_motion_ms(block)?;
    let profile = MotionProfile {
        start_ms: block.start_ms + block.delay_ms,
        motion_ms,
        from: start_pose,
        to: (block.f_deg, block.r_deg),
    };
    let end = block.start_ms + block.duration_ms;
    let mut samples = Vec::new();
    let mut t = profile.start_ms;
    while t < end {
        samples.push(sample_at(&profile, t));
        t += tick_ms;
    }
    samples.push(sample_at(&profile, end));
    Ok(Trajectory {
        structure: block.structure,
        tick_ms,
        profile,
        samples,
    })
}

fn sample_at(profile: &MotionProfile, t_ms: u64) -> Sample {
    let (f_deg, r_deg) = profile.eval(t_ms);
    Sample { t_ms, f_deg, r_deg }
}
