//! Protocol-faithful virtual controller.
//!
//! [`VirtualController`] consumes wire frames and drives 16 virtual joints
//! with the same ease curve the engine uses. [`SimulatedLink`] puts it behind
//! a [`Transport`] with seeded fault injection and a per-window byte budget
//! derived from the baud rate.

mod relay;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::kinematics::{neutral_pose, Joint, JointState, JOINT_COUNT};
use crate::protocol::{
    decode_frame, encode_reply, salvage_seq, Command, Exchange, LinkConfig, LinkError, Reply,
    Transport,
};
use crate::trajectory::{ease_unchecked, DEFAULT_TICK_MS};

pub use relay::{mirror_equivalence_check, run_wire_path, Relay, RelayStats, WireRun};

#[derive(Debug, Clone, Copy, PartialEq)]
struct JointMotion {
    from: f64,
    to: f64,
    start_ms: u64,
    motion_ms: u64,
}

impl JointMotion {
    fn eval(&self, t_ms: u64) -> f64 {
        if t_ms >= self.start_ms + self.motion_ms {
            return self.to;
        }
        let u = t_ms.saturating_sub(self.start_ms) as f64 / self.motion_ms as f64;
        self.from + (self.to - self.from) * ease_unchecked(u)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLogEntry {
    pub t_ms: u64,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetrySample {
    pub t_ms: u64,
    pub pose: JointState,
}

impl TelemetrySample {
    pub fn line(&self) -> String {
        telemetry_line(self.t_ms, &self.pose)
    }
}

/// `<t_ms> <16 angles, one decimal>`.
pub fn telemetry_line(t_ms: u64, pose: &JointState) -> String {
    let mut line = t_ms.to_string();
    for a in pose.angles() {
        let _ = write!(line, " {:.1}", round_tenth(*a));
    }
    line
}

/// Rounds to 0.1 and folds negative zero into zero.
pub fn round_tenth(angle: f64) -> f64 {
    let v = (angle * 10.0).round() / 10.0;
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

#[derive(Debug, Clone)]
pub struct VirtualController {
    now_ms: u64,
    pose: JointState,
    motions: [Option<JointMotion>; JOINT_COUNT],
    last_seen_seq: Option<u8>,
    applied: u64,
    sample_every_ms: Option<u64>,
    telemetry: Vec<TelemetrySample>,
    rx_log: Vec<FrameLogEntry>,
    tx_log: Vec<FrameLogEntry>,
}

impl Default for VirtualController {
    fn default() -> Self {
        VirtualController::new()
    }
}

impl VirtualController {
    pub fn new() -> Self {
        VirtualController {
            now_ms: 0,
            pose: neutral_pose(),
            motions: [None; JOINT_COUNT],
            last_seen_seq: None,
            applied: 0,
            sample_every_ms: None,
            telemetry: Vec::new(),
            rx_log: Vec::new(),
            tx_log: Vec::new(),
        }
    }

    /// Records the pose at every multiple of `tick_ms` the clock passes,
    /// starting with the current instant.
    pub fn with_telemetry(mut self, tick_ms: u64) -> Self {
        assert!(tick_ms > 0, "telemetry period must be positive");
        self.sample_every_ms = Some(tick_ms);
        if self.now_ms.is_multiple_of(tick_ms) {
            self.telemetry.push(TelemetrySample {
                t_ms: self.now_ms,
                pose: self.pose,
            });
        }
        self
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn pose(&self) -> &JointState {
        &self.pose
    }

    pub fn last_seen_seq(&self) -> Option<u8> {
        self.last_seen_seq
    }

    /// Number of commands applied (duplicates excluded).
    pub fn applied(&self) -> u64 {
        self.applied
    }

    pub fn is_moving(&self) -> bool {
        self.motions.iter().any(Option::is_some)
    }

    pub fn telemetry(&self) -> &[TelemetrySample] {
        &self.telemetry
    }

    pub fn telemetry_log(&self) -> String {
        self.telemetry.iter().map(|s| s.line() + "\n").collect()
    }

    pub fn rx_log(&self) -> &[FrameLogEntry] {
        &self.rx_log
    }

    pub fn tx_log(&self) -> &[FrameLogEntry] {
        &self.tx_log
    }

    fn pose_at(&self, t_ms: u64) -> JointState {
        let mut pose = self.pose;
        for (i, m) in self.motions.iter().enumerate() {
            if let Some(m) = m {
                pose.set(Joint::from_index(i).expect("index < 16"), m.eval(t_ms));
            }
        }
        pose
    }

    /// Integrates motions up to `t_ms`; earlier instants are ignored.
    pub fn advance_to(&mut self, t_ms: u64) -> JointState {
        if t_ms <= self.now_ms {
            return self.pose;
        }
        if let Some(every) = self.sample_every_ms {
            let mut next = (self.now_ms / every + 1) * every;
            while next <= t_ms {
                self.telemetry.push(TelemetrySample {
                    t_ms: next,
                    pose: self.pose_at(next),
                });
                next += every;
            }
        }
        self.pose = self.pose_at(t_ms);
        for m in &mut self.motions {
            if m.is_some_and(|m| t_ms >= m.start_ms + m.motion_ms) {
                *m = None;
            }
        }
        self.now_ms = t_ms;
        self.pose
    }

    pub fn advance(&mut self, dt_ms: u64) -> JointState {
        self.advance_to(self.now_ms + dt_ms)
    }

    /// Handles one incoming frame at `now_ms` and returns the reply bytes.
    /// A frame whose sequence number cannot be recovered gets no reply.
    pub fn feed_frame(&mut self, bytes: &[u8], now_ms: u64) -> Vec<u8> {
        self.advance_to(now_ms);
        let now = self.now_ms;
        self.rx_log.push(FrameLogEntry {
            t_ms: now,
            bytes: bytes.to_vec(),
        });
        let reply = match decode_frame(bytes) {
            Ok(frame) => {
                if self.last_seen_seq != Some(frame.seq) {
                    self.last_seen_seq = Some(frame.seq);
                    self.apply(frame.command, now);
                }
                Some(Reply::Ack(frame.seq))
            }
            Err(_) => salvage_seq(bytes).map(Reply::Nak),
        };
        let out = reply.map(|r| encode_reply(&r)).unwrap_or_default();
        if !out.is_empty() {
            self.tx_log.push(FrameLogEntry {
                t_ms: now,
                bytes: out.clone(),
            });
        }
        out
    }

    fn apply(&mut self, command: Command, now: u64) {
        self.applied += 1;
        match command {
            Command::Move {
                joint,
                target_decideg,
                motion_ms,
            } => {
                let joint = Joint::from_index(joint as usize).expect("decoded joint is in range");
                let motion = JointMotion {
                    from: self.pose.get(joint),
                    to: target_decideg as f64 / 10.0,
                    start_ms: now,
                    motion_ms: motion_ms as u64,
                };
                if motion.motion_ms == 0 {
                    self.pose.set(joint, motion.to);
                    self.motions[joint.index()] = None;
                } else {
                    self.motions[joint.index()] = Some(motion);
                }
            }
            Command::Stop => self.motions = [None; JOINT_COUNT],
            Command::Ping => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FaultProfileError {
    #[error("{name} must be a probability in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
}

/// Seeded per-transmission fault injection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultProfile {
    pub drop_rate: f64,
    pub corrupt_rate: f64,
    pub rng_seed: u64,
}

impl Default for FaultProfile {
    fn default() -> Self {
        FaultProfile::lossless()
    }
}

impl FaultProfile {
    pub fn lossless() -> Self {
        FaultProfile {
            drop_rate: 0.0,
            corrupt_rate: 0.0,
            rng_seed: 0,
        }
    }

    pub fn new(
        drop_rate: f64,
        corrupt_rate: f64,
        rng_seed: u64,
    ) -> Result<Self, FaultProfileError> {
        for (name, value) in [("drop_rate", drop_rate), ("corrupt_rate", corrupt_rate)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(FaultProfileError::Probability { name, value });
            }
        }
        Ok(FaultProfile {
            drop_rate,
            corrupt_rate,
            rng_seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransmissionFate {
    Delivered,
    Dropped,
    Corrupted,
}

/// One transmission as seen by the link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkTraceEntry {
    pub sent_ms: u64,
    pub arrived_ms: u64,
    pub fate: TransmissionFate,
    pub reply: Option<Vec<u8>>,
}

/// Relay-to-controller link with the controller at the far end.
///
/// Faults apply to frames travelling to the controller; replies always make
/// it back. Frames that would exceed the byte budget of the current pacing
/// window (`baud / 10` bytes per second) wait for the next window.
#[derive(Debug, Clone)]
pub struct SimulatedLink {
    controller: VirtualController,
    faults: FaultProfile,
    rng: ChaCha8Rng,
    window_ms: u64,
    budget_bytes: u64,
    window_start_ms: u64,
    window_used: u64,
    trace: Vec<LinkTraceEntry>,
}

impl SimulatedLink {
    pub fn new(controller: VirtualController, config: &LinkConfig, faults: FaultProfile) -> Self {
        SimulatedLink::with_window(controller, config, faults, DEFAULT_TICK_MS)
    }

    pub fn with_window(
        controller: VirtualController,
        config: &LinkConfig,
        faults: FaultProfile,
        window_ms: u64,
    ) -> Self {
        assert!(window_ms > 0, "pacing window must be positive");
        SimulatedLink {
            controller,
            faults,
            rng: ChaCha8Rng::seed_from_u64(faults.rng_seed),
            window_ms,
            budget_bytes: config.bytes_per_second() * window_ms / 1000,
            window_start_ms: 0,
            window_used: 0,
            trace: Vec::new(),
        }
    }

    pub fn controller(&self) -> &VirtualController {
        &self.controller
    }

    pub fn controller_mut(&mut self) -> &mut VirtualController {
        &mut self.controller
    }

    pub fn into_controller(self) -> VirtualController {
        self.controller
    }

    pub fn budget_bytes(&self) -> u64 {
        self.budget_bytes
    }

    pub fn trace(&self) -> &[LinkTraceEntry] {
        &self.trace
    }

    /// Earliest instant at or after `now` whose window can take `len` bytes.
    fn pace(&mut self, now: u64, len: u64) -> u64 {
        let mut at = now;
        loop {
            let window = at / self.window_ms * self.window_ms;
            if window != self.window_start_ms {
                self.window_start_ms = window;
                self.window_used = 0;
            }
            // an oversized frame still goes out alone in a fresh window
            if self.window_used == 0 || self.window_used + len <= self.budget_bytes {
                self.window_used += len;
                return at;
            }
            at = window + self.window_ms;
        }
    }
}

impl Transport for SimulatedLink {
    fn exchange(
        &mut self,
        frame: &[u8],
        now_ms: u64,
        timeout_ms: u64,
    ) -> Result<Exchange, LinkError> {
        let now_ms = now_ms.max(self.controller.now_ms());
        let arrived = self.pace(now_ms, frame.len() as u64);
        let waited = arrived - now_ms;
        let dropped = self.rng.random::<f64>() < self.faults.drop_rate;
        let corrupted = !dropped && self.rng.random::<f64>() < self.faults.corrupt_rate;
        let fate = if dropped {
            TransmissionFate::Dropped
        } else if corrupted {
            TransmissionFate::Corrupted
        } else {
            TransmissionFate::Delivered
        };
        let reply = match fate {
            TransmissionFate::Dropped => None,
            TransmissionFate::Corrupted => {
                let mut bytes = frame.to_vec();
                let pos = self.rng.random_range(0..bytes.len());
                let bit = self.rng.random_range(0..8u32);
                bytes[pos] ^= 1 << bit;
                Some(self.controller.feed_frame(&bytes, arrived))
            }
            TransmissionFate::Delivered => Some(self.controller.feed_frame(frame, arrived)),
        }
        .filter(|r| !r.is_empty());
        self.trace.push(LinkTraceEntry {
            sent_ms: now_ms,
            arrived_ms: arrived,
            fate,
            reply: reply.clone(),
        });
        let elapsed_ms = if reply.is_some() {
            waited
        } else {
            waited + timeout_ms
        };
        Ok(Exchange { reply, elapsed_ms })
    }
}
