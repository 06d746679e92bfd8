//! Queue-based execution engine.
//!
//! One FIFO per structure, all advanced on a shared clock. The engine has a
//! single owner: `enqueue`, `tick` and `stop` take `&mut self`, readers get
//! [`EngineState`] copies from [`Engine::snapshot`]. Block timing is resolved
//! at exact millisecond instants, so the pose at a given time does not depend
//! on how the ticks leading up to it were sized.

use std::collections::VecDeque;
use std::fmt;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::kinematics::{neutral_pose, JointState, StructureId};
use crate::sequence::{validate_sequence, MotionBlock, Sequence, ValidationReport};
use crate::trajectory::{effective_motion_ms, MotionProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineStatus {
    Idle,
    Playing,
    Stopped,
}

impl fmt::Display for EngineStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineStatus::Idle => "idle",
            EngineStatus::Playing => "playing",
            EngineStatus::Stopped => "stopped",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("sequence rejected: {0}")]
pub struct EnqueueError(pub ValidationReport);

/// A block waiting in a queue, with its absolute timeline start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledBlock {
    pub id: u64,
    pub block: MotionBlock,
    pub scheduled_ms: u64,
}

/// The block currently owning a structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveBlock {
    pub id: u64,
    pub block: MotionBlock,
    pub activated_ms: u64,
    pub profile: MotionProfile,
    pub window_end_ms: u64,
    pub motion_done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionQueue {
    pub structure: StructureId,
    pub pending: VecDeque<ScheduledBlock>,
    pub active: Option<ActiveBlock>,
    /// Instant the previous block released the structure.
    pub free_at_ms: u64,
}

impl ExecutionQueue {
    fn new(structure: StructureId) -> Self {
        ExecutionQueue {
            structure,
            pending: VecDeque::new(),
            active: None,
            free_at_ms: 0,
        }
    }

    pub fn is_busy(&self) -> bool {
        self.active.is_some() || !self.pending.is_empty()
    }
}

/// Point-in-time copy of the engine.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineState {
    pub clock_ms: u64,
    pub status: EngineStatus,
    pub pose: JointState,
    pub queues: Vec<ExecutionQueue>,
}

impl EngineState {
    /// Structures with a block in its motion phase.
    pub fn moving(&self) -> Vec<StructureId> {
        self.queues
            .iter()
            .filter(|q| q.active.is_some_and(|a| !a.motion_done))
            .map(|q| q.structure)
            .collect()
    }
}

/// Record of a block reaching its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completion {
    pub structure: StructureId,
    pub block_id: u64,
    pub activated_ms: u64,
    /// Exact instant the motion phase ends.
    pub motion_end_ms: u64,
    /// Clock of the tick that observed the end.
    pub reported_ms: u64,
}

#[derive(Debug, Clone)]
pub struct Engine {
    state: EngineState,
    next_id: u64,
    completions: Vec<Completion>,
}

impl Default for Engine {
    fn default() -> Self {
        Engine::new()
    }
}

impl Engine {
    pub fn new() -> Self {
        Engine::with_pose(neutral_pose())
    }

    pub fn with_pose(pose: JointState) -> Self {
        Engine {
            state: EngineState {
                clock_ms: 0,
                status: EngineStatus::Idle,
                pose,
                queues: StructureId::ALL
                    .into_iter()
                    .map(ExecutionQueue::new)
                    .collect(),
            },
            next_id: 0,
            completions: Vec::new(),
        }
    }

    pub fn clock_ms(&self) -> u64 {
        self.state.clock_ms
    }

    pub fn status(&self) -> EngineStatus {
        self.state.status
    }

    pub fn pose(&self) -> &JointState {
        &self.state.pose
    }

    pub fn snapshot(&self) -> EngineState {
        self.state.clone()
    }

    pub fn completions(&self) -> &[Completion] {
        &self.completions
    }

    /// Schedules every block of `seq` relative to the current clock. An invalid
    /// sequence is rejected whole and leaves the engine untouched.
    pub fn enqueue(&mut self, seq: &Sequence) -> Result<usize, EnqueueError> {
        let report = validate_sequence(seq);
        if !report.is_ok() {
            return Err(EnqueueError(report));
        }
        let now = self.state.clock_ms;
        let mut count = 0;
        for track in seq.tracks() {
            let queue = &mut self.state.queues[track.structure.index()];
            for block in &track.blocks {
                queue.pending.push_back(ScheduledBlock {
                    id: self.next_id,
                    block: *block,
                    scheduled_ms: now + block.start_ms,
                });
                self.next_id += 1;
                count += 1;
            }
        }
        if count > 0 {
            self.state.status = EngineStatus::Playing;
        }
        Ok(count)
    }

    /// Advances the clock by `dt_ms` and returns the resulting pose.
    pub fn tick(&mut self, dt_ms: u64) -> JointState {
        let now = self.state.clock_ms + dt_ms;
        self.state.clock_ms = now;
        if self.state.status == EngineStatus::Playing {
            for s in StructureId::ALL {
                self.advance_queue(s, now);
            }
            if !self.state.queues.iter().any(ExecutionQueue::is_busy) {
                self.state.status = EngineStatus::Idle;
            }
        }
        self.state.pose
    }

    fn advance_queue(&mut self, structure: StructureId, now: u64) {
        let queue = &mut self.state.queues[structure.index()];
        let pose = &mut self.state.pose;
        loop {
            if let Some(active) = queue.active.as_mut() {
                if !active.motion_done && now >= active.profile.end_ms() {
                    active.motion_done = true;
                    self.completions.push(Completion {
                        structure,
                        block_id: active.id,
                        activated_ms: active.activated_ms,
                        motion_end_ms: active.profile.end_ms(),
                        reported_ms: now,
                    });
                }
                if now >= active.window_end_ms {
                    pose.set_pair(structure, active.profile.to);
                    queue.free_at_ms = active.window_end_ms;
                    queue.active = None;
                    continue;
                }
                pose.set_pair(structure, active.profile.eval(now));
                return;
            }
            let Some(next) = queue.pending.front().copied() else {
                return;
            };
            let activated = next.scheduled_ms.max(queue.free_at_ms);
            if activated > now {
                return;
            }
            queue.pending.pop_front();
            let motion_ms =
                effective_motion_ms(&next.block).expect("enqueue only admits validated blocks");
            let profile = MotionProfile {
                start_ms: activated + next.block.delay_ms,
                motion_ms,
                from: pose.pair(structure),
                to: (next.block.f_deg, next.block.r_deg),
            };
            queue.active = Some(ActiveBlock {
                id: next.id,
                block: next.block,
                activated_ms: activated,
                profile,
                window_end_ms: activated + next.block.duration_ms,
                motion_done: false,
            });
        }
    }

    /// Clears all queues; the pose freezes where it is.
    pub fn stop(&mut self) {
        let now = self.state.clock_ms;
        for q in &mut self.state.queues {
            q.pending.clear();
            q.active = None;
            q.free_at_ms = now;
        }
        self.state.status = EngineStatus::Stopped;
    }
}

/// Time source driving an engine.
#[derive(Debug, Clone)]
pub enum Clock {
    /// Advances only when told to.
    Virtual { now_ms: u64 },
    /// Follows real time from `origin`.
    Wall { origin: Instant, last_ms: u64 },
}

impl Clock {
    pub fn new_virtual() -> Self {
        Clock::Virtual { now_ms: 0 }
    }

    pub fn new_wall() -> Self {
        Clock::Wall {
            origin: Instant::now(),
            last_ms: 0,
        }
    }

    pub fn is_virtual(&self) -> bool {
        matches!(self, Clock::Virtual { .. })
    }

    pub fn now_ms(&self) -> u64 {
        match self {
            Clock::Virtual { now_ms } => *now_ms,
            Clock::Wall { origin, .. } => origin.elapsed().as_millis() as u64,
        }
    }

    /// Moves a virtual clock forward; no effect on a wall clock.
    pub fn advance(&mut self, dt_ms: u64) {
        if let Clock::Virtual { now_ms } = self {
            *now_ms += dt_ms;
        }
    }

    /// Milliseconds elapsed since the previous call.
    pub fn take_elapsed(&mut self) -> u64 {
        match self {
            Clock::Virtual { .. } => 0,
            Clock::Wall { origin, last_ms } => {
                let now = origin.elapsed().as_millis() as u64;
                let dt = now.saturating_sub(*last_ms);
                *last_ms = now;
                dt
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{AxisId, Joint};
    use crate::sequence::{insert_block, Track};

    fn head_pitch() -> Joint {
        Joint::new(StructureId::Head, AxisId::Pitch).unwrap()
    }

    fn head_block(f: f64, start: u64, dur: u64) -> MotionBlock {
        MotionBlock {
            structure: StructureId::Head,
            f_deg: f,
            r_deg: 0.0,
            speed: 3,
            delay_ms: 0,
            start_ms: start,
            duration_ms: dur,
        }
    }

    #[test]
    fn fresh_engine_snapshot() {
        let engine = Engine::new();
        let snap = engine.snapshot();
        assert_eq!(snap.pose, neutral_pose());
        assert_eq!(snap.status, EngineStatus::Idle);
        assert_eq!(engine.snapshot(), snap);
    }

    #[test]
    fn empty_enqueue_stays_idle() {
        let mut engine = Engine::new();
        assert_eq!(engine.enqueue(&Sequence::new("e")).unwrap(), 0);
        assert_eq!(engine.status(), EngineStatus::Idle);
        assert_eq!(engine.tick(20), neutral_pose());
    }

    #[test]
    fn invalid_sequence_is_rejected_atomically() {
        let mut engine = Engine::new();
        let bad = Sequence::from_tracks(
            "bad",
            vec![
                Track::with_blocks(
                    StructureId::Tail,
                    vec![MotionBlock {
                        structure: StructureId::Tail,
                        ..head_block(0.0, 0, 1000)
                    }],
                ),
                Track::with_blocks(
                    StructureId::Head,
                    vec![head_block(10.0, 0, 1000), head_block(20.0, 500, 1000)],
                ),
            ],
        );
        let before = engine.snapshot();
        assert!(engine.enqueue(&bad).is_err());
        assert_eq!(engine.snapshot(), before);
    }

    #[test]
    fn head_reaches_target_at_motion_end() {
        let mut engine = Engine::new();
        let seq = insert_block(&Sequence::new("h"), head_block(40.0, 0, 1000)).unwrap();
        engine.enqueue(&seq).unwrap();
        let mut pose = neutral_pose();
        for _ in 0..40 {
            pose = engine.tick(20);
        }
        assert_eq!(engine.clock_ms(), 800);
        assert_eq!(pose.get(head_pitch()), 40.0);
        assert_eq!(engine.snapshot().pose, pose);
        let c = engine.completions()[0];
        assert_eq!((c.motion_end_ms, c.reported_ms), (800, 800));
    }

    #[test]
    fn stop_freezes_pose_and_allows_restart() {
        let mut engine = Engine::new();
        let seq = insert_block(&Sequence::new("h"), head_block(40.0, 0, 1000)).unwrap();
        engine.enqueue(&seq).unwrap();
        for _ in 0..15 {
            engine.tick(20);
        }
        let frozen = engine.pose().get(head_pitch());
        assert!(frozen > 0.0 && frozen < 40.0);
        engine.stop();
        assert_eq!(engine.status(), EngineStatus::Stopped);
        for _ in 0..10 {
            assert_eq!(engine.tick(20).get(head_pitch()), frozen);
        }
        engine.enqueue(&seq).unwrap();
        assert_eq!(engine.status(), EngineStatus::Playing);
        // the new block eases from the frozen pose, not from neutral
        assert!(engine.tick(20).get(head_pitch()) >= frozen);
    }

    #[test]
    fn stop_on_idle_engine() {
        let mut engine = Engine::new();
        engine.stop();
        assert_eq!(engine.status(), EngineStatus::Stopped);
        assert_eq!(*engine.pose(), neutral_pose());
    }

    #[test]
    fn overlapping_enqueues_wait_their_turn() {
        let mut engine = Engine::new();
        let seq = insert_block(&Sequence::new("h"), head_block(40.0, 0, 1000)).unwrap();
        engine.enqueue(&seq).unwrap();
        engine.tick(100);
        engine
            .enqueue(&insert_block(&Sequence::new("h2"), head_block(-40.0, 0, 1000)).unwrap())
            .unwrap();
        for _ in 0..100 {
            engine.tick(20);
        }
        let c = engine.completions();
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].activated_ms, 1000);
        assert_eq!(engine.pose().get(head_pitch()), -40.0);
        assert_eq!(engine.status(), EngineStatus::Idle);
    }

    #[test]
    fn virtual_clock_only_moves_when_advanced() {
        let mut clock = Clock::new_virtual();
        assert_eq!(clock.now_ms(), 0);
        assert_eq!(clock.take_elapsed(), 0);
        clock.advance(20);
        assert_eq!(clock.now_ms(), 20);
        assert!(clock.is_virtual());
        assert!(!Clock::new_wall().is_virtual());
    }
}
