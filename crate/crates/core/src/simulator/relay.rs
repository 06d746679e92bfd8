//! Relay side of the wire path: paces time-tagged commands onto a transport.

use std::collections::VecDeque;

use crate::executor::Engine;
use crate::protocol::{
    compile_sequence_to_commands, send_reliable, Command, CompileError, Delivery, Frame,
    LinkConfig, SendError, TimedCommand, Transport,
};
use crate::sequence::Sequence;

use super::{FaultProfile, SimulatedLink, TelemetrySample, VirtualController};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RelayStats {
    pub sent: u64,
    pub delivered: u64,
    pub failed: u64,
    pub transmissions: u64,
}

/// Sends commands one at a time, each waiting for its ack (or for retries to
/// run out) before the next goes out. Commands are sent no earlier than
/// their tag and never while a previous exchange is still in flight.
pub struct Relay<T: Transport> {
    link: T,
    config: LinkConfig,
    next_seq: u8,
    busy_until_ms: u64,
    queue: VecDeque<TimedCommand>,
    stats: RelayStats,
}

impl<T: Transport> Relay<T> {
    pub fn new(link: T, config: LinkConfig) -> Self {
        Relay {
            link,
            config,
            next_seq: 0,
            busy_until_ms: 0,
            queue: VecDeque::new(),
            stats: RelayStats::default(),
        }
    }

    pub fn link(&self) -> &T {
        &self.link
    }

    pub fn link_mut(&mut self) -> &mut T {
        &mut self.link
    }

    pub fn into_link(self) -> T {
        self.link
    }

    pub fn stats(&self) -> RelayStats {
        self.stats
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Queues commands, shifting their tags by `offset_ms`.
    pub fn schedule(&mut self, commands: &[TimedCommand], offset_ms: u64) {
        let mut merged: Vec<_> = self.queue.drain(..).collect();
        merged.extend(commands.iter().map(|c| TimedCommand {
            at_ms: c.at_ms + offset_ms,
            command: c.command,
        }));
        // stable, so same-tag commands keep their compiled order
        merged.sort_by_key(|c| c.at_ms);
        self.queue = merged.into();
    }

    pub fn clear(&mut self) {
        self.queue.clear();
    }

    /// Sends one command right away (or once the link is free).
    pub fn send_now(&mut self, command: Command, now_ms: u64) -> Result<Delivery, SendError> {
        let frame = Frame::new(self.next_seq, command);
        self.next_seq = self.next_seq.wrapping_add(1);
        let start = now_ms.max(self.busy_until_ms);
        self.stats.sent += 1;
        let result = send_reliable(&mut self.link, &self.config, &frame, start);
        match &result {
            Ok(d) => {
                self.stats.delivered += 1;
                self.stats.transmissions += d.attempts as u64;
                self.busy_until_ms = d.finished_ms;
            }
            Err(SendError::Failed {
                attempts,
                finished_ms,
            }) => {
                self.stats.failed += 1;
                self.stats.transmissions += *attempts as u64;
                self.busy_until_ms = *finished_ms;
            }
            Err(_) => {}
        }
        result
    }

    /// Sends every queued command that can start by `now_ms`. Returns the
    /// failures; link errors stop dispatch early.
    pub fn dispatch_due(&mut self, now_ms: u64) -> Vec<SendError> {
        let mut failures = Vec::new();
        while let Some(next) = self.queue.front().copied() {
            if next.at_ms.max(self.busy_until_ms) > now_ms {
                break;
            }
            self.queue.pop_front();
            match self.send_now(next.command, next.at_ms) {
                Ok(_) => {}
                Err(e @ SendError::Failed { .. }) => failures.push(e),
                Err(e) => {
                    failures.push(e);
                    break;
                }
            }
        }
        failures
    }
}

/// Result of replaying a sequence over a simulated link.
#[derive(Debug, Clone)]
pub struct WireRun {
    /// Controller pose at t = 0 and every tick through the horizon.
    pub telemetry: Vec<TelemetrySample>,
    pub stats: RelayStats,
    pub controller: VirtualController,
}

impl WireRun {
    pub fn lines(&self) -> impl Iterator<Item = String> + '_ {
        self.telemetry.iter().map(TelemetrySample::line)
    }
}

/// Compiles `seq`, relays it over a [`SimulatedLink`] and runs the
/// controller for `ticks` ticks of `tick_ms`.
pub fn run_wire_path(
    seq: &Sequence,
    tick_ms: u64,
    ticks: u64,
    config: &LinkConfig,
    faults: FaultProfile,
) -> Result<WireRun, CompileError> {
    let commands = compile_sequence_to_commands(seq)?;
    let horizon = tick_ms * ticks;
    let controller = VirtualController::new().with_telemetry(tick_ms);
    let link = SimulatedLink::with_window(controller, config, faults, tick_ms);
    let mut relay = Relay::new(link, *config);
    relay.schedule(&commands, 0);
    relay.dispatch_due(horizon);
    let stats = relay.stats();
    let mut controller = relay.into_link().into_controller();
    controller.advance_to(horizon);
    let telemetry = controller
        .telemetry()
        .iter()
        .copied()
        .filter(|s| s.t_ms <= horizon)
        .collect();
    Ok(WireRun {
        telemetry,
        stats,
        controller,
    })
}

/// Largest per-joint difference between the engine and the controller fed
/// over a lossless link, compared at every tick until both settle.
pub fn mirror_equivalence_check(seq: &Sequence, tick_ms: u64) -> Result<f64, CompileError> {
    let ticks = seq.total_duration_ms().div_ceil(tick_ms) + 1;
    let run = run_wire_path(
        seq,
        tick_ms,
        ticks,
        &LinkConfig::default(),
        FaultProfile::lossless(),
    )?;
    let mut engine = Engine::new();
    engine.enqueue(seq).map_err(|e| CompileError(e.0))?;
    let mut worst = run.telemetry[0].pose.max_abs_diff(engine.pose());
    for sample in &run.telemetry[1..] {
        let pose = engine.tick(tick_ms);
        debug_assert_eq!(engine.clock_ms(), sample.t_ms);
        worst = worst.max(sample.pose.max_abs_diff(&pose));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::load_presets;

    #[test]
    fn presets_mirror_within_a_tenth() {
        for seq in load_presets().iter() {
            let diff = mirror_equivalence_check(seq, 20).unwrap();
            assert!(diff <= 0.1, "{}: {diff}", seq.name());
        }
    }

    #[test]
    fn lossless_run_has_one_transmission_per_command() {
        let seq = load_presets().get("nod").unwrap();
        let n = compile_sequence_to_commands(seq).unwrap().len() as u64;
        let run = run_wire_path(
            seq,
            20,
            200,
            &LinkConfig::default(),
            FaultProfile::lossless(),
        )
        .unwrap();
        assert_eq!(run.stats.sent, n);
        assert_eq!(run.stats.transmissions, n);
        assert_eq!(run.telemetry.len(), 201);
    }

    #[test]
    fn seeded_lossy_runs_are_reproducible() {
        let seq = load_presets().get("greet_combo").unwrap();
        let faults = FaultProfile::new(0.3, 0.1, 42).unwrap();
        let a = run_wire_path(seq, 20, 300, &LinkConfig::default(), faults).unwrap();
        let b = run_wire_path(seq, 20, 300, &LinkConfig::default(), faults).unwrap();
        assert_eq!(a.lines().collect::<Vec<_>>(), b.lines().collect::<Vec<_>>());
        assert_eq!(a.stats, b.stats);
        assert!(a.stats.transmissions > a.stats.sent);
    }

    #[test]
    fn stop_after_clear_freezes_the_controller() {
        let seq = load_presets().get("nod").unwrap();
        let controller = VirtualController::new();
        let link = SimulatedLink::new(controller, &LinkConfig::default(), FaultProfile::lossless());
        let mut relay = Relay::new(link, LinkConfig::default());
        relay.schedule(&compile_sequence_to_commands(seq).unwrap(), 0);
        relay.dispatch_due(100);
        relay.clear();
        relay.send_now(Command::Stop, 100).unwrap();
        let ctrl = relay.link_mut().controller_mut();
        let frozen = ctrl.advance_to(100);
        assert_eq!(ctrl.advance_to(5000), frozen);
        assert_eq!(relay.pending(), 0);
    }
}
