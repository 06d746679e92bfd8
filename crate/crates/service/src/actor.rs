//! Engine actor: a dedicated thread that owns the engine, the relay and the
//! session table. Every mutation arrives through its mailbox, so playback
//! state has a single writer.

use std::path::PathBuf;
use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use mojikit::executor::{Engine, EngineStatus};
use mojikit::kinematics::JointState;
use mojikit::protocol::{
    compile_sequence_to_commands, Command, LinkConfig, StreamTransport, Transport,
};
use mojikit::sequence::{Sequence, ValidationReport};
use mojikit::simulator::{round_tenth, FaultProfile, Relay, SimulatedLink, VirtualController};
use serde::Serialize;
use thiserror::Error;
use tokio::sync::{broadcast, oneshot};

use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetConfig {
    Simulator,
    /// A serial device already configured for the link's baud rate.
    Serial {
        port: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub tick_ms: u64,
    /// Ticks only on request (`advance`), for tests and reproducible runs.
    pub virtual_clock: bool,
    pub target: TargetConfig,
    pub link: LinkConfig,
    pub faults: FaultProfile,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            tick_ms: 20,
            virtual_clock: false,
            target: TargetConfig::Simulator,
            link: LinkConfig::default(),
            faults: FaultProfile::lossless(),
        }
    }
}

impl ServiceConfig {
    pub fn virtual_simulator() -> Self {
        ServiceConfig {
            virtual_clock: true,
            ..ServiceConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetInfo {
    Simulator,
    Serial { port: String, baud: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Idle,
    Playing,
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlaybackSession {
    pub session_id: u64,
    pub target: TargetInfo,
    pub state: SessionState,
    pub sequence: String,
}

/// Telemetry envelope; angles are rounded to 0.1°.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TelemetryEvent {
    pub t_ms: u64,
    pub angles: [f64; 16],
    pub status: EngineStatus,
}

impl TelemetryEvent {
    pub fn new(t_ms: u64, pose: &JointState, status: EngineStatus) -> Self {
        TelemetryEvent {
            t_ms,
            angles: pose.angles().map(round_tenth),
            status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionErrorEvent {
    pub session_id: Option<u64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamEvent {
    Telemetry(TelemetryEvent),
    SessionError(SessionErrorEvent),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlayError {
    #[error("session {0} is still playing; pass replace to take over")]
    Busy(u64),
    #[error("sequence rejected")]
    Invalid(ValidationReport),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StopError {
    #[error("no session with id {0}")]
    UnknownSession(u64),
}

type Reply<T> = oneshot::Sender<T>;

pub(crate) enum Request {
    Play {
        sequence: Sequence,
        replace: bool,
        reply: Reply<Result<PlaybackSession, PlayError>>,
    },
    Stop {
        session_id: Option<u64>,
        reply: Reply<Result<Option<PlaybackSession>, StopError>>,
    },
    Session {
        session_id: Option<u64>,
        reply: Reply<Option<PlaybackSession>>,
    },
    Subscribe {
        reply: Reply<(TelemetryEvent, broadcast::Receiver<StreamEvent>)>,
    },
    Advance {
        ticks: u64,
        reply: Reply<TelemetryEvent>,
    },
}

pub(crate) struct Actor {
    engine: Engine,
    relay: Relay<Box<dyn Transport + Send>>,
    tick_ms: u64,
    target: TargetInfo,
    sessions: Vec<PlaybackSession>,
    current: Option<usize>,
    events: broadcast::Sender<StreamEvent>,
}

impl Actor {
    pub(crate) fn spawn(config: &ServiceConfig) -> Result<mpsc::Sender<Request>, ServiceError> {
        if config.tick_ms == 0 {
            return Err(ServiceError::Config("tick_ms must be positive".into()));
        }
        if !config.link.is_valid() {
            return Err(ServiceError::Config(
                "link settings must be positive".into(),
            ));
        }
        let (link, target): (Box<dyn Transport + Send>, _) = match &config.target {
            TargetConfig::Simulator => (
                Box::new(SimulatedLink::with_window(
                    VirtualController::new(),
                    &config.link,
                    config.faults,
                    config.tick_ms,
                )),
                TargetInfo::Simulator,
            ),
            TargetConfig::Serial { port } => {
                let transport = StreamTransport::open(port)
                    .map_err(|e| ServiceError::Target(format!("{}: {e}", port.display())))?;
                (
                    Box::new(transport),
                    TargetInfo::Serial {
                        port: port.display().to_string(),
                        baud: config.link.baud,
                    },
                )
            }
        };
        let (events, _) = broadcast::channel(1024);
        let actor = Actor {
            engine: Engine::new(),
            relay: Relay::new(link, config.link),
            tick_ms: config.tick_ms,
            target,
            sessions: Vec::new(),
            current: None,
            events,
        };
        let (tx, rx) = mpsc::channel();
        let virtual_clock = config.virtual_clock;
        thread::Builder::new()
            .name("engine".into())
            .spawn(move || actor.run(rx, virtual_clock))
            .map_err(|e| ServiceError::Config(e.to_string()))?;
        Ok(tx)
    }

    fn run(mut self, rx: mpsc::Receiver<Request>, virtual_clock: bool) {
        if virtual_clock {
            while let Ok(req) = rx.recv() {
                self.handle(req);
            }
            return;
        }
        let period = Duration::from_millis(self.tick_ms);
        let mut next = Instant::now() + period;
        loop {
            let wait = next.saturating_duration_since(Instant::now());
            match rx.recv_timeout(wait) {
                Ok(req) => self.handle(req),
                Err(RecvTimeoutError::Timeout) => {
                    self.tick();
                    next += period;
                    // after a long stall, resume the cadence instead of bursting
                    if next < Instant::now() {
                        next = Instant::now() + period;
                    }
                }
                Err(RecvTimeoutError::Disconnected) => return,
            }
        }
    }

    fn envelope(&self) -> TelemetryEvent {
        TelemetryEvent::new(
            self.engine.clock_ms(),
            self.engine.pose(),
            self.engine.status(),
        )
    }

    fn current_session(&self) -> Option<&PlaybackSession> {
        self.current.map(|i| &self.sessions[i])
    }

    fn handle(&mut self, req: Request) {
        // a dropped receiver only means the caller went away
        match req {
            Request::Play {
                sequence,
                replace,
                reply,
            } => {
                let _ = reply.send(self.play(&sequence, replace));
            }
            Request::Stop { session_id, reply } => {
                let _ = reply.send(self.stop(session_id));
            }
            Request::Session { session_id, reply } => {
                let found = match session_id {
                    Some(id) => self.sessions.iter().find(|s| s.session_id == id),
                    None => self.current_session(),
                };
                let _ = reply.send(found.cloned());
            }
            Request::Subscribe { reply } => {
                let _ = reply.send((self.envelope(), self.events.subscribe()));
            }
            Request::Advance { ticks, reply } => {
                for _ in 0..ticks {
                    self.tick();
                }
                let _ = reply.send(self.envelope());
            }
        }
    }

    fn play(&mut self, sequence: &Sequence, replace: bool) -> Result<PlaybackSession, PlayError> {
        let commands =
            compile_sequence_to_commands(sequence).map_err(|e| PlayError::Invalid(e.0))?;
        if let Some(cur) = self.current_session() {
            if cur.state == SessionState::Playing && !replace {
                return Err(PlayError::Busy(cur.session_id));
            }
        }
        if self
            .current_session()
            .is_some_and(|s| s.state == SessionState::Playing)
        {
            self.halt(SessionState::Stopped);
        }
        let now = self.engine.clock_ms();
        self.engine
            .enqueue(sequence)
            .map_err(|e| PlayError::Invalid(e.0))?;
        self.relay.schedule(&commands, now);
        let session = PlaybackSession {
            session_id: self.sessions.len() as u64 + 1,
            target: self.target.clone(),
            state: if sequence.is_empty() {
                SessionState::Idle
            } else {
                SessionState::Playing
            },
            sequence: sequence.name().to_string(),
        };
        self.sessions.push(session.clone());
        self.current = Some(self.sessions.len() - 1);
        Ok(session)
    }

    fn stop(&mut self, session_id: Option<u64>) -> Result<Option<PlaybackSession>, StopError> {
        if let Some(id) = session_id {
            if !self.sessions.iter().any(|s| s.session_id == id) {
                return Err(StopError::UnknownSession(id));
            }
            if self.current_session().map(|s| s.session_id) != Some(id) {
                // an older session has already ended
                return Ok(self.sessions.iter().find(|s| s.session_id == id).cloned());
            }
        }
        let playing = self
            .current_session()
            .is_some_and(|s| s.state == SessionState::Playing);
        if playing || self.engine.status() == EngineStatus::Playing {
            self.halt(SessionState::Stopped);
        }
        Ok(self.current_session().cloned())
    }

    /// Freezes the engine and the controller.
    fn halt(&mut self, state: SessionState) {
        self.engine.stop();
        self.relay.clear();
        let now = self.engine.clock_ms();
        if let Err(e) = self.relay.send_now(Command::Stop, now) {
            self.report(e.to_string());
        }
        if let Some(i) = self.current {
            self.sessions[i].state = state;
        }
    }

    fn report(&self, message: String) {
        let _ = self
            .events
            .send(StreamEvent::SessionError(SessionErrorEvent {
                session_id: self.current_session().map(|s| s.session_id),
                message,
            }));
    }

    fn tick(&mut self) {
        self.engine.tick(self.tick_ms);
        for failure in self.relay.dispatch_due(self.engine.clock_ms()) {
            self.report(failure.to_string());
        }
        if let Some(i) = self.current {
            if self.sessions[i].state == SessionState::Playing
                && self.engine.status() == EngineStatus::Idle
            {
                self.sessions[i].state = SessionState::Idle;
            }
        }
        let _ = self.events.send(StreamEvent::Telemetry(self.envelope()));
    }
}
