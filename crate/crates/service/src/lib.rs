//! HTTP service binding studio clients to the engine, the knowledge base and
//! a controller target.
//!
//! Routes:
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/presets` | bundled presets with their canonical documents |
//! | POST | `/validate` | document body; parse errors are 400, otherwise a report |
//! | POST | `/play` | document body or `?preset=name`; `replace=true` takes over |
//! | POST | `/stop` | optional `{"session_id": n}` |
//! | GET | `/session` | current session, or `?id=n` |
//! | GET | `/telemetry` | server-sent events; `?session=n&decimate=k` |
//! | POST | `/tick` | `{"ticks": n}`, virtual clock only |
//! | GET | `/cards`, `/cards/{id}` | design cards, `?module=` filter |
//! | GET | `/patterns` | filters plus `offset`/`limit` |
//! | GET | `/stats` | pattern statistics |

mod actor;
mod routes;

use std::net::SocketAddr;
use std::sync::mpsc;

use thiserror::Error;
use tokio::sync::{broadcast, oneshot};

pub use actor::{
    PlayError, PlaybackSession, ServiceConfig, SessionErrorEvent, SessionState, StopError,
    StreamEvent, TargetConfig, TargetInfo, TelemetryEvent,
};
pub use routes::router;

use actor::{Actor, Request};
use mojikit::sequence::Sequence;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServiceError {
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("cannot open target: {0}")]
    Target(String),
    #[error("engine is not running")]
    EngineGone,
    #[error("server error: {0}")]
    Io(String),
}

/// Cloneable handle to a running engine actor.
#[derive(Clone)]
pub struct ServiceHandle {
    tx: mpsc::Sender<Request>,
    virtual_clock: bool,
    tick_ms: u64,
}

impl ServiceHandle {
    pub fn start(config: ServiceConfig) -> Result<Self, ServiceError> {
        let tx = Actor::spawn(&config)?;
        Ok(ServiceHandle {
            tx,
            virtual_clock: config.virtual_clock,
            tick_ms: config.tick_ms,
        })
    }

    pub fn is_virtual(&self) -> bool {
        self.virtual_clock
    }

    pub fn tick_ms(&self) -> u64 {
        self.tick_ms
    }

    async fn call<T>(
        &self,
        make: impl FnOnce(oneshot::Sender<T>) -> Request,
    ) -> Result<T, ServiceError> {
        let (reply, rx) = oneshot::channel();
        self.tx
            .send(make(reply))
            .map_err(|_| ServiceError::EngineGone)?;
        rx.await.map_err(|_| ServiceError::EngineGone)
    }

    pub async fn play(
        &self,
        sequence: Sequence,
        replace: bool,
    ) -> Result<Result<PlaybackSession, PlayError>, ServiceError> {
        self.call(|reply| Request::Play {
            sequence,
            replace,
            reply,
        })
        .await
    }

    pub async fn stop(
        &self,
        session_id: Option<u64>,
    ) -> Result<Result<Option<PlaybackSession>, StopError>, ServiceError> {
        self.call(|reply| Request::Stop { session_id, reply }).await
    }

    pub async fn session(
        &self,
        session_id: Option<u64>,
    ) -> Result<Option<PlaybackSession>, ServiceError> {
        self.call(|reply| Request::Session { session_id, reply })
            .await
    }

    /// Current envelope plus a receiver for everything after it.
    pub async fn subscribe(
        &self,
    ) -> Result<(TelemetryEvent, broadcast::Receiver<StreamEvent>), ServiceError> {
        self.call(|reply| Request::Subscribe { reply }).await
    }

    /// Runs `ticks` engine ticks at once. Only meaningful on a virtual clock;
    /// on a wall clock it injects extra ticks.
    pub async fn advance(&self, ticks: u64) -> Result<TelemetryEvent, ServiceError> {
        self.call(|reply| Request::Advance { ticks, reply }).await
    }
}

/// Binds `addr` and serves until the process exits.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<(), ServiceError> {
    let handle = ServiceHandle::start(config)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ServiceError::Io(e.to_string()))?;
    axum::serve(listener, router(handle))
        .await
        .map_err(|e| ServiceError::Io(e.to_string()))
}
