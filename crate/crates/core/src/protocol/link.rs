//! Stop-and-wait reliable delivery over a byte link.

use std::io::{BufRead, BufReader, Read, Write};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::{decode_reply, encode_frame, Frame, FrameError, Reply};

/// Link parameters. Baud is 8N1 serial, so the byte rate is `baud / 10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkConfig {
    pub baud: u32,
    pub ack_timeout_ms: u64,
    pub max_retries: u32,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            baud: 115_200,
            ack_timeout_ms: 200,
            max_retries: 2,
        }
    }
}

impl LinkConfig {
    pub fn is_valid(&self) -> bool {
        self.baud > 0 && self.ack_timeout_ms > 0 && self.max_retries > 0
    }

    pub fn max_attempts(&self) -> u32 {
        1 + self.max_retries
    }

    pub fn bytes_per_second(&self) -> u64 {
        self.baud as u64 / 10
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinkError {
    #[error("link closed")]
    Closed,
    #[error("link i/o error: {0}")]
    Io(String),
}

/// Outcome of one transmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exchange {
    /// Reply line, if one arrived before the timeout.
    pub reply: Option<Vec<u8>>,
    /// Link time consumed, including the full timeout when nothing came back.
    pub elapsed_ms: u64,
}

/// A link that carries one frame and waits for the reply line.
pub trait Transport {
    fn exchange(
        &mut self,
        frame: &[u8],
        now_ms: u64,
        timeout_ms: u64,
    ) -> Result<Exchange, LinkError>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn exchange(
        &mut self,
        frame: &[u8],
        now_ms: u64,
        timeout_ms: u64,
    ) -> Result<Exchange, LinkError> {
        (**self).exchange(frame, now_ms, timeout_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub attempts: u32,
    pub finished_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SendError {
    #[error("no acknowledgement after {attempts} attempts")]
    Failed { attempts: u32, finished_ms: u64 },
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("frame cannot be encoded: {0}")]
    Encode(#[from] FrameError),
}

/// Transmits `frame` until a matching ack arrives, retransmitting on timeout
/// or nak up to `config.max_retries` times.
pub fn send_reliable<T: Transport + ?Sized>(
    link: &mut T,
    config: &LinkConfig,
    frame: &Frame,
    now_ms: u64,
) -> Result<Delivery, SendError> {
    let bytes = encode_frame(frame)?;
    let mut t = now_ms;
    for attempt in 1..=config.max_attempts() {
        let exchange = link.exchange(&bytes, t, config.ack_timeout_ms)?;
        t += exchange.elapsed_ms;
        let reply = exchange.reply.and_then(|r| decode_reply(&r).ok());
        if reply == Some(Reply::Ack(frame.seq)) {
            return Ok(Delivery {
                attempts: attempt,
                finished_ms: t,
            });
        }
    }
    Err(SendError::Failed {
        attempts: config.max_attempts(),
        finished_ms: t,
    })
}

/// Transport over any byte stream pair, e.g. a serial device opened as a file
/// (configure the line rate beforehand, for example with `stty`).
///
/// A background thread splits incoming bytes into lines; timeouts are real
/// time.
pub struct StreamTransport<W: Write> {
    writer: W,
    lines: Receiver<Vec<u8>>,
}

impl<W: Write> StreamTransport<W> {
    pub fn new<R: Read + Send + 'static>(reader: R, writer: W) -> Self {
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(reader);
            loop {
                let mut line = Vec::new();
                match reader.read_until(b'\n', &mut line) {
                    Ok(0) | Err(_) => break,
                    Ok(_) => {
                        if tx.send(line).is_err() {
                            break;
                        }
                    }
                }
            }
        });
        StreamTransport { writer, lines }
    }
}

impl StreamTransport<std::fs::File> {
    /// Opens a character device (or any file-like path) for read and write.
    pub fn open(path: &std::path::Path) -> std::io::Result<Self> {
        let file = std::fs::OpenOptions::new()
            .read(true)
            .write(true)
            .open(path)?;
        let reader = file.try_clone()?;
        Ok(StreamTransport::new(reader, file))
    }
}

impl<W: Write> Transport for StreamTransport<W> {
    fn exchange(
        &mut self,
        frame: &[u8],
        _now_ms: u64,
        timeout_ms: u64,
    ) -> Result<Exchange, LinkError> {
        // drop replies to earlier attempts
        while let Ok(_stale) = self.lines.try_recv() {}
        let started = Instant::now();
        self.writer
            .write_all(frame)
            .and_then(|_| self.writer.flush())
            .map_err(|e| LinkError::Io(e.to_string()))?;
        match self.lines.recv_timeout(Duration::from_millis(timeout_ms)) {
            Ok(line) => Ok(Exchange {
                reply: Some(line),
                elapsed_ms: started.elapsed().as_millis() as u64,
            }),
            Err(RecvTimeoutError::Timeout) => Ok(Exchange {
                reply: None,
                elapsed_ms: timeout_ms,
            }),
            Err(RecvTimeoutError::Disconnected) => Err(LinkError::Closed),
        }
    }
}
