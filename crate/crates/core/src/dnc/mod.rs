//! Framed, checksummed stop-and-wait transfer of programs and part files.
//!
//! The sender splits the payload into frames whose first payload byte names
//! the content type, waits for an ACK or NAK after each one, and retransmits
//! on NAK or timeout. A frame holding only the end-of-transfer type byte
//! closes the session.

pub mod channel;
pub mod frame;

use std::time::{Duration, Instant};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use channel::{memory_pair, Channel, Fault, FaultyChannel, MemoryChannel, TcpChannel};
pub use frame::{crc16, decode_frame, encode_frame, Frame, MAX_PAYLOAD};
use frame::{encode_reply, ACK, NAK, TYPE_END};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum FrameError {
    #[error("bad start or end delimiter")]
    BadDelimiter,
    #[error("length field does not match the frame")]
    BadLength,
    #[error("checksum mismatch")]
    BadCrc,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DncError {
    #[error("payload of {0} bytes exceeds the frame limit")]
    PayloadTooLarge(usize),
    #[error("frame error: {0}")]
    Frame(#[from] FrameError),
    #[error("transfer failed at frame {0}: retries exhausted")]
    TransferFailed(u8),
    #[error("no frame received within the session timeout")]
    SessionTimeout,
    #[error("unexpected payload type {0:#04x}")]
    PayloadType(u8),
    #[error("peer closed the connection")]
    Closed,
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for DncError {
    fn from(e: std::io::Error) -> Self {
        DncError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct DncConfig {
    pub ack_timeout_ms: u64,
    pub retries: u32,
    pub session_timeout_ms: u64,
}

impl Default for DncConfig {
    fn default() -> Self {
        Self {
            ack_timeout_ms: 500,
            retries: 3,
            session_timeout_ms: 5000,
        }
    }
}

impl DncConfig {
    fn ack_timeout(&self) -> Duration {
        Duration::from_millis(self.ack_timeout_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Idle,
    AwaitingAck,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
pub struct SendReport {
    /// Frames carrying data, not counting the end marker.
    pub data_frames: u32,
    /// Every transmission, retransmissions included.
    pub frames_sent: u32,
    pub retries: u32,
    pub naks: u32,
    pub timeouts: u32,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
pub struct ReceiveReport {
    pub frames_accepted: u32,
    pub duplicates: u32,
    pub naks_sent: u32,
    pub payload_type: u8,
    pub bytes: usize,
}

/// Sending endpoint of a stop-and-wait session.
pub struct Sender<'a, C: Channel> {
    channel: &'a mut C,
    cfg: DncConfig,
    pub seq: u8,
    pub state: SessionState,
    pub report: SendReport,
}

impl<'a, C: Channel> Sender<'a, C> {
    pub fn new(channel: &'a mut C, cfg: DncConfig) -> Self {
        Sender {
            channel,
            cfg,
            seq: 0,
            state: SessionState::Idle,
            report: SendReport::default(),
        }
    }

    /// Sends one frame and waits for its ACK, retransmitting on NAK or
    /// timeout until the retry budget is spent.
    fn deliver(&mut self, payload: &[u8]) -> Result<(), DncError> {
        let bytes = encode_frame(self.seq, payload)?;
        self.state = SessionState::AwaitingAck;
        let mut retries = 0;
        'attempt: loop {
            self.channel.send(&bytes)?;
            self.report.frames_sent += 1;
            let deadline = Instant::now() + self.cfg.ack_timeout();
            loop {
                let left = deadline.saturating_duration_since(Instant::now());
                let reply = if left.is_zero() {
                    None
                } else {
                    self.channel.recv(left)?
                };
                match reply.as_deref() {
                    None => {
                        self.report.timeouts += 1;
                        break;
                    }
                    Some([ACK, s]) if *s == self.seq => {
                        self.seq = self.seq.wrapping_add(1);
                        self.state = SessionState::Idle;
                        return Ok(());
                    }
                    Some([NAK, s]) if *s == self.seq => {
                        self.report.naks += 1;
                        break;
                    }
                    // stale replies to earlier copies and line noise
                    _ => continue,
                }
            }
            if retries == self.cfg.retries {
                self.state = SessionState::Failed;
                return Err(DncError::TransferFailed(self.seq));
            }
            retries += 1;
            self.report.retries += 1;
            continue 'attempt;
        }
    }

    pub fn send(mut self, payload_type: u8, data: &[u8]) -> Result<SendReport, DncError> {
        let chunk = MAX_PAYLOAD - 1;
        let mut buf = Vec::with_capacity(MAX_PAYLOAD);
        for part in data.chunks(chunk) {
            buf.clear();
            buf.push(payload_type);
            buf.extend_from_slice(part);
            self.deliver(&buf)?;
            self.report.data_frames += 1;
        }
        self.deliver(&[TYPE_END])?;
        self.state = SessionState::Done;
        self.report.bytes = data.len();
        Ok(self.report)
    }
}

/// Sends `data` tagged with `payload_type` and returns the transfer report.
pub fn send_payload<C: Channel>(
    channel: &mut C,
    payload_type: u8,
    data: &[u8],
    cfg: &DncConfig,
) -> Result<SendReport, DncError> {
    Sender::new(channel, cfg.clone()).send(payload_type, data)
}

pub fn send_program<C: Channel>(
    channel: &mut C,
    text: &str,
    cfg: &DncConfig,
) -> Result<SendReport, DncError> {
    send_payload(channel, frame::TYPE_NC, text.as_bytes(), cfg)
}

/// Receives one transfer. Valid in-sequence frames are ACKed and kept, a
/// repeat of the last accepted frame is ACKed again and dropped, anything
/// unreadable is NAKed.
pub fn receive_payload<C: Channel>(
    channel: &mut C,
    cfg: &DncConfig,
) -> Result<(u8, Vec<u8>, ReceiveReport), DncError> {
    let mut expected: u8 = 0;
    let mut data = Vec::new();
    let mut report = ReceiveReport::default();
    let timeout = Duration::from_millis(cfg.session_timeout_ms);
    loop {
        let Some(unit) = channel.recv(timeout)? else {
            return Err(DncError::SessionTimeout);
        };
        let frame = match decode_frame(&unit) {
            Ok(f) if !f.payload.is_empty() => f,
            _ => {
                channel.send(&encode_reply(NAK, expected))?;
                report.naks_sent += 1;
                continue;
            }
        };
        if frame.seq == expected.wrapping_sub(1) && report.frames_accepted > 0 {
            channel.send(&encode_reply(ACK, frame.seq))?;
            report.duplicates += 1;
            continue;
        }
        if frame.seq != expected {
            channel.send(&encode_reply(NAK, expected))?;
            report.naks_sent += 1;
            continue;
        }
        let ty = frame.payload[0];
        if ty != TYPE_END && report.frames_accepted > 0 && ty != report.payload_type {
            return Err(DncError::PayloadType(ty));
        }
        channel.send(&encode_reply(ACK, frame.seq))?;
        report.frames_accepted += 1;
        expected = expected.wrapping_add(1);
        if ty == TYPE_END {
            report.bytes = data.len();
            return Ok((report.payload_type, data, report));
        }
        report.payload_type = ty;
        data.extend_from_slice(&frame.payload[1..]);
    }
}

pub fn receive_program<C: Channel>(
    channel: &mut C,
    cfg: &DncConfig,
) -> Result<(String, ReceiveReport), DncError> {
    let (ty, data, report) = receive_payload(channel, cfg)?;
    if ty != frame::TYPE_NC && report.frames_accepted > 1 {
        return Err(DncError::PayloadType(ty));
    }
    let text = String::from_utf8(data).map_err(|e| DncError::Io(e.to_string()))?;
    Ok((text, report))
}

/// After a completed receive, keeps answering retransmissions of the end
/// frame (whose ACK may have been lost) until the line is quiet for one
/// ACK timeout.
pub fn linger<C: Channel>(channel: &mut C, last_seq: u8, cfg: &DncConfig) -> Result<(), DncError> {
    loop {
        match channel.recv(cfg.ack_timeout()) {
            Ok(Some(unit)) => {
                if let Ok(f) = decode_frame(&unit) {
                    if f.seq == last_seq {
                        channel.send(&encode_reply(ACK, f.seq))?;
                    }
                }
            }
            Ok(None) | Err(DncError::Closed) => return Ok(()),
            Err(e) => return Err(e),
        }
    }
}
