//! Transports. A channel moves whole units (one frame or one reply) in order;
//! the TCP binding recovers unit boundaries from the wire format.

use std::collections::VecDeque;
use std::io::{ErrorKind, Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use super::frame::{ACK, NAK, STX};
use super::DncError;

pub trait Channel {
    fn send(&mut self, unit: &[u8]) -> Result<(), DncError>;
    /// Next unit, or `None` when nothing arrives within `timeout`.
    fn recv(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, DncError>;
}

impl<C: Channel + ?Sized> Channel for &mut C {
    fn send(&mut self, unit: &[u8]) -> Result<(), DncError> {
        (**self).send(unit)
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, DncError> {
        (**self).recv(timeout)
    }
}

/// One end of an in-process duplex link.
pub struct MemoryChannel {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

pub fn memory_pair() -> (MemoryChannel, MemoryChannel) {
    let (a_tx, b_rx) = mpsc::channel();
    let (b_tx, a_rx) = mpsc::channel();
    (
        MemoryChannel { tx: a_tx, rx: a_rx },
        MemoryChannel { tx: b_tx, rx: b_rx },
    )
}

impl Channel for MemoryChannel {
    fn send(&mut self, unit: &[u8]) -> Result<(), DncError> {
        // a vanished peer behaves like a line that swallows everything
        let _ = self.tx.send(unit.to_vec());
        Ok(())
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, DncError> {
        match self.rx.recv_timeout(timeout) {
            Ok(u) => Ok(Some(u)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(DncError::Closed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    Deliver,
    /// Flip the low bit of the byte at this offset (taken modulo the length).
    Corrupt(usize),
    Drop,
    Duplicate,
}

/// Applies a scripted fault to each outgoing unit in turn, then `fallback`
/// once the script runs out. Incoming units pass through untouched.
pub struct FaultyChannel<C> {
    inner: C,
    script: VecDeque<Fault>,
    fallback: Fault,
    pub applied: Vec<Fault>,
}

impl<C: Channel> FaultyChannel<C> {
    pub fn new(inner: C, script: impl IntoIterator<Item = Fault>) -> Self {
        FaultyChannel {
            inner,
            script: script.into_iter().collect(),
            fallback: Fault::Deliver,
            applied: Vec::new(),
        }
    }

    /// A channel that loses every unit.
    pub fn dead(inner: C) -> Self {
        FaultyChannel {
            fallback: Fault::Drop,
            ..Self::new(inner, [])
        }
    }

    pub fn into_inner(self) -> C {
        self.inner
    }
}

impl<C: Channel> Channel for FaultyChannel<C> {
    fn send(&mut self, unit: &[u8]) -> Result<(), DncError> {
        let fault = self.script.pop_front().unwrap_or(self.fallback);
        self.applied.push(fault);
        match fault {
            Fault::Deliver => self.inner.send(unit),
            Fault::Drop => Ok(()),
            Fault::Duplicate => {
                self.inner.send(unit)?;
                self.inner.send(unit)
            }
            Fault::Corrupt(at) => {
                let mut u = unit.to_vec();
                if !u.is_empty() {
                    let i = at % u.len();
                    u[i] ^= 0x01;
                }
                self.inner.send(&u)
            }
        }
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, DncError> {
        self.inner.recv(timeout)
    }
}

/// Plain TCP stream, one session per connection.
pub struct TcpChannel {
    stream: TcpStream,
}

const UNIT_READ_TIMEOUT: Duration = Duration::from_secs(2);

impl TcpChannel {
    pub fn new(stream: TcpStream) -> Result<Self, DncError> {
        stream.set_nodelay(true)?;
        Ok(TcpChannel { stream })
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> Result<(), DncError> {
        self.stream.set_read_timeout(Some(UNIT_READ_TIMEOUT))?;
        self.stream.read_exact(buf).map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => DncError::Closed,
            _ => e.into(),
        })
    }
}

impl Channel for TcpChannel {
    fn send(&mut self, unit: &[u8]) -> Result<(), DncError> {
        self.stream.write_all(unit)?;
        Ok(())
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, DncError> {
        self.stream.set_read_timeout(Some(timeout.max(Duration::from_millis(1))))?;
        let mut first = [0u8; 1];
        match self.stream.read(&mut first) {
            Ok(0) => return Err(DncError::Closed),
            Ok(_) => {}
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                return Ok(None)
            }
            Err(e) => return Err(e.into()),
        }
        let mut unit = vec![first[0]];
        match first[0] {
            STX => {
                let mut head = [0u8; 3];
                self.read_exact(&mut head)?;
                unit.extend_from_slice(&head);
                let len = u16::from_le_bytes([head[1], head[2]]) as usize;
                let mut rest = vec![0u8; len + 3];
                self.read_exact(&mut rest)?;
                unit.extend_from_slice(&rest);
            }
            ACK | NAK => {
                let mut seq = [0u8; 1];
                self.read_exact(&mut seq)?;
                unit.push(seq[0]);
            }
            _ => {}
        }
        Ok(Some(unit))
    }
}
