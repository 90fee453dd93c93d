//! Framed message channel over any ordered byte stream.
//!
//! A frame is a 1-byte message type, a 4-byte little-endian payload length, then the payload.

use std::io::{self, Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{self, Receiver, Sender};

use serde::Serialize;

use super::ProtocolError;

/// Largest payload a peer may announce.
pub const MAX_PAYLOAD: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
#[repr(u8)]
pub enum MsgType {
    Hello = 1,
    Meta = 2,
    FBlob = 3,
    Decode = 4,
    OtS = 5,
    OtR = 6,
    OtCt = 7,
    Instr = 8,
    Labels = 9,
    OutMasked = 10,
    OutTag = 11,
    Done = 12,
}

impl MsgType {
    pub const ALL: [MsgType; 12] = [
        MsgType::Hello,
        MsgType::Meta,
        MsgType::FBlob,
        MsgType::Decode,
        MsgType::OtS,
        MsgType::OtR,
        MsgType::OtCt,
        MsgType::Instr,
        MsgType::Labels,
        MsgType::OutMasked,
        MsgType::OutTag,
        MsgType::Done,
    ];

    pub fn from_u8(v: u8) -> Option<MsgType> {
        MsgType::ALL.into_iter().find(|t| *t as u8 == v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TranscriptEntry {
    pub direction: Direction,
    pub msg: MsgType,
    pub len: usize,
}

/// Message log of one side of a session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
    /// Number of logical OT instances run.
    pub ot_interactions: usize,
    /// Number of OT network rounds.
    pub ot_rounds: usize,
}

impl Transcript {
    pub fn count(&self, direction: Direction, msg: MsgType) -> usize {
        self.entries
            .iter()
            .filter(|e| e.direction == direction && e.msg == msg)
            .count()
    }

    pub fn bytes(&self, direction: Direction) -> usize {
        self.entries
            .iter()
            .filter(|e| e.direction == direction)
            .map(|e| e.len + 5)
            .sum()
    }
}

/// A framed, logged channel.
pub struct Channel<S> {
    stream: S,
    transcript: Transcript,
    capture: Option<Vec<(MsgType, Vec<u8>)>>,
}

impl<S: Read + Write> Channel<S> {
    pub fn new(stream: S) -> Self {
        Channel {
            stream,
            transcript: Transcript::default(),
            capture: None,
        }
    }

    /// Also keeps a copy of every received payload.
    pub fn capturing(stream: S) -> Self {
        Channel {
            capture: Some(Vec::new()),
            ..Channel::new(stream)
        }
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub(crate) fn transcript_mut(&mut self) -> &mut Transcript {
        &mut self.transcript
    }

    pub fn take_capture(&mut self) -> Vec<(MsgType, Vec<u8>)> {
        self.capture.take().unwrap_or_default()
    }

    pub fn into_inner(self) -> S {
        self.stream
    }

    pub fn send(&mut self, msg: MsgType, payload: &[u8]) -> Result<(), ProtocolError> {
        if payload.len() > MAX_PAYLOAD {
            return Err(ProtocolError::Framing(format!(
                "payload of {} bytes",
                payload.len()
            )));
        }
        let mut frame = Vec::with_capacity(5 + payload.len());
        frame.push(msg as u8);
        frame.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        frame.extend_from_slice(payload);
        self.stream.write_all(&frame)?;
        self.stream.flush()?;
        self.transcript.entries.push(TranscriptEntry {
            direction: Direction::Sent,
            msg,
            len: payload.len(),
        });
        Ok(())
    }

    pub fn recv_any(&mut self) -> Result<(MsgType, Vec<u8>), ProtocolError> {
        let mut header = [0u8; 5];
        self.stream.read_exact(&mut header)?;
        let msg = MsgType::from_u8(header[0])
            .ok_or_else(|| ProtocolError::Framing(format!("unknown message type {}", header[0])))?;
        let len = u32::from_le_bytes(header[1..5].try_into().unwrap()) as usize;
        if len > MAX_PAYLOAD {
            return Err(ProtocolError::Framing(format!("announced length {len}")));
        }
        let mut payload = vec![0u8; len];
        self.stream.read_exact(&mut payload)?;
        self.transcript.entries.push(TranscriptEntry {
            direction: Direction::Received,
            msg,
            len,
        });
        if let Some(cap) = &mut self.capture {
            cap.push((msg, payload.clone()));
        }
        Ok((msg, payload))
    }

    pub fn recv(&mut self, expected: MsgType) -> Result<Vec<u8>, ProtocolError> {
        let (got, payload) = self.recv_any()?;
        if got != expected {
            return Err(ProtocolError::UnexpectedMessage { expected, got });
        }
        Ok(payload)
    }
}

/// One end of an in-process byte pipe.
pub struct Loopback {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    buf: Vec<u8>,
    pos: usize,
}

/// Two connected in-process endpoints.
pub fn loopback_pair() -> (Loopback, Loopback) {
    let (tx_a, rx_b) = mpsc::channel();
    let (tx_b, rx_a) = mpsc::channel();
    let end = |tx, rx| Loopback {
        tx,
        rx,
        buf: Vec::new(),
        pos: 0,
    };
    (end(tx_a, rx_a), end(tx_b, rx_b))
}

impl Read for Loopback {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        if out.is_empty() {
            return Ok(0);
        }
        while self.pos == self.buf.len() {
            match self.rx.recv() {
                Ok(chunk) => {
                    self.buf = chunk;
                    self.pos = 0;
                }
                Err(_) => return Ok(0),
            }
        }
        let n = out.len().min(self.buf.len() - self.pos);
        out[..n].copy_from_slice(&self.buf[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

impl Write for Loopback {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        self.tx
            .send(data.to_vec())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "peer closed"))?;
        Ok(data.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// TCP stream with Nagle disabled, since the protocol is a sequence of small request/response frames.
pub fn tcp_channel(stream: TcpStream) -> io::Result<Channel<TcpStream>> {
    stream.set_nodelay(true)?;
    Ok(Channel::new(stream))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_layout_is_exact() {
        let mut buf = Vec::new();
        {
            let mut ch = Channel::new(io::Cursor::new(&mut buf));
            ch.send(MsgType::Labels, &[0xaa, 0xbb]).unwrap();
        }
        assert_eq!(buf, vec![9, 2, 0, 0, 0, 0xaa, 0xbb]);
    }

    #[test]
    fn loopback_round_trip_and_transcript() {
        let (a, b) = loopback_pair();
        let mut ca = Channel::new(a);
        let mut cb = Channel::capturing(b);
        ca.send(MsgType::Hello, b"hi").unwrap();
        ca.send(MsgType::Done, &[]).unwrap();
        assert_eq!(cb.recv(MsgType::Hello).unwrap(), b"hi");
        assert_eq!(cb.recv(MsgType::Done).unwrap(), b"");
        assert_eq!(ca.transcript().count(Direction::Sent, MsgType::Hello), 1);
        assert_eq!(cb.transcript().entries.len(), 2);
        assert_eq!(cb.take_capture().len(), 2);
    }

    #[test]
    fn unexpected_and_unknown_types() {
        let (a, b) = loopback_pair();
        let mut ca = Channel::new(a);
        let mut cb = Channel::new(b);
        ca.send(MsgType::Meta, &[]).unwrap();
        assert!(matches!(
            cb.recv(MsgType::Hello),
            Err(ProtocolError::UnexpectedMessage { .. })
        ));
        ca.into_inner().write_all(&[200, 0, 0, 0, 0]).unwrap();
        assert!(matches!(cb.recv_any(), Err(ProtocolError::Framing(_))));
    }

    #[test]
    fn closed_peer_is_io_error() {
        let (a, b) = loopback_pair();
        drop(a);
        let mut cb = Channel::new(b);
        assert!(matches!(cb.recv_any(), Err(ProtocolError::Io(_))));
    }
}
