//! Message links between master and workers.

use std::io::{BufReader, BufWriter};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, Sender};

use super::wire::{decode_frame, encode_frame, read_frame, write_frame, FrameError, WireMessage};

/// A bidirectional, ordered message link.
pub trait Link: Send {
    fn send(&mut self, msg: &WireMessage) -> Result<(), FrameError>;
    fn recv(&mut self) -> Result<WireMessage, FrameError>;
}

impl Link for Box<dyn Link> {
    fn send(&mut self, msg: &WireMessage) -> Result<(), FrameError> {
        (**self).send(msg)
    }

    fn recv(&mut self) -> Result<WireMessage, FrameError> {
        (**self).recv()
    }
}

/// In-process link. Messages cross as encoded frames so both transports
/// exercise the same codec.
pub struct ChannelLink {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

impl ChannelLink {
    pub fn pair() -> (ChannelLink, ChannelLink) {
        let (a_tx, b_rx) = channel();
        let (b_tx, a_rx) = channel();
        (
            ChannelLink { tx: a_tx, rx: a_rx },
            ChannelLink { tx: b_tx, rx: b_rx },
        )
    }

    /// Sends raw bytes as one frame body, bypassing the encoder.
    pub fn send_raw(&mut self, bytes: Vec<u8>) -> Result<(), FrameError> {
        self.tx.send(bytes).map_err(|_| FrameError::Closed)
    }
}

impl Link for ChannelLink {
    fn send(&mut self, msg: &WireMessage) -> Result<(), FrameError> {
        self.send_raw(encode_frame(msg)?)
    }

    fn recv(&mut self) -> Result<WireMessage, FrameError> {
        let bytes = self.rx.recv().map_err(|_| FrameError::Closed)?;
        let (msg, used) = decode_frame(&bytes)?;
        if used != bytes.len() {
            return Err(FrameError::LengthMismatch {
                declared: used - 4,
                available: bytes.len() - 4,
            });
        }
        Ok(msg)
    }
}

pub struct TcpLink {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl TcpLink {
    pub fn new(stream: TcpStream) -> std::io::Result<Self> {
        stream.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        })
    }

    pub fn connect(addr: impl ToSocketAddrs) -> std::io::Result<Self> {
        Self::new(TcpStream::connect(addr)?)
    }

    pub fn peer(&self) -> Option<std::net::SocketAddr> {
        self.writer.get_ref().peer_addr().ok()
    }
}

impl Link for TcpLink {
    fn send(&mut self, msg: &WireMessage) -> Result<(), FrameError> {
        write_frame(&mut self.writer, msg)
    }

    fn recv(&mut self) -> Result<WireMessage, FrameError> {
        read_frame(&mut self.reader)
    }
}

/// Accepts exactly `count` connections from `listener`.
pub fn accept_links(listener: &TcpListener, count: usize) -> std::io::Result<Vec<TcpLink>> {
    (0..count)
        .map(|_| listener.accept().and_then(|(s, _)| TcpLink::new(s)))
        .collect()
}
