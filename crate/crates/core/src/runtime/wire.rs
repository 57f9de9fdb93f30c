//! Frame codec.
//!
//! A frame is a 4-byte big-endian payload length followed by the payload:
//! UTF-8 `key=value` pairs separated by single spaces, always all keys, in
//! this order:
//!
//! ```text
//! v kind run iter particle word b p fitness topo msg
//! ```
//!
//! Values are percent-escaped: bytes outside `[A-Za-z0-9._~-]` are written
//! as `%XX` (upper-case hex).

use std::fmt;
use std::io::{self, Read, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::bits::{BinaryPosition, FitnessReport, TopologyId};

pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_FRAME: usize = 1 << 20;

const KEYS: [&str; 11] = [
    "v", "kind", "run", "iter", "particle", "word", "b", "p", "fitness", "topo", "msg",
];

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame of {0} bytes exceeds the 1 MiB limit")]
    TooLarge(usize),
    #[error("frame declares {declared} bytes but only {available} are present")]
    LengthMismatch { declared: usize, available: usize },
    #[error("unknown message kind {0:?}")]
    UnknownKind(String),
    #[error("missing key {0:?}")]
    MissingKey(&'static str),
    #[error("unexpected key {0:?}")]
    UnexpectedKey(String),
    #[error("bad escape in value of {0:?}")]
    BadEscape(&'static str),
    #[error("bad value {value:?} for {key:?}")]
    BadValue { key: &'static str, value: String },
    #[error("payload is not UTF-8")]
    NotUtf8,
    #[error("peer closed the connection")]
    Closed,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Hello,
    Assign,
    Result,
    Best,
    Stop,
    /// Protocol or evaluation failure; the reason is in `message`.
    Error,
}

impl Kind {
    pub const ALL: [Kind; 6] = [
        Kind::Hello,
        Kind::Assign,
        Kind::Result,
        Kind::Best,
        Kind::Stop,
        Kind::Error,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Hello => "HELLO",
            Kind::Assign => "ASSIGN",
            Kind::Result => "RESULT",
            Kind::Best => "BEST",
            Kind::Stop => "STOP",
            Kind::Error => "ERROR",
        }
    }
}

impl FromStr for Kind {
    type Err = FrameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Kind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| FrameError::UnknownKind(s.to_owned()))
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    pub protocol_version: u32,
    pub kind: Kind,
    pub run_id: String,
    pub iteration: u64,
    pub particle_id: u64,
    /// Canonical `0`/`1` text, empty when not applicable.
    pub word: String,
    pub b: f64,
    pub p: f64,
    pub fitness: f64,
    /// Hex topology id, empty when absent.
    pub topology_id: String,
    pub message: String,
}

impl WireMessage {
    pub fn new(kind: Kind, run_id: &str) -> Self {
        Self {
            protocol_version: PROTOCOL_VERSION,
            kind,
            run_id: run_id.to_owned(),
            iteration: 0,
            particle_id: 0,
            word: String::new(),
            b: 0.0,
            p: 0.0,
            fitness: 0.0,
            topology_id: String::new(),
            message: String::new(),
        }
    }

    pub fn hello(run_id: &str, worker: u64) -> Self {
        Self {
            particle_id: worker,
            ..Self::new(Kind::Hello, run_id)
        }
    }

    pub fn assign(run_id: &str, iteration: u64, particle: u64, word: &BinaryPosition) -> Self {
        Self {
            iteration,
            particle_id: particle,
            word: word.to_string(),
            ..Self::new(Kind::Assign, run_id)
        }
    }

    pub fn result(
        run_id: &str,
        iteration: u64,
        particle: u64,
        word: &BinaryPosition,
        report: &FitnessReport,
    ) -> Self {
        Self {
            iteration,
            particle_id: particle,
            word: word.to_string(),
            b: report.b,
            p: report.p,
            fitness: report.fitness,
            topology_id: report.topology_text(),
            ..Self::new(Kind::Result, run_id)
        }
    }

    pub fn best(run_id: &str, iteration: u64, word: &BinaryPosition, fitness: f64) -> Self {
        Self {
            iteration,
            word: word.to_string(),
            fitness,
            ..Self::new(Kind::Best, run_id)
        }
    }

    pub fn stop(run_id: &str) -> Self {
        Self::new(Kind::Stop, run_id)
    }

    pub fn error(run_id: &str, message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            ..Self::new(Kind::Error, run_id)
        }
    }

    pub fn parsed_word(&self) -> Result<BinaryPosition, FrameError> {
        self.word.parse().map_err(|_| FrameError::BadValue {
            key: "word",
            value: self.word.clone(),
        })
    }

    pub fn report(&self) -> Result<FitnessReport, FrameError> {
        let topology = if self.topology_id.is_empty() {
            None
        } else {
            Some(
                self.topology_id
                    .parse::<TopologyId>()
                    .map_err(|_| FrameError::BadValue {
                        key: "topo",
                        value: self.topology_id.clone(),
                    })?,
            )
        };
        Ok(FitnessReport {
            b: self.b,
            p: self.p,
            fitness: self.fitness,
            topology,
        })
    }
}

fn unreserved(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b'~')
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for &b in s.as_bytes() {
        if unreserved(b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

fn unescape(s: &str, key: &'static str) -> Result<String, FrameError> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'%' => {
                let hex = bytes
                    .get(i + 1..i + 3)
                    .and_then(|h| std::str::from_utf8(h).ok())
                    .filter(|h| h.bytes().all(|c| c.is_ascii_hexdigit()))
                    .ok_or(FrameError::BadEscape(key))?;
                out.push(u8::from_str_radix(hex, 16).expect("validated hex"));
                i += 3;
            }
            b if unreserved(b) => {
                out.push(b);
                i += 1;
            }
            _ => return Err(FrameError::BadEscape(key)),
        }
    }
    String::from_utf8(out).map_err(|_| FrameError::BadEscape(key))
}

pub fn encode_payload(m: &WireMessage) -> String {
    let values = [
        m.protocol_version.to_string(),
        m.kind.as_str().to_owned(),
        m.run_id.clone(),
        m.iteration.to_string(),
        m.particle_id.to_string(),
        m.word.clone(),
        m.b.to_string(),
        m.p.to_string(),
        m.fitness.to_string(),
        m.topology_id.clone(),
        m.message.clone(),
    ];
    KEYS.iter()
        .zip(values)
        .map(|(k, v)| format!("{k}={}", escape(&v)))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn decode_payload(payload: &str) -> Result<WireMessage, FrameError> {
    let mut pairs = payload.split(' ');
    let mut values: Vec<String> = Vec::with_capacity(KEYS.len());
    for key in KEYS {
        let pair = pairs.next().ok_or(FrameError::MissingKey(key))?;
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| FrameError::UnexpectedKey(pair.to_owned()))?;
        if k != key {
            return Err(if KEYS.contains(&k) {
                FrameError::MissingKey(key)
            } else {
                FrameError::UnexpectedKey(k.to_owned())
            });
        }
        values.push(unescape(v, key)?);
    }
    if let Some(extra) = pairs.next() {
        let k = extra.split('=').next().unwrap_or(extra);
        return Err(FrameError::UnexpectedKey(k.to_owned()));
    }
    fn num<T: FromStr>(key: &'static str, v: &str) -> Result<T, FrameError> {
        v.parse().map_err(|_| FrameError::BadValue {
            key,
            value: v.to_owned(),
        })
    }
    let mut it = values.into_iter();
    let mut next = || it.next().expect("one value per key");
    Ok(WireMessage {
        protocol_version: num("v", &next())?,
        kind: next().parse()?,
        run_id: next(),
        iteration: num("iter", &next())?,
        particle_id: num("particle", &next())?,
        word: next(),
        b: num("b", &next())?,
        p: num("p", &next())?,
        fitness: num("fitness", &next())?,
        topology_id: next(),
        message: next(),
    })
}

pub fn encode_frame(m: &WireMessage) -> Result<Vec<u8>, FrameError> {
    let payload = encode_payload(m);
    if payload.len() > MAX_FRAME {
        return Err(FrameError::TooLarge(payload.len()));
    }
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload.as_bytes());
    Ok(out)
}

/// Decodes one frame from the front of `buf`; returns the message and the
/// number of bytes consumed.
pub fn decode_frame(buf: &[u8]) -> Result<(WireMessage, usize), FrameError> {
    if buf.len() < 4 {
        return Err(FrameError::LengthMismatch {
            declared: 4,
            available: buf.len(),
        });
    }
    let declared = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) as usize;
    if declared > MAX_FRAME {
        return Err(FrameError::TooLarge(declared));
    }
    let available = buf.len() - 4;
    if available < declared {
        return Err(FrameError::LengthMismatch {
            declared,
            available,
        });
    }
    let payload = std::str::from_utf8(&buf[4..4 + declared]).map_err(|_| FrameError::NotUtf8)?;
    Ok((decode_payload(payload)?, 4 + declared))
}

pub fn write_frame<W: Write>(w: &mut W, m: &WireMessage) -> Result<(), FrameError> {
    w.write_all(&encode_frame(m)?)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. A clean end of stream before the header is `Closed`.
pub fn read_frame<R: Read>(r: &mut R) -> Result<WireMessage, FrameError> {
    let mut header = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut header[got..])? {
            0 if got == 0 => return Err(FrameError::Closed),
            0 => {
                return Err(FrameError::LengthMismatch {
                    declared: 4,
                    available: got,
                })
            }
            k => got += k,
        }
    }
    let declared = u32::from_be_bytes(header) as usize;
    if declared > MAX_FRAME {
        return Err(FrameError::TooLarge(declared));
    }
    let mut payload = vec![0u8; declared];
    let mut filled = 0;
    while filled < declared {
        match r.read(&mut payload[filled..])? {
            0 => {
                return Err(FrameError::LengthMismatch {
                    declared,
                    available: filled,
                })
            }
            k => filled += k,
        }
    }
    let text = String::from_utf8(payload).map_err(|_| FrameError::NotUtf8)?;
    decode_payload(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> WireMessage {
        let report = FitnessReport::new(92.0, 63.0, Some(TopologyId(0x1f))).unwrap();
        WireMessage::result("run 7/α", 3, 9, &"1011".parse().unwrap(), &report)
    }

    #[test]
    fn payload_layout() {
        let p = encode_payload(&sample());
        assert_eq!(
            p,
            "v=1 kind=RESULT run=run%207%2F%CE%B1 iter=3 particle=9 word=1011 b=92 p=63 fitness=77.5 topo=000000000000001f msg="
        );
        let f = encode_frame(&sample()).unwrap();
        assert_eq!(&f[..4], &(p.len() as u32).to_be_bytes());
    }

    #[test]
    fn round_trip_each_kind() {
        for kind in Kind::ALL {
            let m = WireMessage {
                kind,
                ..sample()
            };
            let bytes = encode_frame(&m).unwrap();
            let (back, used) = decode_frame(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(used, bytes.len());
            assert_eq!(read_frame(&mut bytes.as_slice()).unwrap(), m);
        }
        let r = sample().report().unwrap();
        assert_eq!(r.fitness, 77.5);
        assert_eq!(r.topology, Some(TopologyId(0x1f)));
    }

    #[test]
    fn truncated_frame() {
        let bytes = encode_frame(&sample()).unwrap();
        let cut = &bytes[..bytes.len() - 5];
        assert!(matches!(
            decode_frame(cut),
            Err(FrameError::LengthMismatch { .. })
        ));
        assert!(matches!(
            decode_frame(&bytes[..2]),
            Err(FrameError::LengthMismatch { declared: 4, available: 2 })
        ));
        assert!(matches!(
            read_frame(&mut &cut[..]),
            Err(FrameError::LengthMismatch { .. })
        ));
        assert!(matches!(read_frame(&mut &[][..]), Err(FrameError::Closed)));
    }

    #[test]
    fn oversize_frame() {
        let mut bytes = ((MAX_FRAME + 1) as u32).to_be_bytes().to_vec();
        bytes.extend_from_slice(b"v=1");
        assert!(matches!(decode_frame(&bytes), Err(FrameError::TooLarge(_))));
        let huge = WireMessage {
            message: "x".repeat(MAX_FRAME),
            ..sample()
        };
        assert!(matches!(encode_frame(&huge), Err(FrameError::TooLarge(_))));
    }

    #[test]
    fn payload_errors() {
        let good = encode_payload(&sample());
        assert!(matches!(
            decode_payload(&good.replace("RESULT", "RESULTS")),
            Err(FrameError::UnknownKind(_))
        ));
        assert!(matches!(
            decode_payload(&good.replace(" word=1011", "")),
            Err(FrameError::MissingKey("word"))
        ));
        assert!(matches!(
            decode_payload(&good.replace("msg=", "msg= extra=1")),
            Err(FrameError::UnexpectedKey(_))
        ));
        assert!(matches!(
            decode_payload(&good.replace("%CE", "%C")),
            Err(FrameError::BadEscape("run"))
        ));
        assert!(matches!(
            decode_payload(&good.replace("%CE", "%ZZ")),
            Err(FrameError::BadEscape("run"))
        ));
        assert!(matches!(
            decode_payload(&good.replace("iter=3", "iter=x")),
            Err(FrameError::BadValue { key: "iter", .. })
        ));
    }

    fn any_kind() -> impl Strategy<Value = Kind> {
        proptest::sample::select(Kind::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn codec_identity(
            kind in any_kind(),
            run in ".{0,20}",
            iter in any::<u64>(),
            particle in any::<u64>(),
            word in "[01]{0,90}",
            b in -1e6..1e6f64,
            p in any::<f64>().prop_filter("finite", |x| x.is_finite()),
            fitness in 0.0..100.0f64,
            topo in "[0-9a-f]{0,16}",
            msg in ".{0,40}",
        ) {
            let m = WireMessage {
                protocol_version: PROTOCOL_VERSION,
                kind, run_id: run, iteration: iter, particle_id: particle,
                word, b, p, fitness, topology_id: topo, message: msg,
            };
            let (back, _) = decode_frame(&encode_frame(&m).unwrap()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
