use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::protocol::{self, Reply, Request, CLASSES, PROTOCOL_VERSION};
use super::{Granularity, Oracle, OracleResponse, OracleStats};
use crate::geometry::Rect;
use crate::scene::{resize_to_square, Scene};
use crate::{Error, Result};

/// Looser than [`super::CONFIDENCE_SUM_TOL`]: servers often emit float32 softmax.
const WIRE_SUM_TOL: f64 = 1e-3;

/// Where an external classifier lives.
///
/// Text form: `tcp:HOST:PORT` or `stdio:PROGRAM [ARGS...]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Endpoint {
    Tcp(String),
    Stdio(Vec<String>),
}

impl FromStr for Endpoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(addr) = s.strip_prefix("tcp:") {
            if addr.is_empty() {
                return Err(Error::invalid("empty tcp address"));
            }
            Ok(Endpoint::Tcp(addr.to_string()))
        } else if let Some(cmd) = s.strip_prefix("stdio:") {
            let argv: Vec<String> = cmd.split_whitespace().map(String::from).collect();
            if argv.is_empty() {
                return Err(Error::invalid("empty stdio command"));
            }
            Ok(Endpoint::Stdio(argv))
        } else {
            Err(Error::invalid(format!("endpoint {s:?} must start with tcp: or stdio:")))
        }
    }
}

impl TryFrom<String> for Endpoint {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Endpoint> for String {
    fn from(e: Endpoint) -> String {
        e.to_string()
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Tcp(addr) => write!(f, "tcp:{addr}"),
            Endpoint::Stdio(argv) => write!(f, "stdio:{}", argv.join(" ")),
        }
    }
}

/// Client side of the classifier protocol. Holds one connection with at most
/// one outstanding request.
pub struct ExternalClient {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
    input_side: usize,
    next_id: u64,
    stats: OracleStats,
}

impl fmt::Debug for ExternalClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalClient")
            .field("input_side", &self.input_side)
            .field("next_id", &self.next_id)
            .field("stats", &self.stats)
            .finish_non_exhaustive()
    }
}

fn unavailable(e: std::io::Error) -> Error {
    Error::OracleUnavailable(e.to_string())
}

impl ExternalClient {
    /// Connects and performs the handshake.
    pub fn connect(endpoint: &Endpoint) -> Result<Self> {
        match endpoint {
            Endpoint::Tcp(addr) => {
                let stream = TcpStream::connect(addr).map_err(unavailable)?;
                let reader = BufReader::new(stream.try_clone().map_err(unavailable)?);
                Self::handshake(Box::new(reader), Box::new(stream), None)
            }
            Endpoint::Stdio(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .spawn()
                    .map_err(|e| Error::OracleUnavailable(format!("cannot spawn {:?}: {e}", argv[0])))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                Self::handshake(Box::new(BufReader::new(stdout)), Box::new(stdin), Some(child))
            }
        }
    }

    /// Handshakes over an already open pair of streams.
    pub fn from_streams<R, W>(reader: R, writer: W) -> Result<Self>
    where
        R: BufRead + Send + 'static,
        W: Write + Send + 'static,
    {
        Self::handshake(Box::new(reader), Box::new(writer), None)
    }

    fn handshake(
        reader: Box<dyn BufRead + Send>,
        writer: Box<dyn Write + Send>,
        child: Option<Child>,
    ) -> Result<Self> {
        let mut client = Self { reader, writer, child, input_side: 0, next_id: 1, stats: OracleStats::default() };
        client.send(&Request::Hello { protocol: PROTOCOL_VERSION })?;
        match client.receive()? {
            Reply::Hello { protocol, input_side, classes } => {
                if protocol != PROTOCOL_VERSION {
                    return Err(Error::Protocol(format!("server speaks protocol {protocol}")));
                }
                if classes != CLASSES {
                    return Err(Error::Protocol(format!("unexpected class order {classes:?}")));
                }
                if input_side == 0 {
                    return Err(Error::Protocol("server declared input side 0".into()));
                }
                client.input_side = input_side;
                Ok(client)
            }
            other => Err(Error::Protocol(format!("expected hello, got {other:?}"))),
        }
    }

    pub fn input_side(&self) -> usize {
        self.input_side
    }

    pub fn stats(&self) -> OracleStats {
        self.stats
    }

    /// Sends one `side x side` raster for classification.
    pub fn classify(&mut self, pixels: &[u8], side: usize) -> Result<OracleResponse> {
        if side != self.input_side {
            return Err(Error::invalid(format!(
                "raster side {side} does not match server input side {}",
                self.input_side
            )));
        }
        if pixels.len() != side * side {
            return Err(Error::invalid(format!("raster has {} pixels, expected {}", pixels.len(), side * side)));
        }
        self.stats.calls += 1;
        let id = self.next_id;
        self.next_id += 1;
        self.send(&Request::Classify { id, side, pixels: protocol::encode_pixels(pixels) })?;
        match self.receive()? {
            Reply::Result { id: got, confidence } => {
                if got != id {
                    return Err(Error::Protocol(format!("reply id {got} does not match request id {id}")));
                }
                validate_wire_confidence(confidence)
            }
            Reply::Error { id: got, message } => {
                Err(Error::Protocol(format!("server error for request {got}: {message}")))
            }
            other => Err(Error::Protocol(format!("expected result, got {other:?}"))),
        }
    }

    fn send(&mut self, req: &Request) -> Result<()> {
        protocol::write_line(&mut self.writer, req).map_err(unavailable)
    }

    fn receive(&mut self) -> Result<Reply> {
        let mut line = String::new();
        let n = self.reader.read_line(&mut line).map_err(unavailable)?;
        if n == 0 {
            return Err(Error::OracleUnavailable("server closed the connection".into()));
        }
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Protocol(format!("malformed reply {line:?}: {e}")))
    }
}

impl Drop for ExternalClient {
    fn drop(&mut self) {
        if let Some(child) = self.child.as_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn validate_wire_confidence([p_obj, p_bg]: [f64; 2]) -> Result<OracleResponse> {
    let sum = p_obj + p_bg;
    if !p_obj.is_finite() || !p_bg.is_finite() || p_obj < 0.0 || p_bg < 0.0 || (sum - 1.0).abs() > WIRE_SUM_TOL {
        return Err(Error::Protocol(format!("invalid confidence [{p_obj}, {p_bg}]")));
    }
    OracleResponse::from_confidence(p_obj / sum, p_bg / sum)
}

/// Feeds square scene blocks, resized to the server's input side, to an
/// external classifier.
#[derive(Debug)]
pub struct ExternalOracle<'a> {
    client: ExternalClient,
    scene: &'a Scene,
}

impl<'a> ExternalOracle<'a> {
    pub fn new(client: ExternalClient, scene: &'a Scene) -> Self {
        Self { client, scene }
    }

    pub fn into_client(self) -> ExternalClient {
        self.client
    }
}

impl Oracle for ExternalOracle<'_> {
    fn granularity(&self) -> Granularity {
        Granularity::Block
    }

    fn query(&mut self, rect: &Rect) -> Result<OracleResponse> {
        if !rect.is_square() {
            return Err(Error::invalid(format!("external oracle needs square blocks, got {rect}")));
        }
        let block = self.scene.extract_block(rect)?;
        let resized = resize_to_square(&block, self.client.input_side())?;
        self.client.classify(resized.pixels(), resized.side())
    }

    fn stats(&self) -> OracleStats {
        self.client.stats()
    }
}
