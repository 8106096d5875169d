//! Newline-delimited JSON protocol spoken with external classifier servers.
//!
//! ```text
//! -> {"op":"hello","protocol":1}
//! <- {"op":"hello","protocol":1,"input_side":100,"classes":["object","background"]}
//! -> {"op":"classify","id":7,"side":100,"pixels":"<base64, side*side bytes, row-major>"}
//! <- {"op":"result","id":7,"confidence":[0.93,0.07]}
//! <- {"op":"error","id":7,"message":"..."}
//! ```
//!
//! One JSON object per line in each direction. [`serve`] is a minimal
//! server loop, handy for stubs and tests.

use std::io::{BufRead, Write};

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;
pub const CLASSES: [&str; 2] = ["object", "background"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    Hello { protocol: u32 },
    Classify { id: u64, side: usize, pixels: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Reply {
    Hello { protocol: u32, input_side: usize, classes: Vec<String> },
    Result { id: u64, confidence: [f64; 2] },
    Error { id: u64, message: String },
}

pub fn encode_pixels(pixels: &[u8]) -> String {
    STANDARD.encode(pixels)
}

pub fn decode_pixels(encoded: &str, side: usize) -> Result<Vec<u8>> {
    let bytes = STANDARD
        .decode(encoded)
        .map_err(|e| Error::Protocol(format!("bad base64 pixels: {e}")))?;
    if bytes.len() != side * side {
        return Err(Error::Protocol(format!(
            "pixel payload has {} bytes, expected {}",
            bytes.len(),
            side * side
        )));
    }
    Ok(bytes)
}

/// Serializes one message as a single line, newline included.
pub fn write_line<W: Write, T: Serialize>(w: &mut W, msg: &T) -> std::io::Result<()> {
    let mut line = serde_json::to_vec(msg)?;
    line.push(b'\n');
    w.write_all(&line)?;
    w.flush()
}

/// Serves requests until EOF. `classify` receives a decoded `side x side`
/// raster and returns `[p_obj, p_bg]` or an error message for the client.
///
/// Malformed requests get an error frame (id 0 when the id is unreadable)
/// and the loop keeps going.
pub fn serve<R, W, F>(reader: R, mut writer: W, input_side: usize, mut classify: F) -> std::io::Result<()>
where
    R: BufRead,
    W: Write,
    F: FnMut(&[u8], usize) -> std::result::Result<[f64; 2], String>,
{
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Request>(&line) {
            Ok(Request::Hello { .. }) => Reply::Hello {
                protocol: PROTOCOL_VERSION,
                input_side,
                classes: CLASSES.iter().map(|c| c.to_string()).collect(),
            },
            Ok(Request::Classify { id, side, pixels }) => {
                let outcome = if side != input_side {
                    Err(format!("side {side} does not match input side {input_side}"))
                } else {
                    decode_pixels(&pixels, side)
                        .map_err(|e| e.to_string())
                        .and_then(|raster| classify(&raster, side))
                };
                match outcome {
                    Ok(confidence) => Reply::Result { id, confidence },
                    Err(message) => Reply::Error { id, message },
                }
            }
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|id| id.as_u64()))
                    .unwrap_or(0);
                Reply::Error { id, message: format!("malformed request: {e}") }
            }
        };
        write_line(&mut writer, &reply)?;
    }
    Ok(())
}
