use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::optflow::ImageFrame;

fn bad(source: &str, message: impl Into<String>) -> Error {
    Error::InvalidInput(format!("{source}: not a binary PGM: {}", message.into()))
}

/// Parses a binary (P5) PGM with max value at most 255; intensities are
/// scaled to [0, 1]. The frame timestamp is set to `timestamp`.
pub fn decode_pgm(bytes: &[u8], source: &str, timestamp: f64) -> Result<ImageFrame> {
    let mut pos = 0;
    let mut token = || -> Option<String> {
        // whitespace and '#' comments separate header tokens
        loop {
            match bytes.get(pos)? {
                b'#' => {
                    while *bytes.get(pos)? != b'\n' {
                        pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|c| !c.is_ascii_whitespace()) {
            pos += 1;
        }
        Some(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token().as_deref() != Some("P5") {
        return Err(bad(source, "missing P5 magic"));
    }
    let mut number = |what: &str| -> Result<usize> {
        token()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(source, format!("invalid {what}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("max value")?;
    if maxval == 0 || maxval > 255 {
        return Err(bad(
            source,
            format!("max value {maxval} is not an 8-bit range"),
        ));
    }
    // exactly one whitespace byte ends the header
    let start = pos + 1;
    let n = width * height;
    if bytes.len() < start + n {
        return Err(bad(
            source,
            format!(
                "expected {n} pixels, found {}",
                bytes.len().saturating_sub(start)
            ),
        ));
    }
    let scale = maxval as f64;
    let data = bytes[start..start + n]
        .iter()
        .map(|&b| (b as f64 / scale).min(1.0))
        .collect();
    ImageFrame::new(width, height, data, timestamp)
        .map_err(|e| Error::InvalidInput(format!("{source}: {e}")))
}

/// Encodes a frame as an 8-bit P5 PGM (values rounded to 0..=255).
pub fn encode_pgm(frame: &ImageFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(
        frame
            .data()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

pub fn read_pgm(path: impl AsRef<Path>, timestamp: f64) -> Result<ImageFrame> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, &path.display().to_string(), timestamp)
}

pub fn write_pgm(path: impl AsRef<Path>, frame: &ImageFrame) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(frame)).map_err(|e| Error::io(path, e))
}
