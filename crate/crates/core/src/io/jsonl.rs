use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::SensorSample;

/// Writes one JSON object per line.
pub fn write_samples<W: Write>(mut out: W, samples: &[SensorSample]) -> Result<()> {
    for s in samples {
        let line = serde_json::to_string(s).map_err(|e| Error::InvalidInput(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io("sensor stream", e))?;
    }
    Ok(())
}

/// Parses a JSON-lines sensor stream; errors carry the 1-based line number.
/// Blank lines are skipped.
pub fn parse_samples<R: BufRead>(input: R, source: &str) -> Result<Vec<SensorSample>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let parse_error = |message: String| Error::Parse {
            source_name: source.to_string(),
            line: i + 1,
            message,
        };
        let line = line.map_err(|e| parse_error(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: SensorSample =
            serde_json::from_str(&line).map_err(|e| parse_error(e.to_string()))?;
        if !sample.is_finite() {
            return Err(parse_error("non-finite value".into()));
        }
        out.push(sample);
    }
    Ok(out)
}

pub fn write_samples_file(path: impl AsRef<Path>, samples: &[SensorSample]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_samples(&mut out, samples)?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_samples_file(path: impl AsRef<Path>) -> Result<Vec<SensorSample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_samples(BufReader::new(file), &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<SensorSample> {
        vec![
            SensorSample::Imu {
                t: 0.01,
                values: [1e-4, -2e-4, 0.0, 0.0, 0.0, -0.0980665],
                dt: 0.01,
            },
            SensorSample::Baro {
                t: 0.05,
                values: [10.25],
            },
            SensorSample::Camera { t: 0.07, frame: 1 },
        ]
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_samples(&mut buf, &samples()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(
            text.contains(r#"{"kind":"camera","t":0.07,"frame":1}"#),
            "{text}"
        );
        assert_eq!(parse_samples(&buf[..], "mem").unwrap(), samples());
    }

    #[test]
    fn corrupted_line_is_reported() {
        let text = "{\"kind\":\"baro\",\"t\":0.0,\"values\":[1.0]}\n\n{\"kind\":\"baro\",\"t\":0.1,\"values\":[1.0\n";
        match parse_samples(text.as_bytes(), "sensors.jsonl").unwrap_err() {
            Error::Parse {
                source_name, line, ..
            } => {
                assert_eq!(source_name, "sensors.jsonl");
                assert_eq!(line, 3);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let text = "{\"kind\":\"lidar\",\"t\":0.0,\"values\":[1.0]}\n";
        assert!(parse_samples(text.as_bytes(), "x").is_err());
    }
}
