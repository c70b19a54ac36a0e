//! CSV logs. Every file starts with a `# config_hash: <hex>` comment line
//! followed by a header row.
//!
//! - truth: `t,pn,pe,pd,vn,ve,vd,roll,pitch,yaw,qw,qx,qy,qz,wx,wy,wz,fx,fy,fz`
//! - navlog: `t`, the twelve output columns (`roll..gz`), the 24 states as
//!   `x_<name>` and their variances as `var_<name>`
//! - innovations: `t,sensor,accepted,nis,gate,nu0,nu1,nu2,s0,s1,s2`
//!   (unused components left empty)
//! - flow: `x,y,vx,vy` in pixels per frame

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ekf::{InnovationRecord, OutputVector, STATE_NAMES};
use crate::error::{Error, Result};
use crate::eval::TrackPoint;
use crate::fusion::NavRecord;
use crate::geom::{EulerAngles, Vec3};
use crate::optflow::FlowField;
use crate::sim::TruthSample;

const HASH_PREFIX: &str = "# config_hash: ";

/// SHA-256 of the canonical JSON encoding of a configuration.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn truth_header() -> Vec<String> {
    "t,pn,pe,pd,vn,ve,vd,roll,pitch,yaw,qw,qx,qy,qz,wx,wy,wz,fx,fy,fz"
        .split(',')
        .map(String::from)
        .collect()
}

pub fn navlog_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(OutputVector::NAMES.iter().map(|s| s.to_string()));
    h.extend(STATE_NAMES.iter().map(|s| format!("x_{s}")));
    h.extend(STATE_NAMES.iter().map(|s| format!("var_{s}")));
    h
}

fn truth_row(s: &TruthSample) -> Vec<f64> {
    let e = s.q.euler();
    let mut row = vec![s.t];
    row.extend(s.p.iter());
    row.extend(s.v.iter());
    row.extend([e.roll, e.pitch, e.yaw, s.q.q0, s.q.q1, s.q.q2, s.q.q3]);
    row.extend(s.rate.iter());
    row.extend(s.specific_force.iter());
    row
}

fn navlog_row(r: &NavRecord) -> Vec<f64> {
    let mut row = vec![r.t];
    row.extend(r.output.values());
    row.extend(r.state);
    row.extend(r.variance);
    row
}

fn write_rows(
    path: &Path,
    hash: &str,
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = BufWriter::new(file);
    writeln!(buf, "{HASH_PREFIX}{hash}").map_err(|e| Error::io(path, e))?;
    let mut out = csv::Writer::from_writer(buf);
    out.write_record(header).map_err(|e| Error::io(path, e))?;
    for row in rows {
        out.write_record(&row).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn fmt(values: Vec<f64>) -> Vec<String> {
    values.into_iter().map(|v| v.to_string()).collect()
}

pub fn write_truth_csv(path: impl AsRef<Path>, hash: &str, samples: &[TruthSample]) -> Result<()> {
    write_rows(
        path.as_ref(),
        hash,
        &truth_header(),
        samples.iter().map(|s| fmt(truth_row(s))),
    )
}

pub fn write_navlog_csv(path: impl AsRef<Path>, hash: &str, records: &[NavRecord]) -> Result<()> {
    write_rows(
        path.as_ref(),
        hash,
        &navlog_header(),
        records.iter().map(|r| fmt(navlog_row(r))),
    )
}

pub fn write_innovations_csv(
    path: impl AsRef<Path>,
    hash: &str,
    records: &[InnovationRecord],
) -> Result<()> {
    let header: Vec<String> = "t,sensor,accepted,nis,gate,nu0,nu1,nu2,s0,s1,s2"
        .split(',')
        .map(String::from)
        .collect();
    let rows = records.iter().map(|r| {
        let mut row = vec![
            r.timestamp.to_string(),
            r.sensor.name().to_string(),
            u8::from(r.accepted).to_string(),
            r.nis.to_string(),
            r.gate.to_string(),
        ];
        for values in [&r.innovation, &r.variance] {
            row.extend((0..3).map(|i| values.get(i).map_or(String::new(), |v| v.to_string())));
        }
        row
    });
    write_rows(path.as_ref(), hash, &header, rows)
}

pub fn write_flow_csv(path: impl AsRef<Path>, hash: &str, field: &FlowField) -> Result<()> {
    let header: Vec<String> = ["x", "y", "vx", "vy"].map(String::from).to_vec();
    let rows = (0..field.height).flat_map(move |y| {
        (0..field.width).map(move |x| {
            let v = field.get(x, y);
            vec![
                x.to_string(),
                y.to_string(),
                v.x.to_string(),
                v.y.to_string(),
            ]
        })
    });
    write_rows(path.as_ref(), hash, &header, rows)
}

/// A parsed numeric CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub config_hash: Option<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Reads a numeric CSV; `#` lines are comments (the config hash is
/// extracted). Errors name the file and 1-based line.
pub fn read_table(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config_hash = text
        .lines()
        .find_map(|l| l.strip_prefix(HASH_PREFIX))
        .map(|h| h.trim().to_string());
    let err = |line: u64, message: String| Error::Parse {
        source_name: source.clone(),
        line: line as usize,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| err(0, e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(err(0, "missing header row".into()));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|f| {
                if f.is_empty() {
                    Ok(f64::NAN)
                } else {
                    f.parse::<f64>()
                        .map_err(|_| err(line, format!("not a number: {f:?}")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table {
        config_hash,
        header,
        rows,
    })
}

/// Reads a truth or navlog CSV into track points.
pub fn read_track(path: impl AsRef<Path>) -> Result<(Vec<TrackPoint>, Option<String>)> {
    let path = path.as_ref();
    let table = read_table(path)?;
    let names = [
        "t", "pn", "pe", "pd", "vn", "ve", "vd", "roll", "pitch", "yaw",
    ];
    let mut cols = [0usize; 10];
    for (c, name) in cols.iter_mut().zip(names) {
        *c = table.column(name).ok_or_else(|| Error::Parse {
            source_name: path.display().to_string(),
            line: 0,
            message: format!("missing column {name:?}"),
        })?;
    }
    let points = table
        .rows
        .iter()
        .map(|r| {
            let g = |k: usize| r[cols[k]];
            TrackPoint {
                t: g(0),
                p: Vec3::new(g(1), g(2), g(3)),
                v: Vec3::new(g(4), g(5), g(6)),
                att: EulerAngles::new(g(7), g(8), g(9)),
            }
        })
        .collect();
    Ok((points, table.config_hash))
}
