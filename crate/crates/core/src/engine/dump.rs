//! Line-delimited geometry dump.
//!
//! The first line is `# ` followed by a JSON header (seed, rules, window,
//! time). Every following line is one segment record
//! `px py qx qy birth_time`, each value in scientific notation with 17
//! significant digits so the text round-trips to the same `f64`.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Segment};

use super::TimedSegment;

pub const FORMAT_NAME: &str = "celldiv-dump";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DumpError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("dump header: {0}")]
    Header(String),
    #[error("line {line}: {msg}")]
    Record { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpHeader {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub time: f64,
    pub window: Vec<[f64; 2]>,
    pub rules: serde_json::Value,
}

impl DumpHeader {
    pub fn new(seed: u64, time: f64, window: &crate::geometry::Polygon, rules: serde_json::Value) -> Self {
        DumpHeader {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            seed,
            time,
            window: window.vertices().iter().map(|p| [p.x, p.y]).collect(),
            rules,
        }
    }
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_dump<W: Write>(
    mut out: W,
    header: &DumpHeader,
    segments: &[TimedSegment],
) -> Result<(), DumpError> {
    let json = serde_json::to_string(header).map_err(|e| DumpError::Header(e.to_string()))?;
    writeln!(out, "# {json}")?;
    for s in segments {
        let Segment { p, q } = s.segment;
        writeln!(
            out,
            "{} {} {} {} {}",
            fmt17(p.x),
            fmt17(p.y),
            fmt17(q.x),
            fmt17(q.y),
            fmt17(s.birth_time)
        )?;
    }
    Ok(())
}

pub fn read_dump<R: BufRead>(input: R) -> Result<(DumpHeader, Vec<TimedSegment>), DumpError> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| DumpError::Header("empty dump".into()))??;
    let json = first
        .strip_prefix("# ")
        .ok_or_else(|| DumpError::Header("missing '# ' header line".into()))?;
    let header: DumpHeader =
        serde_json::from_str(json).map_err(|e| DumpError::Header(e.to_string()))?;
    if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
        return Err(DumpError::Header(format!(
            "unsupported format {} v{}",
            header.format, header.version
        )));
    }
    let mut segments = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| DumpError::Record {
                line: lineno,
                msg: e.to_string(),
            })?;
        let [px, py, qx, qy, birth] = vals[..] else {
            return Err(DumpError::Record {
                line: lineno,
                msg: format!("expected 5 fields, found {}", vals.len()),
            });
        };
        let segment = Segment::new(Point::new(px, py), Point::new(qx, qy)).map_err(|e| {
            DumpError::Record {
                line: lineno,
                msg: e.to_string(),
            }
        })?;
        segments.push(TimedSegment {
            segment,
            birth_time: birth,
        });
    }
    Ok((header, segments))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn records_round_trip(
            coords in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6, -1e6f64..1e6, -1e6f64..1e6, 0.0f64..1e3), 0..20)
        ) {
            let segs: Vec<TimedSegment> = coords
                .iter()
                .filter_map(|&(a, b, c, d, t)| {
                    Segment::new(Point::new(a, b), Point::new(c, d))
                        .ok()
                        .map(|segment| TimedSegment { segment, birth_time: t })
                })
                .collect();
            let w = Polygon::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
            let header = DumpHeader::new(9, 2.5, &w, serde_json::json!({"selection": "x"}));
            let mut buf = Vec::new();
            write_dump(&mut buf, &header, &segs).unwrap();
            let (h2, s2) = read_dump(&buf[..]).unwrap();
            prop_assert_eq!(h2, header);
            prop_assert_eq!(s2, segs);
        }
    }

    #[test]
    fn rejects_malformed_records() {
        let w = Polygon::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        let header = DumpHeader::new(1, 1.0, &w, serde_json::Value::Null);
        let mut buf = Vec::new();
        write_dump(&mut buf, &header, &[]).unwrap();
        buf.extend_from_slice(b"1 2 3\n");
        assert!(matches!(read_dump(&buf[..]), Err(DumpError::Record { line: 2, .. })));
        assert!(matches!(read_dump(&b"px py\n"[..]), Err(DumpError::Header(_))));
    }
}
