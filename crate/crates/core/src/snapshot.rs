//! Frozen routing-table contents and their line-oriented file format.
//!
//! ```text
//! SNAPSHOT t=120 b=160 n=3
//! <hex-id>: <hex-id>,<hex-id>
//! <hex-id>: <hex-id>
//! <hex-id>:
//! ```
//!
//! Node lines and contact lists are sorted ascending by id. A node with no
//! contacts is written as `<hex-id>:` with nothing after the colon.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::error::ParseError;
use crate::id::NodeId;
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub at: SimTime,
    pub bits: u32,
    /// Alive node -> contact ids, each list sorted and free of the key itself.
    pub entries: BTreeMap<NodeId, Vec<NodeId>>,
    /// Scenario tag of the producing run; not part of the file format.
    pub config_echo: String,
}

impl Snapshot {
    pub fn new(at: SimTime, bits: u32) -> Snapshot {
        Snapshot { at, bits, entries: BTreeMap::new(), config_echo: String::new() }
    }

    pub fn node_count(&self) -> usize {
        self.entries.len()
    }

    pub fn contact_count(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn to_text(&self) -> String {
        let hex_len = self.bits.div_ceil(4) as usize;
        let mut out = String::with_capacity(64 + self.entries.len() * (hex_len + 2) + self.contact_count() * (hex_len + 1));
        writeln!(out, "SNAPSHOT t={} b={} n={}", self.at, self.bits, self.entries.len()).unwrap();
        for (id, contacts) in &self.entries {
            out.push_str(&id.to_hex());
            out.push(':');
            for (i, c) in contacts.iter().enumerate() {
                out.push(if i == 0 { ' ' } else { ',' });
                out.push_str(&c.to_hex());
            }
            out.push('\n');
        }
        out
    }

    pub fn write_file(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_text())
    }

    pub fn read_file(path: &Path) -> Result<Snapshot, SnapshotFileError> {
        let text = std::fs::read_to_string(path).map_err(SnapshotFileError::Io)?;
        Snapshot::parse(&text).map_err(SnapshotFileError::Parse)
    }

    pub fn parse(text: &str) -> Result<Snapshot, ParseError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| ParseError::new(1, "empty snapshot"))?;
        let (at, bits, n) = parse_header(header)?;
        let mut entries = BTreeMap::new();
        for (line_no, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (key, rest) = line
                .split_once(':')
                .ok_or_else(|| ParseError::new(line_no, "expected `<id>: <id>,...`"))?;
            let id = NodeId::from_hex(key, bits).map_err(|e| ParseError::new(line_no, e.to_string()))?;
            let rest = rest.strip_prefix(' ').unwrap_or(rest);
            let mut contacts = Vec::new();
            if !rest.is_empty() {
                for part in rest.split(',') {
                    let c = NodeId::from_hex(part, bits).map_err(|e| ParseError::new(line_no, e.to_string()))?;
                    if c == id {
                        return Err(ParseError::new(line_no, format!("{id} lists itself")));
                    }
                    contacts.push(c);
                }
            }
            contacts.sort();
            if contacts.windows(2).any(|w| w[0] == w[1]) {
                return Err(ParseError::new(line_no, format!("{id} lists a contact twice")));
            }
            if entries.insert(id, contacts).is_some() {
                return Err(ParseError::new(line_no, format!("duplicate node {id}")));
            }
        }
        if entries.len() != n {
            return Err(ParseError::new(1, format!("header says n={n} but {} nodes listed", entries.len())));
        }
        Ok(Snapshot { at, bits, entries, config_echo: String::new() })
    }
}

fn parse_header(line: &str) -> Result<(SimTime, u32, usize), ParseError> {
    let err = |m: &str| ParseError::new(1, m.to_string());
    let mut parts = line.split(' ');
    if parts.next() != Some("SNAPSHOT") {
        return Err(err("expected `SNAPSHOT t=<minutes> b=<bits> n=<count>`"));
    }
    let mut field = |name: &str| -> Result<String, ParseError> {
        parts
            .next()
            .and_then(|p| p.strip_prefix(name))
            .and_then(|p| p.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| err(&format!("missing {name}= field")))
    };
    let t: f64 = field("t")?.parse().map_err(|_| err("bad t value"))?;
    let b: u32 = field("b")?.parse().map_err(|_| err("bad b value"))?;
    let n: usize = field("n")?.parse().map_err(|_| err("bad n value"))?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(err("t must be a non-negative number"));
    }
    if b == 0 || b > crate::id::MAX_BITS {
        return Err(err("b out of range"));
    }
    Ok((SimTime::from_minutes_f64(t), b, n))
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotFileError {
    #[error(transparent)]
    Io(io::Error),
    #[error("snapshot {0}")]
    Parse(ParseError),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(v: u64) -> NodeId {
        NodeId::from_u64(v, 8).unwrap()
    }

    fn sample() -> Snapshot {
        let mut s = Snapshot::new(SimTime::from_minutes(120), 8);
        s.entries.insert(id(1), vec![id(2), id(0xab)]);
        s.entries.insert(id(2), vec![id(1)]);
        s.entries.insert(id(0xab), vec![]);
        s
    }

    #[test]
    fn text_layout_is_exact() {
        assert_eq!(sample().to_text(), "SNAPSHOT t=120 b=8 n=3\n01: 02,ab\n02: 01\nab:\n");
    }

    #[test]
    fn parse_inverts_to_text() {
        let s = sample();
        assert_eq!(Snapshot::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn fractional_time_survives() {
        let mut s = sample();
        s.at = SimTime::from_minutes_f64(12.5);
        assert!(s.to_text().starts_with("SNAPSHOT t=12.5 "));
        assert_eq!(Snapshot::parse(&s.to_text()).unwrap().at, s.at);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let cases = [
            ("SNAPSHOT t=1 b=8 n=1\n01 02\n", 2),
            ("SNAPSHOT t=1 b=8 n=1\n01: 01\n", 2),
            ("SNAPSHOT t=1 b=8 n=1\n01: 02,02\n", 2),
            ("SNAPSHOT t=1 b=8 n=2\n01: 02\n01: 03\n", 3),
            ("SNAPSHOT t=1 b=8 n=1\n01: 2\n", 2),
            ("SNAPSHOT t=1 b=8 n=2\n01:\n", 1),
            ("SNAP t=1 b=8 n=0\n", 1),
        ];
        for (text, line) in cases {
            let err = Snapshot::parse(text).unwrap_err();
            assert_eq!(err.line, line, "{text:?}: {err}");
        }
    }
}
