//! DIMACS max-flow problem files.
//!
//! ```text
//! p max <nodes> <arcs>
//! n <id> s
//! n <id> t
//! a <from> <to> <capacity>
//! ```
//!
//! Ids are 1-based. The writer emits exactly these lines; the reader also
//! accepts `c` comment lines and blank lines.

use std::fmt::Write as _;

use super::flow::FlowNetwork;
use super::transform::{in_vertex, out_vertex, TransformedGraph};
use crate::error::{GraphError, ParseError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimacsProblem {
    pub nodes: usize,
    /// Zero-based.
    pub source: usize,
    pub sink: usize,
    /// Zero-based `(from, to, capacity)`.
    pub arcs: Vec<(u32, u32, u32)>,
}

impl DimacsProblem {
    pub fn from_network(net: &FlowNetwork, source: usize, sink: usize) -> DimacsProblem {
        DimacsProblem { nodes: net.vertex_count(), source, sink, arcs: net.arcs().collect() }
    }

    /// The flow problem for the pair `(v, w)` of a transformed graph.
    pub fn for_pair(t: &TransformedGraph, v: usize, w: usize) -> DimacsProblem {
        DimacsProblem::from_network(t.network(), out_vertex(v), in_vertex(w))
    }

    pub fn network(&self) -> FlowNetwork {
        FlowNetwork::from_arcs(self.nodes, self.arcs.iter().copied())
    }

    pub fn max_flow(&self) -> Result<u32, GraphError> {
        self.network().max_flow(self.source, self.sink)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(32 + self.arcs.len() * 16);
        writeln!(out, "p max {} {}", self.nodes, self.arcs.len()).unwrap();
        writeln!(out, "n {} s", self.source + 1).unwrap();
        writeln!(out, "n {} t", self.sink + 1).unwrap();
        for &(u, v, c) in &self.arcs {
            writeln!(out, "a {} {} {}", u + 1, v + 1, c).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<DimacsProblem, ParseError> {
        let mut header: Option<(usize, usize)> = None;
        let mut source = None;
        let mut sink = None;
        let mut arcs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |m: String| ParseError::new(line_no, m);
            let fields: Vec<&str> = line.split_whitespace().collect();
            let Some(&kind) = fields.first() else { continue };
            let number = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad number `{s}`")));
            match kind {
                "c" => {}
                "p" => {
                    if header.is_some() {
                        return Err(err("second problem line".into()));
                    }
                    if fields.len() != 4 || fields[1] != "max" {
                        return Err(err("expected `p max <nodes> <arcs>`".into()));
                    }
                    header = Some((number(fields[2])?, number(fields[3])?));
                }
                "n" | "a" => {
                    let (nodes, _) = header.ok_or_else(|| err("descriptor before problem line".into()))?;
                    let node = |s: &str| -> Result<u32, ParseError> {
                        let id = number(s)?;
                        if id == 0 || id > nodes {
                            return Err(err(format!("node {id} outside 1..={nodes}")));
                        }
                        Ok((id - 1) as u32)
                    };
                    if kind == "n" {
                        if fields.len() != 3 {
                            return Err(err("expected `n <id> s|t`".into()));
                        }
                        let id = node(fields[1])? as usize;
                        let slot = match fields[2] {
                            "s" => &mut source,
                            "t" => &mut sink,
                            other => return Err(err(format!("unknown node role `{other}`"))),
                        };
                        if slot.replace(id).is_some() {
                            return Err(err(format!("second `{}` node", fields[2])));
                        }
                    } else {
                        if fields.len() != 4 {
                            return Err(err("expected `a <from> <to> <capacity>`".into()));
                        }
                        let cap = u32::try_from(number(fields[3])?).map_err(|_| err("capacity too large".into()))?;
                        arcs.push((node(fields[1])?, node(fields[2])?, cap));
                    }
                }
                other => return Err(err(format!("unknown line type `{other}`"))),
            }
        }
        let last = text.lines().count().max(1);
        let (nodes, arc_count) = header.ok_or_else(|| ParseError::new(last, "missing problem line"))?;
        if arcs.len() != arc_count {
            return Err(ParseError::new(last, format!("problem line promises {arc_count} arcs, found {}", arcs.len())));
        }
        let source = source.ok_or_else(|| ParseError::new(last, "missing source node"))?;
        let sink = sink.ok_or_else(|| ParseError::new(last, "missing sink node"))?;
        if source == sink {
            return Err(ParseError::new(last, "source and sink coincide"));
        }
        Ok(DimacsProblem { nodes, source, sink, arcs })
    }
}
