//! Line-oriented topology files.
//!
//! ```text
//! # comment
//! node <id> <producer|edge|intermediate> <cache_bytes>
//! link <a> <b> <bandwidth_bps> <delay_s>
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ripplecache_core::topology::{build_topology, Link, Node, NodeId, Topology, TopologyError, TopologySpec};

#[derive(Debug, thiserror::Error)]
pub enum TopologyFileError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

fn field<T: std::str::FromStr>(tok: Option<&str>, what: &str, line: usize) -> Result<T, TopologyFileError> {
    let tok = tok.ok_or_else(|| TopologyFileError::Syntax { line, msg: format!("missing {what}") })?;
    tok.parse().map_err(|_| TopologyFileError::Syntax { line, msg: format!("bad {what} `{tok}`") })
}

pub fn parse_topology(text: &str) -> Result<Topology, TopologyFileError> {
    let mut spec = TopologySpec::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut toks = body.split_whitespace();
        match toks.next() {
            Some("node") => spec.nodes.push(Node {
                id: NodeId(field(toks.next(), "node id", line)?),
                role: field(toks.next(), "role", line)?,
                cache_capacity: field(toks.next(), "cache bytes", line)?,
            }),
            Some("link") => spec.links.push(Link {
                a: NodeId(field(toks.next(), "endpoint", line)?),
                b: NodeId(field(toks.next(), "endpoint", line)?),
                bandwidth: field(toks.next(), "bandwidth", line)?,
                delay: field(toks.next(), "delay", line)?,
            }),
            Some(other) => {
                return Err(TopologyFileError::Syntax { line, msg: format!("unknown record `{other}`") });
            }
            None => unreachable!("blank lines are skipped"),
        }
        if let Some(extra) = toks.next() {
            return Err(TopologyFileError::Syntax { line, msg: format!("unexpected `{extra}`") });
        }
    }
    Ok(build_topology(spec)?)
}

pub fn read_topology_file(path: &Path) -> Result<Topology, TopologyFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| TopologyFileError::Io { path: path.into(), source })?;
    parse_topology(&text)
}

pub fn format_topology(topo: &Topology) -> String {
    let mut out = String::new();
    for n in topo.nodes() {
        writeln!(out, "node {} {} {}", n.id, n.role.as_str(), n.cache_capacity).unwrap();
    }
    for l in topo.links() {
        writeln!(out, "link {} {} {} {}", l.a, l.b, l.bandwidth, l.delay).unwrap();
    }
    out
}
