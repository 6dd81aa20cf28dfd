//! CSV dumps of placement-engine state for debugging.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use ripplecache_core::classic::IterationReport;
use ripplecache_core::finder::FinderReport;
use serde::Serialize;

use crate::csvio::{write_rows, CsvError};

#[derive(Debug, thiserror::Error)]
pub enum DumpError {
    #[error("writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] CsvError),
}

fn dump<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<(), DumpError> {
    let path = dir.join(name);
    let io = |source| DumpError::Io { path: path.display().to_string(), source };
    let f = File::create(&path).map_err(io)?;
    write_rows(BufWriter::new(f), rows)?;
    Ok(())
}

#[derive(Serialize)]
struct TableRow {
    edge: u32,
    producer: u32,
    b: u8,
    position: usize,
    f: u32,
    k: u32,
    utility: f64,
}

#[derive(Serialize)]
struct StackRow {
    edge: u32,
    producer: u32,
    b: u8,
    depth: usize,
    f: u32,
    k: u32,
    utility: f64,
    complete: bool,
}

#[derive(Serialize)]
struct CctRow {
    edge: u32,
    producer: u32,
    hop: usize,
    router_id: u32,
    f: u32,
    k: u32,
    b: u8,
    utility: f64,
}

#[derive(Serialize)]
struct VolumeRow {
    iteration: usize,
    edge: u32,
    producer: u32,
    hop: usize,
    router_id: u32,
    volume_bytes: u64,
}

/// Writes `ranking_tables.csv`, `stacks.csv`, `ccts.csv` and `volumes.csv`.
pub fn dump_finder(dir: &Path, report: &FinderReport) -> Result<(), DumpError> {
    let (mut tables, mut stacks, mut ccts, mut volumes) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for p in &report.paths {
        let edge = p.nodes[0].0;
        let producer = p.nodes[p.nodes.len() - 1].0;
        for (ri, t) in p.tables.iter().enumerate() {
            for (position, e) in t.iter().enumerate() {
                let (f, k) = (e.segment.file, e.segment.segment);
                tables.push(TableRow { edge, producer, b: ri as u8 + 1, position, f, k, utility: e.utility });
            }
        }
        for (ri, st) in p.stacks.stacks.iter().enumerate() {
            let complete = p.stacks.complete.get(ri).copied().unwrap_or(false);
            for (depth, e) in st.iter().enumerate() {
                let (f, k, utility) = (e.segment.file, e.segment.segment, e.utility);
                stacks.push(StackRow { edge, producer, b: ri as u8 + 1, depth, f, k, utility, complete });
            }
        }
        for (j, cct) in p.ccts.iter().enumerate() {
            for e in cct {
                ccts.push(CctRow {
                    edge,
                    producer,
                    hop: j + 1,
                    router_id: p.nodes[j].0,
                    f: e.segment.file,
                    k: e.segment.segment,
                    b: e.segment.rank.get(),
                    utility: e.utility,
                });
            }
        }
    }
    for (iteration, round) in report.history.iter().enumerate() {
        for (p, cap) in report.paths.iter().zip(round) {
            for (j, &v) in cap.per_hop.iter().enumerate() {
                volumes.push(VolumeRow {
                    iteration,
                    edge: p.nodes[0].0,
                    producer: p.nodes[p.nodes.len() - 1].0,
                    hop: j + 1,
                    router_id: p.nodes[j].0,
                    volume_bytes: v,
                });
            }
        }
    }
    dump(dir, "ranking_tables.csv", &tables)?;
    dump(dir, "stacks.csv", &stacks)?;
    dump(dir, "ccts.csv", &ccts)?;
    dump(dir, "volumes.csv", &volumes)
}

#[derive(Serialize)]
struct RippleRow {
    edge: u32,
    hop: usize,
    /// Empty when no rank meets the deadline.
    ripple_rank: Option<u8>,
}

#[derive(Serialize)]
struct ObjectiveRow {
    solve: usize,
    objective: f64,
}

/// Writes `ripple_bitrates.csv` and `objectives.csv`.
pub fn dump_classic(dir: &Path, report: &IterationReport) -> Result<(), DumpError> {
    let ripple: Vec<RippleRow> = report
        .ripple_bitrates
        .entries()
        .map(|((edge, hop), rb)| RippleRow { edge: edge.0, hop, ripple_rank: rb.map(|r| r.get()) })
        .collect();
    let objectives: Vec<ObjectiveRow> =
        report.objectives.iter().enumerate().map(|(i, &objective)| ObjectiveRow { solve: i + 1, objective }).collect();
    dump(dir, "ripple_bitrates.csv", &ripple)?;
    dump(dir, "objectives.csv", &objectives)
}
