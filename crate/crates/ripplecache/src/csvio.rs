//! CSV formats: placements, delivery traces, hit logs and results rows.

use std::io::{Read, Write};

use ripplecache_core::catalog::{BitrateRank, SegmentId};
use ripplecache_core::placement::Placement;
use ripplecache_core::sim::{HitEvent, TraceOutput};
use ripplecache_core::topology::NodeId;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: {msg}")]
    Invalid { row: usize, msg: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct PlacementRow {
    router_id: u32,
    f: u32,
    k: u32,
    b: u8,
}

/// One row per cached segment, `router_id,f,k,b`, bitrate ranks from 1.
pub fn write_placement<W: Write>(w: W, placement: &Placement) -> Result<(), CsvError> {
    let mut out = csv::Writer::from_writer(w);
    for (node, s) in placement.entries() {
        out.serialize(PlacementRow { router_id: node.0, f: s.file, k: s.segment, b: s.rank.get() })?;
    }
    // An empty placement still gets its header.
    if placement.len() == 0 {
        out.write_record(["router_id", "f", "k", "b"])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_placement<R: Read>(r: R) -> Result<Placement, CsvError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut p = Placement::new();
    for (i, row) in rdr.deserialize::<PlacementRow>().enumerate() {
        let row = row?;
        if row.b == 0 || row.f == 0 || row.k == 0 {
            return Err(CsvError::Invalid { row: i + 1, msg: "f, k and b count from 1".into() });
        }
        p.insert(NodeId(row.router_id), SegmentId::new(row.f, row.k, BitrateRank::new(row.b)));
    }
    Ok(p)
}

#[derive(Debug, Serialize)]
struct TraceRow {
    time: f64,
    consumer: u32,
    f: u32,
    k: u32,
    b: u8,
    hit_hop: usize,
    delay_s: f64,
    buffer_s: f64,
}

/// One row per delivered segment, ordered by delivery time.
pub fn write_trace<W: Write>(w: W, trace: &TraceOutput) -> Result<(), CsvError> {
    let mut rows: Vec<TraceRow> = trace
        .sessions
        .iter()
        .flat_map(|s| {
            s.records.iter().map(move |r| TraceRow {
                time: r.time,
                consumer: s.session.consumer.0,
                f: s.session.file,
                k: r.segment,
                b: r.rank.get(),
                hit_hop: r.hit_hop,
                delay_s: r.delay,
                buffer_s: r.buffer_after,
            })
        })
        .collect();
    rows.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.consumer.cmp(&b.consumer)));
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record(["time", "consumer", "f", "k", "b", "hit_hop", "delay_s", "buffer_s"])?;
    }
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct HitRow {
    time: f64,
    router_id: u32,
    f: u32,
    k: u32,
    b: u8,
    hit: bool,
}

pub fn write_hits<W: Write>(w: W, hits: &[HitEvent]) -> Result<(), CsvError> {
    let mut out = csv::Writer::from_writer(w);
    if hits.is_empty() {
        out.write_record(["time", "router_id", "f", "k", "b", "hit"])?;
    }
    for h in hits {
        out.serialize(HitRow {
            time: h.time,
            router_id: h.node.0,
            f: h.segment.file,
            k: h.segment.segment,
            b: h.segment.rank.get(),
            hit: h.hit,
        })?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes serializable rows with a header.
pub fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<(), CsvError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placement_round_trip() {
        let mut p = Placement::new();
        p.insert(NodeId(3), SegmentId::new(1, 2, BitrateRank::new(4)));
        p.insert(NodeId(1), SegmentId::new(7, 1, BitrateRank::new(1)));
        let mut buf = Vec::new();
        write_placement(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "router_id,f,k,b\n1,7,1,1\n3,1,2,4\n");
        assert_eq!(read_placement(&buf[..]).unwrap(), p);
    }

    #[test]
    fn empty_placement_has_header() {
        let mut buf = Vec::new();
        write_placement(&mut buf, &Placement::new()).unwrap();
        assert_eq!(buf, b"router_id,f,k,b\n");
        assert_eq!(read_placement(&buf[..]).unwrap(), Placement::new());
    }

    #[test]
    fn rejects_zero_rank() {
        let e = read_placement(&b"router_id,f,k,b\n1,1,1,0\n"[..]).unwrap_err();
        assert!(matches!(e, CsvError::Invalid { row: 1, .. }));
        assert!(read_placement(&b"router_id,f,k,b\n1,x,1,1\n"[..]).is_err());
    }
}
