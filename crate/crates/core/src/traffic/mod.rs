//! Deterministic packet sources: constant bit rate, framed video, and paced
//! replay of telemetry-schema traces.

mod iot;
pub mod tracefile;

use thiserror::Error;

use crate::model::{FlowKey, ModelError, Packet, SimTime};
use crate::switch::{serialization_delay_us, TraceRow};

pub use iot::{gen_synthetic_iot_trace, ClassProfile, IotProfiles, SyntheticTrace};
pub use tracefile::{read_trace, write_trace, TraceFile};

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("trace rows are not sorted by timestamp (row {0})")]
    UnsortedTrace(usize),
    #[error("destination port {port} is claimed by both {first} and {second}")]
    OverlappingPortSets {
        port: u16,
        first: String,
        second: String,
    },
    #[error("invalid traffic profile: {0}")]
    InvalidProfile(String),
    #[error("trace schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("line {line}: bad value `{value}` in column {column}")]
    BadValue {
        line: usize,
        column: &'static str,
        value: String,
    },
    #[error(transparent)]
    Field(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CbrSpec {
    pub key: FlowKey,
    pub rate_bps: u64,
    pub packet_size_bytes: u32,
    pub start: SimTime,
    pub duration_us: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoSpec {
    pub key: FlowKey,
    pub fps: u32,
    pub packets_per_frame: u32,
    pub packet_size_bytes: u32,
    pub start: SimTime,
    pub duration_us: u64,
}

impl VideoSpec {
    pub fn frame_period_us(&self) -> f64 {
        1e6 / f64::from(self.fps)
    }

    /// Offset of frame `k` from the stream start, floored to whole µs.
    pub fn frame_offset_us(&self, k: u64) -> u64 {
        k * 1_000_000 / u64::from(self.fps)
    }
}

/// Constant-bit-rate source. Departure `i` is at `start + floor(i·size·8·10⁶ / rate)`
/// so the schedule does not drift.
pub fn gen_cbr(spec: &CbrSpec) -> Result<Vec<Packet>, TrafficError> {
    if spec.rate_bps == 0 || spec.packet_size_bytes == 0 {
        return Err(TrafficError::InvalidProfile(
            "CBR rate and packet size must be positive".into(),
        ));
    }
    let bits_us = u128::from(spec.packet_size_bytes) * 8 * 1_000_000;
    let mut packets = Vec::new();
    for i in 0u64.. {
        let offset = (u128::from(i) * bits_us / u128::from(spec.rate_bps)) as u64;
        if offset >= spec.duration_us {
            break;
        }
        let mut p = Packet::new(
            spec.key,
            spec.packet_size_bytes,
            spec.start.add_micros(offset)?,
        )?;
        p.packet_seq = i;
        packets.push(p);
    }
    Ok(packets)
}

/// Framed video source: every frame period, `packets_per_frame` packets with
/// a shared `frame_seq` are emitted back to back.
pub fn gen_video(spec: &VideoSpec) -> Result<Vec<Packet>, TrafficError> {
    if spec.fps == 0 || spec.packets_per_frame == 0 {
        return Err(TrafficError::InvalidProfile(
            "video fps and packets per frame must be positive".into(),
        ));
    }
    let mut packets = Vec::new();
    let mut seq = 0;
    for frame in 0u64.. {
        let offset = spec.frame_offset_us(frame);
        if offset >= spec.duration_us {
            break;
        }
        let at = spec.start.add_micros(offset)?;
        let frame_seq = u32::try_from(frame)
            .map_err(|_| TrafficError::InvalidProfile("too many frames".into()))?;
        for _ in 0..spec.packets_per_frame {
            let mut p = Packet::new(spec.key, spec.packet_size_bytes, at)?.with_frame(frame_seq);
            p.packet_seq = seq;
            seq += 1;
            packets.push(p);
        }
    }
    Ok(packets)
}

/// Turns trace rows into packets, pacing them so the offered load never
/// exceeds `link_rate_bps`: each packet leaves at the later of its own
/// timestamp and the end of the previous packet's serialization.
pub fn replay_trace(rows: &[TraceRow], link_rate_bps: u64) -> Result<Vec<Packet>, TrafficError> {
    if link_rate_bps == 0 {
        return Err(TrafficError::InvalidProfile("link rate must be positive".into()));
    }
    if let Some(i) = rows
        .windows(2)
        .position(|w| w[1].timestamp_us < w[0].timestamp_us)
    {
        return Err(TrafficError::UnsortedTrace(i + 1));
    }
    let mut packets = Vec::with_capacity(rows.len());
    let mut earliest_next = 0u64;
    for (i, row) in rows.iter().enumerate() {
        let depart = row.timestamp_us.max(earliest_next);
        earliest_next = depart
            .checked_add(serialization_delay_us(row.size_bytes, link_rate_bps))
            .ok_or(ModelError::TimeOverflow(depart, 0))?;
        let mut p = Packet::new(row.key(), row.size_bytes, SimTime::from_micros(depart))?
            .with_ingress_port(row.ingress_port)?;
        p.packet_seq = i as u64;
        packets.push(p);
    }
    Ok(packets)
}

/// Merges per-source streams into one stream ordered by creation time,
/// ties broken by source index then per-source sequence. `packet_seq` is
/// rewritten to the global emission order.
pub fn merge_streams(sources: Vec<Vec<Packet>>) -> Vec<(usize, Packet)> {
    let mut all: Vec<(usize, Packet)> = sources
        .into_iter()
        .enumerate()
        .flat_map(|(src, packets)| packets.into_iter().map(move |p| (src, p)))
        .collect();
    all.sort_by_key(|(src, p)| (p.created_at, *src, p.packet_seq));
    for (i, (_, p)) in all.iter_mut().enumerate() {
        p.packet_seq = i as u64;
    }
    all
}
