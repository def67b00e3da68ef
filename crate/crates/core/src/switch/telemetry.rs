use serde::{Deserialize, Serialize};

use crate::model::{check_width, ClassLabel, FlowKey, ModelError, SimTime};

use super::queue::Dequeued;

/// Bit widths of the ten telemetry features, in column order.
pub const FEATURE_WIDTHS: [(&str, u32); 10] = [
    ("ingress_port", 9),
    ("flow_interval_time", 48),
    ("enq_qdepth", 19),
    ("deq_qdepth", 19),
    ("deq_timedelta", 32),
    ("protocol", 8),
    ("src_port", 16),
    ("dst_port", 16),
    ("src_ip", 32),
    ("dst_ip", 32),
];

/// Per-packet record captured at switch egress.
///
/// `timestamp_us` and `size_bytes` are bookkeeping carried alongside the ten
/// features so the same row type serves as a replayable trace row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub ingress_port: u16,
    /// Egress timestamp minus ingress timestamp, µs.
    pub flow_interval_time: u64,
    pub enq_qdepth: u32,
    pub deq_qdepth: u32,
    /// Time spent in the queue, µs.
    pub deq_timedelta: u32,
    pub protocol: u8,
    pub src_port: u16,
    pub dst_port: u16,
    pub src_ip: u32,
    pub dst_ip: u32,
    pub timestamp_us: u64,
    pub size_bytes: u32,
    pub label: Option<ClassLabel>,
}

/// Trace rows share the telemetry schema.
pub type TraceRow = TelemetryRecord;

impl TelemetryRecord {
    pub fn key(&self) -> FlowKey {
        FlowKey::new(
            self.src_ip,
            self.dst_ip,
            self.src_port,
            self.dst_port,
            self.protocol,
        )
    }

    /// The ten features as raw integers, in column order.
    pub fn feature_values(&self) -> [u64; 10] {
        [
            self.ingress_port.into(),
            self.flow_interval_time,
            self.enq_qdepth.into(),
            self.deq_qdepth.into(),
            self.deq_timedelta.into(),
            self.protocol.into(),
            self.src_port.into(),
            self.dst_port.into(),
            self.src_ip.into(),
            self.dst_ip.into(),
        ]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for ((field, bits), value) in FEATURE_WIDTHS.iter().zip(self.feature_values()) {
            check_width(field, value, *bits)?;
        }
        if self.size_bytes == 0 {
            return Err(ModelError::EmptyPacket);
        }
        Ok(())
    }

    pub fn with_label(mut self, label: ClassLabel) -> Self {
        self.label = Some(label);
        self
    }
}

/// Builds the egress telemetry record for a packet leaving its queue at `now`.
pub fn stamp_telemetry(out: &Dequeued, now: SimTime) -> Result<TelemetryRecord, ModelError> {
    let packet = &out.item.packet;
    let flow_interval_time = now.since(out.item.ingress_at)?;
    let deq_timedelta = now.since(out.enq_at)?;
    check_width("deq_timedelta", deq_timedelta, 32)?;
    let record = TelemetryRecord {
        ingress_port: packet.ingress_port,
        flow_interval_time,
        enq_qdepth: out.enq_qdepth,
        deq_qdepth: out.deq_qdepth,
        deq_timedelta: deq_timedelta as u32,
        protocol: packet.key.protocol,
        src_port: packet.key.src_port,
        dst_port: packet.key.dst_port,
        src_ip: packet.key.src_ip,
        dst_ip: packet.key.dst_ip,
        timestamp_us: now.as_micros(),
        size_bytes: packet.size_bytes,
        label: None,
    };
    record.validate()?;
    Ok(record)
}
