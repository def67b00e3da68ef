//! Shared domain types: simulated time, flow identity, packets, priorities
//! and the IoT class labels.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("simulated time overflow ({0} + {1} µs)")]
    TimeOverflow(u64, u64),
    #[error("simulated time went backwards ({later} < {earlier})")]
    TimeUnderflow { later: u64, earlier: u64 },
    #[error("{field} value {value} does not fit in {bits} bits")]
    FieldOverflow {
        field: &'static str,
        value: u64,
        bits: u32,
    },
    #[error("packet size must be at least one byte")]
    EmptyPacket,
    #[error("unknown class label `{0}`")]
    UnknownClass(String),
    #[error("invalid flow key `{0}`")]
    InvalidFlowKey(String),
}

/// Checks that `value` fits in an unsigned field of `bits` bits.
pub fn check_width(field: &'static str, value: u64, bits: u32) -> Result<(), ModelError> {
    if bits < 64 && value >> bits != 0 {
        return Err(ModelError::FieldOverflow { field, value, bits });
    }
    Ok(())
}

/// Microseconds since the start of a simulation run.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn add_micros(self, us: u64) -> Result<SimTime, ModelError> {
        self.0
            .checked_add(us)
            .map(SimTime)
            .ok_or(ModelError::TimeOverflow(self.0, us))
    }

    /// Elapsed microseconds from `earlier` to `self`.
    pub fn since(self, earlier: SimTime) -> Result<u64, ModelError> {
        self.0
            .checked_sub(earlier.0)
            .ok_or(ModelError::TimeUnderflow {
                later: self.0,
                earlier: earlier.0,
            })
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

/// IPv4 5-tuple. Addresses are kept as raw 32-bit integers.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct FlowKey {
    pub src_ip: u32,
    pub dst_ip: u32,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: u8,
}

impl FlowKey {
    pub fn new(src_ip: u32, dst_ip: u32, src_port: u16, dst_port: u16, protocol: u8) -> Self {
        FlowKey {
            src_ip,
            dst_ip,
            src_port,
            dst_port,
            protocol,
        }
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{}",
            Ipv4Addr::from(self.src_ip),
            Ipv4Addr::from(self.dst_ip),
            self.src_port,
            self.dst_port,
            self.protocol
        )
    }
}

/// Parses `srcip,dstip,sport,dport,proto` with dotted-quad addresses.
impl FromStr for FlowKey {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::InvalidFlowKey(s.to_string());
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 5 {
            return Err(bad());
        }
        let src: Ipv4Addr = parts[0].parse().map_err(|_| bad())?;
        let dst: Ipv4Addr = parts[1].parse().map_err(|_| bad())?;
        Ok(FlowKey {
            src_ip: src.into(),
            dst_ip: dst.into(),
            src_port: parts[2].parse().map_err(|_| bad())?,
            dst_port: parts[3].parse().map_err(|_| bad())?,
            protocol: parts[4].parse().map_err(|_| bad())?,
        })
    }
}

/// Register-assigned index of a flow on one switch.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct FlowId(pub u32);

impl FlowId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Queue priority; 0 is the lowest.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct PriorityLevel(pub u8);

impl PriorityLevel {
    pub const DEFAULT: PriorityLevel = PriorityLevel(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PriorityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub const INGRESS_PORT_BITS: u32 = 9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub key: FlowKey,
    pub size_bytes: u32,
    pub created_at: SimTime,
    pub ingress_port: u16,
    pub frame_seq: Option<u32>,
    pub packet_seq: u64,
}

impl Packet {
    pub fn new(key: FlowKey, size_bytes: u32, created_at: SimTime) -> Result<Self, ModelError> {
        if size_bytes == 0 {
            return Err(ModelError::EmptyPacket);
        }
        Ok(Packet {
            key,
            size_bytes,
            created_at,
            ingress_port: 0,
            frame_seq: None,
            packet_seq: 0,
        })
    }

    pub fn with_ingress_port(mut self, port: u16) -> Result<Self, ModelError> {
        check_width("ingress_port", port.into(), INGRESS_PORT_BITS)?;
        self.ingress_port = port;
        Ok(self)
    }

    pub fn with_frame(mut self, frame_seq: u32) -> Self {
        self.frame_seq = Some(frame_seq);
        self
    }
}

pub fn flow_key_of(packet: &Packet) -> FlowKey {
    packet.key
}

pub const NUM_CLASSES: usize = 6;

/// IoT device classes and their classifier numbering.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum ClassLabel {
    Energy,
    Appliances,
    Hubs,
    #[serde(rename = "Health-Monitors")]
    HealthMonitors,
    Cameras,
    Others,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] = [
        ClassLabel::Energy,
        ClassLabel::Appliances,
        ClassLabel::Hubs,
        ClassLabel::HealthMonitors,
        ClassLabel::Cameras,
        ClassLabel::Others,
    ];

    /// Label used when nothing more specific applies (non-IoT traffic).
    pub const FALLBACK: ClassLabel = ClassLabel::Others;

    pub fn class_no(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_class_no(no: u8) -> Option<ClassLabel> {
        Self::ALL.get(no as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Energy => "Energy",
            ClassLabel::Appliances => "Appliances",
            ClassLabel::Hubs => "Hubs",
            ClassLabel::HealthMonitors => "Health-Monitors",
            ClassLabel::Cameras => "Cameras",
            ClassLabel::Others => "Others",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Accepts the class name (case-insensitive) or its number.
impl FromStr for ClassLabel {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(no) = s.parse::<u8>() {
            return ClassLabel::from_class_no(no).ok_or_else(|| ModelError::UnknownClass(s.into()));
        }
        ClassLabel::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownClass(s.into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pkt(key: FlowKey) -> Packet {
        Packet::new(key, 100, SimTime::ZERO).unwrap()
    }

    #[test]
    fn flow_key_projection() {
        let key: FlowKey = "10.0.0.1,10.0.0.3,5000,6000,17".parse().unwrap();
        let k = flow_key_of(&pkt(key));
        assert_eq!(k.src_ip, u32::from(Ipv4Addr::new(10, 0, 0, 1)));
        assert_eq!(k.dst_ip, u32::from(Ipv4Addr::new(10, 0, 0, 3)));
        assert_eq!((k.src_port, k.dst_port, k.protocol), (5000, 6000, 17));
        assert_eq!(flow_key_of(&pkt(key)), flow_key_of(&pkt(key)));
        let other = FlowKey { dst_port: 6001, ..key };
        assert_ne!(flow_key_of(&pkt(key)), flow_key_of(&pkt(other)));
    }

    #[test]
    fn class_table() {
        let expected = [
            (0, "Energy"),
            (1, "Appliances"),
            (2, "Hubs"),
            (3, "Health-Monitors"),
            (4, "Cameras"),
            (5, "Others"),
        ];
        for (no, name) in expected {
            let c = ClassLabel::from_class_no(no).unwrap();
            assert_eq!(c.name(), name);
            assert_eq!(name.parse::<ClassLabel>().unwrap(), c);
            assert_eq!(no.to_string().parse::<ClassLabel>().unwrap(), c);
        }
        assert!(ClassLabel::from_class_no(6).is_none());
        assert_eq!(ClassLabel::FALLBACK.class_no(), 5);
    }

    #[test]
    fn widths_rejected_not_truncated() {
        assert!(check_width("x", 511, 9).is_ok());
        assert!(check_width("x", 512, 9).is_err());
        let p = pkt(FlowKey::default_for_tests());
        assert!(p.clone().with_ingress_port(511).is_ok());
        assert!(p.with_ingress_port(512).is_err());
        assert_eq!(
            Packet::new(FlowKey::default_for_tests(), 0, SimTime::ZERO),
            Err(ModelError::EmptyPacket)
        );
    }

    #[test]
    fn time_arithmetic_checked() {
        let t = SimTime::from_micros(u64::MAX - 1);
        assert!(t.add_micros(1).is_ok());
        assert!(t.add_micros(2).is_err());
        assert!(SimTime::ZERO.since(SimTime::from_micros(1)).is_err());
        assert_eq!(SimTime::from_secs(10).as_micros(), 10_000_000);
    }

    impl FlowKey {
        fn default_for_tests() -> Self {
            FlowKey::new(1, 2, 3, 4, 17)
        }
    }

    fn arb_key() -> impl Strategy<Value = FlowKey> {
        (any::<u32>(), any::<u32>(), any::<u16>(), any::<u16>(), any::<u8>())
            .prop_map(|(a, b, c, d, e)| FlowKey::new(a, b, c, d, e))
    }

    proptest! {
        #[test]
        fn flipping_any_field_breaks_equality(k in arb_key(), field in 0usize..5) {
            let mut other = k;
            match field {
                0 => other.src_ip ^= 1,
                1 => other.dst_ip ^= 1,
                2 => other.src_port ^= 1,
                3 => other.dst_port ^= 1,
                _ => other.protocol ^= 1,
            }
            prop_assert_eq!(k, k);
            prop_assert_ne!(k, other);
            prop_assert_ne!(other, k);
        }

        #[test]
        fn display_parse_roundtrip(k in arb_key()) {
            prop_assert_eq!(k.to_string().parse::<FlowKey>().unwrap(), k);
        }
    }
}
