use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::model::ClassLabel;
use crate::switch::TraceRow;

use super::TrafficError;

/// Feature distribution of one device class in the synthetic IoT trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub label: ClassLabel,
    /// Service ports the class talks to. Disjoint across classes.
    pub dst_ports: Vec<u16>,
    /// Inclusive range of ephemeral source ports.
    pub src_ports: [u16; 2],
    /// Protocol numbers, drawn uniformly (repeat an entry to weight it).
    pub protocols: Vec<u8>,
    /// Inclusive packet size range in bytes.
    pub size_bytes: [u32; 2],
    /// Mean of the exponential inter-arrival time.
    pub mean_gap_us: f64,
    pub src_ips: Vec<Ipv4Addr>,
    pub dst_ips: Vec<Ipv4Addr>,
    #[serde(default = "default_ingress_port")]
    pub ingress_port: u16,
}

fn default_ingress_port() -> u16 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IotProfiles {
    #[serde(rename = "class")]
    pub classes: Vec<ClassProfile>,
}

const DEFAULT_PROFILES: &str = include_str!("../../scenarios/iot_profiles.toml");

impl IotProfiles {
    pub fn from_toml(text: &str) -> Result<Self, TrafficError> {
        let profiles: IotProfiles =
            toml::from_str(text).map_err(|e| TrafficError::InvalidProfile(e.to_string()))?;
        profiles.validate()?;
        Ok(profiles)
    }

    /// The six-class, port-separable profile set shipped with the crate.
    pub fn shipped() -> Self {
        Self::from_toml(DEFAULT_PROFILES).expect("shipped profiles are valid")
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        let mut owner: BTreeMap<u16, ClassLabel> = BTreeMap::new();
        let mut seen = Vec::new();
        for p in &self.classes {
            if seen.contains(&p.label) {
                return Err(TrafficError::InvalidProfile(format!(
                    "class {} listed twice",
                    p.label
                )));
            }
            seen.push(p.label);
            if p.dst_ports.is_empty()
                || p.protocols.is_empty()
                || p.src_ips.is_empty()
                || p.dst_ips.is_empty()
            {
                return Err(TrafficError::InvalidProfile(format!(
                    "class {} has an empty choice set",
                    p.label
                )));
            }
            if p.src_ports[0] > p.src_ports[1]
                || p.size_bytes[0] > p.size_bytes[1]
                || p.size_bytes[0] == 0
            {
                return Err(TrafficError::InvalidProfile(format!(
                    "class {} has an empty range",
                    p.label
                )));
            }
            if !(p.mean_gap_us.is_finite() && p.mean_gap_us > 0.0) {
                return Err(TrafficError::InvalidProfile(format!(
                    "class {} needs a positive mean gap",
                    p.label
                )));
            }
            for &port in &p.dst_ports {
                if let Some(first) = owner.insert(port, p.label) {
                    if first != p.label {
                        return Err(TrafficError::OverlappingPortSets {
                            port,
                            first: first.to_string(),
                            second: p.label.to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticTrace {
    /// Rows sorted by timestamp, each carrying its true label.
    pub rows: Vec<TraceRow>,
    pub labels: Vec<ClassLabel>,
}

/// Draws `packets_per_class` rows for each profile and merges them by
/// timestamp (ties by profile order). Every class uses its own generator
/// stream derived from `seed`.
pub fn gen_synthetic_iot_trace(
    profiles: &IotProfiles,
    packets_per_class: usize,
    seed: u64,
) -> Result<SyntheticTrace, TrafficError> {
    profiles.validate()?;
    let mut tagged: Vec<(u64, usize, usize, TraceRow)> = Vec::new();
    for (ci, p) in profiles.classes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ci as u64);
        let gaps = Exp::new(1.0 / p.mean_gap_us)
            .map_err(|e| TrafficError::InvalidProfile(e.to_string()))?;
        let mut clock = 0.0f64;
        for n in 0..packets_per_class {
            clock += gaps.sample(&mut rng);
            let row = TraceRow {
                ingress_port: p.ingress_port,
                flow_interval_time: 0,
                enq_qdepth: 0,
                deq_qdepth: 0,
                deq_timedelta: 0,
                protocol: *p.protocols.choose(&mut rng).expect("non-empty"),
                src_port: rng.random_range(p.src_ports[0]..=p.src_ports[1]),
                dst_port: *p.dst_ports.choose(&mut rng).expect("non-empty"),
                src_ip: (*p.src_ips.choose(&mut rng).expect("non-empty")).into(),
                dst_ip: (*p.dst_ips.choose(&mut rng).expect("non-empty")).into(),
                timestamp_us: clock as u64,
                size_bytes: rng.random_range(p.size_bytes[0]..=p.size_bytes[1]),
                label: Some(p.label),
            };
            row.validate()?;
            tagged.push((row.timestamp_us, ci, n, row));
        }
    }
    tagged.sort_by_key(|(ts, ci, n, _)| (*ts, *ci, *n));
    let labels = tagged
        .iter()
        .map(|(_, _, _, r)| r.label.expect("labeled"))
        .collect();
    let rows = tagged.into_iter().map(|(_, _, _, r)| r).collect();
    Ok(SyntheticTrace { rows, labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_per_class() {
        let trace = gen_synthetic_iot_trace(&IotProfiles::shipped(), 1000, 42).unwrap();
        assert_eq!(trace.rows.len(), 6000);
        for class in ClassLabel::ALL {
            assert_eq!(trace.labels.iter().filter(|&&l| l == class).count(), 1000);
        }
        assert!(trace.rows.windows(2).all(|w| w[0].timestamp_us <= w[1].timestamp_us));
    }

    #[test]
    fn same_seed_same_stream() {
        let p = IotProfiles::shipped();
        let a = gen_synthetic_iot_trace(&p, 200, 42).unwrap();
        let b = gen_synthetic_iot_trace(&p, 200, 42).unwrap();
        assert_eq!(a, b);
        let c = gen_synthetic_iot_trace(&p, 200, 43).unwrap();
        assert_ne!(a.rows, c.rows);
    }

    #[test]
    fn overlapping_ports_rejected() {
        let mut p = IotProfiles::shipped();
        let stolen = p.classes[0].dst_ports[0];
        p.classes[3].dst_ports.push(stolen);
        assert!(matches!(
            gen_synthetic_iot_trace(&p, 10, 1),
            Err(TrafficError::OverlappingPortSets { .. })
        ));
    }

    #[test]
    fn rows_follow_their_profile() {
        let p = IotProfiles::shipped();
        let trace = gen_synthetic_iot_trace(&p, 300, 7).unwrap();
        for row in &trace.rows {
            let prof = p.classes.iter().find(|c| Some(c.label) == row.label).unwrap();
            assert!(prof.dst_ports.contains(&row.dst_port));
            assert!(prof.protocols.contains(&row.protocol));
            assert!((prof.size_bytes[0]..=prof.size_bytes[1]).contains(&row.size_bytes));
        }
    }
}
