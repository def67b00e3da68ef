//! Software model of the programmable switch: flow-ID and priority registers,
//! strict-priority egress queues on rate-limited ports, egress telemetry and
//! timer-gated cloning of telemetry records to a collector.

mod queue;
mod registers;
mod telemetry;

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::model::{FlowId, FlowKey, ModelError, Packet, PriorityLevel, SimTime};

pub use queue::{
    serialization_delay_us, Dequeued, EnqueueOutcome, InFlight, PriorityQueueBank, SwitchPort,
};
pub use registers::{
    ControlCommand, ControlReply, FlowRegister, RegisterBank, RegisterDump, RegisterWrite,
    SwitchControl,
};
pub use telemetry::{stamp_telemetry, TelemetryRecord, TraceRow, FEATURE_WIDTHS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SwitchError {
    #[error("flow register bank full ({0} flows)")]
    CapacityExhausted(usize),
    #[error("unknown register `{0}`")]
    UnknownRegister(String),
    #[error("register index {index} out of range ({assigned} flows assigned)")]
    IndexOutOfRange { index: usize, assigned: usize },
    #[error("value out of range: {0}")]
    ValueOutOfRange(String),
    #[error("malformed control command `{0}`")]
    BadCommand(String),
    #[error("no such port {0}")]
    UnknownPort(u16),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("collector unavailable")]
pub struct SinkUnavailable;

/// Receiving end of the mirror path.
pub trait TelemetrySink {
    fn deliver(&mut self, record: TelemetryRecord) -> Result<(), SinkUnavailable>;
}

impl TelemetrySink for Vec<TelemetryRecord> {
    fn deliver(&mut self, record: TelemetryRecord) -> Result<(), SinkUnavailable> {
        self.push(record);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MirrorCounters {
    pub mirrored: u64,
    pub sink_drops: u64,
}

/// Sends a copy of `record` to the collector. A missing or failing sink only
/// bumps the drop counter.
pub fn clone_to_collector(
    record: TelemetryRecord,
    sink: Option<&mut dyn TelemetrySink>,
    counters: &mut MirrorCounters,
) {
    match sink.map(|s| s.deliver(record)) {
        Some(Ok(())) => counters.mirrored += 1,
        Some(Err(SinkUnavailable)) | None => counters.sink_drops += 1,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlowCounters {
    pub injected: u64,
    pub dropped: u64,
    pub transmitted: u64,
}

#[derive(Debug, Clone)]
pub struct SwitchSettings {
    pub queue_levels: usize,
    pub queue_capacity: usize,
    pub register_capacity: usize,
}

impl Default for SwitchSettings {
    fn default() -> Self {
        SwitchSettings {
            queue_levels: PriorityQueueBank::DEFAULT_LEVELS,
            queue_capacity: PriorityQueueBank::DEFAULT_CAPACITY,
            register_capacity: RegisterBank::DEFAULT_CAPACITY,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EgressPort {
    pub port: SwitchPort,
    pub queues: PriorityQueueBank,
    pub propagation_us: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReceiveOutcome {
    Queued { port: u16, flow_id: FlowId, enq_qdepth: u32 },
    Dropped { port: u16, flow_id: FlowId },
    Unroutable,
}

/// A packet that started transmission on an egress port.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub port: u16,
    pub out: Dequeued,
    /// Arrival time at the far end of the link.
    pub arrives_at: SimTime,
    pub record: Option<TelemetryRecord>,
}

#[derive(Debug, Clone)]
pub struct Switch {
    name: String,
    settings: SwitchSettings,
    registers: RegisterBank,
    ports: BTreeMap<u16, EgressPort>,
    routes: HashMap<u32, u16>,
    default_port: Option<u16>,
    flows: Vec<FlowCounters>,
    mirror: MirrorCounters,
    unroutable: u64,
    telemetry_errors: u64,
}

impl Switch {
    pub fn new(name: impl Into<String>, settings: SwitchSettings) -> Self {
        Switch {
            name: name.into(),
            registers: RegisterBank::new(settings.register_capacity, settings.queue_levels),
            settings,
            ports: BTreeMap::new(),
            routes: HashMap::new(),
            default_port: None,
            flows: Vec::new(),
            mirror: MirrorCounters::default(),
            unroutable: 0,
            telemetry_errors: 0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn add_port(
        &mut self,
        port_no: u16,
        link_rate_bps: u64,
        propagation_us: u64,
    ) -> Result<(), SwitchError> {
        let port = SwitchPort::new(port_no, link_rate_bps)?;
        let queues = PriorityQueueBank::new(self.settings.queue_levels, self.settings.queue_capacity);
        self.ports.insert(
            port_no,
            EgressPort {
                port,
                queues,
                propagation_us,
            },
        );
        Ok(())
    }

    pub fn add_route(&mut self, dst_ip: u32, port_no: u16) -> Result<(), SwitchError> {
        if !self.ports.contains_key(&port_no) {
            return Err(SwitchError::UnknownPort(port_no));
        }
        self.routes.insert(dst_ip, port_no);
        Ok(())
    }

    pub fn set_default_port(&mut self, port_no: u16) -> Result<(), SwitchError> {
        if !self.ports.contains_key(&port_no) {
            return Err(SwitchError::UnknownPort(port_no));
        }
        self.default_port = Some(port_no);
        Ok(())
    }

    pub fn registers(&self) -> &RegisterBank {
        &self.registers
    }

    pub fn registers_mut(&mut self) -> &mut RegisterBank {
        &mut self.registers
    }

    pub fn port(&self, port_no: u16) -> Option<&EgressPort> {
        self.ports.get(&port_no)
    }

    pub fn port_numbers(&self) -> impl Iterator<Item = u16> + '_ {
        self.ports.keys().copied()
    }

    pub fn flow_counters(&self) -> &[FlowCounters] {
        &self.flows
    }

    pub fn mirror_counters(&self) -> MirrorCounters {
        self.mirror
    }

    pub fn unroutable(&self) -> u64 {
        self.unroutable
    }

    pub fn telemetry_errors(&self) -> u64 {
        self.telemetry_errors
    }

    pub fn queued(&self) -> usize {
        self.ports.values().map(|p| p.queues.total_occupancy()).sum()
    }

    pub fn route(&self, dst_ip: u32) -> Option<u16> {
        self.routes.get(&dst_ip).copied().or(self.default_port)
    }

    /// Ingress pipeline: flow identification, priority lookup, mirror
    /// decision, forwarding and enqueue on the egress port.
    pub fn receive(
        &mut self,
        mut packet: Packet,
        in_port: u16,
        now: SimTime,
    ) -> Result<ReceiveOutcome, SwitchError> {
        packet = packet.with_ingress_port(in_port)?;
        let (flow_id, priority, ingress_at) = self.registers.ingress(packet.key, now)?;
        if self.flows.len() <= flow_id.index() {
            self.flows.resize(flow_id.index() + 1, FlowCounters::default());
        }
        self.flows[flow_id.index()].injected += 1;
        let Some(port_no) = self.route(packet.key.dst_ip) else {
            self.unroutable += 1;
            self.flows[flow_id.index()].dropped += 1;
            return Ok(ReceiveOutcome::Unroutable);
        };
        let mirror = self.registers.should_mirror(flow_id, now);
        let egress = self.ports.get_mut(&port_no).expect("route to existing port");
        let item = InFlight {
            packet,
            flow_id,
            priority,
            ingress_at,
            mirror,
        };
        Ok(match egress.queues.enqueue(item, now) {
            EnqueueOutcome::Accepted { enq_qdepth } => ReceiveOutcome::Queued {
                port: port_no,
                flow_id,
                enq_qdepth,
            },
            EnqueueOutcome::Dropped => {
                self.flows[flow_id.index()].dropped += 1;
                ReceiveOutcome::Dropped {
                    port: port_no,
                    flow_id,
                }
            }
        })
    }

    /// Egress pipeline for one port: dequeue, stamp telemetry, and clone the
    /// record to `sink` when the packet was marked for mirroring.
    pub fn transmit(
        &mut self,
        port_no: u16,
        now: SimTime,
        sink: Option<&mut dyn TelemetrySink>,
    ) -> Result<Option<Transmission>, SwitchError> {
        let egress = self
            .ports
            .get_mut(&port_no)
            .ok_or(SwitchError::UnknownPort(port_no))?;
        let Some(out) = egress.queues.dequeue_next(&mut egress.port, now) else {
            return Ok(None);
        };
        let arrives_at = out.egress_done.add_micros(egress.propagation_us)?;
        self.flows[out.item.flow_id.index()].transmitted += 1;
        let record = if out.item.mirror {
            match stamp_telemetry(&out, now) {
                Ok(record) => {
                    clone_to_collector(record.clone(), sink, &mut self.mirror);
                    Some(record)
                }
                Err(_) => {
                    self.telemetry_errors += 1;
                    None
                }
            }
        } else {
            None
        };
        Ok(Some(Transmission {
            port: port_no,
            out,
            arrives_at,
            record,
        }))
    }

    pub fn port_idle(&self, port_no: u16, now: SimTime) -> bool {
        self.ports
            .get(&port_no)
            .is_some_and(|p| p.port.is_idle(now))
    }
}

impl SwitchControl for Switch {
    fn execute(&mut self, cmd: &ControlCommand) -> Result<ControlReply, SwitchError> {
        self.registers.execute(cmd)
    }

    fn flow_id_of(&self, key: &FlowKey) -> Option<FlowId> {
        self.registers.flow_id(key)
    }

    fn priority_of(&self, id: FlowId) -> Result<PriorityLevel, SwitchError> {
        self.registers.priority(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Detached;
    impl TelemetrySink for Detached {
        fn deliver(&mut self, _: TelemetryRecord) -> Result<(), SinkUnavailable> {
            Err(SinkUnavailable)
        }
    }

    fn switch() -> Switch {
        let mut sw = Switch::new("s1", SwitchSettings::default());
        sw.add_port(3, 2_000_000, 0).unwrap();
        sw.set_default_port(3).unwrap();
        sw
    }

    fn packet(sport: u16, t: u64) -> Packet {
        Packet::new(FlowKey::new(1, 2, sport, 80, 17), 1250, SimTime::from_micros(t)).unwrap()
    }

    #[test]
    fn mirrored_record_reaches_sink_once() {
        let mut sw = switch();
        sw.registers_mut()
            .write_register(RegisterWrite::MirrorFlag(true))
            .unwrap();
        let mut store: Vec<TelemetryRecord> = Vec::new();
        sw.receive(packet(1, 0), 1, SimTime::ZERO).unwrap();
        let tx = sw.transmit(3, SimTime::ZERO, Some(&mut store)).unwrap().unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(tx.record.as_ref(), Some(&store[0]));
        assert_eq!(store[0].ingress_port, 1);
        assert_eq!(tx.arrives_at, SimTime::from_micros(5000));
    }

    #[test]
    fn no_mirror_when_disabled() {
        let mut sw = switch();
        let mut store: Vec<TelemetryRecord> = Vec::new();
        for t in 0..3 {
            sw.receive(packet(1, t), 1, SimTime::from_micros(t)).unwrap();
        }
        let mut now = SimTime::ZERO;
        while let Some(tx) = sw.transmit(3, now, Some(&mut store)).unwrap() {
            now = tx.out.egress_done;
        }
        assert!(store.is_empty());
        assert_eq!(sw.flow_counters()[0].transmitted, 3);
    }

    #[test]
    fn detached_sink_counts_drops_and_forwards() {
        let mut sw = switch();
        sw.registers_mut()
            .write_register(RegisterWrite::MirrorFlag(true))
            .unwrap();
        sw.receive(packet(1, 0), 1, SimTime::ZERO).unwrap();
        let tx = sw.transmit(3, SimTime::ZERO, Some(&mut Detached)).unwrap();
        assert!(tx.is_some());
        assert_eq!(sw.mirror_counters().sink_drops, 1);
        sw.receive(packet(1, 0), 1, SimTime::from_micros(5000)).unwrap();
        sw.transmit(3, SimTime::from_micros(5000), None).unwrap().unwrap();
        assert_eq!(sw.mirror_counters().sink_drops, 2);
    }

    #[test]
    fn mirror_flag_is_not_retroactive() {
        let mut sw = switch();
        let mut store: Vec<TelemetryRecord> = Vec::new();
        sw.receive(packet(1, 0), 1, SimTime::ZERO).unwrap();
        // enabled after the first packet passed ingress
        sw.execute(&ControlCommand::SetMirrorFlag(true)).unwrap();
        sw.receive(packet(1, 1), 1, SimTime::from_micros(1)).unwrap();
        let mut now = SimTime::from_micros(1);
        while let Some(tx) = sw.transmit(3, now, Some(&mut store)).unwrap() {
            now = tx.out.egress_done;
        }
        assert_eq!(store.len(), 1);
        assert_eq!(store[0].timestamp_us, 5001);
    }

    #[test]
    fn unroutable_is_counted() {
        let mut sw = Switch::new("s", SwitchSettings::default());
        sw.add_port(1, 1_000_000, 0).unwrap();
        assert_eq!(
            sw.receive(packet(1, 0), 1, SimTime::ZERO).unwrap(),
            ReceiveOutcome::Unroutable
        );
        assert_eq!(sw.unroutable(), 1);
        assert!(sw.add_route(5, 9).is_err());
    }
}
