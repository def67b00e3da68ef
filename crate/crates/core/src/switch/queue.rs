use std::collections::VecDeque;

use crate::model::{FlowId, ModelError, Packet, PriorityLevel, SimTime};

/// Egress side of one switch port.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchPort {
    pub port_no: u16,
    pub link_rate_bps: u64,
    pub busy_until: SimTime,
}

impl SwitchPort {
    pub fn new(port_no: u16, link_rate_bps: u64) -> Result<Self, ModelError> {
        crate::model::check_width("port_no", port_no.into(), crate::model::INGRESS_PORT_BITS)?;
        assert!(link_rate_bps > 0, "link rate must be positive");
        Ok(SwitchPort {
            port_no,
            link_rate_bps,
            busy_until: SimTime::ZERO,
        })
    }

    pub fn is_idle(&self, now: SimTime) -> bool {
        now >= self.busy_until
    }
}

/// Serialization time of `size_bytes` on a link, rounded up to whole µs.
pub fn serialization_delay_us(size_bytes: u32, link_rate_bps: u64) -> u64 {
    let bits = u128::from(size_bytes) * 8 * 1_000_000;
    bits.div_ceil(u128::from(link_rate_bps)) as u64
}

/// A packet travelling through the switch together with its ingress metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InFlight {
    pub packet: Packet,
    pub flow_id: FlowId,
    pub priority: PriorityLevel,
    pub ingress_at: SimTime,
    /// Mirror decision taken at ingress.
    pub mirror: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Queued {
    item: InFlight,
    enq_at: SimTime,
    enq_qdepth: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dequeued {
    pub item: InFlight,
    pub enq_at: SimTime,
    pub enq_qdepth: u32,
    pub deq_qdepth: u32,
    /// Start of transmission (egress pipeline time).
    pub egress_at: SimTime,
    /// Last bit on the wire.
    pub egress_done: SimTime,
}

impl Dequeued {
    pub fn deq_timedelta(&self) -> u64 {
        self.egress_at.as_micros() - self.enq_at.as_micros()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Accepted { enq_qdepth: u32 },
    Dropped,
}

/// Strict-priority set of bounded FIFO queues with tail drop.
#[derive(Debug, Clone)]
pub struct PriorityQueueBank {
    queues: Vec<VecDeque<Queued>>,
    capacity_pkts: usize,
    drops: Vec<u64>,
}

impl PriorityQueueBank {
    pub const DEFAULT_LEVELS: usize = 8;
    pub const DEFAULT_CAPACITY: usize = 64;

    pub fn new(levels: usize, capacity_pkts: usize) -> Self {
        assert!((1..=256).contains(&levels), "queue count must be in 1..=256");
        PriorityQueueBank {
            queues: vec![VecDeque::new(); levels],
            capacity_pkts,
            drops: vec![0; levels],
        }
    }

    pub fn levels(&self) -> usize {
        self.queues.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity_pkts
    }

    pub fn occupancy(&self, level: PriorityLevel) -> usize {
        self.queues[level.index()].len()
    }

    pub fn total_occupancy(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.queues.iter().all(VecDeque::is_empty)
    }

    pub fn drops(&self) -> &[u64] {
        &self.drops
    }

    /// Packets still waiting, highest priority first.
    pub fn pending(&self) -> impl Iterator<Item = &InFlight> {
        self.queues.iter().rev().flat_map(|q| q.iter().map(|e| &e.item))
    }

    pub fn enqueue(&mut self, item: InFlight, now: SimTime) -> EnqueueOutcome {
        let level = item.priority.index();
        assert!(level < self.queues.len(), "priority {level} has no queue");
        let queue = &mut self.queues[level];
        if queue.len() >= self.capacity_pkts {
            self.drops[level] += 1;
            return EnqueueOutcome::Dropped;
        }
        let enq_qdepth = queue.len() as u32;
        queue.push_back(Queued {
            item,
            enq_at: now,
            enq_qdepth,
        });
        EnqueueOutcome::Accepted { enq_qdepth }
    }

    /// Serves the head of the highest-priority non-empty queue if the port is
    /// free, and marks the port busy until the packet is serialized.
    pub fn dequeue_next(&mut self, port: &mut SwitchPort, now: SimTime) -> Option<Dequeued> {
        if !port.is_idle(now) {
            return None;
        }
        let queue = self.queues.iter_mut().rev().find(|q| !q.is_empty())?;
        let deq_qdepth = queue.len() as u32;
        let head = queue.pop_front()?;
        let ser = serialization_delay_us(head.item.packet.size_bytes, port.link_rate_bps);
        let egress_done = now.add_micros(ser).expect("simulated time overflow");
        port.busy_until = egress_done;
        Some(Dequeued {
            item: head.item,
            enq_at: head.enq_at,
            enq_qdepth: head.enq_qdepth,
            deq_qdepth,
            egress_at: now,
            egress_done,
        })
    }
}
