use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::model::{FlowId, FlowKey, PriorityLevel, SimTime};

use super::SwitchError;

/// Data-plane register state of one switch.
#[derive(Debug, Clone)]
pub struct RegisterBank {
    flow_ids: HashMap<FlowKey, FlowId>,
    keys: Vec<FlowKey>,
    prio_reg: Vec<PriorityLevel>,
    last_seen: Vec<Option<SimTime>>,
    mirror_flag: bool,
    mirror_interval_us: u64,
    capacity: usize,
    levels: usize,
}

impl RegisterBank {
    pub const DEFAULT_CAPACITY: usize = 1024;

    pub fn new(capacity: usize, levels: usize) -> Self {
        RegisterBank {
            flow_ids: HashMap::new(),
            keys: Vec::new(),
            prio_reg: Vec::with_capacity(capacity.min(1 << 16)),
            last_seen: Vec::new(),
            mirror_flag: false,
            mirror_interval_us: 0,
            capacity,
            levels,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn assigned(&self) -> usize {
        self.keys.len()
    }

    pub fn mirror_flag(&self) -> bool {
        self.mirror_flag
    }

    pub fn mirror_interval_us(&self) -> u64 {
        self.mirror_interval_us
    }

    pub fn flow_id(&self, key: &FlowKey) -> Option<FlowId> {
        self.flow_ids.get(key).copied()
    }

    pub fn key_of(&self, id: FlowId) -> Option<FlowKey> {
        self.keys.get(id.index()).copied()
    }

    pub fn lookup_or_assign_flow_id(&mut self, key: FlowKey) -> Result<FlowId, SwitchError> {
        if let Some(id) = self.flow_ids.get(&key) {
            return Ok(*id);
        }
        if self.keys.len() >= self.capacity {
            return Err(SwitchError::CapacityExhausted(self.capacity));
        }
        let id = FlowId(self.keys.len() as u32);
        self.flow_ids.insert(key, id);
        self.keys.push(key);
        self.prio_reg.push(PriorityLevel::DEFAULT);
        self.last_seen.push(None);
        Ok(id)
    }

    /// Identifies the packet's flow and reads its current priority.
    pub fn ingress(
        &mut self,
        key: FlowKey,
        now: SimTime,
    ) -> Result<(FlowId, PriorityLevel, SimTime), SwitchError> {
        let id = self.lookup_or_assign_flow_id(key)?;
        Ok((id, self.prio_reg[id.index()], now))
    }

    pub fn priority(&self, id: FlowId) -> Result<PriorityLevel, SwitchError> {
        self.prio_reg
            .get(id.index())
            .copied()
            .ok_or(SwitchError::IndexOutOfRange {
                index: id.index(),
                assigned: self.assigned(),
            })
    }

    /// Timer-gated mirror decision. Updates the flow's timer only when it fires.
    pub fn should_mirror(&mut self, id: FlowId, now: SimTime) -> bool {
        if !self.mirror_flag {
            return false;
        }
        let slot = &mut self.last_seen[id.index()];
        let fire = match (*slot, self.mirror_interval_us) {
            (_, 0) | (None, _) => true,
            (Some(last), interval) => now.as_micros().saturating_sub(last.as_micros()) >= interval,
        };
        if fire {
            *slot = Some(now);
        }
        fire
    }

    pub fn write_register(&mut self, write: RegisterWrite) -> Result<(), SwitchError> {
        match write {
            RegisterWrite::Priority(id, level) => {
                if level.index() >= self.levels {
                    return Err(SwitchError::ValueOutOfRange(format!(
                        "priority {level} (queues: {})",
                        self.levels
                    )));
                }
                let slot = self
                    .prio_reg
                    .get_mut(id.index())
                    .ok_or(SwitchError::IndexOutOfRange {
                        index: id.index(),
                        assigned: self.keys.len(),
                    })?;
                *slot = level;
            }
            RegisterWrite::MirrorFlag(flag) => self.mirror_flag = flag,
            RegisterWrite::MirrorInterval(us) => {
                if us >> 48 != 0 {
                    return Err(SwitchError::ValueOutOfRange(format!("mirror interval {us}")));
                }
                self.mirror_interval_us = us
            }
        }
        Ok(())
    }

    pub fn dump(&self) -> RegisterDump {
        RegisterDump {
            mirror_flag: self.mirror_flag,
            mirror_interval_us: self.mirror_interval_us,
            capacity: self.capacity,
            flows: self
                .keys
                .iter()
                .zip(&self.prio_reg)
                .enumerate()
                .map(|(i, (key, prio))| FlowRegister {
                    flow_id: FlowId(i as u32),
                    key: key.to_string(),
                    priority: *prio,
                    last_mirror_us: self.last_seen[i].map(SimTime::as_micros),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegisterWrite {
    Priority(FlowId, PriorityLevel),
    MirrorFlag(bool),
    MirrorInterval(u64),
}

impl RegisterWrite {
    /// Builds a write from a register name, as exposed on the control endpoint.
    pub fn named(name: &str, index: Option<u32>, value: u64) -> Result<Self, SwitchError> {
        match name {
            "prio_reg" => {
                let index = index.ok_or_else(|| {
                    SwitchError::ValueOutOfRange("prio_reg requires an index".into())
                })?;
                let level = u8::try_from(value)
                    .map_err(|_| SwitchError::ValueOutOfRange(format!("priority {value}")))?;
                Ok(RegisterWrite::Priority(FlowId(index), PriorityLevel(level)))
            }
            "mirror_flag" => match value {
                0 | 1 => Ok(RegisterWrite::MirrorFlag(value == 1)),
                v => Err(SwitchError::ValueOutOfRange(format!("mirror flag {v}"))),
            },
            "mirror_interval" => Ok(RegisterWrite::MirrorInterval(value)),
            other => Err(SwitchError::UnknownRegister(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowRegister {
    pub flow_id: FlowId,
    pub key: String,
    pub priority: PriorityLevel,
    pub last_mirror_us: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegisterDump {
    pub mirror_flag: bool,
    pub mirror_interval_us: u64,
    pub capacity: usize,
    pub flows: Vec<FlowRegister>,
}

impl fmt::Display for RegisterDump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "mirror_flag={} mirror_interval_us={} flows={}/{}",
            if self.mirror_flag { "on" } else { "off" },
            self.mirror_interval_us,
            self.flows.len(),
            self.capacity
        )?;
        for r in &self.flows {
            writeln!(f, "prio_reg[{}]={} flow={}", r.flow_id, r.priority, r.key)?;
        }
        Ok(())
    }
}

/// Verbs accepted by the switch control endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControlCommand {
    SetPriority(FlowId, PriorityLevel),
    SetMirrorFlag(bool),
    SetMirrorInterval(u64),
    DumpRegisters,
}

impl FromStr for ControlCommand {
    type Err = SwitchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let words: Vec<&str> = s.split_whitespace().collect();
        let bad = || SwitchError::BadCommand(s.trim().to_string());
        let num = |w: &str| w.parse::<u64>().map_err(|_| bad());
        match words.as_slice() {
            ["set-priority", id, level] => {
                let id = u32::try_from(num(id)?).map_err(|_| bad())?;
                let level = u8::try_from(num(level)?)
                    .map_err(|_| SwitchError::ValueOutOfRange(format!("priority {level}")))?;
                Ok(ControlCommand::SetPriority(FlowId(id), PriorityLevel(level)))
            }
            ["set-mirror-flag", "on"] => Ok(ControlCommand::SetMirrorFlag(true)),
            ["set-mirror-flag", "off"] => Ok(ControlCommand::SetMirrorFlag(false)),
            ["set-mirror-interval", us] => Ok(ControlCommand::SetMirrorInterval(num(us)?)),
            ["dump-registers"] => Ok(ControlCommand::DumpRegisters),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ControlCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlCommand::SetPriority(id, level) => write!(f, "set-priority {id} {level}"),
            ControlCommand::SetMirrorFlag(on) => {
                write!(f, "set-mirror-flag {}", if *on { "on" } else { "off" })
            }
            ControlCommand::SetMirrorInterval(us) => write!(f, "set-mirror-interval {us}"),
            ControlCommand::DumpRegisters => f.write_str("dump-registers"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControlReply {
    Ok,
    Registers(RegisterDump),
}

/// Control-plane access to a switch. Implementors apply commands between
/// packet events only.
pub trait SwitchControl {
    fn execute(&mut self, cmd: &ControlCommand) -> Result<ControlReply, SwitchError>;
    fn flow_id_of(&self, key: &FlowKey) -> Option<FlowId>;
    fn priority_of(&self, id: FlowId) -> Result<PriorityLevel, SwitchError>;
}

impl SwitchControl for RegisterBank {
    fn execute(&mut self, cmd: &ControlCommand) -> Result<ControlReply, SwitchError> {
        let write = match *cmd {
            ControlCommand::SetPriority(id, level) => RegisterWrite::Priority(id, level),
            ControlCommand::SetMirrorFlag(on) => RegisterWrite::MirrorFlag(on),
            ControlCommand::SetMirrorInterval(us) => RegisterWrite::MirrorInterval(us),
            ControlCommand::DumpRegisters => return Ok(ControlReply::Registers(self.dump())),
        };
        self.write_register(write)?;
        Ok(ControlReply::Ok)
    }

    fn flow_id_of(&self, key: &FlowKey) -> Option<FlowId> {
        self.flow_id(key)
    }

    fn priority_of(&self, id: FlowId) -> Result<PriorityLevel, SwitchError> {
        self.priority(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(n: u16) -> FlowKey {
        FlowKey::new(0x0a00_0001, 0x0a00_0003, n, 6000, 17)
    }

    #[test]
    fn sequential_stable_ids() {
        let mut bank = RegisterBank::new(256, 8);
        assert_eq!(bank.lookup_or_assign_flow_id(key(1)).unwrap(), FlowId(0));
        assert_eq!(bank.lookup_or_assign_flow_id(key(1)).unwrap(), FlowId(0));
        assert_eq!(bank.lookup_or_assign_flow_id(key(2)).unwrap(), FlowId(1));
    }

    #[test]
    fn capacity_exhausted() {
        let mut bank = RegisterBank::new(2, 8);
        bank.lookup_or_assign_flow_id(key(1)).unwrap();
        bank.lookup_or_assign_flow_id(key(2)).unwrap();
        assert_eq!(
            bank.lookup_or_assign_flow_id(key(3)),
            Err(SwitchError::CapacityExhausted(2))
        );
        // known keys still resolve
        assert_eq!(bank.lookup_or_assign_flow_id(key(2)).unwrap(), FlowId(1));
    }

    #[test]
    fn ingress_reads_priority() {
        let mut bank = RegisterBank::new(256, 8);
        let (id, prio, ts) = bank.ingress(key(1), SimTime::from_micros(9)).unwrap();
        assert_eq!((prio, ts), (PriorityLevel(0), SimTime::from_micros(9)));
        bank.write_register(RegisterWrite::Priority(id, PriorityLevel(7))).unwrap();
        assert_eq!(bank.ingress(key(1), SimTime::ZERO).unwrap().1, PriorityLevel(7));
        bank.write_register(RegisterWrite::Priority(id, PriorityLevel(3))).unwrap();
        assert_eq!(bank.ingress(key(1), SimTime::ZERO).unwrap().1, PriorityLevel(3));
    }

    #[test]
    fn register_write_errors() {
        let mut bank = RegisterBank::new(256, 8);
        for n in 0..3 {
            bank.lookup_or_assign_flow_id(key(n)).unwrap();
        }
        bank.write_register(RegisterWrite::named("prio_reg", Some(2), 5).unwrap())
            .unwrap();
        assert_eq!(bank.ingress(key(2), SimTime::ZERO).unwrap().1, PriorityLevel(5));
        assert!(matches!(
            bank.write_register(RegisterWrite::Priority(FlowId(999), PriorityLevel(1))),
            Err(SwitchError::IndexOutOfRange { index: 999, .. })
        ));
        assert!(matches!(
            bank.write_register(RegisterWrite::Priority(FlowId(0), PriorityLevel(8))),
            Err(SwitchError::ValueOutOfRange(_))
        ));
        assert!(matches!(
            RegisterWrite::named("queue_reg", None, 0),
            Err(SwitchError::UnknownRegister(_))
        ));
        assert!(RegisterWrite::named("prio_reg", None, 1).is_err());
    }

    #[test]
    fn mirror_gate_off() {
        let mut bank = RegisterBank::new(4, 8);
        let id = bank.lookup_or_assign_flow_id(key(1)).unwrap();
        for t in [0, 5000, 1_000_000] {
            assert!(!bank.should_mirror(id, SimTime::from_micros(t)));
        }
    }

    #[test]
    fn mirror_every_packet_when_interval_zero() {
        let mut bank = RegisterBank::new(4, 8);
        let id = bank.lookup_or_assign_flow_id(key(1)).unwrap();
        bank.write_register(RegisterWrite::MirrorFlag(true)).unwrap();
        for t in [0, 0, 1, 2, 2] {
            assert!(bank.should_mirror(id, SimTime::from_micros(t)));
        }
    }

    #[test]
    fn mirror_timer_hand_simulation() {
        // last := 0 (first packet fires); 400-0 < 1000; 900-0 < 1000; 1300-0 >= 1000
        let mut bank = RegisterBank::new(4, 8);
        let id = bank.lookup_or_assign_flow_id(key(1)).unwrap();
        bank.write_register(RegisterWrite::MirrorFlag(true)).unwrap();
        bank.write_register(RegisterWrite::MirrorInterval(1000)).unwrap();
        let got: Vec<bool> = [0, 400, 900, 1300]
            .into_iter()
            .map(|t| bank.should_mirror(id, SimTime::from_micros(t)))
            .collect();
        assert_eq!(got, vec![true, false, false, true]);
    }

    #[test]
    fn verbs_parse_and_print() {
        for verb in [
            "set-priority 3 6",
            "set-mirror-flag on",
            "set-mirror-flag off",
            "set-mirror-interval 10000",
            "dump-registers",
        ] {
            let cmd: ControlCommand = verb.parse().unwrap();
            assert_eq!(cmd.to_string(), verb);
        }
        assert!("set-priority x 1".parse::<ControlCommand>().is_err());
        assert!("reboot".parse::<ControlCommand>().is_err());
        assert!(matches!(
            "set-priority 1 300".parse::<ControlCommand>(),
            Err(SwitchError::ValueOutOfRange(_))
        ));
    }

    #[test]
    fn control_endpoint_roundtrip() {
        let mut bank = RegisterBank::new(4, 8);
        bank.lookup_or_assign_flow_id(key(1)).unwrap();
        bank.execute(&"set-priority 0 4".parse().unwrap()).unwrap();
        bank.execute(&"set-mirror-flag on".parse().unwrap()).unwrap();
        let ControlReply::Registers(dump) = bank.execute(&ControlCommand::DumpRegisters).unwrap()
        else {
            panic!("expected a dump")
        };
        assert!(dump.mirror_flag);
        assert_eq!(dump.flows[0].priority, PriorityLevel(4));
        assert!(dump.to_string().contains("prio_reg[0]=4"));
    }
}
