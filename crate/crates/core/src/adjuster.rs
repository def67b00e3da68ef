//! Control-plane loop: classify the latest record of each flow, map the
//! class to a queue priority through the operator policy, and write changed
//! priorities back to the switch.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ml::{featurize, Classifier, Prediction};
use crate::model::{ClassLabel, FlowId, FlowKey, PriorityLevel, SimTime};
use crate::switch::{ControlCommand, SwitchControl, SwitchError, TelemetryRecord};

#[derive(Debug, Error)]
pub enum AdjusterError {
    #[error("policy line {line}: {reason}")]
    Policy { line: usize, reason: String },
    #[error(transparent)]
    Switch(#[from] SwitchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const DEFAULT_EPOCH_US: u64 = 1_000_000;

/// Operator requirements: which class or flow gets which queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub class_priority: BTreeMap<ClassLabel, PriorityLevel>,
    pub flow_overrides: BTreeMap<FlowKey, PriorityLevel>,
    pub epoch_us: u64,
    pub min_confidence: f64,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            class_priority: BTreeMap::new(),
            flow_overrides: BTreeMap::new(),
            epoch_us: DEFAULT_EPOCH_US,
            min_confidence: 0.0,
        }
    }
}

impl Policy {
    /// Checks every level against a switch with `levels` queues.
    pub fn validate(&self, levels: usize) -> Result<(), AdjusterError> {
        let bad = self
            .class_priority
            .values()
            .chain(self.flow_overrides.values())
            .find(|p| p.index() >= levels);
        if let Some(p) = bad {
            return Err(AdjusterError::Policy {
                line: 0,
                reason: format!("priority {p} exceeds the {levels} queue levels"),
            });
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(AdjusterError::Policy {
                line: 0,
                reason: format!("min_confidence {} outside [0, 1]", self.min_confidence),
            });
        }
        if self.epoch_us == 0 {
            return Err(AdjusterError::Policy {
                line: 0,
                reason: "epoch_us must be positive".into(),
            });
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "epoch_us = {}", self.epoch_us);
        let _ = writeln!(s, "min_confidence = {}", self.min_confidence);
        for (c, p) in &self.class_priority {
            let _ = writeln!(s, "{c}: {p}");
        }
        for (k, p) in &self.flow_overrides {
            let _ = writeln!(s, "{k} -> {p}");
        }
        s
    }
}

/// Line format:
///
/// ```text
/// # comment
/// epoch_us = 1000000
/// min_confidence = 0.5
/// Cameras: 6
/// 10.0.0.1,10.0.1.1,5004,5004,17 -> 7
/// ```
impl FromStr for Policy {
    type Err = AdjusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut policy = Policy::default();
        for (i, raw) in s.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fail = |reason: String| AdjusterError::Policy { line: i + 1, reason };
            let level = |v: &str| {
                v.trim()
                    .parse::<u8>()
                    .map(PriorityLevel)
                    .map_err(|_| fail(format!("bad priority `{}`", v.trim())))
            };
            if let Some((key, value)) = line.split_once("->") {
                let key: FlowKey = key.trim().parse().map_err(|e| fail(format!("{e}")))?;
                policy.flow_overrides.insert(key, level(value)?);
            } else if let Some((name, value)) = line.split_once('=').or_else(|| line.split_once(':')) {
                match name.trim() {
                    "epoch_us" => {
                        policy.epoch_us = value
                            .trim()
                            .parse()
                            .map_err(|_| fail(format!("bad epoch `{}`", value.trim())))?
                    }
                    "min_confidence" => {
                        policy.min_confidence = value
                            .trim()
                            .parse()
                            .map_err(|_| fail(format!("bad confidence `{}`", value.trim())))?
                    }
                    class => {
                        let class: ClassLabel =
                            class.parse().map_err(|_| fail(format!("unknown class `{class}`")))?;
                        policy.class_priority.insert(class, level(value)?);
                    }
                }
            } else {
                return Err(fail(format!("cannot parse `{line}`")));
            }
        }
        Ok(policy)
    }
}

/// Target priority for a flow, or `None` to leave it alone.
pub fn decide(prediction: &Prediction, key: &FlowKey, policy: &Policy) -> Option<PriorityLevel> {
    if let Some(&p) = policy.flow_overrides.get(key) {
        return Some(p);
    }
    if prediction.confidence() < policy.min_confidence {
        return None;
    }
    policy.class_priority.get(&prediction.label).copied()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjustment {
    pub time: SimTime,
    pub flow_id: FlowId,
    pub old_priority: PriorityLevel,
    pub new_priority: PriorityLevel,
    pub class: Option<ClassLabel>,
    pub confidence: f64,
}

/// Append-only, time-ordered record of register writes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentLog {
    entries: Vec<Adjustment>,
}

impl AdjustmentLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[Adjustment] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn push(&mut self, a: Adjustment) {
        debug_assert!(self.entries.last().is_none_or(|l| l.time <= a.time));
        self.entries.push(a);
    }

    pub const CSV_HEADER: &'static str =
        "time_us,flow_id,old_priority,new_priority,class,confidence";

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for a in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{},{:.6}",
                a.time.as_micros(),
                a.flow_id,
                a.old_priority,
                a.new_priority,
                a.class.map(|c| c.to_string()).unwrap_or_default(),
                a.confidence
            )?;
        }
        Ok(())
    }
}

/// Writes `prio_reg[flow_id] = prio` and logs it, even if unchanged.
pub fn apply<S: SwitchControl + ?Sized>(
    flow_id: FlowId,
    prio: PriorityLevel,
    switch: &mut S,
    log: &mut AdjustmentLog,
    now: SimTime,
    cause: Option<&Prediction>,
) -> Result<(), SwitchError> {
    let old = switch.priority_of(flow_id)?;
    switch.execute(&ControlCommand::SetPriority(flow_id, prio))?;
    log.push(Adjustment {
        time: now,
        flow_id,
        old_priority: old,
        new_priority: prio,
        class: cause.map(|p| p.label),
        confidence: cause.map_or(1.0, Prediction::confidence),
    });
    Ok(())
}

/// Sets the mirror flag and interval between two packet events.
pub fn set_mirroring<S: SwitchControl + ?Sized>(
    switch: &mut S,
    flag: bool,
    interval_us: u64,
) -> Result<(), SwitchError> {
    switch.execute(&ControlCommand::SetMirrorInterval(interval_us))?;
    switch.execute(&ControlCommand::SetMirrorFlag(flag))?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochOutcome {
    pub classified: usize,
    pub writes: usize,
    pub errors: Vec<(FlowKey, String)>,
}

/// Loop state carried across epochs: how far into the record store it has read.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjuster {
    pub policy: Policy,
    cursor: usize,
    log: AdjustmentLog,
}

impl Adjuster {
    pub fn new(policy: Policy) -> Self {
        Adjuster {
            policy,
            cursor: 0,
            log: AdjustmentLog::new(),
        }
    }

    pub fn log(&self) -> &AdjustmentLog {
        &self.log
    }

    pub fn into_log(self) -> AdjustmentLog {
        self.log
    }

    /// Marks every record up to `len` as seen without acting on it.
    pub fn skip_to(&mut self, len: usize) {
        self.cursor = self.cursor.max(len);
    }

    /// One epoch over `records` (the whole store; only entries past the
    /// cursor are new). Flows are visited in key order.
    pub fn run_epoch<S: SwitchControl + ?Sized>(
        &mut self,
        records: &[TelemetryRecord],
        classifier: &Classifier,
        switch: &mut S,
        now: SimTime,
    ) -> EpochOutcome {
        let fresh = &records[self.cursor.min(records.len())..];
        self.cursor = records.len();
        let mut newest: BTreeMap<FlowKey, &TelemetryRecord> = BTreeMap::new();
        for r in fresh {
            newest.insert(r.key(), r);
        }
        let mut out = EpochOutcome::default();
        for (key, record) in newest {
            let prediction = classifier.predict(&featurize(record));
            out.classified += 1;
            let Some(target) = decide(&prediction, &key, &self.policy) else {
                continue;
            };
            let Some(id) = switch.flow_id_of(&key) else {
                out.errors.push((key, "flow has no register slot".into()));
                continue;
            };
            let step = switch.priority_of(id).and_then(|current| {
                if current == target {
                    Ok(false)
                } else {
                    apply(id, target, switch, &mut self.log, now, Some(&prediction)).map(|_| true)
                }
            });
            match step {
                Ok(true) => out.writes += 1,
                Ok(false) => {}
                Err(e) => out.errors.push((key, e.to_string())),
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::{DecisionTreeModel, Node, TreeParams};
    use crate::model::NUM_CLASSES;
    use crate::switch::RegisterBank;

    fn pred(label: ClassLabel, conf: f64) -> Prediction {
        let mut scores = [0.0; NUM_CLASSES];
        scores[label.index()] = conf;
        let rest = (1.0 - conf) / 5.0;
        for (i, s) in scores.iter_mut().enumerate() {
            if i != label.index() {
                *s = rest;
            }
        }
        Prediction::from_scores(scores)
    }

    fn key(dport: u16) -> FlowKey {
        FlowKey::new(0x0a00_0001, 0x0a00_0101, 5004, dport, 17)
    }

    fn record(dport: u16) -> TelemetryRecord {
        TelemetryRecord {
            ingress_port: 1,
            flow_interval_time: 10,
            enq_qdepth: 0,
            deq_qdepth: 0,
            deq_timedelta: 0,
            protocol: 17,
            src_port: 5004,
            dst_port: dport,
            src_ip: 0x0a00_0001,
            dst_ip: 0x0a00_0101,
            timestamp_us: 0,
            size_bytes: 1000,
            label: None,
        }
    }

    /// Tree that predicts Cameras for dst_port <= 6000, Others above.
    fn port_tree() -> Classifier {
        let mut cam = [0; NUM_CLASSES];
        cam[ClassLabel::Cameras.index()] = 3;
        let mut oth = [0; NUM_CLASSES];
        oth[ClassLabel::Others.index()] = 3;
        Classifier::DecisionTree(DecisionTreeModel {
            params: TreeParams::default(),
            nodes: vec![
                Node::Split {
                    feature: 7,
                    threshold: 6000.0,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { counts: cam },
                Node::Leaf { counts: oth },
            ],
        })
    }

    fn policy() -> Policy {
        "Cameras: 6\n".parse().unwrap()
    }

    #[test]
    fn decide_rules() {
        let mut p = policy();
        assert_eq!(decide(&pred(ClassLabel::Cameras, 0.95), &key(1), &p), Some(PriorityLevel(6)));
        assert_eq!(decide(&pred(ClassLabel::Hubs, 0.95), &key(1), &p), None);
        p.min_confidence = 0.6;
        assert_eq!(decide(&pred(ClassLabel::Cameras, 0.4), &key(1), &p), None);
        p.flow_overrides.insert(key(1), PriorityLevel(2));
        assert_eq!(decide(&pred(ClassLabel::Cameras, 0.4), &key(1), &p), Some(PriorityLevel(2)));
    }

    #[test]
    fn policy_text_round_trip() {
        let text = "# video first\nepoch_us = 500000\nmin_confidence=0.25\nCameras: 6\nhealth-monitors = 5\n\
                    10.0.0.1,10.0.1.1,5004,5004,17 -> 7\n";
        let p: Policy = text.parse().unwrap();
        assert_eq!(p.epoch_us, 500_000);
        assert_eq!(p.class_priority[&ClassLabel::HealthMonitors], PriorityLevel(5));
        assert_eq!(p.flow_overrides.len(), 1);
        assert_eq!(p.to_text().parse::<Policy>().unwrap(), p);
        assert!(p.validate(8).is_ok());
        assert!(p.validate(6).is_err());
    }

    #[test]
    fn policy_errors_name_the_line() {
        let e = "Cameras: 6\nToasters: 1\n".parse::<Policy>().unwrap_err();
        assert!(matches!(e, AdjusterError::Policy { line: 2, .. }));
        assert!("Cameras: 300".parse::<Policy>().is_err());
        assert!("garbage".parse::<Policy>().is_err());
    }

    #[test]
    fn apply_logs_even_identical_writes() {
        let mut bank = RegisterBank::new(4, 8);
        let id = bank.lookup_or_assign_flow_id(key(1)).unwrap();
        let mut log = AdjustmentLog::new();
        apply(id, PriorityLevel(7), &mut bank, &mut log, SimTime::ZERO, None).unwrap();
        apply(id, PriorityLevel(7), &mut bank, &mut log, SimTime::ZERO, None).unwrap();
        assert_eq!(bank.priority(id).unwrap(), PriorityLevel(7));
        assert_eq!(log.len(), 2);
        assert_eq!(log.entries()[1].old_priority, PriorityLevel(7));
        let err = apply(FlowId(3), PriorityLevel(1), &mut bank, &mut log, SimTime::ZERO, None);
        assert!(matches!(err, Err(SwitchError::IndexOutOfRange { .. })));
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn epochs_write_only_changes() {
        let mut bank = RegisterBank::new(8, 8);
        bank.lookup_or_assign_flow_id(key(554)).unwrap();
        bank.lookup_or_assign_flow_id(key(9000)).unwrap();
        let clf = port_tree();
        let mut adj = Adjuster::new(policy());
        let mut store = vec![record(554), record(9000), record(554)];

        let first = adj.run_epoch(&store, &clf, &mut bank, SimTime::from_secs(1));
        assert_eq!((first.classified, first.writes), (2, 1));
        assert_eq!(bank.priority(FlowId(0)).unwrap(), PriorityLevel(6));

        let quiet = adj.run_epoch(&store, &clf, &mut bank, SimTime::from_secs(2));
        assert_eq!((quiet.classified, quiet.writes), (0, 0));

        store.push(record(554));
        let again = adj.run_epoch(&store, &clf, &mut bank, SimTime::from_secs(3));
        assert_eq!((again.classified, again.writes), (1, 0));
        assert_eq!(adj.log().len(), 1);
    }

    #[test]
    fn unknown_flow_is_skipped() {
        let mut bank = RegisterBank::new(8, 8);
        bank.lookup_or_assign_flow_id(key(554)).unwrap();
        let mut adj = Adjuster::new(policy());
        let store = vec![record(1935), record(554)];
        let out = adj.run_epoch(&store, &port_tree(), &mut bank, SimTime::ZERO);
        assert_eq!(out.writes, 1);
        assert_eq!(out.errors.len(), 1);
    }

    #[test]
    fn mirroring_toggles() {
        let mut bank = RegisterBank::new(2, 8);
        set_mirroring(&mut bank, true, 10_000).unwrap();
        assert!(bank.mirror_flag());
        assert_eq!(bank.mirror_interval_us(), 10_000);
        set_mirroring(&mut bank, false, 0).unwrap();
        assert!(!bank.mirror_flag());
    }

    #[test]
    fn log_csv() {
        let mut bank = RegisterBank::new(2, 8);
        let id = bank.lookup_or_assign_flow_id(key(1)).unwrap();
        let mut log = AdjustmentLog::new();
        let p = pred(ClassLabel::Cameras, 0.5);
        apply(id, PriorityLevel(6), &mut bank, &mut log, SimTime::from_micros(42), Some(&p)).unwrap();
        let mut out = Vec::new();
        log.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            format!("{}\n42,0,0,6,Cameras,0.500000\n", AdjustmentLog::CSV_HEADER)
        );
    }
}
