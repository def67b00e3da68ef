//! Scenario files and the discrete-event engine that runs them: hosts with
//! paced NICs, switches joined by rate-limited links, the collector on the
//! mirror path and, in the adjusted arm, the retrain-and-adjust loop.

mod config;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::adjuster::{set_mirroring, Adjuster, AdjusterError, AdjustmentLog};
use crate::collector::{Collector, CollectorError, Dataset, PortLabelMap};
use crate::ml::{Classifier, Hyperparams, MlError, Samples};
use crate::model::{FlowKey, ModelError, Packet, SimTime};
use crate::qoe::{self, DeliveryEvent, Fate, FlowStats, FrameLedger, DEFAULT_FRAME_DEADLINE_US};
use crate::switch::{
    serialization_delay_us, ControlCommand, ControlReply, FlowCounters, ReceiveOutcome, Switch,
    SwitchControl, SwitchError, SwitchSettings, TelemetrySink,
};
use crate::traffic::{self, CbrSpec, IotProfiles, TrafficError, VideoSpec};

pub use config::{
    Arm, CbrTraffic, ControlConfig, FlowLabel, HostConfig, LabelConfig, LinkConfig, MirrorConfig,
    OutputConfig, PortLabel, Scenario, ScenarioConfig, SwitchConfig, SwitchDefaults,
    SyntheticIotTraffic, TraceTraffic, TrafficConfig, VideoTraffic, DUMBBELL_CFG,
    DUMBBELL_POLICY, IOT_CFG,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Policy(#[from] AdjusterError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Collector(#[from] CollectorError),
    #[error(transparent)]
    Switch(#[from] SwitchError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ml(#[from] MlError),
}

impl ScenarioError {
    /// True for problems with the user's input rather than the run itself.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            ScenarioError::ConfigInvalid(_) | ScenarioError::Policy(AdjusterError::Policy { .. })
        )
    }
}

/// A control verb to issue at a fixed simulated time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledCommand {
    pub at: SimTime,
    /// Target switch; the control switch when absent.
    pub switch: Option<String>,
    pub command: ControlCommand,
}

/// Parses lines of `<time_us> [switch] <verb> [args]`; `#` starts a comment.
pub fn parse_script(text: &str) -> Result<Vec<ScheduledCommand>, ScenarioError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: String| ScenarioError::ConfigInvalid(format!("script line {}: {m}", i + 1));
        let (time, rest) = line.split_once(char::is_whitespace).ok_or_else(|| bad("missing verb".into()))?;
        let at: u64 = time.parse().map_err(|_| bad(format!("bad time `{time}`")))?;
        let rest = rest.trim();
        let first = rest.split_whitespace().next().unwrap_or("");
        let (switch, verb) = if first.starts_with("set-") || first.starts_with("dump-") {
            (None, rest)
        } else {
            (Some(first.to_string()), rest[first.len()..].trim())
        };
        let command = verb.parse().map_err(|e: SwitchError| bad(e.to_string()))?;
        out.push(ScheduledCommand {
            at: SimTime::from_micros(at),
            switch,
            command,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub script: Vec<ScheduledCommand>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoSummary {
    pub frames: usize,
    pub complete_frames: usize,
    pub delivered_fps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowCounterRow {
    pub flow_id: u32,
    pub flow: String,
    pub injected: u64,
    pub dropped: u64,
    pub transmitted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchSummary {
    pub name: String,
    pub mirrored: u64,
    pub sink_drops: u64,
    pub unroutable: u64,
    pub flows: Vec<FlowCounterRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochSummary {
    pub time_us: u64,
    pub trained_on: usize,
    pub classified: usize,
    pub writes: usize,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandReply {
    pub time_us: u64,
    pub switch: String,
    pub command: String,
    pub reply: String,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub run_id: String,
    pub arm: Arm,
    pub dataset: Dataset,
    pub log: AdjustmentLog,
    pub deliveries: Vec<DeliveryEvent>,
    /// Name of the traffic entry that emitted each delivery event.
    pub sources: Vec<String>,
    pub flow_stats: BTreeMap<FlowKey, FlowStats>,
    pub video: BTreeMap<String, VideoSummary>,
    pub switches: Vec<SwitchSummary>,
    pub epochs: Vec<EpochSummary>,
    pub replies: Vec<CommandReply>,
    pub end_time: SimTime,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    run_id: &'a str,
    scenario: &'a str,
    arm: Arm,
    seed: u64,
    config_hash: &'a str,
    version: &'a str,
    duration_s: u64,
    end_time_us: u64,
    dataset_records: usize,
    adjustments: usize,
    video: &'a BTreeMap<String, VideoSummary>,
    flows: Vec<&'a FlowStats>,
    switches: &'a [SwitchSummary],
    epochs: &'a [EpochSummary],
}

impl RunResult {
    pub fn fps(&self, video: &str) -> Option<f64> {
        self.video.get(video).map(|v| v.delivered_fps)
    }

    pub fn report_json(&self, scenario: &Scenario) -> String {
        let report = Report {
            run_id: &self.run_id,
            scenario: &scenario.config.name,
            arm: self.arm,
            seed: scenario.config.seed,
            config_hash: &scenario.config_hash,
            version: env!("CARGO_PKG_VERSION"),
            duration_s: scenario.config.duration_s,
            end_time_us: self.end_time.as_micros(),
            dataset_records: self.dataset.len(),
            adjustments: self.log.len(),
            video: &self.video,
            flows: self.flow_stats.values().collect(),
            switches: &self.switches,
            epochs: &self.epochs,
        };
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
    }

    /// Writes `dataset.csv`, `adjustments.csv`, `flow_stats.csv` and
    /// `report.json` into `dir`.
    pub fn write_artifacts(&self, scenario: &Scenario, dir: &Path) -> Result<(), ScenarioError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| ScenarioError::IoFailure { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;

        let mut dataset = Vec::new();
        self.dataset.write_to(&mut dataset)?;

        let mut adjustments = Vec::new();
        writeln!(adjustments, "# run={}", self.run_id).expect("in-memory write");
        self.log.write_csv(&mut adjustments).expect("in-memory write");

        let mut stats = format!("# run={}\n{}\n", self.run_id, FlowStats::CSV_HEADER);
        for s in self.flow_stats.values() {
            stats.push_str(&s.csv_row());
            stats.push('\n');
        }

        let report = self.report_json(scenario);
        let files: [(&str, &[u8]); 4] = [
            ("dataset.csv", &dataset),
            ("adjustments.csv", &adjustments),
            ("flow_stats.csv", stats.as_bytes()),
            ("report.json", report.as_bytes()),
        ];
        for (name, bytes) in files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(io(&path))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Arrive { sw: usize, port: u16, pkt: usize },
    PortReady { sw: usize, port: u16 },
    Epoch,
    Command(usize),
}

#[derive(Debug, Clone, Copy)]
enum Hop {
    Switch { sw: usize, port: u16 },
    Host,
}

struct Engine {
    switches: Vec<Switch>,
    names: Vec<String>,
    collector_on: Vec<bool>,
    collector: Collector,
    next_hop: BTreeMap<(usize, u16), Hop>,
    packets: Vec<Packet>,
    fates: Vec<Fate>,
    queue: BinaryHeap<Reverse<(SimTime, u64, Event)>>,
    seq: u64,
}

impl Engine {
    fn push(&mut self, at: SimTime, ev: Event) {
        self.queue.push(Reverse((at, self.seq, ev)));
        self.seq += 1;
    }

    fn arrive(&mut self, sw: usize, port: u16, pkt: usize, now: SimTime) -> Result<(), ScenarioError> {
        let packet = self.packets[pkt].clone();
        match self.switches[sw].receive(packet, port, now)? {
            ReceiveOutcome::Queued { port, .. } => self.try_transmit(sw, port, now)?,
            ReceiveOutcome::Dropped { .. } | ReceiveOutcome::Unroutable => {
                self.fates[pkt] = Fate::Dropped(now)
            }
        }
        Ok(())
    }

    fn try_transmit(&mut self, sw: usize, port: u16, now: SimTime) -> Result<(), ScenarioError> {
        let sink: Option<&mut dyn TelemetrySink> = if self.collector_on[sw] {
            Some(&mut self.collector)
        } else {
            None
        };
        let Some(tx) = self.switches[sw].transmit(port, now, sink)? else {
            return Ok(());
        };
        let pkt = tx.out.item.packet.packet_seq as usize;
        self.push(tx.out.egress_done, Event::PortReady { sw, port });
        match self.next_hop.get(&(sw, port)) {
            Some(Hop::Switch { sw: next, port: in_port }) => {
                let (next, in_port) = (*next, *in_port);
                self.push(tx.arrives_at, Event::Arrive { sw: next, port: in_port, pkt });
            }
            Some(Hop::Host) | None => self.fates[pkt] = Fate::Delivered(tx.arrives_at),
        }
        Ok(())
    }
}

fn label_map(scenario: &Scenario) -> Result<PortLabelMap, ScenarioError> {
    let labels = &scenario.config.labels;
    let invalid = |e: CollectorError| ScenarioError::ConfigInvalid(e.to_string());
    let mut entries: Vec<(crate::model::ClassLabel, Vec<u16>)> = Vec::new();
    if let Some(p) = &labels.profiles {
        let profiles = load_profiles(scenario, Some(p))?;
        for c in profiles.classes {
            if c.label != crate::model::ClassLabel::FALLBACK {
                entries.push((c.label, c.dst_ports));
            }
        }
    }
    for p in &labels.ports {
        entries.push((p.class, p.ports.clone()));
    }
    let mut map = PortLabelMap::new(entries).map_err(invalid)?;
    for f in &labels.flows {
        let key = f
            .flow
            .parse()
            .map_err(|e: ModelError| ScenarioError::ConfigInvalid(e.to_string()))?;
        map = map.with_override(key, f.class);
    }
    Ok(map)
}

fn load_profiles(scenario: &Scenario, p: Option<&str>) -> Result<IotProfiles, ScenarioError> {
    match p {
        None | Some("shipped") => Ok(IotProfiles::shipped()),
        Some(path) => {
            let full = scenario.resolve(Path::new(path));
            let text = fs::read_to_string(&full).map_err(|e| {
                ScenarioError::ConfigInvalid(format!("cannot read {}: {e}", full.display()))
            })?;
            IotProfiles::from_toml(&text).map_err(|e| ScenarioError::ConfigInvalid(e.to_string()))
        }
    }
}

/// Packets of one traffic entry, plus the index of the host that sends them.
fn traffic_packets(
    scenario: &Scenario,
    t: &TrafficConfig,
    host_of: &BTreeMap<&str, usize>,
) -> Result<(usize, Vec<Packet>), ScenarioError> {
    let hosts = &scenario.config.hosts;
    let key = |src: &str, dst: &str, sp: u16, dp: u16, proto: u8| {
        FlowKey::new(
            hosts[host_of[src]].ip.into(),
            hosts[host_of[dst]].ip.into(),
            sp,
            dp,
            proto,
        )
    };
    Ok(match t {
        TrafficConfig::Video(v) => (
            host_of[v.src.as_str()],
            traffic::gen_video(&VideoSpec {
                key: key(&v.src, &v.dst, v.src_port, v.dst_port, v.protocol),
                fps: v.fps,
                packets_per_frame: v.packets_per_frame,
                packet_size_bytes: v.packet_size_bytes,
                start: SimTime::from_micros(v.start_us),
                duration_us: v.duration_us,
            })?,
        ),
        TrafficConfig::Cbr(c) => (
            host_of[c.src.as_str()],
            traffic::gen_cbr(&CbrSpec {
                key: key(&c.src, &c.dst, c.src_port, c.dst_port, c.protocol),
                rate_bps: c.rate_bps,
                packet_size_bytes: c.packet_size_bytes,
                start: SimTime::from_micros(c.start_us),
                duration_us: c.duration_us,
            })?,
        ),
        TrafficConfig::Trace(tr) => {
            let h = host_of[tr.host.as_str()];
            let path = scenario.resolve(&tr.path);
            let file = fs::File::open(&path).map_err(|e| {
                ScenarioError::ConfigInvalid(format!("cannot read {}: {e}", path.display()))
            })?;
            let trace = traffic::read_trace(file)?;
            (h, traffic::replay_trace(&trace.rows, hosts[h].rate_bps)?)
        }
        TrafficConfig::SyntheticIot(s) => {
            let h = host_of[s.host.as_str()];
            let profiles = load_profiles(scenario, s.profiles.as_ref().and_then(|p| p.to_str()))?;
            let seed = s.seed.unwrap_or(scenario.config.seed);
            let trace = traffic::gen_synthetic_iot_trace(&profiles, s.packets_per_class, seed)?;
            (h, traffic::replay_trace(&trace.rows, hosts[h].rate_bps)?)
        }
    })
}

/// Breadth-first next-hop port from every switch toward every other switch.
fn switch_paths(n: usize, links: &[(usize, u16, usize)]) -> Vec<Vec<Option<u16>>> {
    let mut first_port = vec![vec![None; n]; n];
    for (src, row) in first_port.iter_mut().enumerate() {
        let mut seen = vec![false; n];
        seen[src] = true;
        let mut queue = VecDeque::new();
        for &(a, port, b) in links {
            if a == src && !seen[b] {
                seen[b] = true;
                row[b] = Some(port);
                queue.push_back(b);
            }
        }
        while let Some(cur) = queue.pop_front() {
            for &(a, _, b) in links {
                if a == cur && !seen[b] {
                    seen[b] = true;
                    row[b] = row[cur];
                    queue.push_back(b);
                }
            }
        }
    }
    first_port
}

/// Runs one arm of a scenario to completion: traffic stops at its own end
/// time and the engine keeps going until every queue has drained.
pub fn run_scenario(
    scenario: &Scenario,
    arm: Arm,
    options: &RunOptions,
) -> Result<RunResult, ScenarioError> {
    let c = &scenario.config;
    let run_id = scenario.run_id(arm);
    let labels = label_map(scenario)?;

    let sw_of: BTreeMap<&str, usize> =
        c.switches.iter().enumerate().map(|(i, s)| (s.name.as_str(), i)).collect();
    let host_of: BTreeMap<&str, usize> =
        c.hosts.iter().enumerate().map(|(i, h)| (h.name.as_str(), i)).collect();

    let settings = SwitchSettings {
        queue_levels: c.switch_defaults.queue_levels,
        queue_capacity: c.switch_defaults.queue_capacity,
        register_capacity: c.switch_defaults.register_capacity,
    };
    let mut switches: Vec<Switch> =
        c.switches.iter().map(|s| Switch::new(&s.name, settings.clone())).collect();
    let mut next_hop = BTreeMap::new();
    let mut directed = Vec::new();
    for h in &c.hosts {
        let sw = sw_of[h.switch.as_str()];
        switches[sw].add_port(h.port, h.rate_bps, h.propagation_us)?;
        next_hop.insert((sw, h.port), Hop::Host);
    }
    for l in &c.links {
        let (a, b) = (sw_of[l.a.as_str()], sw_of[l.b.as_str()]);
        switches[a].add_port(l.a_port, l.rate_bps, l.propagation_us)?;
        switches[b].add_port(l.b_port, l.rate_bps, l.propagation_us)?;
        next_hop.insert((a, l.a_port), Hop::Switch { sw: b, port: l.b_port });
        next_hop.insert((b, l.b_port), Hop::Switch { sw: a, port: l.a_port });
        directed.push((a, l.a_port, b));
        directed.push((b, l.b_port, a));
    }
    let paths = switch_paths(switches.len(), &directed);
    for (si, sw) in switches.iter_mut().enumerate() {
        for h in &c.hosts {
            let hs = sw_of[h.switch.as_str()];
            let port = if hs == si { Some(h.port) } else { paths[si][hs] };
            if let Some(port) = port {
                sw.add_route(h.ip.into(), port)?;
            }
        }
        if let Some(p) = c.switches[si].default_port {
            sw.set_default_port(p)?;
        }
    }
    let collector_on: Vec<bool> = c.switches.iter().map(|s| s.collector).collect();
    for (sw, on) in switches.iter_mut().zip(&collector_on) {
        set_mirroring(sw, *on && c.mirror.flag, c.mirror.interval_us)?;
    }

    // Traffic for this arm, merged into one emission order.
    let active: Vec<&TrafficConfig> = c.traffic.iter().filter(|t| t.arms().contains(&arm)).collect();
    let mut senders = Vec::new();
    let mut streams = Vec::new();
    for t in &active {
        let (host, packets) = traffic_packets(scenario, t, &host_of)?;
        senders.push(host);
        streams.push(packets);
    }
    let merged = traffic::merge_streams(streams);
    let mut engine = Engine {
        switches,
        names: c.switches.iter().map(|s| s.name.clone()).collect(),
        collector_on,
        collector: Collector::new(labels, run_id.clone()),
        next_hop,
        packets: Vec::with_capacity(merged.len()),
        fates: vec![Fate::InFlight; merged.len()],
        queue: BinaryHeap::new(),
        seq: 0,
    };
    let mut nic_free = vec![SimTime::ZERO; c.hosts.len()];
    let mut origin = Vec::with_capacity(merged.len());
    for (i, (src, packet)) in merged.into_iter().enumerate() {
        let h = senders[src];
        let host = &c.hosts[h];
        let depart = packet.created_at.max(nic_free[h]);
        nic_free[h] = depart.add_micros(serialization_delay_us(packet.size_bytes, host.rate_bps))?;
        let arrive = nic_free[h].add_micros(host.propagation_us)?;
        engine.push(
            arrive,
            Event::Arrive {
                sw: sw_of[host.switch.as_str()],
                port: host.port,
                pkt: i,
            },
        );
        engine.packets.push(packet);
        origin.push(src);
    }

    // Control plane: epochs in the adjusted arm, scripted verbs in any arm.
    let control_sw = c.control.switch.as_deref().map(|n| sw_of[n]).unwrap_or(0);
    if arm.control_enabled() {
        let mut t = scenario.policy.epoch_us;
        while t <= scenario.duration_us() {
            engine.push(SimTime::from_micros(t), Event::Epoch);
            t += scenario.policy.epoch_us;
        }
    }
    let mut script_targets = Vec::new();
    for (i, cmd) in options.script.iter().enumerate() {
        let target = match &cmd.switch {
            Some(name) => *sw_of.get(name.as_str()).ok_or_else(|| {
                ScenarioError::ConfigInvalid(format!("script: unknown switch `{name}`"))
            })?,
            None => control_sw,
        };
        script_targets.push(target);
        engine.push(cmd.at, Event::Command(i));
    }

    let hyper = Hyperparams {
        max_depth: c.control.max_depth,
        k: c.control.k,
        n_trees: c.control.trees,
        ..Hyperparams::default()
    };
    let mut adjuster = Adjuster::new(scenario.policy.clone());
    let mut classifier: Option<Classifier> = None;
    let mut trained_on = 0usize;
    let mut epochs = Vec::new();
    let mut replies = Vec::new();
    let mut now = SimTime::ZERO;

    while let Some(Reverse((at, _, ev))) = engine.queue.pop() {
        now = at;
        match ev {
            Event::Arrive { sw, port, pkt } => engine.arrive(sw, port, pkt, now)?,
            Event::PortReady { sw, port } => engine.try_transmit(sw, port, now)?,
            Event::Epoch => {
                let ds = engine.collector.dataset();
                let mut errors = Vec::new();
                if ds.len() > trained_on {
                    let samples = Samples::from_dataset(ds);
                    let classes = samples.class_counts().iter().filter(|&&n| n > 0).count();
                    if classes >= 2 {
                        match Classifier::train(c.control.classifier, &samples, &hyper, c.seed) {
                            Ok(m) => {
                                classifier = Some(m);
                                trained_on = ds.len();
                            }
                            Err(e) => errors.push(e.to_string()),
                        }
                    }
                }
                let mut summary = EpochSummary {
                    time_us: now.as_micros(),
                    trained_on,
                    classified: 0,
                    writes: 0,
                    errors,
                };
                if let Some(clf) = &classifier {
                    let out = adjuster.run_epoch(
                        engine.collector.dataset().records(),
                        clf,
                        &mut engine.switches[control_sw],
                        now,
                    );
                    summary.classified = out.classified;
                    summary.writes = out.writes;
                    summary
                        .errors
                        .extend(out.errors.into_iter().map(|(k, e)| format!("{k}: {e}")));
                }
                epochs.push(summary);
            }
            Event::Command(i) => {
                let sw = script_targets[i];
                let cmd = &options.script[i].command;
                let reply = match engine.switches[sw].execute(cmd) {
                    Ok(ControlReply::Ok) => "ok".to_string(),
                    Ok(ControlReply::Registers(dump)) => dump.to_string(),
                    Err(e) => format!("error: {e}"),
                };
                replies.push(CommandReply {
                    time_us: now.as_micros(),
                    switch: engine.names[sw].clone(),
                    command: cmd.to_string(),
                    reply,
                });
            }
        }
    }

    let deliveries: Vec<DeliveryEvent> = engine
        .packets
        .iter()
        .zip(&engine.fates)
        .map(|(p, &fate)| DeliveryEvent {
            key: p.key,
            size_bytes: p.size_bytes,
            created_at: p.created_at,
            frame_seq: p.frame_seq,
            fate,
        })
        .collect();
    let sources: Vec<String> = origin.iter().map(|&s| active[s].name().to_string()).collect();
    let flow_stats = qoe::accumulate(&deliveries, scenario.duration_us());

    let mut video = BTreeMap::new();
    for (si, t) in active.iter().enumerate() {
        if let TrafficConfig::Video(v) = t {
            let ledger = FrameLedger::from_events(
                deliveries.iter().zip(&origin).filter(|(_, &o)| o == si).map(|(d, _)| d),
            );
            let complete = ledger.complete_frames(DEFAULT_FRAME_DEADLINE_US);
            video.insert(
                v.name.clone(),
                VideoSummary {
                    frames: ledger.len(),
                    complete_frames: complete,
                    delivered_fps: complete as f64 / (v.duration_us as f64 / 1e6),
                },
            );
        }
    }

    let switches = engine
        .switches
        .iter()
        .map(|s| SwitchSummary {
            name: s.name().to_string(),
            mirrored: s.mirror_counters().mirrored,
            sink_drops: s.mirror_counters().sink_drops,
            unroutable: s.unroutable(),
            flows: s
                .flow_counters()
                .iter()
                .enumerate()
                .map(|(i, f): (usize, &FlowCounters)| FlowCounterRow {
                    flow_id: i as u32,
                    flow: s
                        .registers()
                        .key_of(crate::model::FlowId(i as u32))
                        .map(|k| k.to_string())
                        .unwrap_or_default(),
                    injected: f.injected,
                    dropped: f.dropped,
                    transmitted: f.transmitted,
                })
                .collect(),
        })
        .collect();

    Ok(RunResult {
        run_id,
        arm,
        dataset: engine.collector.into_dataset(),
        log: adjuster.into_log(),
        deliveries,
        sources,
        flow_stats,
        video,
        switches,
        epochs,
        replies,
        end_time: now,
    })
}
