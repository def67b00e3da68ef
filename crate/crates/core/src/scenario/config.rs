use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adjuster::Policy;
use crate::ml::ModelKind;
use crate::model::{ClassLabel, FlowKey};

use super::ScenarioError;

/// Which variant of the three-arm experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    /// Video only.
    Baseline,
    /// Video plus background traffic, no control loop.
    Congested,
    /// Congested plus the closed control loop.
    Adjusted,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Baseline, Arm::Congested, Arm::Adjusted];

    pub fn control_enabled(self) -> bool {
        self == Arm::Adjusted
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Baseline => "baseline",
            Arm::Congested => "congested",
            Arm::Adjusted => "adjusted",
        })
    }
}

impl FromStr for Arm {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Arm::Baseline),
            "congested" => Ok(Arm::Congested),
            "adjusted" => Ok(Arm::Adjusted),
            other => Err(ScenarioError::ConfigInvalid(format!("unknown arm `{other}`"))),
        }
    }
}

fn all_arms() -> Vec<Arm> {
    Arm::ALL.to_vec()
}

fn udp() -> u8 {
    17
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchDefaults {
    pub queue_levels: usize,
    pub queue_capacity: usize,
    pub register_capacity: usize,
}

impl Default for SwitchDefaults {
    fn default() -> Self {
        SwitchDefaults {
            queue_levels: 8,
            queue_capacity: 64,
            register_capacity: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchConfig {
    pub name: String,
    /// Egress port for destinations with no host route.
    #[serde(default)]
    pub default_port: Option<u16>,
    /// Clone telemetry from this switch to the collector.
    #[serde(default)]
    pub collector: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostConfig {
    pub name: String,
    pub ip: Ipv4Addr,
    pub switch: String,
    pub port: u16,
    pub rate_bps: u64,
    #[serde(default)]
    pub propagation_us: u64,
    #[serde(default)]
    pub bottleneck: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub a: String,
    pub a_port: u16,
    pub b: String,
    pub b_port: u16,
    pub rate_bps: u64,
    #[serde(default)]
    pub propagation_us: u64,
    #[serde(default)]
    pub bottleneck: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoTraffic {
    pub name: String,
    pub src: String,
    pub dst: String,
    pub src_port: u16,
    pub dst_port: u16,
    #[serde(default = "udp")]
    pub protocol: u8,
    pub fps: u32,
    pub packets_per_frame: u32,
    pub packet_size_bytes: u32,
    #[serde(default)]
    pub start_us: u64,
    pub duration_us: u64,
    #[serde(default = "all_arms")]
    pub arms: Vec<Arm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CbrTraffic {
    pub name: String,
    pub src: String,
    pub dst: String,
    pub src_port: u16,
    pub dst_port: u16,
    #[serde(default = "udp")]
    pub protocol: u8,
    pub rate_bps: u64,
    pub packet_size_bytes: u32,
    #[serde(default)]
    pub start_us: u64,
    pub duration_us: u64,
    #[serde(default = "all_arms")]
    pub arms: Vec<Arm>,
}

/// Replays a trace file from `host`, paced at the host link rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceTraffic {
    pub name: String,
    pub host: String,
    pub path: PathBuf,
    #[serde(default = "all_arms")]
    pub arms: Vec<Arm>,
}

/// Generates the synthetic device-class trace and replays it from `host`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticIotTraffic {
    pub name: String,
    pub host: String,
    /// Profile file; the shipped profiles when absent.
    #[serde(default)]
    pub profiles: Option<PathBuf>,
    pub packets_per_class: usize,
    /// Overrides the run seed for trace generation.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "all_arms")]
    pub arms: Vec<Arm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrafficConfig {
    Video(VideoTraffic),
    Cbr(CbrTraffic),
    Trace(TraceTraffic),
    SyntheticIot(SyntheticIotTraffic),
}

impl TrafficConfig {
    pub fn name(&self) -> &str {
        match self {
            TrafficConfig::Video(t) => &t.name,
            TrafficConfig::Cbr(t) => &t.name,
            TrafficConfig::Trace(t) => &t.name,
            TrafficConfig::SyntheticIot(t) => &t.name,
        }
    }

    pub fn arms(&self) -> &[Arm] {
        match self {
            TrafficConfig::Video(t) => &t.arms,
            TrafficConfig::Cbr(t) => &t.arms,
            TrafficConfig::Trace(t) => &t.arms,
            TrafficConfig::SyntheticIot(t) => &t.arms,
        }
    }

    fn hosts(&self) -> Vec<&str> {
        match self {
            TrafficConfig::Video(t) => vec![&t.src, &t.dst],
            TrafficConfig::Cbr(t) => vec![&t.src, &t.dst],
            TrafficConfig::Trace(t) => vec![&t.host],
            TrafficConfig::SyntheticIot(t) => vec![&t.host],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortLabel {
    pub class: ClassLabel,
    pub ports: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowLabel {
    pub flow: String,
    pub class: ClassLabel,
}

/// Ground-truth labeling at the collector. Flow entries win over port entries;
/// anything unmatched is `Others`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelConfig {
    /// Take port sets from this profile file (or the shipped profiles when
    /// `"shipped"`).
    #[serde(default)]
    pub profiles: Option<String>,
    #[serde(default)]
    pub ports: Vec<PortLabel>,
    #[serde(default)]
    pub flows: Vec<FlowLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorConfig {
    #[serde(default = "yes")]
    pub flag: bool,
    #[serde(default)]
    pub interval_us: u64,
}

impl Default for MirrorConfig {
    fn default() -> Self {
        MirrorConfig {
            flag: true,
            interval_us: 0,
        }
    }
}

fn default_kind() -> ModelKind {
    ModelKind::Dt
}

fn default_k() -> usize {
    5
}

fn default_trees() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    /// Switch whose registers the adjuster writes.
    #[serde(default)]
    pub switch: Option<String>,
    /// Policy file, relative to the config file.
    #[serde(default)]
    pub policy_file: Option<PathBuf>,
    #[serde(default = "default_kind")]
    pub classifier: ModelKind,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_trees")]
    pub trees: usize,
    #[serde(default)]
    pub max_depth: Option<usize>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            switch: None,
            policy_file: None,
            classifier: default_kind(),
            k: default_k(),
            trees: default_trees(),
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

/// A scenario file as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub duration_s: u64,
    #[serde(default)]
    pub switch_defaults: SwitchDefaults,
    #[serde(rename = "switch")]
    pub switches: Vec<SwitchConfig>,
    #[serde(rename = "host")]
    pub hosts: Vec<HostConfig>,
    #[serde(rename = "link", default)]
    pub links: Vec<LinkConfig>,
    pub traffic: Vec<TrafficConfig>,
    #[serde(default)]
    pub labels: LabelConfig,
    #[serde(default)]
    pub mirror: MirrorConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A parsed, validated scenario with its policy and external inputs loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub policy: Policy,
    /// Directory that relative paths in the config resolve against.
    pub base_dir: Option<PathBuf>,
    /// First 12 hex digits of the SHA-256 over config and policy text.
    pub config_hash: String,
}

pub const DUMBBELL_CFG: &str = include_str!("../../scenarios/dumbbell.cfg");
pub const DUMBBELL_POLICY: &str = include_str!("../../scenarios/dumbbell.policy");
pub const IOT_CFG: &str = include_str!("../../scenarios/iot.cfg");

impl Scenario {
    /// Reads a config file and the policy file it names.
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::ConfigInvalid(
            format!("cannot read {}: {e}", path.display()),
        ))?;
        let base = path.parent().map(Path::to_path_buf);
        let config = parse_config(&text)?;
        let policy_text = match &config.control.policy_file {
            Some(p) => {
                let full = resolve(base.as_deref(), p);
                std::fs::read_to_string(&full).map_err(|e| {
                    ScenarioError::ConfigInvalid(format!("cannot read {}: {e}", full.display()))
                })?
            }
            None => String::new(),
        };
        Scenario::assemble(config, &text, &policy_text, base)
    }

    /// Builds a scenario from in-memory texts. Relative paths resolve
    /// against `base_dir` (or the working directory).
    pub fn from_texts(
        config_text: &str,
        policy_text: &str,
        base_dir: Option<PathBuf>,
    ) -> Result<Scenario, ScenarioError> {
        let config = parse_config(config_text)?;
        Scenario::assemble(config, config_text, policy_text, base_dir)
    }

    /// The shipped two-switch video scenario.
    pub fn dumbbell() -> Scenario {
        Scenario::from_texts(DUMBBELL_CFG, DUMBBELL_POLICY, None).expect("shipped config is valid")
    }

    /// The shipped device-classification scenario.
    pub fn iot() -> Scenario {
        Scenario::from_texts(IOT_CFG, "", None).expect("shipped config is valid")
    }

    fn assemble(
        config: ScenarioConfig,
        config_text: &str,
        policy_text: &str,
        base_dir: Option<PathBuf>,
    ) -> Result<Scenario, ScenarioError> {
        let policy: Policy = policy_text.parse()?;
        let mut h = Sha256::new();
        h.update(config_text.as_bytes());
        h.update([0u8]);
        h.update(policy_text.as_bytes());
        let config_hash = hex::encode(h.finalize())[..12].to_string();
        let s = Scenario {
            config,
            policy,
            base_dir,
            config_hash,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        resolve(self.base_dir.as_deref(), p)
    }

    pub fn with_seed(mut self, seed: u64) -> Scenario {
        self.config.seed = seed;
        self
    }

    pub fn run_id(&self, arm: Arm) -> String {
        format!(
            "{}-{}-{}-s{}-v{}",
            self.config.name,
            arm,
            self.config_hash,
            self.config.seed,
            env!("CARGO_PKG_VERSION")
        )
    }

    pub fn duration_us(&self) -> u64 {
        self.config.duration_s * 1_000_000
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let c = &self.config;
        let bad = |m: String| Err(ScenarioError::ConfigInvalid(m));
        if c.duration_s == 0 {
            return bad("duration_s must be positive".into());
        }
        if c.switch_defaults.queue_levels == 0 || c.switch_defaults.queue_levels > 256 {
            return bad("queue_levels must lie in 1..=256".into());
        }
        if c.switch_defaults.queue_capacity == 0 {
            return bad("queue_capacity must be positive".into());
        }
        let mut switch_ports: BTreeMap<&str, BTreeSet<u16>> = BTreeMap::new();
        for s in &c.switches {
            if switch_ports.insert(&s.name, BTreeSet::new()).is_some() {
                return bad(format!("duplicate switch `{}`", s.name));
            }
        }
        let mut claim = |sw: &str, port: u16, what: &str| -> Result<(), ScenarioError> {
            let Some(ports) = switch_ports.get_mut(sw) else {
                return Err(ScenarioError::ConfigInvalid(format!("{what}: unknown switch `{sw}`")));
            };
            if !ports.insert(port) {
                return Err(ScenarioError::ConfigInvalid(format!(
                    "{what}: port {port} on `{sw}` already in use"
                )));
            }
            Ok(())
        };
        let mut host_names = BTreeSet::new();
        let mut host_ips = BTreeSet::new();
        for h in &c.hosts {
            if !host_names.insert(h.name.as_str()) {
                return bad(format!("duplicate host `{}`", h.name));
            }
            if !host_ips.insert(h.ip) {
                return bad(format!("duplicate host address {}", h.ip));
            }
            if h.rate_bps == 0 {
                return bad(format!("host `{}`: rate_bps must be positive", h.name));
            }
            claim(&h.switch, h.port, &format!("host `{}`", h.name))?;
        }
        for l in &c.links {
            if l.rate_bps == 0 {
                return bad(format!("link {}-{}: rate_bps must be positive", l.a, l.b));
            }
            if l.a == l.b {
                return bad(format!("link {}-{} loops back", l.a, l.b));
            }
            claim(&l.a, l.a_port, "link")?;
            claim(&l.b, l.b_port, "link")?;
        }
        let bottlenecks = c.links.iter().filter(|l| l.bottleneck).count()
            + c.hosts.iter().filter(|h| h.bottleneck).count();
        if bottlenecks != 1 {
            return bad(format!("exactly one bottleneck link required, found {bottlenecks}"));
        }
        for s in &c.switches {
            if let Some(p) = s.default_port {
                if !switch_ports[s.name.as_str()].contains(&p) {
                    return bad(format!("switch `{}`: default_port {p} is not connected", s.name));
                }
            }
        }
        let mut names = BTreeSet::new();
        for t in &c.traffic {
            if !names.insert(t.name()) {
                return bad(format!("duplicate traffic name `{}`", t.name()));
            }
            for h in t.hosts() {
                if !host_names.contains(h) {
                    return bad(format!("traffic `{}`: unknown host `{h}`", t.name()));
                }
            }
            if t.arms().is_empty() {
                return bad(format!("traffic `{}`: empty arm list", t.name()));
            }
            match t {
                TrafficConfig::Video(v) => {
                    if v.fps == 0 || v.packets_per_frame == 0 || v.packet_size_bytes == 0 {
                        return bad(format!("traffic `{}`: fps, packets and size must be positive", v.name));
                    }
                    if v.src == v.dst {
                        return bad(format!("traffic `{}`: source equals destination", v.name));
                    }
                }
                TrafficConfig::Cbr(v) => {
                    if v.rate_bps == 0 || v.packet_size_bytes == 0 {
                        return bad(format!("traffic `{}`: rate and size must be positive", v.name));
                    }
                    if v.src == v.dst {
                        return bad(format!("traffic `{}`: source equals destination", v.name));
                    }
                }
                TrafficConfig::Trace(_) | TrafficConfig::SyntheticIot(_) => {}
            }
        }
        for f in &c.labels.flows {
            if let Err(e) = f.flow.parse::<FlowKey>() {
                return bad(format!("label flow: {e}"));
            }
        }
        if let Some(sw) = &c.control.switch {
            if !switch_ports.contains_key(sw.as_str()) {
                return bad(format!("control: unknown switch `{sw}`"));
            }
        }
        if c.control.k == 0 || c.control.trees == 0 {
            return bad("control: k and trees must be positive".into());
        }
        self.policy
            .validate(c.switch_defaults.queue_levels)
            .map_err(|e| ScenarioError::ConfigInvalid(e.to_string()))?;
        Ok(())
    }
}

fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

fn parse_config(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    toml::from_str(text).map_err(|e| ScenarioError::ConfigInvalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_configs_validate() {
        let d = Scenario::dumbbell();
        assert_eq!(d.config.duration_s, 60);
        assert_eq!(d.config_hash.len(), 12);
        let i = Scenario::iot();
        assert!(i.policy.class_priority.is_empty());
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = DUMBBELL_CFG.replace("duration_s = 60", "duration_s = 60\ncolour = 3");
        assert!(matches!(
            Scenario::from_texts(&text, DUMBBELL_POLICY, None),
            Err(ScenarioError::ConfigInvalid(_))
        ));
    }

    #[test]
    fn bottleneck_must_be_unique() {
        let text = DUMBBELL_CFG.replace("bottleneck = true", "bottleneck = false");
        let e = Scenario::from_texts(&text, DUMBBELL_POLICY, None).unwrap_err();
        assert!(e.to_string().contains("bottleneck"), "{e}");
    }

    #[test]
    fn policy_levels_checked_against_queues() {
        assert!(Scenario::from_texts(DUMBBELL_CFG, "Cameras: 9\n", None).is_err());
    }

    #[test]
    fn hash_tracks_policy() {
        let a = Scenario::from_texts(DUMBBELL_CFG, DUMBBELL_POLICY, None).unwrap();
        let b = Scenario::from_texts(DUMBBELL_CFG, "Cameras: 5\n", None).unwrap();
        assert_ne!(a.config_hash, b.config_hash);
        assert!(a.run_id(Arm::Adjusted).starts_with("dumbbell-adjusted-"));
    }

    #[test]
    fn arms_parse() {
        assert_eq!("congested".parse::<Arm>().unwrap(), Arm::Congested);
        assert!("other".parse::<Arm>().is_err());
    }
}
