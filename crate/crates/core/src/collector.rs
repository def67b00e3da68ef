//! Receives mirrored telemetry, labels each record by destination port and
//! keeps the labeled dataset in an append-only store with file persistence.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::model::{ClassLabel, FlowKey, ModelError};
use crate::switch::{SinkUnavailable, TelemetryRecord, TelemetrySink};
use crate::traffic::{self, IotProfiles, TrafficError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CollectorError {
    #[error("destination port {port} is mapped to both {first} and {second}")]
    OverlappingPortSets {
        port: u16,
        first: ClassLabel,
        second: ClassLabel,
    },
    #[error("dataset schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error(transparent)]
    FieldOverflow(ModelError),
    #[error("row {0} has no label")]
    MissingLabel(usize),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

impl From<TrafficError> for CollectorError {
    fn from(e: TrafficError) -> Self {
        match e {
            TrafficError::Io(io) => CollectorError::IoFailure(io),
            TrafficError::Field(m) => CollectorError::FieldOverflow(m),
            TrafficError::Csv(c) => match c.into_kind() {
                csv::ErrorKind::Io(io) => CollectorError::IoFailure(io),
                kind => CollectorError::SchemaMismatch(format!("{kind:?}")),
            },
            other => CollectorError::SchemaMismatch(other.to_string()),
        }
    }
}

/// Destination-port sets per class, plus per-flow overrides for traffic that
/// has no meaningful service port.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PortLabelMap {
    ports: BTreeMap<u16, ClassLabel>,
    flow_overrides: BTreeMap<FlowKey, ClassLabel>,
}

impl PortLabelMap {
    pub fn new<I, P>(entries: I) -> Result<Self, CollectorError>
    where
        I: IntoIterator<Item = (ClassLabel, P)>,
        P: IntoIterator<Item = u16>,
    {
        let mut ports = BTreeMap::new();
        for (label, set) in entries {
            for port in set {
                if let Some(first) = ports.insert(port, label) {
                    if first != label {
                        return Err(CollectorError::OverlappingPortSets {
                            port,
                            first,
                            second: label,
                        });
                    }
                }
            }
        }
        Ok(PortLabelMap {
            ports,
            flow_overrides: BTreeMap::new(),
        })
    }

    /// Port map for a synthetic trace: every class except the fallback is
    /// keyed by its service ports.
    pub fn from_profiles(profiles: &IotProfiles) -> Result<Self, CollectorError> {
        Self::new(
            profiles
                .classes
                .iter()
                .filter(|p| p.label != ClassLabel::FALLBACK)
                .map(|p| (p.label, p.dst_ports.iter().copied())),
        )
    }

    pub fn with_override(mut self, key: FlowKey, label: ClassLabel) -> Self {
        self.flow_overrides.insert(key, label);
        self
    }

    pub fn fallback(&self) -> ClassLabel {
        ClassLabel::FALLBACK
    }

    pub fn label_for(&self, record: &TelemetryRecord) -> ClassLabel {
        if let Some(label) = self.flow_overrides.get(&record.key()) {
            return *label;
        }
        self.ports
            .get(&record.dst_port)
            .copied()
            .unwrap_or(ClassLabel::FALLBACK)
    }
}

/// Append-only labeled telemetry store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    run_id: String,
    schema_version: u32,
    records: Vec<TelemetryRecord>,
}

impl Dataset {
    pub fn new(run_id: impl Into<String>) -> Self {
        Dataset {
            run_id: run_id.into(),
            schema_version: SCHEMA_VERSION,
            records: Vec::new(),
        }
    }

    pub fn from_records(
        run_id: impl Into<String>,
        records: Vec<TelemetryRecord>,
    ) -> Result<Self, CollectorError> {
        let mut ds = Dataset::new(run_id);
        for r in records {
            ds.append(r)?;
        }
        Ok(ds)
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn schema_version(&self) -> u32 {
        self.schema_version
    }

    pub fn records(&self) -> &[TelemetryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<ClassLabel> {
        self.records
            .iter()
            .map(|r| r.label.expect("stored records are labeled"))
            .collect()
    }

    pub fn append(&mut self, record: TelemetryRecord) -> Result<(), CollectorError> {
        if record.label.is_none() {
            return Err(CollectorError::MissingLabel(self.records.len()));
        }
        record.validate().map_err(CollectorError::FieldOverflow)?;
        self.records.push(record);
        Ok(())
    }

    /// A new dataset holding the records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            run_id: self.run_id.clone(),
            schema_version: self.schema_version,
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    pub fn header_line(&self) -> String {
        format!("schema={} run={}", self.schema_version, self.run_id)
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<usize, CollectorError> {
        Ok(traffic::write_trace(
            out,
            &[self.header_line()],
            &self.records,
            true,
        )?)
    }

    pub fn read_from<R: Read>(input: R) -> Result<Dataset, CollectorError> {
        let file = traffic::read_trace(input)?;
        let header = file
            .comments
            .first()
            .ok_or_else(|| CollectorError::SchemaMismatch("missing `# schema=` line".into()))?;
        let (schema_version, run_id) = parse_header(header)?;
        if schema_version != SCHEMA_VERSION {
            return Err(CollectorError::SchemaMismatch(format!(
                "unsupported schema version {schema_version}"
            )));
        }
        if let Some(i) = file.rows.iter().position(|r| r.label.is_none()) {
            return Err(CollectorError::MissingLabel(i));
        }
        Ok(Dataset {
            run_id,
            schema_version,
            records: file.rows,
        })
    }
}

fn parse_header(line: &str) -> Result<(u32, String), CollectorError> {
    let bad = || CollectorError::SchemaMismatch(format!("bad header `{line}`"));
    let rest = line.strip_prefix("schema=").ok_or_else(bad)?;
    let (version, run) = rest.split_once(' ').ok_or_else(bad)?;
    let run = run.strip_prefix("run=").ok_or_else(bad)?;
    Ok((version.parse().map_err(|_| bad())?, run.to_string()))
}

/// Labels `record`, appends it to `store` and returns the label.
pub fn ingest(record: TelemetryRecord, map: &PortLabelMap, store: &mut Dataset) -> ClassLabel {
    let label = map.label_for(&record);
    store.records.push(record.with_label(label));
    label
}

/// Writes the dataset in the trace format, label column included.
pub fn export(store: &Dataset, destination: &Path) -> Result<usize, CollectorError> {
    let file = File::create(destination)?;
    let mut out = BufWriter::new(file);
    let n = store.write_to(&mut out)?;
    out.flush()?;
    Ok(n)
}

pub fn import(source: &Path) -> Result<Dataset, CollectorError> {
    Dataset::read_from(File::open(source)?)
}

/// The in-process collector endpoint the switch clones records to.
#[derive(Debug, Clone)]
pub struct Collector {
    labels: PortLabelMap,
    store: Dataset,
    attached: bool,
}

impl Collector {
    pub fn new(labels: PortLabelMap, run_id: impl Into<String>) -> Self {
        Collector {
            labels,
            store: Dataset::new(run_id),
            attached: true,
        }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.store
    }

    pub fn into_dataset(self) -> Dataset {
        self.store
    }

    pub fn set_attached(&mut self, attached: bool) {
        self.attached = attached;
    }
}

impl TelemetrySink for Collector {
    fn deliver(&mut self, record: TelemetryRecord) -> Result<(), SinkUnavailable> {
        if !self.attached {
            return Err(SinkUnavailable);
        }
        ingest(record, &self.labels, &mut self.store);
        Ok(())
    }
}
