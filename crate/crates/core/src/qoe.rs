//! Receiver-side measurement: per-flow delivery statistics, delivered frame
//! rate of a video flow, and image MSE/PSNR.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FlowKey, SimTime};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QoeError {
    #[error("dimension mismatch: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("line {line}: {reason}")]
    ParseFailure { line: usize, reason: String },
}

/// What became of one emitted packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fate {
    Delivered(SimTime),
    Dropped(SimTime),
    /// Still queued or on a link when the run ended.
    InFlight,
}

/// One packet as seen by the measurement layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeliveryEvent {
    pub key: FlowKey,
    pub size_bytes: u32,
    pub created_at: SimTime,
    pub frame_seq: Option<u32>,
    pub fate: Fate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    pub flow: FlowKey,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub throughput_bps: f64,
    pub mean_latency_us: f64,
    pub p99_latency_us: f64,
}

impl FlowStats {
    pub fn empty(flow: FlowKey) -> Self {
        FlowStats {
            flow,
            sent: 0,
            delivered: 0,
            dropped: 0,
            throughput_bps: 0.0,
            mean_latency_us: 0.0,
            p99_latency_us: 0.0,
        }
    }

    pub const CSV_HEADER: &'static str =
        "flow,sent,delivered,dropped,throughput_bps,mean_latency_us,p99_latency_us";

    pub fn csv_row(&self) -> String {
        format!(
            "\"{}\",{},{},{},{:.3},{:.3},{:.3}",
            self.flow,
            self.sent,
            self.delivered,
            self.dropped,
            self.throughput_bps,
            self.mean_latency_us,
            self.p99_latency_us
        )
    }
}

/// Per-flow statistics over an observation window of `window_us`.
/// Latency is completion minus creation; p99 uses the nearest-rank rule.
pub fn accumulate(events: &[DeliveryEvent], window_us: u64) -> BTreeMap<FlowKey, FlowStats> {
    let mut bytes: BTreeMap<FlowKey, u64> = BTreeMap::new();
    let mut latencies: BTreeMap<FlowKey, Vec<u64>> = BTreeMap::new();
    let mut out: BTreeMap<FlowKey, FlowStats> = BTreeMap::new();
    for e in events {
        let s = out.entry(e.key).or_insert_with(|| FlowStats::empty(e.key));
        s.sent += 1;
        match e.fate {
            Fate::Delivered(at) => {
                s.delivered += 1;
                *bytes.entry(e.key).or_default() += u64::from(e.size_bytes);
                latencies
                    .entry(e.key)
                    .or_default()
                    .push(at.as_micros().saturating_sub(e.created_at.as_micros()));
            }
            Fate::Dropped(_) => s.dropped += 1,
            Fate::InFlight => {}
        }
    }
    for (key, s) in out.iter_mut() {
        if window_us > 0 {
            let b = bytes.get(key).copied().unwrap_or(0);
            s.throughput_bps = (b * 8) as f64 / (window_us as f64 / 1e6);
        }
        if let Some(lat) = latencies.get_mut(key) {
            lat.sort_unstable();
            let total: u128 = lat.iter().map(|&l| u128::from(l)).sum();
            s.mean_latency_us = total as f64 / lat.len() as f64;
            let rank = (lat.len() * 99).div_ceil(100).max(1);
            s.p99_latency_us = lat[rank - 1] as f64;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub expected: u32,
    pub delivered: u32,
    pub first_emission: SimTime,
    pub last_arrival: Option<SimTime>,
}

/// Per-frame packet accounting of one video flow.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameLedger {
    frames: BTreeMap<u32, FrameEntry>,
}

impl FrameLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds the ledger of every event tagged with a frame number.
    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a DeliveryEvent>) -> Self {
        let mut l = FrameLedger::new();
        for e in events {
            if let Some(f) = e.frame_seq {
                l.emitted(f, e.created_at);
                if let Fate::Delivered(at) = e.fate {
                    l.arrived(f, at);
                }
            }
        }
        l
    }

    pub fn emitted(&mut self, frame: u32, at: SimTime) {
        let e = self.frames.entry(frame).or_insert(FrameEntry {
            expected: 0,
            delivered: 0,
            first_emission: at,
            last_arrival: None,
        });
        e.expected += 1;
        e.first_emission = e.first_emission.min(at);
    }

    /// Records a delivered packet. Arrivals for frames never emitted are ignored.
    pub fn arrived(&mut self, frame: u32, at: SimTime) {
        if let Some(e) = self.frames.get_mut(&frame) {
            if e.delivered < e.expected {
                e.delivered += 1;
                e.last_arrival = Some(e.last_arrival.map_or(at, |l| l.max(at)));
            }
        }
    }

    pub fn frames(&self) -> &BTreeMap<u32, FrameEntry> {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frames whose packets all arrived within `deadline_us` of the first emission.
    pub fn complete_frames(&self, deadline_us: u64) -> usize {
        self.frames
            .values()
            .filter(|e| {
                e.delivered == e.expected
                    && e.last_arrival
                        .is_some_and(|l| l.as_micros() - e.first_emission.as_micros() <= deadline_us)
            })
            .count()
    }
}

/// Two frame periods at 30 fps.
pub const DEFAULT_FRAME_DEADLINE_US: u64 = 66_666;

pub fn delivered_fps(ledger: &FrameLedger, duration_s: f64, deadline_us: u64) -> f64 {
    assert!(duration_s > 0.0, "duration must be positive");
    ledger.complete_frames(deadline_us) as f64 / duration_s
}

/// Grayscale image as a real-valued grid with entries in [0, 255].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ImageMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, QoeError> {
        let fail = |line: usize, reason: String| QoeError::ParseFailure { line, reason };
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(fail(1, "image is empty".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(fail(i + 1, format!("expected {cols} values, found {}", r.len())));
            }
            for &v in r {
                if !(0.0..=255.0).contains(&v) {
                    return Err(fail(i + 1, format!("intensity {v} outside [0, 255]")));
                }
                data.push(v);
            }
        }
        Ok(ImageMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self, QoeError> {
        Self::new(vec![vec![value; cols]; rows])
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn check_dims(&self, other: &ImageMatrix) -> Result<(), QoeError> {
        if self.dims() == other.dims() {
            Ok(())
        } else {
            Err(QoeError::DimensionMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            })
        }
    }
}

impl FromStr for ImageMatrix {
    type Err = QoeError;

    /// One row per line, comma separated. Blank lines and `#` lines are skipped.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut rows = Vec::new();
        for (i, line) in s.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let row = t
                .split(',')
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|e| QoeError::ParseFailure {
                        line: i + 1,
                        reason: format!("`{}`: {e}", v.trim()),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        ImageMatrix::new(rows)
    }
}

pub fn mse(f: &ImageMatrix, g: &ImageMatrix) -> Result<f64, QoeError> {
    f.check_dims(g)?;
    let sum: f64 = f
        .data
        .iter()
        .zip(&g.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / f.data.len() as f64)
}

pub const PSNR_PEAK: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Psnr {
    Db(f64),
    /// Zero error: infinite PSNR.
    PerfectMatch,
}

impl Psnr {
    pub fn db(self) -> f64 {
        match self {
            Psnr::Db(v) => v,
            Psnr::PerfectMatch => f64::INFINITY,
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Db(v) => write!(f, "{v:.4}"),
            Psnr::PerfectMatch => f.write_str("inf"),
        }
    }
}

pub fn psnr_from_mse(mse: f64) -> Psnr {
    if mse == 0.0 {
        Psnr::PerfectMatch
    } else {
        Psnr::Db(10.0 * (PSNR_PEAK * PSNR_PEAK / mse).log10())
    }
}

pub fn psnr(f: &ImageMatrix, g: &ImageMatrix) -> Result<Psnr, QoeError> {
    mse(f, g).map(psnr_from_mse)
}
