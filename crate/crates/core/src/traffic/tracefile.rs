//! Comma-separated trace format shared by trace replay and dataset export.
//!
//! Leading lines starting with `#` are comments. The header names the ten
//! telemetry columns, then `timestamp_us`, `size_bytes` and optionally
//! `label`. Column order on input is free; output always uses [`COLUMNS`].

use std::io::{Read, Write};

use crate::model::{check_width, ClassLabel, ModelError};
use crate::switch::{TraceRow, FEATURE_WIDTHS};

use super::TrafficError;

pub const COLUMNS: [&str; 13] = [
    "ingress_port",
    "flow_interval_time",
    "enq_qdepth",
    "deq_qdepth",
    "deq_timedelta",
    "protocol",
    "src_port",
    "dst_port",
    "src_ip",
    "dst_ip",
    "timestamp_us",
    "size_bytes",
    "label",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceFile {
    /// Comment lines without the leading `#` and surrounding whitespace.
    pub comments: Vec<String>,
    pub has_label_column: bool,
    pub rows: Vec<TraceRow>,
}

pub fn write_trace<W: Write>(
    out: W,
    comments: &[String],
    rows: &[TraceRow],
    with_label: bool,
) -> Result<usize, TrafficError> {
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    let ncols = if with_label { 13 } else { 12 };
    w.write_record(&COLUMNS[..ncols])?;
    let mut fields: Vec<String> = Vec::with_capacity(13);
    for row in rows {
        fields.clear();
        fields.extend(row.feature_values().iter().map(u64::to_string));
        fields.push(row.timestamp_us.to_string());
        fields.push(row.size_bytes.to_string());
        if with_label {
            fields.push(row.label.map(|l| l.class_no().to_string()).unwrap_or_default());
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(rows.len())
}

pub fn read_trace<R: Read>(input: R) -> Result<TraceFile, TrafficError> {
    let mut input = input;
    let mut text = String::new();
    input.read_to_string(&mut text)?;

    let mut comments = Vec::new();
    let mut body_start = 0;
    for line in text.split_inclusive('\n') {
        let Some(c) = line.trim_start().strip_prefix('#') else {
            break;
        };
        comments.push(c.trim().to_string());
        body_start += line.len();
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(&text.as_bytes()[body_start..]);
    let headers = reader.headers()?.clone();
    let position = |name: &str| headers.iter().position(|h| h == name);
    let mut index = [0usize; 12];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = position(name)
            .ok_or_else(|| TrafficError::SchemaMismatch(format!("missing column `{name}`")))?;
    }
    let label_index = position("label");
    if headers.len() != 12 + usize::from(label_index.is_some()) {
        return Err(TrafficError::SchemaMismatch(format!(
            "unexpected columns in header `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record?;
        let line = n + 2 + comments.len();
        let mut values = [0u64; 12];
        for (i, v) in values.iter_mut().enumerate() {
            let cell = record.get(index[i]).unwrap_or("");
            *v = cell.parse().map_err(|_| TrafficError::BadValue {
                line,
                column: COLUMNS[i],
                value: cell.to_string(),
            })?;
        }
        let label = match label_index.map(|i| record.get(i).unwrap_or("")) {
            None | Some("") => None,
            Some(cell) => Some(cell.parse::<ClassLabel>().map_err(|_| TrafficError::BadValue {
                line,
                column: "label",
                value: cell.to_string(),
            })?),
        };
        rows.push(row_from_values(&values, label)?);
    }
    Ok(TraceFile {
        comments,
        has_label_column: label_index.is_some(),
        rows,
    })
}

fn row_from_values(v: &[u64; 12], label: Option<ClassLabel>) -> Result<TraceRow, ModelError> {
    for ((field, bits), value) in FEATURE_WIDTHS.iter().zip(v) {
        check_width(field, *value, *bits)?;
    }
    check_width("size_bytes", v[11], 32)?;
    let row = TraceRow {
        ingress_port: v[0] as u16,
        flow_interval_time: v[1],
        enq_qdepth: v[2] as u32,
        deq_qdepth: v[3] as u32,
        deq_timedelta: v[4] as u32,
        protocol: v[5] as u8,
        src_port: v[6] as u16,
        dst_port: v[7] as u16,
        src_ip: v[8] as u32,
        dst_ip: v[9] as u32,
        timestamp_us: v[10],
        size_bytes: v[11] as u32,
        label,
    };
    row.validate()?;
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "ingress_port,flow_interval_time,enq_qdepth,deq_qdepth,deq_timedelta,protocol,src_port,dst_port,src_ip,dst_ip,timestamp_us,size_bytes,label";

    #[test]
    fn reads_comments_and_rows() {
        let text = format!("# schema=1 run=x\n{HEADER}\n1,2,3,4,5,17,1000,443,1,2,10,100,4\n");
        let file = read_trace(text.as_bytes()).unwrap();
        assert_eq!(file.comments, vec!["schema=1 run=x".to_string()]);
        assert_eq!(file.rows.len(), 1);
        assert_eq!(file.rows[0].label, Some(ClassLabel::Cameras));
        assert_eq!(file.rows[0].dst_port, 443);
    }

    #[test]
    fn column_order_is_free_and_label_optional() {
        let text = "size_bytes,timestamp_us,dst_ip,src_ip,dst_port,src_port,protocol,deq_timedelta,deq_qdepth,enq_qdepth,flow_interval_time,ingress_port\n100,5,0,0,80,1,6,0,0,0,0,1\n";
        let file = read_trace(text.as_bytes()).unwrap();
        assert!(!file.has_label_column);
        assert_eq!(file.rows[0].size_bytes, 100);
        assert_eq!(file.rows[0].dst_port, 80);
        assert_eq!(file.rows[0].label, None);
    }

    #[test]
    fn missing_column() {
        let text = "ingress_port,flow_interval_time\n1,2\n";
        assert!(matches!(
            read_trace(text.as_bytes()),
            Err(TrafficError::SchemaMismatch(_))
        ));
    }

    #[test]
    fn overflowing_field() {
        let text = format!("{HEADER}\n1,2,600000,4,5,17,1000,443,1,2,10,100,4\n");
        assert!(matches!(
            read_trace(text.as_bytes()),
            Err(TrafficError::Field(ModelError::FieldOverflow {
                field: "enq_qdepth",
                ..
            }))
        ));
    }

    #[test]
    fn garbage_cell() {
        let text = format!("{HEADER}\n1,x,3,4,5,17,1000,443,1,2,10,100,4\n");
        assert!(matches!(
            read_trace(text.as_bytes()),
            Err(TrafficError::BadValue {
                column: "flow_interval_time",
                ..
            })
        ));
    }
}
