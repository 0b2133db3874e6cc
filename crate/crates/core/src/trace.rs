//! Demand trace files.
//!
//! Comma-separated, one row per slice. The header's first cell carries the
//! core's cycle capacity as `capacity=<cycles>`; every other header cell is
//! a tenant id. Data rows start with the slice index (0, 1, 2, ...) followed
//! by each tenant's demanded cycles:
//!
//! ```text
//! capacity=100,t1,t2,t3
//! 0,20,40,80
//! 1,20,40,80
//! ```
//!
//! For tenant-shared cores a column named `<id>/workload` gives the
//! workload demand that competes with tenant `<id>`'s vswitch.

use thiserror::Error;

use crate::metering::DemandTrace;

pub const WORKLOAD_SUFFIX: &str = "/workload";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceSet {
    pub capacity_per_slice: u64,
    pub traces: Vec<DemandTrace>,
}

impl TraceSet {
    /// Splits `<id>/workload` columns from vswitch columns.
    pub fn split_workloads(&self) -> (Vec<&DemandTrace>, Vec<&DemandTrace>) {
        self.traces
            .iter()
            .partition(|t| !t.tenant_id.as_str().ends_with(WORKLOAD_SUFFIX))
    }

    /// The workload column paired with vswitch tenant `id`, if present.
    pub fn workload_for(&self, id: &str) -> Option<&DemandTrace> {
        let name = format!("{id}{WORKLOAD_SUFFIX}");
        self.traces.iter().find(|t| t.tenant_id.as_str() == name)
    }
}

fn format_err(line: u64, message: impl Into<String>) -> TraceError {
    TraceError::Format {
        line,
        message: message.into(),
    }
}

pub fn parse_traces_str(text: &str) -> Result<TraceSet, TraceError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let header = match records.next() {
        Some(r) => r.map_err(|e| format_err(1, e.to_string()))?,
        None => return Err(format_err(1, "missing header row")),
    };
    let header_line = header.position().map_or(1, |p| p.line());
    let first = header.get(0).unwrap_or_default();
    let capacity = first
        .strip_prefix("capacity=")
        .ok_or_else(|| format_err(header_line, "first header cell must be `capacity=<cycles>`"))?
        .parse::<u64>()
        .ok()
        .filter(|&c| c > 0)
        .ok_or_else(|| format_err(header_line, format!("invalid capacity in `{first}`")))?;

    let ids: Vec<&str> = header.iter().skip(1).collect();
    if ids.is_empty() {
        return Err(format_err(header_line, "no tenant columns"));
    }
    for (i, id) in ids.iter().enumerate() {
        if id.is_empty() {
            return Err(format_err(header_line, "empty tenant id"));
        }
        if ids[..i].contains(id) {
            return Err(format_err(header_line, format!("duplicate tenant `{id}`")));
        }
    }

    let mut columns: Vec<Vec<u64>> = vec![Vec::new(); ids.len()];
    for (expected_slice, row) in records.enumerate() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            format_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != ids.len() + 1 {
            return Err(format_err(
                line,
                format!("expected {} cells, found {}", ids.len() + 1, row.len()),
            ));
        }
        let slice = row[0]
            .parse::<usize>()
            .map_err(|_| format_err(line, format!("invalid slice index `{}`", &row[0])))?;
        if slice != expected_slice {
            return Err(format_err(
                line,
                format!("expected slice {expected_slice}, found {slice}"),
            ));
        }
        for (col, cell) in row.iter().skip(1).enumerate() {
            let cycles = cell.parse::<u64>().map_err(|_| {
                format_err(
                    line,
                    format!("`{cell}` for `{}` is not a non-negative integer", ids[col]),
                )
            })?;
            columns[col].push(cycles);
        }
    }

    Ok(TraceSet {
        capacity_per_slice: capacity,
        traces: ids
            .iter()
            .zip(columns)
            .map(|(id, cycles)| DemandTrace::new(*id, cycles))
            .collect(),
    })
}

pub fn parse_traces(path: &std::path::Path) -> Result<TraceSet, TraceError> {
    let text = std::fs::read_to_string(path).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_traces_str(&text)
}

/// Writes a trace set in the file format. All traces must have the same
/// length.
pub fn traces_to_csv(set: &TraceSet) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec![format!("capacity={}", set.capacity_per_slice)];
    header.extend(set.traces.iter().map(|t| t.tenant_id.to_string()));
    writer.write_record(&header).expect("in-memory write");
    let slices = set.traces.first().map_or(0, |t| t.slices());
    for slice in 0..slices {
        let mut row = vec![slice.to_string()];
        row.extend(
            set.traces
                .iter()
                .map(|t| t.demanded_cycles[slice].to_string()),
        );
        writer.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 output")
}
