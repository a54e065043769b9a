//! Gantt export.
//!
//! Text schema, one record per line:
//!
//! ```text
//! # mcsched-gantt 1
//! L <node> <lane>
//! I <node> <lane> <start> <end> <label>
//! ```
//!
//! Lanes are `partition` and `cpu<N>`. `L` lines declare every lane, even
//! empty ones; `I` lines are half-open intervals in microseconds. CPU
//! intervals carry the task id (idle time is omitted), partition intervals
//! the partition name.

use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::json;

use super::{exec_intervals, partition_intervals, AnalysisError};
use crate::format::TraceFile;
use crate::model::{CpuId, Micros, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GanttFormat {
    Text,
    VegaLite,
}

impl FromStr for GanttFormat {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(GanttFormat::Text),
            "vega" | "vega-lite" => Ok(GanttFormat::VegaLite),
            other => Err(AnalysisError::UnsupportedFormat(other.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Lane {
    Partition,
    Cpu(CpuId),
}

impl std::fmt::Display for Lane {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Lane::Partition => f.write_str("partition"),
            Lane::Cpu(c) => write!(f, "cpu{c}"),
        }
    }
}

impl FromStr for Lane {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "partition" {
            return Ok(Lane::Partition);
        }
        s.strip_prefix("cpu")
            .and_then(|n| n.parse().ok())
            .map(Lane::Cpu)
            .ok_or_else(|| format!("bad lane `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GanttRow {
    pub node: NodeId,
    pub lane: Lane,
    pub start: Micros,
    pub end: Micros,
    pub label: String,
}

fn collect(traces: &TraceFile) -> (Vec<(NodeId, Lane)>, Vec<GanttRow>) {
    let mut lanes = Vec::new();
    let mut rows = Vec::new();
    for (&node, log) in traces {
        lanes.push((node, Lane::Partition));
        lanes.extend((0..log.header.num_cpus).map(|c| (node, Lane::Cpu(c))));
        for p in partition_intervals(log) {
            rows.push(GanttRow {
                node,
                lane: Lane::Partition,
                start: p.start,
                end: p.end,
                label: p.partition.to_string(),
            });
        }
        for i in exec_intervals(log) {
            if let Some(t) = i.task {
                rows.push(GanttRow {
                    node,
                    lane: Lane::Cpu(i.cpu),
                    start: i.start,
                    end: i.end,
                    label: t.to_string(),
                });
            }
        }
    }
    (lanes, rows)
}

pub fn export_gantt(traces: &TraceFile, format: GanttFormat) -> Result<String, AnalysisError> {
    if traces.is_empty() {
        return Err(AnalysisError::EmptyTrace);
    }
    let (lanes, rows) = collect(traces);
    match format {
        GanttFormat::Text => {
            let mut out = String::from("# mcsched-gantt 1\n");
            for (node, lane) in &lanes {
                let _ = writeln!(out, "L {node} {lane}");
            }
            for r in &rows {
                let _ = writeln!(out, "I {} {} {} {} {}", r.node, r.lane, r.start, r.end, r.label);
            }
            Ok(out)
        }
        GanttFormat::VegaLite => {
            let values: Vec<_> = rows
                .iter()
                .map(|r| {
                    json!({
                        "lane": format!("n{} {}", r.node, r.lane),
                        "start_ms": r.start as f64 / 1000.0,
                        "end_ms": r.end as f64 / 1000.0,
                        "label": r.label,
                        "kind": if r.lane == Lane::Partition { "partition" } else { "task" },
                    })
                })
                .collect();
            let lane_names: Vec<String> = lanes.iter().map(|(n, l)| format!("n{n} {l}")).collect();
            let doc = json!({
                "$schema": "https://vega.github.io/schema/vega-lite/v5.json",
                "data": { "values": values },
                "mark": "bar",
                "encoding": {
                    "y": { "field": "lane", "type": "nominal", "sort": lane_names },
                    "x": { "field": "start_ms", "type": "quantitative", "title": "time (ms)" },
                    "x2": { "field": "end_ms" },
                    "color": { "field": "label", "type": "nominal" },
                    "tooltip": [
                        { "field": "label" },
                        { "field": "start_ms" },
                        { "field": "end_ms" }
                    ]
                }
            });
            Ok(serde_json::to_string_pretty(&doc).expect("json value serializes") + "\n")
        }
    }
}

/// Reads back the `I` records of a text export.
pub fn parse_gantt_text(text: &str) -> Result<Vec<GanttRow>, AnalysisError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let err = |message: String| AnalysisError::GanttParse { line: i + 1, message };
        let cols: Vec<&str> = line.split_whitespace().collect();
        match cols.first() {
            Some(&"I") => {
                let [_, node, lane, start, end, label] = cols[..] else {
                    return Err(err(format!("expected 6 columns, found {}", cols.len())));
                };
                rows.push(GanttRow {
                    node: node.parse().map_err(|_| err(format!("bad node `{node}`")))?,
                    lane: lane.parse().map_err(err)?,
                    start: start.parse().map_err(|_| err(format!("bad start `{start}`")))?,
                    end: end.parse().map_err(|_| err(format!("bad end `{end}`")))?,
                    label: label.to_string(),
                });
            }
            Some(&"L") | Some(&"#") | None => {}
            Some(other) => return Err(err(format!("unknown record `{other}`"))),
        }
    }
    Ok(rows)
}
