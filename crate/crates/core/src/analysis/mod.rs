//! Trace post-processing.
//!
//! Everything here works from the recorded trace and its header alone; no
//! scheduler state is consulted.

mod availability;
mod cap_audit;
mod gantt;
mod jitter;
mod latency;

pub use availability::{availability_curve, response_time, AvailabilityCurve, ResponseTime};
pub use cap_audit::{cap_audit, CapViolation};
pub use gantt::{export_gantt, parse_gantt_text, GanttFormat, GanttRow, Lane};
pub use jitter::{jitter_stats, JitterStats};
pub use latency::{emergency_latencies, latency_stats, LatencyRecord, LatencyStats};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::format::decode_frame;
use crate::frame::FrameError;
use crate::model::{CpuId, MajorFrame, Micros, NodeId, PartitionId, TaskId, TraceKind};
use crate::trace::TraceLog;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("command `{command}` never activated a terminal task on node {node}")]
    IncompleteChain { command: String, node: NodeId },
    #[error("no ground command found in the trace")]
    NoCommand,
    #[error("need at least two frame switches, found {0}")]
    InsufficientData(usize),
    #[error("unsupported gantt format `{0}` (use text or vega)")]
    UnsupportedFormat(String),
    #[error(transparent)]
    InvalidFrame(#[from] FrameError),
    #[error("trace is inconsistent: {0}")]
    Inconsistent(String),
    #[error("trace has no nodes")]
    EmptyTrace,
    #[error("gantt line {line}: {message}")]
    GanttParse { line: usize, message: String },
}

/// A stretch of time one CPU spent on one task (`None` = idle).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecInterval {
    pub node: NodeId,
    pub cpu: CpuId,
    pub start: Micros,
    pub end: Micros,
    pub task: Option<TaskId>,
}

/// A stretch of time during which a partition owned the node's frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionInterval {
    pub node: NodeId,
    pub start: Micros,
    pub end: Micros,
    pub partition: PartitionId,
}

/// Per-CPU execution intervals, idle included, covering `[0, horizon)`.
pub fn exec_intervals(log: &TraceLog) -> Vec<ExecInterval> {
    let node = log.header.node;
    let horizon = log.header.horizon;
    let mut out = Vec::new();
    for cpu in 0..log.header.num_cpus {
        let mut since = 0;
        let mut running = None;
        for e in log.of_kind(TraceKind::ContextSwitch).filter(|e| e.cpu == cpu) {
            if e.timestamp > since {
                out.push(ExecInterval {
                    node,
                    cpu,
                    start: since,
                    end: e.timestamp,
                    task: running,
                });
            }
            since = e.timestamp;
            running = e.next_task;
        }
        if horizon > since {
            out.push(ExecInterval {
                node,
                cpu,
                start: since,
                end: horizon,
                task: running,
            });
        }
    }
    out
}

/// Minor-frame ownership over time. Ownership ends at each frame switch
/// and when a reconfiguration deactivates applications.
pub fn partition_intervals(log: &TraceLog) -> Vec<PartitionInterval> {
    let node = log.header.node;
    let mut out = Vec::new();
    let mut open: Option<(Micros, PartitionId)> = None;
    let close = |open: &mut Option<(Micros, PartitionId)>, at: Micros, out: &mut Vec<PartitionInterval>| {
        if let Some((start, partition)) = open.take() {
            if at > start {
                out.push(PartitionInterval {
                    node,
                    start,
                    end: at,
                    partition,
                });
            }
        }
    };
    for e in &log.events {
        match e.kind {
            TraceKind::FrameSwitch => {
                close(&mut open, e.timestamp, &mut out);
                open = e.partition.map(|p| (e.timestamp, p));
            }
            TraceKind::Reconfig if e.detail.starts_with("APP_INACTIVE") => {
                close(&mut open, e.timestamp, &mut out);
            }
            _ => {}
        }
    }
    close(&mut open, log.header.horizon, &mut out);
    out
}

/// Intervals during which each task was ready (runnable), from the
/// TASK_READY / TASK_BLOCK records.
pub fn ready_intervals(log: &TraceLog) -> BTreeMap<TaskId, Vec<(Micros, Micros)>> {
    let mut out: BTreeMap<TaskId, Vec<(Micros, Micros)>> = BTreeMap::new();
    let mut since: BTreeMap<TaskId, Micros> = BTreeMap::new();
    for e in &log.events {
        match e.kind {
            TraceKind::TaskReady => {
                if let Some(t) = e.next_task {
                    since.entry(t).or_insert(e.timestamp);
                }
            }
            TraceKind::TaskBlock => {
                if let Some(t) = e.prev_task {
                    if let Some(s) = since.remove(&t) {
                        out.entry(t).or_default().push((s, e.timestamp));
                    }
                }
            }
            _ => {}
        }
    }
    for (t, s) in since {
        if log.header.horizon > s {
            out.entry(t).or_default().push((s, log.header.horizon));
        }
    }
    for v in out.values_mut() {
        v.retain(|(a, b)| b > a);
    }
    out
}

/// Frames in force over time: the boot install, then every committed
/// reconfiguration, as (effective time, frame).
pub(crate) fn frame_history(log: &TraceLog) -> Result<Vec<(Micros, MajorFrame)>, AnalysisError> {
    let mut out = Vec::new();
    if let Some(i) = &log.header.install {
        out.push((i.at, i.frame.clone()));
    }
    for e in log.of_kind(TraceKind::Reconfig) {
        if let Some(tok) = e.detail_value("frame") {
            let frame = decode_frame(tok).map_err(AnalysisError::Inconsistent)?;
            out.push((e.timestamp, frame));
        }
    }
    Ok(out)
}

/// Total overlap between two sorted, disjoint interval lists.
pub fn overlap(a: &[(Micros, Micros)], b: &[(Micros, Micros)]) -> Micros {
    let (mut i, mut j, mut total) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            total += hi - lo;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_of_interval_lists() {
        assert_eq!(overlap(&[(0, 10), (20, 30)], &[(5, 25)]), 10);
        assert_eq!(overlap(&[(0, 10)], &[(10, 20)]), 0);
        assert_eq!(overlap(&[], &[(0, 1)]), 0);
    }
}
