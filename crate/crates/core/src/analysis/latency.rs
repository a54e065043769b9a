//! Emergency response latency: ground command to first dispatch of the
//! end of the command chain on each node.

use std::collections::{BTreeMap, BTreeSet};

use super::AnalysisError;
use crate::format::TraceFile;
use crate::model::{Micros, NodeId, TaskId, TraceKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatencyRecord {
    pub command_id: String,
    pub node: NodeId,
    pub send_ts: Micros,
    pub activation_ts: Micros,
    pub latency: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub count: usize,
    pub mean: f64,
    /// Population variance, µs².
    pub variance: f64,
}

pub fn latency_stats(records: &[LatencyRecord]) -> Option<LatencyStats> {
    if records.is_empty() {
        return None;
    }
    let n = records.len() as f64;
    let mean = records.iter().map(|r| r.latency as f64).sum::<f64>() / n;
    let variance = records.iter().map(|r| (r.latency as f64 - mean).powi(2)).sum::<f64>() / n;
    Some(LatencyStats {
        count: records.len(),
        mean,
        variance,
    })
}

/// One record per node per ground command.
///
/// The command's tag follows every message it causes. On each node the
/// terminal tasks are those that received tagged messages but never sent
/// one; the activation is the first dispatch of such a task after it
/// received the tag.
pub fn emergency_latencies(traces: &TraceFile) -> Result<Vec<LatencyRecord>, AnalysisError> {
    let mut commands: Vec<(String, Micros)> = Vec::new();
    for log in traces.values() {
        for e in log.of_kind(TraceKind::MessageRecv) {
            if e.detail_value("from") == Some("ground") {
                if let Some(tag) = e.detail_value("cmd") {
                    commands.push((tag.to_string(), e.timestamp));
                }
            }
        }
    }
    if commands.is_empty() {
        return Err(AnalysisError::NoCommand);
    }
    commands.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));

    let mut out = Vec::new();
    for (tag, send_ts) in commands {
        for (&node, log) in traces {
            let mut received: BTreeMap<TaskId, Micros> = BTreeMap::new();
            let mut senders: BTreeSet<TaskId> = BTreeSet::new();
            for e in &log.events {
                if e.detail_value("cmd") != Some(tag.as_str()) {
                    continue;
                }
                match e.kind {
                    TraceKind::MessageRecv => {
                        if let Some(t) = e.next_task {
                            received.entry(t).or_insert(e.timestamp);
                        }
                    }
                    TraceKind::MessageSend => {
                        if let Some(t) = e.prev_task {
                            senders.insert(t);
                        }
                    }
                    _ => {}
                }
            }
            let activation = received
                .iter()
                .filter(|(t, _)| !senders.contains(t))
                .filter_map(|(&t, &since)| {
                    log.of_kind(TraceKind::ContextSwitch)
                        .find(|e| e.next_task == Some(t) && e.timestamp >= since)
                        .map(|e| e.timestamp)
                })
                .min();
            let Some(activation_ts) = activation else {
                return Err(AnalysisError::IncompleteChain { command: tag, node });
            };
            out.push(LatencyRecord {
                command_id: tag.clone(),
                node,
                send_ts,
                activation_ts,
                latency: activation_ts.saturating_sub(send_ts),
            });
        }
    }
    Ok(out)
}
