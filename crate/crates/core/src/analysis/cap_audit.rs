//! CPU-cap compliance from a trace.
//!
//! Windows start at the install/start of each frame and at every FRAME_SWITCH
//! flagged `cap_reset`. Ceilings are recomputed from the task metadata and
//! the frame in force. Time a task spends past its ceiling is excused only
//! while no other eligible task could have run on that CPU: ready, not
//! itself past its ceiling, and allowed to run at that moment (critical
//! always; application only inside its own partition's window; best effort
//! only against an over-cap critical task).

use std::collections::{BTreeMap, BTreeSet};

use super::{exec_intervals, frame_history, partition_intervals, ready_intervals, PartitionInterval};
use crate::model::{Criticality, CpuId, MajorFrame, Micros, NodeId, TaskId, TraceKind};
use crate::trace::{TaskMeta, TraceLog};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapViolation {
    pub node: NodeId,
    pub task: TaskId,
    pub window_start: Micros,
    pub window_end: Micros,
    pub used: Micros,
    pub ceiling: Micros,
    /// Over-ceiling time while a competitor was eligible.
    pub unexcused: Micros,
}

fn ceiling(meta: &TaskMeta, frame: &MajorFrame, window: u32, cpus: usize) -> Micros {
    if meta.cap >= 100 {
        return Micros::MAX;
    }
    let base = match meta.criticality {
        Criticality::Critical => frame.hyperperiod,
        Criticality::Application => match frame.partition(meta.partition) {
            Some(p) => p.duration,
            None => return Micros::MAX,
        },
        Criticality::BestEffort => return Micros::MAX,
    };
    (u128::from(meta.cap) * u128::from(base) * u128::from(window) * cpus as u128 / 100) as Micros
}

fn contains(list: &[(Micros, Micros)], a: Micros) -> bool {
    list.iter().any(|&(s, e)| s <= a && a < e)
}

fn partition_at(parts: &[PartitionInterval], a: Micros) -> Option<crate::model::PartitionId> {
    parts.iter().find(|p| p.start <= a && a < p.end).map(|p| p.partition)
}

/// Violations in `log`; empty when the trace is compliant or caps are off.
pub fn cap_audit(log: &TraceLog) -> Vec<CapViolation> {
    let Some(window_frames) = log.header.cap_window else {
        return Vec::new();
    };
    let Ok(history) = frame_history(log) else {
        return Vec::new();
    };
    let capped: Vec<&TaskMeta> = log.header.tasks.iter().filter(|t| t.cap < 100).collect();
    if capped.is_empty() || history.is_empty() {
        return Vec::new();
    }
    let horizon = log.header.horizon;
    let cpus = log.header.num_cpus;
    let meta: BTreeMap<TaskId, &TaskMeta> = log.header.tasks.iter().map(|t| (t.id, t)).collect();

    let mut bounds: BTreeSet<Micros> = history.iter().map(|(t, _)| *t).collect();
    for e in log.of_kind(TraceKind::FrameSwitch) {
        if e.has_flag("cap_reset") {
            bounds.insert(e.timestamp);
        }
    }
    bounds.insert(horizon);
    let bounds: Vec<Micros> = bounds.into_iter().filter(|&t| t <= horizon).collect();

    let exec = exec_intervals(log);
    let ready = ready_intervals(log);
    let parts = partition_intervals(log);
    let mut cuts: BTreeSet<Micros> = log.events.iter().map(|e| e.timestamp).collect();
    cuts.extend(bounds.iter().copied());

    let mut out = Vec::new();
    for w in bounds.windows(2) {
        let (ws, we) = (w[0], w[1]);
        let frame = &history.iter().rev().find(|(t, _)| *t <= ws).expect("history starts at or before first bound").1;
        let ceil = |t: TaskId| meta.get(&t).map_or(Micros::MAX, |m| ceiling(m, frame, window_frames, cpus));
        for cpu in 0..cpus {
            let mut used: BTreeMap<TaskId, Micros> = BTreeMap::new();
            let mut unexcused: BTreeMap<TaskId, Micros> = BTreeMap::new();
            let points: Vec<Micros> = cuts.range(ws..=we).copied().collect();
            for seg in points.windows(2) {
                let (a, b) = (seg[0], seg[1]);
                let Some(run) = exec
                    .iter()
                    .find(|i| i.cpu == cpu && i.start <= a && a < i.end)
                    .and_then(|i| i.task)
                else {
                    continue;
                };
                let limit = ceil(run);
                let before = *used.get(&run).unwrap_or(&0);
                let over_from = if before >= limit { a } else { a.saturating_add(limit - before) };
                *used.entry(run).or_default() += b - a;
                if over_from >= b {
                    continue;
                }
                let competitor = competitor_exists(run, cpu, a, &meta, &ready, &parts, &used, &ceil);
                if competitor {
                    *unexcused.entry(run).or_default() += b - over_from;
                }
            }
            for (task, lost) in unexcused {
                if lost > 0 && capped.iter().any(|m| m.id == task) {
                    out.push(CapViolation {
                        node: log.header.node,
                        task,
                        window_start: ws,
                        window_end: we,
                        used: used[&task],
                        ceiling: ceil(task),
                        unexcused: lost,
                    });
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn competitor_exists(
    run: TaskId,
    cpu: CpuId,
    at: Micros,
    meta: &BTreeMap<TaskId, &TaskMeta>,
    ready: &BTreeMap<TaskId, Vec<(Micros, Micros)>>,
    parts: &[PartitionInterval],
    used: &BTreeMap<TaskId, Micros>,
    ceil: &dyn Fn(TaskId) -> Micros,
) -> bool {
    let Some(runner) = meta.get(&run) else {
        return false;
    };
    let current = partition_at(parts, at);
    meta.values().any(|t| {
        if t.id == run || t.cpu != cpu {
            return false;
        }
        if !ready.get(&t.id).is_some_and(|r| contains(r, at)) {
            return false;
        }
        if *used.get(&t.id).unwrap_or(&0) >= ceil(t.id) {
            return false;
        }
        match t.criticality {
            Criticality::Critical => true,
            Criticality::Application => {
                current == Some(t.partition)
                    && (runner.criticality == Criticality::Critical || runner.partition == t.partition)
            }
            Criticality::BestEffort => runner.criticality == Criticality::Critical,
        }
    })
}
