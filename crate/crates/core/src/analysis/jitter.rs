//! Frame-switch jitter against the ideal boundary sequence.

use super::{frame_history, AnalysisError};
use crate::frame::fill_empty;
use crate::model::{MajorFrame, Micros, TraceKind};
use crate::trace::TraceLog;

#[derive(Debug, Clone, PartialEq)]
pub struct JitterStats {
    pub count: usize,
    /// Mean deviation, µs.
    pub mean: f64,
    pub max: Micros,
    pub deviations: Vec<Micros>,
}

/// Deviation of every FRAME_SWITCH from the boundary it belongs to.
///
/// Ideal boundaries are rebuilt from the installed frame (gap-filled),
/// anchored at each hyperperiod start and restarted at every
/// reconfiguration. A switch flagged `start` anchors at its `hp_start`
/// value, or at install time plus offset when absent.
pub fn jitter_stats(log: &TraceLog) -> Result<JitterStats, AnalysisError> {
    let switches: Vec<_> = log.of_kind(TraceKind::FrameSwitch).collect();
    if switches.len() < 2 {
        return Err(AnalysisError::InsufficientData(switches.len()));
    }
    let history = frame_history(log)?;
    let boot_anchor = log.header.install.as_ref().map(|i| i.at + i.offset);

    let mut deviations = Vec::with_capacity(switches.len());
    let mut frame: Option<MajorFrame> = None;
    let mut cursor: Option<(usize, Micros)> = None;
    for e in switches {
        if e.has_flag("start") {
            let (installed_at, f) = history
                .iter()
                .rev()
                .find(|(t, _)| *t <= e.timestamp)
                .ok_or_else(|| AnalysisError::Inconsistent(format!("frame switch at {} before any install", e.timestamp)))?;
            let filled = fill_empty(f)?;
            let anchor = match e.detail_value("hp_start") {
                Some(v) => v
                    .parse()
                    .map_err(|_| AnalysisError::Inconsistent(format!("bad hp_start `{v}`")))?,
                None if Some(*installed_at) == log.header.install.as_ref().map(|i| i.at) => {
                    boot_anchor.unwrap_or(*installed_at)
                }
                None => *installed_at,
            };
            frame = Some(filled);
            cursor = Some((0, anchor));
        } else {
            let (Some(f), Some((idx, ideal))) = (frame.as_ref(), cursor) else {
                return Err(AnalysisError::Inconsistent(format!(
                    "frame switch at {} before the frame started",
                    e.timestamp
                )));
            };
            let next = (idx + 1) % f.minors.len();
            cursor = Some((next, ideal + f.minors[idx].duration));
        }
        let (idx, ideal) = cursor.expect("cursor set above");
        let expected = frame.as_ref().map(|f| f.minors[idx].partition);
        if e.partition.is_some() && e.partition != expected {
            return Err(AnalysisError::Inconsistent(format!(
                "switch at {} names {:?}, expected {:?}",
                e.timestamp, e.partition, expected
            )));
        }
        deviations.push(e.timestamp.abs_diff(ideal));
    }
    let count = deviations.len();
    let mean = deviations.iter().sum::<Micros>() as f64 / count as f64;
    let max = deviations.iter().copied().max().unwrap_or(0);
    Ok(JitterStats {
        count,
        mean,
        max,
        deviations,
    })
}
