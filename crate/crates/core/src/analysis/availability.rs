//! Partition availability and response time by curve intersection.

use super::AnalysisError;
use crate::frame::validate_major_frame;
use crate::frame::FrameError;
use crate::model::{MajorFrame, Micros, PartitionId};

/// Cumulative CPU time a partition can use, as the sorted disjoint
/// intervals in which it accrues.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AvailabilityCurve {
    pub horizon: Micros,
    pub segments: Vec<(Micros, Micros)>,
}

impl AvailabilityCurve {
    /// Available time in `[0, t)`.
    pub fn at(&self, t: Micros) -> Micros {
        self.segments
            .iter()
            .take_while(|(s, _)| *s < t)
            .map(|&(s, e)| e.min(t) - s)
            .sum()
    }

    pub fn total(&self) -> Micros {
        self.segments.iter().map(|(s, e)| e - s).sum()
    }

    /// Values at `0, step, 2*step, ..` up to the horizon.
    pub fn samples(&self, step: Micros) -> Vec<Micros> {
        let step = step.max(1);
        (0..=self.horizon / step).map(|k| self.at(k * step)).collect()
    }
}

/// Availability of `partition` over `[0, horizon)`: its minor frames,
/// repeated every hyperperiod, minus the absolute `(release, duration)`
/// critical intervals.
pub fn availability_curve(
    frame: &MajorFrame,
    critical_load: &[(Micros, Micros)],
    partition: PartitionId,
    horizon: Micros,
) -> Result<AvailabilityCurve, AnalysisError> {
    let report = validate_major_frame(frame)?;
    if !report.valid() {
        return Err(FrameError::InvalidFrame(report).into());
    }
    let mut windows = Vec::new();
    let mut base = 0;
    while base < horizon {
        for (_, m) in frame.minors_of(partition) {
            let s = base + m.offset;
            let e = (s + m.duration).min(horizon);
            if s < e {
                windows.push((s, e));
            }
        }
        base += frame.hyperperiod;
    }
    let mut load: Vec<(Micros, Micros)> = critical_load.iter().map(|&(r, d)| (r, r + d)).collect();
    load.sort_unstable();

    let mut segments = Vec::new();
    for (s, e) in windows {
        let mut cur = s;
        for &(ls, le) in &load {
            if le <= cur || ls >= e {
                continue;
            }
            if ls > cur {
                segments.push((cur, ls));
            }
            cur = cur.max(le);
            if cur >= e {
                break;
            }
        }
        if cur < e {
            segments.push((cur, e));
        }
    }
    Ok(AvailabilityCurve { horizon, segments })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseTime {
    Bounded(Micros),
    Unbounded,
}

/// First `t` (on a `resolution` grid, `t > 0`) where the submitted load
/// `budget + Σ ceil(t/φ_j)·C_j` over higher-priority peers `(φ_j, C_j)`
/// is covered by the availability curve; `Unbounded` if none by `limit`.
pub fn response_time(
    budget: Micros,
    peers: &[(Micros, Micros)],
    curve: &AvailabilityCurve,
    limit: Micros,
    resolution: Micros,
) -> ResponseTime {
    let step = resolution.max(1);
    let mut t = step;
    while t <= limit {
        let demand = budget
            + peers
                .iter()
                .map(|&(period, c)| t.div_ceil(period.max(1)) * c)
                .sum::<Micros>();
        if demand <= curve.at(t) {
            return ResponseTime::Bounded(t);
        }
        t += step;
    }
    ResponseTime::Unbounded
}
