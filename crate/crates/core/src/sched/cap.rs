//! CPU-cap accounting.

use serde::{Deserialize, Serialize};

use crate::model::{Criticality, MajorFrame, Micros, TaskControlBlock};

/// Accounting window spanning `window_length` major frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapAccounting {
    pub window_length: u32,
    pub window_start: Micros,
    /// Hyperperiod wraps seen since `window_start`.
    pub frames_elapsed: u32,
}

impl CapAccounting {
    pub fn new(window_length: u32) -> Self {
        CapAccounting {
            window_length: window_length.max(1),
            window_start: 0,
            frames_elapsed: 0,
        }
    }

    pub fn restart(&mut self, now: Micros) {
        self.window_start = now;
        self.frames_elapsed = 0;
    }

    /// Records a hyperperiod wrap; true when the window is complete and
    /// was restarted at `now`.
    pub fn on_wrap(&mut self, now: Micros) -> bool {
        self.frames_elapsed += 1;
        if self.frames_elapsed >= self.window_length {
            self.restart(now);
            true
        } else {
            false
        }
    }
}

/// Execution-time ceiling of `task` for one accounting window.
///
/// APPLICATION: cap% of partition duration x frames per window x CPUs.
/// CRITICAL: the same with the hyperperiod in place of the partition
/// duration. Uncapped tasks, best-effort tasks and tasks whose partition is
/// absent from `frame` get `Micros::MAX`.
pub fn cap_ceiling(
    task: &TaskControlBlock,
    frame: &MajorFrame,
    window: &CapAccounting,
    num_cpus: usize,
) -> Micros {
    if !task.is_capped() {
        return Micros::MAX;
    }
    let base = match task.criticality {
        Criticality::Critical => frame.hyperperiod,
        Criticality::Application => match frame.partition(task.partition) {
            Some(p) => p.duration,
            None => return Micros::MAX,
        },
        Criticality::BestEffort => return Micros::MAX,
    };
    let product = task.cap_percent as u128
        * base as u128
        * window.window_length as u128
        * num_cpus as u128;
    (product / 100) as Micros
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MinorFrame, PartitionId, PartitionSpec, TaskId, MICROS_PER_MS as MS};

    fn frame(duration: Micros) -> MajorFrame {
        MajorFrame::new(
            vec![
                PartitionSpec::new(1, 2 * duration, duration),
                PartitionSpec::new(2, 2 * duration, duration),
            ],
            vec![
                MinorFrame::new(PartitionId(1), 0, duration),
                MinorFrame::new(PartitionId(2), duration, duration),
            ],
        )
        .unwrap()
    }

    fn task(cap: u8) -> TaskControlBlock {
        TaskControlBlock::new(TaskId(1001), Criticality::Application, 72, PartitionId(1)).with_cap(cap)
    }

    #[test]
    fn twenty_percent_of_sixty() {
        let c = cap_ceiling(&task(20), &frame(60 * MS), &CapAccounting::new(1), 1);
        assert_eq!(c, 12 * MS);
    }

    #[test]
    fn uncapped_is_unbounded() {
        let c = cap_ceiling(&task(100), &frame(60 * MS), &CapAccounting::new(1), 1);
        assert_eq!(c, Micros::MAX);
    }

    #[test]
    fn window_and_cpus_multiply() {
        let expected = (0.5 * 40.0 * 2.0 * 2.0 * MS as f64) as Micros;
        let c = cap_ceiling(&task(50), &frame(40 * MS), &CapAccounting::new(2), 2);
        assert_eq!(c, expected);
        assert_eq!(c, 80 * MS);
    }

    #[test]
    fn critical_base_is_hyperperiod() {
        let t = TaskControlBlock::new(TaskId(9), Criticality::Critical, 90, PartitionId::SYSTEM).with_cap(10);
        let c = cap_ceiling(&t, &frame(60 * MS), &CapAccounting::new(1), 1);
        assert_eq!(c, 12 * MS);
    }

    #[test]
    fn window_wraps() {
        let mut w = CapAccounting::new(2);
        assert!(!w.on_wrap(100));
        assert!(w.on_wrap(200));
        assert_eq!(w.window_start, 200);
        assert_eq!(w.frames_elapsed, 0);
    }
}
