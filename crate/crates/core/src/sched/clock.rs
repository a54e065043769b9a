//! Minor-frame cursor driven by the global tick.

use serde::{Deserialize, Serialize};

use crate::model::{MajorFrame, Micros, PartitionId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameClock {
    /// Ideal start of the current hyperperiod.
    pub hp_start: Micros,
    /// Ideal start of the current minor frame.
    pub mf_start: Micros,
    /// Index into the installed (gap-filled) minor list.
    pub cur_frame: Option<usize>,
    pub next_switch: Micros,
    /// Set on every install; cleared by the first tick at or after
    /// `install_time + start_offset`, which becomes `hp_start`.
    pub firstrun: bool,
    pub start_offset: Micros,
    pub install_time: Micros,
    pub wraps: u64,
}

impl Default for FrameClock {
    fn default() -> Self {
        FrameClock {
            hp_start: 0,
            mf_start: 0,
            cur_frame: None,
            next_switch: Micros::MAX,
            firstrun: false,
            start_offset: 0,
            install_time: 0,
            wraps: 0,
        }
    }
}

/// One minor-frame transition observed by a tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub index: usize,
    pub partition: PartitionId,
    /// Ideal boundary the transition belongs to.
    pub ideal: Micros,
    pub started: bool,
    pub wrapped: bool,
}

impl FrameClock {
    pub fn arm(&mut self, now: Micros) {
        self.firstrun = true;
        self.install_time = now;
        self.start_offset = 0;
    }

    pub fn start_time(&self) -> Micros {
        self.install_time + self.start_offset
    }

    pub fn running(&self) -> bool {
        !self.firstrun && self.cur_frame.is_some()
    }

    /// Advances the cursor to `now`. `frame` must be gap-filled so that its
    /// minors tile the hyperperiod.
    pub fn tick(&mut self, frame: &MajorFrame, now: Micros) -> Vec<Transition> {
        let mut out = Vec::new();
        if frame.minors.is_empty() {
            return out;
        }
        if self.firstrun {
            // The previous schedule stops at the first tick after an install.
            self.cur_frame = None;
            let start = self.start_time();
            if now < start {
                return out;
            }
            self.firstrun = false;
            self.hp_start = now;
            self.mf_start = now;
            self.cur_frame = Some(0);
            self.next_switch = now + frame.minors[0].duration;
            self.wraps = 0;
            out.push(Transition {
                index: 0,
                partition: frame.minors[0].partition,
                ideal: now,
                started: true,
                wrapped: false,
            });
        }
        let Some(mut cur) = self.cur_frame else {
            return out;
        };
        while now >= self.next_switch {
            cur = (cur + 1) % frame.minors.len();
            self.mf_start = self.next_switch;
            self.next_switch += frame.minors[cur].duration;
            let wrapped = cur == 0;
            if wrapped {
                self.hp_start += frame.hyperperiod;
                self.wraps += 1;
            }
            out.push(Transition {
                index: cur,
                partition: frame.minors[cur].partition,
                ideal: self.mf_start,
                started: false,
                wrapped,
            });
        }
        self.cur_frame = Some(cur);
        out
    }
}
