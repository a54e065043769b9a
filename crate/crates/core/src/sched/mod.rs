//! The per-node scheduler.
//!
//! [`Scheduler`] owns the task table, one [`RunQueueSet`] per CPU, the
//! installed major frame and its [`FrameClock`]. It does not know about
//! time passing on its own: the caller charges elapsed time with
//! [`Scheduler::advance_to`], drives the frame with
//! [`Scheduler::global_tick`] and asks for dispatch decisions with
//! [`Scheduler::schedule`]. Every observable change is appended to an
//! internal trace buffer that the caller drains.

mod cap;
mod clock;
mod runqueue;

pub use cap::{cap_ceiling, CapAccounting};
pub use clock::{FrameClock, Transition};
pub use runqueue::{pick_next_task, FairQueue, PickOutcome, PriorityQueue, RunQueueSet, TaskTable};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::format::encode_frame;
use crate::frame::{fill_empty, FrameError};
use crate::model::{
    ActorId, Criticality, CpuId, MajorFrame, Micros, ModelError, NodeId, PartitionId, RunState,
    SchedulerState, TaskControlBlock, TaskId, TraceEvent, TraceKind, DEFAULT_TICK,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchedError {
    #[error(transparent)]
    InvalidFrame(#[from] FrameError),
    #[error("another major-frame update is in progress")]
    ConcurrentUpdate,
    #[error("no major-frame update in progress")]
    NoUpdateInProgress,
    #[error("caller lacks the reconfiguration privilege")]
    NotPrivileged,
    #[error("hyperperiod offset must be set before the frame clock starts")]
    OffsetAfterStart,
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("task {0} already registered")]
    DuplicateTask(TaskId),
    #[error("task {task} pinned to cpu {cpu} but node has {num_cpus}")]
    BadAffinity {
        task: TaskId,
        cpu: CpuId,
        num_cpus: usize,
    },
    #[error("actor {0} mixes criticality levels")]
    MixedActor(ActorId),
    #[error(transparent)]
    InvalidTask(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedConfig {
    pub num_cpus: usize,
    pub tick: Micros,
    pub cap_enabled: bool,
    /// Major frames per cap accounting window.
    pub cap_window: u32,
    pub reconfig_allowed: bool,
}

impl Default for SchedConfig {
    fn default() -> Self {
        SchedConfig {
            num_cpus: 1,
            tick: DEFAULT_TICK,
            cap_enabled: false,
            cap_window: 1,
            reconfig_allowed: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameSwitchOutcome {
    pub switches: usize,
    pub started: bool,
    pub wrapped: bool,
    pub cap_reset: bool,
}

/// Decision made by one call to [`Scheduler::schedule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dispatch {
    pub cpu: CpuId,
    pub prev: Option<TaskId>,
    pub next: Option<TaskId>,
    pub over_cap: bool,
}

impl Dispatch {
    pub fn switched(&self) -> bool {
        self.prev != self.next
    }
}

/// Counters over SYSTEM and application picks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PickStats {
    pub calls: u64,
    pub inspected: u64,
    pub max_inspected: usize,
}

/// Proof that an update is in flight; consumed by [`Scheduler::commit_update`].
#[derive(Debug)]
pub struct UpdateToken {
    source: MajorFrame,
    filled: MajorFrame,
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    node: NodeId,
    config: SchedConfig,
    state: SchedulerState,
    frame: Option<MajorFrame>,
    clock: FrameClock,
    cap: CapAccounting,
    tasks: TaskTable,
    runqueues: Vec<RunQueueSet>,
    last_account: Micros,
    update_in_progress: bool,
    trace: Vec<TraceEvent>,
    stats: PickStats,
}

impl Scheduler {
    pub fn new(node: NodeId, config: SchedConfig) -> Self {
        let num_cpus = config.num_cpus.max(1);
        Scheduler {
            node,
            config: SchedConfig { num_cpus, ..config },
            state: SchedulerState::AppActive,
            frame: None,
            clock: FrameClock::default(),
            cap: CapAccounting::new(config.cap_window),
            tasks: TaskTable::new(),
            runqueues: (0..num_cpus).map(RunQueueSet::new).collect(),
            last_account: 0,
            update_in_progress: false,
            trace: Vec::new(),
            stats: PickStats::default(),
        }
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn config(&self) -> &SchedConfig {
        &self.config
    }

    pub fn state(&self) -> SchedulerState {
        self.state
    }

    /// Installed frame, gap-filled.
    pub fn frame(&self) -> Option<&MajorFrame> {
        self.frame.as_ref()
    }

    pub fn clock(&self) -> &FrameClock {
        &self.clock
    }

    pub fn cap_window(&self) -> &CapAccounting {
        &self.cap
    }

    pub fn stats(&self) -> PickStats {
        self.stats
    }

    pub fn tasks(&self) -> &TaskTable {
        &self.tasks
    }

    pub fn task(&self, id: TaskId) -> Option<&TaskControlBlock> {
        self.tasks.get(&id)
    }

    pub fn runqueue(&self, cpu: CpuId) -> &RunQueueSet {
        &self.runqueues[cpu]
    }

    pub fn current(&self, cpu: CpuId) -> Option<TaskId> {
        self.runqueues[cpu].current_task
    }

    /// Partition owning the current minor frame, once the clock runs.
    pub fn current_partition(&self) -> Option<PartitionId> {
        let frame = self.frame.as_ref()?;
        if !self.clock.running() {
            return None;
        }
        self.clock.cur_frame.map(|i| frame.minors[i].partition)
    }

    pub fn record(&mut self, event: TraceEvent) {
        self.trace.push(event);
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        std::mem::take(&mut self.trace)
    }

    fn event(&self, now: Micros, cpu: CpuId, kind: TraceKind) -> TraceEvent {
        TraceEvent::new(now, self.node, cpu, kind)
    }

    pub fn add_task(&mut self, tcb: TaskControlBlock) -> Result<(), SchedError> {
        tcb.check()?;
        if self.tasks.contains_key(&tcb.task_id) {
            return Err(SchedError::DuplicateTask(tcb.task_id));
        }
        if tcb.cpu_affinity >= self.config.num_cpus {
            return Err(SchedError::BadAffinity {
                task: tcb.task_id,
                cpu: tcb.cpu_affinity,
                num_cpus: self.config.num_cpus,
            });
        }
        if self
            .tasks
            .values()
            .any(|t| t.actor_id == tcb.actor_id && t.criticality != tcb.criticality)
        {
            return Err(SchedError::MixedActor(tcb.actor_id));
        }
        if tcb.run_state == RunState::Ready {
            self.runqueues[tcb.cpu_affinity].enqueue(&tcb);
        }
        self.tasks.insert(tcb.task_id, tcb);
        Ok(())
    }

    pub fn remove_task(&mut self, id: TaskId) -> Result<TaskControlBlock, SchedError> {
        let tcb = self.tasks.remove(&id).ok_or(SchedError::UnknownTask(id))?;
        let rq = &mut self.runqueues[tcb.cpu_affinity];
        rq.dequeue(&tcb);
        if rq.current_task == Some(id) {
            rq.current_task = None;
        }
        Ok(tcb)
    }

    /// Makes a blocked task ready; returns its CPU.
    pub fn wake(&mut self, id: TaskId, now: Micros) -> Result<CpuId, SchedError> {
        let tcb = self.tasks.get_mut(&id).ok_or(SchedError::UnknownTask(id))?;
        let cpu = tcb.cpu_affinity;
        if tcb.run_state == RunState::Blocked {
            tcb.run_state = RunState::Ready;
            let tcb = tcb.clone();
            self.runqueues[cpu].enqueue(&tcb);
            let ev = self
                .event(now, cpu, TraceKind::TaskReady)
                .tasks(None, Some(id))
                .partition(tcb.partition);
            self.record(ev);
        }
        Ok(cpu)
    }

    /// Removes a task from its run queue. A running task keeps its CPU
    /// until the next [`Scheduler::schedule`] call on that CPU.
    pub fn block(&mut self, id: TaskId, now: Micros) -> Result<CpuId, SchedError> {
        let tcb = self.tasks.get_mut(&id).ok_or(SchedError::UnknownTask(id))?;
        let cpu = tcb.cpu_affinity;
        if tcb.run_state == RunState::Ready {
            tcb.run_state = RunState::Blocked;
            let tcb = tcb.clone();
            self.runqueues[cpu].dequeue(&tcb);
            let ev = self
                .event(now, cpu, TraceKind::TaskBlock)
                .tasks(Some(id), None)
                .partition(tcb.partition);
            self.record(ev);
        }
        Ok(cpu)
    }

    /// Sends a ready task to the tail of its priority list.
    pub fn yield_task(&mut self, id: TaskId) -> Result<(), SchedError> {
        let tcb = self.tasks.get(&id).ok_or(SchedError::UnknownTask(id))?;
        if let Some(q) = self.runqueues[tcb.cpu_affinity].queue_mut(tcb.partition) {
            q.requeue_tail(id, tcb.priority);
        }
        Ok(())
    }

    /// Charges every running task for the time since the last call.
    pub fn advance_to(&mut self, now: Micros) -> Vec<(TaskId, Micros)> {
        debug_assert!(now >= self.last_account, "time moved backwards");
        let elapsed = now.saturating_sub(self.last_account);
        self.last_account = now;
        let mut charged = Vec::new();
        if elapsed == 0 {
            return charged;
        }
        for rq in &self.runqueues {
            if let Some(id) = rq.current_task {
                if let Some(t) = self.tasks.get_mut(&id) {
                    t.exec_time_in_window += elapsed;
                    t.total_exec_time += elapsed;
                    charged.push((id, elapsed));
                }
            }
        }
        charged
    }

    pub fn ceiling(&self, id: TaskId) -> Micros {
        match (self.tasks.get(&id), self.frame.as_ref()) {
            (Some(t), Some(f)) => cap_ceiling(t, f, &self.cap, self.config.num_cpus),
            _ => Micros::MAX,
        }
    }

    /// Time `id` may still run before hitting its ceiling, when a cap is
    /// being enforced on it.
    pub fn remaining_budget(&self, id: TaskId) -> Option<Micros> {
        if !self.config.cap_enabled {
            return None;
        }
        let t = self.tasks.get(&id)?;
        if !t.is_capped() || t.disabled {
            return None;
        }
        let ceiling = self.ceiling(id);
        (ceiling != Micros::MAX).then(|| ceiling.saturating_sub(t.exec_time_in_window))
    }

    fn reset_cap_window(&mut self, now: Micros) {
        self.cap.restart(now);
        for t in self.tasks.values_mut() {
            t.exec_time_in_window = 0;
        }
    }

    /// Installs the initial frame without the reconfiguration protocol.
    pub fn install_frame(&mut self, frame: &MajorFrame, now: Micros) -> Result<(), SchedError> {
        let filled = fill_empty(frame)?;
        self.frame = Some(filled);
        self.clock.arm(now);
        self.reset_cap_window(now);
        Ok(())
    }

    /// Delays the start of the first hyperperiod after an install.
    pub fn set_hyperperiod_offset(&mut self, offset: Micros) -> Result<(), SchedError> {
        if self.frame.is_none() || !self.clock.firstrun {
            return Err(SchedError::OffsetAfterStart);
        }
        self.clock.start_offset = offset;
        Ok(())
    }

    /// Runs on CPU 0 every tick: starts a freshly installed frame, advances
    /// the minor-frame cursor and restarts cap windows.
    pub fn global_tick(&mut self, now: Micros) -> FrameSwitchOutcome {
        let mut outcome = FrameSwitchOutcome::default();
        let Some(frame) = self.frame.as_ref() else {
            return outcome;
        };
        let transitions = self.clock.tick(frame, now);
        for t in transitions {
            let mut detail = format!("minor={}", t.index);
            if t.started {
                outcome.started = true;
                outcome.cap_reset = true;
                self.reset_cap_window(now);
                detail.push_str(&format!(" start hp_start={} cap_reset", t.ideal));
            }
            if t.wrapped {
                outcome.wrapped = true;
                detail.push_str(" wrap");
                if self.cap.on_wrap(now) {
                    outcome.cap_reset = true;
                    self.reset_cap_window(now);
                    detail.push_str(" cap_reset");
                }
            }
            outcome.switches += 1;
            let ev = self
                .event(now, 0, TraceKind::FrameSwitch)
                .partition(t.partition)
                .detail(detail);
            self.record(ev);
        }
        outcome
    }

    fn update_disabled_bit(&mut self, id: TaskId, now: Micros) {
        let ceiling = self.ceiling(id);
        let Some(t) = self.tasks.get_mut(&id) else {
            return;
        };
        if !t.is_capped() || t.disabled || t.exec_time_in_window < ceiling {
            return;
        }
        t.disabled = true;
        t.last_disabled_time = now;
        let (cpu, partition, prio, used) =
            (t.cpu_affinity, t.partition, t.priority, t.exec_time_in_window);
        if let Some(q) = self.runqueues[cpu].queue_mut(partition) {
            q.requeue_tail(id, prio);
        }
        let ev = self
            .event(now, cpu, TraceKind::CapDisable)
            .tasks(Some(id), None)
            .partition(partition)
            .detail(format!("used={used} ceiling={ceiling}"));
        self.record(ev);
    }

    fn counted_pick(&mut self, cpu: CpuId, partition: PartitionId, window: Option<Micros>) -> PickOutcome {
        let out = pick_next_task(&self.runqueues[cpu], partition, &mut self.tasks, window);
        self.stats.calls += 1;
        self.stats.inspected += out.inspected as u64;
        self.stats.max_inspected = self.stats.max_inspected.max(out.inspected);
        out
    }

    /// Chooses what runs next on `cpu`: SYSTEM first, then the partition
    /// owning the current minor frame (only while application partitions
    /// are active), then best-effort work. With caps enabled, a capped-out
    /// critical task still runs if nothing else on the CPU can.
    pub fn schedule(&mut self, cpu: CpuId, now: Micros) -> Dispatch {
        let prev = self.runqueues[cpu].current_task;
        if self.config.cap_enabled {
            if let Some(p) = prev {
                self.update_disabled_bit(p, now);
            }
        }
        let window = self.config.cap_enabled.then_some(self.cap.window_start);

        let mut choice = self.counted_pick(cpu, PartitionId::SYSTEM, window);
        if choice.task.is_none() && self.state == SchedulerState::AppActive {
            if let Some(p) = self.current_partition().filter(|p| p.is_application()) {
                choice = self.counted_pick(cpu, p, window);
            }
        }
        if choice.task.is_none() {
            choice = pick_next_task(&self.runqueues[cpu], PartitionId::BEST_EFFORT, &mut self.tasks, None);
        }
        if choice.task.is_none() && self.config.cap_enabled {
            if let Some((prio, id)) = self.runqueues[cpu].system_queue.head() {
                choice = PickOutcome {
                    priority: prio,
                    task: Some(id),
                    inspected: 1,
                    reenabled: None,
                    over_cap: true,
                };
            }
        }

        if let Some(id) = choice.reenabled {
            let partition = self.tasks[&id].partition;
            let ev = self
                .event(now, cpu, TraceKind::CapReenable)
                .tasks(None, Some(id))
                .partition(partition);
            self.record(ev);
        }

        let next = choice.task;
        self.runqueues[cpu].current_task = next;
        if prev != next {
            let partition = next
                .and_then(|id| self.tasks.get(&id).map(|t| t.partition))
                .or_else(|| self.current_partition());
            let mut ev = self.event(now, cpu, TraceKind::ContextSwitch).tasks(prev, next);
            ev.partition = partition;
            if choice.over_cap {
                ev.detail = "over_cap".into();
            }
            self.record(ev);
        }
        Dispatch {
            cpu,
            prev,
            next,
            over_cap: choice.over_cap,
        }
    }

    /// First half of a frame update: validates and gap-fills `frame`, then
    /// stops application dispatch on every CPU.
    pub fn begin_update(&mut self, frame: &MajorFrame, now: Micros) -> Result<UpdateToken, SchedError> {
        if !self.config.reconfig_allowed {
            return Err(SchedError::NotPrivileged);
        }
        if self.update_in_progress {
            return Err(SchedError::ConcurrentUpdate);
        }
        let filled = fill_empty(frame)?;
        self.update_in_progress = true;
        self.state = SchedulerState::AppInactive;
        let ev = self.event(now, 0, TraceKind::Reconfig).detail("APP_INACTIVE");
        self.record(ev);
        Ok(UpdateToken {
            source: frame.clone(),
            filled,
        })
    }

    /// Second half: installs the new minor list, re-arms the frame clock so
    /// the next tick restarts the hyperperiod, and resumes applications.
    pub fn commit_update(&mut self, token: UpdateToken, now: Micros) -> Result<(), SchedError> {
        if !self.update_in_progress {
            return Err(SchedError::NoUpdateInProgress);
        }
        self.frame = Some(token.filled);
        self.clock.arm(now);
        self.update_in_progress = false;
        self.state = SchedulerState::AppActive;
        let ev = self
            .event(now, 0, TraceKind::Reconfig)
            .detail(format!("APP_ACTIVE frame={}", encode_frame(&token.source)));
        self.record(ev);
        Ok(())
    }

    pub fn update_major_frame(&mut self, frame: &MajorFrame, now: Micros) -> Result<(), SchedError> {
        let token = self.begin_update(frame, now)?;
        self.commit_update(token, now)
    }

    pub fn hp_start(&self) -> Option<Micros> {
        self.clock.running().then_some(self.clock.hp_start)
    }

    /// Per-CPU ready tasks grouped by criticality, for invariant checks.
    pub fn ready_by_criticality(&self, cpu: CpuId) -> BTreeMap<Criticality, Vec<TaskId>> {
        let mut out: BTreeMap<Criticality, Vec<TaskId>> = BTreeMap::new();
        for t in self.tasks.values() {
            if t.cpu_affinity == cpu && t.run_state == RunState::Ready {
                out.entry(t.criticality).or_default().push(t.task_id);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MinorFrame, PartitionSpec, MICROS_PER_MS as MS};

    fn two_partitions(d: Micros) -> MajorFrame {
        MajorFrame::new(
            vec![PartitionSpec::new(1, 2 * d, d), PartitionSpec::new(2, 2 * d, d)],
            vec![
                MinorFrame::new(PartitionId(1), 0, d),
                MinorFrame::new(PartitionId(2), d, d),
            ],
        )
        .unwrap()
    }

    fn app(id: u32, prio: usize, part: u8) -> TaskControlBlock {
        TaskControlBlock::new(TaskId(id), Criticality::Application, prio, PartitionId(part))
    }

    fn crit(id: u32, prio: usize) -> TaskControlBlock {
        TaskControlBlock::new(TaskId(id), Criticality::Critical, prio, PartitionId::SYSTEM)
    }

    fn sched(cap: bool) -> Scheduler {
        Scheduler::new(
            NodeId(1),
            SchedConfig {
                cap_enabled: cap,
                ..SchedConfig::default()
            },
        )
    }

    /// Tick loop without the simulator: advance, global tick, schedule.
    fn run_ticks(s: &mut Scheduler, from: Micros, to: Micros) {
        let mut now = from;
        while now < to {
            s.advance_to(now);
            s.global_tick(now);
            s.schedule(0, now);
            now += s.config().tick;
        }
        s.advance_to(to);
    }

    #[test]
    fn frame_switch_within_one_quantum() {
        let mut s = sched(false);
        s.install_frame(&two_partitions(60 * MS), 0).unwrap();
        run_ticks(&mut s, 0, 200 * MS);
        let switches: Vec<_> = s
            .take_trace()
            .into_iter()
            .filter(|e| e.kind == TraceKind::FrameSwitch)
            .map(|e| e.timestamp)
            .collect();
        assert_eq!(switches, vec![0, 60 * MS, 120 * MS, 180 * MS]);
    }

    #[test]
    fn critical_preempts_application() {
        let mut s = sched(false);
        s.install_frame(&two_partitions(60 * MS), 0).unwrap();
        s.add_task(app(1, 50, 1)).unwrap();
        s.add_task(crit(9, 10)).unwrap();
        s.wake(TaskId(1), 0).unwrap();
        s.global_tick(0);
        assert_eq!(s.schedule(0, 0).next, Some(TaskId(1)));
        s.advance_to(10 * MS);
        s.wake(TaskId(9), 10 * MS).unwrap();
        let d = s.schedule(0, 10 * MS);
        assert_eq!((d.prev, d.next), (Some(TaskId(1)), Some(TaskId(9))));
        s.advance_to(15 * MS);
        s.block(TaskId(9), 15 * MS).unwrap();
        assert_eq!(s.schedule(0, 15 * MS).next, Some(TaskId(1)));
        assert_eq!(s.task(TaskId(1)).unwrap().total_exec_time, 10 * MS);
    }

    #[test]
    fn idle_when_nothing_runnable() {
        let mut s = sched(false);
        s.install_frame(&two_partitions(60 * MS), 0).unwrap();
        s.global_tick(0);
        let d = s.schedule(0, 0);
        assert_eq!(d.next, None);
        assert!(!d.switched());
    }

    #[test]
    fn application_confined_to_its_window() {
        let mut s = sched(false);
        s.install_frame(&two_partitions(60 * MS), 0).unwrap();
        s.add_task(app(1, 50, 1)).unwrap();
        s.wake(TaskId(1), 0).unwrap();
        run_ticks(&mut s, 0, 240 * MS);
        assert_eq!(s.task(TaskId(1)).unwrap().total_exec_time, 120 * MS);
    }

    #[test]
    fn best_effort_fills_gaps() {
        let mut s = sched(false);
        s.install_frame(&two_partitions(60 * MS), 0).unwrap();
        s.add_task(app(1, 50, 1)).unwrap();
        s.add_task(TaskControlBlock::new(TaskId(3), Criticality::BestEffort, 0, PartitionId::BEST_EFFORT))
            .unwrap();
        s.wake(TaskId(1), 0).unwrap();
        s.wake(TaskId(3), 0).unwrap();
        run_ticks(&mut s, 0, 240 * MS);
        assert_eq!(s.task(TaskId(3)).unwrap().total_exec_time, 120 * MS);
    }

    #[test]
    fn cap_sharing_pattern() {
        let mut s = sched(true);
        s.install_frame(&two_partitions(60 * MS), 0).unwrap();
        s.add_task(app(1000, 70, 1)).unwrap();
        s.add_task(app(1001, 72, 1).with_cap(20)).unwrap();
        s.wake(TaskId(1000), 0).unwrap();
        s.wake(TaskId(1001), 0).unwrap();
        run_ticks(&mut s, 0, 1200 * MS);
        assert_eq!(s.task(TaskId(1001)).unwrap().total_exec_time, 10 * 12 * MS);
        assert_eq!(s.task(TaskId(1000)).unwrap().total_exec_time, 10 * 48 * MS);
    }

    #[test]
    fn capped_task_alone_is_work_conserving() {
        let mut s = sched(true);
        s.install_frame(&two_partitions(60 * MS), 0).unwrap();
        s.add_task(app(1001, 72, 1).with_cap(20)).unwrap();
        s.wake(TaskId(1001), 0).unwrap();
        run_ticks(&mut s, 0, 240 * MS);
        assert_eq!(s.task(TaskId(1001)).unwrap().total_exec_time, 120 * MS);
    }

    #[test]
    fn capped_critical_is_hard_limited_when_others_ready() {
        // Critical 10% of H=120 ms -> 12 ms per window; BE task soaks up the rest.
        let mut s = sched(true);
        s.install_frame(&two_partitions(60 * MS), 0).unwrap();
        s.add_task(crit(9, 10).with_cap(10)).unwrap();
        s.add_task(TaskControlBlock::new(TaskId(3), Criticality::BestEffort, 0, PartitionId::BEST_EFFORT))
            .unwrap();
        s.wake(TaskId(9), 0).unwrap();
        s.wake(TaskId(3), 0).unwrap();
        run_ticks(&mut s, 0, 240 * MS);
        assert_eq!(s.task(TaskId(9)).unwrap().total_exec_time, 24 * MS);

        // Alone, the critical task keeps the CPU past its ceiling.
        let mut s = sched(true);
        s.install_frame(&two_partitions(60 * MS), 0).unwrap();
        s.add_task(crit(9, 10).with_cap(10)).unwrap();
        s.wake(TaskId(9), 0).unwrap();
        run_ticks(&mut s, 0, 240 * MS);
        assert_eq!(s.task(TaskId(9)).unwrap().total_exec_time, 240 * MS);
    }

    #[test]
    fn inactive_state_blocks_applications() {
        let mut s = sched(false);
        s.install_frame(&two_partitions(60 * MS), 0).unwrap();
        s.add_task(app(1, 50, 1)).unwrap();
        s.wake(TaskId(1), 0).unwrap();
        s.global_tick(0);
        assert_eq!(s.schedule(0, 0).next, Some(TaskId(1)));
        let token = s.begin_update(&two_partitions(120 * MS), 30 * MS).unwrap();
        assert_eq!(s.state(), SchedulerState::AppInactive);
        assert_eq!(s.schedule(0, 30 * MS).next, None);
        assert_eq!(
            s.begin_update(&two_partitions(120 * MS), 30 * MS).unwrap_err(),
            SchedError::ConcurrentUpdate
        );
        s.commit_update(token, 30 * MS).unwrap();
        assert_eq!(s.state(), SchedulerState::AppActive);
        // Old minor frame still owns the CPU until the next tick.
        assert_eq!(s.current_partition(), None);
    }

    #[test]
    fn update_rejects_invalid_and_unprivileged() {
        let mut s = sched(false);
        let bad = MajorFrame {
            hyperperiod: 100,
            minors: vec![
                MinorFrame::new(PartitionId(1), 0, 60),
                MinorFrame::new(PartitionId(2), 30, 60),
            ],
            partitions: vec![PartitionSpec::new(1, 100, 60), PartitionSpec::new(2, 100, 60)],
        };
        assert!(matches!(
            s.update_major_frame(&bad, 0),
            Err(SchedError::InvalidFrame(FrameError::InvalidFrame(_)))
        ));
        let mut s = Scheduler::new(
            NodeId(1),
            SchedConfig {
                reconfig_allowed: false,
                ..SchedConfig::default()
            },
        );
        assert_eq!(
            s.update_major_frame(&two_partitions(10), 0),
            Err(SchedError::NotPrivileged)
        );
    }

    #[test]
    fn offset_only_before_start() {
        let mut s = sched(false);
        assert_eq!(s.set_hyperperiod_offset(5), Err(SchedError::OffsetAfterStart));
        s.install_frame(&two_partitions(60 * MS), 0).unwrap();
        s.set_hyperperiod_offset(8 * MS).unwrap();
        s.global_tick(4 * MS);
        assert_eq!(s.hp_start(), None);
        s.global_tick(8 * MS);
        assert_eq!(s.hp_start(), Some(8 * MS));
        assert_eq!(s.set_hyperperiod_offset(0), Err(SchedError::OffsetAfterStart));
    }

    #[test]
    fn mixed_actor_rejected() {
        let mut s = sched(false);
        s.add_task(app(1, 10, 1).with_actor(ActorId(7))).unwrap();
        assert_eq!(
            s.add_task(crit(2, 10).with_actor(ActorId(7))),
            Err(SchedError::MixedActor(ActorId(7)))
        );
    }

    #[test]
    fn equal_priority_fifo_after_exhaustion() {
        let mut s = sched(true);
        s.install_frame(&two_partitions(60 * MS), 0).unwrap();
        for id in [1, 2, 3] {
            s.add_task(app(id, 40, 1).with_cap(10)).unwrap();
            s.wake(TaskId(id), 0).unwrap();
        }
        run_ticks(&mut s, 0, 60 * MS);
        let order: Vec<u32> = s
            .take_trace()
            .iter()
            .filter(|e| e.kind == TraceKind::ContextSwitch)
            .filter_map(|e| e.next_task.map(|t| t.0))
            .collect();
        assert_eq!(&order[..3], &[1, 2, 3]);
    }
}
