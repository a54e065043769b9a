//! Deterministic discrete-event simulation of one node.
//!
//! A [`NodeSim`] owns a [`Scheduler`] and an [`EventQueue`]. Ticks drive
//! the frame clock and periodic rescheduling; job completion, cap expiry,
//! releases and message arrivals are exact events. Every event charges
//! the running tasks for the time elapsed since the previous one.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{CpuId, MajorFrame, Micros, NodeId, TaskId, TraceEvent, TraceKind};
use crate::scenario::{InjectionKind, Link, Scenario, ScenarioError, WorkloadModel};
use crate::sched::{SchedConfig, SchedError, Scheduler};
use crate::trace::{TraceHeader, TraceLog};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    ScenarioInvalid(#[from] ScenarioError),
    #[error("simulation horizon is zero")]
    HorizonZero,
    #[error("event at {at} is before the current time {now}")]
    PastTimestamp { at: Micros, now: Micros },
    #[error("node {0} is not part of the scenario")]
    UnknownNode(NodeId),
    #[error(transparent)]
    Sched(#[from] SchedError),
}

/// A message in flight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    /// `<sending node>.<sequence>`.
    pub id: String,
    pub from_node: Option<NodeId>,
    pub from_task: Option<TaskId>,
    pub to: TaskId,
    pub tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimEvent {
    /// Boot: install the node's frame.
    Start,
    Tick,
    TaskRelease { task: TaskId, busy: Micros },
    WorkDone { cpu: CpuId, epoch: u64 },
    CapExpiry { cpu: CpuId, epoch: u64 },
    MessageArrival(Message),
    InjectReconfig(MajorFrame),
    InjectCommand { task: TaskId, command: String },
}

/// Pending events ordered by (time, insertion sequence).
#[derive(Debug, Clone, Default)]
pub struct EventQueue {
    pending: BTreeMap<(Micros, u64), SimEvent>,
    seq: u64,
    now: Micros,
}

impl EventQueue {
    pub fn now(&self) -> Micros {
        self.now
    }

    pub fn push(&mut self, at: Micros, event: SimEvent) -> Result<(), SimError> {
        if at < self.now {
            return Err(SimError::PastTimestamp { at, now: self.now });
        }
        self.pending.insert((at, self.seq), event);
        self.seq += 1;
        Ok(())
    }

    pub fn peek_time(&self) -> Option<Micros> {
        self.pending.keys().next().map(|&(t, _)| t)
    }

    /// Pops the earliest event strictly before `limit`.
    pub fn pop_before(&mut self, limit: Micros) -> Option<(Micros, SimEvent)> {
        let entry = self.pending.first_entry()?;
        if entry.key().0 >= limit {
            return None;
        }
        let ((at, _), ev) = entry.remove_entry();
        self.now = at;
        Some((at, ev))
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }
}

/// Message leaving this node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub deliver_at: Micros,
    pub to_node: NodeId,
    pub message: Message,
}

#[derive(Debug, Clone)]
struct Job {
    remaining: Micros,
    tag: Option<String>,
}

#[derive(Debug, Clone, Default)]
struct Jobs {
    current: Option<Job>,
    pending: VecDeque<Job>,
}

const ENDLESS: Micros = Micros::MAX;

#[derive(Debug, Clone)]
pub struct NodeSim {
    node: NodeId,
    sched: Scheduler,
    queue: EventQueue,
    header: TraceHeader,
    boot_frame: MajorFrame,
    boot_offset: Micros,
    tick: Micros,
    workloads: BTreeMap<TaskId, WorkloadModel>,
    jobs: BTreeMap<TaskId, Jobs>,
    routes: BTreeMap<TaskId, Vec<(TaskId, NodeId)>>,
    links: BTreeMap<NodeId, Link>,
    last_delivery: BTreeMap<NodeId, Micros>,
    rng: ChaCha8Rng,
    epochs: Vec<u64>,
    outbox: Vec<Envelope>,
    msg_seq: u64,
}

impl NodeSim {
    /// Builds the simulator for `node`; the scenario must already be valid.
    pub fn new(scenario: &Scenario, node: NodeId, horizon: Micros) -> Result<NodeSim, SimError> {
        let spec = scenario.node(node).ok_or(SimError::UnknownNode(node))?;
        let header = TraceHeader::for_node(scenario, node, horizon).ok_or(SimError::UnknownNode(node))?;
        let config = SchedConfig {
            num_cpus: spec.cpus,
            tick: scenario.tick,
            cap_enabled: scenario.cap_enabled,
            cap_window: scenario.cap_window,
            reconfig_allowed: scenario.reconfig_allowed,
        };
        let mut sched = Scheduler::new(node, config);
        let mut workloads = BTreeMap::new();
        let mut jobs = BTreeMap::new();
        for t in scenario.tasks_on(node) {
            sched.add_task(t.tcb())?;
            workloads.insert(t.id, t.workload.clone());
            jobs.insert(t.id, Jobs::default());
        }
        let mut routes: BTreeMap<TaskId, Vec<(TaskId, NodeId)>> = BTreeMap::new();
        for e in &scenario.edges {
            let (Some(from), Some(to)) = (scenario.task(e.from), scenario.task(e.to)) else {
                continue;
            };
            if from.node == node {
                routes.entry(e.from).or_default().push((e.to, to.node));
            }
        }
        let links = scenario
            .links
            .iter()
            .filter(|l| l.from == node)
            .map(|l| (l.to, *l))
            .collect();

        let mut sim = NodeSim {
            node,
            sched,
            queue: EventQueue::default(),
            header,
            boot_frame: scenario.frames[&spec.frame].clone(),
            boot_offset: spec.offset,
            tick: scenario.tick,
            workloads,
            jobs,
            routes,
            links,
            last_delivery: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(scenario.seed ^ (u64::from(node.0) << 32)),
            epochs: vec![0; spec.cpus],
            outbox: Vec::new(),
            msg_seq: 0,
        };

        sim.queue.push(spec.skew, SimEvent::Start)?;
        sim.queue.push(0, SimEvent::Tick)?;
        for t in scenario.tasks_on(node) {
            match t.workload {
                WorkloadModel::Periodic { budget, phase, .. } => {
                    sim.queue.push(phase, SimEvent::TaskRelease { task: t.id, busy: budget })?
                }
                WorkloadModel::Oneshot { at, busy } => {
                    sim.queue.push(at, SimEvent::TaskRelease { task: t.id, busy })?
                }
                _ => {}
            }
        }
        for inj in scenario.injections.iter().filter(|i| i.node == node) {
            let ev = match &inj.kind {
                InjectionKind::Reconfig { frame } => SimEvent::InjectReconfig(scenario.frames[frame].clone()),
                InjectionKind::Command { task, command } => SimEvent::InjectCommand {
                    task: *task,
                    command: command.clone(),
                },
            };
            sim.queue.push(inj.at, ev)?;
        }
        Ok(sim)
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.sched
    }

    pub fn now(&self) -> Micros {
        self.queue.now()
    }

    pub fn next_time(&self) -> Option<Micros> {
        self.queue.peek_time()
    }

    /// Schedules an extra event.
    pub fn inject(&mut self, at: Micros, event: SimEvent) -> Result<(), SimError> {
        self.queue.push(at, event)
    }

    pub fn take_outbox(&mut self) -> Vec<Envelope> {
        std::mem::take(&mut self.outbox)
    }

    pub fn deliver(&mut self, env: Envelope) -> Result<(), SimError> {
        self.queue.push(env.deliver_at, SimEvent::MessageArrival(env.message))
    }

    /// Processes every event strictly before `limit`.
    pub fn run_until(&mut self, limit: Micros) -> Result<(), SimError> {
        while let Some((at, ev)) = self.queue.pop_before(limit) {
            self.step(at, ev)?;
        }
        Ok(())
    }

    /// Charges time up to `until` and returns the trace.
    pub fn finish(mut self, until: Micros) -> TraceLog {
        self.charge(until);
        self.header.horizon = until;
        TraceLog {
            header: self.header,
            events: self.sched.take_trace(),
        }
    }

    fn charge(&mut self, now: Micros) {
        for (task, dt) in self.sched.advance_to(now) {
            if let Some(job) = self.jobs.get_mut(&task).and_then(|j| j.current.as_mut()) {
                if job.remaining != ENDLESS {
                    job.remaining = job.remaining.saturating_sub(dt);
                }
            }
        }
    }

    fn step(&mut self, at: Micros, ev: SimEvent) -> Result<(), SimError> {
        self.charge(at);
        match ev {
            SimEvent::Start => {
                self.sched.install_frame(&self.boot_frame, at)?;
                if self.boot_offset > 0 {
                    self.sched.set_hyperperiod_offset(self.boot_offset)?;
                }
                let endless: Vec<TaskId> = self
                    .workloads
                    .iter()
                    .filter(|(_, w)| matches!(w, WorkloadModel::CpuBound))
                    .map(|(&id, _)| id)
                    .collect();
                for id in endless {
                    self.add_job(id, ENDLESS, None, at)?;
                }
                self.reschedule_all(at)?;
            }
            SimEvent::Tick => {
                self.sched.global_tick(at);
                self.reschedule_all(at)?;
                self.queue.push(at + self.tick, SimEvent::Tick)?;
            }
            SimEvent::TaskRelease { task, busy } => {
                if let Some(&WorkloadModel::Periodic { period, budget, .. }) = self.workloads.get(&task) {
                    self.queue.push(at + period, SimEvent::TaskRelease { task, busy: budget })?;
                }
                if let Some(cpu) = self.add_job(task, busy, None, at)? {
                    self.reschedule(cpu, at)?;
                }
            }
            SimEvent::WorkDone { cpu, epoch } => {
                if epoch == self.epochs[cpu] {
                    self.complete_job(cpu, at)?;
                    self.reschedule(cpu, at)?;
                }
            }
            SimEvent::CapExpiry { cpu, epoch } => {
                if epoch == self.epochs[cpu] {
                    self.reschedule(cpu, at)?;
                }
            }
            SimEvent::MessageArrival(msg) => self.receive(msg, at)?,
            SimEvent::InjectReconfig(frame) => match self.sched.begin_update(&frame, at) {
                Ok(token) => {
                    self.reschedule_all(at)?;
                    self.sched.commit_update(token, at)?;
                    self.reschedule_all(at)?;
                }
                Err(e) => {
                    let ev = TraceEvent::new(at, self.node, 0, TraceKind::Reconfig).detail(format!("REJECTED reason={}", reason_token(&e)));
                    self.sched.record(ev);
                }
            },
            SimEvent::InjectCommand { task, command } => {
                let id = self.next_message_id();
                let tag = format!("{command}@{id}");
                self.receive(
                    Message {
                        id,
                        from_node: None,
                        from_task: None,
                        to: task,
                        tag: Some(tag),
                    },
                    at,
                )?;
            }
        }
        Ok(())
    }

    fn next_message_id(&mut self) -> String {
        let id = format!("{}.{}", self.node, self.msg_seq);
        self.msg_seq += 1;
        id
    }

    /// Queues a job for `task`, waking it when idle. Returns the CPU to
    /// reschedule when the task became ready.
    fn add_job(&mut self, task: TaskId, busy: Micros, tag: Option<String>, at: Micros) -> Result<Option<CpuId>, SimError> {
        let jobs = self.jobs.get_mut(&task).ok_or(SchedError::UnknownTask(task))?;
        let job = Job { remaining: busy, tag };
        if jobs.current.is_some() {
            jobs.pending.push_back(job);
            return Ok(None);
        }
        jobs.current = Some(job);
        Ok(Some(self.sched.wake(task, at)?))
    }

    fn complete_job(&mut self, cpu: CpuId, at: Micros) -> Result<(), SimError> {
        let Some(task) = self.sched.current(cpu) else {
            return Ok(());
        };
        let jobs = self.jobs.get_mut(&task).ok_or(SchedError::UnknownTask(task))?;
        let Some(done) = jobs.current.take() else {
            return Ok(());
        };
        debug_assert_eq!(done.remaining, 0, "job of {task} completed early");
        jobs.current = jobs.pending.pop_front();
        let idle = jobs.current.is_none();
        self.send_all(task, done.tag, cpu, at)?;
        if idle {
            self.sched.block(task, at)?;
        }
        Ok(())
    }

    fn send_all(&mut self, from: TaskId, tag: Option<String>, cpu: CpuId, at: Micros) -> Result<(), SimError> {
        let targets = self.routes.get(&from).cloned().unwrap_or_default();
        for (to, to_node) in targets {
            let id = self.next_message_id();
            let mut detail = format!("id={id} to={to} dst={to_node}");
            if let Some(t) = &tag {
                detail.push_str(&format!(" cmd={t}"));
            }
            let ev = TraceEvent::new(at, self.node, cpu, TraceKind::MessageSend)
                .tasks(Some(from), Some(to))
                .detail(detail);
            self.sched.record(ev);
            let message = Message {
                id,
                from_node: Some(self.node),
                from_task: Some(from),
                to,
                tag: tag.clone(),
            };
            if to_node == self.node {
                self.queue.push(at, SimEvent::MessageArrival(message))?;
                continue;
            }
            let link = self.links[&to_node];
            let spread = if link.jitter > 0 { self.rng.gen_range(0..=link.jitter) } else { 0 };
            let earliest = at + link.latency + spread;
            let last = self.last_delivery.entry(to_node).or_insert(0);
            let deliver_at = earliest.max(*last);
            *last = deliver_at;
            self.outbox.push(Envelope {
                deliver_at,
                to_node,
                message,
            });
        }
        Ok(())
    }

    fn receive(&mut self, msg: Message, at: Micros) -> Result<(), SimError> {
        let cpu = self
            .sched
            .task(msg.to)
            .map(|t| t.cpu_affinity)
            .ok_or(SchedError::UnknownTask(msg.to))?;
        let from = msg.from_node.map_or_else(|| "ground".to_string(), |n| n.to_string());
        let mut detail = format!("id={} from={from}", msg.id);
        if let Some(t) = &msg.tag {
            detail.push_str(&format!(" cmd={t}"));
        }
        let mut ev = TraceEvent::new(at, self.node, cpu, TraceKind::MessageRecv).detail(detail);
        ev.prev_task = msg.from_task;
        ev.next_task = Some(msg.to);
        self.sched.record(ev);
        if let Some(&WorkloadModel::EventDriven { service }) = self.workloads.get(&msg.to) {
            if let Some(cpu) = self.add_job(msg.to, service, msg.tag, at)? {
                self.reschedule(cpu, at)?;
            }
        }
        Ok(())
    }

    fn reschedule_all(&mut self, at: Micros) -> Result<(), SimError> {
        for cpu in 0..self.epochs.len() {
            self.reschedule(cpu, at)?;
        }
        Ok(())
    }

    /// Asks the scheduler for a decision on `cpu` and re-arms its timers.
    fn reschedule(&mut self, cpu: CpuId, at: Micros) -> Result<(), SimError> {
        self.sched.schedule(cpu, at);
        self.epochs[cpu] += 1;
        let epoch = self.epochs[cpu];
        let Some(task) = self.sched.current(cpu) else {
            return Ok(());
        };
        let remaining = self.jobs[&task].current.as_ref().map_or(ENDLESS, |j| j.remaining);
        if remaining != ENDLESS {
            self.queue.push(at + remaining, SimEvent::WorkDone { cpu, epoch })?;
        }
        if let Some(budget) = self.sched.remaining_budget(task) {
            if budget < remaining {
                self.queue.push(at + budget, SimEvent::CapExpiry { cpu, epoch })?;
            }
        }
        Ok(())
    }
}

fn reason_token(e: &SchedError) -> &'static str {
    match e {
        SchedError::NotPrivileged => "not_privileged",
        SchedError::ConcurrentUpdate => "concurrent_update",
        SchedError::InvalidFrame(_) => "invalid_frame",
        _ => "error",
    }
}

/// Simulates one node of `scenario` up to `until` (exclusive for events).
/// Messages to other nodes are dropped.
pub fn run_node(scenario: &Scenario, node: NodeId, until: Micros) -> Result<TraceLog, SimError> {
    if until == 0 {
        return Err(SimError::HorizonZero);
    }
    scenario.validate()?;
    let mut sim = NodeSim::new(scenario, node, until)?;
    sim.run_until(until)?;
    Ok(sim.finish(until))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queue_orders_by_time_then_insertion() {
        let mut q = EventQueue::default();
        q.push(5, SimEvent::Tick).unwrap();
        q.push(3, SimEvent::Start).unwrap();
        q.push(5, SimEvent::Start).unwrap();
        assert_eq!(q.pop_before(10), Some((3, SimEvent::Start)));
        assert_eq!(q.pop_before(10), Some((5, SimEvent::Tick)));
        assert_eq!(q.pop_before(5), None);
        assert_eq!(q.pop_before(6), Some((5, SimEvent::Start)));
        assert_eq!(q.push(4, SimEvent::Tick), Err(SimError::PastTimestamp { at: 4, now: 5 }));
        q.push(5, SimEvent::Tick).unwrap();
        assert_eq!(q.len(), 1);
    }
}
