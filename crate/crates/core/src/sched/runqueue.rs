//! Per-CPU run queues.
//!
//! Each CPU owns one priority array per application partition, one for the
//! SYSTEM partition and a fair queue for best-effort work. A task sits in
//! exactly one queue while it is ready, including while it runs.

use std::collections::{BTreeMap, VecDeque};

use crate::model::{CpuId, Micros, PartitionId, TaskControlBlock, TaskId, MAX_APP_PARTITIONS, MAX_RT_PRIO};

pub type TaskTable = BTreeMap<TaskId, TaskControlBlock>;

/// FIFO lists indexed by priority plus an occupancy bitmap.
#[derive(Debug, Clone)]
pub struct PriorityQueue {
    lists: Vec<VecDeque<TaskId>>,
    bitmap: u128,
}

impl Default for PriorityQueue {
    fn default() -> Self {
        PriorityQueue {
            lists: vec![VecDeque::new(); MAX_RT_PRIO],
            bitmap: 0,
        }
    }
}

impl PriorityQueue {
    pub fn push_back(&mut self, task: TaskId, prio: usize) {
        self.lists[prio].push_back(task);
        self.bitmap |= 1 << prio;
    }

    pub fn push_front(&mut self, task: TaskId, prio: usize) {
        self.lists[prio].push_front(task);
        self.bitmap |= 1 << prio;
    }

    pub fn remove(&mut self, task: TaskId, prio: usize) -> bool {
        let list = &mut self.lists[prio];
        let Some(pos) = list.iter().position(|&t| t == task) else {
            return false;
        };
        list.remove(pos);
        if list.is_empty() {
            self.bitmap &= !(1 << prio);
        }
        true
    }

    /// Moves `task` to the tail of its priority list.
    pub fn requeue_tail(&mut self, task: TaskId, prio: usize) {
        if self.remove(task, prio) {
            self.push_back(task, prio);
        }
    }

    /// Highest occupied priority, found from the bitmap.
    pub fn highest(&self) -> Option<usize> {
        (self.bitmap != 0).then(|| 127 - self.bitmap.leading_zeros() as usize)
    }

    /// Occupied priorities, most urgent first.
    fn occupied_desc(&self) -> impl Iterator<Item = usize> + '_ {
        let mut bits = self.bitmap;
        std::iter::from_fn(move || {
            (bits != 0).then(|| {
                let idx = 127 - bits.leading_zeros() as usize;
                bits &= !(1 << idx);
                idx
            })
        })
    }

    pub fn list(&self, prio: usize) -> &VecDeque<TaskId> {
        &self.lists[prio]
    }

    pub fn head(&self) -> Option<(usize, TaskId)> {
        let prio = self.highest()?;
        self.lists[prio].front().map(|&t| (prio, t))
    }

    pub fn len(&self) -> usize {
        self.lists.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bitmap == 0
    }

    pub fn contains(&self, task: TaskId) -> bool {
        self.lists.iter().any(|l| l.contains(&task))
    }

    /// Picks the next task.
    ///
    /// Without a cap window the head of the highest list is returned after
    /// looking at that single entry. With `cap_window_start` set, lists are
    /// scanned from the highest priority down: a task disabled before the
    /// window start is re-enabled and returned, a task disabled inside the
    /// current window is skipped, and the first enabled task wins. If every
    /// task is disabled, `work_conserving` decides between the head of the
    /// highest list and nothing.
    pub fn pick(
        &self,
        tasks: &mut TaskTable,
        cap_window_start: Option<Micros>,
        work_conserving: bool,
    ) -> PickOutcome {
        let mut out = PickOutcome::none();
        let Some(window_start) = cap_window_start else {
            if let Some((prio, task)) = self.head() {
                out.priority = prio;
                out.task = Some(task);
                out.inspected = 1;
            }
            return out;
        };

        let mut fallback = None;
        for prio in self.occupied_desc() {
            for &id in &self.lists[prio] {
                out.inspected += 1;
                fallback.get_or_insert((prio, id));
                let tcb = tasks.get_mut(&id).expect("queued task is registered");
                if !tcb.disabled {
                    out.priority = prio;
                    out.task = Some(id);
                    return out;
                }
                if tcb.last_disabled_time < window_start {
                    tcb.disabled = false;
                    out.priority = prio;
                    out.task = Some(id);
                    out.reenabled = Some(id);
                    return out;
                }
            }
        }
        if work_conserving {
            if let Some((prio, id)) = fallback {
                out.priority = prio;
                out.task = Some(id);
                out.over_cap = true;
            }
        }
        out
    }
}

/// Result of one pick: `priority == MAX_RT_PRIO` when nothing was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PickOutcome {
    pub priority: usize,
    pub task: Option<TaskId>,
    /// Queue entries looked at.
    pub inspected: usize,
    /// Task whose disabled bit was cleared because it dates from an earlier window.
    pub reenabled: Option<TaskId>,
    /// The chosen task is past its cap and runs only because nothing else can.
    pub over_cap: bool,
}

impl PickOutcome {
    pub fn none() -> Self {
        PickOutcome {
            priority: MAX_RT_PRIO,
            task: None,
            inspected: 0,
            reenabled: None,
            over_cap: false,
        }
    }
}

/// Best-effort queue: the task with the least accumulated runtime goes next,
/// ties broken by arrival order.
#[derive(Debug, Clone, Default)]
pub struct FairQueue {
    tasks: Vec<TaskId>,
}

impl FairQueue {
    pub fn push(&mut self, task: TaskId) {
        if !self.tasks.contains(&task) {
            self.tasks.push(task);
        }
    }

    pub fn remove(&mut self, task: TaskId) -> bool {
        let before = self.tasks.len();
        self.tasks.retain(|&t| t != task);
        before != self.tasks.len()
    }

    pub fn pick(&self, tasks: &TaskTable) -> Option<TaskId> {
        self.tasks
            .iter()
            .enumerate()
            .min_by_key(|(i, id)| (tasks[*id].total_exec_time, *i))
            .map(|(_, &id)| id)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn contains(&self, task: TaskId) -> bool {
        self.tasks.contains(&task)
    }
}

#[derive(Debug, Clone)]
pub struct RunQueueSet {
    pub cpu: CpuId,
    pub partition_queues: Vec<PriorityQueue>,
    pub system_queue: PriorityQueue,
    pub best_effort_queue: FairQueue,
    pub current_task: Option<TaskId>,
}

impl RunQueueSet {
    pub fn new(cpu: CpuId) -> Self {
        RunQueueSet {
            cpu,
            partition_queues: vec![PriorityQueue::default(); MAX_APP_PARTITIONS],
            system_queue: PriorityQueue::default(),
            best_effort_queue: FairQueue::default(),
            current_task: None,
        }
    }

    pub fn queue(&self, partition: PartitionId) -> Option<&PriorityQueue> {
        if partition == PartitionId::SYSTEM {
            return Some(&self.system_queue);
        }
        partition.queue_index().map(|i| &self.partition_queues[i])
    }

    pub fn queue_mut(&mut self, partition: PartitionId) -> Option<&mut PriorityQueue> {
        if partition == PartitionId::SYSTEM {
            return Some(&mut self.system_queue);
        }
        partition.queue_index().map(move |i| &mut self.partition_queues[i])
    }

    pub fn enqueue(&mut self, tcb: &TaskControlBlock) {
        if tcb.partition == PartitionId::BEST_EFFORT {
            self.best_effort_queue.push(tcb.task_id);
        } else if let Some(q) = self.queue_mut(tcb.partition) {
            q.push_back(tcb.task_id, tcb.priority);
        }
    }

    pub fn dequeue(&mut self, tcb: &TaskControlBlock) -> bool {
        if tcb.partition == PartitionId::BEST_EFFORT {
            self.best_effort_queue.remove(tcb.task_id)
        } else {
            self.queue_mut(tcb.partition)
                .is_some_and(|q| q.remove(tcb.task_id, tcb.priority))
        }
    }

    /// Number of queues holding `task`; 0 or 1 when consistent.
    pub fn occurrences(&self, task: TaskId) -> usize {
        self.partition_queues.iter().filter(|q| q.contains(task)).count()
            + usize::from(self.system_queue.contains(task))
            + usize::from(self.best_effort_queue.contains(task))
    }
}

/// Pick from the queue serving `partition` on this CPU.
///
/// Application partitions are work conserving when every task is capped
/// out; the SYSTEM partition is not. BEST_EFFORT uses the fair queue and
/// ignores caps.
pub fn pick_next_task(
    rq: &RunQueueSet,
    partition: PartitionId,
    tasks: &mut TaskTable,
    cap_window_start: Option<Micros>,
) -> PickOutcome {
    if partition == PartitionId::BEST_EFFORT {
        let mut out = PickOutcome::none();
        out.inspected = rq.best_effort_queue.len();
        if let Some(id) = rq.best_effort_queue.pick(tasks) {
            out.task = Some(id);
            out.priority = 0;
        }
        return out;
    }
    match rq.queue(partition) {
        Some(q) => q.pick(tasks, cap_window_start, partition.is_application()),
        None => PickOutcome::none(),
    }
}
