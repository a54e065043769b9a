//! Domain vocabulary shared by every other module.
//!
//! Time is integer microseconds everywhere. Nothing in here schedules
//! anything; these are plain value types plus the few invariant checks that
//! only depend on a single value.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simulated time or duration in microseconds.
pub type Micros = u64;

pub const MICROS_PER_MS: Micros = 1_000;
pub const MICROS_PER_SEC: Micros = 1_000_000;

/// Number of real-time priority levels for CRITICAL and APPLICATION tasks.
/// Larger values are more urgent.
pub const MAX_RT_PRIO: usize = 100;

/// Upper bound on application partitions per node.
pub const MAX_APP_PARTITIONS: usize = 64;

/// Default scheduler tick (250 Hz).
pub const DEFAULT_TICK: Micros = 4 * MICROS_PER_MS;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("empty partition set")]
    EmptyPartitionSet,
    #[error("period must be positive")]
    ZeroPeriod,
    #[error("partition {0}: {1}")]
    InvalidPartition(PartitionId, String),
    #[error("task {0}: {1}")]
    InvalidTask(TaskId, String),
}

/// Partition identifier. Application partitions use 1..=64; the remaining
/// values are reserved sentinels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartitionId(pub u8);

impl PartitionId {
    /// Queue of CRITICAL tasks.
    pub const SYSTEM: PartitionId = PartitionId(0);
    /// Fair queue of BEST_EFFORT tasks.
    pub const BEST_EFFORT: PartitionId = PartitionId(65);
    /// Owner of gap windows inserted by `fill_empty`.
    pub const IDLE: PartitionId = PartitionId(66);

    pub fn app(id: u8) -> Option<PartitionId> {
        (1..=MAX_APP_PARTITIONS as u8)
            .contains(&id)
            .then_some(PartitionId(id))
    }

    pub fn is_application(self) -> bool {
        (1..=MAX_APP_PARTITIONS as u8).contains(&self.0)
    }

    /// Slot in a per-CPU array of application queues.
    pub fn queue_index(self) -> Option<usize> {
        self.is_application().then(|| self.0 as usize - 1)
    }
}

impl fmt::Display for PartitionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PartitionId::SYSTEM => f.write_str("SYSTEM"),
            PartitionId::BEST_EFFORT => f.write_str("BEST_EFFORT"),
            PartitionId::IDLE => f.write_str("IDLE"),
            PartitionId(n) => write!(f, "P{n}"),
        }
    }
}

impl FromStr for PartitionId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SYSTEM" => Ok(PartitionId::SYSTEM),
            "BEST_EFFORT" => Ok(PartitionId::BEST_EFFORT),
            "IDLE" => Ok(PartitionId::IDLE),
            _ => {
                let digits = s.strip_prefix('P').unwrap_or(s);
                digits
                    .parse::<u8>()
                    .ok()
                    .and_then(PartitionId::app)
                    .ok_or_else(|| format!("bad partition id `{s}`"))
            }
        }
    }
}

macro_rules! numeric_id {
    ($(#[$meta:meta])* $name:ident, $inner:ty) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl FromStr for $name {
            type Err = std::num::ParseIntError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.parse().map($name)
            }
        }
    };
}

numeric_id!(
    /// Task (thread) identifier, unique within a scenario.
    TaskId,
    u32
);
numeric_id!(ActorId, u32);
numeric_id!(NodeId, u32);

/// CPU index within a node.
pub type CpuId = usize;

/// A temporal partition: a recurring window of `duration` every `period`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub id: PartitionId,
    pub period: Micros,
    pub duration: Micros,
    pub name: String,
}

impl PartitionSpec {
    pub fn new(id: u8, period: Micros, duration: Micros) -> Self {
        PartitionSpec {
            id: PartitionId(id),
            period,
            duration,
            name: format!("P{id}"),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn check(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidPartition(self.id, msg.to_string()));
        if !self.id.is_application() {
            return bad("identifier outside 1..=64");
        }
        if self.period == 0 || self.duration == 0 {
            return bad("period and duration must be positive");
        }
        if self.duration > self.period {
            return bad("duration exceeds period");
        }
        Ok(())
    }
}

/// One window of the major frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinorFrame {
    pub partition: PartitionId,
    /// Start, relative to the major frame start.
    pub offset: Micros,
    pub duration: Micros,
}

impl MinorFrame {
    pub fn new(partition: PartitionId, offset: Micros, duration: Micros) -> Self {
        MinorFrame {
            partition,
            offset,
            duration,
        }
    }

    pub fn end(&self) -> Micros {
        self.offset + self.duration
    }
}

/// The repeating schedule of minor frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorFrame {
    pub hyperperiod: Micros,
    pub minors: Vec<MinorFrame>,
    pub partitions: Vec<PartitionSpec>,
}

impl MajorFrame {
    /// Builds a frame whose hyperperiod is the LCM of the partition periods.
    pub fn new(
        partitions: Vec<PartitionSpec>,
        minors: Vec<MinorFrame>,
    ) -> Result<MajorFrame, ModelError> {
        let hyperperiod = hyperperiod_of(partitions.iter().map(|p| p.period))?;
        Ok(MajorFrame {
            hyperperiod,
            minors,
            partitions,
        })
    }

    pub fn partition(&self, id: PartitionId) -> Option<&PartitionSpec> {
        self.partitions.iter().find(|p| p.id == id)
    }

    /// Minor frames owned by `id`, in offset order.
    pub fn minors_of(&self, id: PartitionId) -> impl Iterator<Item = (usize, &MinorFrame)> {
        self.minors
            .iter()
            .enumerate()
            .filter(move |(_, m)| m.partition == id)
    }

    /// Owner of the window covering `offset` (relative to the frame start).
    pub fn partition_at(&self, offset: Micros) -> Option<PartitionId> {
        let offset = offset % self.hyperperiod.max(1);
        self.minors
            .iter()
            .find(|m| m.offset <= offset && offset < m.end())
            .map(|m| m.partition)
    }
}

/// Least common multiple of the partition periods.
pub fn hyperperiod_of<I>(periods: I) -> Result<Micros, ModelError>
where
    I: IntoIterator<Item = Micros>,
{
    let mut acc: Option<Micros> = None;
    for period in periods {
        if period == 0 {
            return Err(ModelError::ZeroPeriod);
        }
        acc = Some(match acc {
            None => period,
            Some(a) => num_integer::lcm(a, period),
        });
    }
    acc.ok_or(ModelError::EmptyPartitionSet)
}

/// Criticality level. The derived order is the dominance order:
/// `BestEffort < Application < Critical`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Criticality {
    BestEffort,
    Application,
    Critical,
}

impl Criticality {
    pub fn as_str(self) -> &'static str {
        match self {
            Criticality::Critical => "CRITICAL",
            Criticality::Application => "APPLICATION",
            Criticality::BestEffort => "BEST_EFFORT",
        }
    }
}

impl fmt::Display for Criticality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criticality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "CRITICAL" => Ok(Criticality::Critical),
            "APPLICATION" => Ok(Criticality::Application),
            "BEST_EFFORT" => Ok(Criticality::BestEffort),
            _ => Err(format!("unknown criticality `{s}`")),
        }
    }
}

/// Whether application partitions may be dispatched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchedulerState {
    AppActive,
    AppInactive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunState {
    Ready,
    Blocked,
}

/// Per-task scheduling state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskControlBlock {
    pub task_id: TaskId,
    pub actor_id: ActorId,
    pub criticality: Criticality,
    pub priority: usize,
    pub partition: PartitionId,
    pub cpu_affinity: CpuId,
    pub cap_percent: u8,
    pub disabled: bool,
    pub last_disabled_time: Micros,
    pub exec_time_in_window: Micros,
    pub total_exec_time: Micros,
    pub run_state: RunState,
}

impl TaskControlBlock {
    pub fn new(
        task_id: TaskId,
        criticality: Criticality,
        priority: usize,
        partition: PartitionId,
    ) -> Self {
        TaskControlBlock {
            task_id,
            actor_id: ActorId(task_id.0),
            criticality,
            priority,
            partition,
            cpu_affinity: 0,
            cap_percent: 100,
            disabled: false,
            last_disabled_time: 0,
            exec_time_in_window: 0,
            total_exec_time: 0,
            run_state: RunState::Blocked,
        }
    }

    pub fn with_cap(mut self, cap_percent: u8) -> Self {
        self.cap_percent = cap_percent;
        self
    }

    pub fn with_cpu(mut self, cpu: CpuId) -> Self {
        self.cpu_affinity = cpu;
        self
    }

    pub fn with_actor(mut self, actor: ActorId) -> Self {
        self.actor_id = actor;
        self
    }

    pub fn is_capped(&self) -> bool {
        self.cap_percent < 100
    }

    /// Static invariants that do not depend on other tasks.
    pub fn check(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidTask(self.task_id, msg.to_string()));
        match self.criticality {
            Criticality::Critical if self.partition != PartitionId::SYSTEM => {
                return bad("CRITICAL tasks belong to the SYSTEM partition")
            }
            Criticality::BestEffort if self.partition != PartitionId::BEST_EFFORT => {
                return bad("BEST_EFFORT tasks belong to the BEST_EFFORT partition")
            }
            Criticality::Application if !self.partition.is_application() => {
                return bad("APPLICATION tasks need an application partition")
            }
            _ => {}
        }
        if self.priority >= MAX_RT_PRIO {
            return bad("priority must be below MAX_RT_PRIO");
        }
        if self.cap_percent > 100 {
            return bad("cap above 100%");
        }
        if self.disabled && !self.is_capped() {
            return bad("uncapped task marked disabled");
        }
        Ok(())
    }
}

/// What a trace record describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TraceKind {
    ContextSwitch,
    FrameSwitch,
    Reconfig,
    CapDisable,
    CapReenable,
    MessageSend,
    MessageRecv,
    TaskReady,
    TaskBlock,
}

impl TraceKind {
    pub const ALL: [TraceKind; 9] = [
        TraceKind::ContextSwitch,
        TraceKind::FrameSwitch,
        TraceKind::Reconfig,
        TraceKind::CapDisable,
        TraceKind::CapReenable,
        TraceKind::MessageSend,
        TraceKind::MessageRecv,
        TraceKind::TaskReady,
        TraceKind::TaskBlock,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::ContextSwitch => "CONTEXT_SWITCH",
            TraceKind::FrameSwitch => "FRAME_SWITCH",
            TraceKind::Reconfig => "RECONFIG",
            TraceKind::CapDisable => "CAP_DISABLE",
            TraceKind::CapReenable => "CAP_REENABLE",
            TraceKind::MessageSend => "MESSAGE_SEND",
            TraceKind::MessageRecv => "MESSAGE_RECV",
            TraceKind::TaskReady => "TASK_READY",
            TraceKind::TaskBlock => "TASK_BLOCK",
        }
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TraceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TraceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown trace kind `{s}`"))
    }
}

/// One trace record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub timestamp: Micros,
    pub node: NodeId,
    pub cpu: CpuId,
    pub kind: TraceKind,
    pub prev_task: Option<TaskId>,
    pub next_task: Option<TaskId>,
    pub partition: Option<PartitionId>,
    pub detail: String,
}

impl TraceEvent {
    pub fn new(timestamp: Micros, node: NodeId, cpu: CpuId, kind: TraceKind) -> Self {
        TraceEvent {
            timestamp,
            node,
            cpu,
            kind,
            prev_task: None,
            next_task: None,
            partition: None,
            detail: String::new(),
        }
    }

    pub fn tasks(mut self, prev: Option<TaskId>, next: Option<TaskId>) -> Self {
        self.prev_task = prev;
        self.next_task = next;
        self
    }

    pub fn partition(mut self, partition: PartitionId) -> Self {
        self.partition = Some(partition);
        self
    }

    pub fn detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// Value of a `key=value` token in the detail text.
    pub fn detail_value(&self, key: &str) -> Option<&str> {
        self.detail.split_whitespace().find_map(|tok| {
            tok.split_once('=')
                .filter(|(k, _)| *k == key)
                .map(|(_, v)| v)
        })
    }

    /// Whether a bare flag token appears in the detail text.
    pub fn has_flag(&self, flag: &str) -> bool {
        self.detail.split_whitespace().any(|tok| tok == flag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gcd(mut a: u64, mut b: u64) -> u64 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }

    // Pairwise lcm(a, b) = a * b / gcd(a, b), folded left.
    fn lcm_oracle(xs: &[u64]) -> u64 {
        xs.iter().fold(1, |acc, &x| acc / gcd(acc, x) * x)
    }

    #[test]
    fn hyperperiod_examples() {
        let s = MICROS_PER_SEC;
        assert_eq!(hyperperiod_of([2 * s, 2 * s, 4 * s, 8 * s]), Ok(8 * s));
        assert_eq!(hyperperiod_of([5 * s]), Ok(5 * s));
        let derived = lcm_oracle(&[3 * s, 4 * s, 6 * s]);
        assert_eq!(derived, 12 * s);
        assert_eq!(hyperperiod_of([3 * s, 4 * s, 6 * s]), Ok(derived));
    }

    #[test]
    fn hyperperiod_errors() {
        assert_eq!(
            hyperperiod_of(Vec::<Micros>::new()),
            Err(ModelError::EmptyPartitionSet)
        );
        assert_eq!(hyperperiod_of([0]), Err(ModelError::ZeroPeriod));
    }

    #[test]
    fn criticality_total_order() {
        use Criticality::*;
        let all = [BestEffort, Application, Critical];
        for a in all {
            for b in all {
                let lt = a < b;
                let gt = a > b;
                assert!(!(lt && gt));
                assert_eq!(a == b, !lt && !gt);
            }
        }
        assert!(Critical > Application && Application > BestEffort);
    }

    #[test]
    fn partition_ids() {
        assert!(PartitionId::app(0).is_none());
        assert!(PartitionId::app(65).is_none());
        assert_eq!(PartitionId::app(64).unwrap().queue_index(), Some(63));
        for p in [PartitionId::SYSTEM, PartitionId::BEST_EFFORT, PartitionId::IDLE] {
            assert!(!p.is_application());
            assert_eq!(p.to_string().parse::<PartitionId>(), Ok(p));
        }
        assert_eq!("P7".parse::<PartitionId>(), Ok(PartitionId(7)));
        assert!("P99".parse::<PartitionId>().is_err());
    }

    #[test]
    fn tcb_invariants() {
        let t = TaskControlBlock::new(TaskId(1), Criticality::Critical, 10, PartitionId(3));
        assert!(t.check().is_err());
        let t = TaskControlBlock::new(TaskId(1), Criticality::Critical, 10, PartitionId::SYSTEM);
        assert!(t.check().is_ok());
        let mut t = TaskControlBlock::new(TaskId(2), Criticality::Application, 10, PartitionId(3));
        t.disabled = true;
        assert!(t.check().is_err());
        let t = TaskControlBlock::new(TaskId(3), Criticality::Application, 100, PartitionId(3));
        assert!(t.check().is_err());
    }

    #[test]
    fn detail_tokens() {
        let ev = TraceEvent::new(0, NodeId(1), 0, TraceKind::FrameSwitch).detail("minor=2 wrap");
        assert_eq!(ev.detail_value("minor"), Some("2"));
        assert!(ev.has_flag("wrap"));
        assert!(!ev.has_flag("cap_reset"));
    }
}
