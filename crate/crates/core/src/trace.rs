//! Per-node trace with the metadata analysis needs to interpret it.

use crate::model::{
    ActorId, Criticality, CpuId, MajorFrame, Micros, NodeId, PartitionId, TaskId, TraceEvent, TraceKind,
};
use crate::scenario::{Scenario, TaskSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskMeta {
    pub id: TaskId,
    pub name: String,
    pub actor: ActorId,
    pub criticality: Criticality,
    pub priority: usize,
    pub partition: PartitionId,
    pub cpu: CpuId,
    pub cap: u8,
}

impl From<&TaskSpec> for TaskMeta {
    fn from(t: &TaskSpec) -> Self {
        TaskMeta {
            id: t.id,
            name: t.name.clone(),
            actor: t.actor,
            criticality: t.criticality,
            priority: t.priority,
            partition: t.partition,
            cpu: t.cpu,
            cap: t.cap,
        }
    }
}

/// The boot-time frame install.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameInstall {
    pub at: Micros,
    pub offset: Micros,
    pub frame: MajorFrame,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceHeader {
    pub node: NodeId,
    pub num_cpus: usize,
    pub tick: Micros,
    pub horizon: Micros,
    /// Cap window in major frames, `None` when caps are off.
    pub cap_window: Option<u32>,
    pub install: Option<FrameInstall>,
    pub tasks: Vec<TaskMeta>,
}

impl TraceHeader {
    pub fn for_node(scenario: &Scenario, node: NodeId, horizon: Micros) -> Option<TraceHeader> {
        let spec = scenario.node(node)?;
        Some(TraceHeader {
            node,
            num_cpus: spec.cpus,
            tick: scenario.tick,
            horizon,
            cap_window: scenario.cap_enabled.then_some(scenario.cap_window),
            install: scenario.frames.get(&spec.frame).map(|f| FrameInstall {
                at: spec.skew,
                offset: spec.offset,
                frame: f.clone(),
            }),
            tasks: scenario.tasks_on(node).map(TaskMeta::from).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceLog {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
}

impl TraceLog {
    pub fn task(&self, id: TaskId) -> Option<&TaskMeta> {
        self.header.tasks.iter().find(|t| t.id == id)
    }

    pub fn of_kind(&self, kind: TraceKind) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}
