//! Declarative description of a simulation run.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::frame::{validate_major_frame, FrameError};
use crate::model::{
    ActorId, Criticality, CpuId, MajorFrame, Micros, NodeId, PartitionId, TaskControlBlock, TaskId,
    DEFAULT_TICK,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("scenario has no nodes")]
    NoNodes,
    #[error("duplicate {what} `{id}`")]
    Duplicate { what: &'static str, id: String },
    #[error("{what} `{id}` is not defined")]
    Unresolved { what: &'static str, id: String },
    #[error("frame `{name}`: {source}")]
    Frame { name: String, source: FrameError },
    #[error("frame `{name}` is invalid:\n{report}")]
    InvalidFrame { name: String, report: String },
    #[error("task {task}: {reason}")]
    Task { task: TaskId, reason: String },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorkloadModel {
    /// Releases a job of `budget` every `period`, first at `phase`.
    Periodic {
        period: Micros,
        budget: Micros,
        phase: Micros,
    },
    /// Always ready.
    CpuBound,
    /// One job of `service` per received message.
    EventDriven { service: Micros },
    /// A single job of `busy` released at `at`.
    Oneshot { at: Micros, busy: Micros },
}

impl WorkloadModel {
    pub fn check(&self) -> Result<(), String> {
        match *self {
            WorkloadModel::Periodic { period, budget, .. } => {
                if period == 0 || budget == 0 || budget > period {
                    return Err(format!("periodic budget {budget} must be in 1..={period}"));
                }
            }
            WorkloadModel::Oneshot { busy: 0, .. } => return Err("oneshot busy time must be positive".into()),
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub id: NodeId,
    pub cpus: usize,
    /// Name of the frame installed at boot.
    pub frame: String,
    /// Hyperperiod start offset applied after the boot install.
    pub offset: Micros,
    /// Global time at which this node boots and installs its frame.
    pub skew: Micros,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub id: TaskId,
    pub name: String,
    pub node: NodeId,
    pub actor: ActorId,
    pub criticality: Criticality,
    pub priority: usize,
    pub partition: PartitionId,
    pub cpu: CpuId,
    pub cap: u8,
    pub workload: WorkloadModel,
}

impl TaskSpec {
    pub fn tcb(&self) -> TaskControlBlock {
        TaskControlBlock::new(self.id, self.criticality, self.priority, self.partition)
            .with_actor(self.actor)
            .with_cpu(self.cpu)
            .with_cap(self.cap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub from: NodeId,
    pub to: NodeId,
    pub latency: Micros,
    /// Uniform delay bound added to `latency`.
    pub jitter: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeKind {
    PointToPoint,
    GroupPublish,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::PointToPoint => "p2p",
            EdgeKind::GroupPublish => "group",
        }
    }
}

/// A message sent by `from` to `to` each time a job of `from` completes.
/// Group publication is a set of edges sharing `from`, one per subscriber.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: TaskId,
    pub to: TaskId,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InjectionKind {
    /// Replace the node's major frame with the named frame.
    Reconfig { frame: String },
    /// A ground command delivered to `task`.
    Command { task: TaskId, command: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injection {
    pub at: Micros,
    pub node: NodeId,
    pub kind: InjectionKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub tick: Micros,
    pub horizon: Micros,
    pub cap_enabled: bool,
    pub cap_window: u32,
    pub seed: u64,
    pub reconfig_allowed: bool,
    pub frames: BTreeMap<String, MajorFrame>,
    pub nodes: Vec<NodeSpec>,
    pub tasks: Vec<TaskSpec>,
    pub links: Vec<Link>,
    pub edges: Vec<Edge>,
    pub injections: Vec<Injection>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "unnamed".into(),
            tick: DEFAULT_TICK,
            horizon: 0,
            cap_enabled: false,
            cap_window: 1,
            seed: 0,
            reconfig_allowed: true,
            frames: BTreeMap::new(),
            nodes: Vec::new(),
            tasks: Vec::new(),
            links: Vec::new(),
            edges: Vec::new(),
            injections: Vec::new(),
        }
    }
}

impl Scenario {
    pub fn node(&self, id: NodeId) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn task(&self, id: TaskId) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn tasks_on(&self, node: NodeId) -> impl Iterator<Item = &TaskSpec> {
        self.tasks.iter().filter(move |t| t.node == node)
    }

    pub fn link(&self, from: NodeId, to: NodeId) -> Option<&Link> {
        self.links.iter().find(|l| l.from == from && l.to == to)
    }

    pub fn frame_of(&self, node: NodeId) -> Option<&MajorFrame> {
        self.node(node).and_then(|n| self.frames.get(&n.frame))
    }

    pub fn task_by_name(&self, name: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.name == name)
    }

    /// Checks referential integrity and validates every frame.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.nodes.is_empty() {
            return Err(ScenarioError::NoNodes);
        }
        if self.tick == 0 {
            return Err(ScenarioError::Other("tick must be positive".into()));
        }
        for (name, frame) in &self.frames {
            let report = validate_major_frame(frame).map_err(|source| ScenarioError::Frame {
                name: name.clone(),
                source,
            })?;
            if !report.valid() {
                return Err(ScenarioError::InvalidFrame {
                    name: name.clone(),
                    report: report.to_string(),
                });
            }
        }

        let mut node_ids = BTreeSet::new();
        for n in &self.nodes {
            if !node_ids.insert(n.id) {
                return Err(dup("node", n.id));
            }
            if n.cpus == 0 {
                return Err(ScenarioError::Other(format!("node {} has no cpus", n.id)));
            }
            if !self.frames.contains_key(&n.frame) {
                return Err(unresolved("frame", &n.frame));
            }
        }

        let mut task_ids = BTreeSet::new();
        let mut actors: BTreeMap<ActorId, Criticality> = BTreeMap::new();
        for t in &self.tasks {
            if !task_ids.insert(t.id) {
                return Err(dup("task", t.id));
            }
            let node = self.node(t.node).ok_or_else(|| unresolved("node", t.node))?;
            let task_err = |reason: String| ScenarioError::Task { task: t.id, reason };
            t.tcb().check().map_err(|e| task_err(e.to_string()))?;
            t.workload.check().map_err(task_err)?;
            if t.cpu >= node.cpus {
                return Err(task_err(format!("cpu {} outside node {}", t.cpu, node.id)));
            }
            if t.partition.is_application()
                && self.frames[&node.frame].partition(t.partition).is_none()
                && !self.reconfig_targets(node.id).any(|f| f.partition(t.partition).is_some())
            {
                return Err(task_err(format!("partition {} not in any frame of node {}", t.partition, node.id)));
            }
            if let Some(&c) = actors.get(&t.actor) {
                if c != t.criticality {
                    return Err(task_err(format!("actor {} mixes criticality levels", t.actor)));
                }
            }
            actors.insert(t.actor, t.criticality);
        }

        let mut link_keys = BTreeSet::new();
        for l in &self.links {
            for n in [l.from, l.to] {
                self.node(n).ok_or_else(|| unresolved("node", n))?;
            }
            if !link_keys.insert((l.from, l.to)) {
                return Err(dup("link", format!("{}->{}", l.from, l.to)));
            }
        }

        for e in &self.edges {
            let from = self.task(e.from).ok_or_else(|| unresolved("task", e.from))?;
            let to = self.task(e.to).ok_or_else(|| unresolved("task", e.to))?;
            if from.node != to.node && self.link(from.node, to.node).is_none() {
                return Err(unresolved("link", format!("{}->{}", from.node, to.node)));
            }
        }

        for inj in &self.injections {
            self.node(inj.node).ok_or_else(|| unresolved("node", inj.node))?;
            match &inj.kind {
                InjectionKind::Reconfig { frame } => {
                    if !self.frames.contains_key(frame) {
                        return Err(unresolved("frame", frame));
                    }
                }
                InjectionKind::Command { task, .. } => {
                    let t = self.task(*task).ok_or_else(|| unresolved("task", task))?;
                    if t.node != inj.node {
                        return Err(ScenarioError::Task {
                            task: *task,
                            reason: format!("command target lives on node {}", t.node),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn reconfig_targets(&self, node: NodeId) -> impl Iterator<Item = &MajorFrame> {
        self.injections.iter().filter_map(move |i| match &i.kind {
            InjectionKind::Reconfig { frame } if i.node == node => self.frames.get(frame),
            _ => None,
        })
    }
}

fn dup(what: &'static str, id: impl ToString) -> ScenarioError {
    ScenarioError::Duplicate {
        what,
        id: id.to_string(),
    }
}

fn unresolved(what: &'static str, id: impl ToString) -> ScenarioError {
    ScenarioError::Unresolved {
        what,
        id: id.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MinorFrame, PartitionSpec};

    fn base() -> Scenario {
        let frame = MajorFrame::new(
            vec![PartitionSpec::new(1, 100, 50)],
            vec![MinorFrame::new(PartitionId(1), 0, 50)],
        )
        .unwrap();
        Scenario {
            frames: [("main".to_string(), frame)].into(),
            nodes: vec![NodeSpec {
                id: NodeId(1),
                cpus: 1,
                frame: "main".into(),
                offset: 0,
                skew: 0,
            }],
            tasks: vec![TaskSpec {
                id: TaskId(1),
                name: "a".into(),
                node: NodeId(1),
                actor: ActorId(1),
                criticality: Criticality::Application,
                priority: 10,
                partition: PartitionId(1),
                cpu: 0,
                cap: 100,
                workload: WorkloadModel::CpuBound,
            }],
            ..Scenario::default()
        }
    }

    #[test]
    fn base_is_valid() {
        base().validate().unwrap();
    }

    #[test]
    fn dangling_references() {
        let mut s = base();
        s.nodes[0].frame = "nope".into();
        assert!(matches!(s.validate(), Err(ScenarioError::Unresolved { what: "frame", .. })));

        let mut s = base();
        s.edges.push(Edge {
            from: TaskId(1),
            to: TaskId(9),
            kind: EdgeKind::PointToPoint,
        });
        assert!(matches!(s.validate(), Err(ScenarioError::Unresolved { what: "task", .. })));

        let mut s = base();
        s.tasks[0].partition = PartitionId(2);
        assert!(matches!(s.validate(), Err(ScenarioError::Task { .. })));
    }

    #[test]
    fn bad_workload() {
        let mut s = base();
        s.tasks[0].workload = WorkloadModel::Periodic {
            period: 10,
            budget: 20,
            phase: 0,
        };
        assert!(matches!(s.validate(), Err(ScenarioError::Task { .. })));
    }

    #[test]
    fn invalid_frame_is_reported() {
        let mut s = base();
        s.frames.get_mut("main").unwrap().minors[0].offset = 60;
        assert!(matches!(s.validate(), Err(ScenarioError::InvalidFrame { .. })));
    }
}
