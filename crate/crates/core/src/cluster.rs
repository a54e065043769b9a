//! Multi-node runs and the three-satellite scatter scenario.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::format::TraceFile;
use crate::model::{
    ActorId, Criticality, MajorFrame, Micros, MinorFrame, NodeId, PartitionId, PartitionSpec, TaskId, MICROS_PER_MS,
};
use crate::scenario::{Edge, EdgeKind, Injection, InjectionKind, Link, NodeSpec, Scenario, TaskSpec, WorkloadModel};
use crate::sim::{NodeSim, SimError};

const MS: Micros = MICROS_PER_MS;

/// Runs every node of `scenario` on one global timeline.
///
/// Nodes advance in rounds. Each round processes, on every node, the events
/// earlier than the smallest pending timestamp plus the smallest link
/// latency; no message sent inside the round can arrive before its end, so
/// nodes are independent within a round and may run on `threads` workers.
/// Outboxes are routed in node order between rounds.
pub fn run_cluster(scenario: &Scenario, until: Micros, threads: usize) -> Result<TraceFile, SimError> {
    if until == 0 {
        return Err(SimError::HorizonZero);
    }
    scenario.validate()?;
    let mut nodes = scenario
        .nodes
        .iter()
        .map(|n| NodeSim::new(scenario, n.id, until))
        .collect::<Result<Vec<_>, _>>()?;
    let index: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n.node(), i)).collect();
    let lookahead = scenario.links.iter().map(|l| l.latency).min().unwrap_or(until).max(1);
    let pool = (threads > 1)
        .then(|| rayon::ThreadPoolBuilder::new().num_threads(threads).build())
        .transpose()
        .map_err(|e| SimError::ScenarioInvalid(crate::scenario::ScenarioError::Other(e.to_string())))?;

    while let Some(t_min) = nodes.iter().filter_map(NodeSim::next_time).min() {
        if t_min >= until {
            break;
        }
        let horizon = t_min.saturating_add(lookahead).min(until);
        match &pool {
            Some(pool) => pool.install(|| nodes.par_iter_mut().try_for_each(|n| n.run_until(horizon)))?,
            None => nodes.iter_mut().try_for_each(|n| n.run_until(horizon))?,
        }
        for i in 0..nodes.len() {
            for env in nodes[i].take_outbox() {
                if let Some(&j) = index.get(&env.to_node) {
                    nodes[j].deliver(env)?;
                }
            }
        }
    }
    Ok(nodes.into_iter().map(|n| (n.node(), n.finish(until))).collect())
}

/// Offsets that make every node start its first hyperperiod at the same
/// global instant, given each node's boot time.
pub fn align_offsets(scenario: &Scenario) -> BTreeMap<NodeId, Micros> {
    let latest = scenario.nodes.iter().map(|n| n.skew).max().unwrap_or(0);
    scenario.nodes.iter().map(|n| (n.id, latest - n.skew)).collect()
}

pub fn apply_alignment(scenario: &mut Scenario) {
    let offsets = align_offsets(scenario);
    for n in &mut scenario.nodes {
        n.offset = offsets[&n.id];
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unsupported scatter parameters: {0}")]
pub struct UnsupportedParams(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScatterParams {
    pub hyperperiod: Micros,
    /// CPU share the image-processing tasks use of their partitions.
    pub ipa_load_percent: u8,
}

/// When the ground command reaches node 1.
pub const SCATTER_COMMAND_AT: Micros = 1037 * MS;
pub const SCATTER_HORIZON: Micros = 2000 * MS;
pub const SCATTER_NODES: u32 = 3;

/// Task ids of one satellite's actors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SatelliteTasks {
    pub command_proxy: TaskId,
    pub trajectory_publish: TaskId,
    pub trajectory_subscribe: TaskId,
    pub module_state: TaskId,
    pub module_engine: TaskId,
    pub orbit_publish: TaskId,
    pub orbit_subscribe: TaskId,
    pub ipa: [TaskId; 4],
}

impl SatelliteTasks {
    pub fn of(node: NodeId) -> Self {
        let base = node.0 * 100;
        SatelliteTasks {
            command_proxy: TaskId(base + 1),
            trajectory_publish: TaskId(base + 2),
            trajectory_subscribe: TaskId(base + 3),
            module_state: TaskId(base + 4),
            module_engine: TaskId(base + 5),
            orbit_publish: TaskId(base + 6),
            orbit_subscribe: TaskId(base + 7),
            ipa: [base + 11, base + 12, base + 13, base + 14].map(TaskId),
        }
    }

    pub fn critical(&self) -> [TaskId; 5] {
        [
            self.command_proxy,
            self.trajectory_publish,
            self.trajectory_subscribe,
            self.module_state,
            self.module_engine,
        ]
    }
}

/// Three satellites, each with the flight tasks (critical), orbital
/// maintenance in a short partition and four image-processing tasks in two
/// partitions. A scatter command reaches node 1 at
/// [`SCATTER_COMMAND_AT`]; the thrusters fire for 500 ms on every node.
pub fn scatter_scenario(params: ScatterParams) -> Result<Scenario, UnsupportedParams> {
    let h = params.hyperperiod;
    let (om, ipa) = match h {
        x if x == 250 * MS => (25 * MS, 100 * MS),
        x if x == 100 * MS => (10 * MS, 40 * MS),
        _ => return Err(UnsupportedParams(format!("hyperperiod {h}us (use 100ms or 250ms)"))),
    };
    let load = params.ipa_load_percent;
    if !(1..=50).contains(&load) && load != 100 {
        return Err(UnsupportedParams(format!("ipa load {load}% (use 1..=50 or 100)")));
    }
    let frame = MajorFrame {
        hyperperiod: h,
        partitions: vec![
            PartitionSpec::new(1, h, om).named("OM"),
            PartitionSpec::new(2, h, ipa).named("IPA_A"),
            PartitionSpec::new(3, h, ipa).named("IPA_B"),
        ],
        minors: vec![
            MinorFrame::new(PartitionId(1), 0, om),
            MinorFrame::new(PartitionId(2), om, ipa),
            MinorFrame::new(PartitionId(3), om + ipa, ipa),
        ],
    };
    let ipa_work = if load == 100 {
        WorkloadModel::CpuBound
    } else {
        WorkloadModel::Periodic {
            period: h,
            budget: ipa * Micros::from(load) / 200,
            phase: 0,
        }
    };

    let mut sc = Scenario {
        name: format!("scatter_h{}_l{}", h / MS, load),
        horizon: SCATTER_HORIZON,
        frames: [("main".to_string(), frame)].into(),
        ..Scenario::default()
    };
    let nodes: Vec<NodeId> = (1..=SCATTER_NODES).map(NodeId).collect();
    for &n in &nodes {
        sc.nodes.push(NodeSpec {
            id: n,
            cpus: 1,
            frame: "main".into(),
            offset: 0,
            skew: 0,
        });
        for &m in &nodes {
            if m != n {
                sc.links.push(Link {
                    from: n,
                    to: m,
                    latency: MS,
                    jitter: 0,
                });
            }
        }
    }

    for &n in &nodes {
        let ids = SatelliteTasks::of(n);
        let actor = |k: u32| ActorId(n.0 * 100 + k);
        let crit = |id: TaskId, name: &str, actor: ActorId, prio: usize, workload: WorkloadModel| TaskSpec {
            id,
            name: format!("{name}_n{n}"),
            node: n,
            actor,
            criticality: Criticality::Critical,
            priority: prio,
            partition: PartitionId::SYSTEM,
            cpu: 0,
            cap: 100,
            workload,
        };
        let event = |ms: Micros| WorkloadModel::EventDriven { service: ms * MS };
        sc.tasks.extend([
            crit(ids.command_proxy, "C1", actor(1), 90, event(2)),
            crit(ids.trajectory_publish, "T1", actor(2), 85, event(3)),
            crit(ids.trajectory_subscribe, "T2", actor(2), 85, event(5)),
            crit(
                ids.module_state,
                "M1",
                actor(3),
                70,
                WorkloadModel::Periodic {
                    period: 1000 * MS,
                    budget: MS,
                    phase: 0,
                },
            ),
            crit(ids.module_engine, "M2", actor(3), 80, event(500)),
        ]);
        for (id, name, service) in [(ids.orbit_publish, "O1", 2), (ids.orbit_subscribe, "O2", 1)] {
            sc.tasks.push(TaskSpec {
                id,
                name: format!("{name}_n{n}"),
                node: n,
                actor: actor(4),
                criticality: Criticality::Application,
                priority: 50,
                partition: PartitionId(1),
                cpu: 0,
                cap: 100,
                workload: event(service),
            });
        }
        for (k, &id) in ids.ipa.iter().enumerate() {
            sc.tasks.push(TaskSpec {
                id,
                name: format!("IPA{}_n{n}", k + 1),
                node: n,
                actor: actor(11 + k as u32),
                criticality: Criticality::Application,
                priority: 10,
                partition: PartitionId(2 + (k / 2) as u8),
                cpu: 0,
                cap: 100,
                workload: ipa_work.clone(),
            });
        }
    }

    for &n in &nodes {
        let src = SatelliteTasks::of(n);
        let p2p = |from, to| Edge {
            from,
            to,
            kind: EdgeKind::PointToPoint,
        };
        sc.edges.push(p2p(src.command_proxy, src.trajectory_publish));
        sc.edges.push(p2p(src.trajectory_subscribe, src.module_engine));
        sc.edges.push(p2p(src.module_state, src.orbit_publish));
        for &m in &nodes {
            let dst = SatelliteTasks::of(m);
            sc.edges.push(Edge {
                from: src.trajectory_publish,
                to: dst.trajectory_subscribe,
                kind: EdgeKind::GroupPublish,
            });
            sc.edges.push(Edge {
                from: src.orbit_publish,
                to: dst.orbit_subscribe,
                kind: EdgeKind::GroupPublish,
            });
        }
    }
    sc.injections.push(Injection {
        at: SCATTER_COMMAND_AT,
        node: NodeId(1),
        kind: InjectionKind::Command {
            task: SatelliteTasks::of(NodeId(1)).command_proxy,
            command: "scatter".into(),
        },
    });
    Ok(sc)
}

/// The three bundled scatter configurations.
pub fn scatter_presets() -> [(&'static str, ScatterParams); 3] {
    [
        (
            "scatter_1",
            ScatterParams {
                hyperperiod: 250 * MS,
                ipa_load_percent: 40,
            },
        ),
        (
            "scatter_2",
            ScatterParams {
                hyperperiod: 250 * MS,
                ipa_load_percent: 100,
            },
        ),
        (
            "scatter_3",
            ScatterParams {
                hyperperiod: 100 * MS,
                ipa_load_percent: 100,
            },
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_build_and_validate() {
        for (_, p) in scatter_presets() {
            let sc = scatter_scenario(p).unwrap();
            sc.validate().unwrap();
            assert_eq!(sc.nodes.len(), 3);
            assert_eq!(sc.tasks.len(), 3 * 11);
        }
    }

    #[test]
    fn rejects_unsupported() {
        let bad = [
            ScatterParams {
                hyperperiod: 200 * MS,
                ipa_load_percent: 100,
            },
            ScatterParams {
                hyperperiod: 250 * MS,
                ipa_load_percent: 75,
            },
            ScatterParams {
                hyperperiod: 250 * MS,
                ipa_load_percent: 0,
            },
        ];
        for p in bad {
            assert!(scatter_scenario(p).is_err(), "{p:?}");
        }
    }

    #[test]
    fn alignment_offsets() {
        let mut sc = scatter_scenario(scatter_presets()[1].1).unwrap();
        sc.nodes[1].skew = 7 * MS;
        let offsets = align_offsets(&sc);
        assert_eq!(offsets[&NodeId(1)], 7 * MS);
        assert_eq!(offsets[&NodeId(2)], 0);
    }
}
