//! Scenario files.
//!
//! ```text
//! mcsched-scenario 1
//! scenario name=fig3 tick=4ms horizon=1200ms cap=on cap_window=1 seed=0 reconfig=on
//! frame name=main hyperperiod=120ms
//! partition frame=main id=P1 period=120ms duration=60ms name=P1
//! minor frame=main partition=P1 offset=0 duration=60ms
//! node id=1 cpus=1 frame=main offset=0 skew=0
//! task id=1000 node=1 name=t1000 actor=1 crit=APPLICATION prio=70 partition=P1 cpu=0 cap=100 work=cpu_bound
//! link from=1 to=2 latency=1ms jitter=0
//! edge from=1 to=2 kind=p2p
//! inject at=330ms node=1 reconfig=alt
//! inject at=1s node=1 task=1 command=scatter
//! ```
//!
//! Task workloads: `work=cpu_bound`, `work=periodic period= budget= [phase=]`,
//! `work=event service=`, `work=oneshot at= busy=`. A frame without
//! `hyperperiod=` gets the LCM of its partition periods.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{format_duration, Fields, ParseError};
use crate::model::{hyperperiod_of, ActorId, MajorFrame, MinorFrame, PartitionSpec};
use crate::scenario::{
    Edge, EdgeKind, Injection, InjectionKind, Link, NodeSpec, Scenario, TaskSpec, WorkloadModel,
};

pub const SCENARIO_MAGIC: &str = "mcsched-scenario";
pub const SCENARIO_VERSION: u32 = 1;

#[derive(Default)]
struct FrameDraft {
    line: usize,
    hyperperiod: Option<u64>,
    partitions: Vec<PartitionSpec>,
    minors: Vec<MinorFrame>,
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line, first) = lines.next().ok_or(ParseError::Line {
        line: 1,
        message: "empty scenario".into(),
    })?;
    let mut head = first.split_whitespace();
    if head.next() != Some(SCENARIO_MAGIC) {
        return Err(ParseError::Line {
            line,
            message: format!("expected `{SCENARIO_MAGIC} {SCENARIO_VERSION}`"),
        });
    }
    let version = head.next().unwrap_or("");
    if version != SCENARIO_VERSION.to_string() {
        return Err(ParseError::UnsupportedVersion {
            what: "scenario",
            found: version.into(),
            expected: SCENARIO_VERSION,
        });
    }

    let mut sc = Scenario::default();
    let mut drafts: BTreeMap<String, FrameDraft> = BTreeMap::new();
    let mut seen_header = false;

    for (line, text) in lines {
        let mut toks = text.split_whitespace();
        let keyword = toks.next().unwrap_or_default();
        let mut f = Fields::parse(line, toks)?;
        match keyword {
            "scenario" => {
                if seen_header {
                    return Err(ParseError::Line {
                        line,
                        message: "repeated scenario record".into(),
                    });
                }
                seen_header = true;
                if let Some(name) = f.opt("name") {
                    sc.name = name.into();
                }
                if let Some(t) = f.duration_opt("tick")? {
                    sc.tick = t;
                }
                if let Some(h) = f.duration_opt("horizon")? {
                    sc.horizon = h;
                }
                if let Some(c) = f.switch_opt("cap")? {
                    sc.cap_enabled = c;
                }
                if let Some(n) = f.parse_opt::<u32>("cap_window")? {
                    if n == 0 {
                        return Err(f.err("cap_window", "must be at least 1"));
                    }
                    sc.cap_window = n;
                }
                if let Some(s) = f.parse_opt("seed")? {
                    sc.seed = s;
                }
                if let Some(r) = f.switch_opt("reconfig")? {
                    sc.reconfig_allowed = r;
                }
                f.finish()?;
            }
            "frame" => {
                let name = f.req("name")?.to_string();
                let hyperperiod = f.duration_opt("hyperperiod")?;
                f.finish()?;
                if drafts.contains_key(&name) {
                    return Err(ParseError::Field {
                        line,
                        field: "name".into(),
                        message: format!("frame `{name}` defined twice"),
                    });
                }
                drafts.insert(
                    name,
                    FrameDraft {
                        line,
                        hyperperiod,
                        ..FrameDraft::default()
                    },
                );
            }
            "partition" => {
                let frame = f.req("frame")?;
                let id = f.parse_req("id")?;
                let period = f.duration_req("period")?;
                let duration = f.duration_req("duration")?;
                let name = f.opt("name").map(str::to_string);
                if name.as_deref().is_some_and(|n| n.contains([':', ',', '|'])) {
                    return Err(f.err("name", "must not contain `:`, `,` or `|`"));
                }
                let draft = drafts.get_mut(frame).ok_or_else(|| f.err("frame", "unknown frame"))?;
                f.finish()?;
                draft.partitions.push(PartitionSpec {
                    id,
                    period,
                    duration,
                    name: name.unwrap_or_else(|| id.to_string()),
                });
            }
            "minor" => {
                let frame = f.req("frame")?;
                let partition = f.parse_req("partition")?;
                let offset = f.duration_req("offset")?;
                let duration = f.duration_req("duration")?;
                let draft = drafts.get_mut(frame).ok_or_else(|| f.err("frame", "unknown frame"))?;
                f.finish()?;
                draft.minors.push(MinorFrame::new(partition, offset, duration));
            }
            "node" => {
                let node = NodeSpec {
                    id: f.parse_req("id")?,
                    cpus: f.parse_req("cpus")?,
                    frame: f.req("frame")?.into(),
                    offset: f.duration_opt("offset")?.unwrap_or(0),
                    skew: f.duration_opt("skew")?.unwrap_or(0),
                };
                f.finish()?;
                sc.nodes.push(node);
            }
            "task" => {
                let id = f.parse_req("id")?;
                let task = TaskSpec {
                    id,
                    name: f.opt("name").map(str::to_string).unwrap_or_else(|| format!("t{id}")),
                    node: f.parse_req("node")?,
                    actor: f.parse_opt("actor")?.unwrap_or(ActorId(id.0)),
                    criticality: f.parse_req("crit")?,
                    priority: f.parse_opt("prio")?.unwrap_or(0),
                    partition: f.parse_req("partition")?,
                    cpu: f.parse_opt("cpu")?.unwrap_or(0),
                    cap: f.parse_opt("cap")?.unwrap_or(100),
                    workload: parse_workload(&mut f)?,
                };
                f.finish()?;
                sc.tasks.push(task);
            }
            "link" => {
                let link = Link {
                    from: f.parse_req("from")?,
                    to: f.parse_req("to")?,
                    latency: f.duration_req("latency")?,
                    jitter: f.duration_opt("jitter")?.unwrap_or(0),
                };
                f.finish()?;
                sc.links.push(link);
            }
            "edge" => {
                let kind = match f.opt("kind").unwrap_or("p2p") {
                    "p2p" => EdgeKind::PointToPoint,
                    "group" => EdgeKind::GroupPublish,
                    other => return Err(f.err("kind", format!("expected p2p or group, found `{other}`"))),
                };
                let edge = Edge {
                    from: f.parse_req("from")?,
                    to: f.parse_req("to")?,
                    kind,
                };
                f.finish()?;
                sc.edges.push(edge);
            }
            "inject" => {
                let at = f.duration_req("at")?;
                let node = f.parse_req("node")?;
                let kind = match (f.opt("reconfig"), f.opt("command")) {
                    (Some(frame), None) => InjectionKind::Reconfig { frame: frame.into() },
                    (None, Some(command)) => InjectionKind::Command {
                        task: f.parse_req("task")?,
                        command: command.into(),
                    },
                    _ => return Err(f.err("reconfig", "need exactly one of reconfig= or command=")),
                };
                f.finish()?;
                sc.injections.push(Injection { at, node, kind });
            }
            other => {
                return Err(ParseError::Line {
                    line,
                    message: format!("unknown record `{other}`"),
                })
            }
        }
    }

    for (name, d) in drafts {
        let hyperperiod = match d.hyperperiod {
            Some(h) => h,
            None => hyperperiod_of(d.partitions.iter().map(|p| p.period)).map_err(|e| ParseError::Line {
                line: d.line,
                message: format!("frame `{name}`: {e}"),
            })?,
        };
        sc.frames.insert(
            name,
            MajorFrame {
                hyperperiod,
                minors: d.minors,
                partitions: d.partitions,
            },
        );
    }
    Ok(sc)
}

fn parse_workload(f: &mut Fields<'_>) -> Result<WorkloadModel, ParseError> {
    let work = f.req("work")?;
    Ok(match work {
        "cpu_bound" => WorkloadModel::CpuBound,
        "periodic" => WorkloadModel::Periodic {
            period: f.duration_req("period")?,
            budget: f.duration_req("budget")?,
            phase: f.duration_opt("phase")?.unwrap_or(0),
        },
        "event" => WorkloadModel::EventDriven {
            service: f.duration_req("service")?,
        },
        "oneshot" => WorkloadModel::Oneshot {
            at: f.duration_req("at")?,
            busy: f.duration_req("busy")?,
        },
        other => return Err(f.err("work", format!("unknown workload `{other}`"))),
    })
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

pub fn write_scenario(sc: &Scenario) -> String {
    let d = format_duration;
    let mut out = format!("{SCENARIO_MAGIC} {SCENARIO_VERSION}\n");
    let _ = writeln!(
        out,
        "scenario name={} tick={} horizon={} cap={} cap_window={} seed={} reconfig={}",
        sc.name,
        d(sc.tick),
        d(sc.horizon),
        on_off(sc.cap_enabled),
        sc.cap_window,
        sc.seed,
        on_off(sc.reconfig_allowed)
    );
    for (name, frame) in &sc.frames {
        let _ = writeln!(out, "frame name={name} hyperperiod={}", d(frame.hyperperiod));
        for p in &frame.partitions {
            let _ = writeln!(
                out,
                "partition frame={name} id={} period={} duration={} name={}",
                p.id,
                d(p.period),
                d(p.duration),
                p.name
            );
        }
        for m in &frame.minors {
            let _ = writeln!(
                out,
                "minor frame={name} partition={} offset={} duration={}",
                m.partition,
                d(m.offset),
                d(m.duration)
            );
        }
    }
    for n in &sc.nodes {
        let _ = writeln!(
            out,
            "node id={} cpus={} frame={} offset={} skew={}",
            n.id,
            n.cpus,
            n.frame,
            d(n.offset),
            d(n.skew)
        );
    }
    for t in &sc.tasks {
        let _ = write!(
            out,
            "task id={} node={} name={} actor={} crit={} prio={} partition={} cpu={} cap={} ",
            t.id, t.node, t.name, t.actor, t.criticality, t.priority, t.partition, t.cpu, t.cap
        );
        let _ = match t.workload {
            WorkloadModel::CpuBound => writeln!(out, "work=cpu_bound"),
            WorkloadModel::Periodic { period, budget, phase } => writeln!(
                out,
                "work=periodic period={} budget={} phase={}",
                d(period),
                d(budget),
                d(phase)
            ),
            WorkloadModel::EventDriven { service } => writeln!(out, "work=event service={}", d(service)),
            WorkloadModel::Oneshot { at, busy } => writeln!(out, "work=oneshot at={} busy={}", d(at), d(busy)),
        };
    }
    for l in &sc.links {
        let _ = writeln!(
            out,
            "link from={} to={} latency={} jitter={}",
            l.from,
            l.to,
            d(l.latency),
            d(l.jitter)
        );
    }
    for e in &sc.edges {
        let _ = writeln!(out, "edge from={} to={} kind={}", e.from, e.to, e.kind.as_str());
    }
    for i in &sc.injections {
        let _ = match &i.kind {
            InjectionKind::Reconfig { frame } => {
                writeln!(out, "inject at={} node={} reconfig={frame}", d(i.at), i.node)
            }
            InjectionKind::Command { task, command } => writeln!(
                out,
                "inject at={} node={} task={task} command={command}",
                d(i.at),
                i.node
            ),
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NodeId, PartitionId, TaskId};

    const SAMPLE: &str = "\
mcsched-scenario 1
# two partitions, one capped task
scenario name=demo tick=4ms horizon=1s cap=on cap_window=2 seed=7
frame name=main
partition frame=main id=P1 period=120ms duration=60ms
partition frame=main id=P2 period=120ms duration=60ms
minor frame=main partition=P1 offset=0 duration=60ms
minor frame=main partition=P2 offset=60ms duration=60ms
node id=1 cpus=2 frame=main
task id=1001 node=1 crit=application prio=72 partition=P1 cap=20 work=cpu_bound
task id=7 node=1 crit=critical prio=90 partition=SYSTEM work=periodic period=1s budget=10ms
inject at=330ms node=1 reconfig=main
";

    #[test]
    fn parses_sample() {
        let sc = parse_scenario(SAMPLE).unwrap();
        assert_eq!(sc.name, "demo");
        assert_eq!(sc.horizon, 1_000_000);
        assert_eq!(sc.cap_window, 2);
        assert!(sc.cap_enabled);
        assert_eq!(sc.frames["main"].hyperperiod, 120_000);
        assert_eq!(sc.nodes[0].cpus, 2);
        let t = sc.task(TaskId(1001)).unwrap();
        assert_eq!((t.priority, t.cap, t.partition), (72, 20, PartitionId(1)));
        assert_eq!(sc.tasks[1].partition, PartitionId::SYSTEM);
        assert_eq!(sc.injections[0].node, NodeId(1));
        sc.validate().unwrap();
    }

    #[test]
    fn round_trip_is_identity() {
        let sc = parse_scenario(SAMPLE).unwrap();
        let text = write_scenario(&sc);
        let again = parse_scenario(&text).unwrap();
        assert_eq!(sc, again);
        assert_eq!(write_scenario(&again), text);
    }

    #[test]
    fn errors_carry_line_and_field() {
        let bad = SAMPLE.replace("period=120ms duration=60ms\npartition frame=main id=P2", "period=12x duration=60ms\npartition frame=main id=P2");
        match parse_scenario(&bad) {
            Err(ParseError::Field { line, field, .. }) => assert_eq!((line, field.as_str()), (5, "period")),
            other => panic!("{other:?}"),
        }
        let bad = SAMPLE.replace("cpus=2", "cpus=2 colour=red");
        assert!(matches!(parse_scenario(&bad), Err(ParseError::Field { line: 9, .. })));
        let bad = SAMPLE.replace("mcsched-scenario 1", "mcsched-scenario 9");
        assert!(matches!(parse_scenario(&bad), Err(ParseError::UnsupportedVersion { .. })));
        assert!(matches!(parse_scenario("bogus"), Err(ParseError::Line { line: 1, .. })));
        let bad = SAMPLE.replace("work=cpu_bound", "work=sometimes");
        assert!(matches!(parse_scenario(&bad), Err(ParseError::Field { line: 10, .. })));
    }
}
