//! Trace files.
//!
//! ```text
//! mcsched-trace 1
//! node id=1 cpus=1 tick=4000 horizon=1200000 cap_window=1
//! install node=1 at=0 offset=0 frame=120000|P1:120000:60000|P1@0+60000
//! task node=1 id=1000 name=t1000 actor=1000 crit=APPLICATION prio=70 partition=P1 cpu=0 cap=100
//! E 0 1 0 FRAME_SWITCH - - P1 minor=0 start hp_start=0 cap_reset
//! E 0 1 0 CONTEXT_SWITCH - 1000 P1
//! ```
//!
//! All headers come first, then the events of every node merged by
//! timestamp (ties: node id, then per-node order). Event columns are
//! timestamp, node, cpu, kind, previous task, next task, partition and
//! free-form detail; `-` marks an empty column.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{decode_frame, encode_frame, Fields, ParseError};
use crate::model::{NodeId, TraceEvent};
use crate::trace::{FrameInstall, TaskMeta, TraceHeader, TraceLog};

pub const TRACE_MAGIC: &str = "mcsched-trace";
pub const TRACE_VERSION: u32 = 1;

/// Traces of every node in one run.
pub type TraceFile = BTreeMap<NodeId, TraceLog>;

fn opt_col<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

pub fn write_trace(logs: &TraceFile) -> String {
    let mut out = format!("{TRACE_MAGIC} {TRACE_VERSION}\n");
    for log in logs.values() {
        let h = &log.header;
        let _ = writeln!(
            out,
            "node id={} cpus={} tick={} horizon={} cap_window={}",
            h.node,
            h.num_cpus,
            h.tick,
            h.horizon,
            h.cap_window.map_or_else(|| "off".to_string(), |n| n.to_string())
        );
        if let Some(i) = &h.install {
            let _ = writeln!(
                out,
                "install node={} at={} offset={} frame={}",
                h.node,
                i.at,
                i.offset,
                encode_frame(&i.frame)
            );
        }
        for t in &h.tasks {
            let _ = writeln!(
                out,
                "task node={} id={} name={} actor={} crit={} prio={} partition={} cpu={} cap={}",
                h.node, t.id, t.name, t.actor, t.criticality, t.priority, t.partition, t.cpu, t.cap
            );
        }
    }

    let mut merged: Vec<&TraceEvent> = logs.values().flat_map(|l| l.events.iter()).collect();
    // Stable: equal (timestamp, node) keep per-node order.
    merged.sort_by_key(|e| (e.timestamp, e.node));
    for e in merged {
        let _ = write!(
            out,
            "E {} {} {} {} {} {} {}",
            e.timestamp,
            e.node,
            e.cpu,
            e.kind,
            opt_col(e.prev_task),
            opt_col(e.next_task),
            opt_col(e.partition)
        );
        if !e.detail.is_empty() {
            out.push(' ');
            out.push_str(&e.detail);
        }
        out.push('\n');
    }
    out
}

fn col<T: std::str::FromStr>(line: usize, name: &str, raw: Option<&str>) -> Result<T, ParseError>
where
    T::Err: std::fmt::Display,
{
    let raw = raw.ok_or_else(|| ParseError::Field {
        line,
        field: name.into(),
        message: "missing".into(),
    })?;
    raw.parse().map_err(|e: T::Err| ParseError::Field {
        line,
        field: name.into(),
        message: e.to_string(),
    })
}

fn opt<T: std::str::FromStr>(line: usize, name: &str, raw: Option<&str>) -> Result<Option<T>, ParseError>
where
    T::Err: std::fmt::Display,
{
    match raw {
        Some("-") => Ok(None),
        other => col(line, name, other).map(Some),
    }
}

pub fn parse_trace(text: &str) -> Result<TraceFile, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let (line, first) = lines.next().ok_or(ParseError::Line {
        line: 1,
        message: "empty trace file".into(),
    })?;
    let mut head = first.split_whitespace();
    if head.next() != Some(TRACE_MAGIC) {
        return Err(ParseError::Line {
            line,
            message: format!("not a trace file (expected `{TRACE_MAGIC} {TRACE_VERSION}`)"),
        });
    }
    let version = head.next().unwrap_or("");
    if version != TRACE_VERSION.to_string() {
        return Err(ParseError::UnsupportedVersion {
            what: "trace",
            found: version.into(),
            expected: TRACE_VERSION,
        });
    }

    let mut logs = TraceFile::new();
    let missing_node = |line: usize, node: NodeId| ParseError::Field {
        line,
        field: "node".into(),
        message: format!("node {node} has no header"),
    };
    for (line, text) in lines {
        let mut toks = text.split_whitespace();
        match toks.next().unwrap_or_default() {
            "E" => {
                let ts = col(line, "timestamp", toks.next())?;
                let node: NodeId = col(line, "node", toks.next())?;
                let cpu = col(line, "cpu", toks.next())?;
                let kind = col(line, "kind", toks.next())?;
                let mut ev = TraceEvent::new(ts, node, cpu, kind);
                ev.prev_task = opt(line, "prev", toks.next())?;
                ev.next_task = opt(line, "next", toks.next())?;
                ev.partition = opt(line, "partition", toks.next())?;
                ev.detail = toks.collect::<Vec<_>>().join(" ");
                let log = logs.get_mut(&node).ok_or_else(|| missing_node(line, node))?;
                if log.events.last().is_some_and(|last| last.timestamp > ts) {
                    return Err(ParseError::Line {
                        line,
                        message: format!("timestamp {ts} goes backwards on node {node}"),
                    });
                }
                log.events.push(ev);
            }
            "node" => {
                let mut f = Fields::parse(line, toks)?;
                let header = TraceHeader {
                    node: f.parse_req("id")?,
                    num_cpus: f.parse_req("cpus")?,
                    tick: f.parse_req("tick")?,
                    horizon: f.parse_req("horizon")?,
                    cap_window: match f.req("cap_window")? {
                        "off" => None,
                        n => Some(n.parse().map_err(|_| f.err("cap_window", "expected a count or off"))?),
                    },
                    install: None,
                    tasks: Vec::new(),
                };
                f.finish()?;
                let node = header.node;
                if logs
                    .insert(
                        node,
                        TraceLog {
                            header,
                            events: Vec::new(),
                        },
                    )
                    .is_some()
                {
                    return Err(ParseError::Field {
                        line,
                        field: "id".into(),
                        message: format!("node {node} declared twice"),
                    });
                }
            }
            "install" => {
                let mut f = Fields::parse(line, toks)?;
                let node: NodeId = f.parse_req("node")?;
                let at = f.parse_req("at")?;
                let offset = f.parse_req("offset")?;
                let raw = f.req("frame")?;
                let frame = decode_frame(raw).map_err(|m| f.err("frame", m))?;
                f.finish()?;
                let log = logs.get_mut(&node).ok_or_else(|| missing_node(line, node))?;
                log.header.install = Some(FrameInstall { at, offset, frame });
            }
            "task" => {
                let mut f = Fields::parse(line, toks)?;
                let node: NodeId = f.parse_req("node")?;
                let meta = TaskMeta {
                    id: f.parse_req("id")?,
                    name: f.req("name")?.into(),
                    actor: f.parse_req("actor")?,
                    criticality: f.parse_req("crit")?,
                    priority: f.parse_req("prio")?,
                    partition: f.parse_req("partition")?,
                    cpu: f.parse_req("cpu")?,
                    cap: f.parse_req("cap")?,
                };
                f.finish()?;
                let log = logs.get_mut(&node).ok_or_else(|| missing_node(line, node))?;
                log.header.tasks.push(meta);
            }
            other => {
                return Err(ParseError::Line {
                    line,
                    message: format!("unknown record `{other}`"),
                })
            }
        }
    }
    Ok(logs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::four_partition_example;
    use crate::model::{Criticality, PartitionId, TaskId, TraceKind};

    fn sample() -> TraceFile {
        let mut frame = four_partition_example();
        for p in &mut frame.partitions {
            p.name = p.id.to_string();
        }
        let mut logs = TraceFile::new();
        for n in [1u32, 2] {
            let node = NodeId(n);
            let events = vec![
                TraceEvent::new(0, node, 0, TraceKind::FrameSwitch)
                    .partition(PartitionId(1))
                    .detail("minor=0 start hp_start=0"),
                TraceEvent::new(0, node, 0, TraceKind::ContextSwitch).tasks(None, Some(TaskId(5))),
                TraceEvent::new(7 + n as u64, node, 0, TraceKind::MessageSend)
                    .tasks(Some(TaskId(5)), None)
                    .detail("id=1.0 to=9"),
            ];
            logs.insert(
                node,
                TraceLog {
                    header: TraceHeader {
                        node,
                        num_cpus: 2,
                        tick: 4000,
                        horizon: 100,
                        cap_window: (n == 1).then_some(3),
                        install: Some(FrameInstall {
                            at: 0,
                            offset: n as u64,
                            frame: frame.clone(),
                        }),
                        tasks: vec![TaskMeta {
                            id: TaskId(5),
                            name: "five".into(),
                            actor: crate::model::ActorId(2),
                            criticality: Criticality::Application,
                            priority: 3,
                            partition: PartitionId(1),
                            cpu: 1,
                            cap: 40,
                        }],
                    },
                    events,
                },
            );
        }
        logs
    }

    #[test]
    fn round_trip() {
        let logs = sample();
        let text = write_trace(&logs);
        assert_eq!(parse_trace(&text).unwrap(), logs);
        let events: Vec<&str> = text.lines().filter(|l| l.starts_with("E ")).collect();
        assert!(events[4].starts_with("E 8 1"), "{events:?}");
    }

    #[test]
    fn rejects_unknown_version() {
        let text = write_trace(&sample()).replacen("mcsched-trace 1", "mcsched-trace 2", 1);
        assert_eq!(
            parse_trace(&text),
            Err(ParseError::UnsupportedVersion {
                what: "trace",
                found: "2".into(),
                expected: 1
            })
        );
    }

    #[test]
    fn rejects_orphan_and_bad_columns() {
        let err = parse_trace("mcsched-trace 1\nE 0 4 0 FRAME_SWITCH - - -\n").unwrap_err();
        assert_eq!(err.line(), Some(2));
        let text = "mcsched-trace 1\nnode id=1 cpus=1 tick=4 horizon=8 cap_window=off\nE 0 1 0 NOPE - - -\n";
        assert!(matches!(parse_trace(text), Err(ParseError::Field { line: 3, .. })));
    }
}
