//! `mcsched`: validate scenarios, run them, and analyze the traces.
//!
//! Exit status: 0 ok, 1 domain violation (invalid frame, cap violation,
//! incomplete chain, infeasible generation), 2 usage or I/O error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{ArgGroup, Parser, Subcommand};
use serde_json::{json, Value};

use mcsched_core::analysis::{
    cap_audit, emergency_latencies, exec_intervals, export_gantt, jitter_stats, latency_stats, AnalysisError,
    GanttFormat,
};
use mcsched_core::cluster::run_cluster;
use mcsched_core::format::{format_duration, parse_duration, parse_scenario, parse_trace, write_scenario, write_trace, TraceFile};
use mcsched_core::frame::{generate_major_frame, validate_major_frame};
use mcsched_core::model::{Micros, TraceKind};
use mcsched_core::scenario::Scenario;
use mcsched_core::trace::{TraceHeader, TraceLog};

#[derive(Parser)]
#[command(name = "mcsched", version, about = "Mixed-criticality partition scheduler simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every frame of a scenario against the frame constraints.
    Validate { path: PathBuf },
    /// Simulate a scenario and write its trace and a JSON summary.
    Run {
        path: PathBuf,
        /// Simulated time to stop at (e.g. 1200ms, 2s); defaults to the scenario horizon.
        #[arg(long, value_parser = parse_duration)]
        until: Option<Micros>,
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long)]
        report_out: Option<PathBuf>,
        /// Worker threads for multi-node runs. Output does not depend on it.
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Directory for outputs not given explicitly.
        #[arg(long, env = "MCSCHED_OUT_DIR", default_value = ".")]
        out_dir: PathBuf,
    },
    /// Analyze a trace file.
    #[command(group(ArgGroup::new("what").required(true).args(["latency", "jitter", "cap_audit", "gantt"])))]
    Analyze {
        trace: PathBuf,
        #[arg(long)]
        latency: bool,
        #[arg(long)]
        jitter: bool,
        #[arg(long)]
        cap_audit: bool,
        #[arg(long)]
        gantt: bool,
        /// Gantt output format: text or vega.
        #[arg(long, default_value = "text")]
        format: String,
        /// Write the result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Place minor frames for every frame's partition table and print the
    /// rewritten scenario.
    GenerateFrame {
        path: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure split by exit status.
enum Failure {
    Domain(anyhow::Error),
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

type CmdResult = Result<(), Failure>;

fn domain(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Domain(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { path } => cmd_validate(&path),
        Command::Run {
            path,
            until,
            trace_out,
            report_out,
            threads,
            out_dir,
        } => cmd_run(&path, until, trace_out, report_out, threads, &out_dir),
        Command::Analyze {
            trace,
            latency,
            jitter,
            cap_audit,
            gantt,
            format,
            out,
        } => {
            let what = if latency {
                Analysis::Latency
            } else if jitter {
                Analysis::Jitter
            } else if cap_audit {
                Analysis::CapAudit
            } else {
                debug_assert!(gantt);
                Analysis::Gantt(format)
            };
            cmd_analyze(&trace, what, out.as_deref())
        }
        Command::GenerateFrame { path, out } => cmd_generate(&path, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_scenario(path: &Path) -> anyhow::Result<Scenario> {
    let text = read(path)?;
    parse_scenario(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_validate(path: &Path) -> CmdResult {
    let scenario = load_scenario(path)?;
    let mut bad = false;
    for node in &scenario.nodes {
        let Some(frame) = scenario.frames.get(&node.frame) else {
            println!("node {}: frame `{}` not defined", node.id, node.frame);
            bad = true;
            continue;
        };
        match validate_major_frame(frame) {
            Ok(report) => {
                bad |= !report.valid();
                println!("node {} frame {}: {report}", node.id, node.frame);
            }
            Err(e) => {
                bad = true;
                println!("node {} frame {}: {e}", node.id, node.frame);
            }
        }
    }
    if bad {
        return Err(domain(anyhow!("{} has invalid frames", path.display())));
    }
    scenario.validate().map_err(domain)?;
    Ok(())
}

fn cmd_run(
    path: &Path,
    until: Option<Micros>,
    trace_out: Option<PathBuf>,
    report_out: Option<PathBuf>,
    threads: usize,
    out_dir: &Path,
) -> CmdResult {
    let scenario = load_scenario(path)?;
    scenario.validate().map_err(domain)?;
    let until = until.unwrap_or(scenario.horizon);
    let traces = if until == 0 {
        empty_traces(&scenario)
    } else {
        run_cluster(&scenario, until, threads.max(1)).map_err(domain)?
    };
    let trace_out = trace_out.unwrap_or_else(|| out_dir.join(format!("{}.trace", scenario.name)));
    let report_out = report_out.unwrap_or_else(|| out_dir.join(format!("{}.report.json", scenario.name)));
    write(&trace_out, &write_trace(&traces))?;
    let report = serde_json::to_string_pretty(&run_report(&scenario, until, &traces)).context("encoding report")?;
    write(&report_out, &(report + "\n"))?;
    println!("trace: {}", trace_out.display());
    println!("report: {}", report_out.display());
    Ok(())
}

fn empty_traces(scenario: &Scenario) -> TraceFile {
    scenario
        .nodes
        .iter()
        .filter_map(|n| TraceHeader::for_node(scenario, n.id, 0))
        .map(|header| (header.node, TraceLog { header, events: Vec::new() }))
        .collect()
}

fn run_report(scenario: &Scenario, until: Micros, traces: &TraceFile) -> Value {
    let nodes: Vec<Value> = traces
        .iter()
        .map(|(node, log)| {
            let mut busy: BTreeMap<String, Micros> = BTreeMap::new();
            for i in exec_intervals(log) {
                let key = i.task.map_or_else(|| "idle".to_string(), |t| t.to_string());
                *busy.entry(key).or_default() += i.end - i.start;
            }
            let count = |k: TraceKind| log.of_kind(k).count();
            json!({
                "node": node,
                "events": log.events.len(),
                "context_switches": count(TraceKind::ContextSwitch),
                "frame_switches": count(TraceKind::FrameSwitch),
                "reconfigs": count(TraceKind::Reconfig),
                "cap_violations": cap_audit(log).len(),
                "cpu_time_us": busy,
            })
        })
        .collect();
    json!({
        "scenario": scenario.name,
        "until": format_duration(until),
        "seed": scenario.seed,
        "nodes": nodes,
    })
}

enum Analysis {
    Latency,
    Jitter,
    CapAudit,
    Gantt(String),
}

fn cmd_analyze(path: &Path, what: Analysis, out: Option<&Path>) -> CmdResult {
    let text = read(path)?;
    let traces = parse_trace(&text).with_context(|| format!("parsing {}", path.display()))?;
    let doc = match what {
        Analysis::Latency => {
            let records = emergency_latencies(&traces).map_err(domain)?;
            let mut per_node: BTreeMap<_, Vec<_>> = BTreeMap::new();
            for r in &records {
                per_node.entry(r.node).or_default().push(r.clone());
            }
            let nodes: Vec<Value> = per_node
                .iter()
                .map(|(node, rs)| {
                    let stats = latency_stats(rs).expect("non-empty group");
                    json!({
                        "node": node,
                        "count": stats.count,
                        "mean_us": stats.mean,
                        "variance_us2": stats.variance,
                        "latencies_us": rs.iter().map(|r| r.latency).collect::<Vec<_>>(),
                        "commands": rs.iter().map(|r| r.command_id.clone()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            pretty(&json!({ "latency": nodes }))?
        }
        Analysis::Jitter => {
            let mut nodes = Vec::new();
            for (node, log) in &traces {
                nodes.push(match jitter_stats(log) {
                    Ok(s) => json!({ "node": node, "switches": s.count, "mean_us": s.mean, "max_us": s.max }),
                    Err(AnalysisError::InsufficientData(n)) => {
                        eprintln!("node {node}: only {n} frame switches, no jitter figure");
                        json!({ "node": node, "switches": n })
                    }
                    Err(e) => return Err(domain(e)),
                });
            }
            pretty(&json!({ "jitter": nodes }))?
        }
        Analysis::CapAudit => {
            let violations: Vec<Value> = traces
                .values()
                .flat_map(cap_audit)
                .map(|v| {
                    json!({
                        "node": v.node,
                        "task": v.task,
                        "window_start_us": v.window_start,
                        "window_end_us": v.window_end,
                        "used_us": v.used,
                        "ceiling_us": v.ceiling,
                        "unexcused_us": v.unexcused,
                    })
                })
                .collect();
            let n = violations.len();
            emit(out, &pretty(&json!({ "cap_violations": violations }))?)?;
            if n > 0 {
                return Err(domain(anyhow!("{n} cap violation(s)")));
            }
            return Ok(());
        }
        Analysis::Gantt(format) => {
            let format: GanttFormat = format.parse().map_err(|e: AnalysisError| anyhow!(e))?;
            export_gantt(&traces, format).map_err(domain)?
        }
    };
    emit(out, &doc)?;
    Ok(())
}

fn pretty(v: &Value) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn cmd_generate(path: &Path, out: Option<&Path>) -> CmdResult {
    let mut scenario = load_scenario(path)?;
    for (name, frame) in scenario.frames.iter_mut() {
        let generated = generate_major_frame(&frame.partitions)
            .with_context(|| format!("frame {name}"))
            .map_err(domain)?;
        let report = validate_major_frame(&generated).map_err(domain)?;
        if !report.valid() {
            return Err(domain(anyhow!("generated frame {name} is invalid: {report}")));
        }
        eprintln!("frame {name}: {} minor frames, {report}", generated.minors.len());
        *frame = generated;
    }
    emit(out, &write_scenario(&scenario))?;
    Ok(())
}
