mod common;

use common::bundled;
use mcsched_core::cluster::{run_cluster, scatter_presets, scatter_scenario};
use mcsched_core::format::{parse_scenario, parse_trace, write_scenario, write_trace, ParseError};

const BUNDLED: [&str; 6] = ["fig1", "fig2", "fig3", "scatter_1", "scatter_2", "scatter_3"];

#[test]
fn bundled_scenarios_validate_and_round_trip() {
    for name in BUNDLED {
        let sc = bundled(name);
        sc.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        let text = write_scenario(&sc);
        assert_eq!(parse_scenario(&text).unwrap(), sc, "{name}");
        assert_eq!(write_scenario(&parse_scenario(&text).unwrap()), text, "{name}");
    }
}

#[test]
fn scatter_files_match_the_builder() {
    for (name, params) in scatter_presets() {
        assert_eq!(bundled(name), scatter_scenario(params).unwrap(), "{name}");
    }
}

#[test]
fn traces_round_trip() {
    for name in ["fig2", "scatter_3"] {
        let sc = bundled(name);
        let traces = run_cluster(&sc, sc.horizon, 1).unwrap();
        let text = write_trace(&traces);
        let back = parse_trace(&text).unwrap();
        assert_eq!(back, traces, "{name}");
        assert_eq!(write_trace(&back), text);
    }
}

#[test]
fn unknown_trace_version_is_rejected() {
    let sc = bundled("fig3");
    let text = write_trace(&run_cluster(&sc, 100_000, 1).unwrap()).replacen("mcsched-trace 1", "mcsched-trace 9", 1);
    assert!(matches!(parse_trace(&text), Err(ParseError::UnsupportedVersion { .. })));
}

#[test]
fn scenario_errors_carry_line_and_field() {
    let text = "mcsched-scenario 1\nscenario name=x tick=4ms horizon=1s\nnode id=1 cpus=lots frame=f\n";
    match parse_scenario(text) {
        Err(ParseError::Field { line, field, .. }) => assert_eq!((line, field.as_str()), (3, "cpus")),
        other => panic!("{other:?}"),
    }
}
