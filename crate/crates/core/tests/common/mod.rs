#![allow(dead_code)]

use std::path::PathBuf;

use mcsched_core::format::parse_scenario;
use mcsched_core::scenario::Scenario;

pub const MS: u64 = 1_000;

/// Parses scenario lines; the version header is added here.
pub fn scenario(body: &str) -> Scenario {
    let text = format!("mcsched-scenario 1\n{body}");
    let sc = parse_scenario(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    sc.validate().unwrap();
    sc
}

pub fn bundled(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.scn"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_scenario(&text).unwrap()
}
