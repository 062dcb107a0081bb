#![allow(dead_code)]

pub mod oracles;

use std::path::PathBuf;

use hdlforge::agents::{Script, ScriptEntry, ScriptedBackend, TaskBundle};
use hdlforge::bench::{inject, BugClass};
use hdlforge::rtl::{parse_module, SourceUnit};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/tasks")
}

pub fn task(name: &str) -> TaskBundle {
    TaskBundle::load(&fixtures().join(name)).unwrap()
}

pub fn golden(name: &str) -> String {
    std::fs::read_to_string(fixtures().join(name).join("golden.v")).unwrap()
}

pub fn mutant(name: &str, class: BugClass, seed: u64) -> String {
    let src = SourceUnit::new("golden.v", golden(name));
    let m = parse_module(&src).unwrap();
    inject(&src, &m, class, seed)
        .unwrap()
        .source
        .text()
        .to_string()
}

pub fn fenced(src: &str) -> String {
    format!("```verilog\n{src}```\n")
}

pub const PLAN: &str = "PLAN:\nOne clocked process.\nINVARIANTS:\n- registers reset\n";

/// Planner, coder, reflexion and Stage-B replies as plain texts.
pub fn scripted(coder: &[String], reflexion: &[String], stage_b: &[String]) -> ScriptedBackend {
    let list = |v: &[String]| v.iter().map(|s| ScriptEntry::text(fenced(s))).collect();
    ScriptedBackend::new(
        "scripted",
        Script {
            planner: vec![ScriptEntry::text(PLAN)],
            coder: list(coder),
            reflexion: list(reflexion),
            stage_b: list(stage_b),
        },
    )
}
