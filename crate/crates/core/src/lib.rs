//! Two-stage RTL generation orchestration: a Stage-A generate/judge/repair
//! loop over a small Verilog reference interpreter, calibrated escalation to a
//! Stage-B generator, and micro-tests grown from bounded-model-checking
//! counterexamples.

pub mod agents;
pub mod bench;
pub mod config;
pub mod controller;
pub mod diagnostics;
pub mod formal;
pub mod microtests;
pub mod rtl;
pub mod tools;
