//! Verilog subset front end, reference interpreter and dependency graph.

pub mod ast;
mod error;
mod graph;
mod lexer;
mod parser;
mod printer;
mod sim;
mod source;
mod word;

pub use ast::RtlModule;
pub use error::{ConeError, ParseError, SimError};
pub use graph::{
    backward_cone, build_signal_graph, Edge, EdgeKind, SignalGraph, SliceLine, SuspectCone,
};
pub use lexer::{tokenize, Literal, Token, TokenKind};
pub use parser::{parse_module, parse_str};
pub use printer::{expr as print_expr, lvalue as print_lvalue, print_module};
pub use sim::{run, step, stmt_reads, SimState, Simulator, Trace};
pub use source::{SourceUnit, Span};
pub use word::{Bit, Word, MAX_WIDTH};
