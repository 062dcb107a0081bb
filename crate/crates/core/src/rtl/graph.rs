//! Signal dependency graph and backward suspect cones.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use super::ast::*;
use super::error::ConeError;
use super::source::SourceUnit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Continuous `assign`.
    Assign,
    Blocking,
    NonBlocking,
    /// An `if` condition or `case` selector/label guarding an assignment.
    Guard,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub line: usize,
    pub kind: EdgeKind,
}

/// Directed driver → driven graph over declared signals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignalGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    /// `(target, line)` for every assignment, including constant ones that
    /// contribute no edge.
    pub drivers: Vec<(String, usize)>,
}

impl SignalGraph {
    pub fn contains(&self, name: &str) -> bool {
        self.nodes.iter().any(|n| n == name)
    }

    pub fn in_edges<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.to == name)
    }

    /// Longest shortest path between any two connected nodes.
    pub fn diameter(&self) -> usize {
        let mut best = 0;
        for n in &self.nodes {
            let dist = bfs_reverse(self, n, usize::MAX);
            best = best.max(dist.values().copied().max().unwrap_or(0));
        }
        best
    }
}

pub fn build_signal_graph(m: &RtlModule) -> SignalGraph {
    let mut edges: Vec<Edge> = Vec::new();
    let mut drivers: Vec<(String, usize)> = Vec::new();
    let mut push = |from: &str, to: &str, line: usize, kind: EdgeKind| {
        let e = Edge {
            from: from.to_string(),
            to: to.to_string(),
            line,
            kind,
        };
        if !edges.contains(&e) {
            edges.push(e);
        }
    };
    for a in &m.assigns {
        for to in a.lhs.targets() {
            drivers.push((to.to_string(), a.line));
            for from in a.rhs.signals().into_iter().chain(a.lhs.index_reads()) {
                push(from, to, a.line, EdgeKind::Assign);
            }
        }
    }
    for p in &m.processes {
        let mut guards: Vec<(Vec<String>, usize)> = Vec::new();
        walk_guarded(&p.body, &mut guards, &mut push, &mut drivers);
    }
    drivers.dedup();
    SignalGraph {
        nodes: m.signal_names().into_iter().map(String::from).collect(),
        edges,
        drivers,
    }
}

fn walk_guarded(
    s: &Stmt,
    guards: &mut Vec<(Vec<String>, usize)>,
    push: &mut impl FnMut(&str, &str, usize, EdgeKind),
    drivers: &mut Vec<(String, usize)>,
) {
    match s {
        Stmt::Block { stmts, .. } => stmts
            .iter()
            .for_each(|s| walk_guarded(s, guards, push, drivers)),
        Stmt::If {
            cond,
            then_branch,
            else_branch,
            line,
            ..
        } => {
            guards.push((owned(cond.signals()), *line));
            walk_guarded(then_branch, guards, push, drivers);
            if let Some(e) = else_branch {
                walk_guarded(e, guards, push, drivers);
            }
            guards.pop();
        }
        Stmt::Case {
            selector,
            arms,
            default,
            line,
            ..
        } => {
            let mut sigs = owned(selector.signals());
            for a in arms {
                for l in &a.labels {
                    for n in l.signals() {
                        if !sigs.iter().any(|s| s == n) {
                            sigs.push(n.to_string());
                        }
                    }
                }
            }
            guards.push((sigs, *line));
            for a in arms {
                walk_guarded(&a.body, guards, push, drivers);
            }
            if let Some(d) = default {
                walk_guarded(d, guards, push, drivers);
            }
            guards.pop();
        }
        Stmt::Assign {
            kind,
            lhs,
            rhs,
            line,
            ..
        } => {
            let ek = match kind {
                AssignKind::Blocking => EdgeKind::Blocking,
                AssignKind::NonBlocking => EdgeKind::NonBlocking,
            };
            for to in lhs.targets() {
                drivers.push((to.to_string(), *line));
                for from in rhs.signals().into_iter().chain(lhs.index_reads()) {
                    push(from, to, *line, ek);
                }
                for (gs, gl) in guards.iter() {
                    for g in gs {
                        push(g, to, *gl, EdgeKind::Guard);
                    }
                }
            }
        }
        Stmt::Null { .. } => {}
    }
}

fn owned(v: Vec<&str>) -> Vec<String> {
    v.into_iter().map(String::from).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SliceLine {
    pub line: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuspectCone {
    pub signal: String,
    pub fail_cycle: usize,
    /// Members in breadth-first order; the origin first.
    pub members: Vec<String>,
    pub slice: Vec<SliceLine>,
    pub depth_used: usize,
}

impl SuspectCone {
    pub fn contains(&self, name: &str) -> bool {
        self.members.iter().any(|m| m == name)
    }

    pub fn lines(&self) -> Vec<usize> {
        self.slice.iter().map(|l| l.line).collect()
    }
}

/// Reverse breadth-first distances from `origin`, up to `d_max`.
fn bfs_reverse(g: &SignalGraph, origin: &str, d_max: usize) -> HashMap<String, usize> {
    let mut dist: HashMap<String, usize> = HashMap::new();
    dist.insert(origin.to_string(), 0);
    let mut queue = VecDeque::from([origin.to_string()]);
    while let Some(n) = queue.pop_front() {
        let d = dist[&n];
        if d >= d_max {
            continue;
        }
        for e in g.in_edges(&n) {
            if !dist.contains_key(&e.from) {
                dist.insert(e.from.clone(), d + 1);
                queue.push_back(e.from.clone());
            }
        }
    }
    dist
}

/// Signals within `d_max` reverse hops of `y`, and the source lines that
/// drive them ordered by distance from `y`, then line number.
pub fn backward_cone(
    g: &SignalGraph,
    src: &SourceUnit,
    y: &str,
    fail_cycle: usize,
    d_max: usize,
    l_max: usize,
) -> Result<SuspectCone, ConeError> {
    if !g.contains(y) {
        return Err(ConeError::UnknownSignal(y.to_string()));
    }
    if d_max == 0 {
        return Err(ConeError::ZeroDepth);
    }
    let dist = bfs_reverse(g, y, d_max);
    let mut members: Vec<(usize, usize, &String)> = dist
        .iter()
        .map(|(n, d)| {
            (
                *d,
                g.nodes.iter().position(|x| x == n).unwrap_or(usize::MAX),
                n,
            )
        })
        .collect();
    members.sort();
    let mut keyed: Vec<(usize, usize)> = g
        .edges
        .iter()
        .filter_map(|e| dist.get(&e.to).map(|d| (*d, e.line)))
        .chain(
            g.drivers
                .iter()
                .filter_map(|(t, l)| dist.get(t).map(|d| (*d, *l))),
        )
        .collect();
    keyed.sort();
    let mut slice: Vec<SliceLine> = Vec::new();
    for (_, line) in keyed {
        if slice.len() >= l_max {
            break;
        }
        if slice.iter().any(|s| s.line == line) {
            continue;
        }
        slice.push(SliceLine {
            line,
            text: src.line_text(line).unwrap_or("").trim().to_string(),
        });
    }
    Ok(SuspectCone {
        signal: y.to_string(),
        fail_cycle,
        depth_used: members.iter().map(|m| m.0).max().unwrap_or(0),
        members: members.into_iter().map(|m| m.2.clone()).collect(),
        slice,
    })
}
