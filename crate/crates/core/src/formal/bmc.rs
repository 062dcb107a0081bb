use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::properties::{Property, Rows};
use crate::rtl::{RtlModule, Simulator, Trace, Word};

/// Exhaustive search when input bits per cycle times depth is at most this.
pub const EXHAUSTIVE_BITS: u32 = 20;
pub const SAMPLED_SEQUENCES: usize = 4096;
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub property_id: String,
    /// Data-input values per cycle, up to and including the violating cycle.
    pub stimulus: Vec<BTreeMap<String, Word>>,
    /// Every signal, one row per stimulus cycle.
    pub trace: Trace,
    pub violating_cycle: usize,
}

impl Counterexample {
    pub fn depth(&self) -> usize {
        self.violating_cycle + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub mode: SearchMode,
    /// Input sequences (sampled) or distinct states (exhaustive) visited.
    pub explored: usize,
    pub counterexample: Option<Counterexample>,
}

struct SimRows<'a> {
    sim: &'a Simulator,
    prev: Option<&'a [Word]>,
    cycle: usize,
}

impl Rows for SimRows<'_> {
    fn cur(&self, name: &str) -> Option<Word> {
        self.sim.value(name)
    }
    fn prev(&self, name: &str) -> Option<Word> {
        let i = self.sim.signal_index(name)?;
        self.prev.map(|p| p[i])
    }
    fn cycle(&self) -> usize {
        self.cycle
    }
}

fn first_violation<'p>(props: &'p [Property], rows: &dyn Rows) -> Option<&'p Property> {
    props.iter().find(|p| !p.holds(rows))
}

/// Bounded search for a property violation within `d` cycles from the
/// all-unknown state. Exhaustive (shortest violation first) when the input
/// space is small enough, else seeded random sampling.
pub fn bounded_check(m: &RtlModule, props: &[Property], d: usize, seed: u64) -> CheckOutcome {
    assert!(d >= 1, "depth must be at least 1");
    let sim = Simulator::new(m);
    let widths = sim.data_input_widths();
    let bits: u32 = widths.iter().sum();
    if props.is_empty() {
        return CheckOutcome {
            mode: SearchMode::Exhaustive,
            explored: 0,
            counterexample: None,
        };
    }
    if (bits as u64) * (d as u64) <= EXHAUSTIVE_BITS as u64 {
        exhaustive(m, props, d, bits)
    } else {
        sampled(m, props, d, seed)
    }
}

fn split_inputs(k: u128, widths: &[u32]) -> Vec<Word> {
    let mut shift = 0;
    widths
        .iter()
        .map(|&w| {
            let v = if shift >= 128 { 0 } else { k >> shift };
            shift += w;
            Word::new(w, v)
        })
        .collect()
}

struct Node {
    parent: Option<usize>,
    inputs: Vec<Word>,
    snap: (usize, Vec<Word>),
}

fn exhaustive(m: &RtlModule, props: &[Property], d: usize, bits: u32) -> CheckOutcome {
    let mut sim = Simulator::new(m);
    let widths = sim.data_input_widths();
    let gate = props.iter().map(Property::gate).max().unwrap_or(0);
    let root = sim.snapshot();
    let mut nodes: Vec<Node> = Vec::new();
    let mut seen: HashSet<(usize, Vec<Word>)> = HashSet::new();
    let mut frontier: Vec<Option<usize>> = vec![None];
    for depth in 0..d {
        let mut next = Vec::new();
        for &parent in &frontier {
            let base = parent.map_or(&root, |p| &nodes[p].snap).clone();
            for k in 0..(1u128 << bits) {
                let inputs = split_inputs(k, &widths);
                sim.restore(&base);
                if sim.step_indexed(&inputs).is_err() {
                    continue;
                }
                let rows = SimRows {
                    sim: &sim,
                    prev: parent.map(|_| base.1.as_slice()),
                    cycle: depth,
                };
                let violated = first_violation(props, &rows).map(|p| p.id.clone());
                let snap = sim.snapshot();
                nodes.push(Node {
                    parent,
                    inputs,
                    snap,
                });
                let id = nodes.len() - 1;
                if let Some(pid) = violated {
                    let path = path_to(&nodes, id);
                    return CheckOutcome {
                        mode: SearchMode::Exhaustive,
                        explored: seen.len(),
                        counterexample: Some(build_ce(m, &sim, &nodes, &path, pid)),
                    };
                }
                let key = ((depth + 1).min(gate), nodes[id].snap.1.clone());
                if seen.insert(key) {
                    next.push(Some(id));
                }
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    CheckOutcome {
        mode: SearchMode::Exhaustive,
        explored: seen.len(),
        counterexample: None,
    }
}

fn path_to(nodes: &[Node], mut id: usize) -> Vec<usize> {
    let mut path = vec![id];
    while let Some(p) = nodes[id].parent {
        path.push(p);
        id = p;
    }
    path.reverse();
    path
}

fn build_ce(
    m: &RtlModule,
    sim: &Simulator,
    nodes: &[Node],
    path: &[usize],
    property_id: String,
) -> Counterexample {
    let names: Vec<String> = sim
        .data_input_names()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let stimulus = path
        .iter()
        .map(|&i| {
            names
                .iter()
                .cloned()
                .zip(nodes[i].inputs.iter().copied())
                .collect()
        })
        .collect();
    let signals: Vec<String> = m.signal_names().into_iter().map(String::from).collect();
    let rows = path.iter().map(|&i| nodes[i].snap.1.clone()).collect();
    Counterexample {
        property_id,
        stimulus,
        trace: Trace { signals, rows },
        violating_cycle: path.len() - 1,
    }
}

fn sampled(m: &RtlModule, props: &[Property], d: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sim = Simulator::new(m);
    let widths = sim.data_input_widths();
    let root = sim.snapshot();
    for n in 0..SAMPLED_SEQUENCES {
        sim.restore(&root);
        let mut nodes: Vec<Node> = Vec::with_capacity(d);
        let mut prev: Option<Vec<Word>> = None;
        for cycle in 0..d {
            let inputs: Vec<Word> = widths
                .iter()
                .map(|&w| Word::new(w, rng.random::<u128>()))
                .collect();
            if sim.step_indexed(&inputs).is_err() {
                break;
            }
            let rows = SimRows {
                sim: &sim,
                prev: prev.as_deref(),
                cycle,
            };
            let violated = first_violation(props, &rows).map(|p| p.id.clone());
            let snap = sim.snapshot();
            nodes.push(Node {
                parent: cycle.checked_sub(1),
                inputs,
                snap: snap.clone(),
            });
            if let Some(pid) = violated {
                let path: Vec<usize> = (0..=cycle).collect();
                return CheckOutcome {
                    mode: SearchMode::Sampled,
                    explored: n + 1,
                    counterexample: Some(build_ce(m, &sim, &nodes, &path, pid)),
                };
            }
            prev = Some(snap.1);
        }
    }
    CheckOutcome {
        mode: SearchMode::Sampled,
        explored: SAMPLED_SEQUENCES,
        counterexample: None,
    }
}
