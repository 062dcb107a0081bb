//! The accumulated micro-test set: tiny deterministic stimulus/check pairs
//! replayed during smoke testing.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::FailurePoint;
use crate::rtl::{parse_module, ParseError, RtlModule, Simulator, SourceUnit, Word};
use crate::tools::{OfficialRunResult, Testbench};

pub const STORE_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    U0Derived,
    FormalCounterexample,
    HarnessFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Relation {
    pub fn holds(self, a: u128, b: u128) -> bool {
        match self {
            Relation::Eq => a == b,
            Relation::Ne => a != b,
            Relation::Lt => a < b,
            Relation::Le => a <= b,
            Relation::Gt => a > b,
            Relation::Ge => a >= b,
        }
    }
}

/// What a check asserts about one signal at one cycle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predicate {
    /// Unknown bits of `value` are not compared.
    Equals {
        value: Word,
    },
    NonX,
    /// Holds vacuously while the signal is unknown.
    InSet {
        values: Vec<Word>,
    },
    /// Holds vacuously while the signal is unknown.
    Compare {
        relation: Relation,
        value: Word,
    },
}

impl Predicate {
    pub fn holds(&self, got: &Word) -> bool {
        let w = got.width();
        match self {
            Predicate::Equals { value } => {
                let want = value.resize(w);
                let defined = !want.unknown_mask() & mask(w);
                defined & ((want.raw_value() ^ got.raw_value()) | got.unknown_mask()) == 0
            }
            Predicate::NonX => !got.has_x(),
            Predicate::InSet { values } => match got.value() {
                None => true,
                Some(v) => values.iter().any(|x| x.resize(w).value() == Some(v)),
            },
            Predicate::Compare { relation, value } => {
                match (got.value(), value.resize(w).value()) {
                    (Some(a), Some(b)) => relation.holds(a, b),
                    _ => true,
                }
            }
        }
    }
}

fn mask(w: u32) -> u128 {
    if w >= 128 {
        u128::MAX
    } else {
        (1u128 << w) - 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Check {
    pub cycle: usize,
    pub signal: String,
    pub predicate: Predicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicroTest {
    pub id: String,
    /// Input values per cycle; an input missing from a cycle is unknown.
    pub stimulus: Vec<BTreeMap<String, Word>>,
    pub checks: Vec<Check>,
    pub max_cycles: usize,
    pub provenance: Provenance,
    /// Property the test was synthesized from, if any.
    #[serde(default)]
    pub property: Option<String>,
    #[serde(default)]
    pub description: String,
}

#[derive(Serialize)]
struct HashContent<'a> {
    checks: &'a [Check],
    max_cycles: usize,
    property: &'a Option<String>,
    stimulus: &'a [BTreeMap<String, Word>],
}

impl MicroTest {
    /// Builds a test and assigns its content id.
    pub fn new(
        stimulus: Vec<BTreeMap<String, Word>>,
        checks: Vec<Check>,
        provenance: Provenance,
        property: Option<String>,
        description: impl Into<String>,
    ) -> Self {
        let max_cycles = stimulus.len();
        let mut t = MicroTest {
            id: String::new(),
            stimulus,
            checks,
            max_cycles,
            provenance,
            property,
            description: description.into(),
        };
        t.id = t.content_id();
        t
    }

    /// Compact JSON with sorted keys and hex words.
    pub fn canonical_json(&self) -> String {
        let v = serde_json::to_value(HashContent {
            checks: &self.checks,
            max_cycles: self.max_cycles,
            property: &self.property,
            stimulus: &self.stimulus,
        })
        .expect("micro-test serializes");
        // serde_json's map is ordered by key, so this text is canonical.
        v.to_string()
    }

    pub fn content_id(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        format!("mt-{}", &hex::encode(digest)[..16])
    }

    pub fn len(&self) -> usize {
        self.max_cycles
    }

    pub fn is_empty(&self) -> bool {
        self.max_cycles == 0
    }

    /// Simulates up to `min(max_cycles, w_cap)` cycles and scores each cycle
    /// that carries checks.
    pub fn replay(&self, m: &RtlModule, w_cap: usize) -> ReplayOutcome {
        let n = self.max_cycles.min(w_cap).min(self.stimulus.len());
        let mut by_cycle: BTreeMap<usize, Vec<&Check>> = BTreeMap::new();
        for c in self.checks.iter().filter(|c| c.cycle < n) {
            by_cycle.entry(c.cycle).or_default().push(c);
        }
        let mut sim = Simulator::new(m);
        let names: Vec<String> = sim
            .data_input_names()
            .iter()
            .map(|s| s.to_string())
            .collect();
        let widths = sim.data_input_widths();
        let mut failed = Vec::new();
        let mut bits = Vec::with_capacity(by_cycle.len());
        let mut broken = false;
        for cycle in 0..n {
            if !broken {
                let inputs: Vec<Word> = names
                    .iter()
                    .zip(&widths)
                    .map(|(name, &w)| {
                        self.stimulus[cycle]
                            .get(name)
                            .map_or(Word::all_x(w), |v| v.resize(w))
                    })
                    .collect();
                broken = sim.step_indexed(&inputs).is_err();
            }
            let Some(checks) = by_cycle.get(&cycle) else {
                continue;
            };
            let mut ok = true;
            let mut counted = false;
            for c in checks {
                // internal signals the candidate does not declare are skipped
                if sim.signal_index(&c.signal).is_none() {
                    continue;
                }
                counted = true;
                let holds = !broken && sim.value(&c.signal).is_some_and(|v| c.predicate.holds(&v));
                if !holds {
                    ok = false;
                    failed.push((*c).clone());
                }
            }
            if counted {
                bits.push(ok);
            }
        }
        let fraction = if bits.is_empty() {
            1.0
        } else {
            bits.iter().filter(|b| **b).count() as f64 / bits.len() as f64
        };
        ReplayOutcome {
            id: self.id.clone(),
            provenance: self.provenance,
            fraction,
            first_failure: failed
                .first()
                .map(|c| FailurePoint::new(c.signal.clone(), c.cycle)),
            failed,
            bits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub id: String,
    pub provenance: Provenance,
    /// Matched check-cycles over all check-cycles; 1 when nothing was checked.
    pub fraction: f64,
    pub failed: Vec<Check>,
    pub first_failure: Option<FailurePoint>,
    /// One bit per check-cycle.
    pub bits: Vec<bool>,
}

impl ReplayOutcome {
    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }
}

/// `U_k`: insert-only, deduplicated by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicroTestStore {
    pub schema: u32,
    pub task: String,
    pub k: u64,
    pub tests: Vec<MicroTest>,
}

impl MicroTestStore {
    pub fn new(task: impl Into<String>) -> Self {
        MicroTestStore {
            schema: STORE_SCHEMA,
            task: task.into(),
            k: 0,
            tests: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.tests.iter().any(|t| t.id == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.tests.iter().map(|t| t.id.as_str()).collect()
    }

    /// Returns whether the test was new.
    pub fn insert(&mut self, t: MicroTest) -> bool {
        if self.contains(&t.id) {
            return false;
        }
        self.tests.push(t);
        self.k += 1;
        true
    }

    pub fn replay(&self, m: &RtlModule, w_cap: usize) -> Vec<ReplayOutcome> {
        self.tests.iter().map(|t| t.replay(m, w_cap)).collect()
    }

    /// Parses the candidate and replays every test.
    pub fn replay_source(
        &self,
        candidate: &SourceUnit,
        w_cap: usize,
    ) -> Result<Vec<ReplayOutcome>, ParseError> {
        let m = parse_module(candidate)?;
        Ok(self.replay(&m, w_cap))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("store serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// Reset for two cycles, then every stimulus input at zero for two cycles and
/// at all ones for two. Checks that outputs are known from the last reset
/// cycle on (from the start when there is no reset).
pub fn derive_u0(header: &RtlModule) -> MicroTest {
    let reset = header.reset_port();
    let data: Vec<(&str, u32)> = header
        .stimulus_inputs()
        .into_iter()
        .filter(|p| Some(p.name.as_str()) != reset)
        .map(|p| (p.name.as_str(), p.width))
        .collect();
    let mut stimulus = Vec::new();
    let frame = |rst: bool, fill: fn(u32) -> Word| {
        let mut f: BTreeMap<String, Word> = data
            .iter()
            .map(|(n, w)| (n.to_string(), fill(*w)))
            .collect();
        if let Some(r) = reset {
            f.insert(r.to_string(), Word::from_bool(rst));
        }
        f
    };
    if reset.is_some() {
        stimulus.push(frame(true, Word::zero));
        stimulus.push(frame(true, Word::zero));
    }
    if !data.is_empty() {
        for fill in [Word::zero as fn(u32) -> Word, Word::ones] {
            stimulus.push(frame(false, fill));
            stimulus.push(frame(false, fill));
        }
    }
    let first = if reset.is_some() { 1 } else { 0 };
    let mut checks = Vec::new();
    for cycle in first..stimulus.len() {
        for p in header.outputs() {
            checks.push(Check {
                cycle,
                signal: p.name.clone(),
                predicate: Predicate::NonX,
            });
        }
    }
    MicroTest::new(
        stimulus,
        checks,
        Provenance::U0Derived,
        None,
        "reset, then all-zero and all-one inputs; outputs must be known",
    )
}

/// Distills the first official mismatch into a replayable test: the testbench
/// stimulus up to `t†` and an equality check on `y` there. Input widths come
/// from `header`; signals it does not declare are dropped.
pub fn from_harness_failure(
    header: &RtlModule,
    tb: &Testbench,
    result: &OfficialRunResult,
) -> Option<MicroTest> {
    let (Some(y), Some(t), Some(expected)) =
        (&result.fail_signal, result.fail_cycle, &result.expected)
    else {
        return None;
    };
    let widths: BTreeMap<&str, u32> = header
        .inputs()
        .map(|p| (p.name.as_str(), p.width))
        .collect();
    let mut held: BTreeMap<String, Word> = BTreeMap::new();
    let mut stimulus = Vec::with_capacity(t + 1);
    let mut it = tb.stimulus.iter().peekable();
    for cycle in 0..=t {
        while let Some((c, sig, val, _)) = it.peek() {
            if *c > cycle {
                break;
            }
            if let Some(w) = widths.get(sig.as_str()) {
                held.insert(sig.clone(), val.to_word(*w));
            }
            it.next();
        }
        stimulus.push(held.clone());
    }
    Some(MicroTest::new(
        stimulus,
        vec![Check {
            cycle: t,
            signal: y.clone(),
            predicate: Predicate::Equals { value: *expected },
        }],
        Provenance::HarnessFailure,
        None,
        format!(
            "official testbench expects {y} = {} at cycle {t}",
            expected.to_hex()
        ),
    ))
}
