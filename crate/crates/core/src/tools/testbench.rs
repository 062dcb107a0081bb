use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ToolMode, ToolsConfig};
use super::process::{expand_argv, run_external, ExitKind, ToolResult};
use super::Job;
use crate::rtl::{
    parse_module, tokenize, RtlModule, Simulator, SourceUnit, TokenKind, Trace, Word,
};

/// Cycles kept on each side of the first failure.
pub const DEFAULT_WAVE_WINDOW: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TestbenchError {
    #[error("line {line}: testbench outside the supported subset: {why}")]
    OutsideSubset { line: usize, why: String },
}

/// A value written in a directive: a Verilog literal, a plain decimal, or `x`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TbValue {
    pub text: String,
    #[serde(skip)]
    literal: Option<crate::rtl::Literal>,
}

impl TbValue {
    fn parse(text: &str, line: usize) -> Result<TbValue, TestbenchError> {
        let bad = |why: &str| TestbenchError::OutsideSubset {
            line,
            why: format!("bad value `{text}`: {why}"),
        };
        if text.eq_ignore_ascii_case("x") {
            return Ok(TbValue {
                text: text.to_string(),
                literal: None,
            });
        }
        let toks = tokenize(text).map_err(|e| bad(&e.to_string()))?;
        match toks.as_slice() {
            [t, eof] if matches!(eof.kind, TokenKind::Eof) => match &t.kind {
                TokenKind::Number(l) if l.fill.is_none() => Ok(TbValue {
                    text: text.to_string(),
                    literal: Some(l.clone()),
                }),
                _ => Err(bad("not a number")),
            },
            _ => Err(bad("not a single literal")),
        }
    }

    /// The value at `width` bits; `x` is all unknown.
    pub fn to_word(&self, width: u32) -> Word {
        match &self.literal {
            Some(l) => l.to_word(width),
            None => Word::all_x(width),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectation {
    pub cycle: usize,
    pub signal: String,
    pub value: TbValue,
    pub line: usize,
}

/// Cycle tables read from `//@` directives. Other lines are ignored, so the
/// same file may also carry a behavioral testbench for external simulators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Testbench {
    pub cycles: usize,
    /// `(cycle, signal, value, line)`; a value holds until changed.
    pub stimulus: Vec<(usize, String, TbValue, usize)>,
    pub expectations: Vec<Expectation>,
}

pub fn parse_testbench(tb: &SourceUnit) -> Result<Testbench, TestbenchError> {
    let mut stimulus = Vec::new();
    let mut expectations = Vec::new();
    let mut declared = None;
    for line in 1..=tb.line_count() {
        let text = tb.line_text(line).unwrap_or("").trim();
        let Some(rest) = text.strip_prefix("//@") else {
            continue;
        };
        let err = |why: String| TestbenchError::OutsideSubset { line, why };
        let mut words = rest.split_whitespace();
        let directive = words.next().unwrap_or("");
        match directive {
            "cycles" => {
                let n = words
                    .next()
                    .and_then(|w| w.parse::<usize>().ok())
                    .ok_or_else(|| err("`//@cycles` needs a count".into()))?;
                if words.next().is_some() {
                    return Err(err("trailing text after `//@cycles`".into()));
                }
                declared = Some(n);
            }
            "cycle" | "expect" => {
                let cycle = words
                    .next()
                    .and_then(|w| w.parse::<usize>().ok())
                    .ok_or_else(|| err(format!("`//@{directive}` needs a cycle number")))?;
                let mut any = false;
                for pair in words {
                    let (sig, val) = pair
                        .split_once('=')
                        .ok_or_else(|| err(format!("expected sig=value, found `{pair}`")))?;
                    if !is_ident(sig) {
                        return Err(err(format!("bad signal name `{sig}`")));
                    }
                    let value = TbValue::parse(val, line)?;
                    if directive == "cycle" {
                        stimulus.push((cycle, sig.to_string(), value, line));
                    } else {
                        expectations.push(Expectation {
                            cycle,
                            signal: sig.to_string(),
                            value,
                            line,
                        });
                    }
                    any = true;
                }
                if !any {
                    return Err(err(format!("`//@{directive}` without assignments")));
                }
            }
            other => return Err(err(format!("unknown directive `//@{other}`"))),
        }
    }
    if stimulus.is_empty() {
        return Err(TestbenchError::OutsideSubset {
            line: tb.line_count().max(1),
            why: "no `//@cycle` stimulus".into(),
        });
    }
    let last = stimulus
        .iter()
        .map(|s| s.0)
        .chain(expectations.iter().map(|e| e.cycle))
        .max()
        .unwrap_or(0);
    let cycles = declared.unwrap_or(last + 1);
    stimulus.sort_by_key(|s| (s.0, s.3));
    Ok(Testbench {
        cycles,
        stimulus,
        expectations,
    })
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfficialRunResult {
    pub passed: bool,
    pub fail_signal: Option<String>,
    pub fail_cycle: Option<usize>,
    pub expected: Option<Word>,
    pub actual: Option<Word>,
    /// Simulation or harness error that ended the run early.
    pub error: Option<String>,
    /// All signals over `[t† - Δ, t† + Δ]`, clipped to the simulated range.
    #[serde(skip)]
    pub waveform_window: Option<Trace>,
    pub window_start: usize,
    /// Number of distinct cycles with at least one mismatch.
    pub mismatch_cycles: usize,
    /// Distinct cycles carrying expectations within the simulated range.
    pub checked_cycles: usize,
    pub tool: Option<ToolResult>,
}

impl OfficialRunResult {
    fn pass() -> Self {
        OfficialRunResult {
            passed: true,
            fail_signal: None,
            fail_cycle: None,
            expected: None,
            actual: None,
            error: None,
            waveform_window: None,
            window_start: 0,
            mismatch_cycles: 0,
            checked_cycles: 0,
            tool: None,
        }
    }

    /// Share of checked cycles that matched; `None` when nothing was checked.
    pub fn match_fraction(&self) -> Option<f64> {
        (self.checked_cycles > 0).then(|| {
            let bad = self.mismatch_cycles.min(self.checked_cycles);
            (self.checked_cycles - bad) as f64 / self.checked_cycles as f64
        })
    }

    fn failed(error: Option<String>) -> Self {
        OfficialRunResult {
            passed: false,
            error,
            ..OfficialRunResult::pass()
        }
    }
}

/// Runs the official testbench against a candidate.
pub fn run_official(
    candidate: &SourceUnit,
    tb: &SourceUnit,
    cfg: &ToolsConfig,
    job: &Job,
    wave: usize,
) -> Result<OfficialRunResult, TestbenchError> {
    if cfg.simulate.mode == ToolMode::External {
        let tool = match job.prepare(cfg, candidate.text(), Some(tb.text())) {
            Ok(ws) => run_external(
                &expand_argv(&cfg.simulate.argv, &ws.src, &ws.tb, &ws.out),
                &ws.dir,
                cfg.simulate.timeout_s,
            ),
            Err(e) => ToolResult {
                ok: false,
                exit_kind: ExitKind::ToolError,
                stdout_digest: e.to_string(),
                elapsed: 0.0,
                workspace: None,
            },
        };
        if !(tool.exit_kind == ExitKind::NotInstalled && cfg.fallback_to_builtin) {
            return Ok(external_result(tool));
        }
    }
    let bench = parse_testbench(tb)?;
    match parse_module(candidate) {
        Ok(m) => Ok(run_testbench(&m, &bench, wave, None)),
        Err(e) => Ok(OfficialRunResult::failed(Some(format!(
            "candidate does not elaborate: {e}"
        )))),
    }
}

fn external_result(tool: ToolResult) -> OfficialRunResult {
    if tool.ok {
        return OfficialRunResult {
            tool: Some(tool),
            ..OfficialRunResult::pass()
        };
    }
    let re = Regex::new(
        r"(?i)mismatch\W+(?:on\s+|signal\s+)?([A-Za-z_]\w*)\b.*?\bcycle\s*[=:]?\s*(\d+)",
    )
    .expect("valid regex");
    let mut cycles = std::collections::BTreeSet::new();
    let mut first: Option<(String, usize)> = None;
    for c in tool.stdout_digest.lines().filter_map(|l| re.captures(l)) {
        let cyc: usize = match c[2].parse() {
            Ok(v) => v,
            Err(_) => continue,
        };
        cycles.insert(cyc);
        if first.is_none() {
            first = Some((c[1].to_string(), cyc));
        }
    }
    let error = match tool.exit_kind {
        ExitKind::Timeout => Some("simulation timed out".to_string()),
        ExitKind::NotInstalled => Some("simulator not installed".to_string()),
        _ if first.is_none() => Some("simulator reported failure".to_string()),
        _ => None,
    };
    let (fail_signal, fail_cycle) = match first {
        Some((s, c)) => (Some(s), Some(c)),
        None => (None, None),
    };
    OfficialRunResult {
        fail_signal,
        fail_cycle,
        mismatch_cycles: cycles.len(),
        tool: Some(tool),
        ..OfficialRunResult::failed(error)
    }
}

/// Interprets a parsed testbench against an elaborated module. Stimulus for
/// cycle `n` is applied at step `n`, and expectations for `n` are checked
/// against the values after that step. `max_cycles` truncates the run.
pub fn run_testbench(
    m: &RtlModule,
    tb: &Testbench,
    wave: usize,
    max_cycles: Option<usize>,
) -> OfficialRunResult {
    let n = max_cycles.map_or(tb.cycles, |c| c.min(tb.cycles));
    let mut sim = Simulator::new(m);
    let inputs: Vec<String> = sim
        .data_input_names()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let widths = sim.data_input_widths();
    let mut current: Vec<Word> = widths.iter().map(|&w| Word::all_x(w)).collect();

    // A signal the candidate lacks fails at the first cycle that names it.
    let mut missing: Option<(usize, String)> = None;
    let mut note_missing = |cycle: usize, sig: &str| {
        if cycle < n && missing.as_ref().is_none_or(|(c, _)| cycle < *c) {
            missing = Some((cycle, sig.to_string()));
        }
    };
    for (cycle, sig, _, _) in &tb.stimulus {
        if !inputs.contains(sig) && !m.clocks().contains(&sig.as_str()) {
            note_missing(*cycle, sig);
        }
    }
    for e in &tb.expectations {
        if sim.signal_index(&e.signal).is_none() {
            note_missing(e.cycle, &e.signal);
        }
    }

    let mut expects: BTreeMap<usize, Vec<(usize, &Expectation)>> = BTreeMap::new();
    let order: Vec<&str> = m.signal_names();
    for e in &tb.expectations {
        if let Some(pos) = order.iter().position(|s| *s == e.signal) {
            expects.entry(e.cycle).or_default().push((pos, e));
        }
    }
    for v in expects.values_mut() {
        v.sort_by_key(|(pos, e)| (*pos, e.line));
    }

    let all: Vec<usize> = order.iter().filter_map(|s| sim.signal_index(s)).collect();
    let mut rows: Vec<Vec<Word>> = Vec::with_capacity(n);
    let mut first: Option<(usize, String, Word, Word)> = None;
    let mut bad_cycles = 0usize;
    let mut matched_cycles = 0usize;
    let mut stim = tb.stimulus.iter().peekable();
    let mut error = None;

    for cycle in 0..n {
        if let Some((c, sig)) = &missing {
            if *c == cycle {
                first.get_or_insert((cycle, sig.clone(), Word::all_x(1), Word::all_x(1)));
                error = Some(format!("candidate has no signal `{sig}`"));
                bad_cycles += 1;
                break;
            }
        }
        while let Some((c, sig, val, _)) = stim.peek() {
            if *c != cycle {
                break;
            }
            if let Some(k) = inputs.iter().position(|s| s == sig) {
                current[k] = val.to_word(widths[k]);
            }
            stim.next();
        }
        if let Err(e) = sim.step_indexed(&current) {
            error = Some(format!("cycle {cycle}: {e}"));
            first.get_or_insert((cycle, String::new(), Word::all_x(1), Word::all_x(1)));
            bad_cycles += 1;
            break;
        }
        rows.push(all.iter().map(|&i| sim.value_at(i)).collect());
        let mut bad_here = false;
        for (_, e) in expects.get(&cycle).map(|v| v.as_slice()).unwrap_or(&[]) {
            let got = sim.value(&e.signal).expect("checked above");
            let want = e.value.to_word(got.width());
            if mismatches(&want, &got) {
                bad_here = true;
                if first.is_none() {
                    first = Some((cycle, e.signal.clone(), want, got));
                }
            }
        }
        if bad_here {
            bad_cycles += 1;
        } else if expects.contains_key(&cycle) {
            matched_cycles += 1;
        }
    }

    let checked = expects.keys().filter(|&&c| c < n).count();
    let Some((t, sig, want, got)) = first else {
        return OfficialRunResult {
            checked_cycles: checked,
            ..OfficialRunResult::pass()
        };
    };
    if error.is_some() {
        // cycles that were never reached count as mismatches
        bad_cycles = bad_cycles.max(checked.saturating_sub(matched_cycles));
    }
    let start = t.saturating_sub(wave);
    let end = (t + wave + 1).min(rows.len()).max(start);
    let window = Trace {
        signals: order.iter().map(|s| s.to_string()).collect(),
        rows: rows[start.min(rows.len())..end].to_vec(),
    };
    let has_values = error.is_none();
    OfficialRunResult {
        passed: false,
        fail_signal: (!sig.is_empty()).then_some(sig),
        fail_cycle: Some(t),
        expected: has_values.then_some(want),
        actual: has_values.then_some(got),
        error,
        waveform_window: Some(window),
        window_start: start,
        mismatch_cycles: bad_cycles,
        checked_cycles: checked.max(bad_cycles),
        tool: None,
    }
}

/// A bit mismatches when the reference defines it and the DUT bit is unknown
/// or different. Unknown reference bits mask the comparison.
fn mismatches(want: &Word, got: &Word) -> bool {
    let defined = !want.unknown_mask() & mask(want.width());
    let differ = (want.raw_value() ^ got.raw_value()) | got.unknown_mask();
    defined & differ != 0
}

fn mask(w: u32) -> u128 {
    if w >= 128 {
        u128::MAX
    } else {
        (1u128 << w) - 1
    }
}
