//! Structural property mining, bounded checking over the interpreter, and
//! synthesis of micro-tests from counterexamples.

mod bmc;
mod properties;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use bmc::{
    bounded_check, CheckOutcome, Counterexample, SearchMode, DEFAULT_SEED, EXHAUSTIVE_BITS,
    SAMPLED_SEQUENCES,
};
pub use properties::{
    mine_properties, parse_user_assertions, Condition, Property, PropertyClass, Rows, SidecarError,
    UserAssertion,
};

use crate::microtests::{Check, MicroTest, MicroTestStore, Provenance};
use crate::rtl::{RtlModule, SourceUnit, Word};
use crate::tools::{expand_argv, run_external, ExitKind, Job, ToolMode, ToolResult, ToolsConfig};

pub const DEFAULT_DEPTH: usize = 10;

/// Replays the counterexample prefix and asserts the violated property at the
/// violating cycle.
pub fn synth_microtest(ce: &Counterexample, prop: &Property) -> MicroTest {
    let width = ce
        .trace
        .get(ce.violating_cycle, &prop.subject)
        .map_or(1, |w| w.width());
    MicroTest::new(
        ce.stimulus[..=ce.violating_cycle].to_vec(),
        vec![Check {
            cycle: ce.violating_cycle,
            signal: prop.subject.clone(),
            predicate: prop.predicate(width),
        }],
        Provenance::FormalCounterexample,
        Some(prop.id.clone()),
        format!("counterexample for {}: {}", prop.id, prop.description),
    )
}

#[derive(Debug, thiserror::Error)]
pub enum FormalError {
    #[error("formal tool failed ({kind:?}): {output}")]
    Tool { kind: ExitKind, output: String },
    #[error("formal tool output: {0}")]
    Output(String),
}

/// Counterexample as written by an external checker: the stimulus is
/// re-simulated here, so only inputs are needed.
#[derive(Debug, Clone, Deserialize)]
struct ExternalCe {
    property_id: String,
    stimulus: Vec<BTreeMap<String, Word>>,
}

/// Runs the configured checker (`cfg.formal`) or the built-in search. An
/// external checker prints nothing on success, or one JSON object
/// `{"property_id", "stimulus"}` describing a violation.
pub fn check_with_tools(
    m: &RtlModule,
    src: &SourceUnit,
    props: &[Property],
    d: usize,
    seed: u64,
    cfg: &ToolsConfig,
    job: &Job,
) -> Result<(CheckOutcome, Option<ToolResult>), FormalError> {
    if cfg.formal.mode == ToolMode::External {
        let tool = match job.prepare(cfg, src.text(), None) {
            Ok(ws) => run_external(
                &expand_argv(&cfg.formal.argv, &ws.src, &ws.tb, &ws.out),
                &ws.dir,
                cfg.formal.timeout_s,
            ),
            Err(e) => return Err(FormalError::Output(e.to_string())),
        };
        if !(tool.exit_kind == ExitKind::NotInstalled && cfg.fallback_to_builtin) {
            if tool.exit_kind != ExitKind::Success && tool.exit_kind != ExitKind::ToolError {
                return Err(FormalError::Tool {
                    kind: tool.exit_kind,
                    output: tool.stdout_digest.clone(),
                });
            }
            let ce = parse_external(m, props, &tool.stdout_digest)?;
            let outcome = CheckOutcome {
                mode: SearchMode::Exhaustive,
                explored: 0,
                counterexample: ce,
            };
            return Ok((outcome, Some(tool)));
        }
    }
    Ok((bounded_check(m, props, d, seed), None))
}

fn parse_external(
    m: &RtlModule,
    props: &[Property],
    out: &str,
) -> Result<Option<Counterexample>, FormalError> {
    let Some(line) = out.lines().map(str::trim).find(|l| l.starts_with('{')) else {
        return Ok(None);
    };
    let ext: ExternalCe =
        serde_json::from_str(line).map_err(|e| FormalError::Output(e.to_string()))?;
    let prop = props
        .iter()
        .find(|p| p.id == ext.property_id)
        .ok_or_else(|| FormalError::Output(format!("unknown property `{}`", ext.property_id)))?;
    let names: Vec<&str> = m.signal_names();
    let stim: Vec<BTreeMap<String, Word>> = ext
        .stimulus
        .iter()
        .map(|f| {
            f.iter()
                .filter_map(|(k, v)| m.signal(k).map(|s| (k.clone(), v.resize(s.width))))
                .collect()
        })
        .collect();
    let trace =
        crate::rtl::run(m, &stim, &names).map_err(|e| FormalError::Output(e.to_string()))?;
    let t = (0..trace.len())
        .find(|&t| !prop.holds_on(&trace, t))
        .ok_or_else(|| FormalError::Output("counterexample does not reproduce".into()))?;
    Ok(Some(Counterexample {
        property_id: prop.id.clone(),
        stimulus: stim[..=t].to_vec(),
        trace: crate::rtl::Trace {
            signals: trace.signals.clone(),
            rows: trace.rows[..=t].to_vec(),
        },
        violating_cycle: t,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplifyOutcome {
    pub properties: usize,
    pub check: CheckOutcome,
    /// Id of the synthesized test; `None` when no violation was found.
    pub test_id: Option<String>,
    /// False when the synthesized test was already stored.
    pub inserted: bool,
}

/// Mine, check, and on the first violation insert its micro-test.
pub fn amplify(
    m: &RtlModule,
    header: Option<&RtlModule>,
    user: &[UserAssertion],
    store: &mut MicroTestStore,
    d: usize,
    seed: u64,
) -> AmplifyOutcome {
    let props = mine_properties(m, header, user);
    let check = bounded_check(m, &props, d, seed);
    finish_amplify(props.len(), check, &props, store)
}

pub(crate) fn finish_amplify(
    properties: usize,
    check: CheckOutcome,
    props: &[Property],
    store: &mut MicroTestStore,
) -> AmplifyOutcome {
    let mut test_id = None;
    let mut inserted = false;
    if let Some(ce) = &check.counterexample {
        if let Some(p) = props.iter().find(|p| p.id == ce.property_id) {
            let t = synth_microtest(ce, p);
            test_id = Some(t.id.clone());
            inserted = store.insert(t);
        }
    }
    AmplifyOutcome {
        properties,
        check,
        test_id,
        inserted,
    }
}

/// [`amplify`] through the configured tools.
#[allow(clippy::too_many_arguments)]
pub fn amplify_with_tools(
    m: &RtlModule,
    src: &SourceUnit,
    header: Option<&RtlModule>,
    user: &[UserAssertion],
    store: &mut MicroTestStore,
    d: usize,
    seed: u64,
    cfg: &ToolsConfig,
    job: &Job,
) -> Result<AmplifyOutcome, FormalError> {
    let props = mine_properties(m, header, user);
    let (check, _) = check_with_tools(m, src, &props, d, seed, cfg, job)?;
    Ok(finish_amplify(props.len(), check, &props, store))
}
