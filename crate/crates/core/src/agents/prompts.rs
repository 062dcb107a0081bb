//! Prompt builders and response parsers. Planner replies carry `PLAN:` and
//! `INVARIANTS:` sections; coder replies carry one fenced code block.

use serde::{Deserialize, Serialize};

use super::task::TaskBundle;
use crate::rtl::{SuspectCone, Trace};

pub const SLICE_HEADING: &str = "SUSPECT SLICE:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub id: usize,
    pub strategy: String,
    pub invariants: Vec<String>,
    pub temperature: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResponseError {
    #[error("planner response lacks a {0} section")]
    MalformedPlanResponse(&'static str),
    #[error("no module ... endmodule block in response")]
    NoModuleInResponse,
}

pub fn planner_prompt(task: &TaskBundle, plan_index: usize, n: usize) -> String {
    format!(
        "You are planning a Verilog implementation ({} of {n}).\n\
         Reply with a `PLAN:` section describing the strategy and an \
         `INVARIANTS:` section listing one invariant per line.\n\n\
         SPEC:\n{}\n\nHEADER:\n{}\n",
        plan_index + 1,
        task.spec.trim(),
        task.header.text().trim()
    )
}

pub fn parse_plan(text: &str) -> Result<(String, Vec<String>), ResponseError> {
    let p = text
        .find("PLAN:")
        .ok_or(ResponseError::MalformedPlanResponse("PLAN:"))?;
    let i = text
        .find("INVARIANTS:")
        .ok_or(ResponseError::MalformedPlanResponse("INVARIANTS:"))?;
    let (strategy, inv) = if p < i {
        (&text[p + 5..i], &text[i + 11..])
    } else {
        (&text[p + 5..], &text[i + 11..p])
    };
    let invariants = inv
        .lines()
        .map(|l| l.trim().trim_start_matches(['-', '*']).trim())
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    Ok((strategy.trim().to_string(), invariants))
}

pub fn coder_prompt(
    task: &TaskBundle,
    plan: &Plan,
    feedback: Option<&str>,
    candidate: usize,
) -> String {
    let mut s = format!(
        "Implement the module below in synthesizable Verilog. Keep the header's \
         port list unchanged and reply with a single fenced code block.\n\n\
         SPEC:\n{}\n\nHEADER:\n{}\n\nPLAN {}:\n{}\n",
        task.spec.trim(),
        task.header.text().trim(),
        plan.id,
        plan.strategy
    );
    push_invariants(&mut s, &plan.invariants);
    if let Some(f) = feedback {
        s.push_str("\nFEEDBACK FROM THE PREVIOUS ATTEMPT:\n");
        s.push_str(f.trim_end());
        s.push('\n');
    }
    s.push_str(&format!("\nCANDIDATE: {candidate}\n"));
    s
}

fn push_invariants(s: &mut String, inv: &[String]) {
    if !inv.is_empty() {
        s.push_str("\nINVARIANTS:\n");
        for i in inv {
            s.push_str("- ");
            s.push_str(i);
            s.push('\n');
        }
    }
}

/// Slice lines as `<line>| <text>`.
pub fn format_slice(cone: &SuspectCone) -> String {
    let mut s = format!(
        "{SLICE_HEADING} signal `{}` at cycle {}, depth {}\n",
        cone.signal, cone.fail_cycle, cone.depth_used
    );
    for l in &cone.slice {
        s.push_str(&format!("{:>4}| {}\n", l.line, l.text));
    }
    s
}

/// Line numbers listed in the slice section of a prompt.
pub fn slice_lines(prompt: &str) -> Vec<usize> {
    let Some(start) = prompt.find(SLICE_HEADING) else {
        return Vec::new();
    };
    prompt[start..]
        .lines()
        .skip(1)
        .map_while(|l| {
            let (n, _) = l.split_once('|')?;
            n.trim().parse().ok()
        })
        .collect()
}

pub fn format_window(w: &Trace, start: usize) -> String {
    let mut s = format!("cycle {}\n", w.signals.join(" "));
    for (i, row) in w.rows.iter().enumerate() {
        let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&format!("{:>5} {}\n", start + i, vals.join(" ")));
    }
    s
}

pub struct RepairContext<'a> {
    pub candidate: &'a str,
    pub failure: &'a str,
    pub window: Option<String>,
    pub slice: Option<String>,
}

pub fn reflexion_prompt(task: &TaskBundle, plan: &Plan, ctx: &RepairContext<'_>) -> String {
    let mut s = format!(
        "The candidate below fails verification. Propose a targeted fix inside \
         the suspect region and reply with the full corrected module in one \
         fenced code block. Do not change the port list.\n\n\
         SPEC:\n{}\n\nFAILURE:\n{}\n",
        task.spec.trim(),
        ctx.failure
    );
    if let Some(w) = &ctx.window {
        s.push_str("\nWAVEFORM:\n");
        s.push_str(w);
    }
    if let Some(sl) = &ctx.slice {
        s.push('\n');
        s.push_str(sl);
    }
    push_invariants(&mut s, &plan.invariants);
    s.push_str("\nCANDIDATE:\n```verilog\n");
    s.push_str(ctx.candidate.trim_end());
    s.push_str("\n```\n");
    s
}

pub fn stage_b_prompt(
    task: &TaskBundle,
    failures: &[String],
    last_slice: Option<&str>,
    microtests: &[String],
) -> String {
    let mut s = format!(
        "Earlier attempts at this module failed. Write a complete, correct \
         implementation in one fenced code block.\n\n\
         SPEC:\n{}\n\nHEADER:\n{}\n\nFAILURES:\n",
        task.spec.trim(),
        task.header.text().trim()
    );
    for f in failures {
        s.push_str("- ");
        s.push_str(f);
        s.push('\n');
    }
    if let Some(sl) = last_slice {
        s.push('\n');
        s.push_str(sl);
    }
    if !microtests.is_empty() {
        s.push_str("\nMICRO-TESTS:\n");
        for m in microtests {
            s.push_str("- ");
            s.push_str(m);
            s.push('\n');
        }
    }
    s
}

/// Lines of the `FAILURES:` section of a Stage-B prompt.
pub fn failure_lines(prompt: &str) -> Vec<&str> {
    let Some(start) = prompt.find("\nFAILURES:\n") else {
        return Vec::new();
    };
    prompt[start + 11..]
        .lines()
        .map_while(|l| l.strip_prefix("- "))
        .collect()
}

/// The first `module ... endmodule` inside the first fenced block, or in the
/// whole reply when there is no fence.
pub fn extract_module(text: &str) -> Result<String, ResponseError> {
    let body = fenced_block(text).unwrap_or(text);
    find_module(body)
        .or_else(|| find_module(text))
        .ok_or(ResponseError::NoModuleInResponse)
}

fn fenced_block(text: &str) -> Option<&str> {
    let open = text.find("```")?;
    let after = &text[open + 3..];
    let body_start = after.find('\n')? + 1;
    let body = &after[body_start..];
    let close = body.find("```")?;
    Some(&body[..close])
}

fn find_module(text: &str) -> Option<String> {
    let start = word_at(text, "module", 0)?;
    let end = word_at(text, "endmodule", start)?;
    let mut out = text[start..end + "endmodule".len()].to_string();
    out.push('\n');
    Some(out)
}

/// Byte offset of `kw` as a whole word at or after `from`.
fn word_at(text: &str, kw: &str, from: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let ident = |b: u8| b.is_ascii_alphanumeric() || b == b'_' || b == b'$';
    let mut i = from;
    while let Some(off) = text[i..].find(kw) {
        let s = i + off;
        let e = s + kw.len();
        let before = s == 0 || !ident(bytes[s - 1]);
        let after = e >= bytes.len() || !ident(bytes[e]);
        if before && after {
            return Some(s);
        }
        i = s + 1;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_sections() {
        let (s, inv) =
            parse_plan("PLAN:\nuse a counter\nINVARIANTS:\n- count <= 3\n- resets to 0\n").unwrap();
        assert_eq!(s, "use a counter");
        assert_eq!(inv, ["count <= 3", "resets to 0"]);
        assert_eq!(
            parse_plan("PLAN: x"),
            Err(ResponseError::MalformedPlanResponse("INVARIANTS:"))
        );
    }

    #[test]
    fn module_extraction() {
        let reply = "Sure! Here it is:\n```verilog\nmodule a(input x);\nendmodule\n```\nThe module a is simple.";
        assert_eq!(
            extract_module(reply).unwrap(),
            "module a(input x);\nendmodule\n"
        );
        let bare = "// note\nmodule b; endmodule trailing";
        assert_eq!(extract_module(bare).unwrap(), "module b; endmodule\n");
        assert_eq!(
            extract_module("no code"),
            Err(ResponseError::NoModuleInResponse)
        );
        assert_eq!(
            extract_module("submodule x endmodule"),
            Err(ResponseError::NoModuleInResponse)
        );
    }

    #[test]
    fn slice_round_trip() {
        let prompt = format!("x\n{SLICE_HEADING} signal `q` at cycle 3, depth 2\n   7| a <= b;\n  12| b <= c;\n\nINVARIANTS:\n");
        assert_eq!(slice_lines(&prompt), [7, 12]);
        assert!(slice_lines("nothing").is_empty());
    }
}
