//! Canonical Verilog printer. Expressions are fully parenthesized so that
//! printing a re-parsed module reproduces the same text.

use std::fmt::Write;

use super::ast::*;

pub fn print_module(m: &RtlModule) -> String {
    let mut out = String::new();
    let local: Vec<&Param> = m.params.iter().filter(|p| p.local).collect();
    let header: Vec<&Param> = m.params.iter().filter(|p| !p.local).collect();
    write!(out, "module {}", m.name).unwrap();
    if !header.is_empty() {
        out.push_str(" #(\n");
        let items: Vec<String> = header
            .iter()
            .map(|p| format!("  parameter {}", param(p)))
            .collect();
        out.push_str(&items.join(",\n"));
        out.push_str("\n)");
    }
    if m.ports.is_empty() {
        out.push_str(";\n");
    } else {
        out.push_str(" (\n");
        let items: Vec<String> = m.ports.iter().map(|p| format!("  {}", port(p))).collect();
        out.push_str(&items.join(",\n"));
        out.push_str("\n);\n");
    }
    for p in local {
        writeln!(out, "  localparam {};", param(p)).unwrap();
    }
    for n in &m.nets {
        writeln!(out, "  {}{} {};", kind(n.kind), range(n.width), n.name).unwrap();
    }
    for a in &m.assigns {
        writeln!(out, "  assign {} = {};", lvalue(&a.lhs), expr(&a.rhs)).unwrap();
    }
    for p in &m.processes {
        match &p.trigger {
            Trigger::Combinational => out.push_str("  always @(*)"),
            Trigger::Posedge { clock } | Trigger::PosedgeSyncReset { clock, .. } => {
                write!(out, "  always @(posedge {clock})").unwrap()
            }
        }
        out.push('\n');
        stmt(&mut out, &p.body, 2);
    }
    out.push_str("endmodule\n");
    out
}

fn param(p: &Param) -> String {
    let w = p.value.width();
    format!(
        "[{}:0] {} = {w}'d{}",
        w - 1,
        p.name,
        p.value.value().unwrap_or(0)
    )
}

fn kind(k: NetKind) -> &'static str {
    match k {
        NetKind::Wire => "wire",
        NetKind::Reg => "reg",
        NetKind::Logic => "logic",
    }
}

fn range(width: u32) -> String {
    if width == 1 {
        String::new()
    } else {
        format!(" [{}:0]", width - 1)
    }
}

fn port(p: &Port) -> String {
    let dir = match p.direction {
        Direction::Input => "input",
        Direction::Output => "output",
        Direction::Inout => "inout",
    };
    format!("{dir} {}{} {}", kind(p.kind), range(p.width), p.name)
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn stmt(out: &mut String, s: &Stmt, level: usize) {
    indent(out, level);
    match s {
        Stmt::Null { .. } => out.push_str(";\n"),
        Stmt::Block { stmts, .. } => {
            out.push_str("begin\n");
            for s in stmts {
                stmt(out, s, level + 1);
            }
            indent(out, level);
            out.push_str("end\n");
        }
        Stmt::If {
            cond,
            then_branch,
            else_branch,
            ..
        } => {
            writeln!(out, "if ({})", expr(cond)).unwrap();
            branch(out, then_branch, level);
            if let Some(e) = else_branch {
                indent(out, level);
                out.push_str("else\n");
                branch(out, e, level);
            }
        }
        Stmt::Case {
            kind,
            selector,
            arms,
            default,
            ..
        } => {
            let kw = match kind {
                CaseKind::Case => "case",
                CaseKind::Casez => "casez",
            };
            writeln!(out, "{kw} ({})", expr(selector)).unwrap();
            for a in arms {
                indent(out, level + 1);
                let labels: Vec<String> = a.labels.iter().map(expr).collect();
                writeln!(out, "{}:", labels.join(", ")).unwrap();
                stmt(out, &a.body, level + 2);
            }
            if let Some(d) = default {
                indent(out, level + 1);
                out.push_str("default:\n");
                stmt(out, d, level + 2);
            }
            indent(out, level);
            out.push_str("endcase\n");
        }
        Stmt::Assign { kind, lhs, rhs, .. } => {
            let op = match kind {
                AssignKind::Blocking => "=",
                AssignKind::NonBlocking => "<=",
            };
            writeln!(out, "{} {op} {};", lvalue(lhs), expr(rhs)).unwrap();
        }
    }
}

/// Branches are always wrapped in `begin`/`end` so a nested `if` cannot
/// capture a following `else`.
fn branch(out: &mut String, s: &Stmt, level: usize) {
    match s {
        Stmt::Block { .. } => stmt(out, s, level + 1),
        other => {
            indent(out, level + 1);
            out.push_str("begin\n");
            stmt(out, other, level + 2);
            indent(out, level + 1);
            out.push_str("end\n");
        }
    }
}

pub fn lvalue(lv: &LValue) -> String {
    match lv {
        LValue::Whole { name } => name.clone(),
        LValue::Bit { name, index } => format!("{name}[{}]", expr(index)),
        LValue::Part { name, msb, lsb } => format!("{name}[{msb}:{lsb}]"),
        LValue::Concat { parts } => {
            let ps: Vec<String> = parts.iter().map(lvalue).collect();
            format!("{{{}}}", ps.join(", "))
        }
    }
}

pub fn expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Signal { name } | ExprKind::Const { name, .. } => name.clone(),
        ExprKind::Literal { literal } => literal.text.clone(),
        ExprKind::Unary { op, operand } => format!("({}{})", op.symbol(), expr(operand)),
        ExprKind::Binary { op, lhs, rhs, .. } => {
            format!("({} {} {})", expr(lhs), op.symbol(), expr(rhs))
        }
        ExprKind::Ternary {
            cond,
            then_expr,
            else_expr,
        } => format!(
            "({} ? {} : {})",
            expr(cond),
            expr(then_expr),
            expr(else_expr)
        ),
        ExprKind::Concat { items } => {
            let is: Vec<String> = items.iter().map(expr).collect();
            format!("{{{}}}", is.join(", "))
        }
        ExprKind::Replicate { count, items } => {
            let is: Vec<String> = items.iter().map(expr).collect();
            format!("{{{count}{{{}}}}}", is.join(", "))
        }
        ExprKind::Index { name, index } => format!("{name}[{}]", expr(index)),
        ExprKind::Slice { name, msb, lsb } => format!("{name}[{msb}:{lsb}]"),
    }
}
