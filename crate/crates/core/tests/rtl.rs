use std::collections::BTreeMap;
use std::path::Path;

use hdlforge::rtl::ast::Trigger;
use hdlforge::rtl::*;

fn fixture(name: &str) -> SourceUnit {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures/rtl")
        .join(name);
    SourceUnit::from_file(&p).unwrap()
}

fn inputs(pairs: &[(&str, u32, u128)]) -> BTreeMap<String, Word> {
    pairs
        .iter()
        .map(|(n, w, v)| (n.to_string(), Word::new(*w, *v)))
        .collect()
}

fn golden(name: &str) -> serde_json::Value {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn counter2_elaborates_to_golden() {
    let m = parse_module(&fixture("counter2.v")).unwrap();
    assert_eq!(m.processes.len(), 1);
    assert_eq!(
        m.processes[0].trigger,
        Trigger::PosedgeSyncReset {
            clock: "clk".into(),
            reset: "rst".into()
        }
    );
    assert_eq!(
        serde_json::to_value(&m).unwrap(),
        golden("counter2.ast.json")
    );
}

#[test]
fn empty_module() {
    let m = parse_str("module m; endmodule").unwrap();
    assert_eq!(m.name, "m");
    assert!(m.ports.is_empty() && m.processes.is_empty());
}

#[test]
fn fork_is_unsupported_at_its_line() {
    let src = "module m(input clk);\n  always @(posedge clk) begin\n    fork\n    join\n  end\nendmodule\n";
    match parse_str(src) {
        Err(ParseError::Unsupported { line, construct }) => {
            assert_eq!(line, 3);
            assert!(construct.contains("fork"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn subset_rejections() {
    let cases = [
        ("module m(input a, output y);\n initial y = 0;\nendmodule", 2),
        ("module m(input clk, input rst, output reg q);\n always @(posedge clk or posedge rst) q <= 0;\nendmodule", 2),
        ("module m(input clk, output reg q);\n always @(negedge clk) q <= 0;\nendmodule", 2),
        ("module m(input a, output y);\n assign #1 y = a;\nendmodule", 2),
        ("module m(input a, output y);\n sub u(.a(a));\nendmodule", 2),
        ("module m(input [3:0] a, output [3:0] y);\n assign y = a / 2;\nendmodule", 2),
        ("module m(input [4:1] a, output y);\nendmodule", 1),
    ];
    for (src, line) in cases {
        match parse_str(src) {
            Err(ParseError::Unsupported { line: l, .. }) => assert_eq!(l, line, "{src}"),
            other => panic!("{src}: {other:?}"),
        }
    }
}

#[test]
fn elaboration_errors() {
    assert!(matches!(
        parse_str("module m(input a, output y);\n assign y = b;\nendmodule"),
        Err(ParseError::Undeclared { line: 2, .. })
    ));
    assert!(matches!(
        parse_str("module m(input clk, input a, output reg y);\n always @(posedge clk) y <= a;\n always @(posedge clk) y <= ~a;\nendmodule"),
        Err(ParseError::MultipleDrivers { .. })
    ));
    assert!(matches!(
        parse_str("module m(input a, output y);\n always @(*) y = a;\nendmodule"),
        Err(ParseError::InvalidTarget { line: 2, .. })
    ));
    assert!(matches!(
        parse_str("module m(input a, output reg y);\n always @(*) y <= a;\nendmodule"),
        Err(ParseError::Unsupported { line: 2, .. })
    ));
    assert!(matches!(
        parse_str("module m(input a, output y)\nendmodule"),
        Err(ParseError::Syntax { line: 2, .. })
    ));
}

#[test]
fn non_ansi_ports_and_parameters() {
    let src = "module m(clk, d, q);\n  parameter W = 4;\n  localparam [1:0] S1 = 2'd1;\n  input clk;\n  input [W-1:0] d;\n  output [W-1:0] q;\n  reg [W-1:0] q;\n  always @(posedge clk) q <= d + S1;\nendmodule\n";
    let m = parse_str(src).unwrap();
    assert_eq!(m.ports[1].width, 4);
    assert_eq!(m.signal("q").unwrap().width, 4);
    assert_eq!(m.params.len(), 2);
    let printed = print_module(&m);
    assert_eq!(print_module(&parse_str(&printed).unwrap()), printed);
}

#[test]
fn graph_examples() {
    let m =
        parse_str("module m(input a, input b, output y);\n assign y = a & b;\nendmodule").unwrap();
    let g = build_signal_graph(&m);
    let pairs: Vec<(&str, &str)> = g
        .edges
        .iter()
        .map(|e| (e.from.as_str(), e.to.as_str()))
        .collect();
    assert_eq!(pairs, vec![("a", "y"), ("b", "y")]);

    let m = parse_str("module m(input clk, input sel, input d, output reg q);\n always @(posedge clk)\n  if (sel) q <= d;\nendmodule").unwrap();
    let g = build_signal_graph(&m);
    let mut pairs: Vec<(&str, &str)> = g
        .edges
        .iter()
        .map(|e| (e.from.as_str(), e.to.as_str()))
        .collect();
    pairs.sort();
    assert_eq!(pairs, vec![("d", "q"), ("sel", "q")]);
}

#[test]
fn counter2_edges_match_golden() {
    let m = parse_module(&fixture("counter2.v")).unwrap();
    let g = build_signal_graph(&m);
    assert_eq!(
        serde_json::to_value(&g.edges).unwrap(),
        golden("counter2.edges.json")
    );
    assert_eq!(build_signal_graph(&m), g);
}

#[test]
fn counter2_reset_from_unknown_state() {
    let m = parse_module(&fixture("counter2.v")).unwrap();
    let st = SimState::initial(&m);
    assert!(st.values["count"].has_x());
    let st = step(&m, &st, &inputs(&[("rst", 1, 1)])).unwrap();
    assert_eq!(st.values["count"], Word::new(2, 0));
    assert_eq!(st.cycle, 1);
}

#[test]
fn counter2_counts_and_saturates() {
    let m = parse_module(&fixture("counter2.v")).unwrap();
    let mut stim = vec![inputs(&[("rst", 1, 1)])];
    stim.extend(std::iter::repeat_n(inputs(&[("rst", 1, 0)]), 4));
    let t = run(&m, &stim, &["count"]).unwrap();
    let got: Vec<u128> = t.rows.iter().map(|r| r[0].value().unwrap()).collect();
    assert_eq!(got, vec![0, 1, 2, 3, 3]);
}

#[test]
fn x_identity_and_loops() {
    let m = parse_str("module m(input a, output y);\n assign y = a;\nendmodule").unwrap();
    let mut s = BTreeMap::new();
    s.insert("a".to_string(), Word::all_x(1));
    let t = run(&m, &[s], &["y"]).unwrap();
    assert!(t.rows[0][0].has_x());

    let m = parse_str("module m(output y);\n wire a, b;\n assign a = b;\n assign b = ~a;\n assign y = a;\nendmodule").unwrap();
    let err = step(&m, &SimState::initial(&m), &BTreeMap::new()).unwrap_err();
    match err {
        SimError::CombinationalLoop { signals } => assert_eq!(signals, vec!["a", "b"]),
        other => panic!("{other:?}"),
    }
    let err = run(&m, &[BTreeMap::new()], &["y"]).unwrap_err();
    assert!(matches!(err, SimError::AtCycle { cycle: 0, .. }));
}

#[test]
fn empty_observe_and_determinism() {
    let m = parse_module(&fixture("counter2.v")).unwrap();
    let stim = vec![inputs(&[("rst", 1, 1)]), inputs(&[("rst", 1, 0)])];
    let t = run(&m, &stim, &[]).unwrap();
    assert_eq!(t.len(), 2);
    assert!(t.signals.is_empty() && t.rows.iter().all(|r| r.is_empty()));
    let a = run(&m, &stim, &["count"]).unwrap();
    let b = run(&m, &stim, &["count"]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn step_input_validation() {
    let m = parse_module(&fixture("counter2.v")).unwrap();
    let st = SimState::initial(&m);
    assert!(matches!(
        step(&m, &st, &BTreeMap::new()),
        Err(SimError::MissingInput(n)) if n == "rst"
    ));
    assert!(matches!(
        step(&m, &st, &inputs(&[("rst", 2, 1)])),
        Err(SimError::WidthMismatch { .. })
    ));
    assert!(matches!(
        step(&m, &st, &inputs(&[("rst", 1, 1), ("count", 2, 0)])),
        Err(SimError::NotAnInput(_))
    ));
}

#[test]
fn trace_json_format() {
    let m = parse_module(&fixture("counter2.v")).unwrap();
    let t = run(
        &m,
        &[inputs(&[("rst", 1, 0)]), inputs(&[("rst", 1, 1)])],
        &["rst", "count"],
    )
    .unwrap();
    assert_eq!(
        t.to_json(),
        r#"{"signals":["rst","count"],"rows":[["0","xx"],["1","00"]]}"#
    );
    assert_eq!(Trace::from_json(&t.to_json()).unwrap(), t);
}

#[test]
fn cone_examples() {
    let m = parse_str("module m(input a, output y);\n assign y = 1'b0;\nendmodule").unwrap();
    let src = SourceUnit::new("t", "");
    let g = build_signal_graph(&m);
    let c = backward_cone(&g, &src, "a", 0, 5, 30).unwrap();
    assert_eq!(c.members, vec!["a"]);
    assert!(c.slice.is_empty());
    assert!(matches!(
        backward_cone(&g, &src, "nope", 0, 5, 30),
        Err(ConeError::UnknownSignal(_))
    ));

    let text = "module m(input a, output y);\n wire b, c;\n assign b = a;\n assign c = b;\n assign y = c;\nendmodule";
    let src = SourceUnit::new("t", text);
    let m = parse_module(&src).unwrap();
    let g = build_signal_graph(&m);
    let c = backward_cone(&g, &src, "y", 3, 2, 30).unwrap();
    let mut members = c.members.clone();
    members.sort();
    assert_eq!(members, vec!["b", "c", "y"]);
    assert_eq!(c.depth_used, 2);
    assert_eq!(c.lines(), vec![5, 4, 3]);
    assert_eq!(c.slice[0].text, "assign y = c;");
}

#[test]
fn counter2_off_by_one_cone_contains_line_9() {
    let src = fixture("counter2.v");
    let text = src.text().replace("count < 2'd3", "count <= 2'd3");
    let mutant = SourceUnit::new("mutant", text);
    let m = parse_module(&mutant).unwrap();
    let g = build_signal_graph(&m);
    let c = backward_cone(&g, &mutant, "count", 4, 5, 30).unwrap();
    assert!(c.lines().contains(&9));
    assert!(c.slice.iter().any(|l| l.text.contains("count <= 2'd3")));
    // the mutant wraps instead of saturating
    let mut stim = vec![inputs(&[("rst", 1, 1)])];
    stim.extend(std::iter::repeat_n(inputs(&[("rst", 1, 0)]), 4));
    let t = run(&m, &stim, &["count"]).unwrap();
    assert_eq!(t.rows[4][0], Word::new(2, 0));
}

#[test]
fn cone_slice_is_bounded() {
    let src = fixture("edge_detect.v");
    let m = parse_module(&src).unwrap();
    let g = build_signal_graph(&m);
    for l_max in 0..6 {
        let c = backward_cone(&g, &src, "rise", 0, 5, l_max).unwrap();
        assert!(c.slice.len() <= l_max);
    }
}

#[test]
fn x_selector_takes_default_arm() {
    let src = "module m(input [1:0] s, output reg [1:0] y);\n always @(*)\n  case (s)\n   2'd0: y = 2'd1;\n   2'd1: y = 2'd2;\n   default: y = 2'd3;\n  endcase\nendmodule";
    let m = parse_str(src).unwrap();
    let mut x = BTreeMap::new();
    x.insert("s".to_string(), Word::from_bit_string("x0").unwrap());
    let t = run(&m, &[x, inputs(&[("s", 2, 1)])], &["y"]).unwrap();
    assert_eq!(t.rows[0][0], Word::new(2, 3));
    assert_eq!(t.rows[1][0], Word::new(2, 2));
}

#[test]
fn unknown_condition_merges_branches() {
    let src = "module m(input c, output reg [1:0] y);\n always @(*)\n  if (c) y = 2'b10; else y = 2'b11;\nendmodule";
    let m = parse_str(src).unwrap();
    let mut x = BTreeMap::new();
    x.insert("c".to_string(), Word::all_x(1));
    let t = run(&m, &[x], &["y"]).unwrap();
    assert_eq!(t.rows[0][0].to_bit_string(), "1x");
}

#[test]
fn blocking_in_clocked_is_flagged() {
    let src = "module m(input clk, input d, output reg q);\n reg t;\n always @(posedge clk) begin\n  t = d;\n  q <= t;\n end\nendmodule";
    let m = parse_str(src).unwrap();
    assert_eq!(m.processes[0].blocking_in_clocked, vec![4]);
    // t is visible immediately, so q follows d in the same cycle
    let t = run(&m, &[inputs(&[("d", 1, 1)])], &["q"]).unwrap();
    assert_eq!(t.rows[0][0], Word::new(1, 1));
}

#[test]
fn width_reconciliation() {
    let src = "module m(input [3:0] a, input [3:0] b, output [4:0] s, output [1:0] t, output c);\n assign s = a + b;\n assign t = a + b;\n assign c = (a + b) > 4'd15;\nendmodule";
    let m = parse_str(src).unwrap();
    let t = run(
        &m,
        &[inputs(&[("a", 4, 15), ("b", 4, 3)])],
        &["s", "t", "c"],
    )
    .unwrap();
    assert_eq!(t.rows[0][0], Word::new(5, 18));
    assert_eq!(t.rows[0][1], Word::new(2, 2));
    // the comparison is evaluated at operand width: the carry is lost
    assert_eq!(t.rows[0][2], Word::new(1, 0));
}
