//! Property tests over randomly generated modules inside the subset.

use std::collections::BTreeMap;

use hdlforge::rtl::*;
use proptest::prelude::*;

const INPUTS: &[(&str, u32)] = &[("rst", 1), ("a", 4), ("b", 4), ("s", 1)];

fn leaf(signals: Vec<&'static str>) -> BoxedStrategy<String> {
    prop_oneof![
        3 => proptest::sample::select(signals).prop_map(String::from),
        1 => (0u8..16).prop_map(|v| format!("4'd{v}")),
        1 => proptest::sample::select(vec!["1'b0", "1'b1", "2'b1x"]).prop_map(String::from),
        1 => (0u32..4).prop_map(|i| format!("a[{i}]")),
        1 => Just("b[2:1]".to_string()),
    ]
    .boxed()
}

fn expr(signals: Vec<&'static str>) -> BoxedStrategy<String> {
    leaf(signals)
        .prop_recursive(3, 24, 3, |inner| {
            let bin = proptest::sample::select(vec![
                "+", "-", "*", "&", "|", "^", "&&", "||", "==", "!=", "<", "<=", ">", ">=", "<<",
                ">>",
            ]);
            let un = proptest::sample::select(vec!["~", "!", "-", "&", "|", "^"]);
            prop_oneof![
                (inner.clone(), bin, inner.clone()).prop_map(|(l, o, r)| format!("({l} {o} {r})")),
                (un, inner.clone()).prop_map(|(o, e)| format!("({o}{e})")),
                (inner.clone(), inner.clone(), inner.clone())
                    .prop_map(|(c, t, f)| format!("({c} ? {t} : {f})")),
                (inner.clone(), inner).prop_map(|(x, y)| format!("{{{x}, {y}}}")),
            ]
        })
        .boxed()
}

/// A generated module: every assigning statement sits on its own line so a
/// single-line mutation can be expressed by line number.
#[derive(Debug, Clone)]
struct Gen {
    lines: Vec<String>,
    /// line number (1-based) → (assigned signal, rhs text)
    assigns: BTreeMap<usize, (String, String)>,
    /// Line numbers of the two else-branch assignments that may be swapped.
    swap: (usize, usize),
}

impl Gen {
    fn text(&self) -> String {
        self.lines.join("\n") + "\n"
    }

    fn with_line(&self, line: usize, text: String) -> String {
        let mut l = self.lines.clone();
        l[line - 1] = text;
        l.join("\n") + "\n"
    }

    fn swapped(&self) -> String {
        let mut l = self.lines.clone();
        l.swap(self.swap.0 - 1, self.swap.1 - 1);
        l.join("\n") + "\n"
    }
}

fn module_strategy() -> impl Strategy<Value = Gen> {
    let base = vec!["a", "b", "s", "r0", "r1"];
    (
        expr(base.clone()),
        expr([base.clone(), vec!["w0"]].concat()),
        expr([base.clone(), vec!["w0", "w1"]].concat()),
        expr([base.clone(), vec!["w0", "w1"]].concat()),
        expr([base.clone(), vec!["w1"]].concat()),
        expr([base, vec!["w2"]].concat()),
    )
        .prop_map(|(e0, e1, e2, ey, er0, er1)| {
            let mut lines = vec![
                "module g(".to_string(),
                "  input clk, input rst, input [3:0] a, input [3:0] b, input s,".to_string(),
                "  output [3:0] y".to_string(),
                ");".to_string(),
                "  wire [3:0] w0, w1, w2;".to_string(),
                "  reg [3:0] r0, r1;".to_string(),
            ];
            let mut assigns = BTreeMap::new();
            for (i, e) in [e0, e1, e2].into_iter().enumerate() {
                lines.push(format!("  assign w{i} = {e};"));
                assigns.insert(lines.len(), (format!("w{i}"), e));
            }
            lines.push(format!("  assign y = {ey};"));
            assigns.insert(lines.len(), ("y".into(), ey));
            lines.push("  always @(posedge clk)".into());
            lines.push("    if (rst) begin".into());
            lines.push("      r0 <= 4'd0;".into());
            assigns.insert(lines.len(), ("r0".into(), "4'd0".into()));
            lines.push("      r1 <= 4'd0;".into());
            assigns.insert(lines.len(), ("r1".into(), "4'd0".into()));
            lines.push("    end else begin".into());
            lines.push(format!("      r0 <= {er0};"));
            let first = lines.len();
            assigns.insert(first, ("r0".into(), er0));
            lines.push(format!("      if (s) r1 <= {er1};"));
            let second = lines.len();
            assigns.insert(second, ("r1".into(), er1));
            lines.push("    end".into());
            lines.push("endmodule".into());
            Gen {
                lines,
                assigns,
                swap: (first, second),
            }
        })
}

fn word(width: u32) -> impl Strategy<Value = Word> {
    (
        any::<u128>(),
        prop_oneof![3 => Just(0u128), 1 => any::<u128>()],
    )
        .prop_map(move |(v, x)| Word::from_parts(width, v, x))
}

fn defined_word(width: u32) -> impl Strategy<Value = Word> {
    any::<u128>().prop_map(move |v| Word::new(width, v))
}

fn stimulus(x: bool) -> impl Strategy<Value = Vec<BTreeMap<String, Word>>> {
    let row = INPUTS
        .iter()
        .map(|(n, w)| {
            let s = if x && *n != "rst" {
                word(*w).boxed()
            } else {
                defined_word(*w).boxed()
            };
            s.prop_map(move |v| (n.to_string(), v))
        })
        .collect::<Vec<_>>();
    proptest::collection::vec(row, 1..10).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, r)| {
                let mut m: BTreeMap<String, Word> = r.into_iter().collect();
                if i == 0 {
                    m.insert("rst".into(), Word::new(1, 1));
                }
                m
            })
            .collect()
    })
}

const OBSERVE: &[&str] = &["y", "r0", "r1", "w0", "w1", "w2"];

/// Replaces each unknown bit with a pseudo-random known bit.
fn refine(w: &Word, seed: u128) -> Word {
    let x = w.unknown_mask();
    Word::from_parts(w.width(), w.raw_value() | (seed & x), 0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn print_parse_is_a_fixpoint(g in module_strategy()) {
        let m = parse_str(&g.text()).unwrap();
        let once = print_module(&m);
        let again = print_module(&parse_str(&once).unwrap());
        prop_assert_eq!(once, again);
    }

    #[test]
    fn run_is_deterministic(g in module_strategy(), stim in stimulus(true)) {
        let m = parse_str(&g.text()).unwrap();
        let a = run(&m, &stim, OBSERVE).unwrap();
        let b = run(&m, &stim, OBSERVE).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn nonblocking_order_is_irrelevant(g in module_strategy(), stim in stimulus(true)) {
        let m = parse_str(&g.text()).unwrap();
        let s = parse_str(&g.swapped()).unwrap();
        prop_assert_eq!(run(&m, &stim, OBSERVE).unwrap(), run(&s, &stim, OBSERVE).unwrap());
    }

    #[test]
    fn x_refinement_never_loses_defined_bits(
        g in module_strategy(),
        stim in stimulus(true),
        seed in any::<u128>(),
    ) {
        let m = parse_str(&g.text()).unwrap();
        let refined: Vec<BTreeMap<String, Word>> = stim
            .iter()
            .map(|r| r.iter().map(|(k, v)| (k.clone(), refine(v, seed))).collect())
            .collect();
        let coarse = run(&m, &stim, OBSERVE).unwrap();
        let fine = run(&m, &refined, OBSERVE).unwrap();
        for (rc, rf) in coarse.rows.iter().zip(&fine.rows) {
            for (c, f) in rc.iter().zip(rf) {
                let known = !c.unknown_mask() & ((1u128 << c.width()) - 1);
                prop_assert_eq!(f.unknown_mask() & known, 0);
                prop_assert_eq!(f.raw_value() & known, c.raw_value() & known);
            }
        }
    }

    #[test]
    fn cone_is_sound_for_single_line_mutations(
        g in module_strategy(),
        stim in stimulus(false),
        pick in any::<proptest::sample::Index>(),
    ) {
        let text = g.text();
        let m = parse_str(&text).unwrap();
        let lines: Vec<usize> = g.assigns.keys().copied().collect();
        let line = lines[pick.index(lines.len())];
        let (target, rhs) = &g.assigns[&line];
        let old = &g.lines[line - 1];
        let at = old.rfind(rhs.as_str()).unwrap();
        let mutated = g.with_line(line, format!("{}(~({rhs})){}", &old[..at], &old[at + rhs.len()..]));
        let mm = parse_str(&mutated).unwrap();
        let a = run(&m, &stim, OBSERVE).unwrap();
        let b = run(&mm, &stim, OBSERVE).unwrap();
        let graph = build_signal_graph(&m);
        let src = SourceUnit::new("g", text);
        let d = graph.nodes.len();
        for (col, y) in OBSERVE.iter().enumerate() {
            let changed = a.rows.iter().zip(&b.rows).any(|(ra, rb)| ra[col] != rb[col]);
            if changed {
                let cone = backward_cone(&graph, &src, y, 0, d, 1000).unwrap();
                prop_assert!(cone.contains(target), "{} not in cone of {}", target, y);
            }
        }
    }

    #[test]
    fn cone_slice_respects_l_max(g in module_strategy(), l_max in 0usize..8, d_max in 1usize..6) {
        let text = g.text();
        let m = parse_str(&text).unwrap();
        let graph = build_signal_graph(&m);
        let src = SourceUnit::new("g", text);
        for y in OBSERVE {
            let c = backward_cone(&graph, &src, y, 0, d_max, l_max).unwrap();
            prop_assert!(c.slice.len() <= l_max);
            prop_assert!(c.contains(y));
            prop_assert!(c.depth_used <= d_max);
            for l in &c.slice {
                let edge = graph.edges.iter().any(|e| e.line == l.line && c.contains(&e.to));
                let driver = graph.drivers.iter().any(|(t, line)| *line == l.line && c.contains(t));
                prop_assert!(edge || driver);
            }
        }
    }

    #[test]
    fn graph_is_deterministic(g in module_strategy()) {
        let m = parse_str(&g.text()).unwrap();
        let a = build_signal_graph(&m);
        prop_assert_eq!(&a, &build_signal_graph(&m));
        for e in &a.edges {
            prop_assert!(a.contains(&e.from) && a.contains(&e.to));
        }
    }
}
