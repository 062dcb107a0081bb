use std::path::PathBuf;

use hdlforge::bench::{build_corpus, BugClass, GoldenTask};
use hdlforge::rtl::{backward_cone, build_signal_graph, parse_module, SourceUnit};
use hdlforge::tools::run_testbench;

fn tasks_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/tasks")
}

#[test]
fn every_golden_passes_its_testbench() {
    let tasks = GoldenTask::load_all(&tasks_dir()).unwrap();
    assert!(tasks.len() >= 10);
    for t in &tasks {
        let m = parse_module(&SourceUnit::new("g.v", t.golden.as_str())).unwrap();
        let r = run_testbench(&m, &t.task.testbench, 8, None);
        assert!(r.passed, "{}: {r:?}", t.task.id);
        assert!(r.checked_cycles > 5, "{}", t.task.id);
        assert_eq!(
            m.port_signature(),
            t.task.header_module.port_signature(),
            "{}",
            t.task.id
        );
    }
}

#[test]
fn corpus_has_five_mutants_per_class() {
    let tasks = GoldenTask::load_all(&tasks_dir()).unwrap();
    let corpus = build_corpus(&tasks, 5).unwrap();
    for c in BugClass::ALL {
        assert_eq!(
            corpus.iter().filter(|i| i.mutant.spec.class == c).count(),
            5,
            "{c}"
        );
    }
    for i in &corpus {
        let golden: Vec<&str> = i.golden.lines().collect();
        let mutant: Vec<&str> = i.mutant.source.text().lines().collect();
        assert_eq!(golden.len(), mutant.len(), "{}", i.id);
        let diff: Vec<usize> = (0..golden.len())
            .filter(|&k| golden[k] != mutant[k])
            .collect();
        assert_eq!(diff, vec![i.mutant.spec.line - 1], "{}", i.id);
    }
}

#[test]
fn failing_mutants_localize_to_their_target() {
    let tasks = GoldenTask::load_all(&tasks_dir()).unwrap();
    let corpus = build_corpus(&tasks, 5).unwrap();
    for i in &corpus {
        let m = parse_module(&i.mutant.source).unwrap();
        let r = run_testbench(&m, &i.task.testbench, 8, None);
        let Some(y) = r.fail_signal.as_ref() else {
            continue;
        };
        let c = backward_cone(
            &build_signal_graph(&m),
            &i.mutant.source,
            y,
            r.fail_cycle.unwrap(),
            5,
            30,
        )
        .unwrap();
        assert!(
            c.contains(&i.mutant.target),
            "{}: {} not in cone of {y}",
            i.id,
            i.mutant.target
        );
    }
}
