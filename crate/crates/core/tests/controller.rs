mod common;

use common::oracles::*;
use hdlforge::bench::{latency_stats, nearest_rank, pass_at_k};
use hdlforge::controller::*;
use hdlforge::diagnostics::*;
use proptest::prelude::*;

fn unit() -> impl Strategy<Value = f64> {
    0.0f64..=1.0
}

fn vector() -> impl Strategy<Value = DiagnosticVector> {
    [unit(), unit(), unit(), unit(), unit()].prop_map(DiagnosticVector::from_array)
}

fn dataset() -> impl Strategy<Value = Vec<([f64; 5], bool)>> {
    proptest::collection::vec(
        ([unit(), unit(), unit(), unit(), unit()], any::<bool>()),
        4..40,
    )
}

fn labeled(rows: &[([f64; 5], bool)]) -> CalibrationDataset {
    let mut d = CalibrationDataset::default();
    for (x, y) in rows {
        d.push(DiagnosticVector::from_array(*x), *y);
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pava_matches_minmax(ys in proptest::collection::vec(unit(), 1..60)) {
        let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, y)| (i as f64, *y)).collect();
        let map = fit_isotonic(&pts);
        let want = isotonic_minmax(&ys);
        for (i, w) in want.iter().enumerate() {
            prop_assert!((map.eval(i as f64) - w).abs() < 1e-9);
        }
    }

    #[test]
    fn isotonic_map_is_monotone(pts in proptest::collection::vec((-5.0f64..5.0, unit()), 1..50), a in -6.0f64..6.0, b in -6.0f64..6.0) {
        let map = fit_isotonic(&pts);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(map.eval(lo) <= map.eval(hi));
        prop_assert!((0.0..=1.0).contains(&map.eval(lo)));
    }

    #[test]
    fn gradient_matches_central_differences(rows in dataset(), theta in [-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0], lambda in 0.0f64..1.0) {
        let data = labeled(&rows);
        let (loss, g) = loss_and_grad(&theta, &data.rows, lambda);
        prop_assert!((loss - logistic_loss(&theta, &rows, lambda)).abs() < 1e-9);
        let h = 1e-5;
        for j in 0..6 {
            let mut up = theta;
            let mut dn = theta;
            up[j] += h;
            dn[j] -= h;
            let fd = (logistic_loss(&up, &rows, lambda) - logistic_loss(&dn, &rows, lambda)) / (2.0 * h);
            prop_assert!((g[j] - fd).abs() <= 1e-6 * fd.abs().max(1.0), "j={} g={} fd={}", j, g[j], fd);
        }
    }

    #[test]
    fn z_is_a_probability(s in vector(), w0 in -10.0f64..10.0, w in [-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0]) {
        let m = ScoreModel { weights: Weights { w0, w, lambda: 0.0, fit_meta: None }, ..ScoreModel::default() };
        let z = m.z(&s);
        prop_assert!((0.0..=1.0).contains(&z));
    }

    #[test]
    fn escalation_is_monotone_in_tau(z in unit(), t1 in unit(), t2 in unit(), k in 1usize..8, r in 1usize..8, passed in any::<bool>()) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        if decide(z, lo, k, r, passed, false).escalates() {
            prop_assert!(decide(z, hi, k, r, passed, false).escalates());
        }
    }

    #[test]
    fn diagnostics_stay_in_unit_range(
        lint in 0usize..200, l_lint in 1usize..100,
        used in 0usize..20, r in 1usize..20,
        bits in proptest::collection::vec(any::<bool>(), 1..100),
        c1 in 0usize..500, c2 in 0usize..500, same in any::<bool>(), dt in 1usize..128,
    ) {
        prop_assert!((0.0..=1.0).contains(&lint_signal(lint, l_lint)));
        prop_assert!((0.0..=1.0).contains(&budget_signal(used, r)));
        prop_assert!((0.0..=1.0).contains(&smoke_signal(&bits).unwrap()));
        let a = FailurePoint::new("y", c1);
        let b = FailurePoint::new(if same { "y" } else { "q" }, c2);
        let t = trace_signal(Some(&a), Some(&b), dt);
        prop_assert!((0.0..=1.0).contains(&t));
        // Symmetric in the two cycles.
        let a2 = FailurePoint::new("y", c2);
        let b2 = FailurePoint::new(if same { "y" } else { "q" }, c1);
        prop_assert_eq!(t, trace_signal(Some(&a2), Some(&b2), dt));
    }

    #[test]
    fn nearest_rank_matches_scan(mut xs in proptest::collection::vec(-100.0f64..100.0, 1..40), p in 1usize..=100) {
        let want = nearest_rank_scan(&xs, p);
        xs.sort_by(f64::total_cmp);
        prop_assert_eq!(nearest_rank(&xs, p), want);
    }

    #[test]
    fn ranking_puts_compiling_first(c in proptest::collection::vec((any::<bool>(), unit(), 0usize..5), 1..20)) {
        let diags: Vec<CandidateDiag> = c.iter().enumerate().map(|(i, (ok, s, l))| CandidateDiag {
            id: i as u32, s_comp: if *ok { 1.0 } else { 0.0 }, smoke_fraction: *s, lint_count: *l,
        }).collect();
        let ranked = rank_candidates(&diags);
        prop_assert_eq!(ranked.len(), diags.len());
        for w in ranked.windows(2) {
            let key = |d: &CandidateDiag| (d.s_comp, d.smoke_fraction, -(d.lint_count as f64), -(d.id as f64));
            prop_assert!(key(&w[0]) >= key(&w[1]));
        }
    }
}

#[test]
fn pass_at_k_matches_enumeration() {
    for f in 1..=12 {
        for c in 0..=f {
            for k in 1..=f {
                let got = pass_at_k(f, c, k).unwrap();
                let want = pass_at_k_enumerated(f, c, k);
                assert!(
                    (got - want).abs() < 1e-12,
                    "f={f} c={c} k={k}: {got} vs {want}"
                );
            }
        }
    }
    assert!((pass_at_k(10, 3, 5).unwrap() - 11.0 / 12.0).abs() < 1e-12);
}

#[test]
fn latency_stats_on_a_grid() {
    let s = latency_stats(&[3.0, 1.0, 2.0, 4.0]).unwrap();
    assert_eq!((s.median, s.mean, s.p90, s.p95), (2.0, 2.5, 4.0, 4.0));
}

#[test]
fn decide_truth_table() {
    use DecisionKind::*;
    for passed in [false, true] {
        for below in [false, true] {
            for exhausted in [false, true] {
                for escalated in [false, true] {
                    let z = if below { 0.2 } else { 0.8 };
                    let k = if exhausted { 5 } else { 2 };
                    let d = decide(z, 0.5, k, 5, passed, escalated);
                    let want = if passed {
                        Accept
                    } else if escalated {
                        Terminate
                    } else if below || exhausted {
                        EscalateStageB
                    } else {
                        RetryStageA
                    };
                    assert_eq!(d.kind, want, "{passed} {below} {exhausted} {escalated}");
                }
            }
        }
    }
    assert_eq!(decide(0.5, 0.5, 1, 5, false, false).kind, RetryStageA);
}

#[test]
fn separable_data_is_fit_exactly() {
    let mut d = CalibrationDataset::default();
    for i in 0..40 {
        let x = i as f64 / 39.0;
        d.push(
            DiagnosticVector::from_array([1.0, 1.0, x, 0.5, 0.6]),
            x > 0.5,
        );
    }
    let m = calibrate(&d, Some(1e-4)).unwrap();
    for r in &d.rows {
        let p = logistic(m.weights.linear(&r.s));
        assert_eq!(p >= 0.5, r.label);
    }
    // Cross-validated λ picks a grid value.
    let auto = calibrate(&d, None).unwrap();
    assert!(LAMBDA_GRID.contains(&auto.weights.lambda));
}

#[test]
fn degenerate_labels_are_rejected() {
    let mut d = CalibrationDataset::default();
    d.push(DiagnosticVector::from_array([1.0; 5]), true);
    assert!(calibrate(&d, None).is_err());
}

#[test]
fn trace_signal_values() {
    let y = |c| FailurePoint::new("y", c);
    assert_eq!(trace_signal(None, None, 64), 0.5);
    assert_eq!(trace_signal(Some(&y(3)), None, 64), 0.5);
    assert_eq!(trace_signal(Some(&y(10)), Some(&y(10)), 64), 1.0);
    assert_eq!(trace_signal(Some(&y(0)), Some(&y(64)), 64), 0.5);
    assert_eq!(
        trace_signal(Some(&FailurePoint::new("q", 0)), Some(&y(500)), 64),
        0.0
    );
    assert!((trace_signal(Some(&y(0)), Some(&y(32)), 64) - 0.75).abs() < 1e-12);
    let mut h = TraceHistory::default();
    assert_eq!(h.observe(None, 64), 0.5);
    assert_eq!(h.observe(Some(&y(5)), 64), 0.5);
    assert_eq!(h.observe(Some(&y(5)), 64), 1.0);
    assert_eq!(h.observe(None, 64), 1.0);
}

#[test]
fn sweep_escalations_grow_with_tau() {
    let t = Trajectory {
        task: "t".into(),
        r: 5,
        stage_a: [0.9, 0.6, 0.4, 0.2, 0.1]
            .iter()
            .map(|&z| AttemptRecord {
                z,
                time_s: 10.0,
                passed: false,
            })
            .collect(),
        stage_b: Some(StageBRecord {
            time_s: 15.0,
            passed: true,
        }),
    };
    let rows = sweep_tau(&[t], &[0.3, 0.5, 0.7]).unwrap();
    let a: Vec<usize> = rows.iter().map(|r| r.escalations).collect();
    assert!(a.windows(2).all(|w| w[0] <= w[1]));
    let times: Vec<f64> = rows.iter().map(|r| r.mean_time_s).collect();
    assert_eq!(times, vec![55.0, 45.0, 35.0]);
    assert!(sweep_tau(&[], &[0.5]).is_err());
    assert!(matches!(
        sweep_tau(&rows_to_traj(), &[1.5]),
        Err(SweepError::TauOutOfRange(_))
    ));
}

fn rows_to_traj() -> Vec<Trajectory> {
    vec![Trajectory {
        task: "t".into(),
        r: 1,
        stage_a: vec![],
        stage_b: None,
    }]
}
