use tenonos_bench::*;
use tenonos_core::CostProfile;

fn tenon() -> BenchOptions {
    BenchOptions::new(CostProfile::bundled("tenon-paper").unwrap())
}

fn one_row_suite() -> BenchmarkSuite {
    BenchmarkSuite::from_json(
        r#"{"name":"one","scenarios":[{"name":"irq","workload":{"kind":"interrupt","count":4},
            "metrics":["irq_mean"],"reference":{"irq_mean":"fig8/interrupt/tenon"}}]}"#,
    )
    .unwrap()
}

#[test]
fn one_row_gives_header_plus_one_line() {
    let report = run_bench(&one_row_suite(), &ReferenceData::bundled(), &tenon()).unwrap();
    let csv = report.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines, ["scenario,metric,simulated,reference,source", "irq,irq_mean,208,208,Fig. 8"]);
}

#[test]
fn csv_parses_back_to_the_same_report() {
    let report = run_bench(&BenchmarkSuite::bundled("table3").unwrap(), &ReferenceData::bundled(), &tenon()).unwrap();
    assert_eq!(Report::from_csv(&report.to_csv()).unwrap(), report);
}

#[test]
fn missing_reference_renders_as_na() {
    let suite = BenchmarkSuite::from_json(
        r#"{"name":"s","scenarios":[{"name":"t","workload":{"kind":"interrupt","count":2},"metrics":["total_cycles"]}]}"#,
    )
    .unwrap();
    let report = run_bench(&suite, &ReferenceData::bundled(), &tenon()).unwrap();
    assert!(report.to_csv().lines().nth(1).unwrap().ends_with(",n/a,n/a"));
    assert_eq!(Report::from_csv(&report.to_csv()).unwrap().rows[0].reference, None);
}

#[test]
fn empty_report_needs_allow_empty() {
    let suite = BenchmarkSuite::from_json(r#"{"name":"empty"}"#).unwrap();
    let report = run_bench(&suite, &ReferenceData::bundled(), &tenon()).unwrap();
    assert!(report.is_empty());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    assert!(matches!(report.emit_csv(&path, false), Err(BenchError::EmptyReport)));
    assert!(!path.exists());
    report.emit_csv(&path, true).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "scenario,metric,simulated,reference,source\n");
}

#[test]
fn bundled_reference_values() {
    let refs = ReferenceData::bundled();
    assert_eq!(refs.lookup("table4", "preemption", "tenon-ectx").map(|e| e.value), Some(877.0));
    assert_eq!(refs.lookup("table3", "zephyr", "100").map(|e| e.value), Some(1380.0));
    assert_eq!(refs.lookup("table5", "mortise-tenon-2core", "interrupt").map(|e| e.value), Some(1014.0));
    assert_eq!(refs.get("table2/tenonos-linux/hyp-init").map(|e| e.unit.as_str()), Some("seconds"));
    assert!(refs.get("table2/tenonos-bare/hyp-init").is_none());
}

#[test]
fn reference_data_rejects_duplicates() {
    let e = r#"{"suite":"a","row":"b","column":"c","value":1,"source":"x"}"#;
    assert!(ReferenceData::from_json(&format!(r#"{{"entries":[{e},{e}]}}"#)).is_err());
    assert!(ReferenceData::from_json(&format!(r#"{{"entries":[{e}]}}"#)).is_ok());
}

#[test]
fn ectx_costs_at_least_as_much_as_plain_switches() {
    let report = run_bench(&BenchmarkSuite::bundled("table3").unwrap(), &ReferenceData::bundled(), &tenon()).unwrap();
    for n in [2, 10, 20, 50, 100] {
        let on = report.row(&format!("switch-{n}-ectx"), "switch_mean").unwrap().simulated;
        let off = report.row(&format!("switch-{n}-noectx"), "switch_mean").unwrap().simulated;
        assert!(on >= off, "{n}: {on} < {off}");
    }
}

#[test]
fn suite_checks() {
    let dup = r#"{"name":"d","scenarios":[
        {"name":"a","workload":{"kind":"interrupt","count":1},"metrics":["total_cycles"]},
        {"name":"a","workload":{"kind":"interrupt","count":1},"metrics":["total_cycles"]}]}"#;
    assert!(matches!(BenchmarkSuite::from_json(dup), Err(BenchError::SuiteParse(_))));
    let both = r#"{"name":"b","scenarios":[{"name":"a","metrics":[]}]}"#;
    assert!(matches!(BenchmarkSuite::from_json(both), Err(BenchError::SuiteParse(_))));
    let metric = r#"{"name":"m","scenarios":[{"name":"a","workload":{"kind":"interrupt","count":1},"metrics":["speed"]}]}"#;
    assert!(matches!(BenchmarkSuite::from_json(metric), Err(BenchError::UnknownMetric { .. })));
    let unknown_ref = r#"{"name":"r","scenarios":[{"name":"a","workload":{"kind":"interrupt","count":1},
        "metrics":["irq_mean"],"reference":{"irq_mean":"fig8/interrupt/vxworks"}}]}"#;
    let suite = BenchmarkSuite::from_json(unknown_ref).unwrap();
    let err = run_bench(&suite, &ReferenceData::bundled(), &tenon()).unwrap_err();
    assert!(matches!(err, BenchError::UnknownReference(_)));
    assert_eq!(err.exit_code(), EXIT_INPUT);
}

#[test]
fn metric_without_samples_is_a_run_failure() {
    let suite = BenchmarkSuite::from_json(
        r#"{"name":"s","scenarios":[{"name":"t","workload":{"kind":"interrupt","count":2},"metrics":["preempt_mean"]}]}"#,
    )
    .unwrap();
    let err = run_bench(&suite, &ReferenceData::bundled(), &tenon()).unwrap_err();
    assert!(matches!(err, BenchError::MissingMetric { .. }));
    assert_eq!(err.exit_code(), EXIT_FAILURE);
}

#[test]
fn file_entries_resolve_relative_to_the_suite() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = tenonos_rt::workloads::thread_switch(2, false, 4);
    std::fs::write(dir.path().join("s.json"), serde_json::to_string(&scenario).unwrap()).unwrap();
    std::fs::write(
        dir.path().join("suite.json"),
        r#"{"name":"f","scenarios":[{"name":"from-file","file":"s.json","metrics":["switches"]}]}"#,
    )
    .unwrap();
    let suite = BenchmarkSuite::load(dir.path().join("suite.json").to_str().unwrap()).unwrap();
    let report = run_bench(&suite, &ReferenceData::bundled(), &tenon()).unwrap();
    assert!(report.row("from-file", "switches").unwrap().simulated > 0.0);
}

#[test]
fn seeds_change_only_seeded_workloads() {
    let suite = BenchmarkSuite::bundled("full").unwrap();
    let refs = ReferenceData::bundled();
    let a = run_bench(&suite, &refs, &tenon()).unwrap();
    let b = run_bench(&suite, &refs, &BenchOptions { seed: 9, ..tenon() }).unwrap();
    assert_eq!(a.row("irq-tenon", "irq_mean"), b.row("irq-tenon", "irq_mean"));
    assert_eq!(a.len(), b.len());
}

#[test]
fn every_bundled_suite_runs() {
    for name in BenchmarkSuite::bundled_names() {
        let report = run_bench(&BenchmarkSuite::bundled(name).unwrap(), &ReferenceData::bundled(), &tenon()).unwrap();
        assert!(!report.is_empty(), "{name}");
    }
}
