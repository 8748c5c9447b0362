use tmcmc::verify::{all_ok, run_suite, summary_table, Suite, SuiteOptions};

#[test]
fn full_suite_passes_and_controls_fail() {
    let v = run_suite(Suite::All, &SuiteOptions::default()).unwrap();
    println!("{}", summary_table(&v));
    assert!(all_ok(&v), "{}", summary_table(&v));
    assert!(v.iter().any(|x| x.expected_failure));
}

#[test]
fn corrupted_acceptance_is_reported() {
    let opts = SuiteOptions {
        corrupt_acceptance: true,
        ..SuiteOptions::default()
    };
    let v = run_suite(Suite::Continuous, &opts).unwrap();
    assert!(!all_ok(&v));
}

#[test]
fn verdicts_are_deterministic() {
    let a = run_suite(Suite::Reachability, &SuiteOptions::default()).unwrap();
    let b = run_suite(Suite::Reachability, &SuiteOptions::default()).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
