use singlecopy_core::{run_verification, SuiteStatus, VerifyOptions};

#[test]
fn default_seed_passes_every_suite() {
    let report = run_verification(&VerifyOptions {
        seed: 42,
        inject_corrupt_gram: false,
    });
    for s in &report.suites {
        assert_eq!(s.status, SuiteStatus::Passed, "{s:?}");
        assert!(s.instances > 0);
    }
    assert!(report.suites.len() >= 10);
    assert!(report.passed);
}

#[test]
fn reports_are_reproducible() {
    let opts = VerifyOptions {
        seed: 7,
        inject_corrupt_gram: false,
    };
    let a = serde_json::to_string(&run_verification(&opts)).unwrap();
    let b = serde_json::to_string(&run_verification(&opts)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn corrupted_gram_is_a_precondition_failure() {
    let report = run_verification(&VerifyOptions {
        seed: 42,
        inject_corrupt_gram: true,
    });
    assert!(!report.passed);
    let failing: Vec<_> = report
        .suites
        .iter()
        .filter(|s| s.status != SuiteStatus::Passed)
        .collect();
    assert_eq!(failing.len(), 1);
    assert_eq!(failing[0].name, "frobenius_permanent_bound");
    assert_eq!(failing[0].status, SuiteStatus::PreconditionViolated);
}
