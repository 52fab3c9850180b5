//! Acceptance criteria, run in order on one thread so the timed criteria
//! measure the computation alone. Each criterion prints one line, written
//! past the test harness's capture so it shows in every run.

use std::io::Write;

use gammaflow_cli::criteria::all_criteria;

#[test]
fn acceptance_criteria() {
    let outcomes = all_criteria();
    let mut out = std::io::stdout().lock();
    writeln!(out).unwrap();
    for c in &outcomes {
        writeln!(out, "{}", c.line()).unwrap();
    }
    let passed = outcomes.iter().filter(|c| c.passed).count();
    writeln!(out, "acceptance: {passed}/{} criteria passed", outcomes.len()).unwrap();
    drop(out);

    assert_eq!(outcomes.len(), 12);
    let failed: Vec<String> = outcomes.iter().filter(|c| !c.passed).map(|c| format!("{} ({})", c.id, c.name)).collect();
    assert!(failed.is_empty(), "failed criteria: {}", failed.join(", "));
}
