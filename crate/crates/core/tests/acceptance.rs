//! Acceptance suite: runs every validation criterion at full scale and
//! prints one line per criterion. `cargo test --test acceptance` is the
//! canonical gate; the CLI command `levydd validate` drives the same code.

use levydd::validation::{run, ValidationOptions};

#[test]
fn acceptance_criteria() {
    let opts = ValidationOptions::default();
    let results = run(&opts);
    assert_eq!(results.len(), 12, "expected all twelve criteria to run");
    let mut all = true;
    for r in &results {
        println!(
            "criterion {:>2} [{}] {:<45} {:>8.2}s  {}",
            r.id,
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.seconds,
            r.detail
        );
        all &= r.passed;
    }
    assert!(all, "acceptance criteria failed; see the lines above");
}
