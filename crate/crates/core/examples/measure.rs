use levydd::validation::{run, ValidationOptions};

fn main() {
    let opts = ValidationOptions::default();
    let mut all = true;
    for r in run(&opts) {
        all &= r.passed;
        println!("criterion {:>2} [{}] {:>8.2}s  {}", r.id, if r.passed { "PASS" } else { "FAIL" }, r.seconds, r.detail);
    }
    println!("ALL: {}", if all { "PASS" } else { "FAIL" });
}
