//! Randomized property suite with a reduced instance count.

use lqgame::verify::{all_pass, run_property_suite, summary_table, SuiteOptions};

fn main() {
    let opts = SuiteOptions {
        instances: 8,
        ..Default::default()
    };
    let reports = run_property_suite(0, &opts);
    print!("{}", summary_table(&reports));
    for r in reports.iter().filter(|r| !r.pass) {
        println!("failed: {} on {} {:?}", r.check, r.instance, r.margins);
    }
    std::process::exit(if all_pass(&reports) { 0 } else { 1 });
}
