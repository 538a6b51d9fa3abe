//! Acceptance report: one PASS/FAIL/SKIP line per criterion. Exits non-zero
//! if any criterion fails.

mod support;

use support::criteria::{all, Outcome};

fn main() {
    let mut failed = 0;
    for (name, run) in all() {
        let (tag, detail) = match run() {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} {name}: {detail}");
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
