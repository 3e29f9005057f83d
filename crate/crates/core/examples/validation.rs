//! Runs a named validation suite (default: all) and prints its tables.

use coadjoint::diagnostics::format_table;
use coadjoint::suites::{run, SuiteConfig};

fn main() -> coadjoint::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "all".into());
    for rep in run(&name, SuiteConfig::default())? {
        println!("== {} ({})", rep.name, if rep.passed() { "pass" } else { "FAIL" });
        print!("{}", format_table(&rep.rows));
    }
    Ok(())
}
