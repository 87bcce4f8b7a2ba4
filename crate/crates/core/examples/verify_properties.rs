//! Run the built-in property checks with a few trials each.

use regkit::verify::{run_checks, VerifyOptions};

fn main() -> regkit::Result<()> {
    let results = run_checks(&VerifyOptions { trials: Some(3), ..VerifyOptions::default() })?;
    for r in &results {
        println!("{r}");
    }
    Ok(())
}
