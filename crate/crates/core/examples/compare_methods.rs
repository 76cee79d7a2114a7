//! Paired comparison of two configurations with a sign test, as `kgd compare`
//! does with config files.

use kgd::harness::{compare, parse_config_str};

const BASE: &str = "
problem = sinbowl
steps = 500
seeds = 0,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19
alpha = 0.1
";

fn main() -> kgd::Result<()> {
    let a = parse_config_str(&format!("{BASE}method = kgd"))?.to_config()?;
    let b = parse_config_str(&format!("{BASE}method = sgd"))?.to_config()?;
    let report = compare(&a, &b, -0.5)?;
    report.write_csv(std::io::stdout())?;
    println!(
        "kgd better on {}, sgd better on {}, ties {}; two-sided sign test p = {:.4}",
        report.a_better, report.b_better, report.ties, report.sign_test_p
    );
    Ok(())
}
