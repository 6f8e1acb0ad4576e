//! Monte-Carlo check of a dishonest voter's expected return against the
//! closed form -(ln 0.5 + 1) * gamma_v.
//!
//!     cargo run --release --example theorem_check

use stakefl::analysis::{mc_expected_return, TheoremParams};

fn main() -> stakefl::Result<()> {
    println!("{:>8} {:>12} {:>12} {:>10} {:>6}", "gamma_v", "estimate", "closed", "z", "ok");
    for gamma_v in [2.0, 4.0, 8.0, 16.0, 32.0] {
        let r = mc_expected_return(&TheoremParams {
            gamma_v,
            n_samples: 1_000_000,
            seed: 0,
        })?;
        let z = (r.estimate - r.closed_form) / r.std_error;
        println!(
            "{gamma_v:>8} {:>12.5} {:>12.5} {z:>10.2} {:>6}",
            r.estimate,
            r.closed_form,
            r.within(3.0)
        );
    }
    Ok(())
}
