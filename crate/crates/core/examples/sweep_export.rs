//! A multi-seed sweep written to disk: per-seed chain, round, token and
//! survival files plus a cross-seed aggregate, exactly as `stakefl simulate`
//! lays them out.
//!
//!     cargo run --release --example sweep_export [out_dir]

use std::path::PathBuf;

use stakefl::experiment::{run_seeds, summary_line, write_aggregate, write_run, ExperimentSpec};

fn main() -> stakefl::Result<()> {
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("stakefl-sweep"));
    let spec = ExperimentSpec {
        eta: 0.3,
        rounds: 100,
        seeds: vec![1, 2, 3, 4, 5],
        output_dir: Some(root.clone()),
        ..ExperimentSpec::default()
    };
    let mut outputs = Vec::new();
    for (_, out) in run_seeds(&spec) {
        let out = out?;
        for p in write_run(&spec, &out, &root)? {
            println!("wrote {}", p.display());
        }
        println!("{}", summary_line(&spec, &out));
        outputs.push(out);
    }
    let refs: Vec<_> = outputs.iter().collect();
    println!("wrote {}", write_aggregate(&spec, &refs, &root)?.display());
    Ok(())
}
