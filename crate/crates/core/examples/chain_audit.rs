//! Export a run's ledger, verify it, then flip one byte and see which block
//! the verifier blames.
//!
//!     cargo run --release --example chain_audit

use stakefl::experiment::{run_experiment, ExperimentSpec};
use stakefl::ledger::{conservation_residual, export_chain, verify_chain, verify_chain_file};

fn main() -> stakefl::Result<()> {
    let spec = ExperimentSpec {
        rounds: 30,
        ..ExperimentSpec::default()
    };
    let out = run_experiment(&spec, 7)?;
    let chain = &out.chain;
    println!(
        "{} blocks, head {}, in-memory valid: {}, conservation residual {:e}",
        chain.len(),
        chain.head().map(|b| b.hash.to_hex()).unwrap_or_default(),
        verify_chain(chain).valid,
        conservation_residual(chain)
    );

    let dir = tempfile::tempdir().map_err(|e| stakefl::Error::io(std::env::temp_dir(), e))?;
    let path = dir.path().join("chain.jsonl");
    export_chain(chain, &path)?;
    println!("fresh file: {:?}", verify_chain_file(&path)?);

    let mut bytes = std::fs::read(&path).map_err(|e| stakefl::Error::io(&path, e))?;
    let target = bytes.len() * 2 / 3;
    bytes[target] ^= 0x04;
    std::fs::write(&path, &bytes).map_err(|e| stakefl::Error::io(&path, e))?;
    println!("after flipping byte {target}: {:?}", verify_chain_file(&path)?);
    Ok(())
}
