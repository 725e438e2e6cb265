//! Decompression time as n grows by 4x per step, for a 16-state source.
use hmm_polar::cli::{bench, BenchConfig};
use hmm_polar::codec::Epsilon;
use hmm_polar::field::KernelMatrix;
use hmm_polar::hmm::presets;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let source = presets::random_sticky(2, 16, 0.9, 11)?;
    let config = BenchConfig {
        sizes: vec![5, 6, 7],
        runs: 5,
        seed: 3,
        epsilon: Epsilon::new(1, 10)?,
        trials: Some(64),
        rule: None,
    };
    let report = bench(&source, &KernelMatrix::arikan(2)?, &config)?;
    print!("{}", report.table("\t"));
    for r in report.ratios() {
        println!(
            "n {} -> {}: baseline x{:.2}, fast x{:.2}",
            r.n_from, r.n_to, r.baseline, r.fast
        );
    }
    Ok(())
}
