//! The baseline and the belief-caching decompressor on the same streams.
use std::time::Instant;

use hmm_polar::codec::{
    baseline_decompress, compress, fast_decompress, preprocess, Epsilon, PreprocessConfig,
    SourceMatrix,
};
use hmm_polar::field::KernelMatrix;
use hmm_polar::hmm::presets;
use hmm_polar::transform::TransformPlan;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let source = presets::random_sticky(3, 6, 0.9, 5)?;
    let plan = TransformPlan::new(KernelMatrix::arikan(3)?, 5)?;
    let eps = Epsilon::new(1, 8)?;
    let m = plan.len();
    let mut config = PreprocessConfig::defaults(m, eps, 2);
    config.trials = 100;
    let aux = preprocess(&source, &plan, eps, &config)?;

    for seed in 0..5 {
        let (seq, _) = source.sample(m * m, seed);
        let z = SourceMatrix::reshape(&seq, m)?;
        let stream = compress(&aux, &z)?;
        let t0 = Instant::now();
        let slow = baseline_decompress(&source, &aux, &stream)?;
        let t1 = Instant::now();
        let fast = fast_decompress(&source, &aux, &stream)?;
        let t2 = Instant::now();
        println!(
            "seed {seed}: identical = {}, exact = {}, baseline {:.2?}, fast {:.2?}",
            slow == fast,
            fast == z,
            t1 - t0,
            t2 - t1
        );
    }
    Ok(())
}
