//! Frozen-set construction, compression and decompression of a sticky
//! two-state source, with the aux and stream files written to a temp dir.
use hmm_polar::codec::{
    compress, fast_decompress, preprocess, AuxInfo, CompressedStream, Epsilon, PreprocessConfig,
    SourceMatrix,
};
use hmm_polar::field::KernelMatrix;
use hmm_polar::hmm::presets;
use hmm_polar::transform::TransformPlan;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let source = presets::two_state_sticky(2, 0.95, 0.05)?;
    let plan = TransformPlan::new(KernelMatrix::arikan(2)?, 6)?;
    let eps = Epsilon::new(1, 10)?;
    let m = plan.len();

    let aux = preprocess(&source, &plan, eps, &PreprocessConfig::defaults(m, eps, 1))?;
    println!(
        "n = {}, kept {} symbols (rate {:.3}), estimated entropy rate {:.3}",
        aux.block_len(),
        aux.compressed_len(),
        aux.compressed_len() as f64 / aux.block_len() as f64,
        aux.estimated_rate()
    );
    for j in [0, m / 4, m / 2, aux.decoded_rows() - 1] {
        println!("  row {j:2}: |S_j| = {}", aux.row_set(j).len());
    }

    let dir = std::env::temp_dir().join("hmm-polar-example");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("aux.phmm"), aux.to_bytes())?;

    let mut exact = 0;
    for seed in 0..20 {
        let (seq, _) = source.sample(m * m, 100 + seed);
        let stream = compress(&aux, &SourceMatrix::reshape(&seq, m)?)?;
        std::fs::write(dir.join("z.phmc"), stream.to_bytes())?;

        let aux = AuxInfo::from_bytes(&std::fs::read(dir.join("aux.phmm"))?)?;
        let stream = CompressedStream::from_bytes(&std::fs::read(dir.join("z.phmc"))?)?;
        exact += usize::from(fast_decompress(&source, &aux, &stream)?.flatten() == seq);
    }
    println!("{exact}/20 sequences reconstructed exactly");
    Ok(())
}
