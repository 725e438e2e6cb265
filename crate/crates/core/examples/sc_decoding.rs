//! Successive-cancellation decoding, and the polarization it exposes.
use hmm_polar::decoder::{sc_decode, sc_scan, PartialVector, PriorProfile};
use hmm_polar::field::KernelMatrix;
use hmm_polar::hmm::SymbolDistribution;
use hmm_polar::transform::TransformPlan;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|x| x * x.log2())
        .sum::<f64>()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plan = TransformPlan::new(KernelMatrix::arikan(2)?, 10)?;
    let m = plan.len();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // every Z_i is 1 with probability 0.11, so H(Z_i) is about 0.5 bits
    let prior = PriorProfile::from_distributions(&vec![SymbolDistribution(vec![0.89, 0.11]); m]);
    let z: Vec<u8> = (0..m).map(|_| u8::from(rng.gen_bool(0.11))).collect();

    let conds = sc_scan(&plan, &prior, &z)?;
    let h: Vec<f64> = conds.iter().map(|c| entropy(c.probs())).collect();
    let low = h.iter().filter(|&&x| x < 0.01).count();
    let high = h.iter().filter(|&&x| x > 0.99).count();
    println!(
        "m = {m}: {low} positions below 0.01 bits, {high} above 0.99, {} in between",
        m - low - high
    );

    // keep the unreliable half, let the decoder recover the rest
    let u_true = plan.polar_transform(&z)?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| h[b].total_cmp(&h[a]));
    let mut u = vec![None; m];
    for &p in &order[..m * 6 / 10] {
        u[p] = Some(u_true[p]);
    }
    let (z_hat, _) = sc_decode(&plan, &prior, &PartialVector::new(u))?;
    println!(
        "stored {} of {m} symbols, exact recovery = {}",
        m * 6 / 10,
        z_hat == z
    );
    Ok(())
}
