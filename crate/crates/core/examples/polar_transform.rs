//! The Kronecker-power transform and its inverse.
use hmm_polar::field::KernelMatrix;
use hmm_polar::hmm::presets;
use hmm_polar::transform::TransformPlan;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plan = TransformPlan::new(KernelMatrix::arikan(3)?, 3)?;
    let z: Vec<u8> = (0..plan.len() as u8).map(|i| i % 3).collect();
    let u = plan.polar_transform(&z)?;
    println!("z = {z:?}\nu = {u:?}");
    assert_eq!(plan.polar_inverse(&u)?, z);

    // one ternary row of a large plan
    let big = TransformPlan::new(KernelMatrix::arikan(3)?, 12)?;
    let (row, _) = presets::iid_uniform(3, 1)?.sample(big.len(), 1);
    let start = std::time::Instant::now();
    let u = big.polar_transform(&row)?;
    let back = big.polar_inverse(&u)?;
    println!(
        "m = {}: forward + inverse in {:.2?}, round trip ok = {}",
        big.len(),
        start.elapsed(),
        back == row
    );
    Ok(())
}
