//! Entropy-rate estimates for the built-in presets.
use hmm_polar::hmm::presets;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sources = [
        (
            "two-state sticky, q=2",
            presets::two_state_sticky(2, 0.95, 0.05)?,
        ),
        (
            "two-state sticky, q=5",
            presets::two_state_sticky(5, 0.95, 0.05)?,
        ),
        ("iid uniform, q=3", presets::iid_uniform(3, 2)?),
        ("deterministic, q=2", presets::deterministic(2, 4, 1)?),
        (
            "random stochastic, q=3, 4 states",
            presets::random_stochastic(3, 4, 1)?,
        ),
        (
            "random sticky, q=2, 8 states",
            presets::random_sticky(2, 8, 0.95, 1)?,
        ),
    ];
    for (name, source) in &sources {
        let h = source.entropy_rate_estimate(16_384, 8, 42);
        println!("{name:36} {h:.4} q-ary symbols per symbol");
    }
    Ok(())
}
