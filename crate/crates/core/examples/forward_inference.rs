//! Sampling a hidden Markov source and filtering it, incrementally and from
//! scratch.
use hmm_polar::hmm::presets;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let source = presets::two_state_sticky(2, 0.95, 0.05)?;
    let (symbols, path) = source.sample(24, 7);
    println!(
        "states:  {}",
        path.iter().map(|s| s.to_string()).collect::<String>()
    );
    println!(
        "symbols: {}",
        symbols.iter().map(|s| s.to_string()).collect::<String>()
    );

    let mut belief = source.initial_belief();
    for (n, &y) in symbols.iter().enumerate() {
        let next = source.predictive(&belief)?;
        let direct = source.forward_infer(n + 1, &symbols[..n])?;
        assert_eq!(next, direct);
        println!(
            "t={n:2} P(Z=1 | prefix)={:.4}  observed {y}  belief={:.4?}",
            next.probs()[1],
            belief.probs()
        );
        belief = source.belief_update(&belief, y)?;
    }
    println!(
        "log-loss of this sample: {:.4} symbols/symbol",
        source.log_loss(&symbols)?
    );
    Ok(())
}
